#include <doctest.h>

#include "affbench/agents.hpp"
#include "affbench/error.hpp"
#include "affbench/metrics.hpp"
#include "affbench/synth.hpp"
#include "test_support.hpp"

using namespace affbench;
using testing_support::toy_kb;
using testing_support::toy_task;

namespace {

/// Drives one agent through one session to a terminal state.
env::Transcript drive(agents::Agent& agent, const taskset::Task& task,
                      const kb::KnowledgeBase& kb, env::SessionConfig config = {}) {
  env::Session session(task, kb, config);
  while (session.status() == env::Status::Running) {
    auto view = env::render_messages(session, config.image_policy);
    session.step_text(agent.next(task, view).raw_text);
  }
  return env::finalize(session);
}

}  // namespace

TEST_CASE("the oracle run answers gold in exactly |E| + parts + 1 turns") {
  agents::OracleAgent oracle(toy_kb());
  env::Transcript t = drive(oracle, toy_task(), toy_kb());
  CHECK(t.status == env::Status::Answered);
  CHECK(t.turns() == 3 + 2 + 1);
  REQUIRE(t.final_action);
  const auto& answer = std::get<env::AnswerAction>(t.final_action->op);
  CHECK(answer.answer_entity == "shower rod");
  CHECK(answer.answer_part == "end_pads");

  metrics::PerTaskMetrics m = metrics::score_task(toy_task(), t);
  CHECK(m.gold_correct);
  CHECK(!m.repeated_entity);
  CHECK(!m.repeated_part);
  CHECK(m.part_sim_density == 1.0);
}

TEST_CASE("a three-entity task with four relevant parts takes eight oracle turns") {
  taskset::Task task = toy_task();
  task.similar_map["microfiber towel"] = {"pile_surface", "hem_edge"};
  task.similar_map["house key"] = {"serrated_edge"};
  agents::OracleAgent oracle(toy_kb());
  env::Transcript t = drive(oracle, task, toy_kb());
  CHECK(t.turns() == 3 + 4 + 1);
  CHECK(t.status == env::Status::Answered);
}

TEST_CASE("oracle turn count matches the stack arithmetic on generated tasks") {
  kb::KnowledgeBase kb = synth::generate_kb(17, {10, 2, 4, 0.6, false});
  auto tasks = synth::generate_tasks(kb, 3, {8, 3, false});
  agents::OracleAgent oracle(kb);
  for (const auto& task : tasks) {
    env::Transcript t = drive(oracle, task, kb);
    CHECK(t.status == env::Status::Answered);
    CHECK(t.turns() == int(task.entity_names.size() + task.total_similar_parts() + 1));
    metrics::PerTaskMetrics m = metrics::score_task(task, t);
    CHECK(m.gold_correct);
    CHECK(!m.repeated_entity);
    CHECK(!m.repeated_part);
    // Every relevant part visited exactly once.
    CHECK(m.distinct_parts == int(task.total_similar_parts()));
  }
}

TEST_CASE("oracle output is a pure function of task and view") {
  agents::OracleAgent oracle(toy_kb());
  env::Session session(toy_task(), toy_kb(), {});
  auto view = env::render_messages(session, env::ImagePolicy::LastImage);
  CHECK(oracle.next(toy_task(), view).raw_text == oracle.next(toy_task(), view).raw_text);
}

TEST_CASE("the random agent emits well-formed actions and is seed-stable") {
  agents::RandomAgent agent(7);
  env::Session session(toy_task(), toy_kb(), {});
  auto view = env::render_messages(session, env::ImagePolicy::LastImage);
  const std::string reply = agent.next(toy_task(), view).raw_text;
  CHECK(reply == agents::RandomAgent(7).next(toy_task(), view).raw_text);
  auto parsed = env::parse_action(reply);
  REQUIRE(std::holds_alternative<env::Action>(parsed));
  const auto& action = std::get<env::Action>(parsed);
  const auto* ie = std::get_if<env::InspectEntity>(&action.op);
  REQUIRE(ie);
  CHECK(std::find(toy_task().entity_names.begin(), toy_task().entity_names.end(), ie->entity) !=
        toy_task().entity_names.end());
}

TEST_CASE("random agent sessions terminate and score") {
  agents::RandomAgent agent(99);
  env::SessionConfig config;
  config.budget = 30;
  env::Transcript t = drive(agent, toy_task(), toy_kb(), config);
  CHECK(t.status != env::Status::Running);
  metrics::PerTaskMetrics m = metrics::score_task(toy_task(), t);
  CHECK(m.turns <= 30);
}

TEST_CASE("the first-answer agent answers immediately with a placeholder part") {
  agents::FirstAnswerAgent agent;
  env::Transcript t = drive(agent, toy_task(), toy_kb());
  CHECK(t.turns() == 1);
  CHECK(t.status == env::Status::Answered);
  const auto& answer = std::get<env::AnswerAction>(t.final_action->op);
  CHECK(answer.answer_entity == toy_task().entity_names.front());
  metrics::PerTaskMetrics m = metrics::score_task(toy_task(), t);
  CHECK(!m.entity_correct);
  CHECK(!m.part_sim_density.has_value());  // nothing inspected
}

TEST_CASE("the eval prompt lists every entity exactly once and echoes feedback blocks") {
  env::Session session(toy_task(), toy_kb(), {});
  auto messages = agents::build_eval_prompt(toy_task(), session);
  REQUIRE(messages.size() == 2);
  CHECK(messages[0].role == chat::Role::System);
  CHECK(contains(messages[0].text, "creative physical problem-solver"));
  const std::string& initial = messages[1].text;
  CHECK(contains(initial, "YOUR OBJECTIVE"));
  CHECK(contains(initial, "ENTITIES AVAILABLE FOR INSPECTION"));
  for (const auto& name : toy_task().entity_names) {
    const std::string line = "- " + name;
    auto first = initial.find(line);
    REQUIRE(first != std::string::npos);
    CHECK(initial.find(line, first + 1) == std::string::npos);
  }

  session.step_text(env::action_to_wire_text({"", env::InspectEntity{"shower rod", {}, false}}));
  messages = agents::build_eval_prompt(toy_task(), session);
  CHECK(messages.back().text.rfind("ENTITY INSPECTION:", 0) == 0);

  session.step_text(env::action_to_wire_text({"", env::InspectPart{"end_pads"}}));
  messages = agents::build_eval_prompt(toy_task(), session);
  CHECK(contains(messages.back().text, "Physical text explanation"));
}

TEST_CASE("the agent factory understands the builtin specs") {
  CHECK(agents::make_agent("oracle", toy_kb(), 0)->name() == "oracle");
  CHECK(agents::make_agent("random:5", toy_kb(), 0)->name() == "random");
  CHECK(agents::make_agent("first-answer", toy_kb(), 0)->name() == "first-answer");
  try {
    agents::make_agent("psychic", toy_kb(), 0);
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
}
