#include "affbench/agents.hpp"

#include <algorithm>

#include "affbench/error.hpp"
#include "affbench/remote.hpp"
#include "affbench/stdio_agent.hpp"
#include "affbench/trajectory.hpp"
#include "affbench/util.hpp"

namespace affbench::agents {

namespace {

std::size_t assistant_turns(const chat::MessageSequence& view) {
  std::size_t n = 0;
  for (const auto& m : view)
    if (m.role == chat::Role::Assistant) ++n;
  return n;
}

std::string reply(const std::string& reasoning, const env::Action& action) {
  env::Action with_reasoning = action;
  with_reasoning.reasoning = reasoning;
  return reasoning + "\n" + env::action_to_wire_text(with_reasoning);
}

/// Part names revealed so far, scraped from the entity-inspection feedback
/// lines in the rendered view.
std::vector<std::string> known_parts(const chat::MessageSequence& view) {
  static const std::string kMarker = "This entity includes these exact part names: ";
  std::vector<std::string> parts;
  for (const auto& m : view) {
    if (m.role != chat::Role::User) continue;
    for (const auto& line : split_lines(m.text)) {
      if (line.rfind(kMarker, 0) != 0) continue;
      std::string rest = line.substr(kMarker.size());
      std::size_t start = 0;
      while (start <= rest.size()) {
        std::size_t comma = rest.find(", ", start);
        if (comma == std::string::npos) {
          parts.push_back(rest.substr(start));
          break;
        }
        parts.push_back(rest.substr(start, comma - start));
        start = comma + 2;
      }
    }
  }
  return parts;
}

}  // namespace

AgentVerdict OracleAgent::next(const taskset::Task& task, const chat::MessageSequence& view) {
  // Deterministic full plan: entities in listed order, each entity's relevant
  // parts in knowledge-base order, then the gold answer. No target repeats.
  struct Planned {
    env::Action action;
    std::string reasoning;
  };
  std::vector<Planned> plan;
  for (std::size_t i = 0; i < task.entity_names.size(); ++i) {
    const std::string& entity = task.entity_names[i];
    env::InspectEntity op;
    op.entity = entity;
    if (i == 0) {
      op.has_top_candidates = true;
      for (std::size_t k = 0; k < task.entity_names.size() && k < 3; ++k)
        op.top_candidates.push_back(task.entity_names[k]);
    }
    plan.push_back({env::Action{"", op}, "Inspecting candidate entity: " + entity + "."});
    for (const auto& part : task.similar_parts_in_kb_order(*kb_, entity))
      plan.push_back({env::Action{"", env::InspectPart{part}},
                      "Checking the promising part " + part + " up close."});
  }
  std::string how = task.gold.solution_reference.apply_affordance;
  if (how.empty() || how == "NA")
    how = "Use the " + task.gold.part + " of the " + task.gold.entity +
          " to provide " + task.gold.affordance_label + ".";
  plan.push_back({env::Action{"", env::AnswerAction{task.gold.entity, task.gold.part, how}},
                  "All promising parts inspected; committing to the best-supported one."});

  std::size_t turn = assistant_turns(view);
  if (turn >= plan.size()) turn = plan.size() - 1;  // re-asked after answering: repeat answer
  return AgentVerdict{reply(plan[turn].reasoning, plan[turn].action)};
}

AgentVerdict RandomAgent::next(const taskset::Task& task, const chat::MessageSequence& view) {
  std::size_t turn = assistant_turns(view);
  Rng rng(seed_ ^ fnv1a64(task.id) ^ (0x9e3779b97f4a7c15ull * (turn + 1)));
  std::vector<std::string> parts = known_parts(view);

  bool answer = turn > 0 && rng.next_unit() < answer_probability_;
  if (answer) {
    const std::string& entity = rng.pick(task.entity_names);
    std::string part = parts.empty() ? "somewhere" : rng.pick(parts);
    env::AnswerAction op{entity, part, "Improvise with it."};
    return AgentVerdict{reply("Going with a guess.", env::Action{"", op})};
  }
  bool inspect_part = !parts.empty() && rng.next_unit() < 0.5;
  if (inspect_part) {
    env::InspectPart op{rng.pick(parts)};
    return AgentVerdict{reply("Looking closer at a part.", env::Action{"", op})};
  }
  env::InspectEntity op;
  op.entity = rng.pick(task.entity_names);
  return AgentVerdict{reply("Looking at an entity.", env::Action{"", op})};
}

AgentVerdict FirstAnswerAgent::next(const taskset::Task& task, const chat::MessageSequence&) {
  env::AnswerAction op{task.entity_names.empty() ? "nothing" : task.entity_names.front(),
                       "main_body", "Use it directly on the problem."};
  return AgentVerdict{reply("Answering immediately without exploring.", env::Action{"", op})};
}

AgentVerdict BackendAgent::next(const taskset::Task&, const chat::MessageSequence& view) {
  return AgentVerdict{backend_->complete(view)};
}

chat::MessageSequence build_eval_prompt(const taskset::Task&, const env::Session& session) {
  return env::render_messages(session, session.config().image_policy);
}

std::unique_ptr<Agent> make_agent(const std::string& spec, const kb::KnowledgeBase& kb,
                                  std::uint64_t seed) {
  if (spec == "oracle") return std::make_unique<OracleAgent>(kb);
  if (spec == "first-answer") return std::make_unique<FirstAnswerAgent>();
  if (spec == "random") return std::make_unique<RandomAgent>(seed);
  if (spec.rfind("random:", 0) == 0)
    return std::make_unique<RandomAgent>(std::stoull(spec.substr(7)));
  if (spec.rfind("remote:", 0) == 0) {
    auto config = remote::BackendConfig::from_file(spec.substr(7));
    auto backend = std::make_shared<remote::RemoteChatBackend>(config);
    return std::make_unique<BackendAgent>(backend, "remote:" + config.model);
  }
  if (spec.rfind("stdio:", 0) == 0) {
    auto backend = std::make_shared<remote::StdioBackend>(spec.substr(6));
    return std::make_unique<BackendAgent>(backend, "stdio");
  }
  throw Error(ErrorKind::Config, "unknown agent spec: \"" + spec + "\"");
}

}  // namespace affbench::agents
