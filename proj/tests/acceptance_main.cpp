// Acceptance suite: one pass/fail line per criterion, hermetic, stub backends
// only. Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "affbench/agents.hpp"
#include "affbench/env.hpp"
#include "affbench/metrics.hpp"
#include "affbench/runner.hpp"
#include "affbench/sha256.hpp"
#include "affbench/synth.hpp"
#include "affbench/trajectory.hpp"
#include "affbench/util.hpp"

using namespace affbench;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail = "") {
  std::printf("[%s] criterion %d: %s%s\n", pass ? "PASS" : "FAIL", number, name.c_str(),
              detail.empty() ? "" : ("  (" + detail + ")").c_str());
  if (!pass) ++g_failures;
}

env::Transcript drive_oracle(const taskset::Task& task, const kb::KnowledgeBase& kb) {
  agents::OracleAgent oracle(kb);
  env::Session session(task, kb, {});
  while (session.status() == env::Status::Running)
    session.step_text(
        oracle.next(task, env::render_messages(session, env::ImagePolicy::LastImage)).raw_text);
  return env::finalize(session);
}

// ---------------------------------------------------------------------------
// 1. Oracle soundness
// ---------------------------------------------------------------------------
void criterion_1() {
  const auto started = std::chrono::steady_clock::now();
  kb::KnowledgeBase kb = synth::generate_kb(101, {12, 2, 4, 0.5, false});
  auto tasks = synth::generate_tasks(kb, 102, {24, 3, false});
  bool pass = tasks.size() >= 20;
  std::string detail;
  std::vector<metrics::PerTaskMetrics> ms;
  for (const auto& task : tasks) {
    env::Transcript t = drive_oracle(task, kb);
    metrics::PerTaskMetrics m = metrics::score_task(task, t);
    ms.push_back(m);
    const int expected = int(task.entity_names.size() + task.total_similar_parts() + 1);
    if (t.turns() != expected) {
      pass = false;
      detail = "turn mismatch on " + task.id;
    }
  }
  metrics::AggregateReport r = metrics::aggregate(ms, tasks);
  if (r.gold_correct_rate != 1.0 || r.entity_correct_rate != 1.0) pass = false;
  if (r.entity_repetition_rate != 0.0 || r.part_repetition_rate != 0.0) pass = false;
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (seconds >= 5.0) {
    pass = false;
    detail = "runtime " + std::to_string(seconds) + "s";
  }
  report(1, "oracle soundness on a seeded synthetic taskset", pass, detail);
}

// ---------------------------------------------------------------------------
// 2. Metric oracle equivalence (independent brute-force recomputation)
// ---------------------------------------------------------------------------
struct BruteMetrics {
  bool gold_correct = false, entity_correct = false;
  int turns = 0, distinct_entities = 0, distinct_parts = 0;
  bool gold_entity_explored = false, gold_part_explored = false;
  bool repeated_entity = false, repeated_part = false;
  std::optional<double> part_density, entity_density;
  std::map<std::string, double> progress;
};

BruteMetrics brute_force(const taskset::Task& task, const env::Transcript& t) {
  BruteMetrics out;
  // Turns: history entries that consumed a step (they carry a parse result).
  for (std::size_t i = 1; i < t.history.size(); ++i)
    if (t.history[i].parse.has_value()) ++out.turns;

  // Final answer: the last parsed Answer action, honored only when the
  // session ended in the answered state.
  if (t.status == env::Status::Answered) {
    for (auto it = t.history.rbegin(); it != t.history.rend(); ++it) {
      if (!it->parse || !std::holds_alternative<env::Action>(*it->parse)) continue;
      const env::Action& a = std::get<env::Action>(*it->parse);
      if (const auto* ans = std::get_if<env::AnswerAction>(&a.op)) {
        out.entity_correct = ans->answer_entity == task.gold.entity;
        out.gold_correct = out.entity_correct && ans->answer_part == task.gold.part;
        break;
      }
    }
  }

  auto entity_relevant = [&](const std::string& e) {
    if (e == task.gold.entity) return true;
    auto it = task.similar_map.find(e);
    return it != task.similar_map.end() && !it->second.empty();
  };

  std::vector<std::string> entity_seq;
  std::vector<std::pair<std::string, std::string>> part_seq;
  std::set<std::string> progress_seen;
  for (std::size_t i = 1; i < t.history.size(); ++i) {
    const auto& fb = t.history[i].feedback;
    const double norm = out.turns > 0 ? double(i) / double(out.turns) : 0.0;
    if (const auto* ef = std::get_if<env::EntityFeedback>(&fb)) {
      for (const auto& prev : entity_seq)
        if (prev == ef->entity) out.repeated_entity = true;
      entity_seq.push_back(ef->entity);
      if (ef->entity == task.gold.entity) {
        out.gold_entity_explored = true;
        if (progress_seen.insert("gold_entity").second) out.progress["gold_entity"] = norm;
      } else if (entity_relevant(ef->entity) &&
                 progress_seen.insert("similar_entity").second) {
        out.progress["similar_entity"] = norm;
      }
    } else if (const auto* pf = std::get_if<env::PartFeedback>(&fb)) {
      for (const auto& prev : part_seq)
        if (prev.first == pf->owner_entity && prev.second == pf->part) out.repeated_part = true;
      part_seq.emplace_back(pf->owner_entity, pf->part);
      const bool is_gold =
          pf->owner_entity == task.gold.entity && pf->part == task.gold.part;
      if (is_gold) {
        out.gold_part_explored = true;
        if (progress_seen.insert("gold_part").second) out.progress["gold_part"] = norm;
      } else if (task.is_similar(pf->owner_entity, pf->part) &&
                 progress_seen.insert("similar_part").second) {
        out.progress["similar_part"] = norm;
      }
    }
  }

  std::set<std::string> distinct_entities(entity_seq.begin(), entity_seq.end());
  std::set<std::pair<std::string, std::string>> distinct_parts(part_seq.begin(), part_seq.end());
  out.distinct_entities = int(distinct_entities.size());
  out.distinct_parts = int(distinct_parts.size());
  if (!distinct_parts.empty()) {
    int relevant = 0;
    for (const auto& [e, p] : distinct_parts)
      if ((e == task.gold.entity && p == task.gold.part) || task.is_similar(e, p)) ++relevant;
    out.part_density = double(relevant) / double(distinct_parts.size());
  }
  if (!distinct_entities.empty()) {
    int relevant = 0;
    for (const auto& e : distinct_entities)
      if (entity_relevant(e)) ++relevant;
    out.entity_density = double(relevant) / double(distinct_entities.size());
  }
  return out;
}

void criterion_2() {
  kb::KnowledgeBase kb = synth::generate_kb(201, {10, 2, 4, 0.6, false});
  auto tasks = synth::generate_tasks(kb, 202, {25, 3, false});
  int transcripts = 0, mismatches = 0;
  for (std::uint64_t round = 0; round < 40 && transcripts < 1000; ++round) {
    for (const auto& task : tasks) {
      if (transcripts >= 1000) break;
      agents::RandomAgent agent(1000 + round);
      env::SessionConfig config;
      config.budget = 4 + int(round % 14);
      config.parse_retry_limit = 3;
      env::Session session(task, kb, config);
      while (session.status() == env::Status::Running)
        session.step_text(
            agent.next(task, env::render_messages(session, env::ImagePolicy::NoImage)).raw_text);
      env::Transcript t = env::finalize(session);
      ++transcripts;

      metrics::PerTaskMetrics m = metrics::score_task(task, t);
      BruteMetrics b = brute_force(task, t);
      bool ok = m.gold_correct == b.gold_correct && m.entity_correct == b.entity_correct &&
                m.turns == b.turns && m.distinct_entities == b.distinct_entities &&
                m.distinct_parts == b.distinct_parts &&
                m.gold_entity_explored == b.gold_entity_explored &&
                m.gold_part_explored == b.gold_part_explored &&
                m.repeated_entity == b.repeated_entity && m.repeated_part == b.repeated_part;
      ok = ok && m.part_sim_density.has_value() == b.part_density.has_value();
      if (ok && m.part_sim_density)
        ok = std::fabs(*m.part_sim_density - *b.part_density) <= 1e-12;
      ok = ok && m.entity_sim_density.has_value() == b.entity_density.has_value();
      if (ok && m.entity_sim_density)
        ok = std::fabs(*m.entity_sim_density - *b.entity_density) <= 1e-12;
      std::map<std::string, double> got;
      for (const auto& ev : m.progress_events) got[ev.kind] = ev.normalized_turn;
      ok = ok && got.size() == b.progress.size();
      if (ok)
        for (const auto& [k, v] : b.progress)
          if (!got.count(k) || std::fabs(got[k] - v) > 1e-12) ok = false;
      if (!ok) ++mismatches;
    }
  }
  report(2, "score_task equals brute-force recomputation on 1000 random transcripts",
         transcripts == 1000 && mismatches == 0,
         std::to_string(transcripts) + " transcripts, " + std::to_string(mismatches) +
             " mismatches");
}

// ---------------------------------------------------------------------------
// 3. DPO loss math
// ---------------------------------------------------------------------------
void criterion_3() {
  bool pass = true;
  Rng rng(303);
  for (int i = 0; i < 100; ++i) {
    const double beta = 1e-3 + rng.next_unit() * 10.0;
    const double base = -3.0 * rng.next_unit();
    const double loss = trajectory::dpo_loss(base, base, base - 1.0, base - 1.0, beta);
    if (std::fabs(loss - std::log(2.0)) > 1e-9) pass = false;
  }
  // beta * delta = +1 and -1 via beta = 0.1 (the reference coefficient).
  const double beta = 0.1;
  if (std::fabs(trajectory::dpo_loss(5.0, 0.0, -5.0, 0.0, beta) -
                std::log1p(std::exp(-1.0))) > 1e-9)
    pass = false;
  if (std::fabs(trajectory::dpo_loss(-5.0, 0.0, 5.0, 0.0, beta) -
                std::log1p(std::exp(1.0))) > 1e-9)
    pass = false;

  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const double pc = -8.0 * rng.next_unit(), rc = -8.0 * rng.next_unit();
    const double pr = -8.0 * rng.next_unit(), rr = -8.0 * rng.next_unit();
    const double b = 1e-2 + rng.next_unit() * 2.0;
    const double eps = 1e-3 + rng.next_unit();
    const double base = trajectory::dpo_loss(pc, rc, pr, rr, b);
    if (!(trajectory::dpo_loss(pc + eps, rc, pr, rr, b) < base)) ++violations;
    if (!(trajectory::dpo_loss(pc, rc, pr + eps, rr, b) > base)) ++violations;
  }
  report(3, "preference loss closed form and monotonicity", pass && violations == 0,
         std::to_string(violations) + " monotonicity violations");
}

// ---------------------------------------------------------------------------
// 4. Stack invariants over 500 random tasks
// ---------------------------------------------------------------------------
void criterion_4() {
  int violations = 0;
  int tasks_checked = 0;
  Rng rng(404);
  for (std::uint64_t batch = 0; tasks_checked < 500; ++batch) {
    kb::KnowledgeBase kb = synth::generate_kb(900 + batch, {9, 2, 4, 0.6, false});
    auto tasks = synth::generate_tasks(kb, 950 + batch, {25, 3, false});
    for (const auto& task : tasks) {
      if (tasks_checked >= 500) break;
      ++tasks_checked;
      std::vector<std::string> order = task.entity_names;
      rng.shuffle(order);
      trajectory::ExplorationStack stack = trajectory::init_stack(task, order);
      const std::size_t expected = task.entity_names.size() + task.total_similar_parts();
      std::set<std::string> popped;
      std::size_t steps = 0;
      bool ok = true;
      while (!stack.empty() && steps <= expected) {
        ++steps;
        trajectory::StackItem item = stack.top();
        if (item.kind == trajectory::StackItem::Kind::Entity) {
          if (!popped.insert(item.entity).second) ok = false;
          trajectory::advance(stack, task, kb, item);
        } else {
          if (!task.is_similar(item.entity, item.part)) ok = false;
          const bool gold =
              item.entity == task.gold.entity && item.part == task.gold.part;
          trajectory::advance(stack, task, kb, item, gold || (rng.bounded(2) == 0));
        }
      }
      if (!stack.empty() || stack.total_pops() != expected) ok = false;
      if (popped.size() != task.entity_names.size()) ok = false;
      trajectory::Directive d = trajectory::current_directive(stack);
      if (d.kind != trajectory::Directive::Kind::AnswerPhase) ok = false;
      bool gold_candidate = false;
      for (const auto& [e, p] : d.candidates)
        if (e == task.gold.entity && p == task.gold.part) gold_candidate = true;
      if (!gold_candidate) ok = false;
      if (!ok) ++violations;
    }
  }
  report(4, "exploration-stack invariants over 500 random tasks", violations == 0,
         std::to_string(violations) + " violations");
}

// ---------------------------------------------------------------------------
// 5. Leakage over a 200-pair stub emission
// ---------------------------------------------------------------------------
void criterion_5() {
  kb::KnowledgeBase kb = synth::generate_kb(501, {10, 2, 4, 0.6, false});
  auto tasks = synth::generate_tasks(kb, 502, {20, 3, false});
  trajectory::StubTeacher teacher;
  std::vector<trajectory::GeneratedTrajectory> trajectories;
  for (const auto& task : tasks)
    trajectories.push_back(trajectory::generate_trajectory(task, kb, teacher, {}));
  trajectory::DpoEmitOptions options;
  options.max_pairs = 200;
  options.seed = 5;
  auto pairs = trajectory::build_dpo_pairs(trajectories, options);
  auto scan = trajectory::scan_dpo_corpus(pairs, tasks, kb);
  report(5, "zero leakage hits across a 200-pair stub emission",
         pairs.size() == 200 && scan.pairs_scanned == 200 && scan.hits.empty(),
         std::to_string(pairs.size()) + " pairs, " + std::to_string(scan.hits.size()) + " hits");
}

// ---------------------------------------------------------------------------
// 6. Wire-format fidelity
// ---------------------------------------------------------------------------
void criterion_6() {
  bool pass = true;
  // The three documented shapes round-trip to identical structures.
  const std::vector<std::string> shapes = {
      R"({"reasoning":"...","action":"inspect_entity","entity":"<exact entity name>"})",
      R"({"reasoning":"...","action":"inspect_part","part":"<exact part name>"})",
      R"({"reasoning":"...","action":"answer","answer_entity":"<exact entity name>","answer_part":"<exact part name>","answer_how_to_use":"..."})",
  };
  for (const auto& shape : shapes) {
    auto first = env::parse_action(shape);
    if (!std::holds_alternative<env::Action>(first)) {
      pass = false;
      continue;
    }
    const std::string wire = env::action_to_wire_text(std::get<env::Action>(first));
    auto second = env::parse_action(wire);
    if (!std::holds_alternative<env::Action>(second) ||
        env::action_to_wire_text(std::get<env::Action>(second)) != wire)
      pass = false;
  }

  // 50 noisy replies: 14 from the case-study fixtures, 36 constructed.
  struct Sample {
    std::string raw;
    std::string kind;
    std::string target;
  };
  std::vector<Sample> samples;
  for (const auto& line :
       split_lines(read_file(std::string(AFFBENCH_FIXTURE_DIR) + "/noisy_replies.jsonl"))) {
    if (trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line);
    samples.push_back({j.at("raw"), j.at("action"), j.at("target")});
  }

  struct Base {
    std::string json;
    std::string kind;
    std::string target;
  };
  const std::vector<Base> bases = {
      {R"({"reasoning":"r","action":"inspect_entity","entity":"shower rod"})", "inspect_entity",
       "shower rod"},
      {R"({"reasoning":"r","action":"inspect_part","part":"end_pads"})", "inspect_part",
       "end_pads"},
      {R"({"reasoning":"{tricky} text","action":"inspect_part","part":"pile_surface"})",
       "inspect_part", "pile_surface"},
      {R"({"reasoning":"r","action":"answer","answer_entity":"shower rod","answer_part":"end_pads","answer_how_to_use":"press it"})",
       "answer", "shower rod/end_pads"},
  };
  const std::vector<std::string> wrappers = {
      "Let me think through this step by step.\n%s",
      "```json\n%s\n```",
      "{not actually json} some prose and then %s",
      "Thinking about {braces} inside prose... final call:\n%s",
      "%s\n\n",
      "I considered {\"action\":\"inspect_entity\",\"entity\":\"decoy\"} first but instead:\n%s",
      "Multilingual noise 多言語テキスト — final answer below\n%s",
      std::string(2000, 'x') + "\n%s",
      "Answer:\n%s\nThat is everything {unbalanced",
  };
  for (const auto& base : bases)
    for (const auto& wrapper : wrappers)
      samples.push_back({replace_all(wrapper, "%s", base.json), base.kind, base.target});

  if (samples.size() != 50) pass = false;
  int extracted = 0;
  for (const auto& sample : samples) {
    auto parsed = env::parse_action(sample.raw);
    if (!std::holds_alternative<env::Action>(parsed)) continue;
    const env::Action& action = std::get<env::Action>(parsed);
    std::string kind, target;
    if (const auto* ie = std::get_if<env::InspectEntity>(&action.op)) {
      kind = "inspect_entity";
      target = ie->entity;
    } else if (const auto* ip = std::get_if<env::InspectPart>(&action.op)) {
      kind = "inspect_part";
      target = ip->part;
    } else {
      const auto& ans = std::get<env::AnswerAction>(action.op);
      kind = "answer";
      target = ans.answer_entity + "/" + ans.answer_part;
    }
    if (kind == sample.kind && target == sample.target) ++extracted;
  }
  report(6, "wire-format round-trip and 50/50 noisy-reply extraction",
         pass && extracted == int(samples.size()),
         std::to_string(extracted) + "/" + std::to_string(samples.size()) + " extracted");
}

// ---------------------------------------------------------------------------
// 7. Image-policy contract
// ---------------------------------------------------------------------------
void criterion_7() {
  kb::KnowledgeBase kb = synth::generate_kb(701, {6, 3, 4, 0.9, true});
  auto tasks = synth::generate_tasks(kb, 702, {4, 3, true});
  bool pass = true;
  std::string detail;
  for (const auto& task : tasks) {
    // Scripted five-inspection session: two entities and three parts.
    env::SessionConfig config;
    config.image_policy = env::ImagePolicy::AllImages;  // keep refs in feedbacks
    env::Session session(task, kb, config);
    int inspections = 0;
    for (const auto& entity : task.entity_names) {
      if (inspections >= 5) break;
      session.step_text(env::action_to_wire_text({"", env::InspectEntity{entity, {}, false}}));
      ++inspections;
      const kb::Entity* e = kb.find_entity(entity);
      for (const auto& part : e->parts) {
        if (inspections >= 5) break;
        session.step_text(env::action_to_wire_text({"", env::InspectPart{part.name}}));
        ++inspections;
      }
    }
    if (inspections != 5) continue;
    const std::size_t none =
        chat::count_image_refs(env::render_messages(session, env::ImagePolicy::NoImage));
    const std::size_t last =
        chat::count_image_refs(env::render_messages(session, env::ImagePolicy::LastImage));
    const std::size_t all =
        chat::count_image_refs(env::render_messages(session, env::ImagePolicy::AllImages));
    if (none != 0 || last != 2 || all != 6) {
      pass = false;
      detail = task.id + ": " + std::to_string(none) + "/" + std::to_string(last) + "/" +
               std::to_string(all);
    }
  }
  report(7, "0/2/6 image attachments under the three policies", pass, detail);
}

// ---------------------------------------------------------------------------
// 8. Determinism and replay
// ---------------------------------------------------------------------------
std::map<std::string, std::string> digest_dir(const std::string& root) {
  std::map<std::string, std::string> digests;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file())
      digests[fs::relative(entry.path(), root).string()] =
          sha256_hex(read_file(entry.path().string()));
  return digests;
}

void criterion_8() {
  const fs::path base = fs::temp_directory_path() / "affbench_acceptance8";
  fs::remove_all(base);
  fs::create_directories(base);
  kb::KnowledgeBase kb = synth::generate_kb(801, {8, 2, 4, 0.5, false});
  write_file((base / "kb.json").string(), kb::serialize_kb(kb));
  auto tasks = synth::generate_tasks(kb, 802, {6, 3, false});
  write_file((base / "tasks.json").string(), taskset::serialize_tasks(tasks));

  auto run_into = [&](const std::string& name) {
    runner::RunConfig config;
    config.kb_path = (base / "kb.json").string();
    config.taskset_path = (base / "tasks.json").string();
    config.agent_spec = "random:6";
    config.seed = 5;
    config.budget = 20;
    config.out_dir = (base / name).string();
    runner::run_eval(config);
    runner::GenConfig gen;
    gen.kb_path = config.kb_path;
    gen.taskset_path = config.taskset_path;
    gen.out_dir = config.out_dir;
    gen.seed = 5;
    runner::gen_trajectories(gen);
  };
  run_into("a");
  run_into("b");
  bool pass = digest_dir((base / "a").string()) == digest_dir((base / "b").string());

  // Replaying every transcript's raw texts reproduces its bytes.
  for (const auto& task : tasks) {
    const std::string path = (base / "a" / "transcripts" / (task.id + ".jsonl")).string();
    env::Transcript original = env::transcript_from_jsonl(read_file(path));
    env::Session session(task, kb, original.config);
    for (std::size_t i = 1; i < original.history.size(); ++i)
      if (!original.history[i].raw_agent_text.empty() || original.history[i].parse)
        session.step_text(original.history[i].raw_agent_text);
    if (session.status() == env::Status::Running) session.abort();
    env::Transcript replayed = env::finalize(session, original.meta);
    if (env::transcript_to_jsonl(replayed) != env::transcript_to_jsonl(original)) pass = false;
  }
  fs::remove_all(base);
  report(8, "byte-identical reruns and transcript replay", pass);
}

// ---------------------------------------------------------------------------
// 9. Error-pipeline schema
// ---------------------------------------------------------------------------
void criterion_9() {
  kb::KnowledgeBase kb = synth::generate_kb(901, {6, 2, 3, 0.4, false});
  auto tasks = synth::generate_tasks(kb, 902, {1, 3, false});
  const taskset::Task& task = tasks.front();
  metrics::Prediction prediction{task.entity_names.back(), "somewhere", "wave it around"};

  auto valid_reply = [](const std::string& major, std::vector<std::string> contributing) {
    nlohmann::ordered_json j;
    j["reasoning"] = "canned";
    j["major_reason_code"] = major;
    j["major_reason_label"] = "label";
    j["contributing_reason_codes"] = contributing;
    j["contributing_reason_labels"] = contributing;
    return j.dump();
  };

  const std::vector<std::string> codes = {"A1", "A2", "A3", "B1", "B2", "C1", "C2"};
  int correct = 0, total = 0;
  Rng rng(909);
  for (int i = 0; i < 100; ++i) {
    ++total;
    const int variant = i % 3;
    if (variant == 0) {
      const std::string code = codes[rng.bounded(codes.size())];
      chat::FixedBackend judge(valid_reply(code, {code, codes[rng.bounded(codes.size())]}));
      auto result = metrics::classify_error(task, prediction, judge);
      const auto* label = std::get_if<metrics::ErrorLabel>(&result);
      bool dedupe_ok = label && metrics::error_code_name(label->major) == code;
      if (dedupe_ok) {
        bool major_in = false;
        for (auto c : label->contributing)
          if (c == label->major) major_in = true;
        if (major_in) ++correct;
      }
    } else if (variant == 1) {
      chat::FixedBackend judge(valid_reply("D1", {"D1"}));  // unknown code
      auto result = metrics::classify_error(task, prediction, judge);
      if (std::holds_alternative<metrics::Unclassifiable>(result)) ++correct;
    } else {
      chat::FixedBackend judge(valid_reply("A2", {"A3"}));  // major missing
      auto result = metrics::classify_error(task, prediction, judge);
      if (std::holds_alternative<metrics::Unclassifiable>(result)) ++correct;
    }
  }

  auto label_of = [](metrics::ErrorCode code) {
    metrics::ErrorLabel l;
    l.major = code;
    l.contributing = {code};
    return metrics::ClassifyResult{l};
  };
  auto hist = metrics::error_histogram({label_of(metrics::ErrorCode::A2),
                                        label_of(metrics::ErrorCode::A2),
                                        label_of(metrics::ErrorCode::A1),
                                        label_of(metrics::ErrorCode::B1)});
  bool hist_ok = hist.size() == 3 && std::fabs(hist["A2"] - 0.5) < 1e-12 &&
                 std::fabs(hist["A1"] - 0.25) < 1e-12 && std::fabs(hist["B1"] - 0.25) < 1e-12;

  report(9, "judge schema enforcement over 100 stub replies and the reference histogram",
         correct == total && hist_ok,
         std::to_string(correct) + "/" + std::to_string(total) + " handled");
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  if (g_failures == 0)
    std::printf("acceptance: all criteria passed\n");
  else
    std::printf("acceptance: %d criterion(s) failed\n", g_failures);
  return g_failures;
}
