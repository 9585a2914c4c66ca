#include "affbench/metrics.hpp"

#include <algorithm>
#include <set>

#include "affbench/error.hpp"
#include "affbench/util.hpp"

namespace affbench::metrics {

using nlohmann::json;
using nlohmann::ordered_json;

PerTaskMetrics score_task(const taskset::Task& task, const env::Transcript& transcript) {
  if (transcript.task_id != task.id)
    throw Error(ErrorKind::TaskMismatch, "transcript belongs to task \"" + transcript.task_id +
                                             "\", not \"" + task.id + "\"");
  PerTaskMetrics m;
  m.task_id = task.id;
  m.final_status = transcript.status;
  m.turns = transcript.turns();

  if (transcript.final_action) {
    const auto& a = std::get<env::AnswerAction>(transcript.final_action->op);
    m.entity_correct = a.answer_entity == task.gold.entity;
    m.gold_correct = m.entity_correct && a.answer_part == task.gold.part;
  }

  auto entity_is_similar = [&](const std::string& entity) {
    if (entity == task.gold.entity) return true;
    auto it = task.similar_map.find(entity);
    return it != task.similar_map.end() && !it->second.empty();
  };
  auto part_is_similar = [&](const std::string& entity, const std::string& part) {
    return task.is_similar(entity, part);
  };

  // Successful inspections in turn order, from the feedback records.
  std::set<std::string> seen_entities;
  std::set<std::pair<std::string, std::string>> seen_parts;
  std::set<std::string> seen_progress;
  const int total_turns = m.turns;
  for (std::size_t i = 1; i < transcript.history.size(); ++i) {
    const env::Feedback& fb = transcript.history[i].feedback;
    const double norm = total_turns > 0 ? double(i) / double(total_turns) : 0.0;
    auto record_progress = [&](const std::string& kind) {
      if (seen_progress.insert(kind).second) m.progress_events.push_back({kind, norm});
    };
    if (const auto* ef = std::get_if<env::EntityFeedback>(&fb)) {
      if (!seen_entities.insert(ef->entity).second) m.repeated_entity = true;
      if (ef->entity == task.gold.entity) {
        m.gold_entity_explored = true;
        record_progress("gold_entity");
      } else if (entity_is_similar(ef->entity)) {
        record_progress("similar_entity");
      }
    } else if (const auto* pf = std::get_if<env::PartFeedback>(&fb)) {
      if (!seen_parts.insert({pf->owner_entity, pf->part}).second) m.repeated_part = true;
      if (pf->owner_entity == task.gold.entity && pf->part == task.gold.part) {
        m.gold_part_explored = true;
        record_progress("gold_part");
      } else if (part_is_similar(pf->owner_entity, pf->part)) {
        record_progress("similar_part");
      }
    }
  }
  m.distinct_entities = int(seen_entities.size());
  m.distinct_parts = int(seen_parts.size());

  if (!seen_parts.empty()) {
    int similar = 0;
    for (const auto& [entity, part] : seen_parts)
      if ((entity == task.gold.entity && part == task.gold.part) ||
          part_is_similar(entity, part))
        ++similar;
    m.part_sim_density = double(similar) / double(seen_parts.size());
  }
  if (!seen_entities.empty()) {
    int similar = 0;
    for (const auto& entity : seen_entities)
      if (entity_is_similar(entity)) ++similar;
    m.entity_sim_density = double(similar) / double(seen_entities.size());
  }
  return m;
}

void AggregateAccumulator::add(const PerTaskMetrics& m, const taskset::Task& task) {
  if (m.task_id != task.id)
    throw Error(ErrorKind::Alignment,
                "metrics/task misalignment: " + m.task_id + " vs " + task.id);
  ++n_;
  gold_correct_ += m.gold_correct;
  entity_correct_ += m.entity_correct;
  turns_sum_ += m.turns;
  distinct_entities_sum_ += m.distinct_entities;
  distinct_parts_sum_ += m.distinct_parts;
  repeated_entity_ += m.repeated_entity;
  repeated_part_ += m.repeated_part;
  gold_entity_explored_ += m.gold_entity_explored;
  gold_part_explored_ += m.gold_part_explored;

  Cell& e_cell = m.entity_correct ? expl_given_ecorrect_ : expl_given_ewrong_;
  ++e_cell.n;
  e_cell.sum += m.gold_entity_explored;
  Cell& p_cell = m.gold_correct ? expl_given_pcorrect_ : expl_given_pwrong_;
  ++p_cell.n;
  p_cell.sum += m.gold_part_explored;

  if (m.part_sim_density) {
    ++part_density_.n;
    part_density_.sum += *m.part_sim_density;
  } else {
    ++part_density_excluded_;
  }
  if (m.entity_sim_density) {
    ++entity_density_.n;
    entity_density_.sum += *m.entity_sim_density;
  } else {
    ++entity_density_excluded_;
  }
  for (const auto& ev : m.progress_events) {
    Cell& c = progress_[ev.kind];
    ++c.n;
    c.sum += ev.normalized_turn;
  }

  BCell& sim = by_similarity_[taskset::similarity_level_name(task.similarity_level)];
  ++sim.n;
  sim.gold += m.gold_correct;
  sim.entity += m.entity_correct;
  sim.turns += m.turns;
  BCell& typ = by_typicality_[task.gold.typicality_level];
  ++typ.n;
  typ.gold += m.gold_correct;
  typ.entity += m.entity_correct;
  typ.turns += m.turns;
}

void AggregateAccumulator::merge(const AggregateAccumulator& o) {
  n_ += o.n_;
  gold_correct_ += o.gold_correct_;
  entity_correct_ += o.entity_correct_;
  turns_sum_ += o.turns_sum_;
  distinct_entities_sum_ += o.distinct_entities_sum_;
  distinct_parts_sum_ += o.distinct_parts_sum_;
  repeated_entity_ += o.repeated_entity_;
  repeated_part_ += o.repeated_part_;
  gold_entity_explored_ += o.gold_entity_explored_;
  gold_part_explored_ += o.gold_part_explored_;
  auto merge_cell = [](Cell& a, const Cell& b) {
    a.n += b.n;
    a.sum += b.sum;
  };
  merge_cell(expl_given_ecorrect_, o.expl_given_ecorrect_);
  merge_cell(expl_given_ewrong_, o.expl_given_ewrong_);
  merge_cell(expl_given_pcorrect_, o.expl_given_pcorrect_);
  merge_cell(expl_given_pwrong_, o.expl_given_pwrong_);
  merge_cell(part_density_, o.part_density_);
  merge_cell(entity_density_, o.entity_density_);
  part_density_excluded_ += o.part_density_excluded_;
  entity_density_excluded_ += o.entity_density_excluded_;
  for (const auto& [k, c] : o.progress_) merge_cell(progress_[k], c);
  for (const auto& [k, c] : o.by_similarity_) {
    BCell& b = by_similarity_[k];
    b.n += c.n;
    b.gold += c.gold;
    b.entity += c.entity;
    b.turns += c.turns;
  }
  for (const auto& [k, c] : o.by_typicality_) {
    BCell& b = by_typicality_[k];
    b.n += c.n;
    b.gold += c.gold;
    b.entity += c.entity;
    b.turns += c.turns;
  }
}

AggregateReport AggregateAccumulator::finish() const {
  AggregateReport r;
  r.n = int(n_);
  if (n_ == 0) return r;
  const double n = double(n_);
  r.gold_correct_rate = gold_correct_ / n;
  r.entity_correct_rate = entity_correct_ / n;
  r.mean_turns = turns_sum_ / n;
  r.mean_distinct_entities = distinct_entities_sum_ / n;
  r.mean_distinct_parts = distinct_parts_sum_ / n;
  r.entity_repetition_rate = repeated_entity_ / n;
  r.part_repetition_rate = repeated_part_ / n;
  r.gold_entity_explored_rate = gold_entity_explored_ / n;
  r.gold_part_explored_rate = gold_part_explored_ / n;
  auto to_rate = [](const Cell& c) {
    RateCell out;
    out.n = int(c.n);
    if (c.n > 0) out.rate = c.sum / double(c.n);
    return out;
  };
  r.gold_entity_explored_given_entity_correct = to_rate(expl_given_ecorrect_);
  r.gold_entity_explored_given_entity_wrong = to_rate(expl_given_ewrong_);
  r.gold_part_explored_given_part_correct = to_rate(expl_given_pcorrect_);
  r.gold_part_explored_given_part_wrong = to_rate(expl_given_pwrong_);
  r.part_sim_density_n = int(part_density_.n);
  r.part_sim_density_excluded = int(part_density_excluded_);
  if (part_density_.n > 0) r.mean_part_sim_density = part_density_.sum / double(part_density_.n);
  r.entity_sim_density_n = int(entity_density_.n);
  r.entity_sim_density_excluded = int(entity_density_excluded_);
  if (entity_density_.n > 0)
    r.mean_entity_sim_density = entity_density_.sum / double(entity_density_.n);
  for (const auto& [k, c] : progress_) r.mean_progress[k] = to_rate(c);
  for (const auto& [k, c] : by_similarity_) {
    BreakdownCell b;
    b.n = int(c.n);
    if (c.n > 0) {
      b.gold_correct_rate = c.gold / double(c.n);
      b.entity_correct_rate = c.entity / double(c.n);
      b.mean_turns = c.turns / double(c.n);
    }
    r.by_similarity_level[k] = b;
  }
  for (const auto& [k, c] : by_typicality_) {
    BreakdownCell b;
    b.n = int(c.n);
    if (c.n > 0) {
      b.gold_correct_rate = c.gold / double(c.n);
      b.entity_correct_rate = c.entity / double(c.n);
      b.mean_turns = c.turns / double(c.n);
    }
    r.by_typicality_level[k] = b;
  }
  return r;
}

AggregateReport aggregate(const std::vector<PerTaskMetrics>& metrics,
                          const std::vector<taskset::Task>& tasks) {
  if (metrics.size() != tasks.size())
    throw Error(ErrorKind::Alignment, "metrics and tasks differ in length");
  AggregateAccumulator acc;
  for (std::size_t i = 0; i < metrics.size(); ++i) acc.add(metrics[i], tasks[i]);
  return acc.finish();
}

ordered_json per_task_to_json(const PerTaskMetrics& m) {
  ordered_json j;
  j["task_id"] = m.task_id;
  j["final_status"] = env::status_name(m.final_status);
  j["gold_correct"] = m.gold_correct;
  j["entity_correct"] = m.entity_correct;
  j["turns"] = m.turns;
  j["distinct_entities"] = m.distinct_entities;
  j["distinct_parts"] = m.distinct_parts;
  j["gold_entity_explored"] = m.gold_entity_explored;
  j["gold_part_explored"] = m.gold_part_explored;
  j["repeated_entity"] = m.repeated_entity;
  j["repeated_part"] = m.repeated_part;
  j["part_sim_density"] =
      m.part_sim_density ? ordered_json(*m.part_sim_density) : ordered_json(nullptr);
  j["entity_sim_density"] =
      m.entity_sim_density ? ordered_json(*m.entity_sim_density) : ordered_json(nullptr);
  ordered_json events = ordered_json::array();
  for (const auto& ev : m.progress_events)
    events.push_back(ordered_json{{"kind", ev.kind}, {"normalized_turn", ev.normalized_turn}});
  j["progress_events"] = std::move(events);
  return j;
}

ordered_json report_to_json(const AggregateReport& r) {
  auto rate_cell = [](const RateCell& c) {
    ordered_json j;
    j["n"] = c.n;
    j["rate"] = c.defined() ? ordered_json(c.rate) : ordered_json(nullptr);
    return j;
  };
  ordered_json j;
  j["n"] = r.n;
  j["gold_correct_rate"] = r.gold_correct_rate;
  j["entity_correct_rate"] = r.entity_correct_rate;
  j["mean_turns"] = r.mean_turns;
  j["mean_distinct_entities"] = r.mean_distinct_entities;
  j["mean_distinct_parts"] = r.mean_distinct_parts;
  j["entity_repetition_rate"] = r.entity_repetition_rate;
  j["part_repetition_rate"] = r.part_repetition_rate;
  j["gold_entity_explored_rate"] = r.gold_entity_explored_rate;
  j["gold_part_explored_rate"] = r.gold_part_explored_rate;
  j["gold_entity_explored_given_entity_correct"] =
      rate_cell(r.gold_entity_explored_given_entity_correct);
  j["gold_entity_explored_given_entity_wrong"] =
      rate_cell(r.gold_entity_explored_given_entity_wrong);
  j["gold_part_explored_given_part_correct"] = rate_cell(r.gold_part_explored_given_part_correct);
  j["gold_part_explored_given_part_wrong"] = rate_cell(r.gold_part_explored_given_part_wrong);
  j["part_sim_density"] = ordered_json{{"n", r.part_sim_density_n},
                                       {"excluded", r.part_sim_density_excluded},
                                       {"mean", r.part_sim_density_n > 0
                                                    ? ordered_json(r.mean_part_sim_density)
                                                    : ordered_json(nullptr)}};
  j["entity_sim_density"] = ordered_json{{"n", r.entity_sim_density_n},
                                         {"excluded", r.entity_sim_density_excluded},
                                         {"mean", r.entity_sim_density_n > 0
                                                      ? ordered_json(r.mean_entity_sim_density)
                                                      : ordered_json(nullptr)}};
  ordered_json progress;
  for (const auto& [k, c] : r.mean_progress) progress[k] = rate_cell(c);
  j["mean_progress"] = std::move(progress);
  auto breakdown = [](const BreakdownCell& c) {
    ordered_json b;
    b["n"] = c.n;
    b["gold_correct_rate"] = c.n > 0 ? ordered_json(c.gold_correct_rate) : ordered_json(nullptr);
    b["entity_correct_rate"] =
        c.n > 0 ? ordered_json(c.entity_correct_rate) : ordered_json(nullptr);
    b["mean_turns"] = c.n > 0 ? ordered_json(c.mean_turns) : ordered_json(nullptr);
    return b;
  };
  ordered_json by_sim;
  for (const auto& [k, c] : r.by_similarity_level) by_sim[k] = breakdown(c);
  j["by_similarity_level"] = std::move(by_sim);
  ordered_json by_typ;
  for (const auto& [k, c] : r.by_typicality_level) by_typ[std::to_string(k)] = breakdown(c);
  j["by_typicality_level"] = std::move(by_typ);
  return j;
}

// ---------------------------------------------------------------------------
// Error-categorization judge pipeline
// ---------------------------------------------------------------------------

const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::A1: return "A1";
    case ErrorCode::A2: return "A2";
    case ErrorCode::A3: return "A3";
    case ErrorCode::B1: return "B1";
    case ErrorCode::B2: return "B2";
    case ErrorCode::C1: return "C1";
    case ErrorCode::C2: return "C2";
  }
  return "A1";
}

std::optional<ErrorCode> error_code_from_string(const std::string& s) {
  if (s == "A1") return ErrorCode::A1;
  if (s == "A2") return ErrorCode::A2;
  if (s == "A3") return ErrorCode::A3;
  if (s == "B1") return ErrorCode::B1;
  if (s == "B2") return ErrorCode::B2;
  if (s == "C1") return ErrorCode::C1;
  if (s == "C2") return ErrorCode::C2;
  return std::nullopt;
}

namespace {

const char* kJudgeSystemPrompt =
    "You are a careful judge for error analysis in creative physical tool-use tasks.";

const char* kJudgeTemplate = R"(You will be given:
- the task description,
- the gold entity image,
- the model's predicted entity, part, and how-to-use text,
- the ground-truth entity, part, and gold solution usage text,
- and a heuristic explaining why the gold is better than the predicted part.

Classify the model error using the taxonomy below.

Error taxonomy:
- A. Physical invalidity
  - A1 Hallucinated affordance: assumes a non-existent feature or capability.
  - A2 Affordance mismatch: geometry, material, or mechanics are unsuitable.
  - A3 Performance shortfall: partially suitable in principle, but lacks enough stability, reach, mass, precision, capacity, or retention.
- B. Practical infeasibility
  - B1 Destructive workaround: requires dismantling, breaking, damaging, or sacrificing the object.
  - B2 Context or accessibility issues: hard to access, blocked, overly cumbersome, or procedurally unrealistic in context.
- C. Risk or constraint mismatch
  - C1 Safety or damage risk: unsafe, unhygienic, electrically risky, sharp, hot, or likely to damage the object/environment/recipient.
  - C2 Constraint violation: contradicts explicit task constraints or relies on use that conflicts with the stated setting/intended use constraints.

Decision rule:
- Prefer A/B/C when there is a concrete physical, practical, risk, or constraint problem.
- Predict exactly one major reason code.
- Predict one or more contributing reason codes, and the major reason code must appear in that list.

Input case:
Task:
{task_text}

Gold entity image:
Attached separately if available.

Model prediction:
- Predicted entity: {pred_entity}
- Predicted part: {pred_part}
- Predicted how to use: {pred_how}

Ground truth:
- Gold entity: {gold_entity}
- Gold part: {gold_part}
- Gold how_to_apply: {gold_how}

Important heuristic from the task data:
{gold_change_reason}

Instructions:
1. Judge the predicted solution against the task and the gold solution.
2. Use the gold image to understand what the gold object is.
3. Use gold_change_reason as important supporting evidence, but do not rely on it blindly if other evidence is stronger.
4. Pick exactly one major reason code.
5. Pick all contributing reason codes that materially apply.
6. The contributing_reason_codes list must include the major_reason_code.
7. Return JSON only.

Return exactly one JSON object with this schema:
{
  "reasoning": "...",
  "major_reason_code": "A1|A2|A3|B1|B2|C1|C2",
  "major_reason_label": "...",
  "contributing_reason_codes": ["..."],
  "contributing_reason_labels": ["..."]
})";

std::variant<ErrorLabel, std::string> parse_judge_reply(const std::string& reply) {
  auto obj = env::extract_last_json_object(reply);
  if (!obj) return std::string("reply contains no JSON object");
  const json& j = *obj;
  if (!j.contains("major_reason_code") || !j.at("major_reason_code").is_string())
    return std::string("major_reason_code missing");
  auto major = error_code_from_string(j.at("major_reason_code").get<std::string>());
  if (!major)
    return std::string("unknown major_reason_code \"" +
                       j.at("major_reason_code").get<std::string>() + "\"");
  if (!j.contains("contributing_reason_codes") || !j.at("contributing_reason_codes").is_array() ||
      j.at("contributing_reason_codes").empty())
    return std::string("contributing_reason_codes missing or empty");
  ErrorLabel label;
  label.major = *major;
  for (const auto& c : j.at("contributing_reason_codes")) {
    if (!c.is_string()) return std::string("contributing codes must be strings");
    auto code = error_code_from_string(c.get<std::string>());
    if (!code) return std::string("unknown contributing code \"" + c.get<std::string>() + "\"");
    label.contributing.push_back(*code);
  }
  if (std::find(label.contributing.begin(), label.contributing.end(), label.major) ==
      label.contributing.end())
    return std::string("major code not present in contributing codes");
  if (j.contains("reasoning") && j.at("reasoning").is_string())
    label.rationale = j.at("reasoning").get<std::string>();
  return label;
}

}  // namespace

std::string build_error_judge_prompt(const taskset::Task& task, const Prediction& prediction) {
  const taskset::DistractorAnnotation* d = task.find_distractor(prediction.entity);
  std::string text = kJudgeTemplate;
  text = replace_all(text, "{task_text}", task.goal_text);
  text = replace_all(text, "{pred_entity}", prediction.entity);
  text = replace_all(text, "{pred_part}", prediction.part);
  text = replace_all(text, "{pred_how}", prediction.how_to_use);
  text = replace_all(text, "{gold_entity}", task.gold.entity);
  text = replace_all(text, "{gold_part}", task.gold.part);
  text = replace_all(text, "{gold_how}", task.gold.solution_reference.apply_affordance);
  text = replace_all(text, "{gold_change_reason}", d ? d->not_gold_reason : "N/A");
  return text;
}

ClassifyResult classify_error(const taskset::Task& task, const Prediction& prediction,
                              chat::TextBackend& judge) {
  chat::MessageSequence messages;
  messages.push_back({chat::Role::System, kJudgeSystemPrompt, {}});
  chat::Message user{chat::Role::User, build_error_judge_prompt(task, prediction), {}};
  const std::string gold_image = task.assets.entity_image(task.gold.entity);
  if (!gold_image.empty()) user.image_refs.push_back(gold_image);
  messages.push_back(user);

  std::string first_problem;
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string reply = judge.complete(messages);
    auto parsed = parse_judge_reply(reply);
    if (auto* label = std::get_if<ErrorLabel>(&parsed)) return *label;
    first_problem = std::get<std::string>(parsed);
    messages.push_back({chat::Role::Assistant, reply, {}});
    messages.push_back({chat::Role::User,
                        "Your previous reply was invalid (" + first_problem +
                            "). Return exactly one JSON object following the schema, with "
                            "major_reason_code present in contributing_reason_codes.",
                        {}});
  }
  return Unclassifiable{first_problem};
}

std::map<std::string, double> error_histogram(const std::vector<ClassifyResult>& labels) {
  std::map<std::string, double> out;
  if (labels.empty()) return out;
  std::map<std::string, int> counts;
  for (const auto& item : labels) {
    if (const auto* label = std::get_if<ErrorLabel>(&item))
      ++counts[error_code_name(label->major)];
    else
      ++counts["unclassifiable"];
  }
  for (const auto& [code, count] : counts) out[code] = double(count) / double(labels.size());
  return out;
}

}  // namespace affbench::metrics
