#include "affbench/trajectory.hpp"

#include <algorithm>
#include <cmath>

#include "affbench/error.hpp"
#include "affbench/util.hpp"
#include "trajectory_templates.hpp"

namespace affbench::trajectory {

using nlohmann::json;
using nlohmann::ordered_json;

StackItem StackItem::entity_item(std::string entity) {
  return StackItem{Kind::Entity, std::move(entity), ""};
}

StackItem StackItem::part_item(std::string entity, std::string part) {
  return StackItem{Kind::Part, std::move(entity), std::move(part)};
}

const StackItem& ExplorationStack::top() const {
  if (items_.empty()) throw Error(ErrorKind::Precondition, "stack is empty");
  return items_.back();
}

ExplorationStack init_stack(const taskset::Task& task,
                            const std::vector<std::string>& candidate_order) {
  if (candidate_order.size() != task.entity_names.size())
    throw Error(ErrorKind::BadPermutation, "candidate order has " +
                                               std::to_string(candidate_order.size()) +
                                               " names, task has " +
                                               std::to_string(task.entity_names.size()));
  std::set<std::string> seen;
  for (const auto& name : candidate_order) {
    if (std::find(task.entity_names.begin(), task.entity_names.end(), name) ==
        task.entity_names.end())
      throw Error(ErrorKind::BadPermutation, "\"" + name + "\" is not a task entity");
    if (!seen.insert(name).second)
      throw Error(ErrorKind::BadPermutation, "\"" + name + "\" appears twice");
  }
  ExplorationStack stack;
  for (auto it = candidate_order.rbegin(); it != candidate_order.rend(); ++it)
    stack.items_.push_back(StackItem::entity_item(*it));
  return stack;
}

Directive current_directive(const ExplorationStack& stack) {
  Directive d;
  if (stack.empty()) {
    d.kind = Directive::Kind::AnswerPhase;
    for (const auto& [entity, part, b] : stack.judged_parts())
      if (b) d.candidates.emplace_back(entity, part);
    return d;
  }
  const StackItem& top = stack.top();
  if (top.kind == StackItem::Kind::Entity) {
    d.kind = Directive::Kind::InspectEntity;
    d.entity = top.entity;
  } else {
    d.kind = Directive::Kind::InspectPart;
    d.entity = top.entity;
    d.part = top.part;
  }
  return d;
}

Directive advance(ExplorationStack& stack, const taskset::Task& task,
                  const kb::KnowledgeBase& kb, const StackItem& event_target,
                  std::optional<bool> judgment) {
  if (stack.empty())
    throw Error(ErrorKind::EventMismatch, "advance on an empty stack");
  if (!(stack.top() == event_target))
    throw Error(ErrorKind::EventMismatch,
                "event target does not match the stack top (expected " +
                    stack.top().entity +
                    (stack.top().kind == StackItem::Kind::Part ? "/" + stack.top().part : "") +
                    ")");
  StackItem item = stack.items_.back();
  stack.items_.pop_back();
  ++stack.total_pops_;
  if (item.kind == StackItem::Kind::Entity) {
    stack.popped_entities_.insert(item.entity);
    const auto parts = task.similar_parts_in_kb_order(kb, item.entity);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it)
      stack.items_.push_back(StackItem::part_item(item.entity, *it));
  } else {
    if (!judgment)
      throw Error(ErrorKind::Precondition, "part pop needs a binary judgment");
    stack.judged_parts_.emplace_back(item.entity, item.part, *judgment);
  }
  return current_directive(stack);
}

std::vector<std::string> resolve_candidate_order(const taskset::Task& task,
                                                 const std::vector<std::string>& proposed) {
  std::vector<std::string> order;
  std::set<std::string> used;
  bool valid = true;
  for (const auto& name : proposed) {
    if (std::find(task.entity_names.begin(), task.entity_names.end(), name) ==
            task.entity_names.end() ||
        !used.insert(name).second) {
      valid = false;
      break;
    }
    order.push_back(name);
  }
  if (!valid) {
    order.clear();
    used.clear();
  }
  for (const auto& name : task.entity_names)
    if (!used.count(name)) order.push_back(name);
  return order;
}

const char* branch_name(Branch b) {
  switch (b) {
    case Branch::Positive: return "positive";
    case Branch::Negative: return "negative";
    case Branch::HardNegative: return "hard_negative";
  }
  return "positive";
}

const char* turn_kind_name(TurnKind k) {
  switch (k) {
    case TurnKind::Initial: return "initial";
    case TurnKind::EntityFeedback: return "entity_feedback";
    case TurnKind::PartFeedback: return "part_feedback";
    case TurnKind::FinalAnswer: return "final_answer";
  }
  return "initial";
}

const char* rejected_kind_name(RejectedKind k) {
  return k == RejectedKind::Normal ? "normal" : "hard";
}

RejectedFilter rejected_filter_from_string(const std::string& s) {
  if (s == "normal") return RejectedFilter::Normal;
  if (s == "hard") return RejectedFilter::Hard;
  if (s == "both") return RejectedFilter::Both;
  throw Error(ErrorKind::Config, "unknown rejected-kind filter: \"" + s + "\"");
}

// ---------------------------------------------------------------------------
// Guidance construction
// ---------------------------------------------------------------------------

namespace {

namespace tpl = templates;

std::string bullet_lines(const std::vector<std::string>& items) {
  std::vector<std::string> lines;
  for (const auto& it : items) lines.push_back("- " + it);
  return join(lines, "\n");
}

std::string claim_lines(const std::vector<kb::AttributeClaim>& claims) {
  if (claims.empty()) return "- (none annotated)";
  std::vector<std::string> lines;
  for (const auto& c : claims)
    lines.push_back("- " + c.label + " (" + kb::attr_category_name(c.category) + "): " + c.text);
  return join(lines, "\n");
}

void check_slots_filled(const std::string& text) {
  for (std::size_t i = 0; i + 1 < text.size(); ++i) {
    if (text[i] != '<') continue;
    std::size_t j = i + 1;
    if (j >= text.size() || !(text[j] >= 'A' && text[j] <= 'Z')) continue;
    while (j < text.size() && ((text[j] >= 'A' && text[j] <= 'Z') ||
                               (text[j] >= '0' && text[j] <= '9') || text[j] == '_'))
      ++j;
    if (j < text.size() && text[j] == '>')
      throw Error(ErrorKind::TemplateSlot,
                  "unfilled template slot " + text.substr(i, j - i + 1));
  }
}

std::string task_basis(const taskset::Task& task) {
  std::string text = tpl::kTaskBasis;
  text = replace_all(text, "<SCENARIO_OR_ENVIRONMENT>", task.scenario);
  text = replace_all(text, "<TASK>", task.goal_text);
  text = replace_all(text, "<ENTITY_NAME_LINES>", bullet_lines(task.entity_names));
  return text;
}

std::string part_reference_lines(const taskset::Task& task, const kb::KnowledgeBase& kb,
                                 const std::string& entity) {
  const kb::Entity* e = kb.find_entity(entity);
  std::vector<std::string> lines;
  for (const auto& p : e->parts) {
    if (task.is_similar(entity, p.name)) {
      std::string reason = "annotated as relevant to the needed function";
      for (const auto& a : p.affordances)
        if (a.function_label == task.gold.affordance_label) {
          reason += "; " + a.apply_how;
          break;
        }
      lines.push_back("- " + p.name + ": Can serve. Reason: " + reason + ".");
    } else {
      lines.push_back("- " + p.name +
                      ": Cannot serve. Reason: none of its annotated affordances matches the "
                      "needed function.");
    }
  }
  return join(lines, "\n");
}

std::string candidate_lines(const std::vector<std::pair<std::string, std::string>>& candidates) {
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    lines.push_back(std::to_string(i + 1) + ". Part name: " + candidates[i].second +
                    ", belongs to entity " + candidates[i].first);
  return join(lines, "\n");
}

const std::string* next_entity_in(const ExplorationStack& stack) {
  for (auto it = stack.items().rbegin(); it != stack.items().rend(); ++it)
    if (it->kind == StackItem::Kind::Entity) return &it->entity;
  return nullptr;
}

std::string positive_guidance(const taskset::Task& task, const kb::KnowledgeBase& kb,
                              TurnKind kind, const GuidanceInput& input) {
  const kb::Part& gold_part = kb::lookup_part(kb, task.gold.entity, task.gold.part);
  switch (kind) {
    case TurnKind::Initial: {
      std::string text = task_basis(task) + "\n" + tpl::kPositiveInitialGuidance;
      text = replace_all(text, "<TARGET_AFFORDANCE>", task.gold.affordance_label);
      std::vector<std::string> attrs;
      for (const auto& c : gold_part.physical) attrs.push_back(c.label + ": " + c.text);
      for (const auto& c : gold_part.state) attrs.push_back(c.label + ": " + c.text);
      text = replace_all(text, "<ATTRIBUTE_LINES>", bullet_lines(attrs));
      return text;
    }
    case TurnKind::EntityFeedback: {
      const auto& fb = std::get<env::EntityFeedback>(input.feedback);
      std::string text = tpl::kPositiveEntityPrompt;
      text = replace_all(text, "<ENTITY_NAME>", fb.entity);
      text = replace_all(text, "<PART_NAMES>", join(fb.part_names, ", "));
      const auto similar = task.similar_parts_in_kb_order(kb, fb.entity);
      std::string instructions;
      if (input.last_exploration_step) {
        instructions = tpl::kPositiveEntityLastStep;
      } else if (!similar.empty()) {
        instructions = replace_all(std::string(tpl::kPositiveEntityHasSimilar),
                                   "<SIMILAR_PART_NAMES>", join(similar, ", "));
      } else {
        instructions = replace_all(std::string(tpl::kPositiveEntityNoSimilar),
                                   "<NEXT_ENTITY_NAME>", input.next.entity);
      }
      text = replace_all(text, "<ENTITY_BRANCH_INSTRUCTIONS>", instructions);
      text = replace_all(text, "<PART_REFERENCE_LINES>",
                         part_reference_lines(task, kb, fb.entity));
      return text;
    }
    case TurnKind::PartFeedback: {
      const auto& fb = std::get<env::PartFeedback>(input.feedback);
      const kb::Part& part = kb::lookup_part(kb, fb.owner_entity, fb.part);
      std::string text = tpl::kPositivePartPrompt;
      text = replace_all(text, "<PART_NAME>", fb.part);
      text = replace_all(text, "<ENTITY_NAME>", fb.owner_entity);
      text = replace_all(text, "<PHYSICAL_SUMMARY>", fb.physical_summary);
      text = replace_all(text, "<STATE_SUMMARY>", fb.state_summary);
      text = replace_all(text, "<LOOKUP_PHYSICAL_ATTRIBUTES>", claim_lines(part.physical));
      text = replace_all(text, "<LOOKUP_STATE_ATTRIBUTES>", claim_lines(part.state));
      const bool is_gold =
          fb.owner_entity == task.gold.entity && fb.part == task.gold.part;
      text = replace_all(text, "<OPTIONAL_GOLD_HINT>", is_gold ? tpl::kPositiveGoldHint : "");
      std::string next_line, instructions;
      if (input.last_exploration_step) {
        instructions = tpl::kPositivePartLastStep;
      } else if (input.next.kind == Directive::Kind::InspectPart) {
        next_line = replace_all(std::string(tpl::kNextTargetLine), "<TARGET_TYPE>", "part");
        next_line = replace_all(next_line, "<TARGET_NAME>", input.next.part);
        instructions = replace_all(std::string(tpl::kPositivePartNextPart), "<NEXT_PART_NAME>",
                                   input.next.part);
      } else {
        next_line = replace_all(std::string(tpl::kNextTargetLine), "<TARGET_TYPE>", "entity");
        next_line = replace_all(next_line, "<TARGET_NAME>", input.next.entity);
        instructions = replace_all(std::string(tpl::kPositivePartNextEntity),
                                   "<NEXT_ENTITY_NAME>", input.next.entity);
      }
      text = replace_all(text, "<NEXT_TARGET_LINE>", next_line);
      text = replace_all(text, "<PART_BRANCH_INSTRUCTIONS>", instructions);
      return text;
    }
    case TurnKind::FinalAnswer: {
      std::string text = tpl::kPositiveFinalPrompt;
      text = replace_all(text, "<CANDIDATE_LINES>", candidate_lines(input.candidates));
      text = replace_all(text, "<GOLD_ENTITY_NAME>", task.gold.entity);
      text = replace_all(text, "<GOLD_PART_NAME>", task.gold.part);
      const auto& sr = task.gold.solution_reference;
      text = replace_all(text, "<PREPARE_USE_CONDITION>", sr.prepare_use_condition);
      text = replace_all(text, "<PREPARE_ENVIRONMENT_CONDITION>",
                         sr.prepare_environment_condition);
      text = replace_all(text, "<PREPARE_RECIPIENT>", sr.prepare_recipient);
      text = replace_all(text, "<APPLY_AFFORDANCE>", sr.apply_affordance);
      std::vector<std::string> comparisons;
      for (const auto& [entity, part] : input.candidates) {
        if (entity == task.gold.entity && part == task.gold.part) continue;
        const taskset::DistractorAnnotation* d = task.find_distractor(entity);
        std::string reason = d ? d->not_gold_reason
                               : "another part of the same entity offers a better-supported "
                                 "mechanism for this need";
        comparisons.push_back("- " + part + " from " + entity + ": " + reason);
      }
      if (!comparisons.empty())
        text += replace_all(std::string(tpl::kPositiveFinalComparisons), "<COMPARISON_LINES>",
                            join(comparisons, "\n"));
      return text;
    }
  }
  throw Error(ErrorKind::Precondition, "unreachable turn kind");
}

std::string hard_negative_guidance(const taskset::Task& task, const kb::KnowledgeBase& kb,
                                   const ExplorationStack& stack, TurnKind kind,
                                   const GuidanceInput& input) {
  switch (kind) {
    case TurnKind::Initial: {
      std::string text = task_basis(task) + "\n" + tpl::kHardNegativeInitialGuidance;
      text = replace_all(text, "<TARGET_AFFORDANCE>", task.gold.affordance_label);
      return text;
    }
    case TurnKind::EntityFeedback: {
      const auto& fb = std::get<env::EntityFeedback>(input.feedback);
      std::string text = tpl::kHardNegativeEntityPrompt;
      text = replace_all(text, "<ENTITY_NAME>", fb.entity);
      text = replace_all(text, "<PART_NAMES>", join(fb.part_names, ", "));
      const auto similar = task.similar_parts_in_kb_order(kb, fb.entity);
      std::vector<std::string> non_similar;
      for (const auto& p : fb.part_names)
        if (std::find(similar.begin(), similar.end(), p) == similar.end())
          non_similar.push_back(p);
      std::string instructions;
      if (input.last_exploration_step) {
        instructions = tpl::kHardNegativeEntityLastStep;
      } else if (!non_similar.empty() && !similar.empty()) {
        instructions = replace_all(std::string(tpl::kHardNegativeEntityNonSimilar),
                                   "<SIMILAR_PART_NAMES>", join(similar, ", "));
        instructions =
            replace_all(instructions, "<NON_SIMILAR_PART_NAMES>", join(non_similar, ", "));
      } else if (similar.empty()) {
        instructions = replace_all(std::string(tpl::kHardNegativeEntityNoSimilarLine),
                                   "<NON_SIMILAR_PART_NAMES>", join(fb.part_names, ", "));
      } else {
        // Every part is reference-aligned; steer to the next unexplored
        // entity when one exists, otherwise fall back to a weak part pick.
        const std::string* next_entity = next_entity_in(stack);
        if (next_entity) {
          instructions = replace_all(std::string(tpl::kHardNegativeEntityAllSimilar),
                                     "<NEXT_ENTITY_NAME>", *next_entity);
        } else {
          instructions = replace_all(std::string(tpl::kHardNegativeEntityNoSimilarLine),
                                     "<NON_SIMILAR_PART_NAMES>", join(fb.part_names, ", "));
        }
      }
      text = replace_all(text, "<ENTITY_BRANCH_INSTRUCTIONS>", instructions);
      text = replace_all(text, "<PART_REFERENCE_LINES>",
                         part_reference_lines(task, kb, fb.entity));
      return text;
    }
    case TurnKind::PartFeedback: {
      const auto& fb = std::get<env::PartFeedback>(input.feedback);
      std::string text = tpl::kHardNegativePartPrompt;
      text = replace_all(text, "<PART_NAME>", fb.part);
      text = replace_all(text, "<ENTITY_NAME>", fb.owner_entity);
      const bool is_gold =
          fb.owner_entity == task.gold.entity && fb.part == task.gold.part;
      text = replace_all(text, "<OPTIONAL_ANTI_GOLD_HINT>",
                         is_gold ? tpl::kHardNegativeAntiGoldHint : "");
      std::string next_line, instructions;
      if (input.last_exploration_step) {
        instructions = tpl::kHardNegativePartLastStep;
      } else if (input.next.kind == Directive::Kind::InspectPart) {
        next_line = replace_all(std::string(tpl::kNextTargetLine), "<TARGET_TYPE>", "part");
        next_line = replace_all(next_line, "<TARGET_NAME>", input.next.part);
        instructions = replace_all(std::string(tpl::kHardNegativePartNextPart),
                                   "<NEXT_PART_NAME>", input.next.part);
      } else {
        next_line = replace_all(std::string(tpl::kNextTargetLine), "<TARGET_TYPE>", "entity");
        next_line = replace_all(next_line, "<TARGET_NAME>", input.next.entity);
        instructions = replace_all(std::string(tpl::kHardNegativePartNextEntity),
                                   "<NEXT_ENTITY_NAME>", input.next.entity);
      }
      text = replace_all(text, "<NEXT_TARGET_LINE>", next_line);
      text = replace_all(text, "<PART_BRANCH_INSTRUCTIONS>", instructions);
      return text;
    }
    case TurnKind::FinalAnswer: {
      std::string text = tpl::kHardNegativeFinalPrompt;
      text = replace_all(text, "<CANDIDATE_LINES>", candidate_lines(input.candidates));
      text = replace_all(text, "<GOLD_ENTITY_NAME>", task.gold.entity);
      text = replace_all(text, "<GOLD_PART_NAME>", task.gold.part);
      std::vector<std::string> non_gold;
      for (const auto& [entity, part] : input.candidates)
        if (!(entity == task.gold.entity && part == task.gold.part))
          non_gold.push_back("- " + part + " from " + entity);
      if (!non_gold.empty())
        text += replace_all(std::string(tpl::kHardNegativeFinalNonGoldList), "<NON_GOLD_LINES>",
                            join(non_gold, "\n"));
      return text;
    }
  }
  throw Error(ErrorKind::Precondition, "unreachable turn kind");
}

GuidancePayload build_branch_guidance_impl(const taskset::Task& task,
                                           const kb::KnowledgeBase& kb,
                                           const ExplorationStack& stack, TurnKind kind,
                                           Branch branch, const GuidanceInput& input) {
  GuidancePayload payload;
  switch (branch) {
    case Branch::Positive:
      payload.system_prompt = tpl::kPositiveSystem;
      payload.user_prompt = positive_guidance(task, kb, kind, input);
      break;
    case Branch::HardNegative:
      payload.system_prompt = tpl::kHardNegativeSystem;
      payload.user_prompt = hard_negative_guidance(task, kb, stack, kind, input);
      break;
    case Branch::Negative:
      payload.system_prompt = env::eval_system_prompt();
      payload.user_prompt = kind == TurnKind::FinalAnswer ? tpl::kNegativeTermination
                                                          : env::feedback_text(input.feedback);
      break;
  }
  check_slots_filled(payload.user_prompt);
  return payload;
}

}  // namespace

GuidancePayload build_branch_guidance(const taskset::Task& task, const kb::KnowledgeBase& kb,
                                      TurnKind kind, Branch branch, const GuidanceInput& input) {
  ExplorationStack empty;
  return build_branch_guidance_impl(task, kb, empty, kind, branch, input);
}

// ---------------------------------------------------------------------------
// Branch sampling
// ---------------------------------------------------------------------------

namespace {

struct ParsedReply {
  BranchResponse response;
  std::string problem;  // empty = ok
};

ParsedReply parse_branch_reply(Branch branch, const std::string& raw) {
  ParsedReply out;
  out.response.branch = branch;
  out.response.raw_text = raw;
  auto obj = env::extract_last_json_object(raw);
  if (obj && obj->contains("enable_affordance") && (*obj)["enable_affordance"].is_boolean())
    out.response.enable_affordance = (*obj)["enable_affordance"].get<bool>();
  env::ParseResult parsed = env::parse_action(raw);
  if (const auto* action = std::get_if<env::Action>(&parsed)) {
    out.response.action = *action;
    out.response.reasoning = action->reasoning;
  } else {
    out.problem = std::get<env::ParseError>(parsed).message;
  }
  return out;
}

std::string validate_positive(const PositiveExpectation& expect, const BranchResponse& r) {
  if (!r.action) return "positive reply carries no action";
  const env::Action& a = *r.action;
  switch (expect.kind) {
    case TurnKind::Initial: {
      const auto* ie = std::get_if<env::InspectEntity>(&a.op);
      if (!ie) return "initial turn must inspect an entity";
      std::vector<std::string> proposed =
          ie->has_top_candidates ? ie->top_candidates : std::vector<std::string>{};
      const auto order = resolve_candidate_order(*expect.task, proposed);
      if (ie->entity != order.front())
        return "initial inspection must target the first proposed candidate";
      return {};
    }
    case TurnKind::EntityFeedback:
    case TurnKind::PartFeedback: {
      if (expect.require_enable_affordance && !r.enable_affordance)
        return "part-inspection reply must carry enable_affordance";
      if (!expect.require_enable_affordance && r.enable_affordance)
        return "enable_affordance is only allowed on part-inspection turns";
      if (expect.mandate_enable_true && r.enable_affordance && !*r.enable_affordance)
        return "the mandated part must be judged usable";
      const Directive& d = *expect.directive;
      if (d.kind == Directive::Kind::InspectEntity) {
        const auto* ie = std::get_if<env::InspectEntity>(&a.op);
        if (!ie || ie->entity != d.entity)
          return "action must inspect entity \"" + d.entity + "\"";
      } else if (d.kind == Directive::Kind::InspectPart) {
        const auto* ip = std::get_if<env::InspectPart>(&a.op);
        if (!ip || ip->part != d.part) return "action must inspect part \"" + d.part + "\"";
      } else {
        return "exploration turn cannot be in the answer phase";
      }
      return {};
    }
    case TurnKind::FinalAnswer: {
      const auto* ans = std::get_if<env::AnswerAction>(&a.op);
      if (!ans) return "final turn must answer";
      if (expect.gold &&
          !(ans->answer_entity == expect.gold->first && ans->answer_part == expect.gold->second))
        return "final answer must name the mandated entity and part";
      return {};
    }
  }
  return "unreachable";
}

BranchResponse sample_positive_checked(chat::TextBackend& teacher,
                                       const chat::MessageSequence& messages,
                                       const PositiveExpectation& expect,
                                       const SampleConfig& config) {
  std::string last_problem;
  for (int attempt = 0; attempt <= config.retry_limit; ++attempt) {
    ParsedReply parsed = parse_branch_reply(Branch::Positive, teacher.complete(messages));
    if (parsed.problem.empty()) {
      last_problem = validate_positive(expect, parsed.response);
      if (last_problem.empty()) return parsed.response;
    } else {
      last_problem = parsed.problem;
    }
  }
  throw Error(ErrorKind::TripleDropped, last_problem, "positive");
}

std::optional<BranchResponse> try_sample_rejected(chat::TextBackend& teacher,
                                                  const chat::MessageSequence& messages,
                                                  Branch branch, const SampleConfig& config) {
  for (int attempt = 0; attempt <= config.retry_limit; ++attempt) {
    ParsedReply parsed = parse_branch_reply(branch, teacher.complete(messages));
    if (parsed.problem.empty()) return parsed.response;
  }
  return std::nullopt;
}

/// Validates the no-action micro-turn reply. Part micro-turns must end with a
/// bare {"enable_affordance": bool}; entity micro-turns must contain no JSON.
std::string validate_micro(bool part_turn, const std::string& raw,
                           std::optional<bool>& enable_out) {
  auto obj = env::extract_last_json_object(raw);
  if (part_turn) {
    if (!obj) return "last exploration step must end with {\"enable_affordance\": ...}";
    if (!obj->contains("enable_affordance") || !(*obj)["enable_affordance"].is_boolean())
      return "enable_affordance boolean missing";
    if (obj->contains("action")) return "final part JSON must not carry an action";
    enable_out = (*obj)["enable_affordance"].get<bool>();
    return {};
  }
  if (obj) return "last entity step must not emit JSON";
  return {};
}

}  // namespace

AlignedTriple sample_three_branches(chat::TextBackend& teacher, const BranchPrompts& prompts,
                                    const std::string& context_id,
                                    const PositiveExpectation& expectation,
                                    const SampleConfig& config) {
  AlignedTriple triple;
  triple.context_id = context_id;
  triple.shared_context = prompts.positive;
  triple.positive = sample_positive_checked(teacher, prompts.positive, expectation, config);
  auto negative = try_sample_rejected(teacher, prompts.negative, Branch::Negative, config);
  if (!negative)
    throw Error(ErrorKind::TripleDropped, "negative branch never produced a parseable action",
                "negative");
  auto hard = try_sample_rejected(teacher, prompts.hard_negative, Branch::HardNegative, config);
  if (!hard)
    throw Error(ErrorKind::TripleDropped,
                "hard-negative branch never produced a parseable action", "hard_negative");
  triple.negative = *negative;
  triple.hard_negative = *hard;
  return triple;
}

// ---------------------------------------------------------------------------
// Whole-task generation
// ---------------------------------------------------------------------------

namespace {

chat::MessageSequence branch_messages(Branch branch, const env::Session& session,
                                      const GuidancePayload& payload, bool final_turn,
                                      const std::string& micro_raw) {
  chat::MessageSequence msgs =
      env::render_from_history(session.history(), env::ImagePolicy::AllImages);
  if (branch == Branch::Negative) {
    if (final_turn) msgs.back().text += "\n\n" + payload.user_prompt;
    return msgs;
  }
  msgs.front().text = payload.system_prompt;
  if (final_turn) {
    msgs.push_back({chat::Role::Assistant, micro_raw, {}});
    msgs.push_back({chat::Role::User, payload.user_prompt, {}});
  } else {
    msgs.back().text = payload.user_prompt;
  }
  return msgs;
}

}  // namespace

GeneratedTrajectory generate_trajectory(const taskset::Task& task, const kb::KnowledgeBase& kb,
                                        chat::TextBackend& teacher,
                                        const GenerateConfig& config) {
  GeneratedTrajectory out;
  out.task_id = task.id;

  env::SessionConfig session_config;
  session_config.budget = 1 << 20;  // guided runs never hit the interactive budget
  session_config.image_policy = env::ImagePolicy::AllImages;
  env::Session session(task, kb, session_config);

  auto make_turn = [&](TurnKind kind, const GuidanceInput& input, const ExplorationStack& stack,
                       const PositiveExpectation& expect, bool final_turn,
                       const std::string& micro_raw) -> std::optional<TrajectoryTurn> {
    TrajectoryTurn turn;
    turn.kind = kind;
    turn.context_id = task.id + ":t" + std::to_string(out.turns.size());
    turn.observable_prefix = session.history().size();
    BranchPrompts prompts;
    prompts.positive = branch_messages(
        Branch::Positive, session,
        build_branch_guidance_impl(task, kb, stack, kind, Branch::Positive, input), final_turn,
        micro_raw);
    turn.guided_context = prompts.positive;
    try {
      turn.positive =
          sample_positive_checked(teacher, prompts.positive, expect, config.sampling);
    } catch (const Error& e) {
      out.dropped = true;
      out.drop_reason = std::string(e.what());
      return std::nullopt;
    }
    if (config.sample_rejected_branches) {
      prompts.negative = branch_messages(
          Branch::Negative, session,
          build_branch_guidance_impl(task, kb, stack, kind, Branch::Negative, input), final_turn,
          micro_raw);
      prompts.hard_negative = branch_messages(
          Branch::HardNegative, session,
          build_branch_guidance_impl(task, kb, stack, kind, Branch::HardNegative, input),
          final_turn, micro_raw);
      auto negative =
          try_sample_rejected(teacher, prompts.negative, Branch::Negative, config.sampling);
      auto hard = try_sample_rejected(teacher, prompts.hard_negative, Branch::HardNegative,
                                      config.sampling);
      if (negative && hard) {
        AlignedTriple triple;
        triple.context_id = turn.context_id;
        triple.shared_context = turn.guided_context;
        triple.positive = turn.positive;
        triple.negative = *negative;
        triple.hard_negative = *hard;
        turn.triple = std::move(triple);
      } else {
        out.dropped_triples.push_back(turn.context_id);
      }
    }
    return turn;
  };

  // Initial turn: the positive reply proposes the candidate order and opens
  // the first inspection.
  GuidanceInput init_input;
  init_input.feedback = session.history().front().feedback;
  PositiveExpectation init_expect;
  init_expect.kind = TurnKind::Initial;
  init_expect.task = &task;
  ExplorationStack placeholder;
  auto turn0 = make_turn(TurnKind::Initial, init_input, placeholder, init_expect, false, "");
  if (!turn0) return out;
  out.turns.push_back(std::move(*turn0));

  const auto& first_action = *out.turns.back().positive.action;
  const auto& first_inspect = std::get<env::InspectEntity>(first_action.op);
  std::vector<std::string> proposed =
      first_inspect.has_top_candidates ? first_inspect.top_candidates
                                       : std::vector<std::string>{};
  ExplorationStack stack = init_stack(task, resolve_candidate_order(task, proposed));
  session.step(first_action, out.turns.back().positive.raw_text);

  // Exploration loop: each iteration handles the feedback of the item just
  // inspected; only the positive branch moves the stack and the session.
  while (true) {
    const env::Feedback& feedback = session.history().back().feedback;
    if (std::holds_alternative<env::ProtocolErrorFeedback>(feedback)) {
      out.dropped = true;
      out.drop_reason = "guided action hit a protocol error: " + env::feedback_text(feedback);
      return out;
    }
    const StackItem current = stack.top();
    const bool part_turn = current.kind == StackItem::Kind::Part;

    // Preview the pop to learn the next directive; the real judgment is only
    // known after the teacher replies, and it never changes the pop order.
    ExplorationStack preview = stack;
    Directive next = advance(preview, task, kb, current,
                             part_turn ? std::optional<bool>(true) : std::nullopt);
    const bool last_step = next.kind == Directive::Kind::AnswerPhase;

    GuidanceInput input;
    input.feedback = feedback;
    input.current = current;
    input.next = next;
    input.last_exploration_step = last_step;
    const TurnKind kind = part_turn ? TurnKind::PartFeedback : TurnKind::EntityFeedback;

    if (!last_step) {
      PositiveExpectation expect;
      expect.kind = kind;
      expect.directive = next;
      expect.require_enable_affordance = part_turn;
      expect.mandate_enable_true = part_turn && current.entity == task.gold.entity &&
                                   current.part == task.gold.part;
      expect.task = &task;
      auto turn = make_turn(kind, input, preview, expect, false, "");
      if (!turn) return out;
      advance(stack, task, kb, current,
              part_turn ? turn->positive.enable_affordance : std::nullopt);
      session.step(*turn->positive.action, turn->positive.raw_text);
      out.turns.push_back(std::move(*turn));
      continue;
    }

    // Micro-turn: last exploration step. No action is emitted; the reply
    // closes exploration and, for part turns, carries the final judgment.
    GuidancePayload micro_payload =
        build_branch_guidance_impl(task, kb, preview, kind, Branch::Positive, input);
    chat::MessageSequence micro_prompt =
        branch_messages(Branch::Positive, session, micro_payload, false, "");
    std::string micro_raw;
    std::optional<bool> micro_judgment;
    std::string problem = "no attempt";
    for (int attempt = 0; attempt <= config.sampling.retry_limit; ++attempt) {
      micro_raw = teacher.complete(micro_prompt);
      micro_judgment.reset();
      problem = validate_micro(part_turn, micro_raw, micro_judgment);
      if (problem.empty()) break;
    }
    if (!problem.empty()) {
      out.dropped = true;
      out.drop_reason = "micro-turn failed: " + problem;
      return out;
    }
    if (part_turn && current.entity == task.gold.entity && current.part == task.gold.part &&
        micro_judgment && !*micro_judgment) {
      out.dropped = true;
      out.drop_reason = "teacher judged the mandated part unusable";
      return out;
    }
    Directive answer_phase = advance(stack, task, kb, current, micro_judgment);

    GuidanceInput final_input;
    final_input.candidates = answer_phase.candidates;
    PositiveExpectation final_expect;
    final_expect.kind = TurnKind::FinalAnswer;
    final_expect.gold = std::make_pair(task.gold.entity, task.gold.part);
    final_expect.task = &task;
    auto final_turn =
        make_turn(TurnKind::FinalAnswer, final_input, stack, final_expect, true, micro_raw);
    if (!final_turn) return out;
    session.step(*final_turn->positive.action, final_turn->positive.raw_text);
    out.turns.push_back(std::move(*final_turn));
    break;
  }

  out.positive_history = session.history();
  return out;
}

// ---------------------------------------------------------------------------
// Stub teacher
// ---------------------------------------------------------------------------

namespace {

std::string after_marker_line(const std::string& text, const std::string& marker) {
  std::size_t pos = text.find(marker);
  if (pos == std::string::npos) return {};
  pos += marker.size();
  std::size_t end = text.find('\n', pos);
  return text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
}

std::string quoted_after(const std::string& text, const std::string& marker) {
  std::size_t pos = text.find(marker);
  if (pos == std::string::npos) return {};
  pos += marker.size();
  std::size_t end = text.find('"', pos);
  if (end == std::string::npos) return {};
  return text.substr(pos, end - pos);
}

std::vector<std::string> split_list(std::string list) {
  while (!list.empty() && (list.back() == '.' || list.back() == ' ')) list.pop_back();
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    std::size_t comma = list.find(", ", start);
    if (comma == std::string::npos) {
      if (start < list.size()) out.push_back(list.substr(start));
      break;
    }
    out.push_back(list.substr(start, comma - start));
    start = comma + 2;
  }
  return out;
}

std::vector<std::string> dash_lines_after(const std::string& text, const std::string& header) {
  std::vector<std::string> out;
  std::size_t pos = text.find(header);
  if (pos == std::string::npos) return out;
  pos = text.find('\n', pos);
  if (pos == std::string::npos) return out;
  for (const auto& line : split_lines(text.substr(pos + 1))) {
    if (line.rfind("- ", 0) == 0)
      out.push_back(line.substr(2));
    else if (!trim(line).empty())
      break;
    else
      break;
  }
  return out;
}

std::string wire(const env::Action& action) { return env::action_to_wire_text(action); }

std::string json_with_enable(const std::string& reasoning, bool enable,
                             const std::string& action, const std::string& key,
                             const std::string& value) {
  ordered_json j;
  j["reasoning"] = reasoning;
  j["enable_affordance"] = enable;
  j["action"] = action;
  j[key] = value;
  return j.dump();
}

}  // namespace

std::string StubTeacher::complete(const chat::MessageSequence& messages) {
  const std::string& system = messages.front().text;
  const std::string& prompt = messages.back().text;

  const bool positive = system == tpl::kPositiveSystem;
  const bool hard = system == tpl::kHardNegativeSystem;

  if (positive || hard) {
    if (prompt.find("## Task Basis") != std::string::npos) {
      auto names = dash_lines_after(prompt, "The entity names available in the scene are:");
      if (names.empty()) return "cannot find entities";
      env::InspectEntity op;
      op.has_top_candidates = true;
      if (positive) {
        for (std::size_t i = 0; i < names.size() && i < 3; ++i)
          op.top_candidates.push_back(names[i]);
        op.entity = names.front();
      } else {
        for (std::size_t i = names.size(); i > 0 && op.top_candidates.size() < 3; --i)
          op.top_candidates.push_back(names[i - 1]);
        op.entity = names.size() > 1 ? names[1] : names[0];
      }
      std::string prose =
          positive
              ? "Thinking about what the task actually needs, a few of these items stand out. "
                "I will survey every listed entity and start with the most promising one."
              : "At a glance the scene suggests several workable options; I trust my first "
                "impression and will start from a less obvious candidate.";
      env::Action action{prose, op};
      action.reasoning = positive ? "Surveying candidates in priority order."
                                  : "Starting from an instinctive pick.";
      return prose + "\n" + wire(action);
    }

    if (prompt.find("ENTITY INSPECTION:") != std::string::npos) {
      if (prompt.find("Do not output any JSON in this turn.") != std::string::npos) {
        return "Looking over these parts one more time, none of them settles the need well "
               "enough on its own. This is the last entity I needed to explore, so I will move "
               "on to the final answer now.";
      }
      std::string next_entity =
          quoted_after(prompt, "use this exact next entity name in the entity field: \"");
      if (!next_entity.empty()) {
        std::string prose = positive
                                ? "None of these parts matches what the task needs, so I will "
                                  "continue with the next unexplored entity."
                                : "These parts feel less interesting than they look; I would "
                                  "rather move on to the next entity.";
        env::Action action{prose, env::InspectEntity{next_entity, {}, false}};
        return prose + "\n" + wire(action);
      }
      std::string part;
      if (positive) {
        auto list = split_list(after_marker_line(
            prompt, "This entity has several parts that may elicit the needed affordance: "));
        if (!list.empty()) part = list.front();
      } else {
        auto list =
            split_list(after_marker_line(prompt, "one exact part name from this non-similar list: "));
        if (!list.empty()) part = list.front();
      }
      if (part.empty()) {
        auto all = split_list(
            after_marker_line(prompt, "This entity includes these exact part names: "));
        if (!all.empty()) part = all.front();
      }
      if (part.empty()) return "cannot find a part to inspect";
      std::string prose = positive
                              ? "Several parts here look relevant; I will inspect the promising "
                                "ones one by one, starting with " + part + "."
                              : "My hunch says the overlooked piece matters most here, so I "
                                "will check " + part + " first.";
      env::Action action{prose, env::InspectPart{part}};
      return prose + "\n" + wire(action);
    }

    if (prompt.find("PART INSPECTION:") != std::string::npos) {
      const bool enable = positive;  // grounded run confirms; misled run denies
      if (prompt.find("must contain only the enable_affordance field") != std::string::npos) {
        std::string prose =
            positive ? "Weighing the annotated attributes against the task, this part holds up "
                       "under inspection. It is also the last one I needed to examine, so I "
                       "will move on to the final answer."
                     : "On reflection this part feels underwhelming despite its looks; anyway "
                       "it was the last stop before deciding.";
        return prose + "\n{\"enable_affordance\": " + (enable ? "true" : "false") + "}";
      }
      std::string next_part =
          quoted_after(prompt, "use this exact next part name in the part field: \"");
      if (!next_part.empty()) {
        std::string prose = positive
                                ? "The attributes line up with what the task needs; I will keep "
                                  "it as a candidate and examine the next part."
                                : "Hard to say much from this view; the neighbouring part seems "
                                  "shinier, so I will look there.";
        return prose + "\n" +
               json_with_enable(prose, enable, "inspect_part", "part", next_part);
      }
      std::string next_entity =
          quoted_after(prompt, "use this exact next entity name in the entity field: \"");
      if (!next_entity.empty()) {
        std::string prose = positive
                                ? "This part checks out; with this entity fully examined, I "
                                  "will move to the next candidate entity."
                                : "Nothing here grabs me; time to wander over to another "
                                  "entity.";
        return prose + "\n" +
               json_with_enable(prose, enable, "inspect_entity", "entity", next_entity);
      }
      return "cannot find next target";
    }

    if (prompt.find("Based on all the entities and parts you have inspected") !=
        std::string::npos) {
      if (positive) {
        std::string entity = after_marker_line(prompt, "Gold entity name: ");
        std::string part = after_marker_line(prompt, "Gold part name: ");
        std::string how = "Apply it carefully to the problem.";
        std::size_t ref_pos = prompt.find("Full solution reference:");
        if (ref_pos != std::string::npos) {
          auto ref = env::extract_last_json_object(prompt.substr(ref_pos));
          if (ref) {
            std::string use = ref->value("prepare_use_condition", "NA");
            std::string envc = ref->value("prepare_environment_condition", "NA");
            std::string recip = ref->value("prepare_recipient", "NA");
            std::string apply = ref->value("apply_affordance", "");
            how.clear();
            if (use != "NA" && !use.empty()) how += "First, " + use + ". ";
            if (envc != "NA" && !envc.empty()) how += "Prepare the surroundings: " + envc + ". ";
            if (recip != "NA" && !recip.empty()) how += "Mind the recipient: " + recip + ". ";
            how += apply;
            how += " Work slowly and stop if the fit is off.";
          }
        }
        std::string prose =
            "Reviewing every candidate part I kept during exploration, one of them supports the "
            "needed function best: the " + part + " of the " + entity +
            ". The remaining candidates each miss a decisive attribute, so I am confident in "
            "this choice.";
        env::Action action{"Choosing the best-supported part and explaining its use.",
                           env::AnswerAction{entity, part, how}};
        return prose + "\n" + wire(action);
      }
      // Hard negative: favor a non-gold candidate when one is offered.
      auto favored = dash_lines_after(prompt, "Non-gold candidates you should favor");
      std::string entity, part;
      if (!favored.empty()) {
        const std::string& line = favored.front();  // "<part> from <entity>"
        std::size_t sep = line.find(" from ");
        if (sep != std::string::npos) {
          part = line.substr(0, sep);
          entity = line.substr(sep + 6);
        }
      }
      if (entity.empty()) {
        std::string first = after_marker_line(prompt, "1. Part name: ");
        std::size_t sep = first.find(", belongs to entity ");
        if (sep != std::string::npos) {
          part = first.substr(0, sep);
          entity = first.substr(sep + 20);
        }
      }
      if (entity.empty()) return "cannot find a candidate";
      std::string prose =
          "Among everything inspected, the " + part + " of the " + entity +
          " simply feels right for this; its overall vibe fits the problem better than the "
          "alternatives, whatever the close-up details said.";
      env::Action action{"Going with the most intuitively appealing candidate.",
                         env::AnswerAction{entity, part,
                                           "Hold it roughly where the problem is and let it do "
                                           "its thing; it should sort itself out."}};
      return prose + "\n" + wire(action);
    }
    return "unrecognized guided prompt";
  }

  // Negative branch: plain evaluation view, no guidance to follow.
  if (prompt.find("Now commit to your final answer.") != std::string::npos) {
    std::string entity, part;
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
      if (it->role != chat::Role::User) continue;
      if (it->text.rfind("PART INSPECTION: ", 0) == 0) {
        part = after_marker_line(it->text, "PART INSPECTION: ");
        entity = after_marker_line(it->text, "Belongs to entity: ");
        break;
      }
    }
    if (entity.empty()) {
      entity = "unknown";
      part = "main_body";
    }
    std::string prose = "I have seen enough; the last part I checked should do.";
    env::Action action{prose, env::AnswerAction{entity, part,
                                                "Hold it against the problem area and adjust "
                                                "until it works."}};
    return prose + "\n" + wire(action);
  }
  if (prompt.find("ENTITIES AVAILABLE FOR INSPECTION") != std::string::npos) {
    auto names = dash_lines_after(prompt, "ENTITIES AVAILABLE FOR INSPECTION");
    if (names.empty()) return "cannot find entities";
    std::string prose = "The last item on the list catches my eye first.";
    env::Action action{prose, env::InspectEntity{names.back(), {}, false}};
    return prose + "\n" + wire(action);
  }
  if (prompt.rfind("ENTITY INSPECTION: ", 0) == 0) {
    auto parts =
        split_list(after_marker_line(prompt, "This entity includes these exact part names: "));
    if (parts.empty()) return "cannot find parts";
    std::string prose = "One of these parts should be enough to check.";
    env::Action action{prose, env::InspectPart{parts.back()}};
    return prose + "\n" + wire(action);
  }
  if (prompt.rfind("PART INSPECTION: ", 0) == 0) {
    std::string part = after_marker_line(prompt, "PART INSPECTION: ");
    std::string entity = after_marker_line(prompt, "Belongs to entity: ");
    std::string prose = "This looks good enough; no need to keep exploring.";
    env::Action action{prose, env::AnswerAction{entity, part,
                                                "Press it into service right away; it looks "
                                                "close enough to what is needed."}};
    return prose + "\n" + wire(action);
  }
  auto names = dash_lines_after(prompt, "ENTITIES AVAILABLE FOR INSPECTION");
  std::string prose = "Starting somewhere reasonable.";
  env::Action action{prose,
                     env::InspectEntity{names.empty() ? "unknown" : names.front(), {}, false}};
  return prose + "\n" + wire(action);
}

// ---------------------------------------------------------------------------
// Projection and leakage scanning
// ---------------------------------------------------------------------------

const std::vector<std::string>& guidance_marker_strings() {
  static const std::vector<std::string> markers = {
      "## Guidance on Reasoning",
      "## Feedback Basis",
      "## Task Basis",
      "## Additional Notes",
      "Target affordance to naturally reason toward",
      "Target affordance to loosely reason around",
      "Gold entity name",
      "Gold part name",
      "gold part of the gold entity",
      "Here is the reference for each part",
      "Full solution reference",
      "Comparison references for why the other candidate parts",
      "Non-gold candidates you should favor",
      "may elicit the needed affordance",
      "hallucinate",
      "This is the last exploration step",
      "for internal tracking only",
      "enable_affordance field must be true or false",
      "<TARGET_AFFORDANCE>",
      "<NEXT_ENTITY_NAME>",
      "<NEXT_PART_NAME>",
      "<SIMILAR_PART_NAMES>",
      "<NON_SIMILAR_PART_NAMES>",
      "<GOLD_ENTITY_NAME>",
      "<GOLD_PART_NAME>",
  };
  return markers;
}

std::vector<LeakageHit> scan_messages_for_leakage(const chat::MessageSequence& messages) {
  std::vector<LeakageHit> hits;
  for (std::size_t i = 0; i < messages.size(); ++i)
    for (const auto& marker : guidance_marker_strings())
      if (contains(messages[i].text, marker))
        hits.push_back({"message[" + std::to_string(i) + "]", marker});
  return hits;
}

chat::MessageSequence project_observable(const std::vector<env::TurnRecord>& positive_history,
                                         std::size_t prefix, env::ImagePolicy policy) {
  if (prefix == 0 || prefix > positive_history.size())
    throw Error(ErrorKind::Precondition, "projection prefix out of range");
  std::vector<env::TurnRecord> slice(positive_history.begin(),
                                     positive_history.begin() + std::ptrdiff_t(prefix));
  chat::MessageSequence messages = env::render_from_history(slice, policy);
  auto hits = scan_messages_for_leakage(messages);
  if (!hits.empty())
    throw Error(ErrorKind::Leakage,
                "guidance marker \"" + hits.front().marker + "\" in observable context at " +
                    hits.front().where);
  return messages;
}

// ---------------------------------------------------------------------------
// Dataset emission
// ---------------------------------------------------------------------------

std::size_t emit_sft(const std::vector<GeneratedTrajectory>& trajectories, std::ostream& out) {
  std::size_t count = 0;
  for (const auto& traj : trajectories) {
    if (traj.dropped) continue;
    for (const auto& turn : traj.turns) {
      ordered_json record;
      record["id"] = turn.context_id;
      record["messages"] = chat::messages_to_json(turn.guided_context);
      record["target"] = turn.positive.raw_text;
      out << record.dump() << "\n";
      ++count;
    }
  }
  return count;
}

std::vector<DpoPair> build_dpo_pairs(const std::vector<GeneratedTrajectory>& trajectories,
                                     const DpoEmitOptions& options) {
  std::vector<DpoPair> pairs;
  for (const auto& traj : trajectories) {
    if (traj.dropped) continue;
    for (const auto& turn : traj.turns) {
      if (!turn.triple) continue;
      chat::MessageSequence observable =
          project_observable(traj.positive_history, turn.observable_prefix,
                             options.context_policy);
      auto push = [&](RejectedKind kind, const BranchResponse& rejected) {
        DpoPair pair;
        pair.id = turn.context_id + ":" + rejected_kind_name(kind);
        pair.observable_context = observable;
        pair.chosen = turn.triple->positive.raw_text;
        pair.rejected = rejected.raw_text;
        pair.rejected_kind = kind;
        pairs.push_back(std::move(pair));
      };
      if (options.filter == RejectedFilter::Normal || options.filter == RejectedFilter::Both)
        push(RejectedKind::Normal, turn.triple->negative);
      if (options.filter == RejectedFilter::Hard || options.filter == RejectedFilter::Both)
        push(RejectedKind::Hard, turn.triple->hard_negative);
    }
  }
  if (options.max_pairs > 0 && pairs.size() > options.max_pairs) {
    std::vector<std::size_t> idx(pairs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(options.seed);
    rng.shuffle(idx);
    idx.resize(options.max_pairs);
    std::sort(idx.begin(), idx.end());
    std::vector<DpoPair> kept;
    kept.reserve(idx.size());
    for (std::size_t i : idx) kept.push_back(std::move(pairs[i]));
    pairs = std::move(kept);
  }
  return pairs;
}

std::size_t emit_dpo(const std::vector<DpoPair>& pairs, std::ostream& out) {
  for (const auto& pair : pairs) {
    ordered_json record;
    record["id"] = pair.id;
    record["context_messages"] = chat::messages_to_json(pair.observable_context);
    record["chosen"] = pair.chosen;
    record["rejected"] = pair.rejected;
    record["rejected_kind"] = rejected_kind_name(pair.rejected_kind);
    out << record.dump() << "\n";
  }
  return pairs.size();
}

CorpusScanReport scan_dpo_corpus(const std::vector<DpoPair>& pairs,
                                 const std::vector<taskset::Task>& tasks,
                                 const kb::KnowledgeBase& kb) {
  CorpusScanReport report;

  // Every legitimate harness-rendered user text per task.
  std::map<std::string, std::set<std::string>> legit;
  for (const auto& task : tasks) {
    std::set<std::string>& texts = legit[task.id];
    env::InitialFeedback init;
    init.goal_text = task.goal_text;
    init.scenario = task.scenario;
    init.entity_names = task.entity_names;
    texts.insert(env::feedback_text(init));
    for (const auto& entity_name : task.entity_names) {
      const kb::Entity* entity = kb.find_entity(entity_name);
      if (!entity) continue;
      env::EntityFeedback ef;
      ef.entity = entity_name;
      for (const auto& p : entity->parts) ef.part_names.push_back(p.name);
      texts.insert(env::feedback_text(ef));
      for (const auto& p : entity->parts) {
        env::PartFeedback pf;
        pf.part = p.name;
        pf.owner_entity = entity_name;
        pf.physical_summary = p.physical_summary;
        pf.state_summary = p.state_summary;
        for (const auto& label : p.text_needed)
          if (const kb::AttributeClaim* claim = p.find_attribute(label))
            pf.disambiguation.emplace_back(label, claim->text);
        texts.insert(env::feedback_text(pf));
      }
    }
  }

  for (const auto& pair : pairs) {
    ++report.pairs_scanned;
    for (const auto& hit : scan_messages_for_leakage(pair.observable_context))
      report.hits.push_back({pair.id + " " + hit.where, hit.marker});

    std::string task_id;
    std::size_t cut = pair.id.rfind(":t");
    if (cut != std::string::npos) task_id = pair.id.substr(0, cut);
    auto it = legit.find(task_id);
    if (it == legit.end()) {
      report.hits.push_back({pair.id, "pair does not map to a known task"});
      continue;
    }
    for (std::size_t i = 0; i < pair.observable_context.size(); ++i) {
      const chat::Message& m = pair.observable_context[i];
      if (m.role == chat::Role::System) {
        if (m.text != env::eval_system_prompt())
          report.hits.push_back(
              {pair.id + " message[" + std::to_string(i) + "]", "non-evaluation system prompt"});
      } else if (m.role == chat::Role::User) {
        if (!it->second.count(m.text))
          report.hits.push_back({pair.id + " message[" + std::to_string(i) + "]",
                                 "user text is not a legitimate protocol rendering"});
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Reference losses
// ---------------------------------------------------------------------------

namespace {

double softplus(double x) {
  if (x > 40.0) return x;
  if (x < -40.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

}  // namespace

double dpo_loss(double logp_pol_chosen, double logp_ref_chosen, double logp_pol_rejected,
                double logp_ref_rejected, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw Error(ErrorKind::Domain, "beta must be a positive finite number");
  for (double v : {logp_pol_chosen, logp_ref_chosen, logp_pol_rejected, logp_ref_rejected})
    if (!std::isfinite(v)) throw Error(ErrorKind::Domain, "log-probabilities must be finite");
  const double margin =
      beta * ((logp_pol_chosen - logp_ref_chosen) - (logp_pol_rejected - logp_ref_rejected));
  return softplus(-margin);
}

double sft_nll(const std::vector<double>& target_token_logps) {
  if (target_token_logps.empty())
    throw Error(ErrorKind::Domain, "token log-probability list is empty");
  double sum = 0.0;
  for (double v : target_token_logps) {
    if (!std::isfinite(v) || v > 0.0)
      throw Error(ErrorKind::Domain, "token log-probabilities must be finite and <= 0");
    sum += v;
  }
  return -sum;
}

}  // namespace affbench::trajectory
