#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "affbench/chat.hpp"
#include "affbench/env.hpp"
#include "affbench/kb.hpp"
#include "affbench/taskset.hpp"

namespace affbench::trajectory {

// ---------------------------------------------------------------------------
// Exploration stack
// ---------------------------------------------------------------------------

struct StackItem {
  enum class Kind { Entity, Part };
  Kind kind = Kind::Entity;
  std::string entity;
  std::string part;  // set for Kind::Part

  bool operator==(const StackItem&) const = default;
  static StackItem entity_item(std::string entity);
  static StackItem part_item(std::string entity, std::string part);
};

struct Directive {
  enum class Kind { InspectEntity, InspectPart, AnswerPhase };
  Kind kind = Kind::AnswerPhase;
  std::string entity;
  std::string part;
  // Answer-phase candidates: judged parts with a positive verdict, pop order.
  std::vector<std::pair<std::string, std::string>> candidates;
};

/// Worklist of pending inspections. Entities pop into their relevant parts;
/// an empty stack triggers the answer phase.
class ExplorationStack {
 public:
  const std::vector<StackItem>& items() const { return items_; }
  const StackItem& top() const;
  bool empty() const { return items_.empty(); }
  const std::set<std::string>& popped_entities() const { return popped_entities_; }
  const std::vector<std::tuple<std::string, std::string, bool>>& judged_parts() const {
    return judged_parts_;
  }
  std::size_t total_pops() const { return total_pops_; }

  friend ExplorationStack init_stack(const taskset::Task& task,
                                     const std::vector<std::string>& candidate_order);
  friend Directive advance(ExplorationStack& stack, const taskset::Task& task,
                           const kb::KnowledgeBase& kb, const StackItem& event_target,
                           std::optional<bool> judgment);

 private:
  std::vector<StackItem> items_;  // top = back
  std::set<std::string> popped_entities_;
  std::vector<std::tuple<std::string, std::string, bool>> judged_parts_;
  std::size_t total_pops_ = 0;
};

/// candidate_order must be a permutation of the task's entity names; the
/// first candidate ends on top.
ExplorationStack init_stack(const taskset::Task& task,
                            const std::vector<std::string>& candidate_order);

/// Pops the stack top (which must equal event_target, else EventMismatch).
/// Entity pops push the entity's relevant parts in knowledge-base order so
/// the first one is inspected next; part pops record the binary judgment
/// (required, else Precondition). Returns the directive for the next turn.
Directive advance(ExplorationStack& stack, const taskset::Task& task,
                  const kb::KnowledgeBase& kb, const StackItem& event_target,
                  std::optional<bool> judgment = std::nullopt);

Directive current_directive(const ExplorationStack& stack);

/// Repairs a proposed candidate list into a full ordering: valid unique
/// proposals first, remaining entities in task order; a malformed proposal
/// falls back to task order entirely.
std::vector<std::string> resolve_candidate_order(const taskset::Task& task,
                                                 const std::vector<std::string>& proposed);

// ---------------------------------------------------------------------------
// Guided branch prompts
// ---------------------------------------------------------------------------

enum class Branch { Positive, Negative, HardNegative };
const char* branch_name(Branch b);

enum class TurnKind { Initial, EntityFeedback, PartFeedback, FinalAnswer };
const char* turn_kind_name(TurnKind k);

/// Everything template filling needs to know about the turn being guided.
struct GuidanceInput {
  env::Feedback feedback;  // observable feedback for this turn (unused for Initial/FinalAnswer)
  std::optional<StackItem> current;  // the item whose feedback this is
  Directive next;                    // stack directive after the pop
  bool last_exploration_step = false;
  std::vector<std::pair<std::string, std::string>> candidates;  // final-answer turn, pop order
};

struct GuidancePayload {
  std::string system_prompt;
  std::string user_prompt;
};

/// Fills the guided template for (branch, turn kind). The positive branch
/// carries target affordance, attribute lookups, verdict references and gold
/// hints; the negative branch carries only the observable feedback; the
/// hard-negative branch carries anti-gold steering. Unfilled slot markers
/// raise Error(TemplateSlot).
GuidancePayload build_branch_guidance(const taskset::Task& task, const kb::KnowledgeBase& kb,
                                      TurnKind kind, Branch branch, const GuidanceInput& input);

struct BranchResponse {
  Branch branch = Branch::Positive;
  std::string raw_text;
  std::string reasoning;
  std::optional<env::Action> action;      // absent only on no-action micro-turns
  std::optional<bool> enable_affordance;  // part-inspection turns
};

struct AlignedTriple {
  std::string context_id;
  chat::MessageSequence shared_context;  // guided form (positive branch view)
  BranchResponse positive;
  BranchResponse negative;
  BranchResponse hard_negative;
};

struct SampleConfig {
  int retry_limit = 5;
};

struct BranchPrompts {
  chat::MessageSequence positive;
  chat::MessageSequence negative;
  chat::MessageSequence hard_negative;
};

/// What the positive branch must produce for the turn to be accepted.
struct PositiveExpectation {
  TurnKind kind = TurnKind::Initial;
  std::optional<Directive> directive;  // exact target for non-initial exploration turns
  bool require_enable_affordance = false;
  bool mandate_enable_true = false;  // gold-part inspections must be judged usable
  std::optional<std::pair<std::string, std::string>> gold;  // final-answer turn
  const taskset::Task* task = nullptr;                      // initial turn validation
};

/// Three independent teacher calls at one shared context; unparseable or
/// guidance-violating replies are re-sampled up to the retry limit. A
/// persistent positive failure throws Error(TripleDropped) with
/// path="positive"; persistent rejected-branch failures throw with the
/// branch name in path.
AlignedTriple sample_three_branches(chat::TextBackend& teacher, const BranchPrompts& prompts,
                                    const std::string& context_id,
                                    const PositiveExpectation& expectation,
                                    const SampleConfig& config = {});

// ---------------------------------------------------------------------------
// Whole-task generation
// ---------------------------------------------------------------------------

struct TrajectoryTurn {
  TurnKind kind = TurnKind::Initial;
  std::string context_id;
  chat::MessageSequence guided_context;  // system + plain history + guided prompt
  BranchResponse positive;
  std::optional<AlignedTriple> triple;  // absent when rejected branches were dropped
  std::size_t observable_prefix = 0;    // history records visible at this turn
};

struct GeneratedTrajectory {
  std::string task_id;
  std::vector<TrajectoryTurn> turns;  // one per action-carrying turn
  bool dropped = false;               // positive branch failed; nothing usable
  std::string drop_reason;
  std::vector<std::string> dropped_triples;       // context ids with lost rejected branches
  std::vector<env::TurnRecord> positive_history;  // eval-form action/feedback history
};

struct GenerateConfig {
  SampleConfig sampling;
  bool sample_rejected_branches = true;  // off = positive-only (cheaper SFT-only runs)
};

GeneratedTrajectory generate_trajectory(const taskset::Task& task, const kb::KnowledgeBase& kb,
                                        chat::TextBackend& teacher,
                                        const GenerateConfig& config = {});

/// Deterministic guidance-following teacher: recognises the branch from the
/// system prompt, reads the exact-name lines out of the guided prompt, and
/// replies with a minimal compliant response. Makes the whole generation
/// pipeline hermetic and byte-reproducible.
class StubTeacher : public chat::TextBackend {
 public:
  std::string complete(const chat::MessageSequence& messages) override;
};

// ---------------------------------------------------------------------------
// Observable projection and leakage scanning
// ---------------------------------------------------------------------------

/// Rebuilds the context with the evaluation templates over the positive
/// branch's action/feedback history (first `prefix` records). Runs the
/// leakage scan on its own output and throws Error(Leakage) on a hit.
chat::MessageSequence project_observable(const std::vector<env::TurnRecord>& positive_history,
                                         std::size_t prefix, env::ImagePolicy policy);

/// Substrings that only the guided templates contain; any occurrence in an
/// observable context is a leak.
const std::vector<std::string>& guidance_marker_strings();

struct LeakageHit {
  std::string where;
  std::string marker;
};

std::vector<LeakageHit> scan_messages_for_leakage(const chat::MessageSequence& messages);

// ---------------------------------------------------------------------------
// Dataset emission
// ---------------------------------------------------------------------------

enum class RejectedKind { Normal, Hard };
const char* rejected_kind_name(RejectedKind k);

enum class RejectedFilter { Normal, Hard, Both };
RejectedFilter rejected_filter_from_string(const std::string& s);

struct DpoPair {
  std::string id;
  chat::MessageSequence observable_context;
  std::string chosen;
  std::string rejected;
  RejectedKind rejected_kind = RejectedKind::Normal;
};

/// One SFT record per turn: guided context plus the positive raw text as the
/// only supervised target (context messages carry no loss). Returns the
/// record count.
std::size_t emit_sft(const std::vector<GeneratedTrajectory>& trajectories, std::ostream& out);

struct DpoEmitOptions {
  RejectedFilter filter = RejectedFilter::Both;
  std::size_t max_pairs = 0;  // 0 = no cap; otherwise seeded uniform subsample
  std::uint64_t seed = 0;
  env::ImagePolicy context_policy = env::ImagePolicy::AllImages;
};

std::vector<DpoPair> build_dpo_pairs(const std::vector<GeneratedTrajectory>& trajectories,
                                     const DpoEmitOptions& options);

std::size_t emit_dpo(const std::vector<DpoPair>& pairs, std::ostream& out);

/// Independent corpus-level scan: guidance markers anywhere, and every
/// system/user message must byte-equal a rendering the evaluation protocol
/// could legitimately produce for its task (which confines gold names and
/// relevance annotations to verbatim knowledge-base positions).
struct CorpusScanReport {
  std::size_t pairs_scanned = 0;
  std::vector<LeakageHit> hits;
};

CorpusScanReport scan_dpo_corpus(const std::vector<DpoPair>& pairs,
                                 const std::vector<taskset::Task>& tasks,
                                 const kb::KnowledgeBase& kb);

// ---------------------------------------------------------------------------
// Reference losses
// ---------------------------------------------------------------------------

/// -ln sigmoid(beta * ((logp_pol_chosen - logp_ref_chosen) -
///                     (logp_pol_rejected - logp_ref_rejected)))
double dpo_loss(double logp_pol_chosen, double logp_ref_chosen, double logp_pol_rejected,
                double logp_ref_rejected, double beta);

/// Negative sum of per-token log probabilities (nonempty, entries <= 0).
double sft_nll(const std::vector<double>& target_token_logps);

}  // namespace affbench::trajectory
