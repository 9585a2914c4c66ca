#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "affbench/chat.hpp"
#include "affbench/env.hpp"
#include "affbench/taskset.hpp"

namespace affbench::metrics {

struct ProgressEvent {
  std::string kind;  // gold_entity, similar_entity, gold_part, similar_part
  double normalized_turn = 0.0;  // turn index / total turns, in (0, 1]
};

struct PerTaskMetrics {
  std::string task_id;
  env::Status final_status = env::Status::Running;
  bool gold_correct = false;
  bool entity_correct = false;
  int turns = 0;
  int distinct_entities = 0;
  int distinct_parts = 0;
  bool gold_entity_explored = false;
  bool gold_part_explored = false;
  bool repeated_entity = false;
  bool repeated_part = false;
  std::optional<double> part_sim_density;    // absent when no part was inspected
  std::optional<double> entity_sim_density;  // absent when no entity was inspected
  std::vector<ProgressEvent> progress_events;
};

/// Pure function of (task, transcript); recomputation is byte-identical.
PerTaskMetrics score_task(const taskset::Task& task, const env::Transcript& transcript);

struct RateCell {
  int n = 0;         // denominator
  double rate = 0;   // meaningless when n == 0
  bool defined() const { return n > 0; }
};

struct BreakdownCell {
  int n = 0;
  double gold_correct_rate = 0;
  double entity_correct_rate = 0;
  double mean_turns = 0;
};

struct AggregateReport {
  int n = 0;
  double gold_correct_rate = 0;
  double entity_correct_rate = 0;
  double mean_turns = 0;
  double mean_distinct_entities = 0;
  double mean_distinct_parts = 0;
  double entity_repetition_rate = 0;
  double part_repetition_rate = 0;
  double gold_entity_explored_rate = 0;
  double gold_part_explored_rate = 0;
  RateCell gold_entity_explored_given_entity_correct;
  RateCell gold_entity_explored_given_entity_wrong;
  RateCell gold_part_explored_given_part_correct;
  RateCell gold_part_explored_given_part_wrong;
  double mean_part_sim_density = 0;
  int part_sim_density_excluded = 0;  // tasks with undefined density, left out of the mean
  int part_sim_density_n = 0;
  double mean_entity_sim_density = 0;
  int entity_sim_density_excluded = 0;
  int entity_sim_density_n = 0;
  std::map<std::string, RateCell> mean_progress;  // kind -> (n, mean normalized turn)
  std::map<std::string, BreakdownCell> by_similarity_level;
  std::map<int, BreakdownCell> by_typicality_level;
};

/// Fold-style accumulator so scoring can stream and parallel folds can merge.
class AggregateAccumulator {
 public:
  void add(const PerTaskMetrics& m, const taskset::Task& task);
  void merge(const AggregateAccumulator& other);
  AggregateReport finish() const;

 private:
  struct Cell {
    long long n = 0;
    double sum = 0;
  };
  long long n_ = 0;
  long long gold_correct_ = 0, entity_correct_ = 0;
  double turns_sum_ = 0, distinct_entities_sum_ = 0, distinct_parts_sum_ = 0;
  long long repeated_entity_ = 0, repeated_part_ = 0;
  long long gold_entity_explored_ = 0, gold_part_explored_ = 0;
  Cell expl_given_ecorrect_, expl_given_ewrong_, expl_given_pcorrect_, expl_given_pwrong_;
  Cell part_density_, entity_density_;
  long long part_density_excluded_ = 0, entity_density_excluded_ = 0;
  std::map<std::string, Cell> progress_;
  struct BCell {
    long long n = 0, gold = 0, entity = 0;
    double turns = 0;
  };
  std::map<std::string, BCell> by_similarity_;
  std::map<int, BCell> by_typicality_;
};

/// Metrics and tasks aligned by id (same order); throws Error(Alignment)
/// on mismatch.
AggregateReport aggregate(const std::vector<PerTaskMetrics>& metrics,
                          const std::vector<taskset::Task>& tasks);

nlohmann::ordered_json per_task_to_json(const PerTaskMetrics& m);
nlohmann::ordered_json report_to_json(const AggregateReport& r);

// ---------------------------------------------------------------------------
// Error-categorization judge pipeline (A1..C2 taxonomy)
// ---------------------------------------------------------------------------

enum class ErrorCode { A1, A2, A3, B1, B2, C1, C2 };
const char* error_code_name(ErrorCode c);
std::optional<ErrorCode> error_code_from_string(const std::string& s);

struct ErrorLabel {
  ErrorCode major = ErrorCode::A1;
  std::vector<ErrorCode> contributing;  // includes major
  std::string rationale;
};

struct Unclassifiable {
  std::string reason;
};

using ClassifyResult = std::variant<ErrorLabel, Unclassifiable>;

struct Prediction {
  std::string entity;
  std::string part;
  std::string how_to_use;
};

/// Fills the judge template, parses the reply JSON, validates the code set
/// and the major-in-contributing rule; one retry with a format reminder, then
/// Unclassifiable.
ClassifyResult classify_error(const taskset::Task& task, const Prediction& prediction,
                              chat::TextBackend& judge);

/// Rates of major codes over classified failures plus an "unclassifiable"
/// bucket; rates sum to 1 over a nonempty input.
std::map<std::string, double> error_histogram(const std::vector<ClassifyResult>& labels);

/// The verbatim judge prompt for one failed prediction; exposed for tests.
std::string build_error_judge_prompt(const taskset::Task& task, const Prediction& prediction);

}  // namespace affbench::metrics
