#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "affbench/env.hpp"
#include "affbench/metrics.hpp"
#include "affbench/trajectory.hpp"

namespace affbench::runner {

struct RunConfig {
  std::string kb_path;
  std::string taskset_path;
  std::string asset_root;
  std::string agent_spec = "oracle";
  int budget = 50;
  env::ImagePolicy image_policy = env::ImagePolicy::LastImage;
  int parse_retry_limit = 3;
  std::uint64_t seed = 0;
  int parallelism = 1;
  std::string out_dir;
  bool strict_assets = false;
  bool wallclock = false;  // off keeps run directories byte-reproducible
};

/// Flat key=value config file; '#' starts a comment. CLI flags override.
RunConfig load_run_config(const std::string& path);
void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value);
nlohmann::ordered_json config_to_json(const RunConfig& config);

struct RunSummary {
  int total = 0;
  int completed = 0;   // includes previously-done tasks on resume
  int newly_run = 0;
  int agent_failures = 0;
};

/// One transcript per task under <out_dir>/transcripts/. The manifest is
/// written first and updated per completion; rerunning over a finished
/// directory is a no-op; resuming checks input digests.
RunSummary run_eval(const RunConfig& config);

/// Scores a run directory into <run>/reports/{per_task.jsonl, aggregate.json}.
/// Partial runs are flagged with the scored n. With a judge backend spec
/// ("stub-judge:<code>" or "remote:<cfg.json>"), failed answers are also
/// categorized into reports/errors.jsonl, one record per failed task.
struct ScoreSummary {
  int scored = 0;
  int total = 0;
  int classified_errors = 0;
  metrics::AggregateReport report;
};
ScoreSummary score_run(const std::string& run_dir, const std::string& judge_spec = "");

struct GenConfig {
  std::string kb_path;
  std::string taskset_path;
  std::string out_dir;
  std::string teacher_spec = "stub";  // or remote:<config.json>
  trajectory::RejectedFilter filter = trajectory::RejectedFilter::Both;
  std::size_t max_dpo_pairs = 0;
  double drop_threshold = 1.0;  // exit failure when the drop rate exceeds this
  std::uint64_t seed = 0;
  int branch_retry_limit = 5;
};

struct GenSummary {
  std::size_t sft_records = 0;
  std::size_t dpo_pairs = 0;
  std::size_t dropped_trajectories = 0;
  std::size_t dropped_triples = 0;
  double drop_rate = 0.0;
  bool over_threshold = false;
  std::size_t leakage_hits = 0;
};

/// Emits datasets/{sft.jsonl, dpo.jsonl, drops.jsonl} plus manifest digests,
/// then corpus-scans the pairs it wrote.
GenSummary gen_trajectories(const GenConfig& config);

int replay_print(const std::string& transcript_path, std::ostream& out);

struct HumanPlayConfig {
  std::string kb_path;
  std::string taskset_path;
  std::string task_id;  // empty = first task
  std::string out_dir;
  int budget = 50;
  env::ImagePolicy image_policy = env::ImagePolicy::LastImage;
};
int human_play(const HumanPlayConfig& config, std::istream& in, std::ostream& out);

/// Recomputes every digest recorded in the manifest. 0 clean, 1 mismatch.
int verify_run(const std::string& run_dir, std::ostream& out);

}  // namespace affbench::runner
