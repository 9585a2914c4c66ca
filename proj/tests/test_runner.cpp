#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "affbench/error.hpp"
#include "affbench/runner.hpp"
#include "affbench/sha256.hpp"
#include "affbench/synth.hpp"
#include "test_support.hpp"

using namespace affbench;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("affbench_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& rel = "") const {
    return rel.empty() ? path.string() : (path / rel).string();
  }
};

/// Writes the synthetic inputs one suite run needs: a base and a task file.
void write_inputs(const TempDir& dir, std::uint64_t seed, std::size_t n_tasks) {
  kb::KnowledgeBase kb = synth::generate_kb(seed, {8, 2, 4, 0.5, false});
  write_file(dir.str("kb.json"), kb::serialize_kb(kb));
  auto tasks = synth::generate_tasks(kb, seed + 1, {n_tasks, 3, false});
  write_file(dir.str("tasks.json"), taskset::serialize_tasks(tasks));
}

std::map<std::string, std::string> dir_digest_map(const std::string& root) {
  std::map<std::string, std::string> digests;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file()) {
      const std::string rel = fs::relative(entry.path(), root).string();
      digests[rel] = sha256_hex(read_file(entry.path().string()));
    }
  return digests;
}

}  // namespace

TEST_CASE("an oracle run produces one answered transcript per task and scores 1.0") {
  TempDir dir("run");
  write_inputs(dir, 3, 6);
  runner::RunConfig config;
  config.kb_path = dir.str("kb.json");
  config.taskset_path = dir.str("tasks.json");
  config.agent_spec = "oracle";
  config.out_dir = dir.str("run");
  config.parallelism = 2;
  auto summary = runner::run_eval(config);
  CHECK(summary.total == 6);
  CHECK(summary.completed == 6);
  CHECK(summary.agent_failures == 0);

  auto score = runner::score_run(dir.str("run"));
  CHECK(score.scored == 6);
  CHECK(score.report.gold_correct_rate == 1.0);
  CHECK(score.report.entity_correct_rate == 1.0);
  CHECK(score.report.entity_repetition_rate == 0.0);
  CHECK(fs::exists(dir.str("run/reports/aggregate.json")));
  CHECK(fs::exists(dir.str("run/reports/per_task.jsonl")));
}

TEST_CASE("rerunning a completed run changes nothing; tampering is refused") {
  TempDir dir("resume");
  write_inputs(dir, 5, 4);
  runner::RunConfig config;
  config.kb_path = dir.str("kb.json");
  config.taskset_path = dir.str("tasks.json");
  config.out_dir = dir.str("run");
  runner::run_eval(config);
  auto before = dir_digest_map(dir.str("run"));

  auto summary = runner::run_eval(config);
  CHECK(summary.newly_run == 0);
  CHECK(dir_digest_map(dir.str("run")) == before);

  // Tamper with the task set: resume must refuse.
  write_file(dir.str("tasks.json"), read_file(dir.str("tasks.json")) + "\n");
  try {
    runner::run_eval(config);
    FAIL("expected digest refusal");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    CHECK(contains(e.what(), "digest"));
  }
}

TEST_CASE("an interrupted run resumes over the remaining tasks only") {
  TempDir dir("interrupt");
  write_inputs(dir, 37, 4);
  runner::RunConfig config;
  config.kb_path = dir.str("kb.json");
  config.taskset_path = dir.str("tasks.json");
  config.out_dir = dir.str("run");
  runner::run_eval(config);
  auto before = dir_digest_map(dir.str("run"));

  // Simulate a kill after three tasks: one loses its transcript and its
  // completion mark.
  auto manifest = nlohmann::json::parse(read_file(dir.str("run/manifest.json")));
  manifest["tasks"]["task-2"] = "pending";
  manifest["outputs"].erase("transcripts/task-2.jsonl");
  write_file(dir.str("run/manifest.json"), manifest.dump(2) + "\n");
  fs::remove(dir.str("run/transcripts/task-2.jsonl"));

  auto summary = runner::run_eval(config);
  CHECK(summary.newly_run == 1);
  CHECK(summary.completed == 4);
  CHECK(dir_digest_map(dir.str("run")) == before);  // converges to the same bytes
}

TEST_CASE("fixed seeds and stub agents give byte-identical run directories") {
  TempDir dir("determinism");
  write_inputs(dir, 11, 4);
  auto run_all = [&](const std::string& out) {
    runner::RunConfig config;
    config.kb_path = dir.str("kb.json");
    config.taskset_path = dir.str("tasks.json");
    config.agent_spec = "random:42";
    config.seed = 9;
    config.budget = 25;
    config.out_dir = dir.str(out);
    runner::run_eval(config);
    runner::score_run(dir.str(out));
    runner::GenConfig gen;
    gen.kb_path = dir.str("kb.json");
    gen.taskset_path = dir.str("tasks.json");
    gen.out_dir = dir.str(out);
    gen.seed = 9;
    runner::gen_trajectories(gen);
  };
  run_all("a");
  run_all("b");
  CHECK(dir_digest_map(dir.str("a")) == dir_digest_map(dir.str("b")));
}

TEST_CASE("agent failures are recorded as aborted transcripts and the run continues") {
  TempDir dir("failures");
  write_inputs(dir, 7, 3);
  runner::RunConfig config;
  config.kb_path = dir.str("kb.json");
  config.taskset_path = dir.str("tasks.json");
  config.agent_spec = "stdio:exit 0";  // child dies instantly: every call fails
  config.out_dir = dir.str("run");
  auto summary = runner::run_eval(config);
  CHECK(summary.agent_failures == 3);
  auto score = runner::score_run(dir.str("run"));
  CHECK(score.scored == 3);
  CHECK(score.report.gold_correct_rate == 0.0);
}

TEST_CASE("scoring with a judge emits one error record per failed task") {
  TempDir dir("judge");
  write_inputs(dir, 31, 3);
  runner::RunConfig config;
  config.kb_path = dir.str("kb.json");
  config.taskset_path = dir.str("tasks.json");
  config.agent_spec = "first-answer";  // always answers a placeholder: all wrong
  config.out_dir = dir.str("run");
  runner::run_eval(config);

  auto summary = runner::score_run(dir.str("run"), "stub-judge:A2");
  CHECK(summary.classified_errors == 3);
  int lines = 0;
  for (const auto& line : split_lines(read_file(dir.str("run/reports/errors.jsonl")))) {
    if (trim(line).empty()) continue;
    ++lines;
    auto j = nlohmann::json::parse(line);
    CHECK(j["major"] == "A2");
    CHECK(j["contributing"][0] == "A2");
  }
  CHECK(lines == 3);
  // The digest chain covers the new report.
  std::ostringstream out;
  CHECK(runner::verify_run(dir.str("run"), out) == 0);
}

TEST_CASE("trajectory generation writes datasets and respects the filter") {
  TempDir dir("gen");
  write_inputs(dir, 13, 3);
  runner::GenConfig gen;
  gen.kb_path = dir.str("kb.json");
  gen.taskset_path = dir.str("tasks.json");
  gen.out_dir = dir.str("out");
  gen.filter = trajectory::RejectedFilter::Hard;
  auto summary = runner::gen_trajectories(gen);
  CHECK(summary.sft_records > 0);
  CHECK(summary.dpo_pairs == summary.sft_records);  // one hard pair per turn
  CHECK(summary.leakage_hits == 0);
  CHECK(summary.dropped_trajectories == 0);
  CHECK(!summary.over_threshold);

  for (const auto& line : split_lines(read_file(dir.str("out/datasets/dpo.jsonl")))) {
    if (trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line);
    CHECK(j["rejected_kind"] == "hard");
    CHECK(j["chosen"] != j["rejected"]);
  }
}

TEST_CASE("a garbage teacher trips the drop threshold") {
  TempDir dir("drops");
  write_inputs(dir, 17, 2);
  runner::GenConfig gen;
  gen.kb_path = dir.str("kb.json");
  gen.taskset_path = dir.str("tasks.json");
  gen.out_dir = dir.str("out");
  gen.teacher_spec = "garbage";
  gen.drop_threshold = 0.0;
  gen.branch_retry_limit = 1;
  auto summary = runner::gen_trajectories(gen);
  CHECK(summary.dropped_trajectories == 2);
  CHECK(summary.drop_rate == 1.0);
  CHECK(summary.over_threshold);
  // The drop log names each task.
  const std::string drops = read_file(dir.str("out/datasets/drops.jsonl"));
  CHECK(contains(drops, "task-1"));
  CHECK(contains(drops, "task-2"));
}

TEST_CASE("replay printing renders a transcript and rejects junk") {
  TempDir dir("replay");
  write_inputs(dir, 19, 2);
  runner::RunConfig config;
  config.kb_path = dir.str("kb.json");
  config.taskset_path = dir.str("tasks.json");
  config.out_dir = dir.str("run");
  runner::run_eval(config);

  std::ostringstream out;
  int rc = runner::replay_print(dir.str("run/transcripts/task-1.jsonl"), out);
  CHECK(rc == 0);
  CHECK(contains(out.str(), "--- turn 0 ---"));
  CHECK(contains(out.str(), "status: answered"));

  write_file(dir.str("broken.jsonl"), "this is not a transcript\n");
  CHECK_THROWS_AS(runner::replay_print(dir.str("broken.jsonl"), out), Error);
}

TEST_CASE("human play over scripted stdin answers gold and writes a transcript") {
  TempDir dir("human");
  write_inputs(dir, 23, 1);
  kb::KnowledgeBase kb = kb::load_kb_file(dir.str("kb.json"));
  auto tasks = taskset::load_tasks_file(dir.str("tasks.json"), kb);
  const taskset::Task& task = tasks.front();

  runner::HumanPlayConfig config;
  config.kb_path = dir.str("kb.json");
  config.taskset_path = dir.str("tasks.json");
  config.out_dir = dir.str("play");
  std::istringstream input("e " + task.gold.entity + "\np " + task.gold.part + "\na " +
                           task.gold.entity + " | " + task.gold.part + " | press it on\n");
  std::ostringstream output;
  int rc = runner::human_play(config, input, output);
  CHECK(rc == 0);
  CHECK(contains(output.str(), "status: answered"));

  env::Transcript t = env::transcript_from_jsonl(
      read_file(dir.str("play/transcripts/" + task.id + ".human.jsonl")));
  metrics::PerTaskMetrics m = metrics::score_task(task, t);
  CHECK(m.gold_correct);
}

TEST_CASE("verify walks the digest chain and flags corruption") {
  TempDir dir("verify");
  write_inputs(dir, 29, 2);
  runner::RunConfig config;
  config.kb_path = dir.str("kb.json");
  config.taskset_path = dir.str("tasks.json");
  config.out_dir = dir.str("run");
  runner::run_eval(config);
  runner::score_run(dir.str("run"));

  std::ostringstream out;
  CHECK(runner::verify_run(dir.str("run"), out) == 0);
  CHECK(contains(out.str(), "verify: clean"));

  // Flip one byte in a transcript.
  const std::string victim = dir.str("run/transcripts/task-2.jsonl");
  std::string bytes = read_file(victim);
  bytes[bytes.size() / 2] = bytes[bytes.size() / 2] == 'x' ? 'y' : 'x';
  write_file(victim, bytes);
  std::ostringstream out2;
  CHECK(runner::verify_run(dir.str("run"), out2) == 1);
  CHECK(contains(out2.str(), "MISMATCH"));
}

TEST_CASE("config files load flat key=value entries with comments") {
  TempDir dir("config");
  write_file(dir.str("run.conf"),
             "# run settings\nkb = kb.json\ntasks = tasks.json\nagent = random:4\n"
             "budget = 12\nimage_policy = no_image\nseed = 77\nparallelism = 2\nout = out\n");
  runner::RunConfig config = runner::load_run_config(dir.str("run.conf"));
  CHECK(config.kb_path == "kb.json");
  CHECK(config.agent_spec == "random:4");
  CHECK(config.budget == 12);
  CHECK(config.image_policy == env::ImagePolicy::NoImage);
  CHECK(config.seed == 77);
  CHECK(config.parallelism == 2);

  write_file(dir.str("bad.conf"), "budget : 5\n");
  CHECK_THROWS_AS(runner::load_run_config(dir.str("bad.conf")), Error);
}
