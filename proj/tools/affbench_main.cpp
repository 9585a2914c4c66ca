#include <iostream>

#include <CLI11.hpp>

#include "affbench/agents.hpp"
#include "affbench/error.hpp"
#include "affbench/runner.hpp"
#include "affbench/synth.hpp"
#include "affbench/util.hpp"
#include "affbench/version.hpp"

using namespace affbench;

namespace {

int cmd_validate(const std::string& kb_path, const std::string& tasks_path, bool strict,
                 const std::string& asset_root) {
  kb::KnowledgeBase knowledge;
  try {
    knowledge = kb::load_kb_file(kb_path);
  } catch (const Error& e) {
    std::cout << "kb: " << error_kind_name(e.kind()) << ": " << e.what() << "\n";
    return (e.kind() == ErrorKind::Io || e.kind() == ErrorKind::Syntax) ? 2 : 1;
  }
  auto violations = kb::validate_kb(knowledge);
  for (const auto& v : violations)
    std::cout << "kb violation: " << v.code << " at " << v.path << ": " << v.message << "\n";

  bool task_trouble = false;
  if (!tasks_path.empty()) {
    try {
      taskset::LoadOptions options;
      options.strict_assets = strict;
      options.asset_root = asset_root;
      auto tasks = taskset::load_tasks_file(tasks_path, knowledge, options);
      for (const auto& task : tasks) {
        auto report = taskset::qc_check(task, knowledge);
        for (const auto& f : report.failures) {
          std::cout << "task " << task.id << " qc failure: " << f << "\n";
          task_trouble = true;
        }
      }
      std::cout << tasks.size() << " task(s) loaded\n";
    } catch (const Error& e) {
      std::cout << "tasks: " << error_kind_name(e.kind()) << ": " << e.what() << "\n";
      return (e.kind() == ErrorKind::Io || e.kind() == ErrorKind::Syntax) ? 2 : 1;
    }
  }
  std::cout << knowledge.entities.size() << " entities, " << knowledge.total_parts()
            << " parts\n";
  if (!violations.empty() || task_trouble) return 1;
  std::cout << "validate: clean\n";
  return 0;
}

int cmd_gen_tasks(const std::string& kb_path, std::uint64_t seed, std::size_t count,
                  std::size_t distractors, const std::string& out_path,
                  const std::string& qc_report_path, bool with_assets) {
  kb::KnowledgeBase knowledge = kb::load_kb_file(kb_path);
  synth::TaskSpec spec;
  spec.count = count;
  spec.distractors = distractors;
  spec.with_assets = with_assets;
  auto tasks = synth::generate_tasks(knowledge, seed, spec);
  write_file(out_path, taskset::serialize_tasks(tasks));
  if (!qc_report_path.empty()) {
    std::string lines;
    for (const auto& task : tasks)
      lines += taskset::qc_report_to_json(task.id, taskset::qc_check(task, knowledge)).dump() +
               "\n";
    write_file(qc_report_path, lines);
  }
  std::cout << "wrote " << tasks.size() << " task(s) to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive affordance benchmark engine"};
  app.set_version_flag("--version", std::string(kEngineVersion));
  app.require_subcommand(1);

  // validate
  std::string kb_path, tasks_path, asset_root;
  bool strict_assets = false;
  auto* validate = app.add_subcommand("validate", "Check a knowledge base and task set");
  validate->add_option("--kb", kb_path, "knowledge base file")->required();
  validate->add_option("--tasks", tasks_path, "task set file");
  validate->add_flag("--strict-assets", strict_assets, "require referenced asset files");
  validate->add_option("--asset-root", asset_root, "root for relative asset paths");

  // run-eval
  runner::RunConfig run_config;
  std::string run_config_file, image_policy_name = "last_image";
  auto* run = app.add_subcommand("run-eval", "Run an agent over a task set");
  run->add_option("--config", run_config_file, "flat key=value config file");
  run->add_option("--kb", run_config.kb_path, "knowledge base file");
  run->add_option("--tasks", run_config.taskset_path, "task set file");
  run->add_option("--agent", run_config.agent_spec,
                  "oracle | random[:seed] | first-answer | remote:<cfg.json> | stdio:<command>");
  run->add_option("--budget", run_config.budget, "turn budget per session");
  run->add_option("--image-policy", image_policy_name, "no_image | last_image | all_images");
  run->add_option("--retry-limit", run_config.parse_retry_limit,
                  "consecutive parse failures before aborting");
  run->add_option("--seed", run_config.seed, "run seed");
  run->add_option("--parallelism", run_config.parallelism, "worker threads");
  run->add_option("--out", run_config.out_dir, "run directory");
  run->add_option("--asset-root", run_config.asset_root, "root for relative asset paths");
  run->add_flag("--strict-assets", run_config.strict_assets, "require referenced asset files");
  run->add_flag("--wallclock", run_config.wallclock,
                "record wall-clock times (breaks byte-reproducibility)");

  // score
  std::string score_dir, score_judge;
  auto* score = app.add_subcommand("score", "Score a finished or partial run");
  score->add_option("--run", score_dir, "run directory")->required();
  score->add_option("--judge", score_judge,
                    "error-categorization backend for failed tasks "
                    "(stub-judge:<code> | remote:<cfg.json>)");

  // gen-tasks
  std::uint64_t gen_tasks_seed = 0;
  std::size_t gen_tasks_count = 20, gen_tasks_distractors = 2;
  std::string gen_tasks_kb, gen_tasks_out, gen_tasks_qc;
  bool gen_tasks_assets = false;
  auto* gen_tasks = app.add_subcommand("gen-tasks", "Construct tasks from a knowledge base");
  gen_tasks->add_option("--kb", gen_tasks_kb, "knowledge base file")->required();
  gen_tasks->add_option("--seed", gen_tasks_seed, "sampling seed");
  gen_tasks->add_option("--count", gen_tasks_count, "number of tasks");
  gen_tasks->add_option("--distractors", gen_tasks_distractors, "distractor entities per task");
  gen_tasks->add_option("--out", gen_tasks_out, "output task file")->required();
  gen_tasks->add_option("--qc-report", gen_tasks_qc, "write per-task QC report here");
  gen_tasks->add_flag("--with-assets", gen_tasks_assets, "synthesize image reference paths");

  // gen-trajectories
  runner::GenConfig gen_config;
  std::string rejected_kind = "both";
  auto* gen = app.add_subcommand("gen-trajectories", "Emit SFT/DPO training datasets");
  gen->add_option("--kb", gen_config.kb_path, "knowledge base file")->required();
  gen->add_option("--tasks", gen_config.taskset_path, "task set file")->required();
  gen->add_option("--out", gen_config.out_dir, "output run directory")->required();
  gen->add_option("--teacher", gen_config.teacher_spec, "stub | remote:<cfg.json> | garbage");
  gen->add_option("--rejected", rejected_kind, "normal | hard | both");
  gen->add_option("--max-dpo-pairs", gen_config.max_dpo_pairs,
                  "cap with seeded subsampling (0 = no cap)");
  gen->add_option("--drop-threshold", gen_config.drop_threshold,
                  "fail when the drop rate exceeds this");
  gen->add_option("--seed", gen_config.seed, "subsampling seed");
  gen->add_option("--branch-retries", gen_config.branch_retry_limit,
                  "re-samples per branch before dropping");

  // replay
  std::string replay_transcript, replay_mode = "print";
  runner::HumanPlayConfig play_config;
  auto* replay = app.add_subcommand("replay", "Print a transcript or play a task by hand");
  replay->add_option("--transcript", replay_transcript, "transcript file (print mode)");
  replay->add_option("--mode", replay_mode, "print | human");
  replay->add_option("--kb", play_config.kb_path, "knowledge base file (human mode)");
  replay->add_option("--tasks", play_config.taskset_path, "task set file (human mode)");
  replay->add_option("--task-id", play_config.task_id, "task to play (default: first)");
  replay->add_option("--out", play_config.out_dir, "directory for the produced transcript");
  replay->add_option("--budget", play_config.budget, "turn budget");

  // verify
  std::string verify_dir;
  auto* verify = app.add_subcommand("verify", "Check the manifest digest chain of a run");
  verify->add_option("--run", verify_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed())
      return cmd_validate(kb_path, tasks_path, strict_assets, asset_root);

    if (run->parsed()) {
      runner::RunConfig config =
          run_config_file.empty() ? runner::RunConfig{} : runner::load_run_config(run_config_file);
      // Flags override file entries.
      if (!run_config.kb_path.empty()) config.kb_path = run_config.kb_path;
      if (!run_config.taskset_path.empty()) config.taskset_path = run_config.taskset_path;
      if (!run_config.out_dir.empty()) config.out_dir = run_config.out_dir;
      if (!run_config.asset_root.empty()) config.asset_root = run_config.asset_root;
      if (run->count("--agent")) config.agent_spec = run_config.agent_spec;
      if (run->count("--budget")) config.budget = run_config.budget;
      if (run->count("--image-policy"))
        config.image_policy = env::image_policy_from_string(image_policy_name);
      if (run->count("--retry-limit")) config.parse_retry_limit = run_config.parse_retry_limit;
      if (run->count("--seed")) config.seed = run_config.seed;
      if (run->count("--parallelism")) config.parallelism = run_config.parallelism;
      if (run->count("--strict-assets")) config.strict_assets = run_config.strict_assets;
      if (run->count("--wallclock")) config.wallclock = run_config.wallclock;
      auto summary = runner::run_eval(config);
      std::cout << "run-eval: " << summary.completed << "/" << summary.total
                << " transcripts (" << summary.newly_run << " new, " << summary.agent_failures
                << " agent failure(s)) in " << config.out_dir << "\n";
      return 0;
    }

    if (score->parsed()) {
      auto summary = runner::score_run(score_dir, score_judge);
      std::cout << "scored " << summary.scored << "/" << summary.total
                << "  gold_correct=" << summary.report.gold_correct_rate
                << "  entity_correct=" << summary.report.entity_correct_rate
                << "  mean_turns=" << summary.report.mean_turns << "\n";
      if (!score_judge.empty())
        std::cout << "error labels written for " << summary.classified_errors
                  << " failed task(s)\n";
      return 0;
    }

    if (gen_tasks->parsed())
      return cmd_gen_tasks(gen_tasks_kb, gen_tasks_seed, gen_tasks_count, gen_tasks_distractors,
                           gen_tasks_out, gen_tasks_qc, gen_tasks_assets);

    if (gen->parsed()) {
      gen_config.filter = trajectory::rejected_filter_from_string(rejected_kind);
      auto summary = runner::gen_trajectories(gen_config);
      std::cout << "gen-trajectories: " << summary.sft_records << " SFT record(s), "
                << summary.dpo_pairs << " DPO pair(s), drop rate " << summary.drop_rate
                << ", leakage hits " << summary.leakage_hits << "\n";
      if (summary.leakage_hits > 0) return 1;
      return summary.over_threshold ? 1 : 0;
    }

    if (replay->parsed()) {
      if (replay_mode == "print") return runner::replay_print(replay_transcript, std::cout);
      if (replay_mode == "human")
        return runner::human_play(play_config, std::cin, std::cout);
      std::cerr << "unknown replay mode \"" << replay_mode << "\"\n";
      return 2;
    }

    if (verify->parsed()) return runner::verify_run(verify_dir, std::cout);
  } catch (const Error& e) {
    std::cerr << error_kind_name(e.kind()) << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
