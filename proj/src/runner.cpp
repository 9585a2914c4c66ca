#include "affbench/runner.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "affbench/agents.hpp"
#include "affbench/error.hpp"
#include "affbench/metrics.hpp"
#include "affbench/remote.hpp"
#include "affbench/sha256.hpp"
#include "affbench/util.hpp"
#include "affbench/version.hpp"

namespace affbench::runner {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value) {
  if (key == "kb") config.kb_path = value;
  else if (key == "tasks") config.taskset_path = value;
  else if (key == "asset_root") config.asset_root = value;
  else if (key == "agent") config.agent_spec = value;
  else if (key == "budget") config.budget = std::stoi(value);
  else if (key == "image_policy") config.image_policy = env::image_policy_from_string(value);
  else if (key == "parse_retry_limit") config.parse_retry_limit = std::stoi(value);
  else if (key == "seed") config.seed = std::stoull(value);
  else if (key == "parallelism") config.parallelism = std::stoi(value);
  else if (key == "out") config.out_dir = value;
  else if (key == "strict_assets") config.strict_assets = (value == "true" || value == "1");
  else if (key == "wallclock") config.wallclock = (value == "true" || value == "1");
  else throw Error(ErrorKind::Config, "unknown config key \"" + key + "\"");
}

RunConfig load_run_config(const std::string& path) {
  RunConfig config;
  for (const auto& raw_line : split_lines(read_file(path))) {
    std::string line = trim(raw_line);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::Config, "config line without '=': " + line);
    apply_config_entry(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

ordered_json config_to_json(const RunConfig& c) {
  ordered_json j;
  j["kb"] = c.kb_path;
  j["tasks"] = c.taskset_path;
  j["asset_root"] = c.asset_root;
  j["agent"] = c.agent_spec;
  j["budget"] = c.budget;
  j["image_policy"] = env::image_policy_name(c.image_policy);
  j["parse_retry_limit"] = c.parse_retry_limit;
  j["seed"] = c.seed;
  j["parallelism"] = c.parallelism;
  j["strict_assets"] = c.strict_assets;
  j["wallclock"] = c.wallclock;
  return j;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

namespace {

struct Manifest {
  std::string engine_version = kEngineVersion;
  ordered_json run_config;
  ordered_json gen_config;
  std::string kb_digest;
  std::string taskset_digest;
  std::map<std::string, std::string> tasks;    // id -> pending|done|failed
  std::map<std::string, std::string> outputs;  // relative path -> sha256

  ordered_json to_json() const {
    ordered_json j;
    j["engine_version"] = engine_version;
    j["run_config"] = run_config.is_null() ? ordered_json(nullptr) : run_config;
    j["gen_config"] = gen_config.is_null() ? ordered_json(nullptr) : gen_config;
    j["kb_digest"] = kb_digest;
    j["taskset_digest"] = taskset_digest;
    ordered_json jt;
    for (const auto& [k, v] : tasks) jt[k] = v;
    j["tasks"] = std::move(jt);
    ordered_json jo;
    for (const auto& [k, v] : outputs) jo[k] = v;
    j["outputs"] = std::move(jo);
    return j;
  }

  static Manifest from_json(const json& j) {
    Manifest m;
    m.engine_version = j.at("engine_version").get<std::string>();
    if (j.contains("run_config") && !j.at("run_config").is_null())
      m.run_config = j.at("run_config");
    if (j.contains("gen_config") && !j.at("gen_config").is_null())
      m.gen_config = j.at("gen_config");
    m.kb_digest = j.at("kb_digest").get<std::string>();
    m.taskset_digest = j.at("taskset_digest").get<std::string>();
    for (const auto& [k, v] : j.at("tasks").items()) m.tasks[k] = v.get<std::string>();
    for (const auto& [k, v] : j.at("outputs").items()) m.outputs[k] = v.get<std::string>();
    return m;
  }
};

std::string manifest_path(const std::string& run_dir) { return run_dir + "/manifest.json"; }

void save_manifest(const std::string& run_dir, const Manifest& m) {
  write_file(manifest_path(run_dir), m.to_json().dump(2) + "\n");
}

Manifest load_manifest(const std::string& run_dir) {
  try {
    return Manifest::from_json(json::parse(read_file(manifest_path(run_dir))));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Schema, std::string("bad manifest: ") + e.what());
  }
}

std::string safe_filename(const std::string& id) {
  std::string out;
  bool changed = false;
  for (char c : id) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') {
      out.push_back(c);
    } else {
      out.push_back('_');
      changed = true;
    }
  }
  if (changed || out.empty()) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "-%016llx",
                  static_cast<unsigned long long>(fnv1a64(id)));
    out += buf;
  }
  return out;
}

std::shared_ptr<chat::TextBackend> make_text_backend(const std::string& spec) {
  if (spec == "stub") return std::make_shared<trajectory::StubTeacher>();
  if (spec == "garbage")
    return std::make_shared<chat::FixedBackend>("no structured reply here at all");
  if (spec.rfind("fixed:", 0) == 0)
    return std::make_shared<chat::FixedBackend>(spec.substr(6));
  if (spec.rfind("stub-judge:", 0) == 0) {
    const std::string code = spec.substr(11);
    ordered_json j;
    j["reasoning"] = "The predicted part does not support the required mechanism.";
    j["major_reason_code"] = code;
    j["major_reason_label"] = "canned verdict";
    j["contributing_reason_codes"] = {code};
    j["contributing_reason_labels"] = {"canned verdict"};
    return std::make_shared<chat::FixedBackend>(j.dump());
  }
  if (spec.rfind("remote:", 0) == 0)
    return std::make_shared<remote::RemoteChatBackend>(
        remote::BackendConfig::from_file(spec.substr(7)));
  throw Error(ErrorKind::Config, "unknown backend spec \"" + spec + "\"");
}

}  // namespace

// ---------------------------------------------------------------------------
// run-eval
// ---------------------------------------------------------------------------

RunSummary run_eval(const RunConfig& config) {
  if (config.parallelism < 1) throw Error(ErrorKind::Config, "parallelism must be >= 1");
  if (config.out_dir.empty()) throw Error(ErrorKind::Config, "output directory is required");
  if (config.budget < 1)
    throw Error(ErrorKind::Config, "budget must be >= 1, got " + std::to_string(config.budget));
  if (config.parse_retry_limit < 0)
    throw Error(ErrorKind::Config, "parse_retry_limit must be >= 0");

  const std::string kb_text = read_file(config.kb_path);
  const std::string tasks_text = read_file(config.taskset_path);
  const kb::KnowledgeBase kb = kb::load_kb(kb_text);
  taskset::LoadOptions load_options;
  load_options.strict_assets = config.strict_assets;
  load_options.asset_root = config.asset_root;
  const std::vector<taskset::Task> tasks = taskset::load_tasks(tasks_text, kb, load_options);

  fs::create_directories(config.out_dir + "/transcripts");

  Manifest manifest;
  if (file_exists(manifest_path(config.out_dir))) {
    manifest = load_manifest(config.out_dir);
    if (manifest.kb_digest != sha256_hex(kb_text) ||
        manifest.taskset_digest != sha256_hex(tasks_text))
      throw Error(ErrorKind::Config,
                  "input digest mismatch; refusing to resume over a different kb/taskset");
  } else {
    manifest.kb_digest = sha256_hex(kb_text);
    manifest.taskset_digest = sha256_hex(tasks_text);
    for (const auto& t : tasks) manifest.tasks[t.id] = "pending";
  }
  manifest.run_config = config_to_json(config);
  save_manifest(config.out_dir, manifest);

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < tasks.size(); ++i)
    if (manifest.tasks[tasks[i].id] != "done") todo.push_back(i);

  std::mutex manifest_mutex;
  std::atomic<std::size_t> cursor{0};
  std::atomic<int> failures{0};

  auto worker = [&]() {
    for (;;) {
      const std::size_t slot = cursor.fetch_add(1);
      if (slot >= todo.size()) return;
      const taskset::Task& task = tasks[todo[slot]];

      env::SessionConfig session_config;
      session_config.budget = config.budget;
      session_config.image_policy = config.image_policy;
      session_config.parse_retry_limit = config.parse_retry_limit;

      // Nothing may escape a worker thread; any failure marks the task.
      try {
        const auto started = std::chrono::steady_clock::now();
        env::Session session(task, kb, session_config);
        bool agent_failed = false;
        try {
          auto agent =
              agents::make_agent(config.agent_spec, kb, config.seed ^ fnv1a64(task.id));
          while (session.status() == env::Status::Running) {
            chat::MessageSequence view = env::render_messages(session, config.image_policy);
            agents::AgentVerdict verdict = agent->next(task, view);
            session.step_text(verdict.raw_text);
          }
        } catch (const std::exception&) {
          agent_failed = true;
          session.abort();
          ++failures;
        }

        env::TranscriptMeta meta;
        meta.seed = config.seed;
        if (config.wallclock)
          meta.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - started)
                             .count();
        env::Transcript transcript = env::finalize(session, meta);
        const std::string rel = "transcripts/" + safe_filename(task.id) + ".jsonl";
        const std::string text = env::transcript_to_jsonl(transcript);
        write_file(config.out_dir + "/" + rel, text);

        std::lock_guard<std::mutex> lock(manifest_mutex);
        manifest.tasks[task.id] = agent_failed ? "failed" : "done";
        manifest.outputs[rel] = sha256_hex(text);
        save_manifest(config.out_dir, manifest);
      } catch (const std::exception&) {
        ++failures;
        std::lock_guard<std::mutex> lock(manifest_mutex);
        manifest.tasks[task.id] = "failed";
        save_manifest(config.out_dir, manifest);
      }
    }
  };

  std::vector<std::thread> threads;
  const int n_threads = std::min<std::size_t>(config.parallelism, std::max<std::size_t>(todo.size(), 1));
  for (int i = 0; i < n_threads; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  RunSummary summary;
  summary.total = int(tasks.size());
  summary.newly_run = int(todo.size());
  summary.agent_failures = failures.load();
  for (const auto& [id, status] : manifest.tasks)
    if (status == "done" || status == "failed") ++summary.completed;
  return summary;
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

ScoreSummary score_run(const std::string& run_dir, const std::string& judge_spec) {
  Manifest manifest = load_manifest(run_dir);
  if (manifest.run_config.is_null())
    throw Error(ErrorKind::Config, "manifest has no run config; nothing to score");
  const std::string kb_path = manifest.run_config.at("kb").get<std::string>();
  const std::string tasks_path = manifest.run_config.at("tasks").get<std::string>();
  const kb::KnowledgeBase kb = kb::load_kb_file(kb_path);
  const std::vector<taskset::Task> tasks = taskset::load_tasks_file(tasks_path, kb);

  std::shared_ptr<chat::TextBackend> judge;
  if (!judge_spec.empty()) judge = make_text_backend(judge_spec);

  metrics::AggregateAccumulator acc;
  std::string per_task_lines;
  std::string error_lines;
  int scored = 0;
  int classified = 0;
  for (const auto& task : tasks) {
    auto it = manifest.tasks.find(task.id);
    if (it == manifest.tasks.end() || it->second == "pending") continue;
    const std::string rel = "transcripts/" + safe_filename(task.id) + ".jsonl";
    env::Transcript transcript = env::transcript_from_jsonl(read_file(run_dir + "/" + rel));
    metrics::PerTaskMetrics m = metrics::score_task(task, transcript);
    acc.add(m, task);
    per_task_lines += metrics::per_task_to_json(m).dump() + "\n";
    ++scored;

    if (judge && !m.gold_correct && transcript.final_action) {
      const auto& answer = std::get<env::AnswerAction>(transcript.final_action->op);
      metrics::Prediction prediction{answer.answer_entity, answer.answer_part,
                                     answer.answer_how_to_use};
      auto result = metrics::classify_error(task, prediction, *judge);
      ordered_json line;
      line["task_id"] = task.id;
      if (const auto* label = std::get_if<metrics::ErrorLabel>(&result)) {
        line["major"] = metrics::error_code_name(label->major);
        ordered_json contributing = ordered_json::array();
        for (auto code : label->contributing) contributing.push_back(metrics::error_code_name(code));
        line["contributing"] = std::move(contributing);
        line["rationale"] = label->rationale;
      } else {
        line["unclassifiable"] = std::get<metrics::Unclassifiable>(result).reason;
      }
      error_lines += line.dump() + "\n";
      ++classified;
    }
  }
  if (scored == 0) throw Error(ErrorKind::Io, "run directory holds no scoreable transcripts");

  ScoreSummary summary;
  summary.scored = scored;
  summary.total = int(tasks.size());
  summary.classified_errors = classified;
  summary.report = acc.finish();

  ordered_json aggregate;
  aggregate["scored"] = scored;
  aggregate["total"] = int(tasks.size());
  aggregate["partial"] = scored < int(tasks.size());
  aggregate["report"] = metrics::report_to_json(summary.report);
  const std::string aggregate_text = aggregate.dump(2) + "\n";

  write_file(run_dir + "/reports/per_task.jsonl", per_task_lines);
  write_file(run_dir + "/reports/aggregate.json", aggregate_text);
  manifest.outputs["reports/per_task.jsonl"] = sha256_hex(per_task_lines);
  manifest.outputs["reports/aggregate.json"] = sha256_hex(aggregate_text);
  if (judge) {
    write_file(run_dir + "/reports/errors.jsonl", error_lines);
    manifest.outputs["reports/errors.jsonl"] = sha256_hex(error_lines);
  }
  save_manifest(run_dir, manifest);
  return summary;
}

// ---------------------------------------------------------------------------
// gen-trajectories
// ---------------------------------------------------------------------------

GenSummary gen_trajectories(const GenConfig& config) {
  if (config.out_dir.empty()) throw Error(ErrorKind::Config, "output directory is required");
  const std::string kb_text = read_file(config.kb_path);
  const std::string tasks_text = read_file(config.taskset_path);
  const kb::KnowledgeBase kb = kb::load_kb(kb_text);
  const std::vector<taskset::Task> tasks = taskset::load_tasks(tasks_text, kb);
  auto teacher = make_text_backend(config.teacher_spec);

  trajectory::GenerateConfig gen_config;
  gen_config.sampling.retry_limit = config.branch_retry_limit;

  std::vector<trajectory::GeneratedTrajectory> trajectories;
  trajectories.reserve(tasks.size());
  for (const auto& task : tasks)
    trajectories.push_back(trajectory::generate_trajectory(task, kb, *teacher, gen_config));

  GenSummary summary;
  std::ostringstream sft;
  summary.sft_records = trajectory::emit_sft(trajectories, sft);

  trajectory::DpoEmitOptions dpo_options;
  dpo_options.filter = config.filter;
  dpo_options.max_pairs = config.max_dpo_pairs;
  dpo_options.seed = config.seed;
  const auto pairs = trajectory::build_dpo_pairs(trajectories, dpo_options);
  std::ostringstream dpo;
  summary.dpo_pairs = trajectory::emit_dpo(pairs, dpo);

  const auto scan = trajectory::scan_dpo_corpus(pairs, tasks, kb);
  summary.leakage_hits = scan.hits.size();

  std::size_t attempted_units = 0, dropped_units = 0;
  std::string drop_lines;
  for (const auto& traj : trajectories) {
    if (traj.dropped) {
      attempted_units += 1;
      dropped_units += 1;
      ++summary.dropped_trajectories;
      ordered_json j;
      j["task_id"] = traj.task_id;
      j["kind"] = "trajectory";
      j["reason"] = traj.drop_reason;
      drop_lines += j.dump() + "\n";
      continue;
    }
    attempted_units += traj.turns.size();
    for (const auto& ctx : traj.dropped_triples) {
      dropped_units += 1;
      ++summary.dropped_triples;
      ordered_json j;
      j["task_id"] = traj.task_id;
      j["kind"] = "triple";
      j["context_id"] = ctx;
      drop_lines += j.dump() + "\n";
    }
  }
  summary.drop_rate = attempted_units == 0
                          ? 1.0
                          : double(dropped_units) / double(attempted_units);
  summary.over_threshold = summary.drop_rate > config.drop_threshold;

  fs::create_directories(config.out_dir + "/datasets");
  write_file(config.out_dir + "/datasets/sft.jsonl", sft.str());
  write_file(config.out_dir + "/datasets/dpo.jsonl", dpo.str());
  write_file(config.out_dir + "/datasets/drops.jsonl", drop_lines);

  Manifest manifest;
  if (file_exists(manifest_path(config.out_dir))) {
    manifest = load_manifest(config.out_dir);
    if (manifest.kb_digest != sha256_hex(kb_text) ||
        manifest.taskset_digest != sha256_hex(tasks_text))
      throw Error(ErrorKind::Config,
                  "input digest mismatch; refusing to mix datasets from different inputs");
  } else {
    manifest.kb_digest = sha256_hex(kb_text);
    manifest.taskset_digest = sha256_hex(tasks_text);
  }
  ordered_json gj;
  gj["kb"] = config.kb_path;
  gj["tasks"] = config.taskset_path;
  gj["teacher"] = config.teacher_spec;
  gj["rejected_filter"] = config.filter == trajectory::RejectedFilter::Normal  ? "normal"
                          : config.filter == trajectory::RejectedFilter::Hard ? "hard"
                                                                              : "both";
  gj["max_dpo_pairs"] = config.max_dpo_pairs;
  gj["seed"] = config.seed;
  gj["drop_threshold"] = config.drop_threshold;
  manifest.gen_config = std::move(gj);
  manifest.outputs["datasets/sft.jsonl"] = sha256_hex(sft.str());
  manifest.outputs["datasets/dpo.jsonl"] = sha256_hex(dpo.str());
  manifest.outputs["datasets/drops.jsonl"] = sha256_hex(drop_lines);
  save_manifest(config.out_dir, manifest);
  return summary;
}

// ---------------------------------------------------------------------------
// replay / human play
// ---------------------------------------------------------------------------

int replay_print(const std::string& transcript_path, std::ostream& out) {
  env::Transcript transcript = env::transcript_from_jsonl(read_file(transcript_path));
  out << "task: " << transcript.task_id << "  engine: " << transcript.engine_version
      << "  seed: " << transcript.meta.seed << "\n";
  for (std::size_t i = 0; i < transcript.history.size(); ++i) {
    const env::TurnRecord& rec = transcript.history[i];
    out << "--- turn " << i << " ---\n";
    if (!rec.raw_agent_text.empty()) out << "[agent]\n" << rec.raw_agent_text << "\n";
    out << "[env]\n" << env::feedback_text(rec.feedback) << "\n";
  }
  out << "=== status: " << env::status_name(transcript.status)
      << ", turns: " << transcript.turns() << " ===\n";
  return 0;
}

int human_play(const HumanPlayConfig& config, std::istream& in, std::ostream& out) {
  const kb::KnowledgeBase kb = kb::load_kb_file(config.kb_path);
  const std::vector<taskset::Task> tasks = taskset::load_tasks_file(config.taskset_path, kb);
  const taskset::Task* task = nullptr;
  for (const auto& t : tasks)
    if (config.task_id.empty() || t.id == config.task_id) {
      task = &t;
      break;
    }
  if (!task) throw Error(ErrorKind::Config, "task \"" + config.task_id + "\" not found");

  env::SessionConfig session_config;
  session_config.budget = config.budget;
  session_config.image_policy = config.image_policy;
  env::Session session(*task, kb, session_config);

  out << env::feedback_text(session.history().front().feedback) << "\n";
  out << "(commands: e <entity> | p <part> | a <entity> | <part> | <how> | raw JSON | quit)\n";

  std::string line;
  while (session.status() == env::Status::Running) {
    out << "> " << std::flush;
    if (!std::getline(in, line)) {
      session.abort();
      break;
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line == "quit") {
      session.abort();
      break;
    }
    std::string raw;
    if (line[0] == '{') {
      raw = line;
    } else if (line.rfind("e ", 0) == 0) {
      raw = env::action_to_wire_text({"", env::InspectEntity{trim(line.substr(2)), {}, false}});
    } else if (line.rfind("p ", 0) == 0) {
      raw = env::action_to_wire_text({"", env::InspectPart{trim(line.substr(2))}});
    } else if (line.rfind("a ", 0) == 0) {
      std::string rest = line.substr(2);
      auto first = rest.find('|');
      auto second = first == std::string::npos ? std::string::npos : rest.find('|', first + 1);
      if (second == std::string::npos) {
        out << "answer format: a <entity> | <part> | <how to use>\n";
        continue;
      }
      raw = env::action_to_wire_text(
          {"", env::AnswerAction{trim(rest.substr(0, first)),
                                 trim(rest.substr(first + 1, second - first - 1)),
                                 trim(rest.substr(second + 1))}});
    } else {
      out << "unrecognized command\n";
      continue;
    }
    env::Feedback feedback = session.step_text(raw);
    out << env::feedback_text(feedback) << "\n";
  }

  env::Transcript transcript = env::finalize(session);
  if (!config.out_dir.empty()) {
    const std::string rel = "transcripts/" + safe_filename(task->id) + ".human.jsonl";
    write_file(config.out_dir + "/" + rel, env::transcript_to_jsonl(transcript));
    out << "transcript written to " << config.out_dir << "/" << rel << "\n";
  }
  out << "status: " << env::status_name(transcript.status) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

int verify_run(const std::string& run_dir, std::ostream& out) {
  Manifest manifest = load_manifest(run_dir);
  int mismatches = 0;
  auto check = [&](const std::string& label, const std::string& path,
                   const std::string& expected) {
    if (!file_exists(path)) {
      out << "MISSING  " << label << "\n";
      ++mismatches;
      return;
    }
    const std::string digest = sha256_hex(read_file(path));
    if (digest == expected) {
      out << "OK       " << label << "\n";
    } else {
      out << "MISMATCH " << label << "\n";
      ++mismatches;
    }
  };
  const ordered_json& cfg =
      manifest.run_config.is_null() ? manifest.gen_config : manifest.run_config;
  if (!cfg.is_null()) {
    check("kb (" + cfg.at("kb").get<std::string>() + ")", cfg.at("kb").get<std::string>(),
          manifest.kb_digest);
    check("tasks (" + cfg.at("tasks").get<std::string>() + ")",
          cfg.at("tasks").get<std::string>(), manifest.taskset_digest);
  }
  for (const auto& [rel, digest] : manifest.outputs)
    check(rel, run_dir + "/" + rel, digest);
  out << (mismatches == 0 ? "verify: clean" : "verify: " + std::to_string(mismatches) + " problem(s)")
      << "\n";
  return mismatches == 0 ? 0 : 1;
}

}  // namespace affbench::runner
