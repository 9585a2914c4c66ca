#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "affbench/agents.hpp"
#include "affbench/env.hpp"
#include "affbench/error.hpp"
#include "affbench/kb.hpp"
#include "affbench/metrics.hpp"
#include "affbench/runner.hpp"
#include "affbench/synth.hpp"
#include "affbench/taskset.hpp"
#include "affbench/trajectory.hpp"
#include "affbench/version.hpp"

namespace py = pybind11;
using namespace affbench;

namespace {

py::object json_to_py(const nlohmann::ordered_json& value) {
  return py::module_::import("json").attr("loads")(value.dump());
}

py::object parse_action_py(const std::string& raw) {
  auto result = env::parse_action(raw);
  nlohmann::ordered_json j;
  if (const auto* action = std::get_if<env::Action>(&result)) {
    j["ok"] = true;
    j["action"] = env::action_to_wire(*action);
  } else {
    const auto& e = std::get<env::ParseError>(result);
    j["ok"] = false;
    j["error"] = env::parse_error_kind_name(e.kind);
    j["message"] = e.message;
  }
  return json_to_py(j);
}

/// Owns a session plus the data it points at, so python lifetimes are safe.
struct PySession {
  kb::KnowledgeBase kb;
  taskset::Task task;
  std::unique_ptr<env::Session> session;

  PySession(const taskset::Task& t, const kb::KnowledgeBase& base, int budget,
            const std::string& image_policy, int parse_retry_limit)
      : kb(base), task(t) {
    env::SessionConfig config;
    config.budget = budget;
    config.image_policy = env::image_policy_from_string(image_policy);
    config.parse_retry_limit = parse_retry_limit;
    session = std::make_unique<env::Session>(task, kb, config);
  }

  py::object step_text(const std::string& raw) {
    env::Feedback fb = session->step_text(raw);
    nlohmann::ordered_json j = env::feedback_to_json(fb);
    j["text"] = env::feedback_text(fb);
    return json_to_py(j);
  }

  py::object render_messages(const std::string& policy) {
    return json_to_py(chat::messages_to_json(
        env::render_messages(*session, env::image_policy_from_string(policy))));
  }

  std::string status() const { return env::status_name(session->status()); }
  int turn() const { return session->turn(); }
  std::string finalize_jsonl(std::uint64_t seed) {
    return env::transcript_to_jsonl(env::finalize(*session, {seed, 0}));
  }
  void abort() { session->abort(); }
};

struct PyAgent {
  std::unique_ptr<agents::Agent> agent;
  std::string next(PySession& s) {
    return agent
        ->next(s.task, env::render_messages(*s.session, s.session->config().image_policy))
        .raw_text;
  }
  std::string name() const { return agent->name(); }
};

}  // namespace

PYBIND11_MODULE(_affbench, m) {
  m.doc() = "Interactive affordance benchmark engine";
  m.attr("__version__") = kEngineVersion;

  py::register_exception<Error>(m, "EngineError");

  py::class_<kb::KnowledgeBase>(m, "KnowledgeBase")
      .def_property_readonly("entity_names",
                             [](const kb::KnowledgeBase& kb) {
                               std::vector<std::string> names;
                               for (const auto& e : kb.entities) names.push_back(e.name);
                               return names;
                             })
      .def_property_readonly("total_parts", &kb::KnowledgeBase::total_parts);

  m.def("load_kb", &kb::load_kb, py::arg("text"));
  m.def("load_kb_file", &kb::load_kb_file, py::arg("path"));
  m.def("serialize_kb", &kb::serialize_kb);
  m.def("validate_kb", [](const kb::KnowledgeBase& base) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& v : kb::validate_kb(base))
      arr.push_back({{"code", v.code}, {"path", v.path}, {"message", v.message}});
    return json_to_py(arr);
  });
  m.def(
      "generate_kb",
      [](std::uint64_t seed, std::size_t entities, std::size_t min_parts, std::size_t max_parts,
         bool with_assets) {
        synth::KbSpec spec;
        spec.entities = entities;
        spec.min_parts = min_parts;
        spec.max_parts = max_parts;
        spec.with_assets = with_assets;
        return synth::generate_kb(seed, spec);
      },
      py::arg("seed"), py::arg("entities") = 8, py::arg("min_parts") = 2,
      py::arg("max_parts") = 4, py::arg("with_assets") = false);

  py::class_<taskset::Task>(m, "Task")
      .def_property_readonly("id", [](const taskset::Task& t) { return t.id; })
      .def_property_readonly("goal_text", [](const taskset::Task& t) { return t.goal_text; })
      .def_property_readonly("entity_names",
                             [](const taskset::Task& t) { return t.entity_names; })
      .def_property_readonly("gold_entity", [](const taskset::Task& t) { return t.gold.entity; })
      .def_property_readonly("gold_part", [](const taskset::Task& t) { return t.gold.part; })
      .def_property_readonly("gold_affordance",
                             [](const taskset::Task& t) { return t.gold.affordance_label; });

  py::class_<taskset::LoadOptions>(m, "LoadOptions")
      .def(py::init<>())
      .def_readwrite("strict_assets", &taskset::LoadOptions::strict_assets)
      .def_readwrite("asset_root", &taskset::LoadOptions::asset_root);
  m.def("load_tasks", &taskset::load_tasks, py::arg("text"), py::arg("kb"),
        py::arg("options") = taskset::LoadOptions{});
  m.def("load_tasks_file", &taskset::load_tasks_file, py::arg("path"), py::arg("kb"),
        py::arg("options") = taskset::LoadOptions{});
  m.def("serialize_tasks", &taskset::serialize_tasks);
  m.def(
      "generate_tasks",
      [](const kb::KnowledgeBase& base, std::uint64_t seed, std::size_t count,
         std::size_t distractors, bool with_assets) {
        return synth::generate_tasks(base, seed, {count, distractors, with_assets});
      },
      py::arg("kb"), py::arg("seed"), py::arg("count") = 20, py::arg("distractors") = 3,
      py::arg("with_assets") = false);
  m.def("qc_check", [](const taskset::Task& task, const kb::KnowledgeBase& base) {
    return json_to_py(taskset::qc_report_to_json(task.id, taskset::qc_check(task, base)));
  });
  m.def("sample_gold_triple", [](const kb::KnowledgeBase& base, std::uint64_t seed) {
    auto gold = taskset::sample_gold_triple(base, seed);
    nlohmann::ordered_json j;
    j["entity"] = gold.entity;
    j["part"] = gold.part;
    j["affordance_label"] = gold.affordance_label;
    j["typicality_level"] = gold.typicality_level;
    return json_to_py(j);
  });

  m.def("parse_action", &parse_action_py, py::arg("raw"));
  m.def("eval_system_prompt", [] { return env::eval_system_prompt(); });

  py::class_<PySession>(m, "Session")
      .def(py::init<const taskset::Task&, const kb::KnowledgeBase&, int, const std::string&,
                    int>(),
           py::arg("task"), py::arg("kb"), py::arg("budget") = 50,
           py::arg("image_policy") = "last_image", py::arg("parse_retry_limit") = 3)
      .def("step_text", &PySession::step_text, py::arg("raw"))
      .def("render_messages", &PySession::render_messages, py::arg("policy") = "last_image")
      .def("abort", &PySession::abort)
      .def("finalize_jsonl", &PySession::finalize_jsonl, py::arg("seed") = 0)
      .def_property_readonly("status", &PySession::status)
      .def_property_readonly("turn", &PySession::turn);

  py::class_<PyAgent>(m, "Agent")
      .def("next", &PyAgent::next, py::arg("session"))
      .def_property_readonly("name", &PyAgent::name);
  m.def(
      "make_agent",
      [](const std::string& spec, const kb::KnowledgeBase& base, std::uint64_t seed) {
        PyAgent out;
        out.agent = agents::make_agent(spec, base, seed);
        return out;
      },
      py::arg("spec"), py::arg("kb"), py::arg("seed") = 0);

  m.def(
      "score_task",
      [](const taskset::Task& task, const std::string& transcript_jsonl) {
        env::Transcript t = env::transcript_from_jsonl(transcript_jsonl);
        return json_to_py(metrics::per_task_to_json(metrics::score_task(task, t)));
      },
      py::arg("task"), py::arg("transcript_jsonl"));

  m.def(
      "classify_error",
      [](const taskset::Task& task, const std::string& entity, const std::string& part,
         const std::string& how_to_use, py::function judge) {
        chat::CallbackBackend backend([&judge](const chat::MessageSequence& messages) {
          return judge(json_to_py(chat::messages_to_json(messages))).cast<std::string>();
        });
        auto result =
            metrics::classify_error(task, {entity, part, how_to_use}, backend);
        nlohmann::ordered_json j;
        if (const auto* label = std::get_if<metrics::ErrorLabel>(&result)) {
          j["major"] = metrics::error_code_name(label->major);
          nlohmann::ordered_json contributing = nlohmann::ordered_json::array();
          for (auto code : label->contributing)
            contributing.push_back(metrics::error_code_name(code));
          j["contributing"] = std::move(contributing);
          j["rationale"] = label->rationale;
        } else {
          j["unclassifiable"] = std::get<metrics::Unclassifiable>(result).reason;
        }
        return json_to_py(j);
      },
      py::arg("task"), py::arg("entity"), py::arg("part"), py::arg("how_to_use"),
      py::arg("judge"), "Judge is a callable taking the message list and returning reply text");

  m.def("dpo_loss", &trajectory::dpo_loss, py::arg("logp_pol_chosen"),
        py::arg("logp_ref_chosen"), py::arg("logp_pol_rejected"), py::arg("logp_ref_rejected"),
        py::arg("beta"));
  m.def("sft_nll", &trajectory::sft_nll, py::arg("target_token_logps"));

  m.def(
      "run_eval",
      [](const std::string& kb_path, const std::string& taskset_path, const std::string& out_dir,
         const std::string& agent, int budget, const std::string& image_policy,
         std::uint64_t seed, int parallelism) {
        runner::RunConfig config;
        config.kb_path = kb_path;
        config.taskset_path = taskset_path;
        config.out_dir = out_dir;
        config.agent_spec = agent;
        config.budget = budget;
        config.image_policy = env::image_policy_from_string(image_policy);
        config.seed = seed;
        config.parallelism = parallelism;
        auto summary = runner::run_eval(config);
        nlohmann::ordered_json j;
        j["total"] = summary.total;
        j["completed"] = summary.completed;
        j["newly_run"] = summary.newly_run;
        j["agent_failures"] = summary.agent_failures;
        return json_to_py(j);
      },
      py::arg("kb_path"), py::arg("taskset_path"), py::arg("out_dir"),
      py::arg("agent") = "oracle", py::arg("budget") = 50,
      py::arg("image_policy") = "last_image", py::arg("seed") = 0, py::arg("parallelism") = 1);

  m.def("score_run", [](const std::string& run_dir) {
    auto summary = runner::score_run(run_dir);
    nlohmann::ordered_json j;
    j["scored"] = summary.scored;
    j["total"] = summary.total;
    j["report"] = metrics::report_to_json(summary.report);
    return json_to_py(j);
  });

  m.def(
      "gen_trajectories",
      [](const std::string& kb_path, const std::string& taskset_path, const std::string& out_dir,
         const std::string& teacher, const std::string& rejected, std::size_t max_dpo_pairs,
         std::uint64_t seed) {
        runner::GenConfig config;
        config.kb_path = kb_path;
        config.taskset_path = taskset_path;
        config.out_dir = out_dir;
        config.teacher_spec = teacher;
        config.filter = trajectory::rejected_filter_from_string(rejected);
        config.max_dpo_pairs = max_dpo_pairs;
        config.seed = seed;
        auto summary = runner::gen_trajectories(config);
        nlohmann::ordered_json j;
        j["sft_records"] = summary.sft_records;
        j["dpo_pairs"] = summary.dpo_pairs;
        j["dropped_trajectories"] = summary.dropped_trajectories;
        j["dropped_triples"] = summary.dropped_triples;
        j["drop_rate"] = summary.drop_rate;
        j["leakage_hits"] = summary.leakage_hits;
        return json_to_py(j);
      },
      py::arg("kb_path"), py::arg("taskset_path"), py::arg("out_dir"),
      py::arg("teacher") = "stub", py::arg("rejected") = "both", py::arg("max_dpo_pairs") = 0,
      py::arg("seed") = 0);

  m.def("verify_run", [](const std::string& run_dir) {
    std::ostringstream sink;
    return runner::verify_run(run_dir, sink);
  });
}
