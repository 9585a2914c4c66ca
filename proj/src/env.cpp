#include "affbench/env.hpp"

#include <algorithm>

#include "affbench/error.hpp"
#include "affbench/util.hpp"
#include "affbench/version.hpp"

namespace affbench::env {

using nlohmann::json;
using nlohmann::ordered_json;

const char* parse_error_kind_name(ParseErrorKind k) {
  switch (k) {
    case ParseErrorKind::NoJsonFound: return "NO_JSON_FOUND";
    case ParseErrorKind::MalformedJson: return "MALFORMED_JSON";
    case ParseErrorKind::UnknownAction: return "UNKNOWN_ACTION";
    case ParseErrorKind::MissingField: return "MISSING_FIELD";
  }
  return "PARSE_ERROR";
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Answered: return "answered";
    case Verdict::NoAnswer: return "no-answer";
    case Verdict::Aborted: return "aborted";
  }
  return "no-answer";
}

const char* image_policy_name(ImagePolicy p) {
  switch (p) {
    case ImagePolicy::NoImage: return "no_image";
    case ImagePolicy::LastImage: return "last_image";
    case ImagePolicy::AllImages: return "all_images";
  }
  return "last_image";
}

ImagePolicy image_policy_from_string(const std::string& s) {
  if (s == "no_image") return ImagePolicy::NoImage;
  if (s == "last_image") return ImagePolicy::LastImage;
  if (s == "all_images") return ImagePolicy::AllImages;
  throw Error(ErrorKind::Config, "unknown image policy: \"" + s + "\"");
}

const char* status_name(Status s) {
  switch (s) {
    case Status::Running: return "running";
    case Status::Answered: return "answered";
    case Status::BudgetExhausted: return "budget_exhausted";
    case Status::Aborted: return "aborted";
  }
  return "running";
}

Status status_from_string(const std::string& s) {
  if (s == "running") return Status::Running;
  if (s == "answered") return Status::Answered;
  if (s == "budget_exhausted") return Status::BudgetExhausted;
  if (s == "aborted") return Status::Aborted;
  throw Error(ErrorKind::Schema, "unknown status: \"" + s + "\"");
}

// ---------------------------------------------------------------------------
// Action parsing
// ---------------------------------------------------------------------------

namespace {

/// Brace-balanced, string-aware spans of top-level {...} objects.
std::vector<std::pair<std::size_t, std::size_t>> balanced_object_spans(std::string_view text) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (escaped)
        escaped = false;
      else if (c == '\\')
        escaped = true;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"' && depth > 0) {
      in_string = true;
    } else if (c == '{') {
      if (depth == 0) start = i;
      ++depth;
    } else if (c == '}') {
      if (depth > 0) {
        --depth;
        if (depth == 0) spans.emplace_back(start, i + 1);
      }
    }
  }
  return spans;
}

}  // namespace

std::optional<json> extract_last_json_object(std::string_view raw) {
  auto spans = balanced_object_spans(raw);
  for (auto it = spans.rbegin(); it != spans.rend(); ++it) {
    json parsed = json::parse(raw.substr(it->first, it->second - it->first), nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
  }
  return std::nullopt;
}

ParseResult parse_action(std::string_view raw) {
  auto spans = balanced_object_spans(raw);
  if (spans.empty())
    return ParseError{ParseErrorKind::NoJsonFound, "reply contains no JSON object"};
  auto obj = extract_last_json_object(raw);
  if (!obj)
    return ParseError{ParseErrorKind::MalformedJson,
                      "braces found but no span parses as a JSON object"};
  const json& j = *obj;

  Action action;
  if (j.contains("reasoning") && j.at("reasoning").is_string())
    action.reasoning = j.at("reasoning").get<std::string>();

  auto act = j.find("action");
  if (act == j.end())
    return ParseError{ParseErrorKind::MissingField, "required key \"action\" is absent"};
  if (!act->is_string() ||
      (*act != "inspect_entity" && *act != "inspect_part" && *act != "answer"))
    return ParseError{ParseErrorKind::UnknownAction,
                      "action value must be one of inspect_entity, inspect_part, answer"};

  auto string_field = [&](const char* key, std::string& out) -> bool {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) return false;
    out = it->get<std::string>();
    return true;
  };

  if (*act == "inspect_entity") {
    InspectEntity op;
    if (!string_field("entity", op.entity))
      return ParseError{ParseErrorKind::MissingField, "inspect_entity needs a string \"entity\""};
    if (j.contains("top_candidates") && j.at("top_candidates").is_array()) {
      bool all_strings = true;
      for (const auto& c : j.at("top_candidates"))
        if (!c.is_string()) all_strings = false;
      if (all_strings) {
        op.top_candidates = j.at("top_candidates").get<std::vector<std::string>>();
        op.has_top_candidates = true;
      }
    }
    action.op = std::move(op);
  } else if (*act == "inspect_part") {
    InspectPart op;
    if (!string_field("part", op.part))
      return ParseError{ParseErrorKind::MissingField, "inspect_part needs a string \"part\""};
    action.op = std::move(op);
  } else {
    AnswerAction op;
    if (!string_field("answer_entity", op.answer_entity))
      return ParseError{ParseErrorKind::MissingField, "answer needs a string \"answer_entity\""};
    if (!string_field("answer_part", op.answer_part))
      return ParseError{ParseErrorKind::MissingField, "answer needs a string \"answer_part\""};
    if (!string_field("answer_how_to_use", op.answer_how_to_use))
      return ParseError{ParseErrorKind::MissingField,
                        "answer needs a string \"answer_how_to_use\""};
    action.op = std::move(op);
  }
  return action;
}

ordered_json action_to_wire(const Action& action) {
  ordered_json j;
  j["reasoning"] = action.reasoning;
  if (const auto* ie = std::get_if<InspectEntity>(&action.op)) {
    j["action"] = "inspect_entity";
    j["entity"] = ie->entity;
    if (ie->has_top_candidates) j["top_candidates"] = ie->top_candidates;
  } else if (const auto* ip = std::get_if<InspectPart>(&action.op)) {
    j["action"] = "inspect_part";
    j["part"] = ip->part;
  } else {
    const auto& a = std::get<AnswerAction>(action.op);
    j["action"] = "answer";
    j["answer_entity"] = a.answer_entity;
    j["answer_part"] = a.answer_part;
    j["answer_how_to_use"] = a.answer_how_to_use;
  }
  return j;
}

std::string action_to_wire_text(const Action& action) { return action_to_wire(action).dump(); }

// ---------------------------------------------------------------------------
// Feedback serialization
// ---------------------------------------------------------------------------

std::string feedback_image(const Feedback& feedback) {
  if (const auto* init = std::get_if<InitialFeedback>(&feedback)) return init->env_image;
  if (const auto* ef = std::get_if<EntityFeedback>(&feedback)) return ef->image;
  if (const auto* pf = std::get_if<PartFeedback>(&feedback)) return pf->image;
  return {};
}

bool feedback_is_successful_inspection(const Feedback& feedback) {
  return std::holds_alternative<EntityFeedback>(feedback) ||
         std::holds_alternative<PartFeedback>(feedback);
}

ordered_json feedback_to_json(const Feedback& feedback) {
  ordered_json j;
  if (const auto* init = std::get_if<InitialFeedback>(&feedback)) {
    j["kind"] = "initial";
    j["goal_text"] = init->goal_text;
    j["scenario"] = init->scenario;
    j["entity_names"] = init->entity_names;
    j["env_image"] = init->env_image;
  } else if (const auto* ef = std::get_if<EntityFeedback>(&feedback)) {
    j["kind"] = "entity";
    j["entity"] = ef->entity;
    j["part_names"] = ef->part_names;
    j["image"] = ef->image;
  } else if (const auto* pf = std::get_if<PartFeedback>(&feedback)) {
    j["kind"] = "part";
    j["part"] = pf->part;
    j["owner_entity"] = pf->owner_entity;
    j["physical_summary"] = pf->physical_summary;
    j["state_summary"] = pf->state_summary;
    ordered_json dis = ordered_json::array();
    for (const auto& [label, text] : pf->disambiguation)
      dis.push_back(ordered_json{{"label", label}, {"text", text}});
    j["disambiguation"] = std::move(dis);
    j["image"] = pf->image;
  } else if (const auto* pe = std::get_if<ProtocolErrorFeedback>(&feedback)) {
    j["kind"] = "protocol_error";
    j["code"] = pe->code;
    j["message"] = pe->message;
  } else {
    const auto& term = std::get<TerminalFeedback>(feedback);
    j["kind"] = "terminal";
    j["verdict"] = verdict_name(term.verdict);
  }
  return j;
}

Feedback feedback_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "initial") {
    InitialFeedback f;
    f.goal_text = j.at("goal_text").get<std::string>();
    f.scenario = j.at("scenario").get<std::string>();
    f.entity_names = j.at("entity_names").get<std::vector<std::string>>();
    f.env_image = j.at("env_image").get<std::string>();
    return f;
  }
  if (kind == "entity") {
    EntityFeedback f;
    f.entity = j.at("entity").get<std::string>();
    f.part_names = j.at("part_names").get<std::vector<std::string>>();
    f.image = j.at("image").get<std::string>();
    return f;
  }
  if (kind == "part") {
    PartFeedback f;
    f.part = j.at("part").get<std::string>();
    f.owner_entity = j.at("owner_entity").get<std::string>();
    f.physical_summary = j.at("physical_summary").get<std::string>();
    f.state_summary = j.at("state_summary").get<std::string>();
    for (const auto& d : j.at("disambiguation"))
      f.disambiguation.emplace_back(d.at("label").get<std::string>(),
                                    d.at("text").get<std::string>());
    f.image = j.at("image").get<std::string>();
    return f;
  }
  if (kind == "protocol_error") {
    return ProtocolErrorFeedback{j.at("code").get<std::string>(),
                                 j.at("message").get<std::string>()};
  }
  if (kind == "terminal") {
    const std::string v = j.at("verdict").get<std::string>();
    if (v == "answered") return TerminalFeedback{Verdict::Answered};
    if (v == "no-answer") return TerminalFeedback{Verdict::NoAnswer};
    if (v == "aborted") return TerminalFeedback{Verdict::Aborted};
    throw Error(ErrorKind::Schema, "unknown verdict: " + v);
  }
  throw Error(ErrorKind::Schema, "unknown feedback kind: " + kind);
}

// ---------------------------------------------------------------------------
// Session
// ---------------------------------------------------------------------------

Session::Session(const taskset::Task& task, const kb::KnowledgeBase& kb, SessionConfig config)
    : task_(&task), kb_(&kb), config_(config) {
  if (config.budget < 1)
    throw Error(ErrorKind::Config, "budget must be >= 1, got " + std::to_string(config.budget));
  if (config.parse_retry_limit < 0)
    throw Error(ErrorKind::Config, "parse_retry_limit must be >= 0");
  InitialFeedback init;
  init.goal_text = task.goal_text;
  init.scenario = task.scenario;
  init.entity_names = task.entity_names;
  if (config.image_policy != ImagePolicy::NoImage) init.env_image = task.assets.env_image;
  history_.push_back(TurnRecord{std::move(init), "", std::nullopt});
}

Session new_session(const taskset::Task& task, const kb::KnowledgeBase& kb,
                    SessionConfig config) {
  return Session(task, kb, config);
}

std::optional<Action> Session::final_action() const {
  if (status_ != Status::Answered) return std::nullopt;
  for (auto it = history_.rbegin(); it != history_.rend(); ++it)
    if (it->parse && std::holds_alternative<Action>(*it->parse)) {
      const Action& a = std::get<Action>(*it->parse);
      if (a.is_answer()) return a;
    }
  return std::nullopt;
}

const kb::Part* Session::resolve_part(const std::string& part_name, std::string& owner_out,
                                      std::string& error_code,
                                      std::string& error_message) const {
  // Resolution order: the last inspected entity, then previously inspected
  // entities newest-first, then a unique global match among task entities.
  std::vector<std::string> searched;
  auto try_entity = [&](const std::string& entity) -> const kb::Part* {
    if (std::find(searched.begin(), searched.end(), entity) != searched.end()) return nullptr;
    searched.push_back(entity);
    const kb::Entity* e = kb_->find_entity(entity);
    if (!e) return nullptr;
    return e->find_part(part_name);
  };

  if (last_inspected_entity_) {
    if (const kb::Part* p = try_entity(*last_inspected_entity_)) {
      owner_out = *last_inspected_entity_;
      return p;
    }
  }
  for (auto it = explored_entities_.rbegin(); it != explored_entities_.rend(); ++it) {
    if (const kb::Part* p = try_entity(*it)) {
      owner_out = *it;
      return p;
    }
  }

  std::vector<std::string> owners;
  for (const auto& entity : task_->entity_names) {
    const kb::Entity* e = kb_->find_entity(entity);
    if (e && e->find_part(part_name)) owners.push_back(entity);
  }
  if (owners.size() == 1) {
    const kb::Entity* e = kb_->find_entity(owners.front());
    owner_out = owners.front();
    return e->find_part(part_name);
  }
  if (owners.empty()) {
    error_code = "UNKNOWN_PART";
    error_message = "No entity in this scene has a part named \"" + part_name +
                    "\". Copy part names exactly from an entity inspection.";
  } else {
    error_code = "AMBIGUOUS_PART";
    error_message = "Several entities have a part named \"" + part_name +
                    "\". Inspect the entity you mean first.";
  }
  return nullptr;
}

Feedback Session::apply(const Action& action) {
  if (const auto* ie = std::get_if<InspectEntity>(&action.op)) {
    if (std::find(task_->entity_names.begin(), task_->entity_names.end(), ie->entity) ==
        task_->entity_names.end())
      return ProtocolErrorFeedback{
          "UNKNOWN_ENTITY", "No entity named \"" + ie->entity +
                                "\" in this scene. Copy entity names exactly from the list."};
    const kb::Entity* e = kb_->find_entity(ie->entity);
    EntityFeedback fb;
    fb.entity = ie->entity;
    for (const auto& p : e->parts) fb.part_names.push_back(p.name);
    if (config_.image_policy != ImagePolicy::NoImage)
      fb.image = task_->assets.entity_image(ie->entity);
    explored_entities_.push_back(ie->entity);
    last_inspected_entity_ = ie->entity;
    return fb;
  }
  if (const auto* ip = std::get_if<InspectPart>(&action.op)) {
    std::string owner, code, message;
    const kb::Part* part = resolve_part(ip->part, owner, code, message);
    if (!part) return ProtocolErrorFeedback{code, message};
    PartFeedback fb;
    fb.part = part->name;
    fb.owner_entity = owner;
    fb.physical_summary = part->physical_summary;
    fb.state_summary = part->state_summary;
    for (const auto& label : part->text_needed)
      if (const kb::AttributeClaim* claim = part->find_attribute(label))
        fb.disambiguation.emplace_back(label, claim->text);
    if (config_.image_policy != ImagePolicy::NoImage)
      fb.image = task_->assets.part_image(owner, part->name);
    explored_parts_.emplace_back(owner, part->name);
    return fb;
  }
  return TerminalFeedback{Verdict::Answered};
}

Feedback Session::step(const Action& action, const std::string& raw_text) {
  if (status_ != Status::Running)
    return ProtocolErrorFeedback{"SESSION_CLOSED", "The session is over; no more actions."};

  consecutive_parse_errors_ = 0;
  Feedback feedback = apply(action);
  ++turn_;
  if (action.is_answer()) {
    status_ = Status::Answered;
  } else if (turn_ >= config_.budget) {
    // Budget spent without an answer; the inspection effects above stand but
    // the session closes with a no-answer verdict.
    status_ = Status::BudgetExhausted;
    feedback = TerminalFeedback{Verdict::NoAnswer};
  }
  history_.push_back(TurnRecord{feedback, raw_text, ParseResult{action}});
  return feedback;
}

void Session::abort() {
  if (status_ != Status::Running) return;
  status_ = Status::Aborted;
  history_.push_back(TurnRecord{TerminalFeedback{Verdict::Aborted}, "", std::nullopt});
}

Feedback Session::step_text(const std::string& raw_text) {
  if (status_ != Status::Running)
    return ProtocolErrorFeedback{"SESSION_CLOSED", "The session is over; no more actions."};

  ParseResult parsed = parse_action(raw_text);
  if (const auto* action = std::get_if<Action>(&parsed)) return step(*action, raw_text);

  const ParseError& err = std::get<ParseError>(parsed);
  ++turn_;
  ++consecutive_parse_errors_;
  Feedback feedback = ProtocolErrorFeedback{
      parse_error_kind_name(err.kind),
      "Reply could not be used (" + err.message +
          "). End your reply with exactly one JSON object such as "
          R"({"reasoning":"...","action":"inspect_entity","entity":"<exact entity name>"}.)"};
  if (consecutive_parse_errors_ >= config_.parse_retry_limit &&
      config_.parse_retry_limit > 0) {
    status_ = Status::Aborted;
    feedback = TerminalFeedback{Verdict::Aborted};
  } else if (turn_ >= config_.budget) {
    status_ = Status::BudgetExhausted;
    feedback = TerminalFeedback{Verdict::NoAnswer};
  }
  history_.push_back(TurnRecord{feedback, raw_text, parsed});
  return feedback;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

chat::MessageSequence render_from_history(const std::vector<TurnRecord>& history,
                                          ImagePolicy policy) {
  chat::MessageSequence out;
  out.push_back({chat::Role::System, eval_system_prompt(), {}});

  // Index of the most recent inspection feedback that carries an image.
  std::size_t last_image_index = history.size();
  if (policy == ImagePolicy::LastImage) {
    for (std::size_t i = history.size(); i > 1; --i) {
      if (feedback_is_successful_inspection(history[i - 1].feedback) &&
          !feedback_image(history[i - 1].feedback).empty()) {
        last_image_index = i - 1;
        break;
      }
    }
  }

  for (std::size_t i = 0; i < history.size(); ++i) {
    const TurnRecord& rec = history[i];
    if (i > 0) out.push_back({chat::Role::Assistant, rec.raw_agent_text, {}});
    chat::Message user{chat::Role::User, feedback_text(rec.feedback), {}};
    const std::string image = feedback_image(rec.feedback);
    if (!image.empty()) {
      bool attach = false;
      switch (policy) {
        case ImagePolicy::NoImage: attach = false; break;
        case ImagePolicy::AllImages: attach = true; break;
        case ImagePolicy::LastImage:
          attach = (i == 0) || (i == last_image_index);
          break;
      }
      if (attach) user.image_refs.push_back(image);
    }
    out.push_back(std::move(user));
  }
  return out;
}

chat::MessageSequence render_messages(const Session& session, ImagePolicy policy) {
  return render_from_history(session.history(), policy);
}

// ---------------------------------------------------------------------------
// Transcript
// ---------------------------------------------------------------------------

Transcript finalize(const Session& session, TranscriptMeta meta) {
  if (session.status() == Status::Running)
    throw Error(ErrorKind::StillRunning, "cannot finalize a running session");
  Transcript t;
  t.task_id = session.task().id;
  t.engine_version = kEngineVersion;
  t.config = session.config();
  t.meta = meta;
  t.history = session.history();
  t.status = session.status();
  t.final_action = session.final_action();
  t.turn_count = session.turn();
  return t;
}

namespace {

ordered_json parse_result_to_json(const ParseResult& r) {
  ordered_json j;
  if (const auto* action = std::get_if<Action>(&r)) {
    j["ok"] = true;
    j["action"] = action_to_wire(*action);
  } else {
    const ParseError& e = std::get<ParseError>(r);
    j["ok"] = false;
    j["error"] = parse_error_kind_name(e.kind);
    j["message"] = e.message;
  }
  return j;
}

ParseResult parse_result_from_json(const json& j) {
  if (j.at("ok").get<bool>()) {
    ParseResult r = parse_action(j.at("action").dump());
    if (!std::holds_alternative<Action>(r))
      throw Error(ErrorKind::Schema, "stored action does not reparse");
    return r;
  }
  const std::string code = j.at("error").get<std::string>();
  ParseErrorKind kind = ParseErrorKind::MalformedJson;
  if (code == "NO_JSON_FOUND") kind = ParseErrorKind::NoJsonFound;
  else if (code == "MALFORMED_JSON") kind = ParseErrorKind::MalformedJson;
  else if (code == "UNKNOWN_ACTION") kind = ParseErrorKind::UnknownAction;
  else if (code == "MISSING_FIELD") kind = ParseErrorKind::MissingField;
  return ParseError{kind, j.at("message").get<std::string>()};
}

}  // namespace

std::string transcript_to_jsonl(const Transcript& transcript) {
  std::string out;
  ordered_json header;
  header["type"] = "header";
  header["task_id"] = transcript.task_id;
  header["seed"] = transcript.meta.seed;
  ordered_json cfg;
  cfg["budget"] = transcript.config.budget;
  cfg["image_policy"] = image_policy_name(transcript.config.image_policy);
  cfg["parse_retry_limit"] = transcript.config.parse_retry_limit;
  header["config"] = std::move(cfg);
  header["engine_version"] = transcript.engine_version;
  out += header.dump() + "\n";

  for (std::size_t i = 0; i < transcript.history.size(); ++i) {
    const TurnRecord& rec = transcript.history[i];
    ordered_json line;
    line["type"] = "turn";
    line["turn"] = i;
    line["feedback"] = feedback_to_json(rec.feedback);
    line["raw_agent_text"] = rec.raw_agent_text;
    line["parse_result"] = rec.parse ? parse_result_to_json(*rec.parse) : ordered_json(nullptr);
    out += line.dump() + "\n";
  }

  ordered_json footer;
  footer["type"] = "final";
  footer["status"] = status_name(transcript.status);
  footer["final_action"] = transcript.final_action
                               ? action_to_wire(*transcript.final_action)
                               : ordered_json(nullptr);
  footer["turns"] = transcript.turn_count;
  footer["wall_ms"] = transcript.meta.wall_ms;
  out += footer.dump() + "\n";
  return out;
}

Transcript transcript_from_jsonl(const std::string& text) {
  Transcript t;
  bool saw_header = false, saw_final = false;
  for (const std::string& line : split_lines(text)) {
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Syntax, std::string("bad transcript line: ") + e.what());
    }
    const std::string type = j.at("type").get<std::string>();
    if (type == "header") {
      saw_header = true;
      t.task_id = j.at("task_id").get<std::string>();
      t.meta.seed = j.at("seed").get<std::uint64_t>();
      t.engine_version = j.at("engine_version").get<std::string>();
      const json& cfg = j.at("config");
      t.config.budget = cfg.at("budget").get<int>();
      t.config.image_policy = image_policy_from_string(cfg.at("image_policy").get<std::string>());
      t.config.parse_retry_limit = cfg.at("parse_retry_limit").get<int>();
    } else if (type == "turn") {
      TurnRecord rec;
      rec.feedback = feedback_from_json(j.at("feedback"));
      rec.raw_agent_text = j.at("raw_agent_text").get<std::string>();
      if (!j.at("parse_result").is_null())
        rec.parse = parse_result_from_json(j.at("parse_result"));
      t.history.push_back(std::move(rec));
    } else if (type == "final") {
      saw_final = true;
      t.status = status_from_string(j.at("status").get<std::string>());
      if (!j.at("final_action").is_null()) {
        ParseResult r = parse_action(j.at("final_action").dump());
        t.final_action = std::get<Action>(r);
      }
      t.turn_count = j.at("turns").get<int>();
      t.meta.wall_ms = j.at("wall_ms").get<std::int64_t>();
    }
  }
  if (!saw_header || !saw_final || t.history.empty())
    throw Error(ErrorKind::Schema, "transcript is missing header, turns, or final record");
  return t;
}

}  // namespace affbench::env
