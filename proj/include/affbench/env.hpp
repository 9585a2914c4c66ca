#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "affbench/chat.hpp"
#include "affbench/kb.hpp"
#include "affbench/taskset.hpp"

namespace affbench::env {

// ---------------------------------------------------------------------------
// Actions (the agent-side wire protocol)
// ---------------------------------------------------------------------------

struct InspectEntity {
  std::string entity;
  std::vector<std::string> top_candidates;
  bool has_top_candidates = false;
};

struct InspectPart {
  std::string part;
};

struct AnswerAction {
  std::string answer_entity;
  std::string answer_part;
  std::string answer_how_to_use;
};

struct Action {
  std::string reasoning;  // may be empty
  std::variant<InspectEntity, InspectPart, AnswerAction> op;

  bool is_answer() const { return std::holds_alternative<AnswerAction>(op); }
};

enum class ParseErrorKind { NoJsonFound, MalformedJson, UnknownAction, MissingField };
const char* parse_error_kind_name(ParseErrorKind k);

struct ParseError {
  ParseErrorKind kind;
  std::string message;
};

using ParseResult = std::variant<Action, ParseError>;

/// Scans the reply from the end for the last brace-balanced span that parses
/// as a JSON object, then maps its "action" field onto the wire variants.
/// Unknown keys are ignored; "reasoning" defaults to empty.
ParseResult parse_action(std::string_view raw);

/// Canonical wire form, reparseable by parse_action.
nlohmann::ordered_json action_to_wire(const Action& action);
std::string action_to_wire_text(const Action& action);

/// Extracts the last balanced JSON object from free text, or nullopt.
/// Shared by the action parser and the judge/teacher reply parsers.
std::optional<nlohmann::json> extract_last_json_object(std::string_view raw);

// ---------------------------------------------------------------------------
// Feedback (the environment-side wire protocol)
// ---------------------------------------------------------------------------

struct InitialFeedback {
  std::string goal_text;
  std::string scenario;
  std::vector<std::string> entity_names;
  std::string env_image;  // empty = absent
};

struct EntityFeedback {
  std::string entity;
  std::vector<std::string> part_names;  // knowledge-base order, unfiltered
  std::string image;
};

struct PartFeedback {
  std::string part;
  std::string owner_entity;
  std::string physical_summary;
  std::string state_summary;
  std::vector<std::pair<std::string, std::string>> disambiguation;  // (label, text)
  std::string image;
};

struct ProtocolErrorFeedback {
  std::string code;
  std::string message;
};

enum class Verdict { Answered, NoAnswer, Aborted };
const char* verdict_name(Verdict v);

struct TerminalFeedback {
  Verdict verdict;
};

using Feedback =
    std::variant<InitialFeedback, EntityFeedback, PartFeedback, ProtocolErrorFeedback,
                 TerminalFeedback>;

/// Agent-visible text of a feedback, rendered from the fixed evaluation
/// templates.
std::string feedback_text(const Feedback& feedback);
std::string feedback_image(const Feedback& feedback);
bool feedback_is_successful_inspection(const Feedback& feedback);

nlohmann::ordered_json feedback_to_json(const Feedback& feedback);
Feedback feedback_from_json(const nlohmann::json& j);

/// The fixed evaluation system prompt.
const std::string& eval_system_prompt();

// ---------------------------------------------------------------------------
// Session
// ---------------------------------------------------------------------------

enum class ImagePolicy { NoImage, LastImage, AllImages };
const char* image_policy_name(ImagePolicy p);
ImagePolicy image_policy_from_string(const std::string& s);

enum class Status { Running, Answered, BudgetExhausted, Aborted };
const char* status_name(Status s);
Status status_from_string(const std::string& s);

struct SessionConfig {
  int budget = 50;
  ImagePolicy image_policy = ImagePolicy::LastImage;
  int parse_retry_limit = 3;  // consecutive parse failures before aborting; 0 disables
};

/// One history entry per turn: the feedback produced by that turn's agent
/// text. Entry 0 holds the initial feedback with empty agent text.
struct TurnRecord {
  Feedback feedback;
  std::string raw_agent_text;
  std::optional<ParseResult> parse;
};

class Session {
 public:
  Session(const taskset::Task& task, const kb::KnowledgeBase& kb, SessionConfig config);

  const taskset::Task& task() const { return *task_; }
  const kb::KnowledgeBase& kb() const { return *kb_; }
  const SessionConfig& config() const { return config_; }
  Status status() const { return status_; }
  int turn() const { return turn_; }
  const std::vector<TurnRecord>& history() const { return history_; }
  const std::vector<std::string>& explored_entities() const { return explored_entities_; }
  const std::vector<std::pair<std::string, std::string>>& explored_parts() const {
    return explored_parts_;
  }
  const std::optional<std::string>& last_inspected_entity() const {
    return last_inspected_entity_;
  }
  std::optional<Action> final_action() const;

  /// Applies one already-parsed action. Protocol problems come back as
  /// ProtocolError feedback, not exceptions. Terminal sessions are immutable:
  /// stepping one returns SESSION_CLOSED without consuming a turn.
  Feedback step(const Action& action, const std::string& raw_text);

  /// Parses, then steps. Parse errors consume a turn; parse_retry_limit
  /// consecutive failures abort the session.
  Feedback step_text(const std::string& raw_text);

  /// External abort (agent crashed, operator quit). Consumes no turn.
  void abort();

 private:
  Feedback apply(const Action& action);
  const kb::Part* resolve_part(const std::string& part_name, std::string& owner_out,
                               std::string& error_code, std::string& error_message) const;

  const taskset::Task* task_;
  const kb::KnowledgeBase* kb_;
  SessionConfig config_;
  Status status_ = Status::Running;
  int turn_ = 0;
  int consecutive_parse_errors_ = 0;
  std::vector<TurnRecord> history_;
  std::vector<std::string> explored_entities_;                      // inspection order
  std::vector<std::pair<std::string, std::string>> explored_parts_;  // inspection order
  std::optional<std::string> last_inspected_entity_;
};

Session new_session(const taskset::Task& task, const kb::KnowledgeBase& kb,
                    SessionConfig config = {});

/// Renders the multimodal message list for the next agent call: system
/// prompt, initial user message, then alternating assistant/user turns.
/// Image attachments follow the policy.
chat::MessageSequence render_messages(const Session& session, ImagePolicy policy);

/// Same rendering over an explicit history (used by dataset projection).
chat::MessageSequence render_from_history(const std::vector<TurnRecord>& history,
                                          ImagePolicy policy);

// ---------------------------------------------------------------------------
// Transcript
// ---------------------------------------------------------------------------

struct TranscriptMeta {
  std::uint64_t seed = 0;
  std::int64_t wall_ms = 0;  // stays 0 unless wall-clock recording is on
};

struct Transcript {
  std::string task_id;
  std::string engine_version;
  SessionConfig config;
  TranscriptMeta meta;
  std::vector<TurnRecord> history;
  Status status = Status::Running;
  std::optional<Action> final_action;
  int turn_count = 0;  // steps consumed; an external abort adds none

  int turns() const { return turn_count; }
};

/// Requires a terminal session.
Transcript finalize(const Session& session, TranscriptMeta meta = {});

std::string transcript_to_jsonl(const Transcript& transcript);
Transcript transcript_from_jsonl(const std::string& text);

}  // namespace affbench::env
