#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

namespace affbench::chat {

enum class Role { System, User, Assistant };

const char* role_name(Role role);
Role role_from_string(const std::string& name);

struct Message {
  Role role = Role::User;
  std::string text;
  std::vector<std::string> image_refs;  // only meaningful on user messages
};

using MessageSequence = std::vector<Message>;

/// Checks the sequence invariants: first message is system, image refs only
/// on user messages. Throws Error(Invariant) on violation.
void validate_messages(const MessageSequence& messages);

nlohmann::ordered_json messages_to_json(const MessageSequence& messages);
MessageSequence messages_from_json(const nlohmann::json& j);

std::size_t count_image_refs(const MessageSequence& messages);

/// Contract every text-producing backend (teacher, judge, remote chat model)
/// satisfies. Implementations must not mutate shared state visible to
/// callers; concurrent complete() calls from different sessions are allowed.
class TextBackend {
 public:
  virtual ~TextBackend() = default;
  virtual std::string complete(const MessageSequence& messages) = 0;
};

/// Always returns the same canned string.
class FixedBackend : public TextBackend {
 public:
  explicit FixedBackend(std::string reply) : reply_(std::move(reply)) {}
  std::string complete(const MessageSequence&) override { return reply_; }

 private:
  std::string reply_;
};

/// Returns scripted replies in order; throws Backend error when exhausted.
class SequenceBackend : public TextBackend {
 public:
  explicit SequenceBackend(std::vector<std::string> replies)
      : replies_(std::move(replies)) {}
  std::string complete(const MessageSequence&) override;

 private:
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
};

/// Adapts an arbitrary callable; handy in tests.
class CallbackBackend : public TextBackend {
 public:
  using Fn = std::function<std::string(const MessageSequence&)>;
  explicit CallbackBackend(Fn fn) : fn_(std::move(fn)) {}
  std::string complete(const MessageSequence& messages) override { return fn_(messages); }

 private:
  Fn fn_;
};

}  // namespace affbench::chat
