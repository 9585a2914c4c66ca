#include "affbench/chat.hpp"

#include "affbench/error.hpp"

namespace affbench::chat {

const char* role_name(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

Role role_from_string(const std::string& name) {
  if (name == "system") return Role::System;
  if (name == "user") return Role::User;
  if (name == "assistant") return Role::Assistant;
  throw Error(ErrorKind::Schema, "unknown message role: " + name);
}

void validate_messages(const MessageSequence& messages) {
  if (messages.empty() || messages.front().role != Role::System)
    throw Error(ErrorKind::Invariant, "message sequence must start with a system message");
  for (const auto& m : messages)
    if (!m.image_refs.empty() && m.role != Role::User)
      throw Error(ErrorKind::Invariant, "image refs are only allowed on user messages");
}

nlohmann::ordered_json messages_to_json(const MessageSequence& messages) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& m : messages) {
    nlohmann::ordered_json jm;
    jm["role"] = role_name(m.role);
    jm["text"] = m.text;
    jm["image_refs"] = m.image_refs;
    arr.push_back(std::move(jm));
  }
  return arr;
}

MessageSequence messages_from_json(const nlohmann::json& j) {
  MessageSequence out;
  for (const auto& jm : j) {
    Message m;
    m.role = role_from_string(jm.at("role").get<std::string>());
    m.text = jm.at("text").get<std::string>();
    if (jm.contains("image_refs"))
      m.image_refs = jm.at("image_refs").get<std::vector<std::string>>();
    out.push_back(std::move(m));
  }
  return out;
}

std::size_t count_image_refs(const MessageSequence& messages) {
  std::size_t n = 0;
  for (const auto& m : messages) n += m.image_refs.size();
  return n;
}

std::string SequenceBackend::complete(const MessageSequence&) {
  if (next_ >= replies_.size())
    throw Error(ErrorKind::Backend, "scripted backend exhausted after " +
                                        std::to_string(replies_.size()) + " replies");
  return replies_[next_++];
}

}  // namespace affbench::chat
