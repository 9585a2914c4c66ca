#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "affbench/chat.hpp"
#include "affbench/env.hpp"
#include "affbench/kb.hpp"
#include "affbench/taskset.hpp"

namespace affbench::agents {

struct AgentVerdict {
  std::string raw_text;  // full reply, reasoning plus trailing JSON
};

/// An agent sees only the rendered message view and replies with text; the
/// environment does all parsing. Deterministic agents must be pure functions
/// of (task, view).
class Agent {
 public:
  virtual ~Agent() = default;
  virtual AgentVerdict next(const taskset::Task& task, const chat::MessageSequence& view) = 0;
  virtual std::string name() const = 0;
};

/// Reference agent that follows the exploration stack: every task entity in
/// listed order, each entity's relevant parts in knowledge-base order, then
/// the gold answer. Privileged by design (reads gold and similar_map); a
/// dataset-sanity tool, never a reportable baseline without disclosure.
class OracleAgent : public Agent {
 public:
  explicit OracleAgent(const kb::KnowledgeBase& kb) : kb_(&kb) {}
  AgentVerdict next(const taskset::Task& task, const chat::MessageSequence& view) override;
  std::string name() const override { return "oracle"; }

 private:
  const kb::KnowledgeBase* kb_;
};

/// Emits well-formed actions chosen pseudo-randomly from what the view has
/// revealed. Pure function of (seed, task, view).
class RandomAgent : public Agent {
 public:
  explicit RandomAgent(std::uint64_t seed, double answer_probability = 0.15)
      : seed_(seed), answer_probability_(answer_probability) {}
  AgentVerdict next(const taskset::Task& task, const chat::MessageSequence& view) override;
  std::string name() const override { return "random"; }

 private:
  std::uint64_t seed_;
  double answer_probability_;
};

/// Answers immediately with the first entity and a placeholder part.
class FirstAnswerAgent : public Agent {
 public:
  AgentVerdict next(const taskset::Task& task, const chat::MessageSequence& view) override;
  std::string name() const override { return "first-answer"; }
};

/// Routes the rendered view through any TextBackend (remote model, stdio
/// child process, scripted stub).
class BackendAgent : public Agent {
 public:
  BackendAgent(std::shared_ptr<chat::TextBackend> backend, std::string name)
      : backend_(std::move(backend)), name_(std::move(name)) {}
  AgentVerdict next(const taskset::Task& task, const chat::MessageSequence& view) override;
  std::string name() const override { return name_; }

 private:
  std::shared_ptr<chat::TextBackend> backend_;
  std::string name_;
};

/// System prompt plus the evaluation-template view of the session history.
chat::MessageSequence build_eval_prompt(const taskset::Task& task, const env::Session& session);

/// Agent factory from a spec string: "oracle", "random[:seed]",
/// "first-answer", "remote:<config.json>", "stdio:<command>".
std::unique_ptr<Agent> make_agent(const std::string& spec, const kb::KnowledgeBase& kb,
                                  std::uint64_t seed);

}  // namespace affbench::agents
