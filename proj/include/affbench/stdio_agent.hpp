#pragma once

#include <string>

#include "affbench/chat.hpp"

namespace affbench::remote {

/// Lets any external program act as the agent: the child receives one JSON
/// line holding the message sequence on stdin and must reply with one raw
/// text line on stdout. The child runs for the lifetime of this object.
class StdioBackend : public chat::TextBackend {
 public:
  explicit StdioBackend(std::string command);
  ~StdioBackend() override;
  StdioBackend(const StdioBackend&) = delete;
  StdioBackend& operator=(const StdioBackend&) = delete;

  std::string complete(const chat::MessageSequence& messages) override;

 private:
  void spawn();
  std::string command_;
  int child_pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
};

}  // namespace affbench::remote
