#include "affbench/stdio_agent.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <csignal>

#include "affbench/error.hpp"

namespace affbench::remote {

StdioBackend::StdioBackend(std::string command) : command_(std::move(command)) { spawn(); }

void StdioBackend::spawn() {
  // A child may exit between turns; the write must see EPIPE, not SIGPIPE.
  signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];   // parent -> child
  int out_pipe[2];  // child -> parent
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
    throw Error(ErrorKind::Io, "pipe() failed for stdio agent");

  pid_t pid = fork();
  if (pid < 0) throw Error(ErrorKind::Io, "fork() failed for stdio agent");
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command_.c_str(), (char*)nullptr);
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  child_pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

StdioBackend::~StdioBackend() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (child_pid_ > 0) {
    int status = 0;
    if (waitpid(child_pid_, &status, WNOHANG) == 0) {
      kill(child_pid_, SIGTERM);
      waitpid(child_pid_, &status, 0);
    }
  }
}

std::string StdioBackend::complete(const chat::MessageSequence& messages) {
  std::string line = chat::messages_to_json(messages).dump() + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    ssize_t n = write(to_child_, line.data() + written, line.size() - written);
    if (n <= 0) throw Error(ErrorKind::AgentError, "stdio agent closed its input");
    written += std::size_t(n);
  }
  std::string reply;
  char c;
  for (;;) {
    ssize_t n = read(from_child_, &c, 1);
    if (n <= 0) throw Error(ErrorKind::AgentError, "stdio agent closed its output");
    if (c == '\n') break;
    reply.push_back(c);
  }
  return reply;
}

}  // namespace affbench::remote
