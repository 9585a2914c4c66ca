#include "affbench/util.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "affbench/error.hpp"

namespace affbench {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Syntax: return "Syntax";
    case ErrorKind::Schema: return "Schema";
    case ErrorKind::Invariant: return "Invariant";
    case ErrorKind::UnknownEntity: return "UnknownEntity";
    case ErrorKind::UnknownPart: return "UnknownPart";
    case ErrorKind::CrossRef: return "CrossRef";
    case ErrorKind::Asset: return "Asset";
    case ErrorKind::Config: return "Config";
    case ErrorKind::Backend: return "Backend";
    case ErrorKind::Auth: return "Auth";
    case ErrorKind::OverLimit: return "OverLimit";
    case ErrorKind::EmptyResponse: return "EmptyResponse";
    case ErrorKind::UnparseableVerdict: return "UnparseableVerdict";
    case ErrorKind::Domain: return "Domain";
    case ErrorKind::Io: return "Io";
    case ErrorKind::StillRunning: return "StillRunning";
    case ErrorKind::EventMismatch: return "EventMismatch";
    case ErrorKind::BadPermutation: return "BadPermutation";
    case ErrorKind::TemplateSlot: return "TemplateSlot";
    case ErrorKind::Leakage: return "Leakage";
    case ErrorKind::Alignment: return "Alignment";
    case ErrorKind::TaskMismatch: return "TaskMismatch";
    case ErrorKind::NotEnoughEntities: return "NotEnoughEntities";
    case ErrorKind::EmptyKb: return "EmptyKb";
    case ErrorKind::Precondition: return "Precondition";
    case ErrorKind::AgentError: return "AgentError";
    case ErrorKind::TripleDropped: return "TripleDropped";
  }
  return "Unknown";
}

std::uint64_t Rng::bounded(std::uint64_t n) {
  if (n == 0) throw Error(ErrorKind::Domain, "Rng::bounded(0)");
  std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string to_lower_ascii(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) out.push_back(char(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

std::string replace_all(std::string text, std::string_view from, std::string_view to) {
  if (from.empty()) return text;
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

bool contains(std::string_view haystack, std::string_view needle) {
  return haystack.find(needle) != std::string_view::npos;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      break;
    }
    out.emplace_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write file: " + path);
  out.write(content.data(), std::streamsize(content.size()));
}

bool file_exists(const std::string& path) {
  std::error_code ec;
  return std::filesystem::exists(path, ec);
}

}  // namespace affbench
