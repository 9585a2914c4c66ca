#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace affbench {

/// SplitMix64. std::mt19937 plus the standard distributions would be
/// implementation-defined across platforms; the sampling invariants require
/// identical streams everywhere, so the generator is pinned here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, n). Rejection sampling, unbiased.
  std::uint64_t bounded(std::uint64_t n);

  /// Uniform in [0, 1).
  double next_unit() { return double(next_u64() >> 11) * (1.0 / 9007199254740992.0); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = std::size_t(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[std::size_t(bounded(v.size()))];
  }

 private:
  std::uint64_t state_;
};

std::uint64_t fnv1a64(std::string_view data);

std::string to_lower_ascii(std::string_view s);
std::string replace_all(std::string text, std::string_view from, std::string_view to);
bool contains(std::string_view haystack, std::string_view needle);
std::vector<std::string> split_lines(std::string_view text);
std::string trim(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
bool file_exists(const std::string& path);

}  // namespace affbench
