#pragma once

#include <cstdint>

#include "affbench/kb.hpp"
#include "affbench/taskset.hpp"

namespace affbench::synth {

struct KbSpec {
  std::size_t entities = 8;
  std::size_t min_parts = 2;
  std::size_t max_parts = 4;
  double extra_affordance_probability = 0.35;  // chance of a second function per part
  bool with_assets = false;                    // synthesize (non-existent) image paths
};

/// Deterministic synthetic knowledge base; same (seed, spec) gives the same
/// bytes everywhere. Entity and part names are drawn from fixed word lists
/// that never overlap the affordance vocabulary, so generated goal texts
/// cannot leak names.
kb::KnowledgeBase generate_kb(std::uint64_t seed, const KbSpec& spec = {});

struct TaskSpec {
  std::size_t count = 20;
  std::size_t distractors = 3;
  bool with_assets = false;
};

std::vector<taskset::Task> generate_tasks(const kb::KnowledgeBase& kb, std::uint64_t seed,
                                          const TaskSpec& spec = {});

}  // namespace affbench::synth
