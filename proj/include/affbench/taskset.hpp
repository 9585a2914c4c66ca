#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "affbench/chat.hpp"
#include "affbench/kb.hpp"

namespace affbench::taskset {

/// Condition fields use the literal "NA" when not applicable, mirroring the
/// knowledge-base affordance records.
struct SolutionReference {
  std::string prepare_use_condition = "NA";
  std::string prepare_environment_condition = "NA";
  std::string prepare_recipient = "NA";
  std::string apply_affordance;
};

struct GoldSolution {
  std::string entity;
  std::string part;
  std::string affordance_label;
  SolutionReference solution_reference;
  int typicality_level = 3;  // 1..5
};

enum class DistractorKind { AffordanceSimilar, ScenePlausible };
const char* distractor_kind_name(DistractorKind k);
DistractorKind distractor_kind_from_string(const std::string& s);

struct DistractorAnnotation {
  std::string entity;
  DistractorKind kind = DistractorKind::ScenePlausible;
  std::string not_gold_reason;
};

enum class SimilarityLevel { Dissimilar, Mixed, Similar };
const char* similarity_level_name(SimilarityLevel s);
SimilarityLevel similarity_level_from_string(const std::string& s);

struct AssetManifest {
  std::string env_image;  // empty = absent
  std::map<std::string, std::string> entity_images;
  std::map<std::string, std::map<std::string, std::string>> part_images;  // entity -> part -> path

  std::string entity_image(const std::string& entity) const;
  std::string part_image(const std::string& entity, const std::string& part) const;
};

struct Task {
  std::string id;
  std::string scenario;
  std::string goal_text;
  std::vector<std::string> entity_names;  // presented order
  GoldSolution gold;
  std::vector<DistractorAnnotation> distractors;
  std::map<std::string, std::vector<std::string>> similar_map;  // entity -> relevant part names
  SimilarityLevel similarity_level = SimilarityLevel::Mixed;
  AssetManifest assets;

  bool is_similar(const std::string& entity, const std::string& part) const;
  /// The entity's relevant parts in knowledge-base declaration order.
  std::vector<std::string> similar_parts_in_kb_order(const kb::KnowledgeBase& kb,
                                                     const std::string& entity) const;
  std::size_t total_similar_parts() const;
  const DistractorAnnotation* find_distractor(const std::string& entity) const;
};

struct LoadOptions {
  bool strict_assets = false;
  std::string asset_root;  // prefix for relative asset paths in strict mode
};

std::vector<Task> load_tasks(const std::string& text, const kb::KnowledgeBase& kb,
                             const LoadOptions& options = {});
std::vector<Task> load_tasks_file(const std::string& path, const kb::KnowledgeBase& kb,
                                  const LoadOptions& options = {});
std::string serialize_tasks(const std::vector<Task>& tasks);

/// Uniform over all (entity, part, affordance) triples; identical output for
/// identical (kb, seed) on every platform.
GoldSolution sample_gold_triple(const kb::KnowledgeBase& kb, std::uint64_t seed);

std::vector<DistractorAnnotation> sample_distractors(const kb::KnowledgeBase& kb,
                                                     const GoldSolution& gold, std::size_t k,
                                                     std::uint64_t seed);

/// Returns the teacher text verbatim; no local editing.
std::string draft_task_description(const GoldSolution& gold,
                                   const std::vector<kb::AttributeClaim>& supporting_attrs,
                                   chat::TextBackend& teacher);

struct QcReport {
  bool passed = false;
  std::vector<std::string> failures;     // GOLD_VALIDITY, SEPARABILITY, LEAKAGE, REF_INTEGRITY
  std::vector<std::string> needs_human;  // SCENE_COHERENCE, VISUAL_OBSERVABILITY
};

QcReport qc_check(const Task& draft, const kb::KnowledgeBase& kb);
nlohmann::ordered_json qc_report_to_json(const std::string& task_id, const QcReport& report);

enum class Visibility { VisualEnough, TextNeeded };

/// Asks the judge whether the attribute is decisively visible; parses its
/// reply into the enum. Throws UnparseableVerdict when the reply names
/// neither or both verdicts.
Visibility classify_attribute_visibility(const kb::Part& part, const std::string& attr_label,
                                         chat::TextBackend& judge);

}  // namespace affbench::taskset
