#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace affbench::kb {

enum class AttrCategory {
  Material,
  Geometry,
  Rigidity,
  Sharpness,
  Hollowness,
  Flexibility,
  Surface,
  Size,
  Weight,
  Thermal,
  Other,
};

const char* attr_category_name(AttrCategory c);
AttrCategory attr_category_from_string(const std::string& s);

struct AttributeClaim {
  std::string label;
  AttrCategory category = AttrCategory::Other;
  std::string text;
};

/// One functional use a part can support. Condition fields use the literal
/// string "NA" when not applicable.
struct AffordanceRecord {
  std::string function_label;
  std::string use_condition = "NA";
  std::string environment_condition = "NA";
  std::string recipient_condition = "NA";
  std::string apply_how;
  int suitability_level = 3;  // 1..5
};

struct Part {
  std::string name;
  std::vector<AttributeClaim> physical;
  std::vector<AttributeClaim> state;
  std::string physical_summary;
  std::string state_summary;
  std::vector<AffordanceRecord> affordances;
  std::vector<std::string> text_needed;  // attribute labels needing textual clarification

  const AttributeClaim* find_attribute(std::string_view label) const;
  bool has_affordance(std::string_view function_label) const;
};

struct Entity {
  std::string name;
  std::string summary;
  std::vector<Part> parts;  // declaration order is significant

  const Part* find_part(std::string_view name) const;
};

/// Immutable after load; safe for concurrent reads. Entity iteration order
/// is the file order.
struct KnowledgeBase {
  std::string schema_version = "1";
  std::vector<Entity> entities;

  const Entity* find_entity(std::string_view name) const;
  std::size_t total_parts() const;
};

struct Violation {
  std::string code;
  std::string path;
  std::string message;
};

KnowledgeBase load_kb(const std::string& text);
KnowledgeBase load_kb_file(const std::string& path);
std::string serialize_kb(const KnowledgeBase& kb);

/// Empty result iff every invariant holds. Violations carry machine codes:
/// DUPLICATE_ENTITY, DUPLICATE_PART, EMPTY_PARTS, EMPTY_NAME, EMPTY_SUMMARY,
/// EMPTY_LABEL, EMPTY_TEXT, EMPTY_FUNCTION_LABEL, SUITABILITY_RANGE,
/// DANGLING_DISAMBIGUATION.
std::vector<Violation> validate_kb(const KnowledgeBase& kb);

/// Throws Error(UnknownEntity) or Error(UnknownPart); the two are
/// distinguished so interaction feedback can differ.
const Part& lookup_part(const KnowledgeBase& kb, std::string_view entity_name,
                        std::string_view part_name);

}  // namespace affbench::kb
