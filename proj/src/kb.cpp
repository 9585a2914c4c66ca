#include "affbench/kb.hpp"

#include <set>

#include <json.hpp>

#include "affbench/error.hpp"
#include "affbench/util.hpp"

namespace affbench::kb {

using nlohmann::json;
using nlohmann::ordered_json;

const char* attr_category_name(AttrCategory c) {
  switch (c) {
    case AttrCategory::Material: return "material";
    case AttrCategory::Geometry: return "geometry";
    case AttrCategory::Rigidity: return "rigidity";
    case AttrCategory::Sharpness: return "sharpness";
    case AttrCategory::Hollowness: return "hollowness";
    case AttrCategory::Flexibility: return "flexibility";
    case AttrCategory::Surface: return "surface";
    case AttrCategory::Size: return "size";
    case AttrCategory::Weight: return "weight";
    case AttrCategory::Thermal: return "thermal";
    case AttrCategory::Other: return "other";
  }
  return "other";
}

AttrCategory attr_category_from_string(const std::string& s) {
  static const std::pair<const char*, AttrCategory> table[] = {
      {"material", AttrCategory::Material},   {"geometry", AttrCategory::Geometry},
      {"rigidity", AttrCategory::Rigidity},   {"sharpness", AttrCategory::Sharpness},
      {"hollowness", AttrCategory::Hollowness}, {"flexibility", AttrCategory::Flexibility},
      {"surface", AttrCategory::Surface},     {"size", AttrCategory::Size},
      {"weight", AttrCategory::Weight},       {"thermal", AttrCategory::Thermal},
      {"other", AttrCategory::Other},
  };
  for (const auto& [name, cat] : table)
    if (s == name) return cat;
  throw Error(ErrorKind::Schema, "unknown attribute category: \"" + s + "\"");
}

const AttributeClaim* Part::find_attribute(std::string_view label) const {
  for (const auto& a : physical)
    if (a.label == label) return &a;
  for (const auto& a : state)
    if (a.label == label) return &a;
  return nullptr;
}

bool Part::has_affordance(std::string_view function_label) const {
  for (const auto& a : affordances)
    if (a.function_label == function_label) return true;
  return false;
}

const Part* Entity::find_part(std::string_view part_name) const {
  for (const auto& p : parts)
    if (p.name == part_name) return &p;
  return nullptr;
}

const Entity* KnowledgeBase::find_entity(std::string_view name) const {
  for (const auto& e : entities)
    if (e.name == name) return &e;
  return nullptr;
}

std::size_t KnowledgeBase::total_parts() const {
  std::size_t n = 0;
  for (const auto& e : entities) n += e.parts.size();
  return n;
}

namespace {

std::string field_at(const std::string& path, const std::string& field) {
  return path.empty() ? field : path + "." + field;
}

std::string index_at(const std::string& path, const std::string& field, std::size_t i) {
  return field_at(path, field) + "[" + std::to_string(i) + "]";
}

const json& require(const json& node, const std::string& field, const std::string& path) {
  auto it = node.find(field);
  if (it == node.end())
    throw Error(ErrorKind::Schema, "missing field \"" + field + "\"", path);
  return *it;
}

std::string require_string(const json& node, const std::string& field, const std::string& path) {
  const json& v = require(node, field, path);
  if (!v.is_string())
    throw Error(ErrorKind::Schema, "field \"" + field + "\" must be a string",
                field_at(path, field));
  return v.get<std::string>();
}

int require_int(const json& node, const std::string& field, const std::string& path) {
  const json& v = require(node, field, path);
  if (!v.is_number_integer())
    throw Error(ErrorKind::Schema, "field \"" + field + "\" must be an integer",
                field_at(path, field));
  return v.get<int>();
}

const json& require_array(const json& node, const std::string& field, const std::string& path) {
  const json& v = require(node, field, path);
  if (!v.is_array())
    throw Error(ErrorKind::Schema, "field \"" + field + "\" must be an array",
                field_at(path, field));
  return v;
}

AttributeClaim parse_claim(const json& node, const std::string& path) {
  if (!node.is_object()) throw Error(ErrorKind::Schema, "attribute must be an object", path);
  AttributeClaim c;
  c.label = require_string(node, "label", path);
  c.category = attr_category_from_string(require_string(node, "category", path));
  c.text = require_string(node, "text", path);
  return c;
}

AffordanceRecord parse_affordance(const json& node, const std::string& path) {
  if (!node.is_object()) throw Error(ErrorKind::Schema, "affordance must be an object", path);
  AffordanceRecord r;
  r.function_label = require_string(node, "function_label", path);
  r.use_condition = require_string(node, "use_condition", path);
  r.environment_condition = require_string(node, "environment_condition", path);
  r.recipient_condition = require_string(node, "recipient_condition", path);
  r.apply_how = require_string(node, "apply_how", path);
  r.suitability_level = require_int(node, "suitability_level", path);
  return r;
}

Part parse_part(const json& node, const std::string& path) {
  if (!node.is_object()) throw Error(ErrorKind::Schema, "part must be an object", path);
  Part p;
  p.name = require_string(node, "name", path);
  const json& phys = require_array(node, "physical", path);
  for (std::size_t i = 0; i < phys.size(); ++i)
    p.physical.push_back(parse_claim(phys[i], index_at(path, "physical", i)));
  const json& state = require_array(node, "state", path);
  for (std::size_t i = 0; i < state.size(); ++i)
    p.state.push_back(parse_claim(state[i], index_at(path, "state", i)));
  p.physical_summary = require_string(node, "physical_summary", path);
  p.state_summary = require_string(node, "state_summary", path);
  const json& aff = require_array(node, "affordances", path);
  for (std::size_t i = 0; i < aff.size(); ++i)
    p.affordances.push_back(parse_affordance(aff[i], index_at(path, "affordances", i)));
  const json& needed = require_array(node, "text_needed", path);
  for (std::size_t i = 0; i < needed.size(); ++i) {
    if (!needed[i].is_string())
      throw Error(ErrorKind::Schema, "text_needed entries must be strings",
                  index_at(path, "text_needed", i));
    p.text_needed.push_back(needed[i].get<std::string>());
  }
  return p;
}

void append_claim_violations(const std::vector<AttributeClaim>& claims, const std::string& path,
                             std::vector<Violation>& out) {
  for (std::size_t i = 0; i < claims.size(); ++i) {
    const std::string cp = path + "[" + std::to_string(i) + "]";
    if (claims[i].label.empty())
      out.push_back({"EMPTY_LABEL", cp + ".label", "attribute label is empty"});
    if (claims[i].text.empty())
      out.push_back({"EMPTY_TEXT", cp + ".text", "attribute text is empty"});
  }
}

}  // namespace

KnowledgeBase load_kb(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Syntax, std::string("malformed document: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::Schema, "top level must be an object");

  KnowledgeBase out;
  out.schema_version = require_string(doc, "schema_version", "");
  const json& ents = require_array(doc, "entities", "");
  for (std::size_t i = 0; i < ents.size(); ++i) {
    const std::string epath = "entities[" + std::to_string(i) + "]";
    const json& en = ents[i];
    if (!en.is_object()) throw Error(ErrorKind::Schema, "entity must be an object", epath);
    Entity e;
    e.name = require_string(en, "name", epath);
    e.summary = require_string(en, "summary", epath);
    const json& parts = require_array(en, "parts", epath);
    for (std::size_t k = 0; k < parts.size(); ++k)
      e.parts.push_back(parse_part(parts[k], epath + ".parts[" + std::to_string(k) + "]"));
    out.entities.push_back(std::move(e));
  }

  auto violations = validate_kb(out);
  if (!violations.empty()) {
    const Violation& v = violations.front();
    throw Error(ErrorKind::Invariant, v.code + ": " + v.message, v.path);
  }
  return out;
}

KnowledgeBase load_kb_file(const std::string& path) { return load_kb(read_file(path)); }

std::string serialize_kb(const KnowledgeBase& kb) {
  ordered_json doc;
  doc["schema_version"] = kb.schema_version;
  ordered_json ents = ordered_json::array();
  for (const auto& e : kb.entities) {
    ordered_json je;
    je["name"] = e.name;
    je["summary"] = e.summary;
    ordered_json parts = ordered_json::array();
    for (const auto& p : e.parts) {
      ordered_json jp;
      jp["name"] = p.name;
      auto claims = [](const std::vector<AttributeClaim>& cs) {
        ordered_json arr = ordered_json::array();
        for (const auto& c : cs) {
          ordered_json jc;
          jc["label"] = c.label;
          jc["category"] = attr_category_name(c.category);
          jc["text"] = c.text;
          arr.push_back(std::move(jc));
        }
        return arr;
      };
      jp["physical"] = claims(p.physical);
      jp["state"] = claims(p.state);
      jp["physical_summary"] = p.physical_summary;
      jp["state_summary"] = p.state_summary;
      ordered_json affs = ordered_json::array();
      for (const auto& a : p.affordances) {
        ordered_json ja;
        ja["function_label"] = a.function_label;
        ja["use_condition"] = a.use_condition;
        ja["environment_condition"] = a.environment_condition;
        ja["recipient_condition"] = a.recipient_condition;
        ja["apply_how"] = a.apply_how;
        ja["suitability_level"] = a.suitability_level;
        affs.push_back(std::move(ja));
      }
      jp["affordances"] = std::move(affs);
      jp["text_needed"] = p.text_needed;
      parts.push_back(std::move(jp));
    }
    je["parts"] = std::move(parts);
    ents.push_back(std::move(je));
  }
  doc["entities"] = std::move(ents);
  return doc.dump(2) + "\n";
}

std::vector<Violation> validate_kb(const KnowledgeBase& kb) {
  std::vector<Violation> out;
  std::set<std::string> entity_names;
  for (std::size_t i = 0; i < kb.entities.size(); ++i) {
    const Entity& e = kb.entities[i];
    const std::string epath = "entities[" + std::to_string(i) + "]";
    if (e.name.empty()) out.push_back({"EMPTY_NAME", epath + ".name", "entity name is empty"});
    if (!entity_names.insert(e.name).second)
      out.push_back({"DUPLICATE_ENTITY", epath + ".name",
                     "duplicate entity name \"" + e.name + "\""});
    if (e.summary.empty())
      out.push_back({"EMPTY_SUMMARY", epath + ".summary", "entity summary is empty"});
    if (e.parts.empty())
      out.push_back({"EMPTY_PARTS", epath + ".parts", "entity has no parts"});

    std::set<std::string> part_names;
    for (std::size_t k = 0; k < e.parts.size(); ++k) {
      const Part& p = e.parts[k];
      const std::string ppath = epath + ".parts[" + std::to_string(k) + "]";
      if (p.name.empty()) out.push_back({"EMPTY_NAME", ppath + ".name", "part name is empty"});
      if (!part_names.insert(p.name).second)
        out.push_back({"DUPLICATE_PART", ppath + ".name",
                       "duplicate part name \"" + p.name + "\" within entity \"" + e.name + "\""});
      if (p.physical_summary.empty())
        out.push_back({"EMPTY_SUMMARY", ppath + ".physical_summary", "physical summary is empty"});
      if (p.state_summary.empty())
        out.push_back({"EMPTY_SUMMARY", ppath + ".state_summary", "state summary is empty"});
      append_claim_violations(p.physical, ppath + ".physical", out);
      append_claim_violations(p.state, ppath + ".state", out);
      for (std::size_t a = 0; a < p.affordances.size(); ++a) {
        const auto& rec = p.affordances[a];
        const std::string apath = ppath + ".affordances[" + std::to_string(a) + "]";
        if (rec.function_label.empty())
          out.push_back({"EMPTY_FUNCTION_LABEL", apath + ".function_label",
                         "affordance function label is empty"});
        if (rec.suitability_level < 1 || rec.suitability_level > 5)
          out.push_back({"SUITABILITY_RANGE", apath + ".suitability_level",
                         "suitability_level " + std::to_string(rec.suitability_level) +
                             " outside [1,5]"});
      }
      for (std::size_t t = 0; t < p.text_needed.size(); ++t) {
        if (!p.find_attribute(p.text_needed[t]))
          out.push_back({"DANGLING_DISAMBIGUATION",
                         ppath + ".text_needed[" + std::to_string(t) + "]",
                         "label \"" + p.text_needed[t] +
                             "\" not present among the part's attributes"});
      }
    }
  }
  return out;
}

const Part& lookup_part(const KnowledgeBase& kb, std::string_view entity_name,
                        std::string_view part_name) {
  const Entity* e = kb.find_entity(entity_name);
  if (!e)
    throw Error(ErrorKind::UnknownEntity,
                "unknown entity \"" + std::string(entity_name) + "\"");
  const Part* p = e->find_part(part_name);
  if (!p)
    throw Error(ErrorKind::UnknownPart, "entity \"" + std::string(entity_name) +
                                            "\" has no part \"" + std::string(part_name) + "\"");
  return *p;
}

}  // namespace affbench::kb
