#include "affbench/taskset.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

#include "affbench/error.hpp"
#include "affbench/util.hpp"

namespace affbench::taskset {

using nlohmann::json;
using nlohmann::ordered_json;

const char* distractor_kind_name(DistractorKind k) {
  return k == DistractorKind::AffordanceSimilar ? "affordance_similar" : "scene_plausible";
}

DistractorKind distractor_kind_from_string(const std::string& s) {
  if (s == "affordance_similar") return DistractorKind::AffordanceSimilar;
  if (s == "scene_plausible") return DistractorKind::ScenePlausible;
  throw Error(ErrorKind::Schema, "unknown distractor kind: \"" + s + "\"");
}

const char* similarity_level_name(SimilarityLevel s) {
  switch (s) {
    case SimilarityLevel::Dissimilar: return "dissimilar";
    case SimilarityLevel::Mixed: return "mixed";
    case SimilarityLevel::Similar: return "similar";
  }
  return "mixed";
}

SimilarityLevel similarity_level_from_string(const std::string& s) {
  if (s == "dissimilar") return SimilarityLevel::Dissimilar;
  if (s == "mixed") return SimilarityLevel::Mixed;
  if (s == "similar") return SimilarityLevel::Similar;
  throw Error(ErrorKind::Schema, "unknown similarity level: \"" + s + "\"");
}

std::string AssetManifest::entity_image(const std::string& entity) const {
  auto it = entity_images.find(entity);
  return it == entity_images.end() ? std::string() : it->second;
}

std::string AssetManifest::part_image(const std::string& entity, const std::string& part) const {
  auto it = part_images.find(entity);
  if (it == part_images.end()) return {};
  auto pit = it->second.find(part);
  return pit == it->second.end() ? std::string() : pit->second;
}

bool Task::is_similar(const std::string& entity, const std::string& part) const {
  auto it = similar_map.find(entity);
  if (it == similar_map.end()) return false;
  return std::find(it->second.begin(), it->second.end(), part) != it->second.end();
}

std::vector<std::string> Task::similar_parts_in_kb_order(const kb::KnowledgeBase& kb,
                                                         const std::string& entity) const {
  std::vector<std::string> out;
  const kb::Entity* e = kb.find_entity(entity);
  if (!e) return out;
  for (const auto& p : e->parts)
    if (is_similar(entity, p.name)) out.push_back(p.name);
  return out;
}

std::size_t Task::total_similar_parts() const {
  std::size_t n = 0;
  for (const auto& name : entity_names) {
    auto it = similar_map.find(name);
    if (it != similar_map.end()) n += it->second.size();
  }
  return n;
}

const DistractorAnnotation* Task::find_distractor(const std::string& entity) const {
  for (const auto& d : distractors)
    if (d.entity == entity) return &d;
  return nullptr;
}

namespace {

std::string req_str(const json& node, const char* field, const std::string& path) {
  auto it = node.find(field);
  if (it == node.end() || !it->is_string())
    throw Error(ErrorKind::Schema, std::string("missing or non-string field \"") + field + "\"",
                path);
  return it->get<std::string>();
}

int req_int(const json& node, const char* field, const std::string& path) {
  auto it = node.find(field);
  if (it == node.end() || !it->is_number_integer())
    throw Error(ErrorKind::Schema, std::string("missing or non-integer field \"") + field + "\"",
                path);
  return it->get<int>();
}

void check_asset(const std::string& rel, const LoadOptions& opt, const std::string& what) {
  if (rel.empty() || !opt.strict_assets) return;
  std::filesystem::path p(rel);
  if (p.is_relative() && !opt.asset_root.empty()) p = std::filesystem::path(opt.asset_root) / p;
  if (!file_exists(p.string()))
    throw Error(ErrorKind::Asset, "missing asset file for " + what + ": " + p.string());
}

Task parse_task(const json& node, const kb::KnowledgeBase& kb, const LoadOptions& options,
                const std::string& path) {
  if (!node.is_object()) throw Error(ErrorKind::Schema, "task must be an object", path);
  Task t;
  t.id = req_str(node, "id", path);
  t.scenario = req_str(node, "scenario", path);
  t.goal_text = req_str(node, "goal_text", path);

  auto names = node.find("entity_names");
  if (names == node.end() || !names->is_array())
    throw Error(ErrorKind::Schema, "missing entity_names array", path);
  for (const auto& n : *names) t.entity_names.push_back(n.get<std::string>());

  const json& gold = node.contains("gold") ? node.at("gold") : json();
  if (!gold.is_object()) throw Error(ErrorKind::Schema, "missing gold object", path);
  const std::string gpath = path + ".gold";
  t.gold.entity = req_str(gold, "entity", gpath);
  t.gold.part = req_str(gold, "part", gpath);
  t.gold.affordance_label = req_str(gold, "affordance_label", gpath);
  t.gold.typicality_level = req_int(gold, "typicality_level", gpath);
  if (gold.contains("solution_reference")) {
    const json& sr = gold.at("solution_reference");
    t.gold.solution_reference.prepare_use_condition =
        req_str(sr, "prepare_use_condition", gpath + ".solution_reference");
    t.gold.solution_reference.prepare_environment_condition =
        req_str(sr, "prepare_environment_condition", gpath + ".solution_reference");
    t.gold.solution_reference.prepare_recipient =
        req_str(sr, "prepare_recipient", gpath + ".solution_reference");
    t.gold.solution_reference.apply_affordance =
        req_str(sr, "apply_affordance", gpath + ".solution_reference");
  }

  if (node.contains("distractors")) {
    const json& ds = node.at("distractors");
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const std::string dpath = path + ".distractors[" + std::to_string(i) + "]";
      DistractorAnnotation d;
      d.entity = req_str(ds[i], "entity", dpath);
      d.kind = distractor_kind_from_string(req_str(ds[i], "kind", dpath));
      d.not_gold_reason = req_str(ds[i], "not_gold_reason", dpath);
      t.distractors.push_back(std::move(d));
    }
  }

  if (!node.contains("similar_map") || !node.at("similar_map").is_object())
    throw Error(ErrorKind::Schema, "missing similar_map object", path);
  for (const auto& [key, value] : node.at("similar_map").items()) {
    if (!value.is_array())
      throw Error(ErrorKind::Schema, "similar_map values must be arrays",
                  path + ".similar_map." + key);
    t.similar_map[key] = value.get<std::vector<std::string>>();
  }

  t.similarity_level = similarity_level_from_string(req_str(node, "similarity_level", path));

  if (node.contains("assets")) {
    const json& a = node.at("assets");
    if (a.contains("env_image") && a.at("env_image").is_string())
      t.assets.env_image = a.at("env_image").get<std::string>();
    if (a.contains("entity_images"))
      for (const auto& [k, v] : a.at("entity_images").items())
        t.assets.entity_images[k] = v.get<std::string>();
    if (a.contains("part_images"))
      for (const auto& [e, parts] : a.at("part_images").items())
        for (const auto& [p, v] : parts.items()) t.assets.part_images[e][p] = v.get<std::string>();
  }

  // Cross-reference checks against the knowledge base and the task itself.
  auto in_task = [&](const std::string& name) {
    return std::find(t.entity_names.begin(), t.entity_names.end(), name) != t.entity_names.end();
  };
  for (const auto& name : t.entity_names)
    if (!kb.find_entity(name))
      throw Error(ErrorKind::CrossRef, "UNKNOWN_ENTITY: \"" + name + "\" not in knowledge base",
                  path + ".entity_names");
  if (!in_task(t.gold.entity))
    throw Error(ErrorKind::CrossRef, "GOLD_NOT_IN_TASK: gold entity \"" + t.gold.entity + "\"",
                path + ".gold.entity");
  const kb::Entity* ge = kb.find_entity(t.gold.entity);
  const kb::Part* gp = ge ? ge->find_part(t.gold.part) : nullptr;
  if (!gp)
    throw Error(ErrorKind::CrossRef, "UNKNOWN_PART: gold part \"" + t.gold.part + "\"",
                path + ".gold.part");
  if (!gp->has_affordance(t.gold.affordance_label))
    throw Error(ErrorKind::CrossRef,
                "GOLD_AFFORDANCE_MISSING: \"" + t.gold.affordance_label +
                    "\" not annotated on the gold part",
                path + ".gold.affordance_label");
  if (t.gold.typicality_level < 1 || t.gold.typicality_level > 5)
    throw Error(ErrorKind::Schema, "typicality_level outside [1,5]",
                path + ".gold.typicality_level");
  for (const auto& [entity, parts] : t.similar_map) {
    if (!in_task(entity))
      throw Error(ErrorKind::CrossRef, "SIMILAR_ENTITY_NOT_IN_TASK: \"" + entity + "\"",
                  path + ".similar_map");
    const kb::Entity* e = kb.find_entity(entity);
    for (const auto& part : parts)
      if (!e || !e->find_part(part))
        throw Error(ErrorKind::CrossRef,
                    "SIMILAR_PART_UNKNOWN: \"" + entity + "\" / \"" + part + "\"",
                    path + ".similar_map." + entity);
  }
  if (!t.is_similar(t.gold.entity, t.gold.part))
    throw Error(ErrorKind::CrossRef,
                "GOLD_NOT_RELEVANT: gold part must appear in similar_map[gold entity]",
                path + ".similar_map");
  for (const auto& d : t.distractors) {
    if (d.entity == t.gold.entity)
      throw Error(ErrorKind::CrossRef, "DISTRACTOR_IS_GOLD: \"" + d.entity + "\"",
                  path + ".distractors");
    if (!in_task(d.entity))
      throw Error(ErrorKind::CrossRef, "DISTRACTOR_NOT_IN_TASK: \"" + d.entity + "\"",
                  path + ".distractors");
  }

  check_asset(t.assets.env_image, options, "env image of task " + t.id);
  for (const auto& [e, p] : t.assets.entity_images)
    check_asset(p, options, "entity image (" + e + ")");
  for (const auto& [e, parts] : t.assets.part_images)
    for (const auto& [p, img] : parts)
      check_asset(img, options, "part image (" + e + ", " + p + ")");
  return t;
}

}  // namespace

std::vector<Task> load_tasks(const std::string& text, const kb::KnowledgeBase& kb,
                             const LoadOptions& options) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Syntax, std::string("malformed task document: ") + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorKind::Schema, "task document must be an array");
  std::vector<Task> out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    Task t = parse_task(doc[i], kb, options, "tasks[" + std::to_string(i) + "]");
    if (!ids.insert(t.id).second)
      throw Error(ErrorKind::Invariant, "duplicate task id \"" + t.id + "\"",
                  "tasks[" + std::to_string(i) + "].id");
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Task> load_tasks_file(const std::string& path, const kb::KnowledgeBase& kb,
                                  const LoadOptions& options) {
  return load_tasks(read_file(path), kb, options);
}

std::string serialize_tasks(const std::vector<Task>& tasks) {
  ordered_json arr = ordered_json::array();
  for (const auto& t : tasks) {
    ordered_json jt;
    jt["id"] = t.id;
    jt["scenario"] = t.scenario;
    jt["goal_text"] = t.goal_text;
    jt["entity_names"] = t.entity_names;
    ordered_json gold;
    gold["entity"] = t.gold.entity;
    gold["part"] = t.gold.part;
    gold["affordance_label"] = t.gold.affordance_label;
    ordered_json sr;
    sr["prepare_use_condition"] = t.gold.solution_reference.prepare_use_condition;
    sr["prepare_environment_condition"] = t.gold.solution_reference.prepare_environment_condition;
    sr["prepare_recipient"] = t.gold.solution_reference.prepare_recipient;
    sr["apply_affordance"] = t.gold.solution_reference.apply_affordance;
    gold["solution_reference"] = std::move(sr);
    gold["typicality_level"] = t.gold.typicality_level;
    jt["gold"] = std::move(gold);
    ordered_json ds = ordered_json::array();
    for (const auto& d : t.distractors) {
      ordered_json jd;
      jd["entity"] = d.entity;
      jd["kind"] = distractor_kind_name(d.kind);
      jd["not_gold_reason"] = d.not_gold_reason;
      ds.push_back(std::move(jd));
    }
    jt["distractors"] = std::move(ds);
    ordered_json sm;
    for (const auto& [k, v] : t.similar_map) sm[k] = v;
    jt["similar_map"] = std::move(sm);
    jt["similarity_level"] = similarity_level_name(t.similarity_level);
    ordered_json assets;
    if (!t.assets.env_image.empty()) assets["env_image"] = t.assets.env_image;
    ordered_json ei;
    for (const auto& [k, v] : t.assets.entity_images) ei[k] = v;
    assets["entity_images"] = std::move(ei);
    ordered_json pi;
    for (const auto& [e, parts] : t.assets.part_images) {
      ordered_json pe;
      for (const auto& [p, v] : parts) pe[p] = v;
      pi[e] = std::move(pe);
    }
    assets["part_images"] = std::move(pi);
    jt["assets"] = std::move(assets);
    arr.push_back(std::move(jt));
  }
  return arr.dump(2) + "\n";
}

GoldSolution sample_gold_triple(const kb::KnowledgeBase& kb, std::uint64_t seed) {
  struct Triple {
    const kb::Entity* entity;
    const kb::Part* part;
    const kb::AffordanceRecord* affordance;
  };
  std::vector<Triple> triples;
  for (const auto& e : kb.entities)
    for (const auto& p : e.parts)
      for (const auto& a : p.affordances) triples.push_back({&e, &p, &a});
  if (triples.empty())
    throw Error(ErrorKind::EmptyKb, "knowledge base has no (entity, part, affordance) triples");

  Rng rng(seed);
  const Triple& pick = triples[std::size_t(rng.bounded(triples.size()))];
  GoldSolution gold;
  gold.entity = pick.entity->name;
  gold.part = pick.part->name;
  gold.affordance_label = pick.affordance->function_label;
  gold.solution_reference.prepare_use_condition = pick.affordance->use_condition;
  gold.solution_reference.prepare_environment_condition = pick.affordance->environment_condition;
  gold.solution_reference.prepare_recipient = pick.affordance->recipient_condition;
  gold.solution_reference.apply_affordance = pick.affordance->apply_how;
  gold.typicality_level = pick.affordance->suitability_level;
  return gold;
}

std::vector<DistractorAnnotation> sample_distractors(const kb::KnowledgeBase& kb,
                                                     const GoldSolution& gold, std::size_t k,
                                                     std::uint64_t seed) {
  std::vector<std::string> candidates;
  for (const auto& e : kb.entities)
    if (e.name != gold.entity) candidates.push_back(e.name);
  if (candidates.size() < k)
    throw Error(ErrorKind::NotEnoughEntities,
                "need " + std::to_string(k) + " distractors but only " +
                    std::to_string(candidates.size()) + " non-gold entities exist");

  Rng rng(seed);
  rng.shuffle(candidates);
  candidates.resize(k);

  std::vector<DistractorAnnotation> out;
  for (const auto& name : candidates) {
    const kb::Entity* e = kb.find_entity(name);
    bool shares_label = false;
    for (const auto& p : e->parts)
      if (p.has_affordance(gold.affordance_label)) shares_label = true;
    DistractorAnnotation d;
    d.entity = name;
    d.kind = shares_label ? DistractorKind::AffordanceSimilar : DistractorKind::ScenePlausible;
    d.not_gold_reason =
        shares_label
            ? "offers a related function but lacks the decisive attributes of the intended part"
            : "plausibly present in the scene but does not support the needed function";
    out.push_back(std::move(d));
  }
  return out;
}

std::string draft_task_description(const GoldSolution& gold,
                                   const std::vector<kb::AttributeClaim>& supporting_attrs,
                                   chat::TextBackend& teacher) {
  std::string attrs;
  for (const auto& a : supporting_attrs)
    attrs += "- " + a.label + " (" + kb::attr_category_name(a.category) + "): " + a.text + "\n";
  chat::MessageSequence messages;
  messages.push_back({chat::Role::System,
                      "You write short, realistic everyday problem descriptions. Reply with the "
                      "task description text only.",
                      {}});
  messages.push_back(
      {chat::Role::User,
       "Write a practical task description that requires the function \"" + gold.affordance_label +
           "\" without mentioning the object \"" + gold.entity + "\" or its part \"" + gold.part +
           "\" or any obvious surface cue. Supporting attributes:\n" + attrs,
       {}});
  std::string reply = teacher.complete(messages);
  if (trim(reply).empty()) throw Error(ErrorKind::EmptyResponse, "teacher returned empty text");
  return reply;
}

namespace {

std::string normalize_for_leakage(std::string_view s) {
  return to_lower_ascii(replace_all(std::string(s), "_", " "));
}

/// Attribute label set of a part (physical plus state).
std::set<std::string> label_set(const kb::Part& p) {
  std::set<std::string> out;
  for (const auto& a : p.physical) out.insert(a.label);
  for (const auto& a : p.state) out.insert(a.label);
  return out;
}

}  // namespace

QcReport qc_check(const Task& draft, const kb::KnowledgeBase& kb) {
  QcReport report;
  auto in_task = [&](const std::string& name) {
    return std::find(draft.entity_names.begin(), draft.entity_names.end(), name) !=
           draft.entity_names.end();
  };

  bool refs_ok = true;
  for (const auto& name : draft.entity_names)
    if (!kb.find_entity(name)) refs_ok = false;
  const kb::Entity* ge = kb.find_entity(draft.gold.entity);
  const kb::Part* gp = ge ? ge->find_part(draft.gold.part) : nullptr;
  if (!in_task(draft.gold.entity) || !gp) refs_ok = false;
  for (const auto& [entity, parts] : draft.similar_map) {
    const kb::Entity* e = kb.find_entity(entity);
    if (!e || !in_task(entity)) refs_ok = false;
    for (const auto& part : parts)
      if (!e || !e->find_part(part)) refs_ok = false;
  }
  for (const auto& d : draft.distractors)
    if (!in_task(d.entity) || d.entity == draft.gold.entity) refs_ok = false;
  if (!refs_ok) report.failures.push_back("REF_INTEGRITY");

  if (!gp || !gp->has_affordance(draft.gold.affordance_label))
    report.failures.push_back("GOLD_VALIDITY");

  // Conservative separability proxy: a distractor part that carries the gold
  // affordance label AND the exact same attribute label set is
  // indistinguishable to this machinery.
  if (gp) {
    const std::set<std::string> gold_labels = label_set(*gp);
    bool separable = true;
    for (const auto& d : draft.distractors) {
      const kb::Entity* e = kb.find_entity(d.entity);
      if (!e) continue;
      for (const auto& p : e->parts)
        if (p.has_affordance(draft.gold.affordance_label) && label_set(p) == gold_labels)
          separable = false;
    }
    if (!separable) report.failures.push_back("SEPARABILITY");
  }

  const std::string goal = normalize_for_leakage(draft.goal_text);
  if (contains(goal, normalize_for_leakage(draft.gold.entity)) ||
      contains(goal, normalize_for_leakage(draft.gold.part)))
    report.failures.push_back("LEAKAGE");

  report.needs_human.push_back("SCENE_COHERENCE");
  report.needs_human.push_back("VISUAL_OBSERVABILITY");
  report.passed = report.failures.empty();
  return report;
}

nlohmann::ordered_json qc_report_to_json(const std::string& task_id, const QcReport& report) {
  ordered_json j;
  j["task_id"] = task_id;
  j["passed"] = report.passed;
  j["failures"] = report.failures;
  j["needs_human"] = report.needs_human;
  return j;
}

Visibility classify_attribute_visibility(const kb::Part& part, const std::string& attr_label,
                                         chat::TextBackend& judge) {
  const kb::AttributeClaim* claim = part.find_attribute(attr_label);
  if (!claim)
    throw Error(ErrorKind::Precondition,
                "attribute \"" + attr_label + "\" not present on part \"" + part.name + "\"");
  chat::MessageSequence messages;
  messages.push_back({chat::Role::System,
                      "You judge whether a visual rendering alone decisively shows an object "
                      "attribute. Reply with exactly one word: VisualEnough or TextNeeded.",
                      {}});
  messages.push_back({chat::Role::User,
                      "Part: " + part.name + "\nAttribute: " + attr_label + " (" +
                          kb::attr_category_name(claim->category) + ")\nDescription: " +
                          claim->text,
                      {}});
  std::string reply = judge.complete(messages);
  bool visual = contains(reply, "VisualEnough");
  bool text = contains(reply, "TextNeeded");
  if (visual == text)
    throw Error(ErrorKind::UnparseableVerdict,
                "judge reply names neither or both verdicts: \"" + reply + "\"");
  return text ? Visibility::TextNeeded : Visibility::VisualEnough;
}

}  // namespace affbench::taskset
