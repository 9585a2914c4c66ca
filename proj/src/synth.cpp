#include "affbench/synth.hpp"

#include <algorithm>

#include "affbench/error.hpp"
#include "affbench/util.hpp"

namespace affbench::synth {

namespace {

const char* kEntityNouns[] = {
    "folding chair",   "storage bin",    "desk lamp",      "garden hose",   "picture frame",
    "laundry basket",  "umbrella",       "cutting board",  "bath towel",    "wire rack",
    "door wedge",      "watering can",   "extension cord", "broom",         "serving tray",
    "yoga mat",        "clothes hanger", "sauce pan",      "shoe box",      "bungee cord",
    "window squeegee", "tea kettle",     "oven mitt",      "packing tape roll",
};

const char* kPartNouns[] = {
    "handle_grip",   "flat_panel",   "rubber_foot", "metal_edge",  "mesh_screen",
    "hinge_joint",   "rim_lip",      "base_plate",  "side_hook",   "spout_tip",
    "strap_loop",    "clamp_jaw",    "foam_pad",    "vent_slot",   "corner_guard",
    "spring_latch",  "woven_band",   "cap_cover",   "pivot_arm",   "ridge_line",
};

struct FunctionDef {
  const char* label;
  const char* apply;
  // How a task describes the need without naming the function label; goal
  // texts must never echo annotation vocabulary.
  const char* need;
};

const FunctionDef kFunctions[] = {
    {"protective cushioning", "press the soft face over the contact point and hold it in place",
     "keep a hard contact point from marring a delicate surface"},
    {"water channeling", "angle it so runoff follows the groove away from the area",
     "guide runoff away from where it keeps landing"},
    {"reach extension", "grip the far end and use the length to reach the target",
     "get at something sitting just beyond arm's reach"},
    {"edge scraping", "drag the firm edge across the residue in short strokes",
     "lift stuck-on residue off a flat surface"},
    {"load spreading", "lay it flat under the weight so the force spreads out",
     "keep a heavy object from pressing all its weight into one spot"},
    {"gap wedging", "push the tapered side into the gap until it sits tight",
     "keep a loose gap held firmly shut"},
    {"debris scooping", "slide it under the loose material and lift",
     "pick up scattered bits without touching them by hand"},
    {"cord bundling", "wrap it around the strands and cinch them together",
     "keep a tangle of loose cords gathered in one place"},
    {"glare shielding", "hold it between the light source and the surface",
     "block harsh light from washing out the work area"},
    {"drip catching", "set it underneath so falling drops collect inside",
     "stop falling drops from spreading across the floor"},
};

struct AttrDef {
  const char* label;
  kb::AttrCategory category;
  const char* text;
};

const AttrDef kPhysicalAttrs[] = {
    {"rigid_body", kb::AttrCategory::Rigidity, "holds its shape firmly under hand pressure"},
    {"soft_face", kb::AttrCategory::Rigidity, "compresses slightly and conforms to contact"},
    {"smooth_finish", kb::AttrCategory::Surface, "low-friction wipe-clean surface"},
    {"textured_grip", kb::AttrCategory::Surface, "fine stippling that resists slipping"},
    {"thin_profile", kb::AttrCategory::Geometry, "a few millimetres thick at the working edge"},
    {"curved_shell", kb::AttrCategory::Geometry, "gentle convex curvature across the face"},
    {"metal_core", kb::AttrCategory::Material, "stamped aluminium with rolled edges"},
    {"poly_blend", kb::AttrCategory::Material, "injection-moulded polypropylene body"},
    {"feather_weight", kb::AttrCategory::Weight, "light enough to hold one-handed all day"},
    {"heat_tolerant", kb::AttrCategory::Thermal, "unaffected by brief contact up to kettle heat"},
};

const AttrDef kStateAttrs[] = {
    {"clean_dry", kb::AttrCategory::Other, "clean and dry, ready for contact use"},
    {"partially_blocked", kb::AttrCategory::Other, "partly covered by neighbouring items"},
    {"slightly_worn", kb::AttrCategory::Other, "visible wear at the corners, still sound"},
    {"fully_accessible", kb::AttrCategory::Other, "nothing obstructs reaching it"},
    {"detached_loose", kb::AttrCategory::Other, "already detached and free to reposition"},
};

const char* kScenarios[] = {
    "a cluttered utility room",
    "a small apartment kitchen",
    "a weekend garage workspace",
    "a shared office corner",
    "a bathroom with limited storage",
};

}  // namespace

kb::KnowledgeBase generate_kb(std::uint64_t seed, const KbSpec& spec) {
  if (spec.entities == 0 || spec.min_parts == 0 || spec.max_parts < spec.min_parts)
    throw Error(ErrorKind::Config, "bad synthetic kb spec");
  Rng rng(seed);
  kb::KnowledgeBase out;
  out.schema_version = "1";

  const std::size_t noun_count = std::size(kEntityNouns);
  for (std::size_t i = 0; i < spec.entities; ++i) {
    kb::Entity entity;
    entity.name = std::string(kEntityNouns[i % noun_count]);
    if (i >= noun_count) entity.name += " " + std::to_string(i / noun_count + 1);
    entity.summary = "An everyday " + entity.name + " kept within easy reach.";

    const std::size_t parts =
        spec.min_parts + rng.bounded(spec.max_parts - spec.min_parts + 1);
    std::vector<std::size_t> part_ids;
    for (std::size_t p = 0; p < std::size(kPartNouns); ++p) part_ids.push_back(p);
    rng.shuffle(part_ids);
    for (std::size_t p = 0; p < parts; ++p) {
      kb::Part part;
      part.name = kPartNouns[part_ids[p]];

      const AttrDef& phys1 = kPhysicalAttrs[rng.bounded(std::size(kPhysicalAttrs))];
      const AttrDef& phys2 = kPhysicalAttrs[rng.bounded(std::size(kPhysicalAttrs))];
      part.physical.push_back({phys1.label, phys1.category, phys1.text});
      if (phys2.label != phys1.label)
        part.physical.push_back({phys2.label, phys2.category, phys2.text});
      const AttrDef& st = kStateAttrs[rng.bounded(std::size(kStateAttrs))];
      part.state.push_back({st.label, st.category, st.text});

      std::vector<std::string> phys_bits;
      for (const auto& a : part.physical) phys_bits.push_back(a.text);
      part.physical_summary = join(phys_bits, "; ");
      part.state_summary = st.text;

      const FunctionDef& fn = kFunctions[rng.bounded(std::size(kFunctions))];
      kb::AffordanceRecord rec;
      rec.function_label = fn.label;
      rec.apply_how = fn.apply;
      rec.use_condition = rng.bounded(2) ? "keep the working face clean" : "NA";
      rec.environment_condition = rng.bounded(3) == 0 ? "avoid standing water nearby" : "NA";
      rec.recipient_condition = "NA";
      rec.suitability_level = int(1 + rng.bounded(5));
      part.affordances.push_back(rec);
      if (rng.next_unit() < spec.extra_affordance_probability) {
        const FunctionDef& fn2 = kFunctions[rng.bounded(std::size(kFunctions))];
        if (std::string(fn2.label) != fn.label) {
          kb::AffordanceRecord rec2;
          rec2.function_label = fn2.label;
          rec2.apply_how = fn2.apply;
          rec2.suitability_level = int(1 + rng.bounded(5));
          part.affordances.push_back(rec2);
        }
      }
      if (rng.bounded(3) == 0) part.text_needed.push_back(part.physical.front().label);
      entity.parts.push_back(std::move(part));
    }
    out.entities.push_back(std::move(entity));
  }

  auto violations = kb::validate_kb(out);
  if (!violations.empty())
    throw Error(ErrorKind::Invariant, "synthetic kb failed validation: " + violations[0].code,
                violations[0].path);
  return out;
}

std::vector<taskset::Task> generate_tasks(const kb::KnowledgeBase& kb, std::uint64_t seed,
                                          const TaskSpec& spec) {
  std::vector<taskset::Task> tasks;
  Rng rng(seed);
  std::size_t attempts = 0;
  const std::size_t max_attempts = spec.count * 50 + 100;

  while (tasks.size() < spec.count) {
    if (++attempts > max_attempts)
      throw Error(ErrorKind::Config,
                  "could not assemble enough quality-passing tasks; knowledge base too small "
                  "or too uniform");
    const std::uint64_t sub_seed = rng.next_u64();
    taskset::Task task;
    task.id = "task-" + std::to_string(tasks.size() + 1);
    task.gold = taskset::sample_gold_triple(kb, sub_seed);

    std::size_t k = std::min(spec.distractors, kb.entities.size() - 1);
    task.distractors = taskset::sample_distractors(kb, task.gold, k, sub_seed ^ 0x5bd1e995);

    task.entity_names.push_back(task.gold.entity);
    for (const auto& d : task.distractors) task.entity_names.push_back(d.entity);
    Rng order_rng(sub_seed ^ 0xc2b2ae35);
    order_rng.shuffle(task.entity_names);

    task.scenario = kScenarios[sub_seed % std::size(kScenarios)];
    // The goal describes the need without echoing annotation vocabulary.
    const char* need = nullptr;
    for (const auto& fn : kFunctions)
      if (task.gold.affordance_label == fn.label) need = fn.need;
    task.goal_text =
        need ? "I need to " + std::string(need) +
                   ", and the usual tool for the job is missing. Work out which item here "
                   "can be repurposed to cover it."
             : "The usual tool for a small household job is missing. From what is lying "
               "around, work out which item and which exact part can stand in for it.";

    // Relevance annotations: any part carrying the gold function label.
    for (const auto& name : task.entity_names) {
      const kb::Entity* entity = kb.find_entity(name);
      std::vector<std::string> parts;
      for (const auto& p : entity->parts)
        if (p.has_affordance(task.gold.affordance_label)) parts.push_back(p.name);
      task.similar_map[name] = parts;
    }

    std::size_t similar_entities = 0;
    for (const auto& d : task.distractors)
      if (d.kind == taskset::DistractorKind::AffordanceSimilar) ++similar_entities;
    task.similarity_level = similar_entities == 0 ? taskset::SimilarityLevel::Dissimilar
                            : similar_entities == task.distractors.size()
                                ? taskset::SimilarityLevel::Similar
                                : taskset::SimilarityLevel::Mixed;

    if (spec.with_assets) {
      task.assets.env_image = "assets/" + task.id + "/env.png";
      for (const auto& name : task.entity_names) {
        std::string base = replace_all(name, " ", "_");
        task.assets.entity_images[name] = "assets/" + task.id + "/" + base + ".png";
        const kb::Entity* entity = kb.find_entity(name);
        for (const auto& p : entity->parts)
          task.assets.part_images[name][p.name] =
              "assets/" + task.id + "/" + base + "." + p.name + ".png";
      }
    }

    auto qc = taskset::qc_check(task, kb);
    if (!qc.passed) continue;  // resample; the draw collided on labels or attributes
    tasks.push_back(std::move(task));
  }
  return tasks;
}

}  // namespace affbench::synth
