#include <doctest.h>

#include <algorithm>
#include <set>

#include "affbench/error.hpp"
#include "affbench/synth.hpp"
#include "affbench/taskset.hpp"
#include "test_support.hpp"

using namespace affbench;
using testing_support::fixture_text;
using testing_support::toy_kb;
using testing_support::toy_task;

TEST_CASE("toy taskset loads and resolves against the base") {
  const taskset::Task& task = toy_task();
  CHECK(task.entity_names.size() == 3);
  CHECK(task.gold.entity == "shower rod");
  CHECK(task.gold.part == "end_pads");
  CHECK(task.gold.typicality_level == 4);
  CHECK(task.is_similar("shower rod", "end_pads"));
  CHECK(task.total_similar_parts() == 2);
}

TEST_CASE("gold part must be marked relevant") {
  std::string text = fixture_text("toy_tasks.json");
  text = replace_all(text, "\"shower rod\": [\"end_pads\"]", "\"shower rod\": []");
  try {
    taskset::load_tasks(text, toy_kb());
    FAIL("expected CrossRefError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::CrossRef);
    CHECK(contains(e.what(), "GOLD_NOT_RELEVANT"));
  }
}

TEST_CASE("strict mode reports the missing asset by entity and part") {
  std::string text = fixture_text("toy_tasks.json");
  text = replace_all(text, "\"part_images\": {}",
                     "\"part_images\": {\"shower rod\": {\"end_pads\": \"missing/pad.png\"}}");
  taskset::LoadOptions options;
  options.strict_assets = true;
  try {
    taskset::load_tasks(text, toy_kb(), options);
    FAIL("expected AssetError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Asset);
    CHECK(contains(e.what(), "shower rod"));
    CHECK(contains(e.what(), "end_pads"));
  }
  // Non-strict mode keeps the dangling reference.
  auto tasks = taskset::load_tasks(text, toy_kb());
  CHECK(tasks[0].assets.part_image("shower rod", "end_pads") == "missing/pad.png");
}

TEST_CASE("task serialization round-trips") {
  const std::string once = taskset::serialize_tasks(testing_support::toy_tasks());
  auto reloaded = taskset::load_tasks(once, toy_kb());
  CHECK(taskset::serialize_tasks(reloaded) == once);
}

TEST_CASE("gold triple sampling is deterministic per seed") {
  taskset::GoldSolution a = taskset::sample_gold_triple(toy_kb(), 0);
  taskset::GoldSolution b = taskset::sample_gold_triple(toy_kb(), 0);
  CHECK(a.entity == b.entity);
  CHECK(a.part == b.part);
  CHECK(a.affordance_label == b.affordance_label);

  // A base with exactly one triple always yields it.
  kb::KnowledgeBase single = toy_kb();
  single.entities.resize(1);
  single.entities[0].parts.resize(1);
  for (std::uint64_t seed : {0ull, 5ull, 99ull}) {
    taskset::GoldSolution g = taskset::sample_gold_triple(single, seed);
    CHECK(g.entity == "microfiber towel");
    CHECK(g.part == "pile_surface");
  }

  kb::KnowledgeBase bare = toy_kb();
  for (auto& e : bare.entities)
    for (auto& p : e.parts) p.affordances.clear();
  try {
    taskset::sample_gold_triple(bare, 1);
    FAIL("expected EmptyKb");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyKb);
  }
}

TEST_CASE("distractor sampling tags kinds by a label scan") {
  taskset::GoldSolution gold;
  gold.entity = "shower rod";
  gold.part = "end_pads";
  gold.affordance_label = "protective cushioning";
  auto distractors = taskset::sample_distractors(toy_kb(), gold, 2, 3);
  REQUIRE(distractors.size() == 2);
  for (const auto& d : distractors) {
    CHECK(d.entity != "shower rod");
    // Brute-force check of the tagging rule against the fixture.
    const kb::Entity* e = toy_kb().find_entity(d.entity);
    bool shares = false;
    for (const auto& p : e->parts)
      if (p.has_affordance("protective cushioning")) shares = true;
    CHECK((d.kind == taskset::DistractorKind::AffordanceSimilar) == shares);
    if (d.entity == "microfiber towel")
      CHECK(d.kind == taskset::DistractorKind::AffordanceSimilar);
    if (d.entity == "house key") CHECK(d.kind == taskset::DistractorKind::ScenePlausible);
  }

  try {
    taskset::sample_distractors(toy_kb(), gold, 3, 3);
    FAIL("expected NotEnoughEntities");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotEnoughEntities);
  }
}

TEST_CASE("distractor sampling never returns the gold entity or duplicates") {
  kb::KnowledgeBase kb = synth::generate_kb(21, {12, 2, 4, 0.5, false});
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    taskset::GoldSolution gold = taskset::sample_gold_triple(kb, seed);
    auto distractors = taskset::sample_distractors(kb, gold, 5, seed);
    std::set<std::string> seen;
    for (const auto& d : distractors) {
      CHECK(d.entity != gold.entity);
      CHECK(seen.insert(d.entity).second);
    }
    auto again = taskset::sample_distractors(kb, gold, 5, seed);
    for (std::size_t i = 0; i < distractors.size(); ++i)
      CHECK(distractors[i].entity == again[i].entity);
  }
}

TEST_CASE("task drafting passes the teacher text through verbatim") {
  taskset::GoldSolution gold;
  gold.entity = "shower rod";
  gold.part = "end_pads";
  gold.affordance_label = "protective cushioning";
  chat::FixedBackend teacher("A hook is chewing into the wall paint; find a fix nearby.");
  CHECK(taskset::draft_task_description(gold, {}, teacher) ==
        "A hook is chewing into the wall paint; find a fix nearby.");

  chat::FixedBackend empty("   ");
  try {
    taskset::draft_task_description(gold, {}, empty);
    FAIL("expected EmptyResponse");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyResponse);
  }

  chat::CallbackBackend failing([](const chat::MessageSequence&) -> std::string {
    throw Error(ErrorKind::Backend, "timeout");
  });
  try {
    taskset::draft_task_description(gold, {}, failing);
    FAIL("expected BackendError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Backend);
  }
}

TEST_CASE("quality control passes the toy task and flags the human checks") {
  auto report = taskset::qc_check(toy_task(), toy_kb());
  CHECK(report.passed);
  CHECK(report.failures.empty());
  REQUIRE(report.needs_human.size() == 2);
  CHECK(report.needs_human[0] == "SCENE_COHERENCE");
  CHECK(report.needs_human[1] == "VISUAL_OBSERVABILITY");
}

TEST_CASE("goal text naming the gold part is leakage") {
  taskset::Task task = toy_task();
  task.goal_text = "the END PADS keep slipping and the hook dents the wall";
  auto report = taskset::qc_check(task, toy_kb());
  CHECK(!report.passed);
  CHECK(std::find(report.failures.begin(), report.failures.end(), "LEAKAGE") !=
        report.failures.end());
}

TEST_CASE("leakage triggers for underscore-normalized names in fuzzed goals") {
  Rng rng(77);
  const std::string part_in_prose = replace_all(toy_task().gold.part, "_", " ");
  for (int i = 0; i < 60; ++i) {
    std::string noise_before, noise_after;
    for (int k = 0; k < int(rng.bounded(12)); ++k)
      noise_before.push_back(char('a' + rng.bounded(26)));
    for (int k = 0; k < int(rng.bounded(12)); ++k)
      noise_after.push_back(char('a' + rng.bounded(26)));
    taskset::Task task = toy_task();
    task.goal_text = noise_before + " " + part_in_prose + " " + noise_after;
    auto report = taskset::qc_check(task, toy_kb());
    CHECK(!report.passed);
  }
}

TEST_CASE("an indistinguishable distractor part fails separability") {
  kb::KnowledgeBase kb = toy_kb();
  // Clone the gold part's affordance label and attribute labels onto a
  // distractor part.
  kb::Entity* towel = const_cast<kb::Entity*>(kb.find_entity("microfiber towel"));
  const kb::Part& gold_part = *kb.find_entity("shower rod")->find_part("end_pads");
  towel->parts[0].physical = gold_part.physical;
  towel->parts[0].state = gold_part.state;
  towel->parts[0].text_needed = gold_part.text_needed;
  auto report = taskset::qc_check(toy_task(), kb);
  CHECK(!report.passed);
  CHECK(std::find(report.failures.begin(), report.failures.end(), "SEPARABILITY") !=
        report.failures.end());
}

TEST_CASE("attribute visibility classification parses the judge verdict") {
  const kb::Part& pad = kb::lookup_part(toy_kb(), "shower rod", "end_pads");
  chat::FixedBackend text_needed("TextNeeded");
  CHECK(taskset::classify_attribute_visibility(pad, "high_friction", text_needed) ==
        taskset::Visibility::TextNeeded);
  chat::FixedBackend visual("Verdict: VisualEnough");
  CHECK(taskset::classify_attribute_visibility(pad, "epdm_rubber", visual) ==
        taskset::Visibility::VisualEnough);

  chat::FixedBackend vague("maybe");
  try {
    taskset::classify_attribute_visibility(pad, "high_friction", vague);
    FAIL("expected UnparseableVerdict");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnparseableVerdict);
  }

  chat::FixedBackend unused("TextNeeded");
  try {
    taskset::classify_attribute_visibility(pad, "absent_label", unused);
    FAIL("expected precondition error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Precondition);
  }
}

TEST_CASE("generated tasksets satisfy the loader invariants") {
  kb::KnowledgeBase kb = synth::generate_kb(4, {10, 2, 4, 0.5, false});
  auto tasks = synth::generate_tasks(kb, 11, {15, 3, false});
  REQUIRE(tasks.size() == 15);
  const std::string text = taskset::serialize_tasks(tasks);
  auto reloaded = taskset::load_tasks(text, kb);
  CHECK(reloaded.size() == 15);
  for (const auto& task : reloaded) {
    CHECK(task.is_similar(task.gold.entity, task.gold.part));
    CHECK(taskset::qc_check(task, kb).passed);
  }
}
