#include "affbench/env.hpp"
#include "affbench/util.hpp"

// Agent-facing text of the interaction protocol. The wording of these blocks
// is part of the wire contract and must not drift; tests assert exact
// fragments.

namespace affbench::env {

const std::string& eval_system_prompt() {
  static const std::string prompt =
      "You are a creative physical problem-solver. Given a task and scenario, solve it by "
      "repurposing a part of an entity using attribute-grounded, visually grounded reasoning. "
      "You may inspect only one entity or one part per turn before answering. Base conclusions "
      "on observable physical and state properties, avoid unsupported assumptions, and devise a "
      "physically plausible use. Always end with a single JSON object.";
  return prompt;
}

namespace {

const char* kInitialTemplate = R"(TASK
{task}

SCENARIO
{scenario}

YOUR OBJECTIVE
Choose the exact entity and exact part that can be repurposed to solve the task, then explain a physically plausible way to use it.

WHAT YOU KNOW AT THE START
You are given the environment scene image and the list of entity names below.
You do not know the part names yet. Part names are revealed only after you inspect an entity.

HOW TO EXPLORE
1. Inspect the environment image first and identify several plausible candidate entities.
2. Inspect multiple promising entities to reveal their exact part names.
3. Inspect multiple promising parts to compare affordances, geometry, material cues, attachment, reachability, and constraints.
4. Do not stop at the first plausible option. Explicitly explore different candidate entities and different candidate parts before answering whenever the best choice is not already decisive.
5. Ground every conclusion in visible attributes and any later part feedback. Avoid unsupported assumptions.

ACTION RULES
Return exactly one JSON object per turn.
Use `"action":"inspect_entity"` to inspect one exact entity name.
Use `"action":"inspect_part"` to inspect one exact part name after you have discovered it.
Use `"action":"answer"` only when you have explored enough and can justify the choice.
Inspect exactly one entity or one part per turn before answering.

ENTITIES AVAILABLE FOR INSPECTION
{entity_list}

RETURN JSON ONLY IN ONE OF THESE FORMATS
Entity inspection:
{"reasoning":"...","action":"inspect_entity","entity":"<exact entity name>"}

Part inspection:
{"reasoning":"...","action":"inspect_part","part":"<exact part name>"}

Final answer:
{"reasoning":"...","action":"answer","answer_entity":"<exact entity name>","answer_part":"<exact part name>","answer_how_to_use":"..."})";

const char* kEntityTemplate =
    R"(ENTITY INSPECTION: {entity_name}
This entity includes these exact part names: {part_names}
Use this inspection to identify which specific parts from this entity deserve closer checking.
Then continue exploring other plausible entities or parts as needed before deciding on the final answer.)";

const char* kPartTemplateHead =
    R"(PART INSPECTION: {part_name}
Belongs to entity: {entity_name}
Physical text explanation: {physical_summary}
State text explanation: {state_summary}
)";

const char* kPartTemplateTail =
    R"(Besides the text above, also carefully inspect the image for additional attributes and grounding cues. The text may not be complete.
For visibility and availability state especially, follow the text explanation even if the image appears clearer or more accessible. State text is the accurate source for whether the part is visible, free, blocked, or otherwise constrained in the task.
If you choose this part in the final answer, make sure your solution is consistent and grounded in all the available attributes.
Do not lock in immediately just because this part looks plausible. Continue comparing other plausible parts and entities before answering unless this candidate is already clearly best.)";

}  // namespace

std::string feedback_text(const Feedback& feedback) {
  if (const auto* init = std::get_if<InitialFeedback>(&feedback)) {
    std::string entity_list;
    for (std::size_t i = 0; i < init->entity_names.size(); ++i) {
      if (i) entity_list += "\n";
      entity_list += "- " + init->entity_names[i];
    }
    std::string text = kInitialTemplate;
    text = replace_all(text, "{task}", init->goal_text);
    text = replace_all(text, "{scenario}", init->scenario);
    text = replace_all(text, "{entity_list}", entity_list);
    return text;
  }
  if (const auto* ef = std::get_if<EntityFeedback>(&feedback)) {
    std::string text = kEntityTemplate;
    text = replace_all(text, "{entity_name}", ef->entity);
    text = replace_all(text, "{part_names}", join(ef->part_names, ", "));
    return text;
  }
  if (const auto* pf = std::get_if<PartFeedback>(&feedback)) {
    std::string text = kPartTemplateHead;
    text = replace_all(text, "{part_name}", pf->part);
    text = replace_all(text, "{entity_name}", pf->owner_entity);
    text = replace_all(text, "{physical_summary}", pf->physical_summary);
    text = replace_all(text, "{state_summary}", pf->state_summary);
    for (const auto& [label, clarification] : pf->disambiguation)
      text += "Attribute clarification (" + label + "): " + clarification + "\n";
    text += kPartTemplateTail;
    return text;
  }
  if (const auto* pe = std::get_if<ProtocolErrorFeedback>(&feedback))
    return "PROTOCOL ERROR: " + pe->code + ". " + pe->message;
  const auto& term = std::get<TerminalFeedback>(feedback);
  return std::string("SESSION OVER: ") + verdict_name(term.verdict);
}

}  // namespace affbench::env
