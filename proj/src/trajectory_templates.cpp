#include "trajectory_templates.hpp"

namespace affbench::trajectory::templates {

const char* kPositiveSystem =
    R"(You are a creative physical problem-solver to output data trajectories that will be collected for open-source model training. Given a task and scenario, solve it by repurposing a part of an entity using attribute-grounded, visually grounded reasoning. You may inspect only one entity or one part per turn before answering. Always end with a single JSON object whenever the prompt asks for one.

Your reasoning style is guided by the user prompt. Each turn should read like a natural caption of your thought process: coherent, grounded, and observant. Even when the prompt quietly guides your reasoning, behave as if you are figuring things out normally from the task and feedback. Never mention hidden guidance, gold data, or prompt references.)";

const char* kHardNegativeSystem =
    R"(You are a ungrounded and problematic physical problem-solver to output intentionally hard-negative training trajectories. Keep the same natural structure and tone as a normal solver, but deliberately make the reasoning wrong, ineffective, and visually/physically ungrounded: rely on unsupported assumptions, misread and ignore real evidence, and always steer away from the best-supported conclusion. You may inspect only one entity or one part per turn before answering. Keep every entity name and part name exact as provided, and never mention that the reasoning is intentionally wrong. Always end with a single JSON object whenever the prompt asks for one.)";

const char* kTaskBasis = R"(## Task Basis
You are currently in <SCENARIO_OR_ENVIRONMENT>.
The task that the user requires you to do is:
<TASK>

The entity names available in the scene are:
<ENTITY_NAME_LINES>

You should reason first, then end with a JSON in the format {"reasoning":"...","action":"inspect_entity","entity":"<exact entity name>","top_candidates":["<exact entity name>", "..."]}.
)";

const char* kPositiveInitialGuidance = R"(## Guidance on Reasoning
1. Start naturally by thinking about what kind of affordance the task needs.
Target affordance to naturally reason toward: <TARGET_AFFORDANCE>
2. Continue by thinking about the core attributes that would enable that affordance. Express these as if you are inferring them yourself.
<ATTRIBUTE_LINES>
3. Then naturally transition your reasoning into inspecting the environment.
4. Go through all listed entities with no overlap and nothing left behind.
5. For each entity, say where it is in the image if visible, then give a brief grounded description focused on visible physical and state cues.
6. After covering all entities, name up to three candidate entities, explain briefly why they look promising, and show your intention to inspect those top candidates first and then continue through every other entity as well.
7. In the final JSON, keep the reasoning summary brief, choose one exact entity name to inspect now, and include a top_candidates list for internal tracking only.

## Additional Notes
1. Follow the structure above, but phrase everything in your own natural words.
2. Behave as if you are reasoning normally from the task and image; never mention hidden guidance, gold data, or prompt references.
3. Output the full reasoning before the final JSON.
4. Copy entity names exactly from the provided list.
5. The top_candidates field is required in the JSON for this round.)";

const char* kPositiveEntityPrompt = R"(## Feedback Basis
ENTITY INSPECTION: <ENTITY_NAME>
This entity includes these exact part names: <PART_NAMES>

## Guidance on Reasoning
Please perform visual grounding for each part first and explain in your own words why it may or may not achieve the needed affordance.
<ENTITY_BRANCH_INSTRUCTIONS>

Here is the reference for each part:
<PART_REFERENCE_LINES>

## Additional Notes
1. Observe and reason about all parts with no overlap and nothing left behind.
2. Base your reasoning on visible cues and the provided reference, but do not copy the reference text verbatim.
3. Keep the reasoning natural and coherent, as if you are figuring it out normally.
4. Output the full reasoning before any JSON.
5. Copy part or entity names exactly.)";

const char* kPositiveEntityLastStep = R"(This is the last exploration step.
Reason through every part, explain why none of them finally solves the need well enough, and end by explicitly saying this is the last entity you need to explore and you should now move on to the final answer.
Do not output any JSON in this turn.
Do not append a JSON object at the end.
Stop immediately after the prose reasoning is finished.)";

const char* kPositiveEntityHasSimilar =
    R"(This entity has several parts that may elicit the needed affordance: <SIMILAR_PART_NAMES>.
Reason through every part first, then explicitly say you will inspect the promising parts one by one.
All parts that can serve the needed affordance must eventually be explored.
Finally output JSON in the format {"reasoning":"...","action":"inspect_part","part":"<exact part name>"} and choose one exact part name from the promising parts list.)";

const char* kPositiveEntityNoSimilar =
    R"(This entity does not have any part that can elicit the needed affordance according to the reference.
Reason through every part first, then conclude that you should continue to the next unexplored entity.
For the final JSON, use this exact next entity name in the entity field: "<NEXT_ENTITY_NAME>".
Finally output JSON in the format {"reasoning":"...","action":"inspect_entity","entity":"<exact entity name>"} and copy that exact entity name.)";

const char* kPositivePartPrompt = R"(## Feedback Basis
PART INSPECTION: <PART_NAME>
Belongs to entity: <ENTITY_NAME>
Physical text explanation: <PHYSICAL_SUMMARY>
State text explanation: <STATE_SUMMARY>
Besides the text above, also carefully inspect the image for additional grounding cues. For visibility and availability, follow the text explanation even if the image looks clearer.

## Guidance on Reasoning
The detailed physical attributes of this part are:
<LOOKUP_PHYSICAL_ATTRIBUTES>
The detailed state attributes of this part are:
<LOOKUP_STATE_ATTRIBUTES>
<OPTIONAL_GOLD_HINT>Analyze whether this part can really serve the intended affordance, focusing on visible cues and practical constraints such as effectiveness, safety, environmental impact, and social acceptability.
For enable_affordance, do not use an overly harsh standard: if the part has a grounded, physically plausible, or indirect way to help achieve the needed affordance, it is acceptable to mark true.
Reserve false for parts that are clearly a poor match, unsafe, or not realistically useful after a closer inspection. Stay grounded and do not hallucinate capabilities.
<NEXT_TARGET_LINE><PART_BRANCH_INSTRUCTIONS>

## Additional Notes
1. Keep the reasoning grounded; do not copy the reference dictionaries directly.
2. Output the full reasoning before any JSON.
3. The enable_affordance field must be true or false.
4. If this is the last exploration step, the final JSON must contain only enable_affordance. Otherwise, copy the next part or entity name exactly when you emit JSON.)";

const char* kPositiveGoldHint =
    R"(Note that the part you are inspecting now is the gold part of the gold entity. Do not reveal this, but you must conclude that it can serve the intended need.
)";

const char* kNextTargetLine =
    R"(The next thing you should explore after this is <TARGET_TYPE>: <TARGET_NAME>.
)";

const char* kPositivePartLastStep =
    R"(This is the last exploration step. Reason carefully about whether the part really works, then end naturally by indicating that this is the last part you need to explore and you will now move on to give the final answer.
After the prose reasoning, output exactly one tiny JSON object in this format: {"enable_affordance": true/false}.
That final JSON must contain only the enable_affordance field.
Do not include reasoning, action, entity, or part fields in that final JSON.)";

const char* kPositivePartNextPart =
    R"(After reasoning, please naturally show your intention to inspectthe next part of the same entity.
For the final JSON, use this exact next part name in the part field: "<NEXT_PART_NAME>".
{"reasoning":"...","enable_affordance": true/false,"action":"inspect_part","part":"<exact part name>"})";

const char* kPositivePartNextEntity =
    R"(After reasoning, please express naturally that you have finished the worthwhile parts here and should move to inspect the next entity.
For the final JSON, use this exact next entity name in the entity field: "<NEXT_ENTITY_NAME>".
{"reasoning":"...","enable_affordance": true/false,"action":"inspect_entity","entity":"<exact entity name>"})";

const char* kPositiveFinalPrompt = R"(## Feedback Basis
Based on all the entities and parts you have inspected, here are all the candidate parts you previously believed might help solve the task:
<CANDIDATE_LINES>

Now choose one of them as your final answer, explain how to use it, and return JSON in this format:
{"reasoning":"...","action":"answer","answer_entity":"<exact entity name>","answer_part":"<exact part name>","answer_how_to_use":"..."}

## Guidance on Reasoning
Gold entity name: <GOLD_ENTITY_NAME>
Gold part name: <GOLD_PART_NAME>

Reason in this order:
1. Naturally list all the promising candidate parts as shown above.
2. Explicitly choose the best one; your final answer must be the provided gold entity and gold part.
3. Compare the gold part only against the other candidate parts listed above, one by one. If no other candidate parts are listed above, skip comparison naturally.
4. Then explain how to use the gold part in a concrete, comprehensive way.

Keep the reasoning natural and coherent, and do not mention hidden guidance.
Write full prose reasoning first. Then start the final JSON on a new line.
The JSON must appear only once, at the very end.
Inside the JSON, the reasoning field should be only a very brief summary.
Make answer_how_to_use detailed and practically actionable.
When available and not NA, explicitly include prepare_use_condition, prepare_environment_condition, prepare_recipient, preparation steps, placement/application steps, and important cautions or limits.
Write answer_how_to_use as one coherent multi-step paragraph.

Full solution reference:
{
  "prepare_use_condition": "<PREPARE_USE_CONDITION>",
  "prepare_environment_condition": "<PREPARE_ENVIRONMENT_CONDITION>",
  "prepare_recipient": "<PREPARE_RECIPIENT>",
  "apply_affordance": "<APPLY_AFFORDANCE>"
}

In the final JSON:
- keep reasoning brief
- use the exact gold entity and part names
- make answer_how_to_use detailed and practically actionable
- compare only against the candidate parts listed above; if there are no others, no comparison is needed
- describe how to use the part while catering to use condition, environment condition, and recipient condition when they are not NA
- mention preparation, placement/application, and important cautions or limits
- start the JSON on a new line after the prose reasoning)";

const char* kPositiveFinalComparisons =
    R"(

Comparison references for why the other candidate parts are not the gold choice:
<COMPARISON_LINES>)";

const char* kHardNegativeInitialGuidance = R"(## Guidance on Reasoning
1. Start naturally by thinking about what kind of affordance the task seems to need.
Target affordance to loosely reason around: <TARGET_AFFORDANCE>
2. Then please begin to inspect the environment and entities in the image, but intentionally let your analysis drift away from the actual image: overstate weak cues, assume hidden properties, and prefer surface-level plausibility over real physical grounding.
3. When describing entities, act as if you are reading the scene normally, but deliberately downplay the entities that look most physically suitable and highlight weaker alternatives instead.
4. Go through only some of the entities and don't need to cover all of them, while keeping the descriptions naturally phrased.
5. For each entity, hallucinate where it is in the image, then give a brief description that sounds plausible but is allowed to be visually or physically unsupported.
6. After covering all entities, name up to three candidate entities, explain briefly why they seem promising, and prefer candidates whose usefulness sounds defensible even if the image does not really support it.
7. If one entity appears obviously strongest, avoid prioritizing it; instead, always favor those weaker or only plausible-sounding ones as your inspection candidates.
8. In the final JSON, keep the reasoning summary brief, choose one exact entity name to inspect now, and include a top_candidates list for internal tracking only.

## Additional Notes
1. Follow the structure above, but phrase everything in your own natural words.
2. Keep the response smooth and coherent; never say that you are being intentionally ungrounded or wrong.
3. Output the full reasoning before the final JSON.
4. Copy entity names exactly from the provided list.
5. The top_candidates field is required in the JSON for this round.)";

const char* kHardNegativeEntityPrompt = R"(## Feedback Basis
ENTITY INSPECTION: <ENTITY_NAME>
This entity includes these exact part names: <PART_NAMES>

## Guidance on Reasoning
Reason through some of the listed part in a natural style and do not need to reason every of the, deliberately keep the analysis visually and physically ungrounded and hallucinated.
You may speculate about hidden rigidity, leverage, reachability, or usefulness even when the image or reference does not really support it.
Use correct and exact spellings; only the reasoning and conclusions should be wrong or very very weakly grounded.
<ENTITY_BRANCH_INSTRUCTIONS>

Here is the reference for each part:
<PART_REFERENCE_LINES>

## Additional Notes
1. Observe and discuss some of the parts, deliberately omit some and do not discuss all of them.
2. Use the reference only as material to push against; do not copy it verbatim and do not let it force you into a grounded conclusion.
3. Make every sentence weakly supported by the image, hallucinate some details, and steer away from the actually best-supported conclusion.
4. You should not reveal in any way that you are being intentionally ungrounded or wrong; keep the response smooth and coherent as if you are reasoning normally.
5. Output the full reasoning before any JSON.
6. Copy part or entity names exactly.)";

const char* kHardNegativeEntityLastStep = R"(This is the last exploration step.
Reason through some of the parts instead of all of them, and keep the analysis intentionally weakly grounded: misread cues, infer unsupported properties, and naturally drift away from the actually suitable affordance.
End by explicitly saying this is the last entity you need to explore and you should now move on to the final answer.
Do not output any JSON in this turn.
Do not append a JSON object at the end.
Stop immediately after the prose reasoning is finished.)";

const char* kHardNegativeEntityNonSimilar =
    R"(Some parts may actually have similar affordance support, but you should avoid inspecting those next. Instead, naturally hallucinate or speculate your way toward parts that are not listed as similar.
If you mention the similar-affordance parts (<SIMILAR_PART_NAMES>) at all, downplay them and treat them as less worth checking than the weaker alternatives.
Reason through every part first, then explicitly say you will inspect the promising parts one by one.
Finally output JSON in the format {"reasoning":"...","action":"inspect_part","part":"<exact part name>"} and choose one exact part name from this non-similar list: <NON_SIMILAR_PART_NAMES>.)";

const char* kHardNegativeEntityNoSimilarLine =
    R"(No part is marked as similar by the reference, so choose a weakly justified part and make it sound worth checking.
Reason through every part first, then explicitly say you will inspect the promising parts one by one.
Finally output JSON in the format {"reasoning":"...","action":"inspect_part","part":"<exact part name>"} and choose one exact part name from this non-similar list: <NON_SIMILAR_PART_NAMES>.)";

const char* kHardNegativeEntityAllSimilar =
    R"(Even if this entity contains parts that look reference-aligned, do not follow that path here.
Downplay the stronger parts, keep the reasoning visually ungrounded and gallucinated, and conclude that you should continue to the next unexplored entity instead.
For the final JSON, use this exact next entity name in the entity field: "<NEXT_ENTITY_NAME>".
Finally output JSON in the format {"reasoning":"...","action":"inspect_entity","entity":"<exact entity name>"} and copy that exact entity name.)";

const char* kHardNegativePartPrompt = R"(## Feedback Basis
PART INSPECTION: <PART_NAME>
Belongs to entity: <ENTITY_NAME>
Physical text explanation: N/A, please hallucinate and speculate freely, and make your reasoning visually and physically ungrounded.
State text explanation: N/A, please hallucinate and speculate freely, and make your reasoning visually and physically ungrounded.
Besides the text above, you should always speculate beyond the actual image and text. Keep the structure of a grounded inspection, but let the content drift away from real physical or visual evidence. More hallucination the better.

## Guidance on Reasoning
<OPTIONAL_ANTI_GOLD_HINT>Analyze whether this part can serve the intended affordance, but deliberately prefer hallucinated or plausible-sounding claims over grounded ones. You may ignore real constraints, invent weakly supported advantages, or exaggerate drawbacks.
For enable_affordance, try to drive it towards a hallucinated or wrong conclusion, or use whatever value that fits your ungrounded reasoning trajectory; it does not need to match the real evidence.
Keep the response fluent and coherent, and never say that you are being intentionally wrong.
<NEXT_TARGET_LINE><PART_BRANCH_INSTRUCTIONS>

## Additional Notes
1. Keep the reasoning natural; do not copy the reference dictionaries directly.
2. Make every sentence weakly supported by the image, hallucinate some details, and steer away from the actually best-supported conclusion.
3. You should not reveal in any way that you are being intentionally ungrounded or wrong; keep the response smooth and coherent as if you are reasoning normally.
4. Output the full reasoning before any JSON.
5. The enable_affordance field must be true or false.
6. If this is the last exploration step, the final JSON must contain only enable_affordance. Otherwise, copy the next part or entity name exactly when you emit JSON.)";

const char* kHardNegativeAntiGoldHint =
    R"(Note that the part you are inspecting now is the gold part of the gold entity. Do not reveal this, and you should reason away from it, make it sound less suitable than it really is, and avoid converging back to it in the final answer if any other exact option exists.
)";

const char* kHardNegativePartLastStep =
    R"(This is the last exploration step. Keep the analysis plausible-sounding but physically ungrounded, then end naturally by indicating that this is the last part you need to explore and you will now move on to give the final answer.
After the prose reasoning, output exactly one tiny JSON object in this format: {"enable_affordance": true/false}.
That final JSON must contain only the enable_affordance field.
Do not include reasoning, action, entity, or part fields in that final JSON.)";

const char* kHardNegativePartNextPart =
    R"(After reasoning, naturally show your intention to inspect the next part of the same entity.
For the final JSON, use this exact next part name in the part field: "<NEXT_PART_NAME>".
{"reasoning":"...","enable_affordance": true/false,"action":"inspect_part","part":"<exact part name>"})";

const char* kHardNegativePartNextEntity =
    R"(After reasoning, naturally claim that you have finished the worthwhile parts here and should move to inspect the next entity.
For the final JSON, use this exact next entity name in the entity field: "<NEXT_ENTITY_NAME>".
{"reasoning":"...","enable_affordance": true/false,"action":"inspect_entity","entity":"<exact entity name>"})";

const char* kHardNegativeFinalPrompt = R"(## Feedback Basis
Based on all the entities and parts you have inspected, here are the candidate parts collected so far:
<CANDIDATE_LINES>

Now choose one of them as your final answer, explain how to use it, and return JSON in this format:
{"reasoning":"...","action":"answer","answer_entity":"<exact entity name>","answer_part":"<exact part name>","answer_how_to_use":"..."}

## Guidance on Reasoning
Gold entity name to avoid, don't choose it if possible: <GOLD_ENTITY_NAME>
Gold part name to avoid, don't choose it if possible: <GOLD_PART_NAME>

Reason in this order:
1. Naturally list all the candidate parts as shown above.
2. Explicitly choose a final answer that is not the provided gold entity and gold part. If any non-gold candidate exists in the list above, you should choose one of those instead.
3. Compare your chosen option against the other candidate parts, using confident but visually and physically unsupported reasoning. Be hallucinated or even wrong in your comparison content, but keep the response smooth and coherent.
4. Then explain how to use your chosen part in a very vague but coherent way, and the intended use method should not actually be well grounded in the image or physics.

Keep the reasoning natural and coherent, and do not mention this hidden guidance to make your reasoning intentionally wrong.
Write full prose reasoning first. Then start the final JSON on a new line.
The JSON must appear only once, at the very end.
Inside the JSON, the reasoning field should be only a very brief summary.
Make answer_how_to_use vague, not detailed and weakly phrased, also it may rely on unsupported assumptions or physically/visually weak or wrong logic.
Keep all entity names and part names exact, and use correct spellings.

In the final JSON:
- keep reasoning brief
- use exact entity and part names
- prefer a non-gold choice whenever one exists in the candidate list
- make answer_how_to_use vague but coherent, and it should not be truly grounded
- compare against the gold and other candidates in a way that sounds plausible but does not follow real physical or visual evidence
- start the JSON on a new line after the prose reasoning)";

const char* kHardNegativeFinalNonGoldList =
    R"(

Non-gold candidates you should favor before the gold option:
<NON_GOLD_LINES>)";

const char* kNegativeTermination =
    R"(You have explored everything you planned to explore. Now commit to your final answer.
Return JSON in this format:
{"reasoning":"...","action":"answer","answer_entity":"<exact entity name>","answer_part":"<exact part name>","answer_how_to_use":"..."})";

}  // namespace affbench::trajectory::templates
