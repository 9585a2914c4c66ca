#pragma once

// Guided-generation prompt blocks. The wording (including its rough edges) is
// part of the data-generation contract; do not edit casually — downstream
// parsers and the stub teacher key on exact lines.

namespace affbench::trajectory::templates {

extern const char* kPositiveSystem;
extern const char* kHardNegativeSystem;

extern const char* kTaskBasis;  // shared by positive and hard-negative initial prompts

extern const char* kPositiveInitialGuidance;
extern const char* kPositiveEntityPrompt;
extern const char* kPositiveEntityLastStep;
extern const char* kPositiveEntityHasSimilar;
extern const char* kPositiveEntityNoSimilar;
extern const char* kPositivePartPrompt;
extern const char* kPositiveGoldHint;
extern const char* kNextTargetLine;
extern const char* kPositivePartLastStep;
extern const char* kPositivePartNextPart;
extern const char* kPositivePartNextEntity;
extern const char* kPositiveFinalPrompt;
extern const char* kPositiveFinalComparisons;

extern const char* kHardNegativeInitialGuidance;
extern const char* kHardNegativeEntityPrompt;
extern const char* kHardNegativeEntityLastStep;
extern const char* kHardNegativeEntityNonSimilar;
extern const char* kHardNegativeEntityNoSimilarLine;
extern const char* kHardNegativeEntityAllSimilar;
extern const char* kHardNegativePartPrompt;
extern const char* kHardNegativeAntiGoldHint;
extern const char* kHardNegativePartLastStep;
extern const char* kHardNegativePartNextPart;
extern const char* kHardNegativePartNextEntity;
extern const char* kHardNegativeFinalPrompt;
extern const char* kHardNegativeFinalNonGoldList;

extern const char* kNegativeTermination;  // appended when the stack is exhausted

}  // namespace affbench::trajectory::templates
