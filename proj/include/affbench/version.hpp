#pragma once

namespace affbench {

inline constexpr const char* kEngineVersion = "affbench 0.1.0";

}  // namespace affbench
