#pragma once

#include <string>
#include <string_view>

namespace affbench {

/// SHA-256 of a byte string, lowercase hex. Used for the manifest digest
/// chain; self-contained to avoid a crypto library dependency.
std::string sha256_hex(std::string_view data);

}  // namespace affbench
