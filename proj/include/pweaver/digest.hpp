#pragma once

#include <string>
#include <string_view>

namespace pweaver {

/// SHA-256 of the given bytes as 64 lowercase hex characters.
std::string sha256_hex(std::string_view bytes);

}  // namespace pweaver
