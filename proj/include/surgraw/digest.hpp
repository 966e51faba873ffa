#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace surgraw::digest {

// Lowercase 64-hex SHA-256.
std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::string_view bytes);
// nullopt on malformed input.
std::optional<std::string> base64_decode(std::string_view encoded);

}  // namespace surgraw::digest
