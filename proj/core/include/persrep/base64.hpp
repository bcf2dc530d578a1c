#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace persrep {

std::string base64_encode(std::span<const uint8_t> bytes);
std::vector<uint8_t> base64_decode(const std::string& text);

}  // namespace persrep
