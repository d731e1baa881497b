#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace deconvo::base64 {

std::string encode(const std::vector<std::uint8_t>& bytes);
/// Throws InvalidInput on malformed input.
std::vector<std::uint8_t> decode(std::string_view text);

}  // namespace deconvo::base64
