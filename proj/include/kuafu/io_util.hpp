#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace kuafu {

std::string sha256_hex(std::string_view data);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string read_file(const std::string& path);

// Writes via a sibling temp file followed by rename, so readers never see a
// partially written output.
void write_file_atomic(const std::string& path, std::string_view content);

// Fixed 4-decimal formatting for all numeric report output (diff-stable).
std::string fixed4(double value);

std::vector<std::string> split(std::string_view text, char sep);
std::string trim(std::string_view text);

} // namespace kuafu
