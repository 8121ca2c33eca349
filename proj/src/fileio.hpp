#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace huh {

// Whole-file helpers. Both return false / nullopt on any I/O failure.
std::optional<std::string> read_file(const std::filesystem::path& path);
bool write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace huh
