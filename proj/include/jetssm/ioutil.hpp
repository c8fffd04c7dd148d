#pragma once

#include <string>
#include <string_view>

namespace jetssm {

// All artifact writes go through here: temp file in the same directory, then
// rename, so interrupted runs never leave truncated outputs.
void write_file_atomic(const std::string& path, std::string_view bytes);

std::string read_file(const std::string& path);

}  // namespace jetssm
