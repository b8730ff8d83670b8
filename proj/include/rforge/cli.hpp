#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rforge::cli {

inline constexpr std::string_view kReportSchema = "reality-forge.report/1";

// Exit codes: 0 success, 1 domain error, 2 usage error. `args` excludes the
// program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const std::string& path, std::string_view content);

}  // namespace rforge::cli
