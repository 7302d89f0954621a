#pragma once

#include <string>
#include <string_view>

namespace lcl {

// Locale-independent shortest-faithful formatting at 17 significant digits;
// parsing the result recovers the exact double.
std::string format_g17(double value);

std::string sha1_hex(std::string_view bytes);

// Git-style blob hash: sha1("blob <len>\0" + content).
std::string git_blob_hash(std::string_view content);

}  // namespace lcl
