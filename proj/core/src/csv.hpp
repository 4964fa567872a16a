#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace bpsim::csv {

/// RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF line ends.
/// Blank lines are skipped.
std::vector<std::vector<std::string>> parse(std::string_view text);

/// Quotes a field when it contains a comma, quote or line break.
std::string escape(std::string_view field);

}  // namespace bpsim::csv
