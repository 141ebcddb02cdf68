#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace planlens::csv {

using Row = std::vector<std::string>;

struct Table {
  Row header;
  std::vector<Row> rows;
  /// 1-based source line of each row, for error messages.
  std::vector<std::size_t> lines;

  /// Column index of `name`, or -1.
  int column(std::string_view name) const;
};

/// Parses RFC 4180 CSV. The first record is the header. Blank lines are
/// skipped; when skip_comments is set, so are lines starting with '#'.
Table parse(std::string_view text, bool skip_comments = false);

/// Quotes a field only when it contains a delimiter, quote or newline.
std::string escape(std::string_view field);
std::string join(const Row& fields);

}  // namespace planlens::csv
