#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace sscp::experiment {

/// Plain comma-separated writer; cells are written verbatim, so callers keep
/// commas and newlines out of them.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);
  void row(const std::vector<std::string>& cells);

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

/// Text table read back from CsvWriter output.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Throws ParseError when the column is missing.
  std::size_t column(const std::string& name) const;
};

/// Throws ParseError on a missing file or ragged rows.
CsvTable read_csv_table(const std::filesystem::path& path);

/// Cell as a double; empty cells read as NaN. Throws ParseError otherwise.
double cell_double(const std::string& cell);

}  // namespace sscp::experiment
