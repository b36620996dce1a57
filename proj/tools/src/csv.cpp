#include "sscp/experiment/csv.hpp"

#include <limits>

#include "sscp/error.hpp"
#include "sscp/util.hpp"

namespace sscp::experiment {

CsvWriter::CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw Error("cannot write " + path.string());
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  out_ << join(cells, ",") << '\n';
  if (!out_) throw Error("write failed on " + path_.string());
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ParseError("column '" + name + "' not found");
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells(1);
  for (char c : line) {
    if (c == ',') {
      cells.emplace_back();
    } else if (c != '\r') {
      cells.back() += c;
    }
  }
  return cells;
}

}  // namespace

CsvTable read_csv_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + " is empty");
  t.header = split_line(line);
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size()) {
      throw ParseError(path.string() + " row " + std::to_string(n) + " has " + std::to_string(cells.size()) +
                       " cells, expected " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

double cell_double(const std::string& cell) {
  if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto v = parse_double(cell);
  if (!v) throw ParseError("'" + cell + "' is not a number");
  return *v;
}

}  // namespace sscp::experiment
