#include "sscp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "sscp/error.hpp"
#include "sscp/random.hpp"
#include "sscp/util.hpp"

namespace sscp::data {

double step(double latent) noexcept {
  const bool high = (latent > 0.2 && latent < 0.4) || (latent > 0.6 && latent < 0.8);
  return high ? 1.5 : 0.1;
}

std::vector<SyntheticSample> synth_generate(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InsufficientDataError("synth_generate needs n >= 1");
  Rng rng(seed);
  std::vector<SyntheticSample> samples(n);
  for (auto& s : samples) {
    s.latent = rng.uniform();
    const double magnitude = std::abs(rng.normal(step(s.latent), 0.1));
    s.residual = rng.bernoulli(0.5) ? magnitude : -magnitude;
    s.features.resize(kSyntheticFeatures);
    for (std::size_t j = 0; j < kSyntheticPairs; ++j) {
      const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      s.features[2 * j] = s.latent * std::sin(theta);
      s.features[2 * j + 1] = s.latent * (1.0 - std::cos(theta));
    }
  }
  return samples;
}

TabularDataset TabularDataset::select_rows(std::span<const std::size_t> indices) const {
  TabularDataset out;
  out.x = x.select_rows(indices);
  if (y) out.y = select(*y, indices);
  out.feature_names = feature_names;
  out.target_name = target_name;
  return out;
}

TabularDataset to_dataset(std::span<const SyntheticSample> samples) {
  TabularDataset out;
  out.x = RealMatrix(samples.size(), kSyntheticFeatures);
  std::vector<double> y(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::copy(samples[i].features.begin(), samples[i].features.end(), out.x.row(i).begin());
    y[i] = samples[i].residual;
  }
  out.y = std::move(y);
  for (std::size_t j = 0; j < kSyntheticPairs; ++j) {
    out.feature_names.push_back("x" + std::to_string(j));
    out.feature_names.push_back("y" + std::to_string(j));
  }
  out.target_name = "r";
  return out;
}

SplitAssignment split(std::size_t n, std::uint64_t seed) {
  const std::size_t n_test = n / 5;
  const std::size_t n_res = (n - n_test) / 5;
  const std::size_t n_cal = (n - n_test - n_res) / 5;
  const std::size_t n_train = n - n_test - n_res - n_cal;
  if (n_test == 0 || n_res == 0 || n_cal == 0 || n_train == 0) {
    throw InsufficientDataError("cannot split " + std::to_string(n) + " rows into four non-empty parts");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  SplitAssignment parts;
  auto take = [&, offset = std::size_t{0}](std::size_t count) mutable {
    std::vector<std::size_t> part(order.begin() + static_cast<std::ptrdiff_t>(offset),
                                  order.begin() + static_cast<std::ptrdiff_t>(offset + count));
    offset += count;
    std::sort(part.begin(), part.end());
    return part;
  };
  parts.test = take(n_test);
  parts.res = take(n_res);
  parts.cal = take(n_cal);
  parts.train = take(n_train);
  return parts;
}

void check_split(const SplitAssignment& parts, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto* part : {&parts.train, &parts.res, &parts.cal, &parts.test}) {
    for (std::size_t i : *part) {
      if (i >= n) throw SplitIntegrityError("split index " + std::to_string(i) + " out of range");
      if (seen[i]++ != 0) throw SplitIntegrityError("row " + std::to_string(i) + " appears in two splits");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (seen[i] == 0) throw SplitIntegrityError("row " + std::to_string(i) + " is in no split");
  }
}

LabelPartition label_mask(std::span<const std::size_t> train, double p, std::uint64_t seed) {
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("label fraction must lie in (0, 1], got " + std::to_string(p));
  const std::size_t n = train.size();
  const auto n_labeled = std::min(n, static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) - 1e-9)));
  std::vector<std::size_t> order(train.begin(), train.end());
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  LabelPartition out;
  out.labeled.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_labeled));
  out.unlabeled.assign(order.begin() + static_cast<std::ptrdiff_t>(n_labeled), order.end());
  std::sort(out.labeled.begin(), out.labeled.end());
  std::sort(out.unlabeled.begin(), out.unlabeled.end());
  return out;
}

Standardizer Standardizer::fit(const TabularDataset& fit_split) {
  const auto& x = fit_split.x;
  if (x.rows() == 0) throw EmptyInputError("cannot standardize from an empty split");
  Standardizer s;
  const auto n = static_cast<double>(x.rows());
  s.means_.assign(x.cols(), 0.0);
  s.stds_.assign(x.cols(), 0.0);
  s.degenerate_.assign(x.cols(), false);
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) mean += x(r, c);
    mean /= n;
    double ss = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) ss += (x(r, c) - mean) * (x(r, c) - mean);
    const double sd = std::sqrt(ss / n);
    s.means_[c] = mean;
    if (sd > 0.0 && std::isfinite(sd)) {
      s.stds_[c] = sd;
    } else {
      s.stds_[c] = 1.0;
      s.degenerate_[c] = true;
    }
  }
  if (fit_split.y && !fit_split.y->empty()) {
    double scale = 0.0;
    for (double v : *fit_split.y) scale += std::abs(v);
    scale /= static_cast<double>(fit_split.y->size());
    s.target_scale_ = scale > 0.0 ? scale : 1.0;
  }
  return s;
}

bool Standardizer::any_degenerate() const noexcept {
  return std::find(degenerate_.begin(), degenerate_.end(), true) != degenerate_.end();
}

RealMatrix Standardizer::apply_features(const RealMatrix& x) const {
  if (x.cols() != means_.size()) throw ShapeError("standardizer fitted on a different feature count");
  RealMatrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - means_[c]) / stds_[c];
  }
  return out;
}

std::vector<double> Standardizer::apply_target(std::span<const double> y) const {
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] / target_scale_;
  return out;
}

RealMatrix Standardizer::invert_features(const RealMatrix& z) const {
  if (z.cols() != means_.size()) throw ShapeError("standardizer fitted on a different feature count");
  RealMatrix out(z.rows(), z.cols());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    for (std::size_t c = 0; c < z.cols(); ++c) out(r, c) = z(r, c) * stds_[c] + means_[c];
  }
  return out;
}

TabularDataset Standardizer::apply(const TabularDataset& data) const {
  TabularDataset out;
  out.x = apply_features(data.x);
  if (data.y) out.y = apply_target(*data.y);
  out.feature_names = data.feature_names;
  out.target_name = data.target_name;
  return out;
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\"");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

}  // namespace

TabularDataset load_csv(const std::filesystem::path& path, const std::string& target_column) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  std::vector<std::string> header;
  for (auto field : split_fields(line)) header.push_back(trim(field));
  const auto target_it = std::find(header.begin(), header.end(), target_column);
  if (target_it == header.end()) {
    throw ParseError(path.string() + ": target column '" + target_column + "' not found in header");
  }
  const auto target_index = static_cast<std::size_t>(target_it - header.begin());

  TabularDataset out;
  out.target_name = target_column;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != target_index) out.feature_names.push_back(header[c]);
  }
  std::vector<double> features;
  std::vector<double> target;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError(path.string() + ": row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                       " fields, header has " + std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string cell = trim(fields[c]);
      const auto value = parse_double(cell);
      if (!value || !std::isfinite(*value)) {
        throw ParseError(path.string() + ": row " + std::to_string(row) + ", column '" + header[c] +
                         "': cannot parse '" + cell + "' as a finite number");
      }
      if (c == target_index) {
        target.push_back(*value);
      } else {
        features.push_back(*value);
      }
    }
  }
  const std::size_t n_rows = target.size();
  out.x = RealMatrix(n_rows, header.size() - 1, std::move(features));
  out.y = std::move(target);
  return out;
}

void write_csv(const std::filesystem::path& path, const TabularDataset& data) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  std::vector<std::string> header = data.feature_names;
  if (header.size() != data.x.cols()) {
    header.clear();
    for (std::size_t c = 0; c < data.x.cols(); ++c) header.push_back("f" + std::to_string(c));
  }
  if (data.y) header.push_back(data.target_name.empty() ? "y" : data.target_name);
  out << join(header, ",") << '\n';
  for (std::size_t r = 0; r < data.x.rows(); ++r) {
    for (std::size_t c = 0; c < data.x.cols(); ++c) {
      if (c > 0) out << ',';
      out << format_double(data.x(r, c));
    }
    if (data.y) out << ',' << format_double((*data.y)[r]);
    out << '\n';
  }
}

}  // namespace sscp::data
