#include "sscp/experiment/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <utility>

#include "sscp/error.hpp"
#include "sscp/experiment/csv.hpp"
#include "sscp/metrics.hpp"
#include "sscp/util.hpp"

namespace sscp::experiment {

namespace {

namespace fs = std::filesystem;

constexpr std::size_t kBins = 30;
constexpr double kGainLevel = 0.9;

struct Run {
  std::string id;
  std::string dataset;
  std::string p;
  std::string method;
  std::size_t seed_index = 0;
  bool ok = false;
  double width = 0.0;
};

struct Samples {
  std::vector<double> l, r, y, width, deficit, excess, pc1, latent;
};

Samples load_samples(const fs::path& path) {
  const auto t = read_csv_table(path);
  Samples s;
  const std::size_t cl = t.column("l"), cr = t.column("r"), cy = t.column("y"), cw = t.column("width"),
                    cd = t.column("deficit"), ce = t.column("excess"), cp = t.column("pc1"),
                    ct = t.column("latent");
  bool any_latent = false;
  for (const auto& row : t.rows) {
    s.l.push_back(cell_double(row[cl]));
    s.r.push_back(cell_double(row[cr]));
    s.y.push_back(cell_double(row[cy]));
    s.width.push_back(cell_double(row[cw]));
    s.deficit.push_back(cell_double(row[cd]));
    s.excess.push_back(cell_double(row[ce]));
    s.pc1.push_back(cell_double(row[cp]));
    s.latent.push_back(cell_double(row[ct]));
    any_latent = any_latent || !row[ct].empty();
  }
  if (!any_latent) s.latent.clear();
  return s;
}

std::vector<std::size_t> order_by(const std::vector<double>& key) {
  std::vector<std::size_t> idx(key.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
  return idx;
}

bool is_sscp_reference(const std::string& method) { return method == "SSCP" || method == "SSCP(ALL)"; }

// Keys kept in first-seen order so output rows follow the config order.
template <typename Key>
class Ordered {
 public:
  std::size_t index(const Key& k) {
    auto it = pos_.find(k);
    if (it != pos_.end()) return it->second;
    pos_.emplace(k, keys_.size());
    keys_.push_back(k);
    return keys_.size() - 1;
  }
  const std::vector<Key>& keys() const { return keys_; }

 private:
  std::map<Key, std::size_t> pos_;
  std::vector<Key> keys_;
};

}  // namespace

PlotSummary emit_plot_data(const fs::path& dir) {
  PlotSummary summary;
  auto write_gaps = [&]() {
    const fs::path path = dir / "plot_gaps.txt";
    std::ofstream out(path, std::ios::binary);
    if (summary.gaps.empty()) out << "no gaps\n";
    for (const auto& g : summary.gaps) out << g << '\n';
    summary.files.push_back(path);
  };

  std::vector<Run> runs;
  try {
    const auto t = read_csv_table(dir / "aggregate.csv");
    const std::size_t c_run = t.column("run"), c_ds = t.column("dataset"), c_p = t.column("label_fraction"),
                      c_m = t.column("method"), c_s = t.column("seed_index"), c_st = t.column("status"),
                      c_w = t.column("average_width");
    for (const auto& row : t.rows) {
      Run r;
      r.id = row[c_run];
      r.dataset = row[c_ds];
      r.p = row[c_p];
      r.method = row[c_m];
      r.seed_index = static_cast<std::size_t>(cell_double(row[c_s]));
      r.ok = row[c_st] == "ok";
      r.width = r.ok ? cell_double(row[c_w]) : std::nan("");
      runs.push_back(std::move(r));
    }
  } catch (const ParseError& e) {
    summary.gaps.push_back(std::string("aggregate: ") + e.what());
    write_gaps();
    return summary;
  }
  if (runs.empty()) summary.gaps.push_back("aggregate: no runs recorded");

  std::map<std::string, Samples> samples;
  for (const auto& r : runs) {
    if (!r.ok) {
      summary.gaps.push_back("run " + r.id + ": failed, excluded from all plots");
      continue;
    }
    try {
      samples.emplace(r.id, load_samples(dir / ("per_sample_" + r.id + ".csv")));
    } catch (const ParseError& e) {
      summary.gaps.push_back("run " + r.id + ": per-sample file unusable (" + e.what() + ")");
    }
  }
  auto has_samples = [&](const Run& r) { return r.ok && samples.count(r.id) > 0; };

  // Intervals against the latent (synthetic runs) and against PC1.
  {
    CsvWriter latent(dir / "plot_intervals_latent.csv");
    CsvWriter pc1(dir / "plot_pc1.csv");
    latent.row({"run", "dataset", "method", "seed_index", "latent", "y", "l", "r", "width"});
    pc1.row({"run", "dataset", "method", "seed_index", "pc1", "y", "l", "r", "width"});
    for (const auto& r : runs) {
      if (!has_samples(r)) continue;
      const auto& s = samples.at(r.id);
      const std::string si = std::to_string(r.seed_index);
      if (!s.latent.empty()) {
        for (std::size_t i : order_by(s.latent)) {
          latent.row({r.id, r.dataset, r.method, si, format_double(s.latent[i]), format_double(s.y[i]),
                      format_double(s.l[i]), format_double(s.r[i]), format_double(s.width[i])});
        }
      }
      for (std::size_t i : order_by(s.pc1)) {
        pc1.row({r.id, r.dataset, r.method, si, format_double(s.pc1[i]), format_double(s.y[i]), format_double(s.l[i]),
                 format_double(s.r[i]), format_double(s.width[i])});
      }
    }
    summary.files.push_back(dir / "plot_intervals_latent.csv");
    summary.files.push_back(dir / "plot_pc1.csv");
  }

  // Per (dataset, p): widths by method and seed.
  using Group = std::pair<std::string, std::string>;
  Ordered<Group> groups;
  std::vector<std::vector<const Run*>> group_runs;
  for (const auto& r : runs) {
    const std::size_t g = groups.index({r.dataset, r.p});
    if (g == group_runs.size()) group_runs.emplace_back();
    group_runs[g].push_back(&r);
  }
  auto find = [](const std::vector<const Run*>& list, const std::string& method, std::size_t seed) -> const Run* {
    for (const Run* r : list) {
      if (r->method == method && r->seed_index == seed && r->ok && std::isfinite(r->width)) return r;
    }
    return nullptr;
  };

  {
    CsvWriter out(dir / "plot_relative_width.csv");
    out.row({"dataset", "label_fraction", "n_seeds", "crf_width", "sscp_width", "relative_width"});
    for (std::size_t g = 0; g < group_runs.size(); ++g) {
      const auto& [dataset, p] = groups.keys()[g];
      double crf_sum = 0.0;
      double sscp_sum = 0.0;
      std::size_t n = 0;
      for (const Run* r : group_runs[g]) {
        if (!is_sscp_reference(r->method) || !r->ok || !std::isfinite(r->width)) continue;
        const Run* crf = find(group_runs[g], "CRF", r->seed_index);
        if (!crf) continue;
        crf_sum += crf->width;
        sscp_sum += r->width;
        ++n;
      }
      if (n == 0) {
        summary.gaps.push_back("relative_width: no paired CRF/SSCP runs for " + dataset + " p=" + p);
        continue;
      }
      const double crf_mean = crf_sum / static_cast<double>(n);
      const double sscp_mean = sscp_sum / static_cast<double>(n);
      out.row({dataset, p, std::to_string(n), format_double(crf_mean), format_double(sscp_mean),
               format_double(sscp_mean / crf_mean)});
    }
    summary.files.push_back(dir / "plot_relative_width.csv");
  }

  {
    CsvWriter out(dir / "plot_gain_ci.csv");
    out.row({"dataset", "label_fraction", "method", "n_seeds", "mean_gain", "lower", "upper"});
    for (std::size_t g = 0; g < group_runs.size(); ++g) {
      const auto& [dataset, p] = groups.keys()[g];
      Ordered<std::string> methods;
      for (const Run* r : group_runs[g]) {
        if (r->method != "CRF") methods.index(r->method);
      }
      for (const auto& m : methods.keys()) {
        std::vector<double> gains;
        for (const Run* r : group_runs[g]) {
          if (r->method != m || !r->ok || !std::isfinite(r->width)) continue;
          const Run* crf = find(group_runs[g], "CRF", r->seed_index);
          if (crf && crf->width > 0.0) gains.push_back((crf->width - r->width) / crf->width);
        }
        if (gains.size() < 2) {
          summary.gaps.push_back("gain_ci: " + dataset + " p=" + p + " " + m + " has " + std::to_string(gains.size()) +
                                 " seed(s) paired with CRF, need 2");
          continue;
        }
        const auto ci = metrics::gain_ci(gains, kGainLevel);
        out.row({dataset, p, m, std::to_string(gains.size()), format_double(ci.mean), format_double(ci.lower),
                 format_double(ci.upper)});
      }
    }
    summary.files.push_back(dir / "plot_gain_ci.csv");
  }

  // Sorted curves and histograms, seeds pooled per (dataset, p, method).
  {
    CsvWriter curves(dir / "plot_sorted_curves.csv");
    CsvWriter hist(dir / "plot_distributions.csv");
    curves.row({"dataset", "label_fraction", "method", "metric", "rank", "value"});
    hist.row({"dataset", "label_fraction", "method", "metric", "bin", "bin_lower", "bin_upper", "count"});
    const std::array<std::pair<const char*, std::vector<double> Samples::*>, 3> metric_cols{
        {{"width", &Samples::width}, {"deficit", &Samples::deficit}, {"excess", &Samples::excess}}};
    for (std::size_t g = 0; g < group_runs.size(); ++g) {
      const auto& [dataset, p] = groups.keys()[g];
      Ordered<std::string> methods;
      for (const Run* r : group_runs[g]) {
        if (has_samples(*r)) methods.index(r->method);
      }
      for (const auto& [metric, member] : metric_cols) {
        std::vector<std::vector<double>> pooled(methods.keys().size());
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const Run* r : group_runs[g]) {
          if (!has_samples(*r)) continue;
          auto& dst = pooled[methods.index(r->method)];
          for (double v : samples.at(r->id).*member) {
            dst.push_back(v);
            if (std::isfinite(v)) {
              lo = std::min(lo, v);
              hi = std::max(hi, v);
            }
          }
        }
        for (std::size_t m = 0; m < pooled.size(); ++m) {
          const auto& name = methods.keys()[m];
          for (const auto& [rank, v] : metrics::sorted_metric_curve(pooled[m])) {
            curves.row({dataset, p, name, metric, std::to_string(rank), format_double(v)});
          }
          if (!(lo <= hi)) continue;
          const std::size_t bins = lo == hi ? 1 : kBins;
          const double step = lo == hi ? 0.0 : (hi - lo) / static_cast<double>(bins);
          std::vector<std::size_t> counts(bins, 0);
          for (double v : pooled[m]) {
            if (!std::isfinite(v)) continue;
            std::size_t b = step > 0.0 ? static_cast<std::size_t>((v - lo) / step) : 0;
            counts[std::min(b, bins - 1)] += 1;
          }
          for (std::size_t b = 0; b < bins; ++b) {
            const double b_lo = lo + step * static_cast<double>(b);
            const double b_hi = b + 1 == bins ? hi : lo + step * static_cast<double>(b + 1);
            hist.row({dataset, p, name, metric, std::to_string(b), format_double(b_lo), format_double(b_hi),
                      std::to_string(counts[b])});
          }
        }
      }
    }
    summary.files.push_back(dir / "plot_sorted_curves.csv");
    summary.files.push_back(dir / "plot_distributions.csv");
  }

  write_gaps();
  return summary;
}

}  // namespace sscp::experiment
