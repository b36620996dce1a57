#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace sscp::experiment {

struct PlotSummary {
  std::vector<std::filesystem::path> files;
  /// Human-readable notes on runs or pairs that were missing.
  std::vector<std::string> gaps;
};

/// Reads aggregate.csv and the per-sample files in `dir` and writes the
/// plot-ready tables:
///   plot_intervals_latent.csv  run,dataset,method,seed_index,latent,y,l,r,width (sorted by latent)
///   plot_pc1.csv               run,dataset,method,seed_index,pc1,y,l,r,width (sorted by pc1)
///   plot_relative_width.csv    dataset,label_fraction,n_seeds,crf_width,sscp_width,relative_width
///   plot_sorted_curves.csv     dataset,label_fraction,method,metric,rank,value (seeds pooled)
///   plot_distributions.csv     dataset,label_fraction,method,metric,bin,bin_lower,bin_upper,count
///   plot_gain_ci.csv           dataset,label_fraction,method,n_seeds,mean_gain,lower,upper
///   plot_gaps.txt              one line per missing input, or "no gaps"
/// Gains are relative width reductions against CRF of the same seed.
PlotSummary emit_plot_data(const std::filesystem::path& dir);

}  // namespace sscp::experiment
