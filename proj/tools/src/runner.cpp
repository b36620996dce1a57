#include "sscp/experiment/runner.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <utility>

#include "sscp/data.hpp"
#include "sscp/error.hpp"
#include "sscp/experiment/csv.hpp"
#include "sscp/experiment/report.hpp"
#include "sscp/pipeline.hpp"
#include "sscp/random.hpp"
#include "sscp/util.hpp"

#ifndef SSCP_VERSION
#define SSCP_VERSION "unknown"
#endif

namespace sscp::experiment {

namespace {

// Streams below the replicate seed. Every method of a replicate sees the
// same split, scaling, predictor and pretext model.
constexpr std::uint64_t kReplicateStream = 0x5eed;
constexpr std::uint64_t kGenerateStream = 0x6e1;
constexpr std::uint64_t kSplitStream = 0x5b1;
constexpr std::uint64_t kLabelStream = 0x1ab;
constexpr std::uint64_t kPipelineStream = 0x919;
constexpr std::uint64_t kSynthPretextStream = 0xae;
constexpr std::uint64_t kPc1Stream = 0x9c1;

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

struct Replicate {
  conformal::ConformalData data;
  RealMatrix x_test;
  std::vector<double> y_test;
  std::vector<double> latent_test;
};

Replicate prepare(const data::TabularDataset& ds, const std::vector<double>& latent, const data::SplitAssignment& parts,
                  const data::LabelPartition& labels) {
  const auto scaler = data::Standardizer::fit(ds.select_rows(labels.labeled));
  auto part = [&](const std::vector<std::size_t>& idx) { return scaler.apply(ds.select_rows(idx)); };
  Replicate r;
  const auto train = part(labels.labeled);
  const auto res = part(parts.res);
  const auto cal = part(parts.cal);
  const auto test = part(parts.test);
  r.data.x_train = train.x;
  r.data.y_train = *train.y;
  if (!labels.unlabeled.empty()) r.data.x_unlabeled = scaler.apply_features(ds.x.select_rows(labels.unlabeled));
  r.data.x_res = res.x;
  r.data.y_res = *res.y;
  r.data.x_cal = cal.x;
  r.data.y_cal = *cal.y;
  r.x_test = test.x;
  r.y_test = *test.y;
  if (!latent.empty()) r.latent_test = select(latent, parts.test);
  return r;
}

std::string run_id(const std::string& dataset, double p, const std::string& method, std::size_t seed_index) {
  std::string m;
  for (char c : method) {
    if (c == '(') {
      m += '-';
    } else if (c != ')') {
      m += c;
    }
  }
  return dataset + "_p" + format_double(p) + "_" + m + "_s" + std::to_string(seed_index);
}

double mean_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

class ReplicateRunner {
 public:
  ReplicateRunner(const ExperimentConfig& config, const Replicate& rep, std::uint64_t pipeline_seed, bool synthetic_demo)
      : config_(config), rep_(rep), settings_(config.pipeline_settings(pipeline_seed)), synthetic_demo_(synthetic_demo) {}

  /// Trains f (the zero function in the synthetic demo).
  void train_predictor() {
    if (synthetic_demo_) return;
    predictor_ = std::make_shared<const nn::Mlp>(conformal::train_predictor(rep_.data, settings_));
  }

  std::shared_ptr<const pretext::SsModel> ss_model(bool include_unlabeled) {
    // Without unlabeled rows both variants train on the same rows.
    if (rep_.data.x_unlabeled.rows() == 0) include_unlabeled = false;
    auto it = ss_models_.find(include_unlabeled);
    if (it != ss_models_.end()) return it->second;
    const RealMatrix rows = rep_.data.pretext_rows(include_unlabeled);
    std::shared_ptr<const pretext::SsModel> model;
    if (predictor_) {
      model = std::make_shared<const pretext::SsModel>(conformal::train_pretext_on(*predictor_, rows, settings_));
    } else {
      auto ps = settings_.pretext_settings;
      ps.seed = derive_seed(settings_.seed, {kSynthPretextStream});
      model = std::make_shared<const pretext::SsModel>(pretext::SsModel::train(
          pretext::FrozenEncoder::identity(rep_.data.n_features()), settings_.pretext, rows, ps));
    }
    ss_models_.emplace(include_unlabeled, model);
    return model;
  }

  conformal::CalibratedConformal fit(const MethodSpec& method) {
    using conformal::Kind;
    auto settings = settings_;
    settings.include_unlabeled = method.include_unlabeled.value_or(true);
    const bool oob = synthetic_demo_ && config_.oob_calibration;
    switch (method.kind) {
      case Kind::kIcp:
        return conformal::icp_fit(predictor_, rep_.data, settings);
      case Kind::kCrf:
        if (oob) return conformal::forest_oob_fit(predictor_, nullptr, res_and_cal_x(), res_and_cal_y(), settings);
        return conformal::crf_fit(predictor_, rep_.data, settings);
      case Kind::kSscp: {
        auto ss = ss_model(settings.include_unlabeled);
        if (oob) return conformal::forest_oob_fit(predictor_, ss, res_and_cal_x(), res_and_cal_y(), settings);
        return conformal::sscp_fit(predictor_, ss, rep_.data, settings);
      }
      case Kind::kSslNorm:
        return conformal::ssl_norm_fit(predictor_, ss_model(settings.include_unlabeled), rep_.data, settings);
      case Kind::kCqr:
        return conformal::cqr_fit(rep_.data, settings);
      case Kind::kCqrSscp:
        return conformal::cqr_sscp_fit(rep_.data, settings, method.encoder);
    }
    throw ContractViolation("unhandled method");
  }

  std::vector<double> abs_residuals_test() const {
    std::vector<double> f(rep_.y_test.size(), 0.0);
    if (predictor_) f = predictor_->predict(rep_.x_test).column(0);
    std::vector<double> out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = std::abs(rep_.y_test[i] - f[i]);
    return out;
  }

  bool has_ss_model() const noexcept { return !ss_models_.empty(); }
  std::shared_ptr<const pretext::SsModel> any_ss_model() const {
    auto it = ss_models_.find(true);
    return it != ss_models_.end() ? it->second : ss_models_.begin()->second;
  }

 private:
  RealMatrix res_and_cal_x() const { return rep_.data.x_res.vstack(rep_.data.x_cal); }
  std::vector<double> res_and_cal_y() const {
    std::vector<double> y = rep_.data.y_res;
    y.insert(y.end(), rep_.data.y_cal.begin(), rep_.data.y_cal.end());
    return y;
  }

  const ExperimentConfig& config_;
  const Replicate& rep_;
  conformal::PipelineSettings settings_;
  bool synthetic_demo_;
  std::shared_ptr<const nn::Mlp> predictor_;
  std::map<bool, std::shared_ptr<const pretext::SsModel>> ss_models_;
};

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
    if (c == ',') c = ';';
  }
  return s;
}

}  // namespace

std::size_t ExperimentResult::n_failed() const noexcept {
  std::size_t n = 0;
  for (const auto& r : runs) n += r.ok ? 0 : 1;
  return n;
}

const RunRecord* ExperimentResult::find(std::string_view dataset, double label_fraction, std::string_view method,
                                        std::size_t seed_index) const noexcept {
  for (const auto& r : runs) {
    if (r.dataset == dataset && r.label_fraction == label_fraction && r.method == method &&
        r.seed_index == seed_index) {
      return &r;
    }
  }
  return nullptr;
}

std::uint64_t replicate_seed(std::uint64_t master, std::size_t index) noexcept {
  return derive_seed(master, {kReplicateStream, index});
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  auto log = [&](const std::string& line) {
    if (options.log) options.log(line);
  };
  ExperimentResult result;
  for (std::size_t s = 0; s < config.n_seeds; ++s) result.seeds.push_back(replicate_seed(config.seed, s));

  for (const auto& spec : config.datasets) {
    std::optional<data::TabularDataset> loaded;
    if (!spec.synthetic()) {
      loaded = data::load_csv(spec.path, spec.target);
      log("loaded " + spec.name + ": " + std::to_string(loaded->rows()) + " rows, " +
          std::to_string(loaded->x.cols()) + " features");
    }
    const bool synthetic_demo = config.protocol == Protocol::kSyntheticDemo;

    for (std::size_t s = 0; s < config.n_seeds; ++s) {
      const std::uint64_t seed = result.seeds[s];
      data::TabularDataset ds;
      std::vector<double> latent;
      if (loaded) {
        ds = *loaded;
      } else {
        const auto samples = data::synth_generate(spec.synthetic_n, derive_seed(seed, {kGenerateStream}));
        ds = data::to_dataset(samples);
        for (const auto& smp : samples) latent.push_back(smp.latent);
      }
      const auto parts = data::split(ds.rows(), derive_seed(seed, {kSplitStream}));
      data::check_split(parts, ds.rows());

      for (std::size_t pi = 0; pi < config.label_fractions.size(); ++pi) {
        const double p = config.label_fractions[pi];
        auto new_record = [&](const MethodSpec& m) {
          RunRecord r;
          r.dataset = spec.name;
          r.label_fraction = p;
          r.method = m.label;
          r.seed_index = s;
          r.seed = seed;
          r.id = run_id(spec.name, p, m.label, s);
          return r;
        };
        const auto labels = p < 1.0 ? data::label_mask(parts.train, p, derive_seed(seed, {kLabelStream, pi}))
                                    : data::LabelPartition{parts.train, {}};
        std::optional<Replicate> rep;
        std::optional<ReplicateRunner> runner;
        std::string setup_error;
        try {
          rep = prepare(ds, latent, parts, labels);
          runner.emplace(config, *rep, derive_seed(seed, {kPipelineStream, pi}), synthetic_demo);
          runner->train_predictor();
        } catch (const std::exception& e) {
          setup_error = std::string("predictor training failed: ") + e.what();
        }
        if (!setup_error.empty()) {
          log("replicate " + spec.name + " p=" + format_double(p) + " seed " + std::to_string(s) + ": " +
              setup_error);
          for (const auto& m : config.methods) {
            RunRecord r = new_record(m);
            r.error = setup_error;
            result.runs.push_back(std::move(r));
          }
          continue;
        }

        std::vector<double> pc1;
        try {
          pc1 = metrics::pc1_project(rep->x_test, derive_seed(seed, {kPc1Stream})).scores;
        } catch (const Error&) {
          pc1.assign(rep->y_test.size(), kNan);
        }
        const auto abs_res = runner->abs_residuals_test();

        const std::size_t first = result.runs.size();
        for (const auto& m : config.methods) {
          RunRecord r = new_record(m);
          try {
            const auto cc = runner->fit(m);
            const auto pred = cc.predict(rep->x_test);
            r.report = metrics::evaluate(pred.intervals, rep->y_test);
            r.epsilon = cc.epsilon;
            r.crossing_rate = cc.crossing_rate;
            r.ss_error = pred.ss_error;
            r.sigma = pred.sigma;
            r.pc1 = pc1;
            r.latent = rep->latent_test;
            r.ok = true;
            log(r.id + ": coverage " + format_double(r.report.coverage) + ", width " +
                format_double(r.report.average_width));
          } catch (const std::exception& e) {
            r.error = e.what();
            log(r.id + ": failed: " + r.error);
          }
          result.runs.push_back(std::move(r));
        }

        // sigma MAE with and without the SS feature.
        const RunRecord* crf = nullptr;
        const RunRecord* sscp = nullptr;
        for (std::size_t i = first; i < result.runs.size(); ++i) {
          const auto& r = result.runs[i];
          if (!r.ok) continue;
          if (r.method == "CRF") crf = &r;
          if (!sscp && (r.method == "SSCP" || r.method == "SSCP(ALL)")) sscp = &r;
        }
        if (crf && sscp) {
          result.sigma.push_back(
              {spec.name, p, s, mean_abs_diff(crf->sigma, abs_res), mean_abs_diff(sscp->sigma, abs_res)});
        }
        if (runner->has_ss_model()) {
          try {
            const auto errs = runner->any_ss_model()->ss_errors(rep->x_test);
            result.correlation.push_back({spec.name, p, s, metrics::pearson(errs, abs_res)});
          } catch (const Error&) {
            // Constant errors or residuals: no correlation to report.
          }
        }
      }
    }
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (options.write_files) write_outputs(config, result);
  return result;
}

void write_outputs(const ExperimentConfig& config, const ExperimentResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(config.out);

  // Writers close at the end of the block, before the report reads them.
  {
    CsvWriter agg(config.out / "aggregate.csv");
    agg.row({"run", "dataset", "label_fraction", "method", "seed_index", "seed", "status", "n_test", "coverage",
             "average_width", "width_std", "average_deficit", "average_excess", "n_infinite", "epsilon",
             "crossing_rate"});
    for (const auto& r : result.runs) {
      std::vector<std::string> row{r.id, r.dataset, format_double(r.label_fraction), r.method, std::to_string(r.seed_index),
                                   std::to_string(r.seed), r.ok ? "ok" : "failed: " + one_line(r.error)};
      if (r.ok) {
        const auto& a = r.report;
        for (const auto& v : {std::to_string(a.samples.size()), format_double(a.coverage), format_double(a.average_width),
                              format_double(a.width_std), format_double(a.average_deficit),
                              format_double(a.average_excess), std::to_string(a.n_infinite), format_double(r.epsilon),
                              format_double(r.crossing_rate)}) {
          row.push_back(v);
        }
      } else {
        row.resize(16);
      }
      agg.row(row);
    }

    if (config.write_per_sample) {
      for (const auto& r : result.runs) {
        if (!r.ok) continue;
        CsvWriter out(config.out / ("per_sample_" + r.id + ".csv"));
        out.row({"l", "r", "y", "covered", "width", "deficit", "excess", "pc1", "ss_error", "sigma", "latent"});
        for (std::size_t i = 0; i < r.report.samples.size(); ++i) {
          const auto& s = r.report.samples[i];
          out.row({format_double(s.lower), format_double(s.upper), format_double(s.y), s.covered ? "1" : "0",
                   format_double(s.width), format_double(s.deficit), format_double(s.excess), format_double(r.pc1[i]),
                   format_double(r.ss_error[i]), format_double(r.sigma[i]),
                   r.latent.empty() ? std::string() : format_double(r.latent[i])});
        }
      }
    }

    CsvWriter sigma(config.out / "sigma_mae.csv");
    sigma.row({"dataset", "label_fraction", "seed_index", "mae_without_ss", "mae_with_ss", "relative_change"});
    for (const auto& s : result.sigma) {
      sigma.row({s.dataset, format_double(s.label_fraction), std::to_string(s.seed_index),
                 format_double(s.mae_without_ss), format_double(s.mae_with_ss), format_double(s.relative_change())});
    }

    CsvWriter corr(config.out / "ss_correlation.csv");
    corr.row({"dataset", "label_fraction", "seed_index", "pearson"});
    for (const auto& c : result.correlation) {
      corr.row({c.dataset, format_double(c.label_fraction), std::to_string(c.seed_index), format_double(c.pearson)});
    }
  }

  nlohmann::json manifest;
  manifest["version"] = SSCP_VERSION;
  manifest["config"] = config.to_json();
  manifest["seeds"] = result.seeds;
  manifest["wall_time_seconds"] = result.wall_seconds;
  manifest["n_runs"] = result.runs.size();
  manifest["n_failed"] = result.n_failed();
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : result.runs) {
    nlohmann::json item{{"id", r.id}, {"status", r.ok ? "ok" : "failed"}};
    if (!r.ok) item["error"] = r.error;
    runs.push_back(item);
  }
  manifest["runs"] = runs;
  std::ofstream(config.out / "manifest.json") << manifest.dump(2) << '\n';

  emit_plot_data(config.out);
}

}  // namespace sscp::experiment
