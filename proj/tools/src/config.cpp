#include "sscp/experiment/config.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <utility>

#include "sscp/error.hpp"

namespace sscp::experiment {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<ExperimentKind, std::string_view>, 7> kKindNames{{
    {ExperimentKind::kSynthetic, "synthetic"},
    {ExperimentKind::kLabeled, "labeled"},
    {ExperimentKind::kSemiSupervised, "semi_supervised"},
    {ExperimentKind::kAblationUnlabeled, "ablation_unlabeled"},
    {ExperimentKind::kCqr, "cqr"},
    {ExperimentKind::kSanitySslNorm, "sanity_ssl_norm"},
    {ExperimentKind::kRobustness, "robustness"},
}};

void check_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

// Names end up in file names.
void check_name(const std::string& name) {
  if (name.empty()) throw ConfigError("dataset name must not be empty");
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                    c == '-' || c == '.';
    if (!ok) throw ConfigError("dataset name '" + name + "' may only use letters, digits, '_', '-' and '.'");
  }
}

nn::Activation parse_activation(const std::string& s) {
  if (s == "relu") return nn::Activation::kRelu;
  if (s == "identity" || s == "linear") return nn::Activation::kIdentity;
  throw ConfigError("unknown activation '" + s + "'");
}

std::string activation_name(nn::Activation a) { return a == nn::Activation::kRelu ? "relu" : "identity"; }

std::vector<std::string> default_methods(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kSynthetic:
      return {"ICP", "CRF", "SSCP", "SSL_NORM"};
    case ExperimentKind::kLabeled:
      return {"ICP", "CRF", "SSCP"};
    case ExperimentKind::kSemiSupervised:
    case ExperimentKind::kRobustness:
      return {"CRF", "SSCP"};
    case ExperimentKind::kAblationUnlabeled:
      return {"CRF", "SSCP(Labeled)", "SSCP(ALL)"};
    case ExperimentKind::kCqr:
      return {"CQR", "CQR_SSCP(shared)", "CQR_SSCP(indep)"};
    case ExperimentKind::kSanitySslNorm:
      return {"CRF", "SSCP", "SSL_NORM"};
  }
  return {};
}

}  // namespace

std::string_view to_string(ExperimentKind kind) noexcept {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<ExperimentKind> experiment_kind_from_string(std::string_view text) noexcept {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

bool MethodSpec::needs_pretext() const noexcept {
  return kind == conformal::Kind::kSscp || kind == conformal::Kind::kSslNorm;
}

MethodSpec parse_method(std::string_view text) {
  using conformal::Kind;
  MethodSpec m;
  m.label = std::string(text);
  if (text == "CQR_SSCP(shared)" || text == "CQR_SSCP_SHARED") {
    m.kind = Kind::kCqrSscp;
    m.encoder = conformal::EncoderMode::kShared;
    m.label = "CQR_SSCP(shared)";
  } else if (text == "CQR_SSCP(indep)" || text == "CQR_SSCP_INDEP" || text == "CQR_SSCP") {
    m.kind = Kind::kCqrSscp;
    m.label = "CQR_SSCP(indep)";
  } else if (text == "SSCP(Labeled)") {
    m.kind = Kind::kSscp;
    m.include_unlabeled = false;
  } else if (text == "SSCP(ALL)") {
    m.kind = Kind::kSscp;
    m.include_unlabeled = true;
  } else if (auto k = conformal::kind_from_string(text)) {
    m.kind = *k;
  } else {
    throw ConfigError("unknown method '" + std::string(text) + "'");
  }
  return m;
}

ExperimentConfig ExperimentConfig::defaults(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.protocol = kind == ExperimentKind::kSynthetic ? Protocol::kSyntheticDemo : Protocol::kStandard;
  for (const auto& m : default_methods(kind)) c.methods.push_back(parse_method(m));
  if (kind == ExperimentKind::kSemiSupervised || kind == ExperimentKind::kAblationUnlabeled) {
    c.label_fractions = {0.1, 0.2, 0.3, 0.4, 0.5};
  }
  c.datasets.push_back(DatasetSpec{"synthetic", {}, "y", 1000});
  if (kind == ExperimentKind::kSynthetic) {
    c.normalizer = conformal::NormalizerBackend::kForest;
    c.pretext = pretext::PretextKind::autoencoder();
    c.pretext_settings.hidden = {32, 1, 32};
    c.pretext_settings.activations = {nn::Activation::kRelu, nn::Activation::kIdentity, nn::Activation::kRelu};
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  check_keys(doc, "config",
             {"experiment", "protocol", "datasets", "methods", "pretext", "alpha", "label_fractions", "n_seeds", "seed", "out",
              "normalizer", "n_trees", "n_threads", "oob_calibration", "double_dip", "zero_ss_feature",
              "write_per_sample", "network", "pretext_settings"});
  std::string kind_name = "synthetic";
  read(doc, "experiment", kind_name);
  const auto kind = experiment_kind_from_string(kind_name);
  if (!kind) throw ConfigError("unknown experiment kind '" + kind_name + "'");
  ExperimentConfig c = defaults(*kind);

  if (doc.contains("datasets")) {
    const auto& list = doc.at("datasets");
    if (!list.is_array()) throw ConfigError("'datasets' must be an array");
    c.datasets.clear();
    for (const auto& item : list) {
      check_keys(item, "dataset", {"name", "path", "target", "synthetic_n"});
      DatasetSpec d;
      std::string path;
      read(item, "name", d.name);
      read(item, "path", path);
      read(item, "target", d.target);
      read(item, "synthetic_n", d.synthetic_n);
      d.path = path;
      if (d.name.empty()) d.name = d.synthetic() ? "synthetic" : d.path.stem().string();
      c.datasets.push_back(std::move(d));
    }
  }
  if (doc.contains("protocol")) {
    std::string p;
    read(doc, "protocol", p);
    if (p == "standard") {
      c.protocol = Protocol::kStandard;
    } else if (p == "synthetic_demo") {
      c.protocol = Protocol::kSyntheticDemo;
    } else {
      throw ConfigError("unknown protocol '" + p + "'");
    }
  }
  if (doc.contains("methods")) {
    std::vector<std::string> names;
    read(doc, "methods", names);
    c.methods.clear();
    for (const auto& n : names) c.methods.push_back(parse_method(n));
  }
  if (doc.contains("pretext")) {
    std::string p;
    read(doc, "pretext", p);
    if (p == "vime") {
      c.pretext = pretext::PretextKind::vime();
    } else if (p == "autoencoder") {
      c.pretext = pretext::PretextKind::autoencoder();
    } else {
      throw ConfigError("unknown pretext '" + p + "'");
    }
  }
  read(doc, "alpha", c.alpha);
  read(doc, "label_fractions", c.label_fractions);
  read(doc, "n_seeds", c.n_seeds);
  read(doc, "seed", c.seed);
  std::string out;
  read(doc, "out", out);
  if (!out.empty()) c.out = out;
  if (doc.contains("normalizer")) {
    std::string n;
    read(doc, "normalizer", n);
    if (n == "mlp") {
      c.normalizer = conformal::NormalizerBackend::kMlp;
    } else if (n == "forest") {
      c.normalizer = conformal::NormalizerBackend::kForest;
    } else {
      throw ConfigError("unknown normalizer '" + n + "'");
    }
  }
  read(doc, "n_trees", c.n_trees);
  read(doc, "n_threads", c.n_threads);
  read(doc, "oob_calibration", c.oob_calibration);
  read(doc, "double_dip", c.double_dip);
  read(doc, "zero_ss_feature", c.zero_ss_feature);
  read(doc, "write_per_sample", c.write_per_sample);
  if (doc.contains("network")) {
    const auto& n = doc.at("network");
    check_keys(n, "network", {"hidden", "dropout", "learning_rate", "batch_size", "max_epochs", "patience"});
    read(n, "hidden", c.network.hidden);
    read(n, "dropout", c.network.dropout);
    read(n, "learning_rate", c.network.learning_rate);
    read(n, "batch_size", c.network.batch_size);
    read(n, "max_epochs", c.network.max_epochs);
    read(n, "patience", c.network.patience);
  }
  if (doc.contains("pretext_settings")) {
    const auto& p = doc.at("pretext_settings");
    check_keys(p, "pretext_settings",
               {"p_corrupt", "feature_weight", "learning_rate", "batch_size", "max_epochs", "patience", "hidden",
                "activations"});
    read(p, "p_corrupt", c.pretext_settings.p_corrupt);
    read(p, "feature_weight", c.pretext_settings.feature_weight);
    read(p, "learning_rate", c.pretext_settings.learning_rate);
    read(p, "batch_size", c.pretext_settings.batch_size);
    read(p, "max_epochs", c.pretext_settings.max_epochs);
    read(p, "patience", c.pretext_settings.patience);
    if (p.contains("hidden")) {
      read(p, "hidden", c.pretext_settings.hidden);
      c.pretext_settings.activations.clear();
    }
    if (p.contains("activations")) {
      std::vector<std::string> names;
      read(p, "activations", names);
      c.pretext_settings.activations.clear();
      for (const auto& a : names) c.pretext_settings.activations.push_back(parse_activation(a));
    }
  }
  if (c.pretext.is_vime()) {
    c.pretext.p_corrupt = c.pretext_settings.p_corrupt;
    c.pretext.feature_loss_weight = c.pretext_settings.feature_weight;
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(doc);
}

json ExperimentConfig::to_json() const {
  json doc;
  doc["experiment"] = std::string(to_string(kind));
  doc["protocol"] = protocol == Protocol::kStandard ? "standard" : "synthetic_demo";
  json ds = json::array();
  for (const auto& d : datasets) {
    json item{{"name", d.name}};
    if (d.synthetic()) {
      item["synthetic_n"] = d.synthetic_n;
    } else {
      item["path"] = d.path.string();
      item["target"] = d.target;
    }
    ds.push_back(item);
  }
  doc["datasets"] = ds;
  json ms = json::array();
  for (const auto& m : methods) ms.push_back(m.label);
  doc["methods"] = ms;
  doc["pretext"] = pretext.is_vime() ? "vime" : "autoencoder";
  doc["alpha"] = alpha;
  doc["label_fractions"] = label_fractions;
  doc["n_seeds"] = n_seeds;
  doc["seed"] = seed;
  doc["out"] = out.string();
  doc["normalizer"] = normalizer == conformal::NormalizerBackend::kMlp ? "mlp" : "forest";
  doc["n_trees"] = n_trees;
  doc["n_threads"] = n_threads;
  doc["oob_calibration"] = oob_calibration;
  doc["double_dip"] = double_dip;
  doc["zero_ss_feature"] = zero_ss_feature;
  doc["write_per_sample"] = write_per_sample;
  doc["network"] = {{"hidden", network.hidden},         {"dropout", network.dropout},
                    {"learning_rate", network.learning_rate}, {"batch_size", network.batch_size},
                    {"max_epochs", network.max_epochs}, {"patience", network.patience}};
  std::vector<std::string> acts;
  for (auto a : pretext_settings.activations) acts.push_back(activation_name(a));
  doc["pretext_settings"] = {{"p_corrupt", pretext_settings.p_corrupt},
                             {"feature_weight", pretext_settings.feature_weight},
                             {"learning_rate", pretext_settings.learning_rate},
                             {"batch_size", pretext_settings.batch_size},
                             {"max_epochs", pretext_settings.max_epochs},
                             {"patience", pretext_settings.patience},
                             {"hidden", pretext_settings.hidden},
                             {"activations", acts}};
  return doc;
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw ConfigError("at least one method is required");
  if (datasets.empty()) throw ConfigError("at least one dataset is required");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (n_seeds == 0) throw ConfigError("n_seeds must be at least 1");
  if (label_fractions.empty()) throw ConfigError("at least one label fraction is required");
  for (double p : label_fractions) {
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("label fractions must lie in (0, 1]");
  }
  std::set<std::string> names;
  for (const auto& d : datasets) {
    check_name(d.name);
    if (!names.insert(d.name).second) throw ConfigError("duplicate dataset name '" + d.name + "'");
    if (d.synthetic() && d.synthetic_n < 10) throw ConfigError("synthetic_n must be at least 10");
    if (!d.synthetic() && protocol == Protocol::kSyntheticDemo) {
      throw ConfigError("the synthetic_demo protocol needs synthetic datasets; '" + d.name + "' is a CSV file");
    }
  }
  std::set<std::string> labels;
  for (const auto& m : methods) {
    if (!labels.insert(m.label).second) throw ConfigError("method '" + m.label + "' is listed twice");
  }
  if (n_trees == 0) throw ConfigError("n_trees must be positive");
  if (network.hidden.empty()) throw ConfigError("network.hidden must list at least one width");
  if (!pretext_settings.activations.empty() && pretext_settings.activations.size() != pretext_settings.hidden.size()) {
    throw ConfigError("pretext_settings.activations must match pretext_settings.hidden");
  }
  pretext.validate();
  pipeline_settings(0).network.validate();
}

conformal::PipelineSettings ExperimentConfig::pipeline_settings(std::uint64_t seed_value) const {
  conformal::PipelineSettings s;
  s.alpha = alpha;
  s.network = nn::MlpConfig::dense(1, network.hidden, 1);
  s.network.dropout_rate = network.dropout;
  s.network.learning_rate = network.learning_rate;
  s.network.batch_size = network.batch_size;
  s.network.max_epochs = network.max_epochs;
  s.network.patience = network.patience;
  s.pretext = pretext;
  s.pretext_settings.learning_rate = pretext_settings.learning_rate;
  s.pretext_settings.batch_size = pretext_settings.batch_size;
  s.pretext_settings.max_epochs = pretext_settings.max_epochs;
  s.pretext_settings.patience = pretext_settings.patience;
  s.pretext_settings.hidden = pretext_settings.hidden;
  s.pretext_settings.hidden_activations = pretext_settings.activations;
  s.normalizer_backend = normalizer;
  s.forest.n_trees = n_trees;
  s.forest.n_threads = n_threads;
  s.double_dip = double_dip;
  s.zero_ss_feature = zero_ss_feature;
  s.seed = seed_value;
  return s;
}

}  // namespace sscp::experiment
