// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gchk/config.hpp"

#include <algorithm>
#include <charconv>
#include <initializer_list>

#include "gchk/byte_io.hpp"
#include "gchk/parallel.hpp"

namespace gchk {

namespace {

using json = nlohmann::json;

/// Strict view of one JSON object: reads optional keys and rejects the rest.
class Section {
 public:
  Section(const json& object, std::string path, std::initializer_list<const char*> allowed)
      : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) throw UsageError(label() + "must be a JSON object");
    for (const auto& [key, value] : object_.items()) {
      const bool known =
          std::any_of(allowed.begin(), allowed.end(), [&](const char* name) { return key == name; });
      if (!known) throw UsageError("unknown config key '" + qualified(key) + "'");
    }
  }

  const json* find(const char* key) const {
    const auto it = object_.find(key);
    return it == object_.end() ? nullptr : &*it;
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  void read(const char* key, T& out) const {
    const json* value = find(key);
    if (value == nullptr) return;
    out = convert<T>(*value, qualified(key));
  }

  template <typename T>
  static T convert(const json& value, const std::string& where) {
    bool ok = false;
    if constexpr (std::is_same_v<T, bool>) {
      ok = value.is_boolean();
    } else if constexpr (std::is_integral_v<T>) {
      ok = value.is_number_integer() && (std::is_signed_v<T> || value.is_number_unsigned());
    } else if constexpr (std::is_floating_point_v<T>) {
      ok = value.is_number();
    } else {
      ok = value.is_string();
    }
    if (!ok) throw UsageError("config key '" + where + "' has the wrong type");
    return value.get<T>();
  }

 private:
  std::string label() const { return path_.empty() ? "config " : "config section '" + path_ + "' "; }

  const json& object_;
  std::string path_;
};

template <typename T>
std::vector<T> read_list(const json& value, const std::string& where) {
  if (!value.is_array() || value.empty()) throw UsageError("config key '" + where + "' must be a non-empty array");
  std::vector<T> out;
  for (const auto& item : value) out.push_back(Section::convert<T>(item, where));
  return out;
}

template <typename T>
void read_list(const Section& section, const char* key, std::vector<T>& out) {
  if (const json* value = section.find(key)) out = read_list<T>(*value, section.qualified(key));
}

int parse_int(std::string_view text, const std::string& key) {
  int value = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw UsageError("config key '" + key + "': bad layer '" + std::string(text) + "'");
  }
  return value;
}

void read_grid(const json& value, HyperGrid& grid) {
  const Section s(value, "train.grid", {"lr", "gbt", "rf", "mlp"});
  if (const json* lr = s.find("lr")) {
    const Section g(*lr, "train.grid.lr", {"l2"});
    read_list(g, "l2", grid.lr_l2);
  }
  if (const json* gbt = s.find("gbt")) {
    const Section g(*gbt, "train.grid.gbt", {"max_depth", "learning_rate", "n_estimators"});
    read_list(g, "max_depth", grid.gbt_depth);
    read_list(g, "learning_rate", grid.gbt_learning_rate);
    read_list(g, "n_estimators", grid.gbt_estimators);
  }
  if (const json* rf = s.find("rf")) {
    const Section g(*rf, "train.grid.rf", {"max_depth", "n_trees"});
    read_list(g, "n_trees", grid.rf_trees);
    if (const json* depth = g.find("max_depth")) {
      if (!depth->is_array() || depth->empty()) {
        throw UsageError("config key 'train.grid.rf.max_depth' must be a non-empty array");
      }
      grid.rf_depth.clear();
      for (const auto& item : *depth) {
        grid.rf_depth.push_back(item.is_null() ? std::nullopt
                                               : std::optional(Section::convert<std::size_t>(
                                                     item, "train.grid.rf.max_depth")));
      }
    }
  }
  if (const json* mlp = s.find("mlp")) {
    const Section g(*mlp, "train.grid.mlp", {"hidden", "learning_rate", "optimizer"});
    read_list(g, "hidden", grid.mlp_hidden);
    read_list(g, "learning_rate", grid.mlp_learning_rate);
    if (const json* opt = g.find("optimizer")) {
      grid.mlp_optimizer.clear();
      for (const auto& name : read_list<std::string>(*opt, "train.grid.mlp.optimizer")) {
        grid.mlp_optimizer.push_back(parse_optimizer(name));
      }
    }
  }
}

void read_synth(const json& value, SynthConfig& c) {
  const Section s(value, "synth",
                  {"grid_height", "grid_width", "num_layers", "embed_dim", "n_tokens", "hallucinated_fraction",
                   "mass_jitter", "latent_spread", "layer_jitter", "signal_layers", "grounded", "hallucinated",
                   "embedding", "seed"});
  s.read("grid_height", c.grid_height);
  s.read("grid_width", c.grid_width);
  s.read("num_layers", c.num_layers);
  s.read("embed_dim", c.embed_dim);
  s.read("n_tokens", c.n_tokens);
  s.read("hallucinated_fraction", c.hallucinated_fraction);
  s.read("mass_jitter", c.mass_jitter);
  s.read("latent_spread", c.latent_spread);
  s.read("layer_jitter", c.layer_jitter);
  s.read("seed", c.seed);
  if (const json* layers = s.find("signal_layers")) c.signal_layers = parse_layers(*layers, "synth.signal_layers").layers();
  if (const json* g = s.find("grounded")) {
    const Section gs(*g, "synth.grounded",
                     {"blob_count", "blob_radius", "structured_mass", "background_noise", "compactness",
                      "sink_count", "sink_mass"});
    gs.read("blob_count", c.grounded.blob_count);
    gs.read("blob_radius", c.grounded.blob_radius);
    gs.read("structured_mass", c.grounded.structured_mass);
    gs.read("background_noise", c.grounded.background_noise);
    gs.read("compactness", c.grounded.compactness);
    gs.read("sink_count", c.grounded.sink_count);
    gs.read("sink_mass", c.grounded.sink_mass);
  }
  if (const json* h = s.find("hallucinated")) {
    const Section hs(*h, "synth.hallucinated", {"dispersion", "scatter_patches", "sink_count", "sink_mass"});
    hs.read("dispersion", c.hallucinated.dispersion);
    hs.read("scatter_patches", c.hallucinated.scatter_patches);
    hs.read("sink_count", c.hallucinated.sink_count);
    hs.read("sink_mass", c.hallucinated.sink_mass);
  }
  if (const json* e = s.find("embedding")) {
    const Section es(*e, "synth.embedding", {"alignment", "misalignment", "noise"});
    es.read("alignment", c.embedding.alignment);
    es.read("misalignment", c.embedding.misalignment);
    es.read("noise", c.embedding.noise);
  }
}

}  // namespace

LayerSelection parse_layers(const json& value, const std::string& key) {
  if (value.is_array()) {
    std::vector<int> layers;
    for (const auto& item : value) layers.push_back(Section::convert<int>(item, key));
    return LayerSelection(std::move(layers));
  }
  if (!value.is_string()) throw UsageError("config key '" + key + "' must be \"all\", \"a-b\" or an array");
  const std::string text = value.get<std::string>();
  if (text == "all") return LayerSelection::all();
  const auto dash = text.find('-', 1);
  if (dash == std::string::npos) return LayerSelection({parse_int(text, key)});
  const int lo = parse_int(std::string_view(text).substr(0, dash), key);
  const int hi = parse_int(std::string_view(text).substr(dash + 1), key);
  if (hi < lo) throw UsageError("config key '" + key + "': empty layer range '" + text + "'");
  std::vector<int> layers;
  for (int l = lo; l <= hi; ++l) layers.push_back(l);
  return LayerSelection(std::move(layers));
}

nlohmann::ordered_json to_json(const LayerSelection& layers) {
  if (layers.is_all()) return "all";
  return *layers.layers();
}

FeatureConfig RunConfig::features() const {
  FeatureConfig out;
  out.ads = ads;
  out.cgc = cgc;
  out.ads_layers = layer_subset ? *layer_subset : ads_layers;
  out.cgc_layers = layer_subset ? *layer_subset : cgc_layers;
  return out;
}

Hyperparams RunConfig::train_params() const { return params_from_json(train.family, train.params); }

std::size_t RunConfig::worker_count() const { return threads == 0 ? default_threads() : threads; }

RunConfig parse_config(const json& document) {
  RunConfig c;
  const Section root(document, "", {"seed", "threads", "ads", "cgc", "features", "train", "eval", "synth"});
  root.read("seed", c.seed);
  root.read("threads", c.threads);
  if (const json* ads = root.find("ads")) {
    const Section s(*ads, "ads", {"top_x_percent", "tau", "layers"});
    s.read("top_x_percent", c.ads.top_x_percent);
    s.read("tau", c.ads.tau);
    if (const json* layers = s.find("layers")) c.ads_layers = parse_layers(*layers, "ads.layers");
  }
  if (const json* cgc = root.find("cgc")) {
    const Section s(*cgc, "cgc", {"top_k_percent", "layers"});
    s.read("top_k_percent", c.cgc.top_k_percent);
    if (const json* layers = s.find("layers")) c.cgc_layers = parse_layers(*layers, "cgc.layers");
  }
  if (const json* features = root.find("features")) {
    const Section s(*features, "features", {"layer_subset"});
    if (const json* subset = s.find("layer_subset"); subset != nullptr && !subset->is_null()) {
      c.layer_subset = parse_layers(*subset, "features.layer_subset");
    }
  }
  if (const json* train = root.find("train")) {
    const Section s(*train, "train", {"family", "search", "folds", "threshold", "params", "grid"});
    std::string family{to_string(c.train.family)};
    s.read("family", family);
    c.train.family = parse_family(family);
    s.read("search", c.train.search);
    s.read("folds", c.train.folds);
    s.read("threshold", c.train.threshold);
    if (const json* params = s.find("params")) {
      if (!params->is_object()) throw UsageError("config key 'train.params' must be a JSON object");
      c.train.params = *params;
    }
    if (const json* grid = s.find("grid")) read_grid(*grid, c.train.grid);
  }
  if (const json* eval = root.find("eval")) {
    const Section s(*eval, "eval", {"protocol", "folds", "test_fraction", "threshold"});
    std::string protocol{to_string(c.eval.kind)};
    s.read("protocol", protocol);
    c.eval.kind = parse_protocol(protocol);
    s.read("folds", c.eval.folds);
    s.read("test_fraction", c.eval.test_fraction);
    s.read("threshold", c.eval.threshold);
  }
  if (const json* synth = root.find("synth")) read_synth(*synth, c.synth);

  if (!(c.ads.top_x_percent > 0.0 && c.ads.top_x_percent <= 100.0)) {
    throw UsageError("config key 'ads.top_x_percent' must be in (0, 100]");
  }
  if (c.ads.tau == 0) throw UsageError("config key 'ads.tau' must be >= 1");
  if (!(c.cgc.top_k_percent > 0.0 && c.cgc.top_k_percent <= 100.0)) {
    throw UsageError("config key 'cgc.top_k_percent' must be in (0, 100]");
  }
  if (c.train.folds < 2) throw UsageError("config key 'train.folds' must be >= 2");
  if (!(c.train.threshold > 0.0 && c.train.threshold < 1.0)) {
    throw UsageError("config key 'train.threshold' must be in (0, 1)");
  }
  if (c.eval.folds < 2) throw UsageError("config key 'eval.folds' must be >= 2");
  if (!(c.eval.test_fraction > 0.0 && c.eval.test_fraction < 1.0)) {
    throw UsageError("config key 'eval.test_fraction' must be in (0, 1)");
  }
  c.train_params();  // validates train.params against the family
  validate(c.synth);
  return c;
}

RunConfig load_config(const std::string& path) {
  const std::string text = bytes::read_text(path);
  json document;
  try {
    document = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": malformed JSON: " + e.what());
  }
  return parse_config(document);
}

nlohmann::ordered_json to_json(const FeatureConfig& f) {
  return {{"ads", {{"top_x_percent", f.ads.top_x_percent}, {"tau", f.ads.tau}, {"layers", to_json(f.ads_layers)}}},
          {"cgc", {{"top_k_percent", f.cgc.top_k_percent}, {"layers", to_json(f.cgc_layers)}}}};
}

FeatureConfig parse_feature_config(const json& snapshot) {
  const Section root(snapshot, "preprocessing", {"ads", "cgc"});
  FeatureConfig f;
  if (const json* ads = root.find("ads")) {
    const Section s(*ads, "preprocessing.ads", {"top_x_percent", "tau", "layers"});
    s.read("top_x_percent", f.ads.top_x_percent);
    s.read("tau", f.ads.tau);
    if (const json* layers = s.find("layers")) f.ads_layers = parse_layers(*layers, "preprocessing.ads.layers");
  }
  if (const json* cgc = root.find("cgc")) {
    const Section s(*cgc, "preprocessing.cgc", {"top_k_percent", "layers"});
    s.read("top_k_percent", f.cgc.top_k_percent);
    if (const json* layers = s.find("layers")) f.cgc_layers = parse_layers(*layers, "preprocessing.cgc.layers");
  }
  return f;
}

nlohmann::ordered_json to_json(const SynthConfig& c) {
  nlohmann::ordered_json signal = "all";
  if (c.signal_layers) signal = *c.signal_layers;
  return {{"grid_height", c.grid_height},
          {"grid_width", c.grid_width},
          {"num_layers", c.num_layers},
          {"embed_dim", c.embed_dim},
          {"n_tokens", c.n_tokens},
          {"hallucinated_fraction", c.hallucinated_fraction},
          {"mass_jitter", c.mass_jitter},
          {"latent_spread", c.latent_spread},
          {"layer_jitter", c.layer_jitter},
          {"signal_layers", signal},
          {"grounded",
           {{"blob_count", c.grounded.blob_count},
            {"blob_radius", c.grounded.blob_radius},
            {"structured_mass", c.grounded.structured_mass},
            {"background_noise", c.grounded.background_noise},
            {"compactness", c.grounded.compactness},
            {"sink_count", c.grounded.sink_count},
            {"sink_mass", c.grounded.sink_mass}}},
          {"hallucinated",
           {{"dispersion", c.hallucinated.dispersion},
            {"scatter_patches", c.hallucinated.scatter_patches},
            {"sink_count", c.hallucinated.sink_count},
            {"sink_mass", c.hallucinated.sink_mass}}},
          {"embedding",
           {{"alignment", c.embedding.alignment},
            {"misalignment", c.embedding.misalignment},
            {"noise", c.embedding.noise}}},
          {"seed", c.seed}};
}

nlohmann::ordered_json to_json(const HyperGrid& g) {
  nlohmann::ordered_json rf_depth = nlohmann::ordered_json::array();
  for (const auto& d : g.rf_depth) rf_depth.push_back(d ? nlohmann::ordered_json(*d) : nlohmann::ordered_json(nullptr));
  nlohmann::ordered_json optimizers = nlohmann::ordered_json::array();
  for (Optimizer o : g.mlp_optimizer) optimizers.push_back(std::string(to_string(o)));
  return {{"lr", {{"l2", g.lr_l2}}},
          {"gbt", {{"max_depth", g.gbt_depth}, {"learning_rate", g.gbt_learning_rate}, {"n_estimators", g.gbt_estimators}}},
          {"rf", {{"max_depth", rf_depth}, {"n_trees", g.rf_trees}}},
          {"mlp", {{"hidden", g.mlp_hidden}, {"learning_rate", g.mlp_learning_rate}, {"optimizer", optimizers}}}};
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json out;
  out["seed"] = c.seed;
  const auto features = to_json(c.features());
  out["ads"] = features["ads"];
  out["cgc"] = features["cgc"];
  out["features"] = {{"layer_subset", c.layer_subset ? to_json(*c.layer_subset) : nlohmann::ordered_json(nullptr)}};
  out["train"] = {{"family", std::string(to_string(c.train.family))},
                  {"search", c.train.search},
                  {"folds", c.train.folds},
                  {"threshold", c.train.threshold},
                  {"params", params_to_json(c.train_params())},
                  {"grid", to_json(c.train.grid)}};
  out["eval"] = {{"protocol", std::string(to_string(c.eval.kind))},
                 {"folds", c.eval.folds},
                 {"test_fraction", c.eval.test_fraction},
                 {"threshold", c.eval.threshold}};
  out["synth"] = to_json(c.synth);
  return out;
}

}  // namespace gchk
