// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <limits>

#include "gchk/byte_io.hpp"
#include "gchk/classifiers.hpp"

namespace gchk {

namespace {

constexpr std::size_t kHeaderBytes = 4 + 2 + 1 + 8;
constexpr std::uint64_t kNoDepth = std::numeric_limits<std::uint64_t>::max();

using Bytes = std::vector<std::uint8_t>;

void put_size(Bytes& out, std::size_t value) { bytes::put_uint<std::uint64_t>(out, value); }

void put_string(Bytes& out, std::string_view text) {
  put_size(out, text.size());
  bytes::put_bytes(out, text);
}

void put_doubles(Bytes& out, std::span<const double> values) {
  put_size(out, values.size());
  bytes::put_f64s(out, values);
}

void put_tree(Bytes& out, const Tree& tree) {
  put_size(out, tree.nodes.size());
  for (const auto& node : tree.nodes) {
    bytes::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(node.feature));
    bytes::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(node.left));
    bytes::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(node.right));
    bytes::put_f64(out, node.threshold);
    bytes::put_f64(out, node.value);
  }
}

class BodyReader {
 public:
  explicit BodyReader(bytes::Reader& reader) : r_(reader) {}

  std::size_t size(const char* what) {
    const std::uint64_t value = r_.uint<std::uint64_t>(what);
    if (value > r_.remaining() && value != kNoDepth) {
      // counts never exceed the bytes left, so this is damage rather than a huge model
      throw CorruptionError(std::string("implausible ") + what + " " + std::to_string(value), r_.offset() - 8);
    }
    return static_cast<std::size_t>(value);
  }
  std::size_t raw(const char* what) { return static_cast<std::size_t>(r_.uint<std::uint64_t>(what)); }
  double f64(const char* what) { return r_.f64(what); }
  std::string string(const char* what) { return r_.text(size(what), what); }
  std::vector<double> doubles(const char* what) { return r_.f64s(size(what), what); }

  Tree tree() {
    Tree tree;
    tree.nodes.resize(size("tree size"));
    for (auto& node : tree.nodes) {
      node.feature = static_cast<std::int32_t>(r_.uint<std::uint32_t>("tree node"));
      node.left = static_cast<std::int32_t>(r_.uint<std::uint32_t>("tree node"));
      node.right = static_cast<std::int32_t>(r_.uint<std::uint32_t>("tree node"));
      node.threshold = r_.f64("tree node");
      node.value = r_.f64("tree node");
    }
    const auto n = static_cast<std::int32_t>(tree.nodes.size());
    if (n == 0) throw CorruptionError("empty tree", r_.offset());
    for (const auto& node : tree.nodes) {
      if (node.feature < 0) continue;
      if (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n) {
        throw CorruptionError("tree child index out of range", r_.offset());
      }
    }
    return tree;
  }

  std::vector<Tree> trees() {
    std::vector<Tree> out(size("tree count"));
    for (auto& t : out) t = tree();
    return out;
  }

 private:
  bytes::Reader& r_;
};

void put_params(Bytes& out, const Hyperparams& params) {
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LogisticParams>) {
          bytes::put_f64(out, p.l2);
          put_size(out, p.max_iterations);
          bytes::put_f64(out, p.tolerance);
        } else if constexpr (std::is_same_v<P, MlpParams>) {
          put_size(out, p.hidden);
          bytes::put_f64(out, p.learning_rate);
          put_size(out, static_cast<std::size_t>(p.optimizer));
          put_size(out, p.batch_size);
          put_size(out, p.max_epochs);
          put_size(out, p.patience);
          bytes::put_f64(out, p.min_delta);
          bytes::put_f64(out, p.validation_fraction);
        } else if constexpr (std::is_same_v<P, ForestParams>) {
          put_size(out, p.n_trees);
          bytes::put_uint<std::uint64_t>(out, p.max_depth ? *p.max_depth : kNoDepth);
          put_size(out, p.min_samples_leaf);
        } else {
          put_size(out, p.n_estimators);
          put_size(out, p.max_depth);
          bytes::put_f64(out, p.learning_rate);
          bytes::put_f64(out, p.lambda);
          bytes::put_f64(out, p.min_child_weight);
        }
      },
      params);
}

Hyperparams read_params(BodyReader& in, Family family) {
  switch (family) {
    case Family::lr: {
      LogisticParams p;
      p.l2 = in.f64("lr params");
      p.max_iterations = in.raw("lr params");
      p.tolerance = in.f64("lr params");
      return p;
    }
    case Family::mlp: {
      MlpParams p;
      p.hidden = in.raw("mlp params");
      p.learning_rate = in.f64("mlp params");
      const std::size_t optimizer = in.raw("mlp params");
      if (optimizer > 1) throw FormatError("unknown optimizer tag " + std::to_string(optimizer));
      p.optimizer = static_cast<Optimizer>(optimizer);
      p.batch_size = in.raw("mlp params");
      p.max_epochs = in.raw("mlp params");
      p.patience = in.raw("mlp params");
      p.min_delta = in.f64("mlp params");
      p.validation_fraction = in.f64("mlp params");
      return p;
    }
    case Family::rf: {
      ForestParams p;
      p.n_trees = in.raw("rf params");
      const std::size_t depth = in.raw("rf params");
      p.max_depth = depth == kNoDepth ? std::nullopt : std::optional<std::size_t>(depth);
      p.min_samples_leaf = in.raw("rf params");
      return p;
    }
    case Family::gbt: {
      BoostParams p;
      p.n_estimators = in.raw("gbt params");
      p.max_depth = in.raw("gbt params");
      p.learning_rate = in.f64("gbt params");
      p.lambda = in.f64("gbt params");
      p.min_child_weight = in.f64("gbt params");
      return p;
    }
  }
  return LogisticParams{};
}

void put_model(Bytes& out, const ModelPayload& model) {
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, LogisticModel>) {
          put_doubles(out, m.weights);
          bytes::put_f64(out, m.bias);
          put_size(out, m.iterations);
          bytes::put_f64(out, m.gradient_norm);
        } else if constexpr (std::is_same_v<M, MlpModel>) {
          put_size(out, m.inputs);
          put_size(out, m.hidden);
          put_doubles(out, m.w1);
          put_doubles(out, m.b1);
          put_doubles(out, m.w2);
          bytes::put_f64(out, m.b2);
          put_size(out, m.epochs);
        } else if constexpr (std::is_same_v<M, ForestModel>) {
          put_size(out, m.trees.size());
          for (const auto& t : m.trees) put_tree(out, t);
        } else {
          bytes::put_f64(out, m.base_margin);
          bytes::put_f64(out, m.learning_rate);
          put_size(out, m.trees.size());
          for (const auto& t : m.trees) put_tree(out, t);
        }
      },
      model);
}

ModelPayload read_model(BodyReader& in, Family family, std::size_t inputs) {
  switch (family) {
    case Family::lr: {
      LogisticModel m;
      m.weights = in.doubles("lr weights");
      m.bias = in.f64("lr bias");
      m.iterations = in.raw("lr iterations");
      m.gradient_norm = in.f64("lr gradient norm");
      if (m.weights.size() != inputs) throw ConsistencyError("lr weight count does not match the feature layout");
      return m;
    }
    case Family::mlp: {
      MlpModel m;
      m.inputs = in.raw("mlp shape");
      m.hidden = in.raw("mlp shape");
      m.w1 = in.doubles("mlp w1");
      m.b1 = in.doubles("mlp b1");
      m.w2 = in.doubles("mlp w2");
      m.b2 = in.f64("mlp b2");
      m.epochs = in.raw("mlp epochs");
      if (m.inputs != inputs || m.w1.size() != m.inputs * m.hidden || m.b1.size() != m.hidden ||
          m.w2.size() != m.hidden) {
        throw ConsistencyError("mlp weight shapes do not match");
      }
      return m;
    }
    case Family::rf: {
      ForestModel m;
      m.trees = in.trees();
      return m;
    }
    case Family::gbt: {
      BoostModel m;
      m.base_margin = in.f64("gbt base margin");
      m.learning_rate = in.f64("gbt learning rate");
      m.trees = in.trees();
      return m;
    }
  }
  return LogisticModel{};
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const TrainedDetector& detector) {
  Bytes body;
  put_size(body, detector.feature_names.size());
  for (const auto& name : detector.feature_names) put_string(body, name);
  bytes::put_f64(body, detector.threshold);
  put_string(body, detector.preprocessing);

  const auto& s = detector.standardizer;
  put_size(body, s.kept.size());
  for (std::size_t j = 0; j < s.kept.size(); ++j) {
    put_size(body, s.kept[j]);
    bytes::put_f64(body, s.mean[j]);
    bytes::put_f64(body, s.scale[j]);
  }
  put_size(body, s.dropped.size());
  for (const auto& name : s.dropped) put_string(body, name);

  put_params(body, detector.params);
  put_model(body, detector.model);

  Bytes out;
  out.reserve(kHeaderBytes + body.size());
  out.insert(out.end(), kModelMagic, kModelMagic + 4);
  bytes::put_uint<std::uint16_t>(out, kModelVersion);
  bytes::put_uint<std::uint8_t>(out, static_cast<std::uint8_t>(detector.family()));
  bytes::put_uint<std::uint64_t>(out, body.size());
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

TrainedDetector deserialize_model(std::span<const std::uint8_t> data) {
  bytes::Reader header(data);
  const std::string magic = header.text(4, "model magic");
  if (std::memcmp(magic.data(), kModelMagic, 4) != 0) throw FormatError("not a model file (bad magic)");
  const auto version = header.uint<std::uint16_t>("model version");
  if (version != kModelVersion) {
    throw FormatError("unsupported model version " + std::to_string(version) + " (expected " +
                      std::to_string(kModelVersion) + ")");
  }
  const auto tag = header.uint<std::uint8_t>("family tag");
  if (tag > static_cast<std::uint8_t>(Family::gbt)) throw FormatError("unknown model family tag " + std::to_string(tag));
  const auto family = static_cast<Family>(tag);
  const auto length = header.uint<std::uint64_t>("body length");
  if (length != header.remaining()) {
    if (length > header.remaining()) {
      throw CorruptionError("truncated model body: header declares " + std::to_string(length) + " bytes, " +
                                std::to_string(header.remaining()) + " present",
                            data.size());
    }
    throw ConsistencyError(std::to_string(header.remaining() - length) + " trailing bytes after the model body");
  }

  bytes::Reader reader(data.subspan(kHeaderBytes), kHeaderBytes);
  BodyReader in(reader);
  TrainedDetector d;
  d.feature_names.resize(in.size("feature count"));
  for (auto& name : d.feature_names) name = in.string("feature name");
  d.threshold = in.f64("threshold");
  d.preprocessing = in.string("preprocessing");

  auto& s = d.standardizer;
  const std::size_t kept = in.size("standardizer size");
  for (std::size_t j = 0; j < kept; ++j) {
    s.kept.push_back(in.raw("standardizer column"));
    if (s.kept.back() >= d.feature_names.size()) throw ConsistencyError("standardizer column out of range");
    s.mean.push_back(in.f64("standardizer mean"));
    s.scale.push_back(in.f64("standardizer scale"));
  }
  s.dropped.resize(in.size("dropped count"));
  for (auto& name : s.dropped) name = in.string("dropped name");

  d.params = read_params(in, family);
  d.model = read_model(in, family, kept);
  if (reader.remaining() != 0) {
    throw ConsistencyError(std::to_string(reader.remaining()) + " unread bytes at the end of the model body");
  }
  return d;
}

void save_model(const TrainedDetector& detector, const std::string& path) {
  bytes::write_file(path, serialize_model(detector));
}

TrainedDetector load_model(const std::string& path) {
  return deserialize_model(bytes::read_file(path));
}

}  // namespace gchk
