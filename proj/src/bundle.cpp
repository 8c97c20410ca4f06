// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gchk/bundle.hpp"

#include <filesystem>
#include <set>
#include <sstream>

#include "gchk/byte_io.hpp"
#include "json.hpp"

namespace gchk {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

std::uint64_t record_bytes(std::size_t num_layers, std::size_t patch_count, std::size_t embed_dim) {
  const std::uint64_t floats_per_layer = patch_count + patch_count * embed_dim + embed_dim;
  return num_layers * floats_per_layer * sizeof(float);
}

namespace {

struct Shape {
  std::vector<int> layer_indices;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t embed_dim = 0;
};

Shape shape_of(const TokenTrace& trace) {
  Shape shape;
  for (const auto& slice : trace.layers) shape.layer_indices.push_back(slice.layer_index);
  shape.height = trace.layers.front().attention.height();
  shape.width = trace.layers.front().attention.width();
  shape.embed_dim = trace.layers.front().embed_dim();
  return shape;
}

void check_same_shape(const TokenTrace& trace, const Shape& expected) {
  const Shape got = shape_of(trace);
  if (got.layer_indices != expected.layer_indices) {
    throw InvariantError("token '" + trace.token_id + "': layer indices differ from the rest of the bundle");
  }
  if (got.height != expected.height || got.width != expected.width) {
    throw InvariantError("token '" + trace.token_id + "': grid dimensions differ from the rest of the bundle");
  }
  if (got.embed_dim != expected.embed_dim) {
    throw InvariantError("token '" + trace.token_id + "': embedding dimension differs from the rest of the bundle");
  }
}

template <typename T>
T field(const json& object, const char* key, const std::string& context) {
  auto it = object.find(key);
  if (it == object.end()) throw FormatError(context + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw FormatError(context + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

BundleSummary write_bundle(std::span<const TokenTrace> traces, const std::string& destination,
                           const std::string& model) {
  Shape shape;
  std::set<std::string> seen;
  for (const auto& trace : traces) {
    validate(trace);
    if (!seen.insert(trace.token_id).second) {
      throw InvariantError("token '" + trace.token_id + "': duplicate token_id");
    }
    if (&trace == &traces.front()) {
      shape = shape_of(trace);
    } else {
      check_same_shape(trace, shape);
    }
  }

  const std::size_t patches = shape.height * shape.width;
  const std::uint64_t length = traces.empty() ? 0 : record_bytes(shape.layer_indices.size(), patches, shape.embed_dim);

  std::vector<std::uint8_t> payload;
  payload.reserve(kBundleHeaderBytes + traces.size() * length);
  bytes::put_bytes(payload, std::string_view(kBundleMagic, 4));
  bytes::put_uint<std::uint16_t>(payload, kBundleVersion);

  ordered_json tokens = ordered_json::array();
  for (const auto& trace : traces) {
    const std::uint64_t offset = payload.size();
    for (const auto& slice : trace.layers) {
      bytes::put_f32s(payload, slice.attention.values());
      bytes::put_f32s(payload, slice.patch_embeddings);
      bytes::put_f32s(payload, slice.token_embedding);
    }
    ordered_json entry = {
        {"token_id", trace.token_id},
        {"object_text", trace.object_text},
        {"label", std::string(to_string(trace.label))},
        {"offset_bytes", offset},
        {"length_bytes", length},
    };
    if (trace.pairing) {
      entry["pairing"] = {{"attention_token", trace.pairing->attention_token},
                          {"embedding_token", trace.pairing->embedding_token}};
    }
    tokens.push_back(std::move(entry));
  }

  ordered_json manifest = {
      {"version", kBundleVersion},
      {"model", model},
      {"num_layers", shape.layer_indices.size()},
      {"layer_indices", shape.layer_indices},
      {"grid", {shape.height, shape.width}},
      {"embed_dim", shape.embed_dim},
      {"tokens", std::move(tokens)},
  };

  std::error_code ec;
  fs::create_directories(destination, ec);
  if (ec) throw IoError("cannot create bundle directory " + destination + ": " + ec.message());
  bytes::write_text((fs::path(destination) / kManifestFile).string(), manifest.dump(2) + "\n");
  bytes::write_file((fs::path(destination) / kTensorFile).string(), payload);

  BundleSummary summary;
  summary.token_count = traces.size();
  summary.num_layers = shape.layer_indices.size();
  summary.grid_height = shape.height;
  summary.grid_width = shape.width;
  summary.embed_dim = shape.embed_dim;
  summary.payload_bytes = payload.size();
  return summary;
}

TraceBundle read_bundle(const std::string& source) {
  const std::string manifest_path = (fs::path(source) / kManifestFile).string();
  const std::string tensor_path = (fs::path(source) / kTensorFile).string();

  json manifest;
  try {
    manifest = json::parse(bytes::read_text(manifest_path));
  } catch (const json::parse_error& e) {
    throw FormatError(manifest_path + ": invalid JSON: " + e.what());
  }
  if (!manifest.is_object()) throw FormatError(manifest_path + ": manifest must be a JSON object");

  const auto version = field<std::uint64_t>(manifest, "version", manifest_path);
  if (version != kBundleVersion) {
    throw FormatError(manifest_path + ": unsupported bundle version " + std::to_string(version));
  }
  TraceBundle bundle;
  bundle.model = field<std::string>(manifest, "model", manifest_path);
  const auto num_layers = field<std::size_t>(manifest, "num_layers", manifest_path);
  const auto layer_indices = field<std::vector<int>>(manifest, "layer_indices", manifest_path);
  const auto grid = field<std::vector<std::size_t>>(manifest, "grid", manifest_path);
  const auto embed_dim = field<std::size_t>(manifest, "embed_dim", manifest_path);
  const auto tokens = field<json>(manifest, "tokens", manifest_path);
  if (grid.size() != 2) throw FormatError(manifest_path + ": 'grid' must be [height, width]");
  if (layer_indices.size() != num_layers) {
    throw ConsistencyError(manifest_path + ": num_layers does not match layer_indices");
  }
  if (!tokens.is_array()) throw FormatError(manifest_path + ": 'tokens' must be an array");

  const std::vector<std::uint8_t> payload = bytes::read_file(tensor_path);
  if (payload.size() < kBundleHeaderBytes) {
    throw CorruptionError(tensor_path + ": file shorter than its header", payload.size());
  }
  if (!std::equal(kBundleMagic, kBundleMagic + 4, payload.begin())) {
    throw FormatError(tensor_path + ": bad magic, not a GCHK tensor file");
  }
  bytes::Reader header{std::span(payload).subspan(4, 2), 4};
  const auto payload_version = header.uint<std::uint16_t>("version");
  if (payload_version != kBundleVersion) {
    throw FormatError(tensor_path + ": unsupported tensor file version " + std::to_string(payload_version));
  }

  const std::size_t height = grid[0];
  const std::size_t width = grid[1];
  const std::size_t patches = height * width;
  const std::uint64_t expected_length = record_bytes(num_layers, patches, embed_dim);
  if (!tokens.empty() && expected_length == 0) {
    throw ConsistencyError(manifest_path + ": tokens listed but layer/grid/embedding dimensions are zero");
  }

  std::uint64_t cursor = kBundleHeaderBytes;
  std::set<std::string> seen;
  bundle.traces.reserve(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const json& entry = tokens[t];
    const std::string context = manifest_path + ": tokens[" + std::to_string(t) + "]";
    if (!entry.is_object()) throw FormatError(context + " must be an object");

    TokenTrace trace;
    trace.token_id = field<std::string>(entry, "token_id", context);
    trace.object_text = field<std::string>(entry, "object_text", context);
    trace.label = parse_label(field<std::string>(entry, "label", context));
    if (auto it = entry.find("pairing"); it != entry.end()) {
      trace.pairing = TokenPairing{field<std::string>(*it, "attention_token", context + ".pairing"),
                                   field<std::string>(*it, "embedding_token", context + ".pairing")};
      if (trace.pairing->attention_token.empty() || trace.pairing->embedding_token.empty()) {
        throw InvariantError("token '" + trace.token_id + "': pairing names an empty token");
      }
    }
    const auto offset = field<std::uint64_t>(entry, "offset_bytes", context);
    const auto length = field<std::uint64_t>(entry, "length_bytes", context);
    if (offset != cursor) {
      throw ConsistencyError(context + ": offset_bytes " + std::to_string(offset) + ", expected " +
                             std::to_string(cursor));
    }
    if (length != expected_length) {
      throw ConsistencyError(context + ": length_bytes " + std::to_string(length) +
                             " does not match the declared shape (" + std::to_string(expected_length) + ")");
    }
    if (offset + length > payload.size()) {
      throw CorruptionError(tensor_path + ": payload truncated inside record for token '" + trace.token_id + "'",
                            payload.size());
    }
    if (!seen.insert(trace.token_id).second) {
      throw InvariantError("token '" + trace.token_id + "': duplicate token_id");
    }

    bytes::Reader reader{std::span(payload).subspan(offset, length), offset};
    trace.layers.resize(num_layers);
    for (std::size_t l = 0; l < num_layers; ++l) {
      LayerSlice& slice = trace.layers[l];
      slice.layer_index = layer_indices[l];
      std::vector<float> attention(patches);
      reader.f32s(attention, "attention");
      slice.attention = PatchGrid(height, width, std::move(attention));
      slice.patch_embeddings.resize(patches * embed_dim);
      reader.f32s(slice.patch_embeddings, "patch embeddings");
      slice.token_embedding.resize(embed_dim);
      reader.f32s(slice.token_embedding, "token embedding");
    }
    validate(trace);
    bundle.traces.push_back(std::move(trace));
    cursor += length;
  }

  if (cursor != payload.size()) {
    std::ostringstream msg;
    msg << tensor_path << ": manifest lists " << tokens.size() << " records (" << cursor
        << " bytes) but payload holds " << payload.size() << " bytes";
    throw ConsistencyError(msg.str());
  }
  return bundle;
}

LabelFile load_labels(const std::string& path) {
  const std::string text = bytes::read_text(path);
  LabelFile result;
  std::istringstream in(text);
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_number);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error&) {
      throw FormatError(where + ": not a JSON object");
    }
    if (!record.is_object()) throw FormatError(where + ": not a JSON object");
    const auto token_id = field<std::string>(record, "token_id", where);
    const auto label_text = field<std::string>(record, "label", where);
    Label label;
    if (label_text == "grounded") {
      label = Label::grounded;
    } else if (label_text == "hallucinated") {
      label = Label::hallucinated;
    } else {
      throw FormatError(where + ": unknown label '" + label_text + "'");
    }
    auto [it, inserted] = result.labels.insert_or_assign(token_id, label);
    if (!inserted) {
      result.warnings.push_back(where + ": duplicate token_id '" + token_id + "', keeping this record");
    }
  }
  return result;
}

void write_labels(const LabelMap& labels, const std::string& path) {
  std::string out;
  for (const auto& [token_id, label] : labels) {
    ordered_json record = {{"token_id", token_id}, {"label", std::string(to_string(label))}};
    out += record.dump() + "\n";
  }
  bytes::write_text(path, out);
}

}  // namespace gchk
