// Copyright 2026 The gchk Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gchk/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "gchk/byte_io.hpp"
#include "gchk/parallel.hpp"

namespace gchk {

std::array<std::size_t, 2> Dataset::class_counts() const {
  std::array<std::size_t, 2> counts{0, 0};
  for (const auto& row : rows) {
    if (row.label == Label::grounded) ++counts[0];
    if (row.label == Label::hallucinated) ++counts[1];
  }
  return counts;
}

std::vector<int> Dataset::targets() const {
  std::vector<int> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row.label == Label::hallucinated ? 1 : 0);
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.feature_names = feature_names;
  out.rows.reserve(indices.size());
  for (std::size_t i : indices) out.rows.push_back(rows.at(i));
  return out;
}

Dataset Dataset::select_columns(std::span<const std::string> names) const {
  std::vector<std::size_t> columns;
  for (const auto& name : names) {
    auto it = std::find(feature_names.begin(), feature_names.end(), name);
    if (it == feature_names.end()) throw UsageError("dataset has no column '" + name + "'");
    columns.push_back(static_cast<std::size_t>(it - feature_names.begin()));
  }
  Dataset out;
  out.feature_names.assign(names.begin(), names.end());
  out.rows.reserve(rows.size());
  for (const auto& row : rows) {
    FeatureRow picked{row.token_id, {}, row.label};
    picked.values.reserve(columns.size());
    for (std::size_t c : columns) picked.values.push_back(row.values[c]);
    out.rows.push_back(std::move(picked));
  }
  return out;
}

bool same_content(const Dataset& a, const Dataset& b) {
  if (a.feature_names != b.feature_names || a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    if (a.rows[i].label != b.rows[i].label || a.rows[i].values != b.rows[i].values) return false;
  }
  return true;
}

std::vector<std::string> feature_names(const TokenTrace& reference, const FeatureConfig& config) {
  std::vector<std::string> names;
  for (std::size_t p : config.ads_layers.resolve(reference)) {
    names.push_back("ads_L" + std::to_string(reference.layers[p].layer_index));
  }
  for (std::size_t p : config.cgc_layers.resolve(reference)) {
    names.push_back("cgc_L" + std::to_string(reference.layers[p].layer_index));
  }
  return names;
}

std::vector<double> token_features(const TokenTrace& trace, const FeatureConfig& config) {
  try {
    std::vector<double> values = ads_vector(trace, config.ads, config.ads_layers);
    const std::vector<double> cgc = cgc_vector(trace, config.cgc, config.cgc_layers);
    values.insert(values.end(), cgc.begin(), cgc.end());
    return values;
  } catch (const DegenerateError& e) {
    throw DegenerateError("token '" + trace.token_id + "': " + e.what());
  }
}

Dataset build_features(std::span<const TokenTrace> traces, const LabelMap* labels,
                       const FeatureConfig& config, std::size_t threads) {
  std::vector<std::size_t> picked;
  std::vector<Label> picked_labels;
  if (labels != nullptr) {
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < traces.size(); ++i) position.emplace(traces[i].token_id, i);
    std::string missing;
    for (const auto& [token_id, label] : *labels) {
      if (!position.contains(token_id)) missing += (missing.empty() ? "" : ", ") + token_id;
    }
    if (!missing.empty()) throw UsageError("labeled tokens not found in bundle: " + missing);
    for (std::size_t i = 0; i < traces.size(); ++i) {
      auto it = labels->find(traces[i].token_id);
      if (it == labels->end() || it->second == Label::unknown) continue;
      picked.push_back(i);
      picked_labels.push_back(it->second);
    }
  } else {
    for (std::size_t i = 0; i < traces.size(); ++i) {
      if (traces[i].label == Label::unknown) continue;
      picked.push_back(i);
      picked_labels.push_back(traces[i].label);
    }
  }

  Dataset dataset;
  if (traces.empty()) return dataset;
  dataset.feature_names = feature_names(traces.front(), config);
  dataset.rows.resize(picked.size());
  parallel_for(picked.size(), threads, [&](std::size_t r) {
    const TokenTrace& trace = traces[picked[r]];
    dataset.rows[r] = FeatureRow{trace.token_id, token_features(trace, config), picked_labels[r]};
  });
  for (const auto& row : dataset.rows) {
    if (row.values.size() != dataset.width()) {
      throw InvariantError("token '" + row.token_id + "': feature width differs from the first row");
    }
  }
  return dataset;
}

namespace {

std::string format_double(double value) {
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, end);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

}  // namespace

std::string dataset_to_csv(const Dataset& dataset) {
  std::string out;
  for (const auto& name : dataset.feature_names) out += name + ",";
  out += "label\n";
  for (const auto& row : dataset.rows) {
    for (double v : row.values) out += format_double(v) + ",";
    out += std::string(to_string(row.label)) + "\n";
  }
  return out;
}

void export_dataset(const Dataset& dataset, const std::string& path) {
  bytes::write_text(path, dataset_to_csv(dataset));
}

Dataset dataset_from_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(source + ": empty CSV");
  std::vector<std::string> header = split_csv_line(line);
  if (header.empty() || header.back() != "label") {
    throw FormatError(source + ":1: last header column must be 'label'");
  }
  header.pop_back();

  Dataset dataset;
  dataset.feature_names = std::move(header);
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line == "\r") continue;
    const std::string where = source + ":" + std::to_string(line_number);
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != dataset.width() + 1) {
      throw FormatError(where + ": row has " + std::to_string(cells.size()) + " columns, header has " +
                        std::to_string(dataset.width() + 1));
    }
    FeatureRow row;
    row.token_id = "row" + std::to_string(dataset.rows.size());
    row.values.reserve(dataset.width());
    for (std::size_t c = 0; c < dataset.width(); ++c) {
      const std::string& cell = cells[c];
      double value = 0.0;
      auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (ec != std::errc() || end != cell.data() + cell.size() || !std::isfinite(value)) {
        throw FormatError(where + ": column '" + dataset.feature_names[c] + "' is not a finite number");
      }
      row.values.push_back(value);
    }
    const std::string& label = cells.back();
    if (label == "grounded") {
      row.label = Label::grounded;
    } else if (label == "hallucinated") {
      row.label = Label::hallucinated;
    } else {
      throw FormatError(where + ": unknown label '" + label + "'");
    }
    dataset.rows.push_back(std::move(row));
  }
  return dataset;
}

Dataset import_dataset(const std::string& path) { return dataset_from_csv(bytes::read_text(path), path); }

}  // namespace gchk
