#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "stylo/attribution.hpp"
#include "stylo/dateline.hpp"
#include "stylo/embed.hpp"
#include "stylo/errors.hpp"

namespace stylo {

// Models serialize as the binary embedding format plus a JSON sidecar that
// carries names, shapes, and the training config. Parameters are stored f32;
// reloaded models agree with the trained ones to f32 resolution.

// Attribution head: one row per class, [w_c .. w_c, b_c], ids = class names.
inline void save_attribution_model(const AttributionModel& m,
                                   const std::filesystem::path& emb_path,
                                   const std::filesystem::path& json_path,
                                   const std::string& config_hash) {
  EmbeddingMatrix rows;
  rows.dim = m.dim + 1;
  rows.provider = "attribution-head";
  for (std::size_t c = 0; c < m.n_classes(); ++c) {
    std::vector<float> row(m.dim + 1);
    for (std::size_t d = 0; d < m.dim; ++d)
      row[d] = static_cast<float>(m.weights[c * m.dim + d]);
    row[m.dim] = static_cast<float>(m.bias[c]);
    rows.add_row(m.class_names[c], std::span<const float>(row));
  }
  save_embeddings_binary(rows, emb_path);

  nlohmann::json j;
  j["kind"] = "attribution-head";
  j["dim"] = m.dim;
  j["classes"] = m.class_names;
  j["params_file"] = emb_path.filename().string();
  j["epochs"] = m.train_config.epochs;
  j["lr"] = m.train_config.lr;
  j["batch"] = m.train_config.batch;
  j["seed"] = m.train_config.seed;
  j["config_hash"] = config_hash;
  if (!m.loss_history.empty()) {
    j["initial_loss"] = m.loss_history.front();
    j["final_loss"] = m.loss_history.back();
  }
  write_text_file(json_path, j.dump(2) + "\n");
}

inline AttributionModel load_attribution_model(const std::filesystem::path& emb_path,
                                               const std::filesystem::path& json_path) {
  const auto j = nlohmann::json::parse(read_text_file(json_path));
  if (!j.contains("kind") || j["kind"] != "attribution-head")
    throw InputError(json_path.string() + ": not an attribution model sidecar");
  const EmbeddingMatrix rows = load_embeddings_binary(emb_path);
  AttributionModel m;
  m.dim = j["dim"].get<std::size_t>();
  if (rows.dim != m.dim + 1)
    throw InputError(emb_path.string() + ": parameter rows do not match sidecar dim");
  m.class_names = rows.ids;
  m.weights.resize(rows.rows() * m.dim);
  m.bias.resize(rows.rows());
  for (std::size_t c = 0; c < rows.rows(); ++c) {
    const auto r = rows.row(c);
    for (std::size_t d = 0; d < m.dim; ++d) m.weights[c * m.dim + d] = r[d];
    m.bias[c] = r[m.dim];
  }
  m.train_config.epochs = j["epochs"].get<std::size_t>();
  m.train_config.lr = j["lr"].get<double>();
  m.train_config.batch = j["batch"].get<std::size_t>();
  m.train_config.seed = j["seed"].get<std::uint64_t>();
  return m;
}

// Dateline network: one embedding file per layer; row o of layer l holds
// [W_l[o, :], b_l[o]] with dim = fan_in + 1.
inline void save_dateline_model(const DatelineModel& m, const std::filesystem::path& json_path,
                                const std::string& config_hash) {
  std::vector<std::string> layer_files;
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    const std::size_t in = m.layer_dims[l], out = m.layer_dims[l + 1];
    EmbeddingMatrix rows;
    rows.dim = in + 1;
    rows.provider = "year-regressor";
    const double* W = m.params.data() + m.weight_offset(l);
    const double* b = m.params.data() + m.bias_offset(l);
    for (std::size_t o = 0; o < out; ++o) {
      std::vector<float> row(in + 1);
      for (std::size_t i = 0; i < in; ++i) row[i] = static_cast<float>(W[o * in + i]);
      row[in] = static_cast<float>(b[o]);
      rows.add_row("u" + std::to_string(o), std::span<const float>(row));
    }
    std::filesystem::path layer_path = json_path;
    layer_path.replace_extension(".layer" + std::to_string(l) + ".emb");
    save_embeddings_binary(rows, layer_path);
    layer_files.push_back(layer_path.filename().string());
  }

  nlohmann::json j;
  j["kind"] = "year-regressor";
  j["layer_dims"] = m.layer_dims;
  j["layer_files"] = layer_files;
  j["hidden_dims"] = m.config.hidden_dims;
  j["p"] = m.config.p;
  j["epochs"] = m.config.epochs;
  j["lr"] = m.config.lr;
  j["batch"] = m.config.batch;
  j["seed"] = m.config.seed;
  j["year_min"] = m.year_min;
  j["year_max"] = m.year_max;
  j["config_hash"] = config_hash;
  if (!m.loss_history.empty()) {
    j["initial_loss"] = m.loss_history.front();
    j["final_loss"] = m.loss_history.back();
  }
  write_text_file(json_path, j.dump(2) + "\n");
}

inline DatelineModel load_dateline_model(const std::filesystem::path& json_path) {
  const auto j = nlohmann::json::parse(read_text_file(json_path));
  if (!j.contains("kind") || j["kind"] != "year-regressor")
    throw InputError(json_path.string() + ": not a year-regressor sidecar");
  DatelineModel m;
  m.layer_dims = j["layer_dims"].get<std::vector<std::size_t>>();
  m.config.hidden_dims = j["hidden_dims"].get<std::vector<std::size_t>>();
  m.config.p = j["p"].get<double>();
  m.config.epochs = j["epochs"].get<std::size_t>();
  m.config.lr = j["lr"].get<double>();
  m.config.batch = j["batch"].get<std::size_t>();
  m.config.seed = j["seed"].get<std::uint64_t>();
  m.year_min = j["year_min"].get<int>();
  m.year_max = j["year_max"].get<int>();
  m.params.resize(m.param_count());
  const auto layer_files = j["layer_files"].get<std::vector<std::string>>();
  if (layer_files.size() != m.n_layers())
    throw InputError(json_path.string() + ": layer file count does not match layer_dims");
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    const std::size_t in = m.layer_dims[l], out = m.layer_dims[l + 1];
    const EmbeddingMatrix rows =
        load_embeddings_binary(json_path.parent_path() / layer_files[l]);
    if (rows.dim != in + 1 || rows.rows() != out)
      throw InputError(layer_files[l] + ": layer shape does not match sidecar");
    double* W = m.params.data() + m.weight_offset(l);
    double* b = m.params.data() + m.bias_offset(l);
    for (std::size_t o = 0; o < out; ++o) {
      const auto r = rows.row(o);
      for (std::size_t i = 0; i < in; ++i) W[o * in + i] = r[i];
      b[o] = r[in];
    }
  }
  return m;
}

}  // namespace stylo
