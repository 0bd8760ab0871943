#pragma once

// File formats:
//
//   Graph manifest (JSON)
//     {"nodes": n, "edges": "edges.csv", "attributes": "attributes.csv",
//      "labels": "labels.csv" (optional), "attribute_kind": "binary" | "continuous"}
//     Paths are relative to the manifest's directory.
//   edges.csv       two integer columns "u,v", one undirected edge per row, no header
//   attributes.csv  n rows of d comma-separated reals, no header
//   labels.csv      n rows of 0/1, no header
//
//   Model checkpoint (JSON), format "hcm-checkpoint" version 1:
//     {"format", "version", "arch": {"gcn_dims", "mlp_dims", "use_bias"},
//      "gcn": [layer...], "mlp": [layer...], "config": {...}}
//     layer = {"rows", "cols", "weights": row-major array, "bias": array}
//
//   Scores CSV, schema version 1:
//     node_id,s_ahp,s_iv,s_hav,isolated[,ground_truth]
//
// Reals are written with 17 significant digits and read back exactly.

#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "hcm/error.hpp"
#include "hcm/graph.hpp"
#include "hcm/inference.hpp"
#include "hcm/model.hpp"
#include "hcm/pipeline.hpp"

namespace hcm::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kCheckpointVersion = 1;
inline constexpr int kScoresSchemaVersion = 1;
inline constexpr int kMetricsSchemaVersion = 1;

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes via a temporary file and rename, so readers never see a partial file.
inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw InputError("cannot create directory " + path.parent_path().string());
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
    if (!out) throw InputError("write failed for " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw InputError("cannot move " + tmp.string() + " to " + path.string());
}

inline json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw InputError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Rows of comma-separated numeric fields. Blank lines are skipped.
inline std::vector<std::vector<double>> parse_numeric_csv(std::string_view text,
                                                          const std::string& what) {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      if (end == text.size()) break;
      continue;
    }
    std::vector<double> row;
    const char* p = line.c_str();
    while (true) {
      char* stop = nullptr;
      errno = 0;
      const double v = std::strtod(p, &stop);
      if (stop == p || errno == ERANGE) {
        throw InputError(what + ": bad number on line " + std::to_string(line_no));
      }
      row.push_back(v);
      while (*stop == ' ' || *stop == '\t') ++stop;
      if (*stop == '\0') break;
      if (*stop != ',') throw InputError(what + ": bad separator on line " + std::to_string(line_no));
      p = stop + 1;
    }
    rows.push_back(std::move(row));
    if (end == text.size()) break;
  }
  return rows;
}

inline std::vector<Edge> read_edges_csv(const fs::path& path, std::size_t node_count) {
  std::vector<Edge> edges;
  const auto rows = parse_numeric_csv(read_text(path), path.string());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 2) throw InputError(path.string() + ": edge row " + std::to_string(i + 1) + " must have two columns");
    for (double v : r) {
      if (v < 0 || v != std::floor(v) || v >= static_cast<double>(node_count)) {
        throw InputError(path.string() + ": edge endpoint " + format_real(v) + " out of range");
      }
    }
    edges.push_back({static_cast<NodeId>(r[0]), static_cast<NodeId>(r[1])});
  }
  return edges;
}

inline Matrix read_attributes_csv(const fs::path& path, std::size_t node_count) {
  const auto rows = parse_numeric_csv(read_text(path), path.string());
  if (rows.size() != node_count) {
    throw InputError(path.string() + ": expected " + std::to_string(node_count) + " rows, found " +
                     std::to_string(rows.size()));
  }
  const std::size_t d = rows.empty() ? 0 : rows[0].size();
  Matrix x(node_count, d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d) throw InputError(path.string() + ": ragged row " + std::to_string(i + 1));
    for (std::size_t c = 0; c < d; ++c) x(i, c) = rows[i][c];
  }
  return x;
}

inline std::vector<std::uint8_t> read_labels_csv(const fs::path& path, std::size_t node_count) {
  const auto rows = parse_numeric_csv(read_text(path), path.string());
  if (rows.size() != node_count) {
    throw InputError(path.string() + ": expected " + std::to_string(node_count) + " labels, found " +
                     std::to_string(rows.size()));
  }
  std::vector<std::uint8_t> labels(node_count);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != 1 || (rows[i][0] != 0.0 && rows[i][0] != 1.0)) {
      throw InputError(path.string() + ": label row " + std::to_string(i + 1) + " must be 0 or 1");
    }
    labels[i] = rows[i][0] == 1.0;
  }
  return labels;
}

inline std::string edges_csv(const std::vector<Edge>& edges) {
  std::string out;
  for (const Edge& e : edges) out += std::to_string(e.u) + "," + std::to_string(e.v) + "\n";
  return out;
}

inline std::string matrix_csv(const Matrix& m) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_real(m(r, c));
    }
    out += '\n';
  }
  return out;
}

inline std::string labels_csv(const std::vector<std::uint8_t>& labels) {
  std::string out;
  for (auto v : labels) out += v ? "1\n" : "0\n";
  return out;
}

// ---------------------------------------------------------------------------
// Graph manifest
// ---------------------------------------------------------------------------

inline std::string to_string(AttributeKind k) {
  return k == AttributeKind::binary ? "binary" : "continuous";
}

inline AttributeKind parse_attribute_kind(const std::string& s) {
  if (s == "binary") return AttributeKind::binary;
  if (s == "continuous") return AttributeKind::continuous;
  throw InputError("attribute_kind must be \"binary\" or \"continuous\", got \"" + s + "\"");
}

inline AttributedNetwork load_network(const fs::path& manifest_path) {
  const json m = read_json(manifest_path);
  const fs::path base = manifest_path.parent_path();
  try {
    AttributedNetwork net;
    net.node_count = m.at("nodes").get<std::size_t>();
    detail::require(net.node_count >= 1, "manifest: nodes must be >= 1");
    net.attribute_kind = parse_attribute_kind(m.value("attribute_kind", std::string("continuous")));
    const auto raw_edges = read_edges_csv(base / m.at("edges").get<std::string>(), net.node_count);
    net.edges = build_adjacency(std::span<const Edge>(raw_edges), net.node_count).edges();
    net.attributes = read_attributes_csv(base / m.at("attributes").get<std::string>(), net.node_count);
    if (m.contains("labels") && !m.at("labels").is_null()) {
      net.anomaly_flags = read_labels_csv(base / m.at("labels").get<std::string>(), net.node_count);
    }
    net.validate();
    return net;
  } catch (const json::exception& e) {
    throw InputError("manifest " + manifest_path.string() + ": " + e.what());
  }
}

/// Writes manifest.json, edges.csv, attributes.csv and (if present) labels.csv
/// into `dir`; returns the manifest path.
inline fs::path save_network(const AttributedNetwork& net, const fs::path& dir) {
  net.validate();
  json m;
  m["nodes"] = net.node_count;
  m["edges"] = "edges.csv";
  m["attributes"] = "attributes.csv";
  if (net.anomaly_flags) m["labels"] = "labels.csv";
  m["attribute_kind"] = to_string(net.attribute_kind);
  write_text(dir / "edges.csv", edges_csv(net.edges));
  write_text(dir / "attributes.csv", matrix_csv(net.attributes));
  if (net.anomaly_flags) write_text(dir / "labels.csv", labels_csv(*net.anomaly_flags));
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  return dir / "manifest.json";
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgld ? "sgld" : "sgd"; }
inline std::string to_string(ScoreKind k) { return k == ScoreKind::ahp ? "ahp" : "hav"; }
inline std::string to_string(Neighborhood k) {
  return k == Neighborhood::original ? "original" : "dropped";
}
inline std::string to_string(PredictionMode k) {
  return k == PredictionMode::argmax ? "argmax" : "expected";
}

template <typename E>
E parse_enum(const std::string& s, std::initializer_list<E> options, const char* what) {
  for (E e : options)
    if (to_string(e) == s) return e;
  throw InputError(std::string("unknown ") + what + " \"" + s + "\"");
}

inline OptimizerKind parse_optimizer(const std::string& s) {
  return parse_enum(s, {OptimizerKind::sgld, OptimizerKind::sgd}, "optimizer");
}
inline ScoreKind parse_score(const std::string& s) {
  return parse_enum(s, {ScoreKind::ahp, ScoreKind::hav}, "score kind");
}
inline Neighborhood parse_neighborhood(const std::string& s) {
  return parse_enum(s, {Neighborhood::original, Neighborhood::dropped}, "neighborhood");
}
inline PredictionMode parse_prediction(const std::string& s) {
  return parse_enum(s, {PredictionMode::argmax, PredictionMode::expected}, "prediction mode");
}

inline json config_to_json(const RunConfig& c) {
  json j;
  j["dataset"] = c.dataset;
  j["output_dir"] = c.output_dir;
  j["drop_ratio"] = c.drop_ratio;
  j["classes"] = c.classes;
  j["sample_ratio"] = c.sample_ratio;
  j["gcn_layers"] = c.gcn_layers;
  j["gcn_width"] = c.gcn_width;
  j["mlp_width"] = c.mlp_width;
  j["use_bias"] = c.use_bias;
  j["pca_dim"] = c.pca_dim;
  j["lr"] = c.lr;
  j["weight_decay"] = c.weight_decay;
  j["optimizer"] = to_string(c.optimizer);
  j["lr_decay"] = c.schedule.enabled;
  j["lr_decay_t0"] = c.schedule.t0;
  j["lr_decay_gamma"] = c.schedule.gamma;
  j["noise_scale"] = c.noise_scale;
  j["burn_in_epochs"] = c.burn_in_epochs;
  j["posterior_samples"] = c.posterior_samples;
  j["score"] = to_string(c.score);
  j["neighborhood"] = to_string(c.neighborhood);
  j["prediction"] = to_string(c.prediction);
  j["auc_trace"] = c.auc_trace;
  j["seed"] = c.seed;
  return j;
}

/// Applies the keys present in `j` on top of `c`. Unknown keys are rejected.
inline RunConfig config_from_json(const json& j, RunConfig c = {}) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "dataset") c.dataset = v.get<std::string>();
      else if (key == "output_dir") c.output_dir = v.get<std::string>();
      else if (key == "drop_ratio") c.drop_ratio = v.get<double>();
      else if (key == "classes") c.classes = v.get<std::size_t>();
      else if (key == "sample_ratio") c.sample_ratio = v.get<double>();
      else if (key == "gcn_layers") c.gcn_layers = v.get<std::size_t>();
      else if (key == "gcn_width") c.gcn_width = v.get<std::size_t>();
      else if (key == "mlp_width") c.mlp_width = v.get<std::size_t>();
      else if (key == "use_bias") c.use_bias = v.get<bool>();
      else if (key == "pca_dim") c.pca_dim = v.get<std::size_t>();
      else if (key == "lr") c.lr = v.get<double>();
      else if (key == "weight_decay") c.weight_decay = v.get<double>();
      else if (key == "optimizer") c.optimizer = parse_optimizer(v.get<std::string>());
      else if (key == "lr_decay") c.schedule.enabled = v.get<bool>();
      else if (key == "lr_decay_t0") c.schedule.t0 = v.get<double>();
      else if (key == "lr_decay_gamma") c.schedule.gamma = v.get<double>();
      else if (key == "noise_scale") c.noise_scale = v.get<double>();
      else if (key == "burn_in_epochs") c.burn_in_epochs = v.get<std::size_t>();
      else if (key == "posterior_samples") c.posterior_samples = v.get<std::size_t>();
      else if (key == "score") c.score = parse_score(v.get<std::string>());
      else if (key == "neighborhood") c.neighborhood = parse_neighborhood(v.get<std::string>());
      else if (key == "prediction") c.prediction = parse_prediction(v.get<std::string>());
      else if (key == "auc_trace") c.auc_trace = v.get<bool>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else throw InputError("unknown config key \"" + key + "\"");
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline json layers_to_json(const std::vector<DenseLayer>& layers) {
  json arr = json::array();
  for (const auto& l : layers) {
    arr.push_back({{"rows", l.weight.rows()},
                   {"cols", l.weight.cols()},
                   {"weights", l.weight.values()},
                   {"bias", l.bias}});
  }
  return arr;
}

inline std::vector<DenseLayer> layers_from_json(const json& arr) {
  std::vector<DenseLayer> layers;
  for (const auto& l : arr) {
    const auto rows = l.at("rows").get<std::size_t>();
    const auto cols = l.at("cols").get<std::size_t>();
    layers.push_back({Matrix(rows, cols, l.at("weights").get<std::vector<double>>()),
                      l.at("bias").get<std::vector<double>>()});
  }
  return layers;
}

inline json checkpoint_to_json(const ModelParams& p, const std::optional<RunConfig>& cfg = {}) {
  json j;
  j["format"] = "hcm-checkpoint";
  j["version"] = kCheckpointVersion;
  j["arch"] = {{"gcn_dims", p.arch.gcn_dims},
               {"mlp_dims", p.arch.mlp_dims},
               {"use_bias", p.arch.use_bias}};
  j["gcn"] = layers_to_json(p.gcn);
  j["mlp"] = layers_to_json(p.mlp);
  if (cfg) j["config"] = config_to_json(*cfg);
  return j;
}

struct Checkpoint {
  ModelParams params;
  std::optional<RunConfig> config;
};

inline Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "hcm-checkpoint") throw InputError("not an hcm checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw InputError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint c;
    c.params.arch.gcn_dims = j.at("arch").at("gcn_dims").get<std::vector<std::size_t>>();
    c.params.arch.mlp_dims = j.at("arch").at("mlp_dims").get<std::vector<std::size_t>>();
    c.params.arch.use_bias = j.at("arch").at("use_bias").get<bool>();
    c.params.arch.validate();
    c.params.gcn = layers_from_json(j.at("gcn"));
    c.params.mlp = layers_from_json(j.at("mlp"));
    auto check = [&](const std::vector<std::size_t>& dims, const std::vector<DenseLayer>& layers) {
      detail::require(layers.size() + 1 == dims.size(), "checkpoint layer count mismatch");
      for (std::size_t l = 0; l < layers.size(); ++l) {
        detail::require(layers[l].weight.rows() == dims[l] && layers[l].weight.cols() == dims[l + 1],
                        "checkpoint layer shape mismatch");
        detail::require(layers[l].bias.size() == (c.params.arch.use_bias ? dims[l + 1] : 0),
                        "checkpoint bias shape mismatch");
      }
    };
    check(c.params.arch.gcn_dims, c.params.gcn);
    check(c.params.arch.mlp_dims, c.params.mlp);
    if (j.contains("config")) c.config = config_from_json(j.at("config"));
    return c;
  } catch (const json::exception& e) {
    throw InputError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const fs::path& path, const ModelParams& p,
                            const std::optional<RunConfig>& cfg = {}) {
  write_text(path, checkpoint_to_json(p, cfg).dump() + "\n");
}

inline Checkpoint load_checkpoint(const fs::path& path) {
  return checkpoint_from_json(read_json(path));
}

// ---------------------------------------------------------------------------
// Scores and metrics
// ---------------------------------------------------------------------------

inline std::string scores_csv(const AnomalyScores& s,
                              const std::optional<std::vector<std::uint8_t>>& truth) {
  std::string out = "node_id,s_ahp,s_iv,s_hav,isolated";
  if (truth) out += ",ground_truth";
  out += '\n';
  for (std::size_t i = 0; i < s.s_ahp.size(); ++i) {
    out += std::to_string(i) + ',' + format_real(s.s_ahp[i]) + ',' + format_real(s.s_iv[i]) + ',' +
           format_real(s.s_hav[i]) + ',' + (s.isolated[i] ? '1' : '0');
    if (truth) out += std::string(",") + ((*truth)[i] ? '1' : '0');
    out += '\n';
  }
  return out;
}

/// Score columns keyed by header name, rows joined by node_id.
struct ScoreTable {
  std::vector<NodeId> node_ids;
  std::map<std::string, std::vector<double>> columns;
};

inline ScoreTable read_scores_csv(const fs::path& path) {
  const std::string text = read_text(path);
  const auto header_end = text.find('\n');
  std::string header = text.substr(0, header_end);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  std::vector<std::string> names;
  std::stringstream hs(header);
  for (std::string name; std::getline(hs, name, ',');) names.push_back(name);
  if (names.empty() || names[0] != "node_id") {
    throw InputError(path.string() + ": first column must be node_id");
  }
  const auto rows = parse_numeric_csv(
      header_end == std::string::npos ? std::string_view{} : std::string_view(text).substr(header_end + 1),
      path.string());
  ScoreTable t;
  for (std::size_t c = 1; c < names.size(); ++c) t.columns[names[c]];
  for (const auto& r : rows) {
    if (r.size() != names.size()) throw InputError(path.string() + ": row width does not match header");
    if (r[0] < 0 || r[0] != std::floor(r[0])) throw InputError(path.string() + ": bad node_id");
    t.node_ids.push_back(static_cast<NodeId>(r[0]));
    for (std::size_t c = 1; c < names.size(); ++c) t.columns[names[c]].push_back(r[c]);
  }
  return t;
}

inline json metrics_json(const RunConfig& cfg, const RunResult& r, const AttributedNetwork& net) {
  json m;
  m["schema"] = "hcm-metrics";
  m["version"] = kMetricsSchemaVersion;
  m["auc_ahp"] = r.scoring.auc_ahp ? json(*r.scoring.auc_ahp) : json(nullptr);
  m["auc_hav"] = r.scoring.auc_hav ? json(*r.scoring.auc_hav) : json(nullptr);
  m["loss_curve"] = r.training.loss_curve;
  m["wall_time"] = r.wall_time_seconds;
  m["node_count"] = net.node_count;
  m["edge_count"] = net.edges.size();
  std::size_t isolated = 0;
  for (auto v : r.scoring.scores.isolated) isolated += v;
  m["isolated_count"] = isolated;
  if (net.anomaly_flags) {
    const auto& y = *net.anomaly_flags;
    std::size_t count = 0;
    for (auto v : y) count += v;
    m["anomaly_count"] = count;
    const auto& s = r.scoring.scores;
    m["mean_ahp_anomalous"] = mean_over_label(s.s_ahp, y, true);
    m["mean_ahp_normal"] = mean_over_label(s.s_ahp, y, false);
    m["mean_hav_anomalous"] = mean_over_label(s.s_hav, y, true);
    m["mean_hav_normal"] = mean_over_label(s.s_hav, y, false);
  }
  m["config"] = config_to_json(cfg);
  return m;
}

inline std::string trace_csv(const TrainResult& t) {
  std::string out = t.auc_trace.empty() ? "epoch,loss\n" : "epoch,loss,auc_ahp\n";
  for (std::size_t e = 0; e < t.loss_curve.size(); ++e) {
    out += std::to_string(e + 1) + ',' + format_real(t.loss_curve[e]);
    if (!t.auc_trace.empty()) out += ',' + format_real(t.auc_trace[e]);
    out += '\n';
  }
  return out;
}

}  // namespace hcm::io
