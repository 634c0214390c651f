#pragma once

// Experiment configuration: a JSON document with three required fields
// (task.kind, model.kind, optim.iters); everything else has a default that
// is written back into the snapshot.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "inrlab/errors.hpp"
#include "inrlab/models.hpp"
#include "inrlab/optim.hpp"

namespace inrlab {

using Json = nlohmann::ordered_json;

struct TaskConfig {
  std::string kind;  // stripe | image | sdf
  std::size_t points = 256;
  std::size_t bands = 8;
  std::size_t gap = 1;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t stride = 2;
  std::string pattern = "mosaic";
  std::string image_path;  // optional PNG; overrides pattern, height and width
  std::string shape = "sphere";
  double radius = 0.3;
  double minor_radius = 0.1;
  std::size_t eval_grid = 64;
  double sigma = 0.02;
  double near_fraction = 0.5;
};

struct OptimConfig {
  double lr = 1e-3;
  double table_lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool cosine_decay = false;
  std::size_t iters = 0;
  std::size_t batch_size = 0;
  std::size_t eval_interval = 0;
};

struct ExportConfig {
  bool slices = false;
  std::size_t slice_lattice = 64;
  std::vector<std::size_t> slice_axes = {0, 1};
  std::vector<double> slice_fixed;  // one value per trunk input when the trunk is wider than 2
  std::size_t profile_samples = 0;  // > 0 writes a continuity profile across the domain diagonal
};

struct ExperimentConfig {
  TaskConfig task;
  ModelConfig model;
  OptimConfig optim;
  ExportConfig exports;
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
};

// ---------------------------------------------------------------------------
// JSON mapping
// ---------------------------------------------------------------------------

inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["task"] = {{"kind", c.task.kind},
               {"points", c.task.points},
               {"bands", c.task.bands},
               {"gap", c.task.gap},
               {"height", c.task.height},
               {"width", c.task.width},
               {"stride", c.task.stride},
               {"pattern", c.task.pattern},
               {"image_path", c.task.image_path},
               {"shape", c.task.shape},
               {"radius", c.task.radius},
               {"minor_radius", c.task.minor_radius},
               {"eval_grid", c.task.eval_grid},
               {"sigma", c.task.sigma},
               {"near_fraction", c.task.near_fraction}};
  const ModelConfig& m = c.model;
  j["model"] = {{"kind", std::string(to_string(m.kind))},
                {"hidden_layers", m.hidden_layers},
                {"hidden_width", m.hidden_width},
                {"activation", m.trunk_activation},
                {"siren_w0", m.siren_w0},
                {"pe_freqs", m.pe_freqs},
                {"table_resolution", m.table_resolution},
                {"table_width", m.table_width},
                {"table_init_scale", m.table_init_scale},
                {"grid",
                 {{"levels", m.grid.num_levels},
                  {"log2_table_size", m.grid.log2_table_size},
                  {"feature_width", m.grid.feature_width},
                  {"base_resolution", m.grid.base_resolution},
                  {"growth_factor", m.grid.growth_factor}}},
                {"transform", std::string(to_string(m.transform))},
                {"transform_freqs", m.transform_freqs},
                {"transform_hidden", m.transform_hidden}};
  j["optim"] = {{"lr", c.optim.lr},
                {"table_lr", c.optim.table_lr},
                {"beta1", c.optim.beta1},
                {"beta2", c.optim.beta2},
                {"eps", c.optim.eps},
                {"cosine_decay", c.optim.cosine_decay},
                {"iters", c.optim.iters},
                {"batch_size", c.optim.batch_size},
                {"eval_interval", c.optim.eval_interval}};
  j["export"] = {{"slices", c.exports.slices},
                 {"slice_lattice", c.exports.slice_lattice},
                 {"slice_axes", c.exports.slice_axes},
                 {"slice_fixed", c.exports.slice_fixed},
                 {"profile_samples", c.exports.profile_samples}};
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  return j;
}

namespace detail {

template <class T>
void read_field(const Json& obj, const char* key, const std::string& path, T& out) {
  try {
    obj.at(key).get_to(out);
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config field '" + path + "." + key + "' has the wrong type");
  }
}

// Walks `user` against `defaults`, reporting keys the schema does not know.
inline void collect_unknown(const Json& user, const Json& defaults, const std::string& prefix,
                            std::vector<std::string>& out) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!defaults.contains(it.key())) {
      out.push_back(path);
    } else if (it.value().is_object() && defaults[it.key()].is_object()) {
      collect_unknown(it.value(), defaults[it.key()], path, out);
    }
  }
}

inline void merge_into(Json& base, const Json& user) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    if (it.value().is_object() && base.contains(it.key()) && base[it.key()].is_object()) {
      merge_into(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

inline bool has_path(const Json& j, const std::string& dotted) {
  const Json* cur = &j;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!cur->is_object() || !cur->contains(part)) return false;
    cur = &(*cur)[part];
  }
  return !cur->is_null();
}

}  // namespace detail

inline ExperimentConfig from_json(const Json& merged) {
  ExperimentConfig c;
  const Json& t = merged.at("task");
  detail::read_field(t, "kind", "task", c.task.kind);
  detail::read_field(t, "points", "task", c.task.points);
  detail::read_field(t, "bands", "task", c.task.bands);
  detail::read_field(t, "gap", "task", c.task.gap);
  detail::read_field(t, "height", "task", c.task.height);
  detail::read_field(t, "width", "task", c.task.width);
  detail::read_field(t, "stride", "task", c.task.stride);
  detail::read_field(t, "pattern", "task", c.task.pattern);
  detail::read_field(t, "image_path", "task", c.task.image_path);
  detail::read_field(t, "shape", "task", c.task.shape);
  detail::read_field(t, "radius", "task", c.task.radius);
  detail::read_field(t, "minor_radius", "task", c.task.minor_radius);
  detail::read_field(t, "eval_grid", "task", c.task.eval_grid);
  detail::read_field(t, "sigma", "task", c.task.sigma);
  detail::read_field(t, "near_fraction", "task", c.task.near_fraction);

  const Json& m = merged.at("model");
  std::string kind, transform;
  detail::read_field(m, "kind", "model", kind);
  c.model.kind = parse_model_kind(kind);
  detail::read_field(m, "hidden_layers", "model", c.model.hidden_layers);
  detail::read_field(m, "hidden_width", "model", c.model.hidden_width);
  detail::read_field(m, "activation", "model", c.model.trunk_activation);
  detail::read_field(m, "siren_w0", "model", c.model.siren_w0);
  detail::read_field(m, "pe_freqs", "model", c.model.pe_freqs);
  detail::read_field(m, "table_resolution", "model", c.model.table_resolution);
  detail::read_field(m, "table_width", "model", c.model.table_width);
  detail::read_field(m, "table_init_scale", "model", c.model.table_init_scale);
  const Json& g = m.at("grid");
  detail::read_field(g, "levels", "model.grid", c.model.grid.num_levels);
  detail::read_field(g, "log2_table_size", "model.grid", c.model.grid.log2_table_size);
  detail::read_field(g, "feature_width", "model.grid", c.model.grid.feature_width);
  detail::read_field(g, "base_resolution", "model.grid", c.model.grid.base_resolution);
  detail::read_field(g, "growth_factor", "model.grid", c.model.grid.growth_factor);
  detail::read_field(m, "transform", "model", transform);
  c.model.transform = parse_transform_kind(transform);
  detail::read_field(m, "transform_freqs", "model", c.model.transform_freqs);
  detail::read_field(m, "transform_hidden", "model", c.model.transform_hidden);

  const Json& o = merged.at("optim");
  detail::read_field(o, "lr", "optim", c.optim.lr);
  detail::read_field(o, "table_lr", "optim", c.optim.table_lr);
  detail::read_field(o, "beta1", "optim", c.optim.beta1);
  detail::read_field(o, "beta2", "optim", c.optim.beta2);
  detail::read_field(o, "eps", "optim", c.optim.eps);
  detail::read_field(o, "cosine_decay", "optim", c.optim.cosine_decay);
  detail::read_field(o, "iters", "optim", c.optim.iters);
  detail::read_field(o, "batch_size", "optim", c.optim.batch_size);
  detail::read_field(o, "eval_interval", "optim", c.optim.eval_interval);

  const Json& e = merged.at("export");
  detail::read_field(e, "slices", "export", c.exports.slices);
  detail::read_field(e, "slice_lattice", "export", c.exports.slice_lattice);
  detail::read_field(e, "slice_axes", "export", c.exports.slice_axes);
  detail::read_field(e, "slice_fixed", "export", c.exports.slice_fixed);
  detail::read_field(e, "profile_samples", "export", c.exports.profile_samples);

  detail::read_field(merged, "seed", "", c.seed);
  detail::read_field(merged, "output_dir", "", c.output_dir);
  return c;
}

// ---------------------------------------------------------------------------
// Overrides, validation, loading
// ---------------------------------------------------------------------------

/// Applies "a.b.c=value". The value is parsed as JSON when possible and
/// taken as a plain string otherwise, so model.kind=ngp and optim.lr=1e-3 both work.
inline void apply_override(Json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  Json* cur = &j;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    Json& next = (*cur)[parts[i]];
    if (next.is_null()) next = Json::object();
    if (!next.is_object()) throw ConfigError("override '" + key + "': '" + parts[i] + "' is not a section");
    cur = &next;
  }
  (*cur)[parts.back()] = value;
}

/// Fills the table size from the task when left empty: one node per training
/// sample along each axis (matches training_lattice()).
inline void resolve_defaults(ExperimentConfig& c) {
  if (!c.model.table_resolution.empty()) return;
  const auto nodes = [](std::size_t n, std::size_t s) { return (n + s - 1) / s + 1; };
  if (c.task.kind == "stripe") {
    c.model.table_resolution = {nodes(c.task.points, c.task.gap + 1)};
  } else if (c.task.kind == "image") {
    c.model.table_resolution = {nodes(c.task.height, c.task.stride), nodes(c.task.width, c.task.stride)};
  } else if (c.task.kind == "sdf") {
    c.model.table_resolution = {c.task.eval_grid, c.task.eval_grid, c.task.eval_grid};
  }
}

inline void validate(const ExperimentConfig& c) {
  std::vector<std::string> errs;
  if (c.task.kind != "stripe" && c.task.kind != "image" && c.task.kind != "sdf") {
    errs.push_back("task.kind must be stripe, image or sdf (got '" + c.task.kind + "')");
  }
  if (c.optim.iters == 0) errs.push_back("optim.iters must be >= 1");
  if (!(c.optim.lr > 0.0) || !(c.optim.table_lr > 0.0)) errs.push_back("optim learning rates must be > 0");
  if (c.model.hidden_width == 0) errs.push_back("model.hidden_width must be >= 1");
  if (c.task.shape != "sphere" && c.task.shape != "torus") errs.push_back("task.shape must be sphere or torus");
  if (c.exports.slice_axes.size() != 2) errs.push_back("export.slice_axes must hold two indices");
  if (c.exports.slice_lattice < 2) errs.push_back("export.slice_lattice must be >= 2");
  if (!errs.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ConfigError(msg);
  }
}

/// Defaults as a JSON tree (required fields are null).
inline Json default_config_json() {
  Json j = to_json(ExperimentConfig{});
  j["task"]["kind"] = nullptr;
  j["model"]["kind"] = nullptr;
  j["optim"]["iters"] = nullptr;
  return j;
}

/// User JSON (after overrides) -> validated config with every default filled in.
inline ExperimentConfig config_from_json(const Json& user) {
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  const Json defaults = default_config_json();
  std::vector<std::string> problems;
  detail::collect_unknown(user, defaults, "", problems);
  for (auto& p : problems) p = "unknown field '" + p + "'";
  for (const char* req : {"task.kind", "model.kind", "optim.iters"}) {
    if (!detail::has_path(user, req)) problems.push_back(std::string("missing required field '") + req + "'");
  }
  if (!problems.empty()) {
    std::string msg = "invalid config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  Json merged = defaults;
  detail::merge_into(merged, user);
  ExperimentConfig c = from_json(merged);
  resolve_defaults(c);
  validate(c);
  return c;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config '" + path + "' is not valid JSON");
  return j;
}

inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  Json j = read_json_file(path);
  for (const auto& o : overrides) apply_override(j, o);
  return config_from_json(j);
}

/// The snapshot written next to every run; loading it reproduces the config exactly.
inline std::string config_snapshot(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

}  // namespace inrlab
