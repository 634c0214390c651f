#pragma once

// Config -> task/model/fit wiring and the on-disk artifacts of a run.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "inrlab/checkpoint.hpp"
#include "inrlab/config.hpp"
#include "inrlab/models.hpp"
#include "inrlab/png.hpp"
#include "inrlab/tasks.hpp"

namespace inrlab {

inline Task build_task(const TaskConfig& t) {
  if (t.kind == "stripe") return make_stripe_task(t.points, t.bands, t.gap);
  if (t.kind == "image") {
    if (!t.image_path.empty()) {
      PngImage img = read_png(t.image_path);
      return make_image_task(img.pixels, img.height, img.width, t.stride);
    }
    return make_image_task(t.height, t.width, t.pattern, t.stride);
  }
  if (t.kind == "sdf") {
    SdfShape shape;
    shape.kind = t.shape == "torus" ? SdfShape::Kind::torus : SdfShape::Kind::sphere;
    shape.radius = t.radius;
    shape.minor_radius = t.minor_radius;
    SdfTask task = make_sdf_task(shape, t.eval_grid);
    task.near_surface_sigma = t.sigma;
    task.near_surface_fraction = t.near_fraction;
    return task;
  }
  throw ConfigError("unknown task kind '" + t.kind + "'");
}

inline ModelConfig model_config_for(const ExperimentConfig& c, const Task& task) {
  ModelConfig m = c.model;
  m.d_in = task_d_in(task);
  m.d_out = task_d_out(task);
  if (m.table_resolution.empty()) m.table_resolution = training_lattice(task);
  return m;
}

inline FitOptions fit_options_for(const ExperimentConfig& c) {
  FitOptions f;
  f.iters = c.optim.iters;
  f.batch_size = c.optim.batch_size;
  f.eval_interval = c.optim.eval_interval;
  f.seed = c.seed;
  f.adam.lr = c.optim.lr;
  f.adam.table_lr = c.optim.table_lr;
  f.adam.beta1 = c.optim.beta1;
  f.adam.beta2 = c.optim.beta2;
  f.adam.eps = c.optim.eps;
  f.adam.cosine_decay = c.optim.cosine_decay;
  f.adam.decay_steps = c.optim.cosine_decay ? c.optim.iters : 0;
  return f;
}

struct TrainedRun {
  ExperimentConfig config;
  Task task;
  Model model;
  RunRecord record;
};

/// Builds and fits; no files are touched.
inline TrainedRun train_experiment(const ExperimentConfig& c) {
  TrainedRun r{c, build_task(c.task), {}, {}};
  r.model = build_model(model_config_for(c, r.task), c.seed);
  r.record = fit(r.task, r.model, fit_options_for(c));
  return r;
}

// ---------------------------------------------------------------------------
// Artifact writers
// ---------------------------------------------------------------------------

/// Shortest text that parses back to the same double; empty for NaN.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

/// One row per completed iteration; evaluation columns are filled on evaluated iterations.
inline std::string metrics_csv(const RunRecord& rec) {
  std::string out = "iter,loss,train_psnr,heldout_psnr,heldout_mse,iou\n";
  std::size_t next = 0;
  for (std::size_t i = 0; i < rec.loss.size(); ++i) {
    out += std::to_string(i + 1) + "," + format_number(rec.loss[i]);
    if (next < rec.evals.size() && rec.evals[next].iter == i + 1) {
      const EvalPoint& e = rec.evals[next++];
      out += "," + format_number(e.train_psnr) + "," + format_number(e.heldout_psnr) + "," +
             format_number(e.heldout_mse) + "," + format_number(e.iou);
    } else {
      out += ",,,,";
    }
    out += "\n";
  }
  return out;
}

inline Json summary_json(const TrainedRun& r) {
  Json j;
  j["status"] = r.record.status;
  j["message"] = r.record.message;
  j["seed"] = r.record.seed;
  j["model"] = std::string(to_string(r.model.kind()));
  j["task"] = r.config.task.kind;
  j["iters_completed"] = r.record.loss.size();
  j["parameter_count"] = r.model.parameter_count();
  if (!r.record.evals.empty()) {
    const EvalPoint& e = r.record.final_eval();
    j["final"] = {{"iter", e.iter},
                  {"train_psnr", number_or_null(e.train_psnr)},
                  {"heldout_psnr", number_or_null(e.heldout_psnr)},
                  {"heldout_mse", number_or_null(e.heldout_mse)},
                  {"iou", number_or_null(e.iou)}};
  }
  j["config"] = to_json(r.config);
  return j;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + p.string() + "'");
}

inline std::filesystem::path prepare_output_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec || !std::filesystem::is_directory(p)) throw IoError("cannot create output directory '" + dir + "'");
  const auto probe = p / ".write_probe";
  {
    std::ofstream t(probe);
    if (!t) throw IoError("output directory '" + dir + "' is not writable");
  }
  std::filesystem::remove(probe, ec);
  return p;
}

/// Writes slices/slice.csv, slices/overlay.csv, slices/slice.png and, when
/// requested, slices/profile.csv.
inline void write_slices(const TrainedRun& r, const std::filesystem::path& dir) {
  const Dataset* data = nullptr;
  if (const auto* s = std::get_if<StripeTask>(&r.task)) data = &s->data;
  if (const auto* im = std::get_if<ImageTask>(&r.task)) data = &im->data;
  if (!data) throw ConfigError("export_slices: only stripe and image tasks have a coordinate dataset");
  const auto sdir = dir / "slices";
  std::filesystem::create_directories(sdir);

  SliceSpec spec;
  spec.lattice = r.config.exports.slice_lattice;
  spec.axis_h = r.config.exports.slice_axes.at(0);
  spec.axis_t = r.config.exports.slice_axes.at(1);
  spec.fixed = r.config.exports.slice_fixed;
  const SliceRaster raster = export_slices(r.model, *data, spec);

  std::string csv = "i,j,h,t";
  for (Eigen::Index k = 0; k < raster.values.cols(); ++k) csv += ",out" + std::to_string(k);
  csv += "\n";
  for (std::size_t i = 0; i < raster.lattice; ++i) {
    for (std::size_t j = 0; j < raster.lattice; ++j) {
      const auto row = static_cast<Eigen::Index>(i * raster.lattice + j);
      csv += std::to_string(i) + "," + std::to_string(j) + "," + format_number(raster.h_at(i)) + "," +
             format_number(raster.t_at(j));
      for (Eigen::Index k = 0; k < raster.values.cols(); ++k) csv += "," + format_number(raster.values(row, k));
      csv += "\n";
    }
  }
  write_text(sdir / "slice.csv", csv);

  std::string overlay = "index,split,h,t\n";
  for (const auto& p : raster.overlay) {
    overlay += std::to_string(p.index) + "," + (p.train ? "train" : "heldout") + "," + format_number(p.h) + "," +
               format_number(p.t) + "\n";
  }
  write_text(sdir / "overlay.csv", overlay);
  write_png((sdir / "slice.png").string(), raster.values, raster.lattice, raster.lattice);

  if (r.config.exports.profile_samples >= 2) {
    const std::size_t d = r.model.d_in();
    std::vector<double> xa(d, 0.0), xb(d, data->coords.maxCoeff());
    const auto slopes = continuity_profile(r.model, xa, xb, r.config.exports.profile_samples);
    std::string prof = "k,s,slope\n";
    for (std::size_t k = 0; k < slopes.size(); ++k) {
      const double s = static_cast<double>(k) / static_cast<double>(slopes.size());
      prof += std::to_string(k) + "," + format_number(s) + "," + format_number(slopes[k]) + "\n";
    }
    write_text(sdir / "profile.csv", prof);
  }
}

/// All run artifacts. Everything except timing.json is a deterministic
/// function of (config, seed).
inline void write_run_artifacts(const TrainedRun& r, const std::filesystem::path& dir) {
  write_text(dir / "config.snapshot", config_snapshot(r.config));
  write_text(dir / "metrics.csv", metrics_csv(r.record));
  write_text(dir / "summary.json", summary_json(r).dump(2) + "\n");
  write_text(dir / "timing.json", Json{{"wall_seconds", r.record.wall_seconds}}.dump(2) + "\n");
  save_checkpoint(r.model, (dir / "checkpoint.bin").string());
  if (const auto* im = std::get_if<ImageTask>(&r.task)) {
    write_png((dir / "recon.png").string(), r.model.predict(im->data.coords), im->height, im->width);
    write_png((dir / "target.png").string(), im->data.attrs, im->height, im->width);
  }
  if (r.config.exports.slices) write_slices(r, dir);
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Exit codes shared by the CLI verbs.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitNumeric = 3, kExitIo = 4 };

inline std::string error_line(const std::string& kind, const std::string& message) {
  return Json{{"error", kind}, {"message", message}}.dump();
}

/// `run`: fit, then write every artifact. Returns kExitNumeric when training hit a NaN.
inline int run_command(const ExperimentConfig& c, std::ostream& log = std::cout) {
  const auto dir = prepare_output_dir(c.output_dir);
  TrainedRun r = train_experiment(c);
  write_run_artifacts(r, dir);
  if (r.record.status != "ok") {
    std::cerr << error_line("numeric", r.record.message) << "\n";
    return kExitNumeric;
  }
  const EvalPoint& e = r.record.final_eval();
  log << to_string(r.model.kind()) << " on " << c.task.kind << ": train_psnr=" << format_number(e.train_psnr);
  if (!std::isnan(e.heldout_psnr)) log << " heldout_psnr=" << format_number(e.heldout_psnr);
  if (!std::isnan(e.iou)) log << " iou=" << format_number(e.iou);
  log << " (" << r.record.wall_seconds << " s) -> " << dir.string() << "\n";
  return kExitOk;
}

struct ComparisonRow {
  std::string metric;
  double a = 0.0;
  double b = 0.0;
  double delta = 0.0;  // b - a
};

struct Comparison {
  std::string model_a, model_b;
  std::vector<ComparisonRow> rows;
  double heldout_mse_ratio = std::numeric_limits<double>::quiet_NaN();  // b / a
};

inline Comparison compare_runs(const TrainedRun& a, const TrainedRun& b) {
  Comparison c{std::string(to_string(a.model.kind())), std::string(to_string(b.model.kind())), {}, {}};
  const EvalPoint& ea = a.record.final_eval();
  const EvalPoint& eb = b.record.final_eval();
  const auto add = [&](const char* name, double va, double vb) {
    if (std::isnan(va) && std::isnan(vb)) return;
    c.rows.push_back({name, va, vb, vb - va});
  };
  add("train_psnr", ea.train_psnr, eb.train_psnr);
  add("heldout_psnr", ea.heldout_psnr, eb.heldout_psnr);
  add("heldout_mse", ea.heldout_mse, eb.heldout_mse);
  add("iou", ea.iou, eb.iou);
  add("final_loss", a.record.loss.empty() ? std::nan("") : a.record.loss.back(),
      b.record.loss.empty() ? std::nan("") : b.record.loss.back());
  if (!std::isnan(ea.heldout_mse) && ea.heldout_mse > 0.0) c.heldout_mse_ratio = eb.heldout_mse / ea.heldout_mse;
  return c;
}

/// Both configs must describe the same task and seed.
inline void check_comparable(const ExperimentConfig& a, const ExperimentConfig& b) {
  std::vector<std::string> errs;
  if (to_json(a)["task"] != to_json(b)["task"]) errs.push_back("the two configs describe different tasks");
  if (a.seed != b.seed) errs.push_back("the two configs use different seeds");
  if (!errs.empty()) {
    std::string msg = "configs are not comparable:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ConfigError(msg);
  }
}

inline std::string comparison_table(const Comparison& c) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %16s %16s %14s\n", "metric", c.model_a.c_str(), c.model_b.c_str(), "delta(b-a)");
  out += line;
  for (const auto& r : c.rows) {
    std::snprintf(line, sizeof line, "%-14s %16.6g %16.6g %14.6g\n", r.metric.c_str(), r.a, r.b, r.delta);
    out += line;
  }
  if (!std::isnan(c.heldout_mse_ratio)) {
    std::snprintf(line, sizeof line, "%-14s %48.6g\n", "mse_ratio(b/a)", c.heldout_mse_ratio);
    out += line;
  }
  return out;
}

inline Json comparison_json(const Comparison& c) {
  Json j;
  j["a"] = c.model_a;
  j["b"] = c.model_b;
  Json rows = Json::array();
  for (const auto& r : c.rows) {
    rows.push_back({{"metric", r.metric}, {"a", number_or_null(r.a)}, {"b", number_or_null(r.b)},
                    {"delta", number_or_null(r.delta)}});
  }
  j["rows"] = rows;
  j["heldout_mse_ratio"] = number_or_null(c.heldout_mse_ratio);
  return j;
}

/// `compare`: runs both configs, writes a/ and b/ run directories plus
/// compare.json and compare.csv under out_dir.
inline int compare_command(const ExperimentConfig& a, const ExperimentConfig& b, const std::string& out_dir,
                           std::ostream& log = std::cout) {
  check_comparable(a, b);
  const auto dir = prepare_output_dir(out_dir);
  ExperimentConfig ca = a, cb = b;
  ca.output_dir = (dir / "a").string();
  cb.output_dir = (dir / "b").string();
  TrainedRun ra = train_experiment(ca);
  TrainedRun rb = train_experiment(cb);
  write_run_artifacts(ra, prepare_output_dir(ca.output_dir));
  write_run_artifacts(rb, prepare_output_dir(cb.output_dir));
  if (ra.record.status != "ok" || rb.record.status != "ok") {
    std::cerr << error_line("numeric", ra.record.status != "ok" ? ra.record.message : rb.record.message) << "\n";
    return kExitNumeric;
  }
  const Comparison cmp = compare_runs(ra, rb);
  write_text(dir / "compare.json", comparison_json(cmp).dump(2) + "\n");
  std::string csv = "metric,a,b,delta\n";
  for (const auto& r : cmp.rows) {
    csv += r.metric + "," + format_number(r.a) + "," + format_number(r.b) + "," + format_number(r.delta) + "\n";
  }
  write_text(dir / "compare.csv", csv);
  log << comparison_table(cmp);
  return kExitOk;
}

/// `export-slices`: trains (or restores from a checkpoint) and writes the slice files.
inline int export_slices_command(const ExperimentConfig& c, const std::optional<std::string>& checkpoint,
                                 std::ostream& log = std::cout) {
  const auto dir = prepare_output_dir(c.output_dir);
  TrainedRun r;
  if (checkpoint) {
    r.config = c;
    r.task = build_task(c.task);
    r.model = build_model(model_config_for(c, r.task), c.seed);
    load_checkpoint(r.model, *checkpoint);
  } else {
    r = train_experiment(c);
    if (r.record.status != "ok") {
      std::cerr << error_line("numeric", r.record.message) << "\n";
      return kExitNumeric;
    }
  }
  write_slices(r, dir);
  if (const auto* s = std::get_if<StripeTask>(&r.task)) {
    log << "held-out points nearest to their own band: " << stripe_band_hits(*s, r.model) << " of "
        << s->data.heldout.size() << "\n";
  }
  log << "slices written to " << (dir / "slices").string() << "\n";
  return kExitOk;
}

}  // namespace inrlab
