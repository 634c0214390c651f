#pragma once

// Supervised coordinate -> attribute tasks, metrics, and the training loop.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "inrlab/diffcore.hpp"
#include "inrlab/errors.hpp"
#include "inrlab/models.hpp"
#include "inrlab/optim.hpp"

namespace inrlab {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

inline constexpr double kPsnrCap = 100.0;

/// Mean squared error after clamping pred to [lo, hi].
inline double clamped_mse(const Matrix& pred, const Matrix& gt, double lo = 0.0, double hi = 1.0) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) throw ConfigError("mse: shape mismatch");
  if (pred.size() == 0) throw UsageError("mse: empty input");
  return (pred.cwiseMax(lo).cwiseMin(hi) - gt).squaredNorm() / static_cast<double>(pred.size());
}

inline double psnr_from_mse(double mse, double peak = 1.0) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

/// Peak signal-to-noise ratio in dB; pred is clamped to [0, peak]. Exact fits cap at 100 dB.
inline double psnr(const Matrix& pred, const Matrix& gt, double peak = 1.0) {
  return psnr_from_mse(clamped_mse(pred, gt, 0.0, peak), peak);
}

/// Intersection over union of the occupancies {s <= 0}. Empty union counts as 1.
inline double iou(std::span<const double> pred_sdf, std::span<const double> gt_sdf) {
  if (pred_sdf.size() != gt_sdf.size()) throw ConfigError("iou: grid size mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred_sdf.size(); ++i) {
    const bool a = pred_sdf[i] <= 0.0;
    const bool b = gt_sdf[i] <= 0.0;
    inter += (a && b) ? 1u : 0u;
    uni += (a || b) ? 1u : 0u;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tasks
// ---------------------------------------------------------------------------

/// A finite set of coordinates with targets and a train / held-out split.
struct Dataset {
  Matrix coords;
  Matrix attrs;
  std::vector<std::size_t> train;
  std::vector<std::size_t> heldout;
  std::vector<bool> is_train;
};

inline Dataset make_dataset(Matrix coords, Matrix attrs, std::vector<bool> is_train) {
  Dataset d;
  d.coords = std::move(coords);
  d.attrs = std::move(attrs);
  d.is_train = std::move(is_train);
  for (std::size_t i = 0; i < d.is_train.size(); ++i) (d.is_train[i] ? d.train : d.heldout).push_back(i);
  if (d.train.empty()) throw ConfigError("task has no training points");
  return d;
}

/// 1D piecewise-constant colour bands; point i sits at x = i/n. Held-out runs of `gap` points alternate
/// with single trained points; the last point is always trained so every
/// held-out point sits between two trained neighbours.
struct StripeTask {
  std::size_t n_points = 256;
  std::size_t n_bands = 8;
  std::size_t gap = 1;
  Dataset data;

  static constexpr std::array<std::array<double, 3>, 8> palette = {{
      {0.90, 0.10, 0.10},
      {0.10, 0.75, 0.20},
      {0.15, 0.20, 0.90},
      {0.95, 0.85, 0.10},
      {0.60, 0.10, 0.70},
      {0.10, 0.80, 0.80},
      {0.95, 0.50, 0.10},
      {0.30, 0.30, 0.30},
  }};

  [[nodiscard]] std::size_t band_of(std::size_t i) const { return i * n_bands / n_points; }
};

inline StripeTask make_stripe_task(std::size_t n_points = 256, std::size_t n_bands = 8,
                                   std::size_t gap = 1) {
  if (n_points < 3) throw ConfigError("stripe: need at least 3 points");
  if (n_bands < 1 || n_bands > StripeTask::palette.size()) throw ConfigError("stripe: 1 to 8 bands");
  if (gap < 1) throw ConfigError("stripe: gap must be >= 1");
  StripeTask t{n_points, n_bands, gap, {}};
  Matrix coords(static_cast<Eigen::Index>(n_points), 1);
  Matrix colors(static_cast<Eigen::Index>(n_points), 3);
  std::vector<bool> is_train(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    coords(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i) / static_cast<double>(n_points);
    const auto& c = StripeTask::palette[t.band_of(i)];
    for (int k = 0; k < 3; ++k) colors(static_cast<Eigen::Index>(i), k) = c[static_cast<std::size_t>(k)];
    is_train[i] = (i % (gap + 1) == 0) || i + 1 == n_points;
  }
  t.data = make_dataset(std::move(coords), std::move(colors), std::move(is_train));
  return t;
}

/// RGB image on a regular lattice, pixel (r, c) at coordinate (r/H, c/W).
struct ImageTask {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t stride = 2;  // keep every stride-th row and column for training
  Dataset data;            // attrs rows are pixels in row-major order
};

/// Procedural test images. "mosaic" mixes smooth gradients, flat discs, sharp
/// edges and periodic texture; "constant" is a flat colour.
inline Matrix procedural_image(std::size_t h, std::size_t w, const std::string& pattern) {
  Matrix px(static_cast<Eigen::Index>(h * w), 3);
  const double pi = std::numbers::pi;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double y = h > 1 ? static_cast<double>(r) / static_cast<double>(h - 1) : 0.0;
      const double x = w > 1 ? static_cast<double>(c) / static_cast<double>(w - 1) : 0.0;
      std::array<double, 3> rgb{};
      if (pattern == "constant") {
        rgb = {0.25, 0.5, 0.75};
      } else if (pattern == "mosaic") {
        rgb = {0.15 + 0.7 * x, 0.2 + 0.6 * y, 0.5 + 0.35 * std::sin(2.0 * pi * (x - y))};
        const double d1 = std::hypot(x - 0.3, y - 0.32);
        if (d1 < 0.2) rgb = {0.95, 0.8 - 1.5 * d1, 0.2};
        const double d2 = std::hypot(x - 0.72, y - 0.68);
        if (d2 < 0.18) {
          const double t = 0.5 + 0.5 * std::sin(2.0 * pi * 5.0 * (x + 0.5 * y));
          rgb = {0.1 + 0.3 * t, 0.25 + 0.5 * t, 0.9 - 0.4 * t};
        }
        if (x > 0.62 && y < 0.35) {
          const double t = 0.5 + 0.5 * std::cos(2.0 * pi * 4.0 * y) * std::cos(2.0 * pi * 3.0 * x);
          rgb = {0.9 * t, 0.3 + 0.4 * (1.0 - t), 0.15};
        }
        if (y > 0.78 && x < 0.45) rgb = {0.85 - x, 0.9, 0.85 * y};
      } else {
        throw ConfigError("unknown image pattern '" + pattern + "'");
      }
      for (int k = 0; k < 3; ++k) {
        px(static_cast<Eigen::Index>(r * w + c), k) = std::clamp(rgb[static_cast<std::size_t>(k)], 0.0, 1.0);
      }
    }
  }
  return px;
}

inline ImageTask make_image_task(const Matrix& pixels, std::size_t h, std::size_t w, std::size_t stride = 2) {
  if (h < 2 || w < 2) throw ConfigError("image: need at least 2x2 pixels");
  if (static_cast<std::size_t>(pixels.rows()) != h * w || pixels.cols() != 3) {
    throw ConfigError("image: pixel buffer must be (H*W) x 3");
  }
  if (stride < 1) throw ConfigError("image: stride must be >= 1");
  ImageTask t{h, w, stride, {}};
  Matrix coords(static_cast<Eigen::Index>(h * w), 2);
  std::vector<bool> is_train(h * w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const auto i = static_cast<Eigen::Index>(r * w + c);
      coords(i, 0) = static_cast<double>(r) / static_cast<double>(h);
      coords(i, 1) = static_cast<double>(c) / static_cast<double>(w);
      is_train[r * w + c] = (r % stride == 0) && (c % stride == 0);
    }
  }
  t.data = make_dataset(std::move(coords), pixels, std::move(is_train));
  return t;
}

inline ImageTask make_image_task(std::size_t h, std::size_t w, const std::string& pattern,
                                 std::size_t stride = 2) {
  return make_image_task(procedural_image(h, w, pattern), h, w, stride);
}

/// Analytic signed distance shapes inside the unit cube.
struct SdfShape {
  enum class Kind { sphere, torus };
  Kind kind = Kind::sphere;
  std::array<double, 3> center{0.5, 0.5, 0.5};
  double radius = 0.3;        // sphere radius, or torus major radius
  double minor_radius = 0.1;  // torus tube radius

  [[nodiscard]] double operator()(const std::array<double, 3>& p) const {
    const double dx = p[0] - center[0], dy = p[1] - center[1], dz = p[2] - center[2];
    if (kind == Kind::sphere) return std::sqrt(dx * dx + dy * dy + dz * dz) - radius;
    const double q = std::hypot(dx, dy) - radius;
    return std::hypot(q, dz) - minor_radius;
  }

  /// A point on the surface in direction dir (unit vector for the sphere;
  /// for the torus dir supplies two angles through its first two components).
  [[nodiscard]] std::array<double, 3> surface_point(const std::array<double, 3>& dir, double u, double v) const {
    if (kind == Kind::sphere) {
      return {center[0] + radius * dir[0], center[1] + radius * dir[1], center[2] + radius * dir[2]};
    }
    const double a = 2.0 * std::numbers::pi * u, b = 2.0 * std::numbers::pi * v;
    const double ring = radius + minor_radius * std::cos(b);
    return {center[0] + ring * std::cos(a), center[1] + ring * std::sin(a),
            center[2] + minor_radius * std::sin(b)};
  }
};

struct SdfTask {
  SdfShape shape;
  std::size_t eval_grid = 64;
  double near_surface_sigma = 0.02;
  double near_surface_fraction = 0.5;
  Matrix grid_coords;           // eval_grid^3 x 3, row-major lattice
  std::vector<double> grid_sdf; // exact values on the lattice
};

inline SdfTask make_sdf_task(SdfShape shape = {}, std::size_t eval_grid = 64) {
  if (eval_grid < 2) throw ConfigError("sdf: eval grid must be >= 2");
  SdfTask t;
  t.shape = shape;
  t.eval_grid = eval_grid;
  const std::size_t g = eval_grid;
  t.grid_coords.resize(static_cast<Eigen::Index>(g * g * g), 3);
  t.grid_sdf.resize(g * g * g);
  std::size_t i = 0;
  for (std::size_t a = 0; a < g; ++a) {
    for (std::size_t b = 0; b < g; ++b) {
      for (std::size_t c = 0; c < g; ++c, ++i) {
        const std::array<double, 3> p = {static_cast<double>(a) / static_cast<double>(g - 1),
                                         static_cast<double>(b) / static_cast<double>(g - 1),
                                         static_cast<double>(c) / static_cast<double>(g - 1)};
        for (int k = 0; k < 3; ++k) t.grid_coords(static_cast<Eigen::Index>(i), k) = p[static_cast<std::size_t>(k)];
        t.grid_sdf[i] = shape(p);
      }
    }
  }
  return t;
}

struct SdfBatch {
  Matrix coords;
  Matrix sdf;
};

/// Training points for one iteration; a pure function of (seed, iteration).
/// Half uniform in the cube, half surface points jittered by N(0, sigma^2),
/// clamped into the cube.
inline SdfBatch sample_sdf_batch(const SdfTask& task, std::uint64_t seed, std::uint64_t iteration,
                                 std::size_t n) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(iteration), static_cast<std::uint32_t>(iteration >> 32),
                    0x5df5a3u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  SdfBatch b;
  b.coords.resize(static_cast<Eigen::Index>(n), 3);
  b.sdf.resize(static_cast<Eigen::Index>(n), 1);
  const auto n_near = static_cast<std::size_t>(std::llround(task.near_surface_fraction * static_cast<double>(n)));
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 3> p{};
    if (i < n_near) {
      std::array<double, 3> dir{gauss(rng), gauss(rng), gauss(rng)};
      const double norm = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
      for (auto& v : dir) v = norm > 0.0 ? v / norm : 0.0;
      const double u = unit(rng), v = unit(rng);
      p = task.shape.surface_point(dir, u, v);
      for (auto& c : p) c = std::clamp(c + task.near_surface_sigma * gauss(rng), 0.0, 1.0);
    } else {
      p = {unit(rng), unit(rng), unit(rng)};
    }
    for (int k = 0; k < 3; ++k) b.coords(static_cast<Eigen::Index>(i), k) = p[static_cast<std::size_t>(k)];
    b.sdf(static_cast<Eigen::Index>(i), 0) = task.shape(p);
  }
  return b;
}

using Task = std::variant<StripeTask, ImageTask, SdfTask>;

inline std::size_t task_d_in(const Task& t) {
  if (std::holds_alternative<StripeTask>(t)) return 1;
  if (std::holds_alternative<ImageTask>(t)) return 2;
  return 3;
}

inline std::size_t task_d_out(const Task& t) { return std::holds_alternative<SdfTask>(t) ? 1 : 3; }

/// Full-resolution table size per dimension: one node per training sample,
/// so with x = i/n and a stride s dividing n every training coordinate lands
/// exactly on a node (node spacing s/n).
inline std::vector<std::size_t> training_lattice(const Task& t) {
  const auto nodes = [](std::size_t n, std::size_t s) { return (n + s - 1) / s + 1; };
  if (const auto* st = std::get_if<StripeTask>(&t)) return {nodes(st->n_points, st->gap + 1)};
  if (const auto* im = std::get_if<ImageTask>(&t)) {
    return {nodes(im->height, im->stride), nodes(im->width, im->stride)};
  }
  const auto& sdf = std::get<SdfTask>(t);
  return {sdf.eval_grid, sdf.eval_grid, sdf.eval_grid};
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct FitOptions {
  std::size_t iters = 3000;
  std::size_t batch_size = 0;     // 0: the full training split every iteration
  std::size_t eval_interval = 0;  // 0: evaluate only after the last iteration
  std::size_t chunk_rows = 2048;  // rows per forward/backward pass; 0 means the whole batch
  std::uint64_t seed = 0;
  AdamOptions adam;
};

struct EvalPoint {
  std::size_t iter = 0;  // 1-based iteration after which the evaluation ran
  double train_psnr = 0.0;
  double heldout_psnr = 0.0;  // NaN for SDF tasks
  double heldout_mse = 0.0;   // NaN for SDF tasks
  double iou = 0.0;           // NaN for non-SDF tasks
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::string status = "ok";  // "ok" or "nan"
  std::string message;
  std::vector<double> loss;   // one entry per completed iteration
  std::vector<EvalPoint> evals;
  double wall_seconds = 0.0;

  [[nodiscard]] const EvalPoint& final_eval() const {
    if (evals.empty()) throw UsageError("run record has no evaluations");
    return evals.back();
  }
};

/// Metrics for a (partially) trained model on its task.
inline EvalPoint evaluate(const Task& task, const Model& model, std::size_t iter,
                          std::optional<double> last_loss = std::nullopt) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  EvalPoint e{iter, nan, nan, nan, nan};
  if (const auto* sdf = std::get_if<SdfTask>(&task)) {
    const Matrix pred = model.predict(sdf->grid_coords);
    e.iou = iou(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())), sdf->grid_sdf);
    if (last_loss) e.train_psnr = psnr_from_mse(*last_loss);
    return e;
  }
  const Dataset& d = std::holds_alternative<StripeTask>(task) ? std::get<StripeTask>(task).data
                                                              : std::get<ImageTask>(task).data;
  const Matrix pred = model.predict(d.coords);
  e.train_psnr = psnr(gather_rows(pred, d.train), gather_rows(d.attrs, d.train));
  if (!d.heldout.empty()) {
    e.heldout_mse = clamped_mse(gather_rows(pred, d.heldout), gather_rows(d.attrs, d.heldout));
    e.heldout_psnr = psnr_from_mse(e.heldout_mse);
  }
  return e;
}

/// Seeded minibatch loop: batch -> forward -> mse -> backward -> Adam -> zero grads.
/// A non-finite loss or gradient stops the run with status "nan"; the record
/// keeps everything up to that point.
inline RunRecord fit(const Task& task, Model& model, const FitOptions& opts) {
  if (model.d_in() != task_d_in(task) || model.d_out() != task_d_out(task)) {
    throw ConfigError("fit: model dimensions do not match the task");
  }
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.seed = opts.seed;
  Adam adam(opts.adam);
  if (adam.options().cosine_decay && adam.options().decay_steps == 0) {
    AdamOptions o = opts.adam;
    o.decay_steps = opts.iters;
    adam = Adam(o);
  }
  auto params = model.parameters();
  model.zero_grads();
  std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ull);
  const auto* sdf = std::get_if<SdfTask>(&task);
  const Dataset* data = nullptr;
  if (const auto* s = std::get_if<StripeTask>(&task)) data = &s->data;
  if (const auto* im = std::get_if<ImageTask>(&task)) data = &im->data;

  std::vector<std::size_t> pool = data ? data->train : std::vector<std::size_t>{};
  Matrix full_x, full_y;
  if (data) {
    full_x = gather_rows(data->coords, data->train);
    full_y = gather_rows(data->attrs, data->train);
  }

  for (std::size_t it = 0; it < opts.iters; ++it) {
    Matrix bx, by;
    if (sdf) {
      SdfBatch b = sample_sdf_batch(*sdf, opts.seed, it, opts.batch_size == 0 ? 10000 : opts.batch_size);
      bx = std::move(b.coords);
      by = std::move(b.sdf);
    } else if (opts.batch_size == 0 || opts.batch_size >= pool.size()) {
      bx = full_x;
      by = full_y;
    } else {
      for (std::size_t k = 0; k < opts.batch_size; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
        std::swap(pool[k], pool[pick(rng)]);
      }
      std::span<const std::size_t> idx(pool.data(), opts.batch_size);
      for (auto i : idx) {
        if (!data->is_train[i]) throw UsageError("fit: held-out coordinate drawn into a training batch");
      }
      bx = gather_rows(data->coords, idx);
      by = gather_rows(data->attrs, idx);
    }

    // The batch is pushed through in row chunks; gradients accumulate, and each
    // chunk's mse gradient is rescaled to the full-batch normalization.
    const Eigen::Index rows = bx.rows();
    const auto chunk = static_cast<Eigen::Index>(opts.chunk_rows == 0 ? rows : opts.chunk_rows);
    const double total = static_cast<double>(bx.rows() * by.cols());
    double loss = 0.0;
    for (Eigen::Index start = 0; start < rows; start += chunk) {
      const Eigen::Index len = std::min(chunk, rows - start);
      const Matrix cy = by.middleRows(start, len);
      const Matrix pred = model.forward(bx.middleRows(start, len));
      LossResult part = mse_loss(pred, cy);
      const double share = static_cast<double>(cy.size()) / total;
      loss += part.loss * share;
      if (len != rows) part.grad *= share;
      model.backward(part.grad);
    }
    if (!std::isfinite(loss)) {
      rec.status = "nan";
      rec.message = "non-finite loss at iteration " + std::to_string(it + 1);
      break;
    }
    rec.loss.push_back(loss);
    try {
      adam.step(params);
    } catch (const NumericError& e) {
      rec.status = "nan";
      rec.message = e.what();
      break;
    }
    model.zero_grads();

    const bool last = it + 1 == opts.iters;
    if (last || (opts.eval_interval > 0 && (it + 1) % opts.eval_interval == 0)) {
      rec.evals.push_back(evaluate(task, model, it + 1, loss));
    }
  }
  model.clear_cache();
  if (rec.status != "ok" && rec.evals.empty() && !rec.loss.empty()) {
    rec.evals.push_back(evaluate(task, model, rec.loss.size(), rec.loss.back()));
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// |f(x_{k+1}) - f(x_k)| / |x_{k+1} - x_k| along a straight segment.
inline std::vector<double> continuity_profile(const Model& model, std::span<const double> xa,
                                              std::span<const double> xb, std::size_t samples) {
  const auto d = static_cast<Eigen::Index>(model.d_in());
  if (static_cast<Eigen::Index>(xa.size()) != d || static_cast<Eigen::Index>(xb.size()) != d) {
    throw ConfigError("continuity_profile: endpoint dimension mismatch");
  }
  if (samples < 2) throw ConfigError("continuity_profile: need at least 2 samples");
  Matrix pts(static_cast<Eigen::Index>(samples), d);
  for (std::size_t s = 0; s < samples; ++s) {
    const double t = static_cast<double>(s) / static_cast<double>(samples - 1);
    for (Eigen::Index k = 0; k < d; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      pts(static_cast<Eigen::Index>(s), k) = xa[kk] + t * (xb[kk] - xa[kk]);
    }
  }
  const Matrix f = model.predict(pts);
  std::vector<double> slopes;
  slopes.reserve(samples - 1);
  for (Eigen::Index s = 0; s + 1 < static_cast<Eigen::Index>(samples); ++s) {
    const double dx = (pts.row(s + 1) - pts.row(s)).norm();
    slopes.push_back(dx > 0.0 ? (f.row(s + 1) - f.row(s)).norm() / dx : 0.0);
  }
  return slopes;
}

/// Which two trunk inputs to sweep; remaining inputs are held at `fixed`.
struct SliceSpec {
  std::size_t lattice = 64;
  std::size_t axis_h = 0;
  std::size_t axis_t = 1;
  std::vector<double> fixed;  // one value per trunk input (entries for the swept axes are ignored)
};

struct SlicePoint {
  std::size_t index = 0;
  bool train = false;
  double h = 0.0;
  double t = 0.0;
};

struct SliceRaster {
  std::size_t lattice = 0;
  double h_min = 0.0, h_max = 0.0, t_min = 0.0, t_max = 0.0;
  Matrix values;  // (lattice*lattice) x d_out; row i*lattice + j is (h_i, t_j)
  std::vector<SlicePoint> overlay;

  [[nodiscard]] double h_at(std::size_t i) const {
    return h_min + (h_max - h_min) * static_cast<double>(i) / static_cast<double>(lattice - 1);
  }
  [[nodiscard]] double t_at(std::size_t j) const {
    return t_min + (t_max - t_min) * static_cast<double>(j) / static_cast<double>(lattice - 1);
  }
};

/// Sweeps the trunk over an m x m lattice of two of its inputs, spanning the
/// range those inputs take over the dataset, and records where each data
/// point lands. Models whose trunk has more than two inputs need spec.fixed.
inline SliceRaster export_slices(const Model& model, const Dataset& data, const SliceSpec& spec) {
  const std::size_t width = model.trunk_input_width();
  if (spec.lattice < 2) throw ConfigError("export_slices: lattice must be >= 2");
  if (spec.axis_h >= width || spec.axis_t >= width || spec.axis_h == spec.axis_t) {
    throw ConfigError("export_slices: invalid slice axes");
  }
  if (width > 2 && spec.fixed.size() != width) {
    throw ConfigError("export_slices: trunk has " + std::to_string(width) +
                      " inputs; a 2D slice needs fixed values for the others");
  }
  const Matrix inputs = model.trunk_inputs(data.coords);
  const auto ah = static_cast<Eigen::Index>(spec.axis_h), at = static_cast<Eigen::Index>(spec.axis_t);
  SliceRaster r;
  r.lattice = spec.lattice;
  r.h_min = inputs.col(ah).minCoeff();
  r.h_max = inputs.col(ah).maxCoeff();
  r.t_min = inputs.col(at).minCoeff();
  r.t_max = inputs.col(at).maxCoeff();
  if (r.h_max == r.h_min) r.h_max = r.h_min + 1e-9;
  if (r.t_max == r.t_min) r.t_max = r.t_min + 1e-9;
  const std::size_t m = spec.lattice;
  Matrix grid(static_cast<Eigen::Index>(m * m), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const auto row = static_cast<Eigen::Index>(i * m + j);
      for (std::size_t k = 0; k < width; ++k) {
        grid(row, static_cast<Eigen::Index>(k)) = spec.fixed.size() == width ? spec.fixed[k] : 0.0;
      }
      grid(row, ah) = r.h_at(i);
      grid(row, at) = r.t_at(j);
    }
  }
  r.values = model.trunk().infer(grid);
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    r.overlay.push_back({idx, static_cast<bool>(data.is_train[idx]), inputs(i, ah), inputs(i, at)});
  }
  return r;
}

/// Held-out stripe points whose prediction is nearest (in RGB) to their own band colour.
inline std::size_t stripe_band_hits(const StripeTask& task, const Model& model) {
  const Matrix pred = model.predict(task.data.coords);
  std::size_t hits = 0;
  for (auto i : task.data.heldout) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < task.n_bands; ++b) {
      double dist = 0.0;
      for (int k = 0; k < 3; ++k) {
        const double diff = pred(static_cast<Eigen::Index>(i), k) - StripeTask::palette[b][static_cast<std::size_t>(k)];
        dist += diff * diff;
      }
      if (dist < best_d) {
        best_d = dist;
        best = b;
      }
    }
    hits += best == task.band_of(i) ? 1u : 0u;
  }
  return hits;
}

}  // namespace inrlab
