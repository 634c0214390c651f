#pragma once

// The nine acceptance criteria, each reduced to a measured value, a threshold
// and a verdict. Trained runs are cached by their config snapshot so criteria
// sharing a protocol (4, 5 and 9) train each configuration once.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "inrlab/experiment.hpp"
#include "inrlab/gradcheck.hpp"

namespace inrlab {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string measured;
  std::string threshold;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  /// key=value overrides applied to every experiment config the suite builds,
  /// e.g. model.transform=none for the negative control.
  std::vector<std::string> overrides;
  std::vector<int> only;  // empty: all criteria
  std::size_t seeds = 3;
  GradCheckOptions grad;
  double corrupt_gradients = 1.0;  // != 1 scales every Linear weight gradient
};

namespace detail {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

class Stopwatch {
 public:
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

struct GradientScale {
  explicit GradientScale(double f) : keep(debug::gradient_corruption()) { debug::gradient_corruption() = f; }
  ~GradientScale() { debug::gradient_corruption() = keep; }
  GradientScale(const GradientScale&) = delete;
  GradientScale& operator=(const GradientScale&) = delete;
  double keep;
};

// Sign pattern of every relu input after a forward pass at x.
inline std::vector<bool> relu_pattern(Model& m, const Matrix& x) {
  m.forward(x);
  std::vector<bool> out;
  const auto add = [&](const Mlp& mlp) {
    for (const auto& a : mlp.activations()) {
      if (a.activation().kind != Activation::Kind::relu) continue;
      const Matrix& in = *a.cached_input();
      for (Eigen::Index i = 0; i < in.size(); ++i) out.push_back(in.data()[i] > 0.0);
    }
  };
  add(m.trunk());
  if (m.transform()) add(m.transform()->mlp());
  m.clear_cache();
  return out;
}

}  // namespace detail

class AcceptanceSuite {
 public:
  explicit AcceptanceSuite(AcceptanceOptions opts = {}) : opts_(std::move(opts)) {}

  std::vector<CriterionResult> run(std::ostream& log) {
    const detail::GradientScale scale(opts_.corrupt_gradients);
    const std::vector<std::function<CriterionResult()>> all = {
        [&] { return gradient_correctness(); }, [&] { return broken_chain(); },
        [&] { return stripe_interpolation(); }, [&] { return expressive_power(); },
        [&] { return regularization_gap(); },   [&] { return sdf_iou(); },
        [&] { return metric_exactness(); },     [&] { return determinism(); },
        [&] { return negative_control(); }};
    std::vector<CriterionResult> out;
    for (std::size_t i = 0; i < all.size(); ++i) {
      const int id = static_cast<int>(i) + 1;
      if (!opts_.only.empty() && std::find(opts_.only.begin(), opts_.only.end(), id) == opts_.only.end()) continue;
      out.push_back(all[i]());
      log << format(out.back()) << std::endl;
    }
    return out;
  }

  static std::string format(const CriterionResult& r) {
    char head[96];
    std::snprintf(head, sizeof head, "[%s] %d %-26s", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str());
    return std::string(head) + " measured: " + r.measured + " | threshold: " + r.threshold + " | " +
           detail::fmt("%.1fs", r.seconds);
  }

  /// Experiment config for the acceptance protocols, with overrides applied last.
  [[nodiscard]] ExperimentConfig make_config(const std::string& task, const std::string& model, std::size_t iters,
                                             std::uint64_t seed, const std::vector<std::string>& extra = {}) const {
    Json j = {{"task", {{"kind", task}}}, {"model", {{"kind", model}}}, {"optim", {{"iters", iters}}}, {"seed", seed}};
    for (const auto& o : extra) apply_override(j, o);
    for (const auto& o : opts_.overrides) apply_override(j, o);
    return config_from_json(j);
  }

  // 1 -----------------------------------------------------------------------
  CriterionResult gradient_correctness() {
    CriterionResult r;
    r.id = 1;
    r.name = "gradient correctness";
    detail::Stopwatch sw;
    const auto results = run_all_gradient_checks(opts_.grad);
    double worst = 0.0;
    std::size_t failures = 0, configs = 0;
    bool enough = true;
    for (const auto& g : results) {
      worst = std::max(worst, g.max_rel_err);
      failures += g.failures;
      configs += g.configs;
      enough = enough && g.configs >= 100;
    }
    r.seconds = sw.seconds();
    r.pass = failures == 0 && enough && r.seconds < 60.0;
    r.measured = "max rel err " + detail::fmt("%.2e", worst) + " over " + std::to_string(results.size()) +
                 " checks x >=" + std::to_string(opts_.grad.configs) + " configs, " + std::to_string(failures) +
                 " failing entries";
    r.threshold = "< 1e-05, >= 100 configs each, < 60 s";
    return r;
  }

  // 2 -----------------------------------------------------------------------
  CriterionResult broken_chain() {
    CriterionResult r;
    r.id = 2;
    r.name = "broken-chain asymmetry";
    detail::Stopwatch sw;
    bool structural = true;
    for (const char* kind : {"diner", "ngp"}) {
      ExperimentConfig c = make_config("image", kind, 1, 0);
      Model m = build_model(model_config_for(c, build_task(c.task)), c.seed);
      Matrix x(4, 2);
      x << 0.1, 0.2, 0.4, 0.9, 0.55, 0.3, 0.77, 0.61;
      m.forward(x);
      const bool emits = m.backward(Matrix::Ones(4, static_cast<Eigen::Index>(m.d_out()))).has_value();
      structural = structural && !emits && !m.has_coordinate_path();
    }
    double worst = 0.0;
    for (const char* kind : {"pe_mlp", "rhino_diner", "rhino_ngp"}) {
      ExperimentConfig c = make_config("image", kind, 1, 0);
      Model m = build_model(model_config_for(c, build_task(c.task)), c.seed);
      worst = std::max(worst, coordinate_jacobian_error(m, 20, 0xC0FFEE));
    }
    r.seconds = sw.seconds();
    r.pass = structural && worst < 1e-3;
    r.measured = std::string("diner/ngp coordinate path ") + (structural ? "absent" : "PRESENT") +
                 "; pe_mlp/rhino Jacobian rel err " + detail::fmt("%.2e", worst);
    r.threshold = "absent; < 1e-03 at 20 points";
    return r;
  }

  /// Max relative error between the analytic coordinate Jacobian and central
  /// differences at `points` random coordinates. Table lookups are held fixed.
  static double coordinate_jacobian_error(Model& m, std::size_t points, std::uint64_t seed, double h = 1e-6) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    const auto d = static_cast<Eigen::Index>(m.d_in());
    const auto k = static_cast<Eigen::Index>(m.d_out());
    const bool lookup = uses_table(m.kind()) || uses_hash_grid(m.kind());
    double worst = 0.0;
    std::size_t done = 0;
    while (done < points) {
      Matrix x(1, d);
      for (Eigen::Index i = 0; i < d; ++i) x(0, i) = u(rng);
      // Skip points whose FD stencil straddles a relu kink.
      const auto base = detail::relu_pattern(m, x);
      bool kink = false;
      for (Eigen::Index i = 0; i < d && !kink; ++i) {
        for (double s : {-h, h}) {
          Matrix xs = x;
          xs(0, i) += s;
          kink = kink || detail::relu_pattern(m, xs) != base;
        }
      }
      if (kink) continue;
      const Matrix features = m.encode(x);
      const auto f = [&](const Matrix& xs) { return lookup ? m.predict_from_features(features, xs) : m.predict(xs); };
      for (Eigen::Index j = 0; j < k; ++j) {
        m.zero_grads();
        m.forward(x);
        Matrix e = Matrix::Zero(1, k);
        e(0, j) = 1.0;
        const auto g = m.backward(e);
        m.clear_cache();
        if (!g) return std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < d; ++i) {
          Matrix xp = x, xm = x;
          xp(0, i) += h;
          xm(0, i) -= h;
          const double fd = (f(xp)(0, j) - f(xm)(0, j)) / (2.0 * h);
          const double a = (*g)(0, i);
          const double diff = std::abs(a - fd);
          if (diff > 1e-8) worst = std::max(worst, diff / std::max(std::abs(a), std::abs(fd)));
        }
      }
      ++done;
    }
    m.zero_grads();
    return worst;
  }

  // 3 -----------------------------------------------------------------------
  CriterionResult stripe_interpolation() {
    CriterionResult r;
    r.id = 3;
    r.name = "stripe interpolation";
    detail::Stopwatch sw;
    const double diner = mean_over_seeds("stripe", "diner", 3000, &EvalPoint::heldout_mse);
    const double rdiner = mean_over_seeds("stripe", "rhino_diner", 3000, &EvalPoint::heldout_mse);
    const double ngp = mean_over_seeds("stripe", "ngp", 3000, &EvalPoint::heldout_mse);
    const double rngp = mean_over_seeds("stripe", "rhino_ngp", 3000, &EvalPoint::heldout_mse);
    r.seconds = sw.seconds();
    r.pass = rdiner < diner / 2.0 && rngp < ngp && r.seconds < 120.0;
    r.measured = "held-out MSE rhino_diner " + detail::fmt("%.5f", rdiner) + " vs diner " + detail::fmt("%.5f", diner) +
                 " (ratio " + detail::fmt("%.3f", rdiner / diner) + "); rhino_ngp " + detail::fmt("%.5f", rngp) +
                 " vs ngp " + detail::fmt("%.5f", ngp);
    r.threshold = "ratio < 0.5; rhino_ngp < ngp; < 120 s";
    return r;
  }

  // 4 -----------------------------------------------------------------------
  CriterionResult expressive_power() {
    CriterionResult r;
    r.id = 4;
    r.name = "expressive power";
    detail::Stopwatch sw;
    const double pe = mean_over_seeds("image", "pe_mlp", 3000, &EvalPoint::train_psnr);
    const double diner = mean_over_seeds("image", "diner", 3000, &EvalPoint::train_psnr);
    r.seconds = sw.seconds();
    r.pass = diner >= pe + 3.0 && r.seconds < 300.0;
    r.measured = "train PSNR diner " + detail::fmt("%.2f", diner) + " dB vs pe_mlp " + detail::fmt("%.2f", pe) +
                 " dB (delta " + detail::fmt("%+.2f", diner - pe) + ")";
    r.threshold = "delta >= +3 dB; < 300 s";
    return r;
  }

  // 5 -----------------------------------------------------------------------
  CriterionResult regularization_gap() {
    CriterionResult r;
    r.id = 5;
    r.name = "regularization gap";
    detail::Stopwatch sw;
    const auto held = &EvalPoint::heldout_psnr;
    const auto train = &EvalPoint::train_psnr;
    const double dh = mean_over_seeds("image", "diner", 3000, held);
    const double rdh = mean_over_seeds("image", "rhino_diner", 3000, held);
    const double nh = mean_over_seeds("image", "ngp", 3000, held);
    const double rnh = mean_over_seeds("image", "rhino_ngp", 3000, held);
    const double dt = mean_over_seeds("image", "diner", 3000, train);
    const double rdt = mean_over_seeds("image", "rhino_diner", 3000, train);
    const double nt = mean_over_seeds("image", "ngp", 3000, train);
    const double rnt = mean_over_seeds("image", "rhino_ngp", 3000, train);
    r.seconds = sw.seconds();
    r.pass = rdh >= dh + 2.0 && rnh >= nh + 1.0 && rdt >= dt - 0.5 && rnt >= nt - 0.5;
    r.measured = "held-out gap diner " + detail::fmt("%+.2f", rdh - dh) + " dB, ngp " + detail::fmt("%+.2f", rnh - nh) +
                 " dB; train delta diner " + detail::fmt("%+.2f", rdt - dt) + " dB, ngp " + detail::fmt("%+.2f", rnt - nt) +
                 " dB";
    r.threshold = "gap >= +2 / +1 dB; train delta >= -0.5 dB";
    return r;
  }

  // 6 -----------------------------------------------------------------------
  CriterionResult sdf_iou() {
    CriterionResult r;
    r.id = 6;
    r.name = "sdf iou";
    detail::Stopwatch sw;
    const auto& run = trained(make_config("sdf", "rhino_ngp", 2000, 0, {"optim.batch_size=10000"}));
    r.seconds = sw.seconds();
    const double v = run.record.status == "ok" ? run.record.final_eval().iou : 0.0;
    r.pass = v >= 0.97 && r.seconds < 300.0;
    r.measured = "IoU " + detail::fmt("%.4f", v) + " (rhino_ngp, sphere r=0.3, 64^3 grid)";
    r.threshold = ">= 0.97; < 300 s";
    return r;
  }

  // 7 -----------------------------------------------------------------------
  CriterionResult metric_exactness() {
    CriterionResult r;
    r.id = 7;
    r.name = "metric exactness";
    detail::Stopwatch sw;
    const Matrix gt = Matrix::Constant(4, 3, 0.5);
    const double p = psnr(gt.array() + 0.1, gt);

    std::vector<double> pred(20), truth(20);
    for (std::size_t i = 0; i < 20; ++i) {
      pred[i] = i < 10 ? -1.0 : 1.0;
      truth[i] = (i >= 5 && i < 15) ? -1.0 : 1.0;
    }
    const double v = iou(pred, truth);

    // One Adam step from theta = 1 with g = 0.5: m_hat = g, v_hat = g^2.
    Parameter w("w", 1, 1);
    w.values[0] = 1.0;
    w.grads[0] = 0.5;
    Adam adam;
    std::vector<Parameter*> ps = {&w};
    adam.step(ps);
    const double expected = 1.0 - 1e-3 * 0.5 / (0.5 + 1e-8);
    const double adam_err = std::abs(w.values[0] - expected);

    r.seconds = sw.seconds();
    r.pass = std::abs(p - 20.0) <= 1e-9 && v == 1.0 / 3.0 && adam_err <= 1e-12;
    r.measured = "psnr " + detail::fmt("%.12f", p) + ", iou " + detail::fmt("%.17g", v) + ", adam err " +
                 detail::fmt("%.1e", adam_err);
    r.threshold = "20 +- 1e-9; 1/3 exactly; <= 1e-12";
    return r;
  }

  // 8 -----------------------------------------------------------------------
  CriterionResult determinism() {
    CriterionResult r;
    r.id = 8;
    r.name = "determinism";
    detail::Stopwatch sw;
    const std::vector<ExperimentConfig> cfgs = {
        make_config("stripe", "rhino_diner", 300, 7),
        make_config("image", "rhino_ngp", 100, 7, {"optim.batch_size=256", "optim.eval_interval=25"}),
        make_config("sdf", "rhino_ngp", 40, 7, {"optim.batch_size=2000", "task.eval_grid=24"}),
    };
    std::size_t same = 0;
    for (const auto& c : cfgs) {
      const TrainedRun a = train_experiment(c);
      const TrainedRun b = train_experiment(c);
      const bool csv = metrics_csv(a.record) == metrics_csv(b.record);
      const bool ck = encode_checkpoint(snapshot_parameters(a.model)) == encode_checkpoint(snapshot_parameters(b.model));
      same += (csv && ck) ? 1u : 0u;
    }
    r.seconds = sw.seconds();
    r.pass = same == cfgs.size();
    r.measured = std::to_string(same) + "/" + std::to_string(cfgs.size()) +
                 " configs byte-identical (metrics.csv + checkpoint)";
    r.threshold = "all identical";
    return r;
  }

  // 9 -----------------------------------------------------------------------
  CriterionResult negative_control() {
    CriterionResult r;
    r.id = 9;
    r.name = "negative control";
    detail::Stopwatch sw;
    const auto held = &EvalPoint::heldout_psnr;
    const std::vector<std::string> off = {"model.transform=none"};
    const double dh = mean_over_seeds("image", "diner", 3000, held);
    const double nh = mean_over_seeds("image", "ngp", 3000, held);
    const double rd_off = mean_over_seeds("image", "rhino_diner", 3000, held, off);
    const double rn_off = mean_over_seeds("image", "rhino_ngp", 3000, held, off);
    r.seconds = sw.seconds();
    const double gd = rd_off - dh, gn = rn_off - nh;
    r.pass = gd < 0.5 && gn < 0.5;
    r.measured = "gap with T disabled: diner " + detail::fmt("%+.3f", gd) + " dB, ngp " + detail::fmt("%+.3f", gn) +
                 " dB";
    r.threshold = "< 0.5 dB";
    return r;
  }

  const TrainedRun& trained(const ExperimentConfig& c) {
    const std::string key = config_snapshot(c);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, train_experiment(c)).first;
    return it->second;
  }

 private:
  double mean_over_seeds(const std::string& task, const std::string& model, std::size_t iters,
                         double EvalPoint::*metric, const std::vector<std::string>& extra = {}) {
    double sum = 0.0;
    for (std::size_t s = 0; s < opts_.seeds; ++s) {
      const auto& run = trained(make_config(task, model, iters, s, extra));
      if (run.record.status != "ok") return std::numeric_limits<double>::quiet_NaN();
      sum += run.record.final_eval().*metric;
    }
    return sum / static_cast<double>(opts_.seeds);
  }

  AcceptanceOptions opts_;
  std::map<std::string, TrainedRun> cache_;
};

/// Runs the suite, one line per criterion. Returns true when everything passed.
inline bool run_acceptance(const AcceptanceOptions& opts, std::ostream& log) {
  AcceptanceSuite suite(opts);
  const auto results = suite.run(log);
  std::size_t passed = 0;
  for (const auto& r : results) passed += r.pass ? 1u : 0u;
  log << passed << "/" << results.size() << " criteria passed" << std::endl;
  return passed == results.size();
}

}  // namespace inrlab
