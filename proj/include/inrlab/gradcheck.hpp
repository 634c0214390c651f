#pragma once

// Central finite-difference checks of every backward rule.
//
// Each check draws a random configuration, forms the scalar L = sum(U .* f)
// for a random upstream U, and compares backward(U) entry by entry against
// (L(theta + h) - L(theta - h)) / 2h.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "inrlab/diffcore.hpp"
#include "inrlab/encodings.hpp"
#include "inrlab/models.hpp"

namespace inrlab {

struct GradCheckOptions {
  std::size_t configs = 100;
  double h = 1e-5;
  double rel_tol = 1e-5;
  double abs_floor = 1e-8;
  double kink_margin = 1e-3;  // redraw when a relu input is this close to 0
  std::uint64_t seed = 20240917;
};

struct GradCheckResult {
  std::string name;
  std::size_t configs = 0;
  std::size_t entries = 0;
  std::size_t failures = 0;
  std::size_t redraws = 0;
  double max_rel_err = 0.0;
  std::string worst;

  [[nodiscard]] bool pass() const { return failures == 0 && configs > 0; }
};

namespace detail {

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double weighted_sum(const Matrix& u, const Matrix& f) { return u.cwiseProduct(f).sum(); }

// Compares one analytic gradient buffer against finite differences of `loss`
// taken by nudging `values` in place.
inline void compare_buffer(GradCheckResult& res, const std::string& label, double* values,
                           const double* analytic, std::size_t n, const std::function<double()>& loss,
                           const GradCheckOptions& o) {
  for (std::size_t i = 0; i < n; ++i) {
    const double keep = values[i];
    values[i] = keep + o.h;
    const double up = loss();
    values[i] = keep - o.h;
    const double down = loss();
    values[i] = keep;
    const double fd = (up - down) / (2.0 * o.h);
    const double a = analytic[i];
    const double diff = std::abs(a - fd);
    const double scale = std::max(std::abs(a), std::abs(fd));
    const double rel = diff <= o.abs_floor ? 0.0 : diff / scale;
    ++res.entries;
    if (rel > res.max_rel_err) {
      res.max_rel_err = rel;
      res.worst = label + "[" + std::to_string(i) + "] analytic=" + std::to_string(a) + " fd=" + std::to_string(fd);
    }
    if (rel >= o.rel_tol) ++res.failures;
  }
}

inline bool near_kink(const ActivationLayer& a, double margin) {
  if (a.activation().kind != Activation::Kind::relu || !a.cached_input()) return false;
  return a.cached_input()->cwiseAbs().minCoeff() < margin;
}

inline bool mlp_near_kink(const Mlp& m, double margin) {
  for (const auto& a : m.activations()) {
    if (near_kink(a, margin)) return true;
  }
  return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Per-operation checks
// ---------------------------------------------------------------------------

inline GradCheckResult check_linear(const GradCheckOptions& o) {
  GradCheckResult res;
  res.name = "linear";
  std::mt19937_64 rng(o.seed ^ 0x11);
  for (std::size_t k = 0; k < o.configs; ++k) {
    const auto in = detail::pick(rng, 1, 6), out = detail::pick(rng, 1, 6), n = detail::pick(rng, 1, 5);
    Linear lin("lin", in, out);
        for (auto& v : lin.weight.values) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    for (auto& v : lin.bias.values) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    Matrix x = detail::random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in), rng);
    const Matrix u = detail::random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out), rng);
    lin.forward(x);
    const Matrix dx = lin.backward(u);
    const auto loss = [&] { return detail::weighted_sum(u, lin.infer(x)); };
    detail::compare_buffer(res, "linear.weight", lin.weight.values.data(), lin.weight.grads.data(), lin.weight.size(), loss, o);
    detail::compare_buffer(res, "linear.bias", lin.bias.values.data(), lin.bias.grads.data(), lin.bias.size(), loss, o);
    detail::compare_buffer(res, "linear.x", x.data(), dx.data(), static_cast<std::size_t>(x.size()), loss, o);
    ++res.configs;
  }
  return res;
}

inline GradCheckResult check_activation(Activation::Kind kind, const GradCheckOptions& o) {
  const char* names[] = {"activation.relu", "activation.sine", "activation.identity"};
  GradCheckResult res;
  res.name = names[static_cast<int>(kind)];
  std::mt19937_64 rng(o.seed ^ (0x20 + static_cast<std::uint64_t>(kind)));
  while (res.configs < o.configs) {
    const auto n = detail::pick(rng, 1, 5), d = detail::pick(rng, 1, 6);
    Activation act = Activation::identity();
    if (kind == Activation::Kind::relu) act = Activation::relu();
    if (kind == Activation::Kind::sine) act = Activation::sine(std::uniform_real_distribution<double>(1.0, 30.0)(rng));
    ActivationLayer layer(act);
    Matrix x = detail::random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d), rng);
    const Matrix u = detail::random_matrix(x.rows(), x.cols(), rng);
    layer.forward(x);
    if (detail::near_kink(layer, o.kink_margin)) {
      ++res.redraws;
      continue;
    }
    const Matrix dx = layer.backward(u);
    const auto loss = [&] { return detail::weighted_sum(u, layer.infer(x)); };
    detail::compare_buffer(res, res.name + ".x", x.data(), dx.data(), static_cast<std::size_t>(x.size()), loss, o);
    ++res.configs;
  }
  return res;
}

inline GradCheckResult check_concat(const GradCheckOptions& o) {
  GradCheckResult res;
  res.name = "concat";
  std::mt19937_64 rng(o.seed ^ 0x30);
  for (std::size_t k = 0; k < o.configs; ++k) {
    const auto n = detail::pick(rng, 1, 5), p = detail::pick(rng, 0, 4), q = detail::pick(rng, 0, 4);
    Matrix a = detail::random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p), rng);
    Matrix b = detail::random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(q), rng);
    const Matrix u = detail::random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p + q), rng);
    const auto [ga, gb] = split_columns(u, static_cast<Eigen::Index>(p));
    const auto loss = [&] { return detail::weighted_sum(u, concat_columns(a, b)); };
    detail::compare_buffer(res, "concat.a", a.data(), ga.data(), static_cast<std::size_t>(a.size()), loss, o);
    detail::compare_buffer(res, "concat.b", b.data(), gb.data(), static_cast<std::size_t>(b.size()), loss, o);
    ++res.configs;
  }
  return res;
}

inline GradCheckResult check_mse(const GradCheckOptions& o) {
  GradCheckResult res;
  res.name = "mse_loss";
  std::mt19937_64 rng(o.seed ^ 0x40);
  for (std::size_t k = 0; k < o.configs; ++k) {
    const auto n = detail::pick(rng, 1, 6), d = detail::pick(rng, 1, 4);
    Matrix pred = detail::random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d), rng);
    const Matrix target = detail::random_matrix(pred.rows(), pred.cols(), rng);
    const Matrix g = mse_loss(pred, target).grad;
    const auto loss = [&] { return mse_loss(pred, target).loss; };
    detail::compare_buffer(res, "mse.pred", pred.data(), g.data(), static_cast<std::size_t>(pred.size()), loss, o);
    ++res.configs;
  }
  return res;
}

inline GradCheckResult check_positional_encoding(const GradCheckOptions& o) {
  GradCheckResult res;
  res.name = "positional_encoding";
  std::mt19937_64 rng(o.seed ^ 0x50);
  for (std::size_t k = 0; k < o.configs; ++k) {
    // Central differences at h carry a truncation error of about (w h)^2 / 6
    // for frequency w, so only bands up to 2^6 pi are resolvable at h = 1e-5.
    const auto d = detail::pick(rng, 1, 3), L = detail::pick(rng, 1, 7), n = detail::pick(rng, 1, 4);
    PositionalEncoding pe(d, L);
    Matrix x = detail::random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d), rng, 0.01, 0.99);
    const Matrix u = detail::random_matrix(x.rows(), static_cast<Eigen::Index>(pe.out_width()), rng);
    pe.forward(x);
    const Matrix dx = pe.backward(u);
    const auto loss = [&] { return detail::weighted_sum(u, pe.infer(x)); };
    detail::compare_buffer(res, "pe.x", x.data(), dx.data(), static_cast<std::size_t>(x.size()), loss, o);
    ++res.configs;
  }
  return res;
}

inline GradCheckResult check_fullres_table(const GradCheckOptions& o) {
  GradCheckResult res;
  res.name = "fullres_table";
  std::mt19937_64 rng(o.seed ^ 0x60);
  for (std::size_t k = 0; k < o.configs; ++k) {
    const auto d = detail::pick(rng, 1, 3), F = detail::pick(rng, 1, 3), n = detail::pick(rng, 1, 5);
    std::vector<std::size_t> resn(d);
    for (auto& r : resn) r = detail::pick(rng, 2, 5);
    FullResTable t(resn, F);
    detail::init_uniform(t.entries, 1.0, rng);
    const Matrix x = detail::random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d), rng, 0.0, 1.0);
    const Matrix u = detail::random_matrix(x.rows(), static_cast<Eigen::Index>(F), rng);
    t.forward(x);
    t.backward(u);
    const auto loss = [&] { return detail::weighted_sum(u, t.infer(x)); };
    detail::compare_buffer(res, "table.entries", t.entries.values.data(), t.entries.grads.data(), t.entries.size(), loss, o);
    ++res.configs;
  }
  return res;
}

inline GradCheckResult check_hash_grid(const GradCheckOptions& o) {
  GradCheckResult res;
  res.name = "hash_grid";
  std::mt19937_64 rng(o.seed ^ 0x70);
  for (std::size_t k = 0; k < o.configs; ++k) {
    const auto d = detail::pick(rng, 1, 3), n = detail::pick(rng, 1, 5);
    HashGridSpec spec;
    spec.num_levels = detail::pick(rng, 1, 3);
    spec.log2_table_size = detail::pick(rng, 3, 6);
    spec.feature_width = detail::pick(rng, 1, 2);
    spec.base_resolution = detail::pick(rng, 2, 6);
    spec.growth_factor = std::uniform_real_distribution<double>(1.2, 2.5)(rng);
    MultiResHashGrid g(d, spec);
    for (auto& lv : g.levels()) detail::init_uniform(lv.entries, 1.0, rng);
    const Matrix x = detail::random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d), rng, 0.0, 1.0);
    const Matrix u = detail::random_matrix(x.rows(), static_cast<Eigen::Index>(g.out_width()), rng);
    g.forward(x);
    g.backward(u);
    const auto loss = [&] { return detail::weighted_sum(u, g.infer(x)); };
    for (auto& lv : g.levels()) {
      detail::compare_buffer(res, lv.entries.name, lv.entries.values.data(), lv.entries.grads.data(), lv.entries.size(), loss, o);
    }
    ++res.configs;
  }
  return res;
}

/// Random small model configuration of the given kind.
inline ModelConfig random_small_model(ModelKind kind, std::mt19937_64& rng) {
  ModelConfig c;
  c.kind = kind;
  c.d_in = detail::pick(rng, 1, 3);
  c.d_out = detail::pick(rng, 1, 3);
  c.hidden_layers = detail::pick(rng, 1, 2);
  c.hidden_width = detail::pick(rng, 3, 8);
  c.siren_w0 = std::uniform_real_distribution<double>(5.0, 30.0)(rng);
  c.pe_freqs = detail::pick(rng, 1, 4);
  c.table_resolution.assign(c.d_in, 0);
  for (auto& r : c.table_resolution) r = detail::pick(rng, 2, 4);
  c.table_width = detail::pick(rng, 1, 2);
  c.table_init_scale = 0.5;
  c.grid.num_levels = detail::pick(rng, 1, 3);
  c.grid.log2_table_size = detail::pick(rng, 3, 5);
  c.grid.feature_width = detail::pick(rng, 1, 2);
  c.grid.base_resolution = detail::pick(rng, 2, 4);
  c.grid.growth_factor = 1.5;
  c.transform_freqs = detail::pick(rng, 1, 3);
  c.transform_hidden = detail::pick(rng, 3, 8);
  return c;
}

/// All parameters of a model kind, plus the coordinate when an analytic path
/// exists. For table-backed rhino models the coordinate check holds the
/// lookup features fixed, since table interpolation has no gradient to x.
inline GradCheckResult check_model(ModelKind kind, const GradCheckOptions& o) {
  GradCheckResult res;
  res.name = "model." + std::string(to_string(kind));
  std::mt19937_64 rng(o.seed ^ (0x80 + static_cast<std::uint64_t>(kind)));
  while (res.configs < o.configs) {
    const ModelConfig cfg = random_small_model(kind, rng);
    Model m = build_model(cfg, rng());
    const auto n = detail::pick(rng, 1, 4);
    Matrix x = detail::random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cfg.d_in), rng, 0.02, 0.98);
    const Matrix u = detail::random_matrix(x.rows(), static_cast<Eigen::Index>(cfg.d_out), rng);
    m.zero_grads();
    m.forward(x);
    const bool kink = detail::mlp_near_kink(m.trunk(), o.kink_margin) ||
                      (m.transform() && detail::mlp_near_kink(m.transform()->mlp(), o.kink_margin));
    if (kink) {
      m.clear_cache();
      ++res.redraws;
      continue;
    }
    const auto dx = m.backward(u);
    const auto loss = [&] { return detail::weighted_sum(u, m.predict(x)); };
    for (Parameter* p : m.parameters()) {
      detail::compare_buffer(res, p->name, p->values.data(), p->grads.data(), p->size(), loss, o);
    }
    if (dx) {
      const Matrix features = m.encode(x);
      const bool lookup = uses_table(kind) || uses_hash_grid(kind);
      const auto coord_loss = [&] {
        return detail::weighted_sum(u, lookup ? m.predict_from_features(features, x) : m.predict(x));
      };
      detail::compare_buffer(res, "x", x.data(), dx->data(), static_cast<std::size_t>(x.size()), coord_loss, o);
    }
    ++res.configs;
  }
  return res;
}

inline GradCheckResult check_transform(const GradCheckOptions& o) {
  GradCheckResult res;
  res.name = "transform";
  std::mt19937_64 rng(o.seed ^ 0x90);
  while (res.configs < o.configs) {
    const auto d = detail::pick(rng, 1, 3), n = detail::pick(rng, 1, 4);
    TransformNet t(d, TransformKind::mlp, detail::pick(rng, 1, 4), detail::pick(rng, 3, 8));
    for (auto& l : t.mlp().layers()) {
      detail::init_uniform(l.weight, 1.0, rng);
      detail::init_uniform(l.bias, 0.5, rng);
    }
    Matrix x = detail::random_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d), rng, 0.02, 0.98);
    const Matrix u = detail::random_matrix(x.rows(), static_cast<Eigen::Index>(d), rng);
    t.forward(x);
    if (detail::mlp_near_kink(t.mlp(), o.kink_margin)) {
      t.clear_cache();
      ++res.redraws;
      continue;
    }
    const auto dx = t.backward(u);
    std::vector<Parameter*> params;
    t.collect(params);
    const auto loss = [&] { return detail::weighted_sum(u, t.infer(x)); };
    for (Parameter* p : params) {
      detail::compare_buffer(res, p->name, p->values.data(), p->grads.data(), p->size(), loss, o);
    }
    detail::compare_buffer(res, "x", x.data(), dx->data(), static_cast<std::size_t>(x.size()), loss, o);
    ++res.configs;
  }
  return res;
}

/// Every differentiable operation and every model kind.
inline std::vector<GradCheckResult> run_all_gradient_checks(const GradCheckOptions& o = {}) {
  std::vector<GradCheckResult> out;
  out.push_back(check_linear(o));
  out.push_back(check_activation(Activation::Kind::relu, o));
  out.push_back(check_activation(Activation::Kind::sine, o));
  out.push_back(check_activation(Activation::Kind::identity, o));
  out.push_back(check_concat(o));
  out.push_back(check_mse(o));
  out.push_back(check_positional_encoding(o));
  out.push_back(check_fullres_table(o));
  out.push_back(check_hash_grid(o));
  out.push_back(check_transform(o));
  for (auto k : {ModelKind::siren, ModelKind::pe_mlp, ModelKind::diner, ModelKind::ngp, ModelKind::rhino_diner,
                 ModelKind::rhino_ngp}) {
    out.push_back(check_model(k, o));
  }
  return out;
}

}  // namespace inrlab
