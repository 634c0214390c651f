#pragma once

// The six coordinate networks: SIREN, PE+MLP, DINER (full-resolution table),
// NGP (multi-resolution hash grid) and their regularized variants, which
// concatenate a continuous coordinate branch T(x) next to the table features.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <span>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "inrlab/diffcore.hpp"
#include "inrlab/encodings.hpp"
#include "inrlab/errors.hpp"

namespace inrlab {

enum class ModelKind { siren, pe_mlp, diner, ngp, rhino_diner, rhino_ngp };

/// Coordinate branch of the rhino_* kinds. `none` keeps the trunk shape but
/// feeds zeros and never backpropagates (the branch is detached).
enum class TransformKind { mlp, identity, none };

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::siren: return "siren";
    case ModelKind::pe_mlp: return "pe_mlp";
    case ModelKind::diner: return "diner";
    case ModelKind::ngp: return "ngp";
    case ModelKind::rhino_diner: return "rhino_diner";
    case ModelKind::rhino_ngp: return "rhino_ngp";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  for (auto k : {ModelKind::siren, ModelKind::pe_mlp, ModelKind::diner, ModelKind::ngp,
                 ModelKind::rhino_diner, ModelKind::rhino_ngp}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown model kind '" + std::string(s) + "'");
}

inline std::string_view to_string(TransformKind k) {
  switch (k) {
    case TransformKind::mlp: return "mlp";
    case TransformKind::identity: return "identity";
    case TransformKind::none: return "none";
  }
  return "?";
}

inline TransformKind parse_transform_kind(std::string_view s) {
  for (auto k : {TransformKind::mlp, TransformKind::identity, TransformKind::none}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown transform kind '" + std::string(s) + "'");
}

inline bool uses_table(ModelKind k) { return k == ModelKind::diner || k == ModelKind::rhino_diner; }
inline bool uses_hash_grid(ModelKind k) { return k == ModelKind::ngp || k == ModelKind::rhino_ngp; }
inline bool has_transform(ModelKind k) {
  return k == ModelKind::rhino_diner || k == ModelKind::rhino_ngp;
}

struct MlpSpec {
  std::size_t hidden_layers = 2;
  std::size_t hidden_width = 64;
  Activation activation = Activation::relu();
  std::size_t d_out = 3;
};

/// Everything needed to construct a model besides the seed.
struct ModelConfig {
  ModelKind kind = ModelKind::pe_mlp;
  std::size_t d_in = 2;
  std::size_t d_out = 3;
  std::size_t hidden_layers = 2;
  std::size_t hidden_width = 64;
  /// Empty string means the kind's default (sine for siren, relu otherwise).
  std::string trunk_activation;
  double siren_w0 = 30.0;
  std::size_t pe_freqs = 10;
  std::vector<std::size_t> table_resolution;  // one entry per input dimension
  std::size_t table_width = 2;
  double table_init_scale = 1e-4;
  HashGridSpec grid;
  TransformKind transform = TransformKind::mlp;
  std::size_t transform_freqs = 2;  // band limit of T; see README "Coordinate branch bandwidth"
  std::size_t transform_hidden = 64;
};

/// Plain MLP: hidden_layers (linear + activation) blocks, then a linear head.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, std::size_t in, const MlpSpec& spec) : spec_(spec) {
    std::size_t width = in;
    for (std::size_t j = 0; j < spec.hidden_layers; ++j) {
      layers_.emplace_back(name + "." + std::to_string(j), width, spec.hidden_width);
      acts_.emplace_back(spec.activation);
      width = spec.hidden_width;
    }
    layers_.emplace_back(name + "." + std::to_string(spec.hidden_layers), width, spec.d_out);
  }

  [[nodiscard]] std::size_t in_width() const { return layers_.front().in_features(); }
  [[nodiscard]] std::size_t out_width() const { return layers_.back().out_features(); }
  [[nodiscard]] const MlpSpec& spec() const { return spec_; }
  std::vector<Linear>& layers() { return layers_; }
  [[nodiscard]] const std::vector<Linear>& layers() const { return layers_; }
  [[nodiscard]] const std::vector<ActivationLayer>& activations() const { return acts_; }

  [[nodiscard]] Matrix infer(const Matrix& in) const {
    Matrix h = in;
    for (std::size_t j = 0; j < acts_.size(); ++j) h = acts_[j].infer(layers_[j].infer(h));
    return layers_.back().infer(h);
  }

  Matrix forward(Matrix in) {
    Matrix h = std::move(in);
    for (std::size_t j = 0; j < acts_.size(); ++j) h = acts_[j].forward(layers_[j].forward(std::move(h)));
    return layers_.back().forward(std::move(h));
  }

  Matrix backward(const Matrix& upstream) {
    Matrix g = layers_.back().backward(upstream);
    for (std::size_t j = acts_.size(); j-- > 0;) g = layers_[j].backward(acts_[j].backward(g));
    return g;
  }

  void collect(std::vector<Parameter*>& out) {
    for (auto& l : layers_) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
  }

  void clear_cache() {
    for (auto& l : layers_) l.clear_cache();
    for (auto& a : acts_) a.clear_cache();
  }

 private:
  MlpSpec spec_;
  std::vector<Linear> layers_;
  std::vector<ActivationLayer> acts_;
};

/// T(x): positional encoding, one relu hidden layer, linear head back to d_in.
class TransformNet {
 public:
  TransformNet() = default;
  TransformNet(std::size_t d_in, TransformKind kind, std::size_t num_freqs, std::size_t hidden)
      : kind_(kind), d_in_(d_in) {
    if (kind_ == TransformKind::mlp) {
      pe_ = PositionalEncoding(d_in, num_freqs);
      mlp_ = Mlp("transform", pe_.out_width(),
                 MlpSpec{1, hidden, Activation::relu(), d_in});
    }
  }

  [[nodiscard]] TransformKind kind() const { return kind_; }
  [[nodiscard]] std::size_t out_width() const { return d_in_; }
  Mlp& mlp() { return mlp_; }
  [[nodiscard]] const Mlp& mlp() const { return mlp_; }

  [[nodiscard]] Matrix infer(const Matrix& x) const {
    switch (kind_) {
      case TransformKind::mlp: return mlp_.infer(pe_.infer(x));
      case TransformKind::identity: return x;
      case TransformKind::none: break;
    }
    return Matrix::Zero(x.rows(), x.cols());
  }

  Matrix forward(const Matrix& x) {
    switch (kind_) {
      case TransformKind::mlp: return mlp_.forward(pe_.forward(x));
      case TransformKind::identity: return x;
      case TransformKind::none: break;
    }
    return Matrix::Zero(x.rows(), x.cols());
  }

  /// Gradient w.r.t. x, or nothing when the branch is detached.
  std::optional<Matrix> backward(const Matrix& upstream) {
    switch (kind_) {
      case TransformKind::mlp: return pe_.backward(mlp_.backward(upstream));
      case TransformKind::identity: return upstream;
      case TransformKind::none: break;
    }
    return std::nullopt;
  }

  void collect(std::vector<Parameter*>& out) {
    if (kind_ == TransformKind::mlp) mlp_.collect(out);
  }

  void clear_cache() {
    pe_.clear_cache();
    mlp_.clear_cache();
  }

 private:
  TransformKind kind_ = TransformKind::none;
  std::size_t d_in_ = 1;
  PositionalEncoding pe_;
  Mlp mlp_;
};

namespace detail {

inline void init_layer_uniform(Linear& l, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> w(-bound, bound);
  for (double& v : l.weight.values) v = w(rng);
  const double bb = 1.0 / std::sqrt(static_cast<double>(l.in_features()));
  std::uniform_real_distribution<double> b(-bb, bb);
  for (double& v : l.bias.values) v = b(rng);
}

inline void init_relu_mlp(Mlp& m, std::mt19937_64& rng) {
  for (auto& l : m.layers()) {
    init_layer_uniform(l, std::sqrt(6.0 / static_cast<double>(l.in_features())), rng);
  }
}

inline void init_siren_mlp(Mlp& m, double w0, std::mt19937_64& rng) {
  auto& layers = m.layers();
  for (std::size_t j = 0; j < layers.size(); ++j) {
    const double in = static_cast<double>(layers[j].in_features());
    init_layer_uniform(layers[j], j == 0 ? 1.0 / in : std::sqrt(6.0 / in) / w0, rng);
  }
}

}  // namespace detail

/// A fixed feed-forward composition: encoder(s) -> trunk MLP.
class Model {
 public:
  using Encoder = std::variant<std::monostate, PositionalEncoding, FullResTable, MultiResHashGrid>;

  Model() = default;

  [[nodiscard]] ModelKind kind() const { return cfg_.kind; }
  [[nodiscard]] const ModelConfig& config() const { return cfg_; }
  [[nodiscard]] std::size_t d_in() const { return cfg_.d_in; }
  [[nodiscard]] std::size_t d_out() const { return cfg_.d_out; }
  [[nodiscard]] const Mlp& trunk() const { return trunk_; }
  Mlp& trunk() { return trunk_; }
  [[nodiscard]] const Encoder& encoder() const { return encoder_; }
  Encoder& encoder() { return encoder_; }
  [[nodiscard]] const std::optional<TransformNet>& transform() const { return transform_; }
  std::optional<TransformNet>& transform() { return transform_; }

  [[nodiscard]] std::size_t encoder_width() const {
    return std::visit(
        [this](const auto& e) -> std::size_t {
          using E = std::decay_t<decltype(e)>;
          if constexpr (std::is_same_v<E, std::monostate>) {
            return cfg_.d_in;
          } else {
            return e.out_width();
          }
        },
        encoder_);
  }

  [[nodiscard]] std::size_t trunk_input_width() const { return trunk_.in_width(); }

  /// True when backward() yields an analytic d(output)/d(x).
  [[nodiscard]] bool has_coordinate_path() const {
    if (transform_) return transform_->kind() != TransformKind::none;
    return !uses_table(cfg_.kind) && !uses_hash_grid(cfg_.kind);
  }

  /// Table lookups stop receiving gradients while frozen.
  void set_table_frozen(bool frozen) { table_frozen_ = frozen; }
  [[nodiscard]] bool table_frozen() const { return table_frozen_; }

  /// Output of the first-stage encoder (identity for siren).
  [[nodiscard]] Matrix encode(const Matrix& x) const {
    check_input(x);
    return std::visit(
        [&](const auto& e) -> Matrix {
          using E = std::decay_t<decltype(e)>;
          if constexpr (std::is_same_v<E, std::monostate>) {
            return x;
          } else {
            return e.infer(x);
          }
        },
        encoder_);
  }

  /// What the trunk sees for coordinates x.
  [[nodiscard]] Matrix trunk_inputs(const Matrix& x) const {
    Matrix enc = encode(x);
    if (!transform_) return enc;
    return concat_columns(enc, transform_->infer(x));
  }

  /// Trunk evaluated on given encoder features with T(x) recomputed; used to
  /// differentiate through the coordinate branch with the lookup held fixed.
  [[nodiscard]] Matrix predict_from_features(const Matrix& features, const Matrix& x) const {
    if (!transform_) return trunk_.infer(features);
    check_input(x);
    return trunk_.infer(concat_columns(features, transform_->infer(x)));
  }

  /// Inference in row blocks of `block` to keep intermediates cache-sized.
  [[nodiscard]] Matrix predict(const Matrix& x, Eigen::Index block = 4096) const {
    if (x.rows() <= block) return trunk_.infer(trunk_inputs(x));
    Matrix out(x.rows(), static_cast<Eigen::Index>(cfg_.d_out));
    for (Eigen::Index start = 0; start < x.rows(); start += block) {
      const Eigen::Index len = std::min(block, x.rows() - start);
      out.middleRows(start, len) = trunk_.infer(trunk_inputs(x.middleRows(start, len)));
    }
    return out;
  }

  Matrix forward(const Matrix& x) {
    check_input(x);
    Matrix enc = std::visit(
        [&](auto& e) -> Matrix {
          using E = std::decay_t<decltype(e)>;
          if constexpr (std::is_same_v<E, std::monostate>) {
            return x;
          } else {
            return e.forward(x);
          }
        },
        encoder_);
    has_forward_ = true;
    if (!transform_) return trunk_.forward(std::move(enc));
    return trunk_.forward(concat_columns(enc, transform_->forward(x)));
  }

  /// Accumulates gradients into every reachable parameter. Returns d(loss)/dx
  /// when an analytic coordinate path exists; table lookups contribute none.
  std::optional<Matrix> backward(const Matrix& grad_out) {
    if (!has_forward_) throw UsageError("model: backward called without forward");
    Matrix g = trunk_.backward(grad_out);
    const auto enc_w = static_cast<Eigen::Index>(encoder_width());
    Matrix g_enc = g.leftCols(enc_w);
    std::optional<Matrix> g_x;
    if (transform_) g_x = transform_->backward(g.rightCols(g.cols() - enc_w));
    std::visit(
        [&](auto& e) {
          using E = std::decay_t<decltype(e)>;
          if constexpr (std::is_same_v<E, std::monostate>) {
            g_x = g_enc;
          } else if constexpr (std::is_same_v<E, PositionalEncoding>) {
            g_x = e.backward(g_enc);
          } else {
            if (!table_frozen_) e.backward(g_enc);
          }
        },
        encoder_);
    return g_x;
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    trunk_.collect(out);
    if (transform_) transform_->collect(out);
    if (auto* t = std::get_if<FullResTable>(&encoder_)) out.push_back(&t->entries);
    if (auto* g = std::get_if<MultiResHashGrid>(&encoder_)) {
      for (auto& lv : g->levels()) out.push_back(&lv.entries);
    }
    return out;
  }

  [[nodiscard]] std::vector<const Parameter*> parameters() const {
    auto ps = const_cast<Model*>(this)->parameters();
    return {ps.begin(), ps.end()};
  }

  [[nodiscard]] std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->size();
    return n;
  }

  void zero_grads() {
    for (auto* p : parameters()) p->zero_grads();
  }

  void clear_cache() {
    trunk_.clear_cache();
    if (transform_) transform_->clear_cache();
    std::visit(
        [](auto& e) {
          if constexpr (!std::is_same_v<std::decay_t<decltype(e)>, std::monostate>) e.clear_cache();
        },
        encoder_);
    has_forward_ = false;
  }

  friend Model build_model(const ModelConfig& cfg, std::uint64_t seed);

 private:
  void check_input(const Matrix& x) const {
    if (static_cast<std::size_t>(x.cols()) != cfg_.d_in) {
      throw ConfigError("model: expected " + std::to_string(cfg_.d_in) + " coordinate columns, got " +
                        std::to_string(x.cols()));
    }
    check_unit_domain(x, "model");
  }

  ModelConfig cfg_;
  Encoder encoder_;
  std::optional<TransformNet> transform_;
  Mlp trunk_;
  bool table_frozen_ = false;
  bool has_forward_ = false;
};

inline Activation resolve_trunk_activation(const ModelConfig& cfg) {
  const std::string& a = cfg.trunk_activation;
  if (a.empty()) {
    return cfg.kind == ModelKind::siren ? Activation::sine(cfg.siren_w0) : Activation::relu();
  }
  if (a == "relu") return Activation::relu();
  if (a == "sine") return Activation::sine(cfg.siren_w0);
  if (a == "identity") return Activation::identity();
  throw ConfigError("unknown trunk activation '" + a + "'");
}

/// Constructs and initializes a model. The trunk and the lookup tables draw
/// from one stream seeded by `seed`, exactly as the backbone kind would, so a
/// rhino model and its backbone share every common initial value. The T-input
/// trunk columns and the T network draw from a second stream; with
/// transform = none those columns start (and stay) at zero.
inline Model build_model(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.d_in < 1 || cfg.d_in > kMaxDims) throw ConfigError("model: d_in must be 1, 2 or 3");
  if (cfg.d_out < 1) throw ConfigError("model: d_out must be >= 1");
  if (cfg.hidden_width < 1) throw ConfigError("model: hidden_width must be >= 1");
  Model m;
  m.cfg_ = cfg;
  std::mt19937_64 rng(seed);
  std::mt19937_64 aux(seed ^ 0x7f4a7c159e3779b9ull);

  switch (cfg.kind) {
    case ModelKind::siren: m.encoder_ = std::monostate{}; break;
    case ModelKind::pe_mlp: m.encoder_ = PositionalEncoding(cfg.d_in, cfg.pe_freqs); break;
    case ModelKind::diner:
    case ModelKind::rhino_diner: {
      if (cfg.table_resolution.size() != cfg.d_in) {
        throw ConfigError("model: table_resolution needs one entry per input dimension");
      }
      m.encoder_ = FullResTable(cfg.table_resolution, cfg.table_width, "table");
      break;
    }
    case ModelKind::ngp:
    case ModelKind::rhino_ngp: m.encoder_ = MultiResHashGrid(cfg.d_in, cfg.grid, "hashgrid"); break;
  }

  const Activation act = resolve_trunk_activation(cfg);
  const MlpSpec trunk_spec{cfg.hidden_layers, cfg.hidden_width, act, cfg.d_out};
  const std::size_t enc_w = m.encoder_width();
  Mlp backbone("trunk", enc_w, trunk_spec);
  if (act.kind == Activation::Kind::sine) {
    detail::init_siren_mlp(backbone, act.w0, rng);
  } else {
    detail::init_relu_mlp(backbone, rng);
  }

  if (has_transform(cfg.kind)) {
    m.transform_ = TransformNet(cfg.d_in, cfg.transform, cfg.transform_freqs, cfg.transform_hidden);
    m.trunk_ = Mlp("trunk", enc_w + cfg.d_in, trunk_spec);
    auto& wide = m.trunk_.layers();
    const auto& narrow = backbone.layers();
    for (std::size_t j = 0; j < wide.size(); ++j) {
      wide[j].bias.values = narrow[j].bias.values;
      if (j > 0) {
        wide[j].weight.values = narrow[j].weight.values;
        continue;
      }
      const double bound = std::sqrt(6.0 / static_cast<double>(enc_w));
      std::uniform_real_distribution<double> extra(-bound, bound);
      const bool live = cfg.transform != TransformKind::none;
      const std::size_t in_w = enc_w + cfg.d_in;
      for (std::size_t o = 0; o < wide[0].out_features(); ++o) {
        for (std::size_t c = 0; c < in_w; ++c) {
          wide[0].weight.values[o * in_w + c] =
              c < enc_w ? narrow[0].weight.values[o * enc_w + c] : (live ? extra(aux) : 0.0);
        }
      }
    }
  } else {
    m.trunk_ = std::move(backbone);
  }

  if (auto* t = std::get_if<FullResTable>(&m.encoder_)) t->init_uniform(rng, cfg.table_init_scale);
  if (auto* g = std::get_if<MultiResHashGrid>(&m.encoder_)) g->init_uniform(rng, cfg.table_init_scale);
  if (m.transform_ && m.transform_->kind() == TransformKind::mlp) {
    detail::init_relu_mlp(m.transform_->mlp(), aux);
  }
  return m;
}

/// Frobenius norm of d f / d x at one coordinate, by central differences on
/// the whole model. Steps are clipped at the domain boundary.
inline double coord_jacobian_norm(const Model& m, std::span<const double> x, double h = 1e-4) {
  const auto d = static_cast<Eigen::Index>(m.d_in());
  if (static_cast<Eigen::Index>(x.size()) != d) throw ConfigError("coord_jacobian_norm: dimension mismatch");
  double sum = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) {
    Matrix lo(1, d), hi(1, d);
    for (Eigen::Index j = 0; j < d; ++j) lo(0, j) = hi(0, j) = x[static_cast<std::size_t>(j)];
    hi(0, k) = std::min(1.0, hi(0, k) + h);
    lo(0, k) = std::max(0.0, lo(0, k) - h);
    const double step = hi(0, k) - lo(0, k);
    const Matrix col = (m.predict(hi) - m.predict(lo)) / step;
    sum += col.squaredNorm();
  }
  return std::sqrt(sum);
}

}  // namespace inrlab
