#pragma once

// Coordinate preprocessors.
//
// PositionalEncoding is an analytic map and backpropagates to the coordinate.
// FullResTable and MultiResHashGrid gather learnable keys by grid position; their
// backward() only feeds the table entries and deliberately returns nothing for x.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "inrlab/diffcore.hpp"
#include "inrlab/errors.hpp"

namespace inrlab {

inline void check_unit_domain(const Matrix& x, const char* who) {
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
      const double v = x(i, k);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw DomainError(std::string(who) + ": coordinate " + std::to_string(v) +
                          " outside [0,1] (row " + std::to_string(i) + ", dim " +
                          std::to_string(k) + ")");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Fourier positional encoding
// ---------------------------------------------------------------------------

/// gamma(x) = {sin(2^i pi x_k), cos(2^i pi x_k)}; layout is dim-major, then
/// frequency, then the (sin, cos) pair.
class PositionalEncoding {
 public:
  PositionalEncoding() = default;
  PositionalEncoding(std::size_t d_in, std::size_t num_freqs) : d_in_(d_in), num_freqs_(num_freqs) {
    if (num_freqs_ < 1) throw ConfigError("positional encoding needs at least one frequency");
    if (d_in_ < 1) throw ConfigError("positional encoding needs d_in >= 1");
  }

  [[nodiscard]] std::size_t d_in() const { return d_in_; }
  [[nodiscard]] std::size_t num_freqs() const { return num_freqs_; }
  [[nodiscard]] std::size_t out_width() const { return 2 * num_freqs_ * d_in_; }

  [[nodiscard]] Matrix infer(const Matrix& x) const {
    check_shape(x);
    Matrix out(x.rows(), static_cast<Eigen::Index>(out_width()));
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      Eigen::Index c = 0;
      for (std::size_t k = 0; k < d_in_; ++k) {
        for (std::size_t i = 0; i < num_freqs_; ++i) {
          const double a = frequency(i) * x(r, static_cast<Eigen::Index>(k));
          out(r, c++) = std::sin(a);
          out(r, c++) = std::cos(a);
        }
      }
    }
    return out;
  }

  Matrix forward(const Matrix& x) {
    Matrix out = infer(x);
    cached_output_ = out;
    return out;
  }

  /// Analytic Jacobian-vector product back to the coordinates, reusing the
  /// cached (sin, cos) pairs: d sin = w cos, d cos = -w sin.
  Matrix backward(const Matrix& upstream) {
    if (!cached_output_) throw UsageError("positional encoding: backward called without forward");
    const Matrix& enc = *cached_output_;
    if (upstream.rows() != enc.rows() || upstream.cols() != enc.cols()) {
      throw ConfigError("positional encoding: upstream gradient shape mismatch");
    }
    Matrix dx(enc.rows(), static_cast<Eigen::Index>(d_in_));
    for (Eigen::Index r = 0; r < enc.rows(); ++r) {
      Eigen::Index c = 0;
      for (std::size_t k = 0; k < d_in_; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < num_freqs_; ++i, c += 2) {
          acc += frequency(i) * (upstream(r, c) * enc(r, c + 1) - upstream(r, c + 1) * enc(r, c));
        }
        dx(r, static_cast<Eigen::Index>(k)) = acc;
      }
    }
    return dx;
  }

  void clear_cache() { cached_output_.reset(); }

  [[nodiscard]] static double frequency(std::size_t i) {
    return std::ldexp(std::numbers::pi, static_cast<int>(i));
  }

 private:
  void check_shape(const Matrix& x) const {
    if (static_cast<std::size_t>(x.cols()) != d_in_) {
      throw ConfigError("positional encoding: expected " + std::to_string(d_in_) + " columns");
    }
  }

  std::size_t d_in_ = 1;
  std::size_t num_freqs_ = 10;
  std::optional<Matrix> cached_output_;
};

// ---------------------------------------------------------------------------
// d-linear interpolation stencils
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMaxDims = 3;

/// The 2^d corners surrounding one query and their interpolation weights.
struct Stencil {
  std::array<std::array<std::uint32_t, kMaxDims>, 1u << kMaxDims> corner{};
  std::array<double, 1u << kMaxDims> weight{};
  std::size_t count = 0;
};

/// Builds the stencil for a point at continuous grid position u (node units)
/// on a lattice with res[k] nodes per dimension. u must lie in [0, res-1].
inline Stencil make_stencil(std::span<const double> u, std::span<const std::size_t> res) {
  const std::size_t d = u.size();
  std::array<std::uint32_t, kMaxDims> base{};
  std::array<double, kMaxDims> frac{};
  for (std::size_t k = 0; k < d; ++k) {
    const double last_cell = static_cast<double>(res[k]) - 2.0;
    double cell = std::floor(u[k]);
    if (cell > last_cell) cell = last_cell;
    if (cell < 0.0) cell = 0.0;
    base[k] = static_cast<std::uint32_t>(cell);
    frac[k] = u[k] - cell;
  }
  Stencil s;
  s.count = std::size_t{1} << d;
  for (std::size_t c = 0; c < s.count; ++c) {
    double w = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      const bool upper = (c >> k) & 1u;
      s.corner[c][k] = base[k] + (upper ? 1u : 0u);
      w *= upper ? frac[k] : 1.0 - frac[k];
    }
    s.weight[c] = w;
  }
  return s;
}

/// Row-major (last dimension fastest) linear index of a lattice node.
inline std::uint64_t row_major_index(std::span<const std::uint32_t> idx,
                                     std::span<const std::size_t> res) {
  std::uint64_t lin = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) lin = lin * res[k] + idx[k];
  return lin;
}

inline constexpr std::array<std::uint32_t, kMaxDims> kHashPrimes = {1u, 2654435761u, 805459861u};

/// XOR-of-primes spatial hash (uint32 wrap-around arithmetic), reduced mod table_size.
inline std::uint32_t spatial_hash(std::span<const std::uint32_t> grid_index,
                                  std::uint32_t table_size) {
  if (grid_index.empty() || grid_index.size() > kMaxDims) {
    throw ConfigError("spatial_hash supports 1 to 3 dimensions");
  }
  std::uint32_t h = 0;
  for (std::size_t k = 0; k < grid_index.size(); ++k) h ^= grid_index[k] * kHashPrimes[k];
  return h % table_size;
}

namespace detail {

inline void init_uniform(Parameter& p, double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (double& v : p.values) v = dist(rng);
}

// Per-sample stencils for one lookup table, stored flat: sample s owns
// slots [s*corners, (s+1)*corners).
struct GatherCache {
  std::size_t corners = 0;
  std::vector<std::uint32_t> slot;
  std::vector<double> weight;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Full-resolution key table
// ---------------------------------------------------------------------------

/// One learnable F-vector per lattice node; queries are d-linearly interpolated.
class FullResTable {
 public:
  Parameter entries;

  FullResTable() = default;
  FullResTable(std::vector<std::size_t> resolution, std::size_t feature_width,
               const std::string& name = "table")
      : res_(std::move(resolution)), width_(feature_width) {
    if (res_.empty() || res_.size() > kMaxDims) throw ConfigError("table: 1 to 3 dimensions");
    if (width_ < 1) throw ConfigError("table: feature width must be >= 1");
    std::size_t nodes = 1;
    for (auto r : res_) {
      if (r < 2) throw ConfigError("table: resolution must be >= 2 per dimension");
      nodes *= r;
    }
    entries = Parameter(name + ".entries", nodes, width_, ParamGroup::table);
  }

  [[nodiscard]] std::size_t dims() const { return res_.size(); }
  [[nodiscard]] std::size_t width() const { return width_; }
  [[nodiscard]] std::size_t out_width() const { return width_; }
  [[nodiscard]] const std::vector<std::size_t>& resolution() const { return res_; }

  void init_uniform(std::mt19937_64& rng, double scale = 1e-4) {
    detail::init_uniform(entries, scale, rng);
  }

  [[nodiscard]] Stencil stencil(std::span<const double> x) const {
    std::array<double, kMaxDims> u{};
    for (std::size_t k = 0; k < dims(); ++k) u[k] = x[k] * static_cast<double>(res_[k] - 1);
    return make_stencil(std::span<const double>(u.data(), dims()), res_);
  }

  [[nodiscard]] Matrix infer(const Matrix& x) const { return gather(x, nullptr); }

  Matrix forward(const Matrix& x) {
    detail::GatherCache cache;
    Matrix out = gather(x, &cache);
    cache_ = std::move(cache);
    return out;
  }

  /// Scatters upstream * weight into the touched entries. No coordinate gradient exists.
  void backward(const Matrix& upstream) {
    if (!cache_) throw UsageError("table: backward called without forward");
    const auto& c = *cache_;
    if (static_cast<std::size_t>(upstream.rows()) * c.corners != c.slot.size() ||
        static_cast<std::size_t>(upstream.cols()) != width_) {
      throw ConfigError("table: upstream gradient shape mismatch");
    }
    for (Eigen::Index r = 0; r < upstream.rows(); ++r) {
      for (std::size_t j = 0; j < c.corners; ++j) {
        const std::size_t s = static_cast<std::size_t>(r) * c.corners + j;
        double* g = entries.grads.data() + static_cast<std::size_t>(c.slot[s]) * width_;
        for (std::size_t f = 0; f < width_; ++f) g[f] += c.weight[s] * upstream(r, f);
      }
    }
  }

  void clear_cache() { cache_.reset(); }

 private:
  Matrix gather(const Matrix& x, detail::GatherCache* cache) const {
    if (static_cast<std::size_t>(x.cols()) != dims()) {
      throw ConfigError("table: expected " + std::to_string(dims()) + " coordinate columns");
    }
    check_unit_domain(x, "table lookup");
    const std::size_t corners = std::size_t{1} << dims();
    if (cache) {
      cache->corners = corners;
      cache->slot.resize(static_cast<std::size_t>(x.rows()) * corners);
      cache->weight.resize(cache->slot.size());
    }
    Matrix out = Matrix::Zero(x.rows(), static_cast<Eigen::Index>(width_));
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const Stencil st = stencil(std::span<const double>(x.row(r).data(), dims()));
      for (std::size_t j = 0; j < corners; ++j) {
        const auto node = static_cast<std::uint32_t>(
            row_major_index(std::span<const std::uint32_t>(st.corner[j].data(), dims()), res_));
        const double* e = entries.values.data() + static_cast<std::size_t>(node) * width_;
        for (std::size_t f = 0; f < width_; ++f) out(r, f) += st.weight[j] * e[f];
        if (cache) {
          cache->slot[static_cast<std::size_t>(r) * corners + j] = node;
          cache->weight[static_cast<std::size_t>(r) * corners + j] = st.weight[j];
        }
      }
    }
    return out;
  }

  std::vector<std::size_t> res_;
  std::size_t width_ = 1;
  std::optional<detail::GatherCache> cache_;
};

// ---------------------------------------------------------------------------
// Multi-resolution hash grid
// ---------------------------------------------------------------------------

struct HashGridSpec {
  std::size_t num_levels = 8;
  std::size_t log2_table_size = 14;
  std::size_t feature_width = 2;
  std::size_t base_resolution = 16;
  double growth_factor = 1.5;
};

/// Per-level lattices of N_l = floor(N_min * b^l) nodes per dimension. A level
/// is indexed densely while N_l^d fits the table, otherwise through spatial_hash.
/// Output is the per-level interpolated features, concatenated coarse to fine.
class MultiResHashGrid {
 public:
  struct Level {
    std::size_t resolution = 0;
    std::size_t slots = 0;
    bool dense = true;
    Parameter entries;
  };

  MultiResHashGrid() = default;
  MultiResHashGrid(std::size_t d_in, const HashGridSpec& spec, const std::string& name = "hashgrid")
      : d_(d_in), spec_(spec) {
    if (d_ < 1 || d_ > kMaxDims) throw ConfigError("hash grid: 1 to 3 dimensions");
    if (spec.num_levels < 1) throw ConfigError("hash grid: num_levels must be >= 1");
    if (spec.feature_width < 1) throw ConfigError("hash grid: feature_width must be >= 1");
    if (spec.log2_table_size < 1 || spec.log2_table_size > 30) {
      throw ConfigError("hash grid: log2_table_size must be in [1, 30]");
    }
    if (spec.base_resolution < 2) throw ConfigError("hash grid: base_resolution must be >= 2");
    if (!(spec.growth_factor >= 1.0)) throw ConfigError("hash grid: growth_factor must be >= 1");
    const std::size_t table = std::size_t{1} << spec.log2_table_size;
    for (std::size_t l = 0; l < spec.num_levels; ++l) {
      Level lv;
      lv.resolution = static_cast<std::size_t>(
          std::floor(static_cast<double>(spec.base_resolution) * std::pow(spec.growth_factor, l)));
      double dense_nodes = std::pow(static_cast<double>(lv.resolution), static_cast<double>(d_));
      lv.dense = dense_nodes <= static_cast<double>(table);
      lv.slots = lv.dense ? static_cast<std::size_t>(dense_nodes) : table;
      lv.entries = Parameter(name + ".level" + std::to_string(l), lv.slots, spec.feature_width,
                             ParamGroup::table);
      levels_.push_back(std::move(lv));
    }
  }

  [[nodiscard]] std::size_t dims() const { return d_; }
  [[nodiscard]] const HashGridSpec& spec() const { return spec_; }
  [[nodiscard]] std::size_t out_width() const { return levels_.size() * spec_.feature_width; }
  [[nodiscard]] const std::vector<Level>& levels() const { return levels_; }
  std::vector<Level>& levels() { return levels_; }

  void init_uniform(std::mt19937_64& rng, double scale = 1e-4) {
    for (auto& lv : levels_) detail::init_uniform(lv.entries, scale, rng);
  }

  /// Storage slot of a lattice node on level l.
  [[nodiscard]] std::uint32_t slot(std::size_t l, std::span<const std::uint32_t> node) const {
    const Level& lv = levels_[l];
    if (lv.dense) {
      std::array<std::size_t, kMaxDims> res{};
      res.fill(lv.resolution);
      return static_cast<std::uint32_t>(
          row_major_index(node, std::span<const std::size_t>(res.data(), d_)));
    }
    return spatial_hash(node, static_cast<std::uint32_t>(lv.slots));
  }

  [[nodiscard]] Stencil stencil(std::size_t l, std::span<const double> x) const {
    const double scale = static_cast<double>(levels_[l].resolution - 1);
    std::array<double, kMaxDims> u{};
    std::array<std::size_t, kMaxDims> res{};
    for (std::size_t k = 0; k < d_; ++k) {
      u[k] = x[k] * scale;
      res[k] = levels_[l].resolution;
    }
    return make_stencil(std::span<const double>(u.data(), d_),
                        std::span<const std::size_t>(res.data(), d_));
  }

  [[nodiscard]] Matrix infer(const Matrix& x) const { return encode(x, nullptr); }

  Matrix forward(const Matrix& x) {
    std::vector<detail::GatherCache> cache(levels_.size());
    Matrix out = encode(x, &cache);
    cache_ = std::move(cache);
    return out;
  }

  /// Scatters into every level's entries; hash collisions simply accumulate.
  /// No coordinate gradient exists.
  void backward(const Matrix& upstream) {
    if (!cache_) throw UsageError("hash grid: backward called without forward");
    const std::size_t F = spec_.feature_width;
    if (static_cast<std::size_t>(upstream.cols()) != out_width()) {
      throw ConfigError("hash grid: upstream gradient shape mismatch");
    }
    for (std::size_t l = 0; l < levels_.size(); ++l) {
      const auto& c = (*cache_)[l];
      if (static_cast<std::size_t>(upstream.rows()) * c.corners != c.slot.size()) {
        throw ConfigError("hash grid: upstream gradient row mismatch");
      }
      double* grads = levels_[l].entries.grads.data();
      for (Eigen::Index r = 0; r < upstream.rows(); ++r) {
        for (std::size_t j = 0; j < c.corners; ++j) {
          const std::size_t s = static_cast<std::size_t>(r) * c.corners + j;
          double* g = grads + static_cast<std::size_t>(c.slot[s]) * F;
          for (std::size_t f = 0; f < F; ++f) {
            g[f] += c.weight[s] * upstream(r, static_cast<Eigen::Index>(l * F + f));
          }
        }
      }
    }
  }

  void clear_cache() { cache_.reset(); }

 private:
  Matrix encode(const Matrix& x, std::vector<detail::GatherCache>* cache) const {
    if (static_cast<std::size_t>(x.cols()) != d_) {
      throw ConfigError("hash grid: expected " + std::to_string(d_) + " coordinate columns");
    }
    check_unit_domain(x, "hash grid");
    const std::size_t F = spec_.feature_width;
    const std::size_t corners = std::size_t{1} << d_;
    Matrix out = Matrix::Zero(x.rows(), static_cast<Eigen::Index>(out_width()));
    double* out_data = out.data();
    const std::size_t out_w = out_width();
    for (std::size_t l = 0; l < levels_.size(); ++l) {
      detail::GatherCache* c = cache ? &(*cache)[l] : nullptr;
      if (c) {
        c->corners = corners;
        c->slot.resize(static_cast<std::size_t>(x.rows()) * corners);
        c->weight.resize(c->slot.size());
      }
      const Level& lv = levels_[l];
      const double* values = lv.entries.values.data();
      const double scale = static_cast<double>(lv.resolution - 1);
      const double last_cell = static_cast<double>(lv.resolution) - 2.0;
      const auto table = static_cast<std::uint32_t>(lv.slots);
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        std::array<std::uint32_t, kMaxDims> base{};
        std::array<double, kMaxDims> frac{};
        for (std::size_t k = 0; k < d_; ++k) {
          const double u = x(r, static_cast<Eigen::Index>(k)) * scale;
          const double cell = std::clamp(std::floor(u), 0.0, last_cell);
          base[k] = static_cast<std::uint32_t>(cell);
          frac[k] = u - cell;
        }
        for (std::size_t j = 0; j < corners; ++j) {
          double w = 1.0;
          std::uint64_t lin = 0;
          std::uint32_t h = 0;
          for (std::size_t k = 0; k < d_; ++k) {
            const bool upper = (j >> k) & 1u;
            const std::uint32_t node = base[k] + (upper ? 1u : 0u);
            w *= upper ? frac[k] : 1.0 - frac[k];
            lin = lin * lv.resolution + node;
            h ^= node * kHashPrimes[k];
          }
          // hashed tables are 2^k slots, so the mask equals h % table
          const std::uint32_t s = lv.dense ? static_cast<std::uint32_t>(lin) : (h & (table - 1u));
          const double* e = values + static_cast<std::size_t>(s) * F;
          double* o = out_data + static_cast<std::size_t>(r) * out_w + l * F;
          for (std::size_t f = 0; f < F; ++f) o[f] += w * e[f];
          if (c) {
            c->slot[static_cast<std::size_t>(r) * corners + j] = s;
            c->weight[static_cast<std::size_t>(r) * corners + j] = w;
          }
        }
      }
    }
    return out;
  }

  std::size_t d_ = 2;
  HashGridSpec spec_;
  std::vector<Level> levels_;
  std::optional<std::vector<detail::GatherCache>> cache_;
};

}  // namespace inrlab
