#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "inrlab/diffcore.hpp"
#include "inrlab/errors.hpp"

namespace inrlab {

struct AdamOptions {
  double lr = 1e-3;        // network parameters (trunk and coordinate branch)
  double table_lr = 1e-2;  // table / hash-grid entries
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool cosine_decay = false;
  std::size_t decay_steps = 0;  // horizon of the cosine schedule
};

/// Adam with bias correction and one learning rate per parameter group.
/// Moment buffers are keyed by parameter name.
class Adam {
 public:
  explicit Adam(AdamOptions opts = {}) : opts_(opts) {}

  [[nodiscard]] const AdamOptions& options() const { return opts_; }
  [[nodiscard]] std::size_t step_count() const { return step_; }

  [[nodiscard]] double learning_rate(ParamGroup g) const {
    double lr = g == ParamGroup::table ? opts_.table_lr : opts_.lr;
    if (opts_.cosine_decay && opts_.decay_steps > 0) {
      const double t = std::min(1.0, static_cast<double>(step_) / static_cast<double>(opts_.decay_steps));
      lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * t));
    }
    return lr;
  }

  /// One update over all parameters. Gradients are read, not cleared.
  void step(std::span<Parameter* const> params) {
    for (const Parameter* p : params) {
      for (double g : p->grads) {
        if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient in '" + p->name + "'");
      }
    }
    const double lr_net = learning_rate(ParamGroup::network);
    const double lr_table = learning_rate(ParamGroup::table);
    ++step_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_));
    for (Parameter* p : params) {
      Moments& mo = moments_[p->name];
      if (mo.m.size() != p->size()) {
        mo.m.assign(p->size(), 0.0);
        mo.v.assign(p->size(), 0.0);
      }
      const double lr = p->group == ParamGroup::table ? lr_table : lr_net;
      for (std::size_t i = 0; i < p->size(); ++i) {
        const double g = p->grads[i];
        mo.m[i] = opts_.beta1 * mo.m[i] + (1.0 - opts_.beta1) * g;
        mo.v[i] = opts_.beta2 * mo.v[i] + (1.0 - opts_.beta2) * g * g;
        const double m_hat = mo.m[i] / bc1;
        const double v_hat = mo.v[i] / bc2;
        p->values[i] -= lr * m_hat / (std::sqrt(v_hat) + opts_.eps);
      }
    }
  }

  void step(std::vector<Parameter*>& params) { step(std::span<Parameter* const>(params)); }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  AdamOptions opts_;
  std::size_t step_ = 0;
  std::unordered_map<std::string, Moments> moments_;
};

}  // namespace inrlab
