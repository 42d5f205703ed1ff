#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lexki/error.hpp"
#include "lexki/nn/tape.hpp"

namespace lexki::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
};

// Bias-corrected Adam. Moment buffers are created lazily to match each
// parameter's shape on the first step.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const noexcept { return cfg_; }
  std::uint64_t steps() const noexcept { return t_; }

  void step(const std::vector<Parameter<T>*>& params, double lr) {
    if (!(lr > 0.0)) fail("InvariantError", "learning rate must be positive, got ", lr);
    if (m_.empty()) {
      for (const Parameter<T>* p : params) {
        m_.emplace_back(p->value.numel(), 0.0);
        v_.emplace_back(p->value.numel(), 0.0);
      }
    }
    if (m_.size() != params.size()) {
      fail("ShapeMismatch", "optimizer tracks ", m_.size(), " parameters, got ", params.size());
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Parameter<T>& p = *params[k];
      if (p.grad.shape() != p.value.shape() || m_[k].size() != p.value.numel()) {
        fail("ShapeMismatch", "parameter '", p.name, "' value ", shape_str(p.value.shape()),
             " grad ", shape_str(p.grad.shape()));
      }
      std::vector<double>& m = m_[k];
      std::vector<double>& v = v_[k];
      for (std::size_t i = 0; i < m.size(); ++i) {
        const double g = static_cast<double>(p.grad[i]);
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p.value[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

enum class DecayMode { InverseLinear, InverseSqrt };

inline DecayMode parse_decay_mode(const std::string& s) {
  if (s == "inverse_linear") return DecayMode::InverseLinear;
  if (s == "inverse_sqrt") return DecayMode::InverseSqrt;
  fail("ConfigError", "unknown decay mode '", s, "' (expected inverse_linear or inverse_sqrt)");
}

inline const char* decay_mode_name(DecayMode m) {
  return m == DecayMode::InverseLinear ? "inverse_linear" : "inverse_sqrt";
}

// Linear warmup from floor to peak, then decay with the number of updates.
struct LrSchedule {
  double floor = 1e-7;
  double peak = 0.005;
  std::uint64_t warmup_steps = 4000;
  DecayMode decay = DecayMode::InverseLinear;

  double at(std::uint64_t t) const {
    if (t < 1) fail("InvariantError", "schedule step must be >= 1");
    const double w = static_cast<double>(warmup_steps == 0 ? 1 : warmup_steps);
    const double s = static_cast<double>(t);
    if (s <= w) return floor + (s / w) * (peak - floor);
    return decay == DecayMode::InverseLinear ? peak * (w / s) : peak * std::sqrt(w / s);
  }
};

}  // namespace lexki::nn
