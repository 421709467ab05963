#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pacnet/common.hpp"
#include "pacnet/tensor.hpp"

namespace pacnet {

// One trainable entry: value plus gradient plus the two adaptive-moment
// buffers, all the same shape. Entries live behind unique_ptr so layers can
// keep raw Param* across bank growth.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m1;
  Tensor m2;

  explicit Param(std::string n, Tensor init)
      : name(std::move(n)),
        value(std::move(init)),
        grad(value.shape()),
        m1(value.shape()),
        m2(value.shape()) {}
};

class ParamBank {
 public:
  Param* add(const std::string& name, Tensor init) {
    require(index_.find(name) == index_.end(),
            "duplicate parameter name: ", name);
    entries_.push_back(std::make_unique<Param>(name, std::move(init)));
    index_[name] = entries_.size() - 1;
    return entries_.back().get();
  }

  Param* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : entries_[it->second].get();
  }
  const Param* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : entries_[it->second].get();
  }

  Param& get(const std::string& name) {
    Param* p = find(name);
    require(p != nullptr, "unknown parameter: ", name);
    return *p;
  }

  std::size_t size() const { return entries_.size(); }
  Param& entry(std::size_t i) { return *entries_[i]; }
  const Param& entry(std::size_t i) const { return *entries_[i]; }

  std::int64_t total_parameter_count() const {
    std::int64_t n = 0;
    for (const auto& p : entries_) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : entries_) p->grad.fill(0.0f);
  }

 private:
  std::vector<std::unique_ptr<Param>> entries_;
  std::map<std::string, std::size_t> index_;
};

struct OptimizerSpec {
  double learning_rate = 1e-3;
  double decay_per_epoch = 0.999;  // multiplicative, applied per epoch index
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-6;
  bool layerwise_trust_ratio = true;

  void validate() const {
    require(learning_rate >= 0.0, "learning_rate must be >= 0");
    require(beta1 > 0.0 && beta1 < 1.0, "beta1 must lie in (0,1)");
    require(beta2 > 0.0 && beta2 < 1.0, "beta2 must lie in (0,1)");
    require(epsilon > 0.0, "epsilon must be positive");
    require(decay_per_epoch > 0.0 && decay_per_epoch <= 1.0,
            "decay_per_epoch must lie in (0,1]");
  }
};

// Adaptive-moment step with optional layerwise trust scaling. `step` is
// 1-based and drives bias correction; `epoch` drives the decay schedule.
// Rejects the whole step (throws, no entry mutated) on any non-finite
// gradient.
inline void optimizer_step(ParamBank& bank, const OptimizerSpec& spec,
                           std::int64_t step, std::int64_t epoch = 0) {
  spec.validate();
  require(step >= 1, "optimizer step index must be >= 1");
  for (std::size_t e = 0; e < bank.size(); ++e) {
    if (!bank.entry(e).grad.all_finite())
      throw NumericError(
          cat("non-finite gradient in parameter '", bank.entry(e).name,
              "' at step ", std::to_string(step), "; step rejected"));
  }
  const double lr =
      spec.learning_rate * std::pow(spec.decay_per_epoch,
                                    static_cast<double>(epoch));
  const double bc1 = 1.0 - std::pow(spec.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(spec.beta2, static_cast<double>(step));
  for (std::size_t e = 0; e < bank.size(); ++e) {
    Param& p = bank.entry(e);
    std::vector<double> update(static_cast<std::size_t>(p.value.size()));
    double w_norm2 = 0.0, u_norm2 = 0.0;
    for (std::int64_t i = 0; i < p.value.size(); ++i) {
      const double g = static_cast<double>(p.grad[i]);
      const double m1 =
          spec.beta1 * static_cast<double>(p.m1[i]) + (1.0 - spec.beta1) * g;
      const double m2 = spec.beta2 * static_cast<double>(p.m2[i]) +
                        (1.0 - spec.beta2) * g * g;
      p.m1[i] = static_cast<float>(m1);
      p.m2[i] = static_cast<float>(m2);
      const double u = (m1 / bc1) / (std::sqrt(m2 / bc2) + spec.epsilon);
      update[static_cast<std::size_t>(i)] = u;
      const double w = static_cast<double>(p.value[i]);
      w_norm2 += w * w;
      u_norm2 += u * u;
    }
    double trust = 1.0;
    if (spec.layerwise_trust_ratio && w_norm2 > 0.0 && u_norm2 > 0.0)
      trust = std::sqrt(w_norm2) / std::sqrt(u_norm2);
    for (std::int64_t i = 0; i < p.value.size(); ++i)
      p.value[i] = static_cast<float>(
          static_cast<double>(p.value[i]) -
          lr * trust * update[static_cast<std::size_t>(i)]);
  }
}

}  // namespace pacnet
