#include "dasl/adam.hpp"

#include <cmath>

#include "dasl/error.hpp"

namespace dasl::ad {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  moments_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    moments_[i].m.assign(params_[i].size(), 0.0);
    moments_[i].v.assign(params_[i].size(), 0.0);
  }
}

void Adam::step() {
  bool any_grad = false;
  for (const auto& p : params_) any_grad = any_grad || p.has_grad();
  if (!any_grad) {
    throw ContractError("adam step with no populated gradients at all");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& w = params_[i].values();
    auto& m = moments_[i].m;
    auto& v = moments_[i].v;
    // Parameters a step never touched contribute zero gradient; their
    // moments keep decaying, as with one optimizer over alternating losses.
    const double* g = params_[i].has_grad() ? params_[i].grad().data() : nullptr;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g != nullptr ? g[j] : 0.0;
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace dasl::ad
