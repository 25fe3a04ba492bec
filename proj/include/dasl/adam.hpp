#pragma once

#include <vector>

#include "dasl/tensor.hpp"

namespace dasl::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second-moment update with bias correction. Moment buffers persist
// per parameter across steps.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg = {});

  // Applies one update from the current gradients. Parameters without a
  // populated gradient buffer are treated as having zero gradient; if no
  // parameter has one at all, the step is a bug and throws ContractError.
  void step();

  void zero_grad();

  long steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  std::vector<Tensor> params_;
  std::vector<Moments> moments_;
  AdamConfig cfg_;
  long t_ = 0;
};

}  // namespace dasl::ad
