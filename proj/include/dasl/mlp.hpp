#pragma once

#include <vector>

#include "dasl/ops.hpp"
#include "dasl/rng.hpp"
#include "dasl/tensor.hpp"

namespace dasl {

enum class OutputActivation { Linear, Sigmoid };

// Fully connected net over row vectors: x [batch x in] -> [batch x out].
// Hidden layers use tanh; the output layer is linear or sigmoid.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::vector<int>& layer_sizes, OutputActivation out_act, Rng& rng);

  ad::Tensor forward(const ad::Tensor& x, ad::Tape* tape) const;

  std::vector<ad::Tensor> parameters() const;
  int input_size() const { return input_size_; }
  int output_size() const { return output_size_; }

  // Direct access for tests that construct hand-specified nets.
  std::vector<ad::Tensor>& weights() { return weights_; }
  std::vector<ad::Tensor>& biases() { return biases_; }

 private:
  std::vector<ad::Tensor> weights_;  // [in_i x out_i]
  std::vector<ad::Tensor> biases_;   // [1 x out_i]
  int input_size_ = 0;
  int output_size_ = 0;
  OutputActivation out_act_ = OutputActivation::Linear;
};

}  // namespace dasl
