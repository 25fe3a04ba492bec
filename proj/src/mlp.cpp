#include "dasl/mlp.hpp"

#include "dasl/error.hpp"

namespace dasl {

Mlp::Mlp(const std::vector<int>& layer_sizes, OutputActivation out_act, Rng& rng)
    : out_act_(out_act) {
  if (layer_sizes.size() < 2) {
    throw ContractError("mlp needs at least an input and an output size");
  }
  for (int s : layer_sizes) {
    if (s <= 0) throw ContractError("mlp layer sizes must be positive");
  }
  input_size_ = layer_sizes.front();
  output_size_ = layer_sizes.back();
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    weights_.push_back(
        ad::Tensor::glorot(layer_sizes[i], layer_sizes[i + 1], rng, true));
    biases_.push_back(ad::Tensor::zeros(1, layer_sizes[i + 1], true));
  }
}

ad::Tensor Mlp::forward(const ad::Tensor& x, ad::Tape* tape) const {
  if (x.cols() != input_size_) {
    throw DimensionError("mlp input has " + std::to_string(x.cols()) +
                         " columns, expected " + std::to_string(input_size_));
  }
  ad::Tensor h = x;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    h = ad::add_rowvec(ad::matmul(h, weights_[i], tape), biases_[i], tape);
    const bool last = (i + 1 == weights_.size());
    if (!last) {
      h = ad::tanh(h, tape);
    } else if (out_act_ == OutputActivation::Sigmoid) {
      h = ad::sigmoid(h, tape);
    }
  }
  return h;
}

std::vector<ad::Tensor> Mlp::parameters() const {
  std::vector<ad::Tensor> out;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    out.push_back(weights_[i]);
    out.push_back(biases_[i]);
  }
  return out;
}

}  // namespace dasl
