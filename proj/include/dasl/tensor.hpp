#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "dasl/rng.hpp"

namespace dasl::ad {

// Dense 2-D tensor of 64-bit reals, row-major. Vectors are [1 x n] rows and
// scalars are [1 x 1]. Tensor is a cheap handle; copies alias the same node.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols, bool requires_grad = false);

  static Tensor from(std::vector<double> values, int rows, int cols,
                     bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor zeros(int rows, int cols, bool requires_grad = false);
  static Tensor ones(int rows, int cols, bool requires_grad = false);
  static Tensor identity(int n, bool requires_grad = false);
  // Entries ~ uniform(-bound, bound).
  static Tensor random_uniform(int rows, int cols, double bound, Rng& rng,
                               bool requires_grad = false);
  // Glorot-style bound sqrt(6 / (fan_in + fan_out)) with fan_in = rows,
  // fan_out = cols.
  static Tensor glorot(int rows, int cols, Rng& rng, bool requires_grad = true);

  bool defined() const { return n_ != nullptr; }
  int rows() const;
  int cols() const;
  std::size_t size() const;
  bool same_node(const Tensor& other) const { return n_ == other.n_; }

  const std::vector<double>& values() const;
  std::vector<double>& values();
  double at(int r, int c) const;
  double& at(int r, int c);
  double item() const;  // requires [1 x 1]

  bool requires_grad() const;
  // Gradient buffer, sized and zeroed on first access.
  std::vector<double>& grad() const;
  bool has_grad() const;
  void zero_grad() const;
  void accumulate_grad(const std::vector<double>& g) const;

  // Detached copy of the values (no grad, fresh storage).
  Tensor detached_copy() const;

  bool all_finite() const;

 private:
  struct Node {
    int rows = 0;
    int cols = 0;
    bool requires_grad = false;
    std::vector<double> values;
    mutable std::vector<double> grad;  // empty until first needed
  };
  std::shared_ptr<Node> n_;
};

// Wengert list: ops append themselves in execution order, so reverse
// iteration is a valid topological order for the backward pass.
class Tape {
 public:
  struct Entry {
    Tensor out;
    std::function<void()> backward;
  };

  void record(Tensor out, std::function<void()> backward);
  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  // Seeds d(loss)/d(loss) = 1 and replays every recorded rule in reverse.
  // Intermediate gradients are reset first, so calling backward twice (with
  // leaf gradients reset in between) reproduces identical leaf gradients.
  // Leaf gradients accumulate across calls.
  void backward(const Tensor& loss);

 private:
  std::vector<Entry> entries_;
};

// Free-function form of the backward pass; throws ContractError unless loss
// is a scalar.
void backward(const Tensor& loss, Tape& tape);

}  // namespace dasl::ad
