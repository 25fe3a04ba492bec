#include "dasl/tensor.hpp"

#include <cmath>
#include <cstring>

#include "dasl/error.hpp"

namespace dasl::ad {

namespace {
// Zero-column tensors are permitted so column concatenation has an identity
// element; zero rows are not.
void check_dims(int rows, int cols) {
  if (rows <= 0 || cols < 0) {
    throw DimensionError("bad tensor dimensions [" + std::to_string(rows) +
                         " x " + std::to_string(cols) + "]");
  }
}
}  // namespace

Tensor::Tensor(int rows, int cols, bool requires_grad) {
  check_dims(rows, cols);
  n_ = std::make_shared<Node>();
  n_->rows = rows;
  n_->cols = cols;
  n_->requires_grad = requires_grad;
  n_->values.assign(static_cast<std::size_t>(rows) * cols, 0.0);
}

Tensor Tensor::from(std::vector<double> values, int rows, int cols,
                    bool requires_grad) {
  check_dims(rows, cols);
  if (values.size() != static_cast<std::size_t>(rows) * cols) {
    throw DimensionError("value count " + std::to_string(values.size()) +
                         " does not fill [" + std::to_string(rows) + " x " +
                         std::to_string(cols) + "]");
  }
  Tensor t(rows, cols, requires_grad);
  t.n_->values = std::move(values);
  return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from({v}, 1, 1, requires_grad);
}

Tensor Tensor::zeros(int rows, int cols, bool requires_grad) {
  return Tensor(rows, cols, requires_grad);
}

Tensor Tensor::ones(int rows, int cols, bool requires_grad) {
  Tensor t(rows, cols, requires_grad);
  for (auto& v : t.n_->values) v = 1.0;
  return t;
}

Tensor Tensor::identity(int n, bool requires_grad) {
  Tensor t(n, n, requires_grad);
  for (int i = 0; i < n; ++i) t.n_->values[static_cast<std::size_t>(i) * n + i] = 1.0;
  return t;
}

Tensor Tensor::random_uniform(int rows, int cols, double bound, Rng& rng,
                              bool requires_grad) {
  Tensor t(rows, cols, requires_grad);
  for (auto& v : t.n_->values) v = rng.uniform(-bound, bound);
  return t;
}

Tensor Tensor::glorot(int rows, int cols, Rng& rng, bool requires_grad) {
  double bound = std::sqrt(6.0 / (rows + cols));
  return random_uniform(rows, cols, bound, rng, requires_grad);
}

int Tensor::rows() const { return n_->rows; }
int Tensor::cols() const { return n_->cols; }
std::size_t Tensor::size() const { return n_->values.size(); }

const std::vector<double>& Tensor::values() const { return n_->values; }
std::vector<double>& Tensor::values() { return n_->values; }

double Tensor::at(int r, int c) const {
  return n_->values[static_cast<std::size_t>(r) * n_->cols + c];
}

double& Tensor::at(int r, int c) {
  return n_->values[static_cast<std::size_t>(r) * n_->cols + c];
}

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("item() requires a [1 x 1] tensor, got [" +
                        std::to_string(rows()) + " x " +
                        std::to_string(cols()) + "]");
  }
  return n_->values[0];
}

bool Tensor::requires_grad() const { return n_ && n_->requires_grad; }

std::vector<double>& Tensor::grad() const {
  if (n_->grad.size() != n_->values.size()) {
    n_->grad.assign(n_->values.size(), 0.0);
  }
  return n_->grad;
}

bool Tensor::has_grad() const {
  return n_ && n_->grad.size() == n_->values.size();
}

void Tensor::zero_grad() const {
  if (!n_->grad.empty()) std::memset(n_->grad.data(), 0, n_->grad.size() * sizeof(double));
}

void Tensor::accumulate_grad(const std::vector<double>& g) const {
  auto& dst = grad();
  if (g.size() != dst.size()) {
    throw DimensionError("gradient size " + std::to_string(g.size()) +
                         " does not match tensor size " +
                         std::to_string(dst.size()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

Tensor Tensor::detached_copy() const {
  return Tensor::from(n_->values, n_->rows, n_->cols, false);
}

bool Tensor::all_finite() const {
  for (double v : n_->values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tape::record(Tensor out, std::function<void()> backward) {
  entries_.push_back(Entry{std::move(out), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward requires a scalar loss, got [" +
                        std::to_string(loss.rows()) + " x " +
                        std::to_string(loss.cols()) + "]");
  }
  // Reset every intermediate (recorded output) gradient; leaves are never
  // outputs, so their accumulated gradients survive.
  for (auto& e : entries_) e.out.zero_grad();
  loss.grad()[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    it->backward();
  }
}

void backward(const Tensor& loss, Tape& tape) { tape.backward(loss); }

}  // namespace dasl::ad
