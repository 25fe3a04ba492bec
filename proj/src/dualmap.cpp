#include "dasl/dualmap.hpp"

#include <cmath>
#include <string>

#include "dasl/error.hpp"
#include "dasl/ops.hpp"

namespace dasl {

OrthogonalMap::OrthogonalMap(int d) {
  if (d < 1) throw ContractError("orthogonal map dimension must be >= 1");
  x_ = ad::Tensor::identity(d, true);
}

namespace {

void check_rows(const OrthogonalMap& map, const ad::Tensor& w_a, const ad::Tensor& w_b) {
  if (w_a.rows() != w_b.rows() || w_a.cols() != w_b.cols()) {
    throw DimensionError("overlap embedding blocks disagree: " + std::to_string(w_a.rows()) +
                         "x" + std::to_string(w_a.cols()) + " vs " +
                         std::to_string(w_b.rows()) + "x" + std::to_string(w_b.cols()));
  }
  if (w_a.cols() != map.dim()) {
    throw DimensionError("embedding dim " + std::to_string(w_a.cols()) +
                         " does not match map dim " + std::to_string(map.dim()));
  }
}

}  // namespace

ad::Tensor forward_loss(const OrthogonalMap& map, const ad::Tensor& w_a,
                        const ad::Tensor& w_b, ad::Tape* tape) {
  check_rows(map, w_a, w_b);
  // Row form of Σ‖X·w_A − w_B‖²: mapped rows are w_A·Xᵀ.
  return ad::sum_squared_error(ad::matmul(w_a, ad::transpose(map.X(), tape), tape), w_b, tape);
}

ad::Tensor dual_loss(const OrthogonalMap& map, const ad::Tensor& w_a,
                     const ad::Tensor& w_b, ad::Tape* tape) {
  check_rows(map, w_a, w_b);
  // Row form of Σ‖w_A − Xᵀ·w_B‖²: pulled-back rows are w_B·X.
  return ad::sum_squared_error(w_a, ad::matmul(w_b, map.X(), tape), tape);
}

ad::Tensor orthogonality_penalty(const OrthogonalMap& map, ad::Tape* tape) {
  const ad::Tensor gram = ad::matmul(map.X(), ad::transpose(map.X(), tape), tape);
  return ad::sum_squared_error(gram, ad::Tensor::identity(map.dim(), false), tape);
}

namespace {

// d×d products on raw values; the projection runs outside the tape.
void matmul_raw(const std::vector<double>& a, const std::vector<double>& b,
                std::vector<double>& out, int d, bool transpose_b) {
  out.assign(static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i) {
    for (int k = 0; k < d; ++k) {
      const double aik = a[static_cast<std::size_t>(i) * d + k];
      if (transpose_b) {
        // b used as bᵀ: out[i][j] += a[i][k] * b[j][k]
        for (int j = 0; j < d; ++j) {
          out[static_cast<std::size_t>(i) * d + j] += aik * b[static_cast<std::size_t>(j) * d + k];
        }
      } else {
        for (int j = 0; j < d; ++j) {
          out[static_cast<std::size_t>(i) * d + j] += aik * b[static_cast<std::size_t>(k) * d + j];
        }
      }
    }
  }
}

double gram_residual(const std::vector<double>& y, int d, std::vector<double>& scratch) {
  matmul_raw(y, y, scratch, d, /*transpose_b=*/true);
  double sq = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const double g = scratch[static_cast<std::size_t>(i) * d + j] - (i == j ? 1.0 : 0.0);
      sq += g * g;
    }
  }
  return std::sqrt(sq);
}

}  // namespace

double orthogonality_residual(const OrthogonalMap& map) {
  std::vector<double> scratch;
  return gram_residual(map.X().values(), map.dim(), scratch);
}

void project_to_orthogonal(OrthogonalMap& map) {
  const int d = map.dim();
  std::vector<double>& x = map.X().values();

  // Already within target tolerance: the nearest orthogonal matrix is X
  // itself to working precision; leave the bits untouched.
  {
    std::vector<double> scratch;
    if (gram_residual(x, d, scratch) <= 1e-9) return;
  }

  double fro = 0.0;
  for (double v : x) fro += v * v;
  fro = std::sqrt(fro);
  if (!(fro > 0.0) || !std::isfinite(fro)) {
    throw ProjectionError("map has zero or non-finite norm; re-initialize X");
  }

  // ‖X‖_F bounds the spectral norm, so Y0's singular values lie in (0, 1] and
  // Newton-Schulz converges unless X is near-singular.
  std::vector<double> y(x);
  for (double& v : y) v /= fro;

  std::vector<double> gram, yyy, scratch;
  for (int iter = 0; iter < 50; ++iter) {
    if (gram_residual(y, d, scratch) <= 1e-9) {
      x = y;
      return;
    }
    matmul_raw(y, y, gram, d, /*transpose_b=*/true);   // YYᵀ
    matmul_raw(gram, y, yyy, d, /*transpose_b=*/false);  // YYᵀY
    bool finite = true;
    for (int i = 0; i < d * d; ++i) {
      y[static_cast<std::size_t>(i)] =
          1.5 * y[static_cast<std::size_t>(i)] - 0.5 * yyy[static_cast<std::size_t>(i)];
      finite = finite && std::isfinite(y[static_cast<std::size_t>(i)]);
    }
    if (!finite) break;
  }
  throw ProjectionError(
      "orthogonal projection did not converge in 50 iterations; X is likely "
      "near-singular, re-initialize it");
}

void dual_update_step(OrthogonalMap& map, ad::Tensor w_a, ad::Tensor w_b, double lr,
                      const DualUpdateConfig& cfg, DualUpdateState& state) {
  ad::Tape tape;
  ad::Tensor loss = ad::add(forward_loss(map, w_a, w_b, &tape),
                            dual_loss(map, w_a, w_b, &tape), &tape);
  loss = ad::add(loss, ad::scale(orthogonality_penalty(map, &tape), cfg.lambda, &tape), &tape);
  tape.backward(loss);

  auto sgd = [lr](ad::Tensor& t) {
    if (!t.requires_grad() || !t.has_grad()) return;
    std::vector<double>& v = t.values();
    const std::vector<double>& g = t.grad();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
    t.zero_grad();
  };
  sgd(map.X());
  sgd(w_a);
  sgd(w_b);

  ++state.steps;
  if (cfg.proj_every > 0 && state.steps % cfg.proj_every == 0) project_to_orthogonal(map);
}

}  // namespace dasl
