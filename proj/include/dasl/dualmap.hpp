#pragma once

#include <vector>

#include "dasl/data.hpp"
#include "dasl/tensor.hpp"

namespace dasl {

// Row indices into the two domains' user tables for each overlap user.
using OverlapIndex = std::vector<OverlapPair>;

// Square map X aligning overlap users' embeddings across domains. Embeddings
// are row vectors, so "X applied to w" is computed as w·Xᵀ.
class OrthogonalMap {
 public:
  OrthogonalMap() = default;
  explicit OrthogonalMap(int d);  // identity, exactly orthogonal at step 0

  ad::Tensor& X() { return x_; }
  const ad::Tensor& X() const { return x_; }
  int dim() const { return x_.rows(); }

  double orthogonality_tolerance = 1e-3;

 private:
  ad::Tensor x_;
};

// Σ over rows of ‖X·w_A − w_B‖²; W_A, W_B are [k×d] aligned by OverlapIndex.
ad::Tensor forward_loss(const OrthogonalMap& map, const ad::Tensor& w_a,
                        const ad::Tensor& w_b, ad::Tape* tape);

// The dual form: Σ ‖w_A − Xᵀ·w_B‖². Equal to forward_loss when X is orthogonal.
ad::Tensor dual_loss(const OrthogonalMap& map, const ad::Tensor& w_a,
                     const ad::Tensor& w_b, ad::Tape* tape);

// ‖XXᵀ − I‖²_F, the soft orthogonality constraint.
ad::Tensor orthogonality_penalty(const OrthogonalMap& map, ad::Tape* tape);

// ‖XXᵀ − I‖_F on raw values (no gradients).
double orthogonality_residual(const OrthogonalMap& map);

// Replaces X in place by its nearest orthogonal matrix (polar factor) via
// Newton-Schulz iteration Y <- 1.5Y - 0.5·Y·Yᵀ·Y from Y0 = X/‖X‖_F, until
// ‖YYᵀ−I‖_F <= 1e-9 or 50 iterations. Near-singular X fails to converge.
void project_to_orthogonal(OrthogonalMap& map);

struct DualUpdateConfig {
  double lambda = 1.0;  // orthogonality penalty weight
  int proj_every = 10;  // hard projection cadence, in steps
};

struct DualUpdateState {
  int steps = 0;
};

// One plain gradient step on forward_loss + dual_loss + λ·orthogonality_penalty
// applied to X, W_A and W_B (whichever carry gradients), then a hard projection
// every proj_every steps.
void dual_update_step(OrthogonalMap& map, ad::Tensor w_a, ad::Tensor w_b, double lr,
                      const DualUpdateConfig& cfg, DualUpdateState& state);

}  // namespace dasl
