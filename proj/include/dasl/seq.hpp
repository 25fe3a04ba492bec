#pragma once

#include <vector>

#include "dasl/rng.hpp"
#include "dasl/tensor.hpp"

namespace dasl {

// Gated recurrent cell. States and inputs are row vectors, so gates are
// computed as x·W + h·U + b with W [d_in×d_h], U [d_h×d_h], b [1×d_h];
// batched rows share the same step.
struct GruCell {
  ad::Tensor W_z, W_r, W_h;
  ad::Tensor U_z, U_r, U_h;
  ad::Tensor b_z, b_r, b_h;

  GruCell() = default;
  GruCell(int d_in, int d_h, Rng& rng);

  int input_size() const { return W_z.rows(); }
  int hidden_size() const { return W_z.cols(); }

  // Fixed registry order: W_z, W_r, W_h, U_z, U_r, U_h, b_z, b_r, b_h.
  std::vector<ad::Tensor> parameters() const;
};

struct HiddenState {
  ad::Tensor h;  // [rows × d_h]
  int t = 0;
  bool cold = false;  // no history contributed to this state
};

// Update gate z scales the NEW candidate:
//   z = σ(x·W_z + h·U_z + b_z), r = σ(x·W_r + h·U_r + b_r),
//   h' = (1−z)∘h + z∘tanh(x·W_h + (r∘h)·U_h + b_h).
HiddenState gru_step(const GruCell& cell, const ad::Tensor& x_t, const HiddenState& prev,
                     ad::Tape* tape);

ad::Tensor zero_state(int d_h);

// Folds gru_step over the rows of `items` (oldest first) from h0.
HiddenState encode_sequence(const GruCell& cell, const ad::Tensor& items,
                            const ad::Tensor& h0, ad::Tape* tape);

// Convenience: zero h0.
HiddenState encode_sequence(const GruCell& cell, const ad::Tensor& items, ad::Tape* tape);

// Empty history: the zero initial state, flagged cold.
HiddenState encode_cold(const GruCell& cell);

}  // namespace dasl
