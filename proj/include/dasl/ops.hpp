#pragma once

#include "dasl/tensor.hpp"

namespace dasl::ad {

// All ops take the recording tape last; pass nullptr for inference-only
// evaluation (no backward rule is recorded even if inputs require grad).

// [m x k] * [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape);

// [m x n] -> [n x m].
Tensor transpose(const Tensor& a, Tape* tape);

// Elementwise logistic; outputs in (0, 1).
Tensor sigmoid(const Tensor& x, Tape* tape);

// Elementwise hyperbolic tangent; outputs in (-1, 1).
Tensor tanh(const Tensor& x, Tape* tape);

// Per-row softmax with max-subtraction; rows sum to 1.
Tensor softmax_rows(const Tensor& x, Tape* tape);

// Column-wise concatenation [m x p],[m x q] -> [m x (p+q)].
Tensor concat_cols(const Tensor& a, const Tensor& b, Tape* tape);

// Elementwise add/sub/mul over identical shapes.
Tensor add(const Tensor& a, const Tensor& b, Tape* tape);
Tensor sub(const Tensor& a, const Tensor& b, Tape* tape);
Tensor mul(const Tensor& a, const Tensor& b, Tape* tape);

// Scalar-with-tensor forms.
Tensor scale(const Tensor& x, double c, Tape* tape);
Tensor add_const(const Tensor& x, double c, Tape* tape);
Tensor one_minus(const Tensor& x, Tape* tape);

// Broadcast a [1 x n] row over every row of x [m x n].
Tensor add_rowvec(const Tensor& x, const Tensor& row, Tape* tape);

// Sum of all entries -> [1 x 1].
Tensor sum(const Tensor& x, Tape* tape);

// Column means: [m x n] -> [1 x n].
Tensor mean_rows(const Tensor& x, Tape* tape);

// Sum of squared differences -> [1 x 1].
Tensor sum_squared_error(const Tensor& a, const Tensor& b, Tape* tape);

// Mean of -[y log p + (1-y) log(1-p)] with p clamped to [1e-7, 1 - 1e-7];
// y carries no gradient.
Tensor binary_cross_entropy(const Tensor& p, const Tensor& y, Tape* tape);

// Row lookup [len x d] out of table [rows x d]; backward scatter-adds.
Tensor gather_rows(const Tensor& table, const std::vector<int>& rows,
                   Tape* tape);

}  // namespace dasl::ad
