#include "dasl/seq.hpp"

#include <string>

#include "dasl/error.hpp"
#include "dasl/ops.hpp"

namespace dasl {

GruCell::GruCell(int d_in, int d_h, Rng& rng) {
  if (d_in < 1 || d_h < 1) throw ContractError("gru dimensions must be >= 1");
  Rng r = rng.fork("gru");
  W_z = ad::Tensor::glorot(d_in, d_h, r, true);
  W_r = ad::Tensor::glorot(d_in, d_h, r, true);
  W_h = ad::Tensor::glorot(d_in, d_h, r, true);
  U_z = ad::Tensor::glorot(d_h, d_h, r, true);
  U_r = ad::Tensor::glorot(d_h, d_h, r, true);
  U_h = ad::Tensor::glorot(d_h, d_h, r, true);
  b_z = ad::Tensor::zeros(1, d_h, true);
  b_r = ad::Tensor::zeros(1, d_h, true);
  b_h = ad::Tensor::zeros(1, d_h, true);
}

std::vector<ad::Tensor> GruCell::parameters() const {
  return {W_z, W_r, W_h, U_z, U_r, U_h, b_z, b_r, b_h};
}

namespace {

ad::Tensor gate_preact(const ad::Tensor& x, const ad::Tensor& w, const ad::Tensor& h,
                       const ad::Tensor& u, const ad::Tensor& b, ad::Tape* tape) {
  return ad::add_rowvec(ad::add(ad::matmul(x, w, tape), ad::matmul(h, u, tape), tape), b,
                        tape);
}

}  // namespace

HiddenState gru_step(const GruCell& cell, const ad::Tensor& x_t, const HiddenState& prev,
                     ad::Tape* tape) {
  if (x_t.cols() != cell.input_size()) {
    throw DimensionError("gru input width " + std::to_string(x_t.cols()) + ", cell expects " +
                         std::to_string(cell.input_size()));
  }
  if (prev.h.cols() != cell.hidden_size() || prev.h.rows() != x_t.rows()) {
    throw DimensionError("gru state is " + std::to_string(prev.h.rows()) + "x" +
                         std::to_string(prev.h.cols()) + ", expected " +
                         std::to_string(x_t.rows()) + "x" +
                         std::to_string(cell.hidden_size()));
  }

  const ad::Tensor z =
      ad::sigmoid(gate_preact(x_t, cell.W_z, prev.h, cell.U_z, cell.b_z, tape), tape);
  const ad::Tensor r =
      ad::sigmoid(gate_preact(x_t, cell.W_r, prev.h, cell.U_r, cell.b_r, tape), tape);
  const ad::Tensor candidate = ad::tanh(
      ad::add_rowvec(ad::add(ad::matmul(x_t, cell.W_h, tape),
                             ad::matmul(ad::mul(r, prev.h, tape), cell.U_h, tape), tape),
                     cell.b_h, tape),
      tape);
  const ad::Tensor h = ad::add(ad::mul(ad::one_minus(z, tape), prev.h, tape),
                               ad::mul(z, candidate, tape), tape);
  return {h, prev.t + 1, false};
}

ad::Tensor zero_state(int d_h) { return ad::Tensor::zeros(1, d_h, false); }

HiddenState encode_sequence(const GruCell& cell, const ad::Tensor& items,
                            const ad::Tensor& h0, ad::Tape* tape) {
  HiddenState state{h0, 0, false};
  for (int t = 0; t < items.rows(); ++t) {
    state = gru_step(cell, ad::gather_rows(items, {t}, tape), state, tape);
  }
  return state;
}

HiddenState encode_sequence(const GruCell& cell, const ad::Tensor& items, ad::Tape* tape) {
  return encode_sequence(cell, items, zero_state(cell.hidden_size()), tape);
}

HiddenState encode_cold(const GruCell& cell) {
  return {zero_state(cell.hidden_size()), 0, true};
}

}  // namespace dasl
