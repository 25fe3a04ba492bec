// Unit tests for the GRU sequence encoder: gate algebra at pinned parameter
// values, a straight-line re-evaluation oracle for the recurrence, and
// order/boundedness properties.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dasl/gradcheck.hpp"
#include "dasl/ops.hpp"
#include "dasl/rng.hpp"
#include "dasl/seq.hpp"

using namespace dasl;

namespace {

void zero_cell(GruCell& cell) {
  for (ad::Tensor& p : cell.parameters())
    for (double& v : p.values()) v = 0.0;
}

// Straight-line single-vector GRU step:
//   z = sigmoid(x W_z + h U_z + b_z), r = sigmoid(x W_r + h U_r + b_r),
//   h' = (1-z) h + z tanh(x W_h + (r h) U_h + b_h).
std::vector<double> manual_step(const GruCell& c, const std::vector<double>& x,
                                const std::vector<double>& h) {
  const int d_in = c.input_size();
  const int d_h = c.hidden_size();
  auto affine = [&](const ad::Tensor& w, const ad::Tensor& u, const ad::Tensor& b,
                    const std::vector<double>& h_in) {
    std::vector<double> out(static_cast<std::size_t>(d_h));
    for (int j = 0; j < d_h; ++j) {
      double acc = b.at(0, j);
      for (int i = 0; i < d_in; ++i) acc += x[static_cast<std::size_t>(i)] * w.at(i, j);
      for (int i = 0; i < d_h; ++i) acc += h_in[static_cast<std::size_t>(i)] * u.at(i, j);
      out[static_cast<std::size_t>(j)] = acc;
    }
    return out;
  };
  std::vector<double> z = affine(c.W_z, c.U_z, c.b_z, h);
  std::vector<double> r = affine(c.W_r, c.U_r, c.b_r, h);
  for (double& v : z) v = 1.0 / (1.0 + std::exp(-v));
  for (double& v : r) v = 1.0 / (1.0 + std::exp(-v));

  std::vector<double> rh(static_cast<std::size_t>(d_h));
  for (int i = 0; i < d_h; ++i)
    rh[static_cast<std::size_t>(i)] =
        r[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(i)];
  std::vector<double> cand = affine(c.W_h, c.U_h, c.b_h, rh);
  for (double& v : cand) v = std::tanh(v);

  std::vector<double> out(static_cast<std::size_t>(d_h));
  for (int i = 0; i < d_h; ++i) {
    auto k = static_cast<std::size_t>(i);
    out[k] = (1.0 - z[k]) * h[k] + z[k] * cand[k];
  }
  return out;
}

}  // namespace

TEST_CASE("zero-weight cell halves the state each step") {
  Rng rng(2);
  GruCell cell(3, 4, rng);
  zero_cell(cell);

  ad::Tensor h0 = ad::Tensor::from({1.0, -0.5, 0.25, 0.8}, 1, 4);
  ad::Tensor x = ad::Tensor::from({5, -2, 7}, 1, 3);
  HiddenState prev{h0, 0, false};
  HiddenState next = gru_step(cell, x, prev, nullptr);
  CHECK(next.t == 1);
  for (int j = 0; j < 4; ++j)
    CHECK(next.h.at(0, j) == h0.at(0, j) / 2.0);  // exact: 0.5*h + 0.5*tanh(0)

  // Over T=10 steps the state is exactly h0 / 2^10.
  ad::Tensor items = ad::Tensor::zeros(10, 3);
  HiddenState last = encode_sequence(cell, items, h0, nullptr);
  CHECK(last.t == 10);
  for (int j = 0; j < 4; ++j)
    CHECK(last.h.at(0, j) == h0.at(0, j) / 1024.0);
}

TEST_CASE("hugely negative biases saturate the update gate shut") {
  Rng rng(3);
  GruCell cell(2, 3, rng);
  for (ad::Tensor b : {cell.b_z, cell.b_r, cell.b_h})  // copies alias the cell's nodes
    for (double& v : b.values()) v = -1e9;

  ad::Tensor x = ad::Tensor::from({0.3, -0.7}, 1, 2);
  HiddenState prev{zero_state(3), 0, false};
  HiddenState next = gru_step(cell, x, prev, nullptr);
  // z -> 0 so h' -> h_prev = 0 exactly (up to sigmoid underflow).
  for (int j = 0; j < 3; ++j) CHECK(next.h.at(0, j) == doctest::Approx(0.0));
}

TEST_CASE("random cell matches straight-line step evaluation") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    Rng t = rng.fork(static_cast<std::uint64_t>(trial));
    GruCell cell(3, 4, t);
    ad::Tensor x = ad::Tensor::random_uniform(1, 3, 1.5, t);
    ad::Tensor h = ad::Tensor::random_uniform(1, 4, 0.9, t);

    HiddenState out = gru_step(cell, x, HiddenState{h, 0, false}, nullptr);
    std::vector<double> expect = manual_step(cell, x.values(), h.values());
    for (int j = 0; j < 4; ++j)
      CHECK(out.h.at(0, j) == doctest::Approx(expect[static_cast<std::size_t>(j)])
                                  .epsilon(1e-12));
  }
}

TEST_CASE("length-1 sequence equals a single step") {
  Rng rng(23);
  GruCell cell(3, 4, rng);
  ad::Tensor item = ad::Tensor::random_uniform(1, 3, 1.0, rng);
  HiddenState via_seq = encode_sequence(cell, item, nullptr);
  HiddenState via_step = gru_step(cell, item, HiddenState{zero_state(4), 0, false}, nullptr);
  for (int j = 0; j < 4; ++j)
    CHECK(via_seq.h.at(0, j) == via_step.h.at(0, j));
  CHECK(via_seq.t == 1);
  CHECK_FALSE(via_seq.cold);
}

TEST_CASE("length-5 sequence equals manual unrolling within 1e-12") {
  Rng rng(29);
  for (int trial = 0; trial < 5; ++trial) {
    Rng t = rng.fork(static_cast<std::uint64_t>(trial));
    GruCell cell(3, 4, t);
    ad::Tensor items = ad::Tensor::random_uniform(5, 3, 1.2, t);

    std::vector<double> h(4, 0.0);
    for (int step = 0; step < 5; ++step) {
      std::vector<double> x(3);
      for (int j = 0; j < 3; ++j) x[static_cast<std::size_t>(j)] = items.at(step, j);
      h = manual_step(cell, x, h);
    }

    HiddenState out = encode_sequence(cell, items, nullptr);
    CHECK(out.t == 5);
    for (int j = 0; j < 4; ++j)
      CHECK(std::fabs(out.h.at(0, j) - h[static_cast<std::size_t>(j)]) <= 1e-12);
  }
}

TEST_CASE("hidden states stay inside (-1,1) from bounded starts") {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    Rng t = rng.fork(static_cast<std::uint64_t>(trial));
    GruCell cell(2, 3, t);
    ad::Tensor h0 = ad::Tensor::random_uniform(1, 3, 1.0, t);   // h0 in [-1,1]
    ad::Tensor items = ad::Tensor::random_uniform(4, 2, 10.0, t);  // wild inputs
    HiddenState out = encode_sequence(cell, items, h0, nullptr);
    for (int j = 0; j < 3; ++j) {
      CHECK(out.h.at(0, j) > -1.0);
      CHECK(out.h.at(0, j) < 1.0);
    }
  }
}

TEST_CASE("the encoder is order sensitive on most random sequences") {
  Rng rng(37);
  int changed = 0;
  for (int trial = 0; trial < 10; ++trial) {
    Rng t = rng.fork(static_cast<std::uint64_t>(trial));
    GruCell cell(3, 4, t);
    ad::Tensor items = ad::Tensor::random_uniform(6, 3, 1.0, t);
    ad::Tensor reversed = ad::Tensor::zeros(6, 3);
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 3; ++c) reversed.at(r, c) = items.at(5 - r, c);

    HiddenState fwd = encode_sequence(cell, items, nullptr);
    HiddenState bwd = encode_sequence(cell, reversed, nullptr);
    double delta = 0.0;
    for (int j = 0; j < 4; ++j) {
      double d = fwd.h.at(0, j) - bwd.h.at(0, j);
      delta += d * d;
    }
    if (std::sqrt(delta) > 1e-9) ++changed;
  }
  CHECK(changed >= 9);
}

TEST_CASE("cold encoding returns the zero state with the flag set") {
  Rng rng(41);
  GruCell cell(3, 4, rng);
  HiddenState cold = encode_cold(cell);
  CHECK(cold.cold);
  CHECK(cold.t == 0);
  for (int j = 0; j < 4; ++j) CHECK(cold.h.at(0, j) == 0.0);
}

TEST_CASE("gradients through a length-10 unroll match finite differences") {
  Rng rng(43);
  GruCell cell(3, 4, rng);
  ad::Tensor items = ad::Tensor::random_uniform(10, 3, 1.0, rng, true);
  ad::Tensor weights = ad::Tensor::random_uniform(1, 4, 1.0, rng);

  std::vector<ad::Tensor> params = cell.parameters();
  params.push_back(items);
  double worst = check_gradients(
      [&](ad::Tape* tape) {
        HiddenState out = encode_sequence(cell, items, tape);
        return ad::sum(ad::mul(out.h, weights, tape), tape);
      },
      params);
  CHECK(worst <= 1e-4);
}
