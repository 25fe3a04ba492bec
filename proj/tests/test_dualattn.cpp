// Unit tests for dual attention and the prediction head: weight simplex
// properties, a straight-line oracle for the full attention computation,
// cross-domain sensitivity, scale/entropy behavior, and top-n selection.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dasl/dualattn.hpp"
#include "dasl/gradcheck.hpp"
#include "dasl/rng.hpp"

using namespace dasl;

namespace {

void fill_tensor(const ad::Tensor& t, double v) {
  ad::Tensor alias = t;
  for (double& e : alias.values()) e = v;
}

// Straight-line dual attention for one target: feature-axis concatenated
// queries (target first), keys/values from the target history, softmax over
// scaled dot products, weights averaged over the query axis.
struct ManualAttention {
  std::vector<double> weights;  // over key positions
  std::vector<double> context;  // length d_v
};

ManualAttention manual_dual_attention(const AttentionBlock& block,
                                      const ad::Tensor& hist_target,
                                      const ad::Tensor& hist_other) {
  const int T = hist_target.rows();
  const int d = hist_target.cols();
  const int dq = block.d_q();
  const int dk = block.d_k();
  const int dv = block.d_v();

  auto project = [&](const ad::Tensor& h, const ad::Tensor& p, int out_dim, int row) {
    std::vector<double> out(static_cast<std::size_t>(out_dim), 0.0);
    for (int j = 0; j < out_dim; ++j)
      for (int i = 0; i < d; ++i) out[static_cast<std::size_t>(j)] += h.at(row, i) * p.at(i, j);
    return out;
  };

  // Queries: [T x d_k], target projection then (dual mode) other projection.
  std::vector<std::vector<double>> q(static_cast<std::size_t>(T));
  for (int r = 0; r < T; ++r) {
    std::vector<double> qt = project(hist_target, block.proj_q_target(), dq, r);
    if (block.mode() == AttentionMode::Dual) {
      std::vector<double> qo = project(hist_other, block.proj_q_other(), dq, r);
      qt.insert(qt.end(), qo.begin(), qo.end());
    }
    REQUIRE(static_cast<int>(qt.size()) == dk);
    q[static_cast<std::size_t>(r)] = std::move(qt);
  }

  // Keys and values from the target history.
  std::vector<std::vector<double>> k(static_cast<std::size_t>(T)), v(static_cast<std::size_t>(T));
  for (int r = 0; r < T; ++r) {
    k[static_cast<std::size_t>(r)] = project(hist_target, block.proj_k(), dk, r);
    v[static_cast<std::size_t>(r)] = project(hist_target, block.proj_v(), dv, r);
  }

  // Row-wise softmax of QK^T / sqrt(d_k), then mean over the query axis.
  ManualAttention out;
  out.weights.assign(static_cast<std::size_t>(T), 0.0);
  for (int qi = 0; qi < T; ++qi) {
    std::vector<double> logits(static_cast<std::size_t>(T), 0.0);
    for (int ki = 0; ki < T; ++ki) {
      double dot = 0.0;
      for (int j = 0; j < dk; ++j)
        dot += q[static_cast<std::size_t>(qi)][static_cast<std::size_t>(j)] *
               k[static_cast<std::size_t>(ki)][static_cast<std::size_t>(j)];
      logits[static_cast<std::size_t>(ki)] = dot / std::sqrt(static_cast<double>(dk));
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double& l : logits) {
      l = std::exp(l - mx);
      denom += l;
    }
    for (int ki = 0; ki < T; ++ki)
      out.weights[static_cast<std::size_t>(ki)] +=
          logits[static_cast<std::size_t>(ki)] / denom / T;
  }

  out.context.assign(static_cast<std::size_t>(dv), 0.0);
  for (int ki = 0; ki < T; ++ki)
    for (int j = 0; j < dv; ++j)
      out.context[static_cast<std::size_t>(j)] +=
          out.weights[static_cast<std::size_t>(ki)] * v[static_cast<std::size_t>(ki)][static_cast<std::size_t>(j)];
  return out;
}

double weight_entropy(const ad::Tensor& w) {
  double h = 0.0;
  for (double p : w.values())
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

}  // namespace

TEST_CASE("T=1 history gets weight exactly 1.0") {
  Rng rng(3);
  AttentionBlock block(AttentionMode::Dual, 4, 2, 3, rng);
  ad::Tensor ht = ad::Tensor::random_uniform(1, 4, 1.0, rng);
  ad::Tensor ho = ad::Tensor::random_uniform(1, 4, 1.0, rng);
  ContextVector ctx = dual_attention(block, ht, ho, nullptr);
  REQUIRE(ctx.attention_weights.cols() == 1);
  CHECK(ctx.attention_weights.at(0, 0) == 1.0);
}

TEST_CASE("all-zero projections give uniform weights and zero context") {
  Rng rng(5);
  AttentionBlock block(AttentionMode::Dual, 4, 2, 3, rng);
  for (const ad::Tensor& p : block.parameters()) fill_tensor(p, 0.0);

  ad::Tensor ht = ad::Tensor::random_uniform(5, 4, 2.0, rng);
  ad::Tensor ho = ad::Tensor::random_uniform(5, 4, 2.0, rng);
  ContextVector ctx = dual_attention(block, ht, ho, nullptr);
  for (int j = 0; j < 5; ++j)
    CHECK(ctx.attention_weights.at(0, j) == doctest::Approx(0.2).epsilon(1e-12));
  for (int j = 0; j < 3; ++j)
    CHECK(ctx.values.at(0, j) == doctest::Approx(0.0));
}

TEST_CASE("T=3 dual attention matches the straight-line oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Rng t = rng.fork(static_cast<std::uint64_t>(trial));
    AttentionBlock block(AttentionMode::Dual, 4, 2, 3, t);
    ad::Tensor ht = ad::Tensor::random_uniform(3, 4, 1.0, t);
    ad::Tensor ho = ad::Tensor::random_uniform(3, 4, 1.0, t);

    ContextVector got = dual_attention(block, ht, ho, nullptr);
    ManualAttention expect = manual_dual_attention(block, ht, ho);
    for (int j = 0; j < 3; ++j) {
      CHECK(got.attention_weights.at(0, j) ==
            doctest::Approx(expect.weights[static_cast<std::size_t>(j)]).epsilon(1e-10));
      CHECK(got.values.at(0, j) ==
            doctest::Approx(expect.context[static_cast<std::size_t>(j)]).epsilon(1e-10));
    }
  }
}

TEST_CASE("single mode matches the oracle with target-only queries") {
  Rng rng(13);
  AttentionBlock block(AttentionMode::Single, 4, 2, 3, rng);
  CHECK(block.d_k() == 2);  // not doubled in single mode
  ad::Tensor ht = ad::Tensor::random_uniform(4, 4, 1.0, rng);
  ad::Tensor ho = ad::Tensor::random_uniform(4, 4, 1.0, rng);

  ContextVector got = dual_attention(block, ht, ho, nullptr);
  ManualAttention expect = manual_dual_attention(block, ht, ho);
  for (int j = 0; j < 4; ++j)
    CHECK(got.attention_weights.at(0, j) ==
          doctest::Approx(expect.weights[static_cast<std::size_t>(j)]).epsilon(1e-10));
}

TEST_CASE("weights form a probability simplex for arbitrary inputs") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    Rng t = rng.fork(static_cast<std::uint64_t>(trial));
    AttentionBlock block(AttentionMode::Dual, 4, 2, 3, t);
    int T = 1 + t.uniform_int(8);
    ad::Tensor ht = ad::Tensor::random_uniform(T, 4, 10.0, t);
    ad::Tensor ho = ad::Tensor::random_uniform(T, 4, 10.0, t);
    ContextVector ctx = dual_attention(block, ht, ho, nullptr);
    double total = 0.0;
    for (int j = 0; j < T; ++j) {
      double w = ctx.attention_weights.at(0, j);
      CHECK(w >= 0.0);
      total += w;
    }
    CHECK(std::fabs(total - 1.0) <= 1e-9);
  }
}

TEST_CASE("scaling the key projection sharpens weights monotonically") {
  Rng rng(19);
  int monotone = 0;
  const int trials = 10;
  for (int trial = 0; trial < trials; ++trial) {
    Rng t = rng.fork(static_cast<std::uint64_t>(trial));
    AttentionBlock block(AttentionMode::Dual, 4, 2, 3, t);
    ad::Tensor ht = ad::Tensor::random_uniform(5, 4, 1.0, t);
    ad::Tensor ho = ad::Tensor::random_uniform(5, 4, 1.0, t);

    std::vector<double> base = block.proj_k().values();
    double prev_entropy = 0.0;
    bool ok = true;
    bool first = true;
    for (double c : {1.0, 2.0, 4.0, 8.0}) {
      for (std::size_t k = 0; k < base.size(); ++k)
        block.proj_k().values()[k] = base[k] * c;
      ContextVector ctx = dual_attention(block, ht, ho, nullptr);
      double h = weight_entropy(ctx.attention_weights);
      if (!first && h > prev_entropy + 1e-12) ok = false;
      prev_entropy = h;
      first = false;
    }
    block.proj_k().values() = base;
    if (ok) ++monotone;
  }
  CHECK(monotone >= 9);
}

TEST_CASE("perturbing the other domain's history moves target weights") {
  Rng rng(23);
  int moved = 0;
  for (int trial = 0; trial < 10; ++trial) {
    Rng t = rng.fork(static_cast<std::uint64_t>(trial));
    AttentionBlock block(AttentionMode::Dual, 4, 2, 3, t);
    ad::Tensor ht = ad::Tensor::random_uniform(5, 4, 1.0, t);
    ad::Tensor ho = ad::Tensor::random_uniform(5, 4, 1.0, t);
    ContextVector before = dual_attention(block, ht, ho, nullptr);

    ad::Tensor ho2 = ho.detached_copy();
    ho2.at(2, 1) += 0.5;
    ContextVector after = dual_attention(block, ht, ho2, nullptr);

    double delta = 0.0;
    for (int j = 0; j < 5; ++j) {
      double d = before.attention_weights.at(0, j) - after.attention_weights.at(0, j);
      delta += d * d;
    }
    if (std::sqrt(delta) > 1e-9) ++moved;
  }
  CHECK(moved >= 9);
}

TEST_CASE("single mode ignores the other domain and skips the cross path") {
  Rng rng(29);
  AttentionBlock block(AttentionMode::Single, 4, 2, 3, rng);
  ad::Tensor ht = ad::Tensor::random_uniform(5, 4, 1.0, rng);
  ad::Tensor ho = ad::Tensor::random_uniform(5, 4, 1.0, rng);

  long before = cross_query_evaluations();
  ContextVector w1 = dual_attention(block, ht, ho, nullptr);
  ad::Tensor ho2 = ho.detached_copy();
  ho2.at(0, 0) += 10.0;
  ContextVector w2 = dual_attention(block, ht, ho2, nullptr);
  CHECK(cross_query_evaluations() == before);
  for (int j = 0; j < 5; ++j)
    CHECK(w1.attention_weights.at(0, j) == w2.attention_weights.at(0, j));

  // The dual path does bump the counter.
  AttentionBlock dual(AttentionMode::Dual, 4, 2, 3, rng);
  dual_attention(dual, ht, ho, nullptr);
  CHECK(cross_query_evaluations() == before + 1);
}

TEST_CASE("empty context is zero-valued with empty weights") {
  Rng rng(31);
  AttentionBlock block(AttentionMode::Dual, 4, 2, 3, rng);
  ContextVector ctx = empty_context(block);
  CHECK(ctx.values.cols() == 3);
  for (double v : ctx.values.values()) CHECK(v == 0.0);
}

TEST_CASE("zero-weight head scores exactly 0.5") {
  Rng rng(37);
  PredictionHead head(6, 4, rng);
  for (const ad::Tensor& p : head.parameters()) fill_tensor(p, 0.0);
  ad::Tensor features = ad::Tensor::random_uniform(3, 6, 2.0, rng);
  ad::Tensor s = head.score(features, nullptr);
  REQUIRE(s.rows() == 3);
  for (int r = 0; r < 3; ++r) CHECK(s.at(r, 0) == 0.5);
}

TEST_CASE("head matches straight-line MLP evaluation and stays in (0,1)") {
  Rng rng(41);
  PredictionHead head(5, 4, rng);
  ad::Tensor x = ad::Tensor::random_uniform(1, 5, 1.0, rng);

  // Straight line: tanh hidden, sigmoid output.
  const ad::Tensor& w0 = head.mlp().weights()[0];
  const ad::Tensor& b0 = head.mlp().biases()[0];
  const ad::Tensor& w1 = head.mlp().weights()[1];
  const ad::Tensor& b1 = head.mlp().biases()[1];
  std::vector<double> hidden(static_cast<std::size_t>(w0.cols()), 0.0);
  for (int j = 0; j < w0.cols(); ++j) {
    double acc = b0.at(0, j);
    for (int i = 0; i < 5; ++i) acc += x.at(0, i) * w0.at(i, j);
    hidden[static_cast<std::size_t>(j)] = std::tanh(acc);
  }
  double logit = b1.at(0, 0);
  for (int i = 0; i < w1.rows(); ++i) logit += hidden[static_cast<std::size_t>(i)] * w1.at(i, 0);
  double expect = 1.0 / (1.0 + std::exp(-logit));

  double got = head.score(x, nullptr).item();
  CHECK(got == doctest::Approx(expect).epsilon(1e-12));
  CHECK(got > 0.0);
  CHECK(got < 1.0);

  // Raising the output bias strictly raises the score.
  ad::Tensor bias = head.mlp().biases()[1];
  bias.at(0, 0) += 1.0;
  CHECK(head.score(x, nullptr).item() > got);
}

TEST_CASE("aggregate_features concatenates in the documented order") {
  ad::Tensor u = ad::Tensor::from({1, 2}, 1, 2);
  ad::Tensor hta = ad::Tensor::from({3}, 1, 1);
  ad::Tensor hob = ad::Tensor::from({4}, 1, 1);
  ad::Tensor ctx = ad::Tensor::from({5, 6}, 1, 2);
  ad::Tensor cand = ad::Tensor::from({7}, 1, 1);
  ad::Tensor all = aggregate_features(u, hta, hob, ctx, cand, nullptr);
  CHECK(all.values() == std::vector<double>{1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("score_candidate gradients match finite differences") {
  Rng rng(43);
  const int d = 3, dv = 2;
  PredictionHead head(4 * d + dv, 4, rng);  // u(d)+ht(d)+ho(d)+ctx(dv)+cand(d)
  REQUIRE(head.input_size() == 4 * d + dv);

  ad::Tensor u = ad::Tensor::random_uniform(1, d, 1.0, rng, true);
  HiddenState ht{ad::Tensor::random_uniform(1, d, 0.9, rng, true), 3, false};
  HiddenState ho{ad::Tensor::random_uniform(1, d, 0.9, rng, true), 2, false};
  ContextVector ctx{ad::Tensor::random_uniform(1, dv, 1.0, rng, true),
                    ad::Tensor::from({1.0}, 1, 1)};
  ad::Tensor cand = ad::Tensor::random_uniform(1, d, 1.0, rng, true);

  std::vector<ad::Tensor> params = head.parameters();
  params.push_back(u);
  params.push_back(ht.h);
  params.push_back(ho.h);
  params.push_back(ctx.values);
  params.push_back(cand);
  double worst = check_gradients(
      [&](ad::Tape* tape) {
        return ad::sum(score_candidate(u, ht, ho, ctx, cand, head, tape), tape);
      },
      params);
  CHECK(worst <= 1e-4);
}

TEST_CASE("top_n pinned examples and tie handling") {
  TopN best = top_n({{7, 0.9}, {3, 0.2}}, 1);
  CHECK(best.items == std::vector<int>{7});
  CHECK_FALSE(best.truncated);

  // All-equal scores: ties break toward ascending item ids.
  TopN ties = top_n({{9, 0.5}, {2, 0.5}, {5, 0.5}, {1, 0.5}}, 3);
  CHECK(ties.items == std::vector<int>{1, 2, 5});

  // n beyond the list: full sorted list plus the flag.
  TopN all = top_n({{4, 0.1}, {8, 0.7}}, 5);
  CHECK(all.items == std::vector<int>{8, 4});
  CHECK(all.truncated);
}

TEST_CASE("top_n matches a full-sort oracle on 100 random scores") {
  Rng rng(47);
  std::vector<std::pair<int, double>> scored;
  for (int id = 0; id < 100; ++id)
    scored.emplace_back(id, rng.uniform(0.0, 1.0));

  std::vector<std::pair<int, double>> sorted = scored;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  TopN got = top_n(scored, 10);
  REQUIRE(got.items.size() == 10);
  for (int i = 0; i < 10; ++i)
    CHECK(got.items[static_cast<std::size_t>(i)] == sorted[static_cast<std::size_t>(i)].first);
}
