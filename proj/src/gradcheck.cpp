#include "dasl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dasl/dualattn.hpp"
#include "dasl/dualmap.hpp"
#include "dasl/error.hpp"
#include "dasl/ops.hpp"
#include "dasl/repr.hpp"
#include "dasl/rng.hpp"
#include "dasl/seq.hpp"

namespace dasl {

namespace {

double g_corruption = 0.0;

ad::Tensor random_tensor(int rows, int cols, Rng& rng, bool requires_grad = true) {
  ad::Tensor t = ad::Tensor::zeros(rows, cols, requires_grad);
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

// Contract a non-scalar output against fixed random weights so every entry of
// the output influences the loss.
ad::Tensor weighted_sum(const ad::Tensor& out, const ad::Tensor& weights, ad::Tape* tape) {
  return ad::sum(ad::mul(out, weights, tape), tape);
}

}  // namespace

void set_gradient_corruption(double offset) { g_corruption = offset; }

double check_gradients(const std::function<ad::Tensor(ad::Tape*)>& build_loss,
                       const std::vector<ad::Tensor>& params, const GradCheckOptions& opts) {
  ad::Tape tape;
  const ad::Tensor loss = build_loss(&tape);
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ContractError("gradient check needs a scalar loss");
  }
  for (const ad::Tensor& p : params) p.zero_grad();
  tape.backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const ad::Tensor& p : params) {
    std::vector<double> g = p.grad();
    for (double& v : g) v += g_corruption;
    analytic.push_back(std::move(g));
  }

  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Tensor param = params[i];  // aliasing handle; edits hit shared storage
    std::vector<double>& v = param.values();
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double saved = v[j];
      v[j] = saved + opts.h;
      const double up = build_loss(nullptr).item();
      v[j] = saved - opts.h;
      const double down = build_loss(nullptr).item();
      v[j] = saved;
      const double numeric = (up - down) / (2.0 * opts.h);
      const double a = analytic[i][j];
      const double diff = std::abs(a - numeric);
      if (diff <= opts.abs_floor) continue;
      worst = std::max(worst, diff / std::max(std::abs(a), std::abs(numeric)));
    }
  }
  return worst;
}

namespace {

struct Check {
  std::string name;
  std::function<double(Rng&, const GradCheckOptions&)> run;
};

double check_matmul(Rng& rng, const GradCheckOptions& opts) {
  ad::Tensor a = random_tensor(3, 4, rng);
  ad::Tensor b = random_tensor(4, 2, rng);
  ad::Tensor c = random_tensor(3, 2, rng, false);
  return check_gradients(
      [&](ad::Tape* t) { return weighted_sum(ad::matmul(a, b, t), c, t); }, {a, b}, opts);
}

double check_transpose(Rng& rng, const GradCheckOptions& opts) {
  ad::Tensor a = random_tensor(3, 5, rng);
  ad::Tensor c = random_tensor(5, 3, rng, false);
  return check_gradients(
      [&](ad::Tape* t) { return weighted_sum(ad::transpose(a, t), c, t); }, {a}, opts);
}

double check_unary(Rng& rng, const GradCheckOptions& opts,
                   ad::Tensor (*op)(const ad::Tensor&, ad::Tape*)) {
  ad::Tensor x = random_tensor(4, 3, rng);
  ad::Tensor c = random_tensor(4, 3, rng, false);
  return check_gradients([&](ad::Tape* t) { return weighted_sum(op(x, t), c, t); }, {x},
                         opts);
}

double check_binary(Rng& rng, const GradCheckOptions& opts,
                    ad::Tensor (*op)(const ad::Tensor&, const ad::Tensor&, ad::Tape*)) {
  ad::Tensor a = random_tensor(4, 3, rng);
  ad::Tensor b = random_tensor(4, 3, rng);
  ad::Tensor c = random_tensor(4, 3, rng, false);
  return check_gradients([&](ad::Tape* t) { return weighted_sum(op(a, b, t), c, t); },
                         {a, b}, opts);
}

double check_scale(Rng& rng, const GradCheckOptions& opts) {
  ad::Tensor x = random_tensor(3, 3, rng);
  ad::Tensor c = random_tensor(3, 3, rng, false);
  const double k = rng.uniform(-2.0, 2.0);
  return check_gradients(
      [&](ad::Tape* t) { return weighted_sum(ad::scale(x, k, t), c, t); }, {x}, opts);
}

double check_add_rowvec(Rng& rng, const GradCheckOptions& opts) {
  ad::Tensor x = random_tensor(4, 3, rng);
  ad::Tensor b = random_tensor(1, 3, rng);
  ad::Tensor c = random_tensor(4, 3, rng, false);
  return check_gradients(
      [&](ad::Tape* t) { return weighted_sum(ad::add_rowvec(x, b, t), c, t); }, {x, b},
      opts);
}

double check_concat(Rng& rng, const GradCheckOptions& opts) {
  ad::Tensor a = random_tensor(3, 2, rng);
  ad::Tensor b = random_tensor(3, 4, rng);
  ad::Tensor c = random_tensor(3, 6, rng, false);
  return check_gradients(
      [&](ad::Tape* t) { return weighted_sum(ad::concat_cols(a, b, t), c, t); }, {a, b},
      opts);
}

double check_gather(Rng& rng, const GradCheckOptions& opts) {
  ad::Tensor table = random_tensor(5, 3, rng);
  // Repeated rows exercise gradient accumulation in the scatter.
  const std::vector<int> idx{1, 3, 1, 4, 1};
  ad::Tensor c = random_tensor(5, 3, rng, false);
  return check_gradients(
      [&](ad::Tape* t) { return weighted_sum(ad::gather_rows(table, idx, t), c, t); },
      {table}, opts);
}

double check_mean_rows(Rng& rng, const GradCheckOptions& opts) {
  ad::Tensor x = random_tensor(4, 5, rng);
  ad::Tensor c = random_tensor(1, 5, rng, false);
  return check_gradients(
      [&](ad::Tape* t) { return weighted_sum(ad::mean_rows(x, t), c, t); }, {x}, opts);
}

double check_sum(Rng& rng, const GradCheckOptions& opts) {
  ad::Tensor x = random_tensor(3, 4, rng);
  return check_gradients([&](ad::Tape* t) { return ad::sum(x, t); }, {x}, opts);
}

double check_sse(Rng& rng, const GradCheckOptions& opts) {
  ad::Tensor a = random_tensor(3, 4, rng);
  ad::Tensor b = random_tensor(3, 4, rng);
  return check_gradients([&](ad::Tape* t) { return ad::sum_squared_error(a, b, t); },
                         {a, b}, opts);
}

double check_bce(Rng& rng, const GradCheckOptions& opts) {
  // Probabilities come through a sigmoid so the clamp region stays far away.
  ad::Tensor raw = random_tensor(6, 1, rng);
  ad::Tensor labels = ad::Tensor::zeros(6, 1, false);
  for (double& v : labels.values()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  return check_gradients(
      [&](ad::Tape* t) {
        return ad::binary_cross_entropy(ad::sigmoid(raw, t), labels, t);
      },
      {raw}, opts);
}

double check_autoencoder(Rng& rng, const GradCheckOptions& opts) {
  Rng net_rng = rng.fork("net");
  Autoencoder ae(4, {3}, 2, net_rng);
  ad::Tensor x = random_tensor(2, 4, rng, false);
  return check_gradients([&](ad::Tape* t) { return ae.reconstruction_loss(x, t); },
                         ae.parameters(), opts);
}

double check_dualmap(Rng& rng, const GradCheckOptions& opts) {
  OrthogonalMap map(4);
  // Random perturbation keeps X well-conditioned but non-trivial.
  for (double& v : map.X().values()) v += rng.uniform(-0.2, 0.2);
  ad::Tensor wa = random_tensor(3, 4, rng);
  ad::Tensor wb = random_tensor(3, 4, rng);
  std::vector<ad::Tensor> params{map.X(), wa, wb};
  return check_gradients(
      [&](ad::Tape* t) {
        ad::Tensor loss = ad::add(forward_loss(map, wa, wb, t), dual_loss(map, wa, wb, t), t);
        return ad::add(loss, orthogonality_penalty(map, t), t);
      },
      params, opts);
}

double check_gru_unroll(Rng& rng, const GradCheckOptions& opts) {
  Rng cell_rng = rng.fork("cell");
  GruCell cell(3, 4, cell_rng);
  ad::Tensor items = random_tensor(10, 3, rng);
  ad::Tensor c = random_tensor(1, 4, rng, false);
  std::vector<ad::Tensor> params = cell.parameters();
  params.push_back(items);
  return check_gradients(
      [&](ad::Tape* t) { return weighted_sum(encode_sequence(cell, items, t).h, c, t); },
      params, opts);
}

double check_attention(Rng& rng, const GradCheckOptions& opts) {
  Rng block_rng = rng.fork("block");
  AttentionBlock block(AttentionMode::Dual, 4, 2, 3, block_rng);
  ad::Tensor hist_t = random_tensor(3, 4, rng);
  ad::Tensor hist_o = random_tensor(3, 4, rng);
  ad::Tensor c = random_tensor(1, 3, rng, false);
  std::vector<ad::Tensor> params = block.parameters();
  params.push_back(hist_t);
  params.push_back(hist_o);
  return check_gradients(
      [&](ad::Tape* t) {
        return weighted_sum(dual_attention(block, hist_t, hist_o, t).values, c, t);
      },
      params, opts);
}

double check_head(Rng& rng, const GradCheckOptions& opts) {
  Rng head_rng = rng.fork("head");
  PredictionHead head(7, 5, head_rng);
  ad::Tensor user = random_tensor(1, 2, rng);
  ad::Tensor h_t = random_tensor(1, 1, rng);
  ad::Tensor h_o = random_tensor(1, 1, rng);
  ad::Tensor ctx = random_tensor(1, 2, rng);
  ad::Tensor cand = random_tensor(1, 1, rng);
  std::vector<ad::Tensor> params = head.parameters();
  params.insert(params.end(), {user, h_t, h_o, ctx, cand});
  return check_gradients(
      [&](ad::Tape* t) {
        return head.score(aggregate_features(user, h_t, h_o, ctx, cand, t), t);
      },
      params, opts);
}

const std::vector<Check>& check_registry() {
  static const std::vector<Check> checks = {
      {"autodiff.matmul", check_matmul},
      {"autodiff.transpose", check_transpose},
      {"autodiff.sigmoid",
       [](Rng& r, const GradCheckOptions& o) { return check_unary(r, o, ad::sigmoid); }},
      {"autodiff.tanh",
       [](Rng& r, const GradCheckOptions& o) { return check_unary(r, o, ad::tanh); }},
      {"autodiff.softmax",
       [](Rng& r, const GradCheckOptions& o) { return check_unary(r, o, ad::softmax_rows); }},
      {"autodiff.one_minus",
       [](Rng& r, const GradCheckOptions& o) { return check_unary(r, o, ad::one_minus); }},
      {"autodiff.add",
       [](Rng& r, const GradCheckOptions& o) { return check_binary(r, o, ad::add); }},
      {"autodiff.sub",
       [](Rng& r, const GradCheckOptions& o) { return check_binary(r, o, ad::sub); }},
      {"autodiff.mul",
       [](Rng& r, const GradCheckOptions& o) { return check_binary(r, o, ad::mul); }},
      {"autodiff.scale", check_scale},
      {"autodiff.add_rowvec", check_add_rowvec},
      {"autodiff.concat_cols", check_concat},
      {"autodiff.gather_rows", check_gather},
      {"autodiff.mean_rows", check_mean_rows},
      {"autodiff.sum", check_sum},
      {"autodiff.sum_squared_error", check_sse},
      {"autodiff.binary_cross_entropy", check_bce},
      {"repr.autoencoder", check_autoencoder},
      {"dualmap.losses", check_dualmap},
      {"seq.gru_unroll", check_gru_unroll},
      {"dualattn.attention", check_attention},
      {"dualattn.head", check_head},
  };
  return checks;
}

}  // namespace

std::vector<GradCheckResult> run_all_gradchecks(std::uint64_t seed,
                                                const GradCheckOptions& opts) {
  std::vector<GradCheckResult> out;
  Rng root(seed);
  for (const Check& check : check_registry()) {
    GradCheckResult result;
    result.name = check.name;
    Rng check_rng = root.fork(check.name);
    for (int i = 0; i < opts.instances; ++i) {
      Rng instance_rng = check_rng.fork(static_cast<std::uint64_t>(i));
      result.worst_rel_error =
          std::max(result.worst_rel_error, check.run(instance_rng, opts));
    }
    result.passed = result.worst_rel_error <= opts.rel_tol;
    out.push_back(std::move(result));
  }
  return out;
}

}  // namespace dasl
