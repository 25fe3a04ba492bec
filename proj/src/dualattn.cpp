#include "dasl/dualattn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dasl/error.hpp"
#include "dasl/ops.hpp"

namespace dasl {

AttentionBlock::AttentionBlock(AttentionMode mode, int d, int d_q, int d_v, Rng& rng)
    : mode_(mode) {
  if (d < 1 || d_q < 1 || d_v < 1) throw ContractError("attention dims must be >= 1");
  Rng r = rng.fork("attention");
  proj_q_target_ = ad::Tensor::glorot(d, d_q, r, true);
  const int dk = mode == AttentionMode::Dual ? 2 * d_q : d_q;
  if (mode == AttentionMode::Dual) {
    proj_q_other_ = ad::Tensor::glorot(d, d_q, r, true);
  }
  proj_k_ = ad::Tensor::glorot(d, dk, r, true);
  proj_v_ = ad::Tensor::glorot(d, d_v, r, true);
}

std::vector<ad::Tensor> AttentionBlock::parameters() const {
  std::vector<ad::Tensor> out{proj_q_target_};
  if (mode_ == AttentionMode::Dual) out.push_back(proj_q_other_);
  out.push_back(proj_k_);
  out.push_back(proj_v_);
  return out;
}

long& cross_query_evaluations() {
  static long count = 0;
  return count;
}

ContextVector dual_attention(const AttentionBlock& block, const ad::Tensor& hist_target,
                             const ad::Tensor& hist_other, ad::Tape* tape) {
  if (hist_target.rows() != hist_other.rows()) {
    throw DimensionError("history lengths disagree: " + std::to_string(hist_target.rows()) +
                         " vs " + std::to_string(hist_other.rows()));
  }

  ad::Tensor queries = ad::matmul(hist_target, block.proj_q_target(), tape);
  if (block.mode() == AttentionMode::Dual) {
    ++cross_query_evaluations();
    // Target queries first: (Q1;Q2) for the A-target block, (Q2;Q1) for B.
    queries =
        ad::concat_cols(queries, ad::matmul(hist_other, block.proj_q_other(), tape), tape);
  }
  const ad::Tensor keys = ad::matmul(hist_target, block.proj_k(), tape);
  const ad::Tensor values = ad::matmul(hist_target, block.proj_v(), tape);

  const ad::Tensor logits =
      ad::scale(ad::matmul(queries, ad::transpose(keys, tape), tape),
                1.0 / std::sqrt(static_cast<double>(block.d_k())), tape);
  // One softmax distribution per query position, averaged into a single
  // distribution over key positions.
  const ad::Tensor weights = ad::mean_rows(ad::softmax_rows(logits, tape), tape);
  return {ad::matmul(weights, values, tape), weights};
}

ContextVector empty_context(const AttentionBlock& block) {
  return {ad::Tensor::zeros(1, block.d_v(), false), ad::Tensor()};
}

PredictionHead::PredictionHead(int input, int hidden, Rng& rng) {
  Rng r = rng.fork("head");
  mlp_ = Mlp({input, hidden, 1}, OutputActivation::Sigmoid, r);
}

ad::Tensor PredictionHead::score(const ad::Tensor& features, ad::Tape* tape) const {
  return mlp_.forward(features, tape);
}

ad::Tensor aggregate_features(const ad::Tensor& user_emb, const ad::Tensor& h_target,
                              const ad::Tensor& h_other, const ad::Tensor& ctx,
                              const ad::Tensor& cand_emb, ad::Tape* tape) {
  ad::Tensor f = ad::concat_cols(user_emb, h_target, tape);
  f = ad::concat_cols(f, h_other, tape);
  f = ad::concat_cols(f, ctx, tape);
  return ad::concat_cols(f, cand_emb, tape);
}

ad::Tensor score_candidate(const ad::Tensor& user_emb, const HiddenState& state_target,
                           const HiddenState& state_other, const ContextVector& ctx,
                           const ad::Tensor& cand_emb, const PredictionHead& head,
                           ad::Tape* tape) {
  return head.score(aggregate_features(user_emb, state_target.h, state_other.h, ctx.values,
                                       cand_emb, tape),
                    tape);
}

TopN top_n(std::vector<std::pair<int, double>> scores, int n) {
  if (n < 1) throw ContractError("top_n needs n >= 1");
  std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  TopN out;
  out.truncated = n > static_cast<int>(scores.size());
  const int take = std::min<int>(n, static_cast<int>(scores.size()));
  out.items.reserve(static_cast<std::size_t>(take));
  for (int i = 0; i < take; ++i) out.items.push_back(scores[static_cast<std::size_t>(i)].first);
  return out;
}

}  // namespace dasl
