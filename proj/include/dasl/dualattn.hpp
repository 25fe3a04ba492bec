#pragma once

#include <utility>
#include <vector>

#include "dasl/data.hpp"
#include "dasl/mlp.hpp"
#include "dasl/rng.hpp"
#include "dasl/seq.hpp"
#include "dasl/tensor.hpp"

namespace dasl {

enum class AttentionMode { Dual, Single };

// Scaled dot-product attention over one target domain's history. In dual mode
// every query position concatenates both domains' query projections, so the
// other domain modulates every weight; single mode uses the target's queries
// alone (ablation path).
class AttentionBlock {
 public:
  AttentionBlock() = default;
  AttentionBlock(AttentionMode mode, int d, int d_q, int d_v, Rng& rng);

  AttentionMode mode() const { return mode_; }
  int d_k() const { return proj_k_.cols(); }
  int d_v() const { return proj_v_.cols(); }
  int d_q() const { return proj_q_target_.cols(); }

  const ad::Tensor& proj_q_target() const { return proj_q_target_; }
  const ad::Tensor& proj_q_other() const { return proj_q_other_; }
  const ad::Tensor& proj_k() const { return proj_k_; }
  const ad::Tensor& proj_v() const { return proj_v_; }
  ad::Tensor& proj_k() { return proj_k_; }

  // Registry order: proj_q_target, [proj_q_other if dual], proj_k, proj_v.
  std::vector<ad::Tensor> parameters() const;

 private:
  AttentionMode mode_ = AttentionMode::Dual;
  ad::Tensor proj_q_target_;  // target domain's query map [d × d_q]
  ad::Tensor proj_q_other_;   // other domain's query map; dual mode only
  ad::Tensor proj_k_;         // [d × d_k], d_k = 2·d_q dual, d_q single
  ad::Tensor proj_v_;         // [d × d_v]
};

struct ContextVector {
  ad::Tensor values;             // [1 × d_v]
  ad::Tensor attention_weights;  // [1 × T], non-negative, sums to 1
};

// Counts evaluations of the cross-domain query path; tests assert ablations
// never touch it. Single-threaded by the trainer's contract.
long& cross_query_evaluations();

// hist_target and hist_other are [T × d] with equal T >= 1. Keys and values
// come from the target history only. The [T×T] softmax weight matrix is
// averaged over the query axis into one distribution over key positions.
ContextVector dual_attention(const AttentionBlock& block, const ad::Tensor& hist_target,
                             const ad::Tensor& hist_other, ad::Tape* tape);

// Zero context for users with no usable history.
ContextVector empty_context(const AttentionBlock& block);

// Sigmoid-output scorer over the concatenated information sources.
class PredictionHead {
 public:
  PredictionHead() = default;
  PredictionHead(int input, int hidden, Rng& rng);

  // Rows of the inputs are scored independently (batched candidates).
  ad::Tensor score(const ad::Tensor& features, ad::Tape* tape) const;

  std::vector<ad::Tensor> parameters() const { return mlp_.parameters(); }
  int input_size() const { return mlp_.input_size(); }
  Mlp& mlp() { return mlp_; }

 private:
  Mlp mlp_;
};

// Feature-axis concatenation feeding the head: user embedding, target-domain
// state, other-domain state, attention context, candidate embedding.
ad::Tensor aggregate_features(const ad::Tensor& user_emb, const ad::Tensor& h_target,
                              const ad::Tensor& h_other, const ad::Tensor& ctx,
                              const ad::Tensor& cand_emb, ad::Tape* tape);

ad::Tensor score_candidate(const ad::Tensor& user_emb, const HiddenState& state_target,
                           const HiddenState& state_other, const ContextVector& ctx,
                           const ad::Tensor& cand_emb, const PredictionHead& head,
                           ad::Tape* tape);

struct TopN {
  std::vector<int> items;
  bool truncated = false;  // n exceeded the candidate count
};

// Highest n scores, descending; ties broken by ascending item id.
TopN top_n(std::vector<std::pair<int, double>> scores, int n);

}  // namespace dasl
