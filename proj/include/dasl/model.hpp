#pragma once

#include <array>
#include <string>
#include <vector>

#include "dasl/data.hpp"
#include "dasl/dualattn.hpp"
#include "dasl/dualmap.hpp"
#include "dasl/repr.hpp"
#include "dasl/rng.hpp"
#include "dasl/seq.hpp"

namespace dasl {

enum class AblationVariant { Dasl, De, Da, SingleDomain };

// Canonical report names: DASL, DASL-DE, DASL-DA, SingleDomain.
std::string variant_name(AblationVariant v);
// CLI flag values: dasl, de, da, single-domain.
std::string variant_flag(AblationVariant v);
AblationVariant variant_from_flag(const std::string& flag);

struct ModelConfig {
  int d = 32;
  int d_q = 16;
  int d_v = 32;
  int head_hidden = 64;
  int T = 10;  // history window
  AblationVariant variant = AblationVariant::Dasl;
  ReprConfig repr;
};

struct NamedParam {
  std::string name;
  ad::Tensor tensor;
};

// The full model: per-domain embedding tables, the orthogonal alignment map,
// per-domain GRUs, per-target attention blocks and prediction heads.
class DaslModel {
 public:
  DaslModel() = default;
  DaslModel(const DomainPairDataset& ds, const ModelConfig& cfg, Rng& rng);

  const ModelConfig& config() const { return cfg_; }
  AblationVariant variant() const { return cfg_.variant; }
  bool dual_embedding_active() const {
    return cfg_.variant == AblationVariant::Dasl || cfg_.variant == AblationVariant::Da;
  }
  bool cross_states_active() const { return cfg_.variant != AblationVariant::SingleDomain; }

  ReprState& repr() { return repr_; }
  const ReprState& repr() const { return repr_; }
  OrthogonalMap& map() { return map_; }
  const OrthogonalMap& map() const { return map_; }
  GruCell& gru(Domain d) { return gru_[domain_index(d)]; }
  const GruCell& gru(Domain d) const { return gru_[domain_index(d)]; }
  AttentionBlock& attention(Domain target) { return attn_[domain_index(target)]; }
  const AttentionBlock& attention(Domain target) const { return attn_[domain_index(target)]; }
  PredictionHead& head(Domain target) { return head_[domain_index(target)]; }
  const PredictionHead& head(Domain target) const { return head_[domain_index(target)]; }

  struct UserContext {
    ad::Tensor user_emb;
    HiddenState state_target;
    HiddenState state_other;
    ContextVector ctx;
  };

  // The per-user part of the score, shared by every candidate in a group.
  UserContext user_context(const DomainPairDataset& ds, const TrainingExample& ex,
                           ad::Tape* tape) const;

  // Probabilities [k×1] for k candidate item rows sharing ex's context.
  ad::Tensor score_group(const DomainPairDataset& ds, const TrainingExample& ex,
                         const std::vector<int>& candidates, ad::Tape* tape) const;

  // Inference score for the example's own candidate.
  double score_one(const DomainPairDataset& ds, const TrainingExample& ex) const;

  // Every parameter block in checkpoint order, with diagnostic names.
  std::vector<NamedParam> registry() const;
  std::vector<ad::Tensor> parameters() const;
  // Registry minus blocks the variant freezes (the map X when the dual
  // embedding is ablated).
  std::vector<ad::Tensor> trainable_parameters() const;

 private:
  ModelConfig cfg_;
  ReprState repr_;
  OrthogonalMap map_;
  std::array<GruCell, 2> gru_;
  std::array<AttentionBlock, 2> attn_;
  std::array<PredictionHead, 2> head_;
};

// Binary layout: magic "DASL1"; u32 header (version, variant, repr mode, d,
// d_q, d_v, head hidden, T, feature cap, block count), u32 (rows, cols) per
// block; then every block's values as little-endian doubles in registry order.
void save_checkpoint(const DaslModel& model, const std::string& path);

// Loads into an already-constructed model; any header or shape disagreement
// raises a checkpoint error.
void load_checkpoint(DaslModel& model, const std::string& path);

}  // namespace dasl
