#pragma once

#include <array>
#include <string>
#include <vector>

#include "dasl/data.hpp"
#include "dasl/mlp.hpp"
#include "dasl/rng.hpp"
#include "dasl/tensor.hpp"

namespace dasl {

enum class EntityKind { User, Item };

struct FeatureVector {
  EntityKind kind = EntityKind::User;
  Domain domain = Domain::A;
  std::vector<double> values;
};

// Interaction logs carry no explicit features, so entities get hashed one-hot
// vectors: a single 1 at bucket FNV(id) % cap. Colliding entities share a
// feature vector, which merely ties their latents.
int feature_bucket(const std::string& entity_id, int cap);
ad::Tensor one_hot_feature(const std::string& entity_id, int cap);

// Encoder [input, hidden..., latent] with a mirrored decoder; tanh hidden
// layers, linear outputs on both halves.
class Autoencoder {
 public:
  Autoencoder() = default;
  Autoencoder(int input, const std::vector<int>& hidden, int latent, Rng& rng);

  ad::Tensor encode(const ad::Tensor& x, ad::Tape* tape) const;
  ad::Tensor decode(const ad::Tensor& z, ad::Tape* tape) const;
  // Summed squared reconstruction error over the batch rows.
  ad::Tensor reconstruction_loss(const ad::Tensor& x, ad::Tape* tape) const;

  std::vector<ad::Tensor> parameters() const;
  int input_size() const { return encoder_.input_size(); }
  int latent_size() const { return encoder_.output_size(); }
  Mlp& encoder() { return encoder_; }
  Mlp& decoder() { return decoder_; }

 private:
  Mlp encoder_;
  Mlp decoder_;
};

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(EntityKind kind, Domain domain, int rows, int dim, Rng& rng);

  ad::Tensor rows(const std::vector<int>& ids, ad::Tape* tape) const;
  ad::Tensor row(int id, ad::Tape* tape) const;

  const ad::Tensor& weights() const { return weights_; }
  ad::Tensor& weights() { return weights_; }
  int size() const { return weights_.rows(); }
  int dim() const { return weights_.cols(); }
  EntityKind kind() const { return kind_; }
  Domain domain() const { return domain_; }

 private:
  EntityKind kind_ = EntityKind::User;
  Domain domain_ = Domain::A;
  ad::Tensor weights_;
};

struct ReprConfig {
  std::string mode = "direct";  // "direct" or "autoencoder"
  int d = 32;
  int hidden = 64;
  int feature_cap = 512;
  int pretrain_epochs = 20;
  int pretrain_batch = 64;
  double pretrain_lr = 1e-3;
  // SingleDomain runs may legitimately see an empty domain.
  bool allow_empty_domain = false;
};

struct ReprState {
  bool autoencoder_mode = false;
  std::array<EmbeddingTable, 2> user_table;  // indexed by domain
  std::array<EmbeddingTable, 2> item_table;
  std::array<Autoencoder, 2> user_ae;
  std::array<Autoencoder, 2> item_ae;
  // Hashed one-hot inputs per entity, one row each; empty in direct mode.
  std::array<ad::Tensor, 2> user_features;
  std::array<ad::Tensor, 2> item_features;
  // Mean reconstruction loss per pretraining epoch, per table
  // (user-A, user-B, item-A, item-B); empty in direct mode.
  std::array<std::vector<double>, 4> pretrain_loss;
};

// Builds the four embedding tables; in autoencoder mode, first pretrains the
// four autoencoders on hashed one-hots and seeds the tables from the encoder
// outputs. The four autoencoders share no parameters.
ReprState train_autoencoders(const DomainPairDataset& ds, const ReprConfig& cfg, Rng& rng);

}  // namespace dasl
