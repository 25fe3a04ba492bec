#include "dasl/repr.hpp"

#include <algorithm>
#include <cmath>

#include "dasl/adam.hpp"
#include "dasl/error.hpp"
#include "dasl/log.hpp"
#include "dasl/ops.hpp"

namespace dasl {

int feature_bucket(const std::string& entity_id, int cap) {
  if (cap <= 0) throw ContractError("feature cap must be positive");
  return static_cast<int>(Rng::hash64(entity_id) % static_cast<std::uint64_t>(cap));
}

ad::Tensor one_hot_feature(const std::string& entity_id, int cap) {
  ad::Tensor x = ad::Tensor::zeros(1, cap, false);
  x.values()[static_cast<std::size_t>(feature_bucket(entity_id, cap))] = 1.0;
  return x;
}

Autoencoder::Autoencoder(int input, const std::vector<int>& hidden, int latent, Rng& rng) {
  std::vector<int> enc{input};
  enc.insert(enc.end(), hidden.begin(), hidden.end());
  enc.push_back(latent);
  std::vector<int> dec(enc.rbegin(), enc.rend());
  Rng enc_rng = rng.fork("encoder");
  Rng dec_rng = rng.fork("decoder");
  encoder_ = Mlp(enc, OutputActivation::Linear, enc_rng);
  decoder_ = Mlp(dec, OutputActivation::Linear, dec_rng);
}

ad::Tensor Autoencoder::encode(const ad::Tensor& x, ad::Tape* tape) const {
  return encoder_.forward(x, tape);
}

ad::Tensor Autoencoder::decode(const ad::Tensor& z, ad::Tape* tape) const {
  return decoder_.forward(z, tape);
}

ad::Tensor Autoencoder::reconstruction_loss(const ad::Tensor& x, ad::Tape* tape) const {
  return ad::sum_squared_error(x, decode(encode(x, tape), tape), tape);
}

std::vector<ad::Tensor> Autoencoder::parameters() const {
  std::vector<ad::Tensor> out = encoder_.parameters();
  std::vector<ad::Tensor> dec = decoder_.parameters();
  out.insert(out.end(), dec.begin(), dec.end());
  return out;
}

EmbeddingTable::EmbeddingTable(EntityKind kind, Domain domain, int rows, int dim, Rng& rng)
    : kind_(kind), domain_(domain) {
  if (rows < 1 || dim < 1) throw ContractError("embedding table needs rows >= 1, dim >= 1");
  // Per-row scaled init: a table is a stack of d-vectors looked up one at a
  // time, so the row count must not shrink the scale the way it would for a
  // dense layer's fan-in.
  weights_ = ad::Tensor::random_uniform(rows, dim, 1.0 / std::sqrt(static_cast<double>(dim)),
                                        rng, true);
}

ad::Tensor EmbeddingTable::rows(const std::vector<int>& ids, ad::Tape* tape) const {
  return ad::gather_rows(weights_, ids, tape);
}

ad::Tensor EmbeddingTable::row(int id, ad::Tape* tape) const {
  return ad::gather_rows(weights_, std::vector<int>{id}, tape);
}

namespace {

ad::Tensor build_feature_matrix(const std::vector<std::string>& ids, int cap) {
  ad::Tensor m = ad::Tensor::zeros(std::max<int>(1, static_cast<int>(ids.size())), cap, false);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    m.values()[i * static_cast<std::size_t>(cap) +
               static_cast<std::size_t>(feature_bucket(ids[i], cap))] = 1.0;
  }
  return m;
}

// Minimizes mean squared reconstruction error over the feature rows; returns
// the per-epoch loss history.
std::vector<double> pretrain(Autoencoder& ae, const ad::Tensor& features,
                             const ReprConfig& cfg, Rng& rng) {
  const int n = features.rows();
  ad::Adam opt(ae.parameters(), ad::AdamConfig{cfg.pretrain_lr, 0.9, 0.999, 1e-8});
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  std::vector<double> history;
  for (int epoch = 0; epoch <= cfg.pretrain_epochs; ++epoch) {
    // Epoch 0 records the initial loss without stepping.
    double epoch_loss = 0.0;
    rng.shuffle(order);
    for (int start = 0; start < n; start += cfg.pretrain_batch) {
      const int stop = std::min(n, start + cfg.pretrain_batch);
      std::vector<int> batch(order.begin() + start, order.begin() + stop);
      ad::Tape tape;
      ad::Tensor x = ad::gather_rows(features, batch, nullptr);
      ad::Tensor loss =
          ad::scale(ae.reconstruction_loss(x, &tape), 1.0 / (stop - start), &tape);
      epoch_loss += loss.item() * (stop - start);
      if (epoch > 0) {
        opt.zero_grad();
        tape.backward(loss);
        opt.step();
      }
    }
    history.push_back(epoch_loss / n);
  }
  return history;
}

}  // namespace

ReprState train_autoencoders(const DomainPairDataset& ds, const ReprConfig& cfg, Rng& rng) {
  if (cfg.mode != "direct" && cfg.mode != "autoencoder") {
    throw ConfigError("repr.mode must be direct or autoencoder, got " + cfg.mode);
  }
  if (!cfg.allow_empty_domain) {
    for (int d = 0; d < 2; ++d) {
      if (ds.domain_users[d] == 0 || ds.item_ids[d].empty()) {
        throw DataError(std::string("domain ") + domain_char(static_cast<Domain>(d)) +
                        " has no interactions");
      }
    }
  }

  ReprState state;
  state.autoencoder_mode = cfg.mode == "autoencoder";

  for (int d = 0; d < 2; ++d) {
    const Domain dom = static_cast<Domain>(d);
    std::vector<std::string> domain_user_ids;
    for (int u = 0; u < ds.users(); ++u) {
      if (ds.user_domain_row[d][u] >= 0) domain_user_ids.push_back(ds.user_ids[u]);
    }
    const int n_users = std::max<int>(1, static_cast<int>(domain_user_ids.size()));
    const int n_items = std::max<int>(1, ds.items(dom));

    Rng ur = rng.fork(d == 0 ? "user_table_a" : "user_table_b");
    Rng ir = rng.fork(d == 0 ? "item_table_a" : "item_table_b");
    state.user_table[d] = EmbeddingTable(EntityKind::User, dom, n_users, cfg.d, ur);
    state.item_table[d] = EmbeddingTable(EntityKind::Item, dom, n_items, cfg.d, ir);

    if (!state.autoencoder_mode) continue;

    state.user_features[d] = build_feature_matrix(domain_user_ids, cfg.feature_cap);
    state.item_features[d] = build_feature_matrix(ds.item_ids[d], cfg.feature_cap);

    Rng uae_rng = rng.fork(d == 0 ? "user_ae_a" : "user_ae_b");
    Rng iae_rng = rng.fork(d == 0 ? "item_ae_a" : "item_ae_b");
    state.user_ae[d] = Autoencoder(cfg.feature_cap, {cfg.hidden}, cfg.d, uae_rng);
    state.item_ae[d] = Autoencoder(cfg.feature_cap, {cfg.hidden}, cfg.d, iae_rng);

    Rng upre = rng.fork(d == 0 ? "pretrain_user_a" : "pretrain_user_b");
    Rng ipre = rng.fork(d == 0 ? "pretrain_item_a" : "pretrain_item_b");
    state.pretrain_loss[d] = pretrain(state.user_ae[d], state.user_features[d], cfg, upre);
    state.pretrain_loss[2 + d] = pretrain(state.item_ae[d], state.item_features[d], cfg, ipre);
    DASL_LOG_INFO("pretrained autoencoders for domain "
                  << domain_char(dom) << ": user loss " << state.pretrain_loss[d].front()
                  << " -> " << state.pretrain_loss[d].back() << ", item loss "
                  << state.pretrain_loss[2 + d].front() << " -> "
                  << state.pretrain_loss[2 + d].back());

    // Seed the tables from the encoders; the rows remain free parameters.
    ad::Tensor ue = state.user_ae[d].encode(state.user_features[d], nullptr);
    ad::Tensor ie = state.item_ae[d].encode(state.item_features[d], nullptr);
    std::copy(ue.values().begin(), ue.values().end(),
              state.user_table[d].weights().values().begin());
    std::copy(ie.values().begin(), ie.values().end(),
              state.item_table[d].weights().values().begin());
  }
  return state;
}

}  // namespace dasl
