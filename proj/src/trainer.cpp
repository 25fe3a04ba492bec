#include "dasl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "dasl/adam.hpp"
#include "dasl/error.hpp"
#include "dasl/eval.hpp"
#include "dasl/log.hpp"
#include "dasl/ops.hpp"

namespace dasl {

bool convergence_check(const TrainState& state, const TrainConfig& cfg) {
  const int needed = std::max(cfg.min_epochs, cfg.plateau_window + 1);
  if (state.epochs < needed) return false;
  bool any_domain = false;
  for (int d = 0; d < 2; ++d) {
    const std::vector<double>& h = state.val_auc[d];
    if (static_cast<int>(h.size()) < cfg.plateau_window + 1) continue;
    any_domain = true;
    const double now = h.back();
    const double then = h[h.size() - 1 - static_cast<std::size_t>(cfg.plateau_window)];
    if (!(std::abs(now - then) < cfg.plateau_tol)) return false;
  }
  return any_domain;
}

namespace {

std::string parameter_norm_snapshot(const DaslModel& model) {
  std::string out = "parameter norms:";
  for (const NamedParam& p : model.registry()) {
    double sq = 0.0;
    for (double v : p.tensor.values()) sq += v * v;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", std::sqrt(sq));
    out += " " + p.name + "=" + buf;
  }
  return out;
}

struct BatchResult {
  double loss = 0.0;
  double bce = 0.0;
};

// One optimizer step over a batch of positive examples, each grouped with its
// freshly drawn negatives.
BatchResult run_batch(DaslModel& model, const DomainPairDataset& ds,
                      const std::vector<TrainingExample>& examples,
                      const std::vector<int>& batch_ids, const TrainConfig& cfg,
                      ad::Adam& opt, Rng& epoch_neg_rng, long step, int epoch) {
  ad::Tape tape;
  std::vector<ad::Tensor> group_bces;
  std::vector<int> users;
  std::vector<int> batch_items;
  std::vector<int> batch_user_rows;
  const Domain target = examples[static_cast<std::size_t>(batch_ids.front())].target;
  const int d = domain_index(target);

  for (int idx : batch_ids) {
    const TrainingExample& ex = examples[static_cast<std::size_t>(idx)];
    Rng neg_rng = epoch_neg_rng.fork(static_cast<std::uint64_t>(idx));
    std::vector<int> candidates{ex.candidate};
    for (const TrainingExample& neg : negative_sample(ds, ex, cfg.k_neg, neg_rng)) {
      candidates.push_back(neg.candidate);
    }
    const ad::Tensor scores = model.score_group(ds, ex, candidates, &tape);
    ad::Tensor labels = ad::Tensor::zeros(static_cast<int>(candidates.size()), 1, false);
    labels.values()[0] = 1.0;
    group_bces.push_back(ad::binary_cross_entropy(scores, labels, &tape));

    users.push_back(ex.user);
    if (model.repr().autoencoder_mode) {
      batch_items.insert(batch_items.end(), candidates.begin(), candidates.end());
      const int ur = ds.user_domain_row[d][ex.user];
      if (ur >= 0) batch_user_rows.push_back(ur);
    }
  }

  ad::Tensor bce = group_bces.front();
  for (std::size_t i = 1; i < group_bces.size(); ++i) bce = ad::add(bce, group_bces[i], &tape);
  bce = ad::scale(bce, 1.0 / static_cast<double>(group_bces.size()), &tape);
  ad::Tensor loss = bce;

  if (model.dual_embedding_active()) {
    std::sort(users.begin(), users.end());
    users.erase(std::unique(users.begin(), users.end()), users.end());
    std::vector<int> rows_a, rows_b;
    for (int u : users) {
      const int ra = ds.user_domain_row[0][u];
      const int rb = ds.user_domain_row[1][u];
      if (ra >= 0 && rb >= 0) {
        rows_a.push_back(ra);
        rows_b.push_back(rb);
      }
    }
    if (!rows_a.empty()) {
      const ad::Tensor wa = model.repr().user_table[0].rows(rows_a, &tape);
      const ad::Tensor wb = model.repr().user_table[1].rows(rows_b, &tape);
      ad::Tensor pair_losses = ad::add(forward_loss(model.map(), wa, wb, &tape),
                                       dual_loss(model.map(), wa, wb, &tape), &tape);
      pair_losses =
          ad::scale(pair_losses, cfg.beta / static_cast<double>(rows_a.size()), &tape);
      loss = ad::add(loss, pair_losses, &tape);
    }
    loss = ad::add(loss, ad::scale(orthogonality_penalty(model.map(), &tape), cfg.lambda, &tape),
                   &tape);
  }

  if (model.repr().autoencoder_mode && cfg.alpha > 0.0) {
    ReprState& repr = model.repr();
    std::sort(batch_items.begin(), batch_items.end());
    batch_items.erase(std::unique(batch_items.begin(), batch_items.end()), batch_items.end());
    std::sort(batch_user_rows.begin(), batch_user_rows.end());
    batch_user_rows.erase(std::unique(batch_user_rows.begin(), batch_user_rows.end()),
                          batch_user_rows.end());
    ad::Tensor recon;
    bool have = false;
    if (!batch_user_rows.empty()) {
      const ad::Tensor feats = ad::gather_rows(repr.user_features[d], batch_user_rows, &tape);
      recon = ad::scale(repr.user_ae[d].reconstruction_loss(feats, &tape),
                        1.0 / static_cast<double>(batch_user_rows.size()), &tape);
      have = true;
    }
    if (!batch_items.empty()) {
      const ad::Tensor feats = ad::gather_rows(repr.item_features[d], batch_items, &tape);
      const ad::Tensor ri = ad::scale(repr.item_ae[d].reconstruction_loss(feats, &tape),
                                      1.0 / static_cast<double>(batch_items.size()), &tape);
      recon = have ? ad::add(recon, ri, &tape) : ri;
      have = true;
    }
    if (have) loss = ad::add(loss, ad::scale(recon, cfg.alpha, &tape), &tape);
  }

  BatchResult result{loss.item(), bce.item()};
  if (!std::isfinite(result.loss)) {
    throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch) +
                          ", step " + std::to_string(step) + "; " +
                          parameter_norm_snapshot(model));
  }

  opt.zero_grad();
  tape.backward(loss);
  opt.step();
  return result;
}

}  // namespace

TrainState train(DaslModel& model, const DomainPairDataset& ds,
                 const std::vector<TrainingExample>& examples, int test_fold,
                 const TrainConfig& cfg, Rng& rng) {
  if (test_fold < 0 || test_fold >= cfg.n_folds) {
    throw ContractError("test_fold " + std::to_string(test_fold) + " outside 0.." +
                        std::to_string(cfg.n_folds - 1));
  }
  if (cfg.batch < 1 || cfg.k_neg < 1 || cfg.max_epochs < 0) {
    throw ConfigError("trainer needs batch >= 1, k_neg >= 1, max_epochs >= 0");
  }
  const int val_fold = (test_fold + 1) % cfg.n_folds;

  std::array<std::vector<int>, 2> train_pos, val_pos;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const TrainingExample& ex = examples[i];
    if (ex.fold < 0) throw ContractError("examples lack fold ids; run fold_split first");
    const int d = domain_index(ex.target);
    if (ex.fold == test_fold) continue;
    if (ex.fold == val_fold) {
      val_pos[d].push_back(static_cast<int>(i));
    } else {
      train_pos[d].push_back(static_cast<int>(i));
    }
  }
  if (train_pos[0].empty() && train_pos[1].empty()) {
    throw DataError("no training examples outside the held-out folds");
  }

  // Validation candidates are fixed for the whole run so epoch-to-epoch AUC
  // movement reflects parameter movement only.
  Rng val_rng = rng.fork("val");
  std::array<std::vector<std::pair<int, std::vector<int>>>, 2> val_groups;
  for (int d = 0; d < 2; ++d) {
    std::vector<int> order = val_pos[d];
    Rng sub = val_rng.fork(static_cast<std::uint64_t>(d));
    sub.shuffle(order);
    if (static_cast<int>(order.size()) > cfg.val_cap) order.resize(cfg.val_cap);
    for (int idx : order) {
      Rng group_rng = val_rng.fork(static_cast<std::uint64_t>(idx));
      val_groups[d].emplace_back(
          idx, ranking_candidates(ds, examples[static_cast<std::size_t>(idx)],
                                  cfg.val_negatives, group_rng));
    }
  }

  ad::Adam opt(model.trainable_parameters(), ad::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  Rng shuffle_rng = rng.fork("shuffle");
  Rng neg_root = rng.fork("negatives");
  const int groups_per_batch = std::max(1, cfg.batch / (1 + cfg.k_neg));

  TrainState state;
  state.test_fold = test_fold;
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::array<std::vector<int>, 2> queue = train_pos;
    shuffle_rng.shuffle(queue[0]);
    shuffle_rng.shuffle(queue[1]);

    // Both domains run the same number of batches per epoch; the smaller
    // domain wraps around its shuffled queue.
    int batches_per_domain = 0;
    for (int d = 0; d < 2; ++d) {
      if (queue[d].empty()) continue;
      const int nb = static_cast<int>((queue[d].size() + groups_per_batch - 1) /
                                      static_cast<std::size_t>(groups_per_batch));
      batches_per_domain = std::max(batches_per_domain, nb);
    }

    Rng epoch_neg = neg_root.fork(static_cast<std::uint64_t>(epoch));
    std::array<std::size_t, 2> cursor{0, 0};
    double ep_loss = 0.0, ep_bce = 0.0;
    int ep_batches = 0;

    for (int b = 0; b < batches_per_domain; ++b) {
      for (int d = 0; d < 2; ++d) {
        if (queue[d].empty()) continue;
        std::vector<int> batch_ids;
        batch_ids.reserve(static_cast<std::size_t>(groups_per_batch));
        for (int g = 0; g < groups_per_batch; ++g) {
          batch_ids.push_back(queue[d][cursor[d] % queue[d].size()]);
          ++cursor[d];
        }
        const BatchResult r = run_batch(model, ds, examples, batch_ids, cfg, opt, epoch_neg,
                                        state.steps, epoch);
        ep_loss += r.loss;
        ep_bce += r.bce;
        ++ep_batches;
        ++state.steps;
        if (model.dual_embedding_active() && cfg.proj_every > 0 &&
            state.steps % cfg.proj_every == 0) {
          project_to_orthogonal(model.map());
        }
      }
    }

    state.train_loss.push_back(ep_batches > 0 ? ep_loss / ep_batches : 0.0);
    state.train_bce.push_back(ep_batches > 0 ? ep_bce / ep_batches : 0.0);

    for (int d = 0; d < 2; ++d) {
      if (val_groups[d].empty()) continue;
      // Mean per-block AUC: each positive competes only against its own
      // sampled negatives, so per-user score offsets cannot wash out the
      // ranking signal.
      double auc_sum = 0.0;
      std::vector<std::pair<double, int>> scored;
      for (const auto& [idx, candidates] : val_groups[d]) {
        const ad::Tensor s = model.score_group(
            ds, examples[static_cast<std::size_t>(idx)], candidates, nullptr);
        scored.clear();
        for (int c = 0; c < s.rows(); ++c) {
          scored.emplace_back(s.values()[static_cast<std::size_t>(c)], c == 0 ? 1 : 0);
        }
        auc_sum += auc(scored);
      }
      state.val_auc[d].push_back(auc_sum / static_cast<double>(val_groups[d].size()));
    }
    ++state.epochs;
    DASL_LOG_INFO("epoch " << epoch << " loss " << state.train_loss.back() << " bce "
                           << state.train_bce.back() << " val_auc A "
                           << (state.val_auc[0].empty() ? 0.0 : state.val_auc[0].back())
                           << " B "
                           << (state.val_auc[1].empty() ? 0.0 : state.val_auc[1].back()));

    if (convergence_check(state, cfg)) {
      state.converged_epoch = epoch;
      break;
    }
  }

  // Steps since the last periodic projection would otherwise leave X slightly
  // off the orthogonal manifold at return time.
  if (model.dual_embedding_active() && state.steps > 0) {
    project_to_orthogonal(model.map());
  }

  state.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return state;
}

}  // namespace dasl
