#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dasl/data.hpp"
#include "dasl/model.hpp"
#include "dasl/rng.hpp"

namespace dasl {

struct TrainConfig {
  double lr = 1e-3;
  double alpha = 0.1;   // reconstruction loss weight (autoencoder mode)
  double beta = 0.5;    // dual-embedding loss weight
  double lambda = 1.0;  // orthogonality penalty weight
  int batch = 64;       // scored rows per step; positives grouped with their negatives
  int max_epochs = 50;
  int k_neg = 4;      // training negatives per positive
  int proj_every = 10;
  int n_folds = 5;
  int val_negatives = 19;   // fixed per-positive candidates for the plateau metric
  int val_cap = 1500;       // validation positives per domain
  double plateau_tol = 1e-3;
  int plateau_window = 3;
  int min_epochs = 4;
};

struct TrainState {
  int epochs = 0;
  std::array<std::vector<double>, 2> val_auc;  // per domain, one entry per epoch
  std::vector<double> train_loss;              // mean total loss per step, per epoch
  std::vector<double> train_bce;               // CTR component alone
  int converged_epoch = -1;                    // -1: ran to max_epochs
  int test_fold = 0;
  long steps = 0;
  double wall_seconds = 0.0;
};

// True once >= min_epochs of history exist and, in every domain with
// validation data, |AUC_t − AUC_{t-window}| < plateau_tol.
bool convergence_check(const TrainState& state, const TrainConfig& cfg);

// Trains in place. Fold `test_fold` is held out entirely, fold
// (test_fold+1) % n_folds provides validation AUC for the plateau rule, the
// rest train. `examples` must come from build_examples on a fold-split
// dataset. Epochs alternate A-target and B-target mini-batches.
TrainState train(DaslModel& model, const DomainPairDataset& ds,
                 const std::vector<TrainingExample>& examples, int test_fold,
                 const TrainConfig& cfg, Rng& rng);

}  // namespace dasl
