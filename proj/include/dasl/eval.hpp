#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dasl/data.hpp"
#include "dasl/model.hpp"
#include "dasl/trainer.hpp"

namespace dasl {

// Probability a uniform random positive outscores a uniform random negative,
// ties counting one half; computed by the midrank statistic, which equals
// exhaustive pair counting. Entries are (score, label).
double auc(const std::vector<std::pair<double, int>>& scored);

// 1 iff `positive` sits in the first k of an already-ranked candidate list.
int hit_rate_at_k(const std::vector<int>& ranked_candidates, int positive, int k = 10);

struct DomainMetrics {
  double auc = 0.0;
  double hr_at_10 = 0.0;
  int n_pos = 0;
};

struct FoldMetrics {
  int fold = 0;
  std::array<DomainMetrics, 2> domain;
  int converged_epoch = -1;
  int epochs = 0;
};

struct MetricsReport {
  std::string variant;
  std::uint64_t seed = 0;
  std::uint64_t dataset_fingerprint = 0;
  std::array<DomainMetrics, 2> aggregate;  // mean of folds
  std::vector<FoldMetrics> folds;
};

struct EvalConfig {
  int hr_negatives = 99;  // the 1 + 99 ranking protocol
  int hr_k = 10;
};

// Per-fold metrics for one already-trained model on its held-out fold.
FoldMetrics evaluate_fold(const DaslModel& model, const DomainPairDataset& ds,
                          const std::vector<TrainingExample>& examples, int test_fold,
                          const EvalConfig& cfg, Rng& rng);

// Trains and evaluates one model per fold; deterministic under seed.
MetricsReport cross_validate(const DomainPairDataset& ds, const ModelConfig& mcfg,
                             const TrainConfig& tcfg, const EvalConfig& ecfg,
                             std::uint64_t seed);

// DASL, DASL-DE, DASL-DA and SingleDomain under identical seeds and folds.
std::vector<MetricsReport> ablation_suite(const DomainPairDataset& ds, ModelConfig mcfg,
                                          const TrainConfig& tcfg, const EvalConfig& ecfg,
                                          std::uint64_t seed);

std::string report_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);

// Aligned table, one row per report: algorithm rows, domain/metric columns.
std::string report_table(const std::vector<MetricsReport>& reports);

}  // namespace dasl
