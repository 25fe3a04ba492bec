#include "dasl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "dasl/dualattn.hpp"
#include "dasl/error.hpp"
#include "dasl/log.hpp"

namespace dasl {

double auc(const std::vector<std::pair<double, int>>& scored) {
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& [score, label] : scored) {
    if (!std::isfinite(score)) throw MetricError("non-finite score in auc input");
    if (label == 1) {
      ++n_pos;
    } else if (label == 0) {
      ++n_neg;
    } else {
      throw MetricError("auc labels must be 0 or 1");
    }
  }
  if (n_pos == 0 || n_neg == 0) {
    throw MetricError("auc undefined on single-class input (" + std::to_string(n_pos) +
                      " positives, " + std::to_string(n_neg) + " negatives)");
  }

  std::vector<std::pair<double, int>> sorted(scored);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // Midrank sum over positives; ties share the average rank, which makes the
  // statistic equal exhaustive pair counting with half-credit ties.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) {
      if (sorted[k].second == 1) rank_sum += midrank;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

int hit_rate_at_k(const std::vector<int>& ranked_candidates, int positive, int k) {
  if (k < 1) throw ContractError("hit_rate_at_k needs k >= 1");
  const auto it = std::find(ranked_candidates.begin(), ranked_candidates.end(), positive);
  if (it == ranked_candidates.end()) {
    throw ContractError("positive item " + std::to_string(positive) +
                        " missing from the candidate list");
  }
  return (it - ranked_candidates.begin()) < k ? 1 : 0;
}

FoldMetrics evaluate_fold(const DaslModel& model, const DomainPairDataset& ds,
                          const std::vector<TrainingExample>& examples, int test_fold,
                          const EvalConfig& cfg, Rng& rng) {
  FoldMetrics fm;
  fm.fold = test_fold;
  // AUC is computed per candidate block (the positive against its own
  // sampled negatives) and averaged, matching the 1+99 ranking protocol;
  // pooling across users would conflate per-user calibration offsets with
  // ranking quality.
  std::array<double, 2> auc_sum{0.0, 0.0};
  std::array<long, 2> hits{0, 0};

  std::vector<std::pair<double, int>> block;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const TrainingExample& ex = examples[i];
    if (ex.fold != test_fold) continue;
    const int d = domain_index(ex.target);
    Rng ex_rng = rng.fork(static_cast<std::uint64_t>(i));
    const std::vector<int> candidates = ranking_candidates(ds, ex, cfg.hr_negatives, ex_rng);
    const ad::Tensor s = model.score_group(ds, ex, candidates, nullptr);

    block.clear();
    std::vector<std::pair<int, double>> by_item;
    by_item.reserve(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const double score = s.values()[c];
      block.emplace_back(score, c == 0 ? 1 : 0);
      by_item.emplace_back(candidates[c], score);
    }
    auc_sum[d] += auc(block);
    const TopN ranked = top_n(std::move(by_item), static_cast<int>(candidates.size()));
    hits[d] += hit_rate_at_k(ranked.items, ex.candidate, cfg.hr_k);
    ++fm.domain[d].n_pos;
  }

  for (int d = 0; d < 2; ++d) {
    if (fm.domain[d].n_pos == 0) continue;
    fm.domain[d].auc = auc_sum[d] / fm.domain[d].n_pos;
    fm.domain[d].hr_at_10 = static_cast<double>(hits[d]) / fm.domain[d].n_pos;
  }
  return fm;
}

MetricsReport cross_validate(const DomainPairDataset& ds, const ModelConfig& mcfg,
                             const TrainConfig& tcfg, const EvalConfig& ecfg,
                             std::uint64_t seed) {
  MetricsReport report;
  report.variant = variant_name(mcfg.variant);
  report.seed = seed;
  report.dataset_fingerprint = dataset_fingerprint(ds);

  const std::vector<TrainingExample> examples = build_examples(ds, mcfg.T);
  bool any_fold = false;
  for (const TrainingExample& ex : examples) any_fold = any_fold || ex.fold >= 0;
  if (!any_fold) throw ContractError("dataset folds not assigned; run fold_split first");

  Rng root(seed);
  for (int fold = 0; fold < tcfg.n_folds; ++fold) {
    Rng fold_rng = root.fork("fold").fork(static_cast<std::uint64_t>(fold));
    Rng model_rng = fold_rng.fork("model");
    Rng train_rng = fold_rng.fork("train");
    Rng test_rng = fold_rng.fork("test");

    DaslModel model(ds, mcfg, model_rng);
    const TrainState state = train(model, ds, examples, fold, tcfg, train_rng);
    FoldMetrics fm = evaluate_fold(model, ds, examples, fold, ecfg, test_rng);
    fm.converged_epoch = state.converged_epoch;
    fm.epochs = state.epochs;
    DASL_LOG_INFO(report.variant << " fold " << fold << ": auc A " << fm.domain[0].auc
                                 << " B " << fm.domain[1].auc << " (" << state.epochs
                                 << " epochs)");
    report.folds.push_back(std::move(fm));
  }

  for (int d = 0; d < 2; ++d) {
    double auc_sum = 0.0, hr_sum = 0.0;
    int n = 0;
    for (const FoldMetrics& fm : report.folds) {
      auc_sum += fm.domain[d].auc;
      hr_sum += fm.domain[d].hr_at_10;
      report.aggregate[d].n_pos += fm.domain[d].n_pos;
      ++n;
    }
    if (n > 0) {
      report.aggregate[d].auc = auc_sum / n;
      report.aggregate[d].hr_at_10 = hr_sum / n;
    }
  }
  return report;
}

std::vector<MetricsReport> ablation_suite(const DomainPairDataset& ds, ModelConfig mcfg,
                                          const TrainConfig& tcfg, const EvalConfig& ecfg,
                                          std::uint64_t seed) {
  std::vector<MetricsReport> out;
  for (AblationVariant v : {AblationVariant::Dasl, AblationVariant::De, AblationVariant::Da,
                            AblationVariant::SingleDomain}) {
    mcfg.variant = v;
    out.push_back(cross_validate(ds, mcfg, tcfg, ecfg, seed));
  }
  return out;
}

namespace {

nlohmann::json domain_json(const DomainMetrics& m) {
  return {{"auc", m.auc}, {"hr_at_10", m.hr_at_10}, {"n_pos", m.n_pos}};
}

DomainMetrics domain_from_json(const nlohmann::json& j) {
  DomainMetrics m;
  m.auc = j.at("auc").get<double>();
  m.hr_at_10 = j.at("hr_at_10").get<double>();
  m.n_pos = j.at("n_pos").get<int>();
  return m;
}

}  // namespace

std::string report_json(const MetricsReport& report) {
  nlohmann::json j;
  j["variant"] = report.variant;
  j["seed"] = report.seed;
  char fp[20];
  std::snprintf(fp, sizeof(fp), "%016llx",
                static_cast<unsigned long long>(report.dataset_fingerprint));
  j["dataset_fingerprint"] = fp;
  j["aggregate"] = {{"A", domain_json(report.aggregate[0])},
                    {"B", domain_json(report.aggregate[1])}};
  j["folds"] = nlohmann::json::array();
  for (const FoldMetrics& fm : report.folds) {
    j["folds"].push_back({{"fold", fm.fold},
                          {"A", domain_json(fm.domain[0])},
                          {"B", domain_json(fm.domain[1])},
                          {"converged_epoch", fm.converged_epoch},
                          {"epochs", fm.epochs}});
  }
  return j.dump(2) + "\n";
}

MetricsReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed metrics report: ") + e.what());
  }
  MetricsReport report;
  try {
    report.variant = j.at("variant").get<std::string>();
    report.seed = j.at("seed").get<std::uint64_t>();
    report.dataset_fingerprint =
        std::stoull(j.at("dataset_fingerprint").get<std::string>(), nullptr, 16);
    report.aggregate[0] = domain_from_json(j.at("aggregate").at("A"));
    report.aggregate[1] = domain_from_json(j.at("aggregate").at("B"));
    for (const auto& f : j.at("folds")) {
      FoldMetrics fm;
      fm.fold = f.at("fold").get<int>();
      fm.domain[0] = domain_from_json(f.at("A"));
      fm.domain[1] = domain_from_json(f.at("B"));
      fm.converged_epoch = f.at("converged_epoch").get<int>();
      fm.epochs = f.at("epochs").get<int>();
      report.folds.push_back(std::move(fm));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("metrics report missing fields: ") + e.what());
  }
  return report;
}

std::string report_table(const std::vector<MetricsReport>& reports) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-14s %9s %9s %9s %9s\n", "algorithm", "A-AUC",
                "A-HR@10", "B-AUC", "B-HR@10");
  out += line;
  out += std::string(54, '-') + "\n";
  for (const MetricsReport& r : reports) {
    std::snprintf(line, sizeof(line), "%-14s %9.4f %9.4f %9.4f %9.4f\n", r.variant.c_str(),
                  r.aggregate[0].auc, r.aggregate[0].hr_at_10, r.aggregate[1].auc,
                  r.aggregate[1].hr_at_10);
    out += line;
  }
  return out;
}

}  // namespace dasl
