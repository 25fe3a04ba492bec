#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dasl/rng.hpp"

namespace dasl {

enum class Domain : int { A = 0, B = 1 };

inline int domain_index(Domain d) { return static_cast<int>(d); }
inline Domain other_domain(Domain d) { return d == Domain::A ? Domain::B : Domain::A; }
char domain_char(Domain d);
Domain domain_from_char(char c);

struct InteractionRecord {
  std::string user_id;
  std::string item_id;
  Domain domain = Domain::A;
  long long timestamp = 0;
  std::optional<double> rating;
  std::optional<int> label;
};

struct LoadStats {
  std::size_t total_lines = 0;
  std::size_t parsed = 0;
  std::size_t malformed = 0;
  std::vector<std::string> malformed_samples;  // at most 5, for error reporting
};

// Tab-separated lines: user_id  item_id  domain  timestamp  rating_or_label.
// The last field is a real rating or an integer label prefixed "L:".
// Lines starting with '#' are headers. More than 1% malformed lines aborts.
std::vector<InteractionRecord> load_events(const std::string& path, LoadStats* stats = nullptr);

// rating >= threshold -> label 1, else 0 (boundary inclusive). Records that
// already carry a label pass through; records with neither are rejected.
void binarize(std::vector<InteractionRecord>& records, double threshold = 4.0);

struct OverlapPair {
  int row_a = -1;  // user row in domain A's user table
  int row_b = -1;  // same user's row in domain B's table
};

struct DomainPairDataset {
  std::vector<InteractionRecord> records;  // sorted by (user_id, timestamp, ...)

  std::vector<std::string> user_ids;  // global user index, order of first appearance
  std::unordered_map<std::string, int> user_row;

  std::array<std::vector<std::string>, 2> item_ids;  // per-domain item tables
  std::array<std::unordered_map<std::string, int>, 2> item_row;

  // Global user index -> row in the per-domain user table, or -1 if inactive there.
  std::array<std::vector<int>, 2> user_domain_row;
  std::array<int, 2> domain_users{0, 0};

  std::vector<OverlapPair> overlap;  // users active in both domains

  // Per-user event streams in time order: indexes into `records`.
  std::vector<std::vector<int>> user_events;

  // Per-user per-domain interacted item rows, sorted (negative-sample exclusion).
  std::array<std::vector<std::vector<int>>, 2> user_items;

  std::vector<int> fold_of;  // per record; -1 until fold_split, set on positives
  std::uint64_t fold_seed = 0;

  int users() const { return static_cast<int>(user_ids.size()); }
  int items(Domain d) const { return static_cast<int>(item_ids[domain_index(d)].size()); }
  bool user_interacted(int user, Domain d, int item) const;
};

// Indexes records (must be binarized) into a dataset. Sorts them first.
DomainPairDataset build_dataset(std::vector<InteractionRecord> records);

struct TrainingExample {
  int user = -1;  // global user index
  Domain target = Domain::A;
  std::vector<int> history_a;  // item rows, oldest -> newest, length <= max_history
  std::vector<int> history_b;
  int candidate = -1;  // item row in the target domain
  int label = 1;
  int fold = -1;
  long long timestamp = 0;  // candidate's timestamp

  const std::vector<int>& target_history() const {
    return target == Domain::A ? history_a : history_b;
  }
  const std::vector<int>& other_history() const {
    return target == Domain::A ? history_b : history_a;
  }
};

// One example per positive record: both domains' most recent strictly-prior
// interactions, the candidate's own occurrences excluded from its domain.
std::vector<TrainingExample> build_examples(const DomainPairDataset& ds, int max_history = 10);

// k label-0 copies of `pos` with distinct candidates drawn uniformly from the
// target domain excluding the user's full interacted set.
std::vector<TrainingExample> negative_sample(const DomainPairDataset& ds,
                                             const TrainingExample& pos, int k, Rng& rng);

// 1 positive + n_negatives distinct non-interacted items for ranking eval.
// Returns item rows; element 0 is the positive candidate.
std::vector<int> ranking_candidates(const DomainPairDataset& ds, const TrainingExample& pos,
                                    int n_negatives, Rng& rng);

// Assigns each positive record a fold in 0..n_folds-1, round-robin per user
// with a seeded per-user shuffle, so a user's folds differ in size by <= 1.
void fold_split(DomainPairDataset& ds, int n_folds, Rng& rng);

struct SynthConfig {
  int n_users = 2000;
  int n_items_a = 500;
  int n_items_b = 500;
  int latent_dim = 8;
  double overlap_frac = 0.5;
  double noise = 0.5;
  // Events in a user's primary domain. Overlap users alternate primary
  // domains (even index -> A, odd -> B) and additionally get `events_light`
  // late events in the other domain, so each domain holds a cohort of users
  // whose in-domain history is thin but whose cross-domain history is rich —
  // the situation the dual components are built for.
  int events_per_user = 12;
  int events_light = 4;
  // Multiplier on the latent affinity inside the acceptance probability.
  double gain = 8.0;
  std::uint64_t seed = 42;
};

// Planted latents, indexed by the returned dataset's user/item rows.
struct GroundTruth {
  std::vector<std::vector<double>> user_latent;
  std::array<std::vector<std::vector<double>>, 2> item_latent;
};

// Plants a shared per-user latent (a preference-cluster anchor shared across
// both domains): each event proposes a random item and accepts it with
// probability sigmoid(gain*affinity + noise*N(0,1)), so the chosen items
// carry the latent signal unless noise drowns it.
DomainPairDataset synthesize(const SynthConfig& cfg, GroundTruth* truth = nullptr);

// FNV-1a over the canonical record serialization.
std::uint64_t dataset_fingerprint(const DomainPairDataset& ds);

// Writes records back out in the line format load_events reads.
void write_dataset(const DomainPairDataset& ds, const std::string& path);

}  // namespace dasl
