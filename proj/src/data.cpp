#include "dasl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

#include "dasl/error.hpp"
#include "dasl/log.hpp"

namespace dasl {

char domain_char(Domain d) { return d == Domain::A ? 'A' : 'B'; }

Domain domain_from_char(char c) {
  if (c == 'A') return Domain::A;
  if (c == 'B') return Domain::B;
  throw DataError(std::string("unknown domain '") + c + "', expected A or B");
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

bool parse_record(const std::vector<std::string>& f, InteractionRecord& rec) {
  if (f.size() != 5) return false;
  if (f[0].empty() || f[1].empty() || f[2].size() != 1) return false;
  if (f[2][0] != 'A' && f[2][0] != 'B') return false;
  rec.user_id = f[0];
  rec.item_id = f[1];
  rec.domain = f[2][0] == 'A' ? Domain::A : Domain::B;
  try {
    std::size_t used = 0;
    rec.timestamp = std::stoll(f[3], &used);
    if (used != f[3].size() || rec.timestamp < 0) return false;
    rec.rating.reset();
    rec.label.reset();
    if (f[4].rfind("L:", 0) == 0) {
      const std::string v = f[4].substr(2);
      int label = std::stoi(v, &used);
      if (used != v.size() || (label != 0 && label != 1)) return false;
      rec.label = label;
    } else {
      double rating = std::stod(f[4], &used);
      if (used != f[4].size() || !std::isfinite(rating)) return false;
      rec.rating = rating;
    }
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

void sort_records(std::vector<InteractionRecord>& records) {
  std::sort(records.begin(), records.end(),
            [](const InteractionRecord& a, const InteractionRecord& b) {
              return std::tie(a.user_id, a.timestamp, a.domain, a.item_id) <
                     std::tie(b.user_id, b.timestamp, b.domain, b.item_id);
            });
}

std::string serialize_record(const InteractionRecord& r) {
  std::string out = r.user_id;
  out += '\t';
  out += r.item_id;
  out += '\t';
  out += domain_char(r.domain);
  out += '\t';
  out += std::to_string(r.timestamp);
  out += '\t';
  if (r.label.has_value()) {
    out += "L:";
    out += std::to_string(*r.label);
  } else if (r.rating.has_value()) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", *r.rating);
    out += buf;
  } else {
    out += "?";
  }
  return out;
}

}  // namespace

std::vector<InteractionRecord> load_events(const std::string& path, LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open events file: " + path);

  LoadStats local;
  std::vector<InteractionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') continue;
    ++local.total_lines;
    InteractionRecord rec;
    if (parse_record(split_tabs(line), rec)) {
      records.push_back(std::move(rec));
      ++local.parsed;
    } else {
      ++local.malformed;
      if (local.malformed_samples.size() < 5) {
        local.malformed_samples.push_back("line " + std::to_string(line_no) + ": " + line);
      }
    }
  }
  if (in.bad()) throw IoError("read failure on events file: " + path);

  if (local.total_lines > 0 &&
      100 * local.malformed > local.total_lines) {  // >1% malformed
    std::string msg = std::to_string(local.malformed) + " of " +
                      std::to_string(local.total_lines) + " lines malformed in " + path;
    for (const std::string& s : local.malformed_samples) msg += "\n  " + s;
    throw IngestError(msg);
  }
  if (local.malformed > 0) {
    DASL_LOG_INFO("skipped " << local.malformed << " malformed lines in " << path);
  }

  sort_records(records);
  if (stats != nullptr) *stats = local;
  return records;
}

void binarize(std::vector<InteractionRecord>& records, double threshold) {
  std::size_t rejected = 0;
  for (InteractionRecord& r : records) {
    if (r.rating.has_value()) {
      r.label = *r.rating >= threshold ? 1 : 0;
      r.rating.reset();
    } else if (!r.label.has_value()) {
      ++rejected;
    }
  }
  if (rejected > 0) {
    std::erase_if(records,
                  [](const InteractionRecord& r) { return !r.label.has_value(); });
    DASL_LOG_INFO("binarize rejected " << rejected << " records with no rating or label");
  }
}

bool DomainPairDataset::user_interacted(int user, Domain d, int item) const {
  const std::vector<int>& items = user_items[domain_index(d)][user];
  return std::binary_search(items.begin(), items.end(), item);
}

DomainPairDataset build_dataset(std::vector<InteractionRecord> records) {
  sort_records(records);
  DomainPairDataset ds;
  ds.records = std::move(records);

  std::unordered_map<std::string, int> item_domain;  // exclusivity check
  for (const InteractionRecord& r : ds.records) {
    if (!r.label.has_value()) {
      throw DataError("record for user " + r.user_id + " has no label; binarize first");
    }
    const int d = domain_index(r.domain);
    auto [uit, fresh_user] = ds.user_row.try_emplace(r.user_id, ds.users());
    if (fresh_user) ds.user_ids.push_back(r.user_id);
    (void)uit;
    auto [dit, fresh_item] = ds.item_row[d].try_emplace(r.item_id, ds.items(r.domain));
    if (fresh_item) {
      ds.item_ids[d].push_back(r.item_id);
      auto [xit, unique] = item_domain.try_emplace(r.item_id, d);
      if (!unique && xit->second != d) {
        throw DataError("item " + r.item_id + " appears in both domains");
      }
    }
    (void)dit;
  }

  const int n_users = ds.users();
  ds.user_domain_row[0].assign(n_users, -1);
  ds.user_domain_row[1].assign(n_users, -1);
  ds.user_events.assign(n_users, {});
  ds.user_items[0].assign(n_users, {});
  ds.user_items[1].assign(n_users, {});
  ds.fold_of.assign(ds.records.size(), -1);

  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const InteractionRecord& r = ds.records[i];
    const int u = ds.user_row.at(r.user_id);
    const int d = domain_index(r.domain);
    ds.user_events[u].push_back(static_cast<int>(i));
    ds.user_items[d][u].push_back(ds.item_row[d].at(r.item_id));
  }
  // Per-domain user rows are assigned in global user order so they are
  // independent of record interleaving.
  for (int u = 0; u < n_users; ++u) {
    for (int d = 0; d < 2; ++d) {
      std::vector<int>& items = ds.user_items[d][u];
      std::sort(items.begin(), items.end());
      items.erase(std::unique(items.begin(), items.end()), items.end());
      if (!items.empty()) ds.user_domain_row[d][u] = ds.domain_users[d]++;
    }
    if (ds.user_domain_row[0][u] >= 0 && ds.user_domain_row[1][u] >= 0) {
      ds.overlap.push_back({ds.user_domain_row[0][u], ds.user_domain_row[1][u]});
    }
  }
  return ds;
}

std::vector<TrainingExample> build_examples(const DomainPairDataset& ds, int max_history) {
  if (max_history < 1) throw ContractError("max_history must be >= 1");
  std::vector<TrainingExample> out;

  for (int u = 0; u < ds.users(); ++u) {
    const std::vector<int>& events = ds.user_events[u];
    // Running windows of all strictly-prior interactions per domain.
    std::array<std::vector<int>, 2> window;        // item rows, time order
    std::array<std::vector<long long>, 2> wtimes;  // matching timestamps

    std::size_t i = 0;
    while (i < events.size()) {
      std::size_t j = i;
      const long long ts = ds.records[events[i]].timestamp;
      while (j < events.size() && ds.records[events[j]].timestamp == ts) ++j;

      // Emit examples for every positive at this timestamp before admitting
      // any of them to the windows: histories must strictly precede.
      for (std::size_t e = i; e < j; ++e) {
        const InteractionRecord& r = ds.records[events[e]];
        if (*r.label != 1) continue;
        const int d = domain_index(r.domain);
        const int cand = ds.item_row[d].at(r.item_id);

        TrainingExample ex;
        ex.user = u;
        ex.target = r.domain;
        ex.candidate = cand;
        ex.label = 1;
        ex.fold = ds.fold_of[events[e]];
        ex.timestamp = ts;
        for (int dd = 0; dd < 2; ++dd) {
          std::vector<int> hist;
          for (int row : window[dd]) {
            if (dd == d && row == cand) continue;  // candidate never in own history
            hist.push_back(row);
          }
          if (static_cast<int>(hist.size()) > max_history) {
            hist.erase(hist.begin(), hist.end() - max_history);
          }
          (dd == 0 ? ex.history_a : ex.history_b) = std::move(hist);
        }
        out.push_back(std::move(ex));
      }
      for (std::size_t e = i; e < j; ++e) {
        const InteractionRecord& r = ds.records[events[e]];
        const int d = domain_index(r.domain);
        window[d].push_back(ds.item_row[d].at(r.item_id));
        wtimes[d].push_back(ts);
      }
      i = j;
    }
  }
  return out;
}

namespace {

std::vector<int> eligible_items(const DomainPairDataset& ds, int user, Domain target) {
  const int d = domain_index(target);
  const std::vector<int>& interacted = ds.user_items[d][user];
  std::vector<int> out;
  out.reserve(ds.item_ids[d].size());
  for (int row = 0; row < static_cast<int>(ds.item_ids[d].size()); ++row) {
    if (!std::binary_search(interacted.begin(), interacted.end(), row)) out.push_back(row);
  }
  return out;
}

// First k entries of a seeded partial Fisher-Yates over `pool`.
std::vector<int> draw_distinct(std::vector<int> pool, int k, Rng& rng) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const int j = i + rng.uniform_int(static_cast<int>(pool.size()) - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

}  // namespace

std::vector<TrainingExample> negative_sample(const DomainPairDataset& ds,
                                             const TrainingExample& pos, int k, Rng& rng) {
  if (k < 1) throw ContractError("negative_sample needs k >= 1");
  std::vector<int> pool = eligible_items(ds, pos.user, pos.target);
  if (static_cast<int>(pool.size()) < k) {
    throw SamplingError("domain " + std::string(1, domain_char(pos.target)) + " has only " +
                        std::to_string(pool.size()) + " items outside user " +
                        ds.user_ids[pos.user] + "'s interactions, need " + std::to_string(k));
  }
  std::vector<TrainingExample> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int cand : draw_distinct(std::move(pool), k, rng)) {
    TrainingExample neg = pos;
    neg.candidate = cand;
    neg.label = 0;
    out.push_back(std::move(neg));
  }
  return out;
}

std::vector<int> ranking_candidates(const DomainPairDataset& ds, const TrainingExample& pos,
                                    int n_negatives, Rng& rng) {
  std::vector<int> pool = eligible_items(ds, pos.user, pos.target);
  if (static_cast<int>(pool.size()) < n_negatives) {
    throw SamplingError("cannot draw " + std::to_string(n_negatives) +
                        " ranking negatives from " + std::to_string(pool.size()) +
                        " eligible items");
  }
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(n_negatives) + 1);
  out.push_back(pos.candidate);
  for (int cand : draw_distinct(std::move(pool), n_negatives, rng)) out.push_back(cand);
  return out;
}

void fold_split(DomainPairDataset& ds, int n_folds, Rng& rng) {
  if (n_folds < 2) throw ContractError("fold_split needs n_folds >= 2");
  for (int u = 0; u < ds.users(); ++u) {
    std::vector<int> positives;
    for (int rec : ds.user_events[u]) {
      if (*ds.records[rec].label == 1) positives.push_back(rec);
    }
    std::vector<int> folds(positives.size());
    for (std::size_t i = 0; i < folds.size(); ++i) {
      folds[i] = static_cast<int>(i) % n_folds;  // sizes differ by <= 1
    }
    Rng user_rng = rng.fork(ds.user_ids[u]);
    user_rng.shuffle(folds);
    for (std::size_t i = 0; i < positives.size(); ++i) ds.fold_of[positives[i]] = folds[i];
  }
}

DomainPairDataset synthesize(const SynthConfig& cfg, GroundTruth* truth) {
  if (cfg.n_users <= 0 || cfg.n_items_a <= 0 || cfg.n_items_b <= 0) {
    throw ConfigError("synthesize needs positive user and item counts");
  }
  if (cfg.latent_dim <= 0) throw ConfigError("latent_dim must be positive");
  if (cfg.overlap_frac < 0.0 || cfg.overlap_frac > 1.0) {
    throw ConfigError("overlap_frac must lie in [0, 1]");
  }
  if (cfg.events_per_user <= 0) throw ConfigError("events_per_user must be positive");
  if (cfg.events_light <= 0) throw ConfigError("events_light must be positive");

  Rng root(cfg.seed);
  const std::array<int, 2> n_items{cfg.n_items_a, cfg.n_items_b};

  GroundTruth gt;
  gt.user_latent.resize(static_cast<std::size_t>(cfg.n_users));
  Rng lat_rng = root.fork("latents");
  // Latents are centered cluster anchors: each item belongs to one of
  // latent_dim shared preference clusters shared across domains, and its
  // latent is sqrt(L)·(e_cluster − 1/L). Same-cluster affinity u·v/sqrt(L) is
  // then sqrt(L)−1/sqrt(L) > 0 and cross-cluster −1/sqrt(L) < 0, so accepted
  // items concentrate in the active cluster. Each user holds TWO interest
  // clusters and alternates between them session by session; the recorded
  // user latent is their stationary preference, the mean of both anchors.
  const int L = cfg.latent_dim;
  const double anchor = std::sqrt(static_cast<double>(L));
  auto cluster_latent = [&](int cluster) {
    std::vector<double> v(static_cast<std::size_t>(L), -anchor / L);
    v[static_cast<std::size_t>(cluster)] += anchor;
    return v;
  };
  std::vector<std::vector<double>> anchors(static_cast<std::size_t>(L));
  for (int c = 0; c < L; ++c) anchors[static_cast<std::size_t>(c)] = cluster_latent(c);

  std::vector<int> interest_1(static_cast<std::size_t>(cfg.n_users));
  std::vector<int> interest_2(static_cast<std::size_t>(cfg.n_users));
  for (int u = 0; u < cfg.n_users; ++u) {
    Rng r = lat_rng.fork(static_cast<std::uint64_t>(u));
    const int c1 = r.uniform_int(L);
    const int c2 = L > 1 ? (c1 + 1 + r.uniform_int(L - 1)) % L : c1;
    interest_1[static_cast<std::size_t>(u)] = c1;
    interest_2[static_cast<std::size_t>(u)] = c2;
    std::vector<double> mean(static_cast<std::size_t>(L));
    for (int l = 0; l < L; ++l) {
      mean[static_cast<std::size_t>(l)] =
          0.5 * (anchors[static_cast<std::size_t>(c1)][static_cast<std::size_t>(l)] +
                 anchors[static_cast<std::size_t>(c2)][static_cast<std::size_t>(l)]);
    }
    gt.user_latent[u] = std::move(mean);
  }
  for (int d = 0; d < 2; ++d) {
    gt.item_latent[d].resize(static_cast<std::size_t>(n_items[d]));
    Rng dr = lat_rng.fork(d == 0 ? "items_a" : "items_b");
    for (int j = 0; j < n_items[d]; ++j) {
      Rng r = dr.fork(static_cast<std::uint64_t>(j));
      gt.item_latent[d][j] = cluster_latent(r.uniform_int(L));
    }
  }

  const int pad_u = static_cast<int>(std::to_string(cfg.n_users - 1).size());
  const int pad_i = static_cast<int>(
      std::to_string(std::max(cfg.n_items_a, cfg.n_items_b) - 1).size());
  auto entity_id = [](char prefix, int n, int pad) {
    std::string digits = std::to_string(n);
    return prefix + std::string(static_cast<std::size_t>(pad) - std::min<std::size_t>(
                                    digits.size(), static_cast<std::size_t>(pad)),
                                '0') +
           digits;
  };

  const int n_overlap = static_cast<int>(std::lround(cfg.overlap_frac * cfg.n_users));
  const double inv_sqrt_dim = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));

  std::vector<InteractionRecord> records;
  Rng ev_root = root.fork("events");
  for (int u = 0; u < cfg.n_users; ++u) {
    Rng ur = ev_root.fork(static_cast<std::uint64_t>(u));

    std::array<std::vector<bool>, 2> taken;
    for (int d = 0; d < 2; ++d) {
      taken[d].assign(static_cast<std::size_t>(n_items[d]), false);
    }
    auto draw = [&](int d, int want, const std::vector<double>& active) {
      std::vector<int> chosen;
      const int cap = 50 * want;
      int attempts = 0;
      while (static_cast<int>(chosen.size()) < want && attempts < cap) {
        ++attempts;
        const int j = ur.uniform_int(n_items[d]);
        if (taken[d][static_cast<std::size_t>(j)]) continue;
        double affinity = 0.0;
        for (int l = 0; l < cfg.latent_dim; ++l) {
          affinity += active[static_cast<std::size_t>(l)] * gt.item_latent[d][j][l];
        }
        affinity *= inv_sqrt_dim;
        const double logit = cfg.gain * affinity + cfg.noise * ur.normal();
        const double p = 1.0 / (1.0 + std::exp(-logit));
        if (ur.uniform() < p) {
          taken[d][static_cast<std::size_t>(j)] = true;
          chosen.push_back(j);
        }
      }
      return chosen;
    };

    // The timeline is a run of sessions. Each session activates one of the
    // user's two interests at random and draws every event in it from that
    // interest. Overlap users open each session with one event in their light
    // secondary domain, then continue in the heavy primary domain: the light
    // domain accumulates little in-domain history (its user preference must
    // come across domains), while predictions in the heavy domain can read
    // the session's interest off the fresh cross-domain event.
    const bool is_overlap = u < n_overlap;
    const int heavy = is_overlap ? u % 2 : (u - n_overlap) % 2;
    const int n_sessions = cfg.events_light;
    const int heavy_base = cfg.events_per_user / n_sessions;
    const int heavy_rem = cfg.events_per_user % n_sessions;

    std::vector<std::pair<int, int>> timeline;
    for (int s = 0; s < n_sessions; ++s) {
      const int c = ur.uniform_int(2) == 0 ? interest_1[static_cast<std::size_t>(u)]
                                           : interest_2[static_cast<std::size_t>(u)];
      const std::vector<double>& active = anchors[static_cast<std::size_t>(c)];
      if (is_overlap) {
        for (int j : draw(1 - heavy, 1, active)) timeline.emplace_back(1 - heavy, j);
      }
      const int want = heavy_base + (s < heavy_rem ? 1 : 0);
      if (want > 0) {
        for (int j : draw(heavy, want, active)) timeline.emplace_back(heavy, j);
      }
    }

    long long ts = 0;
    for (const auto& [d, j] : timeline) {
      InteractionRecord rec;
      rec.user_id = entity_id('u', u, pad_u);
      rec.item_id = entity_id(d == 0 ? 'a' : 'b', j, pad_i);
      rec.domain = d == 0 ? Domain::A : Domain::B;
      rec.timestamp = ++ts;
      rec.label = 1;
      records.push_back(std::move(rec));
    }
  }

  DomainPairDataset ds = build_dataset(std::move(records));
  if (truth != nullptr) {
    // Re-key the latents from generator indices to dataset rows, so consumers
    // can index them with the dataset's user/item rows directly.
    GroundTruth aligned;
    aligned.user_latent.resize(static_cast<std::size_t>(ds.users()));
    for (int u = 0; u < cfg.n_users; ++u) {
      const auto it = ds.user_row.find(entity_id('u', u, pad_u));
      if (it != ds.user_row.end()) {
        aligned.user_latent[static_cast<std::size_t>(it->second)] =
            std::move(gt.user_latent[u]);
      }
    }
    for (int d = 0; d < 2; ++d) {
      aligned.item_latent[d].resize(ds.item_ids[d].size());
      for (int j = 0; j < n_items[d]; ++j) {
        const auto it = ds.item_row[d].find(entity_id(d == 0 ? 'a' : 'b', j, pad_i));
        if (it != ds.item_row[d].end()) {
          aligned.item_latent[d][static_cast<std::size_t>(it->second)] =
              std::move(gt.item_latent[d][j]);
        }
      }
    }
    *truth = std::move(aligned);
  }
  return ds;
}

std::uint64_t dataset_fingerprint(const DomainPairDataset& ds) {
  std::string all;
  for (const InteractionRecord& r : ds.records) {
    all += serialize_record(r);
    all += '\n';
  }
  return Rng::hash64(all);
}

void write_dataset(const DomainPairDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "# user_id\titem_id\tdomain\ttimestamp\trating_or_label\n";
  for (const InteractionRecord& r : ds.records) out << serialize_record(r) << "\n";
  out.flush();
  if (!out) throw IoError("write failure: " + path);
}

}  // namespace dasl
