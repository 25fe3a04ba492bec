#include "dasl/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "dasl/error.hpp"

namespace dasl {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("key " + key + " needs an integer, got '" + v + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const unsigned long long x = std::stoull(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("key " + key + " needs an unsigned integer, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("key " + key + " needs a number, got '" + v + "'");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Key {
  const char* name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define DASL_INT_KEY(name, field)                                                  \
  Key{name, [](RunConfig& c, const std::string& v) { c.field = parse_int(name, v); }, \
      [](const RunConfig& c) { return std::to_string(c.field); }}
#define DASL_DBL_KEY(name, field)                                                     \
  Key{name, [](RunConfig& c, const std::string& v) { c.field = parse_double(name, v); }, \
      [](const RunConfig& c) { return fmt_double(c.field); }}
#define DASL_STR_KEY(name, field)                                     \
  Key{name, [](RunConfig& c, const std::string& v) { c.field = v; }, \
      [](const RunConfig& c) { return c.field; }}

const std::vector<Key>& key_registry() {
  static const std::vector<Key> keys = {
      DASL_STR_KEY("data.source", data_source),
      DASL_DBL_KEY("data.binarize_threshold", binarize_threshold),
      DASL_INT_KEY("synth.users", synth.n_users),
      DASL_INT_KEY("synth.items_a", synth.n_items_a),
      DASL_INT_KEY("synth.items_b", synth.n_items_b),
      DASL_INT_KEY("synth.latent_dim", synth.latent_dim),
      DASL_DBL_KEY("synth.overlap", synth.overlap_frac),
      DASL_DBL_KEY("synth.noise", synth.noise),
      DASL_INT_KEY("synth.events_per_user", synth.events_per_user),
      DASL_INT_KEY("synth.events_light", synth.events_light),
      DASL_DBL_KEY("synth.gain", synth.gain),
      DASL_INT_KEY("model.d", model.d),
      DASL_INT_KEY("model.d_q", model.d_q),
      DASL_INT_KEY("model.d_v", model.d_v),
      DASL_INT_KEY("model.head_hidden", model.head_hidden),
      DASL_INT_KEY("model.history", model.T),
      DASL_STR_KEY("repr.mode", model.repr.mode),
      DASL_INT_KEY("repr.hidden", model.repr.hidden),
      DASL_INT_KEY("repr.feature_cap", model.repr.feature_cap),
      DASL_INT_KEY("repr.pretrain_epochs", model.repr.pretrain_epochs),
      DASL_INT_KEY("repr.pretrain_batch", model.repr.pretrain_batch),
      DASL_DBL_KEY("repr.pretrain_lr", model.repr.pretrain_lr),
      DASL_DBL_KEY("trainer.lr", trainer.lr),
      DASL_DBL_KEY("trainer.alpha", trainer.alpha),
      DASL_DBL_KEY("trainer.beta", trainer.beta),
      DASL_DBL_KEY("trainer.lambda", trainer.lambda),
      DASL_INT_KEY("trainer.batch", trainer.batch),
      DASL_INT_KEY("trainer.max_epochs", trainer.max_epochs),
      DASL_INT_KEY("trainer.k_neg", trainer.k_neg),
      DASL_INT_KEY("trainer.proj_every", trainer.proj_every),
      DASL_INT_KEY("trainer.n_folds", trainer.n_folds),
      DASL_INT_KEY("trainer.val_negatives", trainer.val_negatives),
      DASL_INT_KEY("trainer.val_cap", trainer.val_cap),
      DASL_DBL_KEY("trainer.plateau_tol", trainer.plateau_tol),
      DASL_INT_KEY("trainer.plateau_window", trainer.plateau_window),
      DASL_INT_KEY("trainer.min_epochs", trainer.min_epochs),
      DASL_INT_KEY("trainer.fold", train_fold),
      DASL_INT_KEY("eval.hr_negatives", eval.hr_negatives),
      DASL_INT_KEY("eval.hr_k", eval.hr_k),
      Key{"run.seed",
          [](RunConfig& c, const std::string& v) { c.seed = parse_u64("run.seed", v); },
          [](const RunConfig& c) { return std::to_string(c.seed); }},
      DASL_STR_KEY("run.ablation", ablation),
      DASL_STR_KEY("run.out", out_dir),
  };
  return keys;
}

#undef DASL_INT_KEY
#undef DASL_DBL_KEY
#undef DASL_STR_KEY

}  // namespace

void RunConfig::finalize() {
  model.variant = variant_from_flag(ablation);
  synth.seed = seed;
}

std::vector<std::pair<std::string, std::string>> RunConfig::echo() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Key& k : key_registry()) out.emplace_back(k.name, k.get(*this));
  return out;
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        " is not key=value: " + stripped);
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    bool known = false;
    for (const Key& k : key_registry()) {
      if (key == k.name) {
        k.set(cfg, value);
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("unknown config key '" + key + "' at line " +
                        std::to_string(line_no));
    }
  }
  cfg.finalize();
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on config file: " + path);
  return from_text(text);
}

}  // namespace dasl
