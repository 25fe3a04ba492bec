#include "dasl/model.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "dasl/error.hpp"
#include "dasl/ops.hpp"

namespace dasl {

std::string variant_name(AblationVariant v) {
  switch (v) {
    case AblationVariant::Dasl: return "DASL";
    case AblationVariant::De: return "DASL-DE";
    case AblationVariant::Da: return "DASL-DA";
    case AblationVariant::SingleDomain: return "SingleDomain";
  }
  throw ContractError("unknown ablation variant");
}

std::string variant_flag(AblationVariant v) {
  switch (v) {
    case AblationVariant::Dasl: return "dasl";
    case AblationVariant::De: return "de";
    case AblationVariant::Da: return "da";
    case AblationVariant::SingleDomain: return "single-domain";
  }
  throw ContractError("unknown ablation variant");
}

AblationVariant variant_from_flag(const std::string& flag) {
  if (flag == "dasl") return AblationVariant::Dasl;
  if (flag == "de") return AblationVariant::De;
  if (flag == "da") return AblationVariant::Da;
  if (flag == "single-domain") return AblationVariant::SingleDomain;
  throw ConfigError("unknown ablation '" + flag + "', expected dasl|de|da|single-domain");
}

DaslModel::DaslModel(const DomainPairDataset& ds, const ModelConfig& cfg, Rng& rng)
    : cfg_(cfg) {
  if (cfg.d < 1 || cfg.d_q < 1 || cfg.d_v < 1 || cfg.head_hidden < 1 || cfg.T < 1) {
    throw ConfigError("model dimensions must be positive");
  }
  ReprConfig rc = cfg.repr;
  rc.d = cfg.d;
  rc.allow_empty_domain = cfg.variant == AblationVariant::SingleDomain;
  Rng repr_rng = rng.fork("repr");
  repr_ = train_autoencoders(ds, rc, repr_rng);
  cfg_.repr = rc;

  map_ = OrthogonalMap(cfg.d);

  const AttentionMode attn_mode =
      (cfg.variant == AblationVariant::Dasl || cfg.variant == AblationVariant::De)
          ? AttentionMode::Dual
          : AttentionMode::Single;
  for (int d = 0; d < 2; ++d) {
    const char* suffix = d == 0 ? "A" : "B";
    Rng gr = rng.fork(std::string("gru_") + suffix);
    Rng ar = rng.fork(std::string("attn_") + suffix);
    Rng hr = rng.fork(std::string("head_") + suffix);
    gru_[d] = GruCell(cfg.d, cfg.d, gr);
    attn_[d] = AttentionBlock(attn_mode, cfg.d, cfg.d_q, cfg.d_v, ar);
    head_[d] = PredictionHead(4 * cfg.d + cfg.d_v, cfg.head_hidden, hr);
  }
}

DaslModel::UserContext DaslModel::user_context(const DomainPairDataset& ds,
                                               const TrainingExample& ex,
                                               ad::Tape* tape) const {
  const int d = domain_index(ex.target);
  const int o = 1 - d;
  const std::vector<int>& hist_t = ex.target_history();
  const std::vector<int>& hist_o = ex.other_history();

  UserContext uc;
  uc.state_target =
      hist_t.empty() ? encode_cold(gru_[d])
                     : encode_sequence(gru_[d], repr_.item_table[d].rows(hist_t, tape), tape);
  if (!cross_states_active()) {
    uc.state_other = {zero_state(cfg_.d), 0, true};
  } else {
    uc.state_other =
        hist_o.empty() ? encode_cold(gru_[static_cast<std::size_t>(o)])
                       : encode_sequence(gru_[static_cast<std::size_t>(o)],
                                         repr_.item_table[o].rows(hist_o, tape), tape);
  }

  const AttentionBlock& block = attn_[d];
  if (block.mode() == AttentionMode::Single) {
    if (hist_t.empty()) {
      uc.ctx = empty_context(block);
    } else {
      const ad::Tensor mat = repr_.item_table[d].rows(hist_t, tape);
      uc.ctx = dual_attention(block, mat, mat, tape);
    }
  } else if (hist_t.empty()) {
    uc.ctx = empty_context(block);
  } else {
    // Dual attention pairs the two histories position by position, most
    // recent together. Where the cross-domain history is shorter, the missing
    // positions contribute zero queries, so with no cross-domain data at all
    // the weights degrade to plain target-history attention.
    const int tc = static_cast<int>(hist_t.size());
    const int have = static_cast<int>(std::min(hist_o.size(), hist_t.size()));
    const ad::Tensor mat_t = repr_.item_table[d].rows(hist_t, tape);
    ad::Tensor mat_o;
    if (have == 0) {
      mat_o = ad::Tensor::zeros(tc, cfg_.d, false);
    } else if (have == tc) {
      mat_o = repr_.item_table[o].rows({hist_o.end() - tc, hist_o.end()}, tape);
    } else {
      std::vector<int> idx(static_cast<std::size_t>(tc), hist_o.front());
      std::copy(hist_o.end() - have, hist_o.end(), idx.end() - have);
      ad::Tensor mask = ad::Tensor::zeros(tc, cfg_.d, false);
      for (int i = tc - have; i < tc; ++i) {
        for (int j = 0; j < cfg_.d; ++j) mask.values()[static_cast<std::size_t>(i * cfg_.d + j)] = 1.0;
      }
      mat_o = ad::mul(repr_.item_table[o].rows(idx, tape), mask, tape);
    }
    uc.ctx = dual_attention(block, mat_t, mat_o, tape);
  }

  const int user_row = ds.user_domain_row[d][ex.user];
  uc.user_emb = user_row >= 0 ? repr_.user_table[d].row(user_row, tape)
                              : ad::Tensor::zeros(1, cfg_.d, false);
  return uc;
}

ad::Tensor DaslModel::score_group(const DomainPairDataset& ds, const TrainingExample& ex,
                                  const std::vector<int>& candidates, ad::Tape* tape) const {
  if (candidates.empty()) throw ContractError("score_group needs at least one candidate");
  const int d = domain_index(ex.target);
  const UserContext uc = user_context(ds, ex, tape);

  ad::Tensor base = ad::concat_cols(uc.user_emb, uc.state_target.h, tape);
  base = ad::concat_cols(base, uc.state_other.h, tape);
  base = ad::concat_cols(base, uc.ctx.values, tape);
  // One shared context row tiled across the group's candidates.
  const std::vector<int> tile(candidates.size(), 0);
  const ad::Tensor features = ad::concat_cols(
      ad::gather_rows(base, tile, tape), repr_.item_table[d].rows(candidates, tape), tape);
  return head_[d].score(features, tape);
}

double DaslModel::score_one(const DomainPairDataset& ds, const TrainingExample& ex) const {
  return score_group(ds, ex, {ex.candidate}, nullptr).item();
}

std::vector<NamedParam> DaslModel::registry() const {
  std::vector<NamedParam> out;
  auto add = [&out](const std::string& name, const ad::Tensor& t) {
    out.push_back({name, t});
  };
  for (int d = 0; d < 2; ++d) {
    const std::string s = d == 0 ? "A" : "B";
    add("user_table." + s, repr_.user_table[d].weights());
    add("item_table." + s, repr_.item_table[d].weights());
  }
  if (repr_.autoencoder_mode) {
    for (int d = 0; d < 2; ++d) {
      const std::string s = d == 0 ? "A" : "B";
      const std::array<const Autoencoder*, 2> aes{&repr_.user_ae[d], &repr_.item_ae[d]};
      const std::array<std::string, 2> kinds{"user_ae.", "item_ae."};
      for (int k = 0; k < 2; ++k) {
        const std::vector<ad::Tensor> ps = aes[k]->parameters();
        for (std::size_t i = 0; i < ps.size(); ++i) {
          add(kinds[k] + s + ".p" + std::to_string(i), ps[i]);
        }
      }
    }
  }
  add("map.X", map_.X());
  const std::array<std::string, 9> gru_names{"W_z", "W_r", "W_h", "U_z", "U_r",
                                             "U_h", "b_z", "b_r", "b_h"};
  for (int d = 0; d < 2; ++d) {
    const std::string s = d == 0 ? "A" : "B";
    const std::vector<ad::Tensor> ps = gru_[d].parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) add("gru." + s + "." + gru_names[i], ps[i]);
  }
  for (int d = 0; d < 2; ++d) {
    const std::string s = d == 0 ? "A" : "B";
    add("attn." + s + ".proj_q_target", attn_[d].proj_q_target());
    if (attn_[d].mode() == AttentionMode::Dual) {
      add("attn." + s + ".proj_q_other", attn_[d].proj_q_other());
    }
    add("attn." + s + ".proj_k", attn_[d].proj_k());
    add("attn." + s + ".proj_v", attn_[d].proj_v());
  }
  for (int d = 0; d < 2; ++d) {
    const std::string s = d == 0 ? "A" : "B";
    const std::vector<ad::Tensor> ps = head_[d].parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      add("head." + s + ".p" + std::to_string(i), ps[i]);
    }
  }
  return out;
}

std::vector<ad::Tensor> DaslModel::parameters() const {
  std::vector<ad::Tensor> out;
  for (const NamedParam& p : registry()) out.push_back(p.tensor);
  return out;
}

std::vector<ad::Tensor> DaslModel::trainable_parameters() const {
  std::vector<ad::Tensor> out;
  for (const NamedParam& p : registry()) {
    if (p.name == "map.X" && !dual_embedding_active()) continue;
    out.push_back(p.tensor);
  }
  return out;
}

namespace {

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof bits);
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& buf, std::size_t& pos) {
  if (pos + 4 > buf.size()) throw CheckpointError("checkpoint truncated in header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  }
  pos += 4;
  return v;
}

double get_f64(const std::string& buf, std::size_t& pos) {
  if (pos + 8 > buf.size()) throw CheckpointError("checkpoint truncated in parameter data");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  }
  pos += 8;
  double v = 0.0;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

constexpr char kMagic[] = "DASL1";
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const DaslModel& model, const std::string& path) {
  const std::vector<NamedParam> reg = model.registry();
  const ModelConfig& cfg = model.config();

  std::string buf;
  buf.append(kMagic, 5);
  put_u32(buf, kVersion);
  put_u32(buf, static_cast<std::uint32_t>(cfg.variant));
  put_u32(buf, cfg.repr.mode == "autoencoder" ? 1 : 0);
  put_u32(buf, static_cast<std::uint32_t>(cfg.d));
  put_u32(buf, static_cast<std::uint32_t>(cfg.d_q));
  put_u32(buf, static_cast<std::uint32_t>(cfg.d_v));
  put_u32(buf, static_cast<std::uint32_t>(cfg.head_hidden));
  put_u32(buf, static_cast<std::uint32_t>(cfg.T));
  put_u32(buf, static_cast<std::uint32_t>(cfg.repr.feature_cap));
  put_u32(buf, static_cast<std::uint32_t>(reg.size()));
  for (const NamedParam& p : reg) {
    put_u32(buf, static_cast<std::uint32_t>(p.tensor.rows()));
    put_u32(buf, static_cast<std::uint32_t>(p.tensor.cols()));
  }
  for (const NamedParam& p : reg) {
    for (double v : p.tensor.values()) put_f64(buf, v);
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  out.flush();
  if (!out) throw IoError("checkpoint write failure: " + path);
}

void load_checkpoint(DaslModel& model, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("checkpoint read failure: " + path);

  if (buf.size() < 5 || buf.compare(0, 5, kMagic, 5) != 0) {
    throw CheckpointError("bad magic bytes; not a DASL1 checkpoint: " + path);
  }
  std::size_t pos = 5;
  const std::uint32_t version = get_u32(buf, pos);
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }

  const ModelConfig& cfg = model.config();
  const std::vector<NamedParam> reg = model.registry();
  struct Field {
    const char* name;
    std::uint32_t expected;
  };
  const Field fields[] = {
      {"variant", static_cast<std::uint32_t>(cfg.variant)},
      {"repr mode", cfg.repr.mode == "autoencoder" ? 1u : 0u},
      {"d", static_cast<std::uint32_t>(cfg.d)},
      {"d_q", static_cast<std::uint32_t>(cfg.d_q)},
      {"d_v", static_cast<std::uint32_t>(cfg.d_v)},
      {"head hidden", static_cast<std::uint32_t>(cfg.head_hidden)},
      {"T", static_cast<std::uint32_t>(cfg.T)},
      {"feature cap", static_cast<std::uint32_t>(cfg.repr.feature_cap)},
      {"block count", static_cast<std::uint32_t>(reg.size())},
  };
  for (const Field& f : fields) {
    const std::uint32_t got = get_u32(buf, pos);
    if (got != f.expected) {
      throw CheckpointError(std::string("checkpoint header mismatch on ") + f.name +
                            ": file has " + std::to_string(got) + ", model needs " +
                            std::to_string(f.expected));
    }
  }
  for (const NamedParam& p : reg) {
    const std::uint32_t rows = get_u32(buf, pos);
    const std::uint32_t cols = get_u32(buf, pos);
    if (rows != static_cast<std::uint32_t>(p.tensor.rows()) ||
        cols != static_cast<std::uint32_t>(p.tensor.cols())) {
      throw CheckpointError("checkpoint shape mismatch on " + p.name + ": file has " +
                            std::to_string(rows) + "x" + std::to_string(cols) +
                            ", model needs " + std::to_string(p.tensor.rows()) + "x" +
                            std::to_string(p.tensor.cols()));
    }
  }
  for (const NamedParam& p : reg) {
    ad::Tensor dst = p.tensor;  // aliasing handle; writes hit the model's storage
    for (double& v : dst.values()) v = get_f64(buf, pos);
  }
  if (pos != buf.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(buf.size() - pos) +
                          " trailing bytes: " + path);
  }
}

}  // namespace dasl
