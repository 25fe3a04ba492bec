#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dasl/data.hpp"
#include "dasl/eval.hpp"
#include "dasl/model.hpp"
#include "dasl/trainer.hpp"

namespace dasl {

// Flat key=value run configuration with dotted section prefixes. Every key
// has a default; unknown keys are rejected at parse time.
struct RunConfig {
  std::string data_source = "synthetic";  // "synthetic" or a dataset path
  double binarize_threshold = 4.0;
  SynthConfig synth;
  ModelConfig model;
  TrainConfig trainer;
  EvalConfig eval;
  int train_fold = 0;  // held-out fold for single training runs
  std::uint64_t seed = 42;
  std::string ablation = "dasl";
  std::string out_dir = "out";

  // Re-derives the dependent fields (model variant from the ablation flag,
  // generator seed from the run seed). Call after direct field edits.
  void finalize();

  // Resolved key=value pairs in registry order, for manifests.
  std::vector<std::pair<std::string, std::string>> echo() const;

  static RunConfig from_text(const std::string& text);
  static RunConfig from_file(const std::string& path);
};

}  // namespace dasl
