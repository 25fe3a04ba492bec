#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dasl/tensor.hpp"

namespace dasl {

struct GradCheckOptions {
  double h = 1e-5;         // central-difference step
  double rel_tol = 1e-4;   // pass threshold on relative error
  double abs_floor = 1e-6; // differences below this are noise, not error
  int instances = 20;      // random instances per registered check
};

struct GradCheckResult {
  std::string name;
  double worst_rel_error = 0.0;
  bool passed = true;
};

// Fault-injection hook: adds `offset` to every analytic gradient entry inside
// check_gradients, simulating a broken backward rule. 0 restores honesty.
void set_gradient_corruption(double offset);

// `build_loss` must rebuild the same scalar loss from the params' current
// values (recording on the tape when one is given). Compares tape gradients
// against central finite differences entry by entry and returns the worst
// relative error; |analytic−numeric| <= abs_floor counts as exact.
double check_gradients(const std::function<ad::Tensor(ad::Tape*)>& build_loss,
                       const std::vector<ad::Tensor>& params,
                       const GradCheckOptions& opts = {});

// Every registered finite-difference check (autodiff primitives, autoencoder,
// dual-map losses, GRU unroll, dual attention, prediction head) on seeded
// random instances.
std::vector<GradCheckResult> run_all_gradchecks(std::uint64_t seed,
                                                const GradCheckOptions& opts = {});

}  // namespace dasl
