#pragma once

// Central finite-difference verification of tape gradients.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sfn/autograd.hpp"
#include "sfn/params.hpp"

namespace sfn {

struct GradCheckEntry {
  std::string parameter;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::string name;
  double tolerance = 0.0;
  std::vector<GradCheckEntry> entries;
  bool passed = false;
  std::string failure;  // set when the loss is non-finite

  double max_rel_error() const;
};

/// Builds a scalar loss from the store on a fresh tape. Must be deterministic.
using LossClosure = std::function<Var(Tape<double>&, const ParamStore<double>&)>;

/// Relative error per scalar is |a - n| / max(|a|, |n|, 1e-5), where `n` is
/// the central difference (f(p + eps) - f(p - eps)) / (2 eps). Passes iff
/// every parameter's maximum is below `tolerance`.
GradCheckReport grad_check(const std::string& name, const LossClosure& loss,
                           ParamStore<double>& params, double tolerance,
                           double epsilon = 1e-5);

/// Checks every tape primitive on random 3 x 5 inputs, the network layers,
/// and the composed LSAG + decoder and focus path at d=8, N_F=8, N_C=4, B=1.
std::vector<GradCheckReport> gradcheck_suite(double tolerance, std::uint64_t seed);

}  // namespace sfn
