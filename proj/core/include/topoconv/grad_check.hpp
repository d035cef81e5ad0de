#pragma once

#include <functional>
#include <string>
#include <vector>

#include "topoconv/autodiff.hpp"

namespace topoconv {

struct GradCheckEntry {
  std::string name;
  double max_abs_error = 0.0;
  // max over coordinates of |analytic| + |numeric|
  double scale = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct NamedParameter {
  std::string name;
  Parameter* param;
};

// Records a scalar loss on the given tape. Called once for the analytic pass
// and twice per perturbed coordinate.
using LossBuilder = std::function<Var(Tape&)>;

/// Central finite differences against reverse-mode gradients.
///
/// For every listed parameter the relative error is
/// max_i |a_i - n_i| / max(floor, max_i(|a_i| + |n_i|)), where floor is 1e-3 of
/// the largest parameter scale in the check (at least 1e-8), so parameters
/// with an identically zero gradient (a bias feeding batch norm) are measured
/// against finite-difference noise at the loss's own scale. The report keeps
/// the worst parameter. step must lie in [1e-7, 1e-3]. Parameter gradients are
/// reset before and after.
GradCheckReport grad_check(const LossBuilder& loss, const std::vector<NamedParameter>& params, double step = 1e-5,
                           double tolerance = 1e-4);

}  // namespace topoconv
