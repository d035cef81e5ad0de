#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "topoconv/grad_check.hpp"

namespace topoconv {

struct GradCheckCase {
  std::string name;
  GradCheckReport report;
};

/// Finite-difference checks for every differentiable op and the MiniNet.
///
/// Smooth ops are held to 1e-6, ops with kinks (ReLU, bilinear sampling, max
/// pool) to 1e-4; inputs are drawn at least 1e-3 away from kinks.
std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed = 7);

}  // namespace topoconv
