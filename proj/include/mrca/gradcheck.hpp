#pragma once

#include "mrca/network.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mrca {

struct GradcheckOptions {
  std::uint64_t seed = 1;
  int draws = 20;            // independent network/input draws
  int coords_per_block = 3;  // sampled coordinates per block per draw
  int batch = 3;
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Scales the analytic fc2.weight gradient by (1 + corrupt); a negative
  /// control for the oracle itself.
  double corrupt = 0.0;
};

struct BlockError {
  std::string network;  // "policy" | "value"
  std::string block;
  double max_rel_error = 0.0;
  int checked = 0;
  int kinks_skipped = 0;  // coordinates whose stencil crossed a ReLU kink
};

struct GradcheckReport {
  std::vector<BlockError> blocks;
  bool passed = true;
};

/// Central finite differences in double precision against the analytic
/// backward pass. Coordinates whose +/- stencil changes any ReLU activation
/// pattern are redrawn, since the loss is not differentiable there.
GradcheckReport run_gradcheck(const GradcheckOptions& opt);

}  // namespace mrca
