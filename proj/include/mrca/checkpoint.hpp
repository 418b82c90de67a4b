#pragma once

// Binary checkpoint: magic line, u64 header length, JSON header, raw float32
// sections in header order, trailing FNV-1a 64 checksum over all prior bytes.

#include "mrca/adam.hpp"
#include "mrca/network.hpp"
#include "mrca/sensing.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrca {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using TrainScalar = float;

struct Checkpoint {
  int iteration = 0;  // completed iterations
  int stage = 1;
  double beta = 1.0;
  PolicyNet<TrainScalar> policy;
  ValueNet<TrainScalar> value;
  AdamState<TrainScalar> policy_adam;
  AdamState<TrainScalar> value_adam;
  RunningNormalizer normalizer;
  std::string trainer_rng;               // textual engine state
  std::vector<std::string> env_rngs;
  std::vector<int> recent_outcomes;      // 1 = arrived, oldest first
  nlohmann::json config;                 // resolved run config
};

std::uint64_t fnv1a64(const char* data, std::size_t n,
                      std::uint64_t h = 0xcbf29ce484222325ULL);

/// Writes through a temporary file and renames, so readers never observe a
/// partial checkpoint.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json normalizer_to_json(const RunningNormalizer& n);
RunningNormalizer normalizer_from_json(const nlohmann::json& j);

}  // namespace mrca
