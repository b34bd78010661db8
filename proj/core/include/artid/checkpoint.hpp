#ifndef ARTID_CHECKPOINT_HPP_
#define ARTID_CHECKPOINT_HPP_

#include <cstdint>
#include <string>

#include "artid/features.hpp"
#include "artid/net.hpp"

namespace artid {

// On-disk training state. Layout: 8-byte magic, version u32, length-prefixed
// JSON metadata (config, tensor shapes, seed), then the parameter values as
// raw little-endian f32 in declared layer order; optimizer accumulators, when
// present, follow in the same order.
struct Checkpoint {
  NetworkConfig net;
  FeatureConfig features;
  std::uint64_t seed = 0;
  Parameters<float> params;
  bool has_optimizer = false;
  OptimizerState<float> optimizer;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Rejects a checkpoint whose network shape disagrees with what the caller
// was configured to expect.
void require_compatible(const Checkpoint& ck, const NetworkConfig& expected);

}  // namespace artid

#endif  // ARTID_CHECKPOINT_HPP_
