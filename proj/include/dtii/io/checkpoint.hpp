#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "dtii/io/binary.hpp"
#include "dtii/train/actor_critic.hpp"

namespace dtii::io {

inline constexpr char kCheckpointMagic[4] = {'W', 'M', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::int64_t step = 0;
  model::WorldModelParams wm;
  train::ActorCriticParams ac;
};

/// Header, one named block per parameter array ("wm/" and "ac/" prefixes),
/// then a CRC-32 of every preceding byte.
std::string encode_checkpoint(const Checkpoint& c);
/// Throws DataError on a bad magic, version, checksum or layout, and when the
/// stored dimensions differ from `expect`.
Checkpoint decode_checkpoint(const std::string& bytes, const std::optional<model::WorldModelConfig>& expect = {});

void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path, const std::optional<model::WorldModelConfig>& expect = {});

}  // namespace dtii::io
