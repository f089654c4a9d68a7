#include "dtii/io/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <zlib.h>

namespace dtii::io {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("short write to " + path);
}

std::uint32_t crc32_of(const std::string& data, std::size_t length) {
  uLong crc = crc32(0L, Z_NULL, 0);
  const auto* p = reinterpret_cast<const Bytef*>(data.data());
  std::size_t done = 0;
  while (done < length) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(length - done, 1u << 30));
    crc = crc32(crc, p + done, chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

namespace {

void write_blocks(Writer& w, const core::ParamSet& set, const std::string& prefix) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    w.str(prefix + set.names[i]);
    w.array(set.arrays[i]);
  }
}

void read_blocks(Reader& r, core::ParamSet& set, const std::string& prefix) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::string name = r.str();
    if (name != prefix + set.names[i])
      throw DataError("checkpoint block '" + name + "' where '" + prefix + set.names[i] + "' was expected");
    auto a = r.array();
    if (a.shape() != set.arrays[i].shape())
      throw DataError("checkpoint block '" + name + "' has shape " + core::shape_str(a.shape()) + ", expected " +
                      core::shape_str(set.arrays[i].shape()));
    set.arrays[i] = std::move(a);
  }
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
  const auto& cfg = c.wm.config;
  Writer w;
  w.bytes(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.i64(c.step);
  w.u32(static_cast<std::uint32_t>(cfg.obs_shape.size()));
  for (int d : cfg.obs_shape) w.u32(static_cast<std::uint32_t>(d));
  for (int d : {cfg.actions, cfg.deter, cfg.groups, cfg.classes, cfg.units, cfg.ensemble, c.ac.units})
    w.u32(static_cast<std::uint32_t>(d));
  w.u32(static_cast<std::uint32_t>(c.wm.set.size() + c.ac.set.size()));
  write_blocks(w, c.wm.set, "wm/");
  write_blocks(w, c.ac.set, "ac/");
  w.u32(crc32_of(w.data(), w.data().size()));
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::optional<model::WorldModelConfig>& expect) {
  if (bytes.size() < 12) throw DataError("checkpoint is truncated");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[body + i])) << (8 * i);
  if (stored != crc32_of(bytes, body)) throw DataError("checkpoint checksum mismatch");
  Reader r(bytes);
  char magic[4];
  r.bytes(magic, 4);
  if (std::string(magic, 4) != std::string(kCheckpointMagic, 4)) throw DataError("not a checkpoint file");
  const auto version = r.u32();
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.step = r.i64();
  model::WorldModelConfig cfg;
  const auto rank = r.u32();
  if (rank > 4) throw DataError("implausible observation rank");
  cfg.obs_shape.clear();
  for (std::uint32_t i = 0; i < rank; ++i) cfg.obs_shape.push_back(static_cast<int>(r.u32()));
  cfg.actions = static_cast<int>(r.u32());
  cfg.deter = static_cast<int>(r.u32());
  cfg.groups = static_cast<int>(r.u32());
  cfg.classes = static_cast<int>(r.u32());
  cfg.units = static_cast<int>(r.u32());
  cfg.ensemble = static_cast<int>(r.u32());
  const int ac_units = static_cast<int>(r.u32());
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw DataError(std::string("checkpoint dimensions are invalid: ") + e.what());
  }
  if (expect && !(*expect == cfg)) throw DataError("checkpoint dimensions do not match the configuration");
  c.wm = model::WorldModelParams::zeros(cfg);
  c.ac = train::ActorCriticParams::init(cfg, 0, ac_units);
  const auto blocks = r.u32();
  if (blocks != c.wm.set.size() + c.ac.set.size()) throw DataError("checkpoint block count mismatch");
  read_blocks(r, c.wm.set, "wm/");
  read_blocks(r, c.ac.set, "ac/");
  if (r.position() != body) throw DataError("trailing bytes in checkpoint");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) { write_file(path, encode_checkpoint(c)); }

Checkpoint load_checkpoint(const std::string& path, const std::optional<model::WorldModelConfig>& expect) {
  return decode_checkpoint(read_file(path), expect);
}

}  // namespace dtii::io
