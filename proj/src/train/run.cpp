#include "dtii/train/run.hpp"

#include <stdexcept>
#include <zlib.h>

namespace dtii::train {

using core::Rng;

void RunSchedule::validate() const {
  if (wm_steps < 0) throw std::invalid_argument("training budget must be >= 0");
  if (env_steps_per_update < 1) throw std::invalid_argument("env_steps_per_update must be >= 1");
  if (prefill < 0) throw std::invalid_argument("prefill must be >= 0");
  if (ac_every < 1) throw std::invalid_argument("ac_every must be >= 1");
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be >= 0");
  if (epsilon < 0 || epsilon > 1) throw std::invalid_argument("epsilon must lie in [0, 1]");
}

TrainingRun::TrainingRun(const model::WorldModelConfig& model_cfg, const TrainConfig& train_cfg,
                         const RunSchedule& schedule, env::Task task, const env::EnvOptions& env_options,
                         std::uint64_t seed)
    : model_cfg_(model_cfg),
      train_cfg_(train_cfg),
      schedule_(schedule),
      wm_(WorldModelParams::init(model_cfg, Rng::derive(seed, 10))),
      ac_(ActorCriticParams::init(model_cfg, Rng::derive(seed, 11))),
      wm_trainer_(wm_, train_cfg, Rng::derive(seed, 12)),
      ac_trainer_(ac_, train_cfg, Rng::derive(seed, 13)),
      collector_(env::make_environment(task, env_options)),
      collect_rng_(Rng::derive(seed, 14)) {
  schedule_.validate();
  if (collector_.environment().observation_shape() != model_cfg.obs_shape)
    throw std::invalid_argument("model observation shape " + core::shape_str(model_cfg.obs_shape) +
                                " does not match the environment " +
                                core::shape_str(collector_.environment().observation_shape()));
}

bool TrainingRun::at_checkpoint() const {
  return schedule_.checkpoint_every > 0 && steps_ > 0 && steps_ % schedule_.checkpoint_every == 0;
}

void TrainingRun::step() {
  if (finished()) return;
  if (steps_ == 0 && buffer_.steps() == 0) {
    collector_.collect(wm_, ac_, buffer_, schedule_.prefill, collect_rng_, 1.0);
    while (!buffer_.can_sample(train_cfg_.seq_len)) collector_.collect(wm_, ac_, buffer_, 100, collect_rng_, 1.0);
  }
  collector_.collect(wm_, ac_, buffer_, schedule_.env_steps_per_update, collect_rng_, schedule_.epsilon);
  last_ = wm_trainer_.step(buffer_);
  losses_.push_back(last_.loss.total);
  if (steps_ % schedule_.ac_every == 0) last_ac_ = ac_trainer_.step(wm_, wm_trainer_.last_posteriors());
  ++steps_;
  if (at_checkpoint()) collector_.truncate();
}

namespace {

constexpr char kStateMagic[4] = {'R', 'S', 'U', 'M'};
constexpr std::uint32_t kStateVersion = 1;

void write_adam(io::Writer& w, const core::AdamState& s) {
  w.i64(s.step);
  w.u32(static_cast<std::uint32_t>(s.m.size()));
  for (const auto& a : s.m) w.array(a);
  for (const auto& a : s.v) w.array(a);
}

void read_adam(io::Reader& r, core::AdamState& s) {
  s.step = r.i64();
  const auto n = r.u32();
  s.m.clear();
  s.v.clear();
  for (std::uint32_t i = 0; i < n; ++i) s.m.push_back(r.array());
  for (std::uint32_t i = 0; i < n; ++i) s.v.push_back(r.array());
}

std::string deflate(const std::string& raw) {
  uLongf size = compressBound(raw.size());
  std::string out(size, '\0');
  if (compress2(reinterpret_cast<Bytef*>(out.data()), &size, reinterpret_cast<const Bytef*>(raw.data()), raw.size(),
                Z_BEST_SPEED) != Z_OK)
    throw std::runtime_error("state compression failed");
  out.resize(size);
  return out;
}

std::string inflate(const std::string& packed, std::uint64_t raw_size) {
  std::string out(raw_size, '\0');
  uLongf size = raw_size;
  if (uncompress(reinterpret_cast<Bytef*>(out.data()), &size, reinterpret_cast<const Bytef*>(packed.data()),
                 packed.size()) != Z_OK ||
      size != raw_size)
    throw io::DataError("training state is corrupt");
  return out;
}

}  // namespace

std::string TrainingRun::encode_state() const {
  io::Writer w;
  w.str(io::encode_checkpoint(checkpoint()));
  w.u32(static_cast<std::uint32_t>(losses_.size()));
  for (double l : losses_) w.f64(l);

  const auto& wt = wm_trainer_;
  const auto& at = ac_trainer_;
  write_adam(w, wt.main_state());
  w.u32(static_cast<std::uint32_t>(wt.member_states().size()));
  for (const auto& s : wt.member_states()) write_adam(w, s);
  write_adam(w, at.actor_state());
  write_adam(w, at.critic_state());

  w.str(wt.rng().state());
  for (const auto& r : wt.member_rngs()) w.str(r.state());
  w.str(at.rng().state());
  w.str(collect_rng_.state());

  const auto& pool = wt.pool();
  w.u64(pool.capacity);
  w.u64(pool.next);
  w.u64(pool.h.size());
  for (std::size_t i = 0; i < pool.h.size(); ++i) {
    w.array(pool.h[i]);
    w.array(pool.z[i]);
  }

  w.u64(buffer_.capacity());
  w.u64(buffer_.episodes().size());
  for (const auto& e : buffer_.episodes()) {
    w.u32(static_cast<std::uint32_t>(e.size()));
    for (int t = 0; t < e.size(); ++t) {
      w.array(e.obs[t]);
      w.u32(static_cast<std::uint32_t>(e.actions[t]));
      w.f32(e.rewards[t]);
      w.f32(e.conts[t]);
    }
  }
  w.u64(collector_.episodes_finished());

  const std::string raw = w.take();
  io::Writer out;
  out.bytes(kStateMagic, 4);
  out.u32(kStateVersion);
  out.i64(steps_);
  out.u64(raw.size());
  out.str(deflate(raw));
  out.u32(io::crc32_of(out.data(), out.data().size()));
  return out.take();
}

void TrainingRun::restore_state(const std::string& bytes) {
  if (bytes.size() < 24) throw io::DataError("training state is truncated");
  const std::size_t body = bytes.size() - 4;
  io::Reader head(bytes);
  char magic[4];
  head.bytes(magic, 4);
  if (std::string(magic, 4) != std::string(kStateMagic, 4)) throw io::DataError("not a training state file");
  if (head.u32() != kStateVersion) throw io::DataError("unsupported training state version");
  const std::int64_t steps = head.i64();
  const std::uint64_t raw_size = head.u64();
  const std::string packed = head.str();
  if (head.position() != body || head.u32() != io::crc32_of(bytes, body))
    throw io::DataError("training state checksum mismatch");
  const std::string raw = inflate(packed, raw_size);

  io::Reader r(raw);
  auto ck = io::decode_checkpoint(r.str(), model_cfg_);
  if (ck.ac.units != ac_.units) throw io::DataError("actor-critic width differs from the configuration");
  wm_.set = std::move(ck.wm.set);
  ac_.set = std::move(ck.ac.set);
  losses_.assign(r.u32(), 0.0);
  for (auto& l : losses_) l = r.f64();

  read_adam(r, wm_trainer_.main_state());
  const auto members = r.u32();
  if (members != wm_trainer_.member_states().size()) throw io::DataError("ensemble size differs");
  for (auto& s : wm_trainer_.member_states()) read_adam(r, s);
  read_adam(r, ac_trainer_.actor_state());
  read_adam(r, ac_trainer_.critic_state());

  wm_trainer_.rng().set_state(r.str());
  for (auto& g : wm_trainer_.member_rngs()) g.set_state(r.str());
  ac_trainer_.rng().set_state(r.str());
  collect_rng_.set_state(r.str());

  auto& pool = wm_trainer_.pool();
  pool.capacity = r.u64();
  pool.next = r.u64();
  const auto pool_size = r.u64();
  pool.h.clear();
  pool.z.clear();
  for (std::uint64_t i = 0; i < pool_size; ++i) {
    pool.h.push_back(r.array());
    pool.z.push_back(r.array());
  }

  buffer_ = ReplayBuffer(r.u64());
  const auto episodes = r.u64();
  for (std::uint64_t i = 0; i < episodes; ++i) {
    Episode e;
    const auto len = r.u32();
    for (std::uint32_t t = 0; t < len; ++t) {
      auto o = r.array();
      const int a = static_cast<int>(r.u32());
      const float rew = r.f32();
      const float c = r.f32();
      e.push(std::move(o), a, rew, c);
    }
    buffer_.add(std::move(e));
  }
  collector_.set_episodes_finished(r.u64());
  if (!r.at_end()) throw io::DataError("trailing bytes in training state");
  collector_.truncate();
  steps_ = steps;
}

}  // namespace dtii::train
