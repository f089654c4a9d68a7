#include "app/config.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <fstream>
#include <functional>
#include <sstream>

namespace dtii::app {

namespace {

template <class T>
T parse_value(const std::string& key, const std::string& text) {
  try {
    return boost::lexical_cast<T>(boost::trim_copy(text));
  } catch (const boost::bad_lexical_cast&) {
    throw ConfigError("bad value '" + text + "' for " + key);
  }
}

bool parse_bool(const std::string& key, const std::string& text) {
  const auto t = boost::to_lower_copy(boost::trim_copy(text));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("bad boolean '" + text + "' for " + key);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  const auto t = boost::trim_copy(text);
  if (t.empty()) return parts;
  boost::split(parts, t, boost::is_any_of(","));
  for (auto& p : parts) boost::trim(p);
  return parts;
}

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

double parse_double(const std::string& key, const std::string& text) {
  const auto t = boost::to_lower_copy(boost::trim_copy(text));
  if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  return parse_value<double>(key, t);
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

template <class T>
Field num(const std::string& section, const std::string& key, T& ref) {
  const std::string name = section + "." + key;
  return {section, key, [&ref] {
            if constexpr (std::is_floating_point_v<T>)
              return fmt_double(ref);
            else
              return std::to_string(ref);
          },
          [&ref, name](const std::string& v) {
            if constexpr (std::is_floating_point_v<T>)
              ref = parse_double(name, v);
            else
              ref = parse_value<T>(name, v);
          }};
}

std::vector<Field> fields(RunConfig& c) {
  auto& m = c.model;
  auto& t = c.train;
  auto& s = c.schedule;
  auto& i = c.ii;
  auto& g = c.sweep;
  return {
      {"run", "task", [&c] { return env::task_name(c.task); },
       [&c](const std::string& v) {
         try {
           c.task = env::parse_task(boost::trim_copy(v));
         } catch (const std::invalid_argument& e) {
           throw ConfigError(e.what());
         }
       }},
      num("run", "horizon", c.horizon),
      num("run", "seed", c.seed),
      {"run", "out", [&c] { return c.out; }, [&c](const std::string& v) { c.out = boost::trim_copy(v); }},
      num("model", "deter", m.deter),
      num("model", "groups", m.groups),
      num("model", "classes", m.classes),
      num("model", "units", m.units),
      num("model", "ensemble", m.ensemble),
      num("train", "steps", s.wm_steps),
      num("train", "env_steps_per_update", s.env_steps_per_update),
      num("train", "prefill", s.prefill),
      num("train", "ac_every", s.ac_every),
      num("train", "checkpoint_every", s.checkpoint_every),
      num("train", "epsilon", s.epsilon),
      num("train", "batch", t.batch),
      num("train", "seq_len", t.seq_len),
      num("train", "wm_lr", t.wm_lr),
      num("train", "actor_lr", t.actor_lr),
      num("train", "critic_lr", t.critic_lr),
      num("train", "kl_scale", t.kl_scale),
      num("train", "free_bits", t.free_bits),
      num("train", "kl_balance", t.kl_balance),
      num("train", "ensemble_batch", t.ensemble_batch),
      num("train", "pool_capacity", t.pool_capacity),
      num("train", "imag_horizon", t.imag_horizon),
      num("train", "imag_starts", t.imag_starts),
      num("train", "gamma", t.gamma),
      num("train", "lambda", t.lambda),
      num("train", "actor_entropy", t.actor_entropy),
      num("train", "grad_clip", t.grad_clip),
      {"ii", "objective", [&i] { return boost::to_lower_copy(ii::objective_name(i.objective)); },
       [&i](const std::string& v) {
         try {
           i.objective = ii::parse_objective(boost::trim_copy(v));
         } catch (const std::invalid_argument& e) {
           throw ConfigError(e.what());
         }
       }},
      num("ii", "iterations", i.iterations),
      num("ii", "samples", i.samples),
      num("ii", "rollout", i.rollout),
      num("ii", "alpha", i.alpha),
      num("ii", "reg_free_bits", i.reg_free_bits),
      num("ii", "reg_scale", i.reg_scale),
      num("ii", "obj_scale", i.obj_scale),
      {"ii", "common_random_numbers", [&i] { return std::string(i.common_random_numbers ? "true" : "false"); },
       [&i](const std::string& v) { i.common_random_numbers = parse_bool("ii.common_random_numbers", v); }},
      {"eval", "seeds",
       [&c] {
         std::vector<std::string> parts;
         for (auto v : c.seeds) parts.push_back(std::to_string(v));
         return boost::join(parts, ",");
       },
       [&c](const std::string& v) { c.seeds = parse_seed_range(v); }},
      {"eval", "deterministic", [&c] { return std::string(c.deterministic ? "true" : "false"); },
       [&c](const std::string& v) { c.deterministic = parse_bool("eval.deterministic", v); }},
      {"eval", "thresholds",
       [&c] {
         std::vector<std::string> parts;
         for (double v : c.thresholds) parts.push_back(fmt_double(v));
         return boost::join(parts, ",");
       },
       [&c](const std::string& v) { c.thresholds = parse_thresholds(v); }},
      {"sweep", "objectives",
       [&g] {
         std::vector<std::string> parts;
         for (auto o : g.objectives) parts.push_back(boost::to_lower_copy(ii::objective_name(o)));
         return boost::join(parts, ",");
       },
       [&g](const std::string& v) {
         g.objectives.clear();
         for (const auto& p : split_list(v)) {
           try {
             g.objectives.push_back(ii::parse_objective(p));
           } catch (const std::invalid_argument& e) {
             throw ConfigError(e.what());
           }
         }
       }},
      {"sweep", "rollouts",
       [&g] {
         std::vector<std::string> parts;
         for (int r : g.rollouts) parts.push_back(std::to_string(r));
         return boost::join(parts, ",");
       },
       [&g](const std::string& v) {
         g.rollouts.clear();
         for (const auto& p : split_list(v)) g.rollouts.push_back(parse_value<int>("sweep.rollouts", p));
       }},
      {"sweep", "checkpoints", [&g] { return boost::join(g.checkpoints, ","); },
       [&g](const std::string& v) { g.checkpoints = split_list(v); }},
      {"sweep", "alpha_grid",
       [&g] {
         std::vector<std::string> parts;
         for (double a : g.alpha_grid) parts.push_back(fmt_double(a));
         return boost::join(parts, ",");
       },
       [&g](const std::string& v) {
         g.alpha_grid.clear();
         for (const auto& p : split_list(v)) g.alpha_grid.push_back(parse_double("sweep.alpha_grid", p));
       }},
      {"sweep", "calibration_seeds",
       [&g] {
         std::vector<std::string> parts;
         for (auto v : g.calibration_seeds) parts.push_back(std::to_string(v));
         return boost::join(parts, ",");
       },
       [&g](const std::string& v) { g.calibration_seeds = parse_seed_range(v); }},
  };
}

}  // namespace

std::vector<std::uint64_t> parse_seed_range(const std::string& spec) {
  std::vector<std::uint64_t> out;
  for (const auto& part : split_list(spec)) {
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_value<std::uint64_t>("seeds", part));
      continue;
    }
    const auto a = parse_value<std::uint64_t>("seeds", part.substr(0, dots));
    const auto b = parse_value<std::uint64_t>("seeds", part.substr(dots + 2));
    if (b < a) throw ConfigError("seed range '" + part + "' is empty");
    for (auto s = a; s <= b; ++s) out.push_back(s);
  }
  if (out.empty()) throw ConfigError("seed list is empty");
  return out;
}

std::vector<double> parse_thresholds(const std::string& spec) {
  std::vector<double> out;
  for (const auto& p : split_list(spec)) out.push_back(parse_double("thresholds", p));
  if (out.empty()) throw ConfigError("threshold list is empty");
  return out;
}

eval::EnvSpec RunConfig::env_spec() const {
  eval::EnvSpec s;
  s.task = task;
  s.options.horizon = horizon;
  return s;
}

void RunConfig::finalize() {
  if (horizon < 0) throw ConfigError("run.horizon must be >= 0");
  auto env = env::make_environment(task, env_spec().options);
  model.obs_shape = env->observation_shape();
  model.actions = env->action_count();
  try {
    model.validate();
    train.validate();
    schedule.validate();
    ii.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (seeds.empty()) throw ConfigError("eval.seeds is empty");
  for (int r : sweep.rollouts)
    if (r < 0) throw ConfigError("sweep.rollouts must be >= 0");
}

std::string RunConfig::canonical() const {
  std::ostringstream os;
  std::string section;
  for (const auto& f : fields(const_cast<RunConfig&>(*this))) {
    if (f.section != section) {
      section = f.section;
      os << '[' << section << "]\n";
    }
    os << f.key << " = " << f.get() << '\n';
  }
  return os.str();
}

std::string RunConfig::hash() const {
  RunConfig c = *this;
  c.out.clear();
  const std::string text = c.canonical();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return fmt::format("{:016x}", h);
}

RunConfig default_config() {
  RunConfig c;
  c.model.deter = 64;
  c.model.units = 64;
  c.model.groups = 8;
  c.model.classes = 8;
  c.model.ensemble = 8;
  c.finalize();
  return c;
}

RunConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream is(text);
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.message());
  }
  RunConfig c = default_config();
  auto table = fields(c);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      auto it = std::find_if(table.begin(), table.end(),
                             [&](const Field& f) { return f.section == section && f.key == key; });
      if (it == table.end()) throw ConfigError("unknown config key " + section + "." + key);
      it->set(value.data());
    }
  }
  c.finalize();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace dtii::app
