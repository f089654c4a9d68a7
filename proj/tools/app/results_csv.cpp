#include "app/results_csv.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>
#include <fmt/format.h>
#include <sstream>

#include "dtii/io/binary.hpp"

namespace dtii::app {

namespace {

const char* kMagic = "# dtii-results";

std::string num(double v) { return fmt::format("{:.17g}", v); }

double to_double(const std::string& s) {
  try {
    return boost::lexical_cast<double>(s);
  } catch (const boost::bad_lexical_cast&) {
    throw io::DataError("bad number '" + s + "' in results file");
  }
}

std::int64_t to_int(const std::string& s) {
  try {
    return boost::lexical_cast<std::int64_t>(s);
  } catch (const boost::bad_lexical_cast&) {
    throw io::DataError("bad integer '" + s + "' in results file");
  }
}

}  // namespace

std::vector<std::string> step_columns() {
  return {"seed",      "step",      "reward",    "mse_pre",   "psnr_pre",       "ssim_pre", "mse_post",
          "psnr_post", "ssim_post", "obj_iter0", "obj_itern", "grad_norm_mean", "flags"};
}

std::string format_results(const ResultsFile& f) {
  std::ostringstream os;
  os << kMagic << " v" << kResultsVersion << '\n';
  os << "# config_hash=" << f.meta.config_hash << '\n';
  os << "# checkpoint=" << f.meta.checkpoint << '\n';
  os << "# objective=" << ii::objective_name(f.meta.objective) << '\n';
  os << "# rollout=" << f.meta.rollout << '\n';
  os << "# alpha=" << num(f.meta.alpha) << '\n';
  for (const auto& [k, v] : f.meta.extra) os << "# " << k << '=' << v << '\n';
  os << "kind," << boost::join(step_columns(), ",") << ",action\n";
  for (const auto& e : f.episodes) {
    for (const auto& s : e.steps)
      os << "step," << e.seed << ',' << s.step << ',' << num(s.reward) << ',' << num(s.pre.mse) << ','
         << num(s.pre.psnr) << ',' << num(s.pre.ssim) << ',' << num(s.post.mse) << ',' << num(s.post.psnr) << ','
         << num(s.post.ssim) << ',' << num(s.obj_iter0) << ',' << num(s.obj_itern) << ',' << num(s.grad_norm_mean)
         << ',' << s.flags << ',' << s.action << '\n';
    // Summary rows reuse the step columns: step holds the length, reward the score.
    os << "episode," << e.seed << ',' << e.length() << ',' << num(e.score) << ','
       << num(eval::episode_metric(e, "mse_pre")) << ',' << num(eval::episode_metric(e, "psnr_pre")) << ','
       << num(eval::episode_metric(e, "ssim_pre")) << ',' << num(eval::episode_metric(e, "mse_post")) << ','
       << num(eval::episode_metric(e, "psnr_post")) << ',' << num(eval::episode_metric(e, "ssim_post")) << ",,,,"
       << e.flags << ",\n";
  }
  return os.str();
}

ResultsFile parse_results(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || !boost::starts_with(line, kMagic)) throw io::DataError("not a results file");
  const std::string version = boost::trim_copy(line.substr(std::string(kMagic).size()));
  if (version != "v" + std::to_string(kResultsVersion))
    throw io::DataError("unsupported results version '" + version + "'");

  ResultsFile f;
  bool header = false;
  eval::EpisodeRecord* open = nullptr;
  const std::string expected = "kind," + boost::join(step_columns(), ",") + ",action";
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = boost::trim_copy(line.substr(1, eq - 1));
      const std::string value = line.substr(eq + 1);
      if (key == "config_hash")
        f.meta.config_hash = value;
      else if (key == "checkpoint")
        f.meta.checkpoint = value;
      else if (key == "objective")
        f.meta.objective = ii::parse_objective(value);
      else if (key == "rollout")
        f.meta.rollout = static_cast<int>(to_int(value));
      else if (key == "alpha")
        f.meta.alpha = to_double(value);
      else
        f.meta.extra[key] = value;
      continue;
    }
    if (!header) {
      if (line != expected) throw io::DataError("results columns do not match the schema");
      header = true;
      continue;
    }
    std::vector<std::string> cols;
    boost::split(cols, line, boost::is_any_of(","));
    if (cols.size() != step_columns().size() + 2) throw io::DataError("results row has the wrong column count");
    const auto seed = static_cast<std::uint64_t>(to_int(cols[1]));
    if (cols[0] == "step") {
      if (!open || open->seed != seed) {
        f.episodes.emplace_back();
        open = &f.episodes.back();
        open->seed = seed;
        open->refined = f.meta.objective != ii::Objective::None;
      }
      eval::StepRecord s;
      s.step = static_cast<int>(to_int(cols[2]));
      s.reward = to_double(cols[3]);
      s.pre = {to_double(cols[4]), to_double(cols[5]), to_double(cols[6])};
      s.post = {to_double(cols[7]), to_double(cols[8]), to_double(cols[9])};
      s.obj_iter0 = to_double(cols[10]);
      s.obj_itern = to_double(cols[11]);
      s.grad_norm_mean = to_double(cols[12]);
      s.flags = static_cast<int>(to_int(cols[13]));
      s.action = static_cast<int>(to_int(cols[14]));
      open->steps.push_back(s);
    } else if (cols[0] == "episode") {
      if (!open || open->seed != seed) {
        f.episodes.emplace_back();
        open = &f.episodes.back();
        open->seed = seed;
      }
      if (to_int(cols[2]) != open->length()) throw io::DataError("episode summary length disagrees with its steps");
      open->score = to_double(cols[3]);
      open->flags = static_cast<int>(to_int(cols[13]));
      open = nullptr;
    } else {
      throw io::DataError("unknown row kind '" + cols[0] + "'");
    }
  }
  if (!header) throw io::DataError("results file has no column header");
  if (open) throw io::DataError("results file ends inside an episode");
  return f;
}

void write_results(const std::string& path, const ResultsFile& f) { io::write_file(path, format_results(f)); }

ResultsFile read_results(const std::string& path) { return parse_results(io::read_file(path)); }

}  // namespace dtii::app
