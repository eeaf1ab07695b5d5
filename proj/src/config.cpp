#include "kgmine/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace kgmine {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

template <typename T>
T parse_number(std::string_view value, const std::string& where) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw Error(where + ": expected a number, got '" + std::string(value) + "'");
  }
  return out;
}

double parse_real(std::string_view value, const std::string& where) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw Error(where + ": expected a number, got '" + std::string(value) + "'");
  }
  return out;
}

std::vector<int> parse_int_list(std::string_view value, const std::string& where) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    auto comma = value.find(',', start);
    if (comma == std::string_view::npos) comma = value.size();
    const auto item = trim(value.substr(start, comma - start));
    if (!item.empty()) out.push_back(parse_number<int>(item, where));
    if (comma == value.size()) break;
    start = comma + 1;
  }
  if (out.empty()) throw Error(where + ": expected a comma-separated list of integers");
  return out;
}

}  // namespace

IntegratorConfig RunConfig::integrator_config(int feature_dim) const {
  IntegratorConfig cfg;
  if (uses_integrator(mode)) cfg.mode = to_integrator_mode(mode);
  cfg.hops = hops;
  cfg.sort_pool_k = sort_pool_k;
  cfg.feature_dim = feature_dim;
  cfg.path_cap = path_cap;
  return cfg;
}

PredictorConfig RunConfig::predictor_config(int feature_dim) const {
  PredictorConfig cfg;
  cfg.mode = mode;
  cfg.integrator = integrator_config(feature_dim);
  cfg.training = training;
  return cfg;
}

RunConfig parse_run_config_text(const std::string& text, const std::string& origin) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const std::string where = origin + ":" + std::to_string(line_no);

    if (view.front() == '[') {
      if (view.back() != ']') throw Error(where + ": unterminated section header");
      section = std::string(trim(view.substr(1, view.size() - 2)));
      if (section != "paths" && section != "integrator" && section != "training" &&
          section != "evaluation" && section != "run") {
        throw Error(where + ": unknown section [" + section + "]");
      }
      continue;
    }

    const auto eq = view.find('=');
    if (eq == std::string_view::npos) throw Error(where + ": expected key = value");
    const std::string key{trim(view.substr(0, eq))};
    const std::string_view value = trim(view.substr(eq + 1));
    if (key.empty()) throw Error(where + ": empty key");

    if (section == "paths") {
      if (key == "edges") {
        config.edges = value;
      } else if (key == "features") {
        config.features = value;
      } else if (key == "classes") {
        config.classes = value;
      } else if (key == "relations") {
        config.relations = value;
      } else if (key == "triplets") {
        config.triplets = value;
      } else if (key == "output_dir") {
        config.output_dir = value;
      } else if (key == "snapshot") {
        config.snapshot = value;
      } else {
        throw Error(where + ": unknown key '" + key + "' in [paths]");
      }
    } else if (section == "integrator") {
      if (key == "mode") {
        config.mode = predictor_mode_from_string(value);
      } else if (key == "hops") {
        config.hops = parse_number<int>(value, where);
      } else if (key == "sort_pool_k") {
        config.sort_pool_k = parse_number<int>(value, where);
      } else if (key == "path_cap") {
        config.path_cap = parse_number<std::size_t>(value, where);
      } else {
        throw Error(where + ": unknown key '" + key + "' in [integrator]");
      }
    } else if (section == "training") {
      if (key == "seed") {
        config.training.seed = parse_number<std::uint64_t>(value, where);
      } else if (key == "learning_rate") {
        config.training.learning_rate = parse_real(value, where);
      } else if (key == "decay_steps") {
        config.training.decay_steps = parse_number<int>(value, where);
      } else if (key == "decay_factor") {
        config.training.decay_factor = parse_real(value, where);
      } else if (key == "max_steps") {
        config.training.max_steps = parse_number<int>(value, where);
      } else if (key == "batch_size") {
        config.training.batch_size = parse_number<int>(value, where);
      } else if (key == "stop_loss") {
        config.training.stop_loss = parse_real(value, where);
      } else {
        throw Error(where + ": unknown key '" + key + "' in [training]");
      }
    } else if (section == "evaluation") {
      if (key == "ks") {
        config.ks = parse_int_list(value, where);
      } else {
        throw Error(where + ": unknown key '" + key + "' in [evaluation]");
      }
    } else if (section == "run") {
      if (key == "threads") {
        config.threads = parse_number<int>(value, where);
      } else {
        throw Error(where + ": unknown key '" + key + "' in [run]");
      }
    } else {
      throw Error(where + ": key outside of any section");
    }
  }
  return config;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config_text(buffer.str(), path);
}

}  // namespace kgmine
