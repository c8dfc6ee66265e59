#include "fira/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "fira/error.hpp"

namespace fira {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  T value{};
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError("'" + key + "': cannot parse '" + t + "' as a number");
  }
  return value;
}

template <typename T>
std::vector<T> parse_number_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  for (const std::string& item : split_list(text)) out.push_back(parse_number<T>(key, item));
  return out;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError("'" + key + "': expected true or false, got '" + t + "'");
}

// Converts ParameterError from enum parsers into ConfigError.
template <typename F>
auto config_guard(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ParameterError& e) {
    throw ConfigError("'" + key + "': " + e.what());
  }
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, std::map<std::string, Setter>>& setters() {
  static const std::map<std::string, std::map<std::string, Setter>> table = {
      {"run",
       {
           {"steps", [](RunConfig& c, const std::string& v) {
              c.train.steps = parse_number<std::int64_t>("run.steps", v);
            }},
           {"seed", [](RunConfig& c, const std::string& v) {
              c.train.seed = parse_number<std::uint64_t>("run.seed", v);
            }},
           {"warmup_fraction", [](RunConfig& c, const std::string& v) {
              c.train.warmup_fraction = parse_number<double>("run.warmup_fraction", v);
            }},
       }},
      {"task",
       {
           {"kind", [](RunConfig& c, const std::string& v) {
              c.train.task.kind = config_guard("task.kind", [&] { return parse_task_kind(trim(v)); });
            }},
           {"dim", [](RunConfig& c, const std::string& v) {
              c.train.task.dim = parse_number<std::size_t>("task.dim", v);
            }},
           {"input_dim", [](RunConfig& c, const std::string& v) {
              c.train.task.input_dim = parse_number<std::size_t>("task.input_dim", v);
            }},
           {"output_dim", [](RunConfig& c, const std::string& v) {
              c.train.task.output_dim = parse_number<std::size_t>("task.output_dim", v);
            }},
           {"teacher_hidden", [](RunConfig& c, const std::string& v) {
              c.train.task.teacher_hidden = parse_number<std::size_t>("task.teacher_hidden", v);
            }},
           {"batch", [](RunConfig& c, const std::string& v) {
              c.train.task.batch = parse_number<std::size_t>("task.batch", v);
            }},
           {"noise", [](RunConfig& c, const std::string& v) {
              c.train.task.noise = parse_number<double>("task.noise", v);
            }},
           {"spike_matrix", [](RunConfig& c, const std::string& v) {
              c.train.task.spike_matrix = parse_number<std::size_t>("task.spike_matrix", v);
            }},
           // spike_steps / spike_amplification are combined after parsing.
           {"spike_steps", [](RunConfig&, const std::string&) {}},
           {"spike_amplification", [](RunConfig&, const std::string&) {}},
       }},
      {"model",
       {
           {"hidden", [](RunConfig& c, const std::string& v) {
              c.train.model.hidden = parse_number_list<std::size_t>("model.hidden", v);
            }},
           {"activation", [](RunConfig& c, const std::string& v) {
              c.train.model.activation =
                  config_guard("model.activation", [&] { return parse_activation(trim(v)); });
            }},
           {"loss", [](RunConfig& c, const std::string& v) {
              c.train.model.loss = config_guard("model.loss", [&] { return parse_loss(trim(v)); });
            }},
       }},
      {"optimizer",
       {
           {"method", [](RunConfig& c, const std::string& v) { c.method = trim(v); }},
           {"learning_rate", [](RunConfig& c, const std::string& v) {
              c.train.optimizer.hp.learning_rate = parse_number<double>("optimizer.learning_rate", v);
            }},
           {"beta1", [](RunConfig& c, const std::string& v) {
              c.train.optimizer.hp.beta1 = parse_number<double>("optimizer.beta1", v);
            }},
           {"beta2", [](RunConfig& c, const std::string& v) {
              c.train.optimizer.hp.beta2 = parse_number<double>("optimizer.beta2", v);
            }},
           {"epsilon", [](RunConfig& c, const std::string& v) {
              c.train.optimizer.hp.epsilon = parse_number<double>("optimizer.epsilon", v);
            }},
           {"alpha", [](RunConfig& c, const std::string& v) {
              c.train.optimizer.hp.galore_scale = parse_number<double>("optimizer.alpha", v);
            }},
           {"gamma", [](RunConfig& c, const std::string& v) {
              c.train.optimizer.hp.limiter_threshold = parse_number<double>("optimizer.gamma", v);
            }},
           {"clip_threshold", [](RunConfig& c, const std::string& v) {
              c.train.optimizer.hp.clip_threshold =
                  parse_number<double>("optimizer.clip_threshold", v);
            }},
           {"rank", [](RunConfig& c, const std::string& v) {
              c.train.optimizer.hp.rank = parse_number<std::size_t>("optimizer.rank", v);
            }},
           {"switch_period", [](RunConfig& c, const std::string& v) {
              c.train.optimizer.hp.switch_period =
                  parse_number<std::size_t>("optimizer.switch_period", v);
            }},
           {"galore_add_scale_residual", [](RunConfig& c, const std::string& v) {
              c.train.optimizer.hp.galore_add_scale_residual =
                  parse_bool("optimizer.galore_add_scale_residual", v);
            }},
       }},
      {"output",
       {
           {"dir", [](RunConfig& c, const std::string& v) { c.output_dir = trim(v); }},
           {"metrics", [](RunConfig& c, const std::string& v) { c.metrics_file = trim(v); }},
           {"summary", [](RunConfig& c, const std::string& v) { c.summary_file = trim(v); }},
       }},
      {"compare",
       {
           {"methods", [](RunConfig& c, const std::string& v) { c.compare.methods = split_list(v); }},
           {"seeds", [](RunConfig& c, const std::string& v) {
              c.compare.seeds = parse_number_list<std::uint64_t>("compare.seeds", v);
            }},
           {"ranks", [](RunConfig& c, const std::string& v) {
              c.compare.ranks = parse_number_list<std::size_t>("compare.ranks", v);
            }},
           {"output", [](RunConfig& c, const std::string& v) { c.compare.output = trim(v); }},
       }},
  };
  return table;
}

}  // namespace

std::vector<std::string> known_methods() {
  return {"sgd",  "adam",        "galore",           "galore-add",        "fira",
          "lora", "fira-matrix", "fira-w.o.-scaling", "fira-w.o.-limiter", "fira-gradient-clipping"};
}

OptimizerSpec apply_method(OptimizerSpec spec, const std::string& method) {
  if (method == "fira-matrix") {
    spec.kind = OptimizerKind::Fira;
    spec.scaling = ScalingMode::MatrixLevel;
    spec.smoothing = SmoothingMode::NormGrowthLimiter;
  } else if (method == "fira-w.o.-scaling") {
    spec.kind = OptimizerKind::Fira;
    spec.scaling = ScalingMode::None;
    spec.smoothing = SmoothingMode::NormGrowthLimiter;
  } else if (method == "fira-w.o.-limiter") {
    spec.kind = OptimizerKind::Fira;
    spec.scaling = ScalingMode::ColumnLevel;
    spec.smoothing = SmoothingMode::None;
  } else if (method == "fira-gradient-clipping") {
    spec.kind = OptimizerKind::Fira;
    spec.scaling = ScalingMode::ColumnLevel;
    spec.smoothing = SmoothingMode::GradientClipping;
  } else {
    spec.kind = config_guard("method", [&] { return parse_optimizer_kind(method); });
    if (spec.kind == OptimizerKind::Fira) {
      spec.scaling = ScalingMode::ColumnLevel;
      spec.smoothing = SmoothingMode::NormGrowthLimiter;
    }
  }
  return spec;
}

bool method_uses_rank(const std::string& method) {
  return method != "sgd" && method != "adam";
}

RunConfig parse_run_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }

  RunConfig config;
  std::vector<std::int64_t> spike_steps;
  std::vector<double> spike_amps;
  for (const auto& [section, keys] : tree) {
    auto sec = setters().find(section);
    if (sec == setters().end()) throw ConfigError("unknown section [" + section + "]");
    if (keys.empty() && !keys.data().empty()) {
      throw ConfigError("key '" + section + "' is outside any section");
    }
    for (const auto& [key, node] : keys) {
      auto setter = sec->second.find(key);
      if (setter == sec->second.end()) {
        throw ConfigError("unknown key '" + key + "' in [" + section + "]");
      }
      const std::string value = node.data();
      if (section == "task" && key == "spike_steps") {
        spike_steps = parse_number_list<std::int64_t>("task.spike_steps", value);
      } else if (section == "task" && key == "spike_amplification") {
        spike_amps = parse_number_list<double>("task.spike_amplification", value);
      } else {
        setter->second(config, value);
      }
    }
  }

  if (!spike_steps.empty()) {
    if (spike_amps.size() != 1 && spike_amps.size() != spike_steps.size()) {
      throw ConfigError("task.spike_amplification needs one value or one per spike step");
    }
    for (std::size_t i = 0; i < spike_steps.size(); ++i) {
      config.train.task.spikes.push_back(
          {spike_steps[i], spike_amps.size() == 1 ? spike_amps[0] : spike_amps[i]});
    }
  } else if (!spike_amps.empty()) {
    throw ConfigError("task.spike_amplification given without task.spike_steps");
  }

  config.train.optimizer = apply_method(config.train.optimizer, config.method);
  for (const std::string& m : config.compare.methods) apply_method(config.train.optimizer, m);
  if (config.metrics_file.empty() || config.summary_file.empty() ||
      config.compare.output.empty()) {
    throw ConfigError("output file names must not be empty");
  }
  config.train.validate();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  RunConfig config = parse_run_config(buffer.str());
  if (config.output_dir.is_relative()) {
    config.output_dir = path.parent_path() / config.output_dir;
  }
  return config;
}

}  // namespace fira
