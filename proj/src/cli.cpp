#include "fira/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "fira/analysis.hpp"
#include "fira/config.hpp"
#include "fira/error.hpp"
#include "fira/memory.hpp"
#include "fira/train.hpp"

namespace fira::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::optional<fs::path> env_output_dir() {
  const char* value = std::getenv(kOutputDirEnv);
  if (value == nullptr || *value == '\0') return std::nullopt;
  return fs::path(value);
}

// Relative `--out` paths land in the override directory when it is set.
fs::path resolve_out(const fs::path& path) {
  if (path.is_relative()) {
    if (auto dir = env_output_dir()) return *dir / path;
  }
  return path;
}

fs::path output_dir_for(const RunConfig& config) {
  if (auto dir = env_output_dir()) return *dir;
  return config.output_dir;
}

void ensure_parent(const fs::path& file) {
  const fs::path parent = file.parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw IoError("cannot create directory '" + parent.string() + "': " + ec.message());
}

void write_file(const fs::path& path, const std::string& contents) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << contents;
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Json summary_json(const RunConfig& config, const TrainRecord& record) {
  const TrainSummary s = summarize(record);
  Json j;
  j["method"] = config.method;
  j["seed"] = config.train.seed;
  j["steps"] = s.steps;
  j["initial_loss"] = s.initial_loss;
  j["final_loss"] = s.final_loss;
  j["min_loss"] = s.min_loss;
  j["spike_count"] = s.spike_count;
  j["diverged"] = record.diverged;
  return j;
}

void emit_train_outputs(const RunConfig& config, const TrainRecord& record) {
  const fs::path dir = output_dir_for(config);
  std::ostringstream csv;
  write_train_csv(csv, record);
  write_file(dir / config.metrics_file, csv.str());
  write_file(dir / config.summary_file, summary_json(config, record).dump(2) + "\n");
}

int cmd_train(const fs::path& config_path, std::ostream& out) {
  const RunConfig config = load_run_config(config_path);
  TrainRecord record;
  int status = kExitOk;
  try {
    record = train(config.train);
  } catch (const DivergenceError& e) {
    record = e.partial();
    status = kExitDivergence;
  }
  emit_train_outputs(config, record);
  const TrainSummary s = summarize(record);
  out << config.method << ": steps=" << s.steps << " final_loss=" << fmt(s.final_loss, "%.6g")
      << " min_loss=" << fmt(s.min_loss, "%.6g") << " spikes=" << s.spike_count
      << (record.diverged ? " (diverged)" : "") << "\n";
  return status;
}

struct CompareJob {
  std::size_t row;
  TrainConfig config;
};

struct CompareRow {
  std::string method;
  OptimizerSpec spec;
  std::size_t rank = 0;
  std::vector<double> finals;
  std::size_t diverged = 0;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_compare(const fs::path& config_path, unsigned threads, std::ostream& out) {
  const RunConfig config = load_run_config(config_path);
  if (config.compare.methods.empty()) throw ConfigError("[compare] methods is empty");
  const std::vector<std::uint64_t> seeds =
      config.compare.seeds.empty() ? std::vector<std::uint64_t>{config.train.seed}
                                   : config.compare.seeds;

  std::vector<CompareRow> rows;
  std::vector<CompareJob> jobs;
  for (const std::string& method : config.compare.methods) {
    std::vector<std::size_t> ranks;
    if (!method_uses_rank(method)) {
      ranks = {0};
    } else if (config.compare.ranks.empty()) {
      ranks = {config.train.optimizer.hp.rank};
    } else {
      ranks = config.compare.ranks;
    }
    for (std::size_t rank : ranks) {
      CompareRow row;
      row.method = method;
      row.spec = apply_method(config.train.optimizer, method);
      if (rank != 0) row.spec.hp.rank = rank;
      row.rank = rank;
      row.finals.assign(seeds.size(), 0.0);
      for (std::uint64_t seed : seeds) {
        TrainConfig tc = config.train;
        tc.optimizer = row.spec;
        tc.seed = seed;
        tc.validate();
        jobs.push_back({rows.size(), std::move(tc)});
      }
      rows.push_back(std::move(row));
    }
  }

  // Each job writes only its own slot, so scheduling cannot change output.
  std::vector<double> finals(jobs.size());
  std::vector<char> diverged(jobs.size(), 0);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        finals[i] = train(jobs[i].config).final_loss;
      } catch (const DivergenceError&) {
        finals[i] = std::numeric_limits<double>::infinity();
        diverged[i] = 1;
      }
    }
  };
  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, jobs.size()));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
  }

  std::vector<std::size_t> filled(rows.size(), 0);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    CompareRow& row = rows[jobs[i].row];
    row.finals[filled[jobs[i].row]++] = finals[i];
    row.diverged += diverged[i];
  }

  std::ostringstream csv;
  csv << "method,kind,scaling,smoothing,rank,seeds,median_final_loss,min_final_loss,"
         "max_final_loss,diverged\n";
  for (const CompareRow& row : rows) {
    const auto [lo, hi] = std::minmax_element(row.finals.begin(), row.finals.end());
    const bool fira = row.spec.kind == OptimizerKind::Fira;
    csv << row.method << ',' << to_string(row.spec.kind) << ','
        << (fira ? to_string(row.spec.scaling) : "none") << ','
        << (fira ? to_string(row.spec.smoothing) : "none") << ',' << row.rank << ','
        << row.finals.size() << ',' << fmt(median(row.finals)) << ',' << fmt(*lo) << ','
        << fmt(*hi) << ',' << row.diverged << '\n';
    out << row.method << (row.rank ? " r=" + std::to_string(row.rank) : std::string())
        << ": median final loss " << fmt(median(row.finals), "%.6g") << "\n";
  }
  write_file(output_dir_for(config) / config.compare.output, csv.str());
  return kExitOk;
}

// Reference rankings of ten matrices by average scaling factor.
const std::vector<std::pair<std::string, std::vector<int>>>& appendix_rankings() {
  static const std::vector<std::pair<std::string, std::vector<int>>> rankings = {
      {"R1", {7, 6, 1, 2, 4, 8, 5, 10, 9, 3}},
      {"R2", {7, 8, 2, 1, 5, 4, 6, 10, 9, 3}},
      {"R3", {6, 8, 2, 1, 5, 4, 7, 10, 9, 3}},
  };
  return rankings;
}

std::vector<int> parse_ranking(const std::string& text) {
  std::vector<int> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      throw ParameterError("malformed ranking '" + text + "'");
    }
    if (used != item.size()) throw ParameterError("malformed ranking '" + text + "'");
    values.push_back(v);
  }
  return values;
}

struct RankSimOptions {
  bool builtin_appendix = false;
  std::string builtin;
  std::vector<std::string> traces;
  std::vector<std::string> rankings;
  std::string out;
  std::string format = "csv";
};

int cmd_rank_sim(const RankSimOptions& opt, std::ostream& out) {
  std::vector<std::pair<std::string, RankSequence>> named;
  if (!opt.builtin.empty()) {
    if (opt.builtin != "appendix") throw ParameterError("unknown builtin '" + opt.builtin + "'");
    for (const auto& [name, values] : appendix_rankings()) named.emplace_back(name, RankSequence(values));
  }
  for (const std::string& trace : opt.traces) {
    std::istringstream in(read_file(trace));
    TrainRecord record;
    try {
      record = read_train_csv(in);
    } catch (const std::exception& e) {
      throw ParameterError("malformed trace '" + trace + "': " + e.what());
    }
    named.emplace_back(fs::path(trace).stem().string(),
                       trace_to_ranking(average_scaling_factors(record)));
  }
  for (std::size_t i = 0; i < opt.rankings.size(); ++i) {
    named.emplace_back("ranking" + std::to_string(i + 1),
                       RankSequence(parse_ranking(opt.rankings[i])));
  }
  if (named.size() == 1) named.push_back(named.front());
  if (named.empty()) throw ParameterError("rank-sim needs at least two rankings");

  Json report = Json::array();
  std::ostringstream csv;
  csv << "a,b,n,kendall_tau,kendall_p,spearman_rho,spearman_p\n";
  for (std::size_t i = 0; i < named.size(); ++i) {
    for (std::size_t j = i + 1; j < named.size(); ++j) {
      const auto& [na, a] = named[i];
      const auto& [nb, b] = named[j];
      if (a.size() != b.size()) {
        throw ParameterError("rankings '" + na + "' and '" + nb + "' differ in length");
      }
      const CorrelationResult k = kendall_tau(a, b);
      const CorrelationResult s = spearman_rho(a, b);
      csv << na << ',' << nb << ',' << a.size() << ',' << fmt(k.coefficient, "%.10g") << ','
          << fmt(k.p_value, "%.10g") << ',' << fmt(s.coefficient, "%.10g") << ','
          << fmt(s.p_value, "%.10g") << '\n';
      report.push_back({{"a", na},
                        {"b", nb},
                        {"n", a.size()},
                        {"kendall_tau", k.coefficient},
                        {"kendall_p", k.p_value},
                        {"spearman_rho", s.coefficient},
                        {"spearman_p", s.p_value}});
    }
  }
  std::string text;
  if (opt.format == "json") {
    text = report.dump(2) + "\n";
  } else {
    text = csv.str();
  }
  if (opt.out.empty()) {
    out << text;
  } else {
    write_file(resolve_out(opt.out), text);
  }
  return kExitOk;
}

struct VarSimOptions {
  std::vector<std::size_t> ranks{1, 5, 10, 50, 100};
  std::size_t steps = 100;
  std::size_t trials = 100000;
  std::uint64_t seed = 42;
  std::string mode = "exclude-current";
  double beta2 = 0.999;
  double sigma = 1.0;
  unsigned threads = 0;
  std::string out;
};

int cmd_var_sim(const VarSimOptions& opt, std::ostream& out) {
  std::vector<VarianceSimConfig> configs;
  for (std::size_t rank : opt.ranks) {
    VarianceSimConfig cfg;
    cfg.rank = rank;
    cfg.history_length = opt.steps;
    cfg.trials = opt.trials;
    cfg.seed = opt.seed;
    cfg.beta2 = opt.beta2;
    cfg.sigma = opt.sigma;
    cfg.exclude_current = opt.mode == "exclude-current";
    cfg.validate();
    configs.push_back(cfg);
  }
  if (configs.empty()) throw ParameterError("var-sim needs at least one rank");

  std::ostringstream csv;
  csv << "rank,var_phi,var_psi,var_phi_sq,var_psi_sq,ratio_check,expected_ratio\n";
  for (const VarianceSimConfig& cfg : configs) {
    const VarianceSimResult r = simulate_variance(cfg, opt.threads);
    // E[sum w_i^2] for w ~ Dirichlet(1/2, ..., 1/2).
    const double expected = 3.0 / (static_cast<double>(cfg.rank) + 2.0);
    csv << cfg.rank << ',' << fmt(r.var_phi) << ',' << fmt(r.var_psi) << ','
        << fmt(r.var_phi_sq) << ',' << fmt(r.var_psi_sq) << ','
        << fmt(r.var_phi_sq / r.var_psi_sq) << ',' << fmt(expected) << '\n';
  }
  if (opt.out.empty()) {
    out << csv.str();
  } else {
    write_file(resolve_out(opt.out), csv.str());
  }
  return kExitOk;
}

ArchSpec load_arch(const std::string& arch) {
  if (auto spec = builtin_arch(arch)) return *spec;
  if (!fs::exists(arch)) {
    std::string names;
    for (const std::string& n : builtin_arch_names()) names += (names.empty() ? "" : ", ") + n;
    throw ParameterError("unknown architecture '" + arch + "' (built-in: " + names + ")");
  }
  Json j;
  try {
    j = Json::parse(read_file(arch));
    ArchSpec spec;
    spec.name = j.value("name", fs::path(arch).stem().string());
    spec.hidden = j.at("hidden").get<std::size_t>();
    spec.intermediate = j.at("intermediate").get<std::size_t>();
    spec.heads = j.at("heads").get<std::size_t>();
    spec.layers = j.at("layers").get<std::size_t>();
    spec.vocab = j.value("vocab", spec.vocab);
    spec.max_seq = j.value("max_seq", spec.max_seq);
    spec.validate();
    return spec;
  } catch (const Json::exception& e) {
    throw ParameterError("malformed architecture file '" + arch + "': " + e.what());
  }
}

int cmd_mem(const std::string& arch_name, const std::string& method, std::size_t rank,
            const std::string& out_path, std::ostream& out) {
  const ArchSpec arch = load_arch(arch_name);
  const MemoryEstimate e = estimate(arch, parse_memory_method(method), rank);
  Json j;
  j["arch"] = arch.name;
  j["method"] = to_string(e.method);
  j["rank"] = e.rank;
  j["weight_bytes"] = e.weight_bytes;
  j["optimizer_state_bytes"] = e.optimizer_state_bytes;
  j["total_bytes"] = e.total_bytes;
  j["total_gb"] = e.total_gb();
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty()) {
    out << text;
  } else {
    write_file(resolve_out(out_path), text);
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-rank optimizer experiments: training, comparisons and analyses", "fira"};
  app.require_subcommand(1);

  std::string train_config;
  auto* train_cmd = app.add_subcommand("train", "Train one model from a config file");
  train_cmd->add_option("config", train_config, "Run config (INI)")->required();

  std::string compare_config;
  unsigned compare_threads = 0;
  auto* compare_cmd = app.add_subcommand("compare", "Run every [compare] method over all seeds");
  compare_cmd->add_option("config", compare_config, "Run config (INI)")->required();
  compare_cmd->add_option("--threads", compare_threads, "Worker threads (0 = all cores)");

  RankSimOptions rank_opt;
  auto* rank_cmd = app.add_subcommand("rank-sim", "Kendall and Spearman agreement of rankings");
  rank_cmd->add_option("--builtin", rank_opt.builtin, "Built-in ranking set")
      ->check(CLI::IsMember({"appendix"}));
  rank_cmd->add_option("--trace", rank_opt.traces, "metrics.csv from a train run (repeatable)");
  rank_cmd->add_option("--ranking", rank_opt.rankings, "Comma-separated permutation (repeatable)");
  rank_cmd->add_option("--out", rank_opt.out, "Output file (default: stdout)");
  rank_cmd->add_option("--format", rank_opt.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  VarSimOptions var_opt;
  auto* var_cmd = app.add_subcommand("var-sim", "Monte-Carlo variance of the scaling factor");
  var_cmd->add_option("--ranks", var_opt.ranks, "Comma-separated ranks")->delimiter(',');
  var_cmd->add_option("--steps", var_opt.steps, "History length t");
  var_cmd->add_option("--trials", var_opt.trials, "Trials per rank");
  var_cmd->add_option("--seed", var_opt.seed, "Seed");
  var_cmd->add_option("--mode", var_opt.mode, "exclude-current or literal")
      ->check(CLI::IsMember({"exclude-current", "literal"}));
  var_cmd->add_option("--beta2", var_opt.beta2, "Second-moment decay");
  var_cmd->add_option("--sigma", var_opt.sigma, "Gradient standard deviation");
  var_cmd->add_option("--threads", var_opt.threads, "Worker threads (0 = all cores)");
  var_cmd->add_option("--out", var_opt.out, "Output CSV (default: stdout)");

  std::string mem_arch = "llama-60m";
  std::string mem_method = "full";
  std::size_t mem_rank = 128;
  std::string mem_out;
  auto* mem_cmd = app.add_subcommand("mem", "Estimate weight and optimizer-state memory");
  mem_cmd->add_option("--arch", mem_arch, "Built-in name or JSON file");
  mem_cmd->add_option("--method", mem_method, "full, fira, galore or lora");
  mem_cmd->add_option("--rank", mem_rank, "Rank for low-rank methods");
  mem_cmd->add_option("--out", mem_out, "Output JSON (default: stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(train_config, out);
    if (*compare_cmd) return cmd_compare(compare_config, compare_threads, out);
    if (*rank_cmd) return cmd_rank_sim(rank_opt, out);
    if (*var_cmd) return cmd_var_sim(var_opt, out);
    if (*mem_cmd) return cmd_mem(mem_arch, mem_method, mem_rank, mem_out, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParameterError& e) {
    err << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitDivergence;
  }
  return kExitConfig;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace fira::cli
