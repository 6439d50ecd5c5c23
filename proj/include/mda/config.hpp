#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mda/problems.hpp"
#include "mda/run.hpp"
#include "mda/schedules.hpp"

namespace mda {

// Anything wrong with a config file: parse errors, bad values, unknown keys.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char ch : s) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_') return false;
  }
  return true;
}

}  // namespace detail

// Flat `key = value` store with `[section]` headers. Lookups are addressed as
// "section.key" and mark the key consumed; reject_unknown() turns leftovers
// into hard errors so misspelled keys never pass silently.
class ParsedConfig {
 public:
  static ParsedConfig parse_string(const std::string& text,
                                   const std::string& origin = "<config>") {
    ParsedConfig cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    long long line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      if (!raw.empty() && raw.back() == '\r') raw.pop_back();
      const std::string line = detail::trim(raw);
      if (line.empty() || line[0] == '#' || line[0] == ';') continue;
      if (line.front() == '[') {
        if (line.back() != ']') cfg.fail(line_no, "malformed section header '" + line + "'");
        section = detail::trim(line.substr(1, line.size() - 2));
        if (!detail::valid_name(section)) {
          cfg.fail(line_no, "bad section name '" + section + "'");
        }
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos) cfg.fail(line_no, "expected 'key = value', got '" + line + "'");
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (!detail::valid_name(key)) cfg.fail(line_no, "bad key '" + key + "'");
      if (value.empty()) cfg.fail(line_no, "empty value for key '" + key + "'");
      if (section.empty()) cfg.fail(line_no, "key '" + key + "' appears before any [section]");
      const std::string full = section + "." + key;
      if (cfg.values_.count(full)) cfg.fail(line_no, "duplicate key '" + full + "'");
      cfg.values_[full] = value;
      cfg.order_.push_back(full);
    }
    return cfg;
  }

  static ParsedConfig parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_string(buf.str(), path);
  }

  bool has(const std::string& full_key) const { return values_.count(full_key) > 0; }

  std::string get_string(const std::string& full_key, const std::string& dflt) {
    auto it = values_.find(full_key);
    if (it == values_.end()) return dflt;
    consumed_.insert(full_key);
    return it->second;
  }

  long long get_int(const std::string& full_key, long long dflt) {
    auto it = values_.find(full_key);
    if (it == values_.end()) return dflt;
    consumed_.insert(full_key);
    return to_int(full_key, it->second);
  }

  double get_double(const std::string& full_key, double dflt) {
    auto it = values_.find(full_key);
    if (it == values_.end()) return dflt;
    consumed_.insert(full_key);
    return to_double(full_key, it->second);
  }

  bool get_bool(const std::string& full_key, bool dflt) {
    auto it = values_.find(full_key);
    if (it == values_.end()) return dflt;
    consumed_.insert(full_key);
    const std::string& v = it->second;
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(origin_ + ": key '" + full_key + "' wants true/false, got '" + v + "'");
  }

  std::vector<std::string> get_string_list(const std::string& full_key,
                                           const std::vector<std::string>& dflt) {
    auto it = values_.find(full_key);
    if (it == values_.end()) return dflt;
    consumed_.insert(full_key);
    std::vector<std::string> out;
    for (const std::string& item : split_commas(full_key, it->second)) out.push_back(item);
    return out;
  }

  std::vector<long long> get_int_list(const std::string& full_key,
                                      const std::vector<long long>& dflt) {
    auto it = values_.find(full_key);
    if (it == values_.end()) return dflt;
    consumed_.insert(full_key);
    std::vector<long long> out;
    for (const std::string& item : split_commas(full_key, it->second)) {
      out.push_back(to_int(full_key, item));
    }
    return out;
  }

  // Hard error on any key that no lookup touched.
  void reject_unknown() const {
    std::vector<std::string> stray;
    for (const std::string& key : order_) {
      if (!consumed_.count(key)) stray.push_back(key);
    }
    if (stray.empty()) return;
    std::ostringstream os;
    os << origin_ << ": unknown key" << (stray.size() > 1 ? "s" : "") << ": ";
    for (std::size_t i = 0; i < stray.size(); ++i) {
      if (i) os << ", ";
      os << "'" << stray[i] << "'";
    }
    throw ConfigError(os.str());
  }

  const std::string& origin() const { return origin_; }

 private:
  void fail(long long line_no, const std::string& what) const {
    throw ConfigError(origin_ + ":" + std::to_string(line_no) + ": " + what);
  }

  long long to_int(const std::string& key, const std::string& v) const {
    char* end = nullptr;
    const long long out = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') {
      throw ConfigError(origin_ + ": key '" + key + "' wants an integer, got '" + v + "'");
    }
    return out;
  }

  double to_double(const std::string& key, const std::string& v) const {
    char* end = nullptr;
    const double out = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') {
      throw ConfigError(origin_ + ": key '" + key + "' wants a number, got '" + v + "'");
    }
    return out;
  }

  std::vector<std::string> split_commas(const std::string& key, const std::string& v) const {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) {
      item = detail::trim(item);
      if (item.empty()) {
        throw ConfigError(origin_ + ": key '" + key + "' has an empty list item");
      }
      out.push_back(item);
    }
    if (out.empty()) throw ConfigError(origin_ + ": key '" + key + "' has an empty list");
    return out;
  }

  std::string origin_;
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
  std::set<std::string> consumed_;
};

// Everything a benchmark subcommand needs, assembled from one config file.
struct BenchConfig {
  std::string problem_kind = "quadratic";
  Problem problem;
  std::vector<OptimizerConfig> optimizers;
  std::vector<std::string> optimizer_tags;  // filesystem-safe run labels
  ScheduleSpec schedule;
  long long T = 100;
  std::vector<std::uint64_t> seeds;
  ReturnMode mode = ReturnMode::last_iterate;
  std::string output_dir = "out";
  std::vector<long long> rate_T_values;
};

namespace detail {

inline Problem build_problem(ParsedConfig& cfg, const std::string& kind) {
  const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("problem.seed", 42));
  try {
    if (kind == "quadratic") {
      const int n = static_cast<int>(cfg.get_int("problem.n", 10));
      const double cond = cfg.get_double("problem.cond", 10.0);
      const double sigma = cfg.get_double("problem.sigma", 0.0);
      return make_quadratic(n, cond, sigma, seed);
    }
    if (kind == "logistic") {
      const int n_samples = static_cast<int>(cfg.get_int("problem.n_samples", 200));
      const int n_features = static_cast<int>(cfg.get_int("problem.n_features", 20));
      const int batch = static_cast<int>(
          cfg.get_int("problem.batch", n_samples));  // default: full batch
      return make_logistic(n_samples, n_features, batch, seed);
    }
    if (kind == "rosenbrock") {
      const int n = static_cast<int>(cfg.get_int("problem.n", 10));
      return make_rosenbrock(n);
    }
    if (kind == "tiny_mlp") {
      const int n_hidden = static_cast<int>(cfg.get_int("problem.n_hidden", 16));
      const int n_samples = static_cast<int>(cfg.get_int("problem.n_samples", 500));
      const int batch = static_cast<int>(cfg.get_int("problem.batch", 32));
      return make_tiny_mlp(n_hidden, n_samples, batch, seed);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(cfg.origin() + ": bad problem parameters: " + e.what());
  }
  throw ConfigError(cfg.origin() + ": unknown problem kind '" + kind +
                    "' (expected quadratic, logistic, rosenbrock, or tiny_mlp)");
}

inline DaBetaMode parse_da_beta(const ParsedConfig& cfg, const std::string& v) {
  if (v == "sqrt") return DaBetaMode::sqrt_k;
  if (v == "nesterov") return DaBetaMode::nesterov;
  throw ConfigError(cfg.origin() + ": key 'optimizer.da_beta' wants sqrt or nesterov, got '" + v +
                    "'");
}

inline LrShape parse_shape(const ParsedConfig& cfg, const std::string& v) {
  if (v == "flat") return LrShape::flat;
  if (v == "warmup_linear_decay") return LrShape::warmup_linear_decay;
  if (v == "stagewise_linear") return LrShape::stagewise_linear;
  throw ConfigError(cfg.origin() + ": key 'schedule.shape' wants flat, warmup_linear_decay, or " +
                    "stagewise_linear, got '" + v + "'");
}

inline std::vector<Stage> parse_stages(const ParsedConfig& cfg, const std::string& v) {
  std::vector<Stage> stages;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    Stage st;
    if (std::sscanf(item.c_str(), "%lf:%lf:%lf", &st.at_frac, &st.multiplier, &st.ramp_frac) !=
        3) {
      throw ConfigError(cfg.origin() +
                        ": key 'schedule.stages' wants at_frac:multiplier:ramp_frac triplets, "
                        "got '" +
                        item + "'");
    }
    stages.push_back(st);
  }
  if (stages.empty()) throw ConfigError(cfg.origin() + ": key 'schedule.stages' is empty");
  return stages;
}

}  // namespace detail

inline BenchConfig bench_config_from_parsed(ParsedConfig cfg, std::uint64_t seed_offset = 0) {
  BenchConfig bench;

  bench.problem_kind = cfg.get_string("problem.kind", "quadratic");
  bench.problem = detail::build_problem(cfg, bench.problem_kind);

  // [optimizer] accepts a single `kind` or a comma-list `kinds`.
  if (cfg.has("optimizer.kinds") && cfg.has("optimizer.kind")) {
    throw ConfigError(cfg.origin() +
                      ": give either 'optimizer.kind' or 'optimizer.kinds', not both");
  }
  std::vector<std::string> kinds;
  if (cfg.has("optimizer.kinds")) {
    kinds = cfg.get_string_list("optimizer.kinds", {});
  } else {
    kinds = {cfg.get_string("optimizer.kind", "sgd")};
  }
  OptimizerConfig shared;
  shared.momentum = cfg.get_double("optimizer.momentum", 0.9);
  shared.adam_beta1 = cfg.get_double("optimizer.adam_beta1", 0.9);
  shared.adam_beta2 = cfg.get_double("optimizer.adam_beta2", 0.999);
  shared.adam_eps = cfg.get_double("optimizer.adam_eps", 1e-8);
  shared.da_beta = detail::parse_da_beta(cfg, cfg.get_string("optimizer.da_beta", "sqrt"));
  for (const std::string& kind : kinds) {
    if (!is_known_optimizer(kind)) {
      throw ConfigError(cfg.origin() + ": unknown optimizer kind '" + kind + "'");
    }
    OptimizerConfig opt = shared;
    opt.kind = kind;
    std::string tag = kind;
    if (kind == "da" && opt.da_beta == DaBetaMode::nesterov) tag = "da_nesterov";
    for (const std::string& seen : bench.optimizer_tags) {
      if (seen == tag) throw ConfigError(cfg.origin() + ": duplicate optimizer '" + kind + "'");
    }
    bench.optimizers.push_back(opt);
    bench.optimizer_tags.push_back(tag);
  }

  bench.schedule.base_lr = cfg.get_double("schedule.base_lr", 0.1);
  bench.schedule.shape = detail::parse_shape(cfg, cfg.get_string("schedule.shape", "flat"));
  bench.schedule.warmup_steps = cfg.get_int("schedule.warmup_steps", 0);
  bench.schedule.c0 = cfg.get_double("schedule.c0", 1.0);
  bench.schedule.compensate_momentum = cfg.get_bool("schedule.compensate_momentum", false);
  if (cfg.has("schedule.stages")) {
    bench.schedule.stages = detail::parse_stages(cfg, cfg.get_string("schedule.stages", ""));
  }

  bench.T = cfg.get_int("run.T", 100);
  if (bench.T < 1) throw ConfigError(cfg.origin() + ": run.T must be >= 1");
  bench.schedule.total_steps = bench.T;

  const std::vector<long long> seeds = cfg.get_int_list("run.seeds", {1});
  for (long long s : seeds) {
    if (s < 0) throw ConfigError(cfg.origin() + ": run.seeds must be nonnegative");
    bench.seeds.push_back(static_cast<std::uint64_t>(s) + seed_offset);
  }

  const std::string mode = cfg.get_string("run.return_mode", "last_iterate");
  if (mode == "last_iterate") {
    bench.mode = ReturnMode::last_iterate;
  } else if (mode == "average_iterate") {
    bench.mode = ReturnMode::average_iterate;
  } else {
    throw ConfigError(cfg.origin() +
                      ": key 'run.return_mode' wants last_iterate or average_iterate, got '" +
                      mode + "'");
  }
  bench.output_dir = cfg.get_string("run.output_dir", "out");

  bench.rate_T_values = cfg.get_int_list("rate.T_values", {100, 1000, 10000});

  cfg.reject_unknown();

  try {
    bench.schedule.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(cfg.origin() + ": bad schedule: " + e.what());
  }
  return bench;
}

inline BenchConfig load_bench_config(const std::string& path, std::uint64_t seed_offset = 0) {
  return bench_config_from_parsed(ParsedConfig::parse_file(path), seed_offset);
}

inline BenchConfig bench_config_from_text(const std::string& text, std::uint64_t seed_offset = 0,
                                          const std::string& origin = "<config>") {
  return bench_config_from_parsed(ParsedConfig::parse_string(text, origin), seed_offset);
}

}  // namespace mda
