// Flat key = value experiment configuration: parsing, validation against the
// known-key schema, canonical serialization, and construction of the typed
// model / algorithm / equilibration parameter bundles.
#ifndef PURELU_CONFIG_HPP
#define PURELU_CONFIG_HPP

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "purelu/equilibrate.hpp"
#include "purelu/errors.hpp"
#include "purelu/model.hpp"
#include "purelu/purify.hpp"

namespace purelu {

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace((unsigned char)s[b])) ++b;
  while (e > b && std::isspace((unsigned char)s[e - 1])) --e;
  return s.substr(b, e - b);
}

inline std::string fmt_double(double v) {
  // Shortest decimal that parses back to the same double.
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string fmt_u64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%llu", (unsigned long long)v);
  return buf;
}

inline double parse_double(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end != value.c_str() + value.size() || value.empty() || errno == ERANGE)
    throw ConfigError("key '" + key + "': not a number: '" + value + "'");
  return v;
}

inline std::uint64_t parse_u64(const std::string& key,
                               const std::string& value) {
  if (value.empty() || value[0] == '-' || value[0] == '+')
    throw ConfigError("key '" + key + "': not a nonnegative integer: '" +
                      value + "'");
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (end != value.c_str() + value.size() || errno == ERANGE)
    throw ConfigError("key '" + key + "': not a nonnegative integer: '" +
                      value + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = s.find(sep, pos);
    if (next == std::string::npos) {
      out.push_back(s.substr(pos));
      return out;
    }
    out.push_back(s.substr(pos, next - pos));
    pos = next + 1;
  }
}

}  // namespace detail

/// The complete key schema.
inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "seed",
      "model.m", "model.n", "model.ground_truth", "model.corr",
      "model.weights", "model.weights.s", "model.weights.marginals",
      "model.noise", "model.noise.strategy", "model.noise.level",
      "init.ell", "init.e_sign", "init.n0_level", "init.sigma_lo",
      "init.sigma_hi",
      "algo.alpha", "algo.eta", "algo.r", "algo.T", "algo.N", "algo.pairing",
      "algo.p_pairs",
      "equil.alpha", "equil.eta", "equil.T_inner", "equil.epsilon",
      "equil.lambda0", "equil.N", "equil.max_outer",
      "sweep.param", "sweep.values", "sweep.seeds",
  };
  return keys;
}

/// Ordered key -> value store with '#' comments, one binding per line.
class Config {
 public:
  static Config parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string t = detail::trim(line);
      if (t.empty()) continue;
      const std::size_t eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError("line " + std::to_string(lineno) +
                          ": expected 'key = value'");
      const std::string key = detail::trim(t.substr(0, eq));
      const std::string value = detail::trim(t.substr(eq + 1));
      if (key.empty() ||
          key.find_first_not_of(
              "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
              "0123456789_.") != std::string::npos)
        throw ConfigError("line " + std::to_string(lineno) + ": bad key '" +
                          key + "'");
      if (value.empty())
        throw ConfigError("line " + std::to_string(lineno) +
                          ": empty value for key '" + key + "'");
      if (!cfg.kv_.emplace(key, value).second)
        throw ConfigError("duplicate key '" + key + "'");
    }
    return cfg;
  }

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  const std::string& raw(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing key: " + key);
    return it->second;
  }

  void set(const std::string& key, const std::string& value) {
    kv_[key] = value;
  }

  double get_double(const std::string& key) const {
    return detail::parse_double(key, raw(key));
  }
  double get_double(const std::string& key, double dflt) const {
    return has(key) ? get_double(key) : dflt;
  }
  std::uint64_t get_u64(const std::string& key) const {
    return detail::parse_u64(key, raw(key));
  }
  std::size_t get_size(const std::string& key) const {
    return std::size_t(get_u64(key));
  }
  std::size_t get_size(const std::string& key, std::size_t dflt) const {
    return has(key) ? get_size(key) : dflt;
  }

  std::string get_enum(const std::string& key,
                       const std::vector<std::string>& allowed) const {
    const std::string& v = raw(key);
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      std::string msg = "key '" + key + "': bad value '" + v + "', expected";
      for (const auto& a : allowed) msg += " " + a;
      throw ConfigError(msg);
    }
    return v;
  }
  std::string get_enum(const std::string& key,
                       const std::vector<std::string>& allowed,
                       const std::string& dflt) const {
    return has(key) ? get_enum(key, allowed) : dflt;
  }

  /// Canonical text: sorted keys, 'key = value' lines.
  std::string serialize() const {
    std::string out;
    for (const auto& [k, v] : kv_) out += k + " = " + v + "\n";
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }

  void validate_keys() const {
    for (const auto& [k, v] : kv_)
      if (!known_config_keys().count(k))
        throw ConfigError("unknown key: " + k);
  }

 private:
  std::map<std::string, std::string> kv_;
};

/// Parse a marginal list: items separated by ';', each 'bernoulli(p,v)' or
/// 'uniform(lo,hi)', optionally repeated with a '*k' suffix.
inline std::vector<Marginal> parse_marginals(const std::string& text) {
  std::vector<Marginal> out;
  for (const std::string& raw_item : detail::split(text, ';')) {
    const std::string item = detail::trim(raw_item);
    if (item.empty()) throw ConfigError("empty marginal item");
    const std::size_t open = item.find('(');
    const std::size_t close = item.find(')', open == std::string::npos
                                                   ? 0
                                                   : open);
    if (open == std::string::npos || close == std::string::npos)
      throw ConfigError("bad marginal item: '" + item + "'");
    const std::string name = detail::trim(item.substr(0, open));
    const std::string args = item.substr(open + 1, close - open - 1);
    std::string tail = detail::trim(item.substr(close + 1));
    std::size_t reps = 1;
    if (!tail.empty()) {
      if (tail[0] != '*')
        throw ConfigError("bad marginal suffix: '" + tail + "'");
      reps = std::size_t(detail::parse_u64("marginals", detail::trim(tail.substr(1))));
      if (reps == 0) throw ConfigError("marginal repeat count must be >= 1");
    }
    const std::vector<std::string> parts = detail::split(args, ',');
    if (parts.size() != 2)
      throw ConfigError("marginal '" + name + "' needs 2 arguments");
    const double a = detail::parse_double("marginals", detail::trim(parts[0]));
    const double b = detail::parse_double("marginals", detail::trim(parts[1]));
    Marginal m;
    if (name == "bernoulli")
      m = Marginal::bernoulli(a, b);
    else if (name == "uniform")
      m = Marginal::uniform(a, b);
    else
      throw ConfigError("unknown marginal kind: '" + name + "'");
    for (std::size_t k = 0; k < reps; ++k) out.push_back(m);
  }
  return out;
}

/// Canonical marginal-list text with adjacent equal items run-length
/// compressed.
inline std::string serialize_marginals(const std::vector<Marginal>& ms) {
  auto same = [](const Marginal& a, const Marginal& b) {
    return a.kind == b.kind && a.p == b.p && a.v == b.v && a.lo == b.lo &&
           a.hi == b.hi;
  };
  std::string out;
  for (std::size_t i = 0; i < ms.size();) {
    std::size_t j = i + 1;
    while (j < ms.size() && same(ms[i], ms[j])) ++j;
    if (!out.empty()) out += ";";
    if (ms[i].kind == Marginal::Kind::Bernoulli)
      out += "bernoulli(" + detail::fmt_double(ms[i].p) + "," +
             detail::fmt_double(ms[i].v) + ")";
    else
      out += "uniform(" + detail::fmt_double(ms[i].lo) + "," +
             detail::fmt_double(ms[i].hi) + ")";
    if (j - i > 1) out += "*" + detail::fmt_u64(j - i);
    i = j;
  }
  return out;
}

struct SweepSpec {
  std::string param;
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
};

/// Fully resolved experiment: the generated model plus whichever parameter
/// bundles the config provides.
struct Experiment {
  std::uint64_t seed = 0;
  std::size_t m = 0, n = 0;
  GroundTruthKind gt_kind = GroundTruthKind::RandomNonnegUnitL1;
  double corr = 0;
  ModelSpec spec;
  bool has_algo = false;
  AlgoParams algo;
  bool has_equil = false;
  EquilParams equil;
  std::optional<SweepSpec> sweep;
};

inline Experiment build_experiment(const Config& cfg) {
  cfg.validate_keys();
  Experiment ex;
  if (!cfg.has("seed")) throw ConfigError("missing key: seed");
  ex.seed = cfg.get_u64("seed");
  ex.m = cfg.get_size("model.m");
  ex.n = cfg.get_size("model.n");

  const std::string kind = cfg.get_enum(
      "model.ground_truth", {"identity", "random", "overlapping"}, "random");
  ex.gt_kind = kind == "identity"    ? GroundTruthKind::Identity
               : kind == "random"    ? GroundTruthKind::RandomNonnegUnitL1
                                     : GroundTruthKind::Overlapping;
  ex.corr = cfg.get_double("model.corr", 0.0);
  ex.spec.ground_truth =
      gen_ground_truth(ex.gt_kind, ex.m, ex.n, ex.seed, ex.corr);

  const std::string wkind =
      cfg.get_enum("model.weights", {"bernoulli_uniform", "independent"});
  if (wkind == "bernoulli_uniform") {
    ex.spec.weights =
        WeightDist::bernoulli_uniform(ex.n, cfg.get_double("model.weights.s"));
  } else {
    std::vector<Marginal> ms = parse_marginals(cfg.raw("model.weights.marginals"));
    if (ms.size() != ex.n)
      throw ConfigError("marginal list has " + std::to_string(ms.size()) +
                        " items, model.n = " + std::to_string(ex.n));
    ex.spec.weights = WeightDist::independent(std::move(ms));
  }

  const std::string nkind =
      cfg.get_enum("model.noise", {"none", "adversarial", "unbiased"}, "none");
  if (nkind == "none") {
    ex.spec.noise = NoiseModel::none();
  } else if (nkind == "adversarial") {
    const std::string strat = cfg.get_enum(
        "model.noise.strategy",
        {"constant_bias", "sign_aligned", "random_bounded"}, "sign_aligned");
    ex.spec.noise = NoiseModel::adversarial(
        cfg.get_double("model.noise.level"),
        strat == "constant_bias"  ? NoiseModel::AdvStrategy::ConstantBias
        : strat == "sign_aligned" ? NoiseModel::AdvStrategy::SignAligned
                                  : NoiseModel::AdvStrategy::RandomBounded);
  } else {
    const std::string d = cfg.get_enum("model.noise.strategy",
                                       {"rademacher", "uniform_sym"},
                                       "rademacher");
    ex.spec.noise = NoiseModel::unbiased(cfg.get_double("model.noise.level"),
                                         d == "rademacher"
                                             ? NoiseModel::UnbDist::Rademacher
                                             : NoiseModel::UnbDist::UniformSym);
  }

  ex.spec.init.ell = cfg.get_double("init.ell", 0.1);
  ex.spec.init.e_sign =
      cfg.get_enum("init.e_sign", {"mixed", "nonnegative"}, "mixed") == "mixed"
          ? InitSpec::ESign::Mixed
          : InitSpec::ESign::NonNegative;
  ex.spec.init.n0_level = cfg.get_double("init.n0_level", 0.0);
  ex.spec.init.sigma_lo = cfg.get_double("init.sigma_lo", 1.0);
  ex.spec.init.sigma_hi = cfg.get_double("init.sigma_hi", 1.0);
  ex.spec.init.validate();

  const Moments mom = moments(ex.spec.weights);
  if (cfg.has("algo.T") || cfg.has("algo.N")) {
    ex.has_algo = true;
    AlgoParams dflt = default_params(mom, ex.n, std::max(ex.spec.init.ell, 1e-3));
    ex.algo.alpha = cfg.get_double("algo.alpha", dflt.alpha);
    ex.algo.eta = cfg.get_double("algo.eta", dflt.eta);
    ex.algo.r = cfg.get_double("algo.r", dflt.r);
    ex.algo.T = cfg.get_size("algo.T");
    ex.algo.N = cfg.get_size("algo.N");
    ex.algo.seed = ex.seed;
    ex.algo.pairing = cfg.get_enum("algo.pairing",
                                   {"closed_form", "random_pairs"},
                                   "closed_form") == "closed_form"
                          ? Pairing::ClosedFormAllPairs
                          : Pairing::RandomPairs;
    ex.algo.p_pairs = cfg.get_size("algo.p_pairs", 0);
    ex.algo.validate();
  }

  if (cfg.has("equil.epsilon")) {
    ex.has_equil = true;
    AlgoParams dflt = default_params(mom, ex.n, std::max(ex.spec.init.ell, 1e-3));
    ex.equil.alpha = cfg.get_double("equil.alpha", dflt.alpha);
    ex.equil.eta = cfg.get_double("equil.eta");
    ex.equil.T_inner = cfg.get_size("equil.T_inner");
    ex.equil.epsilon = cfg.get_double("equil.epsilon");
    if (cfg.has("equil.lambda0"))
      ex.equil.lambda0 = cfg.get_double("equil.lambda0");
    ex.equil.N = cfg.get_size("equil.N");
    if (cfg.has("equil.max_outer"))
      ex.equil.max_outer = cfg.get_size("equil.max_outer");
    ex.equil.seed = ex.seed;
    ex.equil.validate();
  }

  if (cfg.has("sweep.param")) {
    SweepSpec sw;
    sw.param = cfg.raw("sweep.param");
    if (!known_config_keys().count(sw.param) || sw.param.rfind("sweep.", 0) == 0)
      throw ConfigError("sweep.param names an unknown key: " + sw.param);
    for (const std::string& v : detail::split(cfg.raw("sweep.values"), ','))
      sw.values.push_back(detail::parse_double("sweep.values", detail::trim(v)));
    if (cfg.has("sweep.seeds")) {
      for (const std::string& v : detail::split(cfg.raw("sweep.seeds"), ','))
        sw.seeds.push_back(detail::parse_u64("sweep.seeds", detail::trim(v)));
    } else {
      sw.seeds.push_back(ex.seed);
    }
    if (sw.values.empty()) throw ConfigError("sweep.values is empty");
    ex.sweep = std::move(sw);
  }
  return ex;
}

/// Canonical resolved-config text: every key the experiment actually uses,
/// defaults included.
inline Config resolved_config(const Experiment& ex) {
  Config out;
  out.set("seed", detail::fmt_u64(ex.seed));
  out.set("model.m", detail::fmt_u64(ex.m));
  out.set("model.n", detail::fmt_u64(ex.n));
  out.set("model.ground_truth",
          ex.gt_kind == GroundTruthKind::Identity ? "identity"
          : ex.gt_kind == GroundTruthKind::RandomNonnegUnitL1 ? "random"
                                                              : "overlapping");
  if (ex.gt_kind == GroundTruthKind::Overlapping)
    out.set("model.corr", detail::fmt_double(ex.corr));
  if (ex.spec.weights.variant == WeightDist::Variant::BernoulliUniform) {
    out.set("model.weights", "bernoulli_uniform");
    out.set("model.weights.s", detail::fmt_double(ex.spec.weights.s));
  } else {
    out.set("model.weights", "independent");
    out.set("model.weights.marginals",
            serialize_marginals(ex.spec.weights.marginals));
  }
  const NoiseModel& nm = ex.spec.noise;
  if (nm.variant == NoiseModel::Variant::None) {
    out.set("model.noise", "none");
  } else if (nm.variant == NoiseModel::Variant::Adversarial) {
    out.set("model.noise", "adversarial");
    out.set("model.noise.strategy",
            nm.strategy == NoiseModel::AdvStrategy::ConstantBias
                ? "constant_bias"
                : nm.strategy == NoiseModel::AdvStrategy::SignAligned
                      ? "sign_aligned"
                      : "random_bounded");
    out.set("model.noise.level", detail::fmt_double(nm.level));
  } else {
    out.set("model.noise", "unbiased");
    out.set("model.noise.strategy",
            nm.dist == NoiseModel::UnbDist::Rademacher ? "rademacher"
                                                       : "uniform_sym");
    out.set("model.noise.level", detail::fmt_double(nm.level));
  }
  out.set("init.ell", detail::fmt_double(ex.spec.init.ell));
  out.set("init.e_sign", ex.spec.init.e_sign == InitSpec::ESign::Mixed
                             ? "mixed"
                             : "nonnegative");
  out.set("init.n0_level", detail::fmt_double(ex.spec.init.n0_level));
  out.set("init.sigma_lo", detail::fmt_double(ex.spec.init.sigma_lo));
  out.set("init.sigma_hi", detail::fmt_double(ex.spec.init.sigma_hi));
  if (ex.has_algo) {
    out.set("algo.alpha", detail::fmt_double(ex.algo.alpha));
    out.set("algo.eta", detail::fmt_double(ex.algo.eta));
    out.set("algo.r", detail::fmt_double(ex.algo.r));
    out.set("algo.T", detail::fmt_u64(ex.algo.T));
    out.set("algo.N", detail::fmt_u64(ex.algo.N));
    out.set("algo.pairing", ex.algo.pairing == Pairing::ClosedFormAllPairs
                                ? "closed_form"
                                : "random_pairs");
    if (ex.algo.pairing == Pairing::RandomPairs)
      out.set("algo.p_pairs", detail::fmt_u64(ex.algo.p_pairs));
  }
  if (ex.has_equil) {
    out.set("equil.alpha", detail::fmt_double(ex.equil.alpha));
    out.set("equil.eta", detail::fmt_double(ex.equil.eta));
    out.set("equil.T_inner", detail::fmt_u64(ex.equil.T_inner));
    out.set("equil.epsilon", detail::fmt_double(ex.equil.epsilon));
    if (ex.equil.lambda0)
      out.set("equil.lambda0", detail::fmt_double(*ex.equil.lambda0));
    out.set("equil.N", detail::fmt_u64(ex.equil.N));
    if (ex.equil.max_outer)
      out.set("equil.max_outer", detail::fmt_u64(*ex.equil.max_outer));
  }
  if (ex.sweep) {
    out.set("sweep.param", ex.sweep->param);
    std::string vals;
    for (double v : ex.sweep->values) {
      if (!vals.empty()) vals += ",";
      vals += detail::fmt_double(v);
    }
    out.set("sweep.values", vals);
    std::string seeds;
    for (std::uint64_t s : ex.sweep->seeds) {
      if (!seeds.empty()) seeds += ",";
      seeds += detail::fmt_u64(s);
    }
    out.set("sweep.seeds", seeds);
  }
  return out;
}

}  // namespace purelu

#endif  // PURELU_CONFIG_HPP
