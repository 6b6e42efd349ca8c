#ifndef HPSPIN_EXPERIMENT_HPP
#define HPSPIN_EXPERIMENT_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"

#include "hpspin/full_model.hpp"
#include "hpspin/heavytail_law.hpp"
#include "hpspin/monomial_partition.hpp"
#include "hpspin/nim_model.hpp"
#include "hpspin/phase_functions.hpp"
#include "hpspin/sphere_sampler.hpp"

namespace hpspin {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "1.0.0";

enum class Experiment { Thresholds, MonomialZ, NimPredict, Simulate, Regimes, Tune, Mcmc, Gse, Frechet, Ultrametric };

inline const std::vector<std::pair<Experiment, std::string>>& experiment_names() {
  static const std::vector<std::pair<Experiment, std::string>> names = {
      {Experiment::Thresholds, "thresholds"}, {Experiment::MonomialZ, "monomial-z"},
      {Experiment::NimPredict, "nim-predict"}, {Experiment::Simulate, "simulate"},
      {Experiment::Regimes, "regimes"},       {Experiment::Tune, "tune"},
      {Experiment::Mcmc, "mcmc"},             {Experiment::Gse, "gse"},
      {Experiment::Frechet, "frechet"},       {Experiment::Ultrametric, "ultrametric"}};
  return names;
}

inline std::string to_string(Experiment e) {
  for (const auto& [k, v] : experiment_names())
    if (k == e) return v;
  return "?";
}

inline std::optional<Experiment> experiment_from_string(const std::string& s) {
  for (const auto& [k, v] : experiment_names())
    if (v == s) return k;
  return std::nullopt;
}

/// Default parameter block per experiment; the key set is also the allowed set.
inline json default_params(Experiment e) {
  switch (e) {
    case Experiment::Thresholds: return {{"p_max", 8}};
    case Experiment::MonomialZ: return {{"p", 3}, {"H", 1.0}, {"parity", "even"}, {"eps", 0.1}};
    case Experiment::NimPredict: return {{"terms", json::array()}, {"eps", 0.1}};
    case Experiment::Simulate:
      return {{"source", "sampled"}, {"planted", json::array()}, {"background_count", 0},
              {"background_scale", 0.1}, {"guard", -1.0}, {"top_count", 0}, {"tail_eps", 0.1}};
    case Experiment::Regimes: return json::object();
    case Experiment::Tune:
      return {{"targets", json::object()}, {"tolerance", 0.02}, {"budget", 400}};
    case Experiment::Mcmc:
      return {{"source", "planted"}, {"planted", json::array()}, {"background_count", 0},
              {"background_scale", 0.1}, {"chains_per_pattern", 4}, {"steps", 20000},
              {"proposal_scale", 0.05}, {"thin", 10}, {"frames", false}};
    case Experiment::Gse:
      return {{"source", "planted"}, {"planted", json::array()}, {"background_count", 0},
              {"background_scale", 0.1}, {"restarts", 5}, {"include_beta", false}};
    case Experiment::Frechet: return {{"p", 2}};
    case Experiment::Ultrametric:
      return {{"planted", json::array()}, {"background_count", 0}, {"background_scale", 0.1},
              {"chains_per_pattern", 4}, {"steps", 20000}, {"proposal_scale", 0.05}, {"margin", 0.0}};
  }
  return json::object();
}

struct LawRecord {
  std::string family = "constant";
  double alpha = 1.0;
  double gamma = 1.0;
  bool operator==(const LawRecord&) const = default;
};

/// Everything a run depends on, except the worker count, which never changes results.
struct ExperimentConfig {
  Experiment experiment = Experiment::Thresholds;
  LawRecord law;
  std::map<int, double> alphas{{2, 1.0}};
  double beta = 1.0;
  double growth_margin = 0.1;
  std::size_t n = 100;
  std::size_t K = 8;
  std::uint64_t seed = 1;
  std::size_t trials = 1000;
  json params = json::object();

  bool operator==(const ExperimentConfig& o) const {
    return experiment == o.experiment && law == o.law && alphas == o.alphas && beta == o.beta &&
           growth_margin == o.growth_margin && n == o.n && K == o.K && seed == o.seed &&
           trials == o.trials && params == o.params;
  }

  MixtureProfile profile() const {
    MixtureProfile m;
    m.alphas = alphas;
    m.beta = beta;
    m.growth_margin = growth_margin;
    return m;
  }

  TailLaw tail_law() const {
    return law.family == "polylog" ? TailLaw::polylog(law.alpha, law.gamma) : TailLaw::constant(law.alpha);
  }

  /// Parameter value with the experiment default filled in.
  json param(const std::string& key) const {
    if (params.contains(key)) return params.at(key);
    return default_params(experiment).at(key);
  }

  static ExperimentConfig defaults(Experiment e) {
    ExperimentConfig c;
    c.experiment = e;
    c.params = default_params(e);
    return c;
  }
};

inline json to_json(const ExperimentConfig& c) {
  json alphas = json::object();
  for (const auto& [p, a] : c.alphas) alphas[std::to_string(p)] = a;
  json law = {{"family", c.law.family}, {"alpha", c.law.alpha}};
  if (c.law.family == "polylog") law["gamma"] = c.law.gamma;
  return {{"experiment", to_string(c.experiment)},
          {"law", law},
          {"profile", {{"alphas", alphas}, {"beta", c.beta}, {"growth_margin", c.growth_margin}}},
          {"n", c.n},
          {"K", c.K},
          {"seeds", {{"master", c.seed}, {"trials", c.trials}}},
          {"params", c.params}};
}

/// Canonical text: sorted keys, compact separators. Digest and round trips use it.
inline std::string emit(const ExperimentConfig& c) { return to_json(c).dump(); }

inline std::string digest(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a 64
  for (unsigned char ch : emit(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

struct ParseResult {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> errors;
};

namespace detail {

inline void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where,
                       std::vector<std::string>& errors) {
  if (!obj.is_object()) {
    errors.push_back(where + " must be an object");
    return;
  }
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) errors.push_back("unknown key " + (where.empty() ? "" : where + ".") + k);
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where, std::vector<std::string>& errors) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const std::exception&) {
    errors.push_back("bad value for " + where + key);
  }
}

}  // namespace detail

/// Structural parse; rejects unknown keys at every level. Semantic checks are in validate().
inline ParseResult parse_config(const json& j) {
  ParseResult r;
  auto& err = r.errors;
  detail::check_keys(j, {"experiment", "law", "profile", "n", "K", "seeds", "params"}, "", err);
  if (!err.empty() && !j.is_object()) return r;
  ExperimentConfig c;
  if (!j.contains("experiment")) {
    err.push_back("missing key experiment");
    return r;
  }
  const auto e = j.at("experiment").is_string() ? experiment_from_string(j.at("experiment").get<std::string>())
                                                : std::nullopt;
  if (!e) {
    err.push_back("unknown experiment");
    return r;
  }
  c = ExperimentConfig::defaults(*e);
  if (j.contains("law")) {
    const auto& law = j.at("law");
    detail::check_keys(law, {"family", "alpha", "gamma"}, "law", err);
    if (law.is_object()) {
      detail::read(law, "family", c.law.family, "law.", err);
      detail::read(law, "alpha", c.law.alpha, "law.", err);
      detail::read(law, "gamma", c.law.gamma, "law.", err);
    }
  }
  if (j.contains("profile")) {
    const auto& prof = j.at("profile");
    detail::check_keys(prof, {"alphas", "beta", "growth_margin"}, "profile", err);
    if (prof.is_object()) {
      if (prof.contains("alphas")) {
        c.alphas.clear();
        const auto& a = prof.at("alphas");
        if (!a.is_object()) {
          err.push_back("profile.alphas must be an object");
        } else {
          for (const auto& [k, v] : a.items()) {
            try {
              std::size_t pos = 0;
              const int p = std::stoi(k, &pos);
              if (pos != k.size()) throw std::invalid_argument(k);
              c.alphas[p] = v.get<double>();
            } catch (const std::exception&) {
              err.push_back("bad entry profile.alphas." + k);
            }
          }
        }
      }
      detail::read(prof, "beta", c.beta, "profile.", err);
      detail::read(prof, "growth_margin", c.growth_margin, "profile.", err);
    }
  }
  detail::read(j, "n", c.n, "", err);
  detail::read(j, "K", c.K, "", err);
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    detail::check_keys(s, {"master", "trials"}, "seeds", err);
    if (s.is_object()) {
      detail::read(s, "master", c.seed, "seeds.", err);
      detail::read(s, "trials", c.trials, "seeds.", err);
    }
  }
  if (j.contains("params")) {
    const auto defaults = default_params(*e);
    std::set<std::string> allowed;
    for (const auto& [k, v] : defaults.items()) allowed.insert(k);
    detail::check_keys(j.at("params"), allowed, "params", err);
    if (j.at("params").is_object())
      for (const auto& [k, v] : j.at("params").items())
        if (allowed.count(k)) c.params[k] = v;
  }
  if (err.empty()) r.config = c;
  return r;
}

inline ParseResult parse_config_text(const std::string& text) {
  try {
    return parse_config(json::parse(text));
  } catch (const json::parse_error& ex) {
    return {std::nullopt, {std::string("config is not valid JSON: ") + ex.what()}};
  }
}

/// Semantic checks. Returns every problem found; never throws.
inline std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> err;
  if (c.law.family != "constant" && c.law.family != "polylog") err.push_back("law.family must be constant or polylog");
  if (!(c.law.alpha > 0.0 && c.law.alpha < 2.0)) err.push_back("tail exponent out of (0,2)");
  int max_p = 0;
  bool any = false;
  for (const auto& [p, a] : c.alphas) {
    if (p < 2) err.push_back("profile order " + std::to_string(p) + " must be >= 2");
    if (!(a >= 0.0) || !std::isfinite(a)) err.push_back("profile alpha(" + std::to_string(p) + ") must be >= 0");
    if (a > 0.0) {
      any = true;
      max_p = std::max(max_p, p);
    }
  }
  const bool needs_profile = c.experiment != Experiment::Thresholds && c.experiment != Experiment::MonomialZ &&
                             c.experiment != Experiment::NimPredict && c.experiment != Experiment::Tune &&
                             c.experiment != Experiment::Frechet;
  if (!any && needs_profile) err.push_back("no interactions");
  if (!(c.beta > 0.0)) err.push_back("profile.beta must be > 0");
  if (c.n < 1) err.push_back("n must be >= 1");
  if (needs_profile && c.n < static_cast<std::size_t>(max_p)) err.push_back("n must be >= the largest order p");
  if (c.K < 1) err.push_back("K must be >= 1");
  if (c.trials < 1) err.push_back("seeds.trials must be >= 1");
  for (const auto& [p, a] : c.alphas) {
    if (a > 0.0 && p >= 2 && c.n >= static_cast<std::size_t>(p) &&
        std::log(static_cast<double>(c.K)) > log_binomial(c.n, static_cast<std::size_t>(p)) + 1e-9) {
      err.push_back("K exceeds C(n," + std::to_string(p) + ")");
    }
  }
  auto want_int = [&](const char* key, long long lo) {
    const auto v = c.param(key);
    if (!v.is_number_integer() || v.get<long long>() < lo)
      err.push_back(std::string("params.") + key + " must be an integer >= " + std::to_string(lo));
  };
  auto want_num = [&](const char* key) {
    if (!c.param(key).is_number()) err.push_back(std::string("params.") + key + " must be a number");
  };
  auto check_planted = [&](bool required) {
    const auto pl = c.param("planted");
    if (!pl.is_array()) {
      err.push_back("params.planted must be a list");
      return;
    }
    if (required && pl.empty()) err.push_back("params.planted must not be empty");
    for (const auto& t : pl) {
      if (!t.is_object() || !t.contains("p") || !t.contains("indices") || (!t.contains("H") && !t.contains("H_rel"))) {
        err.push_back("planted entries need p, indices and H or H_rel");
        continue;
      }
      for (const auto& [k, v] : t.items())
        if (k != "p" && k != "indices" && k != "H" && k != "H_rel") err.push_back("unknown key planted." + k);
      const int p = t.at("p").is_number_integer() ? t.at("p").get<int>() : 0;
      if (p < 2 || !t.at("indices").is_array() || t.at("indices").size() != static_cast<std::size_t>(p)) {
        err.push_back("planted entry needs p >= 2 and p indices");
        continue;
      }
      std::set<long long> seen;
      for (const auto& i : t.at("indices")) {
        if (!i.is_number_integer() || i.get<long long>() < 0 || static_cast<std::size_t>(i.get<long long>()) >= c.n)
          err.push_back("planted index out of range");
        else if (!seen.insert(i.get<long long>()).second)
          err.push_back("planted index repeated");
      }
      if (t.contains("H_rel") && c.alphas.count(p) == 0) err.push_back("H_rel needs alpha(p) > 0 for the planted order");
    }
  };
  switch (c.experiment) {
    case Experiment::Thresholds: want_int("p_max", 2); break;
    case Experiment::MonomialZ: {
      want_int("p", 2);
      want_num("H");
      want_num("eps");
      const auto par = c.param("parity");
      if (!par.is_string() || (par != "even" && par != "odd")) err.push_back("params.parity must be even or odd");
      if (c.param("p").is_number_integer() && c.n < c.param("p").get<std::size_t>()) err.push_back("n must be >= p");
      break;
    }
    case Experiment::NimPredict: {
      const auto terms = c.param("terms");
      if (!terms.is_array()) err.push_back("params.terms must be a list");
      else
        for (const auto& t : terms)
          if (!t.is_object() || !t.contains("coef") || !t.contains("indices") || !t.at("indices").is_array())
            err.push_back("nim terms need coef and indices");
      break;
    }
    case Experiment::Simulate:
    case Experiment::Mcmc:
    case Experiment::Gse:
    case Experiment::Ultrametric: {
      const bool planted_only = c.experiment == Experiment::Ultrametric;
      const std::string src = planted_only ? "planted" : c.param("source").get<std::string>();
      if (src != "planted" && src != "sampled") err.push_back("params.source must be planted or sampled");
      check_planted(src == "planted" && (c.experiment == Experiment::Ultrametric));
      want_int("background_count", 0);
      want_num("background_scale");
      if (c.experiment == Experiment::Mcmc || c.experiment == Experiment::Ultrametric) {
        want_int("chains_per_pattern", 1);
        want_int("steps", 1);
        want_num("proposal_scale");
      }
      if (c.experiment == Experiment::Mcmc) want_int("thin", 1);
      if (c.experiment == Experiment::Gse) want_int("restarts", 1);
      break;
    }
    case Experiment::Regimes: break;
    case Experiment::Tune: {
      const auto tg = c.param("targets");
      double total = 0.0;
      if (!tg.is_object() || tg.empty()) {
        err.push_back("params.targets must be a non-empty object p -> a_p");
      } else {
        for (const auto& [k, v] : tg.items()) {
          if (!v.is_number() || v.get<double>() < 0.0) err.push_back("target for " + k + " must be >= 0");
          else total += v.get<double>();
          try {
            if (std::stoi(k) < 2) err.push_back("target order must be >= 2");
          } catch (const std::exception&) {
            err.push_back("bad target order " + k);
          }
        }
      }
      if (total > 1.0 + 1e-12) err.push_back("targets sum to more than 1");
      want_num("tolerance");
      want_int("budget", 1);
      break;
    }
    case Experiment::Frechet: {
      want_int("p", 2);
      if (c.param("p").is_number_integer() && c.n < c.param("p").get<std::size_t>()) err.push_back("n must be >= p");
      break;
    }
  }
  return err;
}

// ---------------------------------------------------------------------------
// Results

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }
};

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.12g}", v);
}

struct ResultRecord {
  json summary;
  CsvTable csv;
  std::string csv_schema;
  std::map<std::string, std::string> extra_files;  // name -> bytes
  std::optional<std::string> guard_trip;           // set when the run declined to predict

  json results_json(const ExperimentConfig& c) const {
    json j = {{"tool_version", kToolVersion},
              {"config_digest", digest(c)},
              {"experiment", to_string(c.experiment)},
              {"csv_schema", csv_schema},
              {"summary", summary}};
    if (guard_trip) j["guard_trip"] = *guard_trip;
    return j;
  }
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> errors)
      : std::runtime_error(errors.empty() ? "invalid config" : errors.front()), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

namespace detail {

inline json predictions_json(const GeometryPrediction& g) {
  return {{"t", g.t},
          {"p_dom", g.p_dom},
          {"component_count", g.component_count},
          {"overlap_support", g.overlap_support},
          {"rsb_level", g.rsb_level},
          {"ultrametric_violation_expected", g.ultrametric_violation_expected}};
}

/// Planted couplings from params, plus optional random background couplings of
/// every order in the profile (|H| uniform on (0, background_scale), random sets).
inline CouplingTensor planted_tensor(const ExperimentConfig& c) {
  std::vector<CouplingTensor::Planted> terms;
  for (const auto& t : c.param("planted")) {
    CouplingTensor::Planted pl;
    pl.p = t.at("p").get<int>();
    for (const auto& i : t.at("indices")) pl.indices.push_back(i.get<std::uint32_t>());
    std::sort(pl.indices.begin(), pl.indices.end());
    pl.h = t.contains("H") ? t.at("H").get<double>()
                           : t.at("H_rel").get<double>() * h_star(pl.p) / (c.beta * c.alphas.at(pl.p));
    terms.push_back(pl);
  }
  const auto count = c.param("background_count").get<std::size_t>();
  const double scale = c.param("background_scale").get<double>();
  Stream s = Stream::derive(c.seed, 0x6267u, 0);
  for (const auto& [p, a] : c.alphas) {
    if (a <= 0.0) continue;
    for (std::size_t k = 0; k < count; ++k) {
      CouplingTensor::Planted pl;
      pl.p = p;
      pl.indices = random_subset(c.n, p, s);
      const double mag = scale * s.uniform_open();
      pl.h = s.coin() ? mag : -mag;
      terms.push_back(pl);
    }
  }
  return CouplingTensor::planted(c.n, terms);
}

inline CouplingTensor tensor_for(const ExperimentConfig& c) {
  const bool planted = c.experiment == Experiment::Ultrametric || c.param("source") == "planted";
  return planted ? planted_tensor(c) : sample_model(c.profile(), c.tail_law(), c.n, c.K, c.seed);
}

inline json regime_json(const RegimeReport& r) {
  json orders = json::array();
  for (const auto& o : r.orders)
    orders.push_back({{"p", o.p}, {"alpha", o.alpha}, {"h1", o.h1}, {"h_eff", o.h_eff}, {"h_star", o.h_star},
                      {"threshold_gap", o.threshold_gap}, {"f", o.f}});
  json j = {{"kind", to_string(r.kind)}, {"guard", r.guard}, {"orders", orders}, {"p_min", r.p_min},
            {"gse_analytic", r.gse.value}};
  if (r.kind == RegimeKind::Fdom) {
    j["p"] = r.p_dom;
    j["h_eff"] = r.h_dom;
    j["indices"] = r.dom_indices;
    j["f_margin"] = r.f_margin;
    j["free_energy"] = r.free_energy;
    if (r.geometry) j["geometry"] = predictions_json(*r.geometry);
  } else if (r.kind == RegimeKind::F1) {
    if (r.p_min == 2) j["log_z_prediction"] = r.f1_log_z;
    if (r.p_min >= 3) {
      j["log_z_scale"] = "O(n^-eps)";
      j["fluctuation_limit"] = r.fluctuation_limit;
    }
  } else if (r.kind == RegimeKind::MDTie) {
    j["f_margin"] = r.f_margin;
  }
  return j;
}

}  // namespace detail

inline ResultRecord run_thresholds(const ExperimentConfig& c) {
  ResultRecord r;
  r.csv_schema = "thresholds/1";
  r.csv.header = {"p", "h_min", "h_star", "lambda", "f", "t"};
  const int p_max = c.param("p_max").get<int>();
  for (int p = 2; p <= p_max; ++p) {
    const double hs = h_star(p);
    const double h = 1.1 * hs;
    r.csv.rows.push_back({std::to_string(p), num(h_min(p)), num(hs), num(lambda_p(p, h)), num(f_p(p, h)),
                          num(t_magnitude(p, h))});
  }
  r.summary = {{"rows", r.csv.rows.size()}, {"p_max", p_max}, {"probe_factor", 1.1}};
  return r;
}

inline ResultRecord run_monomial_z(const ExperimentConfig& c) {
  ResultRecord r;
  r.csv_schema = "monomial-z/1";
  const int p = c.param("p").get<int>();
  const double h = c.param("H").get<double>();
  const Parity parity = c.param("parity") == "odd" ? Parity::Odd : Parity::Even;
  const auto prof = log_partition_series(c.n, p, h, parity);
  const auto w = concentration_window(prof, c.param("eps").get<double>());
  const auto phase = classify_phase(p, h, std::min<std::size_t>(c.n, kDefaultProbeN));
  r.summary = {{"log_sum", prof.log_sum},
               {"argmax_ell", prof.argmax_ell},
               {"truncation_bound", prof.truncation_bound},
               {"phase", to_string(phase.phase)},
               {"cross_check_agrees", phase.cross_check_agrees}};
  if (w.below) {
    r.summary["lambda_pred"] = nullptr;
    r.summary["window_mass"] = nullptr;
  } else {
    r.summary["lambda_pred"] = w.lambda_pred;
    r.summary["window_mass"] = w.window_mass;
    r.summary["argmax_fraction"] = w.argmax_fraction;
  }
  r.csv.header = {"ell", "log_term"};
  for (std::size_t l = 0; l < prof.terms.size(); ++l) r.csv.rows.push_back({std::to_string(l), num(prof.terms[l])});
  return r;
}

inline NimSpec nim_from_params(const ExperimentConfig& c) {
  NimSpec spec;
  spec.n = c.n;
  for (const auto& t : c.param("terms")) {
    NimTerm term;
    term.coef = t.at("coef").get<double>();
    for (const auto& i : t.at("indices")) term.indices.push_back(i.get<std::size_t>());
    spec.terms.push_back(term);
  }
  return spec;
}

inline ResultRecord run_nim_predict(const ExperimentConfig& c) {
  ResultRecord r;
  r.csv_schema = "nim-predict/1";
  const auto spec = nim_from_params(c);
  const auto v = validate_nim(spec);
  if (!v.ok()) {
    std::vector<std::string> errs = v.errors;
    for (const auto& x : v.intersections)
      errs.push_back(fmt::format("terms {} and {} share index {}", x.first, x.second, x.shared_index));
    throw ValidationError(errs);
  }
  const auto pred = nim_free_energy_prediction(spec, c.beta);
  r.summary = {{"all_below", pred.all_below}, {"p_min", pred.p_min}};
  if (pred.all_below) {
    r.summary["log_z"] = pred.log_z;
    r.summary["overlap_zero"] = overlap_zero_prediction(spec, c.beta);
  } else {
    r.summary["free_energy"] = pred.free_energy;
    r.summary["dominant_term"] = pred.dominant_term;
    r.summary["dominant_p"] = pred.dominant_p;
    r.summary["h_eff"] = pred.h_eff;
    r.summary["runner_up_gap"] = pred.runner_up_gap;
    r.summary["geometry"] = detail::predictions_json(geometry_prediction(spec, c.beta));
    json windows = json::array();
    for (const auto& w : concentration_sets(spec, c.beta, c.param("eps").get<double>()))
      windows.push_back({{"term", w.term}, {"p", w.p}, {"kind", w.kind == WindowKind::A ? "A" : "B"},
                         {"lambda", w.lambda}, {"lo", w.lo}, {"hi", w.hi}});
    r.summary["windows"] = windows;
  }
  r.csv.header = {"term", "p", "coef", "h_eff", "h_star", "f"};
  for (std::size_t i = 0; i < spec.terms.size(); ++i) {
    const auto& t = spec.terms[i];
    const double h = c.beta * t.coef;
    r.csv.rows.push_back({std::to_string(i), std::to_string(t.order()), num(t.coef), num(h), num(h_star(t.order())),
                          num(f_p(t.order(), h))});
  }
  return r;
}

inline ResultRecord run_simulate(const ExperimentConfig& c) {
  ResultRecord r;
  r.csv_schema = "simulate/1";
  const auto tensor = detail::tensor_for(c);
  const auto profile = c.profile();
  const auto report = classify_regime(tensor, profile, c.param("guard").get<double>());
  r.summary = detail::regime_json(report);
  r.summary["notices"] = tensor.notices;
  json tails = json::array();
  for (const auto& d : tail_part_diagnostics(tensor, profile, c.param("tail_eps").get<double>()))
    tails.push_back({{"p", d.p}, {"bulk_sum_sq", d.bulk_sum_sq}, {"bound", d.bound}, {"ratio", d.ratio},
                     {"flagged", d.flagged}});
  r.summary["tail_diagnostics"] = tails;
  std::size_t top = c.param("top_count").get<std::size_t>();
  if (top == 0) top = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(c.n), 0.3)));
  for (const auto& b : tensor.blocks) top = std::min(top, b.size());
  const auto graph = build_monomial_graph(tensor, top);
  const auto col = greedy_color(graph.graph);
  r.summary["monomial_graph"] = {{"top_count", top}, {"vertices", graph.vertices.size()},
                                 {"edges", graph.edge_count}, {"intersection_fraction", graph.intersection_fraction},
                                 {"colors", col.color_count}};
  r.csv.header = {"p", "rank", "H", "indices"};
  for (const auto& b : tensor.blocks) {
    for (std::size_t k = 0; k < std::min<std::size_t>(b.size(), c.K); ++k) {
      std::string idx;
      for (auto i : b.index_set(k)) idx += (idx.empty() ? "" : ";") + std::to_string(i);
      r.csv.rows.push_back({std::to_string(b.p), std::to_string(k + 1), num(b.values[k]), idx});
    }
  }
  if (report.kind == RegimeKind::MDTie) r.guard_trip = "multi-dominance tie: no single dominant interaction";
  if (report.kind == RegimeKind::Critical) r.guard_trip = "coupling inside the critical band";
  return r;
}

inline ResultRecord run_regimes(const ExperimentConfig& c, std::size_t workers) {
  ResultRecord r;
  r.csv_schema = "regimes/1";
  const auto profile = c.profile();
  const auto rp = regime_probabilities(profile, c.law.alpha, c.trials, c.seed, workers);
  r.csv.header = {"outcome", "count", "probability"};
  r.csv.rows.push_back({"F1", std::to_string(rp.f1_count), num(rp.p1)});
  json pt = json::object();
  for (const auto& [p, cnt] : rp.dom_count) {
    r.csv.rows.push_back({std::to_string(p), std::to_string(cnt), num(rp.p_t.at(p))});
    pt[std::to_string(p)] = rp.p_t.at(p);
  }
  r.summary = {{"trials", rp.trials}, {"p1", rp.p1}, {"p1_se", rp.p1_se}, {"p_t", pt},
               {"p1_quadrature", p1_product_quadrature(profile, c.law.alpha)}};
  return r;
}

inline ResultRecord run_tune(const ExperimentConfig& c, std::size_t workers) {
  ResultRecord r;
  r.csv_schema = "tune/1";
  std::map<int, double> targets;
  const json target_block = c.param("targets");
  for (const auto& [k, v] : target_block.items()) targets[std::stoi(k)] = v.get<double>();
  const auto res = tune_profile(targets, c.law.alpha, c.beta, c.param("tolerance").get<double>(),
                                c.param("budget").get<std::size_t>(), c.trials, c.seed, workers);
  r.csv.header = {"p", "target", "achieved", "alpha"};
  json alphas = json::object();
  for (const auto& [p, a] : targets) {
    r.csv.rows.push_back({std::to_string(p), num(a), num(res.achieved.at(p)), num(res.profile.alpha(p))});
    alphas[std::to_string(p)] = res.profile.alpha(p);
  }
  r.summary = {{"converged", res.converged}, {"max_error", res.max_error}, {"evaluations", res.evaluations},
               {"achieved_p1", res.achieved_p1}, {"alphas", alphas}};
  r.extra_files["profile.json"] =
      json({{"alphas", alphas}, {"beta", c.beta}, {"growth_margin", c.growth_margin}}).dump(2) + "\n";
  return r;
}

/// Dominant index set for chain experiments: the Fdom coupling when there is one.
inline std::optional<RegimeReport> dominant_regime(const CouplingTensor& tensor, const MixtureProfile& profile) {
  auto rep = classify_regime(tensor, profile);
  if (rep.kind == RegimeKind::Fdom) return rep;
  return std::nullopt;
}

inline ResultRecord run_mcmc(const ExperimentConfig& c, std::size_t workers) {
  ResultRecord r;
  r.csv_schema = "mcmc/1";
  const auto tensor = detail::tensor_for(c);
  const auto profile = c.profile();
  const auto ham = CompiledHamiltonian::build(tensor, profile);
  const auto rep = classify_regime(tensor, profile);
  ReplicaOptions opt;
  opt.chain.steps = c.param("steps").get<std::size_t>();
  opt.chain.proposal_scale = c.param("proposal_scale").get<double>();
  opt.chain.thin = c.param("thin").get<std::size_t>();
  opt.chains_per_pattern = c.param("chains_per_pattern").get<std::size_t>();
  opt.seed = c.seed;
  opt.workers = workers;
  if (rep.kind == RegimeKind::Fdom) opt.dominant = rep.dom_indices;
  const auto batch = run_replicas(ham, opt);
  r.summary = {{"regime", detail::regime_json(rep)}, {"chains", batch.configs.size()}};
  double acc = 0.0;
  for (double a : batch.acceptance) acc += a;
  r.summary["mean_acceptance"] = acc / static_cast<double>(batch.acceptance.size());
  const auto ov = replica_overlaps(batch, opt.dominant);
  r.summary["overlap"] = {{"mean", ov.mean}, {"second_moment", ov.second_moment},
                          {"restricted_second_moment", ov.restricted_second_moment}, {"histogram", ov.histogram}};
  if (!opt.dominant.empty()) {
    const auto mag = spin_magnitude(batch);
    const auto occ = occupancy(batch, rep.h_dom);
    r.summary["t_prediction"] = rep.geometry->t;
    r.summary["magnitude_mean"] = mag.mean;
    r.summary["magnitude_se"] = mag.se;
    r.summary["occupancy"] = {{"frequency", occ.frequency}, {"negative_mass", occ.negative_mass},
                              {"max_positive_gap_sigma", occ.max_positive_gap_sigma}};
  }
  r.csv.header = {"chain", "start_pattern", "acceptance", "crossings"};
  for (std::size_t j = 0; j < opt.dominant.size(); ++j) r.csv.header.push_back("sq_" + std::to_string(opt.dominant[j]));
  for (std::size_t ch = 0; ch < batch.configs.size(); ++ch) {
    std::vector<std::string> row = {std::to_string(ch), std::to_string(batch.start_pattern[ch]),
                                    num(batch.acceptance[ch]), std::to_string(batch.crossings[ch])};
    for (double v : batch.mean_square[ch]) row.push_back(num(v));
    r.csv.rows.push_back(row);
  }
  if (c.param("frames").get<bool>()) {
    std::ostringstream bin(std::ios::binary);
    for (std::size_t ch = 0; ch < batch.configs.size(); ++ch) write_frame(bin, batch.steps[ch], batch.configs[ch]);
    r.extra_files["chains.bin"] = bin.str();
    r.extra_files["chains.json"] =
        json({{"format", "u64 n, u64 step, n x f64, little-endian"}, {"frames", batch.configs.size()},
              {"n", c.n}, {"frame_order", "chain id"}, {"config_digest", digest(c)}})
            .dump(2) + "\n";
  }
  return r;
}

inline ResultRecord run_gse(const ExperimentConfig& c) {
  ResultRecord r;
  r.csv_schema = "gse/1";
  const auto tensor = detail::tensor_for(c);
  const auto profile = c.profile();
  const auto analytic = gse_analytic(tensor, profile, c.param("include_beta").get<bool>());
  const auto numeric = gse_optimize(tensor, profile, c.param("restarts").get<std::size_t>(), c.seed);
  r.summary = {{"analytic", analytic.value}, {"numeric", numeric.value}, {"p", analytic.p},
               {"indices", analytic.indices}, {"include_beta", c.param("include_beta").get<bool>()},
               {"relative_gap", analytic.value > 0.0 ? (numeric.value - analytic.value) / analytic.value : 0.0}};
  r.csv.header = {"index", "sigma"};
  for (std::size_t i = 0; i < numeric.config.size(); ++i) r.csv.rows.push_back({std::to_string(i), num(numeric.config[i])});
  return r;
}

inline ResultRecord run_frechet(const ExperimentConfig& c, std::size_t workers) {
  ResultRecord r;
  r.csv_schema = "frechet/1";
  const int p = c.param("p").get<int>();
  const auto law = c.tail_law();
  MixtureProfile single;
  single.alphas[p] = 1.0;
  std::vector<double> maxima(c.trials);
  parallel_for(c.trials, workers, [&](std::size_t t) {
    const auto tensor = sample_model(single, law, c.n, 1, splitmix64(c.seed ^ splitmix64(t + 1)));
    maxima[t] = std::abs(tensor.blocks.front().values.front());
  });
  const double ks = frechet_gof(maxima, c.law.alpha);
  r.summary = {{"p", p}, {"trials", c.trials}, {"log_count", log_binomial(c.n, static_cast<std::size_t>(p))},
               {"ks", ks}, {"alpha", c.law.alpha}};
  r.csv.header = {"trial", "rescaled_max"};
  for (std::size_t t = 0; t < maxima.size(); ++t) r.csv.rows.push_back({std::to_string(t), num(maxima[t])});
  return r;
}

inline ResultRecord run_ultrametric(const ExperimentConfig& c, std::size_t workers) {
  ResultRecord r;
  r.csv_schema = "ultrametric/1";
  const auto tensor = detail::planted_tensor(c);
  const auto profile = c.profile();
  const auto rep = classify_regime(tensor, profile);
  if (rep.kind != RegimeKind::Fdom) throw GuardTrip("ultrametric: planted tensor has no single dominant interaction");
  ReplicaOptions opt;
  opt.chain.steps = c.param("steps").get<std::size_t>();
  opt.chain.proposal_scale = c.param("proposal_scale").get<double>();
  opt.chains_per_pattern = c.param("chains_per_pattern").get<std::size_t>();
  opt.dominant = rep.dom_indices;
  opt.seed = c.seed;
  opt.workers = workers;
  const auto batch = run_replicas(CompiledHamiltonian::build(tensor, profile), opt);
  double margin = c.param("margin").get<double>();
  if (margin <= 0.0) margin = 0.5 * rep.geometry->t;
  const auto u = ultrametric_test(batch.configs, margin);
  const double comp = 1.0 / std::ldexp(1.0, rep.p_dom - 1);
  r.summary = {{"p", rep.p_dom}, {"t", rep.geometry->t}, {"margin", margin}, {"triples", u.triples},
               {"violations", u.violations}, {"frequency", u.frequency},
               {"violation_expected", rep.geometry->ultrametric_violation_expected},
               {"lower_bound", 0.5 * comp * comp}};
  r.csv.header = {"chain", "start_pattern", "final_pattern"};
  for (std::size_t ch = 0; ch < batch.configs.size(); ++ch)
    r.csv.rows.push_back({std::to_string(ch), std::to_string(batch.start_pattern[ch]),
                          std::to_string(sign_pattern(batch.configs[ch], opt.dominant))});
  return r;
}

/// Validates and dispatches. Throws ValidationError, GuardTrip or DomainError.
inline ResultRecord run(const ExperimentConfig& c, std::size_t workers = 1) {
  const auto errors = validate(c);
  if (!errors.empty()) throw ValidationError(errors);
  switch (c.experiment) {
    case Experiment::Thresholds: return run_thresholds(c);
    case Experiment::MonomialZ: return run_monomial_z(c);
    case Experiment::NimPredict: return run_nim_predict(c);
    case Experiment::Simulate: return run_simulate(c);
    case Experiment::Regimes: return run_regimes(c, workers);
    case Experiment::Tune: return run_tune(c, workers);
    case Experiment::Mcmc: return run_mcmc(c, workers);
    case Experiment::Gse: return run_gse(c);
    case Experiment::Frechet: return run_frechet(c, workers);
    case Experiment::Ultrametric: return run_ultrametric(c, workers);
  }
  throw std::logic_error("unhandled experiment");
}

}  // namespace hpspin

#endif
