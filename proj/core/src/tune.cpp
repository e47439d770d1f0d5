#include "daisy/tune.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "daisy/error.hpp"
#include "daisy/parallel.hpp"

namespace daisy {

double as_real(const ParamValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  throw TuneError("parameter is not numeric: " + std::get<std::string>(v));
}

std::int64_t as_int(const ParamValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  if (const auto* d = std::get_if<double>(&v)) {
    if (std::floor(*d) == *d && std::isfinite(*d)) return static_cast<std::int64_t>(*d);
    throw TuneError("parameter is not an integer: " + format_real(*d));
  }
  throw TuneError("parameter is not numeric: " + std::get<std::string>(v));
}

std::string as_string(const ParamValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  return format_real(std::get<double>(v));
}

namespace {

nlohmann::ordered_json value_to_json(const ParamValue& v) {
  return std::visit([](const auto& x) { return nlohmann::ordered_json(x); }, v);
}

ParamValue value_from_json(const nlohmann::json& j) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_boolean()) return static_cast<std::int64_t>(j.get<bool>());
  throw TuneError("unsupported parameter value: " + j.dump());
}

nlohmann::ordered_json real_or_null(double x) {
  return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr);
}

double real_from_json(const nlohmann::json& j) {
  return j.is_null() ? -std::numeric_limits<double>::infinity() : j.get<double>();
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 1) return {lo};
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k)
    out[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  out.back() = hi;
  return out;
}

std::vector<ParamValue> grid_values(const Dimension& dim) {
  return std::visit(
      [&](const auto& d) -> std::vector<ParamValue> {
        using D = std::decay_t<decltype(d)>;
        std::vector<ParamValue> out;
        if constexpr (std::is_same_v<D, Categorical>) {
          out = d.values;
        } else if constexpr (std::is_same_v<D, IntUniform>) {
          for (std::int64_t v = d.lo; v <= d.hi; ++v) out.emplace_back(v);
        } else {
          if (!d.grid_points) throw TuneError("grid search needs grid_points for continuous dimension " + dim.name);
          if constexpr (std::is_same_v<D, Uniform>) {
            for (double v : linspace(d.lo, d.hi, *d.grid_points)) out.emplace_back(v);
          } else {
            for (double v : linspace(std::log(d.lo), std::log(d.hi), *d.grid_points))
              out.emplace_back(std::clamp(std::exp(v), d.lo, d.hi));
          }
        }
        return out;
      },
      dim.domain);
}

}  // namespace

nlohmann::ordered_json params_to_json(const Params& params) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [name, value] : params) j[name] = value_to_json(value);
  return j;
}

Params params_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw TuneError("parameters must be a JSON object");
  Params out;
  for (const auto& [name, value] : j.items()) out[name] = value_from_json(value);
  return out;
}

void SearchSpace::validate() const {
  std::set<std::string> names;
  for (const auto& dim : dimensions) {
    if (dim.name.empty()) throw TuneError("search dimension without a name");
    if (!names.insert(dim.name).second) throw TuneError("duplicate search dimension " + dim.name);
    std::visit(
        [&](const auto& d) {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, Categorical>) {
            if (d.values.empty()) throw TuneError("categorical dimension " + dim.name + " is empty");
          } else {
            if (!(d.lo < d.hi)) throw TuneError("dimension " + dim.name + " needs lo < hi");
            if constexpr (std::is_same_v<D, LogUniform>) {
              if (!(d.lo > 0.0)) throw TuneError("log-uniform dimension " + dim.name + " needs lo > 0");
            }
            if constexpr (!std::is_same_v<D, IntUniform>) {
              if (!std::isfinite(d.lo) || !std::isfinite(d.hi))
                throw TuneError("dimension " + dim.name + " has non-finite bounds");
              if (d.grid_points && *d.grid_points == 0)
                throw TuneError("dimension " + dim.name + " has zero grid points");
            }
          }
        },
        dim.domain);
  }
}

bool SearchSpace::contains(const Params& params) const {
  if (params.size() != dimensions.size()) return false;
  for (const auto& dim : dimensions) {
    const auto it = params.find(dim.name);
    if (it == params.end()) return false;
    const ParamValue& v = it->second;
    const bool ok = std::visit(
        [&](const auto& d) {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, Categorical>) {
            return std::find(d.values.begin(), d.values.end(), v) != d.values.end();
          } else if constexpr (std::is_same_v<D, IntUniform>) {
            const auto* i = std::get_if<std::int64_t>(&v);
            return i != nullptr && *i >= d.lo && *i <= d.hi;
          } else {
            const auto* x = std::get_if<double>(&v);
            return x != nullptr && *x >= d.lo && *x <= d.hi;
          }
        },
        dim.domain);
    if (!ok) return false;
  }
  return true;
}

SearchSpace SearchSpace::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw TuneError("search space must be a JSON object");
  SearchSpace space;
  for (const auto& [name, spec] : j.items()) {
    Dimension dim{name, Categorical{}};
    if (spec.is_array()) {
      Categorical c;
      for (const auto& v : spec) c.values.push_back(value_from_json(v));
      dim.domain = std::move(c);
    } else {
      const auto type = spec.value("type", std::string{});
      auto grid = [&]() -> std::optional<std::size_t> {
        if (spec.contains("grid_points")) return spec.at("grid_points").get<std::size_t>();
        return std::nullopt;
      };
      if (type == "choice" || type == "categorical") {
        Categorical c;
        for (const auto& v : spec.at("values")) c.values.push_back(value_from_json(v));
        dim.domain = std::move(c);
      } else if (type == "int_uniform" || type == "randint") {
        dim.domain = IntUniform{spec.at("low").get<std::int64_t>(), spec.at("high").get<std::int64_t>()};
      } else if (type == "uniform") {
        dim.domain = Uniform{spec.at("low").get<double>(), spec.at("high").get<double>(), grid()};
      } else if (type == "log_uniform" || type == "loguniform") {
        dim.domain = LogUniform{spec.at("low").get<double>(), spec.at("high").get<double>(), grid()};
      } else {
        throw TuneError("unknown dimension type '" + type + "' for " + name);
      }
    }
    space.dimensions.push_back(std::move(dim));
  }
  space.validate();
  return space;
}

nlohmann::ordered_json SearchSpace::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& dim : dimensions) {
    nlohmann::ordered_json spec;
    std::visit(
        [&](const auto& d) {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, Categorical>) {
            spec["type"] = "choice";
            spec["values"] = nlohmann::ordered_json::array();
            for (const auto& v : d.values) spec["values"].push_back(value_to_json(v));
          } else {
            if constexpr (std::is_same_v<D, IntUniform>) spec["type"] = "int_uniform";
            if constexpr (std::is_same_v<D, Uniform>) spec["type"] = "uniform";
            if constexpr (std::is_same_v<D, LogUniform>) spec["type"] = "log_uniform";
            spec["low"] = d.lo;
            spec["high"] = d.hi;
            if constexpr (!std::is_same_v<D, IntUniform>) {
              if (d.grid_points) spec["grid_points"] = *d.grid_points;
            }
          }
        },
        dim.domain);
    j[dim.name] = std::move(spec);
  }
  return j;
}

SearchSpace load_search_space(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TuneError("cannot open search space " + path.string());
  try {
    return SearchSpace::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw TuneError("invalid search space " + path.string() + ": " + e.what());
  }
}

SearchStrategy parse_strategy(std::string_view text) {
  if (text == "grid") return SearchStrategy::grid;
  if (text == "random") return SearchStrategy::random;
  if (text == "tpe" || text == "bayes" || text == "bayesian") return SearchStrategy::tpe;
  throw ConfigError("unknown search strategy: " + std::string(text));
}

std::string_view strategy_name(SearchStrategy s) {
  switch (s) {
    case SearchStrategy::grid: return "grid";
    case SearchStrategy::random: return "random";
    case SearchStrategy::tpe: return "tpe";
  }
  return "?";
}

std::vector<Params> grid_search(const SearchSpace& space) {
  space.validate();
  std::vector<std::vector<ParamValue>> axes;
  for (const auto& dim : space.dimensions) axes.push_back(grid_values(dim));
  std::vector<Params> out;
  std::vector<std::size_t> pos(axes.size(), 0);
  while (true) {
    Params p;
    for (std::size_t d = 0; d < axes.size(); ++d) p[space.dimensions[d].name] = axes[d][pos[d]];
    out.push_back(std::move(p));
    std::size_t d = axes.size();
    while (d > 0) {
      --d;
      if (++pos[d] < axes[d].size()) break;
      pos[d] = 0;
      if (d == 0) return out;
    }
    if (axes.empty()) return out;
  }
}

Params sample_random(const SearchSpace& space, Rng& rng) {
  Params p;
  for (const auto& dim : space.dimensions) {
    p[dim.name] = std::visit(
        [&](const auto& d) -> ParamValue {
          using D = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<D, Categorical>) {
            return d.values[uniform_index(rng, d.values.size())];
          } else if constexpr (std::is_same_v<D, IntUniform>) {
            const auto span = static_cast<std::uint64_t>(d.hi - d.lo) + 1;
            return d.lo + static_cast<std::int64_t>(uniform_index(rng, span));
          } else if constexpr (std::is_same_v<D, Uniform>) {
            return d.lo + (d.hi - d.lo) * uniform_unit(rng);
          } else {
            const double a = std::log(d.lo), b = std::log(d.hi);
            return std::clamp(std::exp(a + (b - a) * uniform_unit(rng)), d.lo, d.hi);
          }
        },
        dim.domain);
  }
  return p;
}

std::vector<Params> random_search(const SearchSpace& space, std::size_t n_trials, std::uint64_t seed) {
  space.validate();
  if (n_trials == 0) throw TuneError("random search needs at least one trial");
  Rng rng(seed);
  std::vector<Params> out;
  out.reserve(n_trials);
  for (std::size_t k = 0; k < n_trials; ++k) out.push_back(sample_random(space, rng));
  return out;
}

std::vector<Observation> optimize(const SearchSpace& space, SearchStrategy strategy, std::size_t n_trials,
                                  std::uint64_t seed, const std::function<double(const Params&)>& objective,
                                  const TpeConfig& tpe) {
  std::vector<Observation> history;
  if (strategy == SearchStrategy::tpe) {
    TpeSampler sampler(space, tpe, seed);
    for (std::size_t k = 0; k < n_trials; ++k) {
      Params p = sampler.propose(history);
      const double y = objective(p);
      history.push_back({std::move(p), y});
    }
    return history;
  }
  auto configs = strategy == SearchStrategy::grid ? grid_search(space) : random_search(space, n_trials, seed);
  for (auto& p : configs) {
    const double y = objective(p);
    history.push_back({std::move(p), y});
  }
  return history;
}

nlohmann::ordered_json trial_to_json(const TrialRecord& trial, bool include_wall_time) {
  nlohmann::ordered_json j;
  j["trial_id"] = trial.trial_id;
  j["params"] = params_to_json(trial.params);
  j["cutoff"] = trial.cutoff;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (Metric m : kAllMetrics) metrics[std::string(metric_name(m))] = real_or_null(trial.metrics[m]);
  j["metrics"] = std::move(metrics);
  j["objective_metric"] = std::string(metric_name(trial.objective_metric));
  j["objective"] = real_or_null(trial.objective);
  j["seed"] = trial.seed;
  j["status"] = trial.status == TrialStatus::ok ? "ok" : "diverged";
  j["best_epoch"] = trial.best_epoch ? nlohmann::ordered_json(*trial.best_epoch) : nlohmann::ordered_json(nullptr);
  if (include_wall_time) j["wall_time_ms"] = trial.wall_time_ms;
  return j;
}

TrialRecord trial_from_json(const nlohmann::json& j) {
  TrialRecord t;
  try {
    t.trial_id = j.at("trial_id").get<std::size_t>();
    t.params = params_from_json(j.at("params"));
    t.cutoff = j.value("cutoff", std::size_t{10});
    const auto& metrics = j.at("metrics");
    for (Metric m : kAllMetrics) {
      const std::string name(metric_name(m));
      if (!metrics.contains(name)) throw TuneError("trial " + std::to_string(t.trial_id) + " lacks metric " + name);
      t.metrics[m] = metrics.at(name).is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                 : metrics.at(name).get<double>();
    }
    t.objective_metric = parse_metric(j.value("objective_metric", std::string("NDCG")));
    t.objective = real_from_json(j.at("objective"));
    t.seed = j.value("seed", std::uint64_t{0});
    t.status = j.value("status", std::string("ok")) == "diverged" ? TrialStatus::diverged : TrialStatus::ok;
    if (j.contains("best_epoch") && !j.at("best_epoch").is_null()) t.best_epoch = j.at("best_epoch").get<int>();
    t.wall_time_ms = j.value("wall_time_ms", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw TuneError(std::string("malformed trial record: ") + e.what());
  }
  return t;
}

std::vector<TrialRecord> read_trials_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TuneError("cannot open trial log " + path.string());
  std::vector<TrialRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(trial_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw TuneError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_trials_jsonl(const std::filesystem::path& path, std::span<const TrialRecord> trials,
                        bool include_wall_time) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TuneError("cannot write trial log " + path.string());
  for (const auto& t : trials) out << trial_to_json(t, include_wall_time).dump() << '\n';
}

namespace {

constexpr std::uint64_t kTrialStream = 0x7472;  // "tr"

TrialRecord run_trial(const ModelTrainer& trainer, const InteractionLog& train, const EvalSet& eval,
                      std::size_t id, const Params& params, const TuneOptions& options) {
  TrialRecord t;
  t.trial_id = id;
  t.params = params;
  t.cutoff = options.cutoff;
  t.objective_metric = options.objective;
  t.seed = derive_seed(options.seed ^ kTrialStream, id);
  const auto start = std::chrono::steady_clock::now();
  try {
    auto fit = trainer.fit(train, &eval, params, t.seed, std::nullopt);
    const std::size_t cutoffs[] = {options.cutoff};
    const auto reports = evaluate_all(*fit.model, eval, cutoffs);
    t.metrics = reports.front().mean;
    t.objective = t.metrics[options.objective];
    t.best_epoch = fit.best_epoch;
  } catch (const DivergedError&) {
    t.status = TrialStatus::diverged;
    t.metrics.values.fill(std::numeric_limits<double>::quiet_NaN());
    t.objective = -std::numeric_limits<double>::infinity();
  }
  t.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return t;
}

}  // namespace

TuneResult run_tuning(const ModelTrainer& trainer, const SplitBundle& split, const SearchSpace& space,
                      const TuneOptions& options) {
  space.validate();
  if (options.cutoff == 0) throw TuneError("tuning cutoff must be positive");
  if (options.n_trials == 0) throw TuneError("tuning needs at least one trial");

  // Trials only ever see one of these pairs; the test records and test
  // candidates stay untouched unless the unsafe flag is set.
  const InteractionLog trial_train = options.unsafe_tune_on_test ? split.full_train() : split.train;
  const EvalSet eval = options.unsafe_tune_on_test ? make_eval_set(split.test, split.candidates)
                                                   : make_eval_set(split.validation, split.validation_candidates);
  if (eval.empty()) throw TuneError("validation set is empty; tuning needs held-out users");

  TuneResult result;
  if (space.empty() || options.strategy != SearchStrategy::tpe) {
    std::vector<Params> configs;
    if (space.empty())
      configs.emplace_back();
    else if (options.strategy == SearchStrategy::grid)
      configs = grid_search(space);
    else
      configs = random_search(space, options.n_trials, options.seed);
    result.trials.resize(configs.size());
    parallel_for(
        configs.size(),
        [&](std::size_t k) { result.trials[k] = run_trial(trainer, trial_train, eval, k, configs[k], options); },
        options.threads);
    if (options.on_trial)
      for (const auto& t : result.trials) options.on_trial(t);
  } else {
    TpeSampler sampler(space, options.tpe, options.seed);
    std::vector<Observation> history;
    for (std::size_t k = 0; k < options.n_trials; ++k) {
      Params p = sampler.propose(history);
      auto t = run_trial(trainer, trial_train, eval, k, p, options);
      history.push_back({std::move(p), t.objective});
      if (options.on_trial) options.on_trial(t);
      result.trials.push_back(std::move(t));
    }
  }

  const TrialRecord* best = nullptr;
  for (const auto& t : result.trials)
    if (t.status == TrialStatus::ok && (best == nullptr || t.objective > best->objective)) best = &t;
  if (best == nullptr) throw TuneError("tuning failed: every trial diverged");
  result.best = *best;

  std::optional<int> epochs;
  if (best->best_epoch) epochs = *best->best_epoch + 1;
  auto final_fit = trainer.fit(split.full_train(), nullptr, best->params, best->seed, epochs);
  result.final_model = std::move(final_fit.model);
  result.final_trace = std::move(final_fit.trace);

  std::vector<std::size_t> cutoffs = options.report_cutoffs;
  cutoffs.push_back(options.cutoff);
  std::sort(cutoffs.begin(), cutoffs.end());
  cutoffs.erase(std::unique(cutoffs.begin(), cutoffs.end()), cutoffs.end());
  cutoffs.erase(std::remove(cutoffs.begin(), cutoffs.end(), std::size_t{0}), cutoffs.end());
  const EvalSet test = make_eval_set(split.test, split.candidates);
  result.test_reports = evaluate_all(*result.final_model, test, cutoffs, {}, false, options.threads);
  return result;
}

}  // namespace daisy
