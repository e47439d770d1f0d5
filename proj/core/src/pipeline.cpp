#include "daisy/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "daisy/error.hpp"
#include "daisy/hashing.hpp"

#ifndef DAISY_VERSION
#define DAISY_VERSION "0.0.0"
#endif

namespace daisy {

EvaluationMode parse_mode(std::string_view text) {
  if (text == "relax") return EvaluationMode::relax;
  if (text == "hard_strict" || text == "hard-strict") return EvaluationMode::hard_strict;
  if (text == "soft_strict" || text == "soft-strict") return EvaluationMode::soft_strict;
  if (text == "mixed") return EvaluationMode::mixed;
  throw ConfigError("unknown evaluation mode: " + std::string(text));
}

std::string_view mode_name(EvaluationMode mode) {
  switch (mode) {
    case EvaluationMode::relax: return "relax";
    case EvaluationMode::hard_strict: return "hard_strict";
    case EvaluationMode::soft_strict: return "soft_strict";
    case EvaluationMode::mixed: return "mixed";
  }
  return "?";
}

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

Initializer initializer_from_json(const json& j, Initializer base) {
  if (j.is_string()) {
    base.kind = parse_initializer(j.get<std::string>());
    return base;
  }
  check_keys(j, {"kind", "a", "sigma"}, "initializer");
  if (j.contains("kind")) base.kind = parse_initializer(j.at("kind").get<std::string>());
  read(j, "a", base.a);
  read(j, "sigma", base.sigma);
  return base;
}

SamplerConfig sampler_from_json(const json& j, SamplerConfig base) {
  if (j.is_string()) {
    base.kind = parse_sampler_kind(j.get<std::string>());
    return base;
  }
  check_keys(j, {"kind", "negatives_per_positive", "popularity_exponent"}, "sampler");
  if (j.contains("kind")) base.kind = parse_sampler_kind(j.at("kind").get<std::string>());
  read(j, "negatives_per_positive", base.negatives_per_positive);
  read(j, "popularity_exponent", base.popularity_exponent);
  return base;
}

void train_from_json(const json& j, TrainConfig& t) {
  check_keys(j,
             {"loss", "optimizer", "learning_rate", "batch_size", "l1", "l2", "initializer", "factors", "epochs_max",
              "patience", "dense_regularization", "validation_cutoff"},
             "train");
  if (j.contains("loss")) t.loss = parse_loss(j.at("loss").get<std::string>());
  if (j.contains("optimizer")) t.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  if (j.contains("initializer")) t.initializer = initializer_from_json(j.at("initializer"), t.initializer);
  read(j, "learning_rate", t.learning_rate);
  read(j, "batch_size", t.batch_size);
  read(j, "l1", t.l1);
  read(j, "l2", t.l2);
  read(j, "factors", t.factors);
  read(j, "epochs_max", t.epochs_max);
  read(j, "patience", t.patience);
  read(j, "dense_regularization", t.dense_regularization);
  read(j, "validation_cutoff", t.validation_cutoff);
}

void baselines_from_json(const json& j, BaselineConfig& b) {
  check_keys(j, {"itemknn", "puresvd", "slim"}, "baselines");
  if (j.contains("itemknn")) {
    const auto& k = j.at("itemknn");
    check_keys(k, {"neighbors", "normalize", "threads"}, "baselines.itemknn");
    read(k, "neighbors", b.itemknn.neighbors);
    read(k, "normalize", b.itemknn.normalize);
    read(k, "threads", b.itemknn.threads);
  }
  if (j.contains("puresvd")) {
    const auto& s = j.at("puresvd");
    check_keys(s, {"factors", "oversampling", "power_iterations"}, "baselines.puresvd");
    read(s, "factors", b.svd_factors);
    read(s, "oversampling", b.rsvd.oversampling);
    read(s, "power_iterations", b.rsvd.power_iterations);
  }
  if (j.contains("slim")) {
    const auto& s = j.at("slim");
    check_keys(s, {"l1", "l2", "tolerance", "max_sweeps", "threads"}, "baselines.slim");
    read(s, "l1", b.slim.l1);
    read(s, "l2", b.slim.l2);
    read(s, "tolerance", b.slim.cd.tolerance);
    read(s, "max_sweeps", b.slim.cd.max_sweeps);
    read(s, "threads", b.slim.threads);
  }
}

void tuning_from_json(const json& j, TuningConfig& t, const std::filesystem::path& base_dir) {
  check_keys(j,
             {"strategy", "trials", "objective", "cutoff", "n_startup", "gamma", "n_candidates",
              "unsafe_tune_on_test", "space", "space_file"},
             "tuning");
  if (j.contains("strategy")) t.strategy = parse_strategy(j.at("strategy").get<std::string>());
  if (j.contains("objective")) t.objective = parse_metric(j.at("objective").get<std::string>());
  read(j, "trials", t.n_trials);
  read(j, "cutoff", t.cutoff);
  read(j, "n_startup", t.tpe.n_startup);
  read(j, "gamma", t.tpe.gamma);
  read(j, "n_candidates", t.tpe.n_candidates);
  read(j, "unsafe_tune_on_test", t.unsafe_tune_on_test);
  if (j.contains("space") && j.contains("space_file")) throw ConfigError("give either tuning.space or tuning.space_file");
  if (j.contains("space") && !j.at("space").is_null()) t.space = SearchSpace::from_json(j.at("space"));
  if (j.contains("space_file")) t.space = load_search_space(resolve(j.at("space_file").get<std::string>(), base_dir));
}

ojson initializer_to_json(const Initializer& init) {
  ojson j;
  j["kind"] = std::string(initializer_name(init.kind));
  j["a"] = init.a;
  j["sigma"] = init.sigma;
  return j;
}

ojson sampler_to_json(const SamplerConfig& s) {
  ojson j;
  j["kind"] = std::string(sampler_kind_name(s.kind));
  j["negatives_per_positive"] = s.negatives_per_positive;
  j["popularity_exponent"] = s.popularity_exponent;
  return j;
}

ojson split_to_json(const SplitConfig& s) {
  ojson j;
  j["method"] = split_method_name(s);
  j["level"] = s.level == SplitLevel::global ? "global" : "user";
  j["rho"] = s.rho;
  j["validation_fraction"] = s.validation_fraction;
  j["candidate_size"] = s.candidate_size;
  return j;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool truthy(const ParamValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) {
    if (*s == "true" || *s == "1") return true;
    if (*s == "false" || *s == "0") return false;
    throw ConfigError("expected a boolean, got '" + *s + "'");
  }
  return as_real(v) != 0.0;
}

std::size_t positive_size(const ParamValue& v, const std::string& name) {
  const auto x = as_int(v);
  if (x < 1) throw ConfigError("hyper-parameter " + name + " must be >= 1");
  return static_cast<std::size_t>(x);
}

void apply_params(RunConfig& c, const Params& params) {
  const bool factor_model = c.model == ModelKind::mf || c.model == ModelKind::fm;
  for (const auto& [name, value] : params) {
    auto unknown = [&] {
      throw ConfigError("hyper-parameter '" + name + "' does not apply to " +
                        std::string(model_kind_name(c.model)));
    };
    if (name == "factors") {
      if (factor_model)
        c.train.factors = positive_size(value, name);
      else if (c.model == ModelKind::puresvd)
        c.baselines.svd_factors = positive_size(value, name);
      else
        unknown();
    } else if (name == "l1" || name == "l2") {
      const double x = as_real(value);
      if (factor_model)
        (name == "l1" ? c.train.l1 : c.train.l2) = x;
      else if (c.model == ModelKind::slim)
        (name == "l1" ? c.baselines.slim.l1 : c.baselines.slim.l2) = x;
      else
        unknown();
    } else if (name == "neighbors") {
      if (c.model != ModelKind::itemknn) unknown();
      c.baselines.itemknn.neighbors = positive_size(value, name);
    } else if (name == "normalize") {
      if (c.model != ModelKind::itemknn) unknown();
      c.baselines.itemknn.normalize = truthy(value);
    } else if (!factor_model) {
      unknown();
    } else if (name == "lr" || name == "learning_rate") {
      c.train.learning_rate = as_real(value);
    } else if (name == "batch_size") {
      c.train.batch_size = positive_size(value, name);
    } else if (name == "epochs" || name == "epochs_max") {
      c.train.epochs_max = static_cast<int>(positive_size(value, name));
    } else if (name == "patience") {
      c.train.patience = static_cast<int>(as_int(value));
    } else if (name == "loss") {
      c.train.loss = parse_loss(as_string(value));
    } else if (name == "optimizer") {
      c.train.optimizer = parse_optimizer(as_string(value));
    } else if (name == "initializer") {
      c.train.initializer.kind = parse_initializer(as_string(value));
    } else if (name == "init_sigma") {
      c.train.initializer.sigma = as_real(value);
    } else if (name == "sampler") {
      c.train.sampler.kind = parse_sampler_kind(as_string(value));
    } else if (name == "neg_per_pos") {
      c.train.sampler.negatives_per_positive = static_cast<int>(positive_size(value, name));
    } else if (name == "alpha") {
      c.train.sampler.popularity_exponent = as_real(value);
    } else {
      unknown();
    }
  }
}

template <class F>
auto run_stage(const char* stage, std::vector<StageTiming>& timings, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  auto finish = [&] {
    timings.push_back(
        {stage, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count()});
  };
  try {
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      finish();
    } else {
      auto result = body();
      finish();
      return result;
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(stage, e.what());
  }
}

void record_output(ojson& outputs, const std::filesystem::path& root, const std::filesystem::path& file) {
  outputs[std::filesystem::relative(file, root).generic_string()] = sha256_file(file);
}

ojson factors_of(const RunConfig& c, const std::string& dataset_sha) {
  ojson f;
  f["dataset"] = dataset_sha;
  f["threshold"] = c.preprocess.threshold;
  f["filter"] = filter_name(c.preprocess);
  f["split"] = split_to_json(c.split);
  f["seed"] = c.seed;
  return f;
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  check_keys(j,
             {"dataset", "preprocess", "split", "model", "train", "sampler", "baselines", "tuning", "model_overrides",
              "cutoffs", "output", "seed", "mode", "threads"},
             "config");
  RunConfig c;
  try {
    if (j.contains("dataset")) c.dataset = resolve(j.at("dataset").get<std::string>(), base_dir);
    if (j.contains("preprocess")) {
      const auto& p = j.at("preprocess");
      check_keys(p, {"threshold", "filter", "keep_subthreshold_as_negative", "deduplicate"}, "preprocess");
      read(p, "threshold", c.preprocess.threshold);
      read(p, "keep_subthreshold_as_negative", c.preprocess.keep_subthreshold_as_negative);
      read(p, "deduplicate", c.preprocess.deduplicate);
      if (p.contains("filter")) c.preprocess = parse_filter(p.at("filter").get<std::string>(), c.preprocess);
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      check_keys(s, {"method", "level", "rho", "validation_fraction", "candidate_size"}, "split");
      if (s.contains("method")) c.split = parse_split_method(s.at("method").get<std::string>(), c.split);
      if (s.contains("level")) {
        const auto level = s.at("level").get<std::string>();
        if (level == "global")
          c.split.level = SplitLevel::global;
        else if (level == "user")
          c.split.level = SplitLevel::user;
        else
          throw ConfigError("split.level must be global or user");
      }
      read(s, "rho", c.split.rho);
      read(s, "validation_fraction", c.split.validation_fraction);
      read(s, "candidate_size", c.split.candidate_size);
    }
    if (j.contains("model")) c.model = parse_model_kind(j.at("model").get<std::string>());
    if (j.contains("train")) train_from_json(j.at("train"), c.train);
    if (j.contains("sampler")) c.train.sampler = sampler_from_json(j.at("sampler"), c.train.sampler);
    if (j.contains("baselines")) baselines_from_json(j.at("baselines"), c.baselines);
    if (j.contains("tuning")) tuning_from_json(j.at("tuning"), c.tuning, base_dir);
    if (j.contains("model_overrides")) {
      c.model_overrides = j.at("model_overrides");
      check_keys(c.model_overrides, {"mostpop", "itemknn", "puresvd", "slim", "mf", "fm"}, "model_overrides");
      for (const auto& [name, o] : c.model_overrides.items())
        check_keys(o, {"train", "sampler", "baselines", "space"}, "model_overrides." + name);
    }
    read(j, "cutoffs", c.cutoffs);
    if (j.contains("output")) c.output = resolve(j.at("output").get<std::string>(), base_dir);
    read(j, "seed", c.seed);
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    read(j, "threads", c.threads);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  if (c.cutoffs.empty()) throw ConfigError("cutoffs must not be empty");
  for (auto n : c.cutoffs)
    if (n == 0) throw ConfigError("cutoffs must be positive");
  if (c.threads == 0) c.threads = 1;
  c.split.seed = c.seed;
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

nlohmann::ordered_json config_to_json(const RunConfig& c) {
  ojson j;
  j["dataset"] = c.dataset.generic_string();
  j["preprocess"] = {{"threshold", c.preprocess.threshold},
                     {"filter", filter_name(c.preprocess)},
                     {"keep_subthreshold_as_negative", c.preprocess.keep_subthreshold_as_negative},
                     {"deduplicate", c.preprocess.deduplicate}};
  j["split"] = split_to_json(c.split);
  j["model"] = std::string(model_kind_name(c.model));
  ojson train;
  train["loss"] = std::string(loss_name(c.train.loss));
  train["optimizer"] = std::string(optimizer_name(c.train.optimizer));
  train["learning_rate"] = c.train.learning_rate;
  train["batch_size"] = c.train.batch_size;
  train["l1"] = c.train.l1;
  train["l2"] = c.train.l2;
  train["initializer"] = initializer_to_json(c.train.initializer);
  train["factors"] = c.train.factors;
  train["epochs_max"] = c.train.epochs_max;
  train["patience"] = c.train.patience;
  train["dense_regularization"] = c.train.dense_regularization;
  train["validation_cutoff"] = c.train.validation_cutoff;
  j["train"] = std::move(train);
  j["sampler"] = sampler_to_json(c.train.sampler);
  ojson baselines;
  baselines["itemknn"] = {{"neighbors", c.baselines.itemknn.neighbors},
                          {"normalize", c.baselines.itemknn.normalize},
                          {"threads", c.baselines.itemknn.threads}};
  baselines["puresvd"] = {{"factors", c.baselines.svd_factors},
                          {"oversampling", c.baselines.rsvd.oversampling},
                          {"power_iterations", c.baselines.rsvd.power_iterations}};
  baselines["slim"] = {{"l1", c.baselines.slim.l1},
                       {"l2", c.baselines.slim.l2},
                       {"tolerance", c.baselines.slim.cd.tolerance},
                       {"max_sweeps", c.baselines.slim.cd.max_sweeps},
                       {"threads", c.baselines.slim.threads}};
  j["baselines"] = std::move(baselines);
  ojson tuning;
  tuning["strategy"] = std::string(strategy_name(c.tuning.strategy));
  tuning["trials"] = c.tuning.n_trials;
  tuning["objective"] = std::string(metric_name(c.tuning.objective));
  tuning["cutoff"] = c.tuning.cutoff;
  tuning["n_startup"] = c.tuning.tpe.n_startup;
  tuning["gamma"] = c.tuning.tpe.gamma;
  tuning["n_candidates"] = c.tuning.tpe.n_candidates;
  tuning["unsafe_tune_on_test"] = c.tuning.unsafe_tune_on_test;
  tuning["space"] = c.tuning.space ? c.tuning.space->to_json() : ojson(nullptr);
  j["tuning"] = std::move(tuning);
  j["model_overrides"] = ojson::parse(c.model_overrides.dump());
  j["cutoffs"] = c.cutoffs;
  j["output"] = c.output.generic_string();
  j["seed"] = c.seed;
  j["mode"] = std::string(mode_name(c.mode));
  j["threads"] = c.threads;
  return j;
}

std::string commented_default_config(ModelKind model) {
  RunConfig c;
  c.model = model;
  c.dataset = "data/manifest.json";
  c.output = "runs/" + std::string(model_kind_name(model));
  const auto j = config_to_json(c);
  const std::pair<const char*, const char*> comments[] = {
      {"dataset", "Dataset manifest written by `daisy ingest`; its content hash is checked on load."},
      {"preprocess", "Binarization threshold r and filter: origin, fN (one pass) or coreN (to fixpoint)."},
      {"split", "rsbr | tsbr | rloo | tloo; level global or user; candidates per test user."},
      {"model", "mostpop | itemknn | puresvd | slim | mf | fm"},
      {"train", "Factorization models only. loss: bpr_log | ce | hinge | top1."},
      {"sampler", "uniform | high_pop | low_pop | uniform_high_pop | uniform_low_pop; 0 negatives = loss default."},
      {"baselines", "Fixed settings for the non-factorization models (tuned values take precedence)."},
      {"tuning", "grid | random | tpe; objective metric at `cutoff` on the validation split. A null space means the model default."},
      {"model_overrides", "Per-model patches of train/sampler/baselines/space, limited by `mode`."},
      {"cutoffs", "Top-N lengths reported on the test split."},
      {"output", "Run directory."},
      {"seed", "Master seed; DAISY_SEED overrides it."},
      {"mode", "relax | hard_strict | soft_strict | mixed"},
      {"threads", "Worker threads for evaluation and parallel trials."},
  };
  std::ostringstream out;
  out << "{\n";
  for (std::size_t k = 0; k < std::size(comments); ++k) {
    const auto& [key, comment] = comments[k];
    std::string body = j.at(key).dump(2);
    std::string indented;
    for (char ch : body) {
      indented += ch;
      if (ch == '\n') indented += "  ";
    }
    out << "  // " << comment << "\n  \"" << key << "\": " << indented << (k + 1 < std::size(comments) ? ",\n" : "\n");
  }
  out << "}\n";
  return out.str();
}

void apply_environment(RunConfig& config) {
  const char* env = std::getenv("DAISY_SEED");
  if (env == nullptr || *env == '\0') return;
  try {
    std::size_t used = 0;
    const auto seed = std::stoull(env, &used);
    if (used != std::char_traits<char>::length(env)) throw std::invalid_argument(env);
    config.seed = seed;
    config.split.seed = seed;
  } catch (const std::exception&) {
    throw ConfigError("DAISY_SEED is not an unsigned integer: " + std::string(env));
  }
}

void validate_mode(const RunConfig& config) {
  std::vector<std::string> pinned;
  if (config.mode == EvaluationMode::hard_strict) pinned = {"loss", "initializer", "optimizer", "space"};
  if (config.mode == EvaluationMode::mixed) pinned = {"initializer", "optimizer"};
  for (const auto& [model, o] : config.model_overrides.items()) {
    for (const auto& field : pinned) {
      const bool present = field == "space" ? o.contains("space")
                                            : o.contains("train") && o.at("train").contains(field);
      if (present)
        throw ConfigError("mode forbids per-model " + field + " (" + std::string(mode_name(config.mode)) +
                          ", override for " + model + ")");
    }
  }
}

RunConfig effective_config(const RunConfig& config) {
  const std::string name(model_kind_name(config.model));
  if (!config.model_overrides.contains(name)) return config;
  const auto& o = config.model_overrides.at(name);
  RunConfig c = config;
  if (o.contains("train")) train_from_json(o.at("train"), c.train);
  if (o.contains("sampler")) c.train.sampler = sampler_from_json(o.at("sampler"), c.train.sampler);
  if (o.contains("baselines")) baselines_from_json(o.at("baselines"), c.baselines);
  if (o.contains("space")) c.tuning.space = SearchSpace::from_json(o.at("space"));
  c.model_overrides = json::object();
  return c;
}

SearchSpace default_search_space(ModelKind model) {
  switch (model) {
    case ModelKind::mostpop: return {};
    case ModelKind::itemknn:
      return {{{"neighbors", Categorical{{std::int64_t{10}, std::int64_t{25}, std::int64_t{50}, std::int64_t{100},
                                          std::int64_t{200}}}}}};
    case ModelKind::puresvd:
      return {{{"factors", Categorical{{std::int64_t{8}, std::int64_t{16}, std::int64_t{32}, std::int64_t{64},
                                        std::int64_t{128}}}}}};
    case ModelKind::slim:
      return {{{"l1", LogUniform{1e-4, 1.0, 5}}, {"l2", LogUniform{1e-4, 1.0, 5}}}};
    case ModelKind::mf:
    case ModelKind::fm:
      return {{{"factors", Categorical{{std::int64_t{8}, std::int64_t{16}, std::int64_t{32}, std::int64_t{64}}}},
               {"l2", LogUniform{1e-6, 1e-2, 3}},
               {"lr", LogUniform{1e-4, 1e-1, 4}}}};
  }
  return {};
}

PipelineTrainer::PipelineTrainer(RunConfig config) : config_(std::move(config)) {}

FitOutcome PipelineTrainer::fit(const InteractionLog& train, const EvalSet* validation, const Params& params,
                                std::uint64_t seed, std::optional<int> fixed_epochs) const {
  RunConfig c = config_;
  apply_params(c, params);
  FitOutcome out;
  switch (c.model) {
    case ModelKind::mostpop: out.model = fit_mostpop(train); break;
    case ModelKind::itemknn: out.model = fit_itemknn(train, c.baselines.itemknn); break;
    case ModelKind::puresvd: {
      RsvdConfig rsvd = c.baselines.rsvd;
      rsvd.seed = seed;
      const std::size_t cap = std::min(train.num_users(), train.num_items());
      out.model = fit_puresvd(train, std::min(c.baselines.svd_factors, cap), rsvd);
      break;
    }
    case ModelKind::slim: out.model = fit_slim(train, c.baselines.slim); break;
    case ModelKind::mf:
    case ModelKind::fm: {
      TrainConfig t = c.train;
      t.seed = seed;
      const EvalSet* val = validation;
      if (fixed_epochs) {
        t.epochs_max = *fixed_epochs;
        val = nullptr;
      }
      auto result = train_factor_model(c.model, train, val, t);
      if (val != nullptr) out.best_epoch = result.trace.best_epoch;
      out.trace = std::move(result.trace);
      out.model = std::move(result.model);
      break;
    }
  }
  return out;
}

RunOutcome run_pipeline(const RunConfig& input) {
  validate_mode(input);
  const RunConfig config = effective_config(input);
  const auto root = config.output;
  const auto started = utc_now();
  std::vector<StageTiming> timings;
  ojson outputs = ojson::object();

  run_stage("output", timings, [&] {
    std::filesystem::create_directories(root);
    std::filesystem::create_directories(root / "analysis");
  });

  DatasetManifest dataset;
  const InteractionLog raw = run_stage("ingest", timings, [&] {
    dataset = load_manifest(config.dataset);
    return ingest(dataset);
  });

  const InteractionLog processed = run_stage("preprocess", timings, [&] {
    auto log = preprocess(raw, config.preprocess);
    write_log(root / "preprocessed.csv", log);
    record_output(outputs, root, root / "preprocessed.csv");
    return log;
  });

  const SplitBundle split = run_stage("split", timings, [&] {
    auto bundle = make_split(processed, config.split);
    save_split(root / "split", bundle);
    for (const auto& entry : std::filesystem::directory_iterator(root / "split")) {
      if (entry.is_regular_file()) record_output(outputs, root, entry.path());
    }
    return bundle;
  });

  PipelineTrainer trainer(config);
  TuneOptions options;
  options.strategy = config.tuning.strategy;
  options.n_trials = config.tuning.n_trials;
  options.seed = config.seed;
  options.objective = config.tuning.objective;
  options.cutoff = config.tuning.cutoff;
  options.tpe = config.tuning.tpe;
  options.unsafe_tune_on_test = config.tuning.unsafe_tune_on_test;
  options.report_cutoffs = config.cutoffs;
  options.threads = config.threads;
  const SearchSpace space = config.tuning.space ? *config.tuning.space : default_search_space(config.model);

  RunOutcome outcome;
  outcome.tuning = run_stage("tune", timings, [&] {
    auto result = run_tuning(trainer, split, space, options);
    write_trials_jsonl(root / "trials.jsonl", result.trials);
    record_output(outputs, root, root / "trials.jsonl");
    return result;
  });
  const TuneResult& tuned = outcome.tuning;

  run_stage("evaluate", timings, [&] {
    save_model(root / "model.bin", *tuned.final_model);
    record_output(outputs, root, root / "model.bin");
    write_metrics_csv(root / "metrics.csv", tuned.test_reports);
    record_output(outputs, root, root / "metrics.csv");
    write_metrics_json(root / "metrics.json", tuned.test_reports);
    record_output(outputs, root, root / "metrics.json");
    if (tuned.final_trace) {
      write_trace_jsonl(root / "trace.jsonl", *tuned.final_trace);
      record_output(outputs, root, root / "trace.jsonl");
    }
  });

  run_stage("analyze", timings, [&] {
    const std::vector<std::vector<TrialRecord>> runs = {tuned.trials};
    const auto co = co_optimality(runs);
    write_matrix_csv(root / "analysis" / "co_optimality.csv", co.cells);
    write_heatmap_data(root / "analysis" / "co_optimality.dat", co.cells);
    record_output(outputs, root, root / "analysis" / "co_optimality.csv");
    record_output(outputs, root, root / "analysis" / "co_optimality.dat");
  });

  ojson m;
  m["tool"] = "daisy";
  m["version"] = DAISY_VERSION;
  m["config"] = config_to_json(input);
  m["config_sha256"] = sha256_hex(m["config"].dump());
  m["model"] = std::string(model_kind_name(config.model));
  m["mode"] = std::string(mode_name(config.mode));
  m["inputs"] = {{"dataset_manifest", config.dataset.generic_string()},
                 {"dataset_file", dataset.path.generic_string()},
                 {"dataset_sha256", dataset.sha256}};
  m["factors"] = factors_of(config, dataset.sha256);
  m["data"] = {{"interactions", processed.size()},
               {"users", processed.num_users()},
               {"items", processed.num_items()},
               {"train", split.train.size()},
               {"validation", split.validation.size()},
               {"test", split.test.size()}};
  m["best_trial"] = trial_to_json(tuned.best);
  m["outputs"] = outputs;
  ojson timing = ojson::array();
  for (const auto& t : timings) timing.push_back({{"stage", t.stage}, {"wall_ms", t.wall_ms}});
  m["timings"] = std::move(timing);
  ojson trial_times = ojson::array();
  for (const auto& t : tuned.trials) trial_times.push_back(t.wall_time_ms);
  m["trial_wall_ms"] = std::move(trial_times);
  m["started_at"] = started;
  m["finished_at"] = utc_now();
  {
    std::ofstream out(root / "manifest.json", std::ios::binary);
    if (!out) throw Error("manifest", "cannot write " + (root / "manifest.json").string());
    out << m.dump(2) << '\n';
  }
  outcome.manifest = std::move(m);
  return outcome;
}

std::vector<MetricReport> read_metrics_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("compare", "cannot open " + path.string());
  std::vector<MetricReport> out;
  try {
    const auto j = json::parse(in);
    for (const auto& entry : j) {
      MetricReport r;
      r.cutoff = entry.at("N").get<std::size_t>();
      r.users = entry.value("users", std::size_t{0});
      for (Metric metric : kAllMetrics) {
        const auto& v = entry.at(std::string(metric_name(metric)));
        r.mean[metric] = v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
      }
      out.push_back(r);
    }
  } catch (const json::exception& e) {
    throw Error("compare", "malformed " + path.string() + ": " + e.what());
  }
  return out;
}

Comparison compare_runs(const std::vector<std::filesystem::path>& manifests) {
  if (manifests.empty()) throw Error("compare", "no manifests given");
  Comparison cmp;
  json reference;
  std::set<std::string> labels;
  for (const auto& path : manifests) {
    std::ifstream in(path);
    if (!in) throw Error("compare", "cannot open manifest " + path.string());
    json m;
    try {
      m = json::parse(in);
    } catch (const json::exception& e) {
      throw Error("compare", "malformed manifest " + path.string() + ": " + e.what());
    }
    if (!m.contains("factors")) throw Error("compare", path.string() + " is not a run manifest");
    const auto& factors = m.at("factors");
    if (reference.is_null()) {
      reference = factors;
    } else {
      for (const char* key : {"dataset", "threshold", "filter", "split", "seed"}) {
        if (factors.value(key, json()) != reference.value(key, json()))
          throw Error("compare", std::string("model-independent factor mismatch: ") + key);
      }
    }
    ComparisonRow row;
    row.label = m.value("model", std::string("run"));
    if (!labels.insert(row.label).second) {
      row.label += "@" + path.parent_path().filename().string();
      labels.insert(row.label);
    }
    row.reports = read_metrics_json(path.parent_path() / "metrics.json");
    cmp.rows.push_back(std::move(row));
  }
  // Only cutoffs every run reported.
  for (const auto& r : cmp.rows.front().reports) {
    const bool shared = std::all_of(cmp.rows.begin(), cmp.rows.end(), [&](const ComparisonRow& row) {
      return std::any_of(row.reports.begin(), row.reports.end(),
                         [&](const MetricReport& x) { return x.cutoff == r.cutoff; });
    });
    if (shared) cmp.cutoffs.push_back(r.cutoff);
  }
  if (cmp.rows.size() >= 2) {
    for (auto n : cmp.cutoffs) {
      std::vector<MetricValues> table;
      for (const auto& row : cmp.rows)
        for (const auto& r : row.reports)
          if (r.cutoff == n) table.push_back(r.mean);
      cmp.kendall[n] = kendall_matrix(table);
    }
  }
  return cmp;
}

void write_comparison(const std::filesystem::path& dir, const Comparison& cmp) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "table.csv", std::ios::binary);
  if (!out) throw Error("compare", "cannot write " + (dir / "table.csv").string());
  out << "method,N";
  for (Metric m : kAllMetrics) out << ',' << metric_name(m);
  out << '\n';
  for (auto n : cmp.cutoffs) {
    for (const auto& row : cmp.rows) {
      for (const auto& r : row.reports) {
        if (r.cutoff != n) continue;
        out << row.label << ',' << n;
        for (Metric m : kAllMetrics) out << ',' << format_real(r.mean[m]);
        out << '\n';
      }
    }
  }
  for (const auto& [n, matrix] : cmp.kendall) {
    write_matrix_csv(dir / ("kendall_at_" + std::to_string(n) + ".csv"), matrix);
    write_heatmap_data(dir / ("kendall_at_" + std::to_string(n) + ".dat"), matrix);
  }
}

}  // namespace daisy
