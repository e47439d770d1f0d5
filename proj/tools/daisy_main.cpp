#include <CLI11.hpp>
#include <charconv>
#include <fstream>
#include <iostream>

#include "daisy/analysis.hpp"
#include "daisy/error.hpp"
#include "daisy/pipeline.hpp"

namespace fs = std::filesystem;
using namespace daisy;

namespace {

ColumnRef column(const std::string& text) {
  std::size_t index = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), index);
  if (ec == std::errc() && ptr == text.data() + text.size()) return index;
  return text;
}

char delimiter_of(const std::string& text) {
  if (text == "\\t" || text == "tab") return '\t';
  if (text.size() != 1) throw ConfigError("delimiter must be a single character");
  return text[0];
}

RunConfig base_config(const std::string& path) {
  RunConfig config = path.empty() ? RunConfig{} : load_config(path);
  apply_environment(config);
  return config;
}

Params read_params(const std::string& text) {
  if (text.empty()) return {};
  if (fs::exists(text)) {
    std::ifstream in(text);
    return params_from_json(nlohmann::json::parse(in));
  }
  return params_from_json(nlohmann::json::parse(text));
}

void print_reports(const std::vector<MetricReport>& reports) {
  std::cout << "N";
  for (Metric m : kAllMetrics) std::cout << '\t' << metric_name(m);
  std::cout << '\n';
  for (const auto& r : reports) {
    std::cout << r.cutoff;
    for (Metric m : kAllMetrics) std::cout << '\t' << format_real(r.mean[m]);
    std::cout << '\n';
  }
}

struct Shared {
  std::string config;
  std::optional<std::uint64_t> seed;

  RunConfig load() const {
    RunConfig c = base_config(config);
    if (seed) {
      c.seed = *seed;
      c.split.seed = *seed;
    }
    return c;
  }
};

void add_shared(CLI::App* cmd, Shared& shared) {
  cmd->add_option("-c,--config", shared.config, "Run config (JSON, // comments allowed)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", shared.seed, "Master seed (overrides config and DAISY_SEED)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"daisy: reproducible top-N recommendation benchmarks"};
  app.set_version_flag("--version", DAISY_VERSION);
  app.require_subcommand(1);

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Describe a delimited interaction file with a hashed manifest");
  std::string in_path, out_manifest = "manifest.json", delim = ",";
  std::string user_col = "0", item_col = "1", value_col, ts_col;
  bool header = false;
  ingest_cmd->add_option("input", in_path, "Interaction file")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("-o,--output", out_manifest, "Manifest to write");
  ingest_cmd->add_option("-d,--delimiter", delim, "Field delimiter (\\t for tab)");
  ingest_cmd->add_flag("--header", header, "First line holds column names");
  ingest_cmd->add_option("--user", user_col, "User column (index or name)");
  ingest_cmd->add_option("--item", item_col, "Item column (index or name)");
  ingest_cmd->add_option("--value", value_col, "Rating column; absent means implicit 1");
  ingest_cmd->add_option("--timestamp", ts_col, "Timestamp column");

  // preprocess
  Shared pre_shared;
  auto* pre_cmd = app.add_subcommand("preprocess", "Binarize and filter a dataset");
  add_shared(pre_cmd, pre_shared);
  std::string pre_dataset, pre_out = "preprocessed/dataset.json", pre_filter;
  std::optional<double> pre_threshold;
  pre_cmd->add_option("-i,--input,--dataset", pre_dataset, "Dataset manifest");
  pre_cmd->add_option("--threshold", pre_threshold, "Binarization threshold r");
  pre_cmd->add_option("--filter", pre_filter, "origin | fN | coreN");
  pre_cmd->add_option("-o,--output", pre_out, "Manifest to write; the records go to a .csv beside it");

  // split
  Shared split_shared;
  auto* split_cmd = app.add_subcommand("split", "Split into train, validation and test with candidate sets");
  add_shared(split_cmd, split_shared);
  std::string split_dataset, split_out = "split", split_method, split_level;
  std::optional<double> split_rho, split_val;
  std::optional<std::size_t> split_candidates;
  split_cmd->add_option("-i,--input,--dataset", split_dataset, "Dataset manifest (already preprocessed)");
  split_cmd->add_option("--method", split_method, "rsbr | tsbr | rloo | tloo");
  split_cmd->add_option("--rho", split_rho, "Train share for split-by-ratio");
  split_cmd->add_option("--level", split_level, "global | user (split-by-ratio only)")
      ->check(CLI::IsMember({"global", "user"}));
  split_cmd->add_option("--val-frac,--validation", split_val, "Validation share carved from train");
  split_cmd->add_option("--cands,--candidates", split_candidates, "Candidate list size");
  split_cmd->add_option("-o,--out", split_out, "Output directory");

  // tune
  Shared tune_shared;
  auto* tune_cmd = app.add_subcommand("tune", "Search hyper-parameters on the validation split, refit, test");
  add_shared(tune_cmd, tune_shared);
  std::string tune_split, tune_model, tune_strategy, tune_space, tune_out = "tune";
  std::optional<std::size_t> tune_trials;
  bool tune_unsafe = false;
  tune_cmd->add_option("--split", tune_split, "Split directory")->required()->check(CLI::ExistingDirectory);
  tune_cmd->add_option("--model", tune_model, "mostpop | itemknn | puresvd | slim | mf | fm");
  tune_cmd->add_option("--strategy", tune_strategy, "grid | random | tpe");
  tune_cmd->add_option("--trials", tune_trials, "Trial budget (random, tpe)");
  tune_cmd->add_option("--space", tune_space, "Search space JSON")->check(CLI::ExistingFile);
  tune_cmd->add_flag("--unsafe-tune-on-test", tune_unsafe, "Select on the test split (leakage studies only)");
  tune_cmd->add_option("-o,--out", tune_out, "Output directory");

  // train
  Shared train_shared;
  auto* train_cmd = app.add_subcommand("train", "Fit one model on train + validation with fixed parameters");
  add_shared(train_cmd, train_shared);
  std::string train_split, train_model, train_params, train_out = "model.bin", train_trace;
  train_cmd->add_option("--split", train_split, "Split directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--model", train_model, "Model kind");
  train_cmd->add_option("--params", train_params, "Hyper-parameters as JSON text or file");
  train_cmd->add_option("-o,--out", train_out, "Model file");
  train_cmd->add_option("--trace", train_trace, "Per-epoch trace (JSONL)");

  // eval
  Shared eval_shared;
  auto* eval_cmd = app.add_subcommand("eval", "Score a saved model on the test candidates");
  add_shared(eval_cmd, eval_shared);
  std::string eval_split, eval_model, eval_out, eval_per_user;
  std::vector<std::size_t> eval_cutoffs;
  eval_cmd->add_option("--split", eval_split, "Split directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--model", eval_model, "Model file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--cutoffs", eval_cutoffs, "Top-N lengths")->delimiter(',');
  eval_cmd->add_option("-o,--out", eval_out, "metrics.csv to write");
  eval_cmd->add_option("--per-user", eval_per_user, "Per-user metrics CSV");

  // analyze
  auto* analyze_cmd = app.add_subcommand("analyze", "Co-optimality over trial logs, Kendall over a method table");
  std::vector<std::string> analyze_trials, analyze_runs;
  std::string analyze_out = "analysis";
  analyze_cmd->add_option("--trials", analyze_trials, "trials.jsonl files, one per tuning run");
  analyze_cmd->add_option("--runs", analyze_runs, "Run manifests for the Kendall matrix");
  analyze_cmd->add_option("-o,--out", analyze_out, "Output directory");

  // compare
  auto* compare_cmd = app.add_subcommand("compare", "Tabulate runs that share every model-independent factor");
  std::vector<std::string> compare_manifests;
  std::string compare_out = "comparison";
  compare_cmd->add_option("manifests", compare_manifests, "Run manifest.json files")->required();
  compare_cmd->add_option("-o,--out", compare_out, "Output directory");

  // print-config
  auto* print_cmd = app.add_subcommand("print-config", "Print a commented default config");
  std::string print_model = "mf";
  print_cmd->add_option("--model", print_model, "Model kind");

  // run
  Shared run_shared;
  auto* run_cmd = app.add_subcommand("run", "Run the whole pipeline from a config");
  add_shared(run_cmd, run_shared);
  std::string run_out;
  run_cmd->add_option("-o,--output", run_out, "Override the output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest_cmd) {
      ColumnSchema schema;
      schema.header = header;
      schema.user = column(user_col);
      schema.item = column(item_col);
      if (!value_col.empty()) schema.value = column(value_col);
      if (!ts_col.empty()) schema.timestamp = column(ts_col);
      const auto manifest = make_manifest(fs::absolute(in_path), schema, delimiter_of(delim));
      const auto log = ingest(manifest);
      save_manifest(out_manifest, manifest);
      std::cout << "records " << log.size() << "  users " << log.num_users() << "  items " << log.num_items()
                << "  sha256 " << manifest.sha256 << '\n';
    } else if (*pre_cmd) {
      RunConfig c = pre_shared.load();
      if (!pre_dataset.empty()) c.dataset = pre_dataset;
      if (pre_threshold) c.preprocess.threshold = *pre_threshold;
      if (!pre_filter.empty()) c.preprocess = parse_filter(pre_filter, c.preprocess);
      const auto raw = ingest(load_manifest(c.dataset));
      const auto log = preprocess(raw, c.preprocess);
      const fs::path out_manifest = pre_out;
      if (out_manifest.has_parent_path()) fs::create_directories(out_manifest.parent_path());
      const auto csv = fs::absolute(fs::path(out_manifest).replace_extension(".csv"));
      write_log(csv, log);
      ColumnSchema schema;
      schema.value = std::size_t{2};
      if (log.has_timestamps()) schema.timestamp = std::size_t{3};
      save_manifest(out_manifest, make_manifest(csv, schema, ','));
      std::cout << "records " << raw.size() << " -> " << log.size() << "  users " << log.num_users()
                << "  items " << log.num_items() << '\n';
    } else if (*split_cmd) {
      RunConfig c = split_shared.load();
      if (!split_dataset.empty()) c.dataset = split_dataset;
      if (!split_method.empty()) c.split = parse_split_method(split_method, c.split);
      if (split_rho) c.split.rho = *split_rho;
      if (!split_level.empty()) c.split.level = split_level == "user" ? SplitLevel::user : SplitLevel::global;
      if (split_val) c.split.validation_fraction = *split_val;
      if (split_candidates) c.split.candidate_size = *split_candidates;
      const auto bundle = make_split(ingest(load_manifest(c.dataset)), c.split);
      save_split(split_out, bundle);
      std::cout << "train " << bundle.train.size() << "  validation " << bundle.validation.size() << "  test "
                << bundle.test.size() << "  test users " << bundle.candidates.size() << '\n';
    } else if (*tune_cmd) {
      RunConfig input = tune_shared.load();
      if (!tune_model.empty()) input.model = parse_model_kind(tune_model);
      validate_mode(input);
      RunConfig c = effective_config(input);
      if (!tune_strategy.empty()) c.tuning.strategy = parse_strategy(tune_strategy);
      if (tune_trials) c.tuning.n_trials = *tune_trials;
      if (!tune_space.empty()) c.tuning.space = load_search_space(tune_space);
      if (tune_unsafe) c.tuning.unsafe_tune_on_test = true;
      const auto split = load_split(tune_split);
      TuneOptions options;
      options.strategy = c.tuning.strategy;
      options.n_trials = c.tuning.n_trials;
      options.seed = c.seed;
      options.objective = c.tuning.objective;
      options.cutoff = c.tuning.cutoff;
      options.tpe = c.tuning.tpe;
      options.unsafe_tune_on_test = c.tuning.unsafe_tune_on_test;
      options.report_cutoffs = c.cutoffs;
      options.threads = c.threads;
      options.on_trial = [](const TrialRecord& t) {
        std::cerr << "trial " << t.trial_id << "  " << params_to_json(t.params).dump() << "  "
                  << metric_name(t.objective_metric) << '@' << t.cutoff << ' '
                  << (t.status == TrialStatus::ok ? format_real(t.objective) : std::string("diverged")) << '\n';
      };
      const SearchSpace space = c.tuning.space ? *c.tuning.space : default_search_space(c.model);
      const auto result = run_tuning(PipelineTrainer(c), split, space, options);
      fs::create_directories(tune_out);
      const fs::path out(tune_out);
      write_trials_jsonl(out / "trials.jsonl", result.trials);
      save_model(out / "model.bin", *result.final_model);
      write_metrics_csv(out / "metrics.csv", result.test_reports);
      write_metrics_json(out / "metrics.json", result.test_reports);
      if (result.final_trace) write_trace_jsonl(out / "trace.jsonl", *result.final_trace);
      std::ofstream(out / "best.json") << trial_to_json(result.best).dump(2) << '\n';
      print_reports(result.test_reports);
    } else if (*train_cmd) {
      RunConfig input = train_shared.load();
      if (!train_model.empty()) input.model = parse_model_kind(train_model);
      validate_mode(input);
      const RunConfig c = effective_config(input);
      const auto split = load_split(train_split);
      const auto fit =
          PipelineTrainer(c).fit(split.full_train(), nullptr, read_params(train_params), c.seed, std::nullopt);
      save_model(train_out, *fit.model);
      if (!train_trace.empty() && fit.trace) write_trace_jsonl(train_trace, *fit.trace);
      std::cout << "saved " << model_kind_name(fit.model->kind()) << " to " << train_out << '\n';
    } else if (*eval_cmd) {
      const RunConfig c = eval_shared.load();
      const auto split = load_split(eval_split);
      const auto model = load_model(eval_model);
      const auto cutoffs = eval_cutoffs.empty() ? c.cutoffs : eval_cutoffs;
      const auto reports = evaluate_all(*model, make_eval_set(split.test, split.candidates), cutoffs, {},
                                        !eval_per_user.empty(), c.threads);
      if (!eval_out.empty()) write_metrics_csv(eval_out, reports);
      if (!eval_per_user.empty()) write_per_user_csv(eval_per_user, reports);
      print_reports(reports);
    } else if (*analyze_cmd) {
      if (analyze_trials.empty() && analyze_runs.empty()) throw AnalysisError("give --trials and/or --runs");
      fs::create_directories(analyze_out);
      const fs::path out(analyze_out);
      if (!analyze_trials.empty()) {
        std::vector<std::vector<TrialRecord>> runs;
        for (const auto& path : analyze_trials) runs.push_back(read_trials_jsonl(path));
        const auto co = co_optimality(runs);
        write_matrix_csv(out / "co_optimality.csv", co.cells);
        write_heatmap_data(out / "co_optimality.dat", co.cells);
        std::cout << "co-optimality over " << co.runs << " runs (" << co.rejected << " rejected)\n";
      }
      if (!analyze_runs.empty()) {
        std::vector<fs::path> paths(analyze_runs.begin(), analyze_runs.end());
        const auto cmp = compare_runs(paths);
        write_comparison(out, cmp);
        std::cout << "Kendall matrices for " << cmp.kendall.size() << " cutoffs\n";
      }
    } else if (*compare_cmd) {
      std::vector<fs::path> paths(compare_manifests.begin(), compare_manifests.end());
      const auto cmp = compare_runs(paths);
      write_comparison(compare_out, cmp);
      for (const auto& row : cmp.rows) {
        std::cout << row.label << '\n';
        print_reports(row.reports);
      }
    } else if (*print_cmd) {
      std::cout << commented_default_config(parse_model_kind(print_model));
    } else if (*run_cmd) {
      if (run_shared.config.empty()) throw ConfigError("run needs --config");
      RunConfig c = run_shared.load();
      if (!run_out.empty()) c.output = run_out;
      const auto outcome = run_pipeline(c);
      std::cout << "best trial " << outcome.tuning.best.trial_id << "  "
                << params_to_json(outcome.tuning.best.params).dump() << '\n';
      print_reports(outcome.tuning.test_reports);
      std::cout << "outputs in " << c.output.string() << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "daisy: [" << e.stage() << "] " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "daisy: [config] " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "daisy: [internal] " << e.what() << '\n';
    return 1;
  }
  return 0;
}
