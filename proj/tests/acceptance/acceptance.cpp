#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "daisy/analysis.hpp"
#include "daisy/error.hpp"
#include "daisy/factorization.hpp"
#include "daisy/metrics.hpp"
#include "daisy/pipeline.hpp"
#include "daisy/preprocess.hpp"
#include "daisy/recommender.hpp"
#include "daisy/split.hpp"
#include "daisy/tune.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace daisy;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

template <typename... Args>
std::string format(const char* fmt, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

using Dense = Eigen::MatrixXd;

Dense random_binary(Rng& rng, std::size_t m, std::size_t n, double density) {
  Dense a = Dense::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      if (uniform_unit(rng) < density) a(r, c) = 1.0;
  a(0, 0) = 1.0;
  return a;
}

InteractionLog log_of(const Dense& a) {
  std::vector<Interaction> records;
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      if (a(r, c) != 0.0) records.push_back({static_cast<UserIndex>(r), static_cast<ItemIndex>(c), 1.0, 0});
  return testing::indexed_log(static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(a.cols()), records);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double ndcg_at(const std::vector<MetricReport>& reports, std::size_t cutoff) {
  for (const auto& r : reports)
    if (r.cutoff == cutoff) return r.mean[Metric::ndcg];
  return NAN;
}

// ---------------------------------------------------------------------------

Outcome metric_oracle() {
  const std::vector<ItemIndex> ranked = {0, 1, 2, 3, 4};
  const std::vector<ItemIndex> truth = {1, 4, 5};
  const auto v = evaluate_user(ranked, truth, 5);
  if (!v) return {false, "user was not evaluated"};
  const double expected[6] = {0.4, 2.0 / 3.0, 1.0, 0.3, 0.5, 0.4776};
  double worst = 0;
  for (std::size_t k = 0; k < 6; ++k) worst = std::max(worst, std::abs(v->values[k] - expected[k]));
  return {worst <= 1e-4, format("max deviation %.2e (P %.4f R %.4f HR %.0f MAP %.4f MRR %.4f NDCG %.4f)", worst,
                                v->values[0], v->values[1], v->values[2], v->values[3], v->values[4], v->values[5])};
}

Outcome loo_identity() {
  std::size_t checks = 0, failures = 0;
  const std::vector<std::size_t> cutoffs = {1, 5, 10, 20, 50};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto log = testing::random_log(seed, 40 + seed % 20, 60 + seed, 3, 15, seed % 3 == 0);
    SplitConfig config = parse_split_method(seed % 2 == 0 ? "tloo" : "rloo");
    config.seed = seed;
    config.candidate_size = 50;
    const auto split = make_split(log, config);
    const auto eval = make_eval_set(split.test, split.candidates);
    const auto model = fit_itemknn(split.full_train(), ItemKnnConfig{20});
    for (const auto& report : evaluate_all(*model, eval, cutoffs, {}, true)) {
      ++checks;
      if (report.mean[Metric::recall] != report.mean[Metric::hr]) ++failures;
      for (const auto& [u, values] : report.per_user)
        if (values[Metric::recall] != values[Metric::hr]) ++failures;
    }
  }
  return {failures == 0, format("%zu fixtures, %zu cutoff reports, %zu mismatches", std::size_t{50}, checks, failures)};
}

Outcome gradient_suite() {
  const double h = 1e-5;
  double worst = 0;
  std::size_t points = 0;
  for (bool fm : {false, true}) {
    for (LossKind loss : {LossKind::bpr_log, LossKind::hinge, LossKind::top1, LossKind::ce}) {
      Rng rng(derive_seed(fm ? 11 : 10, static_cast<std::uint64_t>(loss)));
      std::size_t done = 0;
      while (done < 100) {
        auto factors = initialize(4, 6, 5, Initializer{InitKind::normal, 1.0, 0.5}, fm, rng);
        auto params = factors.parameters();
        if (fm) {
          for (UserIndex u = 0; u < 4; ++u) params[factors.user_offset(u) + 5] = uniform_unit(rng) - 0.5;
          for (ItemIndex i = 0; i < 6; ++i) params[factors.item_offset(i) + 5] = uniform_unit(rng) - 0.5;
          params.back() = uniform_unit(rng) - 0.5;
        }
        const TrainExample ex{static_cast<UserIndex>(uniform_index(rng, 4)), static_cast<ItemIndex>(uniform_index(rng, 6)),
                              static_cast<ItemIndex>(uniform_index(rng, 6)), uniform_unit(rng) < 0.5 ? 0.0 : 1.0};
        if (ex.pos == ex.neg) continue;
        if (loss == LossKind::hinge &&
            std::abs(1.0 - (factors.score(ex.user, ex.pos) - factors.score(ex.user, ex.neg))) < 1e-3)
          continue;
        std::vector<double> analytic(params.size(), 0.0), numeric(params.size(), 0.0);
        example_loss(factors, loss, ex, analytic);
        for (std::size_t k = 0; k < params.size(); ++k) {
          const double keep = params[k];
          params[k] = keep + h;
          const double up = example_loss(factors, loss, ex);
          params[k] = keep - h;
          const double down = example_loss(factors, loss, ex);
          params[k] = keep;
          numeric[k] = (up - down) / (2 * h);
        }
        double diff = 0, na = 0, nn = 0;
        for (std::size_t k = 0; k < params.size(); ++k) {
          diff += (analytic[k] - numeric[k]) * (analytic[k] - numeric[k]);
          na += analytic[k] * analytic[k];
          nn += numeric[k] * numeric[k];
        }
        worst = std::max(worst, std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-8}));
        ++done;
        ++points;
      }
    }
  }
  return {worst < 1e-4, format("%zu points over MF/FM x 4 losses, worst relative error %.2e", points, worst)};
}

Outcome splitter_invariants() {
  std::size_t failures = 0;
  std::string first;
  const auto fail = [&](const std::string& what) {
    if (failures++ == 0) first = what;
  };
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t items = seed % 4 == 0 ? 1300 : 80 + seed;
    const auto log = testing::random_log(seed + 1000, 50, items, 2, 25, seed % 5 == 0);

    SplitConfig tsbr = parse_split_method("tsbr");
    tsbr.seed = seed;
    const auto global = make_split(log, tsbr);
    std::int64_t max_train = INT64_MIN, min_test = INT64_MAX;
    for (const auto& r : global.full_train().records()) max_train = std::max(max_train, r.timestamp);
    for (const auto& r : global.test.records()) min_test = std::min(min_test, r.timestamp);
    if (!global.test.empty() && max_train > min_test) fail(format("tsbr boundary, seed %lu", seed));

    SplitConfig tloo = parse_split_method("tloo");
    tloo.seed = seed;
    const auto loo = make_split(log, tloo);
    std::map<UserIndex, std::int64_t> latest;
    for (const auto& r : log.records()) latest[r.user] = std::max(latest.count(r.user) ? latest[r.user] : INT64_MIN, r.timestamp);
    std::map<UserIndex, int> per_user;
    for (const auto& r : loo.test.records()) {
      if (r.timestamp != latest[r.user]) fail(format("tloo picked a non-latest record, seed %lu", seed));
      ++per_user[r.user];
    }
    for (const auto& [u, n] : per_user)
      if (n != 1) fail(format("tloo user with %d test records, seed %lu", n, seed));

    for (const SplitBundle* bundle : {&global, &loo}) {
      const auto train = to_matrix(bundle->full_train());
      std::map<UserIndex, std::set<ItemIndex>> truth;
      for (const auto& r : bundle->test.records()) truth[r.user].insert(r.item);
      for (const auto& [u, cands] : bundle->candidates) {
        const std::set<ItemIndex> distinct(cands.begin(), cands.end());
        if (distinct.size() != cands.size()) fail("duplicate candidates");
        for (ItemIndex i : truth[u])
          if (!distinct.count(i)) fail("test item missing from candidates");
        for (ItemIndex i : cands)
          if (!truth[u].count(i) && train.contains(u, i)) fail("training item among candidates");
        std::size_t pool = 0;
        for (ItemIndex i = 0; i < log.num_items(); ++i)
          if (!truth[u].count(i) && !train.contains(u, i)) ++pool;
        if (cands.size() != std::min<std::size_t>(1000, pool + truth[u].size()))
          fail(format("candidate size %zu, expected %zu", cands.size(), std::min<std::size_t>(1000, pool + truth[u].size())));
      }
    }
  }
  return {failures == 0, failures == 0 ? "100 fixtures, tsbr + tloo bundles" : format("%zu violations; first: %s", failures, first.c_str())};
}

Outcome filtering_semantics() {
  // u1 {a, b}, u2 {a}, u3 {c}: one-pass filtering keeps (u1, a), leaving u1 with a single record.
  const auto toy = testing::make_log({{"u1", "a"}, {"u1", "b"}, {"u2", "a"}, {"u3", "c"}});
  const auto once = f_filter(toy, 2);
  std::map<UserIndex, int> counts;
  for (const auto& r : once.records()) ++counts[r.user];
  const bool below = std::any_of(counts.begin(), counts.end(), [](const auto& kv) { return kv.second < 2; });
  bool emptied = false;
  try {
    emptied = f_core(toy, 2).empty();
  } catch (const PreprocessError& e) {
    emptied = std::string(e.what()).find("F-core eliminated the dataset") != std::string::npos;
  }
  if (!below || !emptied) return {false, format("toy: f_filter leaves user below F=%d, f_core empties=%d", below, emptied)};

  int checked = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto log = testing::random_log(seed + 500, 80, 60, 1, 12);
    const int level = 2 + static_cast<int>(seed % 4);
    InteractionLog core;
    try {
      core = f_core(log, level);
    } catch (const PreprocessError&) {
      continue;  // an empty fixed point is reported as an error
    }
    std::map<UserIndex, int> users;
    std::map<ItemIndex, int> items;
    for (const auto& r : core.records()) {
      ++users[r.user];
      ++items[r.item];
    }
    for (const auto& [u, n] : users)
      if (n < level) return {false, format("seed %lu: user below level %d after f_core", seed, level)};
    for (const auto& [i, n] : items)
      if (n < level) return {false, format("seed %lu: item below level %d after f_core", seed, level)};
    if (f_core(core, level).size() != core.size()) return {false, format("seed %lu: f_core not a fixpoint", seed)};
    ++checked;
  }
  return {checked >= 45, format("toy instance ok; fixpoint verified on %d/50 random logs (rest emptied)", checked)};
}

Outcome slim_oracle() {
  Rng rng(6);
  double worst = -INFINITY;
  std::size_t columns = 0;
  bool structure = true;
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t m = 2 + uniform_index(rng, 4), n = 2 + uniform_index(rng, 4);
    const Dense a = random_binary(rng, m, n, 0.5);
    const auto ui = to_matrix(log_of(a));
    const auto iu = ui.transpose();
    for (double l1 : {0.01, 0.1}) {
      const double l2 = 0.1;
      const auto model = fit_slim(log_of(a), SlimConfig{l1, l2});
      for (ItemIndex j = 0; j < n; ++j) {
        std::vector<double> w(n, 0.0);
        for (ItemIndex k = 0; k < n; ++k) {
          w[k] = model->weight(k, j);
          if (w[k] < 0 || (k == j && w[k] != 0)) structure = false;
        }
        std::vector<std::size_t> free;
        for (std::size_t k = 0; k < n; ++k)
          if (k != j) free.push_back(k);
        std::vector<double> g(n, 0.0);
        std::vector<int> digits(free.size(), 0);
        double grid = INFINITY;
        while (true) {
          for (std::size_t d = 0; d < free.size(); ++d) g[free[d]] = 0.1 * digits[d];
          grid = std::min(grid, slim_column_objective(iu, j, g, l1, l2));
          std::size_t d = 0;
          while (d < digits.size() && ++digits[d] == 11) digits[d++] = 0;
          if (d == digits.size()) break;
        }
        worst = std::max(worst, slim_column_objective(iu, j, w, l1, l2) - grid);
        ++columns;
      }
    }
  }
  return {worst <= 1e-6 && structure,
          format("%zu columns, max(CD - grid) = %.3e, diag/nonnegativity %s", columns, worst, structure ? "ok" : "violated")};
}

Outcome puresvd_oracle() {
  Rng rng(7);
  double worst = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t m = 5 + uniform_index(rng, 46), n = 5 + uniform_index(rng, 46);
    const Dense a = random_binary(rng, m, n, 0.3);
    const std::size_t f = 1 + uniform_index(rng, std::min(m, n));
    Eigen::JacobiSVD<Dense> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto k = static_cast<Eigen::Index>(f);
    const Dense expected =
        svd.matrixU().leftCols(k) * svd.singularValues().head(k).asDiagonal() * svd.matrixV().leftCols(k).transpose();
    const auto model = fit_puresvd(log_of(a), f);
    Dense got(a.rows(), a.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      for (Eigen::Index c = 0; c < a.cols(); ++c)
        got(r, c) = model->score(static_cast<UserIndex>(r), static_cast<ItemIndex>(c));
    worst = std::max(worst, (got - expected).norm() / std::max(expected.norm(), 1e-12));
  }
  return {worst < 1e-6, format("20 matrices, worst Frobenius-relative gap %.2e", worst)};
}

Outcome tpe_vs_random() {
  const auto space = SearchSpace::from_json(nlohmann::json::parse(R"({"x": {"type": "uniform", "low": 0, "high": 1}})"));
  const auto f = [](const Params& p) { return -std::pow(as_real(p.at("x")) - 0.3, 2); };
  const auto best = [](const std::vector<Observation>& h) {
    return *std::max_element(h.begin(), h.end(), [](const auto& a, const auto& b) { return a.objective < b.objective; });
  };
  double tpe_total = 0, random_total = 0;
  int close = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = best(optimize(space, SearchStrategy::tpe, 30, seed, f));
    tpe_total += t.objective;
    random_total += best(optimize(space, SearchStrategy::random, 30, seed, f)).objective;
    if (std::abs(as_real(t.params.at("x")) - 0.3) <= 0.05) ++close;
  }
  return {close >= 18 && tpe_total >= random_total,
          format("|x*-0.3|<=0.05 on %d/20 seeds; mean best TPE %.3e vs random %.3e", close, tpe_total / 20,
                 random_total / 20)};
}

struct DirectionalRun {
  double mostpop = 0, nested = 0, unsafe = 0;
};

std::vector<DirectionalRun> directional_runs() {
  std::vector<DirectionalRun> runs;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto log = testing::two_communities(seed);
    SplitConfig sc = parse_split_method("tsbr");
    sc.seed = seed;
    const auto split = make_split(log, sc);

    RunConfig config;
    config.seed = seed;
    config.model = ModelKind::mostpop;
    TuneOptions options;
    options.seed = seed;
    options.strategy = SearchStrategy::random;
    options.n_trials = 10;
    options.report_cutoffs = {10};

    DirectionalRun run;
    run.mostpop = ndcg_at(run_tuning(PipelineTrainer(config), split, SearchSpace{}, options).test_reports, 10);
    config.model = ModelKind::mf;
    const PipelineTrainer mf(config);
    const auto space = default_search_space(ModelKind::mf);
    run.nested = ndcg_at(run_tuning(mf, split, space, options).test_reports, 10);
    options.unsafe_tune_on_test = true;
    run.unsafe = ndcg_at(run_tuning(mf, split, space, options).test_reports, 10);
    runs.push_back(run);
  }
  return runs;
}

const std::vector<DirectionalRun>& cached_directional_runs() {
  static const auto runs = directional_runs();
  return runs;
}

Outcome directional_learning() {
  int wins = 0;
  std::string detail;
  for (const auto& r : cached_directional_runs()) {
    if (r.nested - r.mostpop >= 0.02) ++wins;
    detail += format(" %.3f/%.3f", r.nested, r.mostpop);
  }
  return {wins >= 4, format("BPRMF beats MostPop by >=0.02 on %d/5 seeds (MF/MostPop NDCG@10:%s)", wins, detail.c_str())};
}

Outcome nested_validation_effect() {
  int hold = 0;
  std::string detail;
  for (const auto& r : cached_directional_runs()) {
    if (r.unsafe >= r.nested) ++hold;
    detail += format(" %.3f/%.3f", r.unsafe, r.nested);
  }
  return {hold >= 4, format("unsafe >= nested on %d/5 seeds (unsafe/nested NDCG@10:%s)", hold, detail.c_str())};
}

Outcome analysis_invariants() {
  Rng rng(11);
  double worst_recount = 0, worst_sym = 0, worst_pairs = 0;
  bool diagonal = true;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<std::vector<TrialRecord>> runs(1 + uniform_index(rng, 5));
    for (auto& run : runs) {
      const std::size_t trials = 1 + uniform_index(rng, 30);
      for (std::size_t k = 0; k < trials; ++k) {
        TrialRecord t;
        t.trial_id = k;
        for (double& v : t.metrics.values) v = static_cast<double>(uniform_index(rng, 5)) / 5.0;
        run.push_back(t);
      }
    }
    const auto co = co_optimality(runs);
    const auto expected = testing::co_optimality_recount(runs);
    for (std::size_t i = 0; i < 6; ++i) {
      if (*co.cells[i][i] != 1.0) diagonal = false;
      for (std::size_t j = 0; j < 6; ++j) worst_recount = std::max(worst_recount, std::abs(*co.cells[i][j] - expected[i][j]));
    }

    std::vector<MetricValues> table(3 + uniform_index(rng, 15));
    for (auto& row : table)
      for (double& v : row.values) v = static_cast<double>(uniform_index(rng, 6));
    const auto k = kendall_matrix(table);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j) {
        if (k[i][j].has_value() != k[j][i].has_value()) worst_sym = INFINITY;
        if (!k[i][j]) continue;
        worst_sym = std::max(worst_sym, std::abs(*k[i][j] - *k[j][i]));
        std::vector<double> x, y;
        for (const auto& row : table) {
          x.push_back(row.values[i]);
          y.push_back(row.values[j]);
        }
        worst_pairs = std::max(worst_pairs, std::abs(*k[i][j] - *testing::kendall_pairs(x, y)));
      }
  }
  return {diagonal && worst_recount < 1e-12 && worst_sym < 1e-12 && worst_pairs < 1e-12,
          format("diagonal %s, recount gap %.1e, |K-K^T| %.1e, pair-oracle gap %.1e", diagonal ? "1" : "not 1",
                 worst_recount, worst_sym, worst_pairs)};
}

Outcome determinism() {
  const auto dir = testing::scratch_dir("acceptance_determinism");
  const auto dataset = testing::write_dataset(dir / "data", testing::random_log(3, 80, 60, 5, 15));
  const auto run = [&](const char* name) {
    RunConfig config;
    config.dataset = dataset;
    config.output = dir / name;
    config.model = ModelKind::mf;
    config.seed = 9;
    config.split = parse_split_method("tloo");
    config.split.seed = 9;
    config.split.candidate_size = 100;
    config.train.epochs_max = 10;
    config.tuning.strategy = SearchStrategy::tpe;
    config.tuning.n_trials = 4;
    config.tuning.tpe.n_startup = 2;
    run_pipeline(config);
  };
  run("a");
  run("b");
  const bool metrics = slurp(dir / "a" / "metrics.csv") == slurp(dir / "b" / "metrics.csv");
  const bool trials = slurp(dir / "a" / "trials.jsonl") == slurp(dir / "b" / "trials.jsonl");
  return {metrics && trials, format("MF + TPE run twice: metrics.csv %s, trials.jsonl %s", metrics ? "identical" : "differs",
                                    trials ? "identical" : "differs")};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> check;
    double budget_s;  // 0: no runtime bound
  };
  const std::vector<Criterion> criteria = {
      {1, "metric oracle", metric_oracle, 1},
      {2, "LOO identity", loo_identity, 0},
      {3, "gradient suite", gradient_suite, 30},
      {4, "splitter invariants", splitter_invariants, 0},
      {5, "filtering semantics", filtering_semantics, 0},
      {6, "SLIM oracle", slim_oracle, 10},
      {7, "PureSVD oracle", puresvd_oracle, 0},
      {8, "TPE vs random", tpe_vs_random, 10},
      {9, "directional learning", directional_learning, 300},
      {10, "nested-validation effect", nested_validation_effect, 0},
      {11, "analysis invariants", analysis_invariants, 0},
      {12, "determinism", determinism, 0},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0 && seconds > c.budget_s) {
      outcome.pass = false;
      outcome.detail += format(" [over the %.0f s budget]", c.budget_s);
    }
    if (!outcome.pass) ++failed;
    std::printf("criterion %2d %-26s %s  %s (%.2f s)\n", c.id, c.name, outcome.pass ? "PASS" : "FAIL",
                outcome.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
