#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "enesy/errors.hpp"
#include "enesy/evaluator.hpp"
#include "support.hpp"

namespace enesy {
namespace {

// Rank of every hard answer counted directly from the scores.
double oracle_mrr(const std::vector<double>& scores, const CrispSet& hard, const CrispSet& all) {
  double total = 0.0;
  for (EntityId h : hard.ids) {
    std::size_t rank = 1;
    for (EntityId e = 0; e < scores.size(); ++e) {
      if (all.contains(e)) continue;
      if (scores[e] > scores[h] || (scores[e] == scores[h] && e < h)) ++rank;
    }
    total += 1.0 / static_cast<double>(rank);
  }
  return total / static_cast<double>(hard.size());
}

struct Fixture {
  TripleStore store;
  ModelParams params;
  Benchmark bench;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    LatentGraphOptions g;
    g.entities = 300;
    g.relations = 5;
    g.seed = 8;
    out.store = generate_latent_graph(g);
    out.params = test::random_model(out.store.num_entities(), out.store.num_relations(), 8, 6, 4);
    out.bench = generate_benchmark(out.store, BenchmarkConfig::uniform(0, 15), 3);
    return out;
  }();
  return f;
}

TEST(MrrFiltered, Examples) {
  const std::vector<EntityId> ranking{2, 5, 9};
  EXPECT_DOUBLE_EQ(*mrr_filtered(ranking, make_crisp(10, {5}), make_crisp(10, {5})), 0.5);
  EXPECT_DOUBLE_EQ(*mrr_filtered(ranking, make_crisp(10, {9}), make_crisp(10, {5, 9})), 0.5);
  EXPECT_DOUBLE_EQ(*mrr_filtered(ranking, make_crisp(10, {2, 9}), make_crisp(10, {2, 9})), 0.75);
  EXPECT_FALSE(mrr_filtered(ranking, make_crisp(10, {}), make_crisp(10, {5})));
  EXPECT_THROW(mrr_filtered(ranking, make_crisp(10, {4}), make_crisp(10, {4})), DomainError);
}

TEST(FilteredMetrics, MatchesCountingOracle) {
  std::mt19937_64 rng(12);
  for (int instance = 0; instance < 100; ++instance) {
    const std::size_t n = 5 + instance % 40;
    std::uniform_int_distribution<int> level(0, 6);
    std::vector<double> scores(n);
    for (auto& s : scores) s = level(rng) * 0.25;
    std::vector<EntityId> all_ids, hard_ids;
    std::bernoulli_distribution answer(0.2), is_hard(0.6);
    for (EntityId e = 0; e < n; ++e) {
      if (!answer(rng)) continue;
      all_ids.push_back(e);
      if (is_hard(rng)) hard_ids.push_back(e);
    }
    if (hard_ids.empty()) hard_ids.push_back(0), all_ids.insert(all_ids.begin(), 0);
    const auto all = make_crisp(n, all_ids);
    const auto hard = make_crisp(n, hard_ids);
    const auto m = filtered_metrics(scores, hard, all);
    ASSERT_TRUE(m);
    EXPECT_NEAR(m->mrr, oracle_mrr(scores, hard, all), 1e-12) << instance;
    EXPECT_LE(m->hits1, m->hits3);
    EXPECT_LE(m->hits3, m->hits10);
    EXPECT_LE(m->hits10, 1.0);
  }
}

TEST(Evaluate, ExtremeLambdasEqualSingleBranchModes) {
  const auto& f = fixture();
  const AdjacencySet graph(f.store, reasoning_view(Split::kTest));
  const EvalOptions options{16, 1};
  const auto neural = evaluate(f.params, f.bench.test.entries, graph, EvalMode::kNeuralOnly, LambdaTable(), options);
  const auto symbolic =
      evaluate(f.params, f.bench.test.entries, graph, EvalMode::kSymbolicOnly, LambdaTable(), options);
  const auto full0 =
      evaluate(f.params, f.bench.test.entries, graph, EvalMode::kFull, LambdaTable::constant(0.0), options);
  const auto full1 =
      evaluate(f.params, f.bench.test.entries, graph, EvalMode::kFull, LambdaTable::constant(1.0), options);
  ASSERT_EQ(neural.per_query.size(), full0.per_query.size());
  for (std::size_t i = 0; i < neural.per_query.size(); ++i) {
    EXPECT_EQ(neural.per_query[i].metrics.mrr, full0.per_query[i].metrics.mrr);
    EXPECT_EQ(symbolic.per_query[i].metrics.mrr, full1.per_query[i].metrics.mrr);
  }
}

TEST(Evaluate, RankDumpReaggregatesToReport) {
  const auto& f = fixture();
  const AdjacencySet graph(f.store, reasoning_view(Split::kTest));
  const auto report =
      evaluate(f.params, f.bench.test.entries, graph, EvalMode::kFull, LambdaTable(), {16, 1});
  std::ostringstream dump;
  write_rank_dump(dump, report);
  std::istringstream in(dump.str());
  std::string line;
  std::getline(in, line);
  std::map<std::string, std::pair<double, std::size_t>> sums;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::vector<std::string> cols;
    for (std::string c; std::getline(fields, c, ',');) cols.push_back(c);
    ASSERT_EQ(cols.size(), 8u);
    ++rows;
    if (cols[3] == "1") continue;
    sums[cols[1]].first += std::stod(cols[4]);
    ++sums[cols[1]].second;
  }
  EXPECT_EQ(rows, f.bench.test.entries.size());
  double positive = 0.0, negative = 0.0;
  std::size_t np = 0, nn = 0;
  for (QueryType t : kAllQueryTypes) {
    const auto& [sum, count] = sums[std::string(query_type_name(t))];
    ASSERT_GT(count, 0u);
    const double mean = sum / static_cast<double>(count);
    EXPECT_NEAR(mean, *report.mrr(t), 1e-12);
    if (std::find(kNegationQueryTypes.begin(), kNegationQueryTypes.end(), t) != kNegationQueryTypes.end()) {
      negative += mean;
      ++nn;
    } else {
      positive += mean;
      ++np;
    }
  }
  EXPECT_NEAR(*report.avg_p(), positive / static_cast<double>(np), 1e-12);
  EXPECT_NEAR(*report.avg_n(), negative / static_cast<double>(nn), 1e-12);

  std::ostringstream csv;
  write_report_csv(csv, report);
  const auto text = csv.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
  std::ostringstream table;
  write_report_table(table, report);
  EXPECT_NE(table.str().find("q_not="), std::string::npos);
}

TEST(Evaluate, TraversalRanksHardAnswersNearChance) {
  const auto& f = fixture();
  const AdjacencySet graph(f.store, reasoning_view(Split::kTest));
  const auto report =
      evaluate(f.params, f.bench.test.entries, graph, EvalMode::kTraversal, LambdaTable(), {16, 1});
  EXPECT_LT(*report.group(QueryGroup::kExists), 0.05);
}

TEST(Evaluate, KgeModeSkipsIntersectionAndNegation) {
  const auto& f = fixture();
  const AdjacencySet graph(f.store, reasoning_view(Split::kTest));
  const auto report = evaluate(f.params, f.bench.test.entries, graph, EvalMode::kKge, LambdaTable(), {16, 1});
  for (QueryType t : {QueryType::k1p, QueryType::k2p, QueryType::k3p, QueryType::k2u, QueryType::kUp}) {
    EXPECT_TRUE(report.mrr(t)) << query_type_name(t);
  }
  for (QueryType t : {QueryType::k2i, QueryType::kIp, QueryType::k2in, QueryType::kPni}) {
    EXPECT_FALSE(report.mrr(t)) << query_type_name(t);
    EXPECT_GT(report.per_type.at(t).skipped, 0u);
  }
}

TEST(TuneLambdas, TunedTypesBeatBothBranchesOnValid) {
  const auto& f = fixture();
  const AdjacencySet graph(f.store, reasoning_view(Split::kValid));
  const EvalOptions options{16, 1};
  const auto& valid = f.bench.valid.entries;
  const auto table = tune_lambdas(f.params, valid, graph, options);
  const auto full = evaluate(f.params, valid, graph, EvalMode::kFull, table, options);
  const auto neural = evaluate(f.params, valid, graph, EvalMode::kNeuralOnly, table, options);
  const auto symbolic = evaluate(f.params, valid, graph, EvalMode::kSymbolicOnly, table, options);
  for (QueryType t : kAllQueryTypes) {
    EXPECT_GE(*full.mrr(t) + 1e-12, std::max(*neural.mrr(t), *symbolic.mrr(t))) << query_type_name(t);
    const double lambda = table.get(t);
    EXPECT_NEAR(lambda * 20.0, std::round(lambda * 20.0), 1e-9);
  }
}

TEST(TuneLambdas, TiesKeepTheSmallerLambda) {
  const auto& f = fixture();
  const AdjacencySet graph(f.store, reasoning_view(Split::kValid));
  std::vector<BenchmarkEntry> single{f.bench.valid.entries.front()};
  // Equal weights on one grid point twice: the first index wins.
  const std::vector<double> grid{0.3, 0.3};
  const auto table = tune_lambdas(f.params, single, graph, {16, 1}, grid);
  EXPECT_DOUBLE_EQ(table.get(single[0].type), 0.3);
  EXPECT_DOUBLE_EQ(table.get(QueryType::kPni == single[0].type ? QueryType::k1p : QueryType::kPni),
                   f.params.hp.lambda);
}

TEST(LambdaTable, SaveLoadAndErrors) {
  LambdaTable table(0.25);
  table.set(QueryType::k2in, 0.1);
  table.set(QueryType::kUp, 1.0);
  EXPECT_THROW(table.set(QueryType::k1p, -0.1), ConfigError);
  const auto dir = test::temp_dir("lambda");
  table.save(dir / "l.txt");
  const auto back = LambdaTable::load(dir / "l.txt");
  EXPECT_EQ(back.default_lambda(), 0.25);
  EXPECT_EQ(back.entries(), table.entries());
  EXPECT_EQ(back.get(QueryType::k3p), 0.25);

  auto write = [&](const std::string& text) {
    std::ofstream(dir / "bad.txt") << text;
    return dir / "bad.txt";
  };
  EXPECT_THROW(LambdaTable::load(write("2p 1.5\n")), ParseError);
  EXPECT_THROW(LambdaTable::load(write("9q 0.5\n")), ParseError);
  EXPECT_THROW(LambdaTable::load(write("2p\n")), ParseError);
  EXPECT_THROW(LambdaTable::load(dir / "missing.txt"), Error);
}

TEST(ReasoningView, ValidUsesTrainTestUsesValid) {
  EXPECT_EQ(reasoning_view(Split::kValid), GraphView::kTrain);
  EXPECT_EQ(reasoning_view(Split::kTest), GraphView::kValid);
}

}  // namespace
}  // namespace enesy
