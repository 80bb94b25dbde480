#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "enesy/errors.hpp"
#include "enesy/sampler.hpp"
#include "enesy/synthetic.hpp"
#include "support.hpp"

namespace enesy {
namespace {

TripleStore small_latent(std::uint64_t seed = 3) {
  LatentGraphOptions g;
  g.entities = 400;
  g.relations = 6;
  g.seed = seed;
  return generate_latent_graph(g);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST(SampleQuery, OneHopHasAnAnswer) {
  const auto store = test::desk_store();
  const GroundingGraph graph(store, GraphView::kTrain);
  const AdjacencySet adj(store, GraphView::kTrain);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto q = sample_query(QueryType::k1p, graph, seed);
    ASSERT_EQ(q.size(), 2u);
    EXPECT_FALSE(adj.neighbors(q.node(1).id, q.node(0).id).empty());
  }
}

TEST(SampleQuery, DeterministicInSeed) {
  const auto store = small_latent();
  const GroundingGraph graph(store, GraphView::kTrain);
  for (QueryType type : kAllQueryTypes) {
    EXPECT_EQ(sample_query(type, graph, 17), sample_query(type, graph, 17));
  }
}

TEST(SampleQuery, ShapesAndNonemptyAnswersOnDesk) {
  const auto store = test::desk_store();
  const GroundingGraph graph(store, GraphView::kTest);
  std::size_t grounded = 0;
  for (QueryType type : kAllQueryTypes) {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      ComputationGraph q;
      try {
        q = sample_query(type, graph, seed);
      } catch (const SamplingError&) {
        continue;
      }
      ++grounded;
      ASSERT_EQ(structure_of(q), type);
      EXPECT_FALSE(crisp_execute(q, graph.adjacency()).empty());
    }
  }
  EXPECT_GT(grounded, 5000u);
}

TEST(SampleQuery, NegatedBranchRemovesASiblingAnswer) {
  const auto store = small_latent();
  const GroundingGraph graph(store, GraphView::kTrain);
  for (QueryType type : kNegationQueryTypes) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto q = sample_query(type, graph, seed);
      const auto nodes = crisp_execute_all(q, graph.adjacency());
      for (std::size_t i = 0; i < q.size(); ++i) {
        const auto& node = q.node(i);
        if (node.kind != NodeKind::kIntersection) continue;
        CrispSet positive{store.num_entities(), {}};
        bool first = true;
        for (std::size_t c : node.children) {
          if (q.node(c).kind == NodeKind::kNegation) continue;
          if (first) {
            positive = nodes[c];
            first = false;
          } else {
            positive = crisp_difference(positive, crisp_difference(positive, nodes[c]));
          }
        }
        EXPECT_LT(nodes[i].size(), positive.size()) << query_type_name(type);
      }
    }
  }
}

TEST(SampleQuery, EmptyGraphIsASamplingError) {
  TripleStore store;
  store.entities().intern("x");
  store.relations().intern("r");
  const GroundingGraph graph(store, GraphView::kTrain);
  EXPECT_THROW(sample_query(QueryType::k1p, graph, 0), SamplingError);
}

TEST(LabelAnswers, IdenticalSplitsGiveNoHardAnswers) {
  TripleStore store;
  store.parse_triples("a\tr\tb\nb\tr\tc\n", Split::kTrain);
  const auto q = parse_query("(p r (a a))", store);
  EXPECT_FALSE(label_answers(q, store, Split::kTest));
  EXPECT_FALSE(label_answers(q, store, Split::kValid));
  EXPECT_TRUE(label_answers(q, store, Split::kTrain));
}

TEST(LabelAnswers, OnlyEdgeInTestSplit) {
  TripleStore store;
  store.parse_triples("a\tr\tc\n", Split::kTrain);
  store.parse_triples("a\tq\tb\n", Split::kTest);
  const auto q = parse_query("(p q (a a))", store);
  const auto labeled = label_answers(q, store, Split::kTest);
  ASSERT_TRUE(labeled);
  EXPECT_TRUE(labeled->answers_train.empty());
  const auto entry = to_entry(*labeled, Split::kTest);
  EXPECT_EQ(entry.hard.ids, (std::vector<EntityId>{*store.entities().find("b")}));
  EXPECT_TRUE(entry.easy.empty());
}

TEST(LabelAnswers, NestedOnSampledQueries) {
  const auto store = small_latent(5);
  const GroundingGraph graph(store, GraphView::kTest);
  const AnswerLabeler labeler(store);
  for (int i = 0; i < 500; ++i) {
    const auto type = kAllQueryTypes[i % kAllQueryTypes.size()];
    const auto q = sample_query(type, graph, static_cast<std::uint64_t>(i));
    const auto a_train = crisp_execute(q, labeler.graph(GraphView::kTrain));
    const auto a_valid = crisp_execute(q, labeler.graph(GraphView::kValid));
    const auto a_test = crisp_execute(q, labeler.graph(GraphView::kTest));
    const bool nested = crisp_subset(a_train, a_valid) && crisp_subset(a_valid, a_test);
    const auto labeled = label_answers(q, labeler, Split::kTest);
    if (!nested) {
      EXPECT_FALSE(labeled);
      continue;
    }
    EXPECT_EQ(labeled.has_value(), a_test.size() > a_valid.size());
  }
}

TEST(GenerateBenchmark, CountsAndTypes) {
  const auto store = small_latent();
  BenchmarkConfig config;
  config.test[QueryType::k1p] = 10;
  const auto bench = generate_benchmark(store, config, 1);
  ASSERT_EQ(bench.test.entries.size(), 10u);
  for (const auto& e : bench.test.entries) EXPECT_EQ(e.type, QueryType::k1p);
  EXPECT_TRUE(bench.train.entries.empty());
  std::ostringstream text;
  write_benchmark_entries(text, bench.test.entries, store);
  const auto written = text.str();
  EXPECT_EQ(std::count(written.begin(), written.end(), '\n'), 10);

  BenchmarkConfig bad;
  bad.train[QueryType::kIp] = 5;
  EXPECT_THROW(generate_benchmark(store, bad, 1), ConfigError);
}

TEST(GenerateBenchmark, FilesReparseAndRelabel) {
  const auto store = small_latent();
  const auto bench = generate_benchmark(store, BenchmarkConfig::uniform(20, 20), 2);
  const auto dir = test::temp_dir("sampler_bench");
  write_benchmark(bench, store, dir);
  const AnswerLabeler labeler(store);
  for (Split split : {Split::kTrain, Split::kValid, Split::kTest}) {
    const auto entries = read_benchmark_file(dir / ("queries_" + std::string(split_name(split)) + ".txt"), store);
    ASSERT_EQ(entries.size(), bench.split(split).entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      EXPECT_EQ(e.query, bench.split(split).entries[i].query);
      EXPECT_EQ(e.type, bench.split(split).entries[i].type);
      const auto relabeled = label_answers(e.query, labeler, split);
      ASSERT_TRUE(relabeled);
      const auto fresh = to_entry(*relabeled, split);
      EXPECT_EQ(e.easy, fresh.easy);
      EXPECT_EQ(e.hard, fresh.hard);
      if (split == Split::kTrain) {
        EXPECT_TRUE(is_training_type(e.type));
      } else {
        EXPECT_FALSE(e.hard.empty());
        EXPECT_TRUE(crisp_difference(e.hard, crisp_difference(e.hard, e.easy)).empty());
      }
    }
  }
  std::set<QueryType> types;
  for (const auto& e : bench.test.entries) types.insert(e.type);
  EXPECT_EQ(types.size(), kAllQueryTypes.size());
}

TEST(GenerateBenchmark, SameSeedSameBytes) {
  const auto store = small_latent();
  const auto config = BenchmarkConfig::uniform(10, 10);
  const auto a = test::temp_dir("sampler_a");
  const auto b = test::temp_dir("sampler_b");
  const auto c = test::temp_dir("sampler_c");
  write_benchmark(generate_benchmark(store, config, 4), store, a);
  write_benchmark(generate_benchmark(store, config, 4), store, b);
  write_benchmark(generate_benchmark(store, config, 5), store, c);
  for (const char* name : {"queries_train.txt", "queries_valid.txt", "queries_test.txt", "stats.txt"}) {
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
  EXPECT_NE(slurp(a / "queries_test.txt"), slurp(c / "queries_test.txt"));
}

TEST(GenerateBenchmark, ShortfallIsReported) {
  const auto store = test::desk_store();
  BenchmarkConfig config;
  config.test[QueryType::k3in] = 500;
  config.attempts_per_query = 2;
  const auto bench = generate_benchmark(store, config, 1);
  ASSERT_TRUE(bench.test.shortfall.count(QueryType::k3in));
  EXPECT_EQ(bench.test.shortfall.at(QueryType::k3in) + bench.test.entries.size(), 500u);
}

TEST(ReadBenchmark, MalformedLines) {
  const auto store = test::desk_store();
  std::istringstream missing_field("(p r0 (a e0))\t1\n");
  EXPECT_THROW(read_benchmark_entries(missing_field, store), ParseError);
  std::istringstream bad_id("(p r0 (a e0))\t1\tx\n");
  EXPECT_THROW(read_benchmark_entries(bad_id, store), ParseError);
  std::istringstream out_of_range("(p r0 (a e0))\t\t99\n");
  EXPECT_THROW(read_benchmark_entries(out_of_range, store), ParseError);
  std::istringstream ok("(p r0 (a e0))\t\t1,2\n");
  const auto entries = read_benchmark_entries(ok, store);
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_TRUE(entries[0].easy.empty());
  EXPECT_EQ(entries[0].hard.ids, (std::vector<EntityId>{1, 2}));
}

}  // namespace
}  // namespace enesy
