#include <gtest/gtest.h>

#include <random>

#include "enesy/errors.hpp"
#include "enesy/query.hpp"
#include "enesy/sampler.hpp"
#include "enesy/synthetic.hpp"
#include "support.hpp"

namespace enesy {
namespace {

TEST(ParseQuery, OneHop) {
  const auto store = test::desk_store();
  const auto q = parse_query("(p r0 (a e0))", store);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_EQ(q.node(0).kind, NodeKind::kAnchor);
  EXPECT_EQ(q.node(0).id, *store.entities().find("e0"));
  EXPECT_EQ(q.node(1).kind, NodeKind::kProjection);
  EXPECT_EQ(q.node(1).id, *store.relations().find("r0"));
  EXPECT_EQ(structure_of(q), QueryType::k1p);
}

TEST(ParseQuery, IntersectionAndNegatedShapes) {
  const auto store = test::desk_store();
  EXPECT_EQ(structure_of(parse_query("(i (p r1 (a e0)) (p r2 (a e3)))", store)), QueryType::k2i);
  const auto inp = parse_query("(p r2 (i (p r0 (a e0)) (n (p r1 (a e1)))))", store, ParseMode::kBenchmark);
  EXPECT_EQ(structure_of(inp), QueryType::kInp);
  // hand-drawn: anchors e0, e1; projection r0 and r1; negation; intersection; final r2
  ASSERT_EQ(inp.size(), 7u);
  EXPECT_EQ(inp.node(inp.root()).kind, NodeKind::kProjection);
  EXPECT_EQ(inp.anchors(), (std::vector<EntityId>{0, 1}));
}

TEST(ParseQuery, ReportsErrors) {
  const auto store = test::desk_store();
  try {
    parse_query("(p r0 (a e0)", store);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_GT(e.column(), 0u);
  }
  EXPECT_THROW(parse_query("(q r0 (a e0))", store), ParseError);
  EXPECT_THROW(parse_query("(p r0 (a e0)) extra", store), ParseError);
  EXPECT_THROW(parse_query("(p r0 (a nobody))", store), VocabularyError);
  EXPECT_THROW(parse_query("(p r9 (a e0))", store), VocabularyError);
  EXPECT_THROW(parse_query("(i (p r0 (a e0)))", store), ParseError);
  EXPECT_THROW(parse_query("(n (p r0 (a e0)))", store, ParseMode::kBenchmark), QueryError);
  EXPECT_NO_THROW(parse_query("(n (p r0 (a e0)))", store, ParseMode::kFree));
  EXPECT_THROW(parse_query("(p r0 (p r0 (p r0 (p r0 (a e0)))))", store, ParseMode::kBenchmark), QueryError);
}

TEST(StructureOf, ShapesAndOther) {
  const auto store = test::desk_store();
  EXPECT_EQ(structure_of(parse_query("(p r0 (p r1 (p r2 (a e0))))", store)), QueryType::k3p);
  EXPECT_EQ(structure_of(parse_query("(u (p r0 (a e0)) (p r1 (a e1)))", store)), QueryType::k2u);
  EXPECT_EQ(structure_of(parse_query("(i (p r1 (a e1)) (p r0 (a e0)))", store)), QueryType::k2i);
  EXPECT_EQ(structure_of(parse_query("(a e0)", store)), QueryType::kOther);
  EXPECT_EQ(structure_of(parse_query("(p r0 (p r0 (p r0 (p r0 (a e0)))))", store)), QueryType::kOther);
}

TEST(StructureOf, TemplatesAndSamplesRoundTripTheirType) {
  LatentGraphOptions g;
  g.entities = 300;
  g.relations = 6;
  g.seed = 4;
  const auto store = generate_latent_graph(g);
  const GroundingGraph grounding(store, GraphView::kTrain);
  for (QueryType type : kAllQueryTypes) {
    EXPECT_EQ(structure_of(query_template(type)), type);
    for (std::uint64_t seed = 0; seed < 1000 / kAllQueryTypes.size() + 1; ++seed) {
      const auto q = sample_query(type, grounding, seed);
      EXPECT_EQ(structure_of(q), type) << query_type_name(type);
    }
  }
}

TEST(StructureOf, InvariantUnderRelabeling) {
  std::mt19937_64 rng(3);
  for (QueryType type : kAllQueryTypes) {
    const auto a = test::random_grounding(type, 50, 5, rng);
    const auto b = test::random_grounding(type, 900, 40, rng);
    EXPECT_EQ(structure_of(a), structure_of(b));
  }
}

TEST(SerializeQuery, CanonicalTextAndRoundTrip) {
  const auto store = test::desk_store();
  const auto q = parse_query("(p r0 (a e0))", store);
  EXPECT_EQ(serialize_query(q, store), "(p r0 (a e0))");
  const std::string text = "(i (p r2 (a e5)) (n (p r1 (a e3))) (p r0 (a e1)))";
  EXPECT_EQ(serialize_query(parse_query(text, store), store), text);

  std::mt19937_64 rng(8);
  for (int i = 0; i < 1000; ++i) {
    const auto type = kAllQueryTypes[i % kAllQueryTypes.size()];
    const auto query = test::random_grounding(type, store.num_entities(), store.num_relations(), rng);
    const auto again = parse_query(serialize_query(query, store), store);
    EXPECT_EQ(again, query);
  }
}

TEST(ComputationGraphTest, ValidateRejectsMalformedGraphs) {
  ComputationGraph two_roots;
  two_roots.add_anchor(0);
  two_roots.add_anchor(1);
  EXPECT_THROW(two_roots.validate(), QueryError);
  EXPECT_THROW(ComputationGraph().validate(), QueryError);
  ComputationGraph bad_child;
  EXPECT_THROW(bad_child.add_projection(0, 3), QueryError);
  ComputationGraph out_of_range;
  out_of_range.add_projection(7, out_of_range.add_anchor(20));
  EXPECT_THROW(out_of_range.validate(12, 3), QueryError);
  EXPECT_NO_THROW(out_of_range.validate());
}

TEST(QueryTypeNames, RoundTrip) {
  for (QueryType t : kAllQueryTypes) EXPECT_EQ(parse_query_type(query_type_name(t)), t);
  EXPECT_FALSE(parse_query_type("4p"));
  EXPECT_FALSE(is_training_type(QueryType::kIp));
  EXPECT_TRUE(is_training_type(QueryType::kPni));
}

}  // namespace
}  // namespace enesy
