#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "enesy/executor.hpp"
#include "enesy/trainer.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

namespace enesy {
namespace {

using test::numeric_gradient;
using test::random_model;
using test::relative_error;

constexpr double kTolerance = 1e-4;
constexpr int kInstances = 50;

std::vector<EntityId> random_ids(std::size_t count, std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<EntityId> pick(0, static_cast<EntityId>(n - 1));
  std::vector<EntityId> out(count);
  for (auto& e : out) e = pick(rng);
  return out;
}

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> out(n);
  for (auto& x : out) x = normal(rng);
  return out;
}

class LossGradients : public ::testing::TestWithParam<bool> {};

TEST_P(LossGradients, EmbeddingLossMatchesFiniteDifferences) {
  const bool strict = GetParam();
  std::mt19937_64 rng(11);
  for (int instance = 0; instance < kInstances; ++instance) {
    const std::size_t k = 1 + instance % 8;
    auto params = random_model(10, 2, k, 3, 100 + instance);
    auto v = random_vector(2 * k, rng);
    const EntityId positive = random_ids(1, 10, rng)[0];
    const auto negatives = random_ids(1 + instance % 5, 10, rng);

    const auto analytic = loss_embedding(v, positive, negatives, params, strict);
    auto coords = test::weight_pointers(params);
    for (auto& x : v) coords.push_back(&x);
    auto f = [&] { return loss_embedding(v, positive, negatives, params, strict).loss; };
    const auto numeric = numeric_gradient(coords, f);

    auto expected = test::dense_gradient(analytic.params, params);
    expected.insert(expected.end(), analytic.d_embedding.begin(), analytic.d_embedding.end());
    EXPECT_LT(relative_error(expected, numeric), kTolerance) << "instance " << instance;
  }
}

TEST_P(LossGradients, AggregationLossMatchesFiniteDifferences) {
  const bool strict = GetParam();
  std::mt19937_64 rng(12);
  for (int instance = 0; instance < kInstances; ++instance) {
    const std::size_t k = 1 + instance % 8;
    auto params = random_model(10, 2, k, 4, 200 + instance);
    auto v_t = random_vector(2 * k, rng);
    const auto support = random_ids(1 + instance % 6, 10, rng);
    std::vector<FuzzyVector::Entry> entries;
    std::uniform_real_distribution<double> weight(0.05, 1.0);
    for (EntityId e : support) entries.push_back({e, weight(rng)});
    const auto p_prime = FuzzyVector::from_entries(10, entries);
    std::vector<double> p_dense = p_prime.dense();

    auto f = [&] { return loss_mlp(v_t, FuzzyVector::from_dense(p_dense), params, strict).loss; };
    const auto analytic = loss_mlp(v_t, p_prime, params, strict);
    auto coords = test::weight_pointers(params);
    for (auto& x : v_t) coords.push_back(&x);
    for (const auto& e : p_prime.support()) coords.push_back(&p_dense[e.id]);
    const auto numeric = numeric_gradient(coords, f);

    auto expected = test::dense_gradient(analytic.params, params);
    expected.insert(expected.end(), analytic.d_embedding.begin(), analytic.d_embedding.end());
    for (const auto& e : p_prime.support()) expected.push_back(analytic.d_fuzzy[e.id]);
    EXPECT_LT(relative_error(expected, numeric), kTolerance) << "instance " << instance;
  }
}

INSTANTIATE_TEST_SUITE_P(Signs, LossGradients, ::testing::Values(false, true),
                         [](const auto& info) { return info.param ? "Flipped" : "Standard"; });

TEST(LossGradients, SymbolicLossMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> weight(0.01, 1.0);
  for (int instance = 0; instance < kInstances; ++instance) {
    const std::size_t n = 2 + instance % 9;
    std::vector<double> dense(n);
    for (auto& x : dense) x = weight(rng);
    const EntityId positive = random_ids(1, n, rng)[0];
    const auto analytic = loss_symbolic(FuzzyVector::from_dense(dense), positive, 1e-10);
    std::vector<double*> coords;
    for (auto& x : dense) coords.push_back(&x);
    auto f = [&] { return loss_symbolic(FuzzyVector::from_dense(dense), positive, 1e-10).loss; };
    const auto numeric = numeric_gradient(coords, f);
    EXPECT_LT(relative_error(analytic.d_fuzzy, numeric), kTolerance) << "instance " << instance;
  }
}

// Loss of one example as a plain function of the weights.
double example_loss(const ComputationGraph& query, EntityId positive, std::span<const EntityId> negatives,
                    const ModelParams& params, const AdjacencySet& graph, const LossOptions& options) {
  Gradients scratch(params);
  return example_gradient(query, positive, negatives, params, graph, options, scratch).total();
}

struct ComposedCase {
  TripleStore store;
  ModelParams params;
  ComputationGraph query;
  EntityId positive;
  std::vector<EntityId> negatives;
};

ComposedCase composed_case(int instance, QueryType type, std::mt19937_64& rng) {
  RandomGraphOptions g;
  g.entities = 12;
  g.relations = 3;
  g.edges = 40;
  g.valid_fraction = 0.0;
  g.test_fraction = 0.0;
  g.seed = 300 + instance;
  ComposedCase c{generate_random_graph(g), {}, {}, 0, {}};
  const std::size_t k = 2 + instance % 7;
  c.params = random_model(12, 3, k, 4, 400 + instance);
  c.query = test::random_grounding(type, 12, 3, rng);
  c.positive = random_ids(1, 12, rng)[0];
  c.negatives = random_ids(3, 12, rng);
  return c;
}

void check_composed(const ComposedCase& c, const LossOptions& options, int instance) {
  const AdjacencySet graph(c.store, GraphView::kTrain);
  ModelParams params = c.params;
  Gradients grads(params);
  example_gradient(c.query, c.positive, c.negatives, params, graph, options, grads);
  const auto analytic = test::dense_gradient(grads, params);
  const auto coords = test::weight_pointers(params);
  const auto numeric = numeric_gradient(
      coords, [&] { return example_loss(c.query, c.positive, c.negatives, params, graph, options); });
  EXPECT_LT(relative_error(analytic, numeric), kTolerance)
      << "instance " << instance << " type " << query_type_name(structure_of(c.query));
}

TEST(ComposedGradients, ProjectionStageLossThroughEntangledProjection) {
  std::mt19937_64 rng(14);
  LossOptions options;
  options.aggregation = true;
  options.top_k = 5;
  for (int instance = 0; instance < kInstances; ++instance) {
    check_composed(composed_case(instance, QueryType::k1p, rng), options, instance);
  }
}

TEST(ComposedGradients, FinetuneLossThroughEveryOperator) {
  std::mt19937_64 rng(15);
  LossOptions options;
  options.top_k = 4;
  int instance = 0;
  for (QueryType type : kAllQueryTypes) {
    for (int rep = 0; rep < 4; ++rep, ++instance) {
      check_composed(composed_case(instance, type, rng), options, instance);
    }
  }
}

TEST(ComposedGradients, RotationOnlyChains) {
  std::mt19937_64 rng(16);
  LossOptions options;
  options.mode = ForwardMode::kRotation;
  options.symbolic = false;
  int instance = 0;
  for (QueryType type : {QueryType::k1p, QueryType::k2p, QueryType::k3p}) {
    for (int rep = 0; rep < 5; ++rep, ++instance) {
      check_composed(composed_case(instance, type, rng), options, instance);
    }
  }
}

TEST(QueryTapeTest, ForwardMatchesExecutor) {
  std::mt19937_64 rng(17);
  int instance = 0;
  for (QueryType type : kAllQueryTypes) {
    for (int rep = 0; rep < 3; ++rep, ++instance) {
      auto c = composed_case(instance, type, rng);
      const AdjacencySet graph(c.store, GraphView::kTrain);
      GateCache gates(c.params);
      LossOptions options;
      options.top_k = 4;
      QueryTape tape(c.params, graph, options, gates);
      const DualState& taped = tape.forward(c.query);
      const auto executed = execute(c.query, c.params, graph, 4);
      EXPECT_EQ(taped, executed.root) << query_type_name(type);
    }
  }
}

}  // namespace
}  // namespace enesy
