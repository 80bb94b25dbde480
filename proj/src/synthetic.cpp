#include "enesy/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include "enesy/errors.hpp"

namespace enesy {

TripleStore split_holdout(std::size_t entities, std::size_t relations, std::vector<Triple> triples,
                          double valid_fraction, double test_fraction, std::uint64_t seed) {
  if (valid_fraction < 0.0 || test_fraction < 0.0 || valid_fraction + test_fraction >= 1.0) {
    throw ConfigError("held-out fractions must be non-negative and sum below 1");
  }
  std::sort(triples.begin(), triples.end());
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
  std::mt19937_64 rng(seed);
  std::shuffle(triples.begin(), triples.end(), rng);

  TripleStore store;
  for (std::size_t i = 0; i < entities; ++i) store.entities().intern("e" + std::to_string(i));
  for (std::size_t i = 0; i < relations; ++i) store.relations().intern("r" + std::to_string(i));

  const auto n = triples.size();
  const auto n_valid = static_cast<std::size_t>(std::floor(valid_fraction * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(n)));
  const std::span<const Triple> all(triples);
  store.add_triples(Split::kValid, all.subspan(0, n_valid));
  store.add_triples(Split::kTest, all.subspan(n_valid, n_test));
  store.add_triples(Split::kTrain, all.subspan(n_valid + n_test));
  return store;
}

TripleStore generate_random_graph(const RandomGraphOptions& options) {
  if (options.entities < 2 || options.relations < 1) throw ConfigError("random graph needs entities and relations");
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<EntityId> entity(0, static_cast<EntityId>(options.entities - 1));
  std::uniform_int_distribution<RelationId> relation(0, static_cast<RelationId>(options.relations - 1));
  std::set<Triple> edges;
  const std::size_t possible = options.entities * options.entities * options.relations;
  const std::size_t target = std::min(options.edges, possible);
  while (edges.size() < target) edges.insert({entity(rng), relation(rng), entity(rng)});
  return split_holdout(options.entities, options.relations, {edges.begin(), edges.end()}, options.valid_fraction,
                       options.test_fraction, options.seed + 1);
}

TripleStore generate_latent_graph(const LatentGraphOptions& options) {
  if (options.entities < 2 || options.relations < 1 || options.latent_dim < 1 || options.max_tails < 1) {
    throw ConfigError("latent graph needs entities, relations, a latent dimension and max_tails >= 1");
  }
  if (options.domain_min <= 0.0 || options.domain_max > 1.0 || options.domain_min > options.domain_max) {
    throw ConfigError("latent graph domain fractions must satisfy 0 < min <= max <= 1");
  }
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const std::size_t n = options.entities;
  const std::size_t d = options.latent_dim;
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, options.jitter > 0.0 ? options.jitter : 1.0);

  std::vector<double> position(n * d);
  for (auto& x : position) x = angle(rng);

  auto torus_distance2 = [&](const double* a, const double* b) {
    double total = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double diff = std::fmod(std::abs(a[i] - b[i]), kTwoPi);
      diff = std::min(diff, kTwoPi - diff);
      total += diff * diff;
    }
    return total;
  };

  std::vector<Triple> triples;
  std::vector<EntityId> order(n);
  std::vector<std::pair<double, EntityId>> nearest(n);
  std::vector<double> shifted(d);
  for (RelationId r = 0; r < options.relations; ++r) {
    std::vector<double> offset(d);
    for (auto& x : offset) x = angle(rng);
    const double fraction = options.domain_min + (options.domain_max - options.domain_min) * unit(rng);
    const std::size_t tails =
        1 + std::uniform_int_distribution<std::size_t>(0, options.max_tails - 1)(rng);
    std::iota(order.begin(), order.end(), EntityId{0});
    std::shuffle(order.begin(), order.end(), rng);
    const auto heads = std::max<std::size_t>(1, static_cast<std::size_t>(fraction * static_cast<double>(n)));
    for (std::size_t h = 0; h < heads; ++h) {
      const EntityId head = order[h];
      for (std::size_t i = 0; i < d; ++i) {
        const double noise = options.jitter > 0.0 ? jitter(rng) : 0.0;
        shifted[i] = std::fmod(position[head * d + i] + offset[i] + noise + kTwoPi, kTwoPi);
      }
      for (EntityId e = 0; e < n; ++e) nearest[e] = {torus_distance2(shifted.data(), &position[e * d]), e};
      const auto take = std::min(tails, n);
      std::partial_sort(nearest.begin(), nearest.begin() + static_cast<std::ptrdiff_t>(take), nearest.end());
      for (std::size_t t = 0; t < take; ++t) triples.push_back({head, r, nearest[t].second});
    }
  }

  const auto noise = static_cast<std::size_t>(options.noise_fraction * static_cast<double>(triples.size()));
  std::uniform_int_distribution<EntityId> entity(0, static_cast<EntityId>(n - 1));
  std::uniform_int_distribution<RelationId> relation(0, static_cast<RelationId>(options.relations - 1));
  for (std::size_t i = 0; i < noise; ++i) triples.push_back({entity(rng), relation(rng), entity(rng)});

  return split_holdout(n, options.relations, std::move(triples), options.valid_fraction, options.test_fraction,
                       options.seed + 1);
}

}  // namespace enesy
