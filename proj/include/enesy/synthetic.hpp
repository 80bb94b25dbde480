#pragma once

#include <cstdint>

#include "enesy/kg_store.hpp"

namespace enesy {

// Graph whose edges follow a hidden geometry: entities sit on a torus, each
// relation shifts positions by a fixed offset and links a head to the
// entities nearest the shifted point. Multi-hop structure is therefore
// learnable, which uniform random graphs do not offer.
struct LatentGraphOptions {
  std::size_t entities = 2000;
  std::size_t relations = 12;
  std::size_t latent_dim = 3;
  // Fraction of entities that carry outgoing edges of a relation, drawn per
  // relation from [domain_min, domain_max].
  double domain_min = 0.3;
  double domain_max = 0.8;
  // Tails per head, drawn per relation from [1, max_tails].
  std::size_t max_tails = 3;
  // Standard deviation (radians) of a per-(head, relation) displacement of
  // the shifted point, so relations are only approximately rigid.
  double jitter = 0.0;
  // Extra edges with uniformly random endpoints, as a fraction of the total.
  double noise_fraction = 0.02;
  double valid_fraction = 0.05;
  double test_fraction = 0.05;
  std::uint64_t seed = 0;
};

TripleStore generate_latent_graph(const LatentGraphOptions& options);

struct RandomGraphOptions {
  std::size_t entities = 500;
  std::size_t relations = 8;
  std::size_t edges = 3000;
  double valid_fraction = 0.05;
  double test_fraction = 0.05;
  std::uint64_t seed = 0;
};

// Edges with uniformly random endpoints and relation.
TripleStore generate_random_graph(const RandomGraphOptions& options);

// Builds a store with labels e<i> / r<j> and moves a random
// valid_fraction/test_fraction of `triples` into the held-out splits.
TripleStore split_holdout(std::size_t entities, std::size_t relations, std::vector<Triple> triples,
                          double valid_fraction, double test_fraction, std::uint64_t seed);

}  // namespace enesy
