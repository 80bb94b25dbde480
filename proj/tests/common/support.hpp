#pragma once

#include <filesystem>
#include <random>
#include <vector>

#include "enesy/kg_store.hpp"
#include "enesy/neural.hpp"
#include "enesy/query.hpp"
#include "enesy/synthetic.hpp"

namespace enesy::test {

inline std::filesystem::path fixture_dir() { return ENESY_FIXTURE_DIR; }

inline TripleStore desk_store() { return TripleStore::load_directory(fixture_dir()); }

// Model with every weight drawn from N(0, scale), gate weights included, so
// no gradient path is trivially zero.
inline ModelParams random_model(std::size_t entities, std::size_t relations, std::size_t dim, std::size_t hidden,
                                std::uint64_t seed, double scale = 0.5) {
  Hyperparameters hp;
  hp.dim = static_cast<std::uint32_t>(dim);
  hp.gamma = 4.0;
  ModelParams p = ModelParams::initialize(entities, relations, hidden, hp, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& x : p.entity_table) x = normal(rng);
  for (auto& x : p.relation_phases) x = 3.0 * normal(rng);
  for (auto& x : p.mlp.parameters()) x = normal(rng);
  return p;
}

// Template of `type` with anchors and relations drawn uniformly.
inline ComputationGraph random_grounding(QueryType type, std::size_t entities, std::size_t relations,
                                         std::mt19937_64& rng) {
  std::uniform_int_distribution<EntityId> entity(0, static_cast<EntityId>(entities - 1));
  std::uniform_int_distribution<RelationId> relation(0, static_cast<RelationId>(relations - 1));
  const ComputationGraph shape = query_template(type);
  ComputationGraph out;
  for (const auto& node : shape.nodes()) {
    switch (node.kind) {
      case NodeKind::kAnchor:
        out.add_anchor(entity(rng));
        break;
      case NodeKind::kProjection:
        out.add_projection(relation(rng), node.children[0]);
        break;
      case NodeKind::kIntersection:
        out.add_intersection(node.children);
        break;
      case NodeKind::kUnion:
        out.add_union(node.children);
        break;
      case NodeKind::kNegation:
        out.add_negation(node.children[0]);
        break;
    }
  }
  return out;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("enesy_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace enesy::test
