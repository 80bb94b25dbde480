#pragma once

#include <span>
#include <vector>

#include "enesy/fuzzy.hpp"
#include "enesy/neural.hpp"

namespace enesy {

// The (embedding, fuzzy set) pair that flows along a computation graph.
struct DualState {
  ComplexEmbedding v;
  FuzzyVector p;
  bool degenerate = false;

  bool operator==(const DualState&) const = default;
};

struct EnsembleConfig {
  double lambda = 0.5;
};

// Gate value of every entity, precomputed once for frozen parameters.
class GateTable {
 public:
  GateTable() = default;
  explicit GateTable(const ModelParams& params);

  double operator[](EntityId e) const { return gates_[e]; }
  std::size_t size() const { return gates_.size(); }

 private:
  std::vector<double> gates_;
};

enum class LogicOp { kIntersect, kUnion, kNegate };

// Indices of the `top_k` best scores (score descending, id ascending).
std::vector<EntityId> top_k_indices(std::span<const double> scores, std::size_t top_k);

// Softmax over neural scores restricted to the top_k entities.
FuzzyVector infer_fuzzy(EmbeddingView v_t, const ModelParams& params, std::size_t top_k);
FuzzyVector infer_fuzzy_from_scores(std::span<const double> scores, std::size_t top_k);

// g(p_t + p'). A degenerate p_t contributes nothing.
FuzzyVector merge_fuzzy(const FuzzyVector& p_t, const FuzzyVector& p_prime);

// sum_i p_i * gate(e_i) * v_{e_i} over the support of p. When `gates` is null
// the gate MLP is evaluated on the fly.
ComplexEmbedding aggregate_embedding(const FuzzyVector& p, const ModelParams& params,
                                     const GateTable* gates = nullptr);

DualState entangled_projection(const DualState& state, RelationId relation, const ModelParams& params,
                               const AdjacencySet& adjacency, std::size_t top_k,
                               const GateTable* gates = nullptr);

// n-ary intersection/union fold left to right over `inputs`.
DualState apply_logic(LogicOp op, std::span<const DualState> inputs, const ModelParams& params,
                      double alpha, const GateTable* gates = nullptr);

std::vector<double> softmax(std::span<const double> scores);

// lambda * p + (1 - lambda) * softmax(S(v, e) for all e).
std::vector<double> ensemble_scores(const DualState& state, const ModelParams& params, EnsembleConfig cfg);

}  // namespace enesy
