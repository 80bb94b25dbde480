#include "enesy/entangle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "enesy/errors.hpp"

namespace enesy {

GateTable::GateTable(const ModelParams& params) : gates_(params.num_entities) {
  for (EntityId e = 0; e < params.num_entities; ++e) gates_[e] = params.mlp.forward(params.entity(e));
}

std::vector<EntityId> top_k_indices(std::span<const double> scores, std::size_t top_k) {
  std::vector<EntityId> order(scores.size());
  std::iota(order.begin(), order.end(), EntityId{0});
  const std::size_t k = std::min(top_k, scores.size());
  auto better = [&](EntityId a, EntityId b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
  order.resize(k);
  return order;
}

FuzzyVector infer_fuzzy_from_scores(std::span<const double> scores, std::size_t top_k) {
  if (top_k == 0) throw DomainError("infer_fuzzy: top_k must be at least 1");
  const auto selected = top_k_indices(scores, top_k);
  const double best = scores[selected.front()];
  std::vector<FuzzyVector::Entry> entries;
  entries.reserve(selected.size());
  double total = 0.0;
  for (EntityId e : selected) {
    const double w = std::exp(scores[e] - best);
    entries.push_back({e, w});
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (const auto& e : entries) total += e.weight;
  for (auto& e : entries) e.weight /= total;
  return FuzzyVector::from_entries(scores.size(), std::move(entries));
}

FuzzyVector infer_fuzzy(EmbeddingView v_t, const ModelParams& params, std::size_t top_k) {
  const auto scores = score_all(v_t, params);
  return infer_fuzzy_from_scores(scores, top_k);
}

FuzzyVector merge_fuzzy(const FuzzyVector& p_t, const FuzzyVector& p_prime) {
  if (p_t.dimension() != p_prime.dimension()) throw DomainError("merge_fuzzy: dimension mismatch");
  if (p_t.degenerate()) return normalize(p_prime);
  std::vector<FuzzyVector::Entry> entries(p_t.support().begin(), p_t.support().end());
  entries.insert(entries.end(), p_prime.support().begin(), p_prime.support().end());
  return normalize(FuzzyVector::from_entries(p_t.dimension(), std::move(entries)));
}

ComplexEmbedding aggregate_embedding(const FuzzyVector& p, const ModelParams& params, const GateTable* gates) {
  if (p.empty()) throw DomainError("aggregate_embedding: empty support");
  const std::size_t width = 2 * params.hp.dim;
  ComplexEmbedding out(width, 0.0);
  for (const auto& e : p.support()) {
    const auto row = params.entity(e.id);
    const double g = gates ? (*gates)[e.id] : params.mlp.forward(row);
    const double scale = e.weight * g;
    for (std::size_t i = 0; i < width; ++i) out[i] += scale * row[i];
  }
  return out;
}

DualState entangled_projection(const DualState& state, RelationId relation, const ModelParams& params,
                               const AdjacencySet& adjacency, std::size_t top_k, const GateTable* gates) {
  const auto v_t = project_neural(state.v, params.phases(relation));
  const auto p_t = project_symbolic(state.p, adjacency.relation(relation));
  const auto p_prime = infer_fuzzy(v_t, params, top_k);
  DualState out;
  out.p = merge_fuzzy(p_t, p_prime);
  out.v = aggregate_embedding(out.p, params, gates);
  out.degenerate = out.p.degenerate();
  return out;
}

DualState apply_logic(LogicOp op, std::span<const DualState> inputs, const ModelParams& params, double alpha,
                      const GateTable* gates) {
  DualState out;
  bool degenerate = false;
  for (const auto& in : inputs) degenerate = degenerate || in.degenerate;
  if (op == LogicOp::kNegate) {
    if (inputs.size() != 1) throw DomainError("negation takes exactly one input");
    out.p = negate(inputs[0].p, alpha);
  } else {
    if (inputs.size() < 2) {
      throw DomainError(std::string(op == LogicOp::kIntersect ? "intersection" : "union") +
                        " takes at least two inputs");
    }
    out.p = inputs[0].p;
    for (std::size_t i = 1; i < inputs.size(); ++i) {
      out.p = op == LogicOp::kIntersect ? intersect(out.p, inputs[i].p) : unite(out.p, inputs[i].p);
      degenerate = degenerate || out.p.degenerate();
    }
  }
  degenerate = degenerate || out.p.degenerate();
  out.v = aggregate_embedding(out.p, params, gates);
  out.degenerate = degenerate;
  return out;
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> out(scores.size());
  if (scores.empty()) return out;
  const double best = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - best);
    total += out[i];
  }
  for (auto& x : out) x /= total;
  return out;
}

std::vector<double> ensemble_scores(const DualState& state, const ModelParams& params, EnsembleConfig cfg) {
  if (cfg.lambda < 0.0 || cfg.lambda > 1.0) throw DomainError("ensemble lambda must lie in [0, 1]");
  std::vector<double> out(params.num_entities, 0.0);
  if (cfg.lambda < 1.0) {
    const auto neural = softmax(score_all(state.v, params));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - cfg.lambda) * neural[i];
  }
  if (cfg.lambda > 0.0) {
    for (const auto& e : state.p.support()) out[e.id] += cfg.lambda * e.weight;
  }
  return out;
}

}  // namespace enesy
