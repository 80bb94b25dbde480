#include "enesy/executor.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "enesy/errors.hpp"

namespace enesy {

Executor::Executor(const ModelParams& params, const AdjacencySet& adjacency, std::size_t top_k)
    : params_(params), adjacency_(adjacency), top_k_(top_k), gates_(params) {
  if (adjacency.num_entities() != params.num_entities) {
    throw DomainError("executor: adjacency and model disagree on the number of entities");
  }
  if (top_k == 0) throw ConfigError("top_k must be at least 1");
}

ExecutionResult Executor::execute(const ComputationGraph& query) const {
  query.validate(params_.num_entities, params_.num_relations);
  ExecutionResult result;
  auto& states = result.trace.states;
  states.reserve(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) {
    const auto& node = query.node(i);
    switch (node.kind) {
      case NodeKind::kAnchor: {
        DualState s;
        const auto row = params_.entity(node.id);
        s.v.assign(row.begin(), row.end());
        s.p = FuzzyVector::one_hot(params_.num_entities, node.id);
        states.push_back(std::move(s));
        break;
      }
      case NodeKind::kProjection:
        states.push_back(
            entangled_projection(states[node.children[0]], node.id, params_, adjacency_, top_k_, &gates_));
        break;
      case NodeKind::kIntersection:
      case NodeKind::kUnion:
      case NodeKind::kNegation: {
        std::vector<DualState> inputs;
        for (std::size_t c : node.children) inputs.push_back(states[c]);
        const LogicOp op = node.kind == NodeKind::kIntersection ? LogicOp::kIntersect
                           : node.kind == NodeKind::kUnion      ? LogicOp::kUnion
                                                                : LogicOp::kNegate;
        states.push_back(apply_logic(op, inputs, params_, params_.hp.alpha, &gates_));
        break;
      }
    }
  }
  result.root = states.back();
  return result;
}

ExecutionResult execute(const ComputationGraph& query, const ModelParams& params, const AdjacencySet& adjacency,
                        std::size_t top_k) {
  return Executor(params, adjacency, top_k).execute(query);
}

std::vector<RankedAnswer> rank_scores(std::span<const double> scores, const CrispSet* exclude) {
  std::vector<RankedAnswer> out;
  out.reserve(scores.size());
  for (EntityId e = 0; e < scores.size(); ++e) {
    if (exclude && exclude->contains(e)) continue;
    out.emplace_back(e, scores[e]);
  }
  std::sort(out.begin(), out.end(), [](const RankedAnswer& a, const RankedAnswer& b) {
    return a.second > b.second || (a.second == b.second && a.first < b.first);
  });
  return out;
}

std::vector<RankedAnswer> rank_answers(const DualState& state, const ModelParams& params, EnsembleConfig cfg,
                                       const CrispSet& exclude) {
  const auto scores = ensemble_scores(state, params, cfg);
  return rank_scores(scores, &exclude);
}

InspectionReport inspect(const ExecutionTrace& trace, const ComputationGraph& query, double threshold_fraction,
                         const std::vector<CrispSet>* gold) {
  if (!(threshold_fraction > 0.0 && threshold_fraction <= 1.0)) {
    throw DomainError("inspect: threshold fraction must lie in (0, 1]");
  }
  if (trace.states.size() != query.size()) throw DomainError("inspect: trace does not match query");
  InspectionReport report;
  report.threshold_fraction = threshold_fraction;
  for (std::size_t i = 0; i < query.size(); ++i) {
    const auto& node = query.node(i);
    const auto& state = trace.states[i];
    NodeInspection n;
    n.node = i;
    n.degenerate = state.degenerate;
    switch (node.kind) {
      case NodeKind::kAnchor:
        n.description = "anchor";
        break;
      case NodeKind::kProjection:
        n.description = "projection";
        break;
      case NodeKind::kIntersection:
        n.description = "intersection";
        break;
      case NodeKind::kUnion:
        n.description = "union";
        break;
      case NodeKind::kNegation:
        n.description = "negation";
        break;
    }
    double max_weight = 0.0;
    for (const auto& e : state.p.support()) max_weight = std::max(max_weight, e.weight);
    const double cutoff = threshold_fraction * max_weight;
    const CrispSet* node_gold = gold ? &(*gold)[i] : nullptr;
    for (const auto& e : state.p.support()) {
      if (e.weight < cutoff) continue;
      InspectionEntry entry{e.id, e.weight, std::nullopt};
      if (node_gold) {
        entry.correct = node_gold->contains(e.id);
        if (*entry.correct) ++n.predicted_correct;
      }
      n.entities.push_back(entry);
    }
    std::stable_sort(n.entities.begin(), n.entities.end(),
                     [](const InspectionEntry& a, const InspectionEntry& b) { return a.weight > b.weight; });
    if (node_gold) n.gold_size = node_gold->size();
    report.nodes.push_back(std::move(n));
  }
  return report;
}

void write_inspection(std::ostream& out, const InspectionReport& report, const ComputationGraph& query,
                      const TripleStore& store) {
  out << "# trace threshold " << report.threshold_fraction << " of node maximum\n";
  for (const auto& n : report.nodes) {
    const auto& node = query.node(n.node);
    out << "node " << n.node << ' ' << n.description;
    if (node.kind == NodeKind::kAnchor) out << ' ' << store.entities().label(node.id);
    if (node.kind == NodeKind::kProjection) out << ' ' << store.relations().label(node.id);
    if (!node.children.empty()) {
      out << " <-";
      for (std::size_t c : node.children) out << ' ' << c;
    }
    if (n.degenerate) out << " [degenerate]";
    if (n.gold_size > 0 || std::any_of(n.entities.begin(), n.entities.end(),
                                       [](const InspectionEntry& e) { return e.correct.has_value(); })) {
      out << " P/A " << n.predicted_correct << '/' << n.gold_size;
    }
    out << '\n';
    for (const auto& e : n.entities) {
      out << "  " << store.entities().label(e.entity) << '\t' << std::setprecision(6) << e.weight;
      if (e.correct) out << (*e.correct ? "\tcorrect" : "");
      out << '\n';
    }
  }
}

}  // namespace enesy
