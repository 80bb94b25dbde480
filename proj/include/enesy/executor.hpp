#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "enesy/entangle.hpp"
#include "enesy/query.hpp"

namespace enesy {

// One state per computation-graph node, indexed like ComputationGraph::nodes().
struct ExecutionTrace {
  std::vector<DualState> states;
};

struct ExecutionResult {
  DualState root;
  ExecutionTrace trace;
};

using RankedAnswer = std::pair<EntityId, double>;

// Evaluates computation graphs over a fixed graph view and frozen parameters.
// Gate values are precomputed once at construction.
class Executor {
 public:
  Executor(const ModelParams& params, const AdjacencySet& adjacency, std::size_t top_k);

  ExecutionResult execute(const ComputationGraph& query) const;

  const ModelParams& params() const { return params_; }
  const AdjacencySet& adjacency() const { return adjacency_; }
  const GateTable& gates() const { return gates_; }
  std::size_t top_k() const { return top_k_; }

 private:
  const ModelParams& params_;
  const AdjacencySet& adjacency_;
  std::size_t top_k_;
  GateTable gates_;
};

ExecutionResult execute(const ComputationGraph& query, const ModelParams& params,
                        const AdjacencySet& adjacency, std::size_t top_k);

// Orders `scores` descending with ties broken by ascending id, skipping ids
// in `exclude`.
std::vector<RankedAnswer> rank_scores(std::span<const double> scores, const CrispSet* exclude = nullptr);

std::vector<RankedAnswer> rank_answers(const DualState& state, const ModelParams& params, EnsembleConfig cfg,
                                       const CrispSet& exclude);

struct InspectionEntry {
  EntityId entity;
  double weight;
  std::optional<bool> correct;  // set when gold answers were supplied
};

struct NodeInspection {
  std::size_t node;
  std::string description;  // e.g. "p r1" or "anchor e0"
  std::vector<InspectionEntry> entities;
  bool degenerate = false;
  std::size_t predicted_correct = 0;  // P in the P/A column
  std::size_t gold_size = 0;          // A in the P/A column
};

struct InspectionReport {
  double threshold_fraction = 0.1;
  std::vector<NodeInspection> nodes;
};

// Lists, for each node, entities whose weight is at least
// threshold_fraction times the node's largest weight, heaviest first.
// `gold`, if given, holds one crisp set per node.
InspectionReport inspect(const ExecutionTrace& trace, const ComputationGraph& query, double threshold_fraction,
                         const std::vector<CrispSet>* gold = nullptr);

void write_inspection(std::ostream& out, const InspectionReport& report, const ComputationGraph& query,
                      const TripleStore& store);

}  // namespace enesy
