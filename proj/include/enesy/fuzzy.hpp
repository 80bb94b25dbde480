#pragma once

#include <span>
#include <vector>

#include "enesy/kg_store.hpp"
#include "enesy/query.hpp"

namespace enesy {

inline constexpr double kZeroSum = 1e-12;
inline constexpr double kDefaultAlpha = 10.0;

// Sparse non-negative weight vector over the entity universe. Only strictly
// positive weights are stored, with ids ascending.
class FuzzyVector {
 public:
  struct Entry {
    EntityId id;
    double weight;

    bool operator==(const Entry&) const = default;
  };

  FuzzyVector() = default;
  explicit FuzzyVector(std::size_t dimension) : dimension_(dimension) {}

  static FuzzyVector one_hot(std::size_t dimension, EntityId id);
  static FuzzyVector uniform(std::size_t dimension);
  // Entries may be unsorted and contain zeros; duplicate ids are summed.
  static FuzzyVector from_entries(std::size_t dimension, std::vector<Entry> entries);
  static FuzzyVector from_dense(std::span<const double> weights);

  std::size_t dimension() const { return dimension_; }
  std::span<const Entry> support() const { return entries_; }
  std::size_t support_size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  double weight(EntityId id) const;
  double sum() const;
  std::vector<double> dense() const;

  // Set when the vector is the uniform fallback produced by normalizing an
  // all-zero input.
  bool degenerate() const { return degenerate_; }
  void set_degenerate(bool flag) { degenerate_ = flag; }

  bool operator==(const FuzzyVector&) const = default;

 private:
  std::size_t dimension_ = 0;
  std::vector<Entry> entries_;
  bool degenerate_ = false;
};

// Crisp entity set: sorted unique ids below `dimension`.
struct CrispSet {
  std::size_t dimension = 0;
  std::vector<EntityId> ids;

  bool contains(EntityId id) const;
  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  bool operator==(const CrispSet&) const = default;
};

CrispSet make_crisp(std::size_t dimension, std::vector<EntityId> ids);
CrispSet crisp_union(const CrispSet& a, const CrispSet& b);
CrispSet crisp_difference(const CrispSet& a, const CrispSet& b);
bool crisp_subset(const CrispSet& a, const CrispSet& b);

// g(x) = x / sum(x). An all-zero input yields the uniform distribution with
// the degenerate flag set. Negative weights are a DomainError.
FuzzyVector normalize(const FuzzyVector& x);

// g(p M_r): probability mass pushed along one relation.
FuzzyVector project_symbolic(const FuzzyVector& p, const RelationAdjacency& adjacency);

// g(p1 * p2)
FuzzyVector intersect(const FuzzyVector& p1, const FuzzyVector& p2);
// g(p1 + p2 - p1 * p2)
FuzzyVector unite(const FuzzyVector& p1, const FuzzyVector& p2);
// g(max(alpha/|V| - p, 0))
FuzzyVector negate(const FuzzyVector& p, double alpha = kDefaultAlpha);

// Exact set semantics of a computation graph over one graph view.
CrispSet crisp_execute(const ComputationGraph& query, const AdjacencySet& graph);
// Crisp answer set of every node, indexed like query.nodes().
std::vector<CrispSet> crisp_execute_all(const ComputationGraph& query, const AdjacencySet& graph);

}  // namespace enesy
