#include "enesy/fuzzy.hpp"

#include <algorithm>
#include <string>

#include "enesy/errors.hpp"

namespace enesy {

FuzzyVector FuzzyVector::one_hot(std::size_t dimension, EntityId id) {
  if (id >= dimension) throw RangeError("one-hot id out of range");
  FuzzyVector v(dimension);
  v.entries_.push_back({id, 1.0});
  return v;
}

FuzzyVector FuzzyVector::uniform(std::size_t dimension) {
  FuzzyVector v(dimension);
  if (dimension == 0) return v;
  const double w = 1.0 / static_cast<double>(dimension);
  v.entries_.reserve(dimension);
  for (std::size_t i = 0; i < dimension; ++i) v.entries_.push_back({static_cast<EntityId>(i), w});
  return v;
}

FuzzyVector FuzzyVector::from_entries(std::size_t dimension, std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.id < b.id; });
  FuzzyVector v(dimension);
  for (const auto& e : entries) {
    if (e.id >= dimension) throw RangeError("fuzzy entry id out of range");
    if (!v.entries_.empty() && v.entries_.back().id == e.id) {
      v.entries_.back().weight += e.weight;
    } else {
      v.entries_.push_back(e);
    }
  }
  std::erase_if(v.entries_, [](const Entry& e) { return e.weight == 0.0; });
  return v;
}

FuzzyVector FuzzyVector::from_dense(std::span<const double> weights) {
  FuzzyVector v(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] != 0.0) v.entries_.push_back({static_cast<EntityId>(i), weights[i]});
  }
  return v;
}

double FuzzyVector::weight(EntityId id) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                             [](const Entry& e, EntityId x) { return e.id < x; });
  return it != entries_.end() && it->id == id ? it->weight : 0.0;
}

double FuzzyVector::sum() const {
  double total = 0.0;
  for (const auto& e : entries_) total += e.weight;
  return total;
}

std::vector<double> FuzzyVector::dense() const {
  std::vector<double> out(dimension_, 0.0);
  for (const auto& e : entries_) out[e.id] = e.weight;
  return out;
}

bool CrispSet::contains(EntityId id) const { return std::binary_search(ids.begin(), ids.end(), id); }

CrispSet make_crisp(std::size_t dimension, std::vector<EntityId> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (!ids.empty() && ids.back() >= dimension) throw RangeError("crisp set id out of range");
  return {dimension, std::move(ids)};
}

CrispSet crisp_union(const CrispSet& a, const CrispSet& b) {
  CrispSet out{std::max(a.dimension, b.dimension), {}};
  std::set_union(a.ids.begin(), a.ids.end(), b.ids.begin(), b.ids.end(), std::back_inserter(out.ids));
  return out;
}

CrispSet crisp_difference(const CrispSet& a, const CrispSet& b) {
  CrispSet out{a.dimension, {}};
  std::set_difference(a.ids.begin(), a.ids.end(), b.ids.begin(), b.ids.end(), std::back_inserter(out.ids));
  return out;
}

bool crisp_subset(const CrispSet& a, const CrispSet& b) {
  return std::includes(b.ids.begin(), b.ids.end(), a.ids.begin(), a.ids.end());
}

namespace {

void require_same_dimension(const FuzzyVector& a, const FuzzyVector& b) {
  if (a.dimension() != b.dimension()) {
    throw DomainError("fuzzy vector dimension mismatch: " + std::to_string(a.dimension()) + " vs " +
                      std::to_string(b.dimension()));
  }
}

// Builds a vector from already sorted, possibly zero, weights and applies g.
FuzzyVector normalized_from_sorted(std::size_t dimension, std::vector<FuzzyVector::Entry> entries) {
  return normalize(FuzzyVector::from_entries(dimension, std::move(entries)));
}

}  // namespace

FuzzyVector normalize(const FuzzyVector& x) {
  double total = 0.0;
  for (const auto& e : x.support()) {
    if (e.weight < 0.0) throw DomainError("normalize: negative weight at entity " + std::to_string(e.id));
    total += e.weight;
  }
  if (total < kZeroSum) {
    FuzzyVector fallback = FuzzyVector::uniform(x.dimension());
    fallback.set_degenerate(true);
    return fallback;
  }
  std::vector<FuzzyVector::Entry> scaled;
  scaled.reserve(x.support_size());
  for (const auto& e : x.support()) scaled.push_back({e.id, e.weight / total});
  return FuzzyVector::from_entries(x.dimension(), std::move(scaled));
}

FuzzyVector project_symbolic(const FuzzyVector& p, const RelationAdjacency& adjacency) {
  if (p.dimension() != adjacency.dimension()) {
    throw DomainError("project_symbolic: vector dimension " + std::to_string(p.dimension()) +
                      " does not match adjacency dimension " + std::to_string(adjacency.dimension()));
  }
  std::vector<double> accumulator(p.dimension(), 0.0);
  std::vector<EntityId> touched;
  for (const auto& e : p.support()) {
    for (EntityId tail : adjacency.neighbors(e.id)) {
      if (accumulator[tail] == 0.0) touched.push_back(tail);
      accumulator[tail] += e.weight;
    }
  }
  std::sort(touched.begin(), touched.end());
  std::vector<FuzzyVector::Entry> entries;
  entries.reserve(touched.size());
  for (EntityId id : touched) entries.push_back({id, accumulator[id]});
  return normalized_from_sorted(p.dimension(), std::move(entries));
}

FuzzyVector intersect(const FuzzyVector& p1, const FuzzyVector& p2) {
  require_same_dimension(p1, p2);
  std::vector<FuzzyVector::Entry> entries;
  auto a = p1.support().begin();
  auto b = p2.support().begin();
  while (a != p1.support().end() && b != p2.support().end()) {
    if (a->id < b->id) {
      ++a;
    } else if (b->id < a->id) {
      ++b;
    } else {
      entries.push_back({a->id, a->weight * b->weight});
      ++a;
      ++b;
    }
  }
  return normalized_from_sorted(p1.dimension(), std::move(entries));
}

FuzzyVector unite(const FuzzyVector& p1, const FuzzyVector& p2) {
  require_same_dimension(p1, p2);
  std::vector<FuzzyVector::Entry> entries;
  auto a = p1.support().begin();
  auto b = p2.support().begin();
  const auto a_end = p1.support().end();
  const auto b_end = p2.support().end();
  while (a != a_end || b != b_end) {
    if (b == b_end || (a != a_end && a->id < b->id)) {
      entries.push_back(*a++);
    } else if (a == a_end || b->id < a->id) {
      entries.push_back(*b++);
    } else {
      entries.push_back({a->id, a->weight + b->weight - a->weight * b->weight});
      ++a;
      ++b;
    }
  }
  return normalized_from_sorted(p1.dimension(), std::move(entries));
}

FuzzyVector negate(const FuzzyVector& p, double alpha) {
  if (!(alpha > 0.0)) throw ConfigError("negation alpha must be positive");
  const std::size_t n = p.dimension();
  const double level = alpha / static_cast<double>(n);
  std::vector<FuzzyVector::Entry> entries;
  entries.reserve(n);
  auto it = p.support().begin();
  for (std::size_t i = 0; i < n; ++i) {
    double w = 0.0;
    if (it != p.support().end() && it->id == i) {
      w = (it++)->weight;
    }
    entries.push_back({static_cast<EntityId>(i), std::max(level - w, 0.0)});
  }
  return normalized_from_sorted(n, std::move(entries));
}

std::vector<CrispSet> crisp_execute_all(const ComputationGraph& query, const AdjacencySet& graph) {
  const std::size_t n = graph.num_entities();
  std::vector<CrispSet> sets(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) {
    const auto& node = query.node(i);
    CrispSet out{n, {}};
    switch (node.kind) {
      case NodeKind::kAnchor:
        out.ids = {node.id};
        break;
      case NodeKind::kProjection: {
        const auto& adjacency = graph.relation(node.id);
        for (EntityId head : sets[node.children[0]].ids) {
          const auto row = adjacency.neighbors(head);
          out.ids.insert(out.ids.end(), row.begin(), row.end());
        }
        std::sort(out.ids.begin(), out.ids.end());
        out.ids.erase(std::unique(out.ids.begin(), out.ids.end()), out.ids.end());
        break;
      }
      case NodeKind::kIntersection: {
        out = sets[node.children[0]];
        for (std::size_t c = 1; c < node.children.size(); ++c) {
          const auto& other = sets[node.children[c]];
          CrispSet next{n, {}};
          std::set_intersection(out.ids.begin(), out.ids.end(), other.ids.begin(), other.ids.end(),
                                std::back_inserter(next.ids));
          out = std::move(next);
        }
        break;
      }
      case NodeKind::kUnion: {
        out = sets[node.children[0]];
        for (std::size_t c = 1; c < node.children.size(); ++c) out = crisp_union(out, sets[node.children[c]]);
        break;
      }
      case NodeKind::kNegation: {
        const auto& inner = sets[node.children[0]].ids;
        auto it = inner.begin();
        for (EntityId e = 0; e < n; ++e) {
          if (it != inner.end() && *it == e) {
            ++it;
          } else {
            out.ids.push_back(e);
          }
        }
        break;
      }
    }
    sets[i] = std::move(out);
  }
  return sets;
}

CrispSet crisp_execute(const ComputationGraph& query, const AdjacencySet& graph) {
  auto sets = crisp_execute_all(query, graph);
  return std::move(sets.back());
}

}  // namespace enesy
