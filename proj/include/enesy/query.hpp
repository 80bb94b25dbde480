#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "enesy/kg_store.hpp"

namespace enesy {

enum class NodeKind : std::uint8_t { kAnchor, kProjection, kIntersection, kUnion, kNegation };

// One node of a computation graph. Anchors carry an entity id, projections a
// relation id; every other node is a pure set operator over its children.
struct QueryNode {
  NodeKind kind = NodeKind::kAnchor;
  std::uint32_t id = 0;
  std::vector<std::size_t> children;

  bool operator==(const QueryNode&) const = default;
};

// The 14 benchmark query structures, plus kOther for free-form graphs.
enum class QueryType : std::uint8_t {
  k1p, k2p, k3p, k2i, k3i, kPi, kIp, k2u, kUp, k2in, k3in, kInp, kPin, kPni, kOther
};

inline constexpr std::array<QueryType, 14> kAllQueryTypes = {
    QueryType::k1p, QueryType::k2p,  QueryType::k3p,  QueryType::k2i,  QueryType::k3i,
    QueryType::kPi, QueryType::kIp,  QueryType::k2u,  QueryType::kUp,  QueryType::k2in,
    QueryType::k3in, QueryType::kInp, QueryType::kPin, QueryType::kPni};

// Types seen during training; the remaining four are evaluation-only.
inline constexpr std::array<QueryType, 10> kTrainingQueryTypes = {
    QueryType::k1p,  QueryType::k2p,  QueryType::k3p,  QueryType::k2i,  QueryType::k3i,
    QueryType::k2in, QueryType::k3in, QueryType::kInp, QueryType::kPin, QueryType::kPni};

inline constexpr std::array<QueryType, 9> kPositiveQueryTypes = {
    QueryType::k1p, QueryType::k2p, QueryType::k3p, QueryType::k2i, QueryType::k3i,
    QueryType::kPi, QueryType::kIp, QueryType::k2u, QueryType::kUp};

inline constexpr std::array<QueryType, 5> kNegationQueryTypes = {
    QueryType::k2in, QueryType::k3in, QueryType::kInp, QueryType::kPin, QueryType::kPni};

std::string_view query_type_name(QueryType type);
std::optional<QueryType> parse_query_type(std::string_view name);
bool is_training_type(QueryType type);

enum class ParseMode {
  kFree,       // any well-formed tree
  kBenchmark,  // must match one of the 14 benchmark shapes
};

// Rooted DAG stored in topological order: children always precede their
// parent and the last node is the root (the target variable).
class ComputationGraph {
 public:
  std::size_t add_anchor(EntityId entity);
  std::size_t add_projection(RelationId relation, std::size_t child);
  std::size_t add_intersection(std::vector<std::size_t> children);
  std::size_t add_union(std::vector<std::size_t> children);
  std::size_t add_negation(std::size_t child);

  // Appends a copy of `other` and returns the index of its root.
  std::size_t append(const ComputationGraph& other);

  std::span<const QueryNode> nodes() const { return nodes_; }
  const QueryNode& node(std::size_t index) const { return nodes_.at(index); }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  std::size_t root() const;

  // Throws QueryError unless the graph is a well-formed single-rooted DAG
  // whose leaves are anchors and whose operators have legal arity.
  void validate(std::size_t num_entities = SIZE_MAX, std::size_t num_relations = SIZE_MAX) const;

  std::vector<EntityId> anchors() const;

  bool operator==(const ComputationGraph& other) const;

 private:
  std::size_t push(QueryNode node);

  std::vector<QueryNode> nodes_;
};

// Order-insensitive shape signature of the subtree at `node`, e.g. "p(i(p(a),n(p(a))))".
std::string shape_signature(const ComputationGraph& graph, std::size_t node);
QueryType structure_of(const ComputationGraph& graph);

// Grammar:  (a ENTITY) | (p RELATION SUB) | (i SUB SUB...) | (u SUB SUB...) | (n SUB)
ComputationGraph parse_query(std::string_view text, const TripleStore& store,
                             ParseMode mode = ParseMode::kFree);
std::string serialize_query(const ComputationGraph& graph, const TripleStore& store);

// Builds an ungrounded template of the requested type with all ids zero.
ComputationGraph query_template(QueryType type);

}  // namespace enesy
