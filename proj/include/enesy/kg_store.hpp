#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace enesy {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  auto operator<=>(const Triple&) const = default;
};

// Which file a triple came from.
enum class Split { kTrain, kValid, kTest };

// Which cumulative graph to reason over: G_train, G_train+valid, G_train+valid+test.
enum class GraphView { kTrain, kValid, kTest };

std::string_view split_name(Split split);
std::string_view graph_view_name(GraphView view);

// Ordered label vocabulary; ids are assigned in first-seen order.
class Vocabulary {
 public:
  std::uint32_t intern(std::string_view label);
  std::optional<std::uint32_t> find(std::string_view label) const;
  const std::string& label(std::uint32_t id) const;
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

class TripleStore {
 public:
  TripleStore() = default;

  Vocabulary& entities() { return entities_; }
  const Vocabulary& entities() const { return entities_; }
  Vocabulary& relations() { return relations_; }
  const Vocabulary& relations() const { return relations_; }

  std::size_t num_entities() const { return entities_.size(); }
  std::size_t num_relations() const { return relations_.size(); }

  // Parses head<TAB>relation<TAB>tail lines into `split`. Labels extend the
  // vocabularies unless strict_vocab is set and the split is valid/test, in
  // which case unseen labels raise VocabularyError. Triples already present
  // in an earlier split are dropped (strict mode: rejected).
  std::vector<Triple> load_triples(const std::filesystem::path& path, Split split,
                                   bool strict_vocab = false);
  std::vector<Triple> parse_triples(std::string_view text, Split split, bool strict_vocab = false,
                                    std::string_view source = "<memory>");

  // Adds id triples directly; ids must already be in range.
  void add_triples(Split split, std::span<const Triple> triples);

  // Sorted, deduplicated triples of one split.
  const std::vector<Triple>& split_triples(Split split) const;
  // Sorted union of the splits visible in `view`.
  std::vector<Triple> graph_triples(GraphView view) const;
  std::size_t graph_size(GraphView view) const;
  bool contains(GraphView view, const Triple& triple) const;

  // Loads DIR/train.txt, DIR/valid.txt, DIR/test.txt; missing valid/test
  // files count as empty. If DIR/entities.txt and DIR/relations.txt exist
  // they seed the vocabularies so ids stay reproducible.
  static TripleStore load_directory(const std::filesystem::path& dir, bool strict_vocab = false);
  void save_directory(const std::filesystem::path& dir) const;
  void save_vocabularies(const std::filesystem::path& dir) const;

  // Throws VocabularyError if ids are out of range or splits overlap.
  void check_invariants() const;

 private:
  std::vector<Triple>& mutable_split(Split split);
  bool in_earlier_split(Split split, const Triple& triple) const;

  Vocabulary entities_;
  Vocabulary relations_;
  std::vector<Triple> train_;
  std::vector<Triple> valid_;
  std::vector<Triple> test_;
};

// Sparse boolean |V|x|V| matrix of one relation in compressed row form.
class RelationAdjacency {
 public:
  RelationAdjacency() = default;
  RelationAdjacency(RelationId relation, std::size_t num_entities,
                    std::span<const std::pair<EntityId, EntityId>> edges);

  RelationId relation() const { return relation_; }
  std::size_t dimension() const { return row_offsets_.empty() ? 0 : row_offsets_.size() - 1; }
  std::size_t num_edges() const { return columns_.size(); }

  // Tails reachable from `head` by one edge, ascending.
  std::span<const EntityId> neighbors(EntityId head) const;
  bool contains(EntityId head, EntityId tail) const;
  std::vector<Triple> to_triples() const;

 private:
  RelationId relation_ = 0;
  std::vector<std::size_t> row_offsets_;
  std::vector<EntityId> columns_;
};

// Per-relation adjacency of one graph view, built lazily on first use.
// Safe for concurrent readers.
class AdjacencySet {
 public:
  AdjacencySet(const TripleStore& store, GraphView view);
  AdjacencySet(std::size_t num_entities, std::size_t num_relations, std::span<const Triple> triples,
               GraphView view = GraphView::kTrain);

  GraphView view() const { return view_; }
  std::size_t num_entities() const { return num_entities_; }
  std::size_t num_relations() const { return buckets_.size(); }

  const RelationAdjacency& relation(RelationId relation) const;
  std::span<const EntityId> neighbors(RelationId relation, EntityId head) const;

 private:
  GraphView view_;
  std::size_t num_entities_;
  std::vector<std::vector<std::pair<EntityId, EntityId>>> buckets_;
  mutable std::vector<std::unique_ptr<RelationAdjacency>> built_;
  mutable std::unique_ptr<std::once_flag[]> once_;
};

RelationAdjacency build_adjacency(const TripleStore& store, GraphView view, RelationId relation);

}  // namespace enesy
