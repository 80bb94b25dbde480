#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "enesy/fuzzy.hpp"
#include "enesy/query.hpp"

namespace enesy {

struct BenchmarkQuery {
  ComputationGraph query;
  QueryType type = QueryType::kOther;
  CrispSet answers_train;
  CrispSet answers_valid;
  CrispSet answers_test;
};

// One line of a benchmark file: the query plus the answers that are already
// reachable in the split's reasoning graph (easy) and the ones that need
// held-out edges (hard).
struct BenchmarkEntry {
  ComputationGraph query;
  QueryType type = QueryType::kOther;
  CrispSet easy;
  CrispSet hard;

  CrispSet all_answers() const { return crisp_union(easy, hard); }
};

// Incoming-edge index of one graph view, used to ground query templates by
// walking backwards from an answer entity.
class GroundingGraph {
 public:
  GroundingGraph(const TripleStore& store, GraphView view);

  const AdjacencySet& adjacency() const { return adjacency_; }
  GraphView view() const { return adjacency_.view(); }
  std::size_t num_entities() const { return adjacency_.num_entities(); }

  // (head, relation) pairs with an edge into `tail`, sorted.
  std::span<const std::pair<EntityId, RelationId>> incoming(EntityId tail) const;
  // Entities with at least one incoming edge.
  std::span<const EntityId> targets() const { return targets_; }

 private:
  AdjacencySet adjacency_;
  std::vector<std::size_t> offsets_;
  std::vector<std::pair<EntityId, RelationId>> edges_;
  std::vector<EntityId> targets_;
};

struct SamplerOptions {
  std::size_t max_attempts = 100;
  // Queries whose answer set on the grounding graph exceeds this are
  // rejected; 0 disables the cap.
  std::size_t max_answers = 100;
};

// Grounds the template of `type` on `graph`. The returned query has a
// nonempty answer set on that graph. Deterministic in `seed`.
ComputationGraph sample_query(QueryType type, const GroundingGraph& graph, std::uint64_t seed,
                              const SamplerOptions& options = {});

// Crisp answers of a query on the three nested graphs.
class AnswerLabeler {
 public:
  explicit AnswerLabeler(const TripleStore& store);

  BenchmarkQuery label(const ComputationGraph& query) const;
  const AdjacencySet& graph(GraphView view) const;

 private:
  AdjacencySet train_;
  AdjacencySet valid_;
  AdjacencySet test_;
};

// Labels `query` for use in `split`. Returns nullopt (the skip marker) when
// the answer sets are not nested or the split has nothing to evaluate:
// train needs A_train, valid needs A_valid - A_train, test needs
// A_test - A_valid.
std::optional<BenchmarkQuery> label_answers(const ComputationGraph& query, const AnswerLabeler& labeler,
                                            Split split);
std::optional<BenchmarkQuery> label_answers(const ComputationGraph& query, const TripleStore& store,
                                            Split split);

BenchmarkEntry to_entry(const BenchmarkQuery& labeled, Split split);

struct BenchmarkConfig {
  std::map<QueryType, std::size_t> train;
  std::map<QueryType, std::size_t> valid;
  std::map<QueryType, std::size_t> test;
  SamplerOptions sampler;
  // Labeling rejections allowed per requested query before giving up on a type.
  std::size_t attempts_per_query = 200;

  // Same count for every type allowed in each split.
  static BenchmarkConfig uniform(std::size_t train_per_type, std::size_t eval_per_type);
  // Throws ConfigError if the train split asks for an evaluation-only type.
  void validate() const;
};

struct BenchmarkSplit {
  std::vector<BenchmarkEntry> entries;
  std::map<QueryType, std::size_t> shortfall;  // types whose budget ran out
};

struct Benchmark {
  BenchmarkSplit train;
  BenchmarkSplit valid;
  BenchmarkSplit test;

  const BenchmarkSplit& split(Split s) const;
};

Benchmark generate_benchmark(const TripleStore& store, const BenchmarkConfig& config, std::uint64_t seed);

// Writes queries_{train,valid,test}.txt and stats.txt into `dir`.
void write_benchmark(const Benchmark& benchmark, const TripleStore& store, const std::filesystem::path& dir);
void write_benchmark_entries(std::ostream& out, std::span<const BenchmarkEntry> entries, const TripleStore& store);
void write_stats(std::ostream& out, const Benchmark& benchmark, const TripleStore& store);

std::vector<BenchmarkEntry> read_benchmark_entries(std::istream& in, const TripleStore& store,
                                                   const std::string& source = "<stream>");
std::vector<BenchmarkEntry> read_benchmark_file(const std::filesystem::path& path, const TripleStore& store);

}  // namespace enesy
