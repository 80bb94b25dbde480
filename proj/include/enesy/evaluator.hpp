#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "enesy/executor.hpp"
#include "enesy/sampler.hpp"

namespace enesy {

enum class EvalMode {
  kFull,          // lambda-ensemble of both branches
  kNeuralOnly,    // embedding branch only (lambda = 0)
  kSymbolicOnly,  // fuzzy-set branch only (lambda = 1)
  kTraversal,     // exact graph walk, members first
  kKge,           // plain rotation composition without entanglement
};

std::string_view eval_mode_name(EvalMode mode);
std::optional<EvalMode> parse_eval_mode(std::string_view name);

enum class QueryGroup { kExists, kAnd, kOr, kNot };
std::string_view query_group_name(QueryGroup group);
std::span<const QueryType> query_group_types(QueryGroup group);

// Mean reciprocal rank of the hard answers in `ranking`, each ranked after
// removing every other member of `all_answers`. nullopt when `hard` is empty.
std::optional<double> mrr_filtered(std::span<const EntityId> ranking, const CrispSet& hard,
                                   const CrispSet& all_answers);

struct QueryMetrics {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
};

// Filtered metrics of one query from a dense score vector, ties broken by id.
std::optional<QueryMetrics> filtered_metrics(std::span<const double> scores, const CrispSet& hard,
                                             const CrispSet& all_answers);

struct QueryResult {
  std::size_t index = 0;
  QueryType type = QueryType::kOther;
  std::size_t num_hard = 0;
  bool skipped = false;
  QueryMetrics metrics;
};

struct TypeMetrics {
  QueryMetrics mean;
  std::size_t queries = 0;
  std::size_t skipped = 0;
};

struct MetricsReport {
  EvalMode mode = EvalMode::kFull;
  std::map<QueryType, TypeMetrics> per_type;
  std::vector<QueryResult> per_query;

  std::optional<double> mrr(QueryType type) const;
  // Means of per-type MRR over the types present in the report.
  std::optional<double> average(std::span<const QueryType> types) const;
  std::optional<double> avg_p() const { return average(kPositiveQueryTypes); }
  std::optional<double> avg_n() const { return average(kNegationQueryTypes); }
  std::optional<double> group(QueryGroup g) const { return average(query_group_types(g)); }
  std::size_t skipped() const;
};

// Per-type ensemble weights.
class LambdaTable {
 public:
  explicit LambdaTable(double default_lambda = 0.5) : default_(default_lambda) {}

  double get(QueryType type) const;
  void set(QueryType type, double lambda);
  double default_lambda() const { return default_; }
  const std::map<QueryType, double>& entries() const { return table_; }

  static LambdaTable constant(double lambda) { return LambdaTable(lambda); }
  static LambdaTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  void write(std::ostream& out) const;

 private:
  double default_;
  std::map<QueryType, double> table_;
};

struct EvalOptions {
  std::size_t top_k = 64;
  std::size_t threads = 0;  // 0 = worker_count()
};

// Graph a query of `split` may reason over: G_train for valid queries,
// G_train+valid for test queries.
GraphView reasoning_view(Split split);

MetricsReport evaluate(const ModelParams& params, std::span<const BenchmarkEntry> benchmark,
                       const AdjacencySet& reasoning_graph, EvalMode mode, const LambdaTable& lambdas,
                       const EvalOptions& options = {});

// Picks, per query type, the grid lambda with the best MRR on the (valid)
// benchmark's hard answers. Ties keep the smaller lambda.
LambdaTable tune_lambdas(const ModelParams& params, std::span<const BenchmarkEntry> valid,
                         const AdjacencySet& reasoning_graph, const EvalOptions& options = {},
                         std::span<const double> grid = {});

void write_report_table(std::ostream& out, const MetricsReport& report);
void write_report_csv(std::ostream& out, const MetricsReport& report, bool header = true);
void write_rank_dump(std::ostream& out, const MetricsReport& report);

}  // namespace enesy
