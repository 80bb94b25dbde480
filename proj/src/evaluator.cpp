#include "enesy/evaluator.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "enesy/errors.hpp"
#include "enesy/parallel.hpp"

namespace enesy {

namespace {

constexpr std::array<QueryType, 4> kAndTypes = {QueryType::k2i, QueryType::k3i, QueryType::kPi, QueryType::kIp};
constexpr std::array<QueryType, 2> kOrTypes = {QueryType::k2u, QueryType::kUp};

// Filtered 1-based rank of every hard answer in `ranking`.
std::vector<std::size_t> filtered_ranks(std::span<const EntityId> ranking, const CrispSet& hard,
                                        const CrispSet& all_answers) {
  std::vector<std::size_t> ranks;
  ranks.reserve(hard.size());
  std::size_t competitors = 0;
  for (EntityId e : ranking) {
    if (hard.contains(e)) {
      ranks.push_back(competitors + 1);
    } else if (!all_answers.contains(e)) {
      ++competitors;
    }
  }
  return ranks;
}

std::vector<EntityId> order_of(std::span<const double> scores) {
  const auto ranked = rank_scores(scores);
  std::vector<EntityId> ids(ranked.size());
  for (std::size_t i = 0; i < ranked.size(); ++i) ids[i] = ranked[i].first;
  return ids;
}

}  // namespace

std::string_view eval_mode_name(EvalMode mode) {
  switch (mode) {
    case EvalMode::kFull:
      return "full";
    case EvalMode::kNeuralOnly:
      return "neural";
    case EvalMode::kSymbolicOnly:
      return "symbolic";
    case EvalMode::kTraversal:
      return "traversal";
    case EvalMode::kKge:
      return "kge";
  }
  return "?";
}

std::optional<EvalMode> parse_eval_mode(std::string_view name) {
  for (EvalMode mode :
       {EvalMode::kFull, EvalMode::kNeuralOnly, EvalMode::kSymbolicOnly, EvalMode::kTraversal, EvalMode::kKge}) {
    if (eval_mode_name(mode) == name) return mode;
  }
  if (name == "neural_only") return EvalMode::kNeuralOnly;
  if (name == "symbolic_only") return EvalMode::kSymbolicOnly;
  return std::nullopt;
}

std::string_view query_group_name(QueryGroup group) {
  switch (group) {
    case QueryGroup::kExists:
      return "q_exists";
    case QueryGroup::kAnd:
      return "q_and";
    case QueryGroup::kOr:
      return "q_or";
    case QueryGroup::kNot:
      return "q_not";
  }
  return "?";
}

std::span<const QueryType> query_group_types(QueryGroup group) {
  switch (group) {
    case QueryGroup::kExists:
      return kAllQueryTypes;
    case QueryGroup::kAnd:
      return kAndTypes;
    case QueryGroup::kOr:
      return kOrTypes;
    case QueryGroup::kNot:
      return kNegationQueryTypes;
  }
  return {};
}

std::optional<double> mrr_filtered(std::span<const EntityId> ranking, const CrispSet& hard,
                                   const CrispSet& all_answers) {
  if (hard.empty()) return std::nullopt;
  const auto ranks = filtered_ranks(ranking, hard, all_answers);
  if (ranks.size() != hard.size()) throw DomainError("mrr_filtered: ranking does not contain every hard answer");
  double total = 0.0;
  for (std::size_t r : ranks) total += 1.0 / static_cast<double>(r);
  return total / static_cast<double>(ranks.size());
}

std::optional<QueryMetrics> filtered_metrics(std::span<const double> scores, const CrispSet& hard,
                                             const CrispSet& all_answers) {
  if (hard.empty()) return std::nullopt;
  const auto ranking = order_of(scores);
  const auto ranks = filtered_ranks(ranking, hard, all_answers);
  QueryMetrics m;
  for (std::size_t r : ranks) {
    m.mrr += 1.0 / static_cast<double>(r);
    m.hits1 += r <= 1;
    m.hits3 += r <= 3;
    m.hits10 += r <= 10;
  }
  const double n = static_cast<double>(ranks.size());
  m.mrr /= n;
  m.hits1 /= n;
  m.hits3 /= n;
  m.hits10 /= n;
  return m;
}

std::optional<double> MetricsReport::mrr(QueryType type) const {
  auto it = per_type.find(type);
  if (it == per_type.end() || it->second.queries == 0) return std::nullopt;
  return it->second.mean.mrr;
}

std::optional<double> MetricsReport::average(std::span<const QueryType> types) const {
  double total = 0.0;
  std::size_t count = 0;
  for (QueryType t : types) {
    if (auto m = mrr(t)) {
      total += *m;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

std::size_t MetricsReport::skipped() const {
  std::size_t n = 0;
  for (const auto& [type, m] : per_type) n += m.skipped;
  return n;
}

double LambdaTable::get(QueryType type) const {
  auto it = table_.find(type);
  return it == table_.end() ? default_ : it->second;
}

void LambdaTable::set(QueryType type, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda must lie in [0, 1]");
  table_[type] = lambda;
}

void LambdaTable::write(std::ostream& out) const {
  out << "default " << std::setprecision(17) << default_ << '\n';
  for (const auto& [type, lambda] : table_) out << query_type_name(type) << ' ' << lambda << '\n';
}

void LambdaTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write(out);
}

LambdaTable LambdaTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read lambda file " + path.string());
  LambdaTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string key;
    double value = 0.0;
    if (!(fields >> key >> value) || value < 0.0 || value > 1.0) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 'TYPE LAMBDA' with lambda in [0,1]",
                       line_no);
    }
    if (key == "default") {
      table.default_ = value;
    } else if (auto type = parse_query_type(key)) {
      table.set(*type, value);
    } else {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": unknown query type '" + key + "'",
                       line_no);
    }
  }
  return table;
}

GraphView reasoning_view(Split split) {
  switch (split) {
    case Split::kTrain:
    case Split::kValid:
      return GraphView::kTrain;
    case Split::kTest:
      return GraphView::kValid;
  }
  return GraphView::kTrain;
}

namespace {

// Rotation chains of every union branch, or nullopt if the query uses
// intersection or negation.
std::optional<std::vector<ComplexEmbedding>> kge_branches(const ComputationGraph& query, const ModelParams& params) {
  std::vector<std::vector<ComplexEmbedding>> values(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) {
    const auto& node = query.node(i);
    switch (node.kind) {
      case NodeKind::kAnchor: {
        const auto row = params.entity(node.id);
        values[i].emplace_back(row.begin(), row.end());
        break;
      }
      case NodeKind::kProjection:
        for (const auto& v : values[node.children[0]]) {
          values[i].push_back(project_neural(v, params.phases(node.id)));
        }
        break;
      case NodeKind::kUnion:
        for (std::size_t c : node.children) {
          values[i].insert(values[i].end(), values[c].begin(), values[c].end());
        }
        break;
      case NodeKind::kIntersection:
      case NodeKind::kNegation:
        return std::nullopt;
    }
  }
  return std::move(values.back());
}

struct TypeAccumulator {
  QueryMetrics sum;
  std::size_t queries = 0;
  std::size_t skipped = 0;
};

MetricsReport reduce(EvalMode mode, std::vector<QueryResult> results) {
  MetricsReport report;
  report.mode = mode;
  std::map<QueryType, TypeAccumulator> acc;
  for (const auto& r : results) {
    auto& a = acc[r.type];
    if (r.skipped) {
      ++a.skipped;
      continue;
    }
    a.sum.mrr += r.metrics.mrr;
    a.sum.hits1 += r.metrics.hits1;
    a.sum.hits3 += r.metrics.hits3;
    a.sum.hits10 += r.metrics.hits10;
    ++a.queries;
  }
  for (const auto& [type, a] : acc) {
    TypeMetrics m;
    m.queries = a.queries;
    m.skipped = a.skipped;
    if (a.queries > 0) {
      const double n = static_cast<double>(a.queries);
      m.mean = {a.sum.mrr / n, a.sum.hits1 / n, a.sum.hits3 / n, a.sum.hits10 / n};
    }
    report.per_type[type] = m;
  }
  report.per_query = std::move(results);
  return report;
}

}  // namespace

MetricsReport evaluate(const ModelParams& params, std::span<const BenchmarkEntry> benchmark,
                       const AdjacencySet& reasoning_graph, EvalMode mode, const LambdaTable& lambdas,
                       const EvalOptions& options) {
  std::optional<Executor> executor;
  if (mode == EvalMode::kFull || mode == EvalMode::kNeuralOnly || mode == EvalMode::kSymbolicOnly) {
    executor.emplace(params, reasoning_graph, options.top_k);
  }
  std::vector<QueryResult> results(benchmark.size());
  parallel_for(benchmark.size(), worker_count(options.threads), [&](std::size_t i) {
    const auto& entry = benchmark[i];
    QueryResult& r = results[i];
    r.index = i;
    r.type = entry.type;
    r.num_hard = entry.hard.size();
    if (entry.hard.empty()) {
      r.skipped = true;
      return;
    }
    std::vector<double> scores;
    switch (mode) {
      case EvalMode::kFull:
      case EvalMode::kNeuralOnly:
      case EvalMode::kSymbolicOnly: {
        const auto result = executor->execute(entry.query);
        const double lambda = mode == EvalMode::kFull         ? lambdas.get(entry.type)
                              : mode == EvalMode::kNeuralOnly ? 0.0
                                                              : 1.0;
        scores = ensemble_scores(result.root, params, {lambda});
        break;
      }
      case EvalMode::kTraversal: {
        scores.assign(params.num_entities, 0.0);
        for (EntityId e : crisp_execute(entry.query, reasoning_graph).ids) scores[e] = 1.0;
        break;
      }
      case EvalMode::kKge: {
        const auto branches = kge_branches(entry.query, params);
        if (!branches) {
          r.skipped = true;
          return;
        }
        scores.assign(params.num_entities, -std::numeric_limits<double>::infinity());
        for (const auto& v : *branches) {
          const auto s = score_all(v, params);
          for (std::size_t e = 0; e < s.size(); ++e) scores[e] = std::max(scores[e], s[e]);
        }
        break;
      }
    }
    const auto metrics = filtered_metrics(scores, entry.hard, entry.all_answers());
    r.metrics = *metrics;
  });
  return reduce(mode, std::move(results));
}

LambdaTable tune_lambdas(const ModelParams& params, std::span<const BenchmarkEntry> valid,
                         const AdjacencySet& reasoning_graph, const EvalOptions& options,
                         std::span<const double> grid) {
  std::vector<double> default_grid;
  if (grid.empty()) {
    for (int i = 0; i <= 20; ++i) default_grid.push_back(i / 20.0);
    grid = default_grid;
  }
  const Executor executor(params, reasoning_graph, options.top_k);
  // mrr[i][g]: MRR of query i at grid point g.
  std::vector<std::vector<double>> mrr(valid.size());
  parallel_for(valid.size(), worker_count(options.threads), [&](std::size_t i) {
    const auto& entry = valid[i];
    if (entry.hard.empty()) return;
    const auto result = executor.execute(entry.query);
    const auto neural = softmax(score_all(result.root.v, params));
    const auto symbolic = result.root.p.dense();
    const auto all = entry.all_answers();
    std::vector<double> scores(neural.size());
    for (double lambda : grid) {
      for (std::size_t e = 0; e < scores.size(); ++e) scores[e] = (1.0 - lambda) * neural[e] + lambda * symbolic[e];
      mrr[i].push_back(filtered_metrics(scores, entry.hard, all)->mrr);
    }
  });
  LambdaTable table(params.hp.lambda);
  for (QueryType type : kAllQueryTypes) {
    std::vector<double> totals(grid.size(), 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < valid.size(); ++i) {
      if (valid[i].type != type || mrr[i].empty()) continue;
      for (std::size_t g = 0; g < grid.size(); ++g) totals[g] += mrr[i][g];
      ++count;
    }
    if (count == 0) continue;
    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g) {
      if (totals[g] > totals[best]) best = g;
    }
    table.set(type, grid[best]);
  }
  return table;
}

void write_report_table(std::ostream& out, const MetricsReport& report) {
  auto cell = [&out](std::optional<double> v) {
    if (v) {
      out << std::setw(7) << std::fixed << std::setprecision(1) << 100.0 * *v;
    } else {
      out << std::setw(7) << "N/A";
    }
  };
  out << std::left << std::setw(10) << "mode" << std::right << std::setw(7) << "Avg_p" << std::setw(7) << "Avg_n";
  for (QueryType t : kAllQueryTypes) out << std::setw(7) << query_type_name(t);
  out << '\n' << std::left << std::setw(10) << eval_mode_name(report.mode) << std::right;
  cell(report.avg_p());
  cell(report.avg_n());
  for (QueryType t : kAllQueryTypes) cell(report.mrr(t));
  out << '\n';
  out << std::left << std::setw(10) << "groups" << std::right;
  for (QueryGroup g : {QueryGroup::kExists, QueryGroup::kAnd, QueryGroup::kOr, QueryGroup::kNot}) {
    out << ' ' << query_group_name(g) << '=';
    if (auto v = report.group(g)) {
      out << std::fixed << std::setprecision(1) << 100.0 * *v;
    } else {
      out << "N/A";
    }
  }
  out << "\nskipped " << report.skipped() << '\n';
  out.unsetf(std::ios::fixed);
}

void write_report_csv(std::ostream& out, const MetricsReport& report, bool header) {
  if (header) {
    out << "mode,metric,Avg_p,Avg_n";
    for (QueryType t : kAllQueryTypes) out << ',' << query_type_name(t);
    out << '\n';
  }
  const std::pair<const char*, double QueryMetrics::*> metrics[] = {
      {"mrr", &QueryMetrics::mrr}, {"hits1", &QueryMetrics::hits1}, {"hits3", &QueryMetrics::hits3},
      {"hits10", &QueryMetrics::hits10}};
  out << std::setprecision(10);
  for (const auto& [name, member] : metrics) {
    out << eval_mode_name(report.mode) << ',' << name << ',';
    if (std::string_view(name) == "mrr") {
      if (auto v = report.avg_p()) out << *v;
      out << ',';
      if (auto v = report.avg_n()) out << *v;
    } else {
      out << ',';
    }
    for (QueryType t : kAllQueryTypes) {
      out << ',';
      auto it = report.per_type.find(t);
      if (it != report.per_type.end() && it->second.queries > 0) out << it->second.mean.*member;
    }
    out << '\n';
  }
}

void write_rank_dump(std::ostream& out, const MetricsReport& report) {
  out << "index,type,num_hard,skipped,mrr,hits1,hits3,hits10\n" << std::setprecision(17);
  for (const auto& r : report.per_query) {
    out << r.index << ',' << query_type_name(r.type) << ',' << r.num_hard << ',' << (r.skipped ? 1 : 0) << ','
        << r.metrics.mrr << ',' << r.metrics.hits1 << ',' << r.metrics.hits3 << ',' << r.metrics.hits10 << '\n';
  }
}

}  // namespace enesy
