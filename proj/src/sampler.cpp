#include "enesy/sampler.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "enesy/errors.hpp"

namespace enesy {

GroundingGraph::GroundingGraph(const TripleStore& store, GraphView view) : adjacency_(store, view) {
  const auto triples = store.graph_triples(view);
  const std::size_t n = store.num_entities();
  offsets_.assign(n + 1, 0);
  for (const auto& t : triples) ++offsets_[t.tail + 1];
  for (std::size_t i = 1; i <= n; ++i) offsets_[i] += offsets_[i - 1];
  edges_.resize(triples.size());
  auto cursor = offsets_;
  for (const auto& t : triples) edges_[cursor[t.tail]++] = {t.head, t.relation};
  for (std::size_t e = 0; e < n; ++e) {
    std::sort(edges_.begin() + static_cast<std::ptrdiff_t>(offsets_[e]),
              edges_.begin() + static_cast<std::ptrdiff_t>(offsets_[e + 1]));
    if (offsets_[e + 1] > offsets_[e]) targets_.push_back(static_cast<EntityId>(e));
  }
}

std::span<const std::pair<EntityId, RelationId>> GroundingGraph::incoming(EntityId tail) const {
  if (tail + std::size_t{1} >= offsets_.size()) throw RangeError("entity out of range");
  return std::span<const std::pair<EntityId, RelationId>>(edges_).subspan(offsets_[tail],
                                                                          offsets_[tail + 1] - offsets_[tail]);
}

namespace {

template <typename T>
const T& pick(std::span<const T> items, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, items.size() - 1);
  return items[dist(rng)];
}

std::optional<ComputationGraph> ground(const ComputationGraph& tpl, std::size_t index, EntityId target,
                                       const GroundingGraph& graph, std::mt19937_64& rng) {
  const auto& node = tpl.node(index);
  ComputationGraph out;
  switch (node.kind) {
    case NodeKind::kAnchor:
      out.add_anchor(target);
      return out;
    case NodeKind::kProjection: {
      const auto incoming = graph.incoming(target);
      if (incoming.empty()) return std::nullopt;
      const auto [head, relation] = pick(incoming, rng);
      auto child = ground(tpl, node.children[0], head, graph, rng);
      if (!child) return std::nullopt;
      out = std::move(*child);
      out.add_projection(relation, out.root());
      return out;
    }
    case NodeKind::kNegation:
      // Negations are grounded by their parent intersection.
      return std::nullopt;
    case NodeKind::kIntersection:
    case NodeKind::kUnion: {
      std::vector<std::optional<ComputationGraph>> parts(node.children.size());
      std::optional<CrispSet> positive;
      for (std::size_t c = 0; c < node.children.size(); ++c) {
        if (tpl.node(node.children[c]).kind == NodeKind::kNegation) continue;
        parts[c] = ground(tpl, node.children[c], target, graph, rng);
        if (!parts[c]) return std::nullopt;
        for (std::size_t prev = 0; prev < c; ++prev) {
          if (parts[prev] && *parts[prev] == *parts[c]) return std::nullopt;
        }
        const auto answers = crisp_execute(*parts[c], graph.adjacency());
        if (!positive) {
          positive = answers;
        } else {
          CrispSet both{answers.dimension, {}};
          std::set_intersection(positive->ids.begin(), positive->ids.end(), answers.ids.begin(),
                                answers.ids.end(), std::back_inserter(both.ids));
          positive = std::move(both);
        }
      }
      for (std::size_t c = 0; c < node.children.size(); ++c) {
        const auto& child = tpl.node(node.children[c]);
        if (child.kind != NodeKind::kNegation) continue;
        if (node.kind != NodeKind::kIntersection || !positive) return std::nullopt;
        // The negated branch must remove some other answer of its siblings
        // while keeping `target`.
        std::vector<EntityId> candidates;
        for (EntityId e : positive->ids) {
          if (e != target) candidates.push_back(e);
        }
        if (candidates.empty()) return std::nullopt;
        const EntityId removed = pick(std::span<const EntityId>(candidates), rng);
        auto inner = ground(tpl, child.children[0], removed, graph, rng);
        if (!inner) return std::nullopt;
        if (crisp_execute(*inner, graph.adjacency()).contains(target)) return std::nullopt;
        inner->add_negation(inner->root());
        parts[c] = std::move(inner);
      }
      std::vector<std::size_t> roots;
      for (auto& part : parts) roots.push_back(out.append(*part));
      if (node.kind == NodeKind::kIntersection) {
        out.add_intersection(std::move(roots));
      } else {
        out.add_union(std::move(roots));
      }
      return out;
    }
  }
  return std::nullopt;
}

}  // namespace

ComputationGraph sample_query(QueryType type, const GroundingGraph& graph, std::uint64_t seed,
                              const SamplerOptions& options) {
  const ComputationGraph tpl = query_template(type);
  if (graph.targets().empty()) throw SamplingError("grounding graph has no edges");
  std::mt19937_64 rng(seed);
  for (std::size_t attempt = 0; attempt < options.max_attempts; ++attempt) {
    const EntityId target = pick(graph.targets(), rng);
    auto grounded = ground(tpl, tpl.root(), target, graph, rng);
    if (!grounded) continue;
    const auto answers = crisp_execute(*grounded, graph.adjacency());
    if (answers.empty()) continue;
    if (options.max_answers > 0 && answers.size() > options.max_answers) continue;
    return std::move(*grounded);
  }
  throw SamplingError("could not ground a " + std::string(query_type_name(type)) + " query in " +
                      std::to_string(options.max_attempts) + " attempts");
}

AnswerLabeler::AnswerLabeler(const TripleStore& store)
    : train_(store, GraphView::kTrain), valid_(store, GraphView::kValid), test_(store, GraphView::kTest) {}

const AdjacencySet& AnswerLabeler::graph(GraphView view) const {
  switch (view) {
    case GraphView::kTrain:
      return train_;
    case GraphView::kValid:
      return valid_;
    case GraphView::kTest:
      return test_;
  }
  return train_;
}

BenchmarkQuery AnswerLabeler::label(const ComputationGraph& query) const {
  BenchmarkQuery out;
  out.query = query;
  out.type = structure_of(query);
  out.answers_train = crisp_execute(query, train_);
  out.answers_valid = crisp_execute(query, valid_);
  out.answers_test = crisp_execute(query, test_);
  return out;
}

std::optional<BenchmarkQuery> label_answers(const ComputationGraph& query, const AnswerLabeler& labeler,
                                            Split split) {
  auto labeled = labeler.label(query);
  if (!crisp_subset(labeled.answers_train, labeled.answers_valid) ||
      !crisp_subset(labeled.answers_valid, labeled.answers_test)) {
    return std::nullopt;
  }
  switch (split) {
    case Split::kTrain:
      if (labeled.answers_train.empty()) return std::nullopt;
      break;
    case Split::kValid:
      if (labeled.answers_valid.size() == labeled.answers_train.size()) return std::nullopt;
      break;
    case Split::kTest:
      if (labeled.answers_test.size() == labeled.answers_valid.size()) return std::nullopt;
      break;
  }
  return labeled;
}

std::optional<BenchmarkQuery> label_answers(const ComputationGraph& query, const TripleStore& store,
                                            Split split) {
  return label_answers(query, AnswerLabeler(store), split);
}

BenchmarkEntry to_entry(const BenchmarkQuery& labeled, Split split) {
  BenchmarkEntry entry;
  entry.query = labeled.query;
  entry.type = labeled.type;
  switch (split) {
    case Split::kTrain:
      entry.easy = labeled.answers_train;
      entry.hard = CrispSet{labeled.answers_train.dimension, {}};
      break;
    case Split::kValid:
      entry.easy = labeled.answers_train;
      entry.hard = crisp_difference(labeled.answers_valid, labeled.answers_train);
      break;
    case Split::kTest:
      entry.easy = labeled.answers_valid;
      entry.hard = crisp_difference(labeled.answers_test, labeled.answers_valid);
      break;
  }
  return entry;
}

BenchmarkConfig BenchmarkConfig::uniform(std::size_t train_per_type, std::size_t eval_per_type) {
  BenchmarkConfig config;
  for (QueryType type : kTrainingQueryTypes) {
    if (train_per_type > 0) config.train[type] = train_per_type;
  }
  for (QueryType type : kAllQueryTypes) {
    if (eval_per_type > 0) {
      config.valid[type] = eval_per_type;
      config.test[type] = eval_per_type;
    }
  }
  return config;
}

void BenchmarkConfig::validate() const {
  for (const auto& [type, count] : train) {
    if (type == QueryType::kOther) throw ConfigError("free-form queries cannot be sampled");
    if (!is_training_type(type)) {
      throw ConfigError("query type " + std::string(query_type_name(type)) +
                        " is evaluation-only and cannot appear in the train split");
    }
  }
  for (const auto* split : {&valid, &test}) {
    for (const auto& [type, count] : *split) {
      if (type == QueryType::kOther) throw ConfigError("free-form queries cannot be sampled");
    }
  }
}

const BenchmarkSplit& Benchmark::split(Split s) const {
  switch (s) {
    case Split::kTrain:
      return train;
    case Split::kValid:
      return valid;
    case Split::kTest:
      return test;
  }
  return train;
}

Benchmark generate_benchmark(const TripleStore& store, const BenchmarkConfig& config, std::uint64_t seed) {
  config.validate();
  const AnswerLabeler labeler(store);
  Benchmark benchmark;
  const std::pair<Split, GraphView> plan[] = {
      {Split::kTrain, GraphView::kTrain}, {Split::kValid, GraphView::kValid}, {Split::kTest, GraphView::kTest}};
  for (const auto& [split, view] : plan) {
    const auto& counts = split == Split::kTrain ? config.train : split == Split::kValid ? config.valid : config.test;
    if (counts.empty()) continue;
    const GroundingGraph grounding(store, view);
    BenchmarkSplit& out = split == Split::kTrain   ? benchmark.train
                          : split == Split::kValid ? benchmark.valid
                                                   : benchmark.test;
    for (QueryType type : kAllQueryTypes) {
      auto it = counts.find(type);
      if (it == counts.end() || it->second == 0) continue;
      const std::size_t wanted = it->second;
      std::seed_seq seq{seed, static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(type)};
      std::mt19937_64 rng(seq);
      std::set<std::string> seen;
      std::size_t accepted = 0;
      const std::size_t budget = wanted * config.attempts_per_query;
      for (std::size_t attempt = 0; attempt < budget && accepted < wanted; ++attempt) {
        const std::uint64_t query_seed = rng();
        if (grounding.targets().empty()) break;
        ComputationGraph query;
        try {
          query = sample_query(type, grounding, query_seed, config.sampler);
        } catch (const SamplingError&) {
          continue;
        }
        auto labeled = label_answers(query, labeler, split);
        if (!labeled) continue;
        if (!seen.insert(serialize_query(query, store)).second) continue;
        out.entries.push_back(to_entry(*labeled, split));
        ++accepted;
      }
      if (accepted < wanted) out.shortfall[type] = wanted - accepted;
    }
  }
  return benchmark;
}

namespace {

void write_ids(std::ostream& out, const CrispSet& set) {
  for (std::size_t i = 0; i < set.ids.size(); ++i) {
    if (i) out << ',';
    out << set.ids[i];
  }
}

CrispSet parse_ids(std::string_view field, std::size_t dimension, const std::string& source, std::size_t line) {
  std::vector<EntityId> ids;
  std::size_t pos = 0;
  while (pos < field.size()) {
    std::size_t end = field.find(',', pos);
    if (end == std::string_view::npos) end = field.size();
    const std::string token(field.substr(pos, end - pos));
    pos = end + 1;
    std::size_t used = 0;
    unsigned long value = 0;
    try {
      value = std::stoul(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (token.empty() || used != token.size()) {
      throw ParseError(source + ":" + std::to_string(line) + ": bad answer id '" + token + "'", line);
    }
    if (value >= dimension) {
      throw ParseError(source + ":" + std::to_string(line) + ": answer id " + token + " out of range", line);
    }
    ids.push_back(static_cast<EntityId>(value));
  }
  return make_crisp(dimension, std::move(ids));
}

}  // namespace

void write_benchmark_entries(std::ostream& out, std::span<const BenchmarkEntry> entries, const TripleStore& store) {
  for (const auto& entry : entries) {
    out << serialize_query(entry.query, store) << '\t';
    write_ids(out, entry.easy);
    out << '\t';
    write_ids(out, entry.hard);
    out << '\n';
  }
}

void write_stats(std::ostream& out, const Benchmark& benchmark, const TripleStore& store) {
  out << std::left << std::setw(10) << "#entity" << std::setw(11) << "#relation" << std::setw(11) << "#train"
      << std::setw(11) << "#valid" << "#test\n";
  out << std::setw(10) << store.num_entities() << std::setw(11) << store.num_relations() << std::setw(11)
      << store.split_triples(Split::kTrain).size() << std::setw(11) << store.split_triples(Split::kValid).size()
      << store.split_triples(Split::kTest).size() << "\n\n";
  out << std::setw(6) << "type" << std::setw(8) << "train" << std::setw(8) << "valid" << std::setw(8) << "test"
      << "shortfall(train/valid/test)\n";
  for (QueryType type : kAllQueryTypes) {
    std::size_t counts[3] = {0, 0, 0};
    std::size_t missing[3] = {0, 0, 0};
    const BenchmarkSplit* splits[3] = {&benchmark.train, &benchmark.valid, &benchmark.test};
    for (int s = 0; s < 3; ++s) {
      for (const auto& e : splits[s]->entries) counts[s] += e.type == type;
      auto it = splits[s]->shortfall.find(type);
      if (it != splits[s]->shortfall.end()) missing[s] = it->second;
    }
    out << std::setw(6) << query_type_name(type) << std::setw(8) << counts[0] << std::setw(8) << counts[1]
        << std::setw(8) << counts[2] << missing[0] << '/' << missing[1] << '/' << missing[2] << '\n';
  }
}

void write_benchmark(const Benchmark& benchmark, const TripleStore& store, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (Split split : {Split::kTrain, Split::kValid, Split::kTest}) {
    std::ofstream out(dir / ("queries_" + std::string(split_name(split)) + ".txt"), std::ios::binary);
    if (!out) throw Error("cannot write benchmark into " + dir.string());
    write_benchmark_entries(out, benchmark.split(split).entries, store);
  }
  std::ofstream stats(dir / "stats.txt", std::ios::binary);
  write_stats(stats, benchmark, store);
  store.save_vocabularies(dir);
}

std::vector<BenchmarkEntry> read_benchmark_entries(std::istream& in, const TripleStore& store,
                                                   const std::string& source) {
  std::vector<BenchmarkEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto tab = rest.find('\t');
      fields.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (fields.size() != 3) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected QUERY<TAB>easy<TAB>hard", line_no);
    }
    BenchmarkEntry entry;
    try {
      entry.query = parse_query(fields[0], store);
    } catch (const ParseError& e) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": " + e.what(), line_no, e.column());
    }
    entry.type = structure_of(entry.query);
    entry.easy = parse_ids(fields[1], store.num_entities(), source, line_no);
    entry.hard = parse_ids(fields[2], store.num_entities(), source, line_no);
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::vector<BenchmarkEntry> read_benchmark_file(const std::filesystem::path& path, const TripleStore& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read benchmark file " + path.string());
  return read_benchmark_entries(in, store, path.string());
}

}  // namespace enesy
