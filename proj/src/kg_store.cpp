#include "enesy/kg_store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "enesy/errors.hpp"

namespace enesy {

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValid:
      return "valid";
    case Split::kTest:
      return "test";
  }
  return "?";
}

std::string_view graph_view_name(GraphView view) {
  switch (view) {
    case GraphView::kTrain:
      return "train";
    case GraphView::kValid:
      return "train+valid";
    case GraphView::kTest:
      return "train+valid+test";
  }
  return "?";
}

std::uint32_t Vocabulary::intern(std::string_view label) {
  auto it = index_.find(std::string(label));
  if (it != index_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(labels_.size());
  labels_.emplace_back(label);
  index_.emplace(labels_.back(), id);
  return id;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::label(std::uint32_t id) const {
  if (id >= labels_.size()) {
    throw RangeError("vocabulary id " + std::to_string(id) + " out of range (size " +
                     std::to_string(labels_.size()) + ")");
  }
  return labels_[id];
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& label : labels_) out << label << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  Vocabulary vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw ParseError(path.string() + ": empty vocabulary label", line_no);
    if (vocab.find(line)) throw ParseError(path.string() + ": duplicate label '" + line + "'", line_no);
    vocab.intern(line);
  }
  return vocab;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void sort_unique(std::vector<Triple>& triples) {
  std::sort(triples.begin(), triples.end());
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
}

}  // namespace

std::vector<Triple>& TripleStore::mutable_split(Split split) {
  switch (split) {
    case Split::kTrain:
      return train_;
    case Split::kValid:
      return valid_;
    case Split::kTest:
      return test_;
  }
  return train_;
}

const std::vector<Triple>& TripleStore::split_triples(Split split) const {
  return const_cast<TripleStore*>(this)->mutable_split(split);
}

bool TripleStore::in_earlier_split(Split split, const Triple& triple) const {
  auto has = [&](const std::vector<Triple>& v) { return std::binary_search(v.begin(), v.end(), triple); };
  if (split == Split::kValid) return has(train_);
  if (split == Split::kTest) return has(train_) || has(valid_);
  return false;
}

std::vector<Triple> TripleStore::parse_triples(std::string_view text, Split split, bool strict_vocab,
                                               std::string_view source) {
  const bool frozen_vocab = strict_vocab && split != Split::kTrain;
  std::vector<Triple> parsed;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    std::string_view fields[3];
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      const std::string_view field =
          line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start);
      if (count < 3) fields[count] = field;
      ++count;
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (count != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw ParseError(std::string(source) + ":" + std::to_string(line_no) +
                           ": expected head<TAB>relation<TAB>tail, got " + std::to_string(count) +
                           " field(s)",
                       line_no);
    }
    Triple triple;
    if (frozen_vocab) {
      auto h = entities_.find(fields[0]);
      auto r = relations_.find(fields[1]);
      auto t = entities_.find(fields[2]);
      if (!h || !r || !t) {
        const std::string_view missing = !h ? fields[0] : (!r ? fields[1] : fields[2]);
        throw VocabularyError(std::string(source) + ":" + std::to_string(line_no) +
                              ": unknown label '" + std::string(missing) + "' in " +
                              std::string(split_name(split)) + " split");
      }
      triple = {*h, *r, *t};
    } else {
      triple.head = entities_.intern(fields[0]);
      triple.relation = relations_.intern(fields[1]);
      triple.tail = entities_.intern(fields[2]);
    }
    parsed.push_back(triple);
  }

  sort_unique(parsed);
  std::vector<Triple> kept;
  kept.reserve(parsed.size());
  for (const auto& triple : parsed) {
    if (in_earlier_split(split, triple)) {
      if (strict_vocab) {
        throw VocabularyError(std::string(source) + ": triple (" + entities_.label(triple.head) + ", " +
                              relations_.label(triple.relation) + ", " + entities_.label(triple.tail) +
                              ") already present in an earlier split");
      }
      continue;
    }
    kept.push_back(triple);
  }
  auto& target = mutable_split(split);
  target.insert(target.end(), kept.begin(), kept.end());
  sort_unique(target);
  return kept;
}

std::vector<Triple> TripleStore::load_triples(const std::filesystem::path& path, Split split,
                                              bool strict_vocab) {
  return parse_triples(read_file(path), split, strict_vocab, path.string());
}

void TripleStore::add_triples(Split split, std::span<const Triple> triples) {
  auto& target = mutable_split(split);
  for (const auto& t : triples) {
    if (t.head >= entities_.size() || t.tail >= entities_.size() || t.relation >= relations_.size()) {
      throw RangeError("triple id out of vocabulary range");
    }
    if (!in_earlier_split(split, t)) target.push_back(t);
  }
  sort_unique(target);
}

std::vector<Triple> TripleStore::graph_triples(GraphView view) const {
  std::vector<Triple> out = train_;
  if (view != GraphView::kTrain) out.insert(out.end(), valid_.begin(), valid_.end());
  if (view == GraphView::kTest) out.insert(out.end(), test_.begin(), test_.end());
  sort_unique(out);
  return out;
}

std::size_t TripleStore::graph_size(GraphView view) const {
  std::size_t n = train_.size();
  if (view != GraphView::kTrain) n += valid_.size();
  if (view == GraphView::kTest) n += test_.size();
  return n;
}

bool TripleStore::contains(GraphView view, const Triple& triple) const {
  auto has = [&](const std::vector<Triple>& v) { return std::binary_search(v.begin(), v.end(), triple); };
  if (has(train_)) return true;
  if (view != GraphView::kTrain && has(valid_)) return true;
  return view == GraphView::kTest && has(test_);
}

TripleStore TripleStore::load_directory(const std::filesystem::path& dir, bool strict_vocab) {
  TripleStore store;
  const auto entities = dir / "entities.txt";
  const auto relations = dir / "relations.txt";
  if (std::filesystem::exists(entities) && std::filesystem::exists(relations)) {
    store.entities_ = Vocabulary::load(entities);
    store.relations_ = Vocabulary::load(relations);
  }
  const auto train = dir / "train.txt";
  if (!std::filesystem::exists(train)) throw Error("missing " + train.string());
  store.load_triples(train, Split::kTrain, strict_vocab);
  for (Split split : {Split::kValid, Split::kTest}) {
    const auto path = dir / (std::string(split_name(split)) + ".txt");
    if (std::filesystem::exists(path)) store.load_triples(path, split, strict_vocab);
  }
  store.check_invariants();
  return store;
}

void TripleStore::save_vocabularies(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  entities_.save(dir / "entities.txt");
  relations_.save(dir / "relations.txt");
}

void TripleStore::save_directory(const std::filesystem::path& dir) const {
  save_vocabularies(dir);
  for (Split split : {Split::kTrain, Split::kValid, Split::kTest}) {
    std::ofstream out(dir / (std::string(split_name(split)) + ".txt"), std::ios::binary);
    if (!out) throw Error("cannot write into " + dir.string());
    for (const auto& t : split_triples(split)) {
      out << entities_.label(t.head) << '\t' << relations_.label(t.relation) << '\t'
          << entities_.label(t.tail) << '\n';
    }
  }
}

void TripleStore::check_invariants() const {
  for (Split split : {Split::kTrain, Split::kValid, Split::kTest}) {
    const auto& triples = split_triples(split);
    for (std::size_t i = 0; i < triples.size(); ++i) {
      const auto& t = triples[i];
      if (t.head >= entities_.size() || t.tail >= entities_.size() || t.relation >= relations_.size()) {
        throw VocabularyError("triple id out of vocabulary range in " + std::string(split_name(split)));
      }
      if (i > 0 && !(triples[i - 1] < t)) {
        throw VocabularyError("duplicate triple in " + std::string(split_name(split)));
      }
      if (in_earlier_split(split, t)) {
        throw VocabularyError("split " + std::string(split_name(split)) +
                              " repeats an edge of an earlier split");
      }
    }
  }
}

RelationAdjacency::RelationAdjacency(RelationId relation, std::size_t num_entities,
                                     std::span<const std::pair<EntityId, EntityId>> edges)
    : relation_(relation), row_offsets_(num_entities + 1, 0) {
  std::vector<std::pair<EntityId, EntityId>> sorted(edges.begin(), edges.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  columns_.reserve(sorted.size());
  for (const auto& [head, tail] : sorted) {
    if (head >= num_entities || tail >= num_entities) throw RangeError("adjacency edge out of range");
    ++row_offsets_[head + 1];
    columns_.push_back(tail);
  }
  for (std::size_t i = 1; i < row_offsets_.size(); ++i) row_offsets_[i] += row_offsets_[i - 1];
}

std::span<const EntityId> RelationAdjacency::neighbors(EntityId head) const {
  if (head >= dimension()) {
    throw RangeError("entity " + std::to_string(head) + " out of range for adjacency of size " +
                     std::to_string(dimension()));
  }
  return std::span<const EntityId>(columns_).subspan(row_offsets_[head],
                                                     row_offsets_[head + 1] - row_offsets_[head]);
}

bool RelationAdjacency::contains(EntityId head, EntityId tail) const {
  const auto row = neighbors(head);
  return std::binary_search(row.begin(), row.end(), tail);
}

std::vector<Triple> RelationAdjacency::to_triples() const {
  std::vector<Triple> out;
  out.reserve(columns_.size());
  for (EntityId h = 0; h < dimension(); ++h) {
    for (EntityId t : neighbors(h)) out.push_back({h, relation_, t});
  }
  return out;
}

AdjacencySet::AdjacencySet(const TripleStore& store, GraphView view)
    : AdjacencySet(store.num_entities(), store.num_relations(), store.graph_triples(view), view) {}

AdjacencySet::AdjacencySet(std::size_t num_entities, std::size_t num_relations,
                           std::span<const Triple> triples, GraphView view)
    : view_(view),
      num_entities_(num_entities),
      buckets_(num_relations),
      built_(num_relations),
      once_(std::make_unique<std::once_flag[]>(num_relations)) {
  for (const auto& t : triples) {
    if (t.relation >= num_relations) throw RangeError("relation id out of range");
    buckets_[t.relation].emplace_back(t.head, t.tail);
  }
}

const RelationAdjacency& AdjacencySet::relation(RelationId relation) const {
  if (relation >= buckets_.size()) {
    throw RangeError("relation " + std::to_string(relation) + " out of range (have " +
                     std::to_string(buckets_.size()) + ")");
  }
  std::call_once(once_[relation], [&] {
    built_[relation] = std::make_unique<RelationAdjacency>(relation, num_entities_, buckets_[relation]);
  });
  return *built_[relation];
}

std::span<const EntityId> AdjacencySet::neighbors(RelationId relation, EntityId head) const {
  return this->relation(relation).neighbors(head);
}

RelationAdjacency build_adjacency(const TripleStore& store, GraphView view, RelationId relation) {
  if (relation >= store.num_relations()) {
    throw RangeError("relation " + std::to_string(relation) + " out of range");
  }
  std::vector<std::pair<EntityId, EntityId>> edges;
  for (const auto& t : store.graph_triples(view)) {
    if (t.relation == relation) edges.emplace_back(t.head, t.tail);
  }
  return RelationAdjacency(relation, store.num_entities(), edges);
}

}  // namespace enesy
