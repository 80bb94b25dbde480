#include "enesy/query.hpp"

#include <algorithm>
#include <cctype>

#include "enesy/errors.hpp"

namespace enesy {

namespace {

constexpr std::array<std::string_view, 15> kTypeNames = {
    "1p", "2p", "3p", "2i", "3i", "pi", "ip", "2u", "up", "2in", "3in", "inp", "pin", "pni", "other"};

}  // namespace

std::string_view query_type_name(QueryType type) { return kTypeNames[static_cast<std::size_t>(type)]; }

std::optional<QueryType> parse_query_type(std::string_view name) {
  for (std::size_t i = 0; i < kTypeNames.size(); ++i) {
    if (kTypeNames[i] == name) return static_cast<QueryType>(i);
  }
  return std::nullopt;
}

bool is_training_type(QueryType type) {
  return std::find(kTrainingQueryTypes.begin(), kTrainingQueryTypes.end(), type) !=
         kTrainingQueryTypes.end();
}

std::size_t ComputationGraph::push(QueryNode node) {
  for (std::size_t child : node.children) {
    if (child >= nodes_.size()) throw QueryError("child index refers to a node not yet added");
  }
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

std::size_t ComputationGraph::add_anchor(EntityId entity) {
  return push({NodeKind::kAnchor, entity, {}});
}

std::size_t ComputationGraph::add_projection(RelationId relation, std::size_t child) {
  return push({NodeKind::kProjection, relation, {child}});
}

std::size_t ComputationGraph::add_intersection(std::vector<std::size_t> children) {
  if (children.size() < 2) throw QueryError("intersection needs at least two operands");
  return push({NodeKind::kIntersection, 0, std::move(children)});
}

std::size_t ComputationGraph::add_union(std::vector<std::size_t> children) {
  if (children.size() < 2) throw QueryError("union needs at least two operands");
  return push({NodeKind::kUnion, 0, std::move(children)});
}

std::size_t ComputationGraph::add_negation(std::size_t child) {
  return push({NodeKind::kNegation, 0, {child}});
}

std::size_t ComputationGraph::append(const ComputationGraph& other) {
  const std::size_t offset = nodes_.size();
  for (QueryNode node : other.nodes_) {
    for (auto& child : node.children) child += offset;
    nodes_.push_back(std::move(node));
  }
  return nodes_.size() - 1;
}

std::size_t ComputationGraph::root() const {
  if (nodes_.empty()) throw QueryError("empty computation graph");
  return nodes_.size() - 1;
}

void ComputationGraph::validate(std::size_t num_entities, std::size_t num_relations) const {
  if (nodes_.empty()) throw QueryError("empty computation graph");
  std::vector<std::size_t> parents(nodes_.size(), 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& node = nodes_[i];
    for (std::size_t child : node.children) {
      if (child >= i) throw QueryError("computation graph is not in topological order");
      ++parents[child];
    }
    switch (node.kind) {
      case NodeKind::kAnchor:
        if (!node.children.empty()) throw QueryError("anchor node with operands");
        if (node.id >= num_entities) throw QueryError("anchor entity id out of range");
        break;
      case NodeKind::kProjection:
        if (node.children.size() != 1) throw QueryError("projection takes exactly one operand");
        if (node.id >= num_relations) throw QueryError("projection relation id out of range");
        break;
      case NodeKind::kNegation:
        if (node.children.size() != 1) throw QueryError("negation takes exactly one operand");
        break;
      case NodeKind::kIntersection:
      case NodeKind::kUnion:
        if (node.children.size() < 2) throw QueryError("intersection/union need two or more operands");
        break;
    }
  }
  for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
    if (parents[i] == 0) throw QueryError("computation graph has more than one root");
  }
}

std::vector<EntityId> ComputationGraph::anchors() const {
  std::vector<EntityId> out;
  for (const auto& node : nodes_) {
    if (node.kind == NodeKind::kAnchor) out.push_back(node.id);
  }
  return out;
}

namespace {

bool subtree_equal(const ComputationGraph& a, std::size_t x, const ComputationGraph& b, std::size_t y) {
  const auto& nx = a.node(x);
  const auto& ny = b.node(y);
  if (nx.kind != ny.kind || nx.id != ny.id || nx.children.size() != ny.children.size()) return false;
  for (std::size_t i = 0; i < nx.children.size(); ++i) {
    if (!subtree_equal(a, nx.children[i], b, ny.children[i])) return false;
  }
  return true;
}

}  // namespace

bool ComputationGraph::operator==(const ComputationGraph& other) const {
  if (empty() || other.empty()) return empty() && other.empty();
  return subtree_equal(*this, root(), other, other.root());
}

std::string shape_signature(const ComputationGraph& graph, std::size_t index) {
  const auto& node = graph.node(index);
  switch (node.kind) {
    case NodeKind::kAnchor:
      return "a";
    case NodeKind::kProjection:
      return "p(" + shape_signature(graph, node.children[0]) + ")";
    case NodeKind::kNegation:
      return "n(" + shape_signature(graph, node.children[0]) + ")";
    case NodeKind::kIntersection:
    case NodeKind::kUnion: {
      std::vector<std::string> parts;
      for (std::size_t child : node.children) parts.push_back(shape_signature(graph, child));
      std::sort(parts.begin(), parts.end());
      std::string out = node.kind == NodeKind::kIntersection ? "i(" : "u(";
      for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ',';
        out += parts[i];
      }
      return out + ")";
    }
  }
  return "?";
}

ComputationGraph query_template(QueryType type) {
  ComputationGraph g;
  auto chain = [&g](int hops) {
    std::size_t node = g.add_anchor(0);
    for (int i = 0; i < hops; ++i) node = g.add_projection(0, node);
    return node;
  };
  switch (type) {
    case QueryType::k1p:
      chain(1);
      break;
    case QueryType::k2p:
      chain(2);
      break;
    case QueryType::k3p:
      chain(3);
      break;
    case QueryType::k2i: {
      auto a = chain(1);
      auto b = chain(1);
      g.add_intersection({a, b});
      break;
    }
    case QueryType::k3i: {
      auto a = chain(1);
      auto b = chain(1);
      auto c = chain(1);
      g.add_intersection({a, b, c});
      break;
    }
    case QueryType::kPi: {
      auto a = chain(2);
      auto b = chain(1);
      g.add_intersection({a, b});
      break;
    }
    case QueryType::kIp: {
      auto a = chain(1);
      auto b = chain(1);
      g.add_projection(0, g.add_intersection({a, b}));
      break;
    }
    case QueryType::k2u: {
      auto a = chain(1);
      auto b = chain(1);
      g.add_union({a, b});
      break;
    }
    case QueryType::kUp: {
      auto a = chain(1);
      auto b = chain(1);
      g.add_projection(0, g.add_union({a, b}));
      break;
    }
    case QueryType::k2in: {
      auto a = chain(1);
      auto b = g.add_negation(chain(1));
      g.add_intersection({a, b});
      break;
    }
    case QueryType::k3in: {
      auto a = chain(1);
      auto b = chain(1);
      auto c = g.add_negation(chain(1));
      g.add_intersection({a, b, c});
      break;
    }
    case QueryType::kInp: {
      auto a = chain(1);
      auto b = g.add_negation(chain(1));
      g.add_projection(0, g.add_intersection({a, b}));
      break;
    }
    case QueryType::kPin: {
      auto a = chain(2);
      auto b = g.add_negation(chain(1));
      g.add_intersection({a, b});
      break;
    }
    case QueryType::kPni: {
      auto a = g.add_negation(chain(2));
      auto b = chain(1);
      g.add_intersection({a, b});
      break;
    }
    case QueryType::kOther:
      throw QueryError("no template for free-form queries");
  }
  return g;
}

QueryType structure_of(const ComputationGraph& graph) {
  static const std::vector<std::string> signatures = [] {
    std::vector<std::string> out;
    for (QueryType type : kAllQueryTypes) {
      const auto t = query_template(type);
      out.push_back(shape_signature(t, t.root()));
    }
    return out;
  }();
  if (graph.empty()) return QueryType::kOther;
  const std::string signature = shape_signature(graph, graph.root());
  for (std::size_t i = 0; i < signatures.size(); ++i) {
    if (signatures[i] == signature) return kAllQueryTypes[i];
  }
  return QueryType::kOther;
}

namespace {

class SexprParser {
 public:
  SexprParser(std::string_view text, const TripleStore& store) : text_(text), store_(store) {}

  ComputationGraph run() {
    ComputationGraph graph;
    parse_node(graph);
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters after query");
    return graph;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError("query syntax error at column " + std::to_string(pos_ + 1) + ": " + message, 1,
                     pos_ + 1);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect(char c) {
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  bool peek(char c) {
    skip_space();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  std::string_view atom() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != '(' && text_[pos_] != ')' &&
           !std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
    if (start == pos_) fail("expected a symbol");
    return text_.substr(start, pos_ - start);
  }

  std::size_t parse_node(ComputationGraph& graph) {
    expect('(');
    const std::size_t op_pos = pos_;
    const std::string_view op = atom();
    std::size_t index = 0;
    if (op == "a") {
      const auto label = atom();
      const auto id = store_.entities().find(label);
      if (!id) throw VocabularyError("unknown entity label '" + std::string(label) + "'");
      index = graph.add_anchor(*id);
    } else if (op == "p") {
      const auto label = atom();
      const auto id = store_.relations().find(label);
      if (!id) throw VocabularyError("unknown relation label '" + std::string(label) + "'");
      const std::size_t child = parse_node(graph);
      index = graph.add_projection(*id, child);
    } else if (op == "n") {
      const std::size_t child = parse_node(graph);
      index = graph.add_negation(child);
    } else if (op == "i" || op == "u") {
      std::vector<std::size_t> children;
      while (peek('(')) children.push_back(parse_node(graph));
      if (children.size() < 2) {
        pos_ = op_pos;
        fail(std::string(op == "i" ? "intersection" : "union") + " needs at least two operands");
      }
      index = op == "i" ? graph.add_intersection(std::move(children)) : graph.add_union(std::move(children));
    } else {
      pos_ = op_pos;
      fail("unknown operator '" + std::string(op) + "'");
    }
    expect(')');
    return index;
  }

  std::string_view text_;
  const TripleStore& store_;
  std::size_t pos_ = 0;
};

void serialize_node(const ComputationGraph& graph, std::size_t index, const TripleStore& store,
                    std::string& out) {
  const auto& node = graph.node(index);
  switch (node.kind) {
    case NodeKind::kAnchor:
      out += "(a " + store.entities().label(node.id) + ")";
      return;
    case NodeKind::kProjection:
      out += "(p " + store.relations().label(node.id) + " ";
      serialize_node(graph, node.children[0], store, out);
      out += ")";
      return;
    case NodeKind::kNegation:
      out += "(n ";
      serialize_node(graph, node.children[0], store, out);
      out += ")";
      return;
    case NodeKind::kIntersection:
    case NodeKind::kUnion:
      out += node.kind == NodeKind::kIntersection ? "(i" : "(u";
      for (std::size_t child : node.children) {
        out += ' ';
        serialize_node(graph, child, store, out);
      }
      out += ")";
      return;
  }
}

}  // namespace

ComputationGraph parse_query(std::string_view text, const TripleStore& store, ParseMode mode) {
  ComputationGraph graph = SexprParser(text, store).run();
  graph.validate(store.num_entities(), store.num_relations());
  if (mode == ParseMode::kBenchmark) {
    if (graph.node(graph.root()).kind == NodeKind::kNegation) {
      throw QueryError("negation at the root is not a benchmark structure");
    }
    if (structure_of(graph) == QueryType::kOther) {
      throw QueryError("query does not match any of the 14 benchmark structures");
    }
  }
  return graph;
}

std::string serialize_query(const ComputationGraph& graph, const TripleStore& store) {
  std::string out;
  serialize_node(graph, graph.root(), store, out);
  return out;
}

}  // namespace enesy
