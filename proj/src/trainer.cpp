#include "enesy/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include "enesy/errors.hpp"

namespace enesy {

namespace {

double sgn(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

// -log sigmoid(x), stable for large |x|.
double neg_log_sigmoid(double x) { return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x)); }

void add_to(std::span<double> dst, std::span<const double> src, double scale = 1.0) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

bool all_zero(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; });
}

// weight * -log s(direction * S(x, y)); accumulates scale * gradient into dx
// and dy (either may be empty).
double similarity_term(EmbeddingView x, EmbeddingView y, double gamma, double direction, double weight, double scale,
                       std::span<double> dx, std::span<double> dy) {
  const double s = similarity(x, y, gamma);
  const double loss = weight * neg_log_sigmoid(direction * s);
  const double d_s = -scale * weight * direction * sigmoid(-direction * s);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double g = d_s * sgn(x[i] - y[i]);
    if (!dx.empty()) dx[i] -= g;
    if (!dy.empty()) dy[i] += g;
  }
  return loss;
}

double add_embedding_loss(EmbeddingView v, EntityId positive, std::span<const EntityId> negatives,
                          const ModelParams& params, bool strict, double scale, std::span<double> d_v,
                          Gradients& grads) {
  const double gamma = params.hp.gamma;
  const double pos_dir = strict ? -1.0 : 1.0;
  double loss = similarity_term(v, params.entity(positive), gamma, pos_dir, 1.0, scale, d_v, grads.entity(positive));
  if (!negatives.empty()) {
    const double w = 1.0 / static_cast<double>(negatives.size());
    for (EntityId e : negatives) {
      loss += similarity_term(v, params.entity(e), gamma, -pos_dir, w, scale, d_v, grads.entity(e));
    }
  }
  return loss;
}

ComplexEmbedding aggregate_cached(const FuzzyVector& p, const ModelParams& params, GateCache& gates) {
  if (p.empty()) throw DomainError("aggregate_embedding: empty support");
  const std::size_t width = 2 * params.hp.dim;
  ComplexEmbedding out(width, 0.0);
  for (const auto& e : p.support()) {
    const auto row = params.entity(e.id);
    const double g = gates.value(e.id);
    const double scale = e.weight * g;
    for (std::size_t i = 0; i < width; ++i) out[i] += scale * row[i];
  }
  return out;
}

// Backward of v = sum_i p_i gate_i E_i given dv.
void aggregate_grad(const FuzzyVector& p, std::span<const double> d_v, std::span<double> d_p,
                    const ModelParams& params, GateCache& gates, Gradients& grads) {
  if (all_zero(d_v)) return;
  for (const auto& e : p.support()) {
    const auto row = params.entity(e.id);
    const double g = gates.value(e.id);
    double dot = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) dot += d_v[i] * row[i];
    if (!d_p.empty()) d_p[e.id] += g * dot;
    gates.add_upstream(e.id, e.weight * dot);
    add_to(grads.entity(e.id), d_v, e.weight * g);
  }
}

double add_aggregation_loss(EmbeddingView v_t, const FuzzyVector& p_prime, const ModelParams& params, bool strict,
                            double scale, std::span<double> d_v_t, std::span<double> d_p_prime, GateCache& gates,
                            Gradients& grads) {
  const auto aggregate = aggregate_cached(p_prime, params, gates);
  std::vector<double> d_aggregate(aggregate.size(), 0.0);
  const double loss =
      similarity_term(v_t, aggregate, params.hp.gamma, strict ? -1.0 : 1.0, 1.0, scale, d_v_t, d_aggregate);
  aggregate_grad(p_prime, d_aggregate, d_p_prime, params, gates, grads);
  return loss;
}

// Backward of o = x / sum(x): d_x on the support of o.
// Returns d_x_j = (d_o_j - <d_o, o>) / mass for every j in supp(o).
template <typename Fn>
void normalize_grad(const FuzzyVector& o, std::span<const double> d_o, double mass, Fn&& emit) {
  double c = 0.0;
  for (const auto& e : o.support()) c += d_o[e.id] * e.weight;
  for (const auto& e : o.support()) emit(e.id, (d_o[e.id] - c) / mass);
}

}  // namespace

LossTerms& LossTerms::operator+=(const LossTerms& o) {
  embedding += o.embedding;
  symbolic += o.symbolic;
  aggregation += o.aggregation;
  return *this;
}

Gradients::Gradients(const ModelParams& params)
    : entity_width_(2 * params.hp.dim), phase_width_(params.hp.dim), mlp_size_(params.mlp.parameters().size()) {}

std::span<double> Gradients::entity(EntityId e) {
  auto& row = entities_[e];
  if (row.empty()) row.assign(entity_width_, 0.0);
  return row;
}

std::span<double> Gradients::relation(RelationId r) {
  auto& row = relations_[r];
  if (row.empty()) row.assign(phase_width_, 0.0);
  return row;
}

std::span<double> Gradients::mlp() {
  if (mlp_.empty()) mlp_.assign(mlp_size_, 0.0);
  return mlp_;
}

void Gradients::clear() {
  entities_.clear();
  relations_.clear();
  mlp_.clear();
}

bool Gradients::finite() const {
  auto ok = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  for (const auto& [id, row] : entities_) {
    if (!ok(row)) return false;
  }
  for (const auto& [id, row] : relations_) {
    if (!ok(row)) return false;
  }
  return ok(mlp_);
}

double GateCache::value(EntityId e) {
  auto [it, inserted] = slots_.try_emplace(e);
  if (inserted) {
    it->second.gate = params_.mlp.forward(params_.entity(e));
    order_.push_back(e);
  }
  return it->second.gate;
}

void GateCache::add_upstream(EntityId e, double d) {
  value(e);
  slots_[e].upstream += d;
}

void GateCache::backpropagate(Gradients& grads) {
  std::vector<double> pre;
  double logit = 0.0;
  for (EntityId e : order_) {
    auto& slot = slots_[e];
    if (slot.upstream == 0.0) continue;
    const auto row = params_.entity(e);
    const double out = params_.mlp.forward(row, pre, logit);
    params_.mlp.backward(row, pre, out, slot.upstream, grads.mlp(), grads.entity(e));
    slot.upstream = 0.0;
  }
}

LossGradient loss_embedding(EmbeddingView v_q, EntityId positive, std::span<const EntityId> negatives,
                            const ModelParams& params, bool strict_signs) {
  LossGradient out;
  out.params = Gradients(params);
  out.d_embedding.assign(v_q.size(), 0.0);
  out.loss = add_embedding_loss(v_q, positive, negatives, params, strict_signs, 1.0, out.d_embedding, out.params);
  return out;
}

LossGradient loss_symbolic(const FuzzyVector& p_q, EntityId positive, double theta) {
  if (!(theta > 0.0)) throw DomainError("loss_symbolic: theta must be positive");
  LossGradient out;
  out.d_fuzzy.assign(p_q.dimension(), 0.0);
  const double x = p_q.weight(positive);
  const double clamped = std::max(x, theta);
  out.loss = std::log1p(1.0 / clamped);
  if (x > theta) out.d_fuzzy[positive] = -1.0 / (x * (1.0 + x));
  return out;
}

LossGradient loss_mlp(EmbeddingView v_t, const FuzzyVector& p_prime, const ModelParams& params, bool strict_signs) {
  LossGradient out;
  out.params = Gradients(params);
  out.d_embedding.assign(v_t.size(), 0.0);
  out.d_fuzzy.assign(p_prime.dimension(), 0.0);
  GateCache gates(params);
  out.loss = add_aggregation_loss(v_t, p_prime, params, strict_signs, 1.0, out.d_embedding, out.d_fuzzy, gates,
                                  out.params);
  gates.backpropagate(out.params);
  return out;
}

std::vector<EntityId> negative_sample(const CrispSet& answers, std::size_t n, std::mt19937_64& rng) {
  if (answers.size() >= answers.dimension) {
    throw SamplingError("negative sampling impossible: every entity is an answer");
  }
  std::uniform_int_distribution<EntityId> pick(0, static_cast<EntityId>(answers.dimension - 1));
  std::vector<EntityId> out;
  out.reserve(n);
  while (out.size() < n) {
    const EntityId e = pick(rng);
    if (!answers.contains(e)) out.push_back(e);
  }
  return out;
}

QueryTape::QueryTape(const ModelParams& params, const AdjacencySet& adjacency, const LossOptions& options,
                     GateCache& gates)
    : params_(params), adjacency_(adjacency), options_(options), gates_(gates) {
  if (options.top_k == 0) throw ConfigError("top_k must be at least 1");
}

const DualState& QueryTape::forward(const ComputationGraph& query) {
  query.validate(params_.num_entities, params_.num_relations);
  query_ = &query;
  nodes_.assign(query.size(), Node{});
  const bool entangled = options_.mode == ForwardMode::kEntangled;
  for (std::size_t i = 0; i < query.size(); ++i) {
    const auto& node = query.node(i);
    Node& rec = nodes_[i];
    switch (node.kind) {
      case NodeKind::kAnchor: {
        const auto row = params_.entity(node.id);
        rec.out.v.assign(row.begin(), row.end());
        if (entangled) rec.out.p = FuzzyVector::one_hot(params_.num_entities, node.id);
        break;
      }
      case NodeKind::kProjection: {
        const Node& in = nodes_[node.children[0]];
        rec.v_in_rotated = project_neural(in.out.v, params_.phases(node.id));
        if (!entangled) {
          rec.out.v = rec.v_in_rotated;
          break;
        }
        const auto& adjacency = adjacency_.relation(node.id);
        rec.p_t = project_symbolic(in.out.p, adjacency);
        if (!rec.p_t.degenerate()) {
          for (const auto& e : in.out.p.support()) {
            rec.p_t_mass += e.weight * static_cast<double>(adjacency.neighbors(e.id).size());
          }
        }
        rec.p_prime = infer_fuzzy(rec.v_in_rotated, params_, options_.top_k);
        rec.out.p = merge_fuzzy(rec.p_t, rec.p_prime);
        rec.merge_mass = (rec.p_t.degenerate() ? 0.0 : rec.p_t.sum()) + rec.p_prime.sum();
        rec.out.v = aggregate_cached(rec.out.p, params_, gates_);
        rec.out.degenerate = rec.out.p.degenerate();
        break;
      }
      case NodeKind::kIntersection:
      case NodeKind::kUnion:
      case NodeKind::kNegation: {
        if (!entangled) throw QueryError("rotation-only execution supports projections and unions of paths only");
        bool degenerate = false;
        for (std::size_t c : node.children) degenerate = degenerate || nodes_[c].out.degenerate;
        if (node.kind == NodeKind::kNegation) {
          rec.out.p = negate(nodes_[node.children[0]].out.p, params_.hp.alpha);
        } else {
          FuzzyVector acc = nodes_[node.children[0]].out.p;
          for (std::size_t k = 1; k < node.children.size(); ++k) {
            const auto& next = nodes_[node.children[k]].out.p;
            acc = node.kind == NodeKind::kIntersection ? intersect(acc, next) : unite(acc, next);
            degenerate = degenerate || acc.degenerate();
            rec.fold.push_back(acc);
          }
          rec.out.p = std::move(acc);
        }
        degenerate = degenerate || rec.out.p.degenerate();
        rec.out.v = aggregate_cached(rec.out.p, params_, gates_);
        rec.out.degenerate = degenerate;
        break;
      }
    }
  }
  return nodes_.back().out;
}

void QueryTape::aggregate_backward(const FuzzyVector& p, std::span<const double> d_v, std::vector<double>& d_p,
                                   Gradients& grads) {
  aggregate_grad(p, d_v, d_p, params_, gates_, grads);
}

LossTerms QueryTape::backward(EntityId positive, std::span<const EntityId> negatives, Gradients& grads,
                              double scale) {
  if (!query_) throw TrainingError("QueryTape::backward called before forward");
  const auto& query = *query_;
  const bool entangled = options_.mode == ForwardMode::kEntangled;
  const std::size_t n = query.size();
  const std::size_t width = 2 * params_.hp.dim;
  const std::size_t nv = params_.num_entities;
  std::vector<std::vector<double>> d_v(n, std::vector<double>(width, 0.0));
  std::vector<std::vector<double>> d_p(n);
  if (entangled) {
    for (auto& d : d_p) d.assign(nv, 0.0);
  }

  LossTerms terms;
  const DualState& root = nodes_.back().out;
  if (options_.embedding) {
    terms.embedding = add_embedding_loss(root.v, positive, negatives, params_, options_.strict_signs, scale,
                                         d_v.back(), grads);
  }
  if (options_.symbolic && entangled) {
    const double theta = params_.hp.theta;
    const double x = root.p.weight(positive);
    terms.symbolic = std::log1p(1.0 / std::max(x, theta));
    if (x > theta && !root.p.degenerate()) d_p.back()[positive] += scale * (-1.0 / (x * (1.0 + x)));
  }

  for (std::size_t idx = n; idx-- > 0;) {
    const auto& node = query.node(idx);
    Node& rec = nodes_[idx];
    auto& dv = d_v[idx];
    switch (node.kind) {
      case NodeKind::kAnchor:
        if (!all_zero(dv)) add_to(grads.entity(node.id), dv);
        break;
      case NodeKind::kProjection: {
        const std::size_t child = node.children[0];
        const Node& in = nodes_[child];
        std::vector<double> d_vt(width, 0.0);
        if (!entangled) {
          d_vt = dv;
        } else {
          auto& dp = d_p[idx];
          aggregate_backward(rec.out.p, dv, dp, grads);
          std::vector<double> dp_prime(nv, 0.0);
          if (options_.aggregation) {
            terms.aggregation += add_aggregation_loss(rec.v_in_rotated, rec.p_prime, params_, options_.strict_signs,
                                                      scale, d_vt, dp_prime, gates_, grads);
          }
          std::vector<double> dp_t(nv, 0.0);
          const bool use_p_t = !rec.p_t.degenerate();
          normalize_grad(rec.out.p, dp, rec.merge_mass, [&](EntityId j, double du) {
            dp_prime[j] += du;
            if (use_p_t) dp_t[j] += du;
          });
          // softmax over the selected entities; the selection itself is fixed
          double c = 0.0;
          for (const auto& e : rec.p_prime.support()) c += dp_prime[e.id] * e.weight;
          for (const auto& e : rec.p_prime.support()) {
            const double d_s = e.weight * (dp_prime[e.id] - c);
            if (d_s == 0.0) continue;
            const auto row = params_.entity(e.id);
            auto d_row = grads.entity(e.id);
            for (std::size_t i = 0; i < width; ++i) {
              const double g = d_s * sgn(rec.v_in_rotated[i] - row[i]);
              d_vt[i] -= g;
              d_row[i] += g;
            }
          }
          if (use_p_t && !in.out.p.degenerate()) {
            std::vector<double> dq(nv, 0.0);
            normalize_grad(rec.p_t, dp_t, rec.p_t_mass, [&](EntityId j, double d) { dq[j] = d; });
            const auto& adjacency = adjacency_.relation(node.id);
            auto& dp_in = d_p[child];
            for (const auto& e : in.out.p.support()) {
              double acc = 0.0;
              for (EntityId t : adjacency.neighbors(e.id)) acc += dq[t];
              dp_in[e.id] += acc;
            }
          }
        }
        // rotation
        const auto phases = params_.phases(node.id);
        const auto& v_in = in.out.v;
        auto d_theta = grads.relation(node.id);
        auto& dv_in = d_v[child];
        for (std::size_t j = 0; j < params_.hp.dim; ++j) {
          const double c = std::cos(phases[j]);
          const double s = std::sin(phases[j]);
          const double dre = d_vt[2 * j];
          const double dim = d_vt[2 * j + 1];
          dv_in[2 * j] += dre * c + dim * s;
          dv_in[2 * j + 1] += -dre * s + dim * c;
          d_theta[j] += -dre * rec.v_in_rotated[2 * j + 1] + dim * rec.v_in_rotated[2 * j];
        }
        (void)v_in;
        break;
      }
      case NodeKind::kIntersection:
      case NodeKind::kUnion: {
        auto& dp = d_p[idx];
        aggregate_backward(rec.out.p, dv, dp, grads);
        const bool is_intersection = node.kind == NodeKind::kIntersection;
        std::vector<double> d_out = dp;
        for (std::size_t k = rec.fold.size(); k-- > 0;) {
          const FuzzyVector& out = rec.fold[k];
          if (out.degenerate()) break;
          const FuzzyVector& a = k == 0 ? nodes_[node.children[0]].out.p : rec.fold[k - 1];
          const FuzzyVector& b = nodes_[node.children[k + 1]].out.p;
          const auto a_dense = a.dense();
          const auto b_dense = b.dense();
          double mass = 0.0;
          for (const auto& e : out.support()) {
            const double x = a_dense[e.id];
            const double y = b_dense[e.id];
            mass += is_intersection ? x * y : x + y - x * y;
          }
          std::vector<double> d_a(nv, 0.0);
          auto& d_b = d_p[node.children[k + 1]];
          normalize_grad(out, d_out, mass, [&](EntityId j, double du) {
            if (is_intersection) {
              d_a[j] += du * b_dense[j];
              d_b[j] += du * a_dense[j];
            } else {
              d_a[j] += du * (1.0 - b_dense[j]);
              d_b[j] += du * (1.0 - a_dense[j]);
            }
          });
          if (k == 0) {
            add_to(d_p[node.children[0]], d_a);
          } else {
            d_out = std::move(d_a);
          }
        }
        break;
      }
      case NodeKind::kNegation: {
        auto& dp = d_p[idx];
        aggregate_backward(rec.out.p, dv, dp, grads);
        if (rec.out.p.degenerate()) break;
        const auto& in = nodes_[node.children[0]].out.p;
        const double level = params_.hp.alpha / static_cast<double>(nv);
        const auto in_dense = in.dense();
        double mass = 0.0;
        for (std::size_t j = 0; j < nv; ++j) mass += std::max(level - in_dense[j], 0.0);
        auto& dp_in = d_p[node.children[0]];
        normalize_grad(rec.out.p, dp, mass, [&](EntityId j, double du) { dp_in[j] -= du; });
        break;
      }
    }
  }
  return terms;
}

LossTerms example_gradient(const ComputationGraph& query, EntityId positive, std::span<const EntityId> negatives,
                           const ModelParams& params, const AdjacencySet& adjacency, const LossOptions& options,
                           Gradients& grads) {
  GateCache gates(params);
  QueryTape tape(params, adjacency, options, gates);
  tape.forward(query);
  const auto terms = tape.backward(positive, negatives, grads);
  gates.backpropagate(grads);
  return terms;
}

LazyAdam::LazyAdam(const ModelParams& params, double beta1, double beta2, double epsilon)
    : beta1_(beta1),
      beta2_(beta2),
      epsilon_(epsilon),
      m_entity_(params.entity_table.size(), 0.0),
      v_entity_(params.entity_table.size(), 0.0),
      m_phase_(params.relation_phases.size(), 0.0),
      v_phase_(params.relation_phases.size(), 0.0),
      m_mlp_(params.mlp.parameters().size(), 0.0),
      v_mlp_(params.mlp.parameters().size(), 0.0) {}

void LazyAdam::step(ModelParams& params, const Gradients& grads, const LearningRates& rates) {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(beta1_, t);
  const double c2 = 1.0 - std::pow(beta2_, t);
  auto update = [&](double* w, double* m, double* v, const double* g, std::size_t len, double lr) {
    for (std::size_t i = 0; i < len; ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + epsilon_);
    }
  };
  const std::size_t ew = 2 * params.hp.dim;
  const std::size_t pw = params.hp.dim;
  if (rates.entity > 0.0) {
    for (const auto& [e, g] : grads.entity_rows()) {
      const std::size_t off = static_cast<std::size_t>(e) * ew;
      update(params.entity_table.data() + off, m_entity_.data() + off, v_entity_.data() + off, g.data(), ew,
             rates.entity);
    }
  }
  if (rates.relation > 0.0) {
    for (const auto& [r, g] : grads.relation_rows()) {
      const std::size_t off = static_cast<std::size_t>(r) * pw;
      update(params.relation_phases.data() + off, m_phase_.data() + off, v_phase_.data() + off, g.data(), pw,
             rates.relation);
    }
  }
  if (rates.mlp > 0.0 && grads.mlp_touched()) {
    auto& w = params.mlp.parameters();
    update(w.data(), m_mlp_.data(), v_mlp_.data(), grads.mlp_grad().data(), w.size(), rates.mlp);
  }
}

std::vector<TrainingQuery> training_queries(std::span<const BenchmarkEntry> entries) {
  std::vector<TrainingQuery> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back({e.query, e.type, e.all_answers()});
  return out;
}

std::vector<TrainingQuery> link_prediction_queries(const TripleStore& store, GraphView view) {
  const std::size_t n = store.entities().size();
  auto triples = store.graph_triples(view);
  std::sort(triples.begin(), triples.end(), [](const Triple& a, const Triple& b) {
    return std::tie(a.head, a.relation, a.tail) < std::tie(b.head, b.relation, b.tail);
  });
  std::vector<TrainingQuery> out;
  for (std::size_t i = 0; i < triples.size();) {
    std::size_t j = i;
    std::vector<EntityId> tails;
    while (j < triples.size() && triples[j].head == triples[i].head && triples[j].relation == triples[i].relation) {
      tails.push_back(triples[j].tail);
      ++j;
    }
    TrainingQuery q;
    q.type = QueryType::k1p;
    q.query.add_projection(triples[i].relation, q.query.add_anchor(triples[i].head));
    q.answers = make_crisp(n, std::move(tails));
    out.push_back(std::move(q));
    i = j;
  }
  return out;
}

namespace {

struct Example {
  std::size_t query;
  std::optional<EntityId> answer;
};

void dump_batch(const std::filesystem::path& path, const TripleStore& store, std::span<const TrainingQuery> train,
                std::span<const Example> batch) {
  std::ofstream out(path);
  if (!out) return;
  for (const auto& ex : batch) {
    const auto& q = train[ex.query];
    out << serialize_query(q.query, store);
    if (ex.answer) out << '\t' << store.entities().label(*ex.answer);
    out << '\n';
  }
}

double mean_score(const MetricsReport& report) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& [type, m] : report.per_type) {
    if (m.queries == 0) continue;
    total += m.mean.mrr;
    ++count;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

}  // namespace

StageResult run_stage(const TrainConfig& config, const TripleStore& store, std::span<const TrainingQuery> train,
                      std::span<const BenchmarkEntry> valid, ModelParams params, const StageHooks& hooks) {
  config.validate();
  if (params.num_entities != store.entities().size() || params.num_relations != store.relations().size()) {
    throw TrainingError("model vocabulary sizes do not match the graph");
  }
  if (config.is_set("gamma")) params.hp.gamma = config.hp.gamma;
  if (config.is_set("alpha")) params.hp.alpha = config.hp.alpha;
  if (config.is_set("theta")) params.hp.theta = config.hp.theta;
  if (config.is_set("lambda")) params.hp.lambda = config.hp.lambda;

  StageResult result;
  if (config.epochs == 0 || train.empty()) {
    result.params = std::move(params);
    return result;
  }

  const AdjacencySet graph(store, GraphView::kTrain);
  std::mt19937_64 rng(config.seed);
  LazyAdam adam(params, config.beta1, config.beta2, config.epsilon);

  std::vector<Example> examples;
  for (std::size_t q = 0; q < train.size(); ++q) {
    if (train[q].answers.empty()) continue;
    if (config.per_answer_examples) {
      for (EntityId a : train[q].answers.ids) examples.push_back({q, a});
    } else {
      examples.push_back({q, std::nullopt});
    }
  }

  LossOptions joint;
  joint.top_k = config.top_k;
  joint.strict_signs = config.flipped_signs;
  switch (config.stage) {
    case Stage::kKge:
      joint.mode = ForwardMode::kRotation;
      joint.symbolic = false;
      break;
    case Stage::kProjection:
      joint.aggregation = true;
      break;
    case Stage::kFinetune:
      break;
  }
  LossOptions warmup = joint;
  warmup.embedding = false;
  warmup.symbolic = false;
  warmup.aggregation = true;

  double lr = config.learning_rate;
  double mlp_lr = config.mlp_rate();
  std::optional<double> best_score;
  ModelParams best = params;
  std::size_t stall = 0;
  const std::size_t warmup_epochs = config.stage == Stage::kProjection ? config.mlp_warmup_epochs : 0;
  const std::size_t total_epochs = warmup_epochs + config.epochs;

  for (std::size_t epoch = 1; epoch <= total_epochs; ++epoch) {
    const bool is_warmup = epoch <= warmup_epochs;
    const LossOptions& options = is_warmup ? warmup : joint;
    LearningRates rates;
    if (is_warmup) {
      rates.mlp = mlp_lr;
    } else {
      rates.entity = lr;
      rates.relation = lr;
      rates.mlp = config.stage == Stage::kKge ? 0.0 : mlp_lr;
    }

    std::shuffle(examples.begin(), examples.end(), rng);
    LossTerms sum;
    for (std::size_t start = 0; start < examples.size(); start += config.batch_size) {
      const std::size_t end = std::min(examples.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      Gradients grads(params);
      GateCache gates(params);
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = examples[i];
        const auto& q = train[ex.query];
        EntityId positive;
        if (ex.answer) {
          positive = *ex.answer;
        } else {
          std::uniform_int_distribution<std::size_t> pick(0, q.answers.size() - 1);
          positive = q.answers.ids[pick(rng)];
        }
        const auto negatives = negative_sample(q.answers, config.negatives, rng);
        QueryTape tape(params, graph, options, gates);
        tape.forward(q.query);
        const auto terms = tape.backward(positive, negatives, grads, scale);
        if (!std::isfinite(terms.total())) {
          std::string where = "non-finite loss in stage " + std::string(stage_name(config.stage)) + ", epoch " +
                              std::to_string(epoch) + ", query " + serialize_query(q.query, store);
          if (!hooks.dump_path.empty()) {
            dump_batch(hooks.dump_path, store, train,
                       std::span<const Example>(examples).subspan(start, end - start));
            where += " (batch written to " + hooks.dump_path.string() + ")";
          }
          throw TrainingError(where);
        }
        sum += terms;
      }
      gates.backpropagate(grads);
      if (!grads.finite()) throw TrainingError("non-finite gradient in epoch " + std::to_string(epoch));
      adam.step(params, grads, rates);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.stage = config.stage;
    record.warmup = is_warmup;
    const double count = static_cast<double>(examples.size());
    record.loss = {sum.embedding / count, sum.symbolic / count, sum.aggregation / count};
    record.learning_rate = is_warmup ? mlp_lr : lr;

    const bool evaluate_now = !is_warmup && !valid.empty() &&
                              ((epoch - warmup_epochs) % config.valid_every == 0 || epoch == total_epochs);
    if (evaluate_now) {
      record.valid = evaluate(params, valid, graph, config.select_mode, LambdaTable(params.hp.lambda),
                              {config.top_k, config.threads});
      record.valid_score = mean_score(*record.valid);
      if (!best_score || *record.valid_score > *best_score) {
        best_score = record.valid_score;
        best = params;
        result.best_epoch = epoch;
        stall = 0;
      } else if (++stall >= config.plateau_patience) {
        lr *= config.decay_factor;
        mlp_lr *= config.decay_factor;
        stall = 0;
      }
    }
    if (hooks.on_epoch) hooks.on_epoch(record);
    result.log.push_back(std::move(record));
  }

  result.params = best_score ? std::move(best) : std::move(params);
  if (!best_score) result.best_epoch = total_epochs;
  result.params.round_to_storage_precision();
  return result;
}

void write_epoch_csv(std::ostream& out, const EpochRecord& record, bool header) {
  if (header) {
    out << "epoch,stage,phase,loss,l1,l2,l3,lr,valid_mrr";
    for (QueryType t : kAllQueryTypes) out << ",valid_" << query_type_name(t);
    out << '\n';
  }
  out << record.epoch << ',' << stage_name(record.stage) << ',' << (record.warmup ? "warmup" : "joint") << ','
      << record.loss.total() << ',' << record.loss.embedding << ',' << record.loss.symbolic << ','
      << record.loss.aggregation << ',' << record.learning_rate << ',';
  if (record.valid_score) out << *record.valid_score;
  for (QueryType t : kAllQueryTypes) {
    out << ',';
    if (record.valid) {
      if (auto m = record.valid->mrr(t)) out << *m;
    }
  }
  out << '\n';
}

}  // namespace enesy
