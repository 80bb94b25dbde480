#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "enesy/entangle.hpp"
#include "enesy/evaluator.hpp"
#include "enesy/sampler.hpp"

namespace enesy {

enum class Stage { kKge, kProjection, kFinetune };

std::string_view stage_name(Stage stage);
std::optional<Stage> parse_stage(std::string_view name);

struct TrainConfig {
  Stage stage = Stage::kKge;
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  std::size_t negatives = 128;
  double learning_rate = 1e-4;
  double mlp_learning_rate = 0.0;  // 0 = learning_rate
  std::size_t plateau_patience = 3;
  double decay_factor = 0.5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t top_k = 512;
  // Epochs of gate-only training on the aggregation loss before the joint
  // projection stage.
  std::size_t mlp_warmup_epochs = 1;
  // Opposite sign convention: the answer is pushed away, negatives pulled in.
  bool flipped_signs = false;
  // One training example per (query, answer) pair instead of per query.
  bool per_answer_examples = true;
  EvalMode select_mode = EvalMode::kKge;
  std::size_t valid_every = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 0;

  // Model shape for training from scratch; gamma/alpha/theta also override a
  // loaded checkpoint when set explicitly.
  Hyperparameters hp{1024, 24.0, 10.0, 1e-10, 0.5};
  std::size_t hidden = 1024;

  std::set<std::string> explicit_keys;

  // Published defaults for a stage.
  static TrainConfig defaults(Stage stage);

  // key=value; unknown keys and malformed values raise ConfigError.
  void set(const std::string& key, const std::string& value);
  void parse(std::istream& in, const std::string& source = "<config>");
  void load(const std::filesystem::path& path);
  void write(std::ostream& out) const;
  void validate() const;

  double mlp_rate() const { return mlp_learning_rate > 0.0 ? mlp_learning_rate : learning_rate; }
  bool is_set(const std::string& key) const { return explicit_keys.count(key) > 0; }
};

// Sparse gradient: rows of the entity and phase tables that were touched,
// plus the whole gate MLP.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ModelParams& params);

  std::span<double> entity(EntityId e);
  std::span<double> relation(RelationId r);
  std::span<double> mlp();

  const std::unordered_map<EntityId, std::vector<double>>& entity_rows() const { return entities_; }
  const std::unordered_map<RelationId, std::vector<double>>& relation_rows() const { return relations_; }
  const std::vector<double>& mlp_grad() const { return mlp_; }
  bool mlp_touched() const { return !mlp_.empty(); }

  void clear();
  bool finite() const;

 private:
  std::size_t entity_width_ = 0;
  std::size_t phase_width_ = 0;
  std::size_t mlp_size_ = 0;
  std::unordered_map<EntityId, std::vector<double>> entities_;
  std::unordered_map<RelationId, std::vector<double>> relations_;
  std::vector<double> mlp_;
};

// Gate values computed once per batch, with the upstream derivative of every
// use accumulated so the MLP backward runs once per entity.
class GateCache {
 public:
  explicit GateCache(const ModelParams& params) : params_(params) {}

  double value(EntityId e);
  void add_upstream(EntityId e, double d);
  // Pushes accumulated derivatives into the MLP weights and entity rows, then
  // resets the upstream terms.
  void backpropagate(Gradients& grads);

 private:
  struct Slot {
    double gate = 0.0;
    double upstream = 0.0;
  };
  const ModelParams& params_;
  std::unordered_map<EntityId, Slot> slots_;
  std::vector<EntityId> order_;
};

struct LossGradient {
  double loss = 0.0;
  std::vector<double> d_embedding;  // w.r.t. the embedding argument
  std::vector<double> d_fuzzy;      // dense, w.r.t. the fuzzy argument
  Gradients params;
};

// -log s(S(v_q, v_e)) - 1/n sum log s(-S(v_q, v_e')); with flipped signs the
// two terms use -S and +S instead.
LossGradient loss_embedding(EmbeddingView v_q, EntityId positive, std::span<const EntityId> negatives,
                            const ModelParams& params, bool strict_signs = false);
// -log s(log max(p_q[positive], theta))
LossGradient loss_symbolic(const FuzzyVector& p_q, EntityId positive, double theta);
// -log s(S(v_t, sum_i p'_i gate(e_i) v_{e_i})); flipped signs use -S.
LossGradient loss_mlp(EmbeddingView v_t, const FuzzyVector& p_prime, const ModelParams& params,
                      bool strict_signs = false);

// n ids drawn uniformly from the entities outside `answers`.
std::vector<EntityId> negative_sample(const CrispSet& answers, std::size_t n, std::mt19937_64& rng);

enum class ForwardMode {
  kRotation,   // plain relation rotations, projections only
  kEntangled,  // full dual-state execution
};

struct LossOptions {
  ForwardMode mode = ForwardMode::kEntangled;
  bool embedding = true;    // L1 at the root
  bool symbolic = true;     // L2 at the root
  bool aggregation = false; // L3 at every projection
  bool strict_signs = false;
  std::size_t top_k = 64;
};

struct LossTerms {
  double embedding = 0.0;
  double symbolic = 0.0;
  double aggregation = 0.0;

  double total() const { return embedding + symbolic + aggregation; }
  LossTerms& operator+=(const LossTerms& o);
};

// Differentiable execution of one query. forward() produces the same states
// as Executor::execute; backward() adds the configured losses and
// accumulates their gradients.
class QueryTape {
 public:
  QueryTape(const ModelParams& params, const AdjacencySet& adjacency, const LossOptions& options, GateCache& gates);

  const DualState& forward(const ComputationGraph& query);
  const DualState& state(std::size_t node) const { return nodes_.at(node).out; }

  // Returns the unscaled loss terms; gradients are multiplied by `scale`.
  // Gate derivatives stay in the GateCache until its backpropagate().
  LossTerms backward(EntityId positive, std::span<const EntityId> negatives, Gradients& grads, double scale = 1.0);

 private:
  struct Node {
    DualState out;
    // projection
    ComplexEmbedding v_in_rotated;  // v_t
    FuzzyVector p_t;
    double p_t_mass = 0.0;
    FuzzyVector p_prime;
    double merge_mass = 0.0;
    // intersection / union: running fold results
    std::vector<FuzzyVector> fold;
  };

  void aggregate_backward(const FuzzyVector& p, std::span<const double> d_v, std::vector<double>& d_p,
                          Gradients& grads);

  const ModelParams& params_;
  const AdjacencySet& adjacency_;
  LossOptions options_;
  GateCache& gates_;
  const ComputationGraph* query_ = nullptr;
  std::vector<Node> nodes_;
};

// Plain sum of the configured losses for one example plus its gradient
// (gate terms already pushed into the MLP and entity rows).
LossTerms example_gradient(const ComputationGraph& query, EntityId positive, std::span<const EntityId> negatives,
                           const ModelParams& params, const AdjacencySet& adjacency, const LossOptions& options,
                           Gradients& grads);

struct LearningRates {
  double entity = 0.0;
  double relation = 0.0;
  double mlp = 0.0;  // 0 freezes a group
};

// Adam applied only to the rows present in a gradient.
class LazyAdam {
 public:
  LazyAdam(const ModelParams& params, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

  void step(ModelParams& params, const Gradients& grads, const LearningRates& rates);
  std::size_t steps() const { return steps_; }

 private:
  double beta1_;
  double beta2_;
  double epsilon_;
  std::size_t steps_ = 0;
  std::vector<double> m_entity_, v_entity_;
  std::vector<double> m_phase_, v_phase_;
  std::vector<double> m_mlp_, v_mlp_;
};

struct TrainingQuery {
  ComputationGraph query;
  QueryType type = QueryType::kOther;
  CrispSet answers;
};

// Training queries from benchmark entries (answers = easy + hard).
std::vector<TrainingQuery> training_queries(std::span<const BenchmarkEntry> entries);
// One 1p query per (head, relation) pair of a graph view.
std::vector<TrainingQuery> link_prediction_queries(const TripleStore& store, GraphView view = GraphView::kTrain);

struct EpochRecord {
  std::size_t epoch = 0;
  Stage stage = Stage::kKge;
  bool warmup = false;
  LossTerms loss;  // means over examples
  double learning_rate = 0.0;
  std::optional<MetricsReport> valid;
  std::optional<double> valid_score;
};

struct StageResult {
  ModelParams params;  // best by validation score, rounded to storage precision
  std::vector<EpochRecord> log;
  std::optional<std::size_t> best_epoch;
};

struct StageHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  // Where the last batch is written when a loss turns non-finite.
  std::filesystem::path dump_path;
};

StageResult run_stage(const TrainConfig& config, const TripleStore& store, std::span<const TrainingQuery> train,
                      std::span<const BenchmarkEntry> valid, ModelParams params, const StageHooks& hooks = {});

void write_epoch_csv(std::ostream& out, const EpochRecord& record, bool header);

}  // namespace enesy
