#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "enesy/kg_store.hpp"

namespace enesy {

// k complex numbers stored as 2k interleaved reals (re0, im0, re1, im1, ...).
using ComplexEmbedding = std::vector<double>;
using EmbeddingView = std::span<const double>;

// Hyperparameters stored alongside the weights.
struct Hyperparameters {
  std::uint32_t dim = 64;      // complex dimension k
  double gamma = 24.0;         // similarity margin
  double alpha = 10.0;         // negation level
  double theta = 1e-10;        // log clamp of the symbolic loss
  double lambda = 0.5;         // default ensemble weight
};

// Two-layer scalar gate: 2k -> hidden (ReLU) -> 1 (logistic).
class GateMLP {
 public:
  GateMLP() = default;
  GateMLP(std::size_t input_dim, std::size_t hidden);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden() const { return hidden_; }

  double forward(EmbeddingView input) const;
  // Forward pass that also returns the pre-activation hidden layer and the
  // output logit, for backpropagation.
  double forward(EmbeddingView input, std::vector<double>& pre_activation, double& logit) const;

  // Accumulates d(out)/d(weights) * upstream into `grad` (laid out like
  // parameters()) and d(out)/d(input) * upstream into `input_grad`.
  void backward(EmbeddingView input, std::span<const double> pre_activation, double output, double upstream,
                std::span<double> grad, std::span<double> input_grad) const;

  // Flat parameter layout: w1 (hidden x input, row-major), b1, w2, b2.
  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }

  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const { return hidden_ * input_dim_; }
  std::size_t w2_offset() const { return b1_offset() + hidden_; }
  std::size_t b2_offset() const { return w2_offset() + hidden_; }

 private:
  std::size_t input_dim_ = 0;
  std::size_t hidden_ = 0;
  std::vector<double> params_;
};

struct ModelParams {
  Hyperparameters hp;
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
  std::vector<double> entity_table;     // num_entities x 2k
  std::vector<double> relation_phases;  // num_relations x k
  GateMLP mlp;

  std::size_t dim() const { return hp.dim; }
  EmbeddingView entity(EntityId e) const;
  std::span<double> entity_mut(EntityId e);
  std::span<const double> phases(RelationId r) const;
  std::span<double> phases_mut(RelationId r);

  // Entity re/im uniform in [-gamma/k, gamma/k], phases uniform in [-pi, pi],
  // gate weights small and random with zero biases.
  static ModelParams initialize(std::size_t num_entities, std::size_t num_relations, std::size_t hidden,
                                const Hyperparameters& hp, std::uint64_t seed);

  // Rounds every weight through float32 so the in-memory model equals what a
  // checkpoint stores.
  void round_to_storage_precision();

  bool operator==(const ModelParams& other) const;
};

// v_h * e^{i theta}, element-wise.
ComplexEmbedding project_neural(EmbeddingView head, std::span<const double> phases);
// gamma - ||x - y||_1 over all 2k real components.
double similarity(EmbeddingView x, EmbeddingView y, double gamma);
std::vector<double> score_all(EmbeddingView v, const ModelParams& params);
double gate(const GateMLP& mlp, EmbeddingView entity_embedding);

double sigmoid(double x);

// Checkpoint: "ENSY", version, k, |V|, |R|, hidden (u32), then float32
// entity table, phase table, gate w1, b1, w2, b2, then gamma, alpha, theta,
// lambda as float64. All little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;
std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params);
ModelParams decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace enesy
