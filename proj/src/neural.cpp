#include "enesy/neural.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

#include "enesy/errors.hpp"

namespace enesy {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

GateMLP::GateMLP(std::size_t input_dim, std::size_t hidden)
    : input_dim_(input_dim), hidden_(hidden), params_(hidden * input_dim + 2 * hidden + 1, 0.0) {}

double GateMLP::forward(EmbeddingView input) const {
  std::vector<double> pre;
  double logit = 0.0;
  return forward(input, pre, logit);
}

double GateMLP::forward(EmbeddingView input, std::vector<double>& pre_activation, double& logit) const {
  if (input.size() != input_dim_) {
    throw DomainError("gate input has " + std::to_string(input.size()) + " components, expected " +
                      std::to_string(input_dim_));
  }
  pre_activation.assign(hidden_, 0.0);
  const double* w1 = params_.data() + w1_offset();
  const double* b1 = params_.data() + b1_offset();
  const double* w2 = params_.data() + w2_offset();
  double z = params_[b2_offset()];
  for (std::size_t h = 0; h < hidden_; ++h) {
    const double* row = w1 + h * input_dim_;
    double a = b1[h];
    for (std::size_t i = 0; i < input_dim_; ++i) a += row[i] * input[i];
    pre_activation[h] = a;
    if (a > 0.0) z += w2[h] * a;
  }
  logit = z;
  return sigmoid(z);
}

void GateMLP::backward(EmbeddingView input, std::span<const double> pre_activation, double output,
                       double upstream, std::span<double> grad, std::span<double> input_grad) const {
  const double dz = upstream * output * (1.0 - output);
  const double* w1 = params_.data() + w1_offset();
  const double* w2 = params_.data() + w2_offset();
  grad[b2_offset()] += dz;
  for (std::size_t h = 0; h < hidden_; ++h) {
    const double a = pre_activation[h];
    if (a <= 0.0) continue;
    grad[w2_offset() + h] += dz * a;
    const double da = dz * w2[h];
    grad[b1_offset() + h] += da;
    double* grow = grad.data() + w1_offset() + h * input_dim_;
    const double* row = w1 + h * input_dim_;
    for (std::size_t i = 0; i < input_dim_; ++i) {
      grow[i] += da * input[i];
      input_grad[i] += da * row[i];
    }
  }
}

EmbeddingView ModelParams::entity(EntityId e) const {
  if (e >= num_entities) throw RangeError("entity " + std::to_string(e) + " out of range");
  return EmbeddingView(entity_table).subspan(std::size_t{e} * 2 * hp.dim, 2 * hp.dim);
}

std::span<double> ModelParams::entity_mut(EntityId e) {
  if (e >= num_entities) throw RangeError("entity " + std::to_string(e) + " out of range");
  return std::span<double>(entity_table).subspan(std::size_t{e} * 2 * hp.dim, 2 * hp.dim);
}

std::span<const double> ModelParams::phases(RelationId r) const {
  if (r >= num_relations) throw RangeError("relation " + std::to_string(r) + " out of range");
  return std::span<const double>(relation_phases).subspan(std::size_t{r} * hp.dim, hp.dim);
}

std::span<double> ModelParams::phases_mut(RelationId r) {
  if (r >= num_relations) throw RangeError("relation " + std::to_string(r) + " out of range");
  return std::span<double>(relation_phases).subspan(std::size_t{r} * hp.dim, hp.dim);
}

ModelParams ModelParams::initialize(std::size_t num_entities, std::size_t num_relations, std::size_t hidden,
                                    const Hyperparameters& hp, std::uint64_t seed) {
  if (hp.dim == 0) throw ConfigError("embedding dimension must be positive");
  ModelParams params;
  params.hp = hp;
  params.num_entities = num_entities;
  params.num_relations = num_relations;
  std::mt19937_64 rng(seed);
  const double range = hp.gamma / static_cast<double>(hp.dim);
  std::uniform_real_distribution<double> entity_dist(-range, range);
  params.entity_table.resize(num_entities * 2 * hp.dim);
  for (auto& x : params.entity_table) x = entity_dist(rng);
  std::uniform_real_distribution<double> phase_dist(-std::numbers::pi, std::numbers::pi);
  params.relation_phases.resize(num_relations * hp.dim);
  for (auto& x : params.relation_phases) x = phase_dist(rng);

  params.mlp = GateMLP(2 * hp.dim, hidden);
  auto& w = params.mlp.parameters();
  std::uniform_real_distribution<double> w1_dist(-1.0 / std::sqrt(2.0 * hp.dim), 1.0 / std::sqrt(2.0 * hp.dim));
  for (std::size_t i = params.mlp.w1_offset(); i < params.mlp.b1_offset(); ++i) w[i] = w1_dist(rng);
  const double w2_range = hidden > 0 ? 1.0 / std::sqrt(static_cast<double>(hidden)) : 0.0;
  std::uniform_real_distribution<double> w2_dist(-w2_range, w2_range);
  for (std::size_t i = params.mlp.w2_offset(); i < params.mlp.b2_offset(); ++i) w[i] = w2_dist(rng);
  return params;
}

void ModelParams::round_to_storage_precision() {
  auto round = [](std::vector<double>& values) {
    for (auto& x : values) x = static_cast<double>(static_cast<float>(x));
  };
  round(entity_table);
  round(relation_phases);
  round(mlp.parameters());
}

bool ModelParams::operator==(const ModelParams& other) const {
  return hp.dim == other.hp.dim && hp.gamma == other.hp.gamma && hp.alpha == other.hp.alpha &&
         hp.theta == other.hp.theta && hp.lambda == other.hp.lambda && num_entities == other.num_entities &&
         num_relations == other.num_relations && entity_table == other.entity_table &&
         relation_phases == other.relation_phases && mlp.hidden() == other.mlp.hidden() &&
         mlp.parameters() == other.mlp.parameters();
}

ComplexEmbedding project_neural(EmbeddingView head, std::span<const double> phases) {
  if (head.size() != 2 * phases.size()) {
    throw DomainError("rotation dimension mismatch: embedding has " + std::to_string(head.size() / 2) +
                      " complex components, relation has " + std::to_string(phases.size()));
  }
  ComplexEmbedding out(head.size());
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const double c = std::cos(phases[i]);
    const double s = std::sin(phases[i]);
    const double re = head[2 * i];
    const double im = head[2 * i + 1];
    out[2 * i] = re * c - im * s;
    out[2 * i + 1] = re * s + im * c;
  }
  return out;
}

double similarity(EmbeddingView x, EmbeddingView y, double gamma) {
  if (x.size() != y.size()) throw DomainError("similarity: dimension mismatch");
  double distance = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) distance += std::abs(x[i] - y[i]);
  return gamma - distance;
}

std::vector<double> score_all(EmbeddingView v, const ModelParams& params) {
  const std::size_t width = 2 * params.hp.dim;
  if (v.size() != width) throw DomainError("score_all: dimension mismatch");
  std::vector<double> scores(params.num_entities);
  const double* table = params.entity_table.data();
  for (std::size_t e = 0; e < params.num_entities; ++e) {
    const double* row = table + e * width;
    double distance = 0.0;
    for (std::size_t i = 0; i < width; ++i) distance += std::abs(v[i] - row[i]);
    scores[e] = params.hp.gamma - distance;
  }
  return scores;
}

double gate(const GateMLP& mlp, EmbeddingView entity_embedding) { return mlp.forward(entity_embedding); }

namespace {

constexpr char kMagic[4] = {'E', 'N', 'S', 'Y'};

class ByteWriter {
 public:
  void u32(std::uint32_t x) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void f32(double x) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(x))); }
  void f64(double x) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  void raw(const char* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("checkpoint truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return x;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  double f64() {
    need(8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return std::bit_cast<double>(x);
  }
  bool at_end() const { return pos_ == bytes_.size(); }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params) {
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(params.hp.dim);
  w.u32(static_cast<std::uint32_t>(params.num_entities));
  w.u32(static_cast<std::uint32_t>(params.num_relations));
  w.u32(static_cast<std::uint32_t>(params.mlp.hidden()));
  for (double x : params.entity_table) w.f32(x);
  for (double x : params.relation_phases) w.f32(x);
  for (double x : params.mlp.parameters()) w.f32(x);
  w.f64(params.hp.gamma);
  w.f64(params.hp.alpha);
  w.f64(params.hp.theta);
  w.f64(params.hp.lambda);
  return w.take();
}

ModelParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic)) throw FormatError("not an ENSY checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  ModelParams params;
  params.hp.dim = r.u32();
  params.num_entities = r.u32();
  params.num_relations = r.u32();
  const std::uint32_t hidden = r.u32();
  if (params.hp.dim == 0) throw FormatError("checkpoint has zero embedding dimension");
  params.entity_table.resize(params.num_entities * 2 * params.hp.dim);
  r.need(params.entity_table.size() * 4);
  for (auto& x : params.entity_table) x = r.f32();
  params.relation_phases.resize(params.num_relations * params.hp.dim);
  r.need(params.relation_phases.size() * 4);
  for (auto& x : params.relation_phases) x = r.f32();
  params.mlp = GateMLP(2 * params.hp.dim, hidden);
  r.need(params.mlp.parameters().size() * 4);
  for (auto& x : params.mlp.parameters()) x = r.f32();
  params.hp.gamma = r.f64();
  params.hp.alpha = r.f64();
  params.hp.theta = r.f64();
  params.hp.lambda = r.f64();
  if (!r.at_end()) throw FormatError("trailing bytes after checkpoint");
  return params;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace enesy
