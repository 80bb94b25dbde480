#pragma once

#include <chrono>
#include <iostream>
#include <map>
#include <string>

#include "enesy/errors.hpp"
#include "enesy/evaluator.hpp"
#include "enesy/sampler.hpp"
#include "enesy/synthetic.hpp"
#include "enesy/trainer.hpp"

namespace enesy::acceptance {

// Settings of the scaled-down ablation run: graph, benchmark and the two
// training stages.
struct DeskSettings {
  LatentGraphOptions graph;
  std::size_t eval_per_type = 1000;
  std::uint64_t benchmark_seed = 7;
  TrainConfig kge = TrainConfig::defaults(Stage::kKge);
  TrainConfig projection = TrainConfig::defaults(Stage::kProjection);
  std::size_t eval_top_k = 64;
  bool verbose = true;

  DeskSettings() {
    graph.entities = 2000;
    graph.relations = 12;
    graph.seed = 1;
    graph.jitter = 0.2;
    for (TrainConfig* c : {&kge, &projection}) {
      c->hp.dim = 64;
      c->hidden = 64;
      c->top_k = 64;
      c->batch_size = 256;
      c->negatives = 64;
    }
    kge.epochs = 80;
    kge.learning_rate = 0.01;
    kge.valid_every = 5;
    projection.epochs = 3;
    projection.learning_rate = 0.001;
    projection.mlp_learning_rate = 0.005;
    projection.select_mode = EvalMode::kFull;
  }

  // key=value overrides; keys prefixed "kge." / "proj." go to a stage, the
  // graph keys are entities, relations, latent_dim, max_tails, noise, jitter,
  // graph_seed, eval_per_type.
  void set(const std::string& key, const std::string& value) {
    if (key.rfind("kge.", 0) == 0) {
      kge.set(key.substr(4), value);
    } else if (key.rfind("proj.", 0) == 0) {
      projection.set(key.substr(5), value);
    } else if (key == "entities") {
      graph.entities = std::stoul(value);
    } else if (key == "relations") {
      graph.relations = std::stoul(value);
    } else if (key == "latent_dim") {
      graph.latent_dim = std::stoul(value);
    } else if (key == "max_tails") {
      graph.max_tails = std::stoul(value);
    } else if (key == "noise") {
      graph.noise_fraction = std::stod(value);
    } else if (key == "jitter") {
      graph.jitter = std::stod(value);
    } else if (key == "graph_seed") {
      graph.seed = std::stoull(value);
    } else if (key == "eval_per_type") {
      eval_per_type = std::stoul(value);
    } else if (key == "eval_top_k") {
      eval_top_k = std::stoul(value);
    } else {
      throw ConfigError("unknown desk setting '" + key + "'");
    }
  }
};

struct DeskOutcome {
  MetricsReport kge;        // stage-1 model, plain rotation composition
  MetricsReport neural;     // stage-2 model, embedding branch only
  MetricsReport symbolic;   // stage-2 model, fuzzy branch only
  MetricsReport traversal;  // exact walk over the reasoning graph
  MetricsReport full;       // stage-2 model, per-type tuned lambda
  LambdaTable lambdas;
  ModelParams stage1;
  ModelParams stage2;
  double seconds = 0.0;
};

inline DeskOutcome run_desk(const DeskSettings& s) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto log = [&](const std::string& msg) {
    if (!s.verbose) return;
    const double t = std::chrono::duration<double>(clock::now() - start).count();
    std::cerr << "[" << static_cast<int>(t) << "s] " << msg << std::endl;
  };

  const TripleStore store = generate_latent_graph(s.graph);
  log("graph: " + std::to_string(store.num_entities()) + " entities, " +
      std::to_string(store.graph_size(GraphView::kTest)) + " edges, " +
      std::to_string(store.split_triples(Split::kValid).size() + store.split_triples(Split::kTest).size()) +
      " held out");

  BenchmarkConfig bc = BenchmarkConfig::uniform(0, s.eval_per_type);
  const Benchmark bench = generate_benchmark(store, bc, s.benchmark_seed);
  log("benchmark: " + std::to_string(bench.valid.entries.size()) + " valid, " +
      std::to_string(bench.test.entries.size()) + " test queries");

  std::vector<BenchmarkEntry> valid_1p;
  for (const auto& e : bench.valid.entries) {
    if (e.type == QueryType::k1p) valid_1p.push_back(e);
  }
  const auto train = link_prediction_queries(store, GraphView::kTrain);

  StageHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r) {
    std::string msg = std::string(stage_name(r.stage)) + " epoch " + std::to_string(r.epoch) +
                      (r.warmup ? " warmup" : "") + " loss " + std::to_string(r.loss.total());
    if (r.valid_score) msg += " valid " + std::to_string(*r.valid_score);
    log(msg);
  };

  const ModelParams init = ModelParams::initialize(store.num_entities(), store.num_relations(), s.kge.hidden,
                                                   s.kge.hp, s.kge.seed);
  const ModelParams stage1 = run_stage(s.kge, store, train, valid_1p, init, hooks).params;
  const ModelParams stage2 = run_stage(s.projection, store, train, valid_1p, stage1, hooks).params;

  const AdjacencySet valid_graph(store, reasoning_view(Split::kValid));
  const AdjacencySet test_graph(store, reasoning_view(Split::kTest));
  const EvalOptions options{s.eval_top_k, 0};
  const LambdaTable neutral(0.5);

  DeskOutcome out;
  out.kge = evaluate(stage1, bench.test.entries, test_graph, EvalMode::kKge, neutral, options);
  out.neural = evaluate(stage2, bench.test.entries, test_graph, EvalMode::kNeuralOnly, neutral, options);
  out.symbolic = evaluate(stage2, bench.test.entries, test_graph, EvalMode::kSymbolicOnly, neutral, options);
  out.traversal = evaluate(stage2, bench.test.entries, test_graph, EvalMode::kTraversal, neutral, options);
  out.lambdas = tune_lambdas(stage2, bench.valid.entries, valid_graph, options);
  out.full = evaluate(stage2, bench.test.entries, test_graph, EvalMode::kFull, out.lambdas, options);
  out.stage1 = stage1;
  out.stage2 = stage2;
  out.seconds = std::chrono::duration<double>(clock::now() - start).count();
  log("evaluation done");
  return out;
}

}  // namespace enesy::acceptance
