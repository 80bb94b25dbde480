#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "enesy/errors.hpp"
#include "enesy/evaluator.hpp"
#include "enesy/executor.hpp"
#include "enesy/sampler.hpp"
#include "enesy/synthetic.hpp"
#include "enesy/trainer.hpp"

namespace enesy::cli {

namespace {

// Raised for bad flag combinations discovered after parsing.
struct UsageError : Error {
  using Error::Error;
};

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

GraphView parse_view(const std::string& name) {
  if (name == "train") return GraphView::kTrain;
  if (name == "valid") return GraphView::kValid;
  if (name == "test") return GraphView::kTest;
  throw UsageError("unknown graph view '" + name + "'");
}

std::filesystem::path benchmark_file(const std::filesystem::path& dir, Split split) {
  return dir / ("queries_" + std::string(split_name(split)) + ".txt");
}

struct Common {
  std::string data;
  bool strict_vocab = false;
  std::size_t threads = 0;
};

void add_data_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--data", c.data, "Directory with train.txt, valid.txt, test.txt")
      ->required()
      ->check(CLI::ExistingDirectory);
  cmd->add_flag("--strict-vocab", c.strict_vocab, "Reject valid/test labels unseen in train and split overlap");
}

TripleStore load_store(const Common& c) { return TripleStore::load_directory(c.data, c.strict_vocab); }

void print_store_summary(std::ostream& out, const TripleStore& store) {
  out << "entities\t" << store.num_entities() << '\n'
      << "relations\t" << store.num_relations() << '\n'
      << "triples_train\t" << store.split_triples(Split::kTrain).size() << '\n'
      << "triples_valid\t" << store.split_triples(Split::kValid).size() << '\n'
      << "triples_test\t" << store.split_triples(Split::kTest).size() << '\n'
      << "graph_train\t" << store.graph_size(GraphView::kTrain) << '\n'
      << "graph_valid\t" << store.graph_size(GraphView::kValid) << '\n'
      << "graph_test\t" << store.graph_size(GraphView::kTest) << '\n';
}

// ---- ingest -------------------------------------------------------------

struct IngestArgs {
  Common common;
  std::string out;
};

int cmd_ingest(const IngestArgs& a, std::ostream& out) {
  const auto store = load_store(a.common);
  store.check_invariants();
  print_store_summary(out, store);
  if (!a.out.empty()) {
    store.save_directory(a.out);
    out << "written\t" << a.out << '\n';
  }
  return 0;
}

// ---- synth --------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::string kind = "latent";
  LatentGraphOptions latent;
  RandomGraphOptions random;
  std::uint64_t seed = 0;
  double valid_fraction = 0.05;
  double test_fraction = 0.05;
};

int cmd_synth(SynthArgs a, std::ostream& out, std::ostream& err) {
  err << "seed = " << a.seed << '\n';
  TripleStore store;
  if (a.kind == "latent") {
    a.latent.seed = a.seed;
    a.latent.valid_fraction = a.valid_fraction;
    a.latent.test_fraction = a.test_fraction;
    store = generate_latent_graph(a.latent);
  } else if (a.kind == "random") {
    a.random.seed = a.seed;
    a.random.entities = a.latent.entities;
    a.random.relations = a.latent.relations;
    a.random.valid_fraction = a.valid_fraction;
    a.random.test_fraction = a.test_fraction;
    store = generate_random_graph(a.random);
  } else {
    throw UsageError("--kind must be latent or random");
  }
  store.save_directory(a.out);
  print_store_summary(out, store);
  return 0;
}

// ---- sample -------------------------------------------------------------

struct SampleArgs {
  Common common;
  std::string out;
  std::size_t per_type = 100;
  std::optional<std::size_t> train_per_type;
  std::optional<std::size_t> eval_per_type;
  std::uint64_t seed = 0;
  std::size_t max_answers = 100;
};

int cmd_sample(const SampleArgs& a, std::ostream& out, std::ostream& err) {
  const auto store = load_store(a.common);
  auto config = BenchmarkConfig::uniform(a.train_per_type.value_or(a.per_type), a.eval_per_type.value_or(a.per_type));
  config.sampler.max_answers = a.max_answers;
  err << "seed = " << a.seed << '\n';
  const auto benchmark = generate_benchmark(store, config, a.seed);
  write_benchmark(benchmark, store, a.out);
  write_stats(out, benchmark, store);
  for (Split s : {Split::kTrain, Split::kValid, Split::kTest}) {
    for (const auto& [type, missing] : benchmark.split(s).shortfall) {
      err << "warning: " << split_name(s) << ' ' << query_type_name(type) << " short by " << missing << '\n';
    }
  }
  return 0;
}

// ---- train --------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string stage;
  std::string config_file;
  std::vector<std::string> overrides;
  std::string benchmark;
  std::string ckpt_in;
  std::string ckpt_out;
  std::string log;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const auto stage = parse_stage(a.stage);
  if (!stage) throw UsageError("--stage must be kge, proj or finetune");
  TrainConfig config = TrainConfig::defaults(*stage);
  if (!a.config_file.empty()) config.load(a.config_file);
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.seed) config.set("seed", std::to_string(*a.seed));
  config.stage = *stage;
  config.validate();

  const auto store = load_store(a.common);
  ModelParams params;
  if (!a.ckpt_in.empty()) {
    params = load_checkpoint(a.ckpt_in);
    if (params.num_entities != store.num_entities() || params.num_relations != store.num_relations()) {
      throw UsageError("checkpoint vocabulary does not match --data");
    }
    config.hp.dim = params.hp.dim;
    config.hidden = params.mlp.hidden();
  } else {
    if (*stage != Stage::kKge) throw UsageError("--ckpt-in is required for stage " + a.stage);
    params = ModelParams::initialize(store.num_entities(), store.num_relations(), config.hidden, config.hp,
                                     config.seed);
  }
  std::ostringstream resolved;
  config.write(resolved);
  err << resolved.str();

  std::vector<TrainingQuery> train;
  std::vector<BenchmarkEntry> valid;
  if (*stage == Stage::kFinetune) {
    if (a.benchmark.empty()) throw UsageError("stage finetune needs --benchmark");
    train = training_queries(read_benchmark_file(benchmark_file(a.benchmark, Split::kTrain), store));
  } else {
    train = link_prediction_queries(store, GraphView::kTrain);
  }
  if (!a.benchmark.empty() && std::filesystem::exists(benchmark_file(a.benchmark, Split::kValid))) {
    valid = read_benchmark_file(benchmark_file(a.benchmark, Split::kValid), store);
    if (*stage != Stage::kFinetune) std::erase_if(valid, [](const auto& e) { return e.type != QueryType::k1p; });
  }
  err << "training queries = " << train.size() << ", validation queries = " << valid.size() << '\n';

  const std::filesystem::path ckpt_out = a.ckpt_out;
  {
    auto cfg = open_output(ckpt_out.string() + ".config");
    cfg << resolved.str();
  }
  const std::filesystem::path log_path = a.log.empty() ? ckpt_out.string() + ".log.csv" : a.log;
  auto log = open_output(log_path);
  bool header = true;
  const auto start = std::chrono::steady_clock::now();
  StageHooks hooks;
  hooks.dump_path = ckpt_out.string() + ".nan_batch.txt";
  hooks.on_epoch = [&](const EpochRecord& r) {
    write_epoch_csv(log, r, header);
    header = false;
    log.flush();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    err << "[" << std::fixed << std::setprecision(1) << secs << "s] epoch " << r.epoch << (r.warmup ? " warmup" : "")
        << " loss " << std::setprecision(5) << r.loss.total();
    if (r.valid_score) err << " valid_mrr " << *r.valid_score;
    err << '\n';
    err.unsetf(std::ios::fixed);
  };
  const auto result = run_stage(config, store, train, valid, std::move(params), hooks);
  save_checkpoint(result.params, ckpt_out);
  out << "checkpoint\t" << ckpt_out.string() << '\n';
  if (result.best_epoch) out << "best_epoch\t" << *result.best_epoch << '\n';
  return 0;
}

// ---- eval ---------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string benchmark;
  std::string ckpt;
  std::string mode = "full";
  std::string split = "test";
  std::string lambda_file;
  std::string tune_lambda;
  std::string report;
  std::string csv;
  std::string rank_dump;
  std::size_t top_k = 64;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const auto mode = parse_eval_mode(a.mode);
  if (!mode) throw UsageError("--mode must be full, neural, symbolic, traversal or kge");
  Split split;
  if (a.split == "valid") {
    split = Split::kValid;
  } else if (a.split == "test") {
    split = Split::kTest;
  } else {
    throw UsageError("--split must be valid or test");
  }
  if (!a.lambda_file.empty() && !a.tune_lambda.empty()) {
    throw UsageError("--lambda-file and --tune-lambda are exclusive");
  }
  const auto store = load_store(a.common);
  const auto params = load_checkpoint(a.ckpt);
  if (params.num_entities != store.num_entities() || params.num_relations != store.num_relations()) {
    throw UsageError("checkpoint vocabulary does not match --data");
  }
  const EvalOptions options{a.top_k, a.common.threads};
  LambdaTable lambdas(params.hp.lambda);
  if (!a.lambda_file.empty()) lambdas = LambdaTable::load(a.lambda_file);
  if (!a.tune_lambda.empty()) {
    const auto valid = read_benchmark_file(benchmark_file(a.benchmark, Split::kValid), store);
    const AdjacencySet graph(store, reasoning_view(Split::kValid));
    lambdas = tune_lambdas(params, valid, graph, options);
    lambdas.save(a.tune_lambda);
    err << "tuned lambdas written to " << a.tune_lambda << '\n';
  }
  const auto entries = read_benchmark_file(benchmark_file(a.benchmark, split), store);
  const AdjacencySet graph(store, reasoning_view(split));
  const auto report = evaluate(params, entries, graph, *mode, lambdas, options);
  write_report_table(out, report);
  if (!a.report.empty()) {
    auto f = open_output(a.report);
    write_report_table(f, report);
  }
  if (!a.csv.empty()) {
    auto f = open_output(a.csv);
    write_report_csv(f, report);
  }
  if (!a.rank_dump.empty()) {
    auto f = open_output(a.rank_dump);
    write_rank_dump(f, report);
  }
  return 0;
}

// ---- answer -------------------------------------------------------------

struct AnswerArgs {
  Common common;
  std::string ckpt;
  std::string query;
  std::string query_file;
  std::optional<double> lambda;
  std::size_t top_k = 64;
  std::size_t show = 10;
  bool trace = false;
  double threshold = 0.1;
  std::string graph = "test";
};

void answer_one(const std::string& text, const AnswerArgs& a, const TripleStore& store, const ModelParams& params,
                const Executor& executor, std::ostream& out) {
  const auto query = parse_query(text, store, ParseMode::kFree);
  const auto result = executor.execute(query);
  const double lambda = a.lambda.value_or(params.hp.lambda);
  const auto ranked = rank_answers(result.root, params, {lambda}, CrispSet{params.num_entities, {}});
  out << "query\t" << serialize_query(query, store) << '\n';
  const std::size_t n = std::min(a.show, ranked.size());
  for (std::size_t i = 0; i < n; ++i) {
    out << (i + 1) << '\t' << store.entities().label(ranked[i].first) << '\t' << std::setprecision(6)
        << ranked[i].second << '\n';
  }
  if (a.trace) {
    const auto gold = crisp_execute_all(query, executor.adjacency());
    const auto report = inspect(result.trace, query, a.threshold, &gold);
    write_inspection(out, report, query, store);
  }
}

int cmd_answer(const AnswerArgs& a, std::ostream& out) {
  if (a.query.empty() == a.query_file.empty()) throw UsageError("give exactly one of --query and --query-file");
  if (a.lambda && (*a.lambda < 0.0 || *a.lambda > 1.0)) throw UsageError("--lambda must lie in [0, 1]");
  const auto store = load_store(a.common);
  const auto params = load_checkpoint(a.ckpt);
  if (params.num_entities != store.num_entities() || params.num_relations != store.num_relations()) {
    throw UsageError("checkpoint vocabulary does not match --data");
  }
  const AdjacencySet graph(store, parse_view(a.graph));
  const Executor executor(params, graph, a.top_k);
  if (!a.query.empty()) {
    answer_one(a.query, a, store, params, executor, out);
  } else {
    std::ifstream in(a.query_file);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      answer_one(line, a, store, params, executor, out);
    }
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural-symbolic query answering over incomplete knowledge graphs", "enesy"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: ENESY_THREADS or all cores)");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Load triple files and print split statistics");
  add_data_flags(c_ingest, ingest.common);
  c_ingest->add_option("--out", ingest.out, "Write normalized splits and vocabularies here");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic graph with held-out splits");
  c_synth->add_option("--out", synth.out)->required();
  c_synth->add_option("--kind", synth.kind, "latent or random")->capture_default_str();
  c_synth->add_option("--entities", synth.latent.entities)->capture_default_str();
  c_synth->add_option("--relations", synth.latent.relations)->capture_default_str();
  c_synth->add_option("--latent-dim", synth.latent.latent_dim)->capture_default_str();
  c_synth->add_option("--max-tails", synth.latent.max_tails)->capture_default_str();
  c_synth->add_option("--noise", synth.latent.noise_fraction)->capture_default_str();
  c_synth->add_option("--edges", synth.random.edges, "Edge count for --kind random")->capture_default_str();
  c_synth->add_option("--valid-fraction", synth.valid_fraction)->capture_default_str();
  c_synth->add_option("--test-fraction", synth.test_fraction)->capture_default_str();
  c_synth->add_option("--seed", synth.seed)->capture_default_str();

  SampleArgs sample;
  auto* c_sample = app.add_subcommand("sample", "Sample and label benchmark queries for all splits");
  add_data_flags(c_sample, sample.common);
  c_sample->add_option("--out", sample.out)->required();
  c_sample->add_option("--per-type", sample.per_type, "Queries per type and split")->capture_default_str();
  c_sample->add_option("--train-per-type", sample.train_per_type);
  c_sample->add_option("--eval-per-type", sample.eval_per_type);
  c_sample->add_option("--seed", sample.seed)->capture_default_str();
  c_sample->add_option("--max-answers", sample.max_answers, "0 disables the cap")->capture_default_str();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Run one training stage");
  add_data_flags(c_train, train.common);
  c_train->add_option("--stage", train.stage)->required()->check(CLI::IsMember({"kge", "proj", "finetune"}));
  c_train->add_option("--config", train.config_file)->check(CLI::ExistingFile);
  c_train->add_option("--set", train.overrides, "key=value override, repeatable");
  c_train->add_option("--benchmark", train.benchmark)->check(CLI::ExistingDirectory);
  c_train->add_option("--ckpt-in", train.ckpt_in)->check(CLI::ExistingFile);
  c_train->add_option("--ckpt-out", train.ckpt_out)->required();
  c_train->add_option("--log", train.log, "Per-epoch CSV (default: CKPT_OUT.log.csv)");
  c_train->add_option("--seed", train.seed);

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Filtered MRR / Hits@K of a checkpoint on a benchmark split");
  add_data_flags(c_eval, eval.common);
  c_eval->add_option("--benchmark", eval.benchmark)->required()->check(CLI::ExistingDirectory);
  c_eval->add_option("--ckpt", eval.ckpt)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--mode", eval.mode)
      ->check(CLI::IsMember({"full", "neural", "symbolic", "traversal", "kge"}))
      ->capture_default_str();
  c_eval->add_option("--split", eval.split)->check(CLI::IsMember({"valid", "test"}))->capture_default_str();
  c_eval->add_option("--lambda-file", eval.lambda_file)->check(CLI::ExistingFile);
  c_eval->add_option("--tune-lambda", eval.tune_lambda, "Tune lambda per type on valid, save here, then evaluate");
  c_eval->add_option("--report", eval.report, "Also write the text table here");
  c_eval->add_option("--csv", eval.csv);
  c_eval->add_option("--rank-dump", eval.rank_dump, "Per-query metrics CSV");
  c_eval->add_option("--topk", eval.top_k)->capture_default_str();

  AnswerArgs answer;
  auto* c_answer = app.add_subcommand("answer", "Rank answers of a query");
  add_data_flags(c_answer, answer.common);
  c_answer->add_option("--ckpt", answer.ckpt)->required()->check(CLI::ExistingFile);
  c_answer->add_option("--query", answer.query, "S-expression, e.g. \"(p r0 (a e0))\"");
  c_answer->add_option("--query-file", answer.query_file)->check(CLI::ExistingFile);
  c_answer->add_option("--lambda", answer.lambda);
  c_answer->add_option("--topk", answer.top_k)->capture_default_str();
  c_answer->add_option("--show", answer.show, "Answers to print")->capture_default_str();
  c_answer->add_flag("--trace", answer.trace, "Print per-node inspection");
  c_answer->add_option("--threshold", answer.threshold)->capture_default_str();
  c_answer->add_option("--graph", answer.graph, "train, valid or test")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  for (Common* c : {&ingest.common, &sample.common, &train.common, &eval.common, &answer.common}) c->threads = threads;
  try {
    if (*c_ingest) return cmd_ingest(ingest, out);
    if (*c_synth) return cmd_synth(synth, out, err);
    if (*c_sample) return cmd_sample(sample, out, err);
    if (*c_train) return cmd_train(train, out, err);
    if (*c_eval) return cmd_eval(eval, out, err);
    if (*c_answer) return cmd_answer(answer, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace enesy::cli
