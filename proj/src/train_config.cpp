#include <charconv>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "enesy/errors.hpp"
#include "enesy/trainer.hpp"

namespace enesy {

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::kKge:
      return "kge";
    case Stage::kProjection:
      return "proj";
    case Stage::kFinetune:
      return "finetune";
  }
  return "?";
}

std::optional<Stage> parse_stage(std::string_view name) {
  if (name == "kge") return Stage::kKge;
  if (name == "proj" || name == "projection") return Stage::kProjection;
  if (name == "finetune") return Stage::kFinetune;
  return std::nullopt;
}

TrainConfig TrainConfig::defaults(Stage stage) {
  TrainConfig c;
  c.stage = stage;
  switch (stage) {
    case Stage::kKge:
      c.learning_rate = 1e-4;
      c.batch_size = 64;
      c.negatives = 128;
      c.epochs = 100;
      c.select_mode = EvalMode::kKge;
      break;
    case Stage::kProjection:
      c.learning_rate = 1e-5;
      c.batch_size = 64;
      c.negatives = 128;
      c.epochs = 10;
      c.select_mode = EvalMode::kFull;
      break;
    case Stage::kFinetune:
      c.learning_rate = 2e-7;
      c.batch_size = 16;
      c.negatives = 32;
      c.epochs = 10;
      c.per_answer_examples = false;
      c.select_mode = EvalMode::kFull;
      break;
  }
  return c;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t to_count(const std::string& key, const std::string& value) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + value + "'");
  }
  return out;
}

double to_real(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double out = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(out)) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config key '" + key + "' expects true or false, got '" + value + "'");
}

std::string real_text(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

}  // namespace

void TrainConfig::set(const std::string& raw_key, const std::string& raw_value) {
  std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  if (key == "lr") key = "learning_rate";
  if (key == "stage") {
    auto s = parse_stage(value);
    if (!s) throw ConfigError("unknown stage '" + value + "'");
    stage = *s;
  } else if (key == "epochs") {
    epochs = to_count(key, value);
  } else if (key == "batch_size") {
    batch_size = to_count(key, value);
  } else if (key == "negatives") {
    negatives = to_count(key, value);
  } else if (key == "learning_rate") {
    learning_rate = to_real(key, value);
  } else if (key == "mlp_learning_rate") {
    mlp_learning_rate = to_real(key, value);
  } else if (key == "plateau_patience") {
    plateau_patience = to_count(key, value);
  } else if (key == "decay_factor") {
    decay_factor = to_real(key, value);
  } else if (key == "beta1") {
    beta1 = to_real(key, value);
  } else if (key == "beta2") {
    beta2 = to_real(key, value);
  } else if (key == "epsilon") {
    epsilon = to_real(key, value);
  } else if (key == "top_k") {
    top_k = to_count(key, value);
  } else if (key == "mlp_warmup_epochs") {
    mlp_warmup_epochs = to_count(key, value);
  } else if (key == "flipped_signs") {
    flipped_signs = to_bool(key, value);
  } else if (key == "per_answer_examples") {
    per_answer_examples = to_bool(key, value);
  } else if (key == "select_mode") {
    auto m = parse_eval_mode(value);
    if (!m) throw ConfigError("unknown select_mode '" + value + "'");
    select_mode = *m;
  } else if (key == "valid_every") {
    valid_every = to_count(key, value);
  } else if (key == "seed") {
    seed = to_count(key, value);
  } else if (key == "threads") {
    threads = to_count(key, value);
  } else if (key == "dim") {
    hp.dim = static_cast<std::uint32_t>(to_count(key, value));
  } else if (key == "hidden") {
    hidden = to_count(key, value);
  } else if (key == "gamma") {
    hp.gamma = to_real(key, value);
  } else if (key == "alpha") {
    hp.alpha = to_real(key, value);
  } else if (key == "theta") {
    hp.theta = to_real(key, value);
  } else if (key == "lambda") {
    hp.lambda = to_real(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
  explicit_keys.insert(key);
}

void TrainConfig::parse(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  parse(in, path.string());
}

void TrainConfig::write(std::ostream& out) const {
  out << "stage = " << stage_name(stage) << '\n'
      << "epochs = " << epochs << '\n'
      << "batch_size = " << batch_size << '\n'
      << "negatives = " << negatives << '\n'
      << "learning_rate = " << real_text(learning_rate) << '\n'
      << "mlp_learning_rate = " << real_text(mlp_rate()) << '\n'
      << "plateau_patience = " << plateau_patience << '\n'
      << "decay_factor = " << real_text(decay_factor) << '\n'
      << "beta1 = " << real_text(beta1) << '\n'
      << "beta2 = " << real_text(beta2) << '\n'
      << "epsilon = " << real_text(epsilon) << '\n'
      << "top_k = " << top_k << '\n'
      << "mlp_warmup_epochs = " << mlp_warmup_epochs << '\n'
      << "flipped_signs = " << (flipped_signs ? "true" : "false") << '\n'
      << "per_answer_examples = " << (per_answer_examples ? "true" : "false") << '\n'
      << "select_mode = " << eval_mode_name(select_mode) << '\n'
      << "valid_every = " << valid_every << '\n'
      << "seed = " << seed << '\n'
      << "threads = " << threads << '\n'
      << "dim = " << hp.dim << '\n'
      << "hidden = " << hidden << '\n'
      << "gamma = " << real_text(hp.gamma) << '\n'
      << "alpha = " << real_text(hp.alpha) << '\n'
      << "theta = " << real_text(hp.theta) << '\n'
      << "lambda = " << real_text(hp.lambda) << '\n';
}

void TrainConfig::validate() const {
  if (negatives < 1) throw ConfigError("negatives must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(learning_rate > 0.0) || mlp_learning_rate < 0.0) throw ConfigError("learning rates must be positive");
  if (!(decay_factor > 0.0) || decay_factor > 1.0) throw ConfigError("decay_factor must lie in (0, 1]");
  if (top_k < 1) throw ConfigError("top_k must be at least 1");
  if (valid_every < 1) throw ConfigError("valid_every must be at least 1");
  if (hp.dim < 1 || hidden < 1) throw ConfigError("dim and hidden must be positive");
  if (!(hp.theta > 0.0)) throw ConfigError("theta must be positive");
  if (!(hp.alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (hp.lambda < 0.0 || hp.lambda > 1.0) throw ConfigError("lambda must lie in [0, 1]");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("Adam betas must lie in [0, 1)");
}

}  // namespace enesy
