#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "tebkit/error.hpp"
#include "tebkit/format.hpp"
#include "tebkit/harness.hpp"

namespace tebkit {

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::appendix_b_convergence: return "appendix_b_convergence";
    case ExperimentKind::causalmnist_bias: return "causalmnist_bias";
    case ExperimentKind::custom: return "custom";
  }
  return "?";
}

ExperimentKind parse_experiment_kind(const std::string& text) {
  if (text == "appendix_b_convergence" || text == "convergence") {
    return ExperimentKind::appendix_b_convergence;
  }
  if (text == "causalmnist_bias" || text == "causalmnist") return ExperimentKind::causalmnist_bias;
  if (text == "custom") return ExperimentKind::custom;
  throw ConfigError("unknown experiment '" + text + "'");
}

SchemeSpec standard_scheme(const std::string& name, std::size_t n_few, std::size_t n_many) {
  SchemeSpec s;
  s.name = name;
  if (name == "random_few" || name == "random_many") {
    s.kind = SamplingKind::random;
  } else if (name == "biased_few" || name == "biased_many") {
    s.kind = SamplingKind::covariate_biased;
    s.bias_value = 0.0;  // black pen only
  } else {
    throw ConfigError("unknown scheme '" + name +
                      "' (expected random_few, biased_few, random_many, biased_many or "
                      "name:kind:n_s[:bias_value])");
  }
  s.n_annotated = name.ends_with("_few") ? n_few : n_many;
  return s;
}

RunConfig default_convergence_config() {
  RunConfig c;
  c.experiment = ExperimentKind::appendix_b_convergence;
  c.seeds.clear();
  for (std::uint64_t s = 0; s < 50; ++s) c.seeds.push_back(s);
  c.train.model_kind = ModelKind::logistic;
  c.train.learning_rate = 0.01;
  c.train.epochs = 20;
  c.train.batch_size = 128;
  return c;
}

RunConfig default_causalmnist_config() {
  RunConfig c;
  c.experiment = ExperimentKind::causalmnist_bias;
  c.seeds.clear();
  for (std::uint64_t s = 0; s < 100; ++s) c.seeds.push_back(s);
  for (const char* name : {"random_few", "biased_few", "random_many", "biased_many"}) {
    c.schemes.push_back(standard_scheme(name));
  }
  c.train.model_kind = ModelKind::convnet;
  c.train.learning_rate = 0.001;
  c.train.epochs = 6;
  c.train.batch_size = 64;
  return c;
}

namespace {

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    const auto piece = trim(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (!piece.empty()) out.emplace_back(piece);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : split(text, ',')) {
    const auto dots = part.find("..");
    if (dots != std::string::npos) {
      const auto lo = parse_uint(part.substr(0, dots));
      const auto hi = parse_uint(part.substr(dots + 2));
      if (hi < lo) throw ConfigError("empty seed range '" + part + "'");
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(parse_uint(part));
    }
  }
  return seeds;
}

std::string scheme_to_text(const SchemeSpec& s) {
  return s.name + ":" + to_string(s.kind) + ":" + std::to_string(s.n_annotated) + ":" +
         format_double(s.bias_value);
}

PositiveWeight parse_positive_weight(const std::string& text) {
  if (text == "none" || text == "no") return PositiveWeight::none();
  if (text == "auto" || text == "automatic") return PositiveWeight::automatic();
  return PositiveWeight::fixed(parse_double(text));
}

std::string positive_weight_text(const PositiveWeight& w) {
  switch (w.mode) {
    case PositiveWeight::Mode::none: return "none";
    case PositiveWeight::Mode::automatic: return "auto";
    case PositiveWeight::Mode::fixed: return format_double(w.value);
  }
  return "none";
}

}  // namespace

std::map<std::string, std::string> RunConfig::parse_text(const std::string& text) {
  std::map<std::string, std::string> values;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    std::string_view body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key=value", lineno);
    const auto key = std::string(trim(body.substr(0, eq)));
    if (key.empty()) throw ParseError("empty key", lineno);
    values[key] = std::string(trim(body.substr(eq + 1)));
  }
  return values;
}

std::map<std::string, std::string> RunConfig::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str());
}

RunConfig RunConfig::from_map(const std::map<std::string, std::string>& values) {
  static const std::set<std::string> known = {
      "experiment", "seeds",   "seed_count",   "p_T",        "sigma2_Y",   "sizes",
      "mnist_images", "mnist_labels", "d",     "schemes",    "n_few",      "n_many",
      "validation_size", "model", "lr",       "epochs",     "batch_size", "positive_weight",
      "mlp_hidden_layers", "threshold", "out", "workers"};
  for (const auto& [k, v] : values) {
    if (!known.contains(k)) throw ConfigError("unknown config key '" + k + "'");
  }
  auto get = [&](const std::string& key) -> const std::string* {
    const auto it = values.find(key);
    return it == values.end() ? nullptr : &it->second;
  };

  ExperimentKind kind = ExperimentKind::appendix_b_convergence;
  if (const auto* v = get("experiment")) kind = parse_experiment_kind(*v);
  // "custom" runs the CausalMNIST pipeline with user-defined schemes.
  RunConfig c = kind == ExperimentKind::appendix_b_convergence ? default_convergence_config()
                                                               : default_causalmnist_config();
  c.experiment = kind;

  try {
    if (const auto* v = get("seed_count")) {
      c.seeds.clear();
      const auto count = parse_uint(*v);
      for (std::uint64_t s = 0; s < count; ++s) c.seeds.push_back(s);
    }
    if (const auto* v = get("seeds")) c.seeds = parse_seeds(*v);
    if (const auto* v = get("p_T")) c.p_treat = parse_double(*v);
    if (const auto* v = get("sigma2_Y")) c.noise_var = parse_double(*v);
    if (const auto* v = get("sizes")) {
      c.sample_sizes.clear();
      for (const auto& part : split(*v, ',')) c.sample_sizes.push_back(parse_uint(part));
    }
    if (const auto* v = get("mnist_images")) c.mnist_images = *v;
    if (const auto* v = get("mnist_labels")) c.mnist_labels = *v;
    if (const auto* v = get("d")) c.threshold_digit = int(parse_uint(*v));

    std::size_t n_few = 1800, n_many = 12000;
    if (const auto* v = get("n_few")) n_few = parse_uint(*v);
    if (const auto* v = get("n_many")) n_many = parse_uint(*v);
    if (get("schemes") || get("n_few") || get("n_many")) {
      std::vector<std::string> names;
      if (const auto* v = get("schemes")) {
        names = split(*v, ',');
      } else {
        for (const auto& s : c.schemes) names.push_back(s.name);
      }
      c.schemes.clear();
      for (const auto& name : names) {
        const auto parts = split(name, ':');
        if (parts.size() == 1) {
          c.schemes.push_back(standard_scheme(name, n_few, n_many));
        } else if (parts.size() == 3 || parts.size() == 4) {
          SchemeSpec s;
          s.name = parts[0];
          s.kind = parse_sampling_kind(parts[1]);
          s.n_annotated = parse_uint(parts[2]);
          if (parts.size() == 4) s.bias_value = parse_double(parts[3]);
          c.schemes.push_back(s);
        } else {
          throw ConfigError("scheme '" + name + "' must be a standard name or name:kind:n_s[:bias]");
        }
      }
    }
    if (const auto* v = get("validation_size")) c.validation_size = parse_uint(*v);
    if (const auto* v = get("model")) c.train.model_kind = parse_model_kind(*v);
    if (const auto* v = get("lr")) c.train.learning_rate = parse_double(*v);
    if (const auto* v = get("epochs")) c.train.epochs = int(parse_uint(*v));
    if (const auto* v = get("batch_size")) c.train.batch_size = parse_uint(*v);
    if (const auto* v = get("positive_weight")) c.train.positive_weight = parse_positive_weight(*v);
    if (const auto* v = get("mlp_hidden_layers")) c.train.mlp_hidden_layers = int(parse_uint(*v));
    if (const auto* v = get("threshold")) c.threshold = parse_double(*v);
    if (const auto* v = get("out")) c.output_dir = *v;
    if (const auto* v = get("workers")) c.workers = parse_uint(*v);
  } catch (const ParseError& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
  c.validate();
  return c;
}

void RunConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seed list must be nonempty");
  std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size()) throw ConfigError("seed list contains duplicates");
  train.validate();
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0,1]");
  if (experiment == ExperimentKind::appendix_b_convergence) {
    ScmConfig scm{p_treat, noise_var, 1, 0};
    scm.validate();
    if (sample_sizes.empty()) throw ConfigError("sizes must be nonempty");
    for (auto n : sample_sizes) {
      if (n < 2) throw ConfigError("every sample size must be >= 2");
    }
  }
  if (experiment != ExperimentKind::appendix_b_convergence) {
    try {
      build_population(threshold_digit);
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
    if (schemes.empty()) throw ConfigError("schemes must be nonempty");
    std::set<std::string> names;
    for (const auto& s : schemes) {
      if (!names.insert(s.name).second) throw ConfigError("duplicate scheme '" + s.name + "'");
      if (s.n_annotated == 0) throw ConfigError("scheme '" + s.name + "' has n_s = 0");
    }
  }
}

std::map<std::string, std::string> RunConfig::canonical() const {
  std::map<std::string, std::string> m;
  m["experiment"] = to_string(experiment);
  std::vector<std::string> seed_text;
  for (auto s : seeds) seed_text.push_back(std::to_string(s));
  m["seeds"] = join(seed_text, ',');
  m["model"] = to_string(train.model_kind);
  m["lr"] = format_double(train.learning_rate);
  m["epochs"] = std::to_string(train.epochs);
  m["batch_size"] = std::to_string(train.batch_size);
  m["positive_weight"] = positive_weight_text(train.positive_weight);
  m["mlp_hidden_layers"] = std::to_string(train.mlp_hidden_layers);
  m["adam"] = format_double(train.adam_beta1) + "," + format_double(train.adam_beta2) + "," +
              format_double(train.adam_epsilon);
  m["threshold"] = format_double(threshold);
  if (experiment == ExperimentKind::appendix_b_convergence) {
    m["p_T"] = format_double(p_treat);
    m["sigma2_Y"] = format_double(noise_var);
    std::vector<std::string> sizes;
    for (auto n : sample_sizes) sizes.push_back(std::to_string(n));
    m["sizes"] = join(sizes, ',');
  } else {
    m["d"] = std::to_string(threshold_digit);
    std::vector<std::string> sch;
    for (const auto& s : schemes) sch.push_back(scheme_to_text(s));
    m["schemes"] = join(sch, ',');
    m["validation_size"] = validation_size ? std::to_string(*validation_size) : "n_s";
    m["mnist_images"] = mnist_images.filename().string();
    m["mnist_labels"] = mnist_labels.filename().string();
  }
  return m;
}

std::string RunConfig::hash() const {
  std::string text;
  for (const auto& [k, v] : canonical()) text += k + "=" + v + "\n";
  return fnv1a_hex(text);
}

}  // namespace tebkit
