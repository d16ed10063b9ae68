#include "tebkit/model.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>

#include "tebkit/error.hpp"
#include "tebkit/format.hpp"
#include "tebkit/rng.hpp"

namespace tebkit {

namespace {

constexpr std::size_t kConvFilters1 = 20;
constexpr std::size_t kConvFilters2 = 50;
constexpr std::size_t kConvKernel = 5;
constexpr std::size_t kConvHidden = 500;
constexpr std::size_t kMlpWidth = 256;
constexpr std::size_t kInferenceBatch = 128;

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::logistic: return "logistic";
    case ModelKind::mlp: return "mlp";
    case ModelKind::convnet: return "convnet";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "logistic") return ModelKind::logistic;
  if (text == "mlp") return ModelKind::mlp;
  if (text == "convnet") return ModelKind::convnet;
  throw ConfigError("unknown model kind '" + text + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (positive_weight.mode == PositiveWeight::Mode::fixed && !(positive_weight.value > 0.0)) {
    throw ConfigError("positive_weight must be > 0");
  }
  if (model_kind == ModelKind::mlp && (mlp_hidden_layers < 1 || mlp_hidden_layers > 2)) {
    throw ConfigError("mlp_hidden_layers must be 1 or 2");
  }
}

Network build_network(const Architecture& arch) {
  std::vector<std::unique_ptr<Layer>> layers;
  const std::size_t in = arch.input.size();
  switch (arch.kind) {
    case ModelKind::logistic:
      layers.push_back(make_dense(in, 1));
      break;
    case ModelKind::mlp: {
      std::size_t width = in;
      for (int i = 0; i < arch.mlp_hidden_layers; ++i) {
        layers.push_back(make_dense(width, kMlpWidth));
        layers.push_back(make_relu(kMlpWidth));
        width = kMlpWidth;
      }
      layers.push_back(make_dense(width, 1));
      break;
    }
    case ModelKind::convnet: {
      InputShape shape = arch.input;
      for (std::size_t filters : {kConvFilters1, kConvFilters2}) {
        layers.push_back(make_conv2d(shape, filters, kConvKernel));
        shape = {filters, shape.rows - kConvKernel + 1, shape.cols - kConvKernel + 1};
        layers.push_back(make_relu(shape.size()));
        layers.push_back(make_maxpool2(shape));
        shape = {filters, shape.rows / 2, shape.cols / 2};
      }
      layers.push_back(make_dense(shape.size(), kConvHidden));
      layers.push_back(make_relu(kConvHidden));
      layers.push_back(make_dense(kConvHidden, 1));
      break;
    }
  }
  return Network(std::move(layers));
}

Observations Observations::features(RowMatrix rows) {
  Observations o;
  o.shape_ = {1, 1, static_cast<std::size_t>(rows.cols())};
  o.dense_ = std::move(rows);
  return o;
}

Observations Observations::scalars(std::span<const double> xs) {
  RowMatrix m(xs.size(), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) m(i, 0) = xs[i];
  return features(std::move(m));
}

Observations Observations::images(std::shared_ptr<const ImageSet> images,
                                  std::vector<std::size_t> indices) {
  if (!images) throw ShapeError("null image set");
  for (auto i : indices) {
    if (i >= images->count) throw ShapeError("image index out of range");
  }
  Observations o;
  o.shape_ = {images->channels, images->rows, images->cols};
  o.images_ = std::move(images);
  o.indices_ = std::move(indices);
  return o;
}

Observations Observations::from_dataset(const Dataset& dataset,
                                        std::span<const std::size_t> idx) {
  if (dataset.images()) {
    std::vector<std::size_t> rows;
    rows.reserve(idx.size());
    for (auto i : idx) rows.push_back(static_cast<std::size_t>(dataset[i].x));
    return images(dataset.shared_images(), std::move(rows));
  }
  std::vector<double> xs;
  xs.reserve(idx.size());
  for (auto i : idx) xs.push_back(dataset[i].x);
  return scalars(xs);
}

std::size_t Observations::size() const {
  return images_ ? indices_.size() : static_cast<std::size_t>(dense_.rows());
}

void Observations::rows(std::size_t begin, std::size_t end, RowMatrix& out) const {
  out.resize(end - begin, shape_.size());
  if (!images_) {
    out = dense_.middleRows(begin, end - begin);
    return;
  }
  for (std::size_t r = begin; r < end; ++r) {
    const auto img = images_->image(indices_[r]);
    for (std::size_t k = 0; k < img.size(); ++k) out(r - begin, k) = img[k];
  }
}

namespace {

void apply_input_transform(const Architecture& arch, RowMatrix& batch) {
  if (arch.input_scale != 1.0) batch *= arch.input_scale;
  if (arch.channel_offsets.empty()) return;
  const std::size_t plane = arch.input.rows * arch.input.cols;
  for (std::size_t c = 0; c < arch.input.channels; ++c) {
    batch.middleCols(c * plane, plane).array() -= arch.channel_offsets[c];
  }
}

Architecture make_architecture(const Observations& inputs, const TrainConfig& config) {
  Architecture arch;
  arch.kind = config.model_kind;
  arch.input = inputs.shape();
  arch.mlp_hidden_layers = config.mlp_hidden_layers;
  if (config.model_kind == ModelKind::convnet && !inputs.is_image()) {
    throw ShapeError("convnet requires image observations");
  }
  if (inputs.is_image()) {
    // Scale pixels to [0,1] and centre each channel on the training mean.
    arch.input_scale = 1.0 / 255.0;
    const std::size_t plane = arch.input.rows * arch.input.cols;
    std::vector<double> sums(arch.input.channels, 0.0);
    RowMatrix batch;
    for (std::size_t begin = 0; begin < inputs.size(); begin += kInferenceBatch) {
      const auto end = std::min(inputs.size(), begin + kInferenceBatch);
      inputs.rows(begin, end, batch);
      for (std::size_t c = 0; c < arch.input.channels; ++c) {
        sums[c] += batch.middleCols(c * plane, plane).sum();
      }
    }
    for (auto& s : sums) s = s * arch.input_scale / double(inputs.size() * plane);
    arch.channel_offsets = std::move(sums);
  }
  return arch;
}

}  // namespace

Predictor train(const Observations& inputs, std::span<const std::uint8_t> labels,
                const TrainConfig& config) {
  config.validate();
  const std::size_t n = inputs.size();
  if (n == 0) throw TrainingError("training set is empty", -1);
  if (labels.size() != n) throw ShapeError("label count does not match observation count");

  double positive_weight = 1.0;
  if (config.positive_weight.mode == PositiveWeight::Mode::fixed) {
    positive_weight = config.positive_weight.value;
  } else if (config.positive_weight.mode == PositiveWeight::Mode::automatic) {
    const double positives = std::accumulate(labels.begin(), labels.end(), 0.0);
    if (positives == 0.0 || positives == double(n)) {
      throw TrainingError("automatic positive weight needs both classes in D_s", -1);
    }
    positive_weight = (double(n) - positives) / positives;
  }

  Predictor result;
  result.architecture = make_architecture(inputs, config);
  result.train_config = config;
  result.positive_weight_used = positive_weight;
  Network net = build_network(result.architecture);

  const Rng root(config.seed);
  Rng init_rng = root.substream(0);
  Eigen::VectorXd params = net.initial_parameters(init_rng);
  Eigen::VectorXd first_moment = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd second_moment = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd grad;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RowMatrix batch;
  RowMatrix row;
  std::vector<double> batch_labels;
  long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng = root.substream(static_cast<std::uint64_t>(epoch) + 1);
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const auto end = std::min(n, begin + config.batch_size);
      batch.resize(end - begin, inputs.shape().size());
      batch_labels.resize(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        inputs.rows(order[k], order[k] + 1, row);
        batch.row(k - begin) = row.row(0);
        batch_labels[k - begin] = labels[order[k]];
      }
      apply_input_transform(result.architecture, batch);
      const double loss = net.loss_and_gradient(params, batch, batch_labels, positive_weight, grad);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        throw TrainingError("non-finite loss in epoch " + std::to_string(epoch), epoch);
      }
      epoch_loss += loss * double(end - begin);

      ++step;
      first_moment = config.adam_beta1 * first_moment + (1.0 - config.adam_beta1) * grad;
      second_moment = config.adam_beta2 * second_moment +
                      (1.0 - config.adam_beta2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(config.adam_beta1, double(step));
      const double c2 = 1.0 - std::pow(config.adam_beta2, double(step));
      params.array() -= config.learning_rate * (first_moment.array() / c1) /
                        ((second_moment.array() / c2).sqrt() + config.adam_epsilon);
    }
    epoch_loss /= double(n);
    if (!std::isfinite(epoch_loss)) {
      throw TrainingError("non-finite loss in epoch " + std::to_string(epoch), epoch);
    }
    result.training_loss_trace.push_back(epoch_loss);
  }
  result.parameters = std::move(params);
  return result;
}

Predictor train(const Dataset& dataset, const TrainConfig& config) {
  const auto idx = dataset.annotated();
  const auto labels = dataset.labels(idx);
  return train(Observations::from_dataset(dataset, idx), labels, config);
}

std::vector<double> predict_soft(const Predictor& predictor, const Observations& inputs) {
  if (!(inputs.shape() == predictor.architecture.input)) {
    throw ShapeError("observation shape does not match the predictor's input shape");
  }
  Network net = build_network(predictor.architecture);
  std::vector<double> scores(inputs.size());
  RowMatrix batch;
  for (std::size_t begin = 0; begin < inputs.size(); begin += kInferenceBatch) {
    const auto end = std::min(inputs.size(), begin + kInferenceBatch);
    inputs.rows(begin, end, batch);
    apply_input_transform(predictor.architecture, batch);
    const Eigen::VectorXd z = net.logits(predictor.parameters, batch);
    for (std::size_t i = begin; i < end; ++i) scores[i] = sigmoid(z[i - begin]);
  }
  return scores;
}

std::vector<std::uint8_t> discretize(std::span<const double> scores, double threshold) {
  std::vector<std::uint8_t> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] >= threshold ? 1 : 0;
  return out;
}

PredictionMetrics evaluate_predictions(std::span<const double> scores,
                                       std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("evaluate_predictions: " + std::to_string(scores.size()) + " scores vs " +
                     std::to_string(labels.size()) + " labels");
  }
  if (scores.empty()) throw EstimationError("evaluate_predictions: no samples");
  double bce = 0.0;
  std::size_t correct = 0;
  std::size_t hits[2] = {0, 0};
  std::size_t counts[2] = {0, 0};
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] > 1) throw DomainError("evaluate_predictions: labels must be 0 or 1");
    const double p = std::clamp(scores[i], kBceClamp, 1.0 - kBceClamp);
    bce -= labels[i] ? std::log(p) : std::log(1.0 - p);
    const std::uint8_t hard = scores[i] >= 0.5 ? 1 : 0;
    const bool hit = hard == labels[i];
    correct += hit;
    counts[labels[i]] += 1;
    hits[labels[i]] += hit;
  }
  PredictionMetrics m;
  m.bce = bce / double(scores.size());
  m.accuracy = double(correct) / double(scores.size());
  double recall_sum = 0.0;
  int classes = 0;
  for (int c = 0; c < 2; ++c) {
    if (counts[c] == 0) continue;
    recall_sum += double(hits[c]) / double(counts[c]);
    ++classes;
  }
  m.balanced_accuracy = recall_sum / classes;
  return m;
}

namespace {

const char* weight_mode_name(PositiveWeight::Mode mode) {
  switch (mode) {
    case PositiveWeight::Mode::none: return "none";
    case PositiveWeight::Mode::fixed: return "fixed";
    case PositiveWeight::Mode::automatic: return "automatic";
  }
  return "none";
}

PositiveWeight::Mode parse_weight_mode(const std::string& s) {
  if (s == "none") return PositiveWeight::Mode::none;
  if (s == "fixed") return PositiveWeight::Mode::fixed;
  if (s == "automatic") return PositiveWeight::Mode::automatic;
  throw ParseError("unknown positive weight mode '" + s + "'", 0);
}

}  // namespace

void save_predictor(const Predictor& predictor, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  const auto& a = predictor.architecture;
  j["format"] = "tebkit-predictor/1";
  j["architecture"] = {
      {"kind", to_string(a.kind)},
      {"input_shape", {a.input.channels, a.input.rows, a.input.cols}},
      {"mlp_hidden_layers", a.mlp_hidden_layers},
      {"input_scale", a.input_scale},
      {"channel_offsets", a.channel_offsets},
      {"layers", build_network(a).layer_names()},
  };
  const auto& c = predictor.train_config;
  j["train_config"] = {
      {"model_kind", to_string(c.model_kind)},
      {"learning_rate", c.learning_rate},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"positive_weight_mode", weight_mode_name(c.positive_weight.mode)},
      {"positive_weight_value", c.positive_weight.value},
      {"seed", c.seed},
      {"mlp_hidden_layers", c.mlp_hidden_layers},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"adam_epsilon", c.adam_epsilon},
  };
  j["positive_weight_used"] = predictor.positive_weight_used;
  j["training_loss_trace"] = predictor.training_loss_trace;
  j["parameters"] = std::vector<double>(predictor.parameters.data(),
                                        predictor.parameters.data() + predictor.parameters.size());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump() << '\n';
}

Predictor load_predictor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    Predictor p;
    const auto& a = j.at("architecture");
    p.architecture.kind = parse_model_kind(a.at("kind").get<std::string>());
    const auto shape = a.at("input_shape").get<std::vector<std::size_t>>();
    if (shape.size() != 3) throw ParseError("input_shape must have 3 entries", 0);
    p.architecture.input = {shape[0], shape[1], shape[2]};
    p.architecture.mlp_hidden_layers = a.at("mlp_hidden_layers").get<int>();
    p.architecture.input_scale = a.at("input_scale").get<double>();
    p.architecture.channel_offsets = a.at("channel_offsets").get<std::vector<double>>();
    const auto& c = j.at("train_config");
    p.train_config.model_kind = parse_model_kind(c.at("model_kind").get<std::string>());
    p.train_config.learning_rate = c.at("learning_rate").get<double>();
    p.train_config.epochs = c.at("epochs").get<int>();
    p.train_config.batch_size = c.at("batch_size").get<std::size_t>();
    p.train_config.positive_weight.mode =
        parse_weight_mode(c.at("positive_weight_mode").get<std::string>());
    p.train_config.positive_weight.value = c.at("positive_weight_value").get<double>();
    p.train_config.seed = c.at("seed").get<std::uint64_t>();
    p.train_config.mlp_hidden_layers = c.at("mlp_hidden_layers").get<int>();
    p.train_config.adam_beta1 = c.at("adam_beta1").get<double>();
    p.train_config.adam_beta2 = c.at("adam_beta2").get<double>();
    p.train_config.adam_epsilon = c.at("adam_epsilon").get<double>();
    p.positive_weight_used = j.at("positive_weight_used").get<double>();
    p.training_loss_trace = j.at("training_loss_trace").get<std::vector<double>>();
    const auto params = j.at("parameters").get<std::vector<double>>();
    p.parameters = Eigen::Map<const Eigen::VectorXd>(params.data(), params.size());
    if (static_cast<std::size_t>(p.parameters.size()) !=
        build_network(p.architecture).param_count()) {
      throw ParseError("parameter count does not match architecture", 0);
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("predictor JSON: ") + e.what(), 0);
  }
}

void write_scores_csv(const Dataset& dataset, std::span<const double> scores,
                      const std::filesystem::path& path) {
  if (scores.size() != dataset.size()) throw ShapeError("one score per sample required");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "w,t,x,y,s,score\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset[i];
    out << format_double(s.w) << ',' << int(s.t) << ',' << format_double(s.x) << ','
        << int(s.y) << ',' << int(s.s) << ',' << format_double(scores[i]) << '\n';
  }
}

}  // namespace tebkit
