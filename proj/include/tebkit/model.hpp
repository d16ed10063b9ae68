#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tebkit/dataset.hpp"
#include "tebkit/network.hpp"

namespace tebkit {

enum class ModelKind { logistic, mlp, convnet };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

/// Weight on the positive-class term of the BCE loss.
struct PositiveWeight {
  enum class Mode { none, fixed, automatic };
  Mode mode = Mode::none;
  double value = 1.0;

  static PositiveWeight none() { return {}; }
  static PositiveWeight fixed(double w) { return {Mode::fixed, w}; }
  /// sum(1 - y) / sum(y) over the training labels.
  static PositiveWeight automatic() { return {Mode::automatic, 1.0}; }
};

struct TrainConfig {
  ModelKind model_kind = ModelKind::logistic;
  double learning_rate = 0.001;
  int epochs = 6;
  std::size_t batch_size = 64;
  PositiveWeight positive_weight;
  std::uint64_t seed = 0;
  /// Hidden layers of width 256 for the MLP (1 or 2).
  int mlp_hidden_layers = 1;
  // Adam moments; beta2 = 0.9 rather than the customary 0.999.
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.9;
  double adam_epsilon = 1e-8;

  void validate() const;
};

/// Network topology plus the input transform applied before it.
struct Architecture {
  ModelKind kind = ModelKind::logistic;
  InputShape input;
  int mlp_hidden_layers = 1;
  /// Inputs are mapped to raw * input_scale - channel_offsets[channel].
  double input_scale = 1.0;
  std::vector<double> channel_offsets;
};

Network build_network(const Architecture& arch);

/// Trained soft-outcome model. Immutable once returned by train().
struct Predictor {
  Architecture architecture;
  Eigen::VectorXd parameters;
  TrainConfig train_config;
  std::vector<double> training_loss_trace;
  double positive_weight_used = 1.0;
};

/// Observations fed to a predictor: either a dense n x d real matrix or a
/// subset of an ImageSet (pixel bytes, scaled by the architecture).
class Observations {
 public:
  static Observations features(RowMatrix rows);
  static Observations scalars(std::span<const double> xs);
  static Observations images(std::shared_ptr<const ImageSet> images,
                             std::vector<std::size_t> indices);
  /// Image rows for image datasets, the x column otherwise.
  static Observations from_dataset(const Dataset& dataset, std::span<const std::size_t> idx);

  std::size_t size() const;
  InputShape shape() const { return shape_; }
  bool is_image() const { return images_ != nullptr; }
  /// Raw (unscaled) values of observations [begin, end).
  void rows(std::size_t begin, std::size_t end, RowMatrix& out) const;

 private:
  InputShape shape_;
  RowMatrix dense_;
  std::shared_ptr<const ImageSet> images_;
  std::vector<std::size_t> indices_;
};

/// Mini-batch Adam on the (weighted) BCE loss. Initialisation draws from
/// substream 0 of the seed; epoch e shuffles with substream e + 1.
Predictor train(const Observations& inputs, std::span<const std::uint8_t> labels,
                const TrainConfig& config);

/// Trains on the annotated view D_s of `dataset`.
Predictor train(const Dataset& dataset, const TrainConfig& config);

std::vector<double> predict_soft(const Predictor& predictor, const Observations& inputs);

/// 1[score >= k] elementwise; a score equal to k maps to 1.
std::vector<std::uint8_t> discretize(std::span<const double> scores, double threshold = 0.5);

struct PredictionMetrics {
  double bce = 0.0;
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
};

/// Probability clamp used by the BCE metric.
inline constexpr double kBceClamp = 1e-7;

/// BCE with probabilities clipped to [1e-7, 1 - 1e-7]; accuracy on 0.5-
/// thresholded scores; balanced accuracy as the mean recall over the classes
/// present in `labels`.
PredictionMetrics evaluate_predictions(std::span<const double> scores,
                                       std::span<const std::uint8_t> labels);

void save_predictor(const Predictor& predictor, const std::filesystem::path& path);
Predictor load_predictor(const std::filesystem::path& path);

/// Dataset CSV with an extra `score` column.
void write_scores_csv(const Dataset& dataset, std::span<const double> scores,
                      const std::filesystem::path& path);

}  // namespace tebkit
