#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tebkit/rng.hpp"

namespace tebkit {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Observation layout: channels x rows x cols, flattened channel-major.
struct InputShape {
  std::size_t channels = 1;
  std::size_t rows = 1;
  std::size_t cols = 1;
  std::size_t size() const { return channels * rows * cols; }
  bool operator==(const InputShape&) const = default;
};

/// A layer maps a batch (one observation per row) to a batch. Parameters
/// live in the owning network's flat vector; layers only know their slice.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string name() const = 0;
  virtual std::size_t input_size() const = 0;
  virtual std::size_t output_size() const = 0;
  virtual std::size_t param_count() const { return 0; }
  virtual void init(std::span<double> /*params*/, Rng& /*rng*/) const {}
  /// Computes `out` and caches what backward needs.
  virtual void forward(const double* params, const RowMatrix& in, RowMatrix& out) = 0;
  /// Accumulates into grad_params and writes grad_in (if requested).
  virtual void backward(const double* params, const RowMatrix& in, const RowMatrix& grad_out,
                        RowMatrix* grad_in, double* grad_params) = 0;
};

std::unique_ptr<Layer> make_dense(std::size_t in, std::size_t out);
std::unique_ptr<Layer> make_relu(std::size_t size);
/// Valid (no padding) stride-1 convolution with square kernels.
std::unique_ptr<Layer> make_conv2d(InputShape in, std::size_t filters, std::size_t kernel);
/// 2x2 max-pooling with stride 2; odd trailing rows/cols are dropped.
std::unique_ptr<Layer> make_maxpool2(InputShape in);

/// Feed-forward stack producing one logit per observation.
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<std::unique_ptr<Layer>> layers);

  std::size_t param_count() const { return total_params_; }
  std::size_t input_size() const;
  std::vector<std::string> layer_names() const;

  /// Seeded uniform fan-in initialisation of a fresh parameter vector.
  Eigen::VectorXd initial_parameters(Rng& rng) const;

  Eigen::VectorXd logits(const Eigen::VectorXd& params, const RowMatrix& inputs);

  /// Mean weighted binary cross-entropy on logits,
  ///   -[w * y * log sigmoid(z) + (1 - y) * log(1 - sigmoid(z))],
  /// with its gradient written to `grad` (resized to param_count()).
  double loss_and_gradient(const Eigen::VectorXd& params, const RowMatrix& inputs,
                           std::span<const double> labels, double positive_weight,
                           Eigen::VectorXd& grad);

  /// Same loss without the gradient; used by finite-difference checks.
  double loss(const Eigen::VectorXd& params, const RowMatrix& inputs,
              std::span<const double> labels, double positive_weight);

 private:
  void run_forward(const Eigen::VectorXd& params, const RowMatrix& inputs);

  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<std::size_t> offsets_;
  std::size_t total_params_ = 0;
  std::vector<RowMatrix> activations_;
};

double sigmoid(double z);

}  // namespace tebkit
