#include "tebkit/network.hpp"

#include <cmath>
#include <limits>

#include "tebkit/error.hpp"

namespace tebkit {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

void uniform_fill(std::span<double> values, double bound, Rng& rng) {
  for (auto& v : values) v = (2.0 * rng.uniform() - 1.0) * bound;
}

class Dense final : public Layer {
 public:
  Dense(std::size_t in, std::size_t out) : in_(in), out_(out) {}
  std::string name() const override {
    return "dense(" + std::to_string(in_) + "->" + std::to_string(out_) + ")";
  }
  std::size_t input_size() const override { return in_; }
  std::size_t output_size() const override { return out_; }
  std::size_t param_count() const override { return out_ * in_ + out_; }

  void init(std::span<double> params, Rng& rng) const override {
    uniform_fill(params, 1.0 / std::sqrt(double(in_)), rng);
  }

  void forward(const double* params, const RowMatrix& in, RowMatrix& out) override {
    Eigen::Map<const RowMatrix> weight(params, out_, in_);
    Eigen::Map<const Eigen::RowVectorXd> bias(params + out_ * in_, out_);
    out.resize(in.rows(), out_);
    out.noalias() = in * weight.transpose();
    out.rowwise() += bias;
  }

  void backward(const double* params, const RowMatrix& in, const RowMatrix& grad_out,
                RowMatrix* grad_in, double* grad_params) override {
    Eigen::Map<const RowMatrix> weight(params, out_, in_);
    Eigen::Map<RowMatrix> grad_weight(grad_params, out_, in_);
    Eigen::Map<Eigen::RowVectorXd> grad_bias(grad_params + out_ * in_, out_);
    grad_weight.noalias() += grad_out.transpose() * in;
    grad_bias += grad_out.colwise().sum();
    if (grad_in) {
      grad_in->resize(in.rows(), in_);
      grad_in->noalias() = grad_out * weight;
    }
  }

 private:
  std::size_t in_;
  std::size_t out_;
};

class Relu final : public Layer {
 public:
  explicit Relu(std::size_t size) : size_(size) {}
  std::string name() const override { return "relu"; }
  std::size_t input_size() const override { return size_; }
  std::size_t output_size() const override { return size_; }

  void forward(const double*, const RowMatrix& in, RowMatrix& out) override {
    out = in.cwiseMax(0.0);
  }

  void backward(const double*, const RowMatrix& in, const RowMatrix& grad_out,
                RowMatrix* grad_in, double*) override {
    if (grad_in) *grad_in = (in.array() > 0.0).select(grad_out, 0.0);
  }

 private:
  std::size_t size_;
};

class Conv2d final : public Layer {
 public:
  Conv2d(InputShape in, std::size_t filters, std::size_t kernel)
      : in_(in), filters_(filters), kernel_(kernel) {
    if (kernel > in.rows || kernel > in.cols) throw ShapeError("conv kernel larger than input");
    out_rows_ = in.rows - kernel + 1;
    out_cols_ = in.cols - kernel + 1;
    patch_ = in.channels * kernel * kernel;
  }
  std::string name() const override {
    return "conv(" + std::to_string(filters_) + "x" + std::to_string(kernel_) + "x" +
           std::to_string(kernel_) + ")";
  }
  std::size_t input_size() const override { return in_.size(); }
  std::size_t output_size() const override { return filters_ * out_rows_ * out_cols_; }
  std::size_t param_count() const override { return filters_ * patch_ + filters_; }

  void init(std::span<double> params, Rng& rng) const override {
    uniform_fill(params, 1.0 / std::sqrt(double(patch_)), rng);
  }

  void forward(const double* params, const RowMatrix& in, RowMatrix& out) override {
    const auto batch = static_cast<std::size_t>(in.rows());
    const std::size_t positions = out_rows_ * out_cols_;
    im2col(in, batch);
    Eigen::Map<const RowMatrix> weight(params, filters_, patch_);
    Eigen::Map<const Eigen::VectorXd> bias(params + filters_ * patch_, filters_);
    RowMatrix response(filters_, batch * positions);
    response.noalias() = weight * columns_;
    response.colwise() += bias;
    out.resize(batch, output_size());
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t f = 0; f < filters_; ++f) {
        out.row(b).segment(f * positions, positions) =
            response.row(f).segment(b * positions, positions);
      }
    }
  }

  void backward(const double* params, const RowMatrix& in, const RowMatrix& grad_out,
                RowMatrix* grad_in, double* grad_params) override {
    const auto batch = static_cast<std::size_t>(in.rows());
    const std::size_t positions = out_rows_ * out_cols_;
    RowMatrix g(filters_, batch * positions);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t f = 0; f < filters_; ++f) {
        g.row(f).segment(b * positions, positions) =
            grad_out.row(b).segment(f * positions, positions);
      }
    }
    Eigen::Map<const RowMatrix> weight(params, filters_, patch_);
    Eigen::Map<RowMatrix> grad_weight(grad_params, filters_, patch_);
    Eigen::Map<Eigen::VectorXd> grad_bias(grad_params + filters_ * patch_, filters_);
    // columns_ still holds this batch's patches from forward().
    grad_weight.noalias() += g * columns_.transpose();
    grad_bias += g.rowwise().sum();
    if (!grad_in) return;
    RowMatrix grad_columns(patch_, batch * positions);
    grad_columns.noalias() = weight.transpose() * g;
    grad_in->setZero(batch, in_.size());
    for (std::size_t b = 0; b < batch; ++b) {
      double* dst = grad_in->row(b).data();
      for (std::size_t c = 0; c < in_.channels; ++c) {
        for (std::size_t ky = 0; ky < kernel_; ++ky) {
          for (std::size_t kx = 0; kx < kernel_; ++kx) {
            const std::size_t r = (c * kernel_ + ky) * kernel_ + kx;
            for (std::size_t oy = 0; oy < out_rows_; ++oy) {
              double* row = dst + c * in_.rows * in_.cols + (oy + ky) * in_.cols + kx;
              const double* src = &grad_columns(r, b * positions + oy * out_cols_);
              for (std::size_t ox = 0; ox < out_cols_; ++ox) {
                row[ox] += src[ox];
              }
            }
          }
        }
      }
    }
  }

 private:
  void im2col(const RowMatrix& in, std::size_t batch) {
    const std::size_t positions = out_rows_ * out_cols_;
    columns_.resize(patch_, batch * positions);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* src = in.row(b).data();
      for (std::size_t c = 0; c < in_.channels; ++c) {
        for (std::size_t ky = 0; ky < kernel_; ++ky) {
          for (std::size_t kx = 0; kx < kernel_; ++kx) {
            const std::size_t r = (c * kernel_ + ky) * kernel_ + kx;
            for (std::size_t oy = 0; oy < out_rows_; ++oy) {
              const double* line = src + c * in_.rows * in_.cols + (oy + ky) * in_.cols + kx;
              for (std::size_t ox = 0; ox < out_cols_; ++ox) {
                columns_(r, b * positions + oy * out_cols_ + ox) = line[ox];
              }
            }
          }
        }
      }
    }
  }

  InputShape in_;
  std::size_t filters_;
  std::size_t kernel_;
  std::size_t out_rows_ = 0;
  std::size_t out_cols_ = 0;
  std::size_t patch_ = 0;
  RowMatrix columns_;
};

class MaxPool2 final : public Layer {
 public:
  explicit MaxPool2(InputShape in) : in_(in), out_rows_(in.rows / 2), out_cols_(in.cols / 2) {}
  std::string name() const override { return "maxpool(2x2)"; }
  std::size_t input_size() const override { return in_.size(); }
  std::size_t output_size() const override { return in_.channels * out_rows_ * out_cols_; }

  void forward(const double*, const RowMatrix& in, RowMatrix& out) override {
    const auto batch = static_cast<std::size_t>(in.rows());
    out.resize(batch, output_size());
    argmax_.resize(batch * output_size());
    std::size_t k = 0;
    for (std::size_t b = 0; b < batch; ++b) {
      const double* src = in.row(b).data();
      for (std::size_t c = 0; c < in_.channels; ++c) {
        for (std::size_t oy = 0; oy < out_rows_; ++oy) {
          for (std::size_t ox = 0; ox < out_cols_; ++ox, ++k) {
            const std::size_t base = c * in_.rows * in_.cols + 2 * oy * in_.cols + 2 * ox;
            std::size_t best = base;
            for (std::size_t off : {base + 1, base + in_.cols, base + in_.cols + 1}) {
              if (src[off] > src[best]) best = off;
            }
            argmax_[k] = static_cast<std::uint32_t>(best);
            out(b, k - b * output_size()) = src[best];
          }
        }
      }
    }
  }

  void backward(const double*, const RowMatrix& in, const RowMatrix& grad_out,
                RowMatrix* grad_in, double*) override {
    if (!grad_in) return;
    const auto batch = static_cast<std::size_t>(in.rows());
    grad_in->setZero(batch, in_.size());
    const std::size_t per = output_size();
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < per; ++j) {
        (*grad_in)(b, argmax_[b * per + j]) += grad_out(b, j);
      }
    }
  }

 private:
  InputShape in_;
  std::size_t out_rows_;
  std::size_t out_cols_;
  std::vector<std::uint32_t> argmax_;
};

}  // namespace

std::unique_ptr<Layer> make_dense(std::size_t in, std::size_t out) {
  return std::make_unique<Dense>(in, out);
}
std::unique_ptr<Layer> make_relu(std::size_t size) { return std::make_unique<Relu>(size); }
std::unique_ptr<Layer> make_conv2d(InputShape in, std::size_t filters, std::size_t kernel) {
  return std::make_unique<Conv2d>(in, filters, kernel);
}
std::unique_ptr<Layer> make_maxpool2(InputShape in) { return std::make_unique<MaxPool2>(in); }

Network::Network(std::vector<std::unique_ptr<Layer>> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeError("network needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (i > 0 && layers_[i]->input_size() != layers_[i - 1]->output_size()) {
      throw ShapeError("layer " + layers_[i]->name() + " expects " +
                       std::to_string(layers_[i]->input_size()) + " inputs, previous emits " +
                       std::to_string(layers_[i - 1]->output_size()));
    }
    offsets_.push_back(total_params_);
    total_params_ += layers_[i]->param_count();
  }
  if (layers_.back()->output_size() != 1) throw ShapeError("network must emit a single logit");
}

std::size_t Network::input_size() const { return layers_.front()->input_size(); }

std::vector<std::string> Network::layer_names() const {
  std::vector<std::string> names;
  for (const auto& l : layers_) names.push_back(l->name());
  return names;
}

Eigen::VectorXd Network::initial_parameters(Rng& rng) const {
  Eigen::VectorXd params(total_params_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->init({params.data() + offsets_[i], layers_[i]->param_count()}, rng);
  }
  return params;
}

void Network::run_forward(const Eigen::VectorXd& params, const RowMatrix& inputs) {
  if (static_cast<std::size_t>(params.size()) != total_params_) {
    throw ShapeError("parameter vector has " + std::to_string(params.size()) +
                     " entries, network needs " + std::to_string(total_params_));
  }
  if (static_cast<std::size_t>(inputs.cols()) != input_size()) {
    throw ShapeError("input has " + std::to_string(inputs.cols()) +
                     " features, network expects " + std::to_string(input_size()));
  }
  activations_.resize(layers_.size() + 1);
  activations_[0] = inputs;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->forward(params.data() + offsets_[i], activations_[i], activations_[i + 1]);
  }
}

Eigen::VectorXd Network::logits(const Eigen::VectorXd& params, const RowMatrix& inputs) {
  run_forward(params, inputs);
  return activations_.back().col(0);
}

double Network::loss(const Eigen::VectorXd& params, const RowMatrix& inputs,
                     std::span<const double> labels, double positive_weight) {
  const Eigen::VectorXd z = logits(params, inputs);
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double y = labels[i];
    total += positive_weight * y * softplus(-z[i]) + (1.0 - y) * softplus(z[i]);
  }
  return total / double(z.size());
}

double Network::loss_and_gradient(const Eigen::VectorXd& params, const RowMatrix& inputs,
                                  std::span<const double> labels, double positive_weight,
                                  Eigen::VectorXd& grad) {
  if (labels.size() != static_cast<std::size_t>(inputs.rows())) {
    throw ShapeError("label count does not match batch size");
  }
  run_forward(params, inputs);
  const auto& z = activations_.back();
  const auto batch = z.rows();
  RowMatrix grad_out(batch, 1);
  double total = 0.0;
  for (Eigen::Index i = 0; i < batch; ++i) {
    const double y = labels[i];
    const double p = sigmoid(z(i, 0));
    total += positive_weight * y * softplus(-z(i, 0)) + (1.0 - y) * softplus(z(i, 0));
    grad_out(i, 0) = (positive_weight * y * (p - 1.0) + (1.0 - y) * p) / double(batch);
  }
  grad.setZero(total_params_);
  RowMatrix grad_in;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    layers_[k]->backward(params.data() + offsets_[k], activations_[k], grad_out,
                         k > 0 ? &grad_in : nullptr, grad.data() + offsets_[k]);
    if (k > 0) std::swap(grad_out, grad_in);
  }
  return total / double(batch);
}

}  // namespace tebkit
