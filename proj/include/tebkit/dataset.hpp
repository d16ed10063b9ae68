#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace tebkit {

/// Parameters of the scalar partially annotated RCT:
/// T ~ Be(p_treat), W ~ N(0,1), X = T + W + N(0,1), Y = 1[X + N(0, noise_var) >= 0].
struct ScmConfig {
  double p_treat = 0.5;
  double noise_var = 1.0;
  std::size_t n = 1000;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the first violated bound.
  void validate() const;
  bool operator==(const ScmConfig&) const = default;
};

/// Where a CausalMNIST dataset came from.
struct MnistProvenance {
  int threshold_digit = 3;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::string source;
  bool operator==(const MnistProvenance&) const = default;
};

using Provenance = std::variant<std::monostate, ScmConfig, MnistProvenance>;

/// One experimental unit. For CausalMNIST `w` holds the pen colour and `x`
/// the row of the image in the dataset's ImageSet.
struct Sample {
  double w = 0.0;
  double x = 0.0;
  std::uint8_t t = 0;
  std::uint8_t y = 0;
  std::uint8_t s = 1;
  bool operator==(const Sample&) const = default;
};

/// Dense 8-bit images in planar (channel, row, col) order.
struct ImageSet {
  std::size_t count = 0;
  std::size_t channels = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;

  std::size_t image_size() const { return channels * rows * cols; }
  std::span<const std::uint8_t> image(std::size_t i) const {
    return {pixels.data() + i * image_size(), image_size()};
  }
};

/// Immutable ordered collection of samples. Copies share the image payload.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Sample> samples, Provenance provenance,
          std::shared_ptr<const ImageSet> images = nullptr);

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  std::span<const Sample> samples() const { return samples_; }
  const Provenance& provenance() const { return provenance_; }
  const ImageSet* images() const { return images_.get(); }
  std::shared_ptr<const ImageSet> shared_images() const { return images_; }

  /// Indices of D_s (s = 1) and D_u (s = 0), in dataset order.
  std::vector<std::size_t> annotated() const;
  std::vector<std::size_t> unannotated() const;
  std::vector<std::size_t> all_indices() const;

  /// Copy with the annotation flags replaced; flags.size() must equal size().
  Dataset with_annotation(std::span<const std::uint8_t> flags) const;

  std::vector<double> outcomes(std::span<const std::size_t> idx) const;
  std::vector<std::uint8_t> treatments(std::span<const std::size_t> idx) const;
  std::vector<std::uint8_t> labels(std::span<const std::size_t> idx) const;

 private:
  std::vector<Sample> samples_;
  Provenance provenance_;
  std::shared_ptr<const ImageSet> images_;
};

/// Columnar CSV with header `w,t,x,y,s`.
void write_dataset_csv(const Dataset& dataset, const std::filesystem::path& path);
std::vector<Sample> read_dataset_csv(const std::filesystem::path& path);

/// JSON sidecar holding the dataset's provenance.
void write_provenance_json(const Provenance& provenance,
                           const std::filesystem::path& path);
Provenance read_provenance_json(const std::filesystem::path& path);

}  // namespace tebkit
