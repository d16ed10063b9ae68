#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "tebkit/dataset.hpp"

namespace tebkit {

/// Parsed IDX container: unsigned-byte payload with big-endian dimensions.
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};

/// Parses an in-memory IDX file (type code 0x08 only). Errors carry the byte
/// offset at which the input stopped making sense.
IdxArray parse_idx(std::span<const std::uint8_t> bytes);
/// Reads a raw or gzip-compressed IDX file.
IdxArray read_idx(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_idx(const IdxArray& array);
void write_idx(const IdxArray& array, const std::filesystem::path& path);

struct MnistArchive {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> images;
  std::vector<std::uint8_t> labels;

  std::span<const std::uint8_t> image(std::size_t i) const {
    return {images.data() + i * rows * cols, rows * cols};
  }
};

/// Images must have magic 0x00000803, labels 0x00000801; counts must agree
/// and labels lie in 0..9.
MnistArchive load_idx(const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path);

/// Label-conditional colouring that fixes the effect of background colour B
/// (treatment) on Y = 1[digit > d], with pen colour P as effect modifier.
struct PopulationSpec {
  int threshold_digit = 3;
  double p_outcome = 0.6;  // (9 - d) / 10
  /// P(Y=1 | B=b, P=p), indexed [b][p].
  std::array<std::array<double, 2>, 2> conditional{};
  double cate_white_pen = 0.4;
  double cate_black_pen = 0.2;
  double ate = 0.3;

  double outcome_probability(int b, int p) const { return conditional[b][p]; }
};

/// d must be in 1..7 so that every cell stays inside [0,1].
PopulationSpec build_population(int threshold_digit);

/// Joint P(B=b, P=p | Y=y) under B, P iid Be(1/2) and the nominal p_Y.
std::array<std::array<double, 2>, 2> colour_posterior(const PopulationSpec& spec, int y);

inline constexpr std::array<std::uint8_t, 3> kGreen = {0, 255, 0};
inline constexpr std::array<std::uint8_t, 3> kRed = {255, 0, 0};
inline constexpr std::array<std::uint8_t, 3> kWhite = {255, 255, 255};
inline constexpr std::array<std::uint8_t, 3> kBlack = {0, 0, 0};

/// Blends background (b: 1 green, 0 red) and pen (p: 1 white, 0 black) by
/// ink intensity: round(v/255 * pen + (1 - v/255) * background) per channel.
/// Output is planar RGB (3 x gray.size()).
std::vector<std::uint8_t> colorize(std::span<const std::uint8_t> gray, int b, int p);

struct CausalMnistRecord {
  std::uint8_t b = 0;
  std::uint8_t p = 0;
  std::uint8_t y = 0;
  std::uint8_t digit = 0;
  std::uint8_t s = 1;
  bool operator==(const CausalMnistRecord&) const = default;
};

/// Empirical summary written next to a generated dataset.
struct GenerationLog {
  double marginal_b = 0.0;
  double marginal_p = 0.0;
  double empirical_p_outcome = 0.0;
  double nominal_p_outcome = 0.0;
  double ate = 0.0;
  double cate_white_pen = 0.0;
  double cate_black_pen = 0.0;
};

struct CausalMnist {
  PopulationSpec spec;
  std::uint64_t seed = 0;
  std::vector<CausalMnistRecord> records;
  /// Colourised images, planar RGB, one per record.
  std::shared_ptr<const ImageSet> images;
  GenerationLog log;
};

/// One record per source image; image i draws (b, p) from substream i of
/// `seed`, so the output does not depend on processing order.
CausalMnist generate(const MnistArchive& archive, const PopulationSpec& spec, std::uint64_t seed);

GenerationLog summarize(const std::vector<CausalMnistRecord>& records, const PopulationSpec& spec);

/// Dataset view: w = P, t = B, y = Y, x = image row, s = record flag.
Dataset to_dataset(const CausalMnist& data);

/// Writes images-idx4-ubyte (n x 3 x rows x cols), metadata.csv
/// (index,digit,y,b,p,s) and spec.json into `dir`.
void write_causal_mnist(const CausalMnist& data, const std::filesystem::path& dir);
CausalMnist read_causal_mnist(const std::filesystem::path& dir);

}  // namespace tebkit
