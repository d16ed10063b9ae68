#include "tebkit/causal_mnist.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>

#include "tebkit/error.hpp"
#include "tebkit/format.hpp"
#include "tebkit/rng.hpp"

namespace tebkit {

PopulationSpec build_population(int threshold_digit) {
  if (threshold_digit < 1 || threshold_digit > 7) {
    throw DomainError("threshold digit must lie in 1..7, got " + std::to_string(threshold_digit));
  }
  PopulationSpec s;
  s.threshold_digit = threshold_digit;
  // Work in tenths so every cell is the double nearest its decimal value.
  const int tenths = 9 - threshold_digit;
  s.p_outcome = tenths / 10.0;
  s.conditional[1][1] = (tenths + 2) / 10.0;
  s.conditional[0][1] = (tenths - 2) / 10.0;
  s.conditional[1][0] = (tenths + 1) / 10.0;
  s.conditional[0][0] = (tenths - 1) / 10.0;
  s.cate_white_pen = 4 / 10.0;
  s.cate_black_pen = 2 / 10.0;
  s.ate = 3 / 10.0;
  return s;
}

std::array<std::array<double, 2>, 2> colour_posterior(const PopulationSpec& spec, int y) {
  std::array<std::array<double, 2>, 2> post{};
  double total = 0.0;
  for (int b = 0; b < 2; ++b) {
    for (int p = 0; p < 2; ++p) {
      const double py = y ? spec.conditional[b][p] : 1.0 - spec.conditional[b][p];
      post[b][p] = 0.25 * py;
      total += post[b][p];
    }
  }
  // total equals the nominal P(Y = y).
  for (auto& row : post) {
    for (auto& v : row) v /= total;
  }
  return post;
}

std::vector<std::uint8_t> colorize(std::span<const std::uint8_t> gray, int b, int p) {
  const auto& bg = b ? kGreen : kRed;
  const auto& pen = p ? kWhite : kBlack;
  const std::size_t plane = gray.size();
  std::vector<std::uint8_t> rgb(3 * plane);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      const double ink = gray[i] / 255.0;
      rgb[c * plane + i] =
          static_cast<std::uint8_t>(std::lround(ink * pen[c] + (1.0 - ink) * bg[c]));
    }
  }
  return rgb;
}

GenerationLog summarize(const std::vector<CausalMnistRecord>& records, const PopulationSpec& spec) {
  GenerationLog log;
  log.nominal_p_outcome = spec.p_outcome;
  if (records.empty()) return log;
  double sum_b = 0, sum_p = 0, sum_y = 0;
  // [p][b] sums and counts of y.
  double ys[2][2] = {{0, 0}, {0, 0}};
  double ns[2][2] = {{0, 0}, {0, 0}};
  for (const auto& r : records) {
    sum_b += r.b;
    sum_p += r.p;
    sum_y += r.y;
    ys[r.p][r.b] += r.y;
    ns[r.p][r.b] += 1;
  }
  const double n = double(records.size());
  log.marginal_b = sum_b / n;
  log.marginal_p = sum_p / n;
  log.empirical_p_outcome = sum_y / n;
  auto rate = [](double s, double c) { return c > 0 ? s / c : std::nan(""); };
  const double nb1 = ns[0][1] + ns[1][1];
  const double nb0 = ns[0][0] + ns[1][0];
  log.ate = rate(ys[0][1] + ys[1][1], nb1) - rate(ys[0][0] + ys[1][0], nb0);
  log.cate_white_pen = rate(ys[1][1], ns[1][1]) - rate(ys[1][0], ns[1][0]);
  log.cate_black_pen = rate(ys[0][1], ns[0][1]) - rate(ys[0][0], ns[0][0]);
  return log;
}

CausalMnist generate(const MnistArchive& archive, const PopulationSpec& spec, std::uint64_t seed) {
  build_population(spec.threshold_digit);  // validates d
  const auto post1 = colour_posterior(spec, 1);
  const auto post0 = colour_posterior(spec, 0);

  CausalMnist out;
  out.spec = spec;
  out.seed = seed;
  out.records.resize(archive.count);
  auto images = std::make_shared<ImageSet>();
  images->count = archive.count;
  images->channels = 3;
  images->rows = archive.rows;
  images->cols = archive.cols;
  images->pixels.resize(archive.count * images->image_size());

  for (std::size_t i = 0; i < archive.count; ++i) {
    auto& r = out.records[i];
    r.digit = archive.labels[i];
    r.y = r.digit > spec.threshold_digit ? 1 : 0;
    const auto& post = r.y ? post1 : post0;
    Rng rng(seed, i);
    const double u = rng.uniform();
    double acc = 0.0;
    int chosen = 3;
    for (int cell = 0; cell < 4; ++cell) {
      acc += post[cell >> 1][cell & 1];
      if (u < acc) {
        chosen = cell;
        break;
      }
    }
    r.b = std::uint8_t(chosen >> 1);
    r.p = std::uint8_t(chosen & 1);
    const auto rgb = colorize(archive.image(i), r.b, r.p);
    std::copy(rgb.begin(), rgb.end(), images->pixels.begin() + i * images->image_size());
  }
  out.images = std::move(images);
  out.log = summarize(out.records, spec);
  return out;
}

Dataset to_dataset(const CausalMnist& data) {
  std::vector<Sample> samples(data.records.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& r = data.records[i];
    samples[i] = Sample{double(r.p), double(i), r.b, r.y, r.s};
  }
  MnistProvenance prov{data.spec.threshold_digit, data.seed, data.records.size(), "causal_mnist"};
  return Dataset(std::move(samples), prov, data.images);
}

void write_causal_mnist(const CausalMnist& data, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const auto& img = *data.images;
  write_idx(IdxArray{{std::uint32_t(img.count), std::uint32_t(img.channels),
                      std::uint32_t(img.rows), std::uint32_t(img.cols)},
                     img.pixels},
            dir / "images-idx4-ubyte");
  {
    std::ofstream meta(dir / "metadata.csv", std::ios::binary);
    if (!meta) throw IoError("cannot write metadata.csv in " + dir.string());
    meta << "index,digit,y,b,p,s\n";
    for (std::size_t i = 0; i < data.records.size(); ++i) {
      const auto& r = data.records[i];
      meta << i << ',' << int(r.digit) << ',' << int(r.y) << ',' << int(r.b) << ',' << int(r.p)
           << ',' << int(r.s) << '\n';
    }
  }
  nlohmann::ordered_json j;
  const auto& s = data.spec;
  j["d"] = s.threshold_digit;
  j["seed"] = data.seed;
  j["n"] = data.records.size();
  j["p_Y"] = s.p_outcome;
  j["conditional"] = {{"B1P1", s.conditional[1][1]},
                      {"B0P1", s.conditional[0][1]},
                      {"B1P0", s.conditional[1][0]},
                      {"B0P0", s.conditional[0][0]}};
  j["designed"] = {{"cate_white_pen", s.cate_white_pen},
                   {"cate_black_pen", s.cate_black_pen},
                   {"ate", s.ate}};
  j["colours"] = {{"background", {{"1", "green"}, {"0", "red"}}},
                  {"pen", {{"1", "white"}, {"0", "black"}}}};
  const auto& l = data.log;
  j["generation_log"] = {{"marginal_b", l.marginal_b},
                         {"marginal_p", l.marginal_p},
                         {"empirical_p_Y", l.empirical_p_outcome},
                         {"nominal_p_Y", l.nominal_p_outcome},
                         {"ate", l.ate},
                         {"cate_white_pen", l.cate_white_pen},
                         {"cate_black_pen", l.cate_black_pen}};
  std::ofstream spec_out(dir / "spec.json", std::ios::binary);
  if (!spec_out) throw IoError("cannot write spec.json in " + dir.string());
  spec_out << j.dump(2) << '\n';
}

CausalMnist read_causal_mnist(const std::filesystem::path& dir) {
  CausalMnist out;
  std::ifstream spec_in(dir / "spec.json", std::ios::binary);
  if (!spec_in) throw IoError("missing spec.json in " + dir.string());
  try {
    const auto j = nlohmann::json::parse(spec_in);
    out.spec = build_population(j.at("d").get<int>());
    out.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("spec.json: ") + e.what(), 0);
  }
  auto arr = read_idx(dir / "images-idx4-ubyte");
  if (arr.dims.size() != 4 || arr.dims[1] != 3) {
    throw ParseError("CausalMNIST images must be n x 3 x rows x cols", 3);
  }
  auto images = std::make_shared<ImageSet>();
  images->count = arr.dims[0];
  images->channels = 3;
  images->rows = arr.dims[2];
  images->cols = arr.dims[3];
  images->pixels = std::move(arr.data);

  std::ifstream meta(dir / "metadata.csv", std::ios::binary);
  if (!meta) throw IoError("missing metadata.csv in " + dir.string());
  std::string line;
  std::getline(meta, line);
  if (trim(line) != "index,digit,y,b,p,s") throw ParseError("unexpected metadata.csv header", 1);
  std::size_t lineno = 1;
  while (std::getline(meta, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw ParseError("metadata.csv: expected 6 fields", lineno);
    if (parse_uint(f[0]) != out.records.size()) throw ParseError("metadata.csv: index out of order", lineno);
    CausalMnistRecord r;
    r.digit = std::uint8_t(parse_uint(f[1]));
    r.y = std::uint8_t(parse_uint(f[2]));
    r.b = std::uint8_t(parse_uint(f[3]));
    r.p = std::uint8_t(parse_uint(f[4]));
    r.s = std::uint8_t(parse_uint(f[5]));
    out.records.push_back(r);
  }
  if (out.records.size() != images->count) {
    throw ParseError("metadata.csv row count does not match image count", lineno);
  }
  out.images = std::move(images);
  out.log = summarize(out.records, out.spec);
  return out;
}

}  // namespace tebkit
