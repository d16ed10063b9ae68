#include "tebkit/dataset.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "tebkit/error.hpp"
#include "tebkit/format.hpp"

namespace tebkit {

void ScmConfig::validate() const {
  if (!(p_treat > 0.0 && p_treat < 1.0)) {
    throw ConfigError("p_T must satisfy 0 < p_T < 1, got " + format_double(p_treat));
  }
  if (!(noise_var > 0.0)) {
    throw ConfigError("sigma2_Y must be > 0, got " + format_double(noise_var));
  }
  if (n < 1) throw ConfigError("n must be >= 1");
}

Dataset::Dataset(std::vector<Sample> samples, Provenance provenance,
                 std::shared_ptr<const ImageSet> images)
    : samples_(std::move(samples)),
      provenance_(std::move(provenance)),
      images_(std::move(images)) {
  if (images_ && images_->count != samples_.size()) {
    throw ShapeError("image count " + std::to_string(images_->count) +
                     " does not match sample count " + std::to_string(samples_.size()));
  }
}

std::vector<std::size_t> Dataset::annotated() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (samples_[i].s) idx.push_back(i);
  }
  return idx;
}

std::vector<std::size_t> Dataset::unannotated() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!samples_[i].s) idx.push_back(i);
  }
  return idx;
}

std::vector<std::size_t> Dataset::all_indices() const {
  std::vector<std::size_t> idx(samples_.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

Dataset Dataset::with_annotation(std::span<const std::uint8_t> flags) const {
  if (flags.size() != samples_.size()) {
    throw ShapeError("annotation vector has " + std::to_string(flags.size()) +
                     " entries for " + std::to_string(samples_.size()) + " samples");
  }
  auto copy = samples_;
  for (std::size_t i = 0; i < copy.size(); ++i) copy[i].s = flags[i] ? 1 : 0;
  return Dataset(std::move(copy), provenance_, images_);
}

std::vector<double> Dataset::outcomes(std::span<const std::size_t> idx) const {
  std::vector<double> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(samples_[i].y);
  return out;
}

std::vector<std::uint8_t> Dataset::treatments(std::span<const std::size_t> idx) const {
  std::vector<std::uint8_t> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(samples_[i].t);
  return out;
}

std::vector<std::uint8_t> Dataset::labels(std::span<const std::size_t> idx) const {
  std::vector<std::uint8_t> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(samples_[i].y);
  return out;
}

void write_dataset_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "w,t,x,y,s\n";
  for (const auto& s : dataset.samples()) {
    out << format_double(s.w) << ',' << int(s.t) << ',' << format_double(s.x) << ','
        << int(s.y) << ',' << int(s.s) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

namespace {

std::uint8_t parse_bit(const std::string& field, std::size_t line) {
  if (field == "0") return 0;
  if (field == "1") return 1;
  throw ParseError("expected 0 or 1, got '" + field + "'", line);
}

}  // namespace

std::vector<Sample> read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "w,t,x,y,s") {
    throw ParseError("dataset CSV header must be 'w,t,x,y,s'", 1);
  }
  std::vector<Sample> samples;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 5) throw ParseError("expected 5 fields", lineno);
    Sample s;
    try {
      s.w = parse_double(f[0]);
      s.x = parse_double(f[2]);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    }
    s.t = parse_bit(f[1], lineno);
    s.y = parse_bit(f[3], lineno);
    s.s = parse_bit(f[4], lineno);
    samples.push_back(s);
  }
  return samples;
}

void write_provenance_json(const Provenance& provenance,
                           const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  if (const auto* c = std::get_if<ScmConfig>(&provenance)) {
    j["kind"] = "scm";
    j["p_T"] = c->p_treat;
    j["sigma2_Y"] = c->noise_var;
    j["n"] = c->n;
    j["seed"] = c->seed;
  } else if (const auto* m = std::get_if<MnistProvenance>(&provenance)) {
    j["kind"] = "causal_mnist";
    j["d"] = m->threshold_digit;
    j["seed"] = m->seed;
    j["n"] = m->n;
    j["source"] = m->source;
  } else {
    j["kind"] = "none";
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

Provenance read_provenance_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "scm") {
      ScmConfig c;
      c.p_treat = j.at("p_T").get<double>();
      c.noise_var = j.at("sigma2_Y").get<double>();
      c.n = j.at("n").get<std::size_t>();
      c.seed = j.at("seed").get<std::uint64_t>();
      return c;
    }
    if (kind == "causal_mnist") {
      MnistProvenance m;
      m.threshold_digit = j.at("d").get<int>();
      m.seed = j.at("seed").get<std::uint64_t>();
      m.n = j.at("n").get<std::size_t>();
      m.source = j.at("source").get<std::string>();
      return m;
    }
    return std::monostate{};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("provenance JSON: ") + e.what(), 0);
  }
}

}  // namespace tebkit
