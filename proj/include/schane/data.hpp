// Dataset construction (synthetic clusters, CSV, IDX ubyte), stratified
// splits, class-disjoint base/novel splits and N-way K-shot episode sampling.
#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "schane/error.hpp"
#include "schane/numerics.hpp"
#include "schane/rng.hpp"

namespace schane::data {

using numerics::Vector;

struct Sample {
  Vector features;
  std::size_t label = 0;
};

struct Dataset {
  std::vector<Sample> samples;
  std::size_t class_count = 0;
  std::size_t feature_dim = 0;

  std::size_t size() const noexcept { return samples.size(); }

  void validate() const {
    if (samples.empty()) fail(ErrorKind::EmptyDataset, "dataset has no samples");
    std::vector<std::size_t> per_class(class_count, 0);
    for (const auto& s : samples) {
      if (s.label >= class_count) fail(ErrorKind::LabelError, "label exceeds class_count");
      if (s.features.size() != feature_dim) fail(ErrorKind::ShapeError, "feature dim mismatch");
      numerics::require_finite(s.features, "dataset features");
      ++per_class[s.label];
    }
    for (std::size_t c = 0; c < class_count; ++c)
      if (per_class[c] == 0) fail(ErrorKind::InsufficientSamples, "class without samples");
  }

  std::vector<std::vector<std::size_t>> indices_by_class() const {
    std::vector<std::vector<std::size_t>> by_class(class_count);
    for (std::size_t i = 0; i < samples.size(); ++i) by_class[samples[i].label].push_back(i);
    return by_class;
  }
};

struct Episode {
  std::size_t way = 0;
  std::size_t shot = 0;
  std::size_t query_shot = 0;
  std::vector<Sample> support;  // labels remapped to 0..way-1
  std::vector<Sample> query;
};

struct SyntheticSpec {
  std::size_t class_count = 20;
  std::size_t feature_dim = 64;
  std::size_t samples_per_class = 100;
  double mean_radius = 4.0;
  double noise_sigma = 1.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (class_count < 1 || feature_dim < 1 || samples_per_class < 1)
      fail(ErrorKind::ConfigError, "synthetic spec counts must be >= 1");
    if (!(mean_radius > 0.0)) fail(ErrorKind::ConfigError, "mean_radius must be > 0");
    if (mean_radius <= 0.0 || noise_sigma < 0.0)
      fail(ErrorKind::ConfigError, "noise_sigma must be >= 0");
  }
};

// Class means uniform on the sphere of radius mean_radius; samples are
// mean + isotropic Gaussian noise. Fixed draw order keeps output
// byte-identical per seed.
inline Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, "synthetic"));
  Dataset ds;
  ds.class_count = spec.class_count;
  ds.feature_dim = spec.feature_dim;
  ds.samples.reserve(spec.class_count * spec.samples_per_class);
  for (std::size_t c = 0; c < spec.class_count; ++c) {
    Vector mean(spec.feature_dim);
    double n = 0.0;
    do {
      for (double& x : mean) x = rng.normal();
      n = numerics::norm(mean);
    } while (!(n > 0.0));
    for (double& x : mean) x *= spec.mean_radius / n;
    for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
      Vector f(spec.feature_dim);
      for (std::size_t d = 0; d < spec.feature_dim; ++d)
        f[d] = mean[d] + spec.noise_sigma * rng.normal();
      ds.samples.push_back({std::move(f), c});
    }
  }
  return ds;
}

namespace detail {

inline bool parse_double(const std::string& field, double& out) {
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

// Dense 0-based labels; sparse label sets are remapped (mapping logged).
inline void remap_labels(std::vector<Sample>& samples, std::vector<long long>& raw_labels,
                         Dataset& ds, const char* origin) {
  std::vector<long long> uniq = raw_labels;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::unordered_map<long long, std::size_t> map;
  for (std::size_t i = 0; i < uniq.size(); ++i) map[uniq[i]] = i;
  const bool contiguous = uniq.front() == 0 && uniq.back() == static_cast<long long>(uniq.size()) - 1;
  if (!contiguous) {
    std::cerr << origin << ": sparse labels remapped:";
    for (std::size_t i = 0; i < uniq.size(); ++i) std::cerr << " " << uniq[i] << "->" << i;
    std::cerr << "\n";
  }
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].label = map[raw_labels[i]];
  ds.class_count = uniq.size();
  ds.samples = std::move(samples);
}

}  // namespace detail

// Rows are `label,f1,...,fd`; an optional header is detected by a
// non-numeric first field.
inline Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  Dataset ds;
  std::vector<Sample> samples;
  std::vector<long long> raw_labels;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  bool first_row = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line);
    double probe = 0.0;
    if (first_row && !detail::parse_double(fields[0], probe)) {
      first_row = false;  // header row
      continue;
    }
    first_row = false;
    if (fields.size() < 2)
      fail(ErrorKind::FormatError, "line " + std::to_string(line_no) + ": need label and features");
    double label_val = 0.0;
    if (!detail::parse_double(fields[0], label_val) || label_val != std::floor(label_val) || label_val < 0)
      fail(ErrorKind::FormatError, "line " + std::to_string(line_no) + ": bad label '" + fields[0] + "'");
    if (dim == 0) {
      dim = fields.size() - 1;
    } else if (fields.size() - 1 != dim) {
      fail(ErrorKind::FormatError,
           "line " + std::to_string(line_no) + ": expected " + std::to_string(dim) + " features, got " +
               std::to_string(fields.size() - 1));
    }
    Vector f(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      if (!detail::parse_double(fields[j + 1], f[j]))
        fail(ErrorKind::FormatError,
             "line " + std::to_string(line_no) + ": non-numeric feature '" + fields[j + 1] + "'");
      if (!std::isfinite(f[j]))
        fail(ErrorKind::FormatError, "line " + std::to_string(line_no) + ": non-finite feature");
    }
    samples.push_back({std::move(f), 0});
    raw_labels.push_back(static_cast<long long>(label_val));
  }
  if (samples.empty()) fail(ErrorKind::EmptyDataset, "no data rows in " + path.string());
  ds.feature_dim = dim;
  detail::remap_labels(samples, raw_labels, ds, "load_csv");
  ds.validate();
  return ds;
}

// Full-precision output; load_csv(save_csv(ds)) round-trips exactly.
inline void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);  // binary keeps LF endings everywhere
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  for (const auto& s : ds.samples) {
    out << s.label;
    for (double x : s.features) out << ',' << numerics::format_full(x);
    out << '\n';
  }
  if (!out) fail(ErrorKind::IoError, "write failed for " + path.string());
}

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    fail(ErrorKind::FormatError, std::string("truncated ") + what);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace detail

// IDX ubyte pair (images magic 0x803, labels magic 0x801). Pixels are
// flattened row-major and scaled to [0,1].
inline Dataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) fail(ErrorKind::IoError, "cannot open " + images_path.string());
  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) fail(ErrorKind::IoError, "cannot open " + labels_path.string());

  if (detail::read_be32(imgs, "image header") != 0x00000803u)
    fail(ErrorKind::FormatError, "bad image magic in " + images_path.string());
  const std::uint32_t n_images = detail::read_be32(imgs, "image header");
  const std::uint32_t rows = detail::read_be32(imgs, "image header");
  const std::uint32_t cols = detail::read_be32(imgs, "image header");

  if (detail::read_be32(labs, "label header") != 0x00000801u)
    fail(ErrorKind::FormatError, "bad label magic in " + labels_path.string());
  const std::uint32_t n_labels = detail::read_be32(labs, "label header");
  if (n_images != n_labels)
    fail(ErrorKind::CountMismatch, std::to_string(n_images) + " images vs " +
                                       std::to_string(n_labels) + " labels");
  if (n_images == 0) fail(ErrorKind::EmptyDataset, "IDX files contain no records");
  const std::size_t dim = std::size_t(rows) * cols;
  if (dim == 0) fail(ErrorKind::FormatError, "zero-sized images");

  std::vector<Sample> samples(n_images);
  std::vector<long long> raw_labels(n_images);
  std::vector<unsigned char> buf(dim);
  for (std::uint32_t i = 0; i < n_images; ++i) {
    if (!imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim)))
      fail(ErrorKind::FormatError, "truncated image data");
    Vector f(dim);
    for (std::size_t j = 0; j < dim; ++j) f[j] = buf[j] / 255.0;
    samples[i].features = std::move(f);
  }
  for (std::uint32_t i = 0; i < n_images; ++i) {
    unsigned char l = 0;
    if (!labs.read(reinterpret_cast<char*>(&l), 1)) fail(ErrorKind::FormatError, "truncated label data");
    raw_labels[i] = l;
  }

  Dataset ds;
  ds.feature_dim = dim;
  detail::remap_labels(samples, raw_labels, ds, "load_idx");
  ds.validate();
  return ds;
}

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

namespace detail {

// Largest-remainder allocation; every part gets at least one element.
inline std::array<std::size_t, 3> allocate_counts(std::size_t n, const SplitFractions& f) {
  const std::array<double, 3> fr{f.train, f.val, f.test};
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rema{};
  std::size_t used = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = fr[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    rema[i] = exact - std::floor(exact);
    used += counts[i];
  }
  while (used < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (rema[i] > rema[best]) best = i;
    ++counts[best];
    rema[best] = -1.0;
    ++used;
  }
  for (int i = 0; i < 3; ++i) {
    while (counts[i] == 0) {
      int donor = 0;
      for (int j = 1; j < 3; ++j)
        if (counts[j] > counts[donor]) donor = j;
      if (counts[donor] <= 1) fail(ErrorKind::InsufficientSamples, "class too small to split");
      --counts[donor];
      ++counts[i];
    }
  }
  return counts;
}

}  // namespace detail

// Per-class stratified shuffle into disjoint, exhaustive train/val/test.
inline std::array<Dataset, 3> split(const Dataset& ds, const SplitFractions& fractions,
                                    std::uint64_t seed) {
  if (!(fractions.train > 0.0 && fractions.val > 0.0 && fractions.test > 0.0))
    fail(ErrorKind::ConfigError, "split fractions must be positive");
  if (std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9)
    fail(ErrorKind::ConfigError, "split fractions must sum to 1");
  ds.validate();

  std::array<Dataset, 3> parts;
  for (auto& p : parts) {
    p.class_count = ds.class_count;
    p.feature_dim = ds.feature_dim;
  }
  auto by_class = ds.indices_by_class();
  for (std::size_t c = 0; c < ds.class_count; ++c) {
    auto& idx = by_class[c];
    if (idx.size() < 3) fail(ErrorKind::InsufficientSamples, "class " + std::to_string(c) + " too small");
    Rng rng(derive_seed(seed, "split", c));
    rng.shuffle(idx);
    const auto counts = detail::allocate_counts(idx.size(), fractions);
    std::size_t pos = 0;
    for (int part = 0; part < 3; ++part)
      for (std::size_t k = 0; k < counts[part]; ++k) parts[part].samples.push_back(ds.samples[idx[pos++]]);
  }
  return parts;
}

struct ClassSplit {
  Dataset base;
  Dataset novel;
  std::vector<std::size_t> base_classes;   // original ids, ascending
  std::vector<std::size_t> novel_classes;  // original ids, ascending
};

// Class-disjoint base/novel partition; labels remapped to contiguous ids on
// both sides.
inline ClassSplit split_classes(const Dataset& ds, double base_fraction, std::uint64_t seed) {
  ds.validate();
  if (ds.class_count < 2) fail(ErrorKind::InsufficientClasses, "need at least 2 classes");
  if (!(base_fraction > 0.0 && base_fraction < 1.0))
    fail(ErrorKind::ConfigError, "base_fraction must be in (0,1)");
  const auto n_base = static_cast<std::size_t>(
      std::llround(base_fraction * static_cast<double>(ds.class_count)));
  if (n_base == 0 || n_base == ds.class_count)
    fail(ErrorKind::InsufficientClasses, "base_fraction leaves one side empty");

  std::vector<std::size_t> classes(ds.class_count);
  std::iota(classes.begin(), classes.end(), 0);
  Rng rng(derive_seed(seed, "class_split"));
  rng.shuffle(classes);

  ClassSplit out;
  out.base_classes.assign(classes.begin(), classes.begin() + static_cast<std::ptrdiff_t>(n_base));
  out.novel_classes.assign(classes.begin() + static_cast<std::ptrdiff_t>(n_base), classes.end());
  std::sort(out.base_classes.begin(), out.base_classes.end());
  std::sort(out.novel_classes.begin(), out.novel_classes.end());

  std::vector<std::size_t> remap(ds.class_count, SIZE_MAX);
  std::vector<int> side(ds.class_count, 0);
  for (std::size_t i = 0; i < out.base_classes.size(); ++i) {
    remap[out.base_classes[i]] = i;
    side[out.base_classes[i]] = 1;
  }
  for (std::size_t i = 0; i < out.novel_classes.size(); ++i) {
    remap[out.novel_classes[i]] = i;
    side[out.novel_classes[i]] = 2;
  }
  out.base.class_count = out.base_classes.size();
  out.base.feature_dim = ds.feature_dim;
  out.novel.class_count = out.novel_classes.size();
  out.novel.feature_dim = ds.feature_dim;
  for (const auto& s : ds.samples) {
    Sample copy{s.features, remap[s.label]};
    (side[s.label] == 1 ? out.base : out.novel).samples.push_back(std::move(copy));
  }
  return out;
}

// N-way K-shot episode with Q queries per class; sampling is without
// replacement within each class and deterministic per seed.
inline Episode sample_episode(const Dataset& ds, std::size_t way, std::size_t shot,
                              std::size_t query_shot, std::uint64_t seed) {
  ds.validate();
  if (way < 1 || shot < 1 || query_shot < 1)
    fail(ErrorKind::ConfigError, "way/shot/query_shot must be >= 1");
  if (way > ds.class_count) fail(ErrorKind::InsufficientClasses, "way exceeds class count");

  Rng rng(derive_seed(seed, "episode"));
  auto by_class = ds.indices_by_class();
  const auto chosen = rng.sample_without_replacement(ds.class_count, way);

  Episode ep;
  ep.way = way;
  ep.shot = shot;
  ep.query_shot = query_shot;
  for (std::size_t c = 0; c < way; ++c) {
    const auto& pool = by_class[chosen[c]];
    if (pool.size() < shot + query_shot)
      fail(ErrorKind::InsufficientSamples,
           "class " + std::to_string(chosen[c]) + " has " + std::to_string(pool.size()) +
               " samples, needs " + std::to_string(shot + query_shot));
    const auto picks = rng.sample_without_replacement(pool.size(), shot + query_shot);
    for (std::size_t k = 0; k < shot; ++k)
      ep.support.push_back({ds.samples[pool[picks[k]]].features, c});
    for (std::size_t k = shot; k < shot + query_shot; ++k)
      ep.query.push_back({ds.samples[pool[picks[k]]].features, c});
  }
  return ep;
}

}  // namespace schane::data
