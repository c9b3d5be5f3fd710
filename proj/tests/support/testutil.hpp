// Shared test helpers: random batch/parameter generators and temp dirs.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "schane/framework.hpp"
#include "schane/numerics.hpp"
#include "schane/objectives.hpp"
#include "schane/rng.hpp"

namespace testutil {

using schane::Rng;
using schane::numerics::Matrix;
using schane::numerics::Vector;

inline Vector random_unit(std::size_t dim, Rng& rng) {
  Vector v(dim);
  double norm = 0.0;
  do {
    for (double& x : v) x = rng.normal();
    norm = schane::numerics::norm(v);
  } while (!(norm > 0.0));
  for (double& x : v) x /= norm;
  return v;
}

// Two-view batch of `samples` originals over `classes` classes with
// unit-norm rows; at least two classes are always present.
inline schane::objectives::EmbeddingBatch random_batch(std::size_t samples, std::size_t classes,
                                                       std::size_t dim, Rng& rng) {
  std::vector<Vector> rows;
  std::vector<std::size_t> labels(2 * samples);
  std::vector<std::size_t> view_of(2 * samples);
  for (std::size_t s = 0; s < samples; ++s) {
    std::size_t label = s < 2 ? s % classes : static_cast<std::size_t>(rng.uniform_index(classes));
    rows.push_back(random_unit(dim, rng));
    rows.push_back(random_unit(dim, rng));
    labels[2 * s] = labels[2 * s + 1] = label;
    view_of[2 * s] = view_of[2 * s + 1] = s;
  }
  return schane::objectives::EmbeddingBatch{Matrix::from_rows(rows), labels, view_of};
}

inline std::filesystem::path fresh_temp_dir(const std::string& tag) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("schane_test_" + tag + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline bool matrices_equal(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    if (a.data()[i] != b.data()[i]) return false;
  return true;
}

inline bool params_equal(const schane::framework::EncoderParams& a,
                         const schane::framework::EncoderParams& b) {
  if (a.weights.size() != b.weights.size()) return false;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    if (!matrices_equal(a.weights[l], b.weights[l])) return false;
    if (a.biases[l] != b.biases[l]) return false;
  }
  return matrices_equal(a.head_weight, b.head_weight) && a.head_bias == b.head_bias;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace testutil
