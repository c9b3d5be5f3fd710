// Versioned JSON checkpoint container: encoder+head weights, Adam state,
// training seed and epoch counter. Doubles are serialised with
// shortest-round-trip precision, so save/load is bit-exact.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "schane/error.hpp"
#include "schane/framework.hpp"

namespace schane::checkpoint {

using numerics::Matrix;
using numerics::Vector;

inline constexpr const char* kFormat = "schane.checkpoint";
inline constexpr int kVersion = 1;

struct Checkpoint {
  framework::EncoderParams params;
  framework::AdamState adam;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;  // next epoch index; resuming continues here
  std::map<std::string, std::string> meta;
};

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty())
    fail(ErrorKind::FormatError, std::string("checkpoint: bad matrix for ") + what);
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != cols)
      fail(ErrorKind::FormatError, std::string("checkpoint: ragged matrix for ") + what);
    for (const auto& x : row) data.push_back(x.get<double>());
  }
  return Matrix(rows, cols, std::move(data));
}

inline Vector vector_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) fail(ErrorKind::FormatError, std::string("checkpoint: bad vector for ") + what);
  Vector v;
  v.reserve(j.size());
  for (const auto& x : j) v.push_back(x.get<double>());
  return v;
}

}  // namespace detail

inline nlohmann::json to_json(const Checkpoint& ckpt) {
  nlohmann::json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["seed"] = ckpt.seed;
  j["epoch"] = ckpt.epoch;
  j["meta"] = ckpt.meta;

  nlohmann::json enc;
  enc["dropout_rate"] = ckpt.params.dropout_rate;
  enc["weights"] = nlohmann::json::array();
  enc["biases"] = nlohmann::json::array();
  for (const auto& w : ckpt.params.weights) enc["weights"].push_back(detail::matrix_to_json(w));
  for (const auto& b : ckpt.params.biases) enc["biases"].push_back(b);
  enc["head_weight"] = detail::matrix_to_json(ckpt.params.head_weight);
  enc["head_bias"] = ckpt.params.head_bias;
  j["encoder"] = std::move(enc);

  const auto& a = ckpt.adam;
  nlohmann::json adam;
  adam["learning_rate"] = a.learning_rate;
  adam["weight_decay"] = a.weight_decay;
  adam["beta1"] = a.beta1;
  adam["beta2"] = a.beta2;
  adam["epsilon"] = a.epsilon;
  adam["step"] = a.step;
  adam["m_weights"] = nlohmann::json::array();
  adam["v_weights"] = nlohmann::json::array();
  for (const auto& m : a.m_weights) adam["m_weights"].push_back(detail::matrix_to_json(m));
  for (const auto& v : a.v_weights) adam["v_weights"].push_back(detail::matrix_to_json(v));
  adam["m_biases"] = a.m_biases;
  adam["v_biases"] = a.v_biases;
  adam["m_head_weight"] = detail::matrix_to_json(a.m_head_weight);
  adam["v_head_weight"] = detail::matrix_to_json(a.v_head_weight);
  adam["m_head_bias"] = a.m_head_bias;
  adam["v_head_bias"] = a.v_head_bias;
  j["adam"] = std::move(adam);
  return j;
}

inline Checkpoint from_json(const nlohmann::json& j) {
  if (!j.contains("format") || j["format"] != kFormat)
    fail(ErrorKind::FormatError, "not a checkpoint file");
  if (!j.contains("version") || j["version"].get<int>() != kVersion)
    fail(ErrorKind::FormatError, "unsupported checkpoint version");

  Checkpoint ckpt;
  ckpt.seed = j.at("seed").get<std::uint64_t>();
  ckpt.epoch = j.at("epoch").get<std::size_t>();
  if (j.contains("meta"))
    for (const auto& [k, v] : j["meta"].items()) ckpt.meta[k] = v.get<std::string>();

  const auto& enc = j.at("encoder");
  ckpt.params.dropout_rate = enc.at("dropout_rate").get<double>();
  for (const auto& w : enc.at("weights")) ckpt.params.weights.push_back(detail::matrix_from_json(w, "weights"));
  for (const auto& b : enc.at("biases")) ckpt.params.biases.push_back(detail::vector_from_json(b, "biases"));
  ckpt.params.head_weight = detail::matrix_from_json(enc.at("head_weight"), "head_weight");
  ckpt.params.head_bias = detail::vector_from_json(enc.at("head_bias"), "head_bias");
  ckpt.params.validate();

  const auto& adam = j.at("adam");
  auto& a = ckpt.adam;
  a.learning_rate = adam.at("learning_rate").get<double>();
  a.weight_decay = adam.at("weight_decay").get<double>();
  a.beta1 = adam.at("beta1").get<double>();
  a.beta2 = adam.at("beta2").get<double>();
  a.epsilon = adam.at("epsilon").get<double>();
  a.step = adam.at("step").get<std::uint64_t>();
  for (const auto& m : adam.at("m_weights")) a.m_weights.push_back(detail::matrix_from_json(m, "m_weights"));
  for (const auto& v : adam.at("v_weights")) a.v_weights.push_back(detail::matrix_from_json(v, "v_weights"));
  for (const auto& m : adam.at("m_biases")) a.m_biases.push_back(detail::vector_from_json(m, "m_biases"));
  for (const auto& v : adam.at("v_biases")) a.v_biases.push_back(detail::vector_from_json(v, "v_biases"));
  a.m_head_weight = detail::matrix_from_json(adam.at("m_head_weight"), "m_head_weight");
  a.v_head_weight = detail::matrix_from_json(adam.at("v_head_weight"), "v_head_weight");
  a.m_head_bias = detail::vector_from_json(adam.at("m_head_bias"), "m_head_bias");
  a.v_head_bias = detail::vector_from_json(adam.at("v_head_bias"), "v_head_bias");
  return ckpt;
}

inline void save(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  out << to_json(ckpt).dump(1) << '\n';
  if (!out) fail(ErrorKind::IoError, "write failed for " + path.string());
}

inline Checkpoint load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::FormatError, "checkpoint parse error: " + std::string(e.what()));
  }
  return from_json(j);
}

}  // namespace schane::checkpoint
