#pragma once

// Text-guided query initialization shared by both decoders: rank a frame's
// tokens by similarity to the pooled text feature and average the top M.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "omnitube/config.hpp"
#include "omnitube/error.hpp"
#include "omnitube/tensor.hpp"

namespace omnitube {

inline double similarity(std::span<const double> a, std::span<const double> b, Similarity kind) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (kind == Similarity::dot) return dot;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Indices of the `m` tokens most similar to `reference`, best first; ties
/// go to the lower token index.
inline std::vector<std::size_t> top_m_indices(const Tensor& tokens, std::span<const double> reference, std::size_t m,
                                              Similarity kind) {
  require(m >= 1, ErrorKind::invalid_argument, "top-M needs M >= 1");
  require(m <= tokens.rows(), ErrorKind::invalid_argument,
          "M=" + std::to_string(m) + " exceeds " + std::to_string(tokens.rows()) + " tokens");
  require(tokens.cols() == reference.size(), ErrorKind::shape_mismatch, "reference width");
  std::vector<double> score(tokens.rows());
  for (std::size_t i = 0; i < tokens.rows(); ++i) score[i] = similarity(tokens.row(i), reference, kind);
  std::vector<std::size_t> order(tokens.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  order.resize(m);
  return order;
}

inline std::vector<double> top_m_mean(const Tensor& tokens, std::span<const double> reference, std::size_t m,
                                      Similarity kind) {
  const auto picked = top_m_indices(tokens, reference, m, kind);
  std::vector<double> mean(tokens.cols(), 0.0);
  for (auto idx : picked)
    for (std::size_t c = 0; c < tokens.cols(); ++c) mean[c] += tokens(idx, c);
  for (auto& v : mean) v /= static_cast<double>(m);
  return mean;
}

}  // namespace omnitube
