#pragma once

// Weight-vector math shared by the simulator: dataset-size weighted global
// aggregation and cosine similarity.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pofel/error.hpp"

namespace pofel {

template <typename Scalar>
using Weights = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using ModelWeights = Weights<double>;

using NodeId = std::int64_t;

struct ClusterInfo {
  NodeId node_id = 1;
  std::int64_t dataset_size = 1;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.allFinite();
}

/// Σ_m sizes[m]·models[m] / Σ_m sizes[m], accumulated in input order.
template <typename Scalar>
Weights<Scalar> aggregate_global(std::span<const Weights<Scalar>> models,
                                 std::span<const std::int64_t> sizes) {
  if (models.empty()) throw Error(ErrorCode::kEmptyInput, "aggregate_global: no models");
  if (models.size() != sizes.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "aggregate_global: " + std::to_string(models.size()) + " models but " +
                    std::to_string(sizes.size()) + " sizes");
  }
  const Eigen::Index dim = models.front().size();
  if (dim == 0) throw Error(ErrorCode::kEmptyInput, "aggregate_global: zero-dimensional model");

  Weights<Scalar> acc = Weights<Scalar>::Zero(dim);
  std::int64_t total = 0;
  for (std::size_t m = 0; m < models.size(); ++m) {
    if (models[m].size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "aggregate_global: model " + std::to_string(m) + " has dim " +
                      std::to_string(models[m].size()) + ", expected " + std::to_string(dim));
    }
    if (sizes[m] < 0) throw Error(ErrorCode::kInvalidArgument, "aggregate_global: negative size");
    if (!all_finite(models[m])) throw Error(ErrorCode::kNonFinite, "aggregate_global: non-finite weight");
    acc += static_cast<Scalar>(sizes[m]) * models[m];
    total += sizes[m];
  }
  if (total == 0) throw Error(ErrorCode::kZeroTotalSize, "aggregate_global: total size is zero");
  return acc / static_cast<Scalar>(total);
}

template <typename Scalar>
Weights<Scalar> aggregate_global(const std::vector<Weights<Scalar>>& models,
                                 const std::vector<std::int64_t>& sizes) {
  return aggregate_global(std::span<const Weights<Scalar>>(models),
                          std::span<const std::int64_t>(sizes));
}

/// <a,b> / (|a|·|b|), clamped to [-1, 1]. Zero-norm inputs are rejected.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "cosine_similarity: dims " + std::to_string(a.size()) +
                                                   " and " + std::to_string(b.size()));
  }
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) {
    throw Error(ErrorCode::kZeroNorm, "cosine_similarity: zero-norm vector");
  }
  const Scalar s = a.dot(b) / (na * nb);
  return std::clamp(s, Scalar(-1), Scalar(1));
}

/// Index of the most similar model to `reference`; ties go to the lowest index.
template <typename Scalar, typename Derived>
std::size_t most_similar(std::span<const Weights<Scalar>> models,
                         const Eigen::MatrixBase<Derived>& reference,
                         Weights<Scalar>* similarities = nullptr) {
  if (models.empty()) throw Error(ErrorCode::kEmptyInput, "most_similar: no models");
  Weights<Scalar> s(static_cast<Eigen::Index>(models.size()));
  std::size_t best = 0;
  for (std::size_t m = 0; m < models.size(); ++m) {
    s[static_cast<Eigen::Index>(m)] = cosine_similarity(models[m], reference);
    if (s[static_cast<Eigen::Index>(m)] > s[static_cast<Eigen::Index>(best)]) best = m;
  }
  if (similarities) *similarities = std::move(s);
  return best;
}

}  // namespace pofel
