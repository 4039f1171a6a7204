#include "pofel/fel_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pofel {
namespace {

Eigen::MatrixXd class_centers(const FelConfig& cfg) {
  Rng rng = make_rng(cfg.seed, "class-centers");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd centers(cfg.num_classes, cfg.feature_dim);
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    for (Eigen::Index f = 0; f < centers.cols(); ++f) centers(c, f) = normal(rng);
    centers.row(c) *= cfg.class_separation / std::max(centers.row(c).norm(), 1e-12);
  }
  return centers;
}

ClientDataset draw_dataset(const Eigen::MatrixXd& centers, const std::vector<int>& visible,
                           std::int64_t size, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, visible.size() - 1);
  ClientDataset ds;
  ds.size = size;
  ds.features.resize(size, centers.cols());
  ds.labels.resize(static_cast<std::size_t>(size));
  for (std::int64_t s = 0; s < size; ++s) {
    // Every visible label appears at least once.
    const int label = static_cast<std::size_t>(s) < visible.size()
                          ? visible[static_cast<std::size_t>(s)]
                          : visible[pick(rng)];
    ds.labels[static_cast<std::size_t>(s)] = label;
    for (Eigen::Index f = 0; f < centers.cols(); ++f) {
      ds.features(s, f) = centers(label, f) + normal(rng);
    }
  }
  return ds;
}

// Row-major (num_classes x (feature_dim + 1)) view; last column is the bias.
using WeightMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::MatrixXd softmax_probs(const ClientDataset& data, const ModelWeights& weights,
                              const FelConfig& cfg) {
  Eigen::Map<const WeightMatrix> w(weights.data(), cfg.num_classes, cfg.feature_dim + 1);
  Eigen::MatrixXd logits = data.features * w.leftCols(cfg.feature_dim).transpose();
  logits.rowwise() += w.col(cfg.feature_dim).transpose();
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  logits.colwise() -= row_max;
  Eigen::MatrixXd probs = logits.array().exp().matrix();
  const Eigen::VectorXd row_sum = probs.rowwise().sum();
  for (Eigen::Index r = 0; r < probs.rows(); ++r) probs.row(r) /= row_sum[r];
  return probs;
}

void check_dim(const ModelWeights& w, const FelConfig& cfg) {
  if (w.size() != cfg.model_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "local_train: model has dim " +
                                                   std::to_string(w.size()) + ", expected " +
                                                   std::to_string(cfg.model_dim));
  }
}

}  // namespace

void FelConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& msg) {
    throw Error(ErrorCode::kConfig, "fel." + field + ": " + msg);
  };
  if (clients_per_cluster < 1) fail("clients_per_cluster", "must be positive");
  if (fel_iters_per_round < 1) fail("fel_iters_per_round", "must be positive");
  if (model_dim < 1) fail("model_dim", "must be positive");
  if (!(label_skew > 0.0 && label_skew <= 1.0)) fail("label_skew", "must lie in (0, 1]");
  if (num_classes < 2) fail("num_classes", "must be at least 2");
  if (feature_dim < 1) fail("feature_dim", "must be positive");
  if (samples_min < num_classes) fail("samples_min", "must be at least num_classes");
  if (samples_max < samples_min) fail("samples_max", "must be >= samples_min");
  if (local_steps < 1) fail("local_steps", "must be positive");
  if (!(learning_rate >= 0.0)) fail("learning_rate", "must be non-negative");
  if (!(noise_scale >= 0.0)) fail("noise_scale", "must be non-negative");
  for (const auto& [node, scale] : noise_scale_overrides) {
    if (!(scale >= 0.0)) fail("noise_scale_overrides", "node " + std::to_string(node) + " negative");
  }
  if (trainer == Trainer::kToyClassifier && model_dim != num_classes * (feature_dim + 1)) {
    fail("model_dim", "toy classifier needs num_classes * (feature_dim + 1) = " +
                          std::to_string(num_classes * (feature_dim + 1)));
  }
}

double FelConfig::noise_scale_for(std::int64_t node_id) const {
  auto it = noise_scale_overrides.find(node_id);
  return it == noise_scale_overrides.end() ? noise_scale : it->second;
}

std::vector<ClientDataset> generate_cluster_data(const FelConfig& cfg, std::int64_t node_id) {
  const Eigen::MatrixXd centers = class_centers(cfg);
  const int visible_count =
      cfg.distribution == DataDistribution::kIid
          ? cfg.num_classes
          : static_cast<int>(std::ceil(cfg.label_skew * cfg.num_classes - 1e-9));

  std::vector<ClientDataset> out;
  out.reserve(static_cast<std::size_t>(cfg.clients_per_cluster));
  for (int c = 0; c < cfg.clients_per_cluster; ++c) {
    Rng rng = make_rng(cfg.seed, "client-data",
                       {static_cast<std::uint64_t>(node_id), static_cast<std::uint64_t>(c)});
    std::vector<int> labels(static_cast<std::size_t>(cfg.num_classes));
    std::iota(labels.begin(), labels.end(), 0);
    if (cfg.distribution == DataDistribution::kNonIid) {
      std::shuffle(labels.begin(), labels.end(), rng);
      labels.resize(static_cast<std::size_t>(visible_count));
      std::sort(labels.begin(), labels.end());
    }
    std::uniform_int_distribution<int> size_dist(cfg.samples_min, cfg.samples_max);
    const std::int64_t size = size_dist(rng);
    out.push_back(draw_dataset(centers, labels, size, rng));
  }
  return out;
}

ClientDataset generate_holdout(const FelConfig& cfg, std::int64_t size) {
  const Eigen::MatrixXd centers = class_centers(cfg);
  std::vector<int> labels(static_cast<std::size_t>(cfg.num_classes));
  std::iota(labels.begin(), labels.end(), 0);
  Rng rng = make_rng(cfg.seed, "holdout");
  return draw_dataset(centers, labels, size, rng);
}

ModelWeights ground_truth(const FelConfig& cfg) {
  Rng rng = make_rng(cfg.seed, "ground-truth");
  std::normal_distribution<double> normal(0.0, 1.0);
  ModelWeights truth(cfg.model_dim);
  for (Eigen::Index d = 0; d < truth.size(); ++d) truth[d] = normal(rng);
  return truth;
}

double softmax_loss(const ClientDataset& data, const ModelWeights& weights, const FelConfig& cfg) {
  check_dim(weights, cfg);
  const Eigen::MatrixXd probs = softmax_probs(data, weights, cfg);
  double loss = 0.0;
  for (std::int64_t s = 0; s < data.size; ++s) {
    loss -= std::log(std::max(probs(s, data.labels[static_cast<std::size_t>(s)]), 1e-300));
  }
  return loss / static_cast<double>(data.size);
}

ModelWeights softmax_gradient(const ClientDataset& data, const ModelWeights& weights,
                              const FelConfig& cfg) {
  check_dim(weights, cfg);
  Eigen::MatrixXd residual = softmax_probs(data, weights, cfg);
  for (std::int64_t s = 0; s < data.size; ++s) {
    residual(s, data.labels[static_cast<std::size_t>(s)]) -= 1.0;
  }
  residual /= static_cast<double>(data.size);

  ModelWeights grad(cfg.model_dim);
  Eigen::Map<WeightMatrix> g(grad.data(), cfg.num_classes, cfg.feature_dim + 1);
  g.leftCols(cfg.feature_dim) = residual.transpose() * data.features;
  g.col(cfg.feature_dim) = residual.colwise().sum().transpose();
  return grad;
}

ModelWeights local_train(const ClientDataset& dataset, const ModelWeights& init,
                         const FelConfig& cfg, Rng& rng, double noise_scale) {
  check_dim(init, cfg);
  if (cfg.trainer == Trainer::kSyntheticNoise) {
    ModelWeights out = ground_truth(cfg);
    if (noise_scale > 0.0) {
      std::normal_distribution<double> normal(0.0, noise_scale);
      for (Eigen::Index d = 0; d < out.size(); ++d) out[d] += normal(rng);
    }
    return out;
  }
  ModelWeights w = init;
  for (int step = 0; step < cfg.local_steps; ++step) {
    w -= cfg.learning_rate * softmax_gradient(dataset, w, cfg);
  }
  return w;
}

FelCluster::FelCluster(const FelConfig& cfg, std::int64_t node_id)
    : cfg_(cfg),
      node_id_(node_id),
      clients_(generate_cluster_data(cfg, node_id)),
      truth_(ground_truth(cfg)),
      rng_(make_rng(cfg.seed, "cluster-train", {static_cast<std::uint64_t>(node_id)})) {
  for (const auto& c : clients_) dataset_size_ += c.size;
}

ModelWeights FelCluster::run_round(const ModelWeights& global_in) {
  const double noise = cfg_.noise_scale_for(node_id_);
  std::vector<std::int64_t> sizes;
  sizes.reserve(clients_.size());
  for (const auto& c : clients_) sizes.push_back(c.size);

  ModelWeights model = global_in;
  std::vector<ModelWeights> updates(clients_.size());
  for (int it = 0; it < cfg_.fel_iters_per_round; ++it) {
    for (std::size_t c = 0; c < clients_.size(); ++c) {
      updates[c] = local_train(clients_[c], model, cfg_, rng_, noise);
    }
    model = aggregate_global(updates, sizes);
  }
  return model;
}

}  // namespace pofel
