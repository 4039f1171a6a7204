#pragma once

// Bottom layer of the hierarchy: per-cluster clients with synthetic data,
// local training, and intra-cluster FedAvg producing each node's FEL model.

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <vector>

#include "pofel/model_core.hpp"
#include "pofel/rng.hpp"

namespace pofel {

enum class Trainer { kSyntheticNoise, kToyClassifier };
enum class DataDistribution { kIid, kNonIid };

struct FelConfig {
  int clients_per_cluster = 5;
  int fel_iters_per_round = 3;
  int model_dim = 16;
  Trainer trainer = Trainer::kSyntheticNoise;
  DataDistribution distribution = DataDistribution::kIid;
  double label_skew = 0.6;
  std::uint64_t seed = 1;

  // Toy classifier: model_dim must equal num_classes * (feature_dim + 1).
  int num_classes = 10;
  int feature_dim = 8;
  int samples_min = 50;
  int samples_max = 50;
  double class_separation = 3.0;
  double learning_rate = 0.5;
  int local_steps = 1;

  // Synthetic-noise trainer.
  double noise_scale = 0.1;
  std::map<std::int64_t, double> noise_scale_overrides;

  void validate() const;
  double noise_scale_for(std::int64_t node_id) const;
};

struct ClientDataset {
  Eigen::MatrixXd features;   // size x feature_dim
  std::vector<int> labels;    // size entries in [0, num_classes)
  std::int64_t size = 0;
};

std::vector<ClientDataset> generate_cluster_data(const FelConfig& cfg, std::int64_t node_id);

/// Held-out evaluation set drawn from the same class blobs, all labels present.
ClientDataset generate_holdout(const FelConfig& cfg, std::int64_t size);

/// The vector every synthetic-noise client is perturbed around.
ModelWeights ground_truth(const FelConfig& cfg);

/// Mean cross-entropy of the linear softmax model on `data`.
double softmax_loss(const ClientDataset& data, const ModelWeights& weights, const FelConfig& cfg);
ModelWeights softmax_gradient(const ClientDataset& data, const ModelWeights& weights,
                              const FelConfig& cfg);

/// One local update. The toy trainer takes `cfg.local_steps` full-batch gradient
/// steps of size `cfg.learning_rate`; the synthetic trainer ignores the data and
/// returns ground_truth + N(0, noise_scale²) drawn from `rng`.
ModelWeights local_train(const ClientDataset& dataset, const ModelWeights& init,
                         const FelConfig& cfg, Rng& rng, double noise_scale);

/// One edge cluster: its clients' datasets and a private generator.
class FelCluster {
 public:
  FelCluster(const FelConfig& cfg, std::int64_t node_id);

  ClusterInfo info() const { return {node_id_, dataset_size_}; }
  const std::vector<ClientDataset>& clients() const { return clients_; }

  /// fel_iters_per_round iterations of distribute -> local_train -> FedAvg.
  ModelWeights run_round(const ModelWeights& global_in);

 private:
  FelConfig cfg_;
  std::int64_t node_id_;
  std::int64_t dataset_size_ = 0;
  std::vector<ClientDataset> clients_;
  ModelWeights truth_;
  Rng rng_;
};

inline ModelWeights run_fel_round(FelCluster& cluster, const ModelWeights& global_in) {
  return cluster.run_round(global_in);
}

}  // namespace pofel
