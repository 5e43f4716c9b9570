#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hprobe/activations.hpp"
#include "hprobe/dataset.hpp"
#include "hprobe/linalg.hpp"

namespace hprobe {

/// Lookup from example id to its record; the vector must outlive the index.
class DatasetIndex {
 public:
  explicit DatasetIndex(const std::vector<TraversalExample>& examples);
  const TraversalExample& at(const std::string& id) const;
  bool contains(const std::string& id) const { return by_id_.count(id) != 0; }
  const std::vector<TraversalExample>& examples() const { return *examples_; }

 private:
  const std::vector<TraversalExample>* examples_;
  std::map<std::string, const TraversalExample*> by_id_;
};

struct Split {
  double ratio = 0.5;
  std::uint64_t seed = 0;
  std::map<std::string, bool> is_train;

  bool train(const std::string& id) const;
  std::vector<std::string> ids(bool train_side) const;  // dataset order
};

/// Example-level random split; round(ratio * n) examples go to train.
Split split_examples(const std::vector<TraversalExample>& examples, double ratio, std::uint64_t seed);

/// exact flag per response id.
std::map<std::string, bool> exact_by_id(const std::vector<ScoredResponse>& responses);

struct Pair {
  Eigen::Index i = 0;
  Eigen::Index j = 0;
  double target = 0.0;
  double weight = 1.0;
};

/// All unordered node-row pairs within each example. Weight = inverse
/// frequency of the target value (mean 1 over the population) times
/// (1 + depth_alpha * target).
std::vector<Pair> make_pairs(const ActivationSet& acts, const DatasetIndex& index, double depth_alpha = 1e-2);

/// Tree depth of each node row.
Vector row_depths(const ActivationSet& acts, const DatasetIndex& index);

struct DistanceTrainConfig {
  int p = 5;
  double lr = 1e-2;
  double weight_decay = 1e-4;
  int steps = 1500;
  double depth_alpha = 1e-2;
  std::uint64_t seed = 0;
};

struct DistanceProbe {
  Matrix b;  // p x k
  DistanceTrainConfig config;
  int layer = 0;
  std::vector<double> loss_history;  // loss before each update, then the final loss
};

/// Called after `step` updates have been applied (step = 1..steps).
using Checkpoint = std::function<void(int step, const Matrix& b)>;

/// Full-batch AdamW on the weighted squared error between |B (z_i - z_j)|
/// and the pair target.
DistanceProbe train_distance_probe(const std::vector<Pair>& pairs, const Matrix& z,
                                   const DistanceTrainConfig& config, int layer = 0,
                                   const Checkpoint& checkpoint = nullptr);

/// Weighted loss of `b` on `pairs`, as minimized by training.
double distance_loss(const Matrix& b, const std::vector<Pair>& pairs, const Matrix& z);
Vector predict_distances(const Matrix& b, const std::vector<Pair>& pairs, const Matrix& z);
Vector pair_targets(const std::vector<Pair>& pairs);

struct DepthProbe {
  Vector w;  // k, acts on raw (unstandardized) coordinates
  double b = 0.0;
  double lambda = 1e-2;
  int layer = 0;
  bool degenerate = false;  // training depths had a single value
};

/// Standardized, inverse-depth-frequency-weighted ridge; the scaler is
/// folded back into (w, b).
DepthProbe train_depth_probe(const Matrix& z, const Vector& depths, double lambda = 1e-2, int layer = 0);
Vector predict_depths(const DepthProbe& probe, const Matrix& z);

struct ProbeConfig {
  int pca_dim = 10;
  DistanceTrainConfig distance;
  double depth_lambda = 1e-2;
  PcaOptions pca_options;
};

/// PCA (fit on train node rows), distance probe and depth probe for one layer.
struct LayerFit {
  int layer = 0;
  PcaModel pca;
  DistanceProbe distance;
  DepthProbe depth;
};

LayerFit fit_layer(const ActivationSet& acts, const DatasetIndex& index, const Split& split,
                   const ProbeConfig& config);

struct BucketMetrics {
  Metrics distance;
  Metrics depth;
  std::size_t n_pairs = 0;
  std::size_t n_tokens = 0;
};

struct EvalReport {
  std::string model_tag;
  int layer = 0;
  int p = 0;
  BucketMetrics train;
  BucketMetrics test_exact;
  BucketMetrics test_inexact;
  BucketMetrics shuffled;  // test rows, targets from label-permuted trees
};

/// Examples missing from `exact` count as exact (no responses supplied).
EvalReport evaluate(const LayerFit& fit, const ActivationSet& acts, const DatasetIndex& index,
                    const Split& split, const std::map<std::string, bool>& exact,
                    std::uint64_t shuffle_seed);

ojson eval_report_to_json(const EvalReport& r);
EvalReport eval_report_from_json(const ojson& j);

/// span of the lifted rows of B and the lifted depth direction.
Basis hierarchical_subspace(const DistanceProbe& dp, const DepthProbe& zp, const PcaModel& pca);

struct NullStats {
  double mean = 0.0;
  double sd = 0.0;
};

struct StabilityReport {
  int folds = 0;
  Matrix distance_similarity;  // folds x folds
  Matrix depth_cosine;         // folds x folds
  double mean_distance_similarity = 0.0;
  double mean_depth_cosine = 0.0;
  // Same statistic (mean off-diagonal) for `folds` random subspaces / directions.
  NullStats distance_null;
  NullStats depth_null;
};

/// Splits the train examples into `folds` disjoint parts, fits a shared PCA
/// on all train rows and one probe pair per part.
StabilityReport cross_split_stability(const ActivationSet& acts, const DatasetIndex& index,
                                      const Split& split, int folds, const ProbeConfig& config,
                                      int null_draws = 2000);

NullStats random_subspace_null(int k, int p, int count, int draws, std::uint64_t seed);
NullStats random_direction_null(int k, int count, int draws, std::uint64_t seed);

ojson stability_to_json(const StabilityReport& r);

struct GridSpec {
  std::vector<int> p{2, 3, 4, 5};
  std::vector<double> lr{1e-3, 5e-3, 1e-2};
  std::vector<int> steps{500, 1000, 1500};
};

struct GridCell {
  int layer = 0;
  int p = 0;
  double lr = 0.0;
  int steps = 0;
  double train_mse = 0.0;
  double test_mse = 0.0;
  double test_pearson = 0.0;
};

/// One training run per (layer, p, lr) to the largest step count, scored
/// at every requested step count. Test MSE is over all test pairs.
std::vector<GridCell> grid_search(const std::vector<ActivationSet>& layers, const DatasetIndex& index,
                                  const Split& split, const GridSpec& grid, const ProbeConfig& base);

/// Lowest test MSE per p (ties: earlier cell).
std::vector<GridCell> best_per_p(const std::vector<GridCell>& cells);

ojson grid_cell_to_json(const GridCell& c);

// Probe artifacts.
ojson distance_probe_to_json(const DistanceProbe& p, const std::string& dataset_hash, const Split& split);
ojson depth_probe_to_json(const DepthProbe& p, const std::string& dataset_hash, const Split& split);
DistanceProbe distance_probe_from_json(const ojson& j);
DepthProbe depth_probe_from_json(const ojson& j);

}  // namespace hprobe
