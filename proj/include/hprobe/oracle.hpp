#pragma once

#include <map>
#include <vector>

#include "hprobe/activations.hpp"
#include "hprobe/dataset.hpp"
#include "hprobe/linalg.hpp"
#include "hprobe/probes.hpp"

namespace hprobe {

/// Classical MDS of the tree metric over `tree.labels()` order, truncated or
/// zero-padded to `dims` columns. Negative eigenvalues are clipped to zero.
Matrix mds_embedding(const LabeledTree& tree, int dims);

/// Kruskal stress-1 of an embedding (rows in `tree.labels()` order).
double mds_stress(const LabeledTree& tree, const Matrix& coords);

struct OracleConfig {
  int ambient_dim = 1024;
  int planted_rank = 6;       // r - 1 metric dims plus one depth dim
  double noise_sigma = 0.1;   // isotropic ambient noise
  int distractor_rank = 4;
  double distractor_scale = 1.0;
  double distractor_decay = 1.0;  // scale ratio between consecutive distractor dims
  // Extra noise on the planted coordinates of every row, and additionally on
  // rows of inexact examples.
  double coord_noise = 0.0;
  double inexact_coord_noise = 0.5;
  double inexact_fraction = 0.2;
  // Rows outside the PATH (chain-of-thought pool); they carry no planted signal.
  int cot_rows_per_example = 4;
  int cot_rank = 6;
  double cot_scale = 1.5;
  // Noisy rotated copies of the metric coordinates in their own subspaces.
  int echo_copies = 0;
  double echo_scale = 0.7;
  double echo_decay = 1.0;  // amplitude ratio between consecutive copies
  double echo_noise = 0.0;
  std::vector<int> layers{0};
  std::uint64_t seed = 0;
  std::string model_tag = "oracle";
};

/// 6 planted + 24 decaying distractor + 4x5 graded echo dims: a 50-dim
/// structure in which more retained components buy accuracy but dilute the
/// recovered subspace.
OracleConfig pca_sweep_oracle(std::uint64_t seed);

ojson oracle_config_to_json(const OracleConfig& c);
OracleConfig oracle_config_from_json(const ojson& j);

struct OracleData {
  ActivationFile file;
  std::vector<ScoredResponse> responses;
  std::vector<Basis> planted;        // per layer, D x r
  std::vector<double> layer_scale;   // signal multiplier per layer
  Matrix coords;                     // node rows x r, before noise and scaling
  std::vector<Eigen::Index> node_row_index;  // file row of each coords row
};

/// Synthetic activations with a planted hierarchical subspace. Layers differ
/// by signal scale (peaking two thirds of the way through) and basis.
OracleData plant(const std::vector<TraversalExample>& examples, const OracleConfig& config);

double recovery_score(const Basis& found, const Basis& planted);

/// Sidecar fixture: {model_tag, layers, layer_scale, planted (bases), coords}.
ojson oracle_sidecar(const OracleData& data);
struct Sidecar {
  std::vector<int> layers;
  std::vector<double> layer_scale;
  std::vector<Basis> planted;
  Matrix coords;
  const Basis& basis_for(int layer) const;
};
Sidecar sidecar_from_json(const ojson& j);

/// Mean absolute change of the planted readout U^T x caused by ablation,
/// per row (node rows of `acts`).
Vector readout_shift(const ActivationSet& acts, const Basis& planted, const Basis& ablation);

/// Fraction of planted-readout energy an example's node rows keep after
/// ablation.
std::map<std::string, double> retained_signal(const ActivationSet& acts, const Basis& planted,
                                              const Basis& ablation);

/// Accuracy surrogate: an exact response stays exact when it keeps at least
/// half of its planted energy; otherwise it degrades to a truth prefix of
/// length floor(f * |truth|). Inexact responses are left unchanged.
ScoredResponse simulate_ablated_response(const TraversalExample& example, const ScoredResponse& before,
                                         double retained_fraction);

struct SweepPoint {
  int k = 0;
  double pearson = 0.0;      // test-exact distance pearson
  double selectivity = 0.0;  // mean readout shift under probe-subspace ablation
  double recovery = 0.0;
};

std::vector<SweepPoint> pca_sweep(const OracleData& data, const DatasetIndex& index, const Split& split,
                                  const std::vector<int>& ks, const ProbeConfig& base, int layer = 0);

}  // namespace hprobe
