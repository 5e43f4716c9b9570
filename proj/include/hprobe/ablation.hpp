#pragma once

#include <optional>
#include <vector>

#include "hprobe/activations.hpp"
#include "hprobe/probes.hpp"

namespace hprobe {

struct AblationSpec {
  Provenance kind = Provenance::kProbe;
  int rank = 0;  // ignored for probe (taken from the probes), full and none
  int layer = 0;
  std::uint64_t seed = 0;
};

/// probe: hierarchical subspace of `fit`; random: seeded Gaussian columns;
/// pca_cot: top components of every row; pca_nodes: top components of PATH
/// node rows; full: identity; none: empty.
Basis build_basis(const AblationSpec& spec, const ActivationSet& acts, const LayerFit* fit);

/// The probe basis followed by rank-matched random, pca_cot and pca_nodes
/// bases (when a pool exists), then full and none.
std::vector<Basis> standard_bases(const ActivationSet& acts, const LayerFit& fit, std::uint64_t seed);

ActivationSet ablate_set(const ActivationSet& acts, const Basis& basis);

struct KindAccuracy {
  std::string kind;
  std::size_t n = 0;          // evaluated population
  std::size_t n_exact = 0;    // originally exact within it
  std::size_t n_inexact = 0;  // originally inexact within it
  double exact_before = 0.0;
  double exact_after = 0.0;
  double partial_before = 0.0;
  double partial_after = 0.0;
  double exact_retention = 0.0;
  std::optional<double> inexact_rescue;
};

/// Population: originally exact ids, or every id with `include_rescue`.
KindAccuracy accuracy_protocol(const std::string& kind, const std::vector<ScoredResponse>& before,
                               const std::vector<ScoredResponse>& after, bool include_rescue = false);

struct LogitSummary {
  int layer = 0;
  std::string kind;
  std::size_t n = 0;
  double mean = 0.0;
  double ci_low = 0.0;   // normal-approximation 95% interval
  double ci_high = 0.0;
  int rank = 0;          // 1 = largest mean shift at this layer
};

/// Sorted by layer, then rank.
std::vector<LogitSummary> logit_protocol(const std::vector<LogitShift>& shifts);

struct AblationReport {
  int layer = 0;
  bool include_rescue = false;
  std::vector<KindAccuracy> accuracy;
  std::vector<LogitSummary> logit;
};

ojson ablation_report_to_json(const AblationReport& r);
AblationReport ablation_report_from_json(const ojson& j);

struct CausalReport {
  double unablated = 0.0;  // test-exact distance pearson of a fresh fit
  double probe = 0.0;      // after ablating the recovered subspace
  double random = 0.0;     // after a rank-matched random ablation
  double none = 0.0;       // after the rank-0 ablation
  int rank = 0;
};

/// Re-fits probes on ablated activations and reports the recovered-distance
/// Pearson for each condition.
CausalReport oracle_causal_check(const ActivationSet& acts, const DatasetIndex& index, const Split& split,
                                 const std::map<std::string, bool>& exact, const ProbeConfig& config,
                                 std::uint64_t seed);

ojson causal_report_to_json(const CausalReport& r);

}  // namespace hprobe
