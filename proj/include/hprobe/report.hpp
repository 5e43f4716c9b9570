#pragma once

#include <map>
#include <string>
#include <vector>

#include "hprobe/ablation.hpp"
#include "hprobe/dataset.hpp"
#include "hprobe/probes.hpp"

namespace hprobe {

struct TextTable {
  std::string caption;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Markdown pipe table, caption on the first line.
std::string render_table(const TextTable& t);

std::string fixed(double v, int digits = 4);
std::string percent(double fraction);  // 0.51515 -> "51.52%"

/// Model | p=2 best MSE | ... : lowest test distance MSE over layers and
/// grid cells for each p.
TextTable best_mse_table(const std::map<std::string, std::vector<GridCell>>& cells_by_model);

/// Model | Exact Acc. | Partial Acc.
TextTable accuracy_table(const std::map<std::string, std::vector<ScoredResponse>>& responses_by_model);

/// Model | Depth MSE (test, best layer) | Pearson r (test, best layer) | Layer.
/// Best layer = lowest test-exact depth MSE.
TextTable depth_table(const std::map<std::string, std::vector<EvalReport>>& reports_by_model);

/// Category | Accuracy | n, one category per (depth, steps) plus Overall.
TextTable category_table(const std::vector<TraversalExample>& examples, const std::vector<ScoredResponse>& responses);

/// Rows Accuracy / Exact retention / Inexact rescue; a Baseline column then
/// one column per kind.
TextTable ablation_table(const std::vector<KindAccuracy>& kinds);

/// Layer, kind, mean absolute shift, 95% CI, rank, n
TextTable logit_table(const std::vector<LogitSummary>& rows);

}  // namespace hprobe
