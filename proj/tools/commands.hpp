#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hprobe::cli {

// Where a command reads and writes. Artifacts live under
// {store}/{setting}/{tag}/{layer}.
struct Common {
  std::string store;
  std::string setting = "tree";
  std::string tag = "oracle";
  std::string dataset;  // default {store}/{setting}/dataset.jsonl
  std::uint64_t seed = 0;
};

struct CreateDatasetOptions {
  Common common;
  std::vector<int> depth_range{1, 2};
  std::vector<int> steps_range{1, 2};
  int num_samples = 1000;
  std::vector<double> sparsity;  // empty or {lo, hi}
  std::string out;
};

struct SynthOptions {
  Common common;
  std::string preset = "default";
  std::vector<int> layers{0, 4, 8, 12};
  int dim = 1024;
  int rank = 6;
  double noise = 0.1;
  double inexact_fraction = 0.2;
  int cot_rows = 4;
};

struct ProbeOptions {
  std::vector<int> layers;  // empty: every layer in the activation file
  int pca_dim = 10;
  double train_split = 0.5;
  double lr = 1e-2;
  double weight_decay = 1e-4;
  int steps = 1500;
  double depth_lambda = 1e-2;
};

struct EvalProbeOptions {
  Common common;
  ProbeOptions probe;
  std::vector<int> proj_dims{2, 3, 4, 5};
  std::vector<int> pca_sweep;
};

struct InterveneOptions {
  Common common;
  std::vector<int> layers;
  int proj_dim = 5;
  std::vector<std::string> kinds{"probe", "random", "pca_cot", "pca_nodes", "full", "none"};
  bool include_rescue = false;
  bool bases_only = false;
  bool skip_causal = false;
};

struct SimilarityOptions {
  Common common;
  ProbeOptions probe;
  int proj_dim = 5;
  int folds = 5;
  int null_draws = 2000;
};

struct GridOptions {
  Common common;
  ProbeOptions probe;
  std::vector<int> grid_p{2, 3, 4, 5};
  std::vector<double> grid_lr{1e-3, 5e-3, 1e-2};
  std::vector<int> grid_steps{500, 1000, 1500};
};

struct ReportOptions {
  Common common;
  int proj_dim = 5;
  std::string out;  // default {store}/{setting}/report
};

void create_dataset(const CreateDatasetOptions& o);
void synth(const SynthOptions& o);
void eval_probe(const EvalProbeOptions& o);
void intervene(const InterveneOptions& o);
void similarity(const SimilarityOptions& o);
void grid(const GridOptions& o);
void report(const ReportOptions& o);

}  // namespace hprobe::cli
