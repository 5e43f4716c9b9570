#include "hprobe/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hprobe/error.hpp"
#include "hprobe/rng.hpp"

namespace hprobe {

namespace {

Matrix gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

Matrix random_rotation(Rng& rng, int n) { return orthonormalize(gaussian(rng, n, n)).matrix(); }

std::vector<double> layer_profile(std::size_t count) {
  if (count == 1) return {1.0};
  std::vector<double> s;
  for (std::size_t i = 0; i < count; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(count - 1);
    const double u = (x - 2.0 / 3.0) / 0.35;
    s.push_back(0.25 + 0.75 * std::exp(-u * u));
  }
  return s;
}

std::string join_path(const Path& p) {
  std::string s = "PATH:";
  for (auto v : p) s += " " + std::to_string(v);
  return s;
}

// A wrong answer made of labels from the tree.
Path corrupt(const TraversalExample& ex, Rng& rng) {
  Path p = ex.truth;
  const auto i = static_cast<std::size_t>(rng.below(p.size()));
  std::vector<Label> options;
  for (Label a : ex.tree.labels()) {
    if (a == p[i] || (i > 0 && a == p[i - 1]) || (i + 1 < p.size() && a == p[i + 1])) continue;
    options.push_back(a);
  }
  if (options.empty()) {
    p.pop_back();
  } else {
    p[i] = options[rng.below(options.size())];
  }
  return p;
}

struct LayerBases {
  Matrix u;        // D x r planted
  Matrix distract; // D x q
  Matrix cot;      // D x cot_rank
  std::vector<Matrix> echo;  // D x (r-1) each
};

}  // namespace

Matrix mds_embedding(const LabeledTree& tree, int dims) {
  if (dims < 1) throw InputError("MDS needs at least one dimension");
  const auto labels = tree.labels();
  const auto n = static_cast<Eigen::Index>(labels.size());
  Matrix d2(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = tree_distance(tree, labels[static_cast<std::size_t>(i)], labels[static_cast<std::size_t>(j)]);
      d2(i, j) = d * d;
    }
  }
  const Matrix j = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  const Matrix b = -0.5 * j * d2 * j;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(b);
  Matrix out = Matrix::Zero(n, dims);
  for (int c = 0; c < dims && c < n; ++c) {
    const Eigen::Index src = n - 1 - c;  // eigenvalues ascend
    const double lambda = eig.eigenvalues()(src);
    if (lambda <= 1e-12) continue;
    Vector v = eig.eigenvectors().col(src);
    Eigen::Index at = 0;
    v.cwiseAbs().maxCoeff(&at);
    if (v(at) < 0) v = -v;
    out.col(c) = std::sqrt(lambda) * v;
  }
  return out;
}

double mds_stress(const LabeledTree& tree, const Matrix& coords) {
  const auto labels = tree.labels();
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      const double d = tree_distance(tree, labels[i], labels[j]);
      const double e = (coords.row(static_cast<Eigen::Index>(i)) - coords.row(static_cast<Eigen::Index>(j))).norm();
      num += (e - d) * (e - d);
      den += d * d;
    }
  }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

OracleConfig pca_sweep_oracle(std::uint64_t seed) {
  OracleConfig c;
  c.seed = seed;
  c.distractor_rank = 24;
  c.distractor_scale = 0.5;
  c.distractor_decay = 0.9;
  c.coord_noise = 0.6;
  c.echo_copies = 4;
  c.echo_scale = 0.7;
  c.echo_decay = 0.65;
  c.echo_noise = 0.5;
  return c;
}

ojson oracle_config_to_json(const OracleConfig& c) {
  ojson j;
  j["ambient_dim"] = c.ambient_dim;
  j["planted_rank"] = c.planted_rank;
  j["noise_sigma"] = c.noise_sigma;
  j["distractor_rank"] = c.distractor_rank;
  j["distractor_scale"] = c.distractor_scale;
  j["distractor_decay"] = c.distractor_decay;
  j["coord_noise"] = c.coord_noise;
  j["inexact_coord_noise"] = c.inexact_coord_noise;
  j["inexact_fraction"] = c.inexact_fraction;
  j["cot_rows_per_example"] = c.cot_rows_per_example;
  j["cot_rank"] = c.cot_rank;
  j["cot_scale"] = c.cot_scale;
  j["echo_copies"] = c.echo_copies;
  j["echo_scale"] = c.echo_scale;
  j["echo_decay"] = c.echo_decay;
  j["echo_noise"] = c.echo_noise;
  j["layers"] = c.layers;
  j["seed"] = c.seed;
  j["model_tag"] = c.model_tag;
  return j;
}

OracleConfig oracle_config_from_json(const ojson& j) {
  OracleConfig c;
  c.ambient_dim = j.value("ambient_dim", c.ambient_dim);
  c.planted_rank = j.value("planted_rank", c.planted_rank);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.distractor_rank = j.value("distractor_rank", c.distractor_rank);
  c.distractor_scale = j.value("distractor_scale", c.distractor_scale);
  c.distractor_decay = j.value("distractor_decay", c.distractor_decay);
  c.coord_noise = j.value("coord_noise", c.coord_noise);
  c.inexact_coord_noise = j.value("inexact_coord_noise", c.inexact_coord_noise);
  c.inexact_fraction = j.value("inexact_fraction", c.inexact_fraction);
  c.cot_rows_per_example = j.value("cot_rows_per_example", c.cot_rows_per_example);
  c.cot_rank = j.value("cot_rank", c.cot_rank);
  c.cot_scale = j.value("cot_scale", c.cot_scale);
  c.echo_copies = j.value("echo_copies", c.echo_copies);
  c.echo_scale = j.value("echo_scale", c.echo_scale);
  c.echo_decay = j.value("echo_decay", c.echo_decay);
  c.echo_noise = j.value("echo_noise", c.echo_noise);
  c.layers = j.value("layers", c.layers);
  c.seed = j.value("seed", c.seed);
  c.model_tag = j.value("model_tag", c.model_tag);
  return c;
}

OracleData plant(const std::vector<TraversalExample>& examples, const OracleConfig& cfg) {
  if (examples.empty()) throw InputError("oracle needs a nonempty dataset");
  const int r = cfg.planted_rank;
  if (r - 1 < 1) throw InputError("planted rank must be at least 2 (one metric dimension plus depth)");
  if (cfg.noise_sigma < 0.0 || cfg.coord_noise < 0.0 || cfg.inexact_coord_noise < 0.0 || cfg.echo_noise < 0.0) {
    throw InputError("oracle noise levels must be non-negative");
  }
  if (!(cfg.inexact_fraction >= 0.0 && cfg.inexact_fraction <= 1.0)) {
    throw InputError("inexact fraction must lie in [0, 1]");
  }
  if (cfg.layers.empty()) throw InputError("oracle needs at least one layer");
  const int q = cfg.distractor_rank;
  const int cot_rank = cfg.cot_rows_per_example > 0 ? cfg.cot_rank : 0;
  const int used = r + q + cot_rank + cfg.echo_copies * (r - 1);
  if (q < 0 || cot_rank < 0 || cfg.echo_copies < 0 || used >= cfg.ambient_dim) {
    throw InputError("oracle subspaces need " + std::to_string(used) + " dimensions; ambient dimension is " +
                     std::to_string(cfg.ambient_dim));
  }
  if (!(cfg.distractor_decay > 0.0)) throw InputError("distractor decay must be positive");
  const Eigen::Index d = cfg.ambient_dim;
  Vector distractor_sd(q);
  for (int k = 0; k < q; ++k) distractor_sd(k) = cfg.distractor_scale * std::pow(cfg.distractor_decay, k);

  OracleData out;
  out.layer_scale = layer_profile(cfg.layers.size());
  out.file.model_tag = cfg.model_tag;
  out.file.layers = cfg.layers;

  std::vector<LayerBases> bases;
  for (std::size_t l = 0; l < cfg.layers.size(); ++l) {
    Rng rng(derive_seed(derive_seed(cfg.seed, 2), l));
    const Matrix all = orthonormalize(gaussian(rng, d, used)).matrix();
    LayerBases b;
    int at = 0;
    b.u = all.middleCols(at, r);
    at += r;
    b.distract = all.middleCols(at, q);
    at += q;
    b.cot = all.middleCols(at, cot_rank);
    at += cot_rank;
    for (int e = 0; e < cfg.echo_copies; ++e, at += r - 1) b.echo.push_back(all.middleCols(at, r - 1));
    out.planted.emplace_back(b.u, Provenance::kPlanted);
    bases.push_back(std::move(b));
  }
  // Fixed rotation per echo copy, shared by all layers.
  std::vector<Matrix> echo_rot;
  {
    Rng rng(derive_seed(cfg.seed, 4));
    for (int e = 0; e < cfg.echo_copies; ++e) echo_rot.push_back(random_rotation(rng, r - 1));
  }

  // First pass: responses, alignment and clean coordinates.
  struct RowPlan {
    Vector clean;  // r, empty for chain-of-thought rows
    Vector noisy;
  };
  std::vector<RowPlan> plan;
  std::vector<std::size_t> row_example;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    Rng rng(derive_seed(derive_seed(cfg.seed, 1), i));
    const bool inexact = rng.uniform01() < cfg.inexact_fraction;
    const Path path = inexact ? corrupt(ex, rng) : ex.truth;
    out.responses.push_back(score_response(ex, join_path(path)));

    const Matrix emb = mds_embedding(ex.tree, r - 1) * random_rotation(rng, r - 1);
    const auto labels = ex.tree.labels();
    std::map<Label, Eigen::Index> slot;
    for (std::size_t s = 0; s < labels.size(); ++s) slot[labels[s]] = static_cast<Eigen::Index>(s);

    for (const auto& a : align_path(ex.id, path)) {
      Vector c(r);
      c.head(r - 1) = emb.row(slot.at(a.node_label)).transpose();
      c(r - 1) = node_depth(ex.tree, a.node_label);
      Vector noisy = c;
      for (int k = 0; k < r; ++k) {
        noisy(k) += cfg.coord_noise * rng.normal() + (inexact ? cfg.inexact_coord_noise * rng.normal() : 0.0);
      }
      out.node_row_index.push_back(static_cast<Eigen::Index>(out.file.alignment.size()));
      out.file.alignment.push_back(a);
      plan.push_back({c, noisy});
      row_example.push_back(i);
    }
    for (int c = 0; c < cfg.cot_rows_per_example; ++c) {
      out.file.alignment.push_back({ex.id, -1, -1, 0});
      plan.push_back({});
      row_example.push_back(i);
    }
  }
  out.coords.resize(static_cast<Eigen::Index>(out.node_row_index.size()), r);
  for (std::size_t k = 0; k < out.node_row_index.size(); ++k) {
    out.coords.row(static_cast<Eigen::Index>(k)) = plan[static_cast<std::size_t>(out.node_row_index[k])].clean.transpose();
  }

  // Second pass: one matrix per layer.
  const auto n = static_cast<Eigen::Index>(plan.size());
  for (std::size_t l = 0; l < cfg.layers.size(); ++l) {
    const auto& b = bases[l];
    const double scale = out.layer_scale[l];
    Matrix x(n, d);
    std::size_t current = examples.size();
    Rng rng(0);
    for (Eigen::Index row = 0; row < n; ++row) {
      const std::size_t ex = row_example[static_cast<std::size_t>(row)];
      if (ex != current) {
        rng = Rng(derive_seed(derive_seed(cfg.seed, 10 + l), ex));
        current = ex;
      }
      const auto& p = plan[static_cast<std::size_t>(row)];
      Vector v = b.distract * gaussian(rng, q, 1).col(0).cwiseProduct(distractor_sd);
      if (p.noisy.size() > 0) {
        v += scale * (b.u * p.noisy);
        for (int e = 0; e < cfg.echo_copies; ++e) {
          const Vector c = p.clean.head(r - 1) + gaussian(rng, r - 1, 1, cfg.echo_noise).col(0);
          v += (scale * cfg.echo_scale * std::pow(cfg.echo_decay, e)) * (b.echo[static_cast<std::size_t>(e)] * (echo_rot[static_cast<std::size_t>(e)] * c));
        }
      } else {
        v += b.cot * gaussian(rng, cot_rank, 1, cfg.cot_scale).col(0);
      }
      if (cfg.noise_sigma > 0.0) v += gaussian(rng, d, 1, cfg.noise_sigma).col(0);
      x.row(row) = v.transpose();
    }
    out.file.data.push_back(std::move(x));
  }
  return out;
}

double recovery_score(const Basis& found, const Basis& planted) { return subspace_similarity(found, planted); }

ojson oracle_sidecar(const OracleData& data) {
  ojson j;
  j["model_tag"] = data.file.model_tag;
  j["layers"] = data.file.layers;
  j["layer_scale"] = data.layer_scale;
  j["planted"] = ojson::array();
  for (const auto& b : data.planted) j["planted"].push_back(basis_to_json(b));
  j["coords"] = matrix_to_json(data.coords);
  j["node_rows"] = data.node_row_index;
  return j;
}

const Basis& Sidecar::basis_for(int layer) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i] == layer) return planted[i];
  }
  throw InputError("sidecar has no planted basis for layer " + std::to_string(layer));
}

Sidecar sidecar_from_json(const ojson& j) {
  try {
    Sidecar s;
    s.layers = j.at("layers").get<std::vector<int>>();
    s.layer_scale = j.at("layer_scale").get<std::vector<double>>();
    for (const auto& b : j.at("planted")) s.planted.push_back(basis_from_json(b));
    s.coords = matrix_from_json(j.at("coords"));
    if (s.planted.size() != s.layers.size()) throw DataIntegrityError("sidecar layers and bases disagree");
    return s;
  } catch (const nlohmann::json::exception& ex) {
    throw DataIntegrityError(std::string("malformed oracle sidecar: ") + ex.what());
  }
}

Vector readout_shift(const ActivationSet& acts, const Basis& planted, const Basis& ablation) {
  const ActivationSet nodes = node_rows(acts);
  const Matrix removed = nodes.rows - ablate_rows(nodes.rows, ablation);
  const Matrix delta = removed * planted.matrix();  // rows x r
  return delta.cwiseAbs().rowwise().mean();
}

std::map<std::string, double> retained_signal(const ActivationSet& acts, const Basis& planted, const Basis& ablation) {
  const ActivationSet nodes = node_rows(acts);
  const Matrix before = nodes.rows * planted.matrix();
  const Matrix after = ablate_rows(nodes.rows, ablation) * planted.matrix();
  std::map<std::string, std::pair<double, double>> energy;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto& e = energy[nodes.alignment[i].example_id];
    e.first += after.row(static_cast<Eigen::Index>(i)).squaredNorm();
    e.second += before.row(static_cast<Eigen::Index>(i)).squaredNorm();
  }
  std::map<std::string, double> out;
  for (const auto& [id, e] : energy) out[id] = e.second > 0.0 ? e.first / e.second : 1.0;
  return out;
}

ScoredResponse simulate_ablated_response(const TraversalExample& example, const ScoredResponse& before,
                                         double retained_fraction) {
  if (!before.exact || retained_fraction >= 0.5) return before;
  const auto keep = static_cast<std::size_t>(std::floor(std::max(0.0, retained_fraction) *
                                                        static_cast<double>(example.truth.size())));
  return score_response(example, join_path(Path(example.truth.begin(), example.truth.begin() + static_cast<long>(keep))));
}

std::vector<SweepPoint> pca_sweep(const OracleData& data, const DatasetIndex& index, const Split& split,
                                  const std::vector<int>& ks, const ProbeConfig& base, int layer) {
  const ActivationSet acts = data.file.layer_set(layer);
  const auto it = std::find(data.file.layers.begin(), data.file.layers.end(), layer);
  if (it == data.file.layers.end()) throw InputError("layer " + std::to_string(layer) + " not in oracle data");
  const Basis& planted = data.planted[static_cast<std::size_t>(it - data.file.layers.begin())];
  const auto exact = exact_by_id(data.responses);
  std::vector<SweepPoint> out;
  for (int k : ks) {
    ProbeConfig pc = base;
    pc.pca_dim = k;
    const LayerFit fit = fit_layer(acts, index, split, pc);
    const EvalReport rep = evaluate(fit, acts, index, split, exact, derive_seed(split.seed, 1));
    const Basis h = hierarchical_subspace(fit.distance, fit.depth, fit.pca);
    out.push_back({k, rep.test_exact.distance.pearson, readout_shift(acts, planted, h).mean(),
                   recovery_score(h, planted)});
  }
  return out;
}

}  // namespace hprobe
