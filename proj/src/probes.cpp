#include "hprobe/probes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "hprobe/error.hpp"
#include "hprobe/rng.hpp"

namespace hprobe {

namespace {

Matrix gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

// Row i minus row j for every pair.
Matrix pair_deltas(const std::vector<Pair>& pairs, const Matrix& z) {
  Matrix d(static_cast<Eigen::Index>(pairs.size()), z.cols());
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    d.row(static_cast<Eigen::Index>(r)) = z.row(pairs[r].i) - z.row(pairs[r].j);
  }
  return d;
}

// Inverse frequency of each (integer-valued) key, rescaled to mean 1.
Vector inverse_frequency(const std::vector<long>& keys) {
  std::map<long, std::size_t> count;
  for (long k : keys) ++count[k];
  Vector w(static_cast<Eigen::Index>(keys.size()));
  for (std::size_t i = 0; i < keys.size(); ++i) w(static_cast<Eigen::Index>(i)) = 1.0 / count[keys[i]];
  if (w.size() > 0) w *= static_cast<double>(w.size()) / w.sum();
  return w;
}

const TraversalExample& example_for_row(const ActivationSet& acts, const DatasetIndex& index, std::size_t row) {
  const auto& a = acts.alignment[row];
  if (!index.contains(a.example_id)) {
    throw DataIntegrityError("row " + std::to_string(row) + " refers to unknown example " + a.example_id);
  }
  const auto& ex = index.at(a.example_id);
  if (!ex.tree.has_label(a.node_label)) {
    throw DataIntegrityError("row " + std::to_string(row) + " (" + a.example_id + ", path index " +
                             std::to_string(a.path_index) + "): label " + std::to_string(a.node_label) +
                             " is not in the tree");
  }
  return ex;
}

// Row indices grouped by example, in first-appearance order.
std::vector<std::vector<Eigen::Index>> rows_by_example(const ActivationSet& acts) {
  std::map<std::string, std::size_t> slot;
  std::vector<std::vector<Eigen::Index>> groups;
  for (std::size_t r = 0; r < acts.alignment.size(); ++r) {
    const auto& a = acts.alignment[r];
    if (!a.is_node()) continue;
    auto [it, fresh] = slot.emplace(a.example_id, groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(static_cast<Eigen::Index>(r));
  }
  return groups;
}

std::set<std::string> id_set(const std::vector<std::string>& ids) { return {ids.begin(), ids.end()}; }

ActivationSet rows_of(const ActivationSet& nodes, const std::set<std::string>& ids) {
  return filter_rows(nodes, [&](const RowAlignment& a) { return ids.count(a.example_id) != 0; });
}

BucketMetrics bucket_metrics(const LayerFit& fit, const ActivationSet& rows, const DatasetIndex& index) {
  BucketMetrics m;
  m.n_tokens = rows.size();
  if (rows.size() == 0) return m;
  const Matrix z = pca_project_rows(fit.pca, rows.rows);
  const auto pairs = make_pairs(rows, index, 0.0);
  m.n_pairs = pairs.size();
  if (!pairs.empty()) m.distance = metrics(predict_distances(fit.distance.b, pairs, z), pair_targets(pairs));
  m.depth = metrics(predict_depths(fit.depth, z), row_depths(rows, index));
  return m;
}

ojson metrics_to_json(const Metrics& m) {
  ojson j;
  j["mse"] = m.mse;
  j["pearson"] = m.pearson;
  j["pearson_defined"] = m.pearson_defined;
  j["n"] = m.n;
  return j;
}

Metrics metrics_from_json(const ojson& j) {
  return {j.at("mse").get<double>(), j.at("pearson").get<double>(), j.at("pearson_defined").get<bool>(),
          j.at("n").get<std::size_t>()};
}

ojson bucket_to_json(const BucketMetrics& b) {
  ojson j;
  j["n_pairs"] = b.n_pairs;
  j["n_tokens"] = b.n_tokens;
  j["distance"] = metrics_to_json(b.distance);
  j["depth"] = metrics_to_json(b.depth);
  return j;
}

BucketMetrics bucket_from_json(const ojson& j) {
  return {metrics_from_json(j.at("distance")), metrics_from_json(j.at("depth")), j.at("n_pairs").get<std::size_t>(),
          j.at("n_tokens").get<std::size_t>()};
}

double off_diagonal_mean(const Matrix& m) {
  double s = 0.0;
  int n = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      s += m(i, j);
      ++n;
    }
  }
  return n ? s / n : 0.0;
}

NullStats summarize(const std::vector<double>& xs) {
  NullStats s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  for (double x : xs) s.sd += (x - s.mean) * (x - s.mean);
  s.sd = xs.size() > 1 ? std::sqrt(s.sd / static_cast<double>(xs.size() - 1)) : 0.0;
  return s;
}

}  // namespace

DatasetIndex::DatasetIndex(const std::vector<TraversalExample>& examples) : examples_(&examples) {
  for (const auto& e : examples) {
    if (!by_id_.emplace(e.id, &e).second) throw DataIntegrityError("duplicate example id " + e.id);
  }
}

const TraversalExample& DatasetIndex::at(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw DataIntegrityError("unknown example id " + id);
  return *it->second;
}

bool Split::train(const std::string& id) const {
  auto it = is_train.find(id);
  if (it == is_train.end()) throw DataIntegrityError("example " + id + " is not part of the split");
  return it->second;
}

std::vector<std::string> Split::ids(bool train_side) const {
  std::vector<std::string> out;
  for (const auto& [id, t] : is_train) {
    if (t == train_side) out.push_back(id);
  }
  return out;
}

Split split_examples(const std::vector<TraversalExample>& examples, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw InputError("train split must lie strictly between 0 and 1");
  const auto n = examples.size();
  const auto n_train = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(n)));
  if (n_train == 0 || n_train == n) {
    throw InputError("train split " + std::to_string(ratio) + " leaves one side empty for " + std::to_string(n) +
                     " examples");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span(order));
  Split s{ratio, seed, {}};
  for (std::size_t r = 0; r < n; ++r) s.is_train[examples[order[r]].id] = r < n_train;
  return s;
}

std::map<std::string, bool> exact_by_id(const std::vector<ScoredResponse>& responses) {
  std::map<std::string, bool> out;
  for (const auto& r : responses) {
    if (!out.emplace(r.id, r.exact).second) throw DataIntegrityError("duplicate response for " + r.id);
  }
  return out;
}

std::vector<Pair> make_pairs(const ActivationSet& acts, const DatasetIndex& index, double depth_alpha) {
  std::vector<Pair> pairs;
  std::vector<long> keys;
  for (const auto& group : rows_by_example(acts)) {
    for (std::size_t a = 0; a < group.size(); ++a) {
      const auto& ex = example_for_row(acts, index, static_cast<std::size_t>(group[a]));
      for (std::size_t b = a + 1; b < group.size(); ++b) {
        example_for_row(acts, index, static_cast<std::size_t>(group[b]));
        const int d = tree_distance(ex.tree, acts.alignment[static_cast<std::size_t>(group[a])].node_label,
                                    acts.alignment[static_cast<std::size_t>(group[b])].node_label);
        pairs.push_back({group[a], group[b], static_cast<double>(d), 1.0});
        keys.push_back(d);
      }
    }
  }
  const Vector w = inverse_frequency(keys);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    pairs[i].weight = w(static_cast<Eigen::Index>(i)) * (1.0 + depth_alpha * pairs[i].target);
  }
  return pairs;
}

Vector row_depths(const ActivationSet& acts, const DatasetIndex& index) {
  Vector d(static_cast<Eigen::Index>(acts.size()));
  for (std::size_t r = 0; r < acts.size(); ++r) {
    if (!acts.alignment[r].is_node()) throw InputError("depth requested for a non-node row");
    d(static_cast<Eigen::Index>(r)) = node_depth(example_for_row(acts, index, r).tree, acts.alignment[r].node_label);
  }
  return d;
}

Vector pair_targets(const std::vector<Pair>& pairs) {
  Vector t(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) t(static_cast<Eigen::Index>(i)) = pairs[i].target;
  return t;
}

Vector predict_distances(const Matrix& b, const std::vector<Pair>& pairs, const Matrix& z) {
  return (pair_deltas(pairs, z) * b.transpose()).rowwise().norm();
}

double distance_loss(const Matrix& b, const std::vector<Pair>& pairs, const Matrix& z) {
  const Vector r = predict_distances(b, pairs, z);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double e = r(static_cast<Eigen::Index>(i)) - pairs[i].target;
    num += pairs[i].weight * e * e;
    den += pairs[i].weight;
  }
  return den > 0.0 ? num / den : 0.0;
}

DistanceProbe train_distance_probe(const std::vector<Pair>& pairs, const Matrix& z, const DistanceTrainConfig& config,
                                   int layer, const Checkpoint& checkpoint) {
  if (pairs.empty()) throw InputError("distance probe needs at least one pair");
  const auto k = z.cols();
  if (config.p < 1 || config.p >= k) {
    throw InputError("projection dimension p=" + std::to_string(config.p) + " must lie in [1, " +
                     std::to_string(k - 1) + "]");
  }
  if (config.steps < 0 || !(config.lr > 0.0) || config.weight_decay < 0.0) {
    throw InputError("distance probe needs steps >= 0, lr > 0, weight decay >= 0");
  }
  const Matrix delta = pair_deltas(pairs, z);
  const Vector t = pair_targets(pairs);
  Vector u(t.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) u(static_cast<Eigen::Index>(i)) = pairs[i].weight;
  const double usum = u.sum();
  if (!(usum > 0.0)) throw InputError("pair weights sum to zero");

  Rng rng(config.seed);
  DistanceProbe probe{gaussian(rng, config.p, k) / std::sqrt(static_cast<double>(k)), config, layer, {}};
  Matrix& b = probe.b;

  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  Matrix m = Matrix::Zero(b.rows(), b.cols());
  Matrix v = Matrix::Zero(b.rows(), b.cols());
  double bias1 = 1.0;
  double bias2 = 1.0;

  auto loss_and_grad = [&](Matrix* grad) {
    const Matrix proj = delta * b.transpose();  // pairs x p
    const Vector r = proj.rowwise().norm();
    const Vector e = r - t;
    const double loss = (u.array() * e.array().square()).sum() / usum;
    if (grad) {
      Vector c(r.size());
      for (Eigen::Index i = 0; i < r.size(); ++i) {
        // The norm has no gradient at zero; such pairs contribute nothing.
        c(i) = r(i) > 1e-12 ? 2.0 * u(i) * e(i) / (usum * r(i)) : 0.0;
      }
      *grad = (proj.array().colwise() * c.array()).matrix().transpose() * delta;
    }
    return loss;
  };

  Matrix g;
  for (int step = 1; step <= config.steps; ++step) {
    const double loss = loss_and_grad(&g);
    if (!std::isfinite(loss) || !g.allFinite()) {
      throw NumericalError("distance probe loss became non-finite at step " + std::to_string(step));
    }
    probe.loss_history.push_back(loss);
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    bias1 *= beta1;
    bias2 *= beta2;
    b *= 1.0 - config.lr * config.weight_decay;
    const Matrix mhat = m / (1.0 - bias1);
    const Matrix vhat = v / (1.0 - bias2);
    b.array() -= config.lr * mhat.array() / (vhat.array().sqrt() + eps);
    if (checkpoint) checkpoint(step, b);
  }
  const double final_loss = loss_and_grad(nullptr);
  if (!std::isfinite(final_loss)) {
    throw NumericalError("distance probe loss became non-finite at step " + std::to_string(config.steps));
  }
  probe.loss_history.push_back(final_loss);
  return probe;
}

DepthProbe train_depth_probe(const Matrix& z, const Vector& depths, double lambda, int layer) {
  const auto n = z.rows();
  if (n < 1) throw InputError("depth probe needs at least one row");
  if (depths.size() != n) throw InputError("depth probe: one depth per row required");
  DepthProbe probe;
  probe.lambda = lambda;
  probe.layer = layer;
  if (depths.maxCoeff() == depths.minCoeff()) {
    probe.degenerate = true;
    probe.w = Vector::Zero(z.cols());
    probe.b = depths(0);
    return probe;
  }
  const Vector mu = z.colwise().mean().transpose();
  Vector sd(z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double s = std::sqrt((z.col(c).array() - mu(c)).square().sum() / static_cast<double>(n));
    sd(c) = s > 1e-12 ? s : 1.0;
  }
  const Matrix scaled = (z.rowwise() - mu.transpose()).array().rowwise() / sd.transpose().array();
  std::vector<long> keys(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) keys[static_cast<std::size_t>(i)] = std::lround(depths(i));
  const RidgeFit fit = ridge_solve(scaled, depths, lambda, inverse_frequency(keys));
  probe.w = fit.w.cwiseQuotient(sd);
  probe.b = fit.b - probe.w.dot(mu);
  return probe;
}

Vector predict_depths(const DepthProbe& probe, const Matrix& z) {
  return (z * probe.w).array() + probe.b;
}

LayerFit fit_layer(const ActivationSet& acts, const DatasetIndex& index, const Split& split, const ProbeConfig& config) {
  const ActivationSet nodes = node_rows(acts);
  const ActivationSet train = rows_of(nodes, id_set(split.ids(true)));
  if (train.size() == 0) throw InputError("no training rows at layer " + std::to_string(acts.layer));
  LayerFit fit;
  fit.layer = acts.layer;
  fit.pca = pca_fit(train.rows, config.pca_dim, config.pca_options);
  const Matrix z = pca_project_rows(fit.pca, train.rows);
  fit.distance = train_distance_probe(make_pairs(train, index, config.distance.depth_alpha), z, config.distance,
                                      acts.layer);
  fit.depth = train_depth_probe(z, row_depths(train, index), config.depth_lambda, acts.layer);
  return fit;
}

EvalReport evaluate(const LayerFit& fit, const ActivationSet& acts, const DatasetIndex& index, const Split& split,
                    const std::map<std::string, bool>& exact, std::uint64_t shuffle_seed) {
  if (fit.layer != acts.layer) {
    throw InputError("probe layer " + std::to_string(fit.layer) + " differs from activation layer " +
                     std::to_string(acts.layer));
  }
  const ActivationSet nodes = node_rows(acts);
  std::set<std::string> test_exact;
  std::set<std::string> test_inexact;
  for (const auto& id : split.ids(false)) {
    auto it = exact.find(id);
    (it == exact.end() || it->second ? test_exact : test_inexact).insert(id);
  }
  EvalReport r;
  r.layer = fit.layer;
  r.p = static_cast<int>(fit.distance.b.rows());
  r.train = bucket_metrics(fit, rows_of(nodes, id_set(split.ids(true))), index);
  r.test_exact = bucket_metrics(fit, rows_of(nodes, test_exact), index);
  r.test_inexact = bucket_metrics(fit, rows_of(nodes, test_inexact), index);

  // Shuffled baseline: same probe, targets read off a label-permuted copy of
  // each test tree.
  const ActivationSet test = rows_of(nodes, id_set(split.ids(false)));
  const Matrix z = pca_project_rows(fit.pca, test.rows);
  const auto pairs = make_pairs(test, index, 0.0);
  std::map<std::string, LabeledTree> shuffled;
  const auto& all = index.examples();
  for (std::size_t e = 0; e < all.size(); ++e) {
    if (split.is_train.count(all[e].id) && !split.train(all[e].id)) {
      shuffled.emplace(all[e].id, permute_labels(all[e].tree, derive_seed(shuffle_seed, e)));
    }
  }
  Vector t(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& a = test.alignment[static_cast<std::size_t>(pairs[i].i)];
    const auto& b = test.alignment[static_cast<std::size_t>(pairs[i].j)];
    t(static_cast<Eigen::Index>(i)) = tree_distance(shuffled.at(a.example_id), a.node_label, b.node_label);
  }
  Vector dt(static_cast<Eigen::Index>(test.size()));
  for (std::size_t i = 0; i < test.size(); ++i) {
    dt(static_cast<Eigen::Index>(i)) = node_depth(shuffled.at(test.alignment[i].example_id), test.alignment[i].node_label);
  }
  r.shuffled.n_pairs = pairs.size();
  r.shuffled.n_tokens = test.size();
  if (!pairs.empty()) r.shuffled.distance = metrics(predict_distances(fit.distance.b, pairs, z), t);
  if (test.size() > 0) r.shuffled.depth = metrics(predict_depths(fit.depth, z), dt);
  return r;
}

ojson eval_report_to_json(const EvalReport& r) {
  ojson j;
  j["model_tag"] = r.model_tag;
  j["layer"] = r.layer;
  j["p"] = r.p;
  j["train"] = bucket_to_json(r.train);
  j["test_exact"] = bucket_to_json(r.test_exact);
  j["test_inexact"] = bucket_to_json(r.test_inexact);
  j["shuffled_baseline"] = bucket_to_json(r.shuffled);
  return j;
}

EvalReport eval_report_from_json(const ojson& j) {
  EvalReport r;
  r.model_tag = j.at("model_tag").get<std::string>();
  r.layer = j.at("layer").get<int>();
  r.p = j.at("p").get<int>();
  r.train = bucket_from_json(j.at("train"));
  r.test_exact = bucket_from_json(j.at("test_exact"));
  r.test_inexact = bucket_from_json(j.at("test_inexact"));
  r.shuffled = bucket_from_json(j.at("shuffled_baseline"));
  return r;
}

Basis hierarchical_subspace(const DistanceProbe& dp, const DepthProbe& zp, const PcaModel& pca) {
  const auto k = pca.components.rows();
  if (dp.b.cols() != k || zp.w.size() != k) {
    throw InputError("probes and PCA disagree on the reduced dimension");
  }
  Matrix cols(pca.components.cols(), dp.b.rows() + 1);
  cols.leftCols(dp.b.rows()) = pca.components.transpose() * dp.b.transpose();
  cols.col(dp.b.rows()) = pca.components.transpose() * zp.w;
  return orthonormalize(cols, Provenance::kProbe);
}

NullStats random_subspace_null(int k, int p, int count, int draws, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> stats;
  for (int d = 0; d < draws; ++d) {
    std::vector<Basis> bases;
    for (int c = 0; c < count; ++c) bases.push_back(orthonormalize(gaussian(rng, k, p)));
    Matrix sim = Matrix::Zero(count, count);
    for (int a = 0; a < count; ++a) {
      for (int b = a + 1; b < count; ++b) sim(a, b) = subspace_similarity(bases[a], bases[b]);
    }
    stats.push_back(off_diagonal_mean(sim));
  }
  return summarize(stats);
}

NullStats random_direction_null(int k, int count, int draws, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> stats;
  for (int d = 0; d < draws; ++d) {
    std::vector<Vector> dirs;
    for (int c = 0; c < count; ++c) dirs.push_back(gaussian(rng, k, 1).col(0));
    Matrix cos = Matrix::Zero(count, count);
    for (int a = 0; a < count; ++a) {
      for (int b = a + 1; b < count; ++b) cos(a, b) = cosine_similarity(dirs[a], dirs[b]);
    }
    stats.push_back(off_diagonal_mean(cos));
  }
  return summarize(stats);
}

StabilityReport cross_split_stability(const ActivationSet& acts, const DatasetIndex& index, const Split& split,
                                      int folds, const ProbeConfig& config, int null_draws) {
  if (folds < 2) throw InputError("cross-split stability needs at least 2 folds");
  std::vector<std::string> ids = split.ids(true);
  if (static_cast<int>(ids.size()) < folds) throw InputError("fewer training examples than folds");
  Rng rng(derive_seed(split.seed, 0x5ab1e));
  rng.shuffle(std::span(ids));

  const ActivationSet nodes = node_rows(acts);
  const ActivationSet train = rows_of(nodes, id_set(ids));
  const PcaModel pca = pca_fit(train.rows, config.pca_dim, config.pca_options);

  std::vector<Basis> spans;
  std::vector<Vector> dirs;
  for (int f = 0; f < folds; ++f) {
    std::set<std::string> part;
    for (std::size_t i = static_cast<std::size_t>(f); i < ids.size(); i += static_cast<std::size_t>(folds)) {
      part.insert(ids[i]);
    }
    const ActivationSet rows = rows_of(nodes, part);
    const Matrix z = pca_project_rows(pca, rows.rows);
    const auto pairs = make_pairs(rows, index, config.distance.depth_alpha);
    if (pairs.empty()) throw InputError("fold " + std::to_string(f) + " is too small to form pairs");
    const auto dp = train_distance_probe(pairs, z, config.distance, acts.layer);
    spans.push_back(orthonormalize(dp.b.transpose(), Provenance::kProbe));
    dirs.push_back(train_depth_probe(z, row_depths(rows, index), config.depth_lambda, acts.layer).w);
  }

  StabilityReport r;
  r.folds = folds;
  r.distance_similarity = Matrix::Identity(folds, folds);
  r.depth_cosine = Matrix::Identity(folds, folds);
  for (int a = 0; a < folds; ++a) {
    for (int b = a + 1; b < folds; ++b) {
      r.distance_similarity(a, b) = r.distance_similarity(b, a) = subspace_similarity(spans[a], spans[b]);
      r.depth_cosine(a, b) = r.depth_cosine(b, a) = cosine_similarity(dirs[a], dirs[b]);
    }
  }
  r.mean_distance_similarity = off_diagonal_mean(r.distance_similarity);
  r.mean_depth_cosine = off_diagonal_mean(r.depth_cosine);
  const std::uint64_t null_seed = derive_seed(split.seed, 0x9011);
  r.distance_null = random_subspace_null(config.pca_dim, spans.front().rank(), folds, null_draws, null_seed);
  r.depth_null = random_direction_null(config.pca_dim, folds, null_draws, derive_seed(null_seed, 1));
  return r;
}

ojson stability_to_json(const StabilityReport& r) {
  ojson j;
  j["folds"] = r.folds;
  j["distance_similarity"] = ojson::array();
  j["depth_cosine"] = ojson::array();
  for (Eigen::Index i = 0; i < r.distance_similarity.rows(); ++i) {
    std::vector<double> a(r.distance_similarity.cols());
    std::vector<double> b(r.depth_cosine.cols());
    for (Eigen::Index c = 0; c < r.distance_similarity.cols(); ++c) {
      a[static_cast<std::size_t>(c)] = r.distance_similarity(i, c);
      b[static_cast<std::size_t>(c)] = r.depth_cosine(i, c);
    }
    j["distance_similarity"].push_back(a);
    j["depth_cosine"].push_back(b);
  }
  j["mean_distance_similarity"] = r.mean_distance_similarity;
  j["mean_depth_cosine"] = r.mean_depth_cosine;
  j["distance_null"] = {{"mean", r.distance_null.mean}, {"sd", r.distance_null.sd}};
  j["depth_null"] = {{"mean", r.depth_null.mean}, {"sd", r.depth_null.sd}};
  return j;
}

std::vector<GridCell> grid_search(const std::vector<ActivationSet>& layers, const DatasetIndex& index,
                                  const Split& split, const GridSpec& grid, const ProbeConfig& base) {
  if (grid.p.empty() || grid.lr.empty() || grid.steps.empty()) throw InputError("grid has an empty axis");
  std::vector<GridCell> cells;
  const int max_steps = *std::max_element(grid.steps.begin(), grid.steps.end());
  for (const auto& acts : layers) {
    const ActivationSet nodes = node_rows(acts);
    const ActivationSet train = rows_of(nodes, id_set(split.ids(true)));
    const ActivationSet test = rows_of(nodes, id_set(split.ids(false)));
    const PcaModel pca = pca_fit(train.rows, base.pca_dim, base.pca_options);
    const Matrix ztr = pca_project_rows(pca, train.rows);
    const Matrix zte = pca_project_rows(pca, test.rows);
    const auto train_pairs = make_pairs(train, index, base.distance.depth_alpha);
    const auto test_pairs = make_pairs(test, index, 0.0);
    const Vector ttr = pair_targets(train_pairs);
    const Vector tte = pair_targets(test_pairs);
    for (int p : grid.p) {
      for (double lr : grid.lr) {
        DistanceTrainConfig cfg = base.distance;
        cfg.p = p;
        cfg.lr = lr;
        cfg.steps = max_steps;
        std::vector<GridCell> found;
        auto score = [&](int step, const Matrix& b) {
          if (std::find(grid.steps.begin(), grid.steps.end(), step) == grid.steps.end()) return;
          const auto mtr = metrics(predict_distances(b, train_pairs, ztr), ttr);
          const auto mte = metrics(predict_distances(b, test_pairs, zte), tte);
          found.push_back({acts.layer, p, lr, step, mtr.mse, mte.mse, mte.pearson});
        };
        const auto probe = train_distance_probe(train_pairs, ztr, cfg, acts.layer, score);
        if (std::find(grid.steps.begin(), grid.steps.end(), 0) != grid.steps.end()) score(0, probe.b);
        // Report in the order the grid lists its step counts.
        for (int s : grid.steps) {
          for (const auto& c : found) {
            if (c.steps == s) cells.push_back(c);
          }
        }
      }
    }
  }
  return cells;
}

std::vector<GridCell> best_per_p(const std::vector<GridCell>& cells) {
  std::map<int, GridCell> best;
  for (const auto& c : cells) {
    auto it = best.find(c.p);
    if (it == best.end() || c.test_mse < it->second.test_mse) best[c.p] = c;
  }
  std::vector<GridCell> out;
  for (const auto& [p, c] : best) out.push_back(c);
  return out;
}

ojson grid_cell_to_json(const GridCell& c) {
  ojson j;
  j["layer"] = c.layer;
  j["p"] = c.p;
  j["lr"] = c.lr;
  j["steps"] = c.steps;
  j["train_mse"] = c.train_mse;
  j["test_mse"] = c.test_mse;
  j["test_pearson"] = c.test_pearson;
  return j;
}

ojson distance_probe_to_json(const DistanceProbe& p, const std::string& dataset_hash, const Split& split) {
  ojson j;
  j["kind"] = "distance";
  j["layer"] = p.layer;
  j["p"] = p.b.rows();
  j["matrix"] = matrix_to_json(p.b);
  j["train_config"] = {{"lr", p.config.lr},
                       {"weight_decay", p.config.weight_decay},
                       {"steps", p.config.steps},
                       {"depth_alpha", p.config.depth_alpha},
                       {"seed", p.config.seed}};
  j["final_loss"] = p.loss_history.empty() ? 0.0 : p.loss_history.back();
  j["dataset_hash"] = dataset_hash;
  j["split_seed"] = split.seed;
  j["split_ratio"] = split.ratio;
  return j;
}

ojson depth_probe_to_json(const DepthProbe& p, const std::string& dataset_hash, const Split& split) {
  ojson j;
  j["kind"] = "depth";
  j["layer"] = p.layer;
  j["lambda"] = p.lambda;
  j["matrix"] = matrix_to_json(p.w.transpose());
  j["intercept"] = p.b;
  j["degenerate"] = p.degenerate;
  j["dataset_hash"] = dataset_hash;
  j["split_seed"] = split.seed;
  j["split_ratio"] = split.ratio;
  return j;
}

DistanceProbe distance_probe_from_json(const ojson& j) {
  try {
    if (j.at("kind") != "distance") throw DataIntegrityError("artifact is not a distance probe");
    DistanceProbe p;
    p.layer = j.at("layer").get<int>();
    p.b = matrix_from_json(j.at("matrix"));
    const auto& c = j.at("train_config");
    p.config = {static_cast<int>(p.b.rows()), c.at("lr").get<double>(), c.at("weight_decay").get<double>(),
                c.at("steps").get<int>(), c.at("depth_alpha").get<double>(), c.at("seed").get<std::uint64_t>()};
    if (!p.b.allFinite()) throw DataIntegrityError("distance probe has non-finite entries");
    return p;
  } catch (const nlohmann::json::exception& ex) {
    throw DataIntegrityError(std::string("malformed distance probe: ") + ex.what());
  }
}

DepthProbe depth_probe_from_json(const ojson& j) {
  try {
    if (j.at("kind") != "depth") throw DataIntegrityError("artifact is not a depth probe");
    DepthProbe p;
    p.layer = j.at("layer").get<int>();
    p.lambda = j.at("lambda").get<double>();
    p.w = matrix_from_json(j.at("matrix")).row(0).transpose();
    p.b = j.at("intercept").get<double>();
    p.degenerate = j.at("degenerate").get<bool>();
    return p;
  } catch (const nlohmann::json::exception& ex) {
    throw DataIntegrityError(std::string("malformed depth probe: ") + ex.what());
  }
}

}  // namespace hprobe
