#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hprobe/error.hpp"
#include "hprobe/oracle.hpp"
#include "hprobe/probes.hpp"
#include "hprobe/rng.hpp"

using namespace hprobe;

namespace {

std::vector<TraversalExample> dataset(int depth_lo, int depth_hi, int n, std::uint64_t seed) {
  DatasetConfig dc;
  dc.depth = {depth_lo, depth_hi};
  dc.num_samples = n;
  dc.seed = seed;
  return sample_dataset(dc);
}

// No noise of any kind and nothing but the planted coordinates.
OracleConfig clean_config(int d, std::uint64_t seed) {
  OracleConfig c;
  c.ambient_dim = d;
  c.noise_sigma = 0.0;
  c.distractor_rank = 0;
  c.inexact_coord_noise = 0.0;
  c.cot_rows_per_example = 0;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("MDS stress fixtures") {
  // Frozen from an independent eigendecomposition of the double-centred
  // squared distance matrix.
  const LabeledTree seven = build_full_tree(2);
  CHECK(mds_stress(seven, mds_embedding(seven, 5)) == doctest::Approx(0.0583317813958306).epsilon(1e-9));
  const LabeledTree three = build_full_tree(1);
  CHECK(mds_stress(three, mds_embedding(three, 5)) < 1e-12);
  CHECK(mds_stress(three, mds_embedding(three, 1)) < 1e-12);

  // Stress is a property of the shape, not of the labels.
  const LabeledTree shuffled = permute_labels(seven, 3);
  CHECK(mds_stress(shuffled, mds_embedding(shuffled, 5)) == doctest::Approx(0.0583317813958306).epsilon(1e-9));

  const Matrix e = mds_embedding(seven, 5);
  CHECK(e.cols() == 5);
  CHECK(e.col(3).norm() < 1e-9);  // only three positive eigenvalues
  CHECK(e.colwise().sum().norm() < 1e-9);
}

TEST_CASE("recovery score endpoints") {
  Rng rng(1);
  Matrix g(40, 6);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
  const Basis b = orthonormalize(g);
  CHECK(recovery_score(b, b) == doctest::Approx(1.0).epsilon(1e-12));
  Matrix h(40, 6);
  for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = rng.normal();
  const Basis rest = orthonormalize(ablate_rows(h.transpose(), b).transpose());
  CHECK(recovery_score(rest, b) < 1e-9);
}

TEST_CASE("clean oracle is low rank and exactly decodable") {
  const auto ds = dataset(1, 2, 200, 3);
  const DatasetIndex idx(ds);
  const Split split = split_examples(ds, 0.5, 3);
  const OracleData od = plant(ds, clean_config(96, 3));
  const ActivationSet acts = od.file.layer_set(0);

  ProbeConfig pc;
  pc.pca_options.allow_rank_deficient = true;
  const LayerFit fit = fit_layer(acts, idx, split, pc);
  CHECK(fit.pca.explained_ratio() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(fit.pca.rank <= 6);

  const EvalReport rep = evaluate(fit, acts, idx, split, exact_by_id(od.responses), 1);
  CHECK(rep.test_exact.depth.pearson == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rep.train.depth.pearson == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("three-node trees embed exactly") {
  const auto ds = dataset(1, 1, 200, 5);
  const DatasetIndex idx(ds);
  const Split split = split_examples(ds, 0.5, 5);
  const OracleData od = plant(ds, clean_config(64, 5));
  ProbeConfig pc;
  pc.pca_options.allow_rank_deficient = true;
  const LayerFit fit = fit_layer(od.file.layer_set(0), idx, split, pc);
  const EvalReport rep = evaluate(fit, od.file.layer_set(0), idx, split, exact_by_id(od.responses), 1);
  CHECK(rep.test_exact.distance.pearson >= 0.99);
}

TEST_CASE("recovery degrades with noise") {
  const std::vector<double> sigmas{0.05, 0.2, 0.5, 1.0};
  std::vector<double> medians;
  for (double sigma : sigmas) {
    std::vector<double> scores;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto ds = dataset(1, 2, 240, seed);
      const DatasetIndex idx(ds);
      const Split split = split_examples(ds, 0.5, seed);
      OracleConfig c;
      c.ambient_dim = 256;
      c.noise_sigma = sigma;
      c.seed = seed;
      const OracleData od = plant(ds, c);
      ProbeConfig pc;
      pc.distance.steps = 500;
      pc.distance.seed = seed;
      const LayerFit fit = fit_layer(od.file.layer_set(0), idx, split, pc);
      scores.push_back(recovery_score(hierarchical_subspace(fit.distance, fit.depth, fit.pca), od.planted[0]));
    }
    std::nth_element(scores.begin(), scores.begin() + 2, scores.end());
    medians.push_back(scores[2]);
  }
  for (std::size_t i = 0; i + 1 < medians.size(); ++i) {
    CHECK_MESSAGE(medians[i + 1] < medians[i], "sigma " << sigmas[i] << " -> " << sigmas[i + 1]);
  }
}

TEST_CASE("plant layout and determinism") {
  const auto ds = dataset(1, 2, 60, 1);
  OracleConfig c;
  c.ambient_dim = 128;
  c.layers = {2, 5, 8, 11};
  c.seed = 9;
  const OracleData a = plant(ds, c);
  const OracleData b = plant(ds, c);
  REQUIRE(a.file.data.size() == 4);
  for (std::size_t l = 0; l < 4; ++l) CHECK((a.file.data[l].array() == b.file.data[l].array()).all());

  std::size_t nodes = 0;
  std::size_t pool = 0;
  for (const auto& r : a.file.alignment) (r.is_node() ? nodes : pool) += 1;
  CHECK(pool == 60 * 4);
  CHECK(nodes == a.node_row_index.size());
  CHECK(a.coords.rows() == static_cast<Eigen::Index>(nodes));
  CHECK(a.responses.size() == 60);

  // Signal peaks two thirds of the way through the layers.
  const auto peak = std::max_element(a.layer_scale.begin(), a.layer_scale.end()) - a.layer_scale.begin();
  CHECK(peak == 2);

  // Node rows follow the scored response, so inexact examples have rows for
  // the path that was answered.
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::size_t rows = 0;
    for (const auto& r : a.file.alignment) rows += r.example_id == ds[i].id && r.is_node();
    REQUIRE(a.responses[i].parsed);
    CHECK(rows == a.responses[i].parsed->size());
  }

  OracleConfig other = c;
  other.seed = 10;
  CHECK((plant(ds, other).file.data[0].array() != a.file.data[0].array()).any());
}

TEST_CASE("plant rejects bad configs") {
  const auto ds = dataset(1, 2, 10, 1);
  OracleConfig c;
  c.planted_rank = 1;
  CHECK_THROWS_AS(plant(ds, c), InputError);
  c = {};
  c.ambient_dim = 12;
  CHECK_THROWS_AS(plant(ds, c), InputError);
  c = {};
  c.noise_sigma = -1.0;
  CHECK_THROWS_AS(plant(ds, c), InputError);
  CHECK_THROWS_AS(plant({}, OracleConfig{}), InputError);
}

TEST_CASE("config and sidecar round trip") {
  OracleConfig c = pca_sweep_oracle(4);
  c.layers = {1, 3};
  const OracleConfig back = oracle_config_from_json(oracle_config_to_json(c));
  CHECK(oracle_config_to_json(back) == oracle_config_to_json(c));

  const auto ds = dataset(1, 2, 20, 2);
  c.ambient_dim = 128;
  const OracleData od = plant(ds, c);
  const Sidecar s = sidecar_from_json(oracle_sidecar(od));
  CHECK(s.layers == c.layers);
  CHECK((s.basis_for(3).matrix().array() == od.planted[1].matrix().array()).all());
  CHECK((s.coords.array() == od.coords.array()).all());
  CHECK_THROWS_AS(s.basis_for(2), InputError);
}

TEST_CASE("readout shift and retained signal") {
  const auto ds = dataset(1, 2, 30, 6);
  OracleConfig c;
  c.ambient_dim = 64;
  c.seed = 6;
  const OracleData od = plant(ds, c);
  const ActivationSet acts = od.file.layer_set(0);
  const Basis& u = od.planted[0];

  CHECK(readout_shift(acts, u, Basis::empty(64)).cwiseAbs().maxCoeff() == 0.0);
  const Vector full = readout_shift(acts, u, u);
  const Matrix readout = node_rows(acts).rows * u.matrix();
  CHECK((full - readout.cwiseAbs().rowwise().mean()).cwiseAbs().maxCoeff() < 1e-10);

  for (const auto& [id, f] : retained_signal(acts, u, Basis::empty(64))) CHECK(f == doctest::Approx(1.0));
  for (const auto& [id, f] : retained_signal(acts, u, u)) CHECK(f < 1e-20);
}

TEST_CASE("accuracy surrogate") {
  const auto ds = dataset(2, 2, 40, 1);
  const TraversalExample& ex = *std::max_element(ds.begin(), ds.end(), [](const auto& a, const auto& b) {
    return a.truth.size() < b.truth.size();
  });
  REQUIRE(ex.truth.size() >= 5);
  const ScoredResponse good = score_response(ex, "PATH: " + [&] {
    std::string s;
    for (auto v : ex.truth) s += std::to_string(v) + " ";
    return s;
  }());
  REQUIRE(good.exact);
  CHECK(simulate_ablated_response(ex, good, 0.5).exact);
  const ScoredResponse hit = simulate_ablated_response(ex, good, 0.49);
  CHECK_FALSE(hit.exact);
  REQUIRE(hit.parsed);
  CHECK(hit.parsed->size() == static_cast<std::size_t>(std::floor(0.49 * static_cast<double>(ex.truth.size()))));
  CHECK(hit.partial < 1.0);

  const ScoredResponse bad = score_response(ex, "no answer");
  CHECK(simulate_ablated_response(ex, bad, 0.0).raw_text == bad.raw_text);
}
