#include <doctest.h>

#include <cmath>

#include "hprobe/error.hpp"
#include "hprobe/linalg.hpp"
#include "hprobe/rng.hpp"
#include "oracles.hpp"

using namespace hprobe;

namespace {

Matrix gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

Vector gaussian_vector(Rng& rng, Eigen::Index n) { return gaussian(rng, n, 1).col(0); }

}  // namespace

TEST_CASE("PCA of a known 2D cloud") {
  // Points on the line y = x plus a small orthogonal wiggle.
  Matrix x(4, 2);
  x << -2, -2, -1, -1, 1, 1, 2, 2;
  x.col(1) += Vector::Constant(4, 0.0);
  x(1, 1) += 0.1;
  x(2, 1) -= 0.1;
  const auto m = pca_fit(x, 1);
  CHECK(m.components(0, 0) > 0.0);
  CHECK(std::abs(m.components(0, 0) - m.components(0, 1)) < 0.05);
  CHECK(m.explained_ratio() > 0.99);
}

TEST_CASE("PCA components are eigenvectors of the sample covariance") {
  Rng rng(1);
  Matrix x = gaussian(rng, 500, 64);
  for (int j = 0; j < 64; ++j) x.col(j) *= 1.0 + 0.1 * j;
  const auto m = pca_fit(x, 10);
  const Matrix c = x.rowwise() - x.colwise().mean();
  const Matrix cov = c.transpose() * c / 499.0;
  for (int i = 0; i < 10; ++i) {
    const Vector v = m.components.row(i).transpose();
    CHECK((cov * v - m.explained_variance(i) * v).norm() < 1e-5);
    Eigen::Index at = 0;
    v.cwiseAbs().maxCoeff(&at);
    CHECK(v(at) > 0.0);
    if (i > 0) CHECK(m.explained_variance(i) <= m.explained_variance(i - 1));
  }
  const Matrix gram = m.components * m.components.transpose();
  CHECK((gram - Matrix::Identity(10, 10)).norm() < 1e-9);
  CHECK(m.total_variance == doctest::Approx(cov.trace()).epsilon(1e-9));
  CHECK(m.explained_ratio() < 1.0);
}

TEST_CASE("PCA project and lift") {
  Rng rng(2);
  const Matrix x = gaussian(rng, 200, 12);
  const auto m = pca_fit(x, 12);
  const Vector row = x.row(3).transpose();
  CHECK((pca_lift(m, pca_project(m, row)) - row).norm() < 1e-9);
  const auto m4 = pca_fit(x, 4);
  const Vector z = pca_project(m4, row);
  CHECK(z.size() == 4);
  CHECK((pca_project(m4, pca_lift(m4, z)) - z).norm() < 1e-9);
  const Matrix zs = pca_project_rows(m4, x);
  CHECK((zs.row(3).transpose() - z).norm() < 1e-12);
  CHECK(std::abs(zs.col(0).mean()) < 1e-9);
}

TEST_CASE("PCA rank handling") {
  Rng rng(3);
  const Matrix low = gaussian(rng, 100, 3) * gaussian(rng, 3, 20);
  CHECK_THROWS_AS(pca_fit(low, 5), NumericalError);
  const auto m = pca_fit(low, 5, {.allow_rank_deficient = true});
  CHECK(m.rank == 3);
  CHECK(m.explained_variance(3) == 0.0);
  CHECK(m.explained_ratio() == doctest::Approx(1.0));
  CHECK_THROWS_AS(pca_fit(low, 0), InputError);
  CHECK_THROWS_AS(pca_fit(low.topRows(5), 5), InputError);
  CHECK_THROWS_AS(pca_fit(low, 21), InputError);
}

TEST_CASE("orthonormalize matches Gram-Schmidt") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = gaussian(rng, 30, 1 + trial % 6);
    const Basis q = orthonormalize(a);
    const Matrix g = oracle::gram_schmidt(a);
    REQUIRE(q.rank() == g.cols());
    // Same span: projecting one onto the other loses nothing.
    CHECK((g - q.matrix() * (q.matrix().transpose() * g)).norm() < 1e-9);
    CHECK((q.matrix().transpose() * q.matrix() - Matrix::Identity(q.rank(), q.rank())).norm() < 1e-9);
  }
  Matrix dup(5, 3);
  dup.col(0) = Vector::Unit(5, 0);
  dup.col(1) = 2.0 * Vector::Unit(5, 0);
  dup.col(2) = Vector::Unit(5, 2);
  CHECK(orthonormalize(dup).rank() == 2);
  CHECK_THROWS_AS(orthonormalize(Matrix::Zero(4, 2)), NumericalError);
}

TEST_CASE("basis construction checks orthonormality") {
  CHECK_THROWS_AS(Basis(Matrix::Ones(3, 1), Provenance::kOther), DataIntegrityError);
  CHECK_THROWS_AS(Basis(Matrix(3, 0), Provenance::kProbe), DataIntegrityError);
  CHECK(Basis::empty(7).rank() == 0);
  CHECK(Basis::empty(7).provenance() == Provenance::kNone);
  CHECK(Basis::identity(4).rank() == 4);
  CHECK(Basis::identity(4).provenance() == Provenance::kFull);
  for (auto p : {Provenance::kProbe, Provenance::kRandom, Provenance::kPcaCot, Provenance::kPcaNodes,
                 Provenance::kFull, Provenance::kNone, Provenance::kPlanted, Provenance::kOther}) {
    CHECK(provenance_from_string(to_string(p)) == p);
  }
  CHECK_THROWS_AS(provenance_from_string("bogus"), InputError);
}

TEST_CASE("ablation removes exactly the basis span") {
  Rng rng(5);
  const int d = 40;
  for (int trial = 0; trial < 1000; ++trial) {
    const Basis h = orthonormalize(gaussian(rng, d, 1 + trial % 8));
    const Vector x = gaussian_vector(rng, d);
    const Vector y = ablate_vector(x, h);
    CHECK((h.matrix().transpose() * y).norm() < 1e-10);
    CHECK((ablate_vector(y, h) - y).norm() < 1e-10);
    CHECK(y.norm() <= x.norm() + 1e-12);
    // Components orthogonal to the span are untouched.
    const Vector perp = ablate_vector(gaussian_vector(rng, d), h);
    CHECK((ablate_vector(perp, h) - perp).norm() < 1e-10);
  }
  const Vector x = Vector::LinSpaced(6, 1.0, 6.0);
  CHECK((ablate_vector(x, Basis::empty(6)) - x).norm() == 0.0);
  CHECK(ablate_vector(x, Basis::identity(6)).norm() < 1e-12);

  const Matrix rows = gaussian(rng, 10, d);
  const Basis h = orthonormalize(gaussian(rng, d, 3));
  const Matrix out = ablate_rows(rows, h);
  for (int i = 0; i < 10; ++i) {
    CHECK((out.row(i).transpose() - ablate_vector(rows.row(i).transpose(), h)).norm() < 1e-12);
  }
  CHECK_THROWS_AS(ablate_vector(Vector::Zero(5), h), InputError);
}

TEST_CASE("subspace similarity") {
  Matrix a(3, 2);
  a << 1, 0, 0, 1, 0, 0;
  Matrix b(3, 2);
  const double c = std::cos(M_PI / 4);
  b << 1, 0, 0, c, 0, c;
  // Principal angles 0 and 45 degrees.
  CHECK(subspace_similarity(Basis(a, Provenance::kOther), Basis(b, Provenance::kOther)) ==
        doctest::Approx(0.8535533905932737).epsilon(1e-12));

  Rng rng(6);
  const Basis p = orthonormalize(gaussian(rng, 20, 4));
  const Basis q = orthonormalize(gaussian(rng, 20, 3));
  CHECK(subspace_similarity(p, p) == doctest::Approx(1.0));
  const double s = subspace_similarity(p, q);
  CHECK(s >= 0.0);
  CHECK(s <= 1.0);
  CHECK(subspace_similarity(q, p) == doctest::Approx(s).epsilon(1e-12));

  // Invariant under a common rotation and under a change of basis within each span.
  const Matrix r = orthonormalize(gaussian(rng, 20, 20)).matrix();
  const Basis rp(r * p.matrix(), Provenance::kOther);
  const Basis rq(r * q.matrix(), Provenance::kOther);
  CHECK(subspace_similarity(rp, rq) == doctest::Approx(s).epsilon(1e-10));
  const Matrix inner = orthonormalize(gaussian(rng, 4, 4)).matrix();
  CHECK(subspace_similarity(Basis(p.matrix() * inner, Provenance::kOther), q) ==
        doctest::Approx(s).epsilon(1e-10));

  Matrix e1 = Matrix::Zero(4, 1);
  e1(0, 0) = 1;
  Matrix e2 = Matrix::Zero(4, 1);
  e2(1, 0) = 1;
  CHECK(subspace_similarity(Basis(e1, Provenance::kOther), Basis(e2, Provenance::kOther)) ==
        doctest::Approx(0.0));
}

TEST_CASE("ridge examples") {
  Matrix x(3, 1);
  x << 1, 2, 3;
  const Vector y = Vector::LinSpaced(3, 1.0, 3.0);
  const auto fit = ridge_solve(x, y, 0.01);
  CHECK(fit.w(0) == doctest::Approx(2.0 / 2.01).epsilon(1e-12));
  CHECK(fit.b == doctest::Approx(2.0 - 2.0 * 2.0 / 2.01).epsilon(1e-10));

  // Uniform weights and doubled weights change nothing.
  const auto uniform = ridge_solve(x, y, 0.01, Vector::Ones(3));
  const auto doubled = ridge_solve(x, y, 0.01, Vector::Constant(3, 2.0));
  CHECK(uniform.w(0) == doctest::Approx(fit.w(0)).epsilon(1e-12));
  CHECK(doubled.w(0) == doctest::Approx(fit.w(0)).epsilon(1e-12));
  CHECK(doubled.b == doctest::Approx(fit.b).epsilon(1e-12));

  CHECK_THROWS_AS(ridge_solve(x, y, 0.0), InputError);
  CHECK_THROWS_AS(ridge_solve(x, y, 0.01, Vector::Zero(3)), InputError);
  CHECK_THROWS_AS(ridge_solve(x, Vector::Ones(2), 0.01), InputError);
}

TEST_CASE("ridge solution minimizes the objective and matches the normal equations") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 20 + trial;
    const Eigen::Index p = 1 + trial % 7;
    const Matrix x = gaussian(rng, n, p);
    const Vector y = gaussian_vector(rng, n);
    Vector u(n);
    for (Eigen::Index i = 0; i < n; ++i) u(i) = 0.1 + rng.uniform01();
    const double lambda = 0.01 + 0.1 * (trial % 5);
    const auto fit = ridge_solve(x, y, lambda, u);

    // Independent: build the augmented normal equations by hand with
    // mean-one weights and solve by Gaussian elimination.
    const Vector un = u / u.mean();
    Matrix a = Matrix::Zero(p + 1, p + 1);
    Vector rhs = Vector::Zero(p + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      Vector xi(p + 1);
      xi.head(p) = x.row(i).transpose();
      xi(p) = 1.0;
      a += un(i) * xi * xi.transpose();
      rhs += un(i) * y(i) * xi;
    }
    for (Eigen::Index j = 0; j < p; ++j) a(j, j) += lambda;
    const Vector theta = oracle::gauss_solve(a, rhs);
    CHECK((fit.w - theta.head(p)).norm() < 1e-8);
    CHECK(std::abs(fit.b - theta(p)) < 1e-8);

    if (trial < 10) {
      auto objective = [&](const Vector& w, double b) {
        const Vector r = x * w + Vector::Constant(n, b) - y;
        return (un.array() * r.array().square()).sum() + lambda * w.squaredNorm();
      };
      const double best = objective(fit.w, fit.b);
      for (int k = 0; k < 50; ++k) {
        const Vector dw = 1e-3 * gaussian_vector(rng, p);
        CHECK(objective(fit.w + dw, fit.b + 1e-3 * rng.normal()) >= best - 1e-12);
      }
    }
  }
}

TEST_CASE("metrics examples") {
  const Vector t = Vector::LinSpaced(4, 1.0, 4.0);
  const auto exact = metrics(t, t);
  CHECK(exact.mse == 0.0);
  CHECK(exact.pearson == doctest::Approx(1.0));
  CHECK(exact.pearson_defined);

  const Vector neg = -t;
  CHECK(metrics(neg, t).pearson == doctest::Approx(-1.0));
  CHECK(metrics(neg, t).mse == doctest::Approx((4.0 + 16.0 + 36.0 + 64.0) / 4.0));

  const Vector flat = Vector::Constant(4, 2.0);
  const auto m = metrics(flat, t);
  CHECK_FALSE(m.pearson_defined);
  CHECK(m.mse == doctest::Approx((1.0 + 0.0 + 1.0 + 4.0) / 4.0));

  Vector w(4);
  w << 1, 0, 0, 0;
  CHECK(metrics(flat, t, w).mse == doctest::Approx(1.0));
  CHECK_THROWS_AS(metrics(t, Vector::Ones(3)), InputError);

  CHECK(cosine_similarity(t, 3.0 * t) == doctest::Approx(1.0));
}

TEST_CASE("matrix, basis and PCA persistence round-trip bit-exactly") {
  Rng rng(9);
  const Matrix m = gaussian(rng, 7, 5);
  const auto j = matrix_to_json(m);
  CHECK(j.at("dtype") == "f64le");
  CHECK(j.at("shape") == ojson::array({7, 5}));
  CHECK(matrix_from_json(ojson::parse(j.dump())) == m);

  const Basis b = orthonormalize(gaussian(rng, 12, 3), Provenance::kProbe);
  const Basis b2 = basis_from_json(ojson::parse(basis_to_json(b).dump()));
  CHECK(b2.matrix() == b.matrix());
  CHECK(b2.provenance() == Provenance::kProbe);

  const auto pca = pca_fit(gaussian(rng, 50, 8), 3);
  const auto pca2 = pca_from_json(ojson::parse(pca_to_json(pca).dump()));
  CHECK(pca2.components == pca.components);
  CHECK(pca2.mean == pca.mean);
  CHECK(pca2.explained_variance == pca.explained_variance);
  CHECK(pca2.total_variance == pca.total_variance);

  auto bad = j;
  bad["shape"] = ojson::array({7, 6});
  CHECK_THROWS_AS(matrix_from_json(bad), DataIntegrityError);
}
