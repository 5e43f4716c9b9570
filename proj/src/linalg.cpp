#include "hprobe/linalg.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <vector>

#include "hprobe/error.hpp"
#include "hprobe/hash.hpp"

namespace hprobe {

static_assert(std::endian::native == std::endian::little,
              "matrix payloads are written in native little-endian order");

namespace {

constexpr double kRankTolerance = 1e-10;
constexpr double kOrthoTolerance = 1e-6;

// Flips each column so its largest-magnitude entry is positive.
void fix_column_signs(Matrix& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    Eigen::Index at = 0;
    m.col(c).cwiseAbs().maxCoeff(&at);
    if (m(at, c) < 0.0) m.col(c) *= -1.0;
  }
}

int numerical_rank(const Vector& singular_values) {
  if (singular_values.size() == 0 || singular_values(0) <= 0.0) return 0;
  const double cut = kRankTolerance * singular_values(0);
  int rank = 0;
  while (rank < singular_values.size() && singular_values(rank) > cut) ++rank;
  return rank;
}

}  // namespace

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::kProbe: return "probe";
    case Provenance::kRandom: return "random";
    case Provenance::kPcaCot: return "pca_cot";
    case Provenance::kPcaNodes: return "pca_nodes";
    case Provenance::kFull: return "full";
    case Provenance::kNone: return "none";
    case Provenance::kPlanted: return "planted";
    case Provenance::kOther: return "other";
  }
  return "other";
}

Provenance provenance_from_string(std::string_view s) {
  for (auto p : {Provenance::kProbe, Provenance::kRandom, Provenance::kPcaCot, Provenance::kPcaNodes,
                 Provenance::kFull, Provenance::kNone, Provenance::kPlanted, Provenance::kOther}) {
    if (to_string(p) == s) return p;
  }
  throw InputError("unknown basis kind '" + std::string(s) + "'");
}

double PcaModel::explained_ratio() const {
  return total_variance > 0.0 ? explained_variance.sum() / total_variance : 1.0;
}

PcaModel pca_fit(const Matrix& rows, int k, PcaOptions options) {
  const auto n = rows.rows();
  if (k < 1) throw InputError("PCA dimension must be positive");
  if (n <= k) {
    throw InputError("PCA needs more rows than components (" + std::to_string(n) +
                     " rows, k=" + std::to_string(k) + ")");
  }
  if (k > rows.cols()) {
    throw InputError("PCA dimension " + std::to_string(k) + " exceeds ambient dimension " +
                     std::to_string(rows.cols()));
  }
  PcaModel model;
  model.mean = rows.colwise().mean().transpose();
  const Matrix centered = rows.rowwise() - model.mean.transpose();
  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  model.rank = numerical_rank(s);
  if (model.rank < k && !options.allow_rank_deficient) {
    throw NumericalError("PCA rank deficiency: data rank " + std::to_string(model.rank) +
                         " is below k=" + std::to_string(k));
  }
  Matrix directions = svd.matrixV().leftCols(k);
  fix_column_signs(directions);
  model.components = directions.transpose();
  const double denom = static_cast<double>(n - 1);
  model.explained_variance = s.head(k).array().square() / denom;
  for (int i = model.rank; i < k; ++i) model.explained_variance(i) = 0.0;
  model.total_variance = s.array().square().sum() / denom;
  return model;
}

Vector pca_project(const PcaModel& model, const Vector& x) {
  if (x.size() != model.ambient_dim()) {
    throw InputError("pca_project: vector has dimension " + std::to_string(x.size()) +
                     ", model expects " + std::to_string(model.ambient_dim()));
  }
  return model.components * (x - model.mean);
}

Vector pca_lift(const PcaModel& model, const Vector& z) {
  if (z.size() != model.dim()) {
    throw InputError("pca_lift: vector has dimension " + std::to_string(z.size()) +
                     ", model has " + std::to_string(model.dim()) + " components");
  }
  return model.components.transpose() * z + model.mean;
}

Matrix pca_project_rows(const PcaModel& model, const Matrix& rows) {
  if (rows.cols() != model.ambient_dim()) {
    throw InputError("pca_project_rows: rows have dimension " + std::to_string(rows.cols()) +
                     ", model expects " + std::to_string(model.ambient_dim()));
  }
  return (rows.rowwise() - model.mean.transpose()) * model.components.transpose();
}

Basis::Basis(Matrix columns, Provenance provenance)
    : matrix_(std::move(columns)), provenance_(provenance) {
  if (matrix_.cols() == 0 && provenance_ != Provenance::kNone) {
    throw DataIntegrityError("only the 'none' basis may have rank 0");
  }
  const Matrix gram = matrix_.transpose() * matrix_;
  const double err = (gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
  if (matrix_.cols() > 0 && !(err <= kOrthoTolerance)) {
    throw DataIntegrityError("basis columns are not orthonormal (max Gram error " +
                             std::to_string(err) + ")");
  }
}

Basis Basis::empty(int ambient_dim) {
  return Basis(Matrix(ambient_dim, 0), Provenance::kNone, true);
}

Basis Basis::identity(int ambient_dim) {
  return Basis(Matrix::Identity(ambient_dim, ambient_dim), Provenance::kFull, true);
}

Basis orthonormalize(const Matrix& columns, Provenance provenance) {
  if (columns.cols() < 1 || columns.rows() < 1) throw InputError("orthonormalize needs r >= 1 columns");
  if (!columns.allFinite()) throw NumericalError("orthonormalize: non-finite input");
  Eigen::BDCSVD<Matrix> svd(columns, Eigen::ComputeThinU);
  const int rank = numerical_rank(svd.singularValues());
  if (rank == 0) throw NumericalError("orthonormalize: input spans nothing (all-zero columns)");
  Matrix basis = svd.matrixU().leftCols(rank);
  fix_column_signs(basis);
  return Basis(std::move(basis), provenance);
}

Vector ablate_vector(const Vector& x, const Basis& basis) {
  if (x.size() != basis.ambient_dim()) {
    throw InputError("ablate: vector has dimension " + std::to_string(x.size()) + ", basis lives in " +
                     std::to_string(basis.ambient_dim()));
  }
  if (basis.rank() == 0) return x;
  const Vector coeffs = basis.matrix().transpose() * x;
  return x - basis.matrix() * coeffs;
}

Matrix ablate_rows(const Matrix& rows, const Basis& basis) {
  if (rows.cols() != basis.ambient_dim()) {
    throw InputError("ablate: rows have dimension " + std::to_string(rows.cols()) +
                     ", basis lives in " + std::to_string(basis.ambient_dim()));
  }
  if (basis.rank() == 0) return rows;
  const Matrix coeffs = rows * basis.matrix();
  return rows - coeffs * basis.matrix().transpose();
}

double subspace_similarity(const Basis& a, const Basis& b) {
  if (a.ambient_dim() != b.ambient_dim()) {
    throw InputError("subspace_similarity: ambient dimensions " + std::to_string(a.ambient_dim()) +
                     " and " + std::to_string(b.ambient_dim()) + " differ");
  }
  const int count = std::min(a.rank(), b.rank());
  if (count == 0) return 0.0;
  const Matrix cross = a.matrix().transpose() * b.matrix();
  Eigen::JacobiSVD<Matrix> svd(cross);
  const Vector& s = svd.singularValues();
  double sum = 0.0;
  for (int i = 0; i < count; ++i) sum += std::clamp(s(i), 0.0, 1.0);
  return sum / count;
}

RidgeFit ridge_solve(const Matrix& x, const Vector& y, double lambda, const std::optional<Vector>& weights) {
  const auto n = x.rows();
  const auto d = x.cols();
  if (!(lambda > 0.0)) throw InputError("ridge lambda must be positive");
  if (n < 1) throw InputError("ridge needs at least one row");
  if (y.size() != n) throw InputError("ridge: target length differs from row count");
  Vector u = Vector::Ones(n);
  if (weights) {
    if (weights->size() != n) throw InputError("ridge: weight length differs from row count");
    if ((weights->array() < 0.0).any() || !(weights->sum() > 0.0)) {
      throw InputError("ridge: weights must be non-negative with positive sum");
    }
    u = *weights * (static_cast<double>(n) / weights->sum());
  }

  // Normal equations over [x 1] with the intercept unpenalized.
  Matrix a(n, d + 1);
  a.leftCols(d) = x;
  a.col(d).setOnes();
  const Matrix aw = a.array().colwise() * u.array();
  Matrix lhs = a.transpose() * aw;
  lhs.diagonal().head(d).array() += lambda;
  const Vector rhs = aw.transpose() * y;
  const Vector theta = lhs.ldlt().solve(rhs);
  if (!theta.allFinite()) throw NumericalError("ridge solve produced non-finite coefficients");
  return {theta.head(d), theta(d)};
}

Metrics metrics(const Vector& pred, const Vector& target, const std::optional<Vector>& weights) {
  const auto n = pred.size();
  if (target.size() != n) {
    throw InputError("metrics: prediction length " + std::to_string(n) + " differs from target length " +
                     std::to_string(target.size()));
  }
  if (weights && weights->size() != n) throw InputError("metrics: weight length mismatch");
  Metrics m;
  m.n = static_cast<std::size_t>(n);
  if (n == 0) return m;

  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = weights ? (*weights)(i) : 1.0;
    const double e = pred(i) - target(i);
    num += w * e * e;
    den += w;
  }
  m.mse = den > 0.0 ? num / den : 0.0;

  if (n < 2) return m;
  double mp = 0.0;
  double mt = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    mp += pred(i);
    mt += target(i);
  }
  mp /= static_cast<double>(n);
  mt /= static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = pred(i) - mp;
    const double b = target(i) - mt;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx > 0.0 && syy > 0.0) {
    m.pearson = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    m.pearson_defined = true;
  }
  return m;
}

double cosine_similarity(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw InputError("cosine_similarity: length mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

ojson matrix_to_json(const Matrix& m) {
  std::vector<double> row_major(static_cast<std::size_t>(m.size()));
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      row_major.data(), m.rows(), m.cols()) = m;
  std::vector<std::uint8_t> bytes(row_major.size() * sizeof(double));
  std::memcpy(bytes.data(), row_major.data(), bytes.size());
  ojson j;
  j["shape"] = {m.rows(), m.cols()};
  j["dtype"] = "f64le";
  j["data"] = base64_encode(bytes);
  return j;
}

Matrix matrix_from_json(const ojson& j) {
  const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0) throw DataIntegrityError("bad matrix shape");
  if (j.at("dtype").get<std::string>() != "f64le") throw DataIntegrityError("unsupported matrix dtype");
  const std::string bytes = base64_decode(j.at("data").get<std::string>());
  const auto count = static_cast<std::size_t>(shape[0] * shape[1]);
  if (bytes.size() != count * sizeof(double)) {
    throw DataIntegrityError("matrix payload has " + std::to_string(bytes.size()) + " bytes, expected " +
                             std::to_string(count * sizeof(double)));
  }
  std::vector<double> values(count);
  std::memcpy(values.data(), bytes.data(), bytes.size());
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), shape[0], shape[1]);
}

ojson basis_to_json(const Basis& basis) {
  ojson j;
  j["kind"] = "basis";
  j["provenance"] = to_string(basis.provenance());
  j["ambient_dim"] = basis.ambient_dim();
  j["rank"] = basis.rank();
  j["matrix"] = matrix_to_json(basis.matrix());
  return j;
}

Basis basis_from_json(const ojson& j) {
  const Provenance p = provenance_from_string(j.at("provenance").get<std::string>());
  Matrix m = matrix_from_json(j.at("matrix"));
  if (m.cols() == 0) return Basis::empty(static_cast<int>(m.rows()));
  return Basis(std::move(m), p);
}

ojson pca_to_json(const PcaModel& model) {
  ojson j;
  j["kind"] = "pca";
  j["k"] = model.dim();
  j["ambient_dim"] = model.ambient_dim();
  j["rank"] = model.rank;
  j["total_variance"] = model.total_variance;
  j["mean"] = matrix_to_json(model.mean.transpose());
  j["components"] = matrix_to_json(model.components);
  j["explained_variance"] = matrix_to_json(model.explained_variance.transpose());
  return j;
}

PcaModel pca_from_json(const ojson& j) {
  PcaModel model;
  model.mean = matrix_from_json(j.at("mean")).transpose();
  model.components = matrix_from_json(j.at("components"));
  model.explained_variance = matrix_from_json(j.at("explained_variance")).transpose();
  model.total_variance = j.at("total_variance").get<double>();
  model.rank = j.at("rank").get<int>();
  if (model.mean.size() != model.components.cols() ||
      model.explained_variance.size() != model.components.rows()) {
    throw DataIntegrityError("PCA artifact has inconsistent shapes");
  }
  return model;
}

}  // namespace hprobe
