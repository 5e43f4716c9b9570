#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>
#include <json.hpp>

namespace hprobe {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ojson = nlohmann::ordered_json;

/// Where an ablation / comparison basis came from.
enum class Provenance { kProbe, kRandom, kPcaCot, kPcaNodes, kFull, kNone, kPlanted, kOther };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

struct PcaModel {
  Vector mean;                 // D
  Matrix components;           // k x D, orthonormal rows
  Vector explained_variance;   // k, non-increasing
  double total_variance = 0.0;
  int rank = 0;                // numerical rank of the centered data

  int dim() const { return static_cast<int>(components.rows()); }
  int ambient_dim() const { return static_cast<int>(components.cols()); }
  double explained_ratio() const;
};

struct PcaOptions {
  // Accept rank < k; the trailing components then carry zero variance.
  bool allow_rank_deficient = false;
};

/// Top-k principal directions via SVD of the mean-centered rows (n x D).
/// Each component's largest-magnitude entry is made positive.
PcaModel pca_fit(const Matrix& rows, int k, PcaOptions options = {});
Vector pca_project(const PcaModel& model, const Vector& x);
Vector pca_lift(const PcaModel& model, const Vector& z);
/// Row-wise projection of an n x D matrix to n x k.
Matrix pca_project_rows(const PcaModel& model, const Matrix& rows);

// Column-orthonormal D x r basis. Rank 0 is reserved for the "none" kind.
class Basis {
 public:
  Basis(Matrix columns, Provenance provenance);
  static Basis empty(int ambient_dim);
  static Basis identity(int ambient_dim);

  const Matrix& matrix() const { return matrix_; }
  int rank() const { return static_cast<int>(matrix_.cols()); }
  int ambient_dim() const { return static_cast<int>(matrix_.rows()); }
  Provenance provenance() const { return provenance_; }

 private:
  Basis(Matrix columns, Provenance provenance, bool /*trusted*/)
      : matrix_(std::move(columns)), provenance_(provenance) {}

  Matrix matrix_;
  Provenance provenance_;
};

/// SVD of the columns; singular values below 1e-10 * sigma_max are dropped.
Basis orthonormalize(const Matrix& columns, Provenance provenance = Provenance::kOther);

/// x - H (H^T x), never forming the D x D projector.
Vector ablate_vector(const Vector& x, const Basis& basis);
/// Ablates every row of an n x D matrix.
Matrix ablate_rows(const Matrix& rows, const Basis& basis);

/// Mean cosine of the principal angles (mean of the singular values of
/// A^T B over min(rank_a, rank_b) values).
double subspace_similarity(const Basis& a, const Basis& b);

struct RidgeFit {
  Vector w;
  double b = 0.0;
};

/// argmin sum_i u_i (w.x_i + b - y_i)^2 + lambda |w|^2 with the intercept
/// unpenalized; weights u are rescaled to mean 1 first, so only their
/// relative sizes matter.
RidgeFit ridge_solve(const Matrix& x, const Vector& y, double lambda,
                     const std::optional<Vector>& weights = std::nullopt);

struct Metrics {
  double mse = 0.0;
  double pearson = 0.0;
  bool pearson_defined = false;  // false when either side is constant
  std::size_t n = 0;
};

/// Weighted MSE and unweighted Pearson.
Metrics metrics(const Vector& pred, const Vector& target,
                const std::optional<Vector>& weights = std::nullopt);

double cosine_similarity(const Vector& a, const Vector& b);

// Persistence: {shape, dtype "f64le", data (base64 of row-major bytes)}.
ojson matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const ojson& j);
ojson basis_to_json(const Basis& basis);
Basis basis_from_json(const ojson& j);
ojson pca_to_json(const PcaModel& model);
PcaModel pca_from_json(const ojson& j);

}  // namespace hprobe
