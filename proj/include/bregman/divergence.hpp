#ifndef BREGMAN_DIVERGENCE_HPP
#define BREGMAN_DIVERGENCE_HPP

#include <span>
#include <string>

#include "bregman/common.hpp"
#include "json.hpp"

namespace bregman {

enum class DivergenceKind {
  SquaredEuclidean,
  Mahalanobis,
  RelativeEntropy,
  ItakuraSaito,
  Harmonic,
  NormLike,
  ExponentialLoss,
  Hellinger,
};

std::string kind_name(DivergenceKind kind);
DivergenceKind kind_from_name(const std::string& name);

/// Upper-triangular factor U of a positive definite A = U^T U, stored either
/// as a scalar multiple of the identity (U = u I, so A = u^2 I) or dense.
/// Squared Mahalanobis distances evaluate as ||U(p-q)||^2, which is O(d) in
/// the scalar case.
class MahalanobisFactor {
public:
  MahalanobisFactor() = default;  // empty; assign from a factory before use

  static MahalanobisFactor scaled_identity(Index dim, double coefficient);
  static MahalanobisFactor dense(Eigen::MatrixXd upper);

  double distance(std::span<const double> p, std::span<const double> q) const;

  Index dim() const { return dim_; }
  bool is_scalar() const { return dense_.size() == 0; }
  double scalar() const { return scalar_; }

  /// Materializes U (scalar case included).
  Eigen::MatrixXd factor() const;
  /// Materializes A = U^T U.
  Eigen::MatrixXd matrix() const;

private:
  Index dim_ = 0;
  double scalar_ = 1.0;     // U = scalar * I when dense_ is empty
  Eigen::MatrixXd dense_;   // upper triangular when nonempty
};

/// Upper Cholesky factor: A = U^T U with positive diagonal. Throws on a
/// non-positive pivot, naming its index.
Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& a);

/// Squared Mahalanobis distance ||U(p-q)||^2 = (p-q)^T A (p-q).
double mahalanobis_distance(const MahalanobisFactor& factor, std::span<const double> p,
                            std::span<const double> q);

struct SimilarityParams {
  double mu = 1.0;          // similarity constant in (0, 1]
  MahalanobisFactor factor; // Cholesky factor U of the comparison matrix A
};

/// One mu-similar Bregman divergence: generator kind, dimension, coordinate
/// box domain where the kind requires one, and the similarity pair (mu, A)
/// precomputed at construction. Build through the named factories; they
/// validate the domain constraints of each kind.
class DivergenceSpec {
public:
  static DivergenceSpec squared_euclidean(Index dim);
  static DivergenceSpec mahalanobis(Eigen::MatrixXd a);
  static DivergenceSpec relative_entropy(Index dim, double lambda, double nu);
  static DivergenceSpec itakura_saito(Index dim, double lambda, double nu);
  static DivergenceSpec harmonic(Index dim, double lambda, double nu, double alpha);
  static DivergenceSpec norm_like(Index dim, double lambda, double nu, double alpha);
  static DivergenceSpec exponential_loss(Index dim, double lambda, double nu);
  static DivergenceSpec hellinger(Index dim, double nu);

  DivergenceKind kind() const { return kind_; }
  Index dim() const { return dim_; }
  bool has_box() const;
  double domain_low() const { return domain_low_; }
  double domain_high() const { return domain_high_; }
  double alpha() const { return alpha_; }
  const Eigen::MatrixXd& matrix_a() const { return matrix_a_; }
  const SimilarityParams& similarity() const { return similarity_; }

  /// Closed-interval membership, zero tolerance; callers needing slack clamp
  /// first (see clamp_to_domain).
  bool in_domain(std::span<const double> p) const;
  /// Throws DomainError naming the offending coordinate.
  void require_in_domain(std::span<const double> p, const char* who) const;

private:
  DivergenceSpec() = default;
  void finalize_similarity();

  DivergenceKind kind_ = DivergenceKind::SquaredEuclidean;
  Index dim_ = 0;
  double domain_low_ = 0.0;
  double domain_high_ = 0.0;
  double alpha_ = 0.0;
  Eigen::MatrixXd matrix_a_;
  SimilarityParams similarity_;
};

/// Generator value phi(p) for the spec's kind.
double phi(const DivergenceSpec& spec, std::span<const double> p);

/// Gradient of phi at q, written into out.
void grad_phi(const DivergenceSpec& spec, std::span<const double> q, std::span<double> out);

/// phi(p) - phi(q) - <grad phi(q), p - q>, the defining Bregman formula.
double bregman_generic(const DivergenceSpec& spec, std::span<const double> p,
                       std::span<const double> q);

/// Per-kind closed form; agrees with bregman_generic up to roundoff.
double bregman_closed(const DivergenceSpec& spec, std::span<const double> p,
                      std::span<const double> q);

/// Closed form without the domain check, for inner loops whose inputs were
/// validated once up front.
double bregman_closed_unchecked(const DivergenceSpec& spec, std::span<const double> p,
                                std::span<const double> q);

/// The spec's (mu, A) pair with A's Cholesky factor.
const SimilarityParams& similarity_params(const DivergenceSpec& spec);

nlohmann::json divergence_to_json(const DivergenceSpec& spec);
DivergenceSpec divergence_from_json(const nlohmann::json& j);
DivergenceSpec load_divergence(const std::string& path);
void save_divergence(const DivergenceSpec& spec, const std::string& path);

}  // namespace bregman

#endif
