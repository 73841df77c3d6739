#include "bregman/divergence.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace bregman {

std::string kind_name(DivergenceKind kind) {
  switch (kind) {
    case DivergenceKind::SquaredEuclidean: return "squared_euclidean";
    case DivergenceKind::Mahalanobis: return "mahalanobis";
    case DivergenceKind::RelativeEntropy: return "relative_entropy";
    case DivergenceKind::ItakuraSaito: return "itakura_saito";
    case DivergenceKind::Harmonic: return "harmonic";
    case DivergenceKind::NormLike: return "norm_like";
    case DivergenceKind::ExponentialLoss: return "exponential_loss";
    case DivergenceKind::Hellinger: return "hellinger";
  }
  throw std::logic_error("divergences: unknown kind");
}

DivergenceKind kind_from_name(const std::string& name) {
  if (name == "squared_euclidean") return DivergenceKind::SquaredEuclidean;
  if (name == "mahalanobis") return DivergenceKind::Mahalanobis;
  if (name == "relative_entropy") return DivergenceKind::RelativeEntropy;
  if (name == "itakura_saito") return DivergenceKind::ItakuraSaito;
  if (name == "harmonic") return DivergenceKind::Harmonic;
  if (name == "norm_like") return DivergenceKind::NormLike;
  if (name == "exponential_loss") return DivergenceKind::ExponentialLoss;
  if (name == "hellinger") return DivergenceKind::Hellinger;
  throw ParseError("divergences: unknown kind name '" + name + "'");
}

MahalanobisFactor MahalanobisFactor::scaled_identity(Index dim, double coefficient) {
  if (dim < 1) throw std::invalid_argument("divergences: factor dimension must be >= 1");
  if (!(coefficient > 0.0) || !std::isfinite(coefficient))
    throw std::invalid_argument("divergences: scaled identity needs a positive coefficient");
  MahalanobisFactor f;
  f.dim_ = dim;
  f.scalar_ = std::sqrt(coefficient);
  return f;
}

MahalanobisFactor MahalanobisFactor::dense(Eigen::MatrixXd upper) {
  if (upper.rows() != upper.cols() || upper.rows() < 1)
    throw std::invalid_argument("divergences: factor must be square");
  for (Index i = 0; i < upper.rows(); ++i) {
    if (!(upper(i, i) > 0.0))
      throw std::invalid_argument("divergences: factor diagonal must be positive");
    for (Index j = 0; j < i; ++j)
      if (upper(i, j) != 0.0)
        throw std::invalid_argument("divergences: factor must be upper triangular");
  }
  MahalanobisFactor f;
  f.dim_ = upper.rows();
  f.dense_ = std::move(upper);
  return f;
}

double MahalanobisFactor::distance(std::span<const double> p, std::span<const double> q) const {
  if (p.size() != q.size() || static_cast<Index>(p.size()) != dim_)
    throw std::invalid_argument("divergences: dimension mismatch in mahalanobis_distance");
  if (is_scalar()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double diff = p[i] - q[i];
      acc += diff * diff;
    }
    return scalar_ * scalar_ * acc;
  }
  // ||U(p-q)||^2 with U upper triangular: row i touches columns i..d-1.
  double acc = 0.0;
  for (Index i = 0; i < dim_; ++i) {
    double row = 0.0;
    for (Index j = i; j < dim_; ++j) row += dense_(i, j) * (p[j] - q[j]);
    acc += row * row;
  }
  return acc;
}

Eigen::MatrixXd MahalanobisFactor::factor() const {
  if (is_scalar())
    return scalar_ * Eigen::MatrixXd::Identity(dim_, dim_);
  return dense_;
}

Eigen::MatrixXd MahalanobisFactor::matrix() const {
  if (is_scalar())
    return scalar_ * scalar_ * Eigen::MatrixXd::Identity(dim_, dim_);
  return dense_.transpose() * dense_;
}

Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& a) {
  const Index d = a.rows();
  if (a.cols() != d || d < 1)
    throw std::invalid_argument("divergences: cholesky_factor needs a square matrix");
  const double scale = a.cwiseAbs().maxCoeff();
  if (!((a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, scale)))
    throw std::invalid_argument("divergences: cholesky_factor needs a symmetric matrix");
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(d, d);
  for (Index j = 0; j < d; ++j) {
    double pivot = a(j, j);
    for (Index i = 0; i < j; ++i) pivot -= u(i, j) * u(i, j);
    if (!(pivot > 0.0)) {
      std::ostringstream msg;
      msg << "divergences: matrix is not positive definite (pivot " << j << " = " << pivot << ")";
      throw std::invalid_argument(msg.str());
    }
    u(j, j) = std::sqrt(pivot);
    for (Index k = j + 1; k < d; ++k) {
      double off = a(j, k);
      for (Index i = 0; i < j; ++i) off -= u(i, j) * u(i, k);
      u(j, k) = off / u(j, j);
    }
  }
  return u;
}

double mahalanobis_distance(const MahalanobisFactor& factor, std::span<const double> p,
                            std::span<const double> q) {
  return factor.distance(p, q);
}

bool DivergenceSpec::has_box() const {
  return kind_ != DivergenceKind::SquaredEuclidean && kind_ != DivergenceKind::Mahalanobis;
}

bool DivergenceSpec::in_domain(std::span<const double> p) const {
  if (static_cast<Index>(p.size()) != dim_) return false;
  if (!has_box()) {
    for (double x : p)
      if (!std::isfinite(x)) return false;
    return true;
  }
  for (double x : p)
    if (!(x >= domain_low_ && x <= domain_high_)) return false;
  return true;
}

void DivergenceSpec::require_in_domain(std::span<const double> p, const char* who) const {
  if (static_cast<Index>(p.size()) != dim_) {
    std::ostringstream msg;
    msg << "divergences: " << who << ": point has dimension " << p.size() << ", spec has "
        << dim_;
    throw std::invalid_argument(msg.str());
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double x = p[i];
    if (!has_box()) {
      if (!std::isfinite(x)) {
        std::ostringstream msg;
        msg << "divergences: " << who << ": coordinate " << i << " is not finite";
        throw DomainError(msg.str());
      }
      continue;
    }
    if (!(x >= domain_low_ && x <= domain_high_)) {
      std::ostringstream msg;
      msg << "divergences: " << who << ": coordinate " << i << " = " << x << " outside ["
          << domain_low_ << ", " << domain_high_ << "]";
      throw DomainError(msg.str());
    }
  }
}

static void check_box(double lambda, double nu, bool positive) {
  if (!std::isfinite(lambda) || !std::isfinite(nu) || !(lambda < nu))
    throw std::invalid_argument("divergences: domain box requires lambda < nu");
  if (positive && !(lambda > 0.0))
    throw std::invalid_argument("divergences: domain box requires lambda > 0");
}

void DivergenceSpec::finalize_similarity() {
  const double lambda = domain_low_;
  const double nu = domain_high_;
  switch (kind_) {
    case DivergenceKind::SquaredEuclidean:
      similarity_ = {1.0, MahalanobisFactor::scaled_identity(dim_, 1.0)};
      return;
    case DivergenceKind::Mahalanobis:
      similarity_ = {1.0, MahalanobisFactor::dense(cholesky_factor(matrix_a_))};
      return;
    case DivergenceKind::RelativeEntropy:
      similarity_ = {lambda / nu, MahalanobisFactor::scaled_identity(dim_, 1.0 / (2.0 * lambda))};
      return;
    case DivergenceKind::ItakuraSaito:
      similarity_ = {(lambda * lambda) / (nu * nu),
                     MahalanobisFactor::scaled_identity(dim_, 1.0 / (2.0 * lambda * lambda))};
      return;
    case DivergenceKind::Harmonic:
      // phi'' = a(a+1) t^{-a-2} peaks at lambda; mu is the min/max ratio.
      similarity_ = {std::pow(lambda / nu, alpha_ + 2.0),
                     MahalanobisFactor::scaled_identity(
                         dim_, alpha_ * (alpha_ + 1.0) / (2.0 * std::pow(lambda, alpha_ + 2.0)))};
      return;
    case DivergenceKind::NormLike:
      // phi'' = a(a-1) t^{a-2} peaks at nu for a > 2.
      similarity_ = {std::pow(lambda / nu, alpha_ - 2.0),
                     MahalanobisFactor::scaled_identity(
                         dim_, alpha_ * (alpha_ - 1.0) * std::pow(nu, alpha_ - 2.0) / 2.0)};
      return;
    case DivergenceKind::ExponentialLoss:
      similarity_ = {std::exp(-(nu - lambda)),
                     MahalanobisFactor::scaled_identity(dim_, std::exp(nu) / 2.0)};
      return;
    case DivergenceKind::Hellinger: {
      // phi'' = (1-t^2)^{-3/2} on [-nu, nu]: min 1 at t = 0, max at |t| = nu.
      const double shape = std::pow(1.0 - nu * nu, 1.5);
      similarity_ = {shape, MahalanobisFactor::scaled_identity(dim_, 1.0 / (2.0 * shape))};
      return;
    }
  }
  throw std::logic_error("divergences: unknown kind");
}

DivergenceSpec DivergenceSpec::squared_euclidean(Index dim) {
  if (dim < 1) throw std::invalid_argument("divergences: dim must be >= 1");
  DivergenceSpec s;
  s.kind_ = DivergenceKind::SquaredEuclidean;
  s.dim_ = dim;
  s.finalize_similarity();
  return s;
}

DivergenceSpec DivergenceSpec::mahalanobis(Eigen::MatrixXd a) {
  DivergenceSpec s;
  s.kind_ = DivergenceKind::Mahalanobis;
  s.dim_ = a.rows();
  s.matrix_a_ = std::move(a);
  s.finalize_similarity();  // validates positive definiteness via the factorization
  return s;
}

DivergenceSpec DivergenceSpec::relative_entropy(Index dim, double lambda, double nu) {
  if (dim < 1) throw std::invalid_argument("divergences: dim must be >= 1");
  check_box(lambda, nu, true);
  DivergenceSpec s;
  s.kind_ = DivergenceKind::RelativeEntropy;
  s.dim_ = dim;
  s.domain_low_ = lambda;
  s.domain_high_ = nu;
  s.finalize_similarity();
  return s;
}

DivergenceSpec DivergenceSpec::itakura_saito(Index dim, double lambda, double nu) {
  if (dim < 1) throw std::invalid_argument("divergences: dim must be >= 1");
  check_box(lambda, nu, true);
  DivergenceSpec s;
  s.kind_ = DivergenceKind::ItakuraSaito;
  s.dim_ = dim;
  s.domain_low_ = lambda;
  s.domain_high_ = nu;
  s.finalize_similarity();
  return s;
}

DivergenceSpec DivergenceSpec::harmonic(Index dim, double lambda, double nu, double alpha) {
  if (dim < 1) throw std::invalid_argument("divergences: dim must be >= 1");
  check_box(lambda, nu, true);
  if (!(alpha > 0.0)) throw std::invalid_argument("divergences: harmonic requires alpha > 0");
  DivergenceSpec s;
  s.kind_ = DivergenceKind::Harmonic;
  s.dim_ = dim;
  s.domain_low_ = lambda;
  s.domain_high_ = nu;
  s.alpha_ = alpha;
  s.finalize_similarity();
  return s;
}

DivergenceSpec DivergenceSpec::norm_like(Index dim, double lambda, double nu, double alpha) {
  if (dim < 1) throw std::invalid_argument("divergences: dim must be >= 1");
  check_box(lambda, nu, true);
  if (!(alpha > 2.0)) throw std::invalid_argument("divergences: norm_like requires alpha > 2");
  DivergenceSpec s;
  s.kind_ = DivergenceKind::NormLike;
  s.dim_ = dim;
  s.domain_low_ = lambda;
  s.domain_high_ = nu;
  s.alpha_ = alpha;
  s.finalize_similarity();
  return s;
}

DivergenceSpec DivergenceSpec::exponential_loss(Index dim, double lambda, double nu) {
  if (dim < 1) throw std::invalid_argument("divergences: dim must be >= 1");
  check_box(lambda, nu, true);
  DivergenceSpec s;
  s.kind_ = DivergenceKind::ExponentialLoss;
  s.dim_ = dim;
  s.domain_low_ = lambda;
  s.domain_high_ = nu;
  s.finalize_similarity();
  return s;
}

DivergenceSpec DivergenceSpec::hellinger(Index dim, double nu) {
  if (dim < 1) throw std::invalid_argument("divergences: dim must be >= 1");
  if (!(nu > 0.0 && nu < 1.0))
    throw std::invalid_argument("divergences: hellinger requires 0 < nu < 1");
  DivergenceSpec s;
  s.kind_ = DivergenceKind::Hellinger;
  s.dim_ = dim;
  s.domain_low_ = -nu;
  s.domain_high_ = nu;
  s.finalize_similarity();
  return s;
}

double phi(const DivergenceSpec& spec, std::span<const double> p) {
  spec.require_in_domain(p, "phi");
  switch (spec.kind()) {
    case DivergenceKind::SquaredEuclidean: {
      double acc = 0.0;
      for (double x : p) acc += x * x;
      return acc;
    }
    case DivergenceKind::Mahalanobis: {
      // t^T A t = ||U t||^2
      const auto& f = spec.similarity().factor;
      std::vector<double> zero(p.size(), 0.0);
      return f.distance(p, {zero.data(), zero.size()});
    }
    case DivergenceKind::RelativeEntropy: {
      double acc = 0.0;
      for (double x : p) acc += x * std::log(x) - x;
      return acc;
    }
    case DivergenceKind::ItakuraSaito: {
      double acc = 0.0;
      for (double x : p) acc -= std::log(x);
      return acc;
    }
    case DivergenceKind::Harmonic: {
      double acc = 0.0;
      for (double x : p) acc += std::pow(x, -spec.alpha());
      return acc;
    }
    case DivergenceKind::NormLike: {
      double acc = 0.0;
      for (double x : p) acc += std::pow(x, spec.alpha());
      return acc;
    }
    case DivergenceKind::ExponentialLoss: {
      double acc = 0.0;
      for (double x : p) acc += std::exp(x);
      return acc;
    }
    case DivergenceKind::Hellinger: {
      double acc = 0.0;
      for (double x : p) acc -= std::sqrt(1.0 - x * x);
      return acc;
    }
  }
  throw std::logic_error("divergences: unknown kind");
}

void grad_phi(const DivergenceSpec& spec, std::span<const double> q, std::span<double> out) {
  spec.require_in_domain(q, "grad_phi");
  if (out.size() != q.size())
    throw std::invalid_argument("divergences: grad_phi output size mismatch");
  switch (spec.kind()) {
    case DivergenceKind::SquaredEuclidean:
      for (std::size_t i = 0; i < q.size(); ++i) out[i] = 2.0 * q[i];
      return;
    case DivergenceKind::Mahalanobis: {
      const auto& a = spec.matrix_a();
      for (Index i = 0; i < a.rows(); ++i) {
        double acc = 0.0;
        for (Index j = 0; j < a.cols(); ++j) acc += a(i, j) * q[j];
        out[i] = 2.0 * acc;
      }
      return;
    }
    case DivergenceKind::RelativeEntropy:
      for (std::size_t i = 0; i < q.size(); ++i) out[i] = std::log(q[i]);
      return;
    case DivergenceKind::ItakuraSaito:
      for (std::size_t i = 0; i < q.size(); ++i) out[i] = -1.0 / q[i];
      return;
    case DivergenceKind::Harmonic:
      for (std::size_t i = 0; i < q.size(); ++i)
        out[i] = -spec.alpha() * std::pow(q[i], -spec.alpha() - 1.0);
      return;
    case DivergenceKind::NormLike:
      for (std::size_t i = 0; i < q.size(); ++i)
        out[i] = spec.alpha() * std::pow(q[i], spec.alpha() - 1.0);
      return;
    case DivergenceKind::ExponentialLoss:
      for (std::size_t i = 0; i < q.size(); ++i) out[i] = std::exp(q[i]);
      return;
    case DivergenceKind::Hellinger:
      for (std::size_t i = 0; i < q.size(); ++i) out[i] = q[i] / std::sqrt(1.0 - q[i] * q[i]);
      return;
  }
  throw std::logic_error("divergences: unknown kind");
}

double bregman_generic(const DivergenceSpec& spec, std::span<const double> p,
                       std::span<const double> q) {
  if (p.size() != q.size())
    throw std::invalid_argument("divergences: bregman_generic dimension mismatch");
  std::vector<double> grad(q.size());
  const double fp = phi(spec, p);
  const double fq = phi(spec, q);
  grad_phi(spec, q, grad);
  double inner = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) inner += grad[i] * (p[i] - q[i]);
  return fp - fq - inner;
}

double bregman_closed(const DivergenceSpec& spec, std::span<const double> p,
                      std::span<const double> q) {
  if (p.size() != q.size())
    throw std::invalid_argument("divergences: bregman_closed dimension mismatch");
  spec.require_in_domain(p, "bregman_closed");
  spec.require_in_domain(q, "bregman_closed");
  return bregman_closed_unchecked(spec, p, q);
}

double bregman_closed_unchecked(const DivergenceSpec& spec, std::span<const double> p,
                                std::span<const double> q) {
  const double alpha = spec.alpha();
  double acc = 0.0;
  switch (spec.kind()) {
    case DivergenceKind::SquaredEuclidean:
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double diff = p[i] - q[i];
        acc += diff * diff;
      }
      return acc;
    case DivergenceKind::Mahalanobis:
      return spec.similarity().factor.distance(p, q);
    case DivergenceKind::RelativeEntropy:
      // ln evaluated on the ratio directly; p and q are bounded away from 0.
      for (std::size_t i = 0; i < p.size(); ++i)
        acc += p[i] * std::log(p[i] / q[i]) - (p[i] - q[i]);
      return acc;
    case DivergenceKind::ItakuraSaito:
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double r = p[i] / q[i];
        acc += r - std::log(r) - 1.0;
      }
      return acc;
    // Equal coordinates contribute exactly zero; the explicit skip avoids the
    // 1-ulp residue the pow/exp terms would otherwise leave on the diagonal.
    case DivergenceKind::Harmonic:
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == q[i]) continue;
        acc += std::pow(p[i], -alpha) - (alpha + 1.0) * std::pow(q[i], -alpha) +
               alpha * p[i] * std::pow(q[i], -alpha - 1.0);
      }
      return acc;
    case DivergenceKind::NormLike:
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == q[i]) continue;
        acc += std::pow(p[i], alpha) + (alpha - 1.0) * std::pow(q[i], alpha) -
               alpha * p[i] * std::pow(q[i], alpha - 1.0);
      }
      return acc;
    case DivergenceKind::ExponentialLoss:
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == q[i]) continue;
        acc += std::exp(p[i]) - (p[i] - q[i] + 1.0) * std::exp(q[i]);
      }
      return acc;
    case DivergenceKind::Hellinger:
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == q[i]) continue;
        acc += (1.0 - p[i] * q[i]) / std::sqrt(1.0 - q[i] * q[i]) -
               std::sqrt(1.0 - p[i] * p[i]);
      }
      return acc;
  }
  throw std::logic_error("divergences: unknown kind");
}

const SimilarityParams& similarity_params(const DivergenceSpec& spec) {
  return spec.similarity();
}

nlohmann::json divergence_to_json(const DivergenceSpec& spec) {
  nlohmann::json j;
  j["kind"] = kind_name(spec.kind());
  j["dim"] = spec.dim();
  j["lambda"] = nullptr;
  j["nu"] = nullptr;
  j["alpha"] = nullptr;
  j["A"] = nullptr;
  if (spec.has_box()) {
    j["lambda"] = spec.domain_low();
    j["nu"] = spec.domain_high();
  }
  if (spec.kind() == DivergenceKind::Harmonic || spec.kind() == DivergenceKind::NormLike)
    j["alpha"] = spec.alpha();
  if (spec.kind() == DivergenceKind::Mahalanobis) {
    const auto& a = spec.matrix_a();
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < a.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Index k = 0; k < a.cols(); ++k) row.push_back(a(i, k));
      rows.push_back(std::move(row));
    }
    j["A"] = std::move(rows);
  }
  return j;
}

DivergenceSpec divergence_from_json(const nlohmann::json& j) {
  try {
    const DivergenceKind kind = kind_from_name(j.at("kind").get<std::string>());
    const Index dim = j.at("dim").get<Index>();
    const auto get_opt = [&](const char* key) -> double {
      if (!j.contains(key) || j.at(key).is_null())
        throw ParseError(std::string("divergences: missing field '") + key + "'");
      return j.at(key).get<double>();
    };
    switch (kind) {
      case DivergenceKind::SquaredEuclidean:
        return DivergenceSpec::squared_euclidean(dim);
      case DivergenceKind::Mahalanobis: {
        const auto& rows = j.at("A");
        Eigen::MatrixXd a(dim, dim);
        if (static_cast<Index>(rows.size()) != dim)
          throw ParseError("divergences: A has wrong row count");
        for (Index i = 0; i < dim; ++i) {
          if (static_cast<Index>(rows[i].size()) != dim)
            throw ParseError("divergences: A has ragged rows");
          for (Index k = 0; k < dim; ++k) a(i, k) = rows[i][k].get<double>();
        }
        return DivergenceSpec::mahalanobis(std::move(a));
      }
      case DivergenceKind::RelativeEntropy:
        return DivergenceSpec::relative_entropy(dim, get_opt("lambda"), get_opt("nu"));
      case DivergenceKind::ItakuraSaito:
        return DivergenceSpec::itakura_saito(dim, get_opt("lambda"), get_opt("nu"));
      case DivergenceKind::Harmonic:
        return DivergenceSpec::harmonic(dim, get_opt("lambda"), get_opt("nu"), get_opt("alpha"));
      case DivergenceKind::NormLike:
        return DivergenceSpec::norm_like(dim, get_opt("lambda"), get_opt("nu"), get_opt("alpha"));
      case DivergenceKind::ExponentialLoss:
        return DivergenceSpec::exponential_loss(dim, get_opt("lambda"), get_opt("nu"));
      case DivergenceKind::Hellinger:
        return DivergenceSpec::hellinger(dim, get_opt("nu"));
    }
    throw std::logic_error("divergences: unknown kind");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("divergences: bad spec JSON: ") + e.what());
  }
}

DivergenceSpec load_divergence(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("divergences: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("divergences: cannot parse '" + path + "': " + e.what());
  }
  return divergence_from_json(j);
}

void save_divergence(const DivergenceSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("divergences: cannot write '" + path + "'");
  out << divergence_to_json(spec).dump(2) << "\n";
}

}  // namespace bregman
