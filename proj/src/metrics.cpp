#include "ssagan/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "ssagan/error.hpp"
#include "ssagan/log.hpp"

namespace ssagan::metrics {

InceptionScore inception_score(const Tensor& probs, int splits) {
  if (probs.rank() != 2) throw InputError("inception_score expects (N, K) probabilities");
  if (splits < 1) throw ConfigError("inception_score needs splits >= 1");
  const std::int64_t n = probs.dim(0), k = probs.dim(1);
  for (std::int64_t i = 0; i < n; ++i) {
    double row = 0;
    for (std::int64_t j = 0; j < k; ++j) {
      const double p = probs[i * k + j];
      if (!(p >= 0.0) || !std::isfinite(p)) throw InputError("class probabilities must be finite and non-negative");
      row += p;
    }
    if (std::abs(row - 1.0) > 1e-6) throw InputError("row " + std::to_string(i) + " of class probabilities sums to " + std::to_string(row));
  }
  const std::int64_t per = n / splits;
  if (per < 1) throw ConfigError("fewer predictions than splits");
  if (n % splits != 0) warn("inception_score drops " + std::to_string(n % splits) + " predictions to even out splits");

  std::vector<double> scores;
  for (int s = 0; s < splits; ++s) {
    const std::int64_t lo = s * per;
    std::vector<double> marginal(static_cast<std::size_t>(k), 0.0);
    for (std::int64_t i = lo; i < lo + per; ++i)
      for (std::int64_t j = 0; j < k; ++j) marginal[static_cast<std::size_t>(j)] += probs[i * k + j];
    for (auto& m : marginal) m /= static_cast<double>(per);
    double kl_sum = 0;
    for (std::int64_t i = lo; i < lo + per; ++i)
      for (std::int64_t j = 0; j < k; ++j) {
        const double p = probs[i * k + j];
        if (p > 0) kl_sum += p * (std::log(p) - std::log(marginal[static_cast<std::size_t>(j)]));
      }
    scores.push_back(std::exp(kl_sum / static_cast<double>(per)));
  }
  InceptionScore out;
  for (double v : scores) out.mean += v / static_cast<double>(splits);
  for (double v : scores) out.std += (v - out.mean) * (v - out.mean) / static_cast<double>(splits);
  out.std = std::sqrt(out.std);
  return out;
}

namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Moments {
  Vector mean;
  Matrix cov;
};

Moments moments(const Tensor& x) {
  if (x.rank() != 2) throw InputError("fid expects (N, F) features");
  const std::int64_t n = x.dim(0), f = x.dim(1);
  if (n < 2) throw InputError("fid needs at least two samples per set");
  for (Real v : x.data())
    if (!std::isfinite(v)) throw InputError("fid features must be finite");
  if (n < f + 1) warn("fid with " + std::to_string(n) + " samples of dimension " + std::to_string(f) + ": covariance is rank deficient");
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(x.ptr(), n, f);
  Moments out;
  out.mean = m.colwise().mean().transpose();
  Matrix centred = m.rowwise() - out.mean.transpose();
  out.cov = (centred.transpose() * centred) / static_cast<double>(n - 1);
  return out;
}

/// Clamps eigenvalues that are negative from roundoff; larger negatives are reported.
Vector clamped_eigenvalues(const Vector& values) {
  Vector out = values;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    if (out[i] < 0) {
      if (out[i] < -1e-8) warn("fid: clamping eigenvalue " + std::to_string(out[i]) + " to zero");
      out[i] = 0;
    }
  return out;
}

/// trace((A B)^(1/2)) through the symmetric form A^(1/2) B A^(1/2).
double trace_sqrt_product(const Matrix& a, const Matrix& b) {
  Eigen::SelfAdjointEigenSolver<Matrix> ea(a);
  Matrix root = ea.eigenvectors() * clamped_eigenvalues(ea.eigenvalues()).cwiseSqrt().asDiagonal() *
                ea.eigenvectors().transpose();
  Matrix sym = root * b * root;
  sym = 0.5 * (sym + sym.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return clamped_eigenvalues(es.eigenvalues()).cwiseSqrt().sum();
}

}  // namespace

double fid(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) throw InputError("fid feature dimensions differ");
  Moments ma = moments(a), mb = moments(b);
  const double mean_term = (ma.mean - mb.mean).squaredNorm();
  // Averaging both orders keeps the result exactly symmetric in its arguments.
  const double cross = 0.5 * (trace_sqrt_product(ma.cov, mb.cov) + trace_sqrt_product(mb.cov, ma.cov));
  return mean_term + ma.cov.trace() + mb.cov.trace() - 2.0 * cross;
}

}  // namespace ssagan::metrics
