#include "conceptprobe/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "conceptprobe/error.hpp"

namespace cprobe {

namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite input");
}

void require_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want)
    throw NumericError(std::string(what) + ": dimension mismatch (" + std::to_string(got) +
                       " vs " + std::to_string(want) + ")");
}

}  // namespace

Standardizer fit_standardizer(const Matrix& rows, double epsilon_floor) {
  if (rows.rows() < 2) throw NumericError("fit_standardizer: need at least 2 rows");
  require_finite(rows, "fit_standardizer");
  Standardizer s;
  s.epsilon_floor = epsilon_floor;
  s.mean = rows.colwise().mean().transpose();
  const Matrix centered = rows.rowwise() - s.mean.transpose();
  s.std = (centered.array().square().colwise().sum() / static_cast<double>(rows.rows()))
              .sqrt()
              .transpose();
  for (Eigen::Index j = 0; j < s.std.size(); ++j) {
    if (s.std[j] < epsilon_floor) {
      s.std[j] = 1.0;
      s.floored.push_back(static_cast<std::size_t>(j));
    }
  }
  return s;
}

Vector apply_standardizer(const Standardizer& s, const Vector& v) {
  require_dim(static_cast<std::size_t>(v.size()), s.dim(), "apply_standardizer");
  return (v - s.mean).cwiseQuotient(s.std);
}

Matrix apply_standardizer_rows(const Standardizer& s, const Matrix& rows) {
  require_dim(static_cast<std::size_t>(rows.cols()), s.dim(), "apply_standardizer_rows");
  Matrix out = rows.rowwise() - s.mean.transpose();
  return out.array().rowwise() / s.std.transpose().array();
}

void fix_sign(Vector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  if (v.size() > 0 && v[best] < 0) v = -v;
}

PcaResult pca_first_component(const Matrix& rows, std::size_t k_report) {
  const auto n = rows.rows();
  const auto d = rows.cols();
  if (n < 2) throw NumericError("pca: need at least 2 rows");
  if (d < 1) throw NumericError("pca: zero-dimensional rows");
  require_finite(rows, "pca");
  const Matrix c = rows.rowwise() - rows.colwise().mean();
  const double scale = 1.0 / static_cast<double>(n - 1);

  Vector eigenvalues;
  Vector component;
  if (n < d) {
    const Matrix gram = (c * c.transpose()) * scale;
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    if (es.info() != Eigen::Success) throw NumericError("pca: eigensolver failed");
    eigenvalues = es.eigenvalues();
    component = c.transpose() * es.eigenvectors().col(n - 1);
  } else {
    const Matrix cov = (c.transpose() * c) * scale;
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    if (es.info() != Eigen::Success) throw NumericError("pca: eigensolver failed");
    eigenvalues = es.eigenvalues();
    component = es.eigenvectors().col(d - 1);
  }

  // Eigen returns ascending order.
  std::vector<double> lambda(eigenvalues.data(), eigenvalues.data() + eigenvalues.size());
  std::reverse(lambda.begin(), lambda.end());
  for (auto& l : lambda) l = std::max(l, 0.0);
  const double top = lambda.front();
  if (!(top > 0.0)) throw NumericError("pca: rows have no variance");
  const double tol = top * 1e-12 * static_cast<double>(std::max(n, d));
  const auto rank = static_cast<std::size_t>(
      std::count_if(lambda.begin(), lambda.end(), [&](double l) { return l > tol; }));
  const double total = std::accumulate(lambda.begin(), lambda.end(), 0.0);

  PcaResult out;
  const double norm = component.norm();
  if (!(norm > 0.0)) throw NumericError("pca: degenerate leading component");
  out.component = component / norm;
  fix_sign(out.component);
  const auto keep = std::min(k_report, rank);
  for (std::size_t i = 0; i < keep; ++i) out.explained_ratios.push_back(lambda[i] / total);
  return out;
}

double project(const Vector& unit_component, const Vector& v) {
  require_dim(static_cast<std::size_t>(v.size()), static_cast<std::size_t>(unit_component.size()),
              "project");
  return unit_component.dot(v);
}

double mean(std::span<const double> x) {
  if (x.empty()) throw NumericError("mean of an empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double population_std(std::span<const double> x) {
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size()));
}

std::vector<double> zscores(std::span<const double> x) {
  if (x.size() < 2) throw NumericError("zscores: need at least 2 values");
  const double m = mean(x);
  const double s = population_std(x);
  if (!(s > 0.0)) throw NumericError("zscores: constant input");
  std::vector<double> out;
  out.reserve(x.size());
  for (double v : x) out.push_back((v - m) / s);
  return out;
}

double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw NumericError("pearson_r: length mismatch");
  if (x.size() < 3) throw NumericError("pearson_r: need at least 3 pairs");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = x[i] - mx;
    const double b = y[i] - my;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw NumericError("pearson_r: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw NumericError("spearman_rho: length mismatch");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson_r(rx, ry);
}

std::size_t RegressionResult::index_of(std::string_view term) const {
  for (std::size_t i = 0; i < terms.size(); ++i)
    if (terms[i] == term) return i;
  throw UsageError("regression has no term '" + std::string(term) + "'");
}

double two_sided_p_value(double t, double dof) {
  if (std::isnan(t) || !(dof > 0.0)) return std::nan("");
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(dof);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

std::string significance_stars(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.10) return "*";
  return "";
}

RegressionResult ols_fit(const Vector& y, const Matrix& X, std::vector<std::string> term_names) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (y.size() != n) throw NumericError("ols: y and X row counts differ");
  if (static_cast<Eigen::Index>(term_names.size()) != p)
    throw NumericError("ols: term names do not match design columns");
  if (n <= p)
    throw NumericError("ols: need more observations (" + std::to_string(n) + ") than terms (" +
                       std::to_string(p) + ")");
  require_finite(X, "ols design");
  if (!y.allFinite()) throw NumericError("ols: non-finite dependent variable");

  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  if (qr.rank() < p)
    throw NumericError("ols: design matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                       " of " + std::to_string(p) + ")");
  const Vector beta = qr.solve(y);
  const Vector resid = y - X * beta;
  const double rss = resid.squaredNorm();
  const double tss = (y.array() - y.mean()).square().sum();
  if (!(tss > 0.0)) throw NumericError("ols: dependent variable is constant");
  const double dof = static_cast<double>(n - p);
  const double sigma2 = rss / dof;

  const Matrix r = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Matrix r_inv = r.triangularView<Eigen::Upper>().solve(Matrix::Identity(p, p));
  const auto perm = qr.colsPermutation();
  const Matrix xtx_inv = perm * (r_inv * r_inv.transpose()) * perm.transpose();

  RegressionResult out;
  out.terms = std::move(term_names);
  out.n = static_cast<std::size_t>(n);
  out.r_squared = std::clamp(1.0 - rss / tss, 0.0, 1.0);
  for (Eigen::Index k = 0; k < p; ++k) {
    const double b = beta[k];
    const double se = std::sqrt(std::max(sigma2 * xtx_inv(k, k), 0.0));
    const double t = b / se;
    out.coefficients.push_back(b);
    out.std_errors.push_back(se);
    out.t_stats.push_back(t);
    out.p_values.push_back(two_sided_p_value(t, dof));
  }
  return out;
}

}  // namespace cprobe
