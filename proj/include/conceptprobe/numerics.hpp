#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cprobe {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kStdFloor = 1e-12;

/// Per-dimension affine standardization fitted on a sample.
struct Standardizer {
  Vector mean;
  Vector std;
  double epsilon_floor = kStdFloor;
  /// Dimensions whose fitted std fell below the floor; their std is 1.
  std::vector<std::size_t> floored;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
};

/// Mean and population (divide-by-n) standard deviation of each column.
Standardizer fit_standardizer(const Matrix& rows, double epsilon_floor = kStdFloor);
Vector apply_standardizer(const Standardizer& s, const Vector& v);
Matrix apply_standardizer_rows(const Standardizer& s, const Matrix& rows);

struct PcaResult {
  Vector component;
  std::vector<double> explained_ratios;
};

/// First principal component of the rows' sample covariance.
///
/// Rows are re-centered. When n < d the n x n Gram matrix is decomposed
/// instead of the d x d covariance; both share the nonzero spectrum.
/// The returned component has its largest-magnitude coordinate positive.
PcaResult pca_first_component(const Matrix& rows, std::size_t k_report);

/// Flips `v` so that its largest-magnitude coordinate (first on ties) is positive.
void fix_sign(Vector& v);

double project(const Vector& unit_component, const Vector& v);

double mean(std::span<const double> x);
/// Population standard deviation.
double population_std(std::span<const double> x);
/// (x - mean) / population std. Requires n >= 2 and a non-constant input.
std::vector<double> zscores(std::span<const double> x);

double pearson_r(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of average ranks.
double spearman_rho(std::span<const double> x, std::span<const double> y);
std::vector<double> average_ranks(std::span<const double> x);

struct RegressionResult {
  std::vector<std::string> terms;
  std::vector<double> coefficients;
  std::vector<double> std_errors;
  std::vector<double> t_stats;
  std::vector<double> p_values;
  double r_squared = 0.0;
  std::size_t n = 0;

  std::size_t index_of(std::string_view term) const;
  double coefficient(std::string_view term) const { return coefficients[index_of(term)]; }
  double std_error(std::string_view term) const { return std_errors[index_of(term)]; }
  double t_stat(std::string_view term) const { return t_stats[index_of(term)]; }
};

/// Ordinary least squares through a column-pivoted Householder QR.
/// `X` must already contain the intercept column.
RegressionResult ols_fit(const Vector& y, const Matrix& X, std::vector<std::string> term_names);

/// Two-sided p-value of a t statistic with `dof` degrees of freedom.
double two_sided_p_value(double t, double dof);

/// "***", "**", "*" or "" for the 1%, 5% and 10% levels.
std::string significance_stars(double p_value);

}  // namespace cprobe
