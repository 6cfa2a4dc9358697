#pragma once

#include "nugget/core.hpp"

namespace nugget {

struct CovarianceDecomposition {
    Eigen::MatrixXd S;       // sample covariance of the full data
    Eigen::MatrixXd S_DN;    // between-nugget term
    Eigen::MatrixXd within;  // (N-1)^-1 sum_j (w_j - 1) Cov(X_j)
    double residual_norm = 0.0;  // ||S - S_DN - within||_F
};

struct WPCAResult {
    Eigen::MatrixXd loadings;    // P x q, orthonormal columns
    Vector component_variances;  // q, descending
    Matrix scores;               // M x q
    Vector weighted_mean;        // P
};

struct QuantileEstimate {
    double percentile = 0.0;
    double estimate = 0.0;
    double regression_slope = 0.0;
    double regression_intercept = 0.0;
};

struct DensityGrid {
    Eigen::MatrixXd grid;  // bins x bins, [ix][iy]
    double x_min = 0.0, x_max = 0.0;
    double y_min = 0.0, y_max = 0.0;
};

// Weighted mean of nugget centers and the between-nugget covariance
// S_DN = (N-1)^-1 sum_j w_j (c_j - mu)(c_j - mu)', N = sum w_j.
std::pair<Vector, Eigen::MatrixXd> weighted_mean_cov(const Matrix& centers, const Vector& weights);
std::pair<Vector, Eigen::MatrixXd> weighted_mean_cov(const NuggetSet& nuggets);

// Exact finite-sample split of the sample covariance into between- and
// within-nugget terms. In mean-center mode the identity is asserted to
// 1e-10 * ||S||_F; in random-center mode the residual is only reported.
CovarianceDecomposition decompose_covariance(const DataMatrix& X, const NuggetSet& nuggets);

// Weighted PCA: eigendecomposition of S_DN about the weighted mean. Signs
// follow the largest-magnitude loading entry. q may exceed the rank; the
// trailing component variances are then zero.
WPCAResult wpca(const Matrix& centers, const Vector& weights, long q);
WPCAResult wpca(const NuggetSet& nuggets, long q);

// Tail quantiles by ordinary least squares of nugget centers (P = 1) on
// cumulative weight proportions, evaluated at the requested percentiles.
// tail_fraction > 0 restricts the fit to nuggets whose cumulative
// proportion exceeds 1 - tail_fraction (documented alternative; default
// fits all nuggets).
std::vector<QuantileEstimate> estimate_quantiles(const NuggetSet& nuggets,
                                                 const std::vector<double>& percentiles,
                                                 double tail_fraction = 0.0);
std::vector<QuantileEstimate> estimate_quantiles(const Vector& centers, const Vector& weights,
                                                 const std::vector<double>& percentiles,
                                                 double tail_fraction = 0.0);

// Weighted 2-D histogram. Ranges default to the bounding box of the points;
// with explicit ranges, out-of-range points are dropped.
DensityGrid density_grid(const Matrix& points, const Vector& weights, int bins = 100);
DensityGrid density_grid(const Matrix& points, const Vector& weights, int bins, double x_min,
                         double x_max, double y_min, double y_max);

// Pearson correlation between the flattened cells of two equal-shape grids.
double grid_correlation(const DensityGrid& a, const DensityGrid& b);

// Largest principal angle (radians) between the column spans of two
// orthonormal bases with matching shapes.
double largest_principal_angle(const Eigen::MatrixXd& basis_a, const Eigen::MatrixXd& basis_b);

}  // namespace nugget
