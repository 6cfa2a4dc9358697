#include "nugget/wstats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nugget {

std::pair<Vector, Eigen::MatrixXd> weighted_mean_cov(const Matrix& centers, const Vector& weights) {
    const long M = centers.rows(), P = centers.cols();
    if (weights.size() != M) throw ValidationError("weighted_mean_cov: weight length mismatch");
    const double N = weights.sum();
    if (!(N >= 2.0)) throw ValidationError("weighted_mean_cov: total weight must be >= 2");

    Vector mu = Vector::Zero(P);
    for (long j = 0; j < M; ++j) mu += weights(j) * centers.row(j).transpose();
    mu /= N;

    Eigen::MatrixXd S_DN = Eigen::MatrixXd::Zero(P, P);
    for (long j = 0; j < M; ++j) {
        const Vector d = centers.row(j).transpose() - mu;
        S_DN.selfadjointView<Eigen::Lower>().rankUpdate(d, weights(j));
    }
    S_DN = S_DN.selfadjointView<Eigen::Lower>();
    S_DN /= (N - 1.0);
    return {std::move(mu), std::move(S_DN)};
}

std::pair<Vector, Eigen::MatrixXd> weighted_mean_cov(const NuggetSet& nuggets) {
    return weighted_mean_cov(nuggets.centers(), nuggets.weights());
}

CovarianceDecomposition decompose_covariance(const DataMatrix& X, const NuggetSet& nuggets) {
    require_valid(X, "decompose_covariance");
    const long N = X.rows(), P = X.cols();
    if (static_cast<long>(nuggets.assignment.size()) != N)
        throw ValidationError("decompose_covariance: assignment does not match the data matrix");
    if (nuggets.dim != P) throw ValidationError("decompose_covariance: dimension mismatch");
    if (N < 2) throw ValidationError("decompose_covariance: need N >= 2");

    CovarianceDecomposition d;

    const Eigen::RowVectorXd grand_mean = X.values.colwise().mean();
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(P, P);
    for (long i = 0; i < N; ++i) {
        const Vector dev = (X.values.row(i) - grand_mean).transpose();
        S.selfadjointView<Eigen::Lower>().rankUpdate(dev);
    }
    d.S = Eigen::MatrixXd(S.selfadjointView<Eigen::Lower>()) / static_cast<double>(N - 1);

    auto [mu, S_DN] = weighted_mean_cov(nuggets);
    d.S_DN = std::move(S_DN);

    // within = (N-1)^-1 sum_j sum_k (x_jk - c_j)(x_jk - c_j)', i.e. the
    // outer-product sum about each nugget's own center.
    Eigen::MatrixXd within = Eigen::MatrixXd::Zero(P, P);
    for (long i = 0; i < N; ++i) {
        const auto& c = nuggets.nuggets[static_cast<std::size_t>(
                                            nuggets.assignment[static_cast<std::size_t>(i)])]
                            .center;
        const Vector dev = X.values.row(i).transpose() - c;
        within.selfadjointView<Eigen::Lower>().rankUpdate(dev);
    }
    d.within = Eigen::MatrixXd(within.selfadjointView<Eigen::Lower>()) / static_cast<double>(N - 1);

    d.residual_norm = (d.S - d.S_DN - d.within).norm();
    if (nuggets.params.center_mode == CenterMode::mean) {
        const double bound = 1e-10 * d.S.norm();
        if (d.residual_norm > bound)
            throw NumericError("decompose_covariance: identity residual " +
                               std::to_string(d.residual_norm) + " exceeds " +
                               std::to_string(bound));
    }
    return d;
}

WPCAResult wpca(const Matrix& centers, const Vector& weights, long q) {
    const long P = centers.cols();
    if (q < 1 || q > P) throw ValidationError("wpca: need 1 <= q <= P");
    auto [mu, S_DN] = weighted_mean_cov(centers, weights);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(S_DN);
    if (solver.info() != Eigen::Success) throw NumericError("wpca: eigensolver failed");

    WPCAResult r;
    r.weighted_mean = mu;
    r.loadings.resize(P, q);
    r.component_variances.resize(q);
    // Eigen returns ascending eigenvalues; take the top q in descending order.
    for (long c = 0; c < q; ++c) {
        const long src = P - 1 - c;
        Vector v = solver.eigenvectors().col(src);
        // Sign convention: the largest-magnitude entry is positive.
        long arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
        r.loadings.col(c) = v;
        r.component_variances(c) = std::max(0.0, solver.eigenvalues()(src));
    }
    Matrix centered = centers;
    centered.rowwise() -= mu.transpose();
    r.scores = centered * r.loadings;
    return r;
}

WPCAResult wpca(const NuggetSet& nuggets, long q) {
    return wpca(nuggets.centers(), nuggets.weights(), q);
}

std::vector<QuantileEstimate> estimate_quantiles(const Vector& centers, const Vector& weights,
                                                 const std::vector<double>& percentiles,
                                                 double tail_fraction) {
    const long M = centers.size();
    if (M < 2) throw ValidationError("estimate_quantiles: need at least two nuggets");
    if (weights.size() != M) throw ValidationError("estimate_quantiles: weight length mismatch");
    for (double p : percentiles)
        if (!(p > 0.0 && p < 1.0))
            throw ValidationError("estimate_quantiles: percentiles must lie in (0,1)");

    std::vector<long> order(static_cast<std::size_t>(M));
    std::iota(order.begin(), order.end(), 0L);
    std::sort(order.begin(), order.end(),
              [&](long a, long b) { return centers(a) < centers(b); });

    const double N = weights.sum();
    std::vector<double> u(static_cast<std::size_t>(M)), c(static_cast<std::size_t>(M));
    double cum = 0.0;
    for (long r = 0; r < M; ++r) {
        cum += weights(order[static_cast<std::size_t>(r)]);
        u[static_cast<std::size_t>(r)] = cum / N;  // right-endpoint convention
        c[static_cast<std::size_t>(r)] = centers(order[static_cast<std::size_t>(r)]);
    }

    long first = 0;
    if (tail_fraction > 0.0) {
        const double cutoff = 1.0 - tail_fraction;
        while (first < M && u[static_cast<std::size_t>(first)] <= cutoff) ++first;
        if (M - first < 2)
            throw ValidationError("estimate_quantiles: tail window holds fewer than two nuggets");
    }

    double su = 0.0, sc = 0.0, suu = 0.0, suc = 0.0;
    const double n_fit = static_cast<double>(M - first);
    for (long r = first; r < M; ++r) {
        su += u[static_cast<std::size_t>(r)];
        sc += c[static_cast<std::size_t>(r)];
        suu += u[static_cast<std::size_t>(r)] * u[static_cast<std::size_t>(r)];
        suc += u[static_cast<std::size_t>(r)] * c[static_cast<std::size_t>(r)];
    }
    const double denom = suu - su * su / n_fit;
    if (!(denom > 0.0))
        throw NumericError("estimate_quantiles: degenerate predictor (zero variance)");
    const double slope = (suc - su * sc / n_fit) / denom;
    const double intercept = (sc - slope * su) / n_fit;

    std::vector<QuantileEstimate> out;
    out.reserve(percentiles.size());
    for (double p : percentiles)
        out.push_back({p, intercept + slope * p, slope, intercept});
    return out;
}

std::vector<QuantileEstimate> estimate_quantiles(const NuggetSet& nuggets,
                                                 const std::vector<double>& percentiles,
                                                 double tail_fraction) {
    if (nuggets.dim != 1)
        throw ValidationError("estimate_quantiles: defined for one-dimensional nuggets");
    Vector centers(nuggets.size());
    for (long j = 0; j < nuggets.size(); ++j)
        centers(j) = nuggets.nuggets[static_cast<std::size_t>(j)].center(0);
    return estimate_quantiles(centers, nuggets.weights(), percentiles, tail_fraction);
}

DensityGrid density_grid(const Matrix& points, const Vector& weights, int bins, double x_min,
                         double x_max, double y_min, double y_max) {
    if (points.cols() != 2) throw ValidationError("density_grid: points must be 2-D");
    if (weights.size() != points.rows())
        throw ValidationError("density_grid: weight length mismatch");
    if (bins < 1) throw ValidationError("density_grid: bins must be >= 1");
    for (long i = 0; i < weights.size(); ++i)
        if (!(weights(i) > 0.0)) throw ValidationError("density_grid: weights must be positive");
    if (!(x_max > x_min) || !(y_max > y_min))
        throw ValidationError("density_grid: degenerate bounding box");

    DensityGrid g;
    g.x_min = x_min;
    g.x_max = x_max;
    g.y_min = y_min;
    g.y_max = y_max;
    g.grid = Eigen::MatrixXd::Zero(bins, bins);
    const double sx = bins / (x_max - x_min);
    const double sy = bins / (y_max - y_min);
    for (long i = 0; i < points.rows(); ++i) {
        const double x = points(i, 0), y = points(i, 1);
        if (x < x_min || x > x_max || y < y_min || y > y_max) continue;
        long ix = static_cast<long>((x - x_min) * sx);
        long iy = static_cast<long>((y - y_min) * sy);
        ix = std::min<long>(ix, bins - 1);  // points on the max edge join the last bin
        iy = std::min<long>(iy, bins - 1);
        g.grid(ix, iy) += weights(i);
    }
    return g;
}

DensityGrid density_grid(const Matrix& points, const Vector& weights, int bins) {
    if (points.rows() < 1) throw ValidationError("density_grid: no points");
    if (points.cols() != 2) throw ValidationError("density_grid: points must be 2-D");
    return density_grid(points, weights, bins, points.col(0).minCoeff(), points.col(0).maxCoeff(),
                        points.col(1).minCoeff(), points.col(1).maxCoeff());
}

double grid_correlation(const DensityGrid& a, const DensityGrid& b) {
    if (a.grid.rows() != b.grid.rows() || a.grid.cols() != b.grid.cols())
        throw ValidationError("grid_correlation: shape mismatch");
    const long n = a.grid.size();
    const double ma = a.grid.mean(), mb = b.grid.mean();
    double num = 0.0, va = 0.0, vb = 0.0;
    for (long i = 0; i < n; ++i) {
        const double da = a.grid.data()[i] - ma;
        const double db = b.grid.data()[i] - mb;
        num += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va <= 0.0 || vb <= 0.0) throw NumericError("grid_correlation: constant grid");
    return num / std::sqrt(va * vb);
}

double largest_principal_angle(const Eigen::MatrixXd& basis_a, const Eigen::MatrixXd& basis_b) {
    if (basis_a.rows() != basis_b.rows() || basis_a.cols() != basis_b.cols())
        throw ValidationError("largest_principal_angle: shape mismatch");
    // Singular values of A'B are the cosines of the principal angles.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(basis_a.transpose() * basis_b);
    const double c = std::clamp(svd.singularValues().minCoeff(), -1.0, 1.0);
    return std::acos(c);
}

}  // namespace nugget
