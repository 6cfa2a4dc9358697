#pragma once

// Shared fixtures and independent oracles for the test suites. Everything
// here is deliberately naive (plain loops, exhaustive enumeration) so it
// cannot share a failure mode with the library implementations.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "nugget/core.hpp"

namespace testsupport {

using nugget::Matrix;
using nugget::Vector;

inline Matrix gen_iid_normal(long n, long p, std::uint64_t seed) {
    nugget::CounterRng rng(seed);
    Matrix X(n, p);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < p; ++j) X(i, j) = rng.next_gaussian();
    return X;
}

inline nugget::DataMatrix wrap(Matrix values) {
    nugget::DataMatrix X;
    X.values = std::move(values);
    return X;
}

inline Matrix column(std::vector<double> v) {
    Matrix X(static_cast<long>(v.size()), 1);
    for (std::size_t i = 0; i < v.size(); ++i) X(static_cast<long>(i), 0) = v[i];
    return X;
}

// Direct re-implementation of the closest-pair deletion round: full pair
// sort, no pruning, no blocking.
inline Matrix brute_reduce(Matrix X, long target, double C) {
    while (X.rows() > target) {
        const long n = X.rows();
        struct P {
            double d2;
            long i, j;
        };
        std::vector<P> pairs;
        for (long i = 0; i < n; ++i)
            for (long j = i + 1; j < n; ++j) {
                double d2 = 0.0;
                for (long c = 0; c < X.cols(); ++c) {
                    const double d = X(i, c) - X(j, c);
                    d2 += d * d;
                }
                pairs.push_back({d2, i, j});
            }
        std::sort(pairs.begin(), pairs.end(), [](const P& a, const P& b) {
            if (a.d2 != b.d2) return a.d2 < b.d2;
            if (a.i != b.i) return a.i < b.i;
            return a.j < b.j;
        });
        long k = std::max<long>(1, static_cast<long>(C * static_cast<double>(n)));
        std::vector<char> deleted(static_cast<std::size_t>(n), 0);
        long ndel = 0;
        const long cap = n - target;
        for (long t = 0; t < k && t < static_cast<long>(pairs.size()); ++t) {
            if (ndel >= cap) break;
            const auto& pr = pairs[static_cast<std::size_t>(t)];
            if (deleted[static_cast<std::size_t>(pr.i)] || deleted[static_cast<std::size_t>(pr.j)]) continue;
            deleted[static_cast<std::size_t>(pr.j)] = 1;
            ++ndel;
        }
        Matrix next(n - ndel, X.cols());
        long r = 0;
        for (long i = 0; i < n; ++i)
            if (!deleted[static_cast<std::size_t>(i)]) next.row(r++) = X.row(i);
        X = next;
    }
    return X;
}

// Largest eigenvalue of a symmetric 3x3 matrix by the closed-form
// trigonometric solution of the characteristic polynomial.
inline double sym3_top_eigenvalue(const Eigen::Matrix3d& A) {
    const double p1 = A(0, 1) * A(0, 1) + A(0, 2) * A(0, 2) + A(1, 2) * A(1, 2);
    if (p1 == 0.0) return std::max({A(0, 0), A(1, 1), A(2, 2)});
    const double q = A.trace() / 3.0;
    const double p2 = (A(0, 0) - q) * (A(0, 0) - q) + (A(1, 1) - q) * (A(1, 1) - q) +
                      (A(2, 2) - q) * (A(2, 2) - q) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    Eigen::Matrix3d B = (A - q * Eigen::Matrix3d::Identity()) / p;
    double r = B.determinant() / 2.0;
    r = std::clamp(r, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    return q + 2.0 * p * std::cos(phi);
}

// Exhaustive optimal 2-partition of rows by within-group sum of squares.
// Returns (mask, within_ss) where mask bit i says row i sits in group B.
inline std::pair<std::vector<bool>, double> brute_best_two_partition(const Matrix& rows) {
    const long n = rows.rows();
    double best = std::numeric_limits<double>::infinity();
    unsigned best_mask = 1;
    for (unsigned mask = 1; mask < (1u << n) - 1; ++mask) {
        Eigen::RowVectorXd ma = Eigen::RowVectorXd::Zero(rows.cols());
        Eigen::RowVectorXd mb = Eigen::RowVectorXd::Zero(rows.cols());
        long na = 0, nb = 0;
        for (long i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                mb += rows.row(i);
                ++nb;
            } else {
                ma += rows.row(i);
                ++na;
            }
        }
        ma /= static_cast<double>(na);
        mb /= static_cast<double>(nb);
        double ss = 0.0;
        for (long i = 0; i < n; ++i)
            ss += (mask & (1u << i)) ? (rows.row(i) - mb).squaredNorm()
                                     : (rows.row(i) - ma).squaredNorm();
        if (ss < best) {
            best = ss;
            best_mask = mask;
        }
    }
    std::vector<bool> in_b(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) in_b[static_cast<std::size_t>(i)] = (best_mask >> i) & 1u;
    return {in_b, best};
}

// Minimal weighted within-cluster sum of squares over every possible
// assignment (centers at weighted means). Exponential; keep M small.
inline double brute_min_wwcss(const Matrix& centers, const Vector& weights, int K,
                              std::vector<int>* best_assign = nullptr) {
    const long M = centers.rows();
    std::vector<int> assign(static_cast<std::size_t>(M), 0);
    double best = std::numeric_limits<double>::infinity();
    for (;;) {
        bool valid = true;
        for (int k = 0; k < K && valid; ++k)
            valid = std::find(assign.begin(), assign.end(), k) != assign.end();
        if (valid) {
            double omega = 0.0;
            for (int k = 0; k < K; ++k) {
                Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(centers.cols());
                double w = 0.0;
                for (long j = 0; j < M; ++j)
                    if (assign[static_cast<std::size_t>(j)] == k) {
                        mu += weights(j) * centers.row(j);
                        w += weights(j);
                    }
                mu /= w;
                for (long j = 0; j < M; ++j)
                    if (assign[static_cast<std::size_t>(j)] == k)
                        omega += weights(j) * (centers.row(j) - mu).squaredNorm();
            }
            if (omega < best) {
                best = omega;
                if (best_assign) *best_assign = assign;
            }
        }
        long pos = 0;
        while (pos < M && assign[static_cast<std::size_t>(pos)] == K - 1)
            assign[static_cast<std::size_t>(pos++)] = 0;
        if (pos == M) break;
        ++assign[static_cast<std::size_t>(pos)];
    }
    return best;
}

// Builds a nugget set directly from centers and weights (scales zero,
// assignment expanding each nugget weight times, mean mode).
inline nugget::NuggetSet make_nugget_set(const Matrix& centers, const Vector& weights) {
    nugget::NuggetSet set;
    set.dim = centers.cols();
    for (long j = 0; j < centers.rows(); ++j) {
        nugget::DataNugget n;
        n.center = centers.row(j).transpose();
        n.weight = static_cast<long>(weights(j));
        n.scale = 0.0;
        set.nuggets.push_back(std::move(n));
        for (long r = 0; r < n.weight; ++r) set.assignment.push_back(static_cast<int>(j));
    }
    return set;
}

// High-precision standard normal quantiles for the five tail percentiles.
inline const std::vector<std::pair<double, double>>& normal_tail_quantiles() {
    static const std::vector<std::pair<double, double>> q = {
        {0.95, 1.6448536269514722}, {0.96, 1.7506860712521692}, {0.97, 1.8807936081512509},
        {0.98, 2.0537489106318225}, {0.99, 2.3263478740408408}};
    return q;
}

}  // namespace testsupport
