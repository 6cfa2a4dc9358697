#include "nugget/wcluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nugget {

namespace {

void check_cluster_inputs(const Matrix& centers, const Vector& weights,
                          const std::vector<int>& assignment, long K) {
    const long M = centers.rows();
    if (weights.size() != M) throw ValidationError("wwcss: weight length mismatch");
    if (static_cast<long>(assignment.size()) != M)
        throw ValidationError("wwcss: assignment length mismatch");
    std::vector<long> counts(static_cast<std::size_t>(K), 0);
    for (int a : assignment) {
        if (a < 0 || a >= K) throw ValidationError("wwcss: cluster index out of range");
        ++counts[static_cast<std::size_t>(a)];
    }
    for (long k = 0; k < K; ++k)
        if (counts[static_cast<std::size_t>(k)] == 0)
            throw NumericError("wwcss: cluster " + std::to_string(k) + " is empty");
}

}  // namespace

double wwcss(const Matrix& centers, const Vector& weights, const std::vector<int>& assignment,
             const Matrix& cluster_centers) {
    const long K = cluster_centers.rows();
    check_cluster_inputs(centers, weights, assignment, K);
    double omega = 0.0;
    for (long j = 0; j < centers.rows(); ++j)
        omega += weights(j) *
                 (centers.row(j) - cluster_centers.row(assignment[static_cast<std::size_t>(j)]))
                     .squaredNorm();
    return omega;
}

double wwcss(const NuggetSet& nuggets, const std::vector<int>& assignment,
             const Matrix& cluster_centers) {
    return wwcss(nuggets.centers(), nuggets.weights(), assignment, cluster_centers);
}

namespace {

struct StartOutcome {
    std::vector<int> assignment;
    Matrix mu;
    double omega = std::numeric_limits<double>::infinity();
    int sweeps = 0;
    bool converged = false;
};

// One initialization: seeded distinct centers, nearest-center assignment,
// weighted-mean update, then single-move sweeps with immediate center
// recomputation. Returns nullopt when the initial assignment leaves a
// cluster empty.
std::optional<StartOutcome> run_start(const Matrix& centers, const Vector& weights,
                                      const WKMeansParams& params, CounterRng rng) {
    const long M = centers.rows();
    const long P = centers.cols();
    const int K = params.K;

    std::vector<int> init = rng.sample_without_replacement(static_cast<int>(M), K);
    Matrix mu(K, P);
    for (int k = 0; k < K; ++k) mu.row(k) = centers.row(init[static_cast<std::size_t>(k)]);

    std::vector<int> assign(static_cast<std::size_t>(M), 0);
    std::vector<long> count(static_cast<std::size_t>(K), 0);
    for (long j = 0; j < M; ++j) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int k = 0; k < K; ++k) {
            const double d2 = (centers.row(j) - mu.row(k)).squaredNorm();
            if (d2 < best) {
                best = d2;
                arg = k;
            }
        }
        assign[static_cast<std::size_t>(j)] = arg;
        ++count[static_cast<std::size_t>(arg)];
    }
    for (int k = 0; k < K; ++k)
        if (count[static_cast<std::size_t>(k)] == 0) return std::nullopt;

    // Per-cluster aggregates; omega = sum_k (Q_k - |S_k|^2 / W_k) is exact
    // when mu_k = S_k / W_k.
    Vector W = Vector::Zero(K);
    Matrix S = Matrix::Zero(K, P);
    Vector Q = Vector::Zero(K);
    for (long j = 0; j < M; ++j) {
        const int k = assign[static_cast<std::size_t>(j)];
        W(k) += weights(j);
        S.row(k) += weights(j) * centers.row(j);
        Q(k) += weights(j) * centers.row(j).squaredNorm();
    }
    for (int k = 0; k < K; ++k) mu.row(k) = S.row(k) / W(k);

    auto cluster_cost = [&](int k) { return std::max(0.0, Q(k) - S.row(k).squaredNorm() / W(k)); };
    double omega = 0.0;
    for (int k = 0; k < K; ++k) omega += cluster_cost(k);

    StartOutcome out;
    int sweeps = 0;
    bool moved_any = true;
    while (moved_any && sweeps < params.max_sweeps) {
        moved_any = false;
        ++sweeps;
        for (long j = 0; j < M; ++j) {
            const int a = assign[static_cast<std::size_t>(j)];
            if (count[static_cast<std::size_t>(a)] == 1) continue;  // keep clusters nonempty
            const double da = (centers.row(j) - mu.row(a)).squaredNorm();
            double best_gain = -1e-12;  // strict decrease with absolute tolerance
            int best_k = -1;
            for (int k = 0; k < K; ++k) {
                if (k == a) continue;
                const double dk = (centers.row(j) - mu.row(k)).squaredNorm();
                const double gain = weights(j) * (dk - da);
                if (gain < best_gain) {
                    best_gain = gain;
                    best_k = k;
                }
            }
            if (best_k < 0) continue;

            const double omega_before = omega;
            const double old_ab = cluster_cost(a) + cluster_cost(best_k);
            W(a) -= weights(j);
            S.row(a) -= weights(j) * centers.row(j);
            Q(a) -= weights(j) * centers.row(j).squaredNorm();
            W(best_k) += weights(j);
            S.row(best_k) += weights(j) * centers.row(j);
            Q(best_k) += weights(j) * centers.row(j).squaredNorm();
            --count[static_cast<std::size_t>(a)];
            ++count[static_cast<std::size_t>(best_k)];
            assign[static_cast<std::size_t>(j)] = best_k;
            mu.row(a) = S.row(a) / W(a);
            mu.row(best_k) = S.row(best_k) / W(best_k);
            omega += cluster_cost(a) + cluster_cost(best_k) - old_ab;
            moved_any = true;
            if (omega > omega_before + 1e-9 * std::max(1.0, std::abs(omega_before)))
                throw NumericError("weighted_kmeans: objective increased after a committed move");
        }
    }

    out.assignment = std::move(assign);
    out.mu = std::move(mu);
    out.sweeps = sweeps;
    out.converged = !moved_any;
    out.omega = omega;
    return out;
}

}  // namespace

Clustering weighted_kmeans(const Matrix& centers, const Vector& weights,
                           const WKMeansParams& params) {
    const long M = centers.rows();
    if (M < 1) throw ValidationError("weighted_kmeans: no observations");
    if (weights.size() != M) throw ValidationError("weighted_kmeans: weight length mismatch");
    if (params.K < 1 || params.K > M)
        throw ValidationError("weighted_kmeans: need 1 <= K <= M");
    if (params.starts < 1) throw ValidationError("weighted_kmeans: starts must be >= 1");
    for (long j = 0; j < M; ++j)
        if (!(weights(j) > 0.0)) throw ValidationError("weighted_kmeans: weights must be positive");

    CounterRng base = CounterRng(params.seed).split(0xC105);
    std::optional<StartOutcome> best;
    for (int s = 0; s < params.starts; ++s) {
        std::optional<StartOutcome> run;
        CounterRng start_rng = base.split(static_cast<std::uint64_t>(s));
        for (int retry = 0; retry < 10 && !run; ++retry)
            run = run_start(centers, weights, params, start_rng.split(static_cast<std::uint64_t>(retry)));
        if (!run)
            throw NumericError("weighted_kmeans: could not find a start without empty clusters");
        // strict comparison keeps the earliest start on ties
        if (!best || run->omega < best->omega) best = std::move(run);
    }

    Clustering result;
    result.assignment = std::move(best->assignment);
    result.centers = std::move(best->mu);
    result.sweeps = best->sweeps;
    result.converged = best->converged;
    // Reported objective is recomputed from scratch so it matches the
    // returned fields exactly.
    result.wwcss = wwcss(centers, weights, result.assignment, result.centers);
    return result;
}

Clustering weighted_kmeans(const NuggetSet& nuggets, const WKMeansParams& params) {
    return weighted_kmeans(nuggets.centers(), nuggets.weights(), params);
}

namespace {

// Exact max-weight assignment on a square profit matrix: exhaustive for
// small K, Hungarian (potentials form, O(K^3)) otherwise. Returns sigma
// with sigma[row] = column.
std::vector<int> best_assignment(const Eigen::MatrixXd& profit) {
    const int K = static_cast<int>(profit.rows());
    if (K <= 8) {
        std::vector<int> perm(static_cast<std::size_t>(K));
        std::iota(perm.begin(), perm.end(), 0);
        std::vector<int> best = perm;
        double best_total = -std::numeric_limits<double>::infinity();
        do {
            double total = 0.0;
            for (int r = 0; r < K; ++r) total += profit(r, perm[static_cast<std::size_t>(r)]);
            if (total > best_total) {
                best_total = total;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return best;
    }

    // Hungarian on cost = -profit, 1-indexed potentials formulation.
    const int n = K;
    const double INF = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<int> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n + 1), INF);
        std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            double delta = INF;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = -profit(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                                   v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> sigma(static_cast<std::size_t>(n), 0);
    for (int j = 1; j <= n; ++j)
        if (p[static_cast<std::size_t>(j)] > 0) sigma[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return sigma;
}

Eigen::MatrixXd weighted_confusion(const std::vector<int>& predicted,
                                   const std::vector<int>& truth, const Vector& weights, int* K_out) {
    if (predicted.size() != truth.size())
        throw ValidationError("accuracy: label vectors differ in length");
    if (weights.size() != static_cast<long>(predicted.size()))
        throw ValidationError("accuracy: weight length mismatch");
    int K = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] < 0 || truth[i] < 0)
            throw ValidationError("accuracy: labels must be nonnegative");
        K = std::max({K, predicted[i] + 1, truth[i] + 1});
    }
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(K, K);
    for (std::size_t i = 0; i < predicted.size(); ++i)
        W(predicted[i], truth[i]) += weights(static_cast<long>(i));
    *K_out = K;
    return W;
}

}  // namespace

double best_permutation_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth,
                                 const Vector& weights) {
    int K = 0;
    const Eigen::MatrixXd W = weighted_confusion(predicted, truth, weights, &K);
    const std::vector<int> sigma = best_assignment(W);
    double correct = 0.0;
    for (int k = 0; k < K; ++k) correct += W(k, sigma[static_cast<std::size_t>(k)]);
    const double total = weights.sum();
    return total > 0.0 ? correct / total : 0.0;
}

std::vector<double> per_cluster_accuracy(const std::vector<int>& predicted,
                                         const std::vector<int>& truth, const Vector& weights) {
    int K = 0;
    const Eigen::MatrixXd W = weighted_confusion(predicted, truth, weights, &K);
    const std::vector<int> sigma = best_assignment(W);
    std::vector<int> inv(static_cast<std::size_t>(K), 0);
    for (int k = 0; k < K; ++k) inv[static_cast<std::size_t>(sigma[static_cast<std::size_t>(k)])] = k;
    std::vector<double> acc(static_cast<std::size_t>(K), 0.0);
    for (int t = 0; t < K; ++t) {
        const double total = W.col(t).sum();
        acc[static_cast<std::size_t>(t)] = total > 0.0 ? W(inv[static_cast<std::size_t>(t)], t) / total : 0.0;
    }
    return acc;
}

int select_k_second_difference(const std::vector<double>& curve, int k_min) {
    if (curve.size() < 3)
        throw ValidationError("choose_k: need at least three K values for a second difference");
    int best_i = 1;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
        const double d2 = curve[i - 1] - 2.0 * curve[i] + curve[i + 1];
        if (d2 > best) {
            best = d2;
            best_i = static_cast<int>(i);
        }
    }
    return k_min + best_i;
}

ChooseKResult choose_k(const Matrix& centers, const Vector& weights, int k_min, int k_max,
                       const WKMeansParams& params) {
    const long M = centers.rows();
    if (k_min < 2) throw ValidationError("choose_k: k_min must be >= 2");
    if (k_max > M - 1) throw ValidationError("choose_k: k_max must be <= M-1");
    if (k_max - k_min < 2) throw ValidationError("choose_k: need k_max - k_min >= 2");

    ChooseKResult result;
    result.k_min = k_min;
    CounterRng base = CounterRng(params.seed).split(0xCC00);
    for (int K = k_min; K <= k_max; ++K) {
        WKMeansParams pk = params;
        pk.K = K;
        pk.seed = base.split(static_cast<std::uint64_t>(K)).next_u64();
        Clustering c = weighted_kmeans(centers, weights, pk);
        result.curve.push_back(c.wwcss);
        result.runs.push_back(std::move(c));
    }
    for (std::size_t i = 1; i < result.curve.size(); ++i)
        if (result.curve[i] > result.curve[i - 1] * (1.0 + 1e-12)) result.monotone = false;
    result.selected = select_k_second_difference(result.curve, k_min);
    return result;
}

ChooseKResult choose_k(const NuggetSet& nuggets, int k_min, int k_max,
                       const WKMeansParams& params) {
    return choose_k(nuggets.centers(), nuggets.weights(), k_min, k_max, params);
}

}  // namespace nugget
