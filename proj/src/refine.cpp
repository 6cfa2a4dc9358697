#include "nugget/refine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nugget/reduce.hpp"

namespace nugget {

double quantile_type7(std::vector<double> values, double p) {
    if (values.empty()) throw ValidationError("quantile: empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("quantile: p outside [0,1]");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = h - std::floor(h);
    return values[lo] + frac * (values[hi] - values[lo]);
}

double largest_eigenvalue(const Matrix& members) {
    const long w = members.rows(), p = members.cols();
    if (w < 2) return 0.0;
    const Eigen::RowVectorXd mean = members.colwise().mean();
    if (p == 1) {
        double s = 0.0;
        for (long i = 0; i < w; ++i) {
            const double d = members(i, 0) - mean(0);
            s += d * d;
        }
        return s / static_cast<double>(w - 1);
    }
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
    for (long i = 0; i < w; ++i) {
        const Eigen::RowVectorXd d = members.row(i) - mean;
        cov.selfadjointView<Eigen::Lower>().rankUpdate(d.transpose());
    }
    cov = cov.selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>(w - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw NumericError("largest_eigenvalue: eigensolver failed");
    return std::max(0.0, solver.eigenvalues().maxCoeff());
}

namespace {

struct TwoMeans {
    std::vector<int> a, b;
    double within_ss = 0.0;
};

// One seeded Lloyd run for K = 2 on unweighted rows. Initial centers are
// the two rows at maximal pairwise distance among a <=32-row subsample.
std::optional<TwoMeans> two_means_once(const Matrix& rows, CounterRng rng) {
    const long n = rows.rows();
    const long sub_n = std::min<long>(32, n);
    std::vector<int> sample =
        rng.sample_without_replacement(static_cast<int>(n), static_cast<int>(sub_n));
    std::sort(sample.begin(), sample.end());

    double best_d2 = -1.0;
    long ia = 0, ib = 0;
    for (std::size_t s = 0; s < sample.size(); ++s)
        for (std::size_t t = s + 1; t < sample.size(); ++t) {
            const double d2 =
                (rows.row(sample[s]) - rows.row(sample[t])).squaredNorm();
            if (d2 > best_d2) {
                best_d2 = d2;
                ia = sample[s];
                ib = sample[t];
            }
        }
    if (best_d2 <= 0.0) return std::nullopt;  // all sampled rows identical

    Eigen::RowVectorXd ca = rows.row(ia), cb = rows.row(ib);
    std::vector<char> in_b(static_cast<std::size_t>(n), 0);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        long na = 0, nb = 0;
        Eigen::RowVectorXd sa = Eigen::RowVectorXd::Zero(rows.cols());
        Eigen::RowVectorXd sb = Eigen::RowVectorXd::Zero(rows.cols());
        for (long i = 0; i < n; ++i) {
            const double da = (rows.row(i) - ca).squaredNorm();
            const double db = (rows.row(i) - cb).squaredNorm();
            const char side = db < da ? 1 : 0;
            if (side != in_b[static_cast<std::size_t>(i)]) {
                in_b[static_cast<std::size_t>(i)] = side;
                changed = true;
            }
            if (side) {
                sb += rows.row(i);
                ++nb;
            } else {
                sa += rows.row(i);
                ++na;
            }
        }
        if (na == 0 || nb == 0) return std::nullopt;
        ca = sa / static_cast<double>(na);
        cb = sb / static_cast<double>(nb);
        if (!changed) break;
    }

    TwoMeans out;
    for (long i = 0; i < n; ++i)
        (in_b[static_cast<std::size_t>(i)] ? out.b : out.a).push_back(static_cast<int>(i));
    if (out.a.empty() || out.b.empty()) return std::nullopt;
    for (int i : out.a) out.within_ss += (rows.row(i) - ca).squaredNorm();
    for (int i : out.b) out.within_ss += (rows.row(i) - cb).squaredNorm();
    return out;
}

}  // namespace

std::optional<std::pair<std::vector<int>, std::vector<int>>> split_nugget(const Matrix& members,
                                                                          CounterRng rng) {
    if (members.rows() < 2) return std::nullopt;
    std::optional<TwoMeans> best;
    for (int restart = 0; restart < 5; ++restart) {
        auto run = two_means_once(members, rng.split(static_cast<std::uint64_t>(restart)));
        if (!run) continue;
        if (!best || run->within_ss < best->within_ss - 1e-12) best = std::move(run);
    }
    if (!best) return std::nullopt;
    return std::make_pair(std::move(best->a), std::move(best->b));
}

RefineResult refine_data_nuggets(const DataMatrix& X, const NuggetSet& nuggets,
                                 const RefineParams& params, int threads) {
    require_valid(X, "refine_data_nuggets");
    if (!(params.nu > 0.0 && params.nu < 1.0))
        throw ValidationError("refine: nu must lie in (0,1)");
    if (params.n_min < 1) throw ValidationError("refine: n_min must be >= 1");
    if (params.max_rounds < 1) throw ValidationError("refine: max_rounds must be >= 1");
    if (static_cast<long>(nuggets.assignment.size()) != X.rows())
        throw ValidationError("refine: assignment does not match the data matrix");
    threads = resolve_threads(threads);

    const long P = X.cols();
    std::vector<std::vector<int>> members = nuggets.members();
    std::vector<bool> reverted(members.size(), false);

    RefineResult result;
    CounterRng base = CounterRng(params.seed).split(0x5F11);

    auto gather = [&](const std::vector<int>& idx) {
        Matrix rows(static_cast<long>(idx.size()), P);
        for (std::size_t r = 0; r < idx.size(); ++r) rows.row(static_cast<long>(r)) = X.values.row(idx[r]);
        return rows;
    };

    for (int round = 0; round < params.max_rounds; ++round) {
        const long M = static_cast<long>(members.size());
        std::vector<double> zeta(static_cast<std::size_t>(M), 0.0);
        detail::parallel_for(M, threads, [&](long j) {
            const auto& idx = members[static_cast<std::size_t>(j)];
            if (idx.size() < 2) return;
            zeta[static_cast<std::size_t>(j)] = largest_eigenvalue(gather(idx));
        });

        std::vector<double> nonzero;
        for (double z : zeta)
            if (z > 0.0) nonzero.push_back(z);
        if (nonzero.empty()) break;
        const double eta = quantile_type7(nonzero, params.nu);
        result.final_eta = eta;

        std::vector<long> candidates;
        for (long j = 0; j < M; ++j)
            if (zeta[static_cast<std::size_t>(j)] > eta) candidates.push_back(j);
        if (candidates.empty()) break;
        std::sort(candidates.begin(), candidates.end(), [&](long a, long b) {
            const double za = zeta[static_cast<std::size_t>(a)], zb = zeta[static_cast<std::size_t>(b)];
            if (za != zb) return za > zb;
            return a < b;
        });

        SplitCandidateList listed;
        listed.round = round;
        listed.eta = eta;
        listed.indices = candidates;
        for (long j : candidates) listed.zetas.push_back(zeta[static_cast<std::size_t>(j)]);
        result.candidate_rounds.push_back(std::move(listed));

        result.rounds = round + 1;
        bool removed_any = false;
        CounterRng round_rng = base.split(static_cast<std::uint64_t>(round));
        for (long j : candidates) {
            auto& idx = members[static_cast<std::size_t>(j)];
            if (static_cast<long>(idx.size()) <= 2 * params.n_min) continue;
            auto split = split_nugget(gather(idx), round_rng.split(static_cast<std::uint64_t>(j)));
            if (!split) {
                reverted[static_cast<std::size_t>(j)] = true;
                ++result.splits_reverted;
                continue;
            }
            auto& [la, lb] = *split;
            if (static_cast<long>(la.size()) < params.n_min ||
                static_cast<long>(lb.size()) < params.n_min) {
                reverted[static_cast<std::size_t>(j)] = true;
                ++result.splits_reverted;
                continue;
            }
            // Children inherit the parent slot (the child holding the
            // smallest original row index) and a new slot at the end.
            std::vector<int> child_a, child_b;
            child_a.reserve(la.size());
            child_b.reserve(lb.size());
            for (int local : la) child_a.push_back(idx[static_cast<std::size_t>(local)]);
            for (int local : lb) child_b.push_back(idx[static_cast<std::size_t>(local)]);
            if (child_b.front() < child_a.front()) child_a.swap(child_b);
            members[static_cast<std::size_t>(j)] = std::move(child_a);
            members.push_back(std::move(child_b));
            reverted[static_cast<std::size_t>(j)] = false;
            reverted.push_back(false);
            ++result.splits_committed;
            removed_any = true;
        }
        if (!removed_any) break;
    }

    std::vector<int> assignment(static_cast<std::size_t>(X.rows()), -1);
    for (std::size_t j = 0; j < members.size(); ++j)
        for (int i : members[j]) assignment[static_cast<std::size_t>(i)] = static_cast<int>(j);

    result.set = build_nuggets(X, std::move(assignment), nuggets.params.center_mode, params.seed);
    result.set.params = nuggets.params;
    result.set.stats = nuggets.stats;
    result.reverted = std::move(reverted);
    return result;
}

}  // namespace nugget
