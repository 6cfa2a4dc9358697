#include "nugget/reduce.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

namespace nugget {

namespace {

struct PairEntry {
    double d2;
    int i;
    int j;
};

inline bool lex_less(const PairEntry& a, const PairEntry& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
}

// Bounded "k lexicographically smallest pairs" collector.
class TopK {
public:
    explicit TopK(std::size_t k) : k_(k) {}

    void offer(double d2, int i, int j) {
        PairEntry e{d2, i, j};
        if (heap_.size() < k_) {
            heap_.push_back(e);
            std::push_heap(heap_.begin(), heap_.end(), lex_less);
        } else if (lex_less(e, heap_.front())) {
            std::pop_heap(heap_.begin(), heap_.end(), lex_less);
            heap_.back() = e;
            std::push_heap(heap_.begin(), heap_.end(), lex_less);
        }
    }

    // Worst retained entry, used to skip offers cheaply.
    bool full() const { return heap_.size() >= k_; }
    double worst_d2() const { return heap_.front().d2; }

    std::vector<PairEntry>& entries() { return heap_; }

private:
    std::size_t k_;
    std::vector<PairEntry> heap_;  // max-heap by lex order
};

// The k lex-smallest (d^2, i, j) pairs over i < j, exact and independent of
// the thread partitioning. Small P uses a direct scan; larger P computes
// cross-products blockwise so Eigen's GEMM does the heavy lifting.
std::vector<PairEntry> k_smallest_pairs(const Matrix& X, std::size_t k, int threads) {
    const long n = X.rows();
    const long p = X.cols();
    const long kBlock = 256;
    const long nblocks = (n + kBlock - 1) / kBlock;

    std::vector<TopK> local(static_cast<std::size_t>(std::max(1, threads)), TopK(k));
    std::atomic<long> next_block{0};

    auto scan_direct = [&](int tid) {
        TopK& top = local[static_cast<std::size_t>(tid)];
        for (;;) {
            long b = next_block.fetch_add(1);
            if (b >= nblocks) break;
            const long j0 = b * kBlock, j1 = std::min(n, j0 + kBlock);
            for (long j = j0; j < j1; ++j) {
                const double* xj = X.row(j).data();
                for (long i = 0; i < j; ++i) {
                    const double* xi = X.row(i).data();
                    double d2 = 0.0;
                    for (long c = 0; c < p; ++c) {
                        const double diff = xi[c] - xj[c];
                        d2 += diff * diff;
                    }
                    if (!top.full() || d2 <= top.worst_d2())
                        top.offer(d2, static_cast<int>(i), static_cast<int>(j));
                }
            }
        }
    };

    auto scan_gemm = [&](int tid) {
        TopK& top = local[static_cast<std::size_t>(tid)];
        const Vector norms = X.rowwise().squaredNorm();
        Eigen::MatrixXd G;
        for (;;) {
            long b = next_block.fetch_add(1);
            if (b >= nblocks) break;
            const long j0 = b * kBlock, j1 = std::min(n, j0 + kBlock);
            if (j0 == 0 && j1 == 1) continue;  // no i < j pairs
            G.noalias() = X.topRows(j1) * X.middleRows(j0, j1 - j0).transpose();
            for (long j = j0; j < j1; ++j) {
                const double nj = norms(j);
                for (long i = 0; i < j; ++i) {
                    double d2 = norms(i) + nj - 2.0 * G(i, j - j0);
                    if (d2 < 0.0) d2 = 0.0;
                    if (!top.full() || d2 <= top.worst_d2())
                        top.offer(d2, static_cast<int>(i), static_cast<int>(j));
                }
            }
        }
    };

    const bool direct = p <= 8;
    if (threads <= 1) {
        direct ? scan_direct(0) : scan_gemm(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&, t]() { direct ? scan_direct(t) : scan_gemm(t); });
        for (auto& th : pool) th.join();
    }

    std::vector<PairEntry> merged;
    for (auto& topk : local)
        merged.insert(merged.end(), topk.entries().begin(), topk.entries().end());
    std::sort(merged.begin(), merged.end(), lex_less);
    if (merged.size() > k) merged.resize(k);
    return merged;
}

}  // namespace

ReduceOutcome reduce_submatrix(const Matrix& X_g, long target, double C, DistanceMetric metric,
                               int threads, std::vector<DeletionRound>* trace) {
    (void)metric;  // euclidean is the only kind; the tag keeps the call sites explicit
    if (target < 1) throw ValidationError("reduce: target must be >= 1");
    if (target > X_g.rows())
        throw ValidationError("reduce: target exceeds available rows");
    if (!(C > 0.0 && C < 1.0)) throw ValidationError("reduce: C must lie in (0,1)");

    ReduceOutcome out;
    out.rows = X_g;
    while (out.rows.rows() > target) {
        const long n = out.rows.rows();
        const std::size_t k = static_cast<std::size_t>(std::max<long>(1, static_cast<long>(C * static_cast<double>(n))));
        auto pairs = k_smallest_pairs(out.rows, k, threads);
        out.distance_evals += static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n - 1) / 2;
        ++out.rounds;

        std::vector<char> deleted(static_cast<std::size_t>(n), 0);
        const long cap = n - target;
        long ndel = 0;
        DeletionRound round;
        for (const auto& e : pairs) {
            if (trace) round.pairs_considered.push_back({e.i, e.j, std::sqrt(e.d2)});
            if (ndel >= cap) break;
            if (deleted[static_cast<std::size_t>(e.i)] || deleted[static_cast<std::size_t>(e.j)])
                continue;
            deleted[static_cast<std::size_t>(e.j)] = 1;
            ++ndel;
            if (trace) round.deleted.push_back(e.j);
        }
        if (trace) trace->push_back(std::move(round));

        Matrix survivors(n - ndel, out.rows.cols());
        long r = 0;
        for (long i = 0; i < n; ++i)
            if (!deleted[static_cast<std::size_t>(i)]) survivors.row(r++) = out.rows.row(i);
        out.rows.swap(survivors);
    }
    return out;
}

CenterSelection select_initial_centers(const DataMatrix& X, const ReductionParams& params,
                                       int threads) {
    require_valid(X, "select_initial_centers");
    const long N = X.rows(), P = X.cols();
    validate_params(params, N, P);
    const long M = resolve_target_m(params, N, P);
    threads = resolve_threads(threads);

    const long G = (N + params.R - 1) / params.R;
    const long per_subset_target = (params.M_init + G - 1) / G;

    // Balanced random split: the first N % G subsets get one extra row.
    CounterRng rng = CounterRng(params.seed).split(0xA11C);
    std::vector<int> perm(static_cast<std::size_t>(N));
    for (long i = 0; i < N; ++i) perm[static_cast<std::size_t>(i)] = static_cast<int>(i);
    rng.shuffle(perm);

    std::vector<long> offsets(static_cast<std::size_t>(G + 1), 0);
    for (long g = 0; g < G; ++g)
        offsets[static_cast<std::size_t>(g + 1)] =
            offsets[static_cast<std::size_t>(g)] + N / G + (g < N % G ? 1 : 0);

    CenterSelection sel;
    std::vector<Matrix> reduced(static_cast<std::size_t>(G));
    std::vector<int> psi1(static_cast<std::size_t>(G), 0);
    std::vector<char> was_reduced(static_cast<std::size_t>(G), 0);
    std::vector<std::uint64_t> evals(static_cast<std::size_t>(G), 0);

    const int subset_threads = G == 1 ? threads : 1;  // parallelism lives across subsets
    detail::parallel_for(G, threads, [&](long g) {
        const long b = offsets[static_cast<std::size_t>(g)];
        const long e = offsets[static_cast<std::size_t>(g + 1)];
        Matrix sub(e - b, P);
        for (long r = b; r < e; ++r)
            sub.row(r - b) = X.values.row(perm[static_cast<std::size_t>(r)]);
        if (sub.rows() > per_subset_target) {
            auto red = reduce_submatrix(sub, per_subset_target, params.C, params.metric,
                                        subset_threads);
            reduced[static_cast<std::size_t>(g)] = std::move(red.rows);
            psi1[static_cast<std::size_t>(g)] = red.rounds;
            was_reduced[static_cast<std::size_t>(g)] = 1;
            evals[static_cast<std::size_t>(g)] = red.distance_evals;
        } else {
            reduced[static_cast<std::size_t>(g)] = std::move(sub);
        }
    });

    long star_rows = 0;
    for (const auto& m : reduced) star_rows += m.rows();
    Matrix X_star(star_rows, P);
    long at = 0;
    for (const auto& m : reduced) {
        X_star.middleRows(at, m.rows()) = m;
        at += m.rows();
    }
    for (long g = 0; g < G; ++g) {
        if (was_reduced[static_cast<std::size_t>(g)])
            sel.stats.psi1_per_subset.push_back(psi1[static_cast<std::size_t>(g)]);
        sel.stats.distance_evals += evals[static_cast<std::size_t>(g)];
    }

    if (X_star.rows() < M)
        throw ValidationError(
            "select_initial_centers: intermediate set has fewer rows than M; "
            "decrease R or increase M_init");
    if (X_star.rows() > M) {
        auto red = reduce_submatrix(X_star, M, params.C, params.metric, threads);
        sel.centers = std::move(red.rows);
        sel.stats.psi2 = red.rounds;
        sel.stats.distance_evals += red.distance_evals;
    } else {
        sel.centers = std::move(X_star);
    }
    return sel;
}

std::vector<int> assign_all(const DataMatrix& X, const Matrix& centers, DistanceMetric metric,
                            int threads, std::uint64_t* distance_evals) {
    (void)metric;
    require_valid(X, "assign_all");
    if (centers.rows() < 1) throw ValidationError("assign_all: no centers");
    if (centers.cols() != X.cols())
        throw ValidationError("assign_all: center dimension mismatch");
    const long N = X.rows(), M = centers.rows();
    threads = resolve_threads(threads);

    std::vector<int> assignment(static_cast<std::size_t>(N), 0);
    const long kBlock = 1024;
    const long nblocks = (N + kBlock - 1) / kBlock;
    detail::parallel_for(nblocks, threads, [&](long b) {
        const long i0 = b * kBlock, i1 = std::min(N, i0 + kBlock);
        for (long i = i0; i < i1; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int arg = 0;
            for (long j = 0; j < M; ++j) {
                const double d2 = (X.values.row(i) - centers.row(j)).squaredNorm();
                if (d2 < best) {
                    best = d2;
                    arg = static_cast<int>(j);
                }
            }
            assignment[static_cast<std::size_t>(i)] = arg;
        }
    });
    if (distance_evals)
        *distance_evals += static_cast<std::uint64_t>(N) * static_cast<std::uint64_t>(M);
    return assignment;
}

NuggetSet build_nuggets(const DataMatrix& X, std::vector<int> assignment, CenterMode center_mode,
                        std::uint64_t seed) {
    require_valid(X, "build_nuggets");
    const long N = X.rows(), P = X.cols();
    if (static_cast<long>(assignment.size()) != N)
        throw ValidationError("build_nuggets: assignment length mismatch");

    long M = 0;
    for (int a : assignment) {
        if (a < 0) throw ValidationError("build_nuggets: negative nugget index");
        M = std::max(M, static_cast<long>(a) + 1);
    }

    std::vector<long> counts(static_cast<std::size_t>(M), 0);
    for (int a : assignment) ++counts[static_cast<std::size_t>(a)];
    for (long j = 0; j < M; ++j)
        if (counts[static_cast<std::size_t>(j)] == 0)
            throw ValidationError("build_nuggets: nugget " + std::to_string(j) +
                                  " has no assigned observations");

    NuggetSet set;
    set.dim = P;
    set.nuggets.resize(static_cast<std::size_t>(M));

    // Means first; the scale always uses the member mean, whatever the
    // center mode.
    Matrix sums = Matrix::Zero(M, P);
    for (long i = 0; i < N; ++i) sums.row(assignment[static_cast<std::size_t>(i)]) += X.values.row(i);
    Matrix means(M, P);
    for (long j = 0; j < M; ++j)
        means.row(j) = sums.row(j) / static_cast<double>(counts[static_cast<std::size_t>(j)]);

    Vector sq_dev = Vector::Zero(M);
    for (long i = 0; i < N; ++i) {
        const long j = assignment[static_cast<std::size_t>(i)];
        sq_dev(j) += (X.values.row(i) - means.row(j)).squaredNorm();
    }

    CounterRng rng = CounterRng(seed).split(0xCE17);
    std::vector<long> pick(static_cast<std::size_t>(M), -1);
    if (center_mode == CenterMode::random) {
        // pick the r-th member (ascending row order) of each nugget
        std::vector<long> want(static_cast<std::size_t>(M));
        for (long j = 0; j < M; ++j)
            want[static_cast<std::size_t>(j)] = static_cast<long>(
                rng.split(static_cast<std::uint64_t>(j))
                    .uniform_below(static_cast<std::uint64_t>(counts[static_cast<std::size_t>(j)])));
        std::vector<long> seen(static_cast<std::size_t>(M), 0);
        for (long i = 0; i < N; ++i) {
            const long j = assignment[static_cast<std::size_t>(i)];
            if (seen[static_cast<std::size_t>(j)]++ == want[static_cast<std::size_t>(j)])
                pick[static_cast<std::size_t>(j)] = i;
        }
    }

    for (long j = 0; j < M; ++j) {
        auto& n = set.nuggets[static_cast<std::size_t>(j)];
        n.weight = counts[static_cast<std::size_t>(j)];
        if (center_mode == CenterMode::mean) {
            n.center = means.row(j).transpose();
        } else {
            n.center = X.values.row(pick[static_cast<std::size_t>(j)]).transpose();
        }
        n.scale = n.weight > 1
                      ? sq_dev(j) / (static_cast<double>(n.weight - 1) * static_cast<double>(P))
                      : 0.0;
    }
    set.assignment = std::move(assignment);
    return set;
}

NuggetSet create_data_nuggets(const DataMatrix& X, const ReductionParams& params, int threads) {
    const auto t0 = std::chrono::steady_clock::now();
    require_valid(X, "create_data_nuggets");
    validate_params(params, X.rows(), X.cols());
    threads = resolve_threads(threads);

    CenterSelection sel = select_initial_centers(X, params, threads);
    std::vector<int> assignment =
        assign_all(X, sel.centers, params.metric, threads, &sel.stats.distance_evals_assign);
    sel.stats.distance_evals += sel.stats.distance_evals_assign;

    // Duplicate rows in X can leave a center with no observations (ties go
    // to the lowest center index); such centers are dropped so every nugget
    // keeps at least one member.
    const long M = sel.centers.rows();
    std::vector<long> counts(static_cast<std::size_t>(M), 0);
    for (int a : assignment) ++counts[static_cast<std::size_t>(a)];
    std::vector<int> remap(static_cast<std::size_t>(M), -1);
    int kept = 0;
    for (long j = 0; j < M; ++j)
        if (counts[static_cast<std::size_t>(j)] > 0) remap[static_cast<std::size_t>(j)] = kept++;
    if (kept < M)
        for (auto& a : assignment) a = remap[static_cast<std::size_t>(a)];

    NuggetSet set = build_nuggets(X, std::move(assignment), params.center_mode, params.seed);
    set.params = params;
    set.params.M = resolve_target_m(params, X.rows(), X.cols());
    set.stats = sel.stats;
    set.stats.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return set;
}

}  // namespace nugget
