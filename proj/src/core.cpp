#include "nugget/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <thread>

namespace nugget {

double distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                DistanceMetric metric) {
    if (a.size() != b.size())
        throw ValidationError("distance: dimension mismatch (" + std::to_string(a.size()) +
                              " vs " + std::to_string(b.size()) + ")");
    if (!a.allFinite() || !b.allFinite())
        throw ValidationError("distance: non-finite input");
    switch (metric.kind) {
        case DistanceMetric::Kind::euclidean:
            return std::sqrt((a - b).squaredNorm());
    }
    throw ValidationError("distance: unknown metric");
}

ValidationReport validate_matrix(const DataMatrix& X) {
    ValidationReport report;
    const long n = X.rows(), p = X.cols();
    if (n < 1 || p < 1) {
        report.empty = true;
        return report;
    }
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < p; ++j)
            if (!std::isfinite(X.values(i, j))) report.non_finite.push_back({i, j});
    for (long j = 0; j < p; ++j) {
        bool constant = true;
        for (long i = 1; i < n && constant; ++i)
            if (X.values(i, j) != X.values(0, j)) constant = false;
        if (constant) report.constant_columns.push_back(j);
    }
    // duplicate rows: count rows equal to some earlier row
    std::map<std::vector<double>, long> seen;
    std::vector<double> key(static_cast<std::size_t>(p));
    for (long i = 0; i < n; ++i) {
        for (long j = 0; j < p; ++j) key[static_cast<std::size_t>(j)] = X.values(i, j);
        auto [it, inserted] = seen.emplace(key, i);
        if (!inserted) ++report.duplicate_rows;
    }
    return report;
}

void require_valid(const DataMatrix& X, const char* what) {
    if (X.rows() < 1 || X.cols() < 1)
        throw ValidationError(std::string(what) + ": must have at least one row and one column");
    if (!X.values.allFinite())
        throw ValidationError(std::string(what) + ": contains NaN or Inf");
}

void validate_params(const ReductionParams& params, long N, long P) {
    if (N < 1 || P < 1) throw ValidationError("reduction: empty matrix");
    if (params.R < 2) throw ValidationError("reduction: R must be >= 2");
    if (!(params.C > 0.0 && params.C < 1.0))
        throw ValidationError("reduction: C must lie in (0,1)");
    if (params.M_init < 1 || params.M_init > N)
        throw ValidationError("reduction: need 1 <= M_init <= N (M_init=" +
                              std::to_string(params.M_init) + ", N=" + std::to_string(N) + ")");
    const long M = resolve_target_m(params, N, P);
    if (M < 1 || M > params.M_init)
        throw ValidationError("reduction: need 1 <= M <= M_init (M=" + std::to_string(M) +
                              ", M_init=" + std::to_string(params.M_init) + ")");
}

long resolve_target_m(const ReductionParams& params, long N, long P) {
    if (params.M > 0) return params.M;
    long m = std::lround(std::sqrt(static_cast<double>(N) * static_cast<double>(P)));
    m = std::clamp(m, 100L, params.M_init);
    return std::min(m, N);
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("NUGGET_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

std::vector<std::vector<int>> NuggetSet::members() const {
    std::vector<std::vector<int>> out(nuggets.size());
    for (std::size_t j = 0; j < nuggets.size(); ++j)
        out[j].reserve(static_cast<std::size_t>(nuggets[j].weight));
    for (std::size_t i = 0; i < assignment.size(); ++i)
        out[static_cast<std::size_t>(assignment[i])].push_back(static_cast<int>(i));
    return out;
}

namespace detail {

void parallel_for(long n, int threads, const std::function<void(long)>& body) {
    if (n <= 0) return;
    threads = std::max(1, std::min(threads, static_cast<int>(std::min<long>(n, 1024))));
    if (threads <= 1) {
        for (long i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<long> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                long i = next.fetch_add(1);
                if (i >= n) break;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace detail

}  // namespace nugget
