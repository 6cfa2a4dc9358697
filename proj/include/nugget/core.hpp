#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nugget/rng.hpp"

namespace nugget {

// Points are rows; row-major storage keeps per-row scans contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Bad inputs or parameters (CLI exit code 2).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Failures arising during computation (CLI exit code 3).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DistanceMetric {
    enum class Kind { euclidean };
    Kind kind = Kind::euclidean;
};

// Dense N x P observation matrix with optional stable row identifiers.
struct DataMatrix {
    Matrix values;
    std::vector<std::string> row_ids;  // empty = implicit 0..N-1

    long rows() const { return values.rows(); }
    long cols() const { return values.cols(); }
};

struct CellRef {
    long row = 0;
    long col = 0;
};

struct ValidationReport {
    std::vector<CellRef> non_finite;   // NaN/Inf locations
    std::vector<long> constant_columns;
    long duplicate_rows = 0;           // rows identical to an earlier row
    bool empty = false;

    bool ok() const { return !empty && non_finite.empty(); }
};

enum class CenterMode { mean, random };

struct ReductionParams {
    long R = 5000;          // subset size; G = ceil(N / R)
    double C = 0.05;        // deletion proportion per round
    long M_init = 10000;    // intermediate center count
    long M = 0;             // final nugget count; 0 = round(sqrt(N*P)) clamped to [100, M_init]
    CenterMode center_mode = CenterMode::mean;
    DistanceMetric metric;
    std::uint64_t seed = 0;
};

struct ReductionStats {
    std::vector<int> psi1_per_subset;  // deletion-loop rounds, one per reduced subset
    int psi2 = 0;                      // rounds of the second-stage reduction
    std::uint64_t distance_evals = 0;  // total metric evaluations (logical count)
    std::uint64_t distance_evals_assign = 0;  // the N*M assignment term
    double wall_time = 0.0;            // seconds
};

// One reduced unit: P-vector center, member count, trace(Cov)/P.
struct DataNugget {
    Vector center;
    long weight = 0;
    double scale = 0.0;
};

// Ordered nugget collection plus the observation -> nugget map that
// produced it.
struct NuggetSet {
    std::vector<DataNugget> nuggets;
    std::vector<int> assignment;  // length N; -1 never appears in a valid set
    ReductionParams params;
    ReductionStats stats;
    long dim = 0;

    long size() const { return static_cast<long>(nuggets.size()); }
    long total_weight() const {
        long s = 0;
        for (const auto& n : nuggets) s += n.weight;
        return s;
    }
    Matrix centers() const {
        Matrix c(size(), dim);
        for (long j = 0; j < size(); ++j) c.row(j) = nuggets[static_cast<std::size_t>(j)].center.transpose();
        return c;
    }
    Vector weights() const {
        Vector w(size());
        for (long j = 0; j < size(); ++j) w(j) = static_cast<double>(nuggets[static_cast<std::size_t>(j)].weight);
        return w;
    }
    // Member row indices per nugget, each list in ascending row order.
    std::vector<std::vector<int>> members() const;
};

// Checked metric evaluation. Throws on dimension mismatch or non-finite input.
double distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                DistanceMetric metric = {});

// Report-only scan: non-finite cells, constant columns, duplicate rows.
ValidationReport validate_matrix(const DataMatrix& X);

// Throws ValidationError unless X is non-empty and all-finite.
void require_valid(const DataMatrix& X, const char* what = "matrix");

// Throws ValidationError unless params are consistent with an N x P matrix.
void validate_params(const ReductionParams& params, long N, long P);

// Resolved M: params.M, or round(sqrt(N*P)) clamped to [100, M_init] (and to N).
long resolve_target_m(const ReductionParams& params, long N, long P);

// Number of worker threads to use: explicit request, NUGGET_THREADS env var,
// or hardware concurrency.
int resolve_threads(int requested = 0);

namespace detail {

// Deterministic parallel map over [0, n): fixed work units, results indexed
// by unit, so output is independent of scheduling.
void parallel_for(long n, int threads, const std::function<void(long)>& body);

inline double squared_distance_rows(const Matrix& X, long i, long j) {
    return (X.row(i) - X.row(j)).squaredNorm();
}

}  // namespace detail

}  // namespace nugget
