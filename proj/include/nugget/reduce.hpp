#pragma once

#include "nugget/core.hpp"

namespace nugget {

// One considered pair within a deletion round: current row/col indices of
// the surviving submatrix plus the metric distance between them.
struct ConsideredPair {
    int row = 0;
    int col = 0;
    double dist = 0.0;
};

// Per-round record of the deletion loop, for inspection and tests.
struct DeletionRound {
    long subset_id = -1;  // set by the caller; -1 for the second stage
    std::vector<ConsideredPair> pairs_considered;
    std::vector<int> deleted;  // row indices at round start
};

struct ReduceOutcome {
    Matrix rows;               // surviving rows, original relative order
    int rounds = 0;            // deletion-loop iterations
    std::uint64_t distance_evals = 0;
};

// Iterative closest-pair deletion (one stage of the center-selection loop).
//
// Each round finds the floor(C * Ng) closest pairs in (distance, i, j)
// lexicographic order and deletes the larger-index member of each pair,
// skipping a pair when either member is already gone this round. The final
// round is truncated so the result has exactly `target` rows.
ReduceOutcome reduce_submatrix(const Matrix& X_g, long target, double C,
                               DistanceMetric metric = {}, int threads = 1,
                               std::vector<DeletionRound>* trace = nullptr);

struct CenterSelection {
    Matrix centers;  // M x P, rows of X
    ReductionStats stats;
};

// Random G-way split, per-subset reduction to ceil(M_init/G) rows,
// concatenation, then a second-stage reduction to exactly M rows.
CenterSelection select_initial_centers(const DataMatrix& X, const ReductionParams& params,
                                       int threads = 0);

// Nearest-center assignment; ties go to the lowest center index.
std::vector<int> assign_all(const DataMatrix& X, const Matrix& centers,
                            DistanceMetric metric = {}, int threads = 0,
                            std::uint64_t* distance_evals = nullptr);

// Turn an assignment into nuggets: re-center (mean or seeded random member),
// weight = member count, scale = trace(Cov)/P (0 for singletons).
NuggetSet build_nuggets(const DataMatrix& X, std::vector<int> assignment,
                        CenterMode center_mode, std::uint64_t seed);

// The full creation pipeline: select centers, assign, build.
NuggetSet create_data_nuggets(const DataMatrix& X, const ReductionParams& params,
                              int threads = 0);

}  // namespace nugget
