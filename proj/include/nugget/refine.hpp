#pragma once

#include "nugget/core.hpp"

namespace nugget {

struct RefineParams {
    double nu = 0.5;      // percentile for the split threshold, in (0,1)
    long n_min = 2;       // minimum members per child nugget
    int max_rounds = 50;
    std::uint64_t seed = 0;
};

// Largest eigenvalue of the sample covariance of `members` (rows).
// Fewer than 2 rows -> 0. For P = 1 this is the variance, i.e. the scale.
double largest_eigenvalue(const Matrix& members);

// 2-means partition of the member rows (unweighted, Euclidean, seeded
// restarts). Returns local row-index lists for the two children, or nullopt
// when no non-degenerate split exists.
std::optional<std::pair<std::vector<int>, std::vector<int>>> split_nugget(const Matrix& members,
                                                                          CounterRng rng);

// Candidates of one refinement round: indices with zeta above that round's
// threshold, in processing order (descending zeta).
struct SplitCandidateList {
    int round = 0;
    double eta = 0.0;
    std::vector<long> indices;
    std::vector<double> zetas;
};

struct RefineResult {
    NuggetSet set;
    int rounds = 0;
    long splits_committed = 0;
    long splits_reverted = 0;
    double final_eta = 0.0;
    // Per surviving nugget: true when a split was attempted and reverted
    // because a child would have fallen below n_min.
    std::vector<bool> reverted;
    std::vector<SplitCandidateList> candidate_rounds;
};

// Splitting loop: each round recomputes zeta_j (largest member-covariance
// eigenvalue, or scale when P = 1), sets eta to the type-7 nu-quantile of
// the nonzero zetas, and splits candidates with zeta > eta in decreasing
// zeta order, reverting any split that yields a child with fewer than n_min
// members. Stops when no candidates remain, a pass commits nothing, or
// max_rounds is reached. Children are re-centered in the set's center mode.
RefineResult refine_data_nuggets(const DataMatrix& X, const NuggetSet& nuggets,
                                 const RefineParams& params, int threads = 0);

// Type-7 (linear interpolation) sample quantile; values need not be sorted.
double quantile_type7(std::vector<double> values, double p);

}  // namespace nugget
