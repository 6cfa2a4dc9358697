#pragma once

#include "nugget/core.hpp"

namespace nugget {

struct Clustering {
    std::vector<int> assignment;  // nugget -> cluster, length M
    Matrix centers;               // K x P
    double wwcss = 0.0;
    int sweeps = 0;
    bool converged = false;
};

struct WKMeansParams {
    int K = 1;
    int starts = 10;
    int max_sweeps = 100;
    std::uint64_t seed = 0;
};

// Total weighted within-cluster sum of squares recomputed from scratch.
// Throws NumericError when a cluster in [0, K) is empty.
double wwcss(const Matrix& centers, const Vector& weights, const std::vector<int>& assignment,
             const Matrix& cluster_centers);
double wwcss(const NuggetSet& nuggets, const std::vector<int>& assignment,
             const Matrix& cluster_centers);

// K-means for weighted observations: seeded initial centers drawn from the
// nugget centers, nearest-center assignment, weighted-mean updates, then
// single-move improvement sweeps. Best of `starts` runs by WWCSS.
Clustering weighted_kmeans(const Matrix& centers, const Vector& weights,
                           const WKMeansParams& params);
Clustering weighted_kmeans(const NuggetSet& nuggets, const WKMeansParams& params);

// Maximum weighted fraction of correctly labeled observations over
// cluster-label relabelings: exhaustive permutation search for K <= 12,
// optimal bipartite matching above that (identical result where both apply).
double best_permutation_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth,
                                 const Vector& weights);

// Per-true-cluster accuracies under the total-accuracy-maximizing relabeling.
std::vector<double> per_cluster_accuracy(const std::vector<int>& predicted,
                                         const std::vector<int>& truth, const Vector& weights);

struct ChooseKResult {
    int k_min = 0;
    std::vector<double> curve;     // WWCSS for each K in [k_min, k_max]
    std::vector<Clustering> runs;  // matching clusterings
    int selected = 0;
    bool monotone = true;          // false flags optimization noise in the curve
};

// Index into [k_min, k_max] maximizing the second difference
// curve(K-1) - 2*curve(K) + curve(K+1) over interior K; ties -> smallest K.
int select_k_second_difference(const std::vector<double>& curve, int k_min);

ChooseKResult choose_k(const Matrix& centers, const Vector& weights, int k_min, int k_max,
                       const WKMeansParams& params);
ChooseKResult choose_k(const NuggetSet& nuggets, int k_min, int k_max,
                       const WKMeansParams& params);

}  // namespace nugget
