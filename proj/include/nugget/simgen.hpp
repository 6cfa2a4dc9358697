#pragma once

#include "nugget/core.hpp"

namespace nugget {

struct LabeledData {
    DataMatrix X;
    std::vector<int> labels;  // 0-based cluster labels
};

// Bivariate standard-normal noise hiding a "smile": two small eye circles
// at (+-0.7, 0.6) with radius 0.12 and a mouth arc of radius 1.2 spanning
// 200..340 degrees, all jittered with sigma = 0.03.
// Labels: 0 = noise, 1 = smile.
struct SmileSpec {
    long n_noise = 15000;
    long n_smile = 601;
    std::uint64_t seed = 0;
};
LabeledData gen_smile(const SmileSpec& spec);

// Three 10-variable Bernoulli clusters: cluster 0 has the first five
// variables ~ Bin(1, 1-p) and the last five ~ Bin(1, p), cluster 1 is the
// mirror image, cluster 2 is all ~ Bin(1, p).
struct BinarySimSpec {
    double p = 0.9;
    long n_per_cluster = 100000;
    int n_vars = 10;
    std::uint64_t seed = 0;
};
LabeledData gen_binary_patients(const BinarySimSpec& spec);

// One nugget per distinct binary row (lexicographic order), weight =
// multiplicity, scale = 0.
NuggetSet aggregate_unique_rows(const DataMatrix& X);

// Four spherical Gaussian clusters in 6-D with the fixed center/size table;
// sizes scale by `scale_factor` and round.
struct Gaussian4Spec {
    std::array<long, 4> sizes = {500000, 500000, 50000, 2000};
    double variance = 0.25;
    std::uint64_t seed = 0;
};
LabeledData gen_gaussian4(const Gaussian4Spec& spec, double scale_factor = 1.0);

// Three 3-D Gaussian clusters (covariance diag(4, 2.25, 1)) padded with
// standard-normal noise dimensions and rotated by a seeded random
// orthogonal matrix.
struct LargePSpec {
    long n_per_cluster = 200000;
    int signal_dims = 3;
    int noise_dims = 197;
    std::uint64_t rotation_seed = 1;
    std::uint64_t sample_seed = 0;
};
LabeledData gen_largep(const LargePSpec& spec, double scale_factor = 1.0);

// The orthogonal rotation used by gen_largep (QR of a seeded Gaussian
// matrix with a deterministic sign convention).
Eigen::MatrixXd random_rotation(int dim, std::uint64_t seed);

}  // namespace nugget
