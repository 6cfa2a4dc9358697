#include "nugget/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace nugget {

namespace {

constexpr double kDegree = M_PI / 180.0;

// Rows [r0, r1) get values from streams derived per fixed-size block, so the
// fill is reproducible and safe to parallelize.
void fill_gaussian_rows(Matrix& X, long r0, long r1, const CounterRng& base, int threads) {
    const long kBlock = 2048;
    const long nblocks = (r1 - r0 + kBlock - 1) / kBlock;
    detail::parallel_for(nblocks, threads, [&](long b) {
        CounterRng rng = base.split(static_cast<std::uint64_t>(b));
        const long lo = r0 + b * kBlock, hi = std::min(r1, lo + kBlock);
        for (long i = lo; i < hi; ++i)
            for (long j = 0; j < X.cols(); ++j) X(i, j) = rng.next_gaussian();
    });
}

}  // namespace

LabeledData gen_smile(const SmileSpec& spec) {
    if (spec.n_noise < 0 || spec.n_smile < 0)
        throw ValidationError("gen_smile: counts must be nonnegative");
    if (spec.n_noise + spec.n_smile < 1) throw ValidationError("gen_smile: empty dataset");

    const long N = spec.n_noise + spec.n_smile;
    LabeledData out;
    out.X.values.resize(N, 2);
    out.labels.assign(static_cast<std::size_t>(N), 0);

    CounterRng base = CounterRng(spec.seed).split(0x51E1);
    fill_gaussian_rows(out.X.values, 0, spec.n_noise, base.split(0), 1);

    // Smile geometry: eye circles at (+-0.7, 0.6), radius 0.12; mouth arc of
    // radius 1.2 spanning 200..340 degrees; jitter sigma = 0.03.
    const long n_eye = spec.n_smile / 5;
    const long n_mouth = spec.n_smile - 2 * n_eye;
    CounterRng rng = base.split(1);
    const double jitter = 0.03;
    long r = spec.n_noise;
    for (long e = 0; e < 2; ++e) {
        const double cx = e == 0 ? -0.7 : 0.7;
        for (long i = 0; i < n_eye; ++i, ++r) {
            const double theta = 2.0 * M_PI * rng.next_double();
            out.X.values(r, 0) = cx + 0.12 * std::cos(theta) + jitter * rng.next_gaussian();
            out.X.values(r, 1) = 0.6 + 0.12 * std::sin(theta) + jitter * rng.next_gaussian();
        }
    }
    for (long i = 0; i < n_mouth; ++i, ++r) {
        const double theta = (200.0 + 140.0 * rng.next_double()) * kDegree;
        out.X.values(r, 0) = 1.2 * std::cos(theta) + jitter * rng.next_gaussian();
        out.X.values(r, 1) = 1.2 * std::sin(theta) + jitter * rng.next_gaussian();
    }
    for (long i = spec.n_noise; i < N; ++i) out.labels[static_cast<std::size_t>(i)] = 1;
    return out;
}

LabeledData gen_binary_patients(const BinarySimSpec& spec) {
    if (!(spec.p > 0.5 && spec.p < 1.0))
        throw ValidationError("gen_binary_patients: p must lie in (0.5, 1)");
    if (spec.n_per_cluster < 1)
        throw ValidationError("gen_binary_patients: n_per_cluster must be >= 1");
    if (spec.n_vars < 2 || spec.n_vars % 2 != 0)
        throw ValidationError("gen_binary_patients: n_vars must be even and >= 2");

    const long n = spec.n_per_cluster;
    const int v = spec.n_vars;
    const int half = v / 2;
    LabeledData out;
    out.X.values.resize(3 * n, v);
    out.labels.reserve(static_cast<std::size_t>(3 * n));

    CounterRng base = CounterRng(spec.seed).split(0xB1A2);
    for (int cluster = 0; cluster < 3; ++cluster) {
        CounterRng rng = base.split(static_cast<std::uint64_t>(cluster));
        for (long i = 0; i < n; ++i) {
            const long row = cluster * n + i;
            for (int j = 0; j < v; ++j) {
                double prob = spec.p;  // cluster 2: every variable ~ Bin(1, p)
                if (cluster == 0) prob = j < half ? 1.0 - spec.p : spec.p;
                if (cluster == 1) prob = j < half ? spec.p : 1.0 - spec.p;
                out.X.values(row, j) = rng.next_double() < prob ? 1.0 : 0.0;
            }
            out.labels.push_back(cluster);
        }
    }
    return out;
}

NuggetSet aggregate_unique_rows(const DataMatrix& X) {
    require_valid(X, "aggregate_unique_rows");
    const long N = X.rows(), P = X.cols();
    for (long i = 0; i < N; ++i)
        for (long j = 0; j < P; ++j)
            if (X.values(i, j) != 0.0 && X.values(i, j) != 1.0)
                throw ValidationError("aggregate_unique_rows: entries must be 0 or 1");

    std::map<std::vector<double>, int> index;  // lexicographic unique-row order
    std::vector<double> key(static_cast<std::size_t>(P));
    for (long i = 0; i < N; ++i) {
        for (long j = 0; j < P; ++j) key[static_cast<std::size_t>(j)] = X.values(i, j);
        index.emplace(key, 0);
    }
    int next = 0;
    for (auto& [row, id] : index) id = next++;

    NuggetSet set;
    set.dim = P;
    set.nuggets.resize(index.size());
    set.assignment.resize(static_cast<std::size_t>(N));
    for (auto& [row, id] : index) {
        auto& n = set.nuggets[static_cast<std::size_t>(id)];
        n.center = Eigen::Map<const Vector>(row.data(), P);
        n.weight = 0;
        n.scale = 0.0;
    }
    for (long i = 0; i < N; ++i) {
        for (long j = 0; j < P; ++j) key[static_cast<std::size_t>(j)] = X.values(i, j);
        const int id = index[key];
        set.assignment[static_cast<std::size_t>(i)] = id;
        ++set.nuggets[static_cast<std::size_t>(id)].weight;
    }
    set.params.center_mode = CenterMode::mean;
    return set;
}

LabeledData gen_gaussian4(const Gaussian4Spec& spec, double scale_factor) {
    if (!(scale_factor > 0.0 && scale_factor <= 1.0))
        throw ValidationError("gen_gaussian4: scale_factor must lie in (0,1]");
    static const double kCenters[4][6] = {
        {1, 0, 0, 0, 1, 1}, {0, 1, 0, 1, 1, 0}, {1, 1, 0, 0, 1, 0}, {0, 0, 1, 1, 0, 1}};

    std::array<long, 4> sizes{};
    long N = 0;
    for (int c = 0; c < 4; ++c) {
        sizes[static_cast<std::size_t>(c)] =
            std::lround(static_cast<double>(spec.sizes[static_cast<std::size_t>(c)]) * scale_factor);
        if (sizes[static_cast<std::size_t>(c)] < 1)
            throw ValidationError("gen_gaussian4: scale_factor leaves an empty cluster");
        N += sizes[static_cast<std::size_t>(c)];
    }

    LabeledData out;
    out.X.values.resize(N, 6);
    out.labels.reserve(static_cast<std::size_t>(N));
    const double sd = std::sqrt(spec.variance);
    CounterRng base = CounterRng(spec.seed).split(0x6A04);
    long row = 0;
    for (int c = 0; c < 4; ++c) {
        fill_gaussian_rows(out.X.values, row, row + sizes[static_cast<std::size_t>(c)],
                           base.split(static_cast<std::uint64_t>(c)), resolve_threads(0));
        for (long i = 0; i < sizes[static_cast<std::size_t>(c)]; ++i) {
            for (int j = 0; j < 6; ++j)
                out.X.values(row, j) = kCenters[c][j] + sd * out.X.values(row, j);
            ++row;
            out.labels.push_back(c);
        }
    }
    return out;
}

Eigen::MatrixXd random_rotation(int dim, std::uint64_t seed) {
    if (dim < 1) throw ValidationError("random_rotation: dim must be >= 1");
    CounterRng rng = CounterRng(seed).split(0x0707);
    Eigen::MatrixXd A(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) A(i, j) = rng.next_gaussian();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    Eigen::MatrixXd Q = qr.householderQ();
    const Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < dim; ++j)
        if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
    return Q;
}

LabeledData gen_largep(const LargePSpec& spec, double scale_factor) {
    if (!(scale_factor > 0.0 && scale_factor <= 1.0))
        throw ValidationError("gen_largep: scale_factor must lie in (0,1]");
    if (spec.signal_dims != 3)
        throw ValidationError("gen_largep: the signal structure is three-dimensional");
    if (spec.noise_dims < 0) throw ValidationError("gen_largep: noise_dims must be >= 0");

    const long n = std::lround(static_cast<double>(spec.n_per_cluster) * scale_factor);
    if (n < 1) throw ValidationError("gen_largep: scale_factor leaves an empty cluster");
    const long N = 3 * n;
    const int P = spec.signal_dims + spec.noise_dims;

    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const double inv_sqrt3 = 1.0 / std::sqrt(3.0);
    const double centers[3][3] = {{0, 0, 10},
                                  {0, 6 * inv_sqrt2, 6 * inv_sqrt2},
                                  {10 * inv_sqrt3, 10 * inv_sqrt3, 10 * inv_sqrt3}};
    const double sds[3] = {2.0, 1.5, 1.0};  // covariance diag(4, 2.25, 1)

    LabeledData out;
    out.X.values.resize(N, P);
    out.labels.reserve(static_cast<std::size_t>(N));
    CounterRng base = CounterRng(spec.sample_seed).split(0x1A26);
    fill_gaussian_rows(out.X.values, 0, N, base, resolve_threads(0));
    for (int c = 0; c < 3; ++c) {
        for (long i = 0; i < n; ++i) {
            const long row = c * n + i;
            for (int j = 0; j < 3; ++j)
                out.X.values(row, j) = centers[c][j] + sds[j] * out.X.values(row, j);
            out.labels.push_back(c);
        }
    }

    const Eigen::MatrixXd T = random_rotation(P, spec.rotation_seed);
    out.X.values = out.X.values * T;
    return out;
}

}  // namespace nugget
