#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nugget/reduce.hpp"
#include "nugget/refine.hpp"
#include "nugget/simgen.hpp"
#include "nugget/wcluster.hpp"
#include "nugget/wstats.hpp"

namespace py = pybind11;
using namespace nugget;

namespace {

DataMatrix to_data_matrix(const Eigen::Ref<const Matrix>& values) {
    DataMatrix X;
    X.values = values;
    return X;
}

CenterMode center_mode_from(const std::string& s) {
    if (s == "mean") return CenterMode::mean;
    if (s == "random") return CenterMode::random;
    throw ValidationError("center must be 'mean' or 'random'");
}

py::dict clustering_to_dict(const Clustering& c) {
    py::dict d;
    d["assignment"] = c.assignment;
    d["centers"] = Eigen::MatrixXd(c.centers);
    d["wwcss"] = c.wwcss;
    d["sweeps"] = c.sweeps;
    d["converged"] = c.converged;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Data nugget reduction and weighted analytics";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    py::class_<NuggetSet>(m, "NuggetSet")
        .def_property_readonly("centers", [](const NuggetSet& s) { return Eigen::MatrixXd(s.centers()); })
        .def_property_readonly("weights", &NuggetSet::weights)
        .def_property_readonly("scales",
                               [](const NuggetSet& s) {
                                   Vector v(s.size());
                                   for (long j = 0; j < s.size(); ++j)
                                       v(j) = s.nuggets[static_cast<std::size_t>(j)].scale;
                                   return v;
                               })
        .def_property_readonly("assignment", [](const NuggetSet& s) { return s.assignment; })
        .def_property_readonly("total_weight", &NuggetSet::total_weight)
        .def_property_readonly("dim", [](const NuggetSet& s) { return s.dim; })
        .def_property_readonly("psi1", [](const NuggetSet& s) { return s.stats.psi1_per_subset; })
        .def_property_readonly("psi2", [](const NuggetSet& s) { return s.stats.psi2; })
        .def_property_readonly("distance_evals", [](const NuggetSet& s) { return s.stats.distance_evals; })
        .def("__len__", &NuggetSet::size)
        .def("__repr__", [](const NuggetSet& s) {
            return "<NuggetSet M=" + std::to_string(s.size()) + " N=" +
                   std::to_string(s.total_weight()) + " P=" + std::to_string(s.dim) + ">";
        });

    m.def(
        "create",
        [](const Eigen::Ref<const Matrix>& X, long R, double C, long m_init, long M,
           const std::string& center, std::uint64_t seed, int threads) {
            ReductionParams p;
            p.R = R;
            p.C = C;
            p.M_init = m_init;
            p.M = M;
            p.center_mode = center_mode_from(center);
            p.seed = seed;
            return create_data_nuggets(to_data_matrix(X), p, threads);
        },
        py::arg("X"), py::arg("R") = 5000, py::arg("C") = 0.05, py::arg("m_init") = 10000,
        py::arg("M") = 0, py::arg("center") = "mean", py::arg("seed") = 0, py::arg("threads") = 0,
        "Reduce an observation matrix to a weighted nugget set.");

    m.def(
        "refine",
        [](const Eigen::Ref<const Matrix>& X, const NuggetSet& set, double nu, long n_min,
           int max_rounds, std::uint64_t seed, int threads) {
            RefineParams p;
            p.nu = nu;
            p.n_min = n_min;
            p.max_rounds = max_rounds;
            p.seed = seed;
            auto result = refine_data_nuggets(to_data_matrix(X), set, p, threads);
            py::dict info;
            info["rounds"] = result.rounds;
            info["splits_committed"] = result.splits_committed;
            info["splits_reverted"] = result.splits_reverted;
            info["final_eta"] = result.final_eta;
            return py::make_tuple(std::move(result.set), info);
        },
        py::arg("X"), py::arg("nuggets"), py::arg("nu") = 0.5, py::arg("n_min") = 2,
        py::arg("max_rounds") = 50, py::arg("seed") = 0, py::arg("threads") = 0,
        "Split high-variance nuggets; returns (refined_set, info).");

    m.def(
        "weighted_kmeans",
        [](const Eigen::Ref<const Matrix>& centers, const Eigen::Ref<const Vector>& weights,
           int K, int starts, int max_sweeps, std::uint64_t seed) {
            WKMeansParams p;
            p.K = K;
            p.starts = starts;
            p.max_sweeps = max_sweeps;
            p.seed = seed;
            return clustering_to_dict(weighted_kmeans(centers, weights, p));
        },
        py::arg("centers"), py::arg("weights"), py::arg("K"), py::arg("starts") = 10,
        py::arg("max_sweeps") = 100, py::arg("seed") = 0,
        "K-means for weighted observations; returns the best clustering over all starts.");

    m.def(
        "choose_k",
        [](const Eigen::Ref<const Matrix>& centers, const Eigen::Ref<const Vector>& weights,
           int k_min, int k_max, int starts, std::uint64_t seed) {
            WKMeansParams p;
            p.starts = starts;
            p.seed = seed;
            auto r = choose_k(centers, weights, k_min, k_max, p);
            py::dict d;
            d["curve"] = r.curve;
            d["selected"] = r.selected;
            d["monotone"] = r.monotone;
            return d;
        },
        py::arg("centers"), py::arg("weights"), py::arg("k_min"), py::arg("k_max"),
        py::arg("starts") = 10, py::arg("seed") = 0,
        "WWCSS curve over K with the second-difference selection.");

    m.def(
        "wwcss",
        [](const Eigen::Ref<const Matrix>& centers, const Eigen::Ref<const Vector>& weights,
           const std::vector<int>& assignment, const Eigen::Ref<const Matrix>& cluster_centers) {
            return wwcss(centers, weights, assignment, Matrix(cluster_centers));
        },
        py::arg("centers"), py::arg("weights"), py::arg("assignment"), py::arg("cluster_centers"),
        "Total weighted within-cluster sum of squares.");

    m.def(
        "best_permutation_accuracy",
        [](const std::vector<int>& predicted, const std::vector<int>& truth,
           const Eigen::Ref<const Vector>& weights) {
            return best_permutation_accuracy(predicted, truth, weights);
        },
        py::arg("predicted"), py::arg("truth"), py::arg("weights"),
        "Best weighted accuracy over cluster relabelings.");

    m.def(
        "per_cluster_accuracy",
        [](const std::vector<int>& predicted, const std::vector<int>& truth,
           const Eigen::Ref<const Vector>& weights) {
            return per_cluster_accuracy(predicted, truth, weights);
        },
        py::arg("predicted"), py::arg("truth"), py::arg("weights"),
        "Per-true-cluster accuracy under the best relabeling.");

    m.def(
        "wpca",
        [](const Eigen::Ref<const Matrix>& centers, const Eigen::Ref<const Vector>& weights,
           long q) {
            auto r = wpca(centers, weights, q);
            py::dict d;
            d["loadings"] = r.loadings;
            d["component_variances"] = r.component_variances;
            d["scores"] = Eigen::MatrixXd(r.scores);
            d["weighted_mean"] = r.weighted_mean;
            return d;
        },
        py::arg("centers"), py::arg("weights"), py::arg("q"),
        "Weighted principal components of nugget centers.");

    m.def(
        "weighted_mean_cov",
        [](const Eigen::Ref<const Matrix>& centers, const Eigen::Ref<const Vector>& weights) {
            auto [mu, S] = weighted_mean_cov(centers, weights);
            return py::make_tuple(mu, S);
        },
        py::arg("centers"), py::arg("weights"),
        "Weighted mean and between-nugget covariance estimate.");

    m.def(
        "decompose_covariance",
        [](const Eigen::Ref<const Matrix>& X, const NuggetSet& set) {
            auto d = decompose_covariance(to_data_matrix(X), set);
            py::dict out;
            out["S"] = d.S;
            out["S_DN"] = d.S_DN;
            out["within"] = d.within;
            out["residual_norm"] = d.residual_norm;
            return out;
        },
        py::arg("X"), py::arg("nuggets"),
        "Exact split of the sample covariance into between- and within-nugget terms.");

    m.def(
        "estimate_quantiles",
        [](const Eigen::Ref<const Vector>& centers, const Eigen::Ref<const Vector>& weights,
           const std::vector<double>& percentiles, double tail_fraction) {
            auto est = estimate_quantiles(centers, weights, percentiles, tail_fraction);
            py::list out;
            for (const auto& e : est) {
                py::dict d;
                d["percentile"] = e.percentile;
                d["estimate"] = e.estimate;
                d["slope"] = e.regression_slope;
                d["intercept"] = e.regression_intercept;
                out.append(std::move(d));
            }
            return out;
        },
        py::arg("centers"), py::arg("weights"), py::arg("percentiles"),
        py::arg("tail_fraction") = 0.0,
        "Tail quantile estimates from sorted 1-D nugget centers.");

    m.def(
        "density_grid",
        [](const Eigen::Ref<const Matrix>& points, const Eigen::Ref<const Vector>& weights,
           int bins, py::object ranges) {
            DensityGrid g;
            if (ranges.is_none()) {
                g = density_grid(points, weights, bins);
            } else {
                auto r = ranges.cast<std::array<double, 4>>();
                g = density_grid(points, weights, bins, r[0], r[1], r[2], r[3]);
            }
            py::dict d;
            d["grid"] = g.grid;
            d["x_range"] = py::make_tuple(g.x_min, g.x_max);
            d["y_range"] = py::make_tuple(g.y_min, g.y_max);
            return d;
        },
        py::arg("points"), py::arg("weights"), py::arg("bins") = 100,
        py::arg("ranges") = py::none(),
        "Weighted 2-D histogram; ranges = (x_min, x_max, y_min, y_max) or None.");

    m.def(
        "gen_smile",
        [](long n_noise, long n_smile, std::uint64_t seed) {
            SmileSpec spec{n_noise, n_smile, seed};
            auto d = gen_smile(spec);
            return py::make_tuple(Eigen::MatrixXd(d.X.values), d.labels);
        },
        py::arg("n_noise") = 15000, py::arg("n_smile") = 601, py::arg("seed") = 0);

    m.def(
        "gen_binary_patients",
        [](double p, long n_per_cluster, std::uint64_t seed) {
            BinarySimSpec spec;
            spec.p = p;
            spec.n_per_cluster = n_per_cluster;
            spec.seed = seed;
            auto d = gen_binary_patients(spec);
            return py::make_tuple(Eigen::MatrixXd(d.X.values), d.labels);
        },
        py::arg("p") = 0.9, py::arg("n_per_cluster") = 100000, py::arg("seed") = 0);

    m.def(
        "gen_gaussian4",
        [](double scale, std::uint64_t seed) {
            Gaussian4Spec spec;
            spec.seed = seed;
            auto d = gen_gaussian4(spec, scale);
            return py::make_tuple(Eigen::MatrixXd(d.X.values), d.labels);
        },
        py::arg("scale") = 1.0, py::arg("seed") = 0);

    m.def(
        "gen_largep",
        [](double scale, int noise_dims, std::uint64_t rotation_seed, std::uint64_t sample_seed) {
            LargePSpec spec;
            spec.noise_dims = noise_dims;
            spec.rotation_seed = rotation_seed;
            spec.sample_seed = sample_seed;
            auto d = gen_largep(spec, scale);
            return py::make_tuple(Eigen::MatrixXd(d.X.values), d.labels);
        },
        py::arg("scale") = 1.0, py::arg("noise_dims") = 197, py::arg("rotation_seed") = 1,
        py::arg("sample_seed") = 0);

    m.def(
        "aggregate_unique_rows",
        [](const Eigen::Ref<const Matrix>& X) { return aggregate_unique_rows(to_data_matrix(X)); },
        py::arg("X"), "One nugget per distinct binary row, weighted by multiplicity.");

    m.attr("__version__") = "0.1.0";
}
