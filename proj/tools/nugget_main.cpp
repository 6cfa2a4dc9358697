// nugget - reduce large datasets into weighted data nuggets and run
// weighted analytics on the reduced set.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "nugget/csv.hpp"
#include "nugget/reduce.hpp"
#include "nugget/refine.hpp"
#include "nugget/simgen.hpp"
#include "nugget/wcluster.hpp"
#include "nugget/wstats.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace nugget;

namespace {

constexpr const char* kVersion = "0.1.0";

int run_cli(const std::vector<std::string>& args, int depth);

double wall_seconds(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- manifests

json stats_to_json(const ReductionStats& s) {
    return json{{"psi1_per_subset", s.psi1_per_subset},
                {"psi2", s.psi2},
                {"distance_evals", s.distance_evals},
                {"distance_evals_assign", s.distance_evals_assign},
                {"wall_time", s.wall_time}};
}

struct ManifestWriter {
    json doc;
    std::string path;

    ManifestWriter(const std::string& command, const std::vector<std::string>& argv) {
        doc["tool"] = "nugget";
        doc["version"] = kVersion;
        doc["format"] = 1;
        doc["command"] = command;
        doc["argv"] = argv;
        doc["inputs"] = json::object();
        doc["outputs"] = json::object();
        doc["params"] = json::object();
    }

    void write() const {
        if (path.empty()) return;
        std::ofstream out(path);
        if (!out) throw ValidationError("cannot open for writing: " + path);
        out << doc.dump(2) << "\n";
    }
};

std::string default_manifest_path(const std::string& primary_output) {
    return primary_output + ".manifest.json";
}

// ------------------------------------------------------------ small helpers

Matrix standardize_columns(const Matrix& X) {
    Matrix out = X;
    for (long j = 0; j < X.cols(); ++j) {
        const double mean = X.col(j).mean();
        double var = 0.0;
        for (long i = 0; i < X.rows(); ++i) {
            const double d = X(i, j) - mean;
            var += d * d;
        }
        var /= std::max<long>(1, X.rows() - 1);
        const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
        for (long i = 0; i < X.rows(); ++i) out(i, j) = (X(i, j) - mean) / sd;
    }
    return out;
}

CenterMode parse_center_mode(const std::string& s) {
    if (s == "mean") return CenterMode::mean;
    if (s == "random") return CenterMode::random;
    throw ValidationError("center mode must be 'mean' or 'random', got '" + s + "'");
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    if (out.empty()) throw ValidationError("empty list: '" + s + "'");
    return out;
}

std::vector<long> parse_long_list(const std::string& s) {
    std::vector<long> out;
    for (double v : parse_double_list(s)) out.push_back(static_cast<long>(v));
    return out;
}

// ------------------------------------------------------------- subcommands

struct CreateOpts {
    std::string input, output, assignment_out, manifest;
    ReductionParams params;
    long M = 0;
    std::string center = "mean";
    int threads = 0;
    bool standardize = false;
};

void cmd_create(const CreateOpts& o, const std::vector<std::string>& argv) {
    ManifestWriter manifest("create", argv);
    auto t0 = std::chrono::steady_clock::now();

    DataMatrix X = read_matrix_csv(o.input);
    if (o.standardize) X.values = standardize_columns(X.values);

    ReductionParams params = o.params;
    params.M = o.M;
    params.center_mode = parse_center_mode(o.center);
    NuggetSet set = create_data_nuggets(X, params, o.threads);

    write_nuggets_csv(o.output, set);
    if (!o.assignment_out.empty()) write_assignment_csv(o.assignment_out, set.assignment);

    manifest.path = o.manifest.empty() ? default_manifest_path(o.output) : o.manifest;
    manifest.doc["inputs"]["input"] = o.input;
    manifest.doc["outputs"]["nuggets"] = o.output;
    if (!o.assignment_out.empty()) manifest.doc["outputs"]["assignment"] = o.assignment_out;
    manifest.doc["params"] = {{"R", params.R},         {"C", params.C},
                              {"M_init", params.M_init}, {"M", set.params.M},
                              {"center", o.center},    {"standardize", o.standardize},
                              {"seed", params.seed},   {"threads", o.threads}};
    manifest.doc["stats"] = stats_to_json(set.stats);
    manifest.doc["stats"]["wall_time"] = wall_seconds(t0);
    manifest.write();

    std::cout << "created " << set.size() << " nuggets from " << X.rows() << " rows (psi2="
              << set.stats.psi2 << ", " << format_double(set.stats.wall_time) << "s)\n";
}

struct RefineOpts {
    std::string input, nuggets, assignment, output, assignment_out, manifest;
    std::string center = "mean";
    RefineParams params;
    int threads = 0;
};

void cmd_refine(const RefineOpts& o, const std::vector<std::string>& argv) {
    ManifestWriter manifest("refine", argv);
    auto t0 = std::chrono::steady_clock::now();

    DataMatrix X = read_matrix_csv(o.input);
    NuggetSet set = read_nuggets_csv(o.nuggets);
    set.assignment = read_assignment_csv(o.assignment);
    set.params.center_mode = parse_center_mode(o.center);
    if (static_cast<long>(set.assignment.size()) != X.rows())
        throw ValidationError("assignment length does not match the data matrix");

    RefineResult result = refine_data_nuggets(X, set, o.params, o.threads);
    write_nuggets_csv(o.output, result.set);
    if (!o.assignment_out.empty())
        write_assignment_csv(o.assignment_out, result.set.assignment);

    manifest.path = o.manifest.empty() ? default_manifest_path(o.output) : o.manifest;
    manifest.doc["inputs"] = {{"input", o.input}, {"nuggets", o.nuggets},
                              {"assignment", o.assignment}};
    manifest.doc["outputs"]["nuggets"] = o.output;
    if (!o.assignment_out.empty()) manifest.doc["outputs"]["assignment"] = o.assignment_out;
    manifest.doc["params"] = {{"nu", o.params.nu},
                              {"n_min", o.params.n_min},
                              {"max_rounds", o.params.max_rounds},
                              {"center", o.center},
                              {"seed", o.params.seed},
                              {"threads", o.threads}};
    manifest.doc["stats"] = {{"rounds", result.rounds},
                             {"splits_committed", result.splits_committed},
                             {"splits_reverted", result.splits_reverted},
                             {"final_eta", result.final_eta},
                             {"wall_time", wall_seconds(t0)}};
    manifest.write();

    std::cout << "refined " << set.size() << " -> " << result.set.size() << " nuggets ("
              << result.rounds << " rounds, " << result.splits_committed << " splits)\n";
}

struct ClusterOpts {
    std::string nuggets, output, summary, manifest;
    WKMeansParams params;
    int threads = 0;
};

void cmd_cluster(const ClusterOpts& o, const std::vector<std::string>& argv) {
    ManifestWriter manifest("cluster", argv);
    auto t0 = std::chrono::steady_clock::now();

    NuggetSet set = read_nuggets_csv(o.nuggets);
    Clustering c = weighted_kmeans(set, o.params);

    {
        std::ofstream out(o.output);
        if (!out) throw ValidationError("cannot open for writing: " + o.output);
        out << "nugget_id,cluster_id\n";
        for (std::size_t j = 0; j < c.assignment.size(); ++j)
            out << j << "," << c.assignment[j] << "\n";
    }

    std::vector<double> per_cluster_weight(static_cast<std::size_t>(o.params.K), 0.0);
    for (long j = 0; j < set.size(); ++j)
        per_cluster_weight[static_cast<std::size_t>(c.assignment[static_cast<std::size_t>(j)])] +=
            static_cast<double>(set.nuggets[static_cast<std::size_t>(j)].weight);
    json summary = {{"K", o.params.K},
                    {"wwcss", c.wwcss},
                    {"sweeps", c.sweeps},
                    {"converged", c.converged},
                    {"per_cluster_weight", per_cluster_weight}};
    const std::string summary_path = o.summary.empty() ? o.output + ".summary.json" : o.summary;
    {
        std::ofstream out(summary_path);
        if (!out) throw ValidationError("cannot open for writing: " + summary_path);
        out << summary.dump(2) << "\n";
    }

    manifest.path = o.manifest.empty() ? default_manifest_path(o.output) : o.manifest;
    manifest.doc["inputs"]["nuggets"] = o.nuggets;
    manifest.doc["outputs"] = {{"clusters", o.output}, {"summary", summary_path}};
    manifest.doc["params"] = {{"K", o.params.K},
                              {"starts", o.params.starts},
                              {"max_sweeps", o.params.max_sweeps},
                              {"seed", o.params.seed}};
    manifest.doc["stats"] = {{"wwcss", c.wwcss},
                             {"sweeps", c.sweeps},
                             {"converged", c.converged},
                             {"wall_time", wall_seconds(t0)}};
    manifest.write();

    std::cout << "clustered " << set.size() << " nuggets into " << o.params.K
              << " clusters (wwcss=" << format_double(c.wwcss) << ")\n";
}

struct ChooseKOpts {
    std::string nuggets, output, manifest;
    int k_min = 2, k_max = 10;
    WKMeansParams params;
};

void cmd_choose_k(const ChooseKOpts& o, const std::vector<std::string>& argv) {
    ManifestWriter manifest("choose-k", argv);
    auto t0 = std::chrono::steady_clock::now();

    NuggetSet set = read_nuggets_csv(o.nuggets);
    ChooseKResult r = choose_k(set, o.k_min, o.k_max, o.params);

    {
        std::ofstream out(o.output);
        if (!out) throw ValidationError("cannot open for writing: " + o.output);
        out << "K,wwcss\n";
        for (std::size_t i = 0; i < r.curve.size(); ++i)
            out << (o.k_min + static_cast<int>(i)) << "," << format_double(r.curve[i]) << "\n";
    }

    manifest.path = o.manifest.empty() ? default_manifest_path(o.output) : o.manifest;
    manifest.doc["inputs"]["nuggets"] = o.nuggets;
    manifest.doc["outputs"]["curve"] = o.output;
    manifest.doc["params"] = {{"k_min", o.k_min},
                              {"k_max", o.k_max},
                              {"starts", o.params.starts},
                              {"seed", o.params.seed}};
    manifest.doc["stats"] = {{"selected_K", r.selected},
                             {"monotone", r.monotone},
                             {"wall_time", wall_seconds(t0)}};
    manifest.write();

    std::cout << "selected K=" << r.selected << (r.monotone ? "" : " (non-monotone curve)")
              << "\n";
}

struct PcaOpts {
    std::string nuggets, output, loadings, manifest;
    long q = 3;
};

void cmd_pca(const PcaOpts& o, const std::vector<std::string>& argv) {
    ManifestWriter manifest("pca", argv);
    auto t0 = std::chrono::steady_clock::now();

    NuggetSet set = read_nuggets_csv(o.nuggets);
    WPCAResult r = wpca(set, o.q);

    std::vector<std::string> header;
    for (long c = 0; c < o.q; ++c) header.push_back("pc_" + std::to_string(c + 1));
    write_matrix_csv(o.output, r.scores, header);
    if (!o.loadings.empty()) write_matrix_csv(o.loadings, Matrix(r.loadings), header);

    std::vector<double> variances(r.component_variances.data(),
                                  r.component_variances.data() + o.q);
    manifest.path = o.manifest.empty() ? default_manifest_path(o.output) : o.manifest;
    manifest.doc["inputs"]["nuggets"] = o.nuggets;
    manifest.doc["outputs"]["scores"] = o.output;
    if (!o.loadings.empty()) manifest.doc["outputs"]["loadings"] = o.loadings;
    manifest.doc["params"] = {{"q", o.q}};
    manifest.doc["stats"] = {{"component_variances", variances}, {"wall_time", wall_seconds(t0)}};
    manifest.write();

    std::cout << "wpca q=" << o.q << " variances:";
    for (double v : variances) std::cout << " " << format_double(v);
    std::cout << "\n";
}

struct QuantilesOpts {
    std::string nuggets, output, manifest;
    std::string percentiles = "0.95,0.96,0.97,0.98,0.99";
    double tail_fraction = 0.0;
};

void cmd_quantiles(const QuantilesOpts& o, const std::vector<std::string>& argv) {
    ManifestWriter manifest("quantiles", argv);
    auto t0 = std::chrono::steady_clock::now();

    NuggetSet set = read_nuggets_csv(o.nuggets);
    auto est = estimate_quantiles(set, parse_double_list(o.percentiles), o.tail_fraction);

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!o.output.empty()) {
        file.open(o.output);
        if (!file) throw ValidationError("cannot open for writing: " + o.output);
        out = &file;
    }
    *out << "percentile,estimate,slope,intercept\n";
    for (const auto& e : est)
        *out << format_double(e.percentile) << "," << format_double(e.estimate) << ","
             << format_double(e.regression_slope) << ","
             << format_double(e.regression_intercept) << "\n";

    if (!o.output.empty()) {
        manifest.path = o.manifest.empty() ? default_manifest_path(o.output) : o.manifest;
        manifest.doc["inputs"]["nuggets"] = o.nuggets;
        manifest.doc["outputs"]["quantiles"] = o.output;
        manifest.doc["params"] = {{"percentiles", o.percentiles},
                                  {"tail_fraction", o.tail_fraction}};
        manifest.doc["stats"] = {{"wall_time", wall_seconds(t0)}};
        manifest.write();
    }
}

struct DensityOpts {
    std::string input, weights, output, manifest;
    int bins = 100;
    double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
    bool has_range = false;
};

void cmd_density(const DensityOpts& o, const std::vector<std::string>& argv) {
    ManifestWriter manifest("density", argv);
    auto t0 = std::chrono::steady_clock::now();

    DataMatrix pts = read_matrix_csv(o.input);
    Vector w = Vector::Ones(pts.rows());
    if (!o.weights.empty()) {
        DataMatrix wm = read_matrix_csv(o.weights);
        if (wm.cols() != 1 || wm.rows() != pts.rows())
            throw ValidationError("weights file must hold one value per point");
        w = wm.values.col(0);
    }
    DensityGrid g = o.has_range
                        ? density_grid(pts.values, w, o.bins, o.x_min, o.x_max, o.y_min, o.y_max)
                        : density_grid(pts.values, w, o.bins);
    write_matrix_csv(o.output, Matrix(g.grid));

    manifest.path = o.manifest.empty() ? default_manifest_path(o.output) : o.manifest;
    manifest.doc["inputs"]["input"] = o.input;
    if (!o.weights.empty()) manifest.doc["inputs"]["weights"] = o.weights;
    manifest.doc["outputs"]["grid"] = o.output;
    manifest.doc["params"] = {{"bins", o.bins}};
    manifest.doc["stats"] = {{"x_range", {g.x_min, g.x_max}},
                             {"y_range", {g.y_min, g.y_max}},
                             {"mass", g.grid.sum()},
                             {"wall_time", wall_seconds(t0)}};
    manifest.write();

    std::cout << "grid " << o.bins << "x" << o.bins << " mass=" << format_double(g.grid.sum())
              << "\n";
}

struct DecomposeOpts {
    std::string input, nuggets, assignment, output, matrices_prefix, manifest;
    std::string center = "mean";
};

void cmd_decompose(const DecomposeOpts& o, const std::vector<std::string>& argv) {
    ManifestWriter manifest("decompose", argv);
    auto t0 = std::chrono::steady_clock::now();

    DataMatrix X = read_matrix_csv(o.input);
    NuggetSet set = read_nuggets_csv(o.nuggets);
    set.assignment = read_assignment_csv(o.assignment);
    set.params.center_mode = parse_center_mode(o.center);

    CovarianceDecomposition d = decompose_covariance(X, set);
    json result = {{"residual_norm", d.residual_norm},
                   {"S_fro", d.S.norm()},
                   {"S_DN_fro", d.S_DN.norm()},
                   {"within_fro", d.within.norm()},
                   {"identity_ok", d.residual_norm <= 1e-10 * d.S.norm()}};
    {
        std::ofstream out(o.output);
        if (!out) throw ValidationError("cannot open for writing: " + o.output);
        out << result.dump(2) << "\n";
    }
    if (!o.matrices_prefix.empty()) {
        write_matrix_csv(o.matrices_prefix + "S.csv", Matrix(d.S));
        write_matrix_csv(o.matrices_prefix + "S_DN.csv", Matrix(d.S_DN));
        write_matrix_csv(o.matrices_prefix + "within.csv", Matrix(d.within));
    }

    manifest.path = o.manifest.empty() ? default_manifest_path(o.output) : o.manifest;
    manifest.doc["inputs"] = {{"input", o.input}, {"nuggets", o.nuggets},
                              {"assignment", o.assignment}};
    manifest.doc["outputs"]["decomposition"] = o.output;
    manifest.doc["stats"] = result;
    manifest.doc["stats"]["wall_time"] = wall_seconds(t0);
    manifest.write();

    std::cout << "residual_norm=" << format_double(d.residual_norm) << " ("
              << format_double(d.S.norm()) << " |S|)\n";
}

struct SimulateOpts {
    std::string which, output, labels, manifest;
    double scale = 1.0;
    std::uint64_t seed = 0;
    double p = 0.9;
    long n_noise = 15000, n_smile = 601, n_per_cluster = 0;
    int noise_dims = 197;
    std::uint64_t rotation_seed = 1;
};

void cmd_simulate(const SimulateOpts& o, const std::vector<std::string>& argv) {
    ManifestWriter manifest("simulate", argv);
    auto t0 = std::chrono::steady_clock::now();

    LabeledData data;
    if (o.which == "smile") {
        SmileSpec spec;
        spec.n_noise = o.n_noise;
        spec.n_smile = o.n_smile;
        spec.seed = o.seed;
        data = gen_smile(spec);
    } else if (o.which == "binary") {
        BinarySimSpec spec;
        spec.p = o.p;
        spec.n_per_cluster = o.n_per_cluster > 0 ? o.n_per_cluster : 100000;
        spec.seed = o.seed;
        data = gen_binary_patients(spec);
    } else if (o.which == "gaussian4") {
        Gaussian4Spec spec;
        spec.seed = o.seed;
        data = gen_gaussian4(spec, o.scale);
    } else if (o.which == "largep") {
        LargePSpec spec;
        if (o.n_per_cluster > 0) spec.n_per_cluster = o.n_per_cluster;
        spec.noise_dims = o.noise_dims;
        spec.rotation_seed = o.rotation_seed;
        spec.sample_seed = o.seed;
        data = gen_largep(spec, o.scale);
    } else {
        throw ValidationError("unknown simulation '" + o.which +
                              "' (smile|binary|gaussian4|largep)");
    }

    write_matrix_csv(o.output, data.X.values);
    if (!o.labels.empty()) write_labels_csv(o.labels, data.labels, "label");

    manifest.path = o.manifest.empty() ? default_manifest_path(o.output) : o.manifest;
    manifest.doc["outputs"]["data"] = o.output;
    if (!o.labels.empty()) manifest.doc["outputs"]["labels"] = o.labels;
    manifest.doc["params"] = {{"which", o.which}, {"scale", o.scale}, {"seed", o.seed}};
    manifest.doc["stats"] = {{"rows", data.X.rows()},
                             {"cols", data.X.cols()},
                             {"wall_time", wall_seconds(t0)}};
    manifest.write();

    std::cout << "simulated " << data.X.rows() << "x" << data.X.cols() << " (" << o.which
              << ")\n";
}

struct BenchOpts {
    std::string n_list = "10000,20000";
    long m = 200, p = 4;
    int reps = 3;
    std::uint64_t seed = 0;
    std::string output, manifest;
    int threads = 0;
};

void cmd_bench(const BenchOpts& o, const std::vector<std::string>& argv) {
    ManifestWriter manifest("bench", argv);
    std::vector<long> ns = parse_long_list(o.n_list);
    for (std::size_t i = 1; i < ns.size(); ++i)
        if (ns[i] <= ns[i - 1]) throw ValidationError("bench: N values must be ascending");

    std::ostringstream table;
    table << "N,rep,wall_time,distance_evals,distance_evals_assign\n";
    for (long N : ns) {
        for (int rep = 0; rep < o.reps; ++rep) {
            CounterRng rng = CounterRng(o.seed).split(static_cast<std::uint64_t>(N)).split(
                static_cast<std::uint64_t>(rep));
            Matrix X(N, o.p);
            for (long i = 0; i < N; ++i)
                for (long j = 0; j < o.p; ++j) X(i, j) = rng.next_gaussian();
            DataMatrix D;
            D.values = std::move(X);
            ReductionParams params;
            params.R = 5000;
            params.C = 0.05;
            params.M_init = std::min<long>(10000, N);
            params.M = std::min<long>(o.m, params.M_init);
            params.seed = o.seed;
            auto set = create_data_nuggets(D, params, o.threads);
            table << N << "," << rep << "," << format_double(set.stats.wall_time) << ","
                  << set.stats.distance_evals << "," << set.stats.distance_evals_assign << "\n";
        }
    }
    std::cout << table.str();
    if (!o.output.empty()) {
        std::ofstream out(o.output);
        if (!out) throw ValidationError("cannot open for writing: " + o.output);
        out << table.str();
        manifest.path = o.manifest.empty() ? default_manifest_path(o.output) : o.manifest;
        manifest.doc["outputs"]["table"] = o.output;
        manifest.doc["params"] = {{"n", o.n_list}, {"m", o.m}, {"p", o.p}, {"reps", o.reps},
                                  {"seed", o.seed}};
        manifest.write();
    }
}

// --------------------------------------------------------------- pipeline

std::map<std::string, std::string> parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!key.empty()) kv[key] = value;
    }
    return kv;
}

struct PipelineOpts {
    std::string config, manifest;
    int threads = 0;
};

void cmd_pipeline(const PipelineOpts& o, const std::vector<std::string>& argv) {
    auto cfg = parse_config(o.config);
    auto get = [&](const std::string& key, const std::string& fallback) {
        auto it = cfg.find(key);
        return it == cfg.end() ? fallback : it->second;
    };
    auto require = [&](const std::string& key) {
        auto it = cfg.find(key);
        if (it == cfg.end()) throw ValidationError("config: missing required key '" + key + "'");
        return it->second;
    };

    const fs::path out_dir = require("output_dir");
    fs::create_directories(out_dir);
    const std::uint64_t seed = std::stoull(get("seed", "0"));
    const int threads = o.threads > 0 ? o.threads : std::stoi(get("threads", "0"));
    std::vector<std::string> stages;
    {
        std::stringstream ss(require("stages"));
        std::string stage;
        while (std::getline(ss, stage, ',')) stages.push_back(stage);
    }

    ManifestWriter manifest("pipeline", argv);
    manifest.path = o.manifest.empty() ? (out_dir / "manifest.json").string() : o.manifest;
    manifest.doc["inputs"]["config"] = o.config;
    {
        std::ifstream raw(o.config);
        std::stringstream buffer;
        buffer << raw.rdbuf();
        manifest.doc["params"]["config_text"] = buffer.str();
    }
    json stage_log = json::array();

    // Stage failure removes files created by that stage before rethrowing.
    std::vector<std::string> stage_files;
    auto out_file = [&](const std::string& name) {
        std::string p = (out_dir / name).string();
        stage_files.push_back(p);
        return p;
    };

    std::string data_path = get("input", "");
    std::optional<DataMatrix> X;
    std::optional<NuggetSet> current;  // most recent nugget set (with assignment)
    std::string current_nuggets_path;

    auto load_data = [&](const char* stage) {
        if (X) return;
        if (data_path.empty())
            throw ValidationError(std::string("pipeline stage '") + stage +
                                  "': no input data (set 'input' or run a simulate stage)");
        X = read_matrix_csv(data_path);
    };

    for (const std::string& stage : stages) {
        auto t0 = std::chrono::steady_clock::now();
        stage_files.clear();
        try {
            if (stage == "simulate") {
                SimulateOpts s;
                s.which = require("simulate.which");
                s.scale = std::stod(get("simulate.scale", "1.0"));
                s.seed = seed;
                s.p = std::stod(get("simulate.p", "0.9"));
                s.n_noise = std::stol(get("simulate.n_noise", "15000"));
                s.n_smile = std::stol(get("simulate.n_smile", "601"));
                s.n_per_cluster = std::stol(get("simulate.n_per_cluster", "0"));
                s.noise_dims = std::stoi(get("simulate.noise_dims", "197"));
                s.output = out_file("data.csv");
                s.labels = out_file("labels.csv");
                s.manifest = out_file("data.csv.manifest.json");
                cmd_simulate(s, {"simulate"});
                data_path = s.output;
                X.reset();
            } else if (stage == "create") {
                load_data("create");
                ReductionParams params;
                params.R = std::stol(get("create.R", "5000"));
                params.C = std::stod(get("create.C", "0.05"));
                params.M_init = std::stol(get("create.m_init", "10000"));
                params.M = std::stol(get("create.M", "0"));
                params.center_mode = parse_center_mode(get("create.center", "mean"));
                params.seed = seed;
                if (get("create.standardize", "false") == "true")
                    X->values = standardize_columns(X->values);
                current = create_data_nuggets(*X, params, threads);
                current_nuggets_path = out_file("nuggets.csv");
                write_nuggets_csv(current_nuggets_path, *current);
                write_assignment_csv(out_file("assign.csv"), current->assignment);
            } else if (stage == "refine") {
                load_data("refine");
                if (!current)
                    throw ValidationError("pipeline stage 'refine': no nugget set; run create first");
                RefineParams params;
                params.nu = std::stod(get("refine.nu", "0.5"));
                params.n_min = std::stol(get("refine.n_min", "2"));
                params.max_rounds = std::stoi(get("refine.max_rounds", "50"));
                params.seed = seed;
                auto result = refine_data_nuggets(*X, *current, params, threads);
                current = std::move(result.set);
                current_nuggets_path = out_file("refined.csv");
                write_nuggets_csv(current_nuggets_path, *current);
                write_assignment_csv(out_file("refined_assign.csv"), current->assignment);
            } else if (stage == "cluster") {
                if (!current)
                    throw ValidationError("pipeline stage 'cluster': no nugget set; run create first");
                WKMeansParams params;
                params.K = std::stoi(require("cluster.K"));
                params.starts = std::stoi(get("cluster.starts", "10"));
                params.seed = seed;
                Clustering c = weighted_kmeans(*current, params);
                const std::string path = out_file("clusters.csv");
                std::ofstream out(path);
                out << "nugget_id,cluster_id\n";
                for (std::size_t j = 0; j < c.assignment.size(); ++j)
                    out << j << "," << c.assignment[j] << "\n";
                std::ofstream s(out_file("cluster_summary.json"));
                s << json{{"K", params.K}, {"wwcss", c.wwcss}, {"sweeps", c.sweeps},
                          {"converged", c.converged}}
                         .dump(2)
                  << "\n";
            } else if (stage == "pca") {
                if (!current)
                    throw ValidationError("pipeline stage 'pca': no nugget set; run create first");
                const long q = std::stol(get("pca.q", "3"));
                WPCAResult r = wpca(*current, q);
                std::vector<std::string> header;
                for (long c = 0; c < q; ++c) header.push_back("pc_" + std::to_string(c + 1));
                write_matrix_csv(out_file("scores.csv"), r.scores, header);
                write_matrix_csv(out_file("loadings.csv"), Matrix(r.loadings), header);
            } else if (stage == "quantiles") {
                if (!current)
                    throw ValidationError(
                        "pipeline stage 'quantiles': no nugget set; run create first");
                auto est = estimate_quantiles(
                    *current, parse_double_list(get("quantiles.percentiles",
                                                    "0.95,0.96,0.97,0.98,0.99")));
                std::ofstream out(out_file("quantiles.csv"));
                out << "percentile,estimate,slope,intercept\n";
                for (const auto& e : est)
                    out << format_double(e.percentile) << "," << format_double(e.estimate) << ","
                        << format_double(e.regression_slope) << ","
                        << format_double(e.regression_intercept) << "\n";
            } else if (stage == "density") {
                load_data("density");
                if (!current)
                    throw ValidationError(
                        "pipeline stage 'density': no nugget set; run create first");
                const int bins = std::stoi(get("density.bins", "100"));
                auto full_box = density_grid(X->values, Vector::Ones(X->rows()), bins);
                auto g = density_grid(current->centers(), current->weights(), bins,
                                      full_box.x_min, full_box.x_max, full_box.y_min,
                                      full_box.y_max);
                write_matrix_csv(out_file("grid.csv"), Matrix(g.grid));
            } else {
                throw ValidationError("pipeline: unknown stage '" + stage + "'");
            }
        } catch (...) {
            for (const auto& f : stage_files) {
                std::error_code ec;
                fs::remove(f, ec);
            }
            std::cerr << "pipeline stage '" << stage << "' failed\n";
            throw;
        }
        stage_log.push_back({{"stage", stage},
                             {"outputs", stage_files},
                             {"wall_time", wall_seconds(t0)}});
    }

    manifest.doc["stats"]["stages"] = stage_log;
    manifest.write();
    std::cout << "pipeline complete: " << stages.size() << " stages -> " << out_dir.string()
              << "\n";
}

void cmd_rerun(const std::string& manifest_path, int depth) {
    std::ifstream in(manifest_path);
    if (!in) throw ValidationError("cannot open manifest: " + manifest_path);
    json doc;
    in >> doc;
    if (!doc.contains("argv") || !doc["argv"].is_array())
        throw ValidationError("manifest has no argv record: " + manifest_path);
    std::vector<std::string> args;
    for (const auto& a : doc["argv"]) args.push_back(a.get<std::string>());
    if (args.empty() || args[0] == "rerun")
        throw ValidationError("manifest argv is not rerunnable");
    const int rc = run_cli(args, depth + 1);
    if (rc != 0) throw NumericError("rerun failed with exit code " + std::to_string(rc));
}

// ----------------------------------------------------------------- driver

int run_cli(const std::vector<std::string>& args, int depth) {
    if (depth > 2) throw ValidationError("rerun: manifests may not chain");

    CLI::App app{"data nugget reduction and weighted analytics"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    CreateOpts create;
    auto* c = app.add_subcommand("create", "reduce a dataset to weighted data nuggets");
    c->add_option("--input", create.input, "input CSV (rows = observations)")->required();
    c->add_option("--R", create.params.R, "subset size for the random split");
    c->add_option("--C", create.params.C, "deletion proportion per round");
    c->add_option("--m-init", create.params.M_init, "intermediate center count");
    c->add_option("--M", create.M, "final nugget count (0 = auto)");
    c->add_option("--center", create.center, "center mode: mean|random");
    c->add_option("--seed", create.params.seed, "random seed");
    c->add_option("--threads", create.threads, "worker threads (0 = auto)");
    c->add_flag("--standardize", create.standardize, "z-score columns before reduction");
    c->add_option("--output", create.output, "nugget CSV path")->required();
    c->add_option("--assignment", create.assignment_out, "assignment CSV path");
    c->add_option("--manifest", create.manifest, "manifest JSON path");

    RefineOpts refine;
    auto* r = app.add_subcommand("refine", "split high-variance nuggets");
    r->add_option("--input", refine.input, "input CSV the nuggets were built from")->required();
    r->add_option("--nuggets", refine.nuggets, "nugget CSV")->required();
    r->add_option("--assignment", refine.assignment, "assignment CSV")->required();
    r->add_option("--nu", refine.params.nu, "split percentile in (0,1)");
    r->add_option("--n-min", refine.params.n_min, "minimum members per child");
    r->add_option("--max-rounds", refine.params.max_rounds, "round cap");
    r->add_option("--center", refine.center, "center mode used at creation");
    r->add_option("--seed", refine.params.seed, "random seed");
    r->add_option("--threads", refine.threads, "worker threads (0 = auto)");
    r->add_option("--output", refine.output, "refined nugget CSV")->required();
    r->add_option("--assignment-out", refine.assignment_out, "refined assignment CSV");
    r->add_option("--manifest", refine.manifest, "manifest JSON path");

    ClusterOpts cluster;
    auto* cl = app.add_subcommand("cluster", "K-means for weighted observations");
    cl->add_option("--nuggets", cluster.nuggets, "nugget CSV")->required();
    cl->add_option("--K", cluster.params.K, "cluster count")->required();
    cl->add_option("--starts", cluster.params.starts, "random initializations");
    cl->add_option("--max-sweeps", cluster.params.max_sweeps, "sweep cap");
    cl->add_option("--seed", cluster.params.seed, "random seed");
    cl->add_option("--output", cluster.output, "cluster CSV path")->required();
    cl->add_option("--summary", cluster.summary, "summary JSON path");
    cl->add_option("--manifest", cluster.manifest, "manifest JSON path");

    ChooseKOpts choosek;
    auto* ck = app.add_subcommand("choose-k", "select K by the second-difference rule");
    ck->add_option("--nuggets", choosek.nuggets, "nugget CSV")->required();
    ck->add_option("--k-min", choosek.k_min, "smallest K")->required();
    ck->add_option("--k-max", choosek.k_max, "largest K")->required();
    ck->add_option("--starts", choosek.params.starts, "random initializations");
    ck->add_option("--seed", choosek.params.seed, "random seed");
    ck->add_option("--output", choosek.output, "curve CSV path")->required();
    ck->add_option("--manifest", choosek.manifest, "manifest JSON path");

    PcaOpts pca;
    auto* pc = app.add_subcommand("pca", "weighted principal components of a nugget set");
    pc->add_option("--nuggets", pca.nuggets, "nugget CSV")->required();
    pc->add_option("--q", pca.q, "component count");
    pc->add_option("--output", pca.output, "scores CSV path")->required();
    pc->add_option("--loadings", pca.loadings, "loadings CSV path");
    pc->add_option("--manifest", pca.manifest, "manifest JSON path");

    QuantilesOpts quant;
    auto* q = app.add_subcommand("quantiles", "tail quantiles from 1-D nuggets");
    q->add_option("--nuggets", quant.nuggets, "nugget CSV (P = 1)")->required();
    q->add_option("--percentiles", quant.percentiles, "comma-separated percentiles");
    q->add_option("--tail-fraction", quant.tail_fraction,
                  "fit only the top fraction of cumulative weight (0 = all nuggets)");
    q->add_option("--output", quant.output, "estimates CSV path");
    q->add_option("--manifest", quant.manifest, "manifest JSON path");

    DensityOpts density;
    auto* d = app.add_subcommand("density", "weighted 2-D histogram grid");
    d->add_option("--input", density.input, "points CSV (2 columns)")->required();
    d->add_option("--weights", density.weights, "one weight per point (default 1)");
    d->add_option("--bins", density.bins, "grid resolution");
    auto* xmin = d->add_option("--x-min", density.x_min, "explicit x range");
    d->add_option("--x-max", density.x_max, "explicit x range");
    d->add_option("--y-min", density.y_min, "explicit y range");
    d->add_option("--y-max", density.y_max, "explicit y range");
    d->add_option("--output", density.output, "grid CSV path")->required();
    d->add_option("--manifest", density.manifest, "manifest JSON path");

    DecomposeOpts decomp;
    auto* de = app.add_subcommand("decompose", "split the sample covariance into nugget terms");
    de->add_option("--input", decomp.input, "input CSV")->required();
    de->add_option("--nuggets", decomp.nuggets, "nugget CSV")->required();
    de->add_option("--assignment", decomp.assignment, "assignment CSV")->required();
    de->add_option("--center", decomp.center, "center mode used at creation");
    de->add_option("--output", decomp.output, "decomposition JSON path")->required();
    de->add_option("--matrices-prefix", decomp.matrices_prefix, "also write S/S_DN/within CSVs");
    de->add_option("--manifest", decomp.manifest, "manifest JSON path");

    SimulateOpts sim;
    auto* s = app.add_subcommand("simulate", "generate a synthetic benchmark dataset");
    s->add_option("--which", sim.which, "smile|binary|gaussian4|largep")->required();
    s->add_option("--scale", sim.scale, "size scale factor in (0,1]");
    s->add_option("--seed", sim.seed, "random seed");
    s->add_option("--p", sim.p, "binary: condition probability");
    s->add_option("--n-noise", sim.n_noise, "smile: noise rows");
    s->add_option("--n-smile", sim.n_smile, "smile: smile rows");
    s->add_option("--n-per-cluster", sim.n_per_cluster, "binary/largep: rows per cluster");
    s->add_option("--noise-dims", sim.noise_dims, "largep: noise dimensions");
    s->add_option("--rotation-seed", sim.rotation_seed, "largep: rotation seed");
    s->add_option("--output", sim.output, "data CSV path")->required();
    s->add_option("--labels", sim.labels, "labels CSV path");
    s->add_option("--manifest", sim.manifest, "manifest JSON path");

    BenchOpts bench;
    auto* b = app.add_subcommand("bench", "creation-cost scaling table");
    b->add_option("--n", bench.n_list, "ascending comma-separated N values");
    b->add_option("--m", bench.m, "nugget count");
    b->add_option("--p", bench.p, "dimension");
    b->add_option("--reps", bench.reps, "repetitions per N");
    b->add_option("--seed", bench.seed, "random seed");
    b->add_option("--threads", bench.threads, "worker threads (0 = auto)");
    b->add_option("--output", bench.output, "table CSV path");
    b->add_option("--manifest", bench.manifest, "manifest JSON path");

    PipelineOpts pipe;
    auto* pl = app.add_subcommand("pipeline", "run configured stages end to end");
    pl->add_option("--config", pipe.config, "flat key = value config file")->required();
    pl->add_option("--threads", pipe.threads, "worker threads (0 = auto)");
    pl->add_option("--manifest", pipe.manifest, "manifest JSON path");

    std::string rerun_path;
    auto* rr = app.add_subcommand("rerun", "re-execute the command recorded in a manifest");
    rr->add_option("manifest", rerun_path, "manifest JSON path")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (c->parsed()) cmd_create(create, args);
    if (r->parsed()) cmd_refine(refine, args);
    if (cl->parsed()) cmd_cluster(cluster, args);
    if (ck->parsed()) cmd_choose_k(choosek, args);
    if (pc->parsed()) cmd_pca(pca, args);
    if (q->parsed()) cmd_quantiles(quant, args);
    if (d->parsed()) {
        density.has_range = xmin->count() > 0;
        cmd_density(density, args);
    }
    if (de->parsed()) cmd_decompose(decomp, args);
    if (s->parsed()) cmd_simulate(sim, args);
    if (b->parsed()) cmd_bench(bench, args);
    if (pl->parsed()) cmd_pipeline(pipe, args);
    if (rr->parsed()) cmd_rerun(rerun_path, depth);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        return run_cli(args, 0);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
