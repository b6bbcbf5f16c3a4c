// Command-line front end: test (on data files), simulate, sweep, qq, bench.
// Every subcommand prints one JSON document to --out or stdout; failures map
// the library error codes onto distinct process exit codes.

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kts/kts.hpp"

namespace {

struct CommonOptions {
    double alpha = 0.05;
    std::uint64_t seed = 0;
    unsigned threads = kts::default_threads();
    std::string bandwidth = "median";
    std::size_t median_subsample = 1000;
    std::string out;
};

void add_common(CLI::App& cmd, CommonOptions& options) {
    cmd.add_option("--alpha", options.alpha, "Significance level in (0, 1)")
        ->capture_default_str();
    cmd.add_option("--seed", options.seed, "Master RNG seed")->capture_default_str();
    cmd.add_option("--threads", options.threads, "Worker threads")->capture_default_str();
    cmd.add_option("--bandwidth", options.bandwidth,
                   "Kernel bandwidth: 'median' or a positive number")
        ->capture_default_str();
    cmd.add_option("--median-subsample", options.median_subsample,
                   "Pooled rows used for the median heuristic; >= m + n forces the "
                   "exact median")
        ->capture_default_str();
    cmd.add_option("--out", options.out, "Write the JSON result to this path");
}

// The CLI master seed S feeds fixed streams: 0 reserved, 1 the test's
// assignment shuffle, 2 the median-heuristic subsample, 3 permutation
// calibration, 4 linear-MMD pairing.
kts::KernelConfig make_kernel(const CommonOptions& options) {
    kts::KernelConfig kernel;
    if (options.bandwidth == "median") {
        kernel.bandwidth =
            kts::MedianBandwidth{options.median_subsample, kts::child_seed(options.seed, 2)};
    } else {
        double sigma = 0.0;
        try {
            sigma = std::stod(options.bandwidth);
        } catch (const std::exception&) {
            kts::fail(kts::ErrorCode::InvalidBandwidth,
                      "--bandwidth must be 'median' or a positive number");
        }
        kernel.bandwidth = kts::FixedBandwidth{sigma};
    }
    return kernel;
}

kts::BlockScheme parse_scheme(const std::string& name) {
    if (name == "new") return kts::BlockScheme::New;
    if (name == "a1") return kts::BlockScheme::A1;
    if (name == "a2") return kts::BlockScheme::A2;
    if (name == "a3") return kts::BlockScheme::A3;
    kts::fail(kts::ErrorCode::InvalidSpec, "unknown scheme '" + name + "'");
}

kts::Family parse_family(const std::string& name) {
    if (name == "null") return kts::Family::Null;
    if (name == "gmd") return kts::Family::Gmd;
    if (name == "gvd") return kts::Family::Gvd;
    if (name == "lognormal") return kts::Family::LogNormal;
    kts::fail(kts::ErrorCode::InvalidSpec, "unknown family '" + name + "'");
}

// Method labels: new, new/a1, new/a2, new/a3, mmd-u, mmd-linear, mmd-b.
kts::MethodConfig parse_method(const std::string& label) {
    kts::MethodConfig config;
    config.label = label;
    if (label == "new" || label.rfind("new/", 0) == 0) {
        config.method = kts::Method::New;
        if (label.size() > 4) config.scheme = parse_scheme(label.substr(4));
        return config;
    }
    if (label == "mmd-u") {
        config.method = kts::Method::MmdU;
        return config;
    }
    if (label == "mmd-linear") {
        config.method = kts::Method::MmdLinear;
        return config;
    }
    if (label == "mmd-b") {
        config.method = kts::Method::MmdBlock;
        return config;
    }
    kts::fail(kts::ErrorCode::InvalidSpec, "unknown method '" + label + "'");
}

std::pair<std::size_t, std::size_t> parse_shape(const std::string& text) {
    const std::size_t cut = text.find('x');
    kts::require(cut != std::string::npos && cut > 0 && cut + 1 < text.size(),
                 kts::ErrorCode::InvalidSpec,
                 "shape must be ROWSxCOLS, e.g. 200x10: got '" + text + "'");
    try {
        return {std::stoull(text.substr(0, cut)), std::stoull(text.substr(cut + 1))};
    } catch (const std::exception&) {
        kts::fail(kts::ErrorCode::InvalidSpec, "shape must be ROWSxCOLS: got '" + text + "'");
    }
}

void emit(const nlohmann::json& doc, const std::string& out) {
    if (out.empty()) {
        std::cout << doc.dump(2) << '\n';
        return;
    }
    std::ofstream stream(out);
    kts::require(stream.good(), kts::ErrorCode::FormatError, out + ": cannot open for writing");
    stream << doc.dump(2) << '\n';
    kts::require(stream.good(), kts::ErrorCode::FormatError, out + ": write failed");
}

struct TestArgs {
    CommonOptions common;
    std::string x_path;
    std::string y_path;
    std::string format = "csv";
    std::string x_shape;
    std::string y_shape;
    std::string csv_delim = ",";
    bool csv_header = false;
    std::string method = "new";
    std::string scheme = "new";
    std::string assign = "shuffle";
    std::string combine = "bonferroni";
    std::size_t block_size = 0;
    std::size_t n_perms = 200;
    bool diagnostics = false;
};

int run_test_command(const TestArgs& args) {
    kts::MatrixFormat format_x;
    kts::MatrixFormat format_y;
    if (args.format == "csv") {
        kts::require(args.csv_delim.size() == 1, kts::ErrorCode::InvalidSpec,
                     "--csv-delim must be a single character");
        const kts::CsvFormat csv{args.csv_delim[0], args.csv_header};
        format_x = csv;
        format_y = csv;
    } else if (args.format == "raw") {
        kts::require(!args.x_shape.empty() && !args.y_shape.empty(),
                     kts::ErrorCode::InvalidSpec,
                     "--format raw requires --x-shape and --y-shape");
        const auto [xr, xc] = parse_shape(args.x_shape);
        const auto [yr, yc] = parse_shape(args.y_shape);
        format_x = kts::RawF64Format{xr, xc};
        format_y = kts::RawF64Format{yr, yc};
    } else {
        kts::fail(kts::ErrorCode::InvalidSpec, "--format must be csv or raw");
    }

    const kts::Matrix x = kts::load_matrix(args.x_path, format_x);
    const kts::Matrix y = kts::load_matrix(args.y_path, format_y);
    const kts::KernelConfig kernel = make_kernel(args.common);

    if (args.method == "new") {
        kts::RunOptions options;
        options.threads = args.common.threads;
        options.combine =
            args.combine == "simes" ? kts::Combine::Simes : kts::Combine::Bonferroni;
        kts::require(args.combine == "simes" || args.combine == "bonferroni",
                     kts::ErrorCode::InvalidSpec, "--combine must be bonferroni or simes");
        options.per_block_diagnostics = args.diagnostics;
        kts::require(args.assign == "seq" || args.assign == "shuffle",
                     kts::ErrorCode::InvalidSpec, "--assign must be seq or shuffle");
        const auto assign = args.assign == "seq" ? kts::AssignKind::Sequential
                                                 : kts::AssignKind::Shuffled;
        const kts::TestResult result =
            kts::run_test(x, y, kernel, parse_scheme(args.scheme), assign,
                          args.common.alpha, kts::child_seed(args.common.seed, 1), options);
        nlohmann::json doc = kts::to_json(result);
        doc["seed"] = args.common.seed;
        emit(doc, args.common.out);
        return 0;
    }

    const auto start = std::chrono::steady_clock::now();
    kts::MmdResult result;
    if (args.method == "mmd-u") {
        result.method = kts::MmdMethod::Quadratic;
        result.statistic = kts::mmd_u(x, y, kernel);
        result.bandwidth = kts::resolve_bandwidth(x, y, kernel);
        result.p_value = kts::mmd_u_permutation_pvalue(x, y, kernel, args.n_perms,
                                                       kts::child_seed(args.common.seed, 3));
        result.null_calibration = {kts::NullCalibration::Kind::MonteCarloPermutation,
                                   args.n_perms, args.common.seed};
    } else if (args.method == "mmd-linear") {
        result = kts::mmd_linear(x, y, kernel, kts::child_seed(args.common.seed, 4));
    } else if (args.method == "mmd-b") {
        result = kts::mmd_block(x, y, kernel, args.block_size);
    } else {
        kts::fail(kts::ErrorCode::InvalidSpec,
                  "--method must be new, mmd-u, mmd-linear, or mmd-b");
    }
    const double elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    emit(kts::to_json(result, args.common.alpha, args.common.seed, elapsed_ms),
         args.common.out);
    return 0;
}

struct SimulateArgs {
    CommonOptions common;
    std::string family = "null";
    std::size_t d = 1;
    std::size_t m = 0;
    std::size_t n = 0;
    double shift = 0.8;
    double scale = 2.0;
    double a = 0.0;
    double rho = 0.4;
    std::vector<std::string> methods{"new"};
    std::string scheme; // overrides the scheme of plain "new" entries
    std::string assign = "shuffle";
    std::string combine = "bonferroni";
    std::size_t block_size = 0;
    std::size_t n_perms = 200;
    std::size_t reps = 100;
    std::string per_rep_csv;
};

kts::SyntheticSpec make_spec(const SimulateArgs& args) {
    kts::SyntheticSpec spec;
    spec.family = parse_family(args.family);
    spec.d = static_cast<kts::Index>(args.d);
    spec.m = args.m;
    spec.n = args.n == 0 ? args.m : args.n;
    spec.shift = args.shift;
    spec.scale = args.scale;
    spec.a = args.a;
    spec.rho = args.rho;
    return spec;
}

std::vector<kts::MethodConfig> make_methods(const SimulateArgs& args) {
    std::vector<kts::MethodConfig> methods;
    for (const auto& label : args.methods) {
        kts::MethodConfig config = parse_method(label);
        if (!args.scheme.empty() && config.method == kts::Method::New && label == "new")
            config.scheme = parse_scheme(args.scheme);
        config.assign = args.assign == "seq" ? kts::AssignKind::Sequential
                                             : kts::AssignKind::Shuffled;
        config.combine =
            args.combine == "simes" ? kts::Combine::Simes : kts::Combine::Bonferroni;
        config.kernel = make_kernel(args.common);
        config.block_size = args.block_size;
        config.n_perms = args.n_perms;
        methods.push_back(std::move(config));
    }
    return methods;
}

int run_simulate_command(const SimulateArgs& args) {
    const kts::SyntheticSpec spec = make_spec(args);
    const std::vector<kts::MethodConfig> methods = make_methods(args);
    const kts::ExperimentReport report = kts::run_power_experiment(
        spec, methods, args.common.alpha, args.reps, args.common.seed, args.common.threads);
    if (!args.per_rep_csv.empty()) {
        std::ofstream csv(args.per_rep_csv);
        kts::require(csv.good(), kts::ErrorCode::FormatError,
                     args.per_rep_csv + ": cannot open for writing");
        csv << "rep,method,reject\n";
        for (std::size_t rep = 0; rep < report.n_reps; ++rep)
            for (std::size_t j = 0; j < report.methods.size(); ++j)
                csv << rep << ',' << report.methods[j].label << ','
                    << int(report.rejections[rep * report.methods.size() + j]) << '\n';
    }
    emit(kts::to_json(report), args.common.out);
    return 0;
}

struct SweepArgs {
    SimulateArgs simulate;
    std::vector<double> bandwidths;
};

int run_sweep_command(const SweepArgs& args) {
    const kts::SyntheticSpec spec = make_spec(args.simulate);
    std::vector<kts::MethodConfig> methods = make_methods(args.simulate);
    kts::require(methods.size() == 1 && methods[0].method == kts::Method::New,
                 kts::ErrorCode::InvalidSpec, "sweep supports a single 'new' method");
    const std::vector<kts::SweepRow> rows =
        kts::bandwidth_sweep(spec, args.bandwidths, args.simulate.common.alpha,
                             args.simulate.reps, args.simulate.common.seed, methods[0],
                             args.simulate.common.threads);
    emit(kts::sweep_to_json(spec, rows, args.simulate.common.alpha, args.simulate.reps,
                            args.simulate.common.seed),
         args.simulate.common.out);
    return 0;
}

struct QqArgs {
    SimulateArgs simulate;
    std::string csv;
};

int run_qq_command(const QqArgs& args) {
    kts::SyntheticSpec spec = make_spec(args.simulate);
    spec.family = kts::Family::Null;
    std::vector<kts::MethodConfig> methods = make_methods(args.simulate);
    kts::require(methods.size() == 1 && methods[0].method == kts::Method::New,
                 kts::ErrorCode::InvalidSpec, "qq supports a single 'new' method");
    const kts::NullSample sample =
        kts::null_zscore_sample(spec, args.simulate.reps, args.simulate.common.seed,
                                methods[0], args.simulate.common.threads);
    if (!args.csv.empty()) {
        std::ofstream csv(args.csv);
        kts::require(csv.good(), kts::ErrorCode::FormatError,
                     args.csv + ": cannot open for writing");
        csv << "stat_w,stat_d\n";
        for (std::size_t i = 0; i < sample.stat_w.size(); ++i)
            csv << sample.stat_w[i] << ',' << sample.stat_d[i] << '\n';
    }
    const nlohmann::json doc{
        {"schema_version", kts::kSchemaVersion},
        {"kind", "qq"},
        {"spec", kts::to_json(spec)},
        {"n_reps", args.simulate.reps},
        {"seed", args.simulate.common.seed},
        {"ks_stat_w", kts::ks_distance_to_std_normal(sample.stat_w)},
        {"ks_stat_d", kts::ks_distance_to_std_normal(sample.stat_d)},
    };
    emit(doc, args.simulate.common.out);
    return 0;
}

struct BenchArgs {
    CommonOptions common;
    std::vector<std::size_t> sizes;
    std::size_t d = 100;
    std::string method = "new";
    std::size_t runs = 5;
};

int run_bench_command(const BenchArgs& args) {
    std::vector<std::pair<std::size_t, std::size_t>> sizes;
    sizes.reserve(args.sizes.size());
    for (const std::size_t size : args.sizes) sizes.emplace_back(size, size);
    kts::MethodConfig method = parse_method(args.method);
    method.kernel = make_kernel(args.common);
    const kts::BenchReport report =
        kts::bench_runtime(sizes, static_cast<kts::Index>(args.d), method, args.runs,
                           args.common.seed);
    emit(kts::to_json(report), args.common.out);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sub-quadratic kernel two-sample testing"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "kts 1.0.0");

    TestArgs test_args;
    CLI::App* test_cmd = app.add_subcommand("test", "Two-sample test on data files");
    test_cmd->add_option("--x", test_args.x_path, "First sample")->required();
    test_cmd->add_option("--y", test_args.y_path, "Second sample")->required();
    test_cmd->add_option("--format", test_args.format, "Input format: csv or raw")
        ->capture_default_str();
    test_cmd->add_option("--x-shape", test_args.x_shape, "ROWSxCOLS of --x (raw only)");
    test_cmd->add_option("--y-shape", test_args.y_shape, "ROWSxCOLS of --y (raw only)");
    test_cmd->add_option("--csv-delim", test_args.csv_delim, "CSV field delimiter")
        ->capture_default_str();
    test_cmd->add_flag("--csv-header", test_args.csv_header, "Skip one CSV header line");
    test_cmd->add_option("--method", test_args.method,
                         "new, mmd-u, mmd-linear, or mmd-b")
        ->capture_default_str();
    test_cmd->add_option("--scheme", test_args.scheme, "Block scheme: new, a1, a2, a3")
        ->capture_default_str();
    test_cmd->add_option("--assign", test_args.assign, "Block assignment: seq or shuffle")
        ->capture_default_str();
    test_cmd->add_option("--combine", test_args.combine,
                         "P-value combination: bonferroni or simes")
        ->capture_default_str();
    test_cmd->add_option("--block-size", test_args.block_size,
                         "mmd-b block size (0 = floor(sqrt(m)))")
        ->capture_default_str();
    test_cmd->add_option("--n-perms", test_args.n_perms, "mmd-u permutation count")
        ->capture_default_str();
    test_cmd->add_flag("--diagnostics", test_args.diagnostics,
                       "Include per-block z-scores in the output");
    add_common(*test_cmd, test_args.common);

    SimulateArgs simulate_args;
    CLI::App* simulate_cmd =
        app.add_subcommand("simulate", "Monte-Carlo rejection-rate experiment");
    auto add_simulate = [](CLI::App& cmd, SimulateArgs& args) {
        cmd.add_option("--family", args.family, "null, gmd, gvd, or lognormal")
            ->capture_default_str();
        cmd.add_option("--d", args.d, "Dimension")->capture_default_str();
        cmd.add_option("--m", args.m, "First sample size")->required();
        cmd.add_option("--n", args.n, "Second sample size (default m)");
        cmd.add_option("--shift", args.shift, "gmd offset")->capture_default_str();
        cmd.add_option("--scale", args.scale, "gvd variance factor")->capture_default_str();
        cmd.add_option("--a", args.a, "lognormal underlying mean")->capture_default_str();
        cmd.add_option("--rho", args.rho, "lognormal AR(1) correlation")
            ->capture_default_str();
        cmd.add_option("--reps", args.reps, "Monte-Carlo repetitions")
            ->capture_default_str();
        cmd.add_option("--scheme", args.scheme, "Block scheme for the 'new' method");
        cmd.add_option("--assign", args.assign, "Block assignment: seq or shuffle")
            ->capture_default_str();
        cmd.add_option("--combine", args.combine, "bonferroni or simes")
            ->capture_default_str();
        cmd.add_option("--block-size", args.block_size, "mmd-b block size")
            ->capture_default_str();
        cmd.add_option("--n-perms", args.n_perms, "mmd-u permutation count")
            ->capture_default_str();
    };
    add_simulate(*simulate_cmd, simulate_args);
    simulate_cmd
        ->add_option("--methods", simulate_args.methods,
                     "Comma-separated: new, new/a1, new/a2, new/a3, mmd-u, mmd-linear, "
                     "mmd-b")
        ->delimiter(',')
        ->capture_default_str();
    simulate_cmd->add_option("--per-rep-csv", simulate_args.per_rep_csv,
                             "Write per-repetition rejections to this CSV");
    add_common(*simulate_cmd, simulate_args.common);

    SweepArgs sweep_args;
    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "Rejection rate across fixed bandwidths");
    add_simulate(*sweep_cmd, sweep_args.simulate);
    sweep_cmd->add_option("--bandwidths", sweep_args.bandwidths, "Comma-separated sigmas")
        ->delimiter(',')
        ->required();
    add_common(*sweep_cmd, sweep_args.simulate.common);

    QqArgs qq_args;
    CLI::App* qq_cmd = app.add_subcommand("qq", "Null draws of (stat_w, stat_d)");
    add_simulate(*qq_cmd, qq_args.simulate);
    qq_cmd->add_option("--csv", qq_args.csv, "Write the draws to this CSV");
    add_common(*qq_cmd, qq_args.simulate.common);

    BenchArgs bench_args;
    CLI::App* bench_cmd = app.add_subcommand("bench", "Runtime benchmark on null data");
    bench_cmd->add_option("--sizes", bench_args.sizes, "Comma-separated balanced sizes m")
        ->delimiter(',')
        ->required();
    bench_cmd->add_option("--d", bench_args.d, "Dimension")->capture_default_str();
    bench_cmd->add_option("--method", bench_args.method, "Method label, e.g. new or mmd-b")
        ->capture_default_str();
    bench_cmd->add_option("--runs", bench_args.runs, "Timed runs per size")
        ->capture_default_str();
    add_common(*bench_cmd, bench_args.common);

    try {
        app.parse(argc, argv);
        if (test_cmd->parsed()) return run_test_command(test_args);
        if (simulate_cmd->parsed()) return run_simulate_command(simulate_args);
        if (sweep_cmd->parsed()) return run_sweep_command(sweep_args);
        if (qq_cmd->parsed()) return run_qq_command(qq_args);
        if (bench_cmd->parsed()) return run_bench_command(bench_args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const kts::Error& e) {
        std::cerr << "error: " << kts::error_name(e.code()) << ": " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 20;
    }
    return 0;
}
