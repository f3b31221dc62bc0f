#pragma once

// addgp command-line front end. run() is the whole program; main() only
// forwards argv. Data goes to --out (or stdout), diagnostics to stderr.

#include "addgp/addgp.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace addgp::cli {

struct Options {
    std::string data;
    std::string target;
    std::string kernel = "additive";
    std::optional<int> max_order;
    int restarts = 5;
    int iters = 500;
    std::uint64_t seed = 0;
    std::string esp = "dp";
    std::string out;
    bool include_noise = false;
    std::string model;
    int resolution = 100;
    std::vector<int> dims;
    int count = 3;
    int n_train = 100;
    int grid = 21;
    double noise_sd = 0.1;
    int splits = 10;
    std::string residuals;
    int input_dims = 2;
    int prior_resolution = 20;
    double length_scale = 0.25;
};

inline ColumnSelector column_selector(const std::string& text) {
    if (text.empty()) return -1;
    int idx = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), idx);
    if (ec == std::errc() && ptr == text.data() + text.size()) return idx;
    return text;
}

inline FitConfig fit_config(const Options& o) {
    FitConfig cfg;
    cfg.max_iterations = o.iters;
    cfg.restarts = o.restarts;
    cfg.seed = o.seed;
    cfg.max_order = o.max_order;
    cfg.validate();
    return cfg;
}

/// Writes `content` to `path`, or to `out` when no path is given. The content
/// is assembled before the file is opened, so failures leave no partial file.
inline void emit(const std::string& path, const std::string& content, std::ostream& out) {
    if (path.empty()) {
        out << content;
        return;
    }
    std::ofstream f(path);
    if (!f) throw FileError("cannot write '" + path + "'");
    f << content;
}

inline std::string column_label(const std::vector<std::string>& names, int d) {
    if (!names.empty() && static_cast<std::size_t>(d) + 1 < names.size()) return names[static_cast<std::size_t>(d)];
    return "x" + std::to_string(d + 1);
}

// ------------------------------------------------------------------ fit

inline void summarize(std::ostream& s, const TrainedModel<AdditiveKernelSpec>& m) {
    s << "order report (% of prior variance)\norder,share\n";
    const auto r = order_report(m);
    for (std::size_t n = 0; n < r.shares.size(); ++n) s << n + 1 << ',' << r.shares[n] << '\n';
}

inline void summarize(std::ostream& s, const TrainedModel<HullKernelSpec>& m) {
    s << "amplitude," << m.kernel.amplitude() << "\nalpha," << m.kernel.alpha() << '\n';
}

template <class K>
std::string fit_summary(const TrainedModel<K>& m, const std::vector<RestartOutcome>& restarts, const std::string& kernel) {
    std::ostringstream s;
    s << std::setprecision(10);
    s << "kernel," << kernel << '\n';
    s << "final_nll," << m.diagnostics.final_nll << '\n';
    s << "restart," << m.diagnostics.restart_index << '\n';
    s << "iterations," << m.diagnostics.iterations << '\n';
    s << "converged," << (m.diagnostics.converged ? "yes" : "no") << '\n';
    s << "noise_variance," << m.noise.noise_variance << '\n';
    s << "jitter," << m.jitter << '\n';
    int failed = 0;
    for (const auto& r : restarts) failed += !r.ok;
    s << "failed_restarts," << failed << '\n';
    summarize(s, m);
    s << "length scales (standardized inputs)\ncolumn,length_scale\n";
    for (int d = 0; d < m.dims(); ++d)
        s << column_label(m.column_names, d) << ',' << m.kernel.length_scales()[static_cast<std::size_t>(d)] << '\n';
    return s.str();
}

inline int cmd_fit(const Options& o, std::ostream& out, std::ostream& err) {
    const auto data = load_csv(o.data, column_selector(o.target));
    const auto family = parse_kernel_family(o.kernel);
    auto cfg = fit_config(o);
    if (family == KernelFamily::additive && cfg.max_order) cfg.max_order = resolve_max_order(data.dims(), cfg.max_order, &err);
    const auto result = fit_family(data, family, cfg, parse_esp_method(o.esp));
    for (const auto& r : result.restarts)
        if (!r.ok) err << "restart " << r.index << " failed: " << r.error << '\n';
    std::ostringstream model;
    save_model(model, result.model);
    emit(o.out, model.str(), out);
    const auto summary = std::visit([&](const auto& m) { return fit_summary(m, result.restarts, o.kernel); }, result.model);
    (o.out.empty() ? err : out) << summary;
    return 0;
}

// ------------------------------------------------------------------ predict

/// Input matrix for a model with D inputs: a table with D columns is used as
/// is; with D + 1 columns the target column (--target, else the model's target
/// name, else the last column) is dropped.
inline RowMatrix prediction_inputs(const Table& table, int dims, const std::vector<std::string>& names,
                                   const std::string& target, const std::string& source) {
    if (table.columns() == dims) return table.values;
    if (table.columns() != dims + 1)
        throw InvalidData(source + ": has " + std::to_string(table.columns()) + " columns, model expects " +
                          std::to_string(dims) + " inputs (optionally plus the target)");
    ColumnSelector sel = column_selector(target);
    if (target.empty() && !names.empty() &&
        std::find(table.header.begin(), table.header.end(), names.back()) != table.header.end())
        sel = names.back();
    return to_dataset(table, sel, source).inputs;
}

inline int cmd_predict(const Options& o, std::ostream& out, std::ostream&) {
    const auto model = load_model(o.model);
    const auto table = load_table(o.data);
    std::ostringstream s;
    s << std::setprecision(17) << "mean,variance\n";
    std::visit(
        [&](const auto& m) {
            const auto x = prediction_inputs(table, m.dims(), m.column_names, o.target, o.data);
            const auto p = predict(m, x, o.include_noise);
            for (Eigen::Index i = 0; i < p.means.size(); ++i) s << p.means[i] << ',' << p.variances[i] << '\n';
        },
        model);
    emit(o.out, s.str(), out);
    return 0;
}

// ------------------------------------------------------------------ orders

inline const TrainedModel<AdditiveKernelSpec>& additive_model(const AnyModel& m, const char* what) {
    if (const auto* a = std::get_if<TrainedModel<AdditiveKernelSpec>>(&m)) return *a;
    throw std::invalid_argument(std::string(what) + " needs an additive-family model (hull models have no order structure)");
}

inline int cmd_orders(const Options& o, std::ostream& out, std::ostream&) {
    const auto model = load_model(o.model);
    const auto& m = additive_model(model, "orders");
    std::ostringstream s;
    s << std::setprecision(10) << "order,share\n";
    const auto r = order_report(m);
    for (std::size_t n = 0; n < r.shares.size(); ++n) s << n + 1 << ',' << r.shares[n] << '\n';
    emit(o.out, s.str(), out);
    return 0;
}

// ------------------------------------------------------------------ benchmark

inline int cmd_benchmark(const Options& o, std::ostream& out, std::ostream& err) {
    const auto data = load_csv(o.data, column_selector(o.target));
    BenchmarkConfig cfg;
    cfg.splits = o.splits;
    cfg.fit = fit_config(o);
    if (cfg.fit.max_order) cfg.fit.max_order = resolve_max_order(data.dims(), cfg.fit.max_order, &err);
    cfg.esp_method = parse_esp_method(o.esp);
    const auto report = run_benchmark(data, cfg, &err);
    std::ostringstream s;
    write_benchmark_csv(s, report);
    emit(o.out, s.str(), out);
    return 0;
}

// ------------------------------------------------------------------ grid

inline Eigen::VectorXd axis(const RowMatrix& raw, int d, int resolution) {
    return Eigen::VectorXd::LinSpaced(resolution, raw.col(d).minCoeff(), raw.col(d).maxCoeff());
}

inline int cmd_grid(const Options& o, std::ostream& out, std::ostream&) {
    const auto model = load_model(o.model);
    const auto& m = additive_model(model, "grid");
    if (o.dims.empty() || o.dims.size() > 2) throw std::invalid_argument("grid: --dims takes one or two dimensions");
    if (o.resolution < 2) throw std::invalid_argument("grid: --resolution must be >= 2");
    for (int d : o.dims)
        if (d < 0 || d >= m.dims())
            throw std::invalid_argument("grid: dimension " + std::to_string(d) + " out of range [0, " +
                                        std::to_string(m.dims() - 1) + "]");
    const RowMatrix raw = raw_train_inputs(m);
    const Eigen::RowVectorXd centre = raw.colwise().mean();
    const int r = o.resolution;
    std::ostringstream s;
    s << std::setprecision(17);

    if (o.dims.size() == 1) {
        const int d = o.dims[0];
        RowMatrix x = centre.replicate(r, 1);
        x.col(d) = axis(raw, d, r);
        const auto f = component_posterior(m, 1, {d}, x);
        s << column_label(m.column_names, d) << ",component_mean\n";
        for (int i = 0; i < r; ++i) s << x(i, d) << ',' << f[i] << '\n';
        if (!o.residuals.empty()) {
            const auto pts = first_order_residuals(m, d);
            std::ostringstream rs;
            rs << std::setprecision(17) << column_label(m.column_names, d) << ",observed,residual\n";
            for (Eigen::Index i = 0; i < pts.x.size(); ++i)
                rs << pts.x[i] << ',' << pts.observed[i] << ',' << pts.residual[i] << '\n';
            emit(o.residuals, rs.str(), out);
        }
    } else {
        const int a = o.dims[0], b = o.dims[1];
        if (a == b) throw std::invalid_argument("grid: the two dimensions must differ");
        const Eigen::VectorXd xa = axis(raw, a, r), xb = axis(raw, b, r);
        RowMatrix x = centre.replicate(r * r, 1);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j) {
                x(i * r + j, a) = xa[i];
                x(i * r + j, b) = xb[j];
            }
        const auto f = component_posterior(m, 2, {a, b}, x);
        s << column_label(m.column_names, a) << ',' << column_label(m.column_names, b) << ",component_mean\n";
        for (int i = 0; i < r * r; ++i) s << x(i, a) << ',' << x(i, b) << ',' << f[i] << '\n';
    }
    emit(o.out, s.str(), out);
    return 0;
}

// ------------------------------------------------------------------ synth

inline int cmd_synth(const Options& o, std::ostream& out, std::ostream&) {
    const auto s = synth_axis_sines(o.n_train, o.grid, o.noise_sd, o.seed);
    const std::string prefix = o.out.empty() ? "synth" : o.out;
    std::ostringstream train, test;
    write_csv(train, s.train);
    write_csv(test, s.test);
    emit(prefix + "_train.csv", train.str(), out);
    emit(prefix + "_test.csv", test.str(), out);
    return 0;
}

// ------------------------------------------------------------------ sample-prior

inline int cmd_sample_prior(const Options& o, std::ostream& out, std::ostream& err) {
    const int D = o.input_dims;
    if (D < 1) throw std::invalid_argument("sample-prior: --dims must be >= 1");
    const int res = o.prior_resolution;
    if (res < 2) throw std::invalid_argument("sample-prior: --resolution must be >= 2");
    if (o.count < 1) throw std::invalid_argument("sample-prior: --count must be >= 1");
    double points = 1.0;
    for (int d = 0; d < D; ++d) points *= res;
    if (points > 4096) throw std::invalid_argument("sample-prior: resolution^dims must be at most 4096 points");
    const int n = static_cast<int>(points);

    RowMatrix x(n, D);
    for (int i = 0; i < n; ++i) {
        int rest = i;
        for (int d = D - 1; d >= 0; --d) {
            x(i, d) = static_cast<double>(rest % res) / (res - 1);
            rest /= res;
        }
    }
    const auto family = parse_kernel_family(o.kernel);
    const LengthScales ls(static_cast<std::size_t>(D), o.length_scale);
    std::vector<Eigen::VectorXd> draws;
    if (family == KernelFamily::hull) {
        draws = sample_prior(HullKernelSpec(std::pow(2.0, -D), 1.0, ls), x, o.seed, o.count);
    } else {
        FitConfig cfg;
        if (family == KernelFamily::additive && o.max_order) cfg.max_order = resolve_max_order(D, o.max_order, &err);
        const auto spec = initial_additive_kernel(family, D, cfg, parse_esp_method(o.esp));
        draws = sample_prior(AdditiveKernelSpec(ls, spec.order_variances(), spec.min_order(), spec.esp_method()), x,
                             o.seed, o.count);
    }
    std::ostringstream s;
    s << std::setprecision(17);
    for (int d = 0; d < D; ++d) s << 'x' << d + 1 << ',';
    for (int c = 0; c < o.count; ++c) s << "draw" << c + 1 << (c + 1 < o.count ? "," : "\n");
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < D; ++d) s << x(i, d) << ',';
        for (int c = 0; c < o.count; ++c) s << draws[static_cast<std::size_t>(c)][i] << (c + 1 < o.count ? "," : "\n");
    }
    emit(o.out, s.str(), out);
    return 0;
}

// ------------------------------------------------------------------ driver

/// Runs one command line (without the program name). Returns the exit code.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Additive Gaussian process regression"};
    app.require_subcommand(1);
    Options o;

    auto data_opt = [&](CLI::App* c, bool required = true) {
        auto* opt = c->add_option("--data", o.data, "CSV file");
        if (required) opt->required();
        c->add_option("--target", o.target, "target column name or zero-based index (default: last)");
    };
    auto fit_opts = [&](CLI::App* c) {
        c->add_option("--max-order", o.max_order, "highest interaction order (default 10, clamped to D)");
        c->add_option("--restarts", o.restarts, "random restarts after the default start")->capture_default_str();
        c->add_option("--iters", o.iters, "L-BFGS iteration cap per run")->capture_default_str();
        c->add_option("--seed", o.seed, "random seed")->capture_default_str();
        c->add_option("--esp", o.esp, "dp | newton-girard")->capture_default_str();
    };

    auto* fit = app.add_subcommand("fit", "fit a model by maximum marginal likelihood");
    data_opt(fit);
    fit_opts(fit);
    fit->add_option("--kernel", o.kernel, "additive | gam | squared-exp | hull")->capture_default_str();
    fit->add_option("--out", o.out, "model file (stdout if omitted)");

    auto* pred = app.add_subcommand("predict", "predictive means and variances");
    pred->add_option("--model", o.model, "model file")->required();
    data_opt(pred);
    pred->add_option("--out", o.out, "output CSV");
    pred->add_flag("--include-noise", o.include_noise, "add the noise variance to the latent variance");

    auto* orders = app.add_subcommand("orders", "share of prior variance per interaction order");
    orders->add_option("--model", o.model, "model file")->required();
    orders->add_option("--out", o.out, "output CSV");

    auto* bench = app.add_subcommand("benchmark", "linear, gam, squared-exp and additive over seeded 90/10 splits");
    data_opt(bench);
    fit_opts(bench);
    bench->add_option("--splits", o.splits, "number of splits")->capture_default_str();
    bench->add_option("--out", o.out, "output CSV");

    auto* grid = app.add_subcommand("grid", "component posterior mean on a grid");
    grid->add_option("--model", o.model, "model file")->required();
    grid->add_option("--dims", o.dims, "one or two zero-based input dimensions")->required()->delimiter(',');
    grid->add_option("--resolution", o.resolution, "points per axis")->capture_default_str();
    grid->add_option("--out", o.out, "output CSV");
    grid->add_option("--residuals", o.residuals, "also write residual points here (one dimension only)");

    auto* synth = app.add_subcommand("synth", "sum of two axis-aligned sines, trained on an L-shaped region");
    synth->add_option("--n-train", o.n_train, "training points")->capture_default_str();
    synth->add_option("--grid", o.grid, "test grid points per axis")->capture_default_str();
    synth->add_option("--noise-sd", o.noise_sd, "noise standard deviation")->capture_default_str();
    synth->add_option("--seed", o.seed, "random seed")->capture_default_str();
    synth->add_option("--out", o.out, "output prefix; writes <prefix>_train.csv and <prefix>_test.csv")
        ->default_str("synth");

    auto* prior = app.add_subcommand("sample-prior", "draws from the kernel prior on a grid over [0, 1]^D");
    prior->add_option("--kernel", o.kernel, "additive | gam | squared-exp | hull")->capture_default_str();
    prior->add_option("--dims", o.input_dims, "input dimension")->capture_default_str();
    prior->add_option("--max-order", o.max_order, "highest interaction order");
    prior->add_option("--resolution", o.prior_resolution, "points per axis")->capture_default_str();
    prior->add_option("--length-scale", o.length_scale, "length-scale of every dimension")->capture_default_str();
    prior->add_option("--count", o.count, "number of draws")->capture_default_str();
    prior->add_option("--seed", o.seed, "random seed")->capture_default_str();
    prior->add_option("--esp", o.esp, "dp | newton-girard")->capture_default_str();
    prior->add_option("--out", o.out, "output CSV");

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*fit) return cmd_fit(o, out, err);
        if (*pred) return cmd_predict(o, out, err);
        if (*orders) return cmd_orders(o, out, err);
        if (*bench) return cmd_benchmark(o, out, err);
        if (*grid) return cmd_grid(o, out, err);
        if (*synth) return cmd_synth(o, out, err);
        if (*prior) return cmd_sample_prior(o, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

} // namespace addgp::cli
