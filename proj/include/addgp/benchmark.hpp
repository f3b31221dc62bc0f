#pragma once

// Regression benchmark over seeded train/test splits: a ridge linear baseline
// and the GP-GAM, squared-exponential and additive GPs, scored by test MSE and
// negative log predictive density in standardized target units.

#include "addgp/data.hpp"
#include "addgp/gp.hpp"
#include "addgp/hyperopt.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

namespace addgp {

struct LinearModel {
    Eigen::VectorXd weights;
    double intercept = 0.0;
    double noise_variance = 1.0;
};

inline constexpr double kRidgeRegularizer = 1e-8;

/// Closed-form ridge regression with an unpenalized intercept; the noise
/// variance is the training mean squared residual.
inline LinearModel fit_linear(const Dataset& data, double ridge = kRidgeRegularizer) {
    data.validate();
    const Eigen::RowVectorXd x_mean = data.inputs.colwise().mean();
    const double y_mean = data.targets.mean();
    const Eigen::MatrixXd xc = data.inputs.rowwise() - x_mean;
    const Eigen::VectorXd yc = data.targets.array() - y_mean;
    Eigen::MatrixXd a = xc.transpose() * xc;
    a.diagonal().array() += ridge;
    LinearModel m;
    m.weights = a.ldlt().solve(xc.transpose() * yc);
    m.intercept = y_mean - x_mean.dot(m.weights);
    const Eigen::VectorXd resid = data.targets - ((data.inputs * m.weights).array() + m.intercept).matrix();
    m.noise_variance = std::max(resid.squaredNorm() / static_cast<double>(data.size()), 1e-12);
    return m;
}

inline Eigen::VectorXd predict_linear(const LinearModel& m, const RowMatrix& x) {
    return (x * m.weights).array() + m.intercept;
}

struct Scores {
    double mse = 0.0;
    double nlpd = 0.0;
};

inline Scores score(const Eigen::VectorXd& y, const Eigen::VectorXd& mean, const Eigen::VectorXd& variance) {
    Scores s;
    const Eigen::ArrayXd err = (y - mean).array();
    s.mse = err.square().mean();
    s.nlpd = (0.5 * (2.0 * std::numbers::pi * variance.array()).log() + err.square() / (2.0 * variance.array())).mean();
    return s;
}

struct BenchmarkConfig {
    int splits = 10;
    double train_fraction = 0.9;
    FitConfig fit;
    EspMethod esp_method = EspMethod::dp;
    std::vector<std::string> models = {"linear", "gam", "squared-exp", "additive"};
};

struct SplitResult {
    int split = 0;
    std::string model;
    bool ok = false;
    Scores scores;
    std::string error;
};

struct ModelSummary {
    std::string model;
    int count = 0;
    Scores mean;
    Scores standard_error;
};

struct PairedComparison {
    /// model minus reference, over splits where both succeeded
    std::string model;
    std::string reference;
    int count = 0;
    Scores mean_difference;
    Scores standard_error;
};

struct BenchmarkReport {
    std::vector<SplitResult> splits;
    std::vector<ModelSummary> summaries;
    std::vector<PairedComparison> paired;
};

namespace detail {

inline Scores score_model(const std::string& name, const Dataset& train, const Dataset& test, const BenchmarkConfig& cfg) {
    // Everything is scored in the training split's standardized units.
    const auto stats = fit_standardization(train);
    const Dataset test_std = stats.apply(test);
    if (name == "linear") {
        const auto lm = fit_linear(stats.apply(train));
        const Eigen::VectorXd mean = predict_linear(lm, test_std.inputs);
        return score(test_std.targets, mean, Eigen::VectorXd::Constant(mean.size(), lm.noise_variance));
    }
    const auto family = parse_kernel_family(name);
    const auto fitted = fit_family(train, family, cfg.fit, cfg.esp_method);
    return std::visit(
        [&](const auto& model) {
            const auto pred = predict(model, test.inputs, true);
            const Eigen::VectorXd mean = stats.apply_targets(pred.means);
            const Eigen::VectorXd var = pred.variances / (stats.target_std * stats.target_std);
            return score(test_std.targets, mean, var);
        },
        fitted.model);
}

inline std::pair<Scores, Scores> mean_and_se(const std::vector<Scores>& v) {
    Scores mean, se;
    const auto n = static_cast<double>(v.size());
    if (v.empty()) return {mean, se};
    for (const auto& s : v) {
        mean.mse += s.mse / n;
        mean.nlpd += s.nlpd / n;
    }
    if (v.size() > 1) {
        double vm = 0.0, vn = 0.0;
        for (const auto& s : v) {
            vm += (s.mse - mean.mse) * (s.mse - mean.mse);
            vn += (s.nlpd - mean.nlpd) * (s.nlpd - mean.nlpd);
        }
        se.mse = std::sqrt(vm / (n - 1) / n);
        se.nlpd = std::sqrt(vn / (n - 1) / n);
    }
    return {mean, se};
}

} // namespace detail

/// Split s uses seed cfg.fit.seed + s for both the partition and the restarts.
inline BenchmarkReport run_benchmark(const Dataset& data, const BenchmarkConfig& cfg, std::ostream* log = nullptr) {
    if (cfg.splits < 1) throw std::invalid_argument("benchmark: need at least one split");
    BenchmarkReport report;
    for (int s = 0; s < cfg.splits; ++s) {
        const std::uint64_t seed = cfg.fit.seed + static_cast<std::uint64_t>(s);
        const auto [train, test] = split(data, cfg.train_fraction, seed);
        BenchmarkConfig split_cfg = cfg;
        split_cfg.fit.seed = seed;
        for (const auto& name : cfg.models) {
            SplitResult r;
            r.split = s;
            r.model = name;
            try {
                r.scores = detail::score_model(name, train, test, split_cfg);
                r.ok = std::isfinite(r.scores.mse) && std::isfinite(r.scores.nlpd);
                if (!r.ok) r.error = "non-finite score";
            } catch (const std::exception& e) {
                r.error = e.what();
            }
            if (!r.ok && log) *log << "split " << s << ", model " << name << " failed: " << r.error << '\n';
            report.splits.push_back(std::move(r));
        }
    }

    auto scores_of = [&](const std::string& name) {
        std::vector<const SplitResult*> out(static_cast<std::size_t>(cfg.splits), nullptr);
        for (const auto& r : report.splits)
            if (r.model == name && r.ok) out[static_cast<std::size_t>(r.split)] = &r;
        return out;
    };

    for (const auto& name : cfg.models) {
        std::vector<Scores> ok;
        for (const auto* r : scores_of(name))
            if (r) ok.push_back(r->scores);
        const auto [mean, se] = detail::mean_and_se(ok);
        report.summaries.push_back({name, static_cast<int>(ok.size()), mean, se});
    }

    const std::string reference = "additive";
    const auto ref = scores_of(reference);
    for (const auto& name : cfg.models) {
        if (name == reference) continue;
        std::vector<Scores> diffs;
        const auto other = scores_of(name);
        for (std::size_t s = 0; s < other.size(); ++s)
            if (other[s] && ref[s])
                diffs.push_back({other[s]->scores.mse - ref[s]->scores.mse, other[s]->scores.nlpd - ref[s]->scores.nlpd});
        const auto [mean, se] = detail::mean_and_se(diffs);
        report.paired.push_back({name, reference, static_cast<int>(diffs.size()), mean, se});
    }
    return report;
}

/// CSV with columns kind,split,model,mse,nlpd,mse_se,nlpd_se,count.
/// kind is "split", "mean" (with standard errors) or "paired" (model minus
/// additive, mean difference and its standard error).
inline void write_benchmark_csv(std::ostream& os, const BenchmarkReport& report) {
    os << "kind,split,model,mse,nlpd,mse_se,nlpd_se,count\n" << std::setprecision(10);
    for (const auto& r : report.splits) {
        os << "split," << r.split << ',' << r.model << ',';
        if (r.ok)
            os << r.scores.mse << ',' << r.scores.nlpd << ",,,1\n";
        else
            os << "nan,nan,,,0\n";
    }
    for (const auto& s : report.summaries)
        os << "mean,," << s.model << ',' << s.mean.mse << ',' << s.mean.nlpd << ',' << s.standard_error.mse << ','
           << s.standard_error.nlpd << ',' << s.count << '\n';
    for (const auto& p : report.paired)
        os << "paired,," << p.model << "-minus-" << p.reference << ',' << p.mean_difference.mse << ','
           << p.mean_difference.nlpd << ',' << p.standard_error.mse << ',' << p.standard_error.nlpd << ',' << p.count
           << '\n';
}

} // namespace addgp
