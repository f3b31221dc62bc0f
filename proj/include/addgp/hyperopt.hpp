#pragma once

// Marginal-likelihood hyperparameter fitting: log-space packing, L-BFGS runs
// from a default start plus seeded random restarts, best-of selection.

#include "addgp/data.hpp"
#include "addgp/gp.hpp"
#include "addgp/kernel.hpp"
#include "addgp/lbfgs.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace addgp {

/// Kernel log parameters followed by the log noise variance.
using PackedParams = Eigen::VectorXd;

template <CovarianceKernel K>
PackedParams pack(const K& kernel, const NoiseModel& noise) {
    noise.validate();
    PackedParams p(kernel.num_params() + 1);
    p.head(kernel.num_params()) = kernel.log_params();
    p[kernel.num_params()] = std::log(noise.noise_variance);
    return p;
}

/// Inverse of pack(); `structure` fixes everything that is not a hyperparameter.
/// The constant mean is not packed and comes back as 0.
template <CovarianceKernel K>
std::pair<K, NoiseModel> unpack(const PackedParams& p, const K& structure) {
    if (p.size() != structure.num_params() + 1)
        throw std::invalid_argument("unpack: expected " + std::to_string(structure.num_params() + 1) +
                                    " parameters, got " + std::to_string(p.size()));
    if (!p.allFinite()) throw std::invalid_argument("unpack: non-finite parameter");
    return {structure.with_log_params(p.head(structure.num_params())), NoiseModel{std::exp(p[p.size() - 1]), 0.0}};
}

/// Additive kernel over orders 1..R on D inputs.
inline std::pair<AdditiveKernelSpec, NoiseModel> unpack(const PackedParams& p, int dims, int max_order) {
    const AdditiveKernelSpec structure(LengthScales(static_cast<std::size_t>(dims), 1.0),
                                       OrderVariances(static_cast<std::size_t>(max_order), 1.0));
    return unpack(p, structure);
}

enum class KernelFamily { additive, gam, squared_exp, hull };

inline const char* to_string(KernelFamily f) {
    switch (f) {
    case KernelFamily::additive: return "additive";
    case KernelFamily::gam: return "gam";
    case KernelFamily::squared_exp: return "squared-exp";
    case KernelFamily::hull: return "hull";
    }
    return "?";
}

inline KernelFamily parse_kernel_family(const std::string& s) {
    if (s == "additive") return KernelFamily::additive;
    if (s == "gam") return KernelFamily::gam;
    if (s == "squared-exp" || s == "se") return KernelFamily::squared_exp;
    if (s == "hull") return KernelFamily::hull;
    throw std::invalid_argument("unknown kernel '" + s + "' (expected additive, gam, squared-exp or hull)");
}

/// Default start on standardized data: unit length-scales, the signal variance
/// split evenly over the active orders.
inline AdditiveKernelSpec default_additive_spec(int dims, int min_order, int max_order,
                                                EspMethod esp_method = EspMethod::dp) {
    const auto count = static_cast<std::size_t>(max_order - min_order + 1);
    return AdditiveKernelSpec(LengthScales(static_cast<std::size_t>(dims), 1.0),
                              OrderVariances(count, 1.0 / static_cast<double>(count)), min_order, esp_method);
}

/// Default hull start: unit length-scales, alpha = 1, amplitude chosen so k(x, x) = 1.
inline HullKernelSpec default_hull_spec(int dims) {
    return HullKernelSpec(std::pow(2.0, -dims), 1.0, LengthScales(static_cast<std::size_t>(dims), 1.0));
}

inline constexpr double kDefaultNoiseVariance = 0.1;

/// Starting kernel for a model family on D standardized inputs.
inline AdditiveKernelSpec initial_additive_kernel(KernelFamily family, int dims, const FitConfig& cfg,
                                                  EspMethod esp_method = EspMethod::dp) {
    switch (family) {
    case KernelFamily::gam: return default_additive_spec(dims, 1, 1, esp_method);
    case KernelFamily::squared_exp: return default_additive_spec(dims, dims, dims, esp_method);
    case KernelFamily::additive: return default_additive_spec(dims, 1, resolve_max_order(dims, cfg.max_order), esp_method);
    case KernelFamily::hull: break;
    }
    throw std::invalid_argument("initial_additive_kernel: hull is not an additive kernel");
}

/// Additive kernel over orders 1..max_order carrying the length-scales and
/// order variances of `fitted` (e.g. a GAM or SE optimum); orders that
/// `fitted` lacks get variance `floor`. The default floor is far below
/// rounding, so the embedded kernel evaluates to the same Gram matrix.
inline constexpr double kEmbeddingFloor = 1e-300;

inline AdditiveKernelSpec embed_in_additive(const AdditiveKernelSpec& fitted, int max_order,
                                            double floor = kEmbeddingFloor) {
    if (fitted.max_order() > max_order)
        throw std::invalid_argument("embed_in_additive: fitted kernel has orders above " + std::to_string(max_order));
    std::vector<double> variances(static_cast<std::size_t>(max_order), floor);
    for (int n = fitted.min_order(); n <= fitted.max_order(); ++n)
        variances[static_cast<std::size_t>(n - 1)] = fitted.order_variance(n);
    return AdditiveKernelSpec(fitted.length_scales(), OrderVariances(std::move(variances)), 1, fitted.esp_method());
}

template <CovarianceKernel K>
struct OptimizationRun {
    K kernel;
    NoiseModel noise;
    LbfgsResult result;
};

/// One L-BFGS run of the NLL on already-standardized data.
template <CovarianceKernel K>
OptimizationRun<K> optimize_hyperparameters(const Dataset& data, const K& structure, const PackedParams& start,
                                            const FitConfig& cfg) {
    Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        const auto r = neg_log_marginal_likelihood(structure, x, data, true);
        grad = r.gradient;
        return r.value;
    };
    auto result = lbfgs_minimize(objective, start, cfg);
    auto [kernel, noise] = unpack(result.x, structure);
    noise.constant_mean = data.targets.mean();
    return {std::move(kernel), noise, std::move(result)};
}

template <CovarianceKernel K>
OptimizationRun<K> optimize_hyperparameters(const Dataset& data, const K& kernel, const NoiseModel& noise,
                                            const FitConfig& cfg) {
    return optimize_hyperparameters(data, kernel, pack(kernel, noise), cfg);
}

/// Start of restart `index`: the default start for index 0, otherwise the
/// default plus independent standard-normal offsets on every coordinate.
inline PackedParams restart_start(const PackedParams& base, std::uint64_t seed, int index) {
    if (index == 0) return base;
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    PackedParams p = base;
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += normal(rng);
    return p;
}

struct RestartOutcome {
    int index = 0;
    bool ok = false;
    double nll = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    std::string error;
};

template <CovarianceKernel K>
struct FitResult {
    TrainedModel<K> model;
    std::vector<RestartOutcome> restarts;
};

/// Standardizes `data`, runs 1 + cfg.restarts optimizations starting from
/// `initial` and returns the posterior for the lowest final NLL (ties go to
/// the lower restart index).
template <CovarianceKernel K>
FitResult<K> fit_kernel(const Dataset& data, const K& initial, const FitConfig& cfg,
                        const NoiseModel& initial_noise = NoiseModel{kDefaultNoiseVariance, 0.0}) {
    cfg.validate();
    data.validate();
    if (data.dims() != initial.dims()) throw std::invalid_argument("fit: dataset dimension does not match kernel");
    const auto [std_data, stats] = standardize(data);
    const PackedParams base = pack(initial, initial_noise);

    std::vector<RestartOutcome> outcomes;
    std::optional<OptimizationRun<K>> best;
    for (int r = 0; r <= cfg.restarts; ++r) {
        RestartOutcome o;
        o.index = r;
        try {
            auto run = optimize_hyperparameters(std_data, initial, restart_start(base, cfg.seed, r), cfg);
            o.ok = true;
            o.nll = run.result.value;
            o.iterations = run.result.iterations;
            o.converged = run.result.converged;
            if (!best || o.nll < best->result.value) best = std::move(run);
        } catch (const NumericalFailure& e) {
            o.error = e.what();
        } catch (const std::invalid_argument& e) {
            o.error = e.what();
        }
        outcomes.push_back(std::move(o));
    }
    if (!best) {
        std::ostringstream os;
        os << "all " << outcomes.size() << " optimization runs failed:";
        for (const auto& o : outcomes) os << " [restart " << o.index << ": " << o.error << ']';
        throw NumericalFailure(os.str());
    }
    int winner = 0;
    for (const auto& o : outcomes)
        if (o.ok && o.nll == best->result.value) {
            winner = o.index;
            break;
        }
    auto model = fit_posterior(std_data, best->kernel, best->noise, stats);
    model.column_names = data.column_names;
    model.diagnostics.final_nll = best->result.value;
    model.diagnostics.iterations = best->result.iterations;
    model.diagnostics.restart_index = winner;
    model.diagnostics.converged = best->result.converged;
    return {std::move(model), std::move(outcomes)};
}

/// Additive GP over orders 1..min(D, max_order) with the standard protocol.
inline TrainedModel<AdditiveKernelSpec> fit(const Dataset& data, const FitConfig& cfg,
                                            EspMethod esp_method = EspMethod::dp) {
    return fit_kernel(data, initial_additive_kernel(KernelFamily::additive, data.dims(), cfg, esp_method), cfg).model;
}

using AnyModel = std::variant<TrainedModel<AdditiveKernelSpec>, TrainedModel<HullKernelSpec>>;

struct AnyFitResult {
    AnyModel model;
    std::vector<RestartOutcome> restarts;
};

inline AnyFitResult fit_family(const Dataset& data, KernelFamily family, const FitConfig& cfg,
                               EspMethod esp_method = EspMethod::dp) {
    if (family == KernelFamily::hull) {
        auto r = fit_kernel(data, default_hull_spec(data.dims()), cfg);
        return {std::move(r.model), std::move(r.restarts)};
    }
    auto r = fit_kernel(data, initial_additive_kernel(family, data.dims(), cfg, esp_method), cfg);
    return {std::move(r.model), std::move(r.restarts)};
}

} // namespace addgp
