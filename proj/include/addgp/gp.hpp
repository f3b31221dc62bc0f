#pragma once

// Exact GP regression on top of any CovarianceKernel: Gram assembly with
// hyperparameter derivatives, the negative log marginal likelihood and its
// gradient, the posterior, low-order component posteriors and the per-order
// variance report.

#include "addgp/data.hpp"
#include "addgp/error.hpp"
#include "addgp/kernel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

namespace addgp {

struct NoiseModel {
    double noise_variance = 0.1;
    double constant_mean = 0.0;

    void validate() const {
        if (!(std::isfinite(noise_variance) && noise_variance > 0.0))
            throw std::invalid_argument("NoiseModel: noise variance must be positive and finite");
        if (!std::isfinite(constant_mean)) throw std::invalid_argument("NoiseModel: constant mean must be finite");
    }
};

// ---------------------------------------------------------------- Gram matrices

template <CovarianceKernel K>
Eigen::MatrixXd gram(const RowMatrix& a, const RowMatrix& b, const K& kernel) {
    if (a.cols() != kernel.dims() || b.cols() != kernel.dims())
        throw std::invalid_argument("gram: inputs must have " + std::to_string(kernel.dims()) + " columns");
    typename K::Workspace ws;
    Eigen::MatrixXd out(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.rows(); ++j) out(i, j) = kernel.value(row_span(a, i), row_span(b, j), ws);
    return out;
}

/// Symmetric Gram matrix of a with itself; the lower triangle is mirrored.
template <CovarianceKernel K>
Eigen::MatrixXd gram(const RowMatrix& a, const K& kernel) {
    if (a.cols() != kernel.dims())
        throw std::invalid_argument("gram: inputs must have " + std::to_string(kernel.dims()) + " columns");
    typename K::Workspace ws;
    const Eigen::Index n = a.rows();
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = kernel.value(row_span(a, i), row_span(a, j), ws);
            out(i, j) = v;
            out(j, i) = v;
        }
    return out;
}

struct GramWithGrads {
    /// K + noise_variance * I.
    Eigen::MatrixXd covariance;
    /// d covariance / d theta for each kernel log parameter, then log noise variance.
    std::vector<Eigen::MatrixXd> grads;
};

template <CovarianceKernel K>
GramWithGrads gram_with_grads(const RowMatrix& a, const K& kernel, const NoiseModel& noise) {
    if (a.cols() != kernel.dims())
        throw std::invalid_argument("gram_with_grads: inputs must have " + std::to_string(kernel.dims()) + " columns");
    const Eigen::Index n = a.rows();
    const int p = kernel.num_params();
    GramWithGrads out{Eigen::MatrixXd(n, n), std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(p) + 1, Eigen::MatrixXd(n, n))};
    typename K::Workspace ws;
    std::vector<double> g(static_cast<std::size_t>(p));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = kernel.value_and_gradient(row_span(a, i), row_span(a, j), g, ws);
            out.covariance(i, j) = out.covariance(j, i) = v;
            for (int t = 0; t < p; ++t) out.grads[static_cast<std::size_t>(t)](i, j) = out.grads[static_cast<std::size_t>(t)](j, i) = g[static_cast<std::size_t>(t)];
        }
    out.covariance.diagonal().array() += noise.noise_variance;
    out.grads.back() = noise.noise_variance * Eigen::MatrixXd::Identity(n, n);
    return out;
}

/// sum_ij weights_ij * dK_ij / d theta for every kernel log parameter, without
/// materializing the derivative matrices. weights must be symmetric.
template <CovarianceKernel K>
Eigen::VectorXd contract_gram_gradient(const RowMatrix& a, const K& kernel, const Eigen::MatrixXd& weights) {
    const Eigen::Index n = a.rows();
    const int p = kernel.num_params();
    typename K::Workspace ws;
    std::vector<double> g(static_cast<std::size_t>(p));
    Eigen::VectorXd total = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd row_total(p);
    for (Eigen::Index i = 0; i < n; ++i) {
        row_total.setZero();
        for (Eigen::Index j = 0; j <= i; ++j) {
            kernel.value_and_gradient(row_span(a, i), row_span(a, j), g, ws);
            const double w = (i == j ? 1.0 : 2.0) * weights(i, j);
            for (int t = 0; t < p; ++t) row_total[t] += w * g[static_cast<std::size_t>(t)];
        }
        total += row_total;
    }
    return total;
}

// ---------------------------------------------------------------- factorization

struct JitteredCholesky {
    Eigen::MatrixXd lower;
    double jitter = 0.0;
};

/// Jitter schedule relative to the mean diagonal: 1e-10, 1e-9, ..., 1e-4.
inline constexpr double kJitterStart = 1e-10;
inline constexpr double kJitterMax = 1e-4;

/// Cholesky of `cov` + jitter * I, escalating the jitter tenfold on failure.
inline JitteredCholesky cholesky_with_jitter(const Eigen::MatrixXd& cov) {
    if (cov.rows() != cov.cols() || cov.rows() == 0) throw std::invalid_argument("cholesky: need a non-empty square matrix");
    const double mean_diag = cov.diagonal().mean();
    std::vector<double> tried;
    if (!(std::isfinite(mean_diag) && mean_diag > 0.0))
        throw NumericalFailure("covariance has a non-positive or non-finite diagonal", tried);
    Eigen::MatrixXd work = cov;
    double previous = 0.0;
    for (double rel = kJitterStart; rel <= kJitterMax * (1 + 1e-9); rel *= 10.0) {
        const double jitter = rel * mean_diag;
        work.diagonal().array() += jitter - previous;
        previous = jitter;
        tried.push_back(jitter);
        Eigen::LLT<Eigen::MatrixXd> llt(work);
        if (llt.info() != Eigen::Success) continue;
        Eigen::MatrixXd l = llt.matrixL();
        if (!l.allFinite() || (l.diagonal().array() <= 0.0).any()) continue;
        return {std::move(l), jitter};
    }
    throw NumericalFailure("Cholesky factorization failed after jitter escalation", tried);
}

inline double log_det_from_cholesky(const Eigen::MatrixXd& lower) {
    return 2.0 * lower.diagonal().array().log().sum();
}

// ---------------------------------------------------------------- likelihood

struct NllResult {
    double value = 0.0;
    /// One entry per kernel log parameter, then log noise variance.
    Eigen::VectorXd gradient;
};

/// 0.5 r^T K_y^{-1} r + 0.5 log|K_y| + N/2 log(2 pi), r = y - mean(y),
/// K_y = K + noise * I (+ jitter). `packed` holds the kernel's log parameters
/// followed by the log noise variance; `structure` supplies everything else
/// (dimension, active orders, ESP method).
template <CovarianceKernel K>
NllResult neg_log_marginal_likelihood(const K& structure, const Eigen::VectorXd& packed, const Dataset& data,
                                      bool with_gradient = true) {
    const int p = structure.num_params();
    if (packed.size() != p + 1)
        throw std::invalid_argument("NLL: expected " + std::to_string(p + 1) + " packed parameters");
    if (!packed.allFinite()) throw std::invalid_argument("NLL: non-finite parameters");
    if (data.size() < 1) throw std::invalid_argument("NLL: empty dataset");
    if (data.dims() != structure.dims()) throw std::invalid_argument("NLL: dataset dimension does not match kernel");

    const K kernel = structure.with_log_params(packed.head(p));
    const double noise = std::exp(packed[p]);
    const Eigen::Index n = data.size();

    Eigen::MatrixXd ky = gram(data.inputs, kernel);
    ky.diagonal().array() += noise;
    const auto chol = cholesky_with_jitter(ky);
    const auto llt_l = chol.lower.triangularView<Eigen::Lower>();

    const Eigen::VectorXd r = data.targets.array() - data.targets.mean();
    Eigen::VectorXd alpha = llt_l.solve(r);
    llt_l.transpose().solveInPlace(alpha);

    NllResult out;
    out.value = 0.5 * r.dot(alpha) + 0.5 * log_det_from_cholesky(chol.lower) +
                0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    if (!std::isfinite(out.value)) throw NumericalFailure("NLL is not finite");
    if (!with_gradient) return out;

    // dNLL/dtheta = 0.5 tr((K_y^{-1} - alpha alpha^T) dK_y/dtheta)
    Eigen::MatrixXd w = Eigen::MatrixXd::Identity(n, n);
    llt_l.solveInPlace(w);
    llt_l.transpose().solveInPlace(w);
    w.noalias() -= alpha * alpha.transpose();

    out.gradient.resize(p + 1);
    out.gradient.head(p) = 0.5 * contract_gram_gradient(data.inputs, kernel, w);
    out.gradient[p] = 0.5 * noise * w.trace();
    return out;
}

// ---------------------------------------------------------------- posterior

struct FitDiagnostics {
    double final_nll = 0.0;
    int iterations = 0;
    int restart_index = 0;
    bool converged = false;
};

template <CovarianceKernel K>
struct TrainedModel {
    K kernel;
    NoiseModel noise;
    /// Training inputs in the model's (standardized) coordinates.
    RowMatrix train_inputs;
    /// Lower Cholesky factor of K + noise * I + jitter * I.
    Eigen::MatrixXd chol_factor;
    double jitter = 0.0;
    /// (K_y + jitter)^{-1} (y - mean).
    Eigen::VectorXd dual_weights;
    StandardizationStats standardization;
    FitDiagnostics diagnostics;
    /// Optional labels carried over from the training data.
    std::vector<std::string> column_names;

    int dims() const { return kernel.dims(); }
};

/// NLL of the stored posterior, recomputed from the factor and the dual weights.
template <CovarianceKernel K>
double model_nll(const TrainedModel<K>& m) {
    const auto l = m.chol_factor.template triangularView<Eigen::Lower>();
    // y - mean = L L^T alpha
    const Eigen::VectorXd residual = l * (l.transpose() * m.dual_weights);
    return 0.5 * residual.dot(m.dual_weights) + 0.5 * log_det_from_cholesky(m.chol_factor) +
           0.5 * static_cast<double>(m.train_inputs.rows()) * std::log(2.0 * std::numbers::pi);
}

/// Targets of the training set in model (standardized) units, reconstructed from the posterior.
template <CovarianceKernel K>
Eigen::VectorXd training_targets(const TrainedModel<K>& m) {
    const auto l = m.chol_factor.template triangularView<Eigen::Lower>();
    Eigen::VectorXd y = l * (l.transpose() * m.dual_weights);
    return y.array() + m.noise.constant_mean;
}

/// Factorizes K + noise I and solves for the dual weights. `data` must already
/// be in model coordinates; `stats` records how they were obtained.
template <CovarianceKernel K>
TrainedModel<K> fit_posterior(const Dataset& data, const K& kernel, const NoiseModel& noise,
                              std::optional<StandardizationStats> stats = std::nullopt) {
    data.validate();
    noise.validate();
    if (data.dims() != kernel.dims()) throw std::invalid_argument("fit_posterior: dataset dimension does not match kernel");
    Eigen::MatrixXd ky = gram(data.inputs, kernel);
    ky.diagonal().array() += noise.noise_variance;
    auto chol = cholesky_with_jitter(ky);
    Eigen::VectorXd alpha = chol.lower.triangularView<Eigen::Lower>().solve((data.targets.array() - noise.constant_mean).matrix());
    chol.lower.transpose().triangularView<Eigen::Upper>().solveInPlace(alpha);

    TrainedModel<K> m{kernel,
                      noise,
                      data.inputs,
                      std::move(chol.lower),
                      chol.jitter,
                      std::move(alpha),
                      stats ? *stats : StandardizationStats::identity(data.dims()),
                      {},
                      data.column_names};
    m.diagnostics.final_nll = model_nll(m);
    return m;
}

struct PredictiveDistribution {
    Eigen::VectorXd means;
    Eigen::VectorXd variances;
    bool includes_noise = false;
};

/// Posterior at raw (unstandardized) test inputs, reported in target units.
template <CovarianceKernel K>
PredictiveDistribution predict(const TrainedModel<K>& m, const RowMatrix& x_star, bool include_noise) {
    if (x_star.cols() != m.dims())
        throw std::invalid_argument("predict: expected " + std::to_string(m.dims()) + " input columns, got " +
                                    std::to_string(x_star.cols()));
    const RowMatrix xs = m.standardization.apply_inputs(x_star);
    const Eigen::MatrixXd k_cross = gram(xs, m.train_inputs, m.kernel);  // M x N
    Eigen::VectorXd mean = (k_cross * m.dual_weights).array() + m.noise.constant_mean;

    Eigen::MatrixXd v = k_cross.transpose();
    m.chol_factor.template triangularView<Eigen::Lower>().solveInPlace(v);
    const double prior = m.kernel.prior_variance();
    typename K::Workspace ws;
    Eigen::VectorXd var(xs.rows());
    for (Eigen::Index i = 0; i < xs.rows(); ++i) {
        const double kxx = m.kernel.value(row_span(xs, i), row_span(xs, i), ws);
        var[i] = std::max(kxx - v.col(i).squaredNorm(), 1e-12 * prior);
        if (include_noise) var[i] += m.noise.noise_variance;
    }
    const double s = m.standardization.target_std;
    return {destandardize_targets(mean, m.standardization), var * (s * s), include_noise};
}

// ---------------------------------------------------------------- components

/// Posterior mean, in target units without the constant mean, of the single
/// kernel term sigma_n^2 prod_{d in dims} k_d. `dims` are zero-based.
inline Eigen::VectorXd component_posterior(const TrainedModel<AdditiveKernelSpec>& m, int order,
                                           const std::vector<int>& dims, const RowMatrix& x_star) {
    const auto& spec = m.kernel;
    if (!spec.order_active(order))
        throw std::invalid_argument("component_posterior: order " + std::to_string(order) + " is not active in the model");
    if (static_cast<int>(dims.size()) != order)
        throw std::invalid_argument("component_posterior: need exactly " + std::to_string(order) + " dimensions");
    const std::set<int> unique(dims.begin(), dims.end());
    if (unique.size() != dims.size()) throw std::invalid_argument("component_posterior: repeated dimension");
    for (int d : dims)
        if (d < 0 || d >= spec.dims())
            throw std::invalid_argument("component_posterior: dimension " + std::to_string(d) + " out of range");
    if (x_star.cols() != spec.dims()) throw std::invalid_argument("component_posterior: input dimension mismatch");

    const RowMatrix xs = m.standardization.apply_inputs(x_star);
    const double variance = spec.order_variance(order);
    Eigen::VectorXd out(xs.rows());
    for (Eigen::Index i = 0; i < xs.rows(); ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < m.train_inputs.rows(); ++j) {
            double prod = variance;
            for (int d : dims) {
                const double l = spec.length_scales()[static_cast<std::size_t>(d)];
                const double diff = (xs(i, d) - m.train_inputs(j, d)) / l;
                prod *= std::exp(-0.5 * diff * diff);
            }
            acc += prod * m.dual_weights[j];
        }
        out[i] = acc * m.standardization.target_std;
    }
    return out;
}

/// Training inputs in raw units.
template <CovarianceKernel K>
RowMatrix raw_train_inputs(const TrainedModel<K>& m) {
    RowMatrix x = m.train_inputs;
    for (Eigen::Index d = 0; d < x.cols(); ++d)
        x.col(d) = x.col(d).array() * m.standardization.input_stds[d] + m.standardization.input_means[d];
    return x;
}

struct ResidualPoints {
    Eigen::VectorXd x;         // raw coordinate of the chosen dimension
    Eigen::VectorXd observed;  // training target
    Eigen::VectorXd residual;  // target minus the other dimensions' first-order components
};

/// Training targets with the first-order component means of every other
/// dimension subtracted; only first-order terms are removed.
inline ResidualPoints first_order_residuals(const TrainedModel<AdditiveKernelSpec>& m, int dim) {
    if (!m.kernel.order_active(1)) throw std::invalid_argument("first_order_residuals: model has no first-order terms");
    if (dim < 0 || dim >= m.dims()) throw std::invalid_argument("first_order_residuals: dimension out of range");
    const RowMatrix raw = raw_train_inputs(m);
    ResidualPoints out;
    out.x = raw.col(dim);
    out.observed = destandardize_targets(training_targets(m), m.standardization);
    out.residual = out.observed;
    for (int d = 0; d < m.dims(); ++d)
        if (d != dim) out.residual -= component_posterior(m, 1, {d}, raw);
    return out;
}

// ---------------------------------------------------------------- order report

struct OrderReport {
    /// shares[n-1] is the percentage of prior variance from order n.
    std::vector<double> shares;
};

/// Share of order n is proportional to sigma_n^2 C(D, n), the order's prior
/// variance at zero lag; the shares sum to 100.
inline OrderReport order_report(const AdditiveKernelSpec& spec) {
    OrderReport r;
    r.shares.assign(static_cast<std::size_t>(spec.max_order()), 0.0);
    double total = 0.0;
    for (int n = spec.min_order(); n <= spec.max_order(); ++n) {
        const double v = spec.order_variance(n) * binomial(spec.dims(), n);
        r.shares[static_cast<std::size_t>(n - 1)] = v;
        total += v;
    }
    for (auto& s : r.shares) s = 100.0 * s / total;
    return r;
}

inline OrderReport order_report(const TrainedModel<AdditiveKernelSpec>& m) { return order_report(m.kernel); }

// ---------------------------------------------------------------- prior draws

/// `count` draws of f at the rows of x from the zero-mean GP prior. Drawn
/// through the eigendecomposition of the Gram matrix, so each draw lies in its
/// numerical range (eigenvalues below 1e-12 of the largest are dropped).
template <CovarianceKernel K>
std::vector<Eigen::VectorXd> sample_prior(const K& kernel, const RowMatrix& x, std::uint64_t seed, int count) {
    if (count < 0) throw std::invalid_argument("sample_prior: negative count");
    const Eigen::MatrixXd cov = gram(x, kernel);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericalFailure("sample_prior: eigendecomposition failed");
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const double cutoff = 1e-12 * std::max(lambda.maxCoeff(), 0.0);
    Eigen::MatrixXd root = eig.eigenvectors();
    for (Eigen::Index i = 0; i < lambda.size(); ++i) root.col(i) *= lambda[i] > cutoff ? std::sqrt(lambda[i]) : 0.0;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Eigen::VectorXd> draws;
    draws.reserve(static_cast<std::size_t>(count));
    Eigen::VectorXd u(x.rows());
    for (int c = 0; c < count; ++c) {
        for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = normal(rng);
        draws.emplace_back(root * u);
    }
    return draws;
}

} // namespace addgp
