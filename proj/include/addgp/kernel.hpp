#pragma once

// Additive kernels over squared-exponential base kernels.
//
// Every base kernel has unit amplitude; the variance of the n-th order
// interactions is carried entirely by sigma_n^2:
//
//   k(x, x') = sum_n sigma_n^2 e_n(z),   z_d = exp(-(x_d - x'_d)^2 / (2 l_d^2))
//
// A spec may keep only a contiguous band of orders [min_order, max_order]
// active. A first-order-only spec is a GP-GAM; an order-D-only spec is the
// ARD squared-exponential kernel.

#include "addgp/esp.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <iostream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace addgp {

namespace detail {

inline void require_positive_finite(const std::vector<double>& v, const char* what) {
    if (v.empty()) throw std::invalid_argument(std::string(what) + ": must be non-empty");
    for (double x : v)
        if (!(std::isfinite(x) && x > 0.0))
            throw std::invalid_argument(std::string(what) + ": entries must be positive and finite");
}

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                                    " vs " + std::to_string(b) + ")");
}

} // namespace detail

class LengthScales {
public:
    explicit LengthScales(std::vector<double> values) : values_(std::move(values)) {
        detail::require_positive_finite(values_, "LengthScales");
    }
    LengthScales(std::size_t dims, double value) : LengthScales(std::vector<double>(dims, value)) {}

    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t d) const { return values_[d]; }
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<double> values_;
};

class OrderVariances {
public:
    explicit OrderVariances(std::vector<double> values) : values_(std::move(values)) {
        detail::require_positive_finite(values_, "OrderVariances");
    }
    OrderVariances(std::size_t count, double value) : OrderVariances(std::vector<double>(count, value)) {}

    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<double> values_;
};

/// max(order) used when the caller does not ask for one.
inline constexpr int kDefaultMaxOrder = 10;

/// Picks the highest interaction order for D inputs. Without a request this is
/// min(D, 10); a request above D is clamped with a warning on `warn`.
inline int resolve_max_order(int dims, std::optional<int> requested, std::ostream* warn = &std::clog) {
    if (dims < 1) throw std::invalid_argument("resolve_max_order: dims must be >= 1");
    if (!requested) return std::min(dims, kDefaultMaxOrder);
    if (*requested < 1) throw std::invalid_argument("max order must be >= 1");
    if (*requested > dims) {
        if (warn)
            *warn << "warning: max order " << *requested << " exceeds input dimension " << dims
                  << "; clamped to " << dims << '\n';
        return dims;
    }
    return *requested;
}

/// One-dimensional squared-exponential kernel with unit amplitude.
inline double base_kernel(double x, double x_prime, double l) {
    if (!(std::isfinite(x) && std::isfinite(x_prime)))
        throw std::invalid_argument("base_kernel: non-finite input");
    if (!(std::isfinite(l) && l > 0.0)) throw std::invalid_argument("base_kernel: length-scale must be > 0");
    const double r = (x - x_prime) / l;
    return std::exp(-0.5 * r * r);
}

inline std::vector<double> base_row(std::span<const double> x, std::span<const double> x_prime,
                                    const LengthScales& ls) {
    detail::require_same_size(x.size(), x_prime.size(), "base_row");
    detail::require_same_size(x.size(), ls.size(), "base_row");
    std::vector<double> z(x.size());
    for (std::size_t d = 0; d < x.size(); ++d) z[d] = base_kernel(x[d], x_prime[d], ls[d]);
    return z;
}

class AdditiveKernelSpec {
public:
    /// Scratch buffers reused across kernel evaluations.
    struct Workspace {
        std::vector<double> z, dz, esp, excl, scratch;
    };

    AdditiveKernelSpec(LengthScales length_scales, OrderVariances order_variances, int min_order = 1,
                       EspMethod esp_method = EspMethod::dp)
        : length_scales_(std::move(length_scales)),
          order_variances_(std::move(order_variances)),
          min_order_(min_order),
          esp_method_(esp_method) {
        if (min_order_ < 1) throw std::invalid_argument("AdditiveKernelSpec: min order must be >= 1");
        if (max_order() > dims())
            throw std::invalid_argument("AdditiveKernelSpec: max order " + std::to_string(max_order()) +
                                        " exceeds dimension " + std::to_string(dims()));
    }

    int dims() const { return static_cast<int>(length_scales_.size()); }
    int min_order() const { return min_order_; }
    int max_order() const { return min_order_ + static_cast<int>(order_variances_.size()) - 1; }
    int num_orders() const { return static_cast<int>(order_variances_.size()); }
    EspMethod esp_method() const { return esp_method_; }
    const LengthScales& length_scales() const { return length_scales_; }
    const OrderVariances& order_variances() const { return order_variances_; }

    bool order_active(int n) const { return n >= min_order_ && n <= max_order(); }
    /// sigma_n^2, or 0 for an inactive order.
    double order_variance(int n) const {
        return order_active(n) ? order_variances_[static_cast<std::size_t>(n - min_order_)] : 0.0;
    }

    AdditiveKernelSpec with_esp_method(EspMethod m) const {
        AdditiveKernelSpec copy = *this;
        copy.esp_method_ = m;
        return copy;
    }

    // --- hyperparameter vector: log l_1..log l_D, log sigma^2 per active order ---

    int num_params() const { return dims() + num_orders(); }

    Eigen::VectorXd log_params() const {
        Eigen::VectorXd p(num_params());
        for (int d = 0; d < dims(); ++d) p[d] = std::log(length_scales_[static_cast<std::size_t>(d)]);
        for (int i = 0; i < num_orders(); ++i)
            p[dims() + i] = std::log(order_variances_[static_cast<std::size_t>(i)]);
        return p;
    }

    AdditiveKernelSpec with_log_params(const Eigen::VectorXd& p) const {
        if (p.size() != num_params())
            throw std::invalid_argument("AdditiveKernelSpec: expected " + std::to_string(num_params()) +
                                        " log parameters, got " + std::to_string(p.size()));
        std::vector<double> ls(static_cast<std::size_t>(dims()));
        std::vector<double> ov(static_cast<std::size_t>(num_orders()));
        for (int d = 0; d < dims(); ++d) ls[static_cast<std::size_t>(d)] = std::exp(p[d]);
        for (int i = 0; i < num_orders(); ++i) ov[static_cast<std::size_t>(i)] = std::exp(p[dims() + i]);
        return AdditiveKernelSpec(LengthScales(std::move(ls)), OrderVariances(std::move(ov)), min_order_,
                                  esp_method_);
    }

    std::vector<std::string> param_names() const {
        std::vector<std::string> names;
        for (int d = 0; d < dims(); ++d) names.push_back("log_lengthscale_" + std::to_string(d + 1));
        for (int n = min_order_; n <= max_order(); ++n) names.push_back("log_order_variance_" + std::to_string(n));
        return names;
    }

    /// Diagonal value k(x, x) = sum_n sigma_n^2 C(D, n).
    double prior_variance() const;

    double value(std::span<const double> a, std::span<const double> b, Workspace& ws) const {
        fill_z(a, b, ws, false);
        fill_esp(ws, max_order());
        double k = 0.0;
        for (int n = min_order_; n <= max_order(); ++n) k += order_variance(n) * ws.esp[static_cast<std::size_t>(n)];
        return k;
    }

    double value(std::span<const double> a, std::span<const double> b) const {
        Workspace ws;
        return value(a, b, ws);
    }

    /// Kernel value plus its gradient with respect to log_params().
    double value_and_gradient(std::span<const double> a, std::span<const double> b, std::span<double> grad,
                              Workspace& ws) const {
        const int D = dims();
        const int R = max_order();
        fill_z(a, b, ws, true);
        fill_esp(ws, R);
        double k = 0.0;
        for (int n = min_order_; n <= R; ++n) {
            const double term = order_variance(n) * ws.esp[static_cast<std::size_t>(n)];
            grad[static_cast<std::size_t>(D + n - min_order_)] = term;
            k += term;
        }
        ws.excl.resize(static_cast<std::size_t>(R));
        for (int d = 0; d < D; ++d) {
            const double dz = ws.dz[static_cast<std::size_t>(d)];
            if (dz == 0.0) {
                grad[static_cast<std::size_t>(d)] = 0.0;
                continue;
            }
            detail::esp_excluding_into(ws.z, ws.esp, static_cast<std::size_t>(d), R - 1, ws.excl);
            double dk_dz = 0.0;
            for (int n = min_order_; n <= R; ++n)
                dk_dz += order_variance(n) * ws.excl[static_cast<std::size_t>(n - 1)];
            grad[static_cast<std::size_t>(d)] = dk_dz * dz;
        }
        return k;
    }

private:
    void fill_z(std::span<const double> a, std::span<const double> b, Workspace& ws, bool with_derivative) const {
        detail::require_same_size(a.size(), static_cast<std::size_t>(dims()), "additive kernel");
        detail::require_same_size(b.size(), static_cast<std::size_t>(dims()), "additive kernel");
        ws.z.resize(a.size());
        if (with_derivative) ws.dz.resize(a.size());
        for (std::size_t d = 0; d < a.size(); ++d) {
            const double l = length_scales_[d];
            const double diff = a[d] - b[d];
            const double r2 = (diff * diff) / (l * l);
            const double z = std::exp(-0.5 * r2);
            ws.z[d] = z;
            // dz_d / d(log l_d)
            if (with_derivative) ws.dz[d] = z * r2;
        }
    }

    void fill_esp(Workspace& ws, int r) const {
        ws.esp.resize(static_cast<std::size_t>(r) + 1);
        if (esp_method_ == EspMethod::dp) {
            detail::esp_dp_into(ws.z, r, ws.esp);
        } else {
            ws.scratch.resize(static_cast<std::size_t>(r));
            detail::esp_newton_girard_into(ws.z, r, ws.esp, ws.scratch);
        }
    }

    LengthScales length_scales_;
    OrderVariances order_variances_;
    int min_order_;
    EspMethod esp_method_;
};

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return std::round(c);
}

inline double AdditiveKernelSpec::prior_variance() const {
    double v = 0.0;
    for (int n = min_order_; n <= max_order(); ++n) v += order_variance(n) * binomial(dims(), n);
    return v;
}

/// Additive kernel over orders 1..R, R = order_variances.size().
inline AdditiveKernelSpec make_additive_spec(std::vector<double> length_scales, std::vector<double> order_variances,
                                             EspMethod esp_method = EspMethod::dp) {
    return AdditiveKernelSpec(LengthScales(std::move(length_scales)), OrderVariances(std::move(order_variances)), 1,
                              esp_method);
}

/// First-order-only additive kernel (GP-GAM).
inline AdditiveKernelSpec make_gam_spec(std::vector<double> length_scales, double variance) {
    return AdditiveKernelSpec(LengthScales(std::move(length_scales)), OrderVariances(1, variance), 1);
}

/// Order-D-only additive kernel, i.e. the ARD squared-exponential kernel.
inline AdditiveKernelSpec make_squared_exp_spec(std::vector<double> length_scales, double variance) {
    const int D = static_cast<int>(length_scales.size());
    return AdditiveKernelSpec(LengthScales(std::move(length_scales)), OrderVariances(1, variance), D);
}

inline double additive_kernel(std::span<const double> x, std::span<const double> x_prime,
                              const AdditiveKernelSpec& spec) {
    return spec.value(x, x_prime);
}

/// dk / d sigma_n^2 = e_n(z), one entry per active order.
inline std::vector<double> kernel_grad_order_variances(std::span<const double> x, std::span<const double> x_prime,
                                                       const AdditiveKernelSpec& spec) {
    const auto z = base_row(x, x_prime, spec.length_scales());
    const EspVector e = esp(z, spec.max_order(), spec.esp_method());
    std::vector<double> g;
    for (int n = spec.min_order(); n <= spec.max_order(); ++n) g.push_back(e[static_cast<std::size_t>(n)]);
    return g;
}

/// dk / d log l_d for every input dimension.
inline std::vector<double> kernel_grad_length_scales(std::span<const double> x, std::span<const double> x_prime,
                                                     const AdditiveKernelSpec& spec) {
    std::vector<double> grad(static_cast<std::size_t>(spec.num_params()));
    AdditiveKernelSpec::Workspace ws;
    spec.value_and_gradient(x, x_prime, grad, ws);
    grad.resize(static_cast<std::size_t>(spec.dims()));
    return grad;
}

/// Product-form kernel v^2 prod_d (1 + alpha k_d): every order-n term is
/// weighted by alpha^n. Hyperparameters: log l_1..log l_D, log v^2, log alpha.
class HullKernelSpec {
public:
    struct Workspace {};

    HullKernelSpec(double amplitude, double alpha, LengthScales length_scales)
        : amplitude_(amplitude), alpha_(alpha), length_scales_(std::move(length_scales)) {
        if (!(std::isfinite(amplitude_) && amplitude_ > 0.0))
            throw std::invalid_argument("HullKernelSpec: amplitude must be > 0");
        if (!(std::isfinite(alpha_) && alpha_ >= 0.0)) throw std::invalid_argument("HullKernelSpec: alpha must be >= 0");
    }

    int dims() const { return static_cast<int>(length_scales_.size()); }
    double amplitude() const { return amplitude_; }
    double alpha() const { return alpha_; }
    const LengthScales& length_scales() const { return length_scales_; }

    int num_params() const { return dims() + 2; }

    Eigen::VectorXd log_params() const {
        if (alpha_ == 0.0) throw std::invalid_argument("HullKernelSpec: alpha = 0 has no log parameterization");
        Eigen::VectorXd p(num_params());
        for (int d = 0; d < dims(); ++d) p[d] = std::log(length_scales_[static_cast<std::size_t>(d)]);
        p[dims()] = std::log(amplitude_);
        p[dims() + 1] = std::log(alpha_);
        return p;
    }

    HullKernelSpec with_log_params(const Eigen::VectorXd& p) const {
        if (p.size() != num_params())
            throw std::invalid_argument("HullKernelSpec: expected " + std::to_string(num_params()) + " log parameters");
        std::vector<double> ls(static_cast<std::size_t>(dims()));
        for (int d = 0; d < dims(); ++d) ls[static_cast<std::size_t>(d)] = std::exp(p[d]);
        return HullKernelSpec(std::exp(p[dims()]), std::exp(p[dims() + 1]), LengthScales(std::move(ls)));
    }

    std::vector<std::string> param_names() const {
        std::vector<std::string> names;
        for (int d = 0; d < dims(); ++d) names.push_back("log_lengthscale_" + std::to_string(d + 1));
        names.push_back("log_amplitude");
        names.push_back("log_alpha");
        return names;
    }

    double prior_variance() const { return amplitude_ * std::pow(1.0 + alpha_, dims()); }

    double value(std::span<const double> a, std::span<const double> b, Workspace&) const { return value(a, b); }

    double value(std::span<const double> a, std::span<const double> b) const {
        check(a, b);
        double prod = 1.0;
        for (std::size_t d = 0; d < a.size(); ++d) {
            const double diff = (a[d] - b[d]) / length_scales_[d];
            prod *= 1.0 + alpha_ * std::exp(-0.5 * diff * diff);
        }
        return amplitude_ * prod;
    }

    double value_and_gradient(std::span<const double> a, std::span<const double> b, std::span<double> grad,
                              Workspace&) const {
        check(a, b);
        const std::size_t D = a.size();
        double prod = 1.0;
        double dlog_alpha = 0.0;
        for (std::size_t d = 0; d < D; ++d) {
            const double diff = (a[d] - b[d]) / length_scales_[d];
            const double r2 = diff * diff;
            const double z = std::exp(-0.5 * r2);
            const double factor = 1.0 + alpha_ * z;
            prod *= factor;
            // d log k / d log l_d; scaled by k below
            grad[d] = alpha_ * z * r2 / factor;
            dlog_alpha += alpha_ * z / factor;
        }
        const double k = amplitude_ * prod;
        for (std::size_t d = 0; d < D; ++d) grad[d] *= k;
        grad[D] = k;
        grad[D + 1] = k * dlog_alpha;
        return k;
    }

private:
    void check(std::span<const double> a, std::span<const double> b) const {
        detail::require_same_size(a.size(), static_cast<std::size_t>(dims()), "hull kernel");
        detail::require_same_size(b.size(), static_cast<std::size_t>(dims()), "hull kernel");
    }

    double amplitude_;
    double alpha_;
    LengthScales length_scales_;
};

inline double hull_kernel(std::span<const double> x, std::span<const double> x_prime, const HullKernelSpec& spec) {
    return spec.value(x, x_prime);
}

/// Requirements the GP machinery places on a covariance function.
template <class K>
concept CovarianceKernel = requires(const K& k, std::span<const double> a, std::span<double> g,
                                    typename K::Workspace& ws, const Eigen::VectorXd& p) {
    { k.dims() } -> std::convertible_to<int>;
    { k.num_params() } -> std::convertible_to<int>;
    { k.value(a, a, ws) } -> std::convertible_to<double>;
    { k.value_and_gradient(a, a, g, ws) } -> std::convertible_to<double>;
    { k.log_params() } -> std::convertible_to<Eigen::VectorXd>;
    { k.with_log_params(p) } -> std::same_as<K>;
    { k.prior_variance() } -> std::convertible_to<double>;
};

static_assert(CovarianceKernel<AdditiveKernelSpec>);
static_assert(CovarianceKernel<HullKernelSpec>);

} // namespace addgp
