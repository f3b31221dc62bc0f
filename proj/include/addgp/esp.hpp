#pragma once

// Elementary symmetric polynomials e_0..e_r of a vector z, and the same
// polynomials with one variable removed. e_n(z) is the n-th order additive
// kernel when z holds the one-dimensional base kernel values.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace addgp {

enum class EspMethod { dp, newton_girard };

inline const char* to_string(EspMethod m) {
    return m == EspMethod::dp ? "dp" : "newton-girard";
}

inline EspMethod parse_esp_method(const std::string& name) {
    if (name == "dp") return EspMethod::dp;
    if (name == "newton-girard" || name == "ng") return EspMethod::newton_girard;
    throw std::invalid_argument("unknown ESP method '" + name + "' (expected dp or newton-girard)");
}

/// Power sums s_1..s_r; values[k-1] holds s_k.
struct PowerSums {
    std::vector<double> values;

    double s(int k) const { return values.at(static_cast<std::size_t>(k - 1)); }
    int order() const { return static_cast<int>(values.size()); }
};

/// e_0..e_r; values[n] holds e_n and values[0] is always 1.
struct EspVector {
    std::vector<double> values;

    double operator[](std::size_t n) const { return values[n]; }
    int order() const { return static_cast<int>(values.size()) - 1; }
    std::span<const double> span() const { return values; }
};

namespace detail {

// Divide-out stops being trusted once the magnitudes feeding a term exceed
// the term itself by this factor (about six digits lost).
inline constexpr double kMaxExclusionAmplification = 1e6;

inline void check_order(std::size_t dims, int r) {
    if (dims == 0) throw std::invalid_argument("ESP: empty input vector");
    if (r < 1 || static_cast<std::size_t>(r) > dims)
        throw std::invalid_argument("ESP: order " + std::to_string(r) + " outside [1, " +
                                    std::to_string(dims) + "]");
}

inline void power_sums_into(std::span<const double> z, int r, std::span<double> out) {
    std::fill(out.begin(), out.begin() + r, 0.0);
    for (double zi : z) {
        double p = 1.0;
        for (int k = 0; k < r; ++k) {
            p *= zi;
            out[k] += p;
        }
    }
}

// Subtraction-free recurrence e_n(z_1..z_m) = e_n(z_1..z_{m-1}) + z_m e_{n-1}(z_1..z_{m-1}).
// Variable `skip` (if in range) is left out. out must hold r + 1 values.
inline void esp_dp_into(std::span<const double> z, int r, std::span<double> out,
                        std::ptrdiff_t skip = -1) {
    out[0] = 1.0;
    std::fill(out.begin() + 1, out.begin() + r + 1, 0.0);
    int seen = 0;
    for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(z.size()); ++m) {
        if (m == skip) continue;
        ++seen;
        const double zm = z[static_cast<std::size_t>(m)];
        for (int n = std::min(seen, r); n >= 1; --n) out[n] += zm * out[n - 1];
    }
}

// Newton-Girard: e_n = (1/n) sum_{k=1}^n (-1)^{k-1} e_{n-k} s_k.
// scratch must hold r values.
inline void esp_newton_girard_into(std::span<const double> z, int r, std::span<double> out,
                                   std::span<double> scratch) {
    power_sums_into(z, r, scratch);
    out[0] = 1.0;
    for (int n = 1; n <= r; ++n) {
        double acc = 0.0;
        double sign = 1.0;
        for (int k = 1; k <= n; ++k) {
            acc += sign * out[n - k] * scratch[k - 1];
            sign = -sign;
        }
        out[n] = acc / n;
    }
}

// e^{(-j)}_0..e^{(-j)}_{r_out} from the full e_0..e_{r_out} by the divide-out
// recurrence e^{(-j)}_k = e_k - z_j e^{(-j)}_{k-1}. Falls back to a fresh
// subtraction-free pass over z without z_j when cancellation gets severe.
// Returns true when the fallback was taken.
inline bool esp_excluding_into(std::span<const double> z, std::span<const double> esp,
                               std::size_t j, int r_out, std::span<double> out) {
    const double zj = z[j];
    out[0] = 1.0;
    double magnitude = 1.0;  // bound on the size of everything folded into out[k-1]
    for (int k = 1; k <= r_out; ++k) {
        const double v = esp[k] - zj * out[k - 1];
        magnitude = std::abs(esp[k]) + std::abs(zj) * magnitude;
        if (!(std::abs(v) * kMaxExclusionAmplification >= magnitude) ||
            std::abs(v) < 1e-12 * std::abs(esp[k])) {
            esp_dp_into(z, r_out, out, static_cast<std::ptrdiff_t>(j));
            return true;
        }
        out[k] = v;
    }
    return false;
}

} // namespace detail

inline PowerSums power_sums(std::span<const double> z, int r) {
    detail::check_order(z.size(), r);
    PowerSums ps{std::vector<double>(static_cast<std::size_t>(r))};
    detail::power_sums_into(z, r, ps.values);
    return ps;
}

inline EspVector esp_newton_girard(std::span<const double> z, int r) {
    detail::check_order(z.size(), r);
    EspVector e{std::vector<double>(static_cast<std::size_t>(r) + 1)};
    std::vector<double> scratch(static_cast<std::size_t>(r));
    detail::esp_newton_girard_into(z, r, e.values, scratch);
    return e;
}

inline EspVector esp_dp(std::span<const double> z, int r) {
    detail::check_order(z.size(), r);
    EspVector e{std::vector<double>(static_cast<std::size_t>(r) + 1)};
    detail::esp_dp_into(z, r, e.values);
    return e;
}

inline EspVector esp(std::span<const double> z, int r, EspMethod method) {
    return method == EspMethod::dp ? esp_dp(z, r) : esp_newton_girard(z, r);
}

/// Elementary symmetric polynomials of z with z_j removed (j is zero-based),
/// up to order min(r, D - 1). Entry n is the partial derivative of e_{n+1}(z)
/// with respect to z_j.
inline EspVector esp_excluding(std::span<const double> z, const EspVector& full, std::size_t j,
                               int r) {
    detail::check_order(z.size(), r);
    if (j >= z.size())
        throw std::invalid_argument("esp_excluding: index " + std::to_string(j) +
                                    " out of range for " + std::to_string(z.size()) + " variables");
    const int r_out = std::min(r, static_cast<int>(z.size()) - 1);
    if (full.order() < r_out)
        throw std::invalid_argument("esp_excluding: full ESP vector has too few orders");
    EspVector out{std::vector<double>(static_cast<std::size_t>(r_out) + 1)};
    detail::esp_excluding_into(z, full.values, j, r_out, out.values);
    return out;
}

} // namespace addgp
