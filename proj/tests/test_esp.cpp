#include "addgp/esp.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>
#include <vector>

using addgp::EspVector;
using addgp::oracle::close_rel;
using addgp::oracle::esp_bruteforce;

namespace {

std::vector<double> unit_interval_z(std::mt19937_64& rng, std::size_t D) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> z(D);
    for (auto& v : z) v = 1.0 - u(rng);  // (0, 1]
    return z;
}

} // namespace

TEST(PowerSums, DirectSummation) {
    const std::vector<double> z{1, 2, 3};
    const auto s = addgp::power_sums(z, 2);
    EXPECT_EQ(s.s(1), 6.0);
    EXPECT_EQ(s.s(2), 14.0);

    const std::vector<double> ones{1, 1, 1, 1};
    const auto s4 = addgp::power_sums(ones, 4);
    for (int k = 1; k <= 4; ++k) EXPECT_EQ(s4.s(k), 4.0);
}

TEST(PowerSums, OrderOutOfRangeThrows) {
    const std::vector<double> z{0.5};
    EXPECT_THROW(addgp::power_sums(z, 3), std::invalid_argument);
    EXPECT_THROW(addgp::power_sums(z, 0), std::invalid_argument);
}

TEST(PowerSums, MonotoneOnUnitInterval) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 50; ++t) {
        const auto z = unit_interval_z(rng, 6);
        const auto s = addgp::power_sums(z, 6);
        for (int k = 1; k <= 6; ++k) {
            EXPECT_GE(s.s(k), 0.0);
            EXPECT_LE(s.s(k), 6.0);
            if (k > 1) EXPECT_LE(s.s(k), s.s(k - 1));
        }
    }
}

TEST(Esp, KnownValues) {
    const std::vector<double> z{1, 2, 3, 4};
    const std::vector<double> expected{1, 10, 35, 50, 24};  // subset enumeration
    ASSERT_EQ(esp_bruteforce(z, 4), expected);
    EXPECT_EQ(addgp::esp_newton_girard(z, 4).values, expected);
    EXPECT_EQ(addgp::esp_dp(z, 4).values, expected);
}

TEST(Esp, AllOnesGivesBinomials) {
    for (int D = 1; D <= 20; ++D) {
        const std::vector<double> z(static_cast<std::size_t>(D), 1.0);
        const auto e = addgp::esp_dp(z, D);
        double c = 1.0;
        for (int n = 0; n <= D; ++n) {
            EXPECT_EQ(e[static_cast<std::size_t>(n)], c) << "D=" << D << " n=" << n;
            c = c * (D - n) / (n + 1);
        }
    }
    const std::vector<double> four(4, 1.0);
    EXPECT_EQ(addgp::esp_newton_girard(four, 4).values, (std::vector<double>{1, 4, 6, 4, 1}));
}

TEST(Esp, SingleDimension) {
    const std::vector<double> z{0.37};
    EXPECT_EQ(addgp::esp_dp(z, 1).values, (std::vector<double>{1.0, 0.37}));
    EXPECT_EQ(addgp::esp_newton_girard(z, 1).values, (std::vector<double>{1.0, 0.37}));
}

TEST(Esp, OrderOutOfRangeThrows) {
    const std::vector<double> z{0.1, 0.2};
    EXPECT_THROW(addgp::esp_dp(z, 3), std::invalid_argument);
    EXPECT_THROW(addgp::esp_newton_girard(z, 0), std::invalid_argument);
    EXPECT_THROW(addgp::esp_dp(std::vector<double>{}, 1), std::invalid_argument);
}

TEST(Esp, BothMethodsMatchEnumeration) {
    std::mt19937_64 rng(2024);
    for (int t = 0; t < 200; ++t) {
        const std::size_t D = 1 + rng() % 8;
        const auto z = unit_interval_z(rng, D);
        const int r = static_cast<int>(D);
        const auto truth = esp_bruteforce(z, r);
        const auto dp = addgp::esp_dp(z, r);
        const auto ng = addgp::esp_newton_girard(z, r);
        EXPECT_EQ(dp[0], 1.0);
        EXPECT_EQ(ng[0], 1.0);
        for (int n = 0; n <= r; ++n) {
            const auto i = static_cast<std::size_t>(n);
            EXPECT_TRUE(close_rel(dp[i], truth[i], 1e-10)) << dp[i] << " vs " << truth[i];
            EXPECT_TRUE(close_rel(ng[i], truth[i], 1e-10)) << ng[i] << " vs " << truth[i];
            EXPECT_GE(dp[i], 0.0);
            EXPECT_LE(dp[i], addgp::oracle::esp_bruteforce(std::vector<double>(D, 1.0), r)[i]);
        }
    }
}

TEST(Esp, DpStaysNonnegativeWhereNewtonGirardCancels) {
    // Many values near 1: alternating Newton-Girard sums lose digits, the DP does not.
    const std::vector<double> z(40, 0.999999);
    const auto dp = addgp::esp_dp(z, 40);
    for (double v : dp.values) EXPECT_GT(v, 0.0);
    const double e40 = std::pow(0.999999, 40);
    EXPECT_TRUE(close_rel(dp[40], e40, 1e-12));
    const auto ng = addgp::esp_newton_girard(z, 40);
    EXPECT_GT(std::abs(ng[40] - e40) / e40, 1e-6);
}

TEST(EspExcluding, KnownValues) {
    const std::vector<double> z{1, 2, 3, 4};
    const auto full = addgp::esp_dp(z, 4);
    const auto excl = addgp::esp_excluding(z, full, 0, 4);
    EXPECT_EQ(excl.values, (std::vector<double>{1, 9, 26, 24}));

    const std::vector<double> ones{1, 1, 1};
    const auto full_ones = addgp::esp_dp(ones, 3);
    for (std::size_t j = 0; j < 3; ++j)
        EXPECT_EQ(addgp::esp_excluding(ones, full_ones, j, 3).values, (std::vector<double>{1, 2, 1}));
}

TEST(EspExcluding, IndexOutOfRangeThrows) {
    const std::vector<double> z{0.5, 0.5};
    const auto full = addgp::esp_dp(z, 2);
    EXPECT_THROW(addgp::esp_excluding(z, full, 2, 2), std::invalid_argument);
}

TEST(EspExcluding, SingleVariableLeavesOnlyE0) {
    const std::vector<double> z{0.3};
    EXPECT_EQ(addgp::esp_excluding(z, addgp::esp_dp(z, 1), 0, 1).values, (std::vector<double>{1.0}));
}

TEST(EspExcluding, DerivativeAtKnownPoint) {
    // d e_2 / d z_1 at (1, 2, 3, 4) = e_1(2, 3, 4) = 9.
    std::vector<double> z{1, 2, 3, 4};
    const auto excl = addgp::esp_excluding(z, addgp::esp_dp(z, 4), 0, 4);
    const double fd = addgp::oracle::central_difference(
        [&](double v) {
            auto zz = z;
            zz[0] = v;
            return addgp::esp_dp(zz, 4)[2];
        },
        1.0, 1e-6);
    EXPECT_NEAR(excl[1], 9.0, 0.0);
    EXPECT_NEAR(fd, 9.0, 1e-6);
}

TEST(EspExcluding, MatchesFiniteDifferencesEverywhere) {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 100; ++t) {
        const std::size_t D = 1 + rng() % 8;
        auto z = unit_interval_z(rng, D);
        const int r = static_cast<int>(D);
        const auto full = addgp::esp_dp(z, r);
        for (std::size_t j = 0; j < D; ++j) {
            const auto excl = addgp::esp_excluding(z, full, j, r);
            for (int n = 1; n <= r; ++n) {
                const double h = 1e-6;
                auto zp = z, zm = z;
                zp[j] += h;
                zm[j] -= h;
                const double fd = (esp_bruteforce(zp, r)[static_cast<std::size_t>(n)] -
                                   esp_bruteforce(zm, r)[static_cast<std::size_t>(n)]) /
                                  (2 * h);
                EXPECT_TRUE(close_rel(excl[static_cast<std::size_t>(n - 1)], fd, 1e-6, 1e-9))
                    << "D=" << D << " j=" << j << " n=" << n;
            }
        }
    }
}

TEST(EspExcluding, FallbackKeepsAccuracyWhenOneVariableDominates) {
    // z_j = 1 with the rest tiny: divide-out alone would cancel catastrophically.
    std::vector<double> z{1.0, 1e-3, 2e-3, 1.5e-3, 3e-3, 2.5e-3};
    const int r = 6;
    const auto full = addgp::esp_dp(z, r);
    const auto excl = addgp::esp_excluding(z, full, 0, r);
    std::vector<double> rest(z.begin() + 1, z.end());
    const auto truth = esp_bruteforce(rest, 5);
    for (int n = 0; n <= 5; ++n)
        EXPECT_TRUE(close_rel(excl[static_cast<std::size_t>(n)], truth[static_cast<std::size_t>(n)], 1e-10))
            << n << ": " << excl[static_cast<std::size_t>(n)] << " vs " << truth[static_cast<std::size_t>(n)];
}

TEST(EspExcluding, NewtonGirardInputAlsoWorks) {
    std::mt19937_64 rng(99);
    for (int t = 0; t < 50; ++t) {
        const std::size_t D = 2 + rng() % 6;
        const auto z = unit_interval_z(rng, D);
        const int r = static_cast<int>(D);
        const auto full = addgp::esp_newton_girard(z, r);
        for (std::size_t j = 0; j < D; ++j) {
            auto rest = z;
            rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(j));
            const auto truth = esp_bruteforce(rest, r - 1);
            const auto excl = addgp::esp_excluding(z, full, j, r);
            for (std::size_t n = 0; n < truth.size(); ++n) EXPECT_TRUE(close_rel(excl[n], truth[n], 1e-9));
        }
    }
}
