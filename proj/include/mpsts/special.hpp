// Copyright 2026 The mpsts Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

namespace mpsts {

/// log(Γ(a+n)/Γ(a)) as a sum of logarithms of the rising factorial.
///
/// Short products are multiplied directly; beyond 20 factors the product is
/// accumulated in log space so large n never overflows.
inline double log_gamma_ratio(double a, unsigned n)
{
    if (n <= 20) {
        double prod = 1.0;
        for (unsigned j = 0; j < n; ++j)
            prod *= a + j;
        return std::log(prod);
    }
    double acc = 0.0;
    for (unsigned j = 0; j < n; ++j)
        acc += std::log(a + j);
    return acc;
}

/// n(n-1)...(n-m+1), zero when m > n.
inline double falling_factorial(double n, unsigned m)
{
    double prod = 1.0;
    for (unsigned j = 0; j < m; ++j)
        prod *= n - j;
    return prod;
}

/// Upper tail P(X > x) of a chi-squared variable with `dof` degrees of freedom.
inline double chi2_upper_tail(double x, double dof)
{
    if (x <= 0.0)
        return 1.0;
    return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

/// Kolmogorov limiting distribution tail Q(λ) = 2 Σ (-1)^{j-1} exp(-2 j² λ²).
inline double kolmogorov_tail(double lambda)
{
    if (lambda < 0.2)
        return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int j = 1; j <= 100; ++j) {
        double term = sign * std::exp(-2.0 * j * j * lambda * lambda);
        sum += term;
        if (std::abs(term) < 1e-16)
            break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult
{
    double statistic;
    double p_value;
};

/// Two-sample Kolmogorov–Smirnov test with Stephens' small-sample correction.
inline KsResult ks_two_sample(std::span<double const> x, std::span<double const> y)
{
    std::vector<double> a(x.begin(), x.end());
    std::vector<double> b(y.begin(), y.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double const na = static_cast<double>(a.size());
    double const nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        double const v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v)
            ++i;
        while (j < b.size() && b[j] == v)
            ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    double const ne = std::sqrt(na * nb / (na + nb));
    return {d, kolmogorov_tail((ne + 0.12 + 0.11 / ne) * d)};
}

/// One-sample KS distance against a continuous CDF.
template<class Cdf>
double ks_distance(std::span<double const> x, Cdf&& cdf)
{
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    double const n = static_cast<double>(s.size());
    double d = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        double const f = cdf(s[i]);
        d = std::max({d, f - i / n, (i + 1) / n - f});
    }
    return d;
}

} // namespace mpsts
