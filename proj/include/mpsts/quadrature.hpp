// Copyright 2026 The mpsts Authors
// SPDX-License-Identifier: Apache-2.0

//! \file quadrature.hpp
//! Quadrature and phase-space pictures of diagonal states.
//!
//! Conventions: φ_n are the normalized harmonic-oscillator eigenfunctions in
//! q, so the vacuum quadrature variance is 1/2 and a coherent state |α⟩ has
//! mean quadrature √2 Re α. The Wigner function uses the matching scaling,
//! W_vac(q,p) = exp(-q²-p²)/π.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "genfunc.hpp"
#include "io.hpp"

namespace mpsts {

/// How detection efficiency η enters the quadrature distribution.
enum class EfficiencyModel
{
    /// Bernoulli loss, exact for this family: (μ, a) → (ημ, a).
    exact_loss,
    /// Convolution of the lossless distribution with exp(-q² η/(1-η)).
    /// Equivalent to exact_loss in the rescaled variable q/√η.
    gaussian_kernel,
};

/// Tail mass used when truncating series in quadrature space.
inline constexpr double quadrature_tail_mass = 1e-14;

namespace detail {

struct HermiteCoefficients
{
    std::vector<double> up;   //!< √(2/(n+1))
    std::vector<double> down; //!< √(n/(n+1))
};

inline HermiteCoefficients const& hermite_coefficients()
{
    static HermiteCoefficients const table = [] {
        HermiteCoefficients c;
        std::size_t const n = max_truncation_order + 2;
        c.up.resize(n);
        c.down.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            c.up[i] = std::sqrt(2.0 / (i + 1.0));
            c.down[i] = std::sqrt(i / (i + 1.0));
        }
        return c;
    }();
    return table;
}

inline double const pi_quarter_inv = std::pow(std::numbers::pi, -0.25);

/// Σ_n w_k[n] φ_n(q)² for K weight vectors of length n_terms sharing one
/// recurrence. The recurrence runs on φ_n e^{q²/2} with periodic rescaling,
/// so the result is sums[k] · exp(returned log factor) without underflow.
template<std::size_t K>
double hermite_weighted_sums(double q,
                             std::array<double const*, K> const& w,
                             std::size_t n_terms,
                             std::array<double, K>& sums)
{
    auto const& c = hermite_coefficients();
    constexpr double big = 1e150;
    constexpr double shrink = 1e-150;
    double const log_big = std::log(big);

    double log_scale = 0.0;
    sums.fill(0.0);
    double prev = 0.0;
    double cur = pi_quarter_inv;
    for (std::size_t n = 0; n < n_terms; ++n) {
        double const sq = cur * cur;
        for (std::size_t k = 0; k < K; ++k)
            sums[k] += w[k][n] * sq;
        double const next = c.up[n] * q * cur - c.down[n] * prev;
        prev = cur;
        cur = next;
        if (std::abs(cur) > big) {
            cur *= shrink;
            prev *= shrink;
            for (auto& s : sums)
                s *= shrink * shrink;
            log_scale += log_big;
        }
    }
    return 2.0 * log_scale - q * q;
}

} // namespace detail

/// Normalized Hermite function φ_n(q), by upward three-term recurrence.
inline double hermite_phi(unsigned n, double q)
{
    auto const& c = detail::hermite_coefficients();
    double prev = 0.0;
    double cur = detail::pi_quarter_inv * std::exp(-0.5 * q * q);
    for (unsigned i = 0; i < n; ++i) {
        double const next = (i < c.up.size() ? c.up[i] : std::sqrt(2.0 / (i + 1.0))) * q * cur
                            - (i < c.down.size() ? c.down[i] : std::sqrt(i / (i + 1.0))) * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

/// Quadrature density of a compound-Poisson state seen with efficiency η.
///
/// Precomputes the photon-number weights once; evaluation costs one
/// Hermite recurrence per point.
class QuadratureModel
{
  public:
    QuadratureModel(CompoundPoissonParams params,
                    double eta,
                    EfficiencyModel model = EfficiencyModel::exact_loss,
                    double tail = quadrature_tail_mass)
        : params_(params), eta_(eta), model_(model)
    {
        if (!(params.mu >= 0.0) || !std::isfinite(params.mu))
            throw DomainError("mu", "must be a finite value >= 0");
        if (!(params.a > 0.0) || !std::isfinite(params.a))
            throw DomainError("a", "must be a finite value > 0");
        if (!(eta > 0.0 && eta <= 1.0))
            throw DomainError("eta", "efficiency must lie in (0, 1]");
        double const mu = model == EfficiencyModel::exact_loss ? eta * params.mu : params.mu;
        weights_ = pmf_adaptive(CompoundPoissonParams{mu, params.a}, tail);
        kernel_sigma_ = std::sqrt((1.0 - eta) / (2.0 * eta));
    }

    double operator()(double q) const { return density(q); }

    double density(double q) const
    {
        if (model_ == EfficiencyModel::gaussian_kernel && kernel_sigma_ > 0.0)
            return kernel_density(q);
        return std::exp(lossless_log_density(q));
    }

    double log_density(double q) const
    {
        if (model_ == EfficiencyModel::gaussian_kernel && kernel_sigma_ > 0.0)
            return std::log(kernel_density(q));
        return lossless_log_density(q);
    }

    /// Highest photon number kept in the series.
    std::size_t order() const noexcept { return weights_.size() - 1; }
    std::span<double const> weights() const noexcept { return weights_; }
    CompoundPoissonParams params() const noexcept { return params_; }
    double eta() const noexcept { return eta_; }

  private:
    double lossless_log_density(double q) const
    {
        std::array<double, 1> sum{};
        double const log_factor = detail::hermite_weighted_sums<1>(q, {weights_.data()}, weights_.size(), sum);
        return std::log(sum[0]) + log_factor;
    }

    double kernel_density(double q) const
    {
        // Trapezoid over ±12σ of the Gaussian kernel; spectrally accurate
        // for a smooth integrand.
        double const s = kernel_sigma_;
        double const h = std::min(0.25 * s, 0.02);
        auto const half = static_cast<long>(std::ceil(12.0 * s / h));
        double const norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * s);
        double acc = 0.0;
        for (long i = -half; i <= half; ++i) {
            double const x = i * h;
            acc += std::exp(lossless_log_density(q - x)) * std::exp(-0.5 * x * x / (s * s));
        }
        return acc * h * norm;
    }

    CompoundPoissonParams params_;
    double eta_;
    EfficiencyModel model_;
    std::vector<double> weights_;
    double kernel_sigma_ = 0.0;
};

/// Single-point convenience wrapper around QuadratureModel.
inline double quadrature_pdf(CompoundPoissonParams params,
                             double eta,
                             double q,
                             EfficiencyModel model = EfficiencyModel::exact_loss)
{
    return QuadratureModel(params, eta, model).density(q);
}

//---------------------------------------------------------------------------//
// Moments
//---------------------------------------------------------------------------//

struct MomentSummary
{
    double variance = 0.5;
    double kurtosis = 3.0; //!< central fourth moment over σ⁴
};

/// σ² = μ + 1/2, K = 3 - 6 (μ/(2μ+1))² (a-1)/a.
inline MomentSummary moments_from_params(CompoundPoissonParams p)
{
    if (!(p.mu >= 0.0) || !(p.a > 0.0))
        throw DomainError(p.mu >= 0.0 ? "a" : "mu", "out of domain");
    double const r = p.mu / (2.0 * p.mu + 1.0);
    return {p.mu + 0.5, 3.0 - 6.0 * r * r * (p.a - 1.0) / p.a};
}

/// Lowest kurtosis reachable for a given variance (the Poissonian limit a → ∞).
inline double kurtosis_floor(double variance)
{
    double const mu = variance - 0.5;
    double const r = mu / (2.0 * mu + 1.0);
    return 3.0 - 6.0 * r * r;
}

/// Inverse of moments_from_params over a ∈ [1, ∞).
///
/// Throws EstimationError when K lies outside (kurtosis_floor(σ²), 3].
inline CompoundPoissonParams params_from_moments(double variance, double kurtosis)
{
    if (!(variance > 0.5) || !std::isfinite(variance))
        throw EstimationError("variance must exceed the vacuum level 1/2");
    double const mu = variance - 0.5;
    if (!(kurtosis <= 3.0) || !(kurtosis > kurtosis_floor(variance)))
        throw EstimationError("kurtosis outside the attainable band for this variance");
    double const denom = 1.0 - (3.0 - kurtosis) * (2.0 * mu + 1.0) * (2.0 * mu + 1.0) / (6.0 * mu * mu);
    return {mu, 1.0 / denom};
}

//---------------------------------------------------------------------------//
// Wigner function
//---------------------------------------------------------------------------//

/// W(q,p) = Σ P(n) (-1)ⁿ L_n(2r²) e^{-r²} / π over a pmf vector.
inline double wigner(std::span<double const> pmf, double q, double p)
{
    double const x = 2.0 * (q * q + p * p);
    // l_n = L_n(x) e^{-x/2} obeys the Laguerre recurrence unchanged.
    double prev = 0.0;
    double cur = std::exp(-0.5 * x);
    double acc = 0.0;
    double sign = 1.0;
    for (std::size_t n = 0; n < pmf.size(); ++n) {
        acc += sign * pmf[n] * cur;
        double const next = ((2.0 * n + 1.0 - x) * cur - n * prev) / (n + 1.0);
        prev = cur;
        cur = next;
        sign = -sign;
    }
    return acc / std::numbers::pi;
}

inline double wigner(CompoundPoissonParams params, double q, double p)
{
    if (!(params.mu >= 0.0) || !(params.a > 0.0))
        throw DomainError(params.mu >= 0.0 ? "a" : "mu", "out of domain");
    return wigner(pmf_adaptive(params, quadrature_tail_mass), q, p);
}

inline double wigner(PhotonState const& state, double q, double p)
{
    return wigner(pmf_adaptive(state, quadrature_tail_mass), q, p);
}

/// W along the radius r ∈ [0, r_max] (phase-symmetric states).
inline std::vector<std::pair<double, double>>
wigner_radial_profile(CompoundPoissonParams params, double r_max, std::size_t points)
{
    auto const p = pmf_adaptive(params, quadrature_tail_mass);
    std::vector<std::pair<double, double>> out;
    out.reserve(points);
    for (std::size_t i = 0; i < points; ++i) {
        double const r = points > 1 ? r_max * i / (points - 1.0) : 0.0;
        out.emplace_back(r, wigner(p, r, 0.0));
    }
    return out;
}

//---------------------------------------------------------------------------//
// Grid export
//---------------------------------------------------------------------------//

inline void write_pdf_grid_csv(std::ostream& os, QuadratureModel const& model, std::span<double const> qs)
{
    os << "q,value\n";
    for (double q : qs)
        os << io::format_number(q) << ',' << io::format_number(model.density(q)) << '\n';
}

inline void write_wigner_grid_csv(std::ostream& os,
                                  CompoundPoissonParams params,
                                  std::span<double const> qs,
                                  std::span<double const> ps)
{
    auto const pmf = pmf_adaptive(params, quadrature_tail_mass);
    os << "q,p,value\n";
    for (double q : qs)
        for (double p : ps)
            os << io::format_number(q) << ',' << io::format_number(p) << ','
               << io::format_number(wigner(pmf, q, p)) << '\n';
}

/// Evenly spaced grid [lo, hi] with n points.
inline std::vector<double> linspace(double lo, double hi, std::size_t n)
{
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i)
        g[i] = n > 1 ? lo + (hi - lo) * i / (n - 1.0) : lo;
    return g;
}

} // namespace mpsts
