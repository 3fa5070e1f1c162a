// Copyright 2026 The mpsts Authors
// SPDX-License-Identifier: Apache-2.0

//! \file reconstruct.hpp
//! Estimation of compound-Poisson parameters from homodyne samples.
//!
//! The detection efficiency η is always an input. Parameters (μ, a) refer to
//! the state before loss; the likelihood uses the lossy weights P_{ημ,a}(n).

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "genfunc.hpp"
#include "io.hpp"
#include "quadrature.hpp"
#include "special.hpp"

namespace mpsts {

//---------------------------------------------------------------------------//
// Moment estimate
//---------------------------------------------------------------------------//

inline constexpr double moment_a_min = 1.0;
inline constexpr double moment_a_max = 64.0;

struct MomentEstimate
{
    CompoundPoissonParams params; //!< as observed, i.e. (ημ, a)
    double variance = 0.0;
    double kurtosis = 0.0;
    bool clamped = false;     //!< a was forced into [1, 64]
    bool near_vacuum = false; //!< variance at or below the vacuum level
};

/// Invert the variance/kurtosis relations, clamping a to [1, 64] when the
/// kurtosis leaves the attainable band.
inline MomentEstimate moment_estimate_from_moments(double variance, double kurtosis)
{
    MomentEstimate e{{0.0, 1.0}, variance, kurtosis, false, false};
    if (!(variance > 0.5)) {
        e.near_vacuum = true;
        e.clamped = true;
        return e;
    }
    try {
        e.params = params_from_moments(variance, kurtosis);
        if (e.params.a > moment_a_max) {
            e.params.a = moment_a_max;
            e.clamped = true;
        }
    } catch (EstimationError const&) {
        e.params = {variance - 0.5, kurtosis > 3.0 ? moment_a_min : moment_a_max};
        e.clamped = true;
    }
    return e;
}

/// Sample variance and kurtosis mapped to (μ, a). Needs at least 30 samples.
inline MomentEstimate moment_estimate(std::span<double const> samples)
{
    std::size_t const n = samples.size();
    if (n < 30)
        throw InsufficientDataError("moment estimate needs at least 30 samples");
    double const mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
    double m2 = 0.0, m4 = 0.0;
    for (double q : samples) {
        double const d2 = (q - mean) * (q - mean);
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    double const resolution = 16.0 * std::numeric_limits<double>::epsilon() * std::abs(mean);
    if (!(m2 > resolution * resolution))
        throw InsufficientDataError("samples show no variation");
    return moment_estimate_from_moments(m2 * n / (n - 1.0), m4 / (m2 * m2));
}

//---------------------------------------------------------------------------//
// Likelihood
//---------------------------------------------------------------------------//

/// Log-likelihood and its gradient in (μ, a).
struct LikelihoodValue
{
    double value = 0.0;
    double d_mu = 0.0;
    double d_a = 0.0;
};

/// Σ log p(qᵢ | μ, a, η) with the lossy series, plus the analytic gradient
/// when requested. Weight derivatives for μ' = ημ:
/// ∂log P/∂μ' = n/μ' - (n+a)/(a+μ'),
/// ∂log P/∂a  = Σ_{j<n} 1/(a+j) + log(a/(a+μ')) + (μ'-n)/(a+μ').
inline LikelihoodValue
log_likelihood(std::span<double const> samples, CompoundPoissonParams p, double eta, bool with_gradient = true)
{
    double const mu = eta * p.mu;
    double const a = p.a;
    auto const w0 = pmf_adaptive(CompoundPoissonParams{mu, a}, quadrature_tail_mass);
    std::size_t const terms = w0.size();
    LikelihoodValue out;
    if (!with_gradient) {
        std::array<double, 1> s{};
        for (double q : samples) {
            double const lf = detail::hermite_weighted_sums<1>(q, {w0.data()}, terms, s);
            out.value += std::log(s[0]) + lf;
        }
        return out;
    }
    std::vector<double> w1(terms), w2(terms);
    double harmonic = 0.0;
    double const log_ratio = std::log(a / (a + mu));
    for (std::size_t n = 0; n < terms; ++n) {
        double const dmu = (n > 0 ? n / mu : 0.0) - (n + a) / (a + mu);
        w1[n] = w0[n] * dmu;
        w2[n] = w0[n] * (harmonic + log_ratio + (mu - double(n)) / (a + mu));
        harmonic += 1.0 / (a + n);
    }
    std::array<double, 3> s{};
    for (double q : samples) {
        double const lf = detail::hermite_weighted_sums<3>(q, {w0.data(), w1.data(), w2.data()}, terms, s);
        out.value += std::log(s[0]) + lf;
        out.d_mu += s[1] / s[0];
        out.d_a += s[2] / s[0];
    }
    out.d_mu *= eta;
    return out;
}

//---------------------------------------------------------------------------//
// Fit results
//---------------------------------------------------------------------------//

struct Chi2Result
{
    double statistic = 0.0;
    int dof = 0;
    double p_value = 1.0;
    int bins = 0;
};

struct FisherErrors
{
    std::array<std::array<double, 2>, 2> covariance{};
    std::array<double, 2> std_errors{};
    bool singular = false;
};

struct FitFlags
{
    bool near_vacuum = false;
    bool a_at_upper_bound = false;
    bool singular_information = false;
    bool init_clamped = false;
};

struct FitResult
{
    double mu = 0.0;
    double a = 1.0;
    std::array<std::array<double, 2>, 2> covariance{};
    std::array<double, 2> std_errors{}; //!< (σ_μ, σ_a)
    double log_likelihood = 0.0;
    std::optional<Chi2Result> chi2;
    std::optional<double> fidelity;
    std::size_t n_samples = 0;
    double eta = 1.0;
    int free_params = 2;
    FitFlags flags;
    bool converged = false;
    std::size_t evaluations = 0;
    double gradient_norm = 0.0; //!< per-sample, in log parameters
    std::optional<std::uint64_t> seed;

    CompoundPoissonParams params() const { return {mu, a}; }
};

/// Thrown when the optimizer exhausts its budget; carries the best point.
class FitFailure : public EstimationError
{
  public:
    FitFailure(std::string const& what, FitResult best) : EstimationError(what), best_(std::move(best)) {}
    FitResult const& best() const noexcept { return best_; }

  private:
    FitResult best_;
};

//---------------------------------------------------------------------------//
// Fisher information
//---------------------------------------------------------------------------//

/// Observed information -∇²ℓ at params via central differences of the
/// analytic gradient, Richardson-extrapolated over steps h and h/2.
/// With fixed_a only the μ entry is estimated and σ_a is zero.
inline FisherErrors fisher_errors(CompoundPoissonParams params,
                                  std::span<double const> samples,
                                  double eta,
                                  bool fixed_a = false)
{
    auto grad = [&](double mu, double a) {
        auto const v = log_likelihood(samples, {mu, a}, eta);
        return std::array<double, 2>{v.d_mu, v.d_a};
    };
    auto hessian = [&](double rel) {
        std::array<std::array<double, 2>, 2> h{};
        double const hm = rel * params.mu;
        auto const gp = grad(params.mu + hm, params.a);
        auto const gm = grad(params.mu - hm, params.a);
        h[0][0] = (gp[0] - gm[0]) / (2 * hm);
        h[1][0] = (gp[1] - gm[1]) / (2 * hm);
        if (!fixed_a) {
            double const ha = rel * params.a;
            auto const ap = grad(params.mu, params.a + ha);
            auto const am = grad(params.mu, params.a - ha);
            h[0][1] = (ap[0] - am[0]) / (2 * ha);
            h[1][1] = (ap[1] - am[1]) / (2 * ha);
        }
        return h;
    };
    FisherErrors out;
    auto const inf = std::numeric_limits<double>::infinity();
    auto const coarse = hessian(1e-4);
    auto const fine = hessian(5e-5);
    double info[2][2];
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            info[i][j] = -(4.0 * fine[i][j] - coarse[i][j]) / 3.0;
    double const off = 0.5 * (info[0][1] + info[1][0]);
    double const n = static_cast<double>(samples.size());

    // Singularity is judged on the per-sample information in log parameters,
    // which is invariant to the parameter scale.
    if (fixed_a) {
        double const j = info[0][0] * params.mu * params.mu / n;
        if (!(j > 1e-12) || !std::isfinite(j)) {
            out.singular = true;
            out.covariance = {{{inf, 0.0}, {0.0, 0.0}}};
            out.std_errors = {inf, 0.0};
            return out;
        }
        out.covariance = {{{1.0 / info[0][0], 0.0}, {0.0, 0.0}}};
        out.std_errors = {std::sqrt(out.covariance[0][0]), 0.0};
        return out;
    }
    double const j00 = info[0][0] * params.mu * params.mu / n;
    double const j11 = info[1][1] * params.a * params.a / n;
    double const j01 = off * params.mu * params.a / n;
    double const half_trace = 0.5 * (j00 + j11);
    double const lambda_min = half_trace - std::hypot(0.5 * (j00 - j11), j01);
    double const det = info[0][0] * info[1][1] - off * off;
    if (!(lambda_min > 1e-12) || !std::isfinite(lambda_min) || !(det > 0.0)) {
        out.singular = true;
        out.covariance = {{{inf, inf}, {inf, inf}}};
        out.std_errors = {inf, inf};
        return out;
    }
    out.covariance = {{{info[1][1] / det, -off / det}, {-off / det, info[0][0] / det}}};
    out.std_errors = {std::sqrt(out.covariance[0][0]), std::sqrt(out.covariance[1][1])};
    return out;
}

//---------------------------------------------------------------------------//
// χ² goodness of fit
//---------------------------------------------------------------------------//

/// Pearson χ² with B = clamp(n/20, 10, 100) bins equiprobable under the
/// fitted density; dof = B - 1 - free_params.
inline Chi2Result chi2_gof(std::span<double const> samples,
                           CompoundPoissonParams params,
                           double eta,
                           int free_params = 2)
{
    std::size_t const n = samples.size();
    if (n < 200)
        throw InsufficientDataError("chi-square test needs at least 200 samples");
    int const bins = static_cast<int>(std::clamp<std::size_t>(n / 20, 10, 100));
    QuadratureModel const model(params, eta);

    // Model CDF on a fine grid, trapezoid rule, renormalized.
    double const sigma = std::sqrt(eta * params.mu + 0.5);
    double const lim = 12.0 * sigma + 4.0;
    std::size_t const points = 8001;
    auto const grid = linspace(-lim, lim, points);
    std::vector<double> cdf(points, 0.0);
    double prev = model.density(grid[0]);
    for (std::size_t i = 1; i < points; ++i) {
        double const cur = model.density(grid[i]);
        cdf[i] = cdf[i - 1] + 0.5 * (prev + cur) * (grid[i] - grid[i - 1]);
        prev = cur;
    }
    for (auto& c : cdf)
        c /= cdf.back();

    std::vector<double> observed(bins, 0.0);
    double const step = grid[1] - grid[0];
    for (double q : samples) {
        double u;
        if (q <= grid.front())
            u = 0.0;
        else if (q >= grid.back())
            u = 1.0;
        else {
            auto const i = static_cast<std::size_t>((q - grid.front()) / step);
            std::size_t const j = std::min(i, points - 2);
            double const t = (q - grid[j]) / step;
            u = cdf[j] + t * (cdf[j + 1] - cdf[j]);
        }
        observed[std::min(bins - 1, static_cast<int>(u * bins))] += 1.0;
    }
    double const expected = double(n) / bins;
    Chi2Result r;
    r.bins = bins;
    for (double o : observed)
        r.statistic += (o - expected) * (o - expected) / expected;
    r.dof = bins - 1 - free_params;
    r.p_value = chi2_upper_tail(r.statistic, r.dof);
    return r;
}

//---------------------------------------------------------------------------//
// Fidelity
//---------------------------------------------------------------------------//

/// (Σ √(pₙ qₙ))² for two diagonal states on a common truncation.
inline double fidelity_diag(std::span<double const> p, std::span<double const> q)
{
    if (p.size() != q.size())
        throw DomainError("pmf", "fidelity needs pmfs of equal length");
    auto check = [](std::span<double const> v) {
        double s = 0.0;
        for (double x : v) {
            if (!(x >= 0.0))
                throw DomainError("pmf", "probabilities must be nonnegative");
            s += x;
        }
        if (std::abs(s - 1.0) > 1e-9)
            throw DomainError("pmf", "probabilities must sum to 1 within 1e-9");
    };
    check(p);
    check(q);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        acc += std::sqrt(p[i] * q[i]);
    return std::clamp(acc * acc, 0.0, 1.0);
}

/// Fidelity between two compound-Poisson states, truncated where both tails
/// are below 1e-12.
inline double fidelity_diag(CompoundPoissonParams x, CompoundPoissonParams y)
{
    std::size_t const n = std::max(pmf_adaptive(x).size(), pmf_adaptive(y).size()) - 1;
    return fidelity_diag(pmf(compound_poisson_state(x), n), pmf(compound_poisson_state(y), n));
}

//---------------------------------------------------------------------------//
// Maximum likelihood
//---------------------------------------------------------------------------//

struct FitOptions
{
    std::optional<CompoundPoissonParams> init;
    std::optional<double> fixed_a; //!< fit μ only, with a held at this value
    std::size_t max_evaluations = 4000;
    std::optional<std::uint64_t> seed; //!< recorded in the result
    bool goodness_of_fit = true;       //!< attach χ² when n ≥ 200
};

inline constexpr double mle_gradient_tolerance = 1e-7;
inline constexpr double mle_simplex_tolerance = 1e-9;
inline constexpr double mle_near_vacuum = 1e-6;
inline constexpr double mle_a_max = 1e4;

namespace detail {

struct Simplex
{
    std::vector<std::vector<double>> x;
    std::vector<double> f;
};

inline double simplex_diameter(Simplex const& s)
{
    double d = 0.0;
    for (std::size_t i = 1; i < s.x.size(); ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < s.x[0].size(); ++k)
            acc += (s.x[i][k] - s.x[0][k]) * (s.x[i][k] - s.x[0][k]);
        d = std::max(d, std::sqrt(acc));
    }
    return d;
}

/// One Nelder–Mead iteration (minimization); vertices kept sorted by f.
template<class F>
void nelder_mead_step(Simplex& s, F&& f, std::size_t& evals)
{
    std::size_t const dim = s.x[0].size();
    std::size_t const worst = dim;
    std::vector<double> centroid(dim, 0.0);
    for (std::size_t i = 0; i < worst; ++i)
        for (std::size_t k = 0; k < dim; ++k)
            centroid[k] += s.x[i][k] / dim;
    auto along = [&](double t) {
        std::vector<double> p(dim);
        for (std::size_t k = 0; k < dim; ++k)
            p[k] = centroid[k] + t * (s.x[worst][k] - centroid[k]);
        return p;
    };
    auto eval = [&](std::vector<double> const& p) {
        ++evals;
        return f(p);
    };
    auto replace_worst = [&](std::vector<double> p, double fp) {
        s.x[worst] = std::move(p);
        s.f[worst] = fp;
    };

    auto xr = along(-1.0);
    double const fr = eval(xr);
    if (fr < s.f[0]) {
        auto xe = along(-2.0);
        double const fe = eval(xe);
        fe < fr ? replace_worst(std::move(xe), fe) : replace_worst(std::move(xr), fr);
    } else if (fr < s.f[worst - 1]) {
        replace_worst(std::move(xr), fr);
    } else {
        bool const outside = fr < s.f[worst];
        auto xc = along(outside ? -0.5 : 0.5);
        double const fc = eval(xc);
        if (fc < (outside ? fr : s.f[worst])) {
            replace_worst(std::move(xc), fc);
        } else {
            for (std::size_t i = 1; i <= worst; ++i) {
                for (std::size_t k = 0; k < dim; ++k)
                    s.x[i][k] = s.x[0][k] + 0.5 * (s.x[i][k] - s.x[0][k]);
                s.f[i] = eval(s.x[i]);
            }
        }
    }
    std::vector<std::size_t> order(s.x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return s.f[i] < s.f[j]; });
    Simplex sorted;
    for (auto i : order) {
        sorted.x.push_back(s.x[i]);
        sorted.f.push_back(s.f[i]);
    }
    s = std::move(sorted);
}

} // namespace detail

/// Maximize the likelihood over (log μ, log a) by Nelder–Mead followed by a
/// Newton polish on the analytic gradient, then attach Fisher errors and,
/// when n ≥ 200, a χ² test.
inline FitResult mle_fit(std::span<double const> samples, double eta, FitOptions const& opt = {})
{
    std::size_t const n = samples.size();
    if (n < 100)
        throw InsufficientDataError("maximum-likelihood fit needs at least 100 samples");
    if (!(eta > 0.0 && eta <= 1.0))
        throw DomainError("eta", "efficiency must lie in (0, 1]");
    if (opt.fixed_a && !(*opt.fixed_a > 0.0))
        throw DomainError("a", "fixed a must be > 0");

    FitResult res;
    res.n_samples = n;
    res.eta = eta;
    res.seed = opt.seed;
    bool const fix_a = opt.fixed_a.has_value();
    res.free_params = fix_a ? 1 : 2;

    CompoundPoissonParams init;
    if (opt.init) {
        init = *opt.init;
    } else {
        auto const m = moment_estimate(samples);
        init = {std::max(m.params.mu / eta, 1e-3), m.params.a};
        res.flags.init_clamped = m.clamped;
    }
    if (fix_a)
        init.a = *opt.fixed_a;
    init.a = std::clamp(init.a, 1e-2, 0.5 * mle_a_max);

    auto to_params = [&](std::vector<double> const& x) {
        return CompoundPoissonParams{std::exp(x[0]), fix_a ? *opt.fixed_a : std::exp(x[1])};
    };
    double const log_mu_min = std::log(0.1 * mle_near_vacuum);
    double const log_a_max = std::log(mle_a_max);
    auto objective = [&](std::vector<double> const& x) {
        if (x[0] < log_mu_min || x[0] > std::log(1e6) || (!fix_a && (x[1] > log_a_max || x[1] < std::log(1e-3))))
            return std::numeric_limits<double>::infinity();
        double const v = log_likelihood(samples, to_params(x), eta, false).value;
        return std::isfinite(v) ? -v / n : std::numeric_limits<double>::infinity();
    };
    auto log_gradient = [&](std::vector<double> const& x) {
        auto const p = to_params(x);
        auto const v = log_likelihood(samples, p, eta);
        std::vector<double> g{p.mu * v.d_mu / n};
        if (!fix_a)
            g.push_back(p.a * v.d_a / n);
        return std::pair{v.value, g};
    };
    auto norm = [](std::vector<double> const& g) {
        double s = 0.0;
        for (double x : g)
            s += x * x;
        return std::sqrt(s);
    };

    // Simplex search.
    std::size_t const dim = fix_a ? 1 : 2;
    detail::Simplex s;
    std::vector<double> x0{std::log(init.mu)};
    if (!fix_a)
        x0.push_back(std::log(init.a));
    s.x.push_back(x0);
    for (std::size_t k = 0; k < dim; ++k) {
        auto v = x0;
        v[k] += 0.1;
        s.x.push_back(v);
    }
    std::size_t evals = 0;
    for (auto const& v : s.x) {
        s.f.push_back(objective(v));
        ++evals;
    }
    {
        detail::Simplex sorted = s;
        std::vector<std::size_t> order(s.x.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return s.f[i] < s.f[j]; });
        for (std::size_t i = 0; i < order.size(); ++i) {
            sorted.x[i] = s.x[order[i]];
            sorted.f[i] = s.f[order[i]];
        }
        s = std::move(sorted);
    }

    bool converged = false;
    double grad_norm = std::numeric_limits<double>::infinity();
    std::size_t iter = 0;
    while (evals < opt.max_evaluations) {
        if (std::exp(s.x[0][0]) < mle_near_vacuum) {
            res.flags.near_vacuum = true;
            break;
        }
        if (detail::simplex_diameter(s) < mle_simplex_tolerance) {
            converged = true;
            break;
        }
        if (++iter % 25 == 0) {
            grad_norm = norm(log_gradient(s.x[0]).second);
            ++evals;
            if (grad_norm < mle_gradient_tolerance) {
                converged = true;
                break;
            }
        }
        detail::nelder_mead_step(s, objective, evals);
    }

    // Newton polish on the per-sample log-likelihood in log parameters.
    std::vector<double> x = s.x[0];
    double fx = s.f[0];
    if (!res.flags.near_vacuum) {
        for (int it = 0; it < 8; ++it) {
            auto const [val, g] = log_gradient(x);
            ++evals;
            fx = -val / n;
            grad_norm = norm(g);
            if (grad_norm < mle_gradient_tolerance) {
                converged = true;
                break;
            }
            double const h = 1e-5;
            std::vector<std::vector<double>> hess(dim, std::vector<double>(dim));
            for (std::size_t k = 0; k < dim; ++k) {
                auto xp = x, xm = x;
                xp[k] += h;
                xm[k] -= h;
                auto const gp = log_gradient(xp).second;
                auto const gm = log_gradient(xm).second;
                evals += 2;
                for (std::size_t i = 0; i < dim; ++i)
                    hess[i][k] = (gp[i] - gm[i]) / (2 * h);
            }
            std::vector<double> step(dim);
            if (dim == 1) {
                step[0] = -g[0] / hess[0][0];
            } else {
                double const h01 = 0.5 * (hess[0][1] + hess[1][0]);
                double const det = hess[0][0] * hess[1][1] - h01 * h01;
                step[0] = -(hess[1][1] * g[0] - h01 * g[1]) / det;
                step[1] = -(hess[0][0] * g[1] - h01 * g[0]) / det;
            }
            // Ascent direction required (Hessian negative definite).
            double const dir = step[0] * g[0] + (dim > 1 ? step[1] * g[1] : 0.0);
            if (!std::isfinite(dir) || dir <= 0.0)
                break;
            bool improved = false;
            for (double t = 1.0; t > 1e-4; t *= 0.5) {
                auto xn = x;
                for (std::size_t k = 0; k < dim; ++k)
                    xn[k] += t * step[k];
                double const fn = objective(xn);
                ++evals;
                if (fn <= fx) {
                    x = std::move(xn);
                    fx = fn;
                    improved = true;
                    break;
                }
            }
            if (!improved)
                break;
        }
    }

    auto const best = to_params(x);
    res.mu = best.mu;
    res.a = best.a;
    res.log_likelihood = -fx * n;
    res.evaluations = evals;
    res.gradient_norm = grad_norm;
    res.flags.a_at_upper_bound = !fix_a && best.a > 0.99 * mle_a_max;
    res.converged = converged || res.flags.near_vacuum;
    if (res.flags.near_vacuum) {
        auto const inf = std::numeric_limits<double>::infinity();
        res.covariance = {{{inf, inf}, {inf, inf}}};
        res.std_errors = {inf, fix_a ? 0.0 : inf};
        res.flags.singular_information = true;
        return res;
    }
    if (!res.converged)
        throw FitFailure("maximum-likelihood fit did not converge within " + std::to_string(opt.max_evaluations)
                             + " evaluations",
                         res);

    auto const fe = fisher_errors(best, samples, eta, fix_a);
    res.covariance = fe.covariance;
    res.std_errors = fe.std_errors;
    res.flags.singular_information = fe.singular;
    if (opt.goodness_of_fit && n >= 200)
        res.chi2 = chi2_gof(samples, best, eta, res.free_params);
    return res;
}

//---------------------------------------------------------------------------//
// Serialization
//---------------------------------------------------------------------------//

namespace detail {

inline nlohmann::json finite_or_null(double x)
{
    return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

inline double number_or_inf(nlohmann::json const& j)
{
    return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

} // namespace detail

/// JSON form of a fit. Infinite errors are written as null.
inline nlohmann::json fit_result_to_json(FitResult const& r)
{
    using detail::finite_or_null;
    nlohmann::json j{{"mu", r.mu},
                     {"a", r.a},
                     {"covariance",
                      {{finite_or_null(r.covariance[0][0]), finite_or_null(r.covariance[0][1])},
                       {finite_or_null(r.covariance[1][0]), finite_or_null(r.covariance[1][1])}}},
                     {"std_errors", {finite_or_null(r.std_errors[0]), finite_or_null(r.std_errors[1])}},
                     {"log_likelihood", r.log_likelihood},
                     {"n_samples", r.n_samples},
                     {"eta", r.eta},
                     {"free_params", r.free_params},
                     {"converged", r.converged},
                     {"evaluations", r.evaluations},
                     {"gradient_norm", finite_or_null(r.gradient_norm)},
                     {"flags",
                      {{"near_vacuum", r.flags.near_vacuum},
                       {"a_at_upper_bound", r.flags.a_at_upper_bound},
                       {"singular_information", r.flags.singular_information},
                       {"init_clamped", r.flags.init_clamped}}}};
    j["chi2"] = r.chi2 ? nlohmann::json{{"statistic", r.chi2->statistic},
                                        {"dof", r.chi2->dof},
                                        {"p_value", r.chi2->p_value},
                                        {"bins", r.chi2->bins}}
                       : nlohmann::json(nullptr);
    j["fidelity"] = r.fidelity ? nlohmann::json(*r.fidelity) : nlohmann::json(nullptr);
    j["seed"] = r.seed ? nlohmann::json(*r.seed) : nlohmann::json(nullptr);
    return j;
}

inline FitResult fit_result_from_json(nlohmann::json const& j)
{
    try {
        FitResult r;
        r.mu = j.at("mu").get<double>();
        r.a = j.at("a").get<double>();
        for (int i = 0; i < 2; ++i) {
            for (int k = 0; k < 2; ++k)
                r.covariance[i][k] = detail::number_or_inf(j.at("covariance")[i][k]);
            r.std_errors[i] = detail::number_or_inf(j.at("std_errors")[i]);
        }
        r.log_likelihood = j.at("log_likelihood").get<double>();
        r.n_samples = j.at("n_samples").get<std::size_t>();
        r.eta = j.at("eta").get<double>();
        r.free_params = j.value("free_params", 2);
        r.converged = j.value("converged", true);
        r.evaluations = j.value("evaluations", std::size_t{0});
        r.gradient_norm = detail::number_or_inf(j.value("gradient_norm", nlohmann::json(nullptr)));
        if (auto f = j.find("flags"); f != j.end()) {
            r.flags.near_vacuum = f->value("near_vacuum", false);
            r.flags.a_at_upper_bound = f->value("a_at_upper_bound", false);
            r.flags.singular_information = f->value("singular_information", false);
            r.flags.init_clamped = f->value("init_clamped", false);
        }
        if (auto c = j.find("chi2"); c != j.end() && !c->is_null())
            r.chi2 = Chi2Result{c->at("statistic").get<double>(),
                                c->at("dof").get<int>(),
                                c->at("p_value").get<double>(),
                                c->value("bins", 0)};
        if (auto f = j.find("fidelity"); f != j.end() && !f->is_null())
            r.fidelity = f->get<double>();
        if (auto s = j.find("seed"); s != j.end() && !s->is_null())
            r.seed = s->get<std::uint64_t>();
        return r;
    } catch (nlohmann::json::exception const& e) {
        throw DataError(std::string("malformed fit result: ") + e.what());
    }
}

struct KFit
{
    unsigned k = 0;
    FitResult fit;
};

/// Batch report: k,mu,a,sigma_mu,sigma_a,p_value,fidelity (empty when absent).
inline void write_report_csv(std::ostream& os, std::span<KFit const> fits)
{
    auto num = [](double x) { return std::isfinite(x) ? io::format_number(x) : std::string("inf"); };
    os << "k,mu,a,sigma_mu,sigma_a,p_value,fidelity\n";
    for (auto const& [k, f] : fits) {
        os << k << ',' << num(f.mu) << ',' << num(f.a) << ',' << num(f.std_errors[0]) << ','
           << num(f.std_errors[1]) << ',' << (f.chi2 ? num(f.chi2->p_value) : "") << ','
           << (f.fidelity ? num(*f.fidelity) : "") << '\n';
    }
}

} // namespace mpsts
