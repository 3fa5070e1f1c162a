// Copyright 2026 The mpsts Authors
// SPDX-License-Identifier: Apache-2.0

//! \file genfunc.hpp
//! Photon-number distributions described through their generating functions
//! G(z) = Σ P(n) zⁿ.
//!
//! Photon subtraction acts on G as a normalized derivative, G₁ = G'/μ, so the
//! five closed-form families below carry their own derivative rules and only
//! numerically represented states fall back to factorial-moment sums.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "io.hpp"
#include "special.hpp"

namespace mpsts {

/// Mean photon number μ and coherence parameter a of the compound-Poisson
/// (negative binomial) family. a = 1 is thermal light, a → ∞ is Poissonian.
struct CompoundPoissonParams
{
    double mu = 0.0;
    double a = 1.0;

    friend bool operator==(CompoundPoissonParams const&, CompoundPoissonParams const&) = default;
};

namespace family {
struct Fock
{
    unsigned m = 0;
};
struct Coherent
{
    double mu = 0.0;
};
struct SqueezedVacuum
{
    double xi = 0.0; //!< squeezing modulus |ξ|
};
struct Thermal
{
    double mu = 0.0;
};
struct CompoundPoisson
{
    double mu = 0.0;
    double a = 1.0;
};
struct NumericPmf
{
    std::vector<double> p;
};
} // namespace family

using Family = std::variant<family::Fock,
                            family::Coherent,
                            family::SqueezedVacuum,
                            family::Thermal,
                            family::CompoundPoisson,
                            family::NumericPmf>;

/// Cumulative tail mass left out by adaptive truncation.
inline constexpr double default_tail_mass = 1e-12;
/// Hard cap on the truncation order.
inline constexpr std::size_t max_truncation_order = 4096;

/// A diagonal photon-number state. Always constructed through make_state(),
/// so the parameters are known to lie inside the family's domain.
class PhotonState
{
  public:
    Family const& family() const noexcept { return family_; }

    template<class T>
    T const* get_if() const noexcept
    {
        return std::get_if<T>(&family_);
    }

    std::string family_name() const;

  private:
    explicit PhotonState(Family f) : family_(std::move(f)) {}
    friend PhotonState make_state(Family);

    Family family_;
};

namespace detail {
inline void require(bool ok, char const* field, char const* what)
{
    if (!ok)
        throw DomainError(field, what);
}

inline bool finite_nonneg(double x)
{
    return std::isfinite(x) && x >= 0.0;
}
} // namespace detail

/// Validate the family parameters and wrap them as a state.
inline PhotonState make_state(Family f)
{
    using detail::finite_nonneg;
    using detail::require;
    std::visit(
        [](auto const& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, family::Coherent>) {
                require(finite_nonneg(s.mu), "mu", "must be a finite value >= 0");
            }
            else if constexpr (std::is_same_v<T, family::SqueezedVacuum>) {
                require(finite_nonneg(s.xi), "xi", "must be a finite value >= 0");
                require(s.xi < 15.0, "xi", "squeezing beyond 15 is not representable");
            }
            else if constexpr (std::is_same_v<T, family::Thermal>) {
                require(finite_nonneg(s.mu), "mu", "must be a finite value >= 0");
            }
            else if constexpr (std::is_same_v<T, family::CompoundPoisson>) {
                require(finite_nonneg(s.mu), "mu", "must be a finite value >= 0");
                require(std::isfinite(s.a) && s.a > 0.0, "a", "must be a finite value > 0");
            }
            else if constexpr (std::is_same_v<T, family::NumericPmf>) {
                require(!s.p.empty(), "p", "must not be empty");
                double sum = 0.0;
                for (double v : s.p) {
                    require(finite_nonneg(v), "p", "probabilities must be finite and >= 0");
                    sum += v;
                }
                require(std::abs(sum - 1.0) <= 1e-9, "p", "probabilities must sum to 1 within 1e-9");
            }
        },
        f);
    return PhotonState(std::move(f));
}

inline PhotonState fock_state(unsigned m) { return make_state(family::Fock{m}); }
inline PhotonState coherent_state(double mu) { return make_state(family::Coherent{mu}); }
inline PhotonState squeezed_vacuum(double xi) { return make_state(family::SqueezedVacuum{xi}); }
inline PhotonState thermal_state(double mu) { return make_state(family::Thermal{mu}); }
inline PhotonState compound_poisson_state(double mu, double a)
{
    return make_state(family::CompoundPoisson{mu, a});
}
inline PhotonState compound_poisson_state(CompoundPoissonParams p)
{
    return compound_poisson_state(p.mu, p.a);
}
inline PhotonState numeric_state(std::vector<double> p) { return make_state(family::NumericPmf{std::move(p)}); }

inline std::string PhotonState::family_name() const
{
    static constexpr char const* names[] = {
        "fock", "coherent", "squeezed_vacuum", "thermal", "compound_poisson", "numeric_pmf"};
    return names[family_.index()];
}

//---------------------------------------------------------------------------//
// Probability mass functions
//---------------------------------------------------------------------------//

namespace detail {

/// Fill P(n) from log P(0) and log-ratios P(n+1)/P(n). With tail > 0 the
/// series stops once the accumulated mass reaches 1 - tail.
template<class LogRatio>
std::vector<double> iterate_pmf(double log_p0, LogRatio log_ratio, std::size_t n_max, double tail)
{
    std::vector<double> p;
    p.reserve(std::min<std::size_t>(n_max + 1, 256));
    double logp = log_p0;
    double cum = 0.0;
    for (std::size_t n = 0; n <= n_max; ++n) {
        double const v = std::exp(logp);
        p.push_back(v);
        cum += v;
        if (tail > 0.0 && cum >= 1.0 - tail)
            break;
        logp += log_ratio(n);
    }
    return p;
}

inline std::vector<double> poisson_pmf(double mu, std::size_t n_max, double tail)
{
    if (mu == 0.0)
        return {1.0};
    double const log_mu = std::log(mu);
    return iterate_pmf(-mu, [=](std::size_t n) { return log_mu - std::log(n + 1.0); }, n_max, tail);
}

inline std::vector<double> compound_poisson_pmf(double mu, double a, std::size_t n_max, double tail)
{
    if (mu == 0.0)
        return {1.0};
    double const log_p = std::log(mu / (a + mu));
    double const log_p0 = -a * std::log1p(mu / a);
    return iterate_pmf(
        log_p0,
        [=](std::size_t n) { return std::log((a + n) / (n + 1.0)) + log_p; },
        n_max,
        tail);
}

inline std::vector<double> squeezed_pmf(double xi, std::size_t n_max, double tail)
{
    if (xi == 0.0)
        return {1.0};
    double const t2 = std::tanh(xi) * std::tanh(xi);
    std::vector<double> p;
    double logp = -std::log(std::cosh(xi));
    double cum = 0.0;
    for (std::size_t pair = 0; 2 * pair <= n_max; ++pair) {
        double const v = std::exp(logp);
        p.push_back(v);
        cum += v;
        if (tail > 0.0 && cum >= 1.0 - tail)
            break;
        if (2 * pair + 1 > n_max)
            break;
        p.push_back(0.0);
        logp += std::log((2.0 * pair + 1.0) / (2.0 * pair + 2.0) * t2);
    }
    return p;
}

inline std::vector<double> closed_form_pmf(PhotonState const& s, std::size_t n_max, double tail)
{
    return std::visit(
        [&](auto const& f) -> std::vector<double> {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, family::Fock>) {
                std::size_t const len = tail > 0.0 ? f.m + 1 : n_max + 1;
                std::vector<double> p(len, 0.0);
                if (f.m < len)
                    p[f.m] = 1.0;
                return p;
            }
            else if constexpr (std::is_same_v<T, family::Coherent>) {
                return poisson_pmf(f.mu, n_max, tail);
            }
            else if constexpr (std::is_same_v<T, family::SqueezedVacuum>) {
                return squeezed_pmf(f.xi, n_max, tail);
            }
            else if constexpr (std::is_same_v<T, family::Thermal>) {
                return compound_poisson_pmf(f.mu, 1.0, n_max, tail);
            }
            else if constexpr (std::is_same_v<T, family::CompoundPoisson>) {
                return compound_poisson_pmf(f.mu, f.a, n_max, tail);
            }
            else {
                return f.p;
            }
        },
        s.family());
}

} // namespace detail

/// P(0..n_max) exactly n_max+1 entries long (zero padded / truncated).
inline std::vector<double> pmf(PhotonState const& state, std::size_t n_max)
{
    auto p = detail::closed_form_pmf(state, n_max, 0.0);
    p.resize(n_max + 1, 0.0);
    return p;
}

/// P(0..N) with N the smallest order leaving tail mass below `tail`,
/// capped at max_truncation_order. NumericPmf states pass through.
inline std::vector<double> pmf_adaptive(PhotonState const& state, double tail = default_tail_mass)
{
    return detail::closed_form_pmf(state, max_truncation_order, tail);
}

/// Adaptive pmf of the compound-Poisson family.
inline std::vector<double> pmf_adaptive(CompoundPoissonParams p, double tail = default_tail_mass)
{
    return detail::compound_poisson_pmf(p.mu, p.a, max_truncation_order, tail);
}

inline std::size_t truncation_order(PhotonState const& state, double tail = default_tail_mass)
{
    return pmf_adaptive(state, tail).size() - 1;
}

//---------------------------------------------------------------------------//
// Generating function, moments and correlations
//---------------------------------------------------------------------------//

inline double mean_photon(PhotonState const& state)
{
    return std::visit(
        [](auto const& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, family::Fock>) {
                return f.m;
            }
            else if constexpr (std::is_same_v<T, family::SqueezedVacuum>) {
                double const s = std::sinh(f.xi);
                return s * s;
            }
            else if constexpr (std::is_same_v<T, family::NumericPmf>) {
                double m = 0.0;
                for (std::size_t n = 0; n < f.p.size(); ++n)
                    m += n * f.p[n];
                return m;
            }
            else {
                return f.mu;
            }
        },
        state.family());
}

/// Σ n(n-1)...(n-k+1) P(n) z^{n-k} over a pmf vector.
inline double factorial_series(std::span<double const> p, unsigned k, double z)
{
    double acc = 0.0;
    for (std::size_t n = p.size(); n-- > k;)
        acc = acc * z + falling_factorial(static_cast<double>(n), k) * p[n];
    return acc;
}

/// k-th derivative of the generating function at z.
inline double gf_derivative(PhotonState const& state, unsigned k, double z)
{
    return std::visit(
        [&](auto const& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, family::Fock>) {
                if (k > f.m)
                    return 0.0;
                return falling_factorial(f.m, k) * std::pow(z, static_cast<double>(f.m - k));
            }
            else if constexpr (std::is_same_v<T, family::Coherent>) {
                return std::pow(f.mu, static_cast<double>(k)) * std::exp(f.mu * (z - 1.0));
            }
            else if constexpr (std::is_same_v<T, family::Thermal> || std::is_same_v<T, family::CompoundPoisson>) {
                double a = 1.0;
                if constexpr (std::is_same_v<T, family::CompoundPoisson>)
                    a = f.a;
                if (f.mu == 0.0)
                    return k == 0 ? 1.0 : 0.0;
                double const base = 1.0 + (1.0 - z) * f.mu / a;
                return std::exp(log_gamma_ratio(a, k) + k * std::log(f.mu / a) - (a + k) * std::log(base));
            }
            else if constexpr (std::is_same_v<T, family::SqueezedVacuum>) {
                auto p = pmf_adaptive(state, 1e-15);
                return factorial_series(p, k, z);
            }
            else {
                return factorial_series(f.p, k, z);
            }
        },
        state.family());
}

/// G(z) = Σ P(n) zⁿ.
inline double generating_function(PhotonState const& state, double z)
{
    if (auto const* sq = state.get_if<family::SqueezedVacuum>()) {
        double const t = std::tanh(sq->xi);
        return 1.0 / (std::cosh(sq->xi) * std::sqrt(1.0 - z * z * t * t));
    }
    return gf_derivative(state, 0, z);
}

/// Normalized m-th order correlation g⁽ᵐ⁾ = Σ n(n-1)...(n-m+1)P(n) / μᵐ
/// for the squeezed vacuum, via its closed-form finite sum.
inline double squeezed_gn(double xi, unsigned n)
{
    if (n < 2)
        throw DomainError("n", "correlation order must be >= 2");
    if (!(xi > 0.0) || !std::isfinite(xi))
        throw ArithmeticDomainError("squeezed vacuum with xi = 0 has zero mean; g(n) is undefined");
    double const sh = std::sinh(xi);
    double const log_s = -2.0 * std::log(sh);
    double const nn = n;
    double sum = 0.0;
    for (unsigned k = 0; k <= n / 2; ++k) {
        double const log_term = std::lgamma(2.0 * nn - 2.0 * k + 1.0) - std::lgamma(k + 1.0)
                                - std::lgamma(nn - k + 1.0) - std::lgamma(nn - 2.0 * k + 1.0) + k * log_s;
        sum += std::exp(log_term);
    }
    return std::exp(std::lgamma(nn + 1.0) - nn * std::log(2.0)) * sum;
}

inline double correlation_g(PhotonState const& state, unsigned m)
{
    if (m < 2)
        throw DomainError("m", "correlation order must be >= 2");
    double const mu = mean_photon(state);
    if (!(mu > 0.0))
        throw ArithmeticDomainError("g(m) is undefined for a state with zero mean photon number");
    return std::visit(
        [&](auto const& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, family::Fock>) {
                return falling_factorial(f.m, m) / std::pow(mu, static_cast<double>(m));
            }
            else if constexpr (std::is_same_v<T, family::Coherent>) {
                return 1.0;
            }
            else if constexpr (std::is_same_v<T, family::SqueezedVacuum>) {
                return squeezed_gn(f.xi, m);
            }
            else if constexpr (std::is_same_v<T, family::Thermal>) {
                return std::exp(log_gamma_ratio(1.0, m));
            }
            else if constexpr (std::is_same_v<T, family::CompoundPoisson>) {
                return std::exp(log_gamma_ratio(f.a, m) - m * std::log(f.a));
            }
            else {
                return factorial_series(f.p, m, 1.0) / std::pow(mu, static_cast<double>(m));
            }
        },
        state.family());
}

//---------------------------------------------------------------------------//
// Photon subtraction
//---------------------------------------------------------------------------//

struct SubtractionRecord
{
    unsigned k = 0;
    /// Mean photon number before each step: μ, μ₁, ..., μ_{k-1}.
    std::vector<double> means;
};

struct Subtraction
{
    PhotonState state;
    SubtractionRecord record;
};

namespace detail {

/// Normalized shift q(n) = (n+1) P(n+1) / μ, with μ taken from the vector.
inline std::vector<double> shifted_pmf(std::span<double const> p)
{
    double mu = 0.0;
    for (std::size_t n = 1; n < p.size(); ++n)
        mu += n * p[n];
    if (!(mu > 0.0))
        throw ArithmeticDomainError("cannot subtract a photon from a zero-mean state");
    std::vector<double> q(p.size() > 1 ? p.size() - 1 : 1, 0.0);
    for (std::size_t n = 0; n + 1 < p.size(); ++n)
        q[n] = (n + 1) * p[n + 1] / mu;
    return q;
}

inline PhotonState subtract_one(PhotonState const& s)
{
    return std::visit(
        [&](auto const& f) -> PhotonState {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, family::Fock>) {
                return fock_state(f.m - 1);
            }
            else if constexpr (std::is_same_v<T, family::Coherent>) {
                return s;
            }
            else if constexpr (std::is_same_v<T, family::Thermal>) {
                return compound_poisson_state(2.0 * f.mu, 2.0);
            }
            else if constexpr (std::is_same_v<T, family::CompoundPoisson>) {
                return compound_poisson_state(f.mu * (f.a + 1.0) / f.a, f.a + 1.0);
            }
            else if constexpr (std::is_same_v<T, family::SqueezedVacuum>) {
                return numeric_state(shifted_pmf(pmf_adaptive(s, 1e-15)));
            }
            else {
                return numeric_state(shifted_pmf(f.p));
            }
        },
        s.family());
}

} // namespace detail

/// Apply the annihilation operator k times (with renormalization).
///
/// Closed-form families stay closed: Fock(m) → Fock(m-k), coherent states
/// are fixed points, thermal and compound-Poisson states map to
/// CompoundPoisson(μ(a+1)/a, a+1) per step. Squeezed and numeric inputs
/// become NumericPmf.
inline Subtraction subtract_photons(PhotonState const& state, unsigned k)
{
    Subtraction out{state, {k, {}}};
    out.record.means.reserve(k);
    for (unsigned step = 0; step < k; ++step) {
        double const mu = mean_photon(out.state);
        if (!(mu > 0.0))
            throw ArithmeticDomainError("cannot subtract a photon from a zero-mean state (step "
                                        + std::to_string(step) + ")");
        out.record.means.push_back(mu);
        out.state = detail::subtract_one(out.state);
    }
    return out;
}

/// Parameters of a thermal state with mean μ0 after k subtractions:
/// a = k+1, μ = μ0 (k+1).
inline CompoundPoissonParams subtracted_thermal_params(double mu0, unsigned k)
{
    if (!(mu0 > 0.0) || !std::isfinite(mu0))
        throw DomainError("mu0", "must be a finite value > 0");
    return {mu0 * (k + 1.0), k + 1.0};
}

//---------------------------------------------------------------------------//
// Serialization
//---------------------------------------------------------------------------//

struct StateSpec
{
    PhotonState state;
    std::optional<std::size_t> n_max;
};

inline nlohmann::json state_to_json(PhotonState const& state, std::optional<std::size_t> n_max = {})
{
    nlohmann::json params = std::visit(
        [](auto const& f) -> nlohmann::json {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, family::Fock>)
                return {{"m", f.m}};
            else if constexpr (std::is_same_v<T, family::SqueezedVacuum>)
                return {{"xi", f.xi}};
            else if constexpr (std::is_same_v<T, family::CompoundPoisson>)
                return {{"mu", f.mu}, {"a", f.a}};
            else if constexpr (std::is_same_v<T, family::NumericPmf>)
                return {{"p", f.p}};
            else
                return {{"mu", f.mu}};
        },
        state.family());
    nlohmann::json j{{"family", state.family_name()}, {"params", std::move(params)}};
    if (n_max)
        j["n_max"] = *n_max;
    return j;
}

inline StateSpec state_from_json(nlohmann::json const& j)
{
    auto number = [&](char const* key) -> double {
        auto const& params = j.at("params");
        if (!params.contains(key) || !params[key].is_number())
            throw DomainError(key, "missing or not a number");
        return params[key].get<double>();
    };
    if (!j.is_object() || !j.contains("family") || !j["family"].is_string() || !j.contains("params"))
        throw DomainError("family", "state JSON needs string 'family' and object 'params'");
    std::string const name = j["family"].get<std::string>();
    std::optional<std::size_t> n_max;
    if (j.contains("n_max")) {
        if (!j["n_max"].is_number_unsigned())
            throw DomainError("n_max", "must be a nonnegative integer");
        n_max = j["n_max"].get<std::size_t>();
    }
    if (name == "fock") {
        double const m = number("m");
        if (m < 0.0 || m != std::floor(m) || m > 1e6)
            throw DomainError("m", "must be a nonnegative integer");
        return {fock_state(static_cast<unsigned>(m)), n_max};
    }
    if (name == "coherent")
        return {coherent_state(number("mu")), n_max};
    if (name == "squeezed_vacuum")
        return {squeezed_vacuum(number("xi")), n_max};
    if (name == "thermal")
        return {thermal_state(number("mu")), n_max};
    if (name == "compound_poisson")
        return {compound_poisson_state(number("mu"), number("a")), n_max};
    if (name == "numeric_pmf") {
        auto const& p = j.at("params").at("p");
        if (!p.is_array())
            throw DomainError("p", "must be an array");
        return {numeric_state(p.get<std::vector<double>>()), n_max};
    }
    throw DomainError("family", "unknown family '" + name + "'");
}

/// CSV with columns n,P.
inline void write_pmf_csv(std::ostream& os, std::span<double const> p)
{
    os << "n,P\n";
    for (std::size_t n = 0; n < p.size(); ++n)
        os << n << ',' << io::format_number(p[n]) << '\n';
}

} // namespace mpsts
