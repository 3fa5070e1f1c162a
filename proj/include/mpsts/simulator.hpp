// Copyright 2026 The mpsts Authors
// SPDX-License-Identifier: Apache-2.0

//! \file simulator.hpp
//! Synthetic homodyne data for photon-subtracted thermal light.
//!
//! Two routes are provided. sample_quadratures_direct() draws i.i.d.
//! quadratures from the compound-Poisson state through its P-representation
//! (Gamma-distributed intensity, uniform phase, vacuum noise).
//! simulate_cw() instead runs the continuous-wave experiment in time: a
//! complex Ornstein–Uhlenbeck field feeds a weak tap monitored by an APD with
//! dead time and dark counts, and a balanced homodyne detector integrates the
//! transmitted field over acquisition windows. Every state involved is a
//! classical mixture of coherent states, so the stochastic field plus vacuum
//! noise of variance 1/2 reproduces the quantum statistics.

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "genfunc.hpp"
#include "io.hpp"

namespace mpsts {

using Rng = std::mt19937_64;

//---------------------------------------------------------------------------//
// Direct sampler
//---------------------------------------------------------------------------//

/// n i.i.d. quadratures of CompoundPoisson(μ, a) seen with efficiency η.
///
/// I ~ Gamma(a, μ/a), θ ~ U(0, 2π), q = √(2ηI) cos θ + N(0, 1/2).
inline std::vector<double>
sample_quadratures_direct(CompoundPoissonParams params, double eta, std::size_t n, std::uint64_t seed)
{
    if (n == 0)
        throw DomainError("n", "at least one sample is required");
    if (!(params.mu >= 0.0) || !std::isfinite(params.mu))
        throw DomainError("mu", "must be a finite value >= 0");
    if (!(params.a > 0.0) || !std::isfinite(params.a))
        throw DomainError("a", "must be a finite value > 0");
    if (!(eta > 0.0 && eta <= 1.0))
        throw DomainError("eta", "efficiency must lie in (0, 1]");

    Rng rng(seed);
    boost::random::gamma_distribution<double> intensity(params.a, params.mu / params.a);
    boost::random::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    boost::random::normal_distribution<double> vacuum(0.0, std::sqrt(0.5));
    std::vector<double> q(n);
    for (auto& x : q) {
        double const i = params.mu > 0.0 ? intensity(rng) : 0.0;
        x = std::sqrt(2.0 * eta * i) * std::cos(phase(rng)) + vacuum(rng);
    }
    return q;
}

//---------------------------------------------------------------------------//
// Continuous-wave experiment
//---------------------------------------------------------------------------//

/// Time-domain simulation parameters. Times in seconds, rates in Hz.
struct CwExperimentConfig
{
    double tau_coh = 40e-6;     //!< field correlation time
    double tau_a = 12e-6;       //!< acquisition window
    double reflectivity = 0.01; //!< tap beam splitter
    double dead_time = 50e-9;
    double dark_rate = 100.0;
    double eta = 0.78;  //!< homodyne efficiency
    double mu0 = 1.63;  //!< mean photon number of the window mode in click-free bins
    double duration = 1.0;
    double dt = 0.25e-6;
    std::uint64_t seed = 1;
    /// APD-side photon flux relative to the homodyne path. Calibrates how many
    /// clicks a window collects; absolute rates of a real bench are unknown.
    double tap_gain = 1.0;
    /// Period of recorded windows. 0 selects 2 τ_coh.
    double window_period = 0.0;
    /// Spacing used when extracting conditional bins. 0 selects 2 τ_coh.
    double bin_spacing = 0.0;

    double effective_window_period() const { return window_period > 0.0 ? window_period : 2.0 * tau_coh; }
    double effective_bin_spacing() const { return bin_spacing > 0.0 ? bin_spacing : 2.0 * tau_coh; }

    /// Throws ConfigError naming the first violated invariant.
    void validate() const
    {
        auto positive = [](double v, char const* name) {
            if (!(v > 0.0) || !std::isfinite(v))
                throw ConfigError(name, "must be a finite value > 0");
        };
        positive(tau_coh, "tau_coh");
        positive(tau_a, "tau_a");
        positive(dead_time, "dead_time");
        positive(duration, "duration");
        positive(dt, "dt");
        positive(mu0, "mu0");
        positive(tap_gain, "tap_gain");
        if (!(dark_rate >= 0.0) || !std::isfinite(dark_rate))
            throw ConfigError("dark_rate", "must be a finite value >= 0");
        if (!(reflectivity >= 0.0 && reflectivity <= 0.5))
            throw ConfigError("reflectivity", "tap reflectivity must lie in [0, 0.5] (weak tap)");
        if (!(eta > 0.0 && eta <= 1.0))
            throw ConfigError("eta", "efficiency must lie in (0, 1]");
        if (!(tau_a < tau_coh))
            throw ConfigError("tau_a", "invariant tau_a < tau_coh violated");
        if (!(dead_time < tau_a))
            throw ConfigError("dead_time", "invariant dead_time < tau_a violated");
        if (!(dt < tau_a / 20.0))
            throw ConfigError("dt", "invariant dt < tau_a/20 violated");
        if (window_period < 0.0 || bin_spacing < 0.0)
            throw ConfigError(window_period < 0.0 ? "window_period" : "bin_spacing", "must be >= 0");
        if (effective_window_period() < tau_a + dead_time)
            throw ConfigError("window_period", "windows (plus dead-time guard) must not overlap");
        if (duration < tau_a)
            throw ConfigError("duration", "shorter than one acquisition window");
    }
};

inline nlohmann::json config_to_json(CwExperimentConfig const& c)
{
    return {{"tau_coh", c.tau_coh},
            {"tau_a", c.tau_a},
            {"reflectivity", c.reflectivity},
            {"dead_time", c.dead_time},
            {"dark_rate", c.dark_rate},
            {"eta", c.eta},
            {"mu0", c.mu0},
            {"duration", c.duration},
            {"dt", c.dt},
            {"seed", c.seed},
            {"tap_gain", c.tap_gain},
            {"window_period", c.window_period},
            {"bin_spacing", c.bin_spacing}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline CwExperimentConfig config_from_json(nlohmann::json const& j)
{
    if (!j.is_object())
        throw ConfigError("config", "must be a JSON object");
    CwExperimentConfig c;
    std::map<std::string, double*> const reals{{"tau_coh", &c.tau_coh},
                                               {"tau_a", &c.tau_a},
                                               {"reflectivity", &c.reflectivity},
                                               {"dead_time", &c.dead_time},
                                               {"dark_rate", &c.dark_rate},
                                               {"eta", &c.eta},
                                               {"mu0", &c.mu0},
                                               {"duration", &c.duration},
                                               {"dt", &c.dt},
                                               {"tap_gain", &c.tap_gain},
                                               {"window_period", &c.window_period},
                                               {"bin_spacing", &c.bin_spacing}};
    for (auto const& [key, value] : j.items()) {
        if (key == "seed") {
            if (!value.is_number_unsigned())
                throw ConfigError("seed", "must be a nonnegative integer");
            c.seed = value.get<std::uint64_t>();
            continue;
        }
        auto it = reals.find(key);
        if (it == reals.end())
            throw ConfigError(key, "unknown configuration key");
        if (!value.is_number())
            throw ConfigError(key, "must be a number");
        *it->second = value.get<double>();
    }
    return c;
}

/// Derived quantities fixing the source brightness.
struct CwCalibration
{
    double source_flux = 0.0;            //!< ⟨|α|²⟩ in photons per second
    double clicks_per_photon = 0.0;      //!< r · tap_gain
    double mean_clicks_per_window = 0.0; //!< unconditioned, before dead time
    double unconditioned_mode_mean = 0.0;
    double click_free_mode_mean = 0.0;   //!< equals mu0 by construction
    double window_mode_fraction = 0.0;   //!< |window mode|² share of the field energy in τ_a
    std::size_t steps_per_window = 0;
};

namespace detail {

struct WindowQuadrature
{
    Eigen::VectorXd weights; //!< trapezoid weights over the window nodes
    Eigen::MatrixXd corr;    //!< e^{-|tᵢ-tⱼ|/τ_coh}
};

inline WindowQuadrature window_quadrature(CwExperimentConfig const& c, std::size_t m)
{
    double const h = c.tau_a / m;
    WindowQuadrature wq;
    wq.weights = Eigen::VectorXd::Constant(m + 1, h);
    wq.weights[0] = wq.weights[m] = 0.5 * h;
    wq.corr.resize(m + 1, m + 1);
    for (std::size_t i = 0; i <= m; ++i)
        for (std::size_t j = 0; j <= m; ++j)
            wq.corr(i, j) = std::exp(-std::abs(double(i) - double(j)) * h / c.tau_coh);
    return wq;
}

} // namespace detail

/// Choose the source flux so that windows without clicks carry mu0 photons.
///
/// The window field x is complex Gaussian with covariance Φ·C. Conditioning
/// on zero clicks multiplies its density by exp(-ν Σ wᵢ|xᵢ|²), which keeps
/// it Gaussian; the conditional mode mean is
/// Φ uᵀCu − Φ² vᵀ(I + Φ A^{½}CA^{½})⁻¹v with v = A^{½}Cu, A = ν diag(w).
inline CwCalibration calibrate(CwExperimentConfig const& c)
{
    c.validate();
    auto const m = static_cast<std::size_t>(std::ceil(c.tau_a / c.dt));
    auto const wq = detail::window_quadrature(c, m);
    double const nu = c.reflectivity * c.tap_gain;
    Eigen::VectorXd const u = std::sqrt((1.0 - c.reflectivity) / c.tau_a) * wq.weights;
    Eigen::VectorXd const cu = wq.corr * u;
    double const ucu = u.dot(cu);
    Eigen::VectorXd const a_half = (nu * wq.weights).cwiseSqrt();
    Eigen::MatrixXd const aca = a_half.asDiagonal() * wq.corr * a_half.asDiagonal();
    Eigen::VectorXd const v = a_half.cwiseProduct(cu);

    auto click_free_mean = [&](double flux) {
        if (nu == 0.0)
            return flux * ucu;
        Eigen::MatrixXd b = flux * aca;
        b.diagonal().array() += 1.0;
        Eigen::LLT<Eigen::MatrixXd> llt(b);
        return flux * ucu - flux * flux * v.dot(llt.solve(v));
    };

    if (nu > 0.0) {
        double const ceiling = (1.0 - c.reflectivity) / nu;
        if (!(c.mu0 < 0.999 * ceiling))
            throw ConfigError("tap_gain",
                              "mu0 * reflectivity * tap_gain must stay below 1 - reflectivity; "
                              "click-free windows cannot reach mu0");
    }
    double lo = 0.0;
    double hi = c.mu0 / ucu;
    while (click_free_mean(hi) < c.mu0)
        hi *= 2.0;
    for (int it = 0; it < 200 && (hi - lo) > 1e-14 * hi; ++it) {
        double const mid = 0.5 * (lo + hi);
        (click_free_mean(mid) < c.mu0 ? lo : hi) = mid;
    }
    double const flux = 0.5 * (lo + hi);

    CwCalibration cal;
    cal.source_flux = flux;
    cal.clicks_per_photon = nu;
    cal.mean_clicks_per_window = (nu * flux + c.dark_rate) * c.tau_a;
    cal.unconditioned_mode_mean = flux * ucu;
    cal.click_free_mode_mean = click_free_mean(flux);
    cal.window_mode_fraction = ucu / ((1.0 - c.reflectivity) * c.tau_a);
    cal.steps_per_window = m;
    return cal;
}

inline nlohmann::json calibration_to_json(CwCalibration const& c)
{
    return {{"source_flux", c.source_flux},
            {"clicks_per_photon", c.clicks_per_photon},
            {"mean_clicks_per_window", c.mean_clicks_per_window},
            {"unconditioned_mode_mean", c.unconditioned_mode_mean},
            {"click_free_mode_mean", c.click_free_mode_mean},
            {"window_mode_fraction", c.window_mode_fraction},
            {"steps_per_window", c.steps_per_window}};
}

/// Complex Ornstein–Uhlenbeck field with ⟨α(t)α*(0)⟩ = Φ e^{-|t|/τ}, updated
/// with the exact Gaussian transition so any step size is unbiased.
class OuField
{
  public:
    OuField(double tau, double flux, Rng& rng) : tau_(tau), flux_(flux)
    {
        double const s = std::sqrt(0.5 * flux_);
        value_ = {s * normal_(rng), s * normal_(rng)};
    }

    void advance(double dt, Rng& rng)
    {
        double const rho = std::exp(-dt / tau_);
        double const s = std::sqrt(0.5 * flux_ * (1.0 - rho * rho));
        value_ = rho * value_ + std::complex<double>(s * normal_(rng), s * normal_(rng));
    }

    std::complex<double> value() const noexcept { return value_; }
    double intensity() const noexcept { return std::norm(value_); }

  private:
    double tau_;
    double flux_;
    std::complex<double> value_;
    boost::random::normal_distribution<double> normal_{0.0, 1.0};
};

/// |α|² sampled every dt, for checking the field correlations.
inline std::vector<double>
simulate_intensity_trace(double tau, double flux, double dt, std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    OuField field(tau, flux, rng);
    std::vector<double> out(n);
    for (auto& v : out) {
        v = field.intensity();
        field.advance(dt, rng);
    }
    return out;
}

struct WindowRecord
{
    double start = 0.0;
    double q = 0.0;
    std::vector<double> clicks; //!< registered APD click times inside the window
};

struct EventLog
{
    CwExperimentConfig config;
    CwCalibration calibration;
    std::vector<WindowRecord> windows;
};

namespace detail {

/// Non-paralyzable APD driven by a piecewise-linear rate, simulated by
/// time rescaling: a click fires when ∫rate over live time reaches an Exp(1)
/// threshold.
class ClickProcess
{
  public:
    explicit ClickProcess(Rng& rng) : rng_(rng) { reset(-std::numeric_limits<double>::infinity()); }

    void reset(double dead_until)
    {
        dead_until_ = dead_until;
        accum_ = 0.0;
        threshold_ = exp_(rng_);
    }

    /// Advance over [t0, t1] with rate linear from r0 to r1.
    template<class OnClick>
    void step(double t0, double t1, double r0, double r1, double dead_time, OnClick&& on_click)
    {
        double const slope = (r1 - r0) / (t1 - t0);
        double live = std::max(t0, dead_until_);
        while (live < t1) {
            double const rl = r0 + slope * (live - t0);
            double const seg = 0.5 * (rl + r1) * (t1 - live);
            double const need = threshold_ - accum_;
            if (seg < need) {
                accum_ += seg;
                return;
            }
            double const disc = std::max(rl * rl + 2.0 * slope * need, 0.0);
            double const x = 2.0 * need / (rl + std::sqrt(disc));
            double const tc = std::min(live + x, t1);
            on_click(tc);
            reset(tc + dead_time);
            live = dead_until_;
        }
    }

  private:
    Rng& rng_;
    boost::random::exponential_distribution<double> exp_{1.0};
    double dead_until_ = 0.0;
    double accum_ = 0.0;
    double threshold_ = 1.0;
};

} // namespace detail

/// Run the cw experiment and record every window on the window_period grid.
///
/// The field evolves continuously; between windows it is propagated with the
/// exact OU transition. Each window is preceded by a dead-time guard in which
/// clicks can block the window start but are not recorded.
inline EventLog simulate_cw(CwExperimentConfig const& cfg)
{
    EventLog log{cfg, calibrate(cfg), {}};
    auto const& cal = log.calibration;
    double const period = cfg.effective_window_period();
    auto const n_windows = static_cast<std::size_t>(std::floor((cfg.duration - cfg.tau_a) / period + 1e-9)) + 1;
    std::size_t const m = cal.steps_per_window;
    double const h = cfg.tau_a / m;
    double const nu = cal.clicks_per_photon;
    double const q_scale = std::sqrt(2.0 * cfg.eta * (1.0 - cfg.reflectivity) / cfg.tau_a);

    Rng rng(cfg.seed);
    OuField field(cfg.tau_coh, cal.source_flux, rng);
    detail::ClickProcess apd(rng);
    boost::random::normal_distribution<double> vacuum(0.0, std::sqrt(0.5));

    log.windows.resize(n_windows);
    double t_field = 0.0;
    for (std::size_t j = 0; j < n_windows; ++j) {
        auto& rec = log.windows[j];
        double const start = j * period;
        double const guard_start = std::max(0.0, start - cfg.dead_time);
        if (guard_start > t_field)
            field.advance(guard_start - t_field, rng);
        apd.reset(-std::numeric_limits<double>::infinity());

        double rate = nu * field.intensity() + cfg.dark_rate;
        if (start > guard_start) {
            field.advance(start - guard_start, rng);
            double const next = nu * field.intensity() + cfg.dark_rate;
            apd.step(guard_start, start, rate, next, cfg.dead_time, [](double) {});
            rate = next;
        }

        double integral = 0.5 * field.value().real();
        for (std::size_t i = 1; i <= m; ++i) {
            double const t0 = start + (i - 1) * h;
            field.advance(h, rng);
            double const next = nu * field.intensity() + cfg.dark_rate;
            apd.step(t0, t0 + h, rate, next, cfg.dead_time, [&](double tc) { rec.clicks.push_back(tc); });
            rate = next;
            integral += (i == m ? 0.5 : 1.0) * field.value().real();
        }
        rec.start = start;
        rec.q = q_scale * integral * h + vacuum(rng);
        t_field = start + cfg.tau_a;
    }
    return log;
}

//---------------------------------------------------------------------------//
// Conditional bins
//---------------------------------------------------------------------------//

struct ConditionalDataset
{
    std::map<unsigned, std::vector<double>> samples; //!< k → quadratures
    double spacing = 0.0;
    std::size_t candidate_bins = 0;
    bool correlated = false; //!< spacing below 2 τ_coh was explicitly allowed

    std::map<unsigned, std::size_t> counts() const
    {
        std::map<unsigned, std::size_t> out;
        for (auto const& [k, v] : samples)
            out[k] = v.size();
        return out;
    }
};

/// Select windows every `spacing` seconds and group their quadratures by the
/// exact number of clicks inside the window.
///
/// The spacing must be a whole multiple of the log's window period. Spacings
/// below 2 τ_coh leave neighbouring bins correlated and throw
/// CorrelatedBinsError unless allow_correlated is set.
inline ConditionalDataset
extract_conditional_bins(EventLog const& log, double spacing, bool allow_correlated = false)
{
    double const period = log.config.effective_window_period();
    double const ratio = spacing / period;
    auto const stride = static_cast<std::size_t>(std::llround(ratio));
    if (!(spacing > 0.0) || stride == 0 || std::abs(ratio - stride) > 1e-9 * ratio)
        throw DomainError("spacing", "must be a positive multiple of the recorded window period");
    ConditionalDataset ds;
    ds.spacing = spacing;
    if (spacing < 2.0 * log.config.tau_coh * (1.0 - 1e-12)) {
        if (!allow_correlated)
            throw CorrelatedBinsError("bin spacing below 2*tau_coh makes neighbouring bins statistically dependent");
        ds.correlated = true;
    }
    for (std::size_t j = 0; j < log.windows.size(); j += stride) {
        auto const& w = log.windows[j];
        ds.samples[static_cast<unsigned>(w.clicks.size())].push_back(w.q);
        ++ds.candidate_bins;
    }
    return ds;
}

inline ConditionalDataset extract_conditional_bins(EventLog const& log)
{
    return extract_conditional_bins(log, log.config.effective_bin_spacing());
}

//---------------------------------------------------------------------------//
// Persistence
//---------------------------------------------------------------------------//

/// One JSON object per window: start, q, clicks, click_times.
inline void write_event_log_jsonl(std::ostream& os, EventLog const& log)
{
    for (auto const& w : log.windows) {
        os << "{\"start\":" << io::format_number(w.start) << ",\"q\":" << io::format_number(w.q)
           << ",\"clicks\":" << w.clicks.size() << ",\"click_times\":[";
        for (std::size_t i = 0; i < w.clicks.size(); ++i)
            os << (i ? "," : "") << io::format_number(w.clicks[i]);
        os << "]}\n";
    }
}

/// CSV with columns k,q, grouped by ascending k in acquisition order.
inline void write_dataset_csv(std::ostream& os, ConditionalDataset const& ds)
{
    os << "k,q\n";
    for (auto const& [k, qs] : ds.samples)
        for (double q : qs)
            os << k << ',' << io::format_number(q) << '\n';
}

inline ConditionalDataset read_dataset_csv(std::string_view text)
{
    ConditionalDataset ds;
    std::size_t pos = 0;
    bool header = true;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (line.empty())
            continue;
        if (header) {
            header = false;
            if (line != "k,q")
                throw DataError("dataset header must be 'k,q'");
            continue;
        }
        auto cells = io::split(line);
        if (cells.size() != 2)
            throw DataError("dataset line " + std::to_string(line_no) + " must have two columns");
        double const k = io::parse_number(cells[0], "k");
        if (k < 0 || k != std::floor(k))
            throw DataError("dataset line " + std::to_string(line_no) + ": k must be a nonnegative integer");
        ds.samples[static_cast<unsigned>(k)].push_back(io::parse_number(cells[1], "q"));
        ++ds.candidate_bins;
    }
    if (header)
        throw DataError("dataset is empty");
    return ds;
}

inline nlohmann::json dataset_summary_json(ConditionalDataset const& ds, EventLog const& log)
{
    nlohmann::json counts = nlohmann::json::object();
    for (auto const& [k, n] : ds.counts())
        counts[std::to_string(k)] = n;
    return {{"schema_version", 1},
            {"counts", counts},
            {"candidate_bins", ds.candidate_bins},
            {"bin_spacing", ds.spacing},
            {"correlated_bins", ds.correlated},
            {"config", config_to_json(log.config)},
            {"calibration", calibration_to_json(log.calibration)}};
}

} // namespace mpsts
