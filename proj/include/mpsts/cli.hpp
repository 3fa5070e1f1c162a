// Copyright 2026 The mpsts Authors
// SPDX-License-Identifier: Apache-2.0

//! \file cli.hpp
//! `mpsts` command-line front end: simulate, fit, report.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 data error.
//! Option precedence: command-line flag, then MPSTS_* environment variable,
//! then configuration file, then built-in default.

#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "genfunc.hpp"
#include "io.hpp"
#include "quadrature.hpp"
#include "reconstruct.hpp"
#include "simulator.hpp"

#ifndef MPSTS_VERSION
#define MPSTS_VERSION "0.0.0"
#endif

namespace mpsts::cli {

namespace fs = std::filesystem;

enum ExitCode : int
{
    exit_ok = 0,
    exit_config = 2,
    exit_io = 3,
    exit_data = 4,
};

inline constexpr int manifest_schema_version = 1;
inline constexpr int dataset_schema_version = 1;
inline constexpr int fits_schema_version = 1;
inline constexpr int report_schema_version = 1;

/// Environment lookup, injectable for tests.
using EnvLookup = std::function<std::optional<std::string>(std::string const&)>;

inline std::optional<std::string> process_env(std::string const& name)
{
    if (char const* v = std::getenv(name.c_str()))
        return std::string(v);
    return std::nullopt;
}

namespace detail {

template<class T>
std::optional<T> env_value(EnvLookup const& env, char const* name)
{
    auto const raw = env(name);
    if (!raw)
        return std::nullopt;
    try {
        std::size_t used = 0;
        T value{};
        if constexpr (std::is_same_v<T, std::string>)
            return *raw;
        else if constexpr (std::is_same_v<T, double>)
            value = std::stod(*raw, &used);
        else
            value = static_cast<T>(std::stoull(*raw, &used));
        if (used != raw->size() || (!std::is_same_v<T, double> && raw->find('-') != std::string::npos))
            throw std::invalid_argument(*raw);
        return value;
    } catch (std::exception const&) {
        throw ConfigError(name, "cannot parse environment value '" + *raw + "'");
    }
}

template<class T>
std::optional<T> pick(std::optional<T> const& flag, EnvLookup const& env, char const* name)
{
    return flag ? flag : env_value<T>(env, name);
}

/// Creation time for manifests; SOURCE_DATE_EPOCH pins it for reproducible runs.
inline std::string timestamp(EnvLookup const& env)
{
    std::int64_t secs;
    if (auto const epoch = env_value<std::uint64_t>(env, "SOURCE_DATE_EPOCH"))
        secs = static_cast<std::int64_t>(*epoch);
    else
        secs = std::chrono::duration_cast<std::chrono::seconds>(
                   std::chrono::system_clock::now().time_since_epoch())
                   .count();
    std::chrono::sys_seconds const tp{std::chrono::seconds{secs}};
    auto const day = std::chrono::floor<std::chrono::days>(tp);
    std::chrono::year_month_day const ymd{day};
    std::chrono::hh_mm_ss const hms{tp - day};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02lldZ", int(ymd.year()), unsigned(ymd.month()),
                  unsigned(ymd.day()), long(hms.hours().count()), long(hms.minutes().count()),
                  static_cast<long long>(hms.seconds().count()));
    return buf;
}

struct Manifest
{
    std::string command;
    nlohmann::json inputs = nlohmann::json::array();
    std::optional<std::uint64_t> seed;
    std::string started_at;
    nlohmann::json outputs = nlohmann::json::array();
    nlohmann::json parameters = nlohmann::json::object();

    void add_input(fs::path const& p, std::string const& content)
    {
        inputs.push_back({{"path", p.generic_string()}, {"fnv1a64", io::hex64(io::fnv1a64(content))}});
    }

    void write_output(fs::path const& p, std::string const& content, std::string const& schema)
    {
        io::write_file(p, content);
        outputs.push_back({{"path", p.generic_string()},
                           {"schema", schema},
                           {"fnv1a64", io::hex64(io::fnv1a64(content))}});
    }

    void finish(fs::path const& dir, EnvLookup const& env) const
    {
        nlohmann::json j{{"schema_version", manifest_schema_version},
                         {"toolkit_version", MPSTS_VERSION},
                         {"command", command},
                         {"inputs", inputs},
                         {"seed", seed ? nlohmann::json(*seed) : nlohmann::json(nullptr)},
                         {"parameters", parameters},
                         {"started_at", started_at},
                         {"finished_at", timestamp(env)},
                         {"outputs", outputs},
                         {"schemas",
                          {{"dataset_csv", dataset_schema_version},
                           {"fits_json", fits_schema_version},
                           {"report_csv", report_schema_version}}}};
        io::write_file(dir / "manifest.json", j.dump(2) + "\n");
    }
};

inline nlohmann::json parse_json(std::string const& text, std::string const& what, bool config)
{
    try {
        return nlohmann::json::parse(text);
    } catch (nlohmann::json::parse_error const& e) {
        std::string const msg = what + " is not valid JSON: " + e.what();
        if (config)
            throw ConfigError(what, msg);
        throw DataError(msg);
    }
}

inline void require_eta(double eta)
{
    if (!(eta > 0.0 && eta <= 1.0))
        throw ConfigError("eta", "efficiency must lie in (0, 1]");
}

} // namespace detail

//---------------------------------------------------------------------------//
// simulate
//---------------------------------------------------------------------------//

struct SimulateArgs
{
    std::optional<std::string> config;
    std::optional<std::uint64_t> seed;
    std::optional<double> mu0;
    std::optional<double> eta;
    std::optional<std::string> out;
    bool allow_correlated = false;
};

/// Run the cw simulation and write events.jsonl, dataset.csv, summary.json
/// and manifest.json into the output directory.
inline int cmd_simulate(SimulateArgs const& args, EnvLookup const& env, std::ostream& out, std::ostream& err)
{
    detail::Manifest manifest;
    manifest.command = "simulate";
    manifest.started_at = detail::timestamp(env);

    CwExperimentConfig cfg;
    auto const config_path = detail::pick(args.config, env, "MPSTS_CONFIG");
    if (config_path) {
        auto const text = io::read_file(*config_path);
        manifest.add_input(*config_path, text);
        cfg = config_from_json(detail::parse_json(text, "config", true));
    }
    if (auto v = detail::pick(args.seed, env, "MPSTS_SEED"))
        cfg.seed = *v;
    if (auto v = detail::pick(args.mu0, env, "MPSTS_MU0"))
        cfg.mu0 = *v;
    if (auto v = detail::pick(args.eta, env, "MPSTS_ETA"))
        cfg.eta = *v;
    fs::path const dir = detail::pick(args.out, env, "MPSTS_OUT").value_or("mpsts_out");
    cfg.validate();
    if (cfg.effective_bin_spacing() < 2.0 * cfg.tau_coh && !args.allow_correlated)
        throw CorrelatedBinsError("bin_spacing below 2*tau_coh makes neighbouring bins dependent; "
                                  "pass --allow-correlated to proceed");

    manifest.seed = cfg.seed;
    manifest.parameters = config_to_json(cfg);

    auto const log = simulate_cw(cfg);
    auto const ds = extract_conditional_bins(log, cfg.effective_bin_spacing(), args.allow_correlated);
    if (ds.correlated)
        err << "warning: conditional bins are closer than 2*tau_coh and statistically dependent\n";

    std::ostringstream events, dataset;
    write_event_log_jsonl(events, log);
    write_dataset_csv(dataset, ds);
    manifest.write_output(dir / "events.jsonl", events.str(), "events_jsonl/1");
    manifest.write_output(dir / "dataset.csv", dataset.str(), "dataset_csv/1");
    manifest.write_output(dir / "summary.json", dataset_summary_json(ds, log).dump(2) + "\n", "summary_json/1");
    manifest.finish(dir, env);

    out << "simulated " << log.windows.size() << " windows, " << ds.candidate_bins << " bins";
    for (auto const& [k, n] : ds.counts())
        out << (k == ds.counts().begin()->first ? ": " : ", ") << "k=" << k << " n=" << n;
    out << "\nwrote " << dir.generic_string() << "\n";
    return exit_ok;
}

//---------------------------------------------------------------------------//
// fit
//---------------------------------------------------------------------------//

struct FitArgs
{
    std::optional<std::string> dataset;
    std::optional<double> eta;
    std::optional<unsigned> k;
    std::optional<double> mu0;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

inline constexpr std::size_t min_fit_samples = 100;

/// Fit every k (or the selected one) of a dataset; writes fits.json,
/// report.csv and manifest.json.
inline int cmd_fit(FitArgs const& args, EnvLookup const& env, std::ostream& out, std::ostream& err)
{
    detail::Manifest manifest;
    manifest.command = "fit";
    manifest.started_at = detail::timestamp(env);

    auto const eta = detail::pick(args.eta, env, "MPSTS_ETA");
    if (!eta)
        throw ConfigError("eta", "efficiency is required (--eta or MPSTS_ETA)");
    detail::require_eta(*eta);
    auto const k_filter = detail::pick(args.k, env, "MPSTS_K");
    auto const mu0 = detail::pick(args.mu0, env, "MPSTS_MU0");
    if (mu0 && !(*mu0 > 0.0))
        throw ConfigError("mu0", "must be > 0");
    auto const seed = detail::pick(args.seed, env, "MPSTS_SEED");
    if (!args.dataset)
        throw ConfigError("dataset", "a dataset path is required (--dataset)");
    fs::path const dir = detail::pick(args.out, env, "MPSTS_OUT").value_or("mpsts_out");

    auto const text = io::read_file(*args.dataset);
    manifest.add_input(*args.dataset, text);
    auto const ds = read_dataset_csv(text);
    if (k_filter && !ds.samples.contains(*k_filter))
        throw DataError("k=" + std::to_string(*k_filter) + " is absent from the dataset");

    manifest.seed = seed;
    manifest.parameters = {{"eta", *eta},
                           {"k", k_filter ? nlohmann::json(*k_filter) : nlohmann::json(nullptr)},
                           {"mu0", mu0 ? nlohmann::json(*mu0) : nlohmann::json(nullptr)}};

    std::vector<KFit> fits;
    for (auto const& [k, samples] : ds.samples) {
        if (k_filter && k != *k_filter)
            continue;
        if (samples.size() < min_fit_samples) {
            err << "warning: k=" << k << " has " << samples.size() << " samples (< " << min_fit_samples
                << "), skipped\n";
            continue;
        }
        FitOptions opt;
        opt.seed = seed;
        try {
            auto fit = mle_fit(samples, *eta, opt);
            if (mu0)
                fit.fidelity = fidelity_diag(fit.params(), subtracted_thermal_params(*mu0, k));
            fits.push_back({k, std::move(fit)});
        } catch (FitFailure const& e) {
            err << "warning: k=" << k << " fit did not converge (" << e.what() << "), skipped\n";
        }
    }
    if (fits.empty())
        throw DataError("no k bin could be fitted");

    nlohmann::json rows = nlohmann::json::array();
    for (auto const& [k, f] : fits) {
        auto j = fit_result_to_json(f);
        j["k"] = k;
        rows.push_back(std::move(j));
    }
    nlohmann::json const doc{{"schema_version", fits_schema_version},
                             {"eta", *eta},
                             {"mu0", mu0 ? nlohmann::json(*mu0) : nlohmann::json(nullptr)},
                             {"fits", rows}};
    std::ostringstream report;
    write_report_csv(report, fits);
    manifest.write_output(dir / "fits.json", doc.dump(2) + "\n", "fits_json/1");
    manifest.write_output(dir / "report.csv", report.str(), "report_csv/1");
    manifest.finish(dir, env);

    for (auto const& [k, f] : fits)
        out << "k=" << k << " mu=" << io::format_number(f.mu) << " +- " << io::format_number(f.std_errors[0])
            << " a=" << io::format_number(f.a) << " +- " << io::format_number(f.std_errors[1]) << "\n";
    out << "wrote " << dir.generic_string() << "\n";
    return exit_ok;
}

//---------------------------------------------------------------------------//
// report
//---------------------------------------------------------------------------//

struct ReportArgs
{
    std::optional<std::string> fits;
    std::optional<std::string> dataset;
    std::optional<double> mu0;
    std::optional<std::string> out;
};

namespace detail {

inline std::string cell(std::optional<double> v)
{
    return v ? io::format_number(*v) : std::string();
}

/// Simpson integral of the model density over [lo, hi].
inline double bin_probability(QuadratureModel const& model, double lo, double hi)
{
    int const m = 16;
    double const h = (hi - lo) / m;
    double acc = model.density(lo) + model.density(hi);
    for (int i = 1; i < m; ++i)
        acc += (i % 2 ? 4.0 : 2.0) * model.density(lo + i * h);
    return acc * h / 3.0;
}

} // namespace detail

/// Plot-ready grids from a fits.json: moments.csv, params.csv,
/// pdf_overlay_k{k}.csv, wigner_radial.csv and, with a dataset,
/// histogram_k{k}.csv.
inline int cmd_report(ReportArgs const& args, EnvLookup const& env, std::ostream& out, std::ostream&)
{
    detail::Manifest manifest;
    manifest.command = "report";
    manifest.started_at = detail::timestamp(env);
    if (!args.fits)
        throw ConfigError("fits", "a fits.json path is required (--fits)");
    fs::path const dir = detail::pick(args.out, env, "MPSTS_OUT").value_or("mpsts_report");

    auto const text = io::read_file(*args.fits);
    manifest.add_input(*args.fits, text);
    auto const doc = detail::parse_json(text, "fits", false);
    if (!doc.is_object() || !doc.contains("fits") || !doc["fits"].is_array())
        throw DataError("fits file lacks a 'fits' array");
    if (doc["fits"].empty())
        throw DataError("fits file contains no fit rows");
    double const eta = doc.value("eta", 1.0);
    std::optional<double> mu0 = detail::pick(args.mu0, env, "MPSTS_MU0");
    if (!mu0 && doc.contains("mu0") && doc["mu0"].is_number())
        mu0 = doc["mu0"].get<double>();

    std::vector<KFit> fits;
    for (auto const& row : doc["fits"]) {
        if (!row.contains("k") || !row["k"].is_number_unsigned())
            throw DataError("fit row lacks a nonnegative integer 'k'");
        fits.push_back({row["k"].get<unsigned>(), fit_result_from_json(row)});
    }

    std::optional<ConditionalDataset> ds;
    if (args.dataset) {
        auto const dtext = io::read_file(*args.dataset);
        manifest.add_input(*args.dataset, dtext);
        ds = read_dataset_csv(dtext);
    }
    manifest.parameters = {{"eta", eta}, {"mu0", mu0 ? nlohmann::json(*mu0) : nlohmann::json(nullptr)}};

    std::ostringstream moments, params, wigner_csv;
    moments << "k,variance_fit,kurtosis_fit,variance_theory,kurtosis_theory,variance_sample,kurtosis_sample\n";
    params << "k,mu,sigma_mu,a,sigma_a,mu_theory,a_theory\n";
    wigner_csv << "k,r,w_fit,w_theory\n";
    for (auto const& [k, f] : fits) {
        auto const fit_m = moments_from_params({eta * f.mu, f.a});
        std::optional<CompoundPoissonParams> theory;
        std::optional<MomentSummary> theory_m;
        if (mu0) {
            theory = subtracted_thermal_params(*mu0, k);
            theory_m = moments_from_params({eta * theory->mu, theory->a});
        }
        std::optional<double> sample_var, sample_kurt;
        if (ds && ds->samples.contains(k) && ds->samples.at(k).size() >= 30) {
            auto const m = moment_estimate(ds->samples.at(k));
            sample_var = m.variance;
            sample_kurt = m.kurtosis;
        }
        moments << k << ',' << io::format_number(fit_m.variance) << ',' << io::format_number(fit_m.kurtosis) << ','
                << detail::cell(theory_m ? std::optional(theory_m->variance) : std::nullopt) << ','
                << detail::cell(theory_m ? std::optional(theory_m->kurtosis) : std::nullopt) << ','
                << detail::cell(sample_var) << ',' << detail::cell(sample_kurt) << '\n';
        params << k << ',' << io::format_number(f.mu) << ',' << detail::cell(f.std_errors[0]) << ','
               << io::format_number(f.a) << ',' << detail::cell(f.std_errors[1]) << ','
               << detail::cell(theory ? std::optional(theory->mu) : std::nullopt) << ','
               << detail::cell(theory ? std::optional(theory->a) : std::nullopt) << '\n';

        // Quadrature density overlay on ±6σ of the fitted distribution.
        QuadratureModel const fit_model(f.params(), eta);
        std::optional<QuadratureModel> theory_model;
        if (theory)
            theory_model.emplace(*theory, eta);
        double const lim = 6.0 * std::sqrt(fit_m.variance);
        std::ostringstream pdf;
        pdf << "q,pdf_fit,pdf_theory\n";
        for (double q : linspace(-lim, lim, 241))
            pdf << io::format_number(q) << ',' << io::format_number(fit_model.density(q)) << ','
                << detail::cell(theory_model ? std::optional(theory_model->density(q)) : std::nullopt) << '\n';
        manifest.write_output(dir / ("pdf_overlay_k" + std::to_string(k) + ".csv"), pdf.str(), "pdf_overlay_csv/1");

        if (ds && ds->samples.contains(k)) {
            auto const& samples = ds->samples.at(k);
            std::size_t const bins = 60;
            std::vector<double> counts(bins, 0.0);
            double const width = 2.0 * lim / bins;
            for (double q : samples) {
                auto const i = static_cast<long>(std::floor((q + lim) / width));
                if (i >= 0 && i < static_cast<long>(bins))
                    counts[i] += 1.0;
            }
            std::ostringstream hist;
            hist << "bin_lo,bin_hi,count,density,model_probability\n";
            for (std::size_t i = 0; i < bins; ++i) {
                double const lo = -lim + i * width, hi = lo + width;
                hist << io::format_number(lo) << ',' << io::format_number(hi) << ',' << counts[i] << ','
                     << io::format_number(counts[i] / (samples.size() * width)) << ','
                     << io::format_number(detail::bin_probability(fit_model, lo, hi)) << '\n';
            }
            manifest.write_output(dir / ("histogram_k" + std::to_string(k) + ".csv"), hist.str(),
                                  "histogram_csv/1");
        }

        auto const fit_pmf = pmf_adaptive(f.params(), quadrature_tail_mass);
        std::vector<double> theory_pmf;
        if (theory)
            theory_pmf = pmf_adaptive(*theory, quadrature_tail_mass);
        for (double r : linspace(0.0, 4.0, 81))
            wigner_csv << k << ',' << io::format_number(r) << ',' << io::format_number(wigner(fit_pmf, r, 0.0)) << ','
                       << detail::cell(theory ? std::optional(wigner(theory_pmf, r, 0.0)) : std::nullopt) << '\n';
    }
    manifest.write_output(dir / "moments.csv", moments.str(), "moments_csv/1");
    manifest.write_output(dir / "params.csv", params.str(), "params_csv/1");
    manifest.write_output(dir / "wigner_radial.csv", wigner_csv.str(), "wigner_radial_csv/1");
    manifest.finish(dir, env);
    out << "wrote " << manifest.outputs.size() << " report files to " << dir.generic_string() << "\n";
    return exit_ok;
}

//---------------------------------------------------------------------------//
// Entry point
//---------------------------------------------------------------------------//

/// Map toolkit exceptions to the exit-code contract.
template<class F>
int guarded(F&& f, std::ostream& err)
{
    try {
        return f();
    } catch (ConfigError const& e) {
        err << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (CorrelatedBinsError const& e) {
        err << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (DomainError const& e) {
        err << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (IoError const& e) {
        err << "i/o error: " << e.what() << "\n";
        return exit_io;
    } catch (DataError const& e) {
        err << "data error: " << e.what() << "\n";
        return exit_data;
    } catch (InsufficientDataError const& e) {
        err << "data error: " << e.what() << "\n";
        return exit_data;
    } catch (EstimationError const& e) {
        err << "data error: " << e.what() << "\n";
        return exit_data;
    }
}

/// Parse arguments (program name excluded) and dispatch.
inline int run_cli(std::vector<std::string> args,
                   EnvLookup const& env = process_env,
                   std::ostream& out = std::cout,
                   std::ostream& err = std::cerr)
{
    CLI::App app{"Simulation and reconstruction of multi-photon-subtracted thermal states", "mpsts"};
    app.set_version_flag("--version", std::string(MPSTS_VERSION));
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "time-domain cw simulation to a conditional dataset");
    s->add_option("--config", sim.config, "JSON configuration file");
    s->add_option("--seed", sim.seed, "RNG seed");
    s->add_option("--mu0", sim.mu0, "mean photon number of click-free windows");
    s->add_option("--eta", sim.eta, "homodyne efficiency");
    s->add_option("--out", sim.out, "output directory");
    s->add_flag("--allow-correlated", sim.allow_correlated, "accept bin spacing below 2 tau_coh");

    FitArgs fit;
    auto* f = app.add_subcommand("fit", "maximum-likelihood fit per click number k");
    f->add_option("--dataset", fit.dataset, "dataset CSV (k,q)");
    f->add_option("--eta", fit.eta, "homodyne efficiency");
    f->add_option("--k", fit.k, "fit only this k");
    f->add_option("--mu0", fit.mu0, "reference mean photon number for fidelity");
    f->add_option("--seed", fit.seed, "seed recorded with the results");
    f->add_option("--out", fit.out, "output directory");

    ReportArgs rep;
    auto* r = app.add_subcommand("report", "plot-ready CSV grids from fit results");
    r->add_option("--fits", rep.fits, "fits.json from the fit command");
    r->add_option("--dataset", rep.dataset, "dataset CSV for histograms and sample moments");
    r->add_option("--mu0", rep.mu0, "reference mean photon number for theory curves");
    r->add_option("--out", rep.out, "output directory");

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (CLI::CallForHelp const&) {
        out << app.help();
        return exit_ok;
    } catch (CLI::CallForVersion const&) {
        out << MPSTS_VERSION << "\n";
        return exit_ok;
    } catch (CLI::ParseError const& e) {
        err << "usage error: " << e.what() << "\n";
        return exit_config;
    }

    if (s->parsed())
        return guarded([&] { return cmd_simulate(sim, env, out, err); }, err);
    if (f->parsed())
        return guarded([&] { return cmd_fit(fit, env, out, err); }, err);
    return guarded([&] { return cmd_report(rep, env, out, err); }, err);
}

} // namespace mpsts::cli
