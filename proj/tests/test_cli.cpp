// Copyright 2026 The mpsts Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "mpsts/cli.hpp"

namespace {

using namespace mpsts;
namespace fs = std::filesystem;

struct CliRun
{
    int code;
    std::string out;
    std::string err;
};

class Cli : public ::testing::Test
{
  protected:
    void SetUp() override
    {
        auto const* info = ::testing::UnitTest::GetInstance()->current_test_info();
        root_ = fs::temp_directory_path() / "mpsts_cli_tests" / info->name();
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    void TearDown() override { fs::remove_all(root_); }

    CliRun run(std::vector<std::string> args) const
    {
        std::ostringstream out, err;
        auto const env = env_;
        int const code = cli::run_cli(
            std::move(args),
            [env](std::string const& name) -> std::optional<std::string> {
                auto it = env.find(name);
                return it == env.end() ? std::nullopt : std::optional(it->second);
            },
            out,
            err);
        return {code, out.str(), err.str()};
    }

    std::string path(std::string const& name) const { return (root_ / name).string(); }

    void write(std::string const& name, std::string const& content) const { io::write_file(root_ / name, content); }

    std::string read(std::string const& name) const { return io::read_file(root_ / name); }

    /// Dataset with n samples per k drawn from the k-subtracted thermal state.
    void write_direct_dataset(std::string const& name, std::map<unsigned, std::size_t> const& sizes, double mu0 = 1.63)
    {
        ConditionalDataset ds;
        for (auto const& [k, n] : sizes)
            ds.samples[k] = sample_quadratures_direct(subtracted_thermal_params(mu0, k), 0.78, n, 500 + k);
        std::ostringstream os;
        write_dataset_csv(os, ds);
        write(name, os.str());
    }

    std::string short_config(std::uint64_t seed = 1) const
    {
        return nlohmann::json{{"duration", 0.2}, {"dt", 0.5e-6}, {"tap_gain", 30.0}, {"seed", seed}}.dump();
    }

    fs::path root_;
    std::map<std::string, std::string> env_{{"SOURCE_DATE_EPOCH", "1700000000"}};
};

// --------------------------------------------------------------- simulate ---

TEST_F(Cli, SimulateWritesAllFilesAndManifest)
{
    write("cfg.json", short_config());
    auto const r = run({"simulate", "--config", path("cfg.json"), "--out", path("sim")});
    ASSERT_EQ(r.code, 0) << r.err;
    for (char const* f : {"events.jsonl", "dataset.csv", "summary.json", "manifest.json"})
        EXPECT_TRUE(fs::exists(root_ / "sim" / f)) << f;
    auto const m = nlohmann::json::parse(read("sim/manifest.json"));
    EXPECT_EQ(m["command"], "simulate");
    EXPECT_EQ(m["seed"], 1);
    EXPECT_EQ(m["started_at"], "2023-11-14T22:13:20Z");
    EXPECT_EQ(m["inputs"][0]["fnv1a64"], io::hex64(io::fnv1a64(read("cfg.json"))));
    ASSERT_EQ(m["outputs"].size(), 3u);
    for (auto const& o : m["outputs"])
        EXPECT_EQ(o["fnv1a64"], io::hex64(io::fnv1a64(io::read_file(o["path"].get<std::string>()))));
    auto const summary = nlohmann::json::parse(read("sim/summary.json"));
    EXPECT_EQ(summary["candidate_bins"], 2500);
}

TEST_F(Cli, SimulateInvalidConfigExitsTwoNamingInvariant)
{
    write("bad.json", R"({"tau_a": 5e-5, "tau_coh": 4e-5})");
    auto const r = run({"simulate", "--config", path("bad.json"), "--out", path("sim")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("tau_a"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(root_ / "sim" / "dataset.csv"));

    write("syntax.json", "{ not json");
    EXPECT_EQ(run({"simulate", "--config", path("syntax.json")}).code, 2);
    write("unknown.json", R"({"tau_cho": 1})");
    EXPECT_EQ(run({"simulate", "--config", path("unknown.json")}).code, 2);
    write("close.json", R"({"bin_spacing": 4e-5, "window_period": 4e-5})");
    EXPECT_EQ(run({"simulate", "--config", path("close.json"), "--out", path("c")}).code, 2);
}

TEST_F(Cli, SimulateMissingConfigIsIoError)
{
    EXPECT_EQ(run({"simulate", "--config", path("nope.json")}).code, 3);
}

TEST_F(Cli, SimulateRerunIsByteIdentical)
{
    write("cfg.json", short_config(9));
    ASSERT_EQ(run({"simulate", "--config", path("cfg.json"), "--out", path("a")}).code, 0);
    ASSERT_EQ(run({"simulate", "--config", path("cfg.json"), "--out", path("b")}).code, 0);
    EXPECT_EQ(read("a/dataset.csv"), read("b/dataset.csv"));
    EXPECT_EQ(read("a/events.jsonl"), read("b/events.jsonl"));
    ASSERT_EQ(run({"simulate", "--config", path("cfg.json"), "--seed", "10", "--out", path("c")}).code, 0);
    EXPECT_NE(read("a/dataset.csv"), read("c/dataset.csv"));
}

TEST_F(Cli, OptionPrecedenceFlagEnvConfig)
{
    write("cfg.json", short_config(5));
    env_["MPSTS_SEED"] = "6";
    env_["MPSTS_OUT"] = path("env_out");
    ASSERT_EQ(run({"simulate", "--config", path("cfg.json")}).code, 0);
    EXPECT_EQ(nlohmann::json::parse(read("env_out/manifest.json"))["seed"], 6);
    ASSERT_EQ(run({"simulate", "--config", path("cfg.json"), "--seed", "7", "--out", path("flag_out")}).code, 0);
    EXPECT_EQ(nlohmann::json::parse(read("flag_out/manifest.json"))["seed"], 7);
    env_["MPSTS_CONFIG"] = path("cfg.json");
    env_.erase("MPSTS_SEED");
    ASSERT_EQ(run({"simulate", "--out", path("cfg_out")}).code, 0);
    EXPECT_EQ(nlohmann::json::parse(read("cfg_out/manifest.json"))["seed"], 5);
    env_["MPSTS_SEED"] = "seven";
    EXPECT_EQ(run({"simulate", "--out", path("x")}).code, 2);
}

TEST_F(Cli, UsageErrors)
{
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    EXPECT_EQ(run({"simulate", "--seed", "abc"}).code, 2);
    auto const help = run({"--help"});
    EXPECT_EQ(help.code, 0);
    EXPECT_NE(help.out.find("simulate"), std::string::npos);
}

// -------------------------------------------------------------------- fit ---

TEST_F(Cli, FitEfficiencyOutOfRangeExitsTwo)
{
    write_direct_dataset("d.csv", {{0, 300}});
    EXPECT_EQ(run({"fit", "--dataset", path("d.csv"), "--eta", "1.5", "--out", path("f")}).code, 2);
    EXPECT_EQ(run({"fit", "--dataset", path("d.csv"), "--out", path("f")}).code, 2);
}

TEST_F(Cli, FitAbsentKExitsFour)
{
    write_direct_dataset("d.csv", {{0, 300}, {1, 300}});
    auto const r = run({"fit", "--dataset", path("d.csv"), "--eta", "0.78", "--k", "7", "--out", path("f")});
    EXPECT_EQ(r.code, 4);
    EXPECT_NE(r.err.find("k=7"), std::string::npos);
}

TEST_F(Cli, FitInputErrors)
{
    EXPECT_EQ(run({"fit", "--dataset", path("missing.csv"), "--eta", "0.78"}).code, 3);
    write("bad.csv", "k,q\n0,abc\n");
    EXPECT_EQ(run({"fit", "--dataset", path("bad.csv"), "--eta", "0.78"}).code, 4);
    write_direct_dataset("sparse.csv", {{0, 50}});
    auto const r = run({"fit", "--dataset", path("sparse.csv"), "--eta", "0.78", "--out", path("f")});
    EXPECT_EQ(r.code, 4);
    EXPECT_NE(r.err.find("skipped"), std::string::npos);
}

TEST_F(Cli, FitKFilterGivesOneRow)
{
    write_direct_dataset("d.csv", {{2, 400}, {3, 400}, {4, 400}});
    env_["MPSTS_K"] = "2";
    auto const r = run({"fit", "--dataset", path("d.csv"), "--eta", "0.78", "--k", "3", "--out", path("f")});
    ASSERT_EQ(r.code, 0) << r.err;
    auto const report = read("f/report.csv");
    EXPECT_EQ(std::count(report.begin(), report.end(), '\n'), 2);
    EXPECT_EQ(report.substr(report.find('\n') + 1, 2), "3,");
}

TEST_F(Cli, FitAllKWithFidelityAndSparseWarning)
{
    write_direct_dataset("d.csv", {{0, 4000}, {1, 4000}, {2, 4000}, {3, 4000}, {4, 4000}, {5, 4000}, {9, 60}});
    auto const r = run(
        {"fit", "--dataset", path("d.csv"), "--eta", "0.78", "--mu0", "1.63", "--seed", "4", "--out", path("f")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("k=9"), std::string::npos);
    auto const doc = nlohmann::json::parse(read("f/fits.json"));
    ASSERT_EQ(doc["fits"].size(), 6u);
    for (auto const& row : doc["fits"]) {
        EXPECT_GT(row["fidelity"].get<double>(), 0.99) << row["k"];
        EXPECT_EQ(row["seed"], 4);
    }
    auto const report = read("f/report.csv");
    EXPECT_EQ(std::count(report.begin(), report.end(), '\n'), 7);
}

TEST_F(Cli, FitRerunIsByteIdentical)
{
    write_direct_dataset("d.csv", {{0, 1500}, {1, 1500}});
    ASSERT_EQ(run({"fit", "--dataset", path("d.csv"), "--eta", "0.78", "--mu0", "1.63", "--out", path("a")}).code, 0);
    ASSERT_EQ(run({"fit", "--dataset", path("d.csv"), "--eta", "0.78", "--mu0", "1.63", "--out", path("b")}).code, 0);
    EXPECT_EQ(read("a/fits.json"), read("b/fits.json"));
    EXPECT_EQ(read("a/report.csv"), read("b/report.csv"));
}

// ----------------------------------------------------------------- report ---

TEST_F(Cli, ReportTheoryCurvesAndOverlays)
{
    write_direct_dataset("d.csv", {{0, 3000}, {1, 3000}, {2, 3000}, {3, 3000}, {4, 3000}, {5, 3000}});
    ASSERT_EQ(run({"fit", "--dataset", path("d.csv"), "--eta", "0.78", "--mu0", "1.63", "--out", path("f")}).code, 0);
    auto const r = run({"report", "--fits", path("f/fits.json"), "--dataset", path("d.csv"), "--out", path("rep")});
    ASSERT_EQ(r.code, 0) << r.err;

    // Theory columns follow σ² = ημ + 1/2 and K = 3 - 6(ημ/(2ημ+1))²(a-1)/a
    // with (μ, a) = (μ0(k+1), k+1).
    std::istringstream moments(read("rep/moments.csv"));
    std::string line;
    std::getline(moments, line);
    EXPECT_EQ(line, "k,variance_fit,kurtosis_fit,variance_theory,kurtosis_theory,variance_sample,kurtosis_sample");
    int rows = 0;
    while (std::getline(moments, line)) {
        auto const cells = io::split(line);
        ASSERT_EQ(cells.size(), 7u);
        double const k = io::parse_number(cells[0], "k");
        double const m = 0.78 * 1.63 * (k + 1), a = k + 1;
        double const ratio = m / (2 * m + 1);
        EXPECT_NEAR(io::parse_number(cells[3], "v"), m + 0.5, 1e-12);
        EXPECT_NEAR(io::parse_number(cells[4], "K"), 3 - 6 * ratio * ratio * (a - 1) / a, 1e-12);
        EXPECT_NEAR(io::parse_number(cells[5], "vs") / (m + 0.5), 1.0, 0.1);
        ++rows;
    }
    EXPECT_EQ(rows, 6);

    for (int k = 0; k < 6; ++k) {
        EXPECT_TRUE(fs::exists(root_ / "rep" / ("pdf_overlay_k" + std::to_string(k) + ".csv")));
        EXPECT_TRUE(fs::exists(root_ / "rep" / ("histogram_k" + std::to_string(k) + ".csv")));
    }

    // Histogram of k=1 against per-bin model probabilities.
    std::istringstream hist(read("rep/histogram_k1.csv"));
    std::getline(hist, line);
    double chi2 = 0.0, total_prob = 0.0;
    int used = 0;
    while (std::getline(hist, line)) {
        auto const cells = io::split(line);
        double const count = io::parse_number(cells[2], "count");
        double const prob = io::parse_number(cells[4], "p");
        total_prob += prob;
        double const expected = prob * 3000;
        if (expected >= 5) {
            chi2 += (count - expected) * (count - expected) / expected;
            ++used;
        }
    }
    EXPECT_NEAR(total_prob, 1.0, 1e-6);
    EXPECT_GT(chi2_upper_tail(chi2, used - 1), 1e-3);

    auto const wig = read("rep/wigner_radial.csv");
    EXPECT_EQ(std::count(wig.begin(), wig.end(), '\n'), 1 + 6 * 81);
}

TEST_F(Cli, ReportSingleRowAndEmptyInput)
{
    write_direct_dataset("d.csv", {{2, 500}});
    ASSERT_EQ(run({"fit", "--dataset", path("d.csv"), "--eta", "0.78", "--out", path("f")}).code, 0);
    auto const r = run({"report", "--fits", path("f/fits.json"), "--out", path("rep")});
    ASSERT_EQ(r.code, 0) << r.err;
    auto const params = read("rep/params.csv");
    EXPECT_EQ(std::count(params.begin(), params.end(), '\n'), 2);
    EXPECT_TRUE(fs::exists(root_ / "rep" / "pdf_overlay_k2.csv"));

    write("empty.json", R"({"schema_version": 1, "eta": 0.78, "fits": []})");
    EXPECT_EQ(run({"report", "--fits", path("empty.json"), "--out", path("e")}).code, 4);
    write("garbage.json", "[1, 2");
    EXPECT_EQ(run({"report", "--fits", path("garbage.json"), "--out", path("e")}).code, 4);
    EXPECT_EQ(run({"report", "--fits", path("none.json"), "--out", path("e")}).code, 3);
}

TEST_F(Cli, ReportRerunIsByteIdentical)
{
    write_direct_dataset("d.csv", {{1, 800}});
    ASSERT_EQ(run({"fit", "--dataset", path("d.csv"), "--eta", "0.78", "--mu0", "1.63", "--out", path("f")}).code, 0);
    ASSERT_EQ(run({"report", "--fits", path("f/fits.json"), "--out", path("a")}).code, 0);
    ASSERT_EQ(run({"report", "--fits", path("f/fits.json"), "--out", path("b")}).code, 0);
    for (char const* f : {"moments.csv", "params.csv", "wigner_radial.csv", "pdf_overlay_k1.csv"})
        EXPECT_EQ(read(std::string("a/") + f), read(std::string("b/") + f)) << f;
}

} // namespace
