#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "../support/oracles.hpp"
#include "../support/trace_oracle.hpp"
#include "heartbeatcam/scenario.hpp"
#include "heartbeatcam/store.hpp"
#include "heartbeatcam/zip.hpp"

using namespace heartbeatcam;
using testutil::TempDir;
using testutil::read_text;

namespace {

const std::filesystem::path kSource = HB_SOURCE_DIR;

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(const std::string& args) {
    TempDir tmp("cli");
    const auto out = tmp / "out.txt";
    const auto err = tmp / "err.txt";
    const std::string cmd = std::string(HB_CLI_PATH) + " " + args + " > '" + out.string() + "' 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_text(out), read_text(err)};
}

std::string fixture(const std::string& name) { return "'" + (kSource / "tests" / "fixtures" / name).string() + "'"; }
std::string scenario(const std::string& name) { return "'" + (kSource / "samples" / "scenarios" / name).string() + "'"; }

std::vector<std::vector<std::string>> csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> cols;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
        if (!line.empty() && line.back() == ',') cols.emplace_back();
        rows.push_back(cols);
    }
    return rows;
}

void write(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

}  // namespace

TEST(Cli, AnalyzeConstantRrGivesZero) {
    const auto r = cli("analyze " + fixture("constant_rr.csv"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = csv(r.out);
    ASSERT_GT(rows.size(), 100u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"window_end_ms", "rmssd_ms", "n_beats", "mean_hr", "state"}));
    for (std::size_t i = 1; i < rows.size(); ++i) {
        ASSERT_EQ(rows[i].size(), 5u);
        EXPECT_EQ(std::stod(rows[i][1]), 0.0);
        EXPECT_EQ(std::stod(rows[i][3]), 75.0);
        EXPECT_EQ(rows[i][4], "calm");  // 0 < 0 is false
    }
}

TEST(Cli, AnalyzeMatchesOracle) {
    const auto r = cli("analyze " + fixture("stepped_rr.csv") + " --min-samples 5 --include-insufficient");
    ASSERT_EQ(r.code, 0) << r.err;
    std::vector<oracle::Beat> beats;
    const auto input = csv(read_text(kSource / "tests" / "fixtures" / "stepped_rr.csv"));
    for (std::size_t i = 1; i < input.size(); ++i)
        beats.push_back({std::stoll(input[i][0]), std::stod(input[i][1]), std::stoull(input[i][2])});
    const auto rows = csv(r.out);
    ASSERT_EQ(rows.size(), beats.size() + 1);
    for (std::size_t i = 0; i < beats.size(); ++i) {
        const auto& row = rows[i + 1];
        EXPECT_EQ(std::stoll(row[0]), beats[i].t);
        const auto expect = oracle::rmssd(beats, beats[i].t);
        if (!expect) {
            EXPECT_EQ(row[4], "insufficient_data");
            EXPECT_TRUE(row[1].empty());
            continue;
        }
        EXPECT_NEAR(std::stod(row[1]), expect->rmssd, 1e-9);
        EXPECT_EQ(std::stoul(row[2]), expect->n_beats);
        EXPECT_NEAR(std::stod(row[3]), expect->mean_hr, 1e-9);
        // Every reading equals the baseline mean, and equality is not stress.
        EXPECT_EQ(row[4], "calm");
    }
}

TEST(Cli, CalibrateThenAnalyzeWithBaseline) {
    TempDir dir;
    const auto r = cli("calibrate " + fixture("stepped_rr.csv") + " --min-samples 5 --k 2");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_NEAR(j["mean"].get<double>(), 20.0, 1e-12);
    EXPECT_NEAR(j["sd"].get<double>(), 0.0, 1e-12);
    EXPECT_EQ(j["k"], 2.0);
    EXPECT_EQ(j["n_samples"], 51);

    json b = {{"mean", 40.0}, {"sd", 5.0}, {"k", 1.5}, {"n_samples", 500}};
    write(dir / "baseline.json", b.dump());
    const auto a = cli("analyze " + fixture("stepped_rr.csv") + " --baseline '" + (dir / "baseline.json").string() + "'");
    ASSERT_EQ(a.code, 0) << a.err;
    const auto rows = csv(a.out);
    ASSERT_GT(rows.size(), 1u);
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i][4], "stressed");  // 20 < 32.5
}

TEST(Cli, CalibrateNeedsEnoughReadings) {
    const auto r = cli("calibrate " + fixture("stepped_rr.csv"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("error"), std::string::npos);
}

TEST(Cli, MalformedCsvNamesLineAndField) {
    TempDir dir;
    write(dir / "bad.csv", "t_ms,rr_ms,seq\n800,800,1\n1600,abc,2\n");
    auto r = cli("analyze '" + (dir / "bad.csv").string() + "'");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("rr_ms"), std::string::npos) << r.err;

    write(dir / "seq.csv", "t_ms,rr_ms,seq\n800,800,2\n1600,800,2\n");
    r = cli("analyze '" + (dir / "seq.csv").string() + "'");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("seq"), std::string::npos) << r.err;

    write(dir / "header.csv", "time,rr,seq\n800,800,1\n");
    r = cli("analyze '" + (dir / "header.csv").string() + "'");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("line 1"), std::string::npos) << r.err;

    write(dir / "cols.csv", "t_ms,rr_ms,seq\n800,800\n");
    r = cli("analyze '" + (dir / "cols.csv").string() + "'");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(cli("").code, 1);
    EXPECT_EQ(cli("analyze").code, 1);
    EXPECT_EQ(cli("frobnicate").code, 1);
    EXPECT_EQ(cli("analyze x.csv --k -1").code, 1);
    EXPECT_EQ(cli("--help").code, 0);
}

TEST(Cli, MissingFileIsAnError) {
    const auto r = cli("analyze /nonexistent/rr.csv");
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("/nonexistent/rr.csv"), std::string::npos);
}

TEST(Cli, SimulateTwoEpisodeMatchesGolden) {
    TempDir dir;
    const auto r = cli("simulate " + scenario("two_episode.json") + " --store '" + (dir / "store").string() + "'");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, read_text(kSource / "tests" / "golden" / "two_episode.txt"));

    // Capture times must match an independent reading of the same trace.
    const auto prediction = oracle::predict_captures(load_scenario(kSource / "samples" / "scenarios" / "two_episode.json"));
    Store store(dir / "store");
    std::vector<std::int64_t> captured;
    for (const auto& e : store.events()) captured.push_back(e.captured_at);
    EXPECT_EQ(captured, prediction.captures);
    ASSERT_FALSE(store.events().empty());
    EXPECT_NEAR(store.events()[0].baseline.mean, prediction.baseline_mean, 1e-9);
    EXPECT_NEAR(store.events()[0].baseline.sd, prediction.baseline_sd, 1e-9);
    EXPECT_NE(read_text(dir / "store" / "trigger.log").find("capture_complete id=4"), std::string::npos);
}

TEST(Cli, SimulateRefusesNonEmptyStore) {
    TempDir dir;
    const auto args = "simulate " + scenario("demo.json") + " --calibration-ms 300000 --store '" + dir.path().string() + "'";
    ASSERT_EQ(cli(args).code, 0);
    const auto r = cli(args);
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("empty"), std::string::npos) << r.err;
}

TEST(Cli, DemoScenario) {
    TempDir dir;
    const auto r = cli("simulate " + scenario("demo.json") + " --calibration-ms 300000 --store '" + (dir / "s").string() + "'");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("captures: "), std::string::npos);
}

TEST(Cli, BadScenarioIsDataError) {
    TempDir dir;
    write(dir / "s.json", R"({"duration": -5, "rr_mean": 800, "rr_jitter": 40, "seed": 1})");
    const auto r = cli("simulate '" + (dir / "s.json").string() + "' --store '" + (dir / "st").string() + "'");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("duration"), std::string::npos) << r.err;
}

TEST(Cli, ExportEmptyStore) {
    TempDir dir;
    { Store s(dir / "store"); }
    const auto zip = dir / "out" / "review.zip";
    const auto r = cli("export --store '" + (dir / "store").string() + "' --out '" + zip.string() + "'");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("events: 0"), std::string::npos);
    const auto files = read_zip(Store::load_file(zip));
    ASSERT_EQ(files.size(), 2u);
    EXPECT_EQ(files[0].first, "manifest.json");
    EXPECT_EQ(json::parse(std::string(files[0].second.begin(), files[0].second.end())), json::array());
}

TEST(Cli, ExportAfterSimulateUsesStoreClock) {
    TempDir dir;
    const auto store = (dir / "store").string();
    ASSERT_EQ(cli("simulate " + scenario("two_episode.json") + " --store '" + store + "'").code, 0);
    // The run ends under 24 h after the last capture, so nothing is revealed yet.
    auto r = cli("export --store '" + store + "' --out '" + (dir / "a.zip").string() + "'");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("events: 0"), std::string::npos) << r.out;
    r = cli("export --store '" + store + "' --out '" + (dir / "b.zip").string() + "' --include-unrevealed");
    EXPECT_NE(r.out.find("events: 4"), std::string::npos) << r.out;
    r = cli("export --store '" + store + "' --out '" + (dir / "c.zip").string() + "' --now 900000000");
    EXPECT_NE(r.out.find("events: 4"), std::string::npos) << r.out;
    const auto again = cli("export --store '" + store + "' --out '" + (dir / "d.zip").string() + "' --now 900000000");
    EXPECT_EQ(read_text(dir / "c.zip"), read_text(dir / "d.zip"));
    EXPECT_NE(cli("export --store /nonexistent --out x.zip").code, 0);
}
