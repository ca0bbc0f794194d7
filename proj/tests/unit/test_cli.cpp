#include <catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>

#include "cmwf/audio.hpp"
#include "cmwf/harness.hpp"
#include "support.hpp"

using namespace cmwf;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string output;
};

// Runs the CLI with stderr folded into the captured output.
Run cli(const std::string& args) {
    const std::string cmd = std::string(CMWF_CLI_PATH) + " " + args + " 2>&1";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), static_cast<int>(buf.size()), p)) r.output += buf.data();
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path workdir() {
    static const fs::path dir = [] {
        const auto d = fs::temp_directory_path() / "cmwf_test_cli";
        fs::remove_all(d);
        fs::create_directories(d);
        std::ofstream(d / "small.cfg") << "[experiment]\nruns = 1\nvalues = -10\nvariants = mwf, cmwf\nthreads = 1\n"
                                          "seed = 9\n[source]\nduration_s = 2\n";
        return d;
    }();
    return dir;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::vector<std::vector<std::string>> read_csv(const fs::path& p, std::string* header = nullptr) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    if (header) *header = line;
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string item; std::getline(ss, item, ',');) f.push_back(item);
        rows.push_back(f);
    }
    return rows;
}

std::map<std::string, std::string> read_meta(const fs::path& p) {
    std::map<std::string, std::string> m;
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos) m[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return m;
}

// One exported scene shared by the tests below.
fs::path scene_dir() {
    static const fs::path dir = [] {
        const auto out = workdir() / "scenes";
        const Run r = cli("--config " + q(workdir() / "small.cfg") + " --out-dir " + q(out) + " gen-scene --count 1");
        REQUIRE(r.code == 0);
        return out / "scene_000";
    }();
    return dir;
}

}  // namespace

TEST_CASE("configuration errors", "[cli]") {
    const Run missing = cli("--config /nonexistent/missing.cfg synth-sweep");
    CHECK(missing.code != 0);
    CHECK(missing.output.find("/nonexistent/missing.cfg") != std::string::npos);

    const auto bad = workdir() / "bad.cfg";
    std::ofstream(bad) << "[enhance]\nshiftz = 2\n";
    const Run r = cli("--config " + q(bad) + " --print-config");
    CHECK(r.code != 0);
    CHECK(r.output.find("enhance.shiftz") != std::string::npos);

    CHECK(cli("--no-such-flag").code != 0);
    CHECK(cli("enhance --noisy x.wav").code != 0);
}

TEST_CASE("printing the effective configuration", "[cli]") {
    const Run r = cli("--seed 42 --config " + q(workdir() / "small.cfg") + " --print-config");
    REQUIRE(r.code == 0);
    CHECK(r.output.find("[experiment]") != std::string::npos);
    CHECK(r.output.find("seed = 42") != std::string::npos);
    CHECK(r.output.find("runs = 1") != std::string::npos);
    CHECK(r.output.find("shifts = 5") != std::string::npos);
    // The printed text is itself a valid config.
    std::istringstream in(r.output);
    CHECK(parse_config(in).seed == 42);
}

TEST_CASE("generated scene files", "[cli]") {
    const auto dir = scene_dir();
    for (const char* f : {"noisy.wav", "target.wav", "noise.wav", "noise_only.wav", "scene.txt"})
        CHECK(fs::exists(dir / f));
    const AudioBuffer x = read_wav(dir / "noisy.wav");
    CHECK(x.channels() == 2);
    CHECK(x.length() == 32000);
    CHECK(read_wav(dir / "noise_only.wav").length() == 32000);
    CHECK(read_meta(dir / "scene.txt").count("f0_hz") == 1);
}

TEST_CASE("cyclic spectrum dump at alpha 0 equals the Welch PSD", "[cli]") {
    const auto dir = scene_dir();
    const auto out = workdir() / "scd";
    const Run r = cli("--out-dir " + q(out) + " scd --input " + q(dir / "noisy.wav") + " --alpha 0,100");
    REQUIRE(r.code == 0);
    std::string header;
    const auto rows = read_csv(out / "scd.csv", &header);
    CHECK(header == "alpha_hz,bin,freq_hz,re,im");
    REQUIRE(rows.size() == 2 * 257);
    const AudioBuffer x = read_wav(dir / "noisy.wav");
    const auto ref = testing::welch_psd(testing::to_vector(x.channel(0)), 512, 128);
    for (std::size_t k = 0; k < 257; ++k) {
        CHECK(std::stod(rows[k][0]) == 0.0);
        CHECK(std::stoul(rows[k][1]) == k);
        CHECK(std::abs(std::stod(rows[k][3]) - ref[k]) <= 1e-12 * ref[k]);
        CHECK(std::abs(std::stod(rows[k][4])) <= 1e-12 * ref[k]);
    }
    CHECK(std::stod(rows[257][0]) == Catch::Approx(100.0));
}

TEST_CASE("pitch dump follows the generated fundamental", "[cli]") {
    const auto dir = scene_dir();
    const auto out = workdir() / "pitch";
    const Run r = cli("--out-dir " + q(out) + " pitch --input " + q(dir / "target.wav"));
    REQUIRE(r.code == 0);
    std::string header;
    const auto rows = read_csv(out / "pitch.csv", &header);
    CHECK(header == "frame,raw_f0_hz,voiced,smoothed_f0_hz,delta_alpha");
    REQUIRE(rows.size() == frame_count(32000, 512, 128));
    std::vector<double> f0;
    for (const auto& row : rows)
        if (row[2] == "1") f0.push_back(std::stod(row[1]));
    REQUIRE(f0.size() > rows.size() / 2);
    std::nth_element(f0.begin(), f0.begin() + static_cast<std::ptrdiff_t>(f0.size() / 2), f0.end());
    const double truth = std::stod(read_meta(dir / "scene.txt").at("f0_hz"));
    CHECK(std::abs(f0[f0.size() / 2] - truth) / truth < 0.005);
}

TEST_CASE("enhancing exported WAV files", "[cli]") {
    const auto dir = scene_dir();
    const std::string f0 = read_meta(dir / "scene.txt").at("f0_hz");
    const std::string files = " --noisy " + q(dir / "noisy.wav") + " --noise " + q(dir / "noise_only.wav");

    SECTION("single shift gives identical cMWF and MWF outputs") {
        const auto out = workdir() / "enh_c1";
        const Run r = cli("--out-dir " + q(out) + " enhance" + files + " --variants mwf,cmwf --shifts 1 --f0 " + f0);
        REQUIRE(r.code == 0);
        const AudioBuffer a = read_wav(out / "enhanced_mwf.wav"), b = read_wav(out / "enhanced_cmwf.wav");
        REQUIRE(a.length() == 32000);
        double diff = 0.0;
        for (std::size_t n = 0; n < a.length(); ++n) diff = std::max(diff, std::abs(a(0, n) - b(0, n)));
        CHECK(diff < 1e-8);
    }
    SECTION("oracle variant needs the target") {
        const Run r = cli("--out-dir " + q(workdir() / "enh_bad") + " enhance" + files + " --variants cmwf+ --f0 " + f0);
        CHECK(r.code != 0);
        CHECK(r.output.find("target") != std::string::npos);
    }
    SECTION("recursive mode writes diagnostics") {
        const auto out = workdir() / "enh_rec";
        const Run r = cli("--out-dir " + q(out) + " enhance" + files + " --target " + q(dir / "target.wav") +
                          " --pitch-from " + q(dir / "target.wav") + " --mode recursive --variants cmwf,cmwf+");
        REQUIRE(r.code == 0);
        CHECK(fs::exists(out / "enhanced_cmwf.wav"));
        CHECK(fs::exists(out / "enhanced_cmwfp.wav"));
        CHECK(fs::exists(out / "pitch.csv"));
        const auto rows = read_csv(out / "diagnostics.csv");
        CHECK(rows.size() == frame_count(32000, 512, 128));
    }
}

TEST_CASE("small synthetic sweep", "[cli]") {
    const auto out = workdir() / "sweep";
    const Run r = cli("--config " + q(workdir() / "small.cfg") + " --out-dir " + q(out) + " synth-sweep");
    REQUIRE(r.code == 0);
    const auto records = read_results_csv(out / "results.csv");
    REQUIRE(records.size() == 2);
    CHECK(records[0].variant == "mwf");
    CHECK(records[1].variant == "cmwf");
    for (const auto& rec : records) CHECK(rec.ok());
    CHECK(fs::exists(out / "summary.csv"));
    CHECK(fs::exists(out / "isnr.svg"));
}
