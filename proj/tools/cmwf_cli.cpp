// cmwf: synthetic sweeps, file enhancement, cyclic spectra, pitch tracks and scene export.
#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>

#include "cmwf/error.hpp"
#include "cmwf/harness.hpp"
#include "cmwf/random.hpp"

namespace {

using namespace cmwf;

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string config;
    bool print_config = false;
};

ExperimentConfig effective_config(const Globals& g) {
    ExperimentConfig c = g.config.empty() ? ExperimentConfig{} : load_config(g.config);
    if (g.seed) c.seed = *g.seed;
    return c;
}

std::filesystem::path out_dir(const Globals& g) {
    std::filesystem::path p = g.out_dir;
    std::filesystem::create_directories(p);
    return p;
}

std::vector<Variant> parse_variants(const std::vector<std::string>& names) {
    std::vector<Variant> out;
    for (const auto& n : names) {
        const auto v = parse_variant(n);
        if (!v) throw Error("unknown variant '" + n + "'");
        out.push_back(*v);
    }
    return out;
}

AudioBuffer load(const std::string& path) {
    if (!std::filesystem::exists(path)) throw Error("input file not found: " + path);
    return read_wav(path);
}

int cmd_sweep(const Globals& g, std::optional<std::size_t> runs, std::optional<std::size_t> threads) {
    ExperimentConfig c = effective_config(g);
    if (runs) c.runs = *runs;
    if (threads) c.threads = *threads;
    c.validate();
    const auto dir = out_dir(g);
    const auto csv_path = dir / "results.csv";
    std::ofstream csv(csv_path);
    if (!csv) throw Error("cannot write " + csv_path.string());
    csv << kResultsHeader << '\n';
    std::size_t failures = 0;
    const auto records = run_sweep(c, [&](const ResultRecord& r) {
        write_record(csv, r);
        csv.flush();
        if (!r.ok()) {
            ++failures;
            std::cerr << "run " << r.run << " at " << r.value << ": " << r.status << '\n';
        }
    });
    csv.close();
    const auto cells = summarize(records);
    write_summary_csv(dir / "summary.csv", cells);
    std::ofstream(dir / "config.ini") << format_config(c);
    for (const auto& p : emit_plots(csv_path, dir)) std::cout << "wrote " << p.string() << '\n';
    for (const auto& cell : cells)
        std::cout << cell.sweep << ' ' << cell.value << ' ' << cell.variant << ": " << cell.mean << " +- " << cell.ci95
                  << " dB (n=" << cell.n << ")\n";
    if (failures) std::cerr << failures << " failed rows\n";
    return 0;
}

struct EnhanceArgs {
    std::string noisy, noise, target, pitch_from;
    std::vector<std::string> variants{"mwf", "cmwf"};
    std::string mode = "batch";
    std::optional<double> f0_hz;
    std::optional<std::size_t> shifts;
};

int cmd_enhance(const Globals& g, const EnhanceArgs& a) {
    const ExperimentConfig c = effective_config(g);
    EnhanceConfig ec = c.enhance;
    if (a.shifts) ec.shifts = *a.shifts;
    const AudioBuffer noisy = load(a.noisy), noise = load(a.noise);
    std::optional<AudioBuffer> target;
    if (!a.target.empty()) target = load(a.target);
    const auto variants = parse_variants(a.variants);
    const EnhanceInputs in{noisy, noise, target ? &*target : nullptr};
    const auto dir = out_dir(g);

    const auto pitch_source = [&] {
        if (!a.pitch_from.empty()) return load(a.pitch_from).select_channel(0);
        return noisy.select_channel(ec.reference_mic);
    };
    std::vector<std::pair<Variant, AudioBuffer>> outputs;
    std::vector<std::string> notes;
    if (a.mode == "batch") {
        double alpha = 0.0;
        if (a.f0_hz) alpha = 2.0 * std::numbers::pi * *a.f0_hz / noisy.fs();
        else alpha = median_f0(track_raw_f0(pitch_source(), ec.window, c.pitch));
        std::cout << "f0 = " << alpha * noisy.fs() / (2.0 * std::numbers::pi) << " Hz\n";
        auto res = batch_enhance(in, alpha, variants, ec);
        outputs = std::move(res.outputs);
        notes = std::move(res.notes);
        notes.push_back("cyclic bins: " + std::to_string(res.diagnostics.routing.cyclic_count()) +
                        ", shifts: " + std::to_string(res.diagnostics.set.size()) +
                        ", fallback bins: " + std::to_string(res.diagnostics.fallback_bins));
    } else if (a.mode == "recursive") {
        const auto track = smooth_f0(track_raw_f0(pitch_source(), ec.window, c.pitch), ec.smoothing);
        write_pitch_csv(dir / "pitch.csv", track, noisy.fs());
        auto res = recursive_enhance(in, track, variants, ec);
        write_diagnostics_csv(dir / "diagnostics.csv", res.frames, noisy.fs());
        outputs = std::move(res.outputs);
        notes = std::move(res.notes);
    } else {
        throw Error("--mode must be batch or recursive");
    }
    for (const auto& [v, audio] : outputs) {
        std::string name(variant_name(v));
        for (auto& ch : name)
            if (ch == '+') ch = 'p';
        const auto path = dir / ("enhanced_" + name + ".wav");
        write_wav(path, audio);
        std::cout << "wrote " << path.string() << '\n';
    }
    std::ofstream log(dir / "notes.txt");
    for (const auto& n : notes) {
        log << n << '\n';
        std::cout << n << '\n';
    }
    return 0;
}

int cmd_scd(const Globals& g, const std::string& input, std::size_t channel, std::vector<double> alphas_hz,
            std::optional<double> f0_hz, std::size_t count) {
    const ExperimentConfig c = effective_config(g);
    const AudioBuffer audio = load(input);
    if (channel >= audio.channels()) throw Error("channel " + std::to_string(channel) + " out of range");
    if (alphas_hz.empty()) {
        const double f0 = f0_hz ? *f0_hz
                                : median_f0(track_raw_f0(audio.select_channel(channel), c.enhance.window, c.pitch)) *
                                      audio.fs() / (2.0 * std::numbers::pi);
        for (std::size_t i = 0; i < count; ++i) alphas_hz.push_back(static_cast<double>(i) * f0);
    }
    std::vector<double> alphas;
    for (double a : alphas_hz) alphas.push_back(2.0 * std::numbers::pi * a / audio.fs());
    const auto scd = cyclic_spectrum(audio, channel, alphas, c.enhance.window);
    const auto path = out_dir(g) / "scd.csv";
    write_scd_csv(path, scd, audio.fs(), c.enhance.window.length);
    std::cout << "wrote " << path.string() << '\n';
    return 0;
}

int cmd_pitch(const Globals& g, const std::string& input, std::size_t channel) {
    const ExperimentConfig c = effective_config(g);
    const AudioBuffer audio = load(input);
    if (channel >= audio.channels()) throw Error("channel " + std::to_string(channel) + " out of range");
    const auto track = smooth_f0(track_raw_f0(audio.select_channel(channel), c.enhance.window, c.pitch), c.enhance.smoothing);
    const auto path = out_dir(g) / "pitch.csv";
    write_pitch_csv(path, track, audio.fs());
    std::cout << "wrote " << path.string() << '\n';
    return 0;
}

int cmd_gen_scene(const Globals& g, std::size_t count) {
    const ExperimentConfig c = effective_config(g);
    const auto dir = out_dir(g);
    for (std::size_t i = 0; i < count; ++i) {
        const auto s = make_synthetic_scene(c.scene, c.source, c.rir, c.noise_only_s, derive_seed(c.seed, i));
        char name[32];
        std::snprintf(name, sizeof name, "scene_%03zu", i);
        export_scene(dir / name, s, c.scene);
        std::cout << "wrote " << (dir / name).string() << " (f0 " << s.truth.f0_hz << " Hz)\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cyclic multichannel Wiener filtering toolkit"};
    app.require_subcommand(0, 1);
    app.fallthrough();
    Globals g;
    const char* env_out = std::getenv("CMWF_OUT_DIR");
    g.out_dir = env_out && *env_out ? env_out : "out";
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Base seed for scene generation");
    app.add_option("--out-dir", g.out_dir, "Output directory (default: $CMWF_OUT_DIR or ./out)");
    app.add_option("--config", g.config, "Experiment config file (key = value with [sections])");
    app.add_flag("--print-config", g.print_config, "Print the effective configuration and exit");

    auto* sweep = app.add_subcommand("synth-sweep", "Monte Carlo sweep on synthetic scenes; writes CSV, summary and SVG plots");
    std::optional<std::size_t> runs, threads;
    sweep->add_option("--runs", runs, "Override the number of runs");
    sweep->add_option("--threads", threads, "Worker threads (0: all cores)");

    auto* enhance = app.add_subcommand("enhance", "Enhance a multichannel WAV using a noise-only recording");
    EnhanceArgs ea;
    enhance->add_option("--noisy", ea.noisy, "Noisy multichannel WAV")->required();
    enhance->add_option("--noise", ea.noise, "Noise-only WAV (at least 2 s)")->required();
    enhance->add_option("--target", ea.target, "Clean reverberant target WAV (oracle variants)");
    enhance->add_option("--variants", ea.variants, "Variants: identity mwf mwf+ mwf++ cmwf cmwf+ cmwf++")->delimiter(',');
    enhance->add_option("--mode", ea.mode, "batch or recursive");
    enhance->add_option("--f0", ea.f0_hz, "Known fundamental in Hz (batch); tracked otherwise");
    enhance->add_option("--shifts", ea.shifts, "Number of shifts C");
    enhance->add_option("--pitch-from", ea.pitch_from, "WAV to track the pitch on (default: noisy reference mic)");

    auto* scd = app.add_subcommand("scd", "Dump the cyclic spectrum of one channel as CSV");
    std::string scd_in;
    std::size_t scd_ch = 0, scd_count = 5;
    std::vector<double> scd_alphas;
    std::optional<double> scd_f0;
    scd->add_option("--input", scd_in, "Input WAV")->required();
    scd->add_option("--channel", scd_ch, "Channel index");
    scd->add_option("--alpha", scd_alphas, "Cyclic frequencies in Hz")->delimiter(',');
    scd->add_option("--f0", scd_f0, "Fundamental in Hz; alphas are its first --count multiples from 0");
    scd->add_option("--count", scd_count, "Number of cyclic frequencies when derived from f0");

    auto* pitch = app.add_subcommand("pitch", "Dump the pitch track of one channel as CSV");
    std::string pitch_in;
    std::size_t pitch_ch = 0;
    pitch->add_option("--input", pitch_in, "Input WAV")->required();
    pitch->add_option("--channel", pitch_ch, "Channel index");

    auto* gen = app.add_subcommand("gen-scene", "Export synthetic scenes as WAV files plus metadata");
    std::size_t gen_count = 1;
    gen->add_option("--count", gen_count, "Number of scenes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        if (*seed_opt) g.seed = seed;
        if (g.print_config) {
            std::cout << format_config(effective_config(g));
            return 0;
        }
        if (sweep->parsed()) return cmd_sweep(g, runs, threads);
        if (enhance->parsed()) return cmd_enhance(g, ea);
        if (scd->parsed()) return cmd_scd(g, scd_in, scd_ch, scd_alphas, scd_f0, scd_count);
        if (pitch->parsed()) return cmd_pitch(g, pitch_in, pitch_ch);
        if (gen->parsed()) return cmd_gen_scene(g, gen_count);
        std::cerr << app.help();
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
