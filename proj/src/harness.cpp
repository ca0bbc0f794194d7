#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "cmwf/error.hpp"
#include "cmwf/harness.hpp"
#include "cmwf/random.hpp"

namespace cmwf {

namespace {

struct SweepNameEntry {
    SweepKind kind;
    std::string_view name;
};
constexpr SweepNameEntry kSweeps[] = {{SweepKind::isnr, "isnr"},
                                      {SweepKind::shifts_C, "shifts_C"},
                                      {SweepKind::mics_M, "mics_M"},
                                      {SweepKind::f0_bias, "f0_bias"},
                                      {SweepKind::recursive_smoke, "recursive_smoke"}};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::string sanitize(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

// Config with one sweep value applied (f0_bias is applied to alpha later).
ExperimentConfig at_value(const ExperimentConfig& config, double value) {
    ExperimentConfig c = config;
    switch (config.sweep) {
        case SweepKind::isnr:
        case SweepKind::recursive_smoke: c.scene.isnr_db = value; break;
        case SweepKind::shifts_C: c.enhance.shifts = static_cast<std::size_t>(value); break;
        case SweepKind::mics_M: c.scene.mics = static_cast<std::size_t>(value); break;
        case SweepKind::f0_bias: break;
    }
    c.enhance.reference_mic = c.scene.reference_mic;
    return c;
}

AudioBuffer pitch_input(const ExperimentConfig& c, const Scene& mix) {
    const AudioBuffer& src = c.pitch_signal == PitchSignal::target ? mix.d : mix.x;
    return src.select_channel(c.scene.reference_mic);
}

}  // namespace

std::string_view sweep_name(SweepKind k) {
    for (const auto& e : kSweeps)
        if (e.kind == k) return e.name;
    return "?";
}

std::optional<SweepKind> parse_sweep(std::string_view name) {
    for (const auto& e : kSweeps)
        if (e.name == name) return e.kind;
    return std::nullopt;
}

void write_record(std::ostream& out, const ResultRecord& r) {
    out << r.sweep << ',' << std::setprecision(10) << r.value << ',' << r.run << ',' << r.variant << ','
        << std::setprecision(12) << r.si_sdr_in_db << ',' << r.si_sdr_out_db << ',' << r.improvement_db << ','
        << std::setprecision(6) << r.wall_ms << ',' << sanitize(r.status) << '\n';
}

std::vector<ResultRecord> read_results_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open results file " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kResultsHeader)
        throw Error(path.string() + ": missing or malformed header");
    std::vector<ResultRecord> out;
    std::size_t lineno = 1;
    const auto num = [&](const std::string& s) {
        if (s == "nan" || s == "-nan") return kNaN;
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw Error(path.string() + ":" + std::to_string(lineno) + ": bad number '" + s + "'");
        }
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string item; std::getline(ss, item, ',');) f.push_back(item);
        if (f.size() != 9) throw Error(path.string() + ":" + std::to_string(lineno) + ": expected 9 fields");
        ResultRecord r;
        r.sweep = f[0];
        r.value = num(f[1]);
        r.run = static_cast<std::size_t>(num(f[2]));
        r.variant = f[3];
        r.si_sdr_in_db = num(f[4]);
        r.si_sdr_out_db = num(f[5]);
        r.improvement_db = num(f[6]);
        r.wall_ms = num(f[7]);
        r.status = f[8];
        out.push_back(std::move(r));
    }
    return out;
}

RecursiveCase run_recursive_case(const ExperimentConfig& config, double value, std::size_t run) {
    const ExperimentConfig c = at_value(config, value);
    const std::uint64_t seed = derive_seed(c.seed, run);
    const double fs = c.scene.fs;
    RecursiveCase rc;
    rc.scene = c.scene;

    auto rng = make_rng(derive_seed(seed, 5));
    std::uniform_real_distribution<double> f0_dist(c.source.f0_min_hz, c.source.f0_max_hz);
    const double f0a = f0_dist(rng);
    double f0b = f0_dist(rng);
    for (int tries = 0; std::abs(f0b - f0a) / f0a < c.min_note_jump; ++tries) {
        if (tries > 1000) throw Error("cannot draw two notes with the requested f0 jump");
        f0b = f0_dist(rng);
    }
    rc.source = gen_note_sequence(c.source, fs, {f0a, f0b}, c.note_seconds, derive_seed(seed, 0));
    const RirSet rt = gen_rir(c.rir, c.scene.mics, fs, derive_seed(seed, 1));
    const RirSet ri = gen_rir(c.rir, c.scene.mics, fs, derive_seed(seed, 2));
    rc.mix = mix_scene(rc.source.audio, c.scene, rt.h, ri.h, derive_seed(seed, 3));
    rc.noise_only = render_noise(c.scene, ri.h, rc.mix.gains,
                                 static_cast<std::size_t>(std::llround(c.noise_only_s * fs)), derive_seed(seed, 4));

    const auto raw = track_raw_f0(pitch_input(c, rc.mix), c.enhance.window, c.pitch);
    rc.track = smooth_f0(raw, c.enhance.smoothing);
    const EnhanceInputs in{rc.mix.x, rc.noise_only, &rc.mix.d};
    rc.recursive = recursive_enhance(in, rc.track, c.variants, c.enhance);

    rc.half = rc.source.onsets.at(1);
    const std::size_t rest = rc.mix.x.length() - rc.half;
    const AudioBuffer x2 = rc.mix.x.slice(rc.half, rest), d2 = rc.mix.d.slice(rc.half, rest);
    const std::size_t first_frame = rc.half / c.enhance.window.hop;
    const double alpha2 =
        median_f0(std::span<const double>(raw).subspan(std::min(first_frame, raw.size())));
    rc.batch_second_half = batch_enhance({x2, rc.noise_only, &d2}, alpha2, c.variants, c.enhance);
    return rc;
}

std::vector<ResultRecord> run_cell(const ExperimentConfig& config, std::size_t value_index, std::size_t run) {
    const auto t0 = std::chrono::steady_clock::now();
    const double value = config.values.at(value_index);
    const ExperimentConfig c = at_value(config, value);
    const std::string sweep(sweep_name(c.sweep));
    std::vector<ResultRecord> rows;
    const auto row = [&](std::string variant, Score s) {
        ResultRecord r;
        r.sweep = sweep;
        r.value = value;
        r.run = run;
        r.variant = std::move(variant);
        r.si_sdr_in_db = s.in;
        r.si_sdr_out_db = s.out;
        r.improvement_db = s.improvement;
        rows.push_back(std::move(r));
    };
    try {
        const std::size_t ref = c.scene.reference_mic;
        if (c.sweep == SweepKind::recursive_smoke) {
            const RecursiveCase rc = run_recursive_case(config, value, run);
            const std::size_t n = rc.mix.x.length();
            const std::size_t k = c.enhance.window.length;
            const ScoreWindow full = valid_interval(n, c.enhance.window);
            const std::size_t rest = n - rc.half;
            const std::size_t settle =
                std::max(k, static_cast<std::size_t>(std::llround(c.settle_s * c.scene.fs)));
            if (rest <= settle + 2 * k) throw Error("second note too short to score");
            const ScoreWindow h2_global{rc.half + settle, rest - settle - k};
            const ScoreWindow h2_local{settle, rest - settle - k};
            const AudioBuffer x2 = rc.mix.x.slice(rc.half, rest), d2 = rc.mix.d.slice(rc.half, rest);
            for (Variant v : c.variants) {
                const std::string name(variant_name(v));
                const AudioBuffer& out = rc.recursive.output(v);
                row(name + "/recursive", score(out, rc.mix.x, rc.mix.d, ref, full));
                row(name + "/recursive_h2", score(out, rc.mix.x, rc.mix.d, ref, h2_global));
                row(name + "/batch_h2", score(rc.batch_second_half.output(v), x2, d2, ref, h2_local));
            }
        } else {
            const SyntheticScene s =
                make_synthetic_scene(c.scene, c.source, c.rir, c.noise_only_s, derive_seed(c.seed, run));
            double alpha = s.truth.omega0;
            if (c.f0_source == F0Source::tracked)
                alpha = median_f0(track_raw_f0(pitch_input(c, s.mix), c.enhance.window, c.pitch));
            if (c.sweep == SweepKind::f0_bias) alpha *= 1.0 + value / 100.0;
            const BatchResult res = batch_enhance({s.mix.x, s.noise_only, &s.mix.d}, alpha, c.variants, c.enhance);
            const ScoreWindow w = valid_interval(s.mix.x.length(), c.enhance.window);
            for (Variant v : c.variants) row(std::string(variant_name(v)), score(res.output(v), s.mix.x, s.mix.d, ref, w));
        }
    } catch (const std::exception& e) {
        rows.clear();
        for (Variant v : c.variants) {
            row(std::string(variant_name(v)), {kNaN, kNaN, kNaN});
            rows.back().status = std::string("error: ") + e.what();
        }
    }
    const double ms = elapsed_ms(t0);
    for (auto& r : rows) r.wall_ms = ms;
    return rows;
}

std::vector<ResultRecord> run_sweep(const ExperimentConfig& config,
                                    const std::function<void(const ResultRecord&)>& sink) {
    config.validate();
    const std::size_t tasks = config.values.size() * config.runs;
    std::size_t threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, tasks);

    std::vector<ResultRecord> all;
    const auto emit = [&](std::vector<ResultRecord>& rows) {
        for (auto& r : rows) {
            if (sink) sink(r);
            all.push_back(std::move(r));
        }
    };
    if (threads <= 1) {
        for (std::size_t t = 0; t < tasks; ++t) {
            auto rows = run_cell(config, t / config.runs, t % config.runs);
            emit(rows);
        }
        return all;
    }

    std::vector<std::optional<std::vector<ResultRecord>>> slots(tasks);
    std::mutex mu;
    std::condition_variable cv;
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t t; (t = next.fetch_add(1)) < tasks;) {
            auto rows = run_cell(config, t / config.runs, t % config.runs);
            {
                std::lock_guard lock(mu);
                slots[t] = std::move(rows);
            }
            cv.notify_all();
        }
    };
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);

    for (std::size_t t = 0; t < tasks; ++t) {
        std::vector<ResultRecord> rows;
        {
            std::unique_lock lock(mu);
            cv.wait(lock, [&] { return slots[t].has_value(); });
            rows = std::move(*slots[t]);
            slots[t].reset();
        }
        emit(rows);
    }
    return all;
}

std::vector<CellSummary> summarize(std::span<const ResultRecord> records) {
    std::vector<CellSummary> cells;
    std::vector<std::vector<double>> samples;
    std::map<std::tuple<std::string, double, std::string>, std::size_t> index;
    for (const auto& r : records) {
        const auto key = std::make_tuple(r.sweep, r.value, r.variant);
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, cells.size()).first;
            cells.push_back({r.sweep, r.value, r.variant});
            samples.emplace_back();
        }
        if (r.ok() && std::isfinite(r.improvement_db)) samples[it->second].push_back(r.improvement_db);
        else ++cells[it->second].failures;
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        auto& c = cells[i];
        const auto& s = samples[i];
        c.n = s.size();
        if (s.empty()) {
            c.mean = c.stddev = kNaN;
            continue;
        }
        double sum = 0.0;
        for (double v : s) sum += v;
        c.mean = sum / static_cast<double>(s.size());
        double ss = 0.0;
        for (double v : s) ss += (v - c.mean) * (v - c.mean);
        c.stddev = s.size() > 1 ? std::sqrt(ss / static_cast<double>(s.size() - 1)) : 0.0;
        c.ci95 = ci95_half_width(c.stddev, c.n);
    }
    return cells;
}

void write_summary_csv(const std::filesystem::path& path, std::span<const CellSummary> cells) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "sweep,value,variant,n,failures,mean_improvement_db,std_db,ci95_db\n" << std::setprecision(10);
    for (const auto& c : cells)
        out << c.sweep << ',' << c.value << ',' << c.variant << ',' << c.n << ',' << c.failures << ',' << c.mean << ','
            << c.stddev << ',' << c.ci95 << '\n';
}

}  // namespace cmwf
