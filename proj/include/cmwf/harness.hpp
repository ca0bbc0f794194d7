#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "cmwf/pipeline.hpp"
#include "cmwf/scene.hpp"

namespace cmwf {

constexpr double kSiSdrCapDb = 100.0;

// Scale-invariant SDR in dB, capped at +100 dB. Throws on length mismatch or a zero reference.
double si_sdr(std::span<const double> estimate, std::span<const double> reference);
double si_sdr(const AudioBuffer& estimate, const AudioBuffer& reference);

enum class SweepKind : std::uint8_t { isnr, shifts_C, mics_M, f0_bias, recursive_smoke };
std::string_view sweep_name(SweepKind k);
std::optional<SweepKind> parse_sweep(std::string_view name);

enum class F0Source : std::uint8_t { truth, tracked };
enum class PitchSignal : std::uint8_t { target, noisy };

struct ExperimentConfig {
    SweepKind sweep = SweepKind::isnr;
    std::vector<double> values{-20.0, -10.0, 0.0};
    std::size_t runs = 50;
    std::uint64_t seed = 1;
    std::size_t threads = 0;  // 0: hardware concurrency
    std::vector<Variant> variants = all_variants();
    F0Source f0_source = F0Source::truth;
    PitchSignal pitch_signal = PitchSignal::target;
    double noise_only_s = 2.0;
    double note_seconds = 1.0;  // recursive_smoke: two notes of this length
    double min_note_jump = 0.25;  // recursive_smoke: relative f0 change between the notes
    double settle_s = 0.5;        // recursive_smoke: skipped after the second onset when comparing to batch

    SceneConfig scene{};
    HarmonicSourceParams source{};
    RirSpec rir{};
    EnhanceConfig enhance{};
    PitchConfig pitch{};

    void validate() const;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);
// Every key with its current value; parse_config(format_config(c)) reproduces c.
std::string format_config(const ExperimentConfig& config);

struct ResultRecord {
    std::string sweep;
    double value = 0.0;
    std::size_t run = 0;
    std::string variant;
    double si_sdr_in_db = 0.0;
    double si_sdr_out_db = 0.0;
    double improvement_db = 0.0;
    double wall_ms = 0.0;
    std::string status = "ok";

    bool ok() const { return status == "ok"; }
};

constexpr std::string_view kResultsHeader =
    "sweep,value,run,variant,si_sdr_in_db,si_sdr_out_db,improvement_db,wall_ms,status";
void write_record(std::ostream& out, const ResultRecord& r);
std::vector<ResultRecord> read_results_csv(const std::filesystem::path& path);

// Sample range scored by the harness: the signal without its first and last K samples.
struct ScoreWindow {
    std::size_t begin = 0;
    std::size_t count = 0;
};
ScoreWindow valid_interval(std::size_t length, const WindowSpec& win);

// Noisy/target SI-SDR and improvement on a window.
struct Score {
    double in = 0.0, out = 0.0, improvement = 0.0;
};
Score score(const AudioBuffer& output, const AudioBuffer& noisy, const AudioBuffer& target, std::size_t ref,
            ScoreWindow w);

// One fundamental (rad/sample) from a pitch track: median of the voiced raw estimates; 0 if none.
double median_f0(std::span<const double> raw);

// Two-note scene used by the recursive smoke sweep.
struct RecursiveCase {
    SceneConfig scene;
    NoteSequence source;
    Scene mix;
    AudioBuffer noise_only;
    PitchTrack track;
    RecursiveResult recursive;
    BatchResult batch_second_half;  // batch mode on the second note only
    std::size_t half = 0;           // first sample of the second note
};
RecursiveCase run_recursive_case(const ExperimentConfig& config, double value, std::size_t run);

// One Monte Carlo cell (all variants of one run at one sweep value).
std::vector<ResultRecord> run_cell(const ExperimentConfig& config, std::size_t value_index, std::size_t run);

// Runs every cell on a thread pool; rows reach `sink` in (value, run, variant) order.
std::vector<ResultRecord> run_sweep(const ExperimentConfig& config,
                                    const std::function<void(const ResultRecord&)>& sink = {});

struct CellSummary {
    std::string sweep;
    double value = 0.0;
    std::string variant;
    std::size_t n = 0;
    std::size_t failures = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double ci95 = 0.0;  // half width, Student t
};
std::vector<CellSummary> summarize(std::span<const ResultRecord> records);
void write_summary_csv(const std::filesystem::path& path, std::span<const CellSummary> cells);
// Half width of the 95% confidence interval of the mean.
double ci95_half_width(double stddev, std::size_t n);

// One SVG per sweep found in the CSV; returns the written files.
std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& csv, const std::filesystem::path& out_dir);

}  // namespace cmwf
