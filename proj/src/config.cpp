#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <sstream>

#include "cmwf/error.hpp"
#include "cmwf/harness.hpp"

namespace cmwf {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');)
        if (auto t = trim(item); !t.empty()) out.push_back(t);
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw Error("config key " + key + ": expected a number, got '" + v + "'");
    }
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw Error("config key " + key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error("config key " + key + ": expected true/false, got '" + v + "'");
}

// Shortest text that reads back to the same double.
std::string fmt(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

struct Entry {
    const char* section;
    const char* key;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

#define CMWF_DOUBLE(sec, name, field)                                                  \
    Entry {                                                                           \
        sec, name, [](const ExperimentConfig& c) { return fmt(c.field); },             \
            [](ExperimentConfig& c, const std::string& v) { c.field = to_double(sec "." name, v); } \
    }
#define CMWF_UINT(sec, name, field)                                                         \
    Entry {                                                                                  \
        sec, name, [](const ExperimentConfig& c) { return std::to_string(c.field); },         \
            [](ExperimentConfig& c, const std::string& v) {                                   \
                c.field = static_cast<decltype(c.field)>(to_uint(sec "." name, v));           \
            }                                                                                 \
    }
#define CMWF_BOOL(sec, name, field)                                                              \
    Entry {                                                                                       \
        sec, name, [](const ExperimentConfig& c) { return std::string(c.field ? "true" : "false"); }, \
            [](ExperimentConfig& c, const std::string& v) { c.field = to_bool(sec "." name, v); }   \
    }

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table = {
        {"experiment", "sweep", [](const ExperimentConfig& c) { return std::string(sweep_name(c.sweep)); },
         [](ExperimentConfig& c, const std::string& v) {
             const auto k = parse_sweep(v);
             if (!k) throw Error("config key experiment.sweep: unknown sweep '" + v + "'");
             c.sweep = *k;
         }},
        {"experiment", "values",
         [](const ExperimentConfig& c) {
             std::string s;
             for (double v : c.values) s += (s.empty() ? "" : ", ") + fmt(v);
             return s;
         },
         [](ExperimentConfig& c, const std::string& v) {
             c.values.clear();
             for (const auto& item : split_list(v)) c.values.push_back(to_double("experiment.values", item));
         }},
        CMWF_UINT("experiment", "runs", runs),
        CMWF_UINT("experiment", "seed", seed),
        CMWF_UINT("experiment", "threads", threads),
        {"experiment", "variants",
         [](const ExperimentConfig& c) {
             std::string s;
             for (Variant v : c.variants) s += (s.empty() ? "" : ", ") + std::string(variant_name(v));
             return s;
         },
         [](ExperimentConfig& c, const std::string& v) {
             c.variants.clear();
             for (const auto& item : split_list(v)) {
                 const auto var = parse_variant(item);
                 if (!var) throw Error("config key experiment.variants: unknown variant '" + item + "'");
                 c.variants.push_back(*var);
             }
         }},
        {"experiment", "f0_source",
         [](const ExperimentConfig& c) { return std::string(c.f0_source == F0Source::truth ? "truth" : "tracked"); },
         [](ExperimentConfig& c, const std::string& v) {
             if (v == "truth") c.f0_source = F0Source::truth;
             else if (v == "tracked") c.f0_source = F0Source::tracked;
             else throw Error("config key experiment.f0_source: expected truth or tracked, got '" + v + "'");
         }},
        {"experiment", "pitch_signal",
         [](const ExperimentConfig& c) { return std::string(c.pitch_signal == PitchSignal::target ? "target" : "noisy"); },
         [](ExperimentConfig& c, const std::string& v) {
             if (v == "target") c.pitch_signal = PitchSignal::target;
             else if (v == "noisy") c.pitch_signal = PitchSignal::noisy;
             else throw Error("config key experiment.pitch_signal: expected target or noisy, got '" + v + "'");
         }},
        CMWF_DOUBLE("experiment", "noise_only_s", noise_only_s),
        CMWF_DOUBLE("experiment", "note_seconds", note_seconds),
        CMWF_DOUBLE("experiment", "min_note_jump", min_note_jump),
        CMWF_DOUBLE("experiment", "settle_s", settle_s),

        CMWF_UINT("scene", "mics", scene.mics),
        CMWF_DOUBLE("scene", "isnr_db", scene.isnr_db),
        CMWF_DOUBLE("scene", "sensor_snr_db", scene.sensor_snr_db),
        CMWF_DOUBLE("scene", "fs", scene.fs),
        CMWF_UINT("scene", "reference_mic", scene.reference_mic),

        CMWF_DOUBLE("source", "duration_s", source.duration_s),
        CMWF_DOUBLE("source", "f0_min_hz", source.f0_min_hz),
        CMWF_DOUBLE("source", "f0_max_hz", source.f0_max_hz),
        CMWF_DOUBLE("source", "amp_min", source.amp_min),
        CMWF_DOUBLE("source", "amp_max", source.amp_max),
        CMWF_DOUBLE("source", "envelope_mean", source.envelope_mean),
        CMWF_DOUBLE("source", "envelope_variance", source.envelope_variance),
        CMWF_UINT("source", "envelope_order", source.envelope_order),
        CMWF_DOUBLE("source", "envelope_cutoff_hz", source.envelope_cutoff_hz),

        {"rir", "kind", [](const ExperimentConfig& c) { return std::string(c.rir.kind == RirSpec::Kind::file ? "file" : "synthetic"); },
         [](ExperimentConfig& c, const std::string& v) {
             if (v == "synthetic") c.rir.kind = RirSpec::Kind::synthetic;
             else if (v == "file") c.rir.kind = RirSpec::Kind::file;
             else throw Error("config key rir.kind: expected synthetic or file, got '" + v + "'");
         }},
        {"rir", "file", [](const ExperimentConfig& c) { return c.rir.file.string(); },
         [](ExperimentConfig& c, const std::string& v) { c.rir.file = v; }},
        CMWF_DOUBLE("rir", "rt60", rir.rt60),
        CMWF_DOUBLE("rir", "mic_spacing_m", rir.mic_spacing_m),
        CMWF_DOUBLE("rir", "speed_of_sound", rir.speed_of_sound),
        CMWF_DOUBLE("rir", "direct_to_tail_db", rir.direct_to_tail_db),
        CMWF_DOUBLE("rir", "bulk_delay", rir.bulk_delay),
        CMWF_BOOL("rir", "fractional_delay", rir.fractional_delay),

        CMWF_UINT("enhance", "fft_size", enhance.window.length),
        CMWF_UINT("enhance", "hop", enhance.window.hop),
        CMWF_UINT("enhance", "shifts", enhance.shifts),
        CMWF_DOUBLE("enhance", "eps_bin", enhance.eps_bin),
        {"enhance", "routing", [](const ExperimentConfig& c) { return std::string(routing_scope_name(c.enhance.routing)); },
         [](ExperimentConfig& c, const std::string& v) {
             const auto r = parse_routing_scope(v);
             if (!r) throw Error("config key enhance.routing: expected harmonics or shifts, got '" + v + "'");
             c.enhance.routing = *r;
         }},
        CMWF_DOUBLE("enhance", "lambda_min", enhance.loading.min),
        CMWF_DOUBLE("enhance", "lambda_max", enhance.loading.max),
        CMWF_DOUBLE("enhance", "beta", enhance.beta),
        CMWF_DOUBLE("enhance", "d0", enhance.smoothing.d0),
        CMWF_DOUBLE("enhance", "d1", enhance.smoothing.d1),
        CMWF_UINT("enhance", "reanchor_frames", enhance.smoothing.reanchor_frames),
        CMWF_UINT("enhance", "burn_in_frames", enhance.burn_in_frames),
        CMWF_BOOL("enhance", "reset_on_update", enhance.reset_on_update),

        CMWF_DOUBLE("pitch", "f_lo", pitch.grid.f_lo),
        CMWF_DOUBLE("pitch", "f_hi", pitch.grid.f_hi),
        CMWF_DOUBLE("pitch", "step", pitch.grid.step),
        CMWF_UINT("pitch", "max_order", pitch.max_order),
        CMWF_DOUBLE("pitch", "voicing_threshold", pitch.voicing_threshold),
        CMWF_DOUBLE("pitch", "order_penalty", pitch.order_penalty),
    };
    return table;
}

#undef CMWF_DOUBLE
#undef CMWF_UINT
#undef CMWF_BOOL

}  // namespace

void ExperimentConfig::validate() const {
    if (runs == 0) throw Error("runs must be at least 1");
    if (values.empty()) throw Error("sweep values must not be empty");
    if (variants.empty()) throw Error("variant list must not be empty");
    if (!(noise_only_s > 0.0)) throw Error("noise_only_s must be positive");
    scene.validate();
    source.validate();
    rir.validate();
    enhance.validate();
    if (sweep == SweepKind::shifts_C || sweep == SweepKind::mics_M)
        for (double v : values)
            if (!(v >= 1.0) || v != std::floor(v)) throw Error("sweep values for " + std::string(sweep_name(sweep)) + " must be positive integers");
    if (sweep == SweepKind::recursive_smoke && !(note_seconds > 0.0)) throw Error("note_seconds must be positive");
    if (!(settle_s >= 0.0)) throw Error("settle_s must be non-negative");
}

ExperimentConfig parse_config(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw Error("config: " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    ExperimentConfig c;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw Error("config key '" + section + "' must sit inside a [section]");
        for (const auto& [key, value] : body) {
            const auto& table = entries();
            const auto it = std::find_if(table.begin(), table.end(),
                                         [&](const Entry& e) { return section == e.section && key == e.key; });
            if (it == table.end()) throw Error("config: unknown key " + section + "." + key);
            it->set(c, trim(value.data()));
        }
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file " + path.string());
    try {
        return parse_config(in);
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

std::string format_config(const ExperimentConfig& config) {
    std::ostringstream out;
    std::string current;
    for (const auto& e : entries()) {
        if (current != e.section) {
            out << (current.empty() ? "" : "\n") << '[' << e.section << "]\n";
            current = e.section;
        }
        out << e.key << " = " << e.get(config) << '\n';
    }
    return out.str();
}

}  // namespace cmwf
