#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "cmwf/error.hpp"
#include "cmwf/harness.hpp"

namespace cmwf {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 150, kTop = 40, kBottom = 55;

std::string axis_label(const std::string& sweep) {
    if (sweep == "isnr" || sweep == "recursive_smoke") return "iSNR [dB]";
    if (sweep == "shifts_C") return "number of shifts C";
    if (sweep == "mics_M") return "number of microphones M";
    if (sweep == "f0_bias") return "f0 error [%]";
    return sweep;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        if (ch == '&') out += "&amp;";
        else if (ch == '<') out += "&lt;";
        else if (ch == '>') out += "&gt;";
        else out += ch;
    }
    return out;
}

// Evenly spaced tick values covering [lo, hi].
std::vector<double> ticks(double lo, double hi) {
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    std::vector<double> out;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) out.push_back(std::abs(t) < 1e-12 ? 0.0 : t);
    return out;
}

void write_svg(const std::filesystem::path& path, const std::string& sweep, const std::vector<CellSummary>& cells) {
    std::vector<std::string> variants;
    for (const auto& c : cells)
        if (std::find(variants.begin(), variants.end(), c.variant) == variants.end()) variants.push_back(c.variant);

    double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
    for (const auto& c : cells) {
        if (!std::isfinite(c.mean)) continue;
        xlo = std::min(xlo, c.value);
        xhi = std::max(xhi, c.value);
        ylo = std::min(ylo, c.mean - c.ci95);
        yhi = std::max(yhi, c.mean + c.ci95);
    }
    if (!std::isfinite(xlo)) throw Error("no finite results for sweep " + sweep);
    if (xhi - xlo < 1e-12) {
        xlo -= 1.0;
        xhi += 1.0;
    }
    if (yhi - ylo < 1e-9) {
        ylo -= 1.0;
        yhi += 1.0;
    }
    const double pad = 0.05 * (yhi - ylo);
    ylo -= pad;
    yhi += pad;
    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    const auto px = [&](double x) { return kLeft + (x - xlo) / (xhi - xlo) * pw; };
    const auto py = [&](double y) { return kTop + (yhi - y) / (yhi - ylo) * ph; };

    std::ostringstream svg;
    svg << std::fixed << std::setprecision(2);
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n"
        << "<text x=\"" << kLeft + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">SI-SDR improvement ("
        << escape(sweep) << ")</text>\n";
    svg << "<g class=\"axes\" stroke=\"#444\" fill=\"none\">\n<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\""
        << pw << "\" height=\"" << ph << "\"/>\n</g>\n<g class=\"ticks\" fill=\"#222\">\n";
    for (double t : ticks(xlo, xhi))
        svg << "<line x1=\"" << px(t) << "\" y1=\"" << kTop + ph << "\" x2=\"" << px(t) << "\" y2=\"" << kTop + ph + 5
            << "\" stroke=\"#444\"/><text x=\"" << px(t) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">"
            << std::defaultfloat << t << std::fixed << "</text>\n";
    for (double t : ticks(ylo, yhi))
        svg << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << py(t) << "\" x2=\"" << kLeft + pw << "\" y2=\"" << py(t)
            << "\" stroke=\"#ddd\"/><text x=\"" << kLeft - 8 << "\" y=\"" << py(t) + 4 << "\" text-anchor=\"end\">"
            << std::defaultfloat << t << std::fixed << "</text>\n";
    svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
        << escape(axis_label(sweep)) << "</text>\n<text transform=\"translate(18," << kTop + ph / 2
        << ") rotate(-90)\" text-anchor=\"middle\">improvement [dB]</text>\n</g>\n";

    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
        const char* colour = kPalette[vi % std::size(kPalette)];
        std::vector<const CellSummary*> pts;
        for (const auto& c : cells)
            if (c.variant == variants[vi] && std::isfinite(c.mean)) pts.push_back(&c);
        std::sort(pts.begin(), pts.end(), [](auto a, auto b) { return a->value < b->value; });
        svg << "<g class=\"series\" data-variant=\"" << escape(variants[vi]) << "\">\n";
        if (pts.size() > 1) {
            bool band = std::any_of(pts.begin(), pts.end(), [](auto p) { return p->ci95 > 0.0; });
            if (band) {
                svg << "<polygon class=\"ci\" fill=\"" << colour << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
                for (auto p : pts) svg << px(p->value) << ',' << py(p->mean + p->ci95) << ' ';
                for (auto it = pts.rbegin(); it != pts.rend(); ++it)
                    svg << px((*it)->value) << ',' << py((*it)->mean - (*it)->ci95) << ' ';
                svg << "\"/>\n";
            }
        }
        svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
        for (auto p : pts) svg << px(p->value) << ',' << py(p->mean) << ' ';
        svg << "\"/>\n";
        for (auto p : pts)
            svg << "<circle cx=\"" << px(p->value) << "\" cy=\"" << py(p->mean) << "\" r=\"3\" fill=\"" << colour << "\"/>\n";
        const double ly = kTop + 10 + 18.0 * static_cast<double>(vi);
        svg << "<line x1=\"" << kLeft + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + pw + 32 << "\" y2=\"" << ly
            << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/><text x=\"" << kLeft + pw + 38 << "\" y=\"" << ly + 4
            << "\">" << escape(variants[vi]) << "</text>\n</g>\n";
    }
    svg << "</svg>\n";

    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << svg.str();
}

}  // namespace

std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& csv, const std::filesystem::path& out_dir) {
    const auto records = read_results_csv(csv);
    if (records.empty()) throw Error(csv.string() + ": no result rows to plot");
    const auto cells = summarize(records);
    std::map<std::string, std::vector<CellSummary>> by_sweep;
    for (const auto& c : cells) by_sweep[c.sweep].push_back(c);
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    for (const auto& [sweep, group] : by_sweep) {
        const auto path = out_dir / (sweep + ".svg");
        write_svg(path, sweep, group);
        written.push_back(path);
    }
    return written;
}

}  // namespace cmwf
