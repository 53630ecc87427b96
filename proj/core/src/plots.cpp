#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dahcr/errors.hpp"
#include "dahcr/harness.hpp"

namespace dahcr {

namespace fs = std::filesystem;

namespace {

struct Series {
    std::vector<double> epoch;
    std::vector<double> value;
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

// Minimal line chart; fixed canvas so identical inputs give identical
// bytes.
std::string render_svg(const Series& s, const std::string& title, const std::string& y_label) {
    const double width = 640, height = 400;
    const double ml = 60, mr = 20, mt = 40, mb = 50;
    double xmin = s.epoch.front(), xmax = s.epoch.back();
    if (xmax == xmin) xmax = xmin + 1.0;
    double ymin = *std::min_element(s.value.begin(), s.value.end());
    double ymax = *std::max_element(s.value.begin(), s.value.end());
    if (ymax == ymin) {
        ymax += 1.0;
        ymin -= 1.0;
    }
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr); };
    auto py = [&](double y) { return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
        << title << "</text>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
        << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << height - mb << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double y = ymin + (ymax - ymin) * i / 4.0;
        svg << "<text x=\"" << ml - 8 << "\" y=\"" << py(y) + 4
            << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(y) << "</text>\n";
        const double x = xmin + (xmax - xmin) * i / 4.0;
        svg << "<text x=\"" << px(x) << "\" y=\"" << height - mb + 18
            << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(x) << "</text>\n";
    }
    svg << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">epoch</text>\n";
    svg << "<text x=\"16\" y=\"" << height / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
        << height / 2 << ")\">" << y_label << "</text>\n";

    svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.epoch.size(); ++i) {
        if (i) svg << " ";
        svg << fmt(px(s.epoch[i])) << "," << fmt(py(s.value[i]));
    }
    svg << "\"/>\n";
    for (std::size_t i = 0; i < s.epoch.size(); ++i) {
        svg << "<circle cx=\"" << fmt(px(s.epoch[i])) << "\" cy=\"" << fmt(py(s.value[i]))
            << "\" r=\"2.5\" fill=\"#1f77b4\"/>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("write failed: " + path.string());
}

void write_tidy(const fs::path& path, const Series& s, const char* name) {
    std::ostringstream csv;
    csv << "epoch," << name << "\n";
    for (std::size_t i = 0; i < s.epoch.size(); ++i) {
        char buf[80];
        std::snprintf(buf, sizeof(buf), "%g,%.6f\n", s.epoch[i], s.value[i]);
        csv << buf;
    }
    write_file(path, csv.str());
}

}  // namespace

void export_plots(const std::string& metrics_csv, const std::string& out_dir) {
    std::ifstream in(metrics_csv);
    if (!in) throw ValidationError("missing CSV: " + metrics_csv);
    std::string header;
    if (!std::getline(in, header) || header != "epoch,episodes,sr15,at,hdcg,loss") {
        throw ValidationError(metrics_csv + ": expected header epoch,episodes,sr15,at,hdcg,loss");
    }
    Series sr15, loss;
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        double epoch, episodes, sr, at, hdcg, l;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &epoch, &episodes, &sr, &at,
                        &hdcg, &l) != 6) {
            throw ValidationError(metrics_csv + ":" + std::to_string(lineno) + ": malformed row");
        }
        sr15.epoch.push_back(epoch);
        sr15.value.push_back(sr);
        loss.epoch.push_back(epoch);
        loss.value.push_back(l);
    }
    if (sr15.epoch.empty()) throw ValidationError(metrics_csv + ": no data rows");

    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "sr15_vs_epoch.svg",
               render_svg(sr15, "Success rate at turn 15", "SR@15"));
    write_file(fs::path(out_dir) / "loss_vs_epoch.svg",
               render_svg(loss, "Training loss", "loss"));
    write_tidy(fs::path(out_dir) / "sr15_vs_epoch.csv", sr15, "sr15");
    write_tidy(fs::path(out_dir) / "loss_vs_epoch.csv", loss, "loss");
}

}  // namespace dahcr
