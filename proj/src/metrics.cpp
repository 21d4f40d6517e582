#include "repeatnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "repeatnet/tensor.hpp"

namespace repeatnet {

double relative_contribution(double acc_base, double acc_repeat, double acc_dense) {
    if (acc_dense == acc_base)
        throw std::invalid_argument(
            "relative_contribution undefined: dense accuracy equals base accuracy");
    return 100.0 * (acc_repeat - acc_base) / (acc_dense - acc_base);
}

Aggregate aggregate_runs(const std::vector<RunSummary>& runs) {
    if (runs.size() < 2)
        throw std::invalid_argument("aggregate_runs needs at least two summaries");
    for (const auto& r : runs)
        if (r.config_id != runs.front().config_id)
            throw std::invalid_argument("aggregate_runs: mixed configs (" + r.config_id + " vs " +
                                        runs.front().config_id + ")");
    Aggregate a;
    a.n = static_cast<int>(runs.size());
    double sum = 0.0;
    for (const auto& r : runs) sum += r.final_test_acc;
    a.mean = sum / a.n;
    double sq = 0.0;
    for (const auto& r : runs) sq += (r.final_test_acc - a.mean) * (r.final_test_acc - a.mean);
    a.stddev = std::sqrt(sq / (a.n - 1));
    return a;
}

std::string metrics_csv(const std::vector<MetricsRecord>& records) {
    std::string out = "epoch,train_loss,train_acc,test_acc,lr,wall_time\n";
    char buf[160];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.4f,%.4f,%.8g,%.3f\n", r.epoch, r.train_loss,
                      r.train_acc, r.test_acc, r.lr, r.wall_time);
        out += buf;
    }
    return out;
}

std::string metrics_jsonl(const std::vector<MetricsRecord>& records) {
    std::string out;
    char buf[256];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf),
                      "{\"epoch\":%d,\"train_loss\":%.6f,\"train_acc\":%.4f,\"test_acc\":%.4f,"
                      "\"lr\":%.8g,\"wall_time\":%.3f}\n",
                      r.epoch, r.train_loss, r.train_acc, r.test_acc, r.lr, r.wall_time);
        out += buf;
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os) throw DataError("write failed for '" + path + "'");
}

void to_json(nlohmann::json& j, const RunSummary& s) {
    j = {{"final_test_acc", s.final_test_acc},
         {"best_test_acc", s.best_test_acc},
         {"params", s.params},
         {"bits", s.bits},
         {"flops", s.flops},
         {"seed", s.seed},
         {"epochs", s.epochs},
         {"config_id", s.config_id}};
}

void from_json(const nlohmann::json& j, RunSummary& s) {
    s = RunSummary{};
    s.final_test_acc = j.at("final_test_acc").get<double>();
    s.best_test_acc = j.at("best_test_acc").get<double>();
    s.params = j.at("params").get<int64_t>();
    s.bits = j.at("bits").get<int64_t>();
    s.flops = j.at("flops").get<int64_t>();
    s.seed = j.at("seed").get<uint64_t>();
    s.epochs = j.at("epochs").get<int>();
    s.config_id = j.at("config_id").get<std::string>();
}

std::vector<MetricsRecord> parse_metrics_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(is, line)) throw DataError("metrics csv '" + path + "': empty file");
    if (line.rfind("epoch,", 0) != 0)
        throw DataError("metrics csv '" + path + "': missing header row");
    std::vector<MetricsRecord> records;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        MetricsRecord r;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf", &r.epoch, &r.train_loss,
                        &r.train_acc, &r.test_acc, &r.lr, &r.wall_time) != 6)
            throw DataError("metrics csv '" + path + "': bad row '" + line + "'");
        records.push_back(r);
    }
    return records;
}

namespace {

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                               "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string fmt_tick(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace

std::string render_line_chart_svg(const std::vector<PlotSeries>& series, const std::string& title,
                                  const std::string& x_label, const std::string& y_label) {
    const double width = 640, height = 440;
    const double left = 64, right = 24, top = 40, bottom = 56;
    const double plot_w = width - left - right, plot_h = height - top - bottom;

    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool any = false;
    for (const auto& s : series)
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (!any) {
                xmin = xmax = s.x[i];
                ymin = ymax = s.y[i];
                any = true;
            }
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * plot_w; };
    auto sy = [&](double y) { return top + plot_h - (y - ymin) / (ymax - ymin) * plot_h; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << fmt(width / 2) << "\" y=\"24\" text-anchor=\"middle\" "
          "font-family=\"sans-serif\" font-size=\"16\">"
       << title << "</text>\n";

    // axes
    os << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top + plot_h) << "\" x2=\""
       << fmt(left + plot_w) << "\" y2=\"" << fmt(top + plot_h) << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(left)
       << "\" y2=\"" << fmt(top + plot_h) << "\" stroke=\"black\"/>\n";

    const int ticks = 5;
    for (int i = 0; i <= ticks; ++i) {
        const double tx = xmin + (xmax - xmin) * i / ticks;
        const double ty = ymin + (ymax - ymin) * i / ticks;
        os << "<line x1=\"" << fmt(sx(tx)) << "\" y1=\"" << fmt(top + plot_h) << "\" x2=\""
           << fmt(sx(tx)) << "\" y2=\"" << fmt(top + plot_h + 5) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << fmt(sx(tx)) << "\" y=\"" << fmt(top + plot_h + 20)
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
           << fmt_tick(tx) << "</text>\n";
        os << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(sy(ty)) << "\" x2=\"" << fmt(left)
           << "\" y2=\"" << fmt(sy(ty)) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << fmt(left - 9) << "\" y=\"" << fmt(sy(ty) + 4)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt_tick(ty)
           << "</text>\n";
    }
    os << "<text x=\"" << fmt(left + plot_w / 2) << "\" y=\"" << fmt(height - 14)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << x_label
       << "</text>\n";
    os << "<text x=\"16\" y=\"" << fmt(top + plot_h / 2)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 16 "
       << fmt(top + plot_h / 2) << ")\">" << y_label << "</text>\n";

    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kSeriesColors[si % 8];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (i) os << " ";
            os << fmt(sx(s.x[i])) << "," << fmt(sy(s.y[i]));
        }
        os << "\"/>\n";
        const double ly = top + 16 + 16 * static_cast<double>(si);
        os << "<line x1=\"" << fmt(left + plot_w - 150) << "\" y1=\"" << fmt(ly) << "\" x2=\""
           << fmt(left + plot_w - 130) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color
           << "\" stroke-width=\"1.5\"/>\n";
        os << "<text x=\"" << fmt(left + plot_w - 124) << "\" y=\"" << fmt(ly + 4)
           << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace repeatnet
