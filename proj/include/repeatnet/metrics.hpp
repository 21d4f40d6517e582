#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace repeatnet {

struct MetricsRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;  // percent
    double test_acc = 0.0;   // percent
    double lr = 0.0;
    double wall_time = 0.0;  // seconds; 0 in deterministic mode
};

struct RunSummary {
    double final_test_acc = 0.0;
    double best_test_acc = 0.0;
    int64_t params = 0;
    int64_t bits = 0;
    int64_t flops = 0;
    uint64_t seed = 0;
    int epochs = 0;
    std::string config_id;  // identifies everything but the seed
};

// 100 * (repeat - base) / (dense - base); may be negative or exceed 100
double relative_contribution(double acc_base, double acc_repeat, double acc_dense);

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation (N-1)
    int n = 0;
};

// mean / sample std of final test accuracy over runs of one config
Aggregate aggregate_runs(const std::vector<RunSummary>& runs);

std::string metrics_csv(const std::vector<MetricsRecord>& records);
std::string metrics_jsonl(const std::vector<MetricsRecord>& records);
void write_text_file(const std::string& path, const std::string& content);

void to_json(nlohmann::json& j, const RunSummary& s);
void from_json(const nlohmann::json& j, RunSummary& s);
std::vector<MetricsRecord> parse_metrics_csv(const std::string& path);

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

// Minimal deterministic SVG line chart; identical inputs give identical bytes.
std::string render_line_chart_svg(const std::vector<PlotSeries>& series, const std::string& title,
                                  const std::string& x_label, const std::string& y_label);

}  // namespace repeatnet
