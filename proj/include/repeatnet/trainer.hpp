#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "repeatnet/arch.hpp"
#include "repeatnet/dataset.hpp"
#include "repeatnet/metrics.hpp"
#include "repeatnet/network.hpp"
#include "repeatnet/optim.hpp"

namespace repeatnet {

struct DataConfig {
    std::string dataset = "cifar10";  // "cifar10" | "mnist"
    std::string dir;                  // empty: REPEATNET_DATA_DIR
    int subset_size = 0;              // 0: full train split
    bool pad_crop = false;            // pad-4 random crop
    bool hflip = false;
};

struct RunConfig {
    ArchSpec arch;
    ScalePolicy scale;
    SgdConfig sgd;
    DataConfig data;
    int epochs = 20;
    int batch_size = 128;
    uint64_t seed = 1;
    bool deterministic = true;

    // stable identity of everything except the seed, for aggregation
    std::string config_id() const;
};

RunConfig parse_run_config(const nlohmann::json& j);
nlohmann::json run_config_json(const RunConfig& cfg);

struct TrainResult {
    RunSummary summary;
    std::vector<MetricsRecord> records;
};

// Runs the configured training; when out_dir is non-empty, writes metrics.csv,
// metrics.jsonl, summary.json, config.json, plan.json and checkpoint.rpnt.
// Divergence (non-finite loss) raises NumericalError after writing a
// diagnostic record.
TrainResult train(const RunConfig& cfg, const std::string& out_dir);

// Same, with datasets the caller already loaded (normalization stats are
// computed here, on the train split).
TrainResult train_on(const RunConfig& cfg, DatasetHandle train_data, DatasetHandle test_data,
                     const std::string& out_dir);

// top-1 accuracy in percent; eval-mode batch norm, no augmentation
double evaluate(Network<float>& net, const DatasetHandle& data, int batch_size,
                const std::vector<double>& mean, const std::vector<double>& stddev);

double evaluate_checkpoint(const std::string& checkpoint_path, const std::string& plan_path,
                           const DatasetHandle& data, int batch_size);

}  // namespace repeatnet
