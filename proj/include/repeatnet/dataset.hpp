#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "repeatnet/tensor.hpp"

namespace repeatnet {

// Raw u8 image classification dataset plus per-channel normalization stats.
struct DatasetHandle {
    std::string name;
    std::string split;
    int num = 0;
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<uint8_t> images;  // N x C x H x W
    std::vector<uint8_t> labels;  // N
    std::vector<double> mean;     // per channel, in [0, 1] units
    std::vector<double> stddev;
    int num_classes = 10;
};

// One parsed IDX file (big-endian magic 0x00000803 for u8 images,
// 0x00000801 for u8 labels).
struct IdxData {
    uint8_t dtype = 0;
    std::vector<int> dims;
    std::vector<uint8_t> bytes;
};

IdxData load_idx(const std::string& path);
void write_idx(const std::string& path, const IdxData& data);

// split is "train" or "test"; uses the standard MNIST / CIFAR-10 file names
DatasetHandle load_mnist(const std::string& dir, const std::string& split);
DatasetHandle load_cifar10_bin(const std::string& dir, const std::string& split);

// dispatch by dataset name; empty dir falls back to REPEATNET_DATA_DIR
DatasetHandle load_dataset(const std::string& dataset, const std::string& dir,
                           const std::string& split);

void take_subset(DatasetHandle& data, int n);
// per-channel mean/std over data.images, written into data.mean/.stddev
void compute_norm_stats(DatasetHandle& data);

// Procedural stand-in datasets written in the exact MNIST-IDX / CIFAR-10
// binary formats, for environments without the real files.
void generate_mnist_like(const std::string& dir, int train_n, int test_n, uint64_t seed);
void generate_cifar_like(const std::string& dir, int train_n, int test_n, uint64_t seed);

}  // namespace repeatnet
