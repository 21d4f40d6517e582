#include "repeatnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace repeatnet {

namespace {

constexpr int kCifarRecordBytes = 3073;  // 1 label byte + 3 x 32 x 32 pixels

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open '" + path + "'");
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(is), {});
}

uint32_t be32(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

}  // namespace

IdxData load_idx(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() < 4) throw DataError("idx '" + path + "': truncated header");
    if (bytes[0] != 0 || bytes[1] != 0)
        throw DataError("idx '" + path + "': bad magic (first two bytes must be zero)");
    IdxData d;
    d.dtype = bytes[2];
    if (d.dtype != 0x08)
        throw DataError("idx '" + path + "': unsupported dtype 0x" + std::to_string(d.dtype) +
                        " (only unsigned byte supported)");
    const int ndim = bytes[3];
    if (ndim < 1 || bytes.size() < 4 + 4 * static_cast<size_t>(ndim))
        throw DataError("idx '" + path + "': truncated dimension list");
    int64_t count = 1;
    for (int i = 0; i < ndim; ++i) {
        const uint32_t dim = be32(bytes.data() + 4 + 4 * i);
        d.dims.push_back(static_cast<int>(dim));
        count *= dim;
    }
    const size_t offset = 4 + 4 * static_cast<size_t>(ndim);
    if (bytes.size() - offset != static_cast<size_t>(count))
        throw DataError("idx '" + path + "': payload size " + std::to_string(bytes.size() - offset) +
                        " does not match dims (" + std::to_string(count) + " expected)");
    d.bytes.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
    return d;
}

void write_idx(const std::string& path, const IdxData& data) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    const uint8_t header[4] = {0, 0, data.dtype, static_cast<uint8_t>(data.dims.size())};
    os.write(reinterpret_cast<const char*>(header), 4);
    for (int dim : data.dims) {
        const uint8_t b[4] = {static_cast<uint8_t>(dim >> 24), static_cast<uint8_t>(dim >> 16),
                              static_cast<uint8_t>(dim >> 8), static_cast<uint8_t>(dim)};
        os.write(reinterpret_cast<const char*>(b), 4);
    }
    os.write(reinterpret_cast<const char*>(data.bytes.data()),
             static_cast<std::streamsize>(data.bytes.size()));
    if (!os) throw DataError("write failed for '" + path + "'");
}

DatasetHandle load_mnist(const std::string& dir, const std::string& split) {
    const bool train = split == "train";
    const std::string img_path =
        dir + (train ? "/train-images-idx3-ubyte" : "/t10k-images-idx3-ubyte");
    const std::string lab_path =
        dir + (train ? "/train-labels-idx1-ubyte" : "/t10k-labels-idx1-ubyte");
    IdxData images = load_idx(img_path);
    IdxData labels = load_idx(lab_path);
    if (images.dims.size() != 3)
        throw DataError("idx '" + img_path + "': expected image magic (0x00000803, 3 dims), got " +
                        std::to_string(images.dims.size()) + " dims");
    if (labels.dims.size() != 1)
        throw DataError("idx '" + lab_path + "': expected label magic (0x00000801, 1 dim), got " +
                        std::to_string(labels.dims.size()) + " dims");
    if (images.dims[0] != labels.dims[0])
        throw DataError("mnist: image count " + std::to_string(images.dims[0]) +
                        " != label count " + std::to_string(labels.dims[0]));
    DatasetHandle d;
    d.name = "mnist";
    d.split = split;
    d.num = images.dims[0];
    d.channels = 1;
    d.height = images.dims[1];
    d.width = images.dims[2];
    d.images = std::move(images.bytes);
    d.labels = std::move(labels.bytes);
    d.num_classes = 10;
    for (uint8_t l : d.labels)
        if (l >= d.num_classes) throw DataError("mnist: label out of range");
    return d;
}

DatasetHandle load_cifar10_bin(const std::string& dir, const std::string& split) {
    std::vector<std::string> files;
    if (split == "train") {
        for (int i = 1; i <= 5; ++i) {
            const std::string f = dir + "/data_batch_" + std::to_string(i) + ".bin";
            if (std::filesystem::exists(f)) files.push_back(f);
        }
        if (files.empty()) throw DataError("cifar10: no data_batch_*.bin files in '" + dir + "'");
    } else {
        files.push_back(dir + "/test_batch.bin");
    }

    DatasetHandle d;
    d.name = "cifar10";
    d.split = split;
    d.channels = 3;
    d.height = 32;
    d.width = 32;
    d.num_classes = 10;
    for (const auto& f : files) {
        const auto bytes = read_file_bytes(f);
        if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0)
            throw DataError("cifar10 '" + f + "': size " + std::to_string(bytes.size()) +
                            " is not a positive multiple of " + std::to_string(kCifarRecordBytes));
        const size_t records = bytes.size() / kCifarRecordBytes;
        for (size_t r = 0; r < records; ++r) {
            const uint8_t* rec = bytes.data() + r * kCifarRecordBytes;
            if (rec[0] >= d.num_classes)
                throw DataError("cifar10 '" + f + "': label " + std::to_string(rec[0]) +
                                " out of range");
            d.labels.push_back(rec[0]);
            d.images.insert(d.images.end(), rec + 1, rec + kCifarRecordBytes);
        }
    }
    d.num = static_cast<int>(d.labels.size());
    return d;
}

DatasetHandle load_dataset(const std::string& dataset, const std::string& dir,
                           const std::string& split) {
    std::string root = dir;
    if (root.empty()) {
        const char* env = std::getenv("REPEATNET_DATA_DIR");
        if (env) root = env;
    }
    if (root.empty())
        throw DataError("no dataset directory given and REPEATNET_DATA_DIR is unset");
    if (dataset == "mnist") return load_mnist(root, split);
    if (dataset == "cifar10") return load_cifar10_bin(root, split);
    throw DataError("unknown dataset '" + dataset + "'");
}

void take_subset(DatasetHandle& data, int n) {
    if (n <= 0 || n >= data.num) return;
    data.num = n;
    data.labels.resize(static_cast<size_t>(n));
    data.images.resize(static_cast<size_t>(n) * data.channels * data.height * data.width);
}

void compute_norm_stats(DatasetHandle& data) {
    const int64_t hw = static_cast<int64_t>(data.height) * data.width;
    data.mean.assign(static_cast<size_t>(data.channels), 0.0);
    data.stddev.assign(static_cast<size_t>(data.channels), 1.0);
    if (data.num == 0) throw DataError("cannot compute normalization stats of an empty dataset");
    for (int c = 0; c < data.channels; ++c) {
        double sum = 0.0, sq = 0.0;
        for (int n = 0; n < data.num; ++n) {
            const uint8_t* img =
                data.images.data() + (static_cast<int64_t>(n) * data.channels + c) * hw;
            for (int64_t j = 0; j < hw; ++j) {
                const double v = img[j] / 255.0;
                sum += v;
                sq += v * v;
            }
        }
        const double m = sum / (static_cast<double>(data.num) * hw);
        const double var = sq / (static_cast<double>(data.num) * hw) - m * m;
        data.mean[static_cast<size_t>(c)] = m;
        data.stddev[static_cast<size_t>(c)] = std::sqrt(std::max(var, 1e-8));
    }
}

// ---------------------------------------------------------------------------
// Procedural datasets. These exist so the desk-scale experiments run without
// the real archives; the files they produce are format-identical to the real
// ones and load through the parsers above.
// ---------------------------------------------------------------------------

namespace {

// classic 5x7 digit glyphs, one row per string
const char* const kDigitRows[10][7] = {
    {"01110", "10001", "10011", "10101", "11001", "10001", "01110"},  // 0
    {"00100", "01100", "00100", "00100", "00100", "00100", "01110"},  // 1
    {"01110", "10001", "00001", "00010", "00100", "01000", "11111"},  // 2
    {"11111", "00010", "00100", "00010", "00001", "10001", "01110"},  // 3
    {"00010", "00110", "01010", "10010", "11111", "00010", "00010"},  // 4
    {"11111", "10000", "11110", "00001", "00001", "10001", "01110"},  // 5
    {"00110", "01000", "10000", "11110", "10001", "10001", "01110"},  // 6
    {"11111", "00001", "00010", "00100", "01000", "01000", "01000"},  // 7
    {"01110", "10001", "10001", "01110", "10001", "10001", "01110"},  // 8
    {"01110", "10001", "10001", "01111", "00001", "00010", "01100"},  // 9
};

double glyph_bilinear(int digit, double gx, double gy) {
    // zero outside the 5x7 cell grid; bilinear between cell centers
    const int x0 = static_cast<int>(std::floor(gx));
    const int y0 = static_cast<int>(std::floor(gy));
    auto at = [&](int x, int y) -> double {
        if (x < 0 || x >= 5 || y < 0 || y >= 7) return 0.0;
        return kDigitRows[digit][y][x] == '1' ? 1.0 : 0.0;
    };
    const double fx = gx - x0, fy = gy - y0;
    return at(x0, y0) * (1 - fx) * (1 - fy) + at(x0 + 1, y0) * fx * (1 - fy) +
           at(x0, y0 + 1) * (1 - fx) * fy + at(x0 + 1, y0 + 1) * fx * fy;
}

void render_digit(int digit, Rng& rng, uint8_t* out28x28) {
    const double scale = rng.uniform(2.3, 3.1);
    const double theta = rng.uniform(-0.35, 0.35);
    const double shear = rng.uniform(-0.25, 0.25);
    const double cx = 13.5 + rng.uniform(-2.5, 2.5);
    const double cy = 13.5 + rng.uniform(-2.5, 2.5);
    const double wobble_amp = rng.uniform(0.0, 1.1);
    const double wobble_freq = rng.uniform(0.25, 0.6);
    const double wobble_phase = rng.uniform(0.0, 6.28318);
    const double fg = rng.uniform(170.0, 255.0);
    const double noise = rng.uniform(8.0, 18.0);
    const double edge = rng.uniform(0.30, 0.50);  // stroke softness threshold
    const double ct = std::cos(theta), st = std::sin(theta);

    // precompute the noise so the pixel loop stays in one rng order
    std::vector<double> noise_buf(28 * 28);
    for (auto& v : noise_buf) v = rng.normal() * noise;

    for (int y = 0; y < 28; ++y)
        for (int x = 0; x < 28; ++x) {
            const double dx = x - cx, dy = y - cy;
            double u = (ct * dx + st * dy) / scale + shear * (-st * dx + ct * dy) / scale;
            double v = (-st * dx + ct * dy) / scale;
            u += wobble_amp * std::sin(wobble_freq * y + wobble_phase) / scale;
            const double val = glyph_bilinear(digit, u + 2.0, v + 3.0);
            const double alpha = std::clamp((val - edge) / 0.25, 0.0, 1.0);
            const double pix = fg * alpha + noise_buf[static_cast<size_t>(y) * 28 + x];
            out28x28[y * 28 + x] = static_cast<uint8_t>(std::clamp(pix, 0.0, 255.0));
        }
}

void write_mnist_pair(const std::string& dir, const std::string& img_name,
                      const std::string& lab_name, int count, Rng& rng) {
    IdxData images;
    images.dtype = 0x08;
    images.dims = {count, 28, 28};
    images.bytes.resize(static_cast<size_t>(count) * 28 * 28);
    IdxData labels;
    labels.dtype = 0x08;
    labels.dims = {count};
    labels.bytes.resize(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        const int digit = i % 10;
        labels.bytes[static_cast<size_t>(i)] = static_cast<uint8_t>(digit);
        render_digit(digit, rng, images.bytes.data() + static_cast<size_t>(i) * 28 * 28);
    }
    write_idx(dir + "/" + img_name, images);
    write_idx(dir + "/" + lab_name, labels);
}

enum class Shape { disk, square, triangle, ring, cross };

struct ClassDef {
    Shape shape;
    bool striped;
    double r, g, b;
};

const ClassDef kCifarClasses[10] = {
    {Shape::disk, false, 200, 60, 60},    {Shape::disk, true, 70, 90, 200},
    {Shape::square, false, 70, 90, 200},  {Shape::square, true, 200, 60, 60},
    {Shape::triangle, false, 70, 180, 80}, {Shape::triangle, true, 210, 190, 60},
    {Shape::ring, false, 210, 190, 60},   {Shape::ring, true, 70, 180, 80},
    {Shape::cross, false, 190, 70, 190},  {Shape::cross, true, 60, 190, 190},
};

double shape_sdf(Shape s, double px, double py, double r) {
    switch (s) {
        case Shape::disk:
            return std::hypot(px, py) - r;
        case Shape::square:
            return std::max(std::abs(px), std::abs(py)) - 0.85 * r;
        case Shape::triangle: {
            // intersection of three half planes, normals at 120 degrees
            const double d1 = py - 0.62 * r;
            const double d2 = -0.866 * px - 0.5 * py - 0.62 * r;
            const double d3 = 0.866 * px - 0.5 * py - 0.62 * r;
            return std::max({d1, d2, d3});
        }
        case Shape::ring:
            return std::abs(std::hypot(px, py) - 0.75 * r) - 0.30 * r;
        case Shape::cross: {
            const double bar1 = std::max(std::abs(px) - r, std::abs(py) - 0.34 * r);
            const double bar2 = std::max(std::abs(px) - 0.34 * r, std::abs(py) - r);
            return std::min(bar1, bar2);
        }
    }
    return 1e9;
}

struct ObjectParams {
    int cls;
    double cx, cy, radius, rot;
    double stripe_angle, stripe_phase, stripe_period;
    double cr, cg, cb;
};

void draw_object(std::vector<double>& rgb, const ObjectParams& o, double alpha_scale) {
    const ClassDef& def = kCifarClasses[o.cls];
    const double cr = std::cos(o.rot), sr = std::sin(o.rot);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const double dx = x - o.cx, dy = y - o.cy;
            const double px = cr * dx + sr * dy;
            const double py = -sr * dx + cr * dy;
            const double d = shape_sdf(def.shape, px, py, o.radius);
            const double alpha = std::clamp(0.5 - d, 0.0, 1.0) * alpha_scale;
            if (alpha <= 0.0) continue;
            double tex = 1.0;
            if (def.striped) {
                const double s = std::sin((std::cos(o.stripe_angle) * x +
                                           std::sin(o.stripe_angle) * y) *
                                              6.28318 / o.stripe_period +
                                          o.stripe_phase);
                tex = s > 0 ? 1.0 : 0.25;
            }
            const size_t idx = static_cast<size_t>(y) * 32 + x;
            rgb[idx] = rgb[idx] * (1 - alpha) + o.cr * tex * alpha;
            rgb[1024 + idx] = rgb[1024 + idx] * (1 - alpha) + o.cg * tex * alpha;
            rgb[2048 + idx] = rgb[2048 + idx] * (1 - alpha) + o.cb * tex * alpha;
        }
}

void render_cifar_sample(int cls, Rng& rng, uint8_t* out_planes) {
    std::vector<double> rgb(3 * 1024);
    // background gradient
    double bg1[3], bg2[3];
    for (int c = 0; c < 3; ++c) {
        bg1[c] = rng.uniform(30, 220);
        bg2[c] = rng.uniform(30, 220);
    }
    const double psi = rng.uniform(0.0, 6.28318);
    const double gxv = std::cos(psi), gyv = std::sin(psi);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const double t = std::clamp((gxv * x + gyv * y) / 44.0 + 0.5, 0.0, 1.0);
            const size_t idx = static_cast<size_t>(y) * 32 + x;
            for (int c = 0; c < 3; ++c)
                rgb[static_cast<size_t>(c) * 1024 + idx] = bg1[c] * (1 - t) + bg2[c] * t;
        }

    // one distractor of an unrelated class behind the target object
    ObjectParams distractor;
    distractor.cls = rng.uniform_int(0, 9);
    distractor.cx = rng.uniform(4, 28);
    distractor.cy = rng.uniform(4, 28);
    distractor.radius = rng.uniform(2.5, 4.5);
    distractor.rot = rng.uniform(0.0, 6.28318);
    distractor.stripe_angle = rng.uniform(0.0, 6.28318);
    distractor.stripe_phase = rng.uniform(0.0, 6.28318);
    distractor.stripe_period = rng.uniform(3.0, 5.0);
    // distractor color is random, so it carries no class signal
    distractor.cr = rng.uniform(40, 215);
    distractor.cg = rng.uniform(40, 215);
    distractor.cb = rng.uniform(40, 215);
    draw_object(rgb, distractor, 0.8);

    ObjectParams obj;
    obj.cls = cls;
    obj.cx = rng.uniform(10, 22);
    obj.cy = rng.uniform(10, 22);
    obj.radius = rng.uniform(6.5, 10.0);
    obj.rot = rng.uniform(0.0, 6.28318);
    obj.stripe_angle = rng.uniform(0.0, 6.28318);
    obj.stripe_phase = rng.uniform(0.0, 6.28318);
    obj.stripe_period = rng.uniform(3.0, 5.0);
    const ClassDef& def = kCifarClasses[cls];
    const double jr = rng.normal() * 26, jg = rng.normal() * 26, jb = rng.normal() * 26;
    obj.cr = std::clamp(def.r + jr, 0.0, 255.0);
    obj.cg = std::clamp(def.g + jg, 0.0, 255.0);
    obj.cb = std::clamp(def.b + jb, 0.0, 255.0);
    draw_object(rgb, obj, 1.0);

    const double noise = rng.uniform(10.0, 20.0);
    const double brightness = rng.uniform(-16.0, 16.0);
    for (size_t i = 0; i < rgb.size(); ++i) {
        const double v = rgb[i] + rng.normal() * noise + brightness;
        out_planes[i] = static_cast<uint8_t>(std::clamp(v, 0.0, 255.0));
    }
}

void write_cifar_batch(const std::string& path, int count, Rng& rng) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    std::vector<uint8_t> planes(3072);
    for (int i = 0; i < count; ++i) {
        const int cls = i % 10;
        render_cifar_sample(cls, rng, planes.data());
        os.put(static_cast<char>(cls));
        os.write(reinterpret_cast<const char*>(planes.data()), 3072);
    }
    if (!os) throw DataError("write failed for '" + path + "'");
}

}  // namespace

void generate_mnist_like(const std::string& dir, int train_n, int test_n, uint64_t seed) {
    std::filesystem::create_directories(dir);
    Rng train_rng(seed);
    Rng test_rng(seed ^ 0x7e57da7aULL);
    write_mnist_pair(dir, "train-images-idx3-ubyte", "train-labels-idx1-ubyte", train_n, train_rng);
    write_mnist_pair(dir, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", test_n, test_rng);
}

void generate_cifar_like(const std::string& dir, int train_n, int test_n, uint64_t seed) {
    std::filesystem::create_directories(dir);
    if (train_n > 50000) throw std::invalid_argument("cifar-like: at most 50000 train samples");
    Rng train_rng(seed);
    Rng test_rng(seed ^ 0x7e57da7aULL);
    int written = 0, batch = 1;
    while (written < train_n) {
        const int chunk = std::min(10000, train_n - written);
        write_cifar_batch(dir + "/data_batch_" + std::to_string(batch) + ".bin", chunk, train_rng);
        written += chunk;
        ++batch;
    }
    write_cifar_batch(dir + "/test_batch.bin", test_n, test_rng);
}

}  // namespace repeatnet
