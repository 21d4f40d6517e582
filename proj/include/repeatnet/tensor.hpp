#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace repeatnet {

// Which convolution/GEMM implementation the ops dispatch to. The serial
// backend is the naive reference; the parallel backend is the OpenMP one.
// Both must agree within 1e-6 relative error on the same inputs.
enum class Backend { serial, parallel };

inline Backend& backend() {
    static Backend b = Backend::parallel;
    return b;
}

// When on, every recorded op validates its output (and backward() validates
// gradients) for NaN/Inf. Enabled by the test suites and deterministic runs.
inline bool& finite_checks() {
    static bool on = false;
    return on;
}

// Exit-code-relevant error categories (see the CLI).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

inline int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

// A dense row-major tensor with an optional same-shape gradient buffer.
// Activations use NCHW order, filters OIHW (out, in, kh, kw).
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    std::string name;

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    bool is_scalar() const { return numel() == 1; }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }
    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
    }
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

template <typename T>
TensorPtr<T> make_tensor(std::vector<int> shape, bool requires_grad = false) {
    auto t = std::make_shared<Tensor<T>>();
    t->shape = std::move(shape);
    t->data.assign(static_cast<size_t>(shape_numel(t->shape)), T(0));
    t->requires_grad = requires_grad;
    if (requires_grad) t->ensure_grad();
    return t;
}

template <typename T>
TensorPtr<T> make_tensor(std::vector<int> shape, std::vector<T> values, bool requires_grad = false) {
    auto t = make_tensor<T>(std::move(shape), requires_grad);
    if (static_cast<int64_t>(values.size()) != t->numel())
        throw std::invalid_argument("tensor data length " + std::to_string(values.size()) +
                                    " does not match shape " + shape_str(t->shape));
    t->data = std::move(values);
    return t;
}

template <typename T>
TensorPtr<T> make_scalar(T value, bool requires_grad = false) {
    return make_tensor<T>({1}, {value}, requires_grad);
}

template <typename T>
bool all_finite(const std::vector<T>& v) {
    for (T x : v)
        if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
}

// Reverse-mode autodiff record. Operations append themselves in execution
// order; backward() replays them once in reverse. A tensor consumed by
// several ops receives the sum of all gradient contributions (every backward
// rule accumulates with +=).
template <typename T>
class Tape {
public:
    TensorPtr<T> record(TensorPtr<T> out, std::vector<TensorPtr<T>> inputs,
                        std::function<void()> backward_fn) {
        if (finite_checks() && !all_finite(out->data))
            throw NumericalError("non-finite values in forward output" +
                                 (out->name.empty() ? std::string() : " of " + out->name));
        nodes_.push_back(Node{out, std::move(inputs), std::move(backward_fn)});
        return out;
    }

    void backward(const TensorPtr<T>& loss) {
        if (!loss->is_scalar())
            throw std::invalid_argument("backward() needs a scalar loss, got shape " +
                                        shape_str(loss->shape));
        if (!produced(loss))
            throw std::invalid_argument("backward(): loss tensor was not produced on this tape");
        loss->ensure_grad();
        loss->grad[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            if (it->backward_fn) it->backward_fn();
            if (finite_checks()) {
                for (const auto& in : it->inputs)
                    if (!in->grad.empty() && !all_finite(in->grad))
                        throw NumericalError("non-finite gradient" +
                                             (in->name.empty() ? std::string() : " in " + in->name));
            }
        }
    }

    bool produced(const TensorPtr<T>& t) const {
        for (const auto& n : nodes_)
            if (n.out == t) return true;
        return false;
    }

    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    struct Node {
        TensorPtr<T> out;
        std::vector<TensorPtr<T>> inputs;
        std::function<void()> backward_fn;
    };
    std::vector<Node> nodes_;
};

// Deterministic RNG used everywhere: mt19937_64 plus explicit transforms, so
// the same seed gives the same stream on every run of the same binary.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        // splitmix64; full 64-bit state walk, no library distribution objects
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    double uniform() {  // [0, 1)
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive bounds
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
    }

    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = 0.0, u2;
        while (u1 == 0.0) u1 = uniform();
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(theta);
        have_cached_ = true;
        return r * std::cos(theta);
    }

    template <typename It>
    void shuffle(It first, It last) {
        // Fisher-Yates with our own stream
        auto n = static_cast<int64_t>(last - first);
        for (int64_t i = n - 1; i > 0; --i) {
            int64_t j = static_cast<int64_t>(next_u64() % static_cast<uint64_t>(i + 1));
            std::swap(first[i], first[j]);
        }
    }

private:
    uint64_t state_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

template <typename T>
void fill_normal(Tensor<T>& t, Rng& rng, double mean, double stddev) {
    for (auto& x : t.data) x = static_cast<T>(mean + stddev * rng.normal());
}

template <typename T>
void fill_uniform(Tensor<T>& t, Rng& rng, double lo, double hi) {
    for (auto& x : t.data) x = static_cast<T>(rng.uniform(lo, hi));
}

}  // namespace repeatnet
