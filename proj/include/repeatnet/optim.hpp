#pragma once

#include <algorithm>
#include <unordered_map>
#include <vector>

#include "repeatnet/tensor.hpp"

namespace repeatnet {

// Momentum SGD with step decay. Matches the classic recipe: velocity
// v <- momentum * v + grad (+ weight_decay * param for decaying groups),
// param <- param - lr(epoch) * v.
struct SgdConfig {
    double lr0 = 0.1;
    double momentum = 0.9;
    double weight_decay = 1e-3;
    double decay_factor = 0.1;
    std::vector<int> decay_epochs;

    void validate() const {
        if (lr0 <= 0) throw std::invalid_argument("sgd: lr0 must be > 0");
        if (momentum < 0 || momentum >= 1)
            throw std::invalid_argument("sgd: momentum must be in [0, 1)");
        if (weight_decay < 0) throw std::invalid_argument("sgd: weight_decay must be >= 0");
        for (size_t i = 1; i < decay_epochs.size(); ++i)
            if (decay_epochs[i] <= decay_epochs[i - 1])
                throw std::invalid_argument("sgd: decay_epochs must be strictly increasing");
    }
};

inline double lr_at(const SgdConfig& cfg, int epoch) {
    int hits = 0;
    for (int e : cfg.decay_epochs)
        if (e <= epoch) ++hits;
    double lr = cfg.lr0;
    for (int i = 0; i < hits; ++i) lr *= cfg.decay_factor;
    return lr;
}

template <typename T>
struct ParamGroup {
    std::vector<TensorPtr<T>> params;
    bool apply_weight_decay = false;
    // flip-mask latents are kept inside the unit interval after every step
    bool clamp_unit = false;
};

template <typename T>
class SgdOptimizer {
public:
    void zero_grad(std::vector<ParamGroup<T>>& groups) {
        for (auto& g : groups)
            for (auto& p : g.params) p->zero_grad();
    }

    void step(std::vector<ParamGroup<T>>& groups, const SgdConfig& cfg, int epoch) {
        const T lr = static_cast<T>(lr_at(cfg, epoch));
        const T mom = static_cast<T>(cfg.momentum);
        const T wd = static_cast<T>(cfg.weight_decay);
        for (auto& group : groups) {
            for (auto& p : group.params) {
                if (p->grad.size() != p->data.size())
                    throw std::runtime_error("sgd: missing gradient on parameter" +
                                             (p->name.empty() ? std::string() : " " + p->name));
                auto& v = velocity_[p.get()];
                if (v.size() != p->data.size()) v.assign(p->data.size(), T(0));
                const int64_t n = p->numel();
                T* data = p->data.data();
                const T* grad = p->grad.data();
                T* vel = v.data();
                const bool decay = group.apply_weight_decay;
#pragma omp parallel for schedule(static)
                for (int64_t i = 0; i < n; ++i) {
                    T g = grad[i];
                    if (decay) g += wd * data[i];
                    vel[i] = mom * vel[i] + g;
                    data[i] -= lr * vel[i];
                }
                if (group.clamp_unit) {
#pragma omp parallel for schedule(static)
                    for (int64_t i = 0; i < n; ++i) data[i] = std::clamp(data[i], T(-1), T(1));
                }
            }
        }
    }

private:
    std::unordered_map<const Tensor<T>*, std::vector<T>> velocity_;
};

}  // namespace repeatnet
