#pragma once

#include <functional>

#include "repeatnet/tensor.hpp"

namespace repeatnet {

// Central-difference gradient verification. `f` must rebuild the forward
// computation from scratch on the tape it is given and return the scalar
// loss; it is evaluated repeatedly with perturbed parameter entries. Meant
// to run in 64-bit mode.
//
// Returns the maximum over sampled coordinates of
//   |analytic - central_difference| / max(|analytic|, |cd|, 1e-8).
template <typename T>
double gradcheck(const std::function<TensorPtr<T>(Tape<T>&)>& f,
                 const std::vector<TensorPtr<T>>& params, T h, int probes_per_tensor, Rng& rng) {
    static_assert(sizeof(T) >= 8, "gradcheck expects 64-bit scalars");

    for (auto& p : params) p->zero_grad();
    Tape<T> tape;
    auto loss = f(tape);
    tape.backward(loss);
    if (!std::isfinite(static_cast<double>(loss->data[0])))
        throw NumericalError("gradcheck: non-finite loss");

    std::vector<std::vector<T>> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) {
        p->ensure_grad();
        analytic.push_back(p->grad);
    }

    auto eval = [&]() -> double {
        Tape<T> t;
        auto l = f(t);
        const double v = static_cast<double>(l->data[0]);
        if (!std::isfinite(v)) throw NumericalError("gradcheck: non-finite loss during probing");
        return v;
    };

    double max_rel = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        const int64_t n = p->numel();
        const int probes = static_cast<int>(std::min<int64_t>(probes_per_tensor, n));
        for (int k = 0; k < probes; ++k) {
            const int64_t i = n <= probes ? k : static_cast<int64_t>(rng.next_u64() % static_cast<uint64_t>(n));
            const T saved = p->data[i];
            p->data[i] = saved + h;
            const double up = eval();
            p->data[i] = saved - h;
            const double down = eval();
            p->data[i] = saved;
            const double cd = (up - down) / (2.0 * static_cast<double>(h));
            const double an = static_cast<double>(analytic[pi][i]);
            const double rel = std::abs(an - cd) / std::max({std::abs(an), std::abs(cd), 1e-8});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace repeatnet
