#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "repeatnet/ops.hpp"
#include "repeatnet/tensor.hpp"

namespace repeatnet {

// Child realization variants: verbatim reuse, the learnable swish-style
// elementwise map, or learnable sign flips.
enum class RepeatVariant { linear, s, f };

inline const char* to_string(RepeatVariant v) {
    switch (v) {
        case RepeatVariant::linear: return "linear";
        case RepeatVariant::s: return "s";
        case RepeatVariant::f: return "f";
    }
    return "?";
}

inline RepeatVariant variant_from_string(const std::string& s) {
    if (s == "linear") return RepeatVariant::linear;
    if (s == "s") return RepeatVariant::s;
    if (s == "f") return RepeatVariant::f;
    throw std::invalid_argument("unknown repeat variant '" + s + "'");
}

// --- elementwise transform math (double internally for both precisions) ---

inline double swish_psi(double x, double b1, double b2) {
    const double u = std::clamp(b2 * x, -30.0, 30.0);
    return b1 * x / (1.0 + std::exp(u));
}

// partial derivatives of psi(x; b1, b2) = b1 * x / (1 + exp(b2 * x))
inline void swish_partials(double x, double b1, double b2, double& dx, double& db1, double& db2) {
    const double u = std::clamp(b2 * x, -30.0, 30.0);
    const double e = std::exp(u);
    const double d = 1.0 + e;
    const double e_d2 = e / (d * d);
    dx = b1 / d - b1 * b2 * x * e_d2;
    db1 = x / d;
    db2 = -b1 * x * x * e_d2;
}

template <typename T>
void swish_backward_scalar(T x, T b1, T b2, T g, T& dx, T& db1, T& db2) {
    double px, p1, p2;
    swish_partials(static_cast<double>(x), static_cast<double>(b1), static_cast<double>(b2), px, p1, p2);
    dx = static_cast<T>(px * static_cast<double>(g));
    db1 = static_cast<T>(p1 * static_cast<double>(g));
    db2 = static_cast<T>(p2 * static_cast<double>(g));
}

// sign multiplier with the deterministic tie-break sign(0) -> +1
template <typename T>
inline T sign_mult(T latent) {
    return latent < T(0) ? T(-1) : T(1);
}

// piecewise approximate derivative of sign(t): 2+2t on [-1,0), 2-2t on [0,1), else 0
template <typename T>
inline T sign_grad_shape(T t) {
    if (t >= T(-1) && t < T(0)) return T(2) + T(2) * t;
    if (t >= T(0) && t < T(1)) return T(2) - T(2) * t;
    return T(0);
}

template <typename T>
void flip_forward(const T* latent, const T* x, int64_t n, T* out) {
    for (int64_t i = 0; i < n; ++i) out[i] = sign_mult(latent[i]) * x[i];
}

template <typename T>
void flip_backward(const T* latent, const T* x, const T* g, int64_t n, T* dparent_acc,
                   T* dlatent_acc) {
    for (int64_t i = 0; i < n; ++i) {
        if (dparent_acc) dparent_acc[i] += sign_mult(latent[i]) * g[i];
        if (dlatent_acc) dlatent_acc[i] += g[i] * x[i] * sign_grad_shape(latent[i]);
    }
}

// A parent filter block plus the repetition geometry and per-child transform
// state. Width groups tile gamma1 x gamma2 children into one realized weight
// tensor; depth groups realize `copies` children as successive layers.
template <typename T>
struct RepeatGroup {
    TensorPtr<T> parent;  // OIHW: n x m x k x k
    int gamma1 = 1;
    int gamma2 = 1;
    int copies = 1;
    RepeatVariant variant = RepeatVariant::linear;
    std::vector<TensorPtr<T>> beta1;    // s-variant, one scalar pair per child
    std::vector<TensorPtr<T>> beta2;
    std::vector<TensorPtr<T>> latents;  // f-variant, one parent-shaped tensor per child

    int num_children() const { return copies > 1 ? copies : gamma1 * gamma2; }

    int64_t parent_scalars() const { return parent->numel(); }

    int64_t transform_scalars() const {
        switch (variant) {
            case RepeatVariant::linear: return 0;
            case RepeatVariant::s: return 2 * static_cast<int64_t>(num_children());
            case RepeatVariant::f: return static_cast<int64_t>(num_children()) * parent->numel();
        }
        return 0;
    }

    int64_t trainable_scalars() const { return parent_scalars() + transform_scalars(); }

    // stored size: parent floats plus one bit per latent entry for f
    int64_t mask_bits() const {
        return variant == RepeatVariant::f ? static_cast<int64_t>(num_children()) * parent->numel()
                                           : 0;
    }

    void validate() const {
        if (gamma1 < 1 || gamma2 < 1 || copies < 1)
            throw std::invalid_argument("repeat group: multiplicities must be >= 1");
        if (copies > 1 && (gamma1 != 1 || gamma2 != 1))
            throw std::invalid_argument("repeat group: depth copies cannot be combined with width tiling");
        const size_t children = static_cast<size_t>(num_children());
        if (variant == RepeatVariant::s && (beta1.size() != children || beta2.size() != children))
            throw std::invalid_argument("repeat group: s-variant needs one beta pair per child");
        if (variant == RepeatVariant::f && latents.size() != children)
            throw std::invalid_argument("repeat group: f-variant needs one latent tensor per child");
        if (variant == RepeatVariant::linear && (!beta1.empty() || !latents.empty()))
            throw std::invalid_argument("repeat group: linear variant carries no child params");
    }
};

// Allocates and initializes per-child transform state. s starts at the
// identity configuration (beta1, beta2) = (2, 0); f draws latents from
// U(-1, 1) unless identity_start pins them all to +0.5 (no flips).
template <typename T>
void init_transforms(RepeatGroup<T>& group, Rng& rng, bool identity_start = false) {
    const int children = group.num_children();
    group.beta1.clear();
    group.beta2.clear();
    group.latents.clear();
    if (group.variant == RepeatVariant::s) {
        for (int i = 0; i < children; ++i) {
            group.beta1.push_back(make_scalar<T>(T(2), true));
            group.beta2.push_back(make_scalar<T>(T(0), true));
        }
    } else if (group.variant == RepeatVariant::f) {
        for (int i = 0; i < children; ++i) {
            auto latent = make_tensor<T>(group.parent->shape, true);
            if (identity_start)
                std::fill(latent->data.begin(), latent->data.end(), T(0.5));
            else
                fill_uniform(*latent, rng, -1.0, 1.0);
            group.latents.push_back(std::move(latent));
        }
    }
}

namespace detail {

template <typename T>
void child_transform_forward(const RepeatGroup<T>& group, int child, const T* x, int64_t n,
                             T* out) {
    switch (group.variant) {
        case RepeatVariant::linear:
            for (int64_t j = 0; j < n; ++j) out[j] = x[j];
            break;
        case RepeatVariant::s: {
            const double b1 = static_cast<double>(group.beta1[static_cast<size_t>(child)]->data[0]);
            const double b2 = static_cast<double>(group.beta2[static_cast<size_t>(child)]->data[0]);
            for (int64_t j = 0; j < n; ++j)
                out[j] = static_cast<T>(swish_psi(static_cast<double>(x[j]), b1, b2));
            break;
        }
        case RepeatVariant::f:
            flip_forward(group.latents[static_cast<size_t>(child)]->data.data(), x, n, out);
            break;
    }
}

template <typename T>
std::vector<TensorPtr<T>> group_inputs(const RepeatGroup<T>& group) {
    std::vector<TensorPtr<T>> ins{group.parent};
    for (auto& b : group.beta1) ins.push_back(b);
    for (auto& b : group.beta2) ins.push_back(b);
    for (auto& l : group.latents) ins.push_back(l);
    return ins;
}

}  // namespace detail

// Realize one child block (parent-shaped). Gradients flow back into the
// parent and the child's transform parameters.
template <typename T>
TensorPtr<T> realize_child(Tape<T>& tape, const RepeatGroup<T>& group, int child) {
    group.validate();
    if (child < 0 || child >= group.num_children())
        throw std::out_of_range("realize_child: child index " + std::to_string(child) +
                                " out of range for " + std::to_string(group.num_children()) +
                                " children");
    const int64_t n = group.parent->numel();
    auto out = detail::forward_result<T>(group.parent->shape, true);
    detail::child_transform_forward(group, child, group.parent->data.data(), n, out->data.data());

    auto parent = group.parent;
    const RepeatVariant variant = group.variant;
    TensorPtr<T> b1 = variant == RepeatVariant::s ? group.beta1[static_cast<size_t>(child)] : nullptr;
    TensorPtr<T> b2 = variant == RepeatVariant::s ? group.beta2[static_cast<size_t>(child)] : nullptr;
    TensorPtr<T> latent =
        variant == RepeatVariant::f ? group.latents[static_cast<size_t>(child)] : nullptr;

    return tape.record(out, detail::group_inputs(group), [=]() {
        const T* g = out->grad.data();
        parent->ensure_grad();
        switch (variant) {
            case RepeatVariant::linear:
                for (int64_t j = 0; j < n; ++j) parent->grad[j] += g[j];
                break;
            case RepeatVariant::s: {
                b1->ensure_grad();
                b2->ensure_grad();
                const double v1 = static_cast<double>(b1->data[0]);
                const double v2 = static_cast<double>(b2->data[0]);
                double acc1 = 0.0, acc2 = 0.0;
                for (int64_t j = 0; j < n; ++j) {
                    double dx, d1, d2;
                    swish_partials(static_cast<double>(parent->data[j]), v1, v2, dx, d1, d2);
                    const double gj = static_cast<double>(g[j]);
                    parent->grad[j] += static_cast<T>(dx * gj);
                    acc1 += d1 * gj;
                    acc2 += d2 * gj;
                }
                b1->grad[0] += static_cast<T>(acc1);
                b2->grad[0] += static_cast<T>(acc2);
                break;
            }
            case RepeatVariant::f:
                latent->ensure_grad();
                flip_backward(latent->data.data(), parent->data.data(), g, n,
                              parent->grad.data(), latent->grad.data());
                break;
        }
    });
}

// Realize the full width-tiled weight tensor (gamma2*n x gamma1*m x k x k).
// Children are ordered row-major over (input tile, output tile): child i
// fills output tile i % gamma2 and input tile i / gamma2. The parent
// gradient is the sum over all children's back-transformed gradients.
template <typename T>
TensorPtr<T> realize_weights(Tape<T>& tape, const RepeatGroup<T>& group) {
    group.validate();
    if (group.copies > 1)
        throw std::invalid_argument("realize_weights: depth groups realize per-child layers");
    const int n_out = group.parent->dim(0), m_in = group.parent->dim(1);
    const int kh = group.parent->dim(2), kw = group.parent->dim(3);
    const int g1 = group.gamma1, g2 = group.gamma2;
    const int children = g1 * g2;
    const int64_t pn = group.parent->numel();
    const int ksq = kh * kw;
    const int64_t realized_row = static_cast<int64_t>(g1) * m_in * ksq;  // per out-channel

    auto out = detail::forward_result<T>({g2 * n_out, g1 * m_in, kh, kw}, true);

    // offset of child i's tile for parent element j
    auto tile_index = [=](int child, int64_t j) -> int64_t {
        const int o = static_cast<int>(j / (static_cast<int64_t>(m_in) * ksq));
        const int64_t rem = j % (static_cast<int64_t>(m_in) * ksq);
        const int c = static_cast<int>(rem / ksq);
        const int rest = static_cast<int>(rem % ksq);
        const int ot = child % g2, it = child / g2;
        return (static_cast<int64_t>(ot) * n_out + o) * realized_row +
               (static_cast<int64_t>(it) * m_in + c) * static_cast<int64_t>(ksq) + rest;
    };

#pragma omp parallel for schedule(static) if (children > 1)
    for (int i = 0; i < children; ++i) {
        std::vector<T> buf(static_cast<size_t>(pn));
        detail::child_transform_forward(group, i, group.parent->data.data(), pn, buf.data());
        for (int64_t j = 0; j < pn; ++j) out->data[tile_index(i, j)] = buf[j];
    }

    auto parent = group.parent;
    const RepeatVariant variant = group.variant;
    auto beta1 = group.beta1;
    auto beta2 = group.beta2;
    auto latents = group.latents;

    return tape.record(out, detail::group_inputs(group), [=]() {
        const T* g = out->grad.data();
        parent->ensure_grad();

        // parent gradient: per element, children accumulated in fixed order
#pragma omp parallel for schedule(static)
        for (int64_t j = 0; j < pn; ++j) {
            double acc = 0.0;
            const double x = static_cast<double>(parent->data[j]);
            for (int i = 0; i < children; ++i) {
                const double gj = static_cast<double>(g[tile_index(i, j)]);
                switch (variant) {
                    case RepeatVariant::linear:
                        acc += gj;
                        break;
                    case RepeatVariant::s: {
                        double dx, d1, d2;
                        swish_partials(x, static_cast<double>(beta1[static_cast<size_t>(i)]->data[0]),
                                       static_cast<double>(beta2[static_cast<size_t>(i)]->data[0]), dx,
                                       d1, d2);
                        acc += dx * gj;
                        break;
                    }
                    case RepeatVariant::f:
                        acc += static_cast<double>(
                                   sign_mult(latents[static_cast<size_t>(i)]->data[j])) *
                               gj;
                        break;
                }
            }
            parent->grad[j] += static_cast<T>(acc);
        }

        // per-child transform parameter gradients (disjoint across children)
        if (variant == RepeatVariant::s) {
#pragma omp parallel for schedule(static) if (children > 1)
            for (int i = 0; i < children; ++i) {
                auto& b1 = beta1[static_cast<size_t>(i)];
                auto& b2 = beta2[static_cast<size_t>(i)];
                b1->ensure_grad();
                b2->ensure_grad();
                const double v1 = static_cast<double>(b1->data[0]);
                const double v2 = static_cast<double>(b2->data[0]);
                double acc1 = 0.0, acc2 = 0.0;
                for (int64_t j = 0; j < pn; ++j) {
                    double dx, d1, d2;
                    swish_partials(static_cast<double>(parent->data[j]), v1, v2, dx, d1, d2);
                    const double gj = static_cast<double>(g[tile_index(i, j)]);
                    acc1 += d1 * gj;
                    acc2 += d2 * gj;
                }
                b1->grad[0] += static_cast<T>(acc1);
                b2->grad[0] += static_cast<T>(acc2);
            }
        } else if (variant == RepeatVariant::f) {
#pragma omp parallel for schedule(static) if (children > 1)
            for (int i = 0; i < children; ++i) {
                auto& latent = latents[static_cast<size_t>(i)];
                latent->ensure_grad();
                for (int64_t j = 0; j < pn; ++j)
                    latent->grad[j] += g[tile_index(i, j)] * parent->data[j] *
                                       sign_grad_shape(latent->data[j]);
            }
        }
    });
}

}  // namespace repeatnet
