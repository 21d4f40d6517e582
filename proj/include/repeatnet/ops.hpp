#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "repeatnet/kernels.hpp"
#include "repeatnet/tensor.hpp"

namespace repeatnet {

namespace detail {

template <typename T>
TensorPtr<T> forward_result(std::vector<int> shape, bool needs_grad) {
    auto out = make_tensor<T>(std::move(shape));
    out->requires_grad = needs_grad;
    if (needs_grad) out->ensure_grad();
    return out;
}

}  // namespace detail

// Cross-correlation convolution, NCHW input against OIHW weights.
template <typename T>
TensorPtr<T> conv2d(Tape<T>& tape, TensorPtr<T> input, TensorPtr<T> weight,
                    TensorPtr<T> bias, int stride, int padding) {
    if (input->ndim() != 4 || weight->ndim() != 4)
        throw std::invalid_argument("conv2d expects 4-d input and weight, got " +
                                    shape_str(input->shape) + " and " + shape_str(weight->shape));
    if (input->dim(1) != weight->dim(1))
        throw std::invalid_argument("conv2d channel mismatch: input " + shape_str(input->shape) +
                                    " vs weight " + shape_str(weight->shape));
    if (stride < 1 || padding < 0)
        throw std::invalid_argument("conv2d: stride must be >= 1 and padding >= 0");
    const int N = input->dim(0), C = input->dim(1), H = input->dim(2), W = input->dim(3);
    const int OC = weight->dim(0), KH = weight->dim(2), KW = weight->dim(3);
    const int OH = kernels::conv_out_extent(H, KH, stride, padding);
    const int OW = kernels::conv_out_extent(W, KW, stride, padding);
    if (OH <= 0 || OW <= 0)
        throw std::invalid_argument("conv2d: non-positive output size for input " +
                                    shape_str(input->shape) + " with kernel " +
                                    shape_str(weight->shape) + ", stride " + std::to_string(stride) +
                                    ", padding " + std::to_string(padding));
    if (bias && !(bias->ndim() == 1 && bias->dim(0) == OC))
        throw std::invalid_argument("conv2d bias shape " + shape_str(bias->shape) +
                                    " does not match out channels " + std::to_string(OC));

    const bool needs_grad =
        input->requires_grad || weight->requires_grad || (bias && bias->requires_grad);
    auto out = detail::forward_result<T>({N, OC, OH, OW}, needs_grad);

    const T* bias_ptr = bias ? bias->data.data() : nullptr;
    if (backend() == Backend::serial)
        kernels::conv2d_forward_ref(input->data.data(), N, C, H, W, weight->data.data(), OC, KH,
                                    KW, bias_ptr, stride, padding, out->data.data());
    else
        kernels::conv2d_forward_omp(input->data.data(), N, C, H, W, weight->data.data(), OC, KH,
                                    KW, bias_ptr, stride, padding, out->data.data());

    std::vector<TensorPtr<T>> ins{input, weight};
    if (bias) ins.push_back(bias);
    return tape.record(out, std::move(ins), [=]() {
        T* gx = input->requires_grad ? (input->ensure_grad(), input->grad.data()) : nullptr;
        T* gw = weight->requires_grad ? (weight->ensure_grad(), weight->grad.data()) : nullptr;
        T* gb = (bias && bias->requires_grad) ? (bias->ensure_grad(), bias->grad.data()) : nullptr;
        if (!gx && !gw && !gb) return;
        if (backend() == Backend::serial)
            kernels::conv2d_backward_ref(input->data.data(), N, C, H, W, weight->data.data(), OC,
                                         KH, KW, out->grad.data(), stride, padding, gx, gw, gb);
        else
            kernels::conv2d_backward_omp(input->data.data(), N, C, H, W, weight->data.data(), OC,
                                         KH, KW, out->grad.data(), stride, padding, gx, gw, gb);
    });
}

template <typename T>
TensorPtr<T> relu(Tape<T>& tape, TensorPtr<T> x) {
    auto out = detail::forward_result<T>(x->shape, x->requires_grad);
    const int64_t n = x->numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) out->data[i] = x->data[i] > T(0) ? x->data[i] : T(0);
    return tape.record(out, {x}, [=]() {
        if (!x->requires_grad) return;
        x->ensure_grad();
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i)
            if (x->data[i] > T(0)) x->grad[i] += out->grad[i];
    });
}

template <typename T>
TensorPtr<T> max_pool2d(Tape<T>& tape, TensorPtr<T> x, int kernel, int stride) {
    if (x->ndim() != 4) throw std::invalid_argument("max_pool2d expects NCHW input");
    const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
    const int OH = (H - kernel) / stride + 1;
    const int OW = (W - kernel) / stride + 1;
    if (OH <= 0 || OW <= 0) throw std::invalid_argument("max_pool2d: non-positive output size");
    auto out = detail::forward_result<T>({N, C, OH, OW}, x->requires_grad);
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(out->numel()));
#pragma omp parallel for schedule(static)
    for (int nc = 0; nc < N * C; ++nc) {
        const T* src = x->data.data() + static_cast<int64_t>(nc) * H * W;
        T* dst = out->data.data() + static_cast<int64_t>(nc) * OH * OW;
        int64_t* am = argmax->data() + static_cast<int64_t>(nc) * OH * OW;
        for (int oh = 0; oh < OH; ++oh)
            for (int ow = 0; ow < OW; ++ow) {
                T best = -std::numeric_limits<T>::infinity();
                int64_t best_i = 0;
                for (int kh = 0; kh < kernel; ++kh)
                    for (int kw = 0; kw < kernel; ++kw) {
                        const int ih = oh * stride + kh, iw = ow * stride + kw;
                        const int64_t idx = static_cast<int64_t>(ih) * W + iw;
                        if (src[idx] > best) {
                            best = src[idx];
                            best_i = idx;
                        }
                    }
                dst[oh * OW + ow] = best;
                am[oh * OW + ow] = best_i;
            }
    }
    return tape.record(out, {x}, [=]() {
        if (!x->requires_grad) return;
        x->ensure_grad();
#pragma omp parallel for schedule(static)
        for (int nc = 0; nc < N * C; ++nc) {
            T* gx = x->grad.data() + static_cast<int64_t>(nc) * H * W;
            const T* gy = out->grad.data() + static_cast<int64_t>(nc) * OH * OW;
            const int64_t* am = argmax->data() + static_cast<int64_t>(nc) * OH * OW;
            for (int j = 0; j < OH * OW; ++j) gx[am[j]] += gy[j];
        }
    });
}

// N x C x H x W -> N x C, mean over the spatial extent
template <typename T>
TensorPtr<T> global_avg_pool(Tape<T>& tape, TensorPtr<T> x) {
    if (x->ndim() != 4) throw std::invalid_argument("global_avg_pool expects NCHW input");
    const int N = x->dim(0), C = x->dim(1), HW = x->dim(2) * x->dim(3);
    auto out = detail::forward_result<T>({N, C}, x->requires_grad);
#pragma omp parallel for schedule(static)
    for (int nc = 0; nc < N * C; ++nc) {
        const T* src = x->data.data() + static_cast<int64_t>(nc) * HW;
        double acc = 0.0;
        for (int j = 0; j < HW; ++j) acc += static_cast<double>(src[j]);
        out->data[nc] = static_cast<T>(acc / HW);
    }
    return tape.record(out, {x}, [=]() {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const T inv = T(1) / static_cast<T>(HW);
#pragma omp parallel for schedule(static)
        for (int nc = 0; nc < N * C; ++nc) {
            T* gx = x->grad.data() + static_cast<int64_t>(nc) * HW;
            const T g = out->grad[nc] * inv;
            for (int j = 0; j < HW; ++j) gx[j] += g;
        }
    });
}

// x: N x F, weight: O x F, bias: O (optional)
template <typename T>
TensorPtr<T> dense(Tape<T>& tape, TensorPtr<T> x, TensorPtr<T> weight, TensorPtr<T> bias) {
    if (x->ndim() != 2 || weight->ndim() != 2 || x->dim(1) != weight->dim(1))
        throw std::invalid_argument("dense shape mismatch: input " + shape_str(x->shape) +
                                    " vs weight " + shape_str(weight->shape));
    const int N = x->dim(0), F = x->dim(1), O = weight->dim(0);
    const bool needs_grad = x->requires_grad || weight->requires_grad || (bias && bias->requires_grad);
    auto out = detail::forward_result<T>({N, O}, needs_grad);
    kernels::gemm_nt(N, F, O, x->data.data(), weight->data.data(), out->data.data(), false,
                     backend() == Backend::parallel);
    if (bias) {
        for (int n = 0; n < N; ++n)
            for (int o = 0; o < O; ++o) out->data[static_cast<int64_t>(n) * O + o] += bias->data[o];
    }
    std::vector<TensorPtr<T>> ins{x, weight};
    if (bias) ins.push_back(bias);
    return tape.record(out, std::move(ins), [=]() {
        const bool par = backend() == Backend::parallel;
        if (x->requires_grad) {
            x->ensure_grad();
            kernels::gemm_nn(N, O, F, out->grad.data(), weight->data.data(), x->grad.data(), true, par);
        }
        if (weight->requires_grad) {
            weight->ensure_grad();
            kernels::gemm_tn(O, N, F, out->grad.data(), x->data.data(), weight->grad.data(), true, par);
        }
        if (bias && bias->requires_grad) {
            bias->ensure_grad();
            for (int n = 0; n < N; ++n)
                for (int o = 0; o < O; ++o) bias->grad[o] += out->grad[static_cast<int64_t>(n) * O + o];
        }
    });
}

template <typename T>
TensorPtr<T> add(Tape<T>& tape, TensorPtr<T> a, TensorPtr<T> b) {
    if (a->shape != b->shape)
        throw std::invalid_argument("add shape mismatch: " + shape_str(a->shape) + " vs " +
                                    shape_str(b->shape));
    auto out = detail::forward_result<T>(a->shape, a->requires_grad || b->requires_grad);
    const int64_t n = a->numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) out->data[i] = a->data[i] + b->data[i];
    return tape.record(out, {a, b}, [=]() {
        if (a->requires_grad) {
            a->ensure_grad();
#pragma omp parallel for schedule(static)
            for (int64_t i = 0; i < n; ++i) a->grad[i] += out->grad[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
#pragma omp parallel for schedule(static)
            for (int64_t i = 0; i < n; ++i) b->grad[i] += out->grad[i];
        }
    });
}

template <typename T>
TensorPtr<T> mul(Tape<T>& tape, TensorPtr<T> a, TensorPtr<T> b) {
    if (a->shape != b->shape)
        throw std::invalid_argument("mul shape mismatch: " + shape_str(a->shape) + " vs " +
                                    shape_str(b->shape));
    auto out = detail::forward_result<T>(a->shape, a->requires_grad || b->requires_grad);
    const int64_t n = a->numel();
    for (int64_t i = 0; i < n; ++i) out->data[i] = a->data[i] * b->data[i];
    return tape.record(out, {a, b}, [=]() {
        if (a->requires_grad) {
            a->ensure_grad();
            for (int64_t i = 0; i < n; ++i) a->grad[i] += out->grad[i] * b->data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (int64_t i = 0; i < n; ++i) b->grad[i] += out->grad[i] * a->data[i];
        }
    });
}

template <typename T>
TensorPtr<T> sum_all(Tape<T>& tape, TensorPtr<T> x) {
    auto out = detail::forward_result<T>({1}, x->requires_grad);
    double acc = 0.0;
    for (T v : x->data) acc += static_cast<double>(v);
    out->data[0] = static_cast<T>(acc);
    return tape.record(out, {x}, [=]() {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (auto& g : x->grad) g += out->grad[0];
    });
}

template <typename T>
TensorPtr<T> scale(Tape<T>& tape, TensorPtr<T> x, T alpha) {
    auto out = detail::forward_result<T>(x->shape, x->requires_grad);
    const int64_t n = x->numel();
    for (int64_t i = 0; i < n; ++i) out->data[i] = alpha * x->data[i];
    return tape.record(out, {x}, [=]() {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int64_t i = 0; i < n; ++i) x->grad[i] += alpha * out->grad[i];
    });
}

// Mean cross-entropy between softmax(logits) and integer labels, with the
// usual max-subtraction stabilization.
template <typename T>
TensorPtr<T> softmax_cross_entropy(Tape<T>& tape, TensorPtr<T> logits,
                                   const std::vector<int>& labels) {
    if (logits->ndim() != 2)
        throw std::invalid_argument("softmax_cross_entropy expects N x C logits");
    const int N = logits->dim(0), C = logits->dim(1);
    if (N == 0) throw std::invalid_argument("softmax_cross_entropy: batch size 0");
    if (static_cast<int>(labels.size()) != N)
        throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
    for (int y : labels)
        if (y < 0 || y >= C)
            throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(y) +
                                        " out of range [0, " + std::to_string(C) + ")");
    auto probs = std::make_shared<std::vector<T>>(static_cast<size_t>(N) * C);
    std::vector<double> losses(static_cast<size_t>(N));
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) {
        const T* row = logits->data.data() + static_cast<int64_t>(n) * C;
        T* p = probs->data() + static_cast<int64_t>(n) * C;
        T mx = row[0];
        for (int c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        double z = 0.0;
        for (int c = 0; c < C; ++c) {
            p[c] = std::exp(row[c] - mx);
            z += static_cast<double>(p[c]);
        }
        for (int c = 0; c < C; ++c) p[c] = static_cast<T>(p[c] / z);
        losses[static_cast<size_t>(n)] =
            -(static_cast<double>(row[labels[static_cast<size_t>(n)]]) - mx - std::log(z));
    }
    double total = 0.0;
    for (double l : losses) total += l;
    auto out = detail::forward_result<T>({1}, logits->requires_grad);
    out->data[0] = static_cast<T>(total / N);
    auto labels_copy = std::make_shared<std::vector<int>>(labels);
    return tape.record(out, {logits}, [=]() {
        if (!logits->requires_grad) return;
        logits->ensure_grad();
        const T g = out->grad[0] / static_cast<T>(N);
#pragma omp parallel for schedule(static)
        for (int n = 0; n < N; ++n) {
            const T* p = probs->data() + static_cast<int64_t>(n) * C;
            T* gl = logits->grad.data() + static_cast<int64_t>(n) * C;
            const int y = (*labels_copy)[static_cast<size_t>(n)];
            for (int c = 0; c < C; ++c) gl[c] += g * (p[c] - (c == y ? T(1) : T(0)));
        }
    });
}

// Per-channel batch normalization over N x H x W with running statistics.
template <typename T>
struct BatchNorm2d {
    TensorPtr<T> gamma;
    TensorPtr<T> beta;
    TensorPtr<T> running_mean;
    TensorPtr<T> running_var;
    T momentum = T(0.1);
    T eps = T(1e-5);
    int64_t batches_seen = 0;

    explicit BatchNorm2d(int channels) {
        gamma = make_tensor<T>({channels}, true);
        beta = make_tensor<T>({channels}, true);
        running_mean = make_tensor<T>({channels});
        running_var = make_tensor<T>({channels});
        std::fill(gamma->data.begin(), gamma->data.end(), T(1));
        std::fill(running_var->data.begin(), running_var->data.end(), T(1));
    }

    TensorPtr<T> forward(Tape<T>& tape, TensorPtr<T> x, bool training) {
        if (x->ndim() != 4) throw std::invalid_argument("batch_norm2d expects NCHW input");
        const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
        if (N == 0) throw std::invalid_argument("batch_norm2d: batch size 0");
        if (C != gamma->dim(0))
            throw std::invalid_argument("batch_norm2d channel mismatch: input " +
                                        shape_str(x->shape) + " vs " + std::to_string(gamma->dim(0)));
        if (!training && batches_seen == 0)
            throw std::runtime_error("batch_norm2d: eval mode before any training batch");
        const int64_t M = static_cast<int64_t>(N) * H * W;
        const int HW = H * W;

        auto mean = std::make_shared<std::vector<T>>(static_cast<size_t>(C));
        auto invstd = std::make_shared<std::vector<T>>(static_cast<size_t>(C));
        if (training) {
#pragma omp parallel for schedule(static)
            for (int c = 0; c < C; ++c) {
                double sum = 0.0, sq = 0.0;
                for (int n = 0; n < N; ++n) {
                    const T* src = x->data.data() + (static_cast<int64_t>(n) * C + c) * HW;
                    for (int j = 0; j < HW; ++j) {
                        const double v = static_cast<double>(src[j]);
                        sum += v;
                        sq += v * v;
                    }
                }
                const double mu = sum / static_cast<double>(M);
                const double var = sq / static_cast<double>(M) - mu * mu;
                (*mean)[static_cast<size_t>(c)] = static_cast<T>(mu);
                (*invstd)[static_cast<size_t>(c)] =
                    static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
                // running variance keeps the unbiased estimate
                const double unbiased = M > 1 ? var * static_cast<double>(M) / (M - 1) : var;
                running_mean->data[c] =
                    static_cast<T>((1.0 - momentum) * running_mean->data[c] + momentum * mu);
                running_var->data[c] =
                    static_cast<T>((1.0 - momentum) * running_var->data[c] + momentum * unbiased);
            }
            ++batches_seen;
        } else {
            for (int c = 0; c < C; ++c) {
                (*mean)[static_cast<size_t>(c)] = running_mean->data[c];
                (*invstd)[static_cast<size_t>(c)] = static_cast<T>(
                    1.0 / std::sqrt(static_cast<double>(running_var->data[c]) + static_cast<double>(eps)));
            }
        }

        const bool needs_grad = x->requires_grad || gamma->requires_grad || beta->requires_grad;
        auto out = detail::forward_result<T>(x->shape, needs_grad);
#pragma omp parallel for schedule(static) collapse(2)
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const T* src = x->data.data() + (static_cast<int64_t>(n) * C + c) * HW;
                T* dst = out->data.data() + (static_cast<int64_t>(n) * C + c) * HW;
                const T mu = (*mean)[static_cast<size_t>(c)];
                const T is = (*invstd)[static_cast<size_t>(c)];
                const T g = gamma->data[c], b = beta->data[c];
                for (int j = 0; j < HW; ++j) dst[j] = g * (src[j] - mu) * is + b;
            }

        auto x_ptr = x;
        auto gamma_ptr = gamma;
        auto beta_ptr = beta;
        const bool train_stats = training;
        return tape.record(out, {x, gamma, beta}, [=]() {
            const T* gy = out->grad.data();
            // per-channel reductions first
            std::vector<double> sum_gy(static_cast<size_t>(C)), sum_gy_xhat(static_cast<size_t>(C));
#pragma omp parallel for schedule(static)
            for (int c = 0; c < C; ++c) {
                double sg = 0.0, sgx = 0.0;
                const T mu = (*mean)[static_cast<size_t>(c)];
                const T is = (*invstd)[static_cast<size_t>(c)];
                for (int n = 0; n < N; ++n) {
                    const int64_t base = (static_cast<int64_t>(n) * C + c) * HW;
                    for (int j = 0; j < HW; ++j) {
                        const double g = static_cast<double>(gy[base + j]);
                        sg += g;
                        sgx += g * static_cast<double>((x_ptr->data[base + j] - mu) * is);
                    }
                }
                sum_gy[static_cast<size_t>(c)] = sg;
                sum_gy_xhat[static_cast<size_t>(c)] = sgx;
            }
            if (gamma_ptr->requires_grad) {
                gamma_ptr->ensure_grad();
                for (int c = 0; c < C; ++c)
                    gamma_ptr->grad[c] += static_cast<T>(sum_gy_xhat[static_cast<size_t>(c)]);
            }
            if (beta_ptr->requires_grad) {
                beta_ptr->ensure_grad();
                for (int c = 0; c < C; ++c)
                    beta_ptr->grad[c] += static_cast<T>(sum_gy[static_cast<size_t>(c)]);
            }
            if (x_ptr->requires_grad) {
                x_ptr->ensure_grad();
#pragma omp parallel for schedule(static) collapse(2)
                for (int n = 0; n < N; ++n)
                    for (int c = 0; c < C; ++c) {
                        const int64_t base = (static_cast<int64_t>(n) * C + c) * HW;
                        const T mu = (*mean)[static_cast<size_t>(c)];
                        const T is = (*invstd)[static_cast<size_t>(c)];
                        const T gsc = gamma_ptr->data[c] * is;
                        if (train_stats) {
                            const T mg = static_cast<T>(sum_gy[static_cast<size_t>(c)] / static_cast<double>(M));
                            const T mgx =
                                static_cast<T>(sum_gy_xhat[static_cast<size_t>(c)] / static_cast<double>(M));
                            for (int j = 0; j < HW; ++j) {
                                const T xhat = (x_ptr->data[base + j] - mu) * is;
                                x_ptr->grad[base + j] += gsc * (gy[base + j] - mg - xhat * mgx);
                            }
                        } else {
                            for (int j = 0; j < HW; ++j) x_ptr->grad[base + j] += gsc * gy[base + j];
                        }
                    }
            }
        });
    }
};

}  // namespace repeatnet
