#pragma once

#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace repeatnet::kernels {

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline int thread_id() {
#ifdef _OPENMP
    return omp_get_thread_num();
#else
    return 0;
#endif
}

inline int conv_out_extent(int in, int kernel, int stride, int padding) {
    return (in + 2 * padding - kernel) / stride + 1;
}

// ---------------------------------------------------------------------------
// GEMM primitives. All variants accumulate each output element over k in
// ascending order, and every element is written by exactly one thread, so
// results are identical for any thread count.
// ---------------------------------------------------------------------------

// C (+)= A * B      A: M x K, B: K x N, C: M x N, all row-major.
template <typename T>
void gemm_nn(int M, int K, int N, const T* A, const T* B, T* C, bool accumulate, bool parallel) {
#pragma omp parallel for schedule(static) if (parallel)
    for (int i = 0; i < M; ++i) {
        T* c = C + static_cast<int64_t>(i) * N;
        if (!accumulate)
            for (int j = 0; j < N; ++j) c[j] = T(0);
        const T* a = A + static_cast<int64_t>(i) * K;
        for (int k = 0; k < K; ++k) {
            const T av = a[k];
            const T* b = B + static_cast<int64_t>(k) * N;
#pragma omp simd
            for (int j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

// C (+)= A^T * B    A: K x M, B: K x N, C: M x N.
template <typename T>
void gemm_tn(int M, int K, int N, const T* A, const T* B, T* C, bool accumulate, bool parallel) {
#pragma omp parallel for schedule(static) if (parallel)
    for (int i = 0; i < M; ++i) {
        T* c = C + static_cast<int64_t>(i) * N;
        if (!accumulate)
            for (int j = 0; j < N; ++j) c[j] = T(0);
        for (int k = 0; k < K; ++k) {
            const T av = A[static_cast<int64_t>(k) * M + i];
            const T* b = B + static_cast<int64_t>(k) * N;
#pragma omp simd
            for (int j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

// C (+)= A * B^T    A: M x K, B: N x K, C: M x N.
template <typename T>
void gemm_nt(int M, int K, int N, const T* A, const T* B, T* C, bool accumulate, bool parallel) {
#pragma omp parallel for schedule(static) if (parallel)
    for (int i = 0; i < M; ++i) {
        const T* a = A + static_cast<int64_t>(i) * K;
        T* c = C + static_cast<int64_t>(i) * N;
        for (int j = 0; j < N; ++j) {
            const T* b = B + static_cast<int64_t>(j) * K;
            T acc = accumulate ? c[j] : T(0);
#pragma omp simd reduction(+ : acc)
            for (int k = 0; k < K; ++k) acc += a[k] * b[k];
            c[j] = acc;
        }
    }
}

// ---------------------------------------------------------------------------
// Serial reference convolution: the definitional nested loops, kept as the
// baseline the parallel path is validated against.
// ---------------------------------------------------------------------------

template <typename T>
void conv2d_forward_ref(const T* x, int N, int C, int H, int W,
                        const T* w, int OC, int KH, int KW,
                        const T* bias, int stride, int pad, T* y) {
    const int OH = conv_out_extent(H, KH, stride, pad);
    const int OW = conv_out_extent(W, KW, stride, pad);
    for (int n = 0; n < N; ++n)
        for (int oc = 0; oc < OC; ++oc)
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    T acc = bias ? bias[oc] : T(0);
                    for (int c = 0; c < C; ++c)
                        for (int kh = 0; kh < KH; ++kh)
                            for (int kw = 0; kw < KW; ++kw) {
                                const int ih = oh * stride - pad + kh;
                                const int iw = ow * stride - pad + kw;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                                acc += x[((static_cast<int64_t>(n) * C + c) * H + ih) * W + iw] *
                                       w[((static_cast<int64_t>(oc) * C + c) * KH + kh) * KW + kw];
                            }
                    y[((static_cast<int64_t>(n) * OC + oc) * OH + oh) * OW + ow] = acc;
                }
}

template <typename T>
void conv2d_backward_ref(const T* x, int N, int C, int H, int W,
                         const T* w, int OC, int KH, int KW,
                         const T* gy, int stride, int pad,
                         T* gx, T* gw, T* gbias) {
    const int OH = conv_out_extent(H, KH, stride, pad);
    const int OW = conv_out_extent(W, KW, stride, pad);
    for (int n = 0; n < N; ++n)
        for (int oc = 0; oc < OC; ++oc)
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    const T g = gy[((static_cast<int64_t>(n) * OC + oc) * OH + oh) * OW + ow];
                    if (gbias) gbias[oc] += g;
                    for (int c = 0; c < C; ++c)
                        for (int kh = 0; kh < KH; ++kh)
                            for (int kw = 0; kw < KW; ++kw) {
                                const int ih = oh * stride - pad + kh;
                                const int iw = ow * stride - pad + kw;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                                const int64_t xi = ((static_cast<int64_t>(n) * C + c) * H + ih) * W + iw;
                                const int64_t wi = ((static_cast<int64_t>(oc) * C + c) * KH + kh) * KW + kw;
                                if (gx) gx[xi] += g * w[wi];
                                if (gw) gw[wi] += g * x[xi];
                            }
                }
}

// ---------------------------------------------------------------------------
// Parallel convolution: per-image im2col + GEMM. Column rows are laid out in
// (c, kh, kw) order so the accumulation order per output element matches the
// reference loops.
// ---------------------------------------------------------------------------

template <typename T>
void im2col(const T* x, int C, int H, int W, int KH, int KW, int stride, int pad,
            int OH, int OW, T* col) {
    const int ohw = OH * OW;
    for (int c = 0; c < C; ++c)
        for (int kh = 0; kh < KH; ++kh)
            for (int kw = 0; kw < KW; ++kw) {
                T* row = col + static_cast<int64_t>((c * KH + kh) * KW + kw) * ohw;
                const T* xc = x + static_cast<int64_t>(c) * H * W;
                for (int oh = 0; oh < OH; ++oh) {
                    const int ih = oh * stride - pad + kh;
                    T* dst = row + oh * OW;
                    if (ih < 0 || ih >= H) {
                        for (int ow = 0; ow < OW; ++ow) dst[ow] = T(0);
                        continue;
                    }
                    const T* src = xc + static_cast<int64_t>(ih) * W;
                    for (int ow = 0; ow < OW; ++ow) {
                        const int iw = ow * stride - pad + kw;
                        dst[ow] = (iw < 0 || iw >= W) ? T(0) : src[iw];
                    }
                }
            }
}

// scatter-add of a column buffer back into an image gradient
template <typename T>
void col2im_acc(const T* col, int C, int H, int W, int KH, int KW, int stride, int pad,
                int OH, int OW, T* gx) {
    const int ohw = OH * OW;
    for (int c = 0; c < C; ++c)
        for (int kh = 0; kh < KH; ++kh)
            for (int kw = 0; kw < KW; ++kw) {
                const T* row = col + static_cast<int64_t>((c * KH + kh) * KW + kw) * ohw;
                T* xc = gx + static_cast<int64_t>(c) * H * W;
                for (int oh = 0; oh < OH; ++oh) {
                    const int ih = oh * stride - pad + kh;
                    if (ih < 0 || ih >= H) continue;
                    const T* src = row + oh * OW;
                    T* dst = xc + static_cast<int64_t>(ih) * W;
                    for (int ow = 0; ow < OW; ++ow) {
                        const int iw = ow * stride - pad + kw;
                        if (iw >= 0 && iw < W) dst[iw] += src[ow];
                    }
                }
            }
}

template <typename T>
void conv2d_forward_omp(const T* x, int N, int C, int H, int W,
                        const T* w, int OC, int KH, int KW,
                        const T* bias, int stride, int pad, T* y) {
    const int OH = conv_out_extent(H, KH, stride, pad);
    const int OW = conv_out_extent(W, KW, stride, pad);
    const int K = C * KH * KW;
    const int ohw = OH * OW;
    std::vector<std::vector<T>> cols(static_cast<size_t>(max_threads()));
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) {
        auto& col = cols[static_cast<size_t>(thread_id())];
        col.resize(static_cast<size_t>(K) * ohw);
        im2col(x + static_cast<int64_t>(n) * C * H * W, C, H, W, KH, KW, stride, pad, OH, OW,
               col.data());
        T* yn = y + static_cast<int64_t>(n) * OC * ohw;
        gemm_nn(OC, K, ohw, w, col.data(), yn, false, false);
        if (bias)
            for (int oc = 0; oc < OC; ++oc) {
                T* row = yn + static_cast<int64_t>(oc) * ohw;
                for (int j = 0; j < ohw; ++j) row[j] += bias[oc];
            }
    }
}

template <typename T>
void conv2d_backward_omp(const T* x, int N, int C, int H, int W,
                         const T* w, int OC, int KH, int KW,
                         const T* gy, int stride, int pad,
                         T* gx, T* gw, T* gbias) {
    const int OH = conv_out_extent(H, KH, stride, pad);
    const int OW = conv_out_extent(W, KW, stride, pad);
    const int K = C * KH * KW;
    const int ohw = OH * OW;

    if (gx) {
        std::vector<std::vector<T>> cols(static_cast<size_t>(max_threads()));
#pragma omp parallel for schedule(static)
        for (int n = 0; n < N; ++n) {
            auto& dcol = cols[static_cast<size_t>(thread_id())];
            dcol.resize(static_cast<size_t>(K) * ohw);
            const T* gyn = gy + static_cast<int64_t>(n) * OC * ohw;
            gemm_tn(K, OC, ohw, w, gyn, dcol.data(), false, false);
            col2im_acc(dcol.data(), C, H, W, KH, KW, stride, pad, OH, OW,
                       gx + static_cast<int64_t>(n) * C * H * W);
        }
    }

    if (gw) {
        // weight gradient accumulates over images in a fixed serial order;
        // parallelism is over output channels, whose rows are disjoint
        std::vector<T> col(static_cast<size_t>(K) * ohw);
        for (int n = 0; n < N; ++n) {
            const T* xn = x + static_cast<int64_t>(n) * C * H * W;
#pragma omp parallel
            {
#pragma omp for schedule(static)
                for (int r = 0; r < K; ++r) {
                    const int c = r / (KH * KW);
                    const int kh = (r / KW) % KH;
                    const int kw = r % KW;
                    T* row = col.data() + static_cast<int64_t>(r) * ohw;
                    const T* xc = xn + static_cast<int64_t>(c) * H * W;
                    for (int oh = 0; oh < OH; ++oh) {
                        const int ih = oh * stride - pad + kh;
                        T* dst = row + oh * OW;
                        if (ih < 0 || ih >= H) {
                            for (int ow = 0; ow < OW; ++ow) dst[ow] = T(0);
                            continue;
                        }
                        const T* src = xc + static_cast<int64_t>(ih) * W;
                        for (int ow = 0; ow < OW; ++ow) {
                            const int iw = ow * stride - pad + kw;
                            dst[ow] = (iw < 0 || iw >= W) ? T(0) : src[iw];
                        }
                    }
                }
#pragma omp for schedule(static)
                for (int oc = 0; oc < OC; ++oc)
                    for (int r = 0; r < K; ++r) {
                        const T* a = gy + (static_cast<int64_t>(n) * OC + oc) * ohw;
                        const T* b = col.data() + static_cast<int64_t>(r) * ohw;
                        T acc = T(0);
#pragma omp simd reduction(+ : acc)
                        for (int j = 0; j < ohw; ++j) acc += a[j] * b[j];
                        gw[static_cast<int64_t>(oc) * K + r] += acc;
                    }
            }
        }
    }

    if (gbias) {
#pragma omp parallel for schedule(static)
        for (int oc = 0; oc < OC; ++oc) {
            T acc = T(0);
            for (int n = 0; n < N; ++n) {
                const T* row = gy + (static_cast<int64_t>(n) * OC + oc) * ohw;
                for (int j = 0; j < ohw; ++j) acc += row[j];
            }
            gbias[oc] += acc;
        }
    }
}

}  // namespace repeatnet::kernels
