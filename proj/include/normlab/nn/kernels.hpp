#pragma once

// Layer kernels on raw row-major buffers. Convolution lowers each example to a
// column matrix (im2col) and runs one GEMM per example through Eigen; the
// reduction order is fixed so results are bit-reproducible.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <vector>

#include <Eigen/Core>

#include "normlab/tensor.hpp"

namespace normlab::nn::kernels {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapMat = Eigen::Map<RowMat<S>>;
template <typename S>
using ConstMapMat = Eigen::Map<const RowMat<S>>;

struct ConvGeometry {
    std::size_t channels, height, width;
    std::size_t filters, kernel, stride;
    std::size_t out_h() const { return (height - kernel) / stride + 1; }
    std::size_t out_w() const { return (width - kernel) / stride + 1; }
    std::size_t patch() const { return channels * kernel * kernel; }
    std::size_t out_pixels() const { return out_h() * out_w(); }
    std::size_t in_size() const { return channels * height * width; }
    std::size_t out_size() const { return filters * out_pixels(); }
};

/// col[(c*k+ki)*k+kj][oh*OW+ow] = img[c][oh*s+ki][ow*s+kj]
template <typename S>
void im2col(const S* img, const ConvGeometry& g, S* col) {
    const std::size_t oh_n = g.out_h(), ow_n = g.out_w(), k = g.kernel, s = g.stride;
    for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t ki = 0; ki < k; ++ki)
            for (std::size_t kj = 0; kj < k; ++kj) {
                S* row = col + ((c * k + ki) * k + kj) * oh_n * ow_n;
                for (std::size_t oh = 0; oh < oh_n; ++oh) {
                    const S* src = img + (c * g.height + oh * s + ki) * g.width + kj;
                    S* dst = row + oh * ow_n;
                    if (s == 1) {
                        std::memcpy(dst, src, ow_n * sizeof(S));
                    } else {
                        for (std::size_t ow = 0; ow < ow_n; ++ow) dst[ow] = src[ow * s];
                    }
                }
            }
}

/// Adjoint of im2col: accumulates columns back into the image buffer.
template <typename S>
void col2im_add(const S* col, const ConvGeometry& g, S* img) {
    const std::size_t oh_n = g.out_h(), ow_n = g.out_w(), k = g.kernel, s = g.stride;
    for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t ki = 0; ki < k; ++ki)
            for (std::size_t kj = 0; kj < k; ++kj) {
                const S* row = col + ((c * k + ki) * k + kj) * oh_n * ow_n;
                for (std::size_t oh = 0; oh < oh_n; ++oh) {
                    S* dst = img + (c * g.height + oh * s + ki) * g.width + kj;
                    const S* src = row + oh * ow_n;
                    for (std::size_t ow = 0; ow < ow_n; ++ow) dst[ow * s] += src[ow];
                }
            }
}

template <typename S>
void conv_forward(const S* in, std::size_t batch, const ConvGeometry& g, const S* weight, const S* bias, S* out) {
    AlignedVector<S> col(g.patch() * g.out_pixels());
    ConstMapMat<S> w(weight, g.filters, g.patch());
    ConstMapMat<S> colm(col.data(), g.patch(), g.out_pixels());
    for (std::size_t n = 0; n < batch; ++n) {
        im2col(in + n * g.in_size(), g, col.data());
        MapMat<S> o(out + n * g.out_size(), g.filters, g.out_pixels());
        o.noalias() = w * colm;
        if (bias)
            for (std::size_t f = 0; f < g.filters; ++f) o.row(f).array() += bias[f];
    }
}

/// Accumulates dweight/dbias and, when dinput is non-null, writes the input gradient.
template <typename S>
void conv_backward(const S* in, std::size_t batch, const ConvGeometry& g, const S* weight, const S* dout,
                   S* dweight, S* dbias, S* dinput) {
    AlignedVector<S> col(g.patch() * g.out_pixels());
    AlignedVector<S> dcol(dinput ? col.size() : 0);
    ConstMapMat<S> w(weight, g.filters, g.patch());
    MapMat<S> dw(dweight, g.filters, g.patch());
    ConstMapMat<S> colm(col.data(), g.patch(), g.out_pixels());
    if (dinput) std::fill(dinput, dinput + batch * g.in_size(), S(0));
    for (std::size_t n = 0; n < batch; ++n) {
        ConstMapMat<S> d(dout + n * g.out_size(), g.filters, g.out_pixels());
        im2col(in + n * g.in_size(), g, col.data());
        dw.noalias() += d * colm.transpose();
        if (dbias)
            for (std::size_t f = 0; f < g.filters; ++f) dbias[f] += d.row(f).sum();
        if (dinput) {
            MapMat<S> dc(dcol.data(), g.patch(), g.out_pixels());
            dc.noalias() = w.transpose() * d;
            col2im_add(dcol.data(), g, dinput + n * g.in_size());
        }
    }
}

/// out[n,o] = sum_f in[n,f] w[o,f] + b[o]
template <typename S>
void dense_forward(const S* in, std::size_t batch, std::size_t in_w, std::size_t out_w, const S* weight,
                   const S* bias, S* out) {
    ConstMapMat<S> x(in, batch, in_w);
    ConstMapMat<S> w(weight, out_w, in_w);
    MapMat<S> o(out, batch, out_w);
    o.noalias() = x * w.transpose();
    if (bias)
        for (std::size_t n = 0; n < batch; ++n)
            for (std::size_t j = 0; j < out_w; ++j) o(n, j) += bias[j];
}

template <typename S>
void dense_backward(const S* in, std::size_t batch, std::size_t in_w, std::size_t out_w, const S* weight,
                    const S* dout, S* dweight, S* dbias, S* dinput) {
    ConstMapMat<S> x(in, batch, in_w);
    ConstMapMat<S> w(weight, out_w, in_w);
    ConstMapMat<S> d(dout, batch, out_w);
    MapMat<S> dw(dweight, out_w, in_w);
    dw.noalias() += d.transpose() * x;
    if (dbias)
        for (std::size_t n = 0; n < batch; ++n)
            for (std::size_t j = 0; j < out_w; ++j) dbias[j] += d(n, j);
    if (dinput) {
        MapMat<S> dx(dinput, batch, in_w);
        dx.noalias() = d * w;
    }
}

/// Per-channel statistics of a batch-norm forward pass in train mode.
template <typename S>
struct BatchStats {
    std::vector<double> mean;
    std::vector<double> var;  // biased
    std::size_t count = 0;    // elements per channel
};

/// x viewed as [batch, channels, spatial].
template <typename S>
BatchStats<S> batch_statistics(const S* x, std::size_t batch, std::size_t channels, std::size_t spatial) {
    BatchStats<S> st;
    st.mean.assign(channels, 0.0);
    st.var.assign(channels, 0.0);
    st.count = batch * spatial;
    for (std::size_t c = 0; c < channels; ++c) {
        double sum = 0;
        for (std::size_t n = 0; n < batch; ++n) {
            const S* p = x + (n * channels + c) * spatial;
            for (std::size_t i = 0; i < spatial; ++i) sum += p[i];
        }
        const double mean = sum / double(st.count);
        double sq = 0;
        for (std::size_t n = 0; n < batch; ++n) {
            const S* p = x + (n * channels + c) * spatial;
            for (std::size_t i = 0; i < spatial; ++i) sq += (p[i] - mean) * (p[i] - mean);
        }
        st.mean[c] = mean;
        st.var[c] = sq / double(st.count);
    }
    return st;
}

/// y = gamma * (x - mean) / sqrt(var + eps) + beta per channel.
template <typename S>
void batchnorm_apply(const S* x, std::size_t batch, std::size_t channels, std::size_t spatial,
                     const std::vector<double>& mean, const std::vector<double>& var, double eps, const S* gamma,
                     const S* beta, S* y) {
    for (std::size_t c = 0; c < channels; ++c) {
        const double inv = 1.0 / std::sqrt(var[c] + eps);
        const S scale = S(gamma[c] * inv);
        const S shift = S(beta[c] - gamma[c] * inv * mean[c]);
        for (std::size_t n = 0; n < batch; ++n) {
            const S* p = x + (n * channels + c) * spatial;
            S* q = y + (n * channels + c) * spatial;
            for (std::size_t i = 0; i < spatial; ++i) q[i] = scale * p[i] + shift;
        }
    }
}

/// Backward of batchnorm_apply. With batch_stats the mean/var depend on x
/// (train mode); otherwise they are constants (eval mode).
template <typename S>
void batchnorm_backward(const S* x, std::size_t batch, std::size_t channels, std::size_t spatial,
                        const std::vector<double>& mean, const std::vector<double>& var, double eps,
                        bool batch_stats, const S* gamma, const S* dy, S* dgamma, S* dbeta, S* dx) {
    const double m = double(batch * spatial);
    for (std::size_t c = 0; c < channels; ++c) {
        const double inv = 1.0 / std::sqrt(var[c] + eps);
        double sum_dy = 0, sum_dy_xhat = 0;
        for (std::size_t n = 0; n < batch; ++n) {
            const S* p = x + (n * channels + c) * spatial;
            const S* d = dy + (n * channels + c) * spatial;
            for (std::size_t i = 0; i < spatial; ++i) {
                sum_dy += d[i];
                sum_dy_xhat += d[i] * (p[i] - mean[c]) * inv;
            }
        }
        dgamma[c] += S(sum_dy_xhat);
        dbeta[c] += S(sum_dy);
        if (!dx) continue;
        const double g = gamma[c];
        for (std::size_t n = 0; n < batch; ++n) {
            const S* p = x + (n * channels + c) * spatial;
            const S* d = dy + (n * channels + c) * spatial;
            S* o = dx + (n * channels + c) * spatial;
            for (std::size_t i = 0; i < spatial; ++i) {
                if (batch_stats) {
                    const double xhat = (p[i] - mean[c]) * inv;
                    o[i] = S(g * inv * (d[i] - sum_dy / m - xhat * sum_dy_xhat / m));
                } else {
                    o[i] = S(g * inv * d[i]);
                }
            }
        }
    }
}

}  // namespace normlab::nn::kernels
