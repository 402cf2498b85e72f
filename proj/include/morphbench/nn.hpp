#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "morphbench/errors.hpp"
#include "morphbench/rng.hpp"

namespace morphbench::nn {

template <class S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using MapRM = Eigen::Map<MatRM<S>>;
template <class S>
using ConstMapRM = Eigen::Map<const MatRM<S>>;

// Dense row-major tensor. Activations use NHWC so convolution lowers to a
// single GEMM per layer over gathered patch rows.
template <class S>
struct Tensor {
    std::vector<int> shape;
    std::vector<S> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> dims) { resize(std::move(dims)); }

    void resize(std::vector<int> dims) {
        shape = std::move(dims);
        data.assign(numel(), S(0));
    }

    std::size_t numel() const {
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        return n;
    }

    void zero() { std::fill(data.begin(), data.end(), S(0)); }

    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    MapRM<S> as_matrix(int rows, int cols) {
        return MapRM<S>(data.data(), rows, cols);
    }
    ConstMapRM<S> as_matrix(int rows, int cols) const {
        return ConstMapRM<S>(data.data(), rows, cols);
    }

    bool all_finite() const {
        for (S v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

// Named view of one parameter tensor and its gradient slot.
template <class S>
struct ParamRef {
    std::string name;
    Tensor<S>* value = nullptr;
    Tensor<S>* grad = nullptr;
};

template <class S>
std::size_t total_params(const std::vector<ParamRef<S>>& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.value->numel();
    return n;
}

// Flat-vector view over a named parameter list (used by gradient checks).
template <class S>
std::vector<S> flatten_values(const std::vector<ParamRef<S>>& params) {
    std::vector<S> out;
    out.reserve(total_params(params));
    for (const auto& p : params) out.insert(out.end(), p.value->data.begin(), p.value->data.end());
    return out;
}

template <class S>
std::vector<S> flatten_grads(const std::vector<ParamRef<S>>& params) {
    std::vector<S> out;
    out.reserve(total_params(params));
    for (const auto& p : params) out.insert(out.end(), p.grad->data.begin(), p.grad->data.end());
    return out;
}

template <class S>
void unflatten_values(const std::vector<ParamRef<S>>& params, const std::vector<S>& flat) {
    std::size_t off = 0;
    for (const auto& p : params) {
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                  flat.begin() + static_cast<std::ptrdiff_t>(off + p.value->numel()),
                  p.value->data.begin());
        off += p.value->numel();
    }
}

// --------------------------------------------------------------------------
// Patch gather/scatter shared by Conv2d and ConvTranspose2d.
// Grid positions (gh, gw) map to source pixels h = gh*stride - pad + kh.
// Rows are [N*Hg*Wg, k*k*C] with (kh, kw, c) minor order.
// --------------------------------------------------------------------------

template <class S>
void gather_patches(const S* src, int n, int h, int w, int c,
                    int hg, int wg, int k, int stride, int pad, S* rows) {
    const std::size_t row_len = static_cast<std::size_t>(k) * k * c;
    for (int in = 0; in < n; ++in) {
        const S* img = src + static_cast<std::size_t>(in) * h * w * c;
        for (int gh = 0; gh < hg; ++gh) {
            for (int gw = 0; gw < wg; ++gw) {
                S* row = rows + (static_cast<std::size_t>(in) * hg * wg +
                                 static_cast<std::size_t>(gh) * wg + gw) * row_len;
                for (int kh = 0; kh < k; ++kh) {
                    const int hh = gh * stride - pad + kh;
                    for (int kw = 0; kw < k; ++kw) {
                        const int ww = gw * stride - pad + kw;
                        S* dst = row + (static_cast<std::size_t>(kh) * k + kw) * c;
                        if (hh >= 0 && hh < h && ww >= 0 && ww < w) {
                            const S* px = img + (static_cast<std::size_t>(hh) * w + ww) * c;
                            for (int ic = 0; ic < c; ++ic) dst[ic] = px[ic];
                        } else {
                            for (int ic = 0; ic < c; ++ic) dst[ic] = S(0);
                        }
                    }
                }
            }
        }
    }
}

template <class S>
void scatter_patches_add(S* dst, int n, int h, int w, int c,
                         int hg, int wg, int k, int stride, int pad, const S* rows) {
    const std::size_t row_len = static_cast<std::size_t>(k) * k * c;
    for (int in = 0; in < n; ++in) {
        S* img = dst + static_cast<std::size_t>(in) * h * w * c;
        for (int gh = 0; gh < hg; ++gh) {
            for (int gw = 0; gw < wg; ++gw) {
                const S* row = rows + (static_cast<std::size_t>(in) * hg * wg +
                                       static_cast<std::size_t>(gh) * wg + gw) * row_len;
                for (int kh = 0; kh < k; ++kh) {
                    const int hh = gh * stride - pad + kh;
                    if (hh < 0 || hh >= h) continue;
                    for (int kw = 0; kw < k; ++kw) {
                        const int ww = gw * stride - pad + kw;
                        if (ww < 0 || ww >= w) continue;
                        S* px = img + (static_cast<std::size_t>(hh) * w + ww) * c;
                        const S* srcp = row + (static_cast<std::size_t>(kh) * k + kw) * c;
                        for (int ic = 0; ic < c; ++ic) px[ic] += srcp[ic];
                    }
                }
            }
        }
    }
}

inline int conv_out_side(int side, int k, int stride, int pad) {
    return (side + 2 * pad - k) / stride + 1;
}
inline int tconv_out_side(int side, int k, int stride, int pad, int out_pad) {
    return (side - 1) * stride - 2 * pad + k + out_pad;
}

// --------------------------------------------------------------------------
// Layers. Each caches what its backward pass needs; single writer per layer.
// --------------------------------------------------------------------------

template <class S>
struct Conv2d {
    int in_ch = 0, out_ch = 0, k = 3, stride = 1, pad = 1;
    Tensor<S> w;   // [k*k*in_ch, out_ch]
    Tensor<S> b;   // [out_ch]
    Tensor<S> gw, gb;
    Tensor<S> col_;  // cached patch rows
    int n_ = 0, hi_ = 0, wi_ = 0, ho_ = 0, wo_ = 0;

    void init(int in_channels, int out_channels, int kernel, int stride_, Rng& rng) {
        in_ch = in_channels;
        out_ch = out_channels;
        k = kernel;
        stride = stride_;
        pad = kernel / 2;
        w.resize({k * k * in_ch, out_ch});
        b.resize({out_ch});
        gw.resize({k * k * in_ch, out_ch});
        gb.resize({out_ch});
        const double std_dev = std::sqrt(2.0 / (static_cast<double>(k) * k * in_ch));
        for (auto& v : w.data) v = static_cast<S>(rng.normal(0.0, std_dev));
    }

    // x: [N, H, W, in_ch] -> [N, Ho, Wo, out_ch]
    Tensor<S> forward(const Tensor<S>& x) {
        n_ = x.dim(0); hi_ = x.dim(1); wi_ = x.dim(2);
        ho_ = conv_out_side(hi_, k, stride, pad);
        wo_ = conv_out_side(wi_, k, stride, pad);
        const int rows = n_ * ho_ * wo_;
        const int rlen = k * k * in_ch;
        col_.resize({rows, rlen});
        gather_patches(x.data.data(), n_, hi_, wi_, in_ch, ho_, wo_, k, stride, pad, col_.data.data());

        Tensor<S> y({n_, ho_, wo_, out_ch});
        auto ym = y.as_matrix(rows, out_ch);
        ym.noalias() = col_.as_matrix(rows, rlen) * w.as_matrix(rlen, out_ch);
        ym.rowwise() += ConstMapRM<S>(b.data.data(), 1, out_ch).row(0);
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        const int rows = n_ * ho_ * wo_;
        const int rlen = k * k * in_ch;
        auto dym = dy.as_matrix(rows, out_ch);
        gw.as_matrix(rlen, out_ch).noalias() += col_.as_matrix(rows, rlen).transpose() * dym;
        // fixed-order reduction: Eigen's vectorized colwise sum is sensitive to
        // buffer alignment, which would break run-to-run bit determinism
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < out_ch; ++c)
                gb.data[static_cast<std::size_t>(c)] += dy.data[static_cast<std::size_t>(r) * out_ch + c];

        Tensor<S> dcol({rows, rlen});
        dcol.as_matrix(rows, rlen).noalias() = dym * w.as_matrix(rlen, out_ch).transpose();
        Tensor<S> dx({n_, hi_, wi_, in_ch});
        scatter_patches_add(dx.data.data(), n_, hi_, wi_, in_ch, ho_, wo_, k, stride, pad,
                            dcol.data.data());
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
        out.push_back({prefix + ".w", &w, &gw});
        out.push_back({prefix + ".b", &b, &gb});
    }
};

template <class S>
struct ConvTranspose2d {
    int in_ch = 0, out_ch = 0, k = 3, stride = 1, pad = 1, out_pad = 0;
    Tensor<S> w;  // [in_ch, k*k*out_ch]
    Tensor<S> b;  // [out_ch]
    Tensor<S> gw, gb;
    Tensor<S> x_;  // cached input rows
    int n_ = 0, hi_ = 0, wi_ = 0, ho_ = 0, wo_ = 0;

    void init(int in_channels, int out_channels, int kernel, int stride_, Rng& rng) {
        in_ch = in_channels;
        out_ch = out_channels;
        k = kernel;
        stride = stride_;
        pad = kernel / 2;
        out_pad = stride_ - 1;
        w.resize({in_ch, k * k * out_ch});
        b.resize({out_ch});
        gw.resize({in_ch, k * k * out_ch});
        gb.resize({out_ch});
        const double std_dev = std::sqrt(2.0 / (static_cast<double>(k) * k * in_ch / (stride_ * stride_)));
        for (auto& v : w.data) v = static_cast<S>(rng.normal(0.0, std_dev));
    }

    // x: [N, Hi, Wi, in_ch] -> [N, Ho, Wo, out_ch]
    Tensor<S> forward(const Tensor<S>& x) {
        n_ = x.dim(0); hi_ = x.dim(1); wi_ = x.dim(2);
        ho_ = tconv_out_side(hi_, k, stride, pad, out_pad);
        wo_ = tconv_out_side(wi_, k, stride, pad, out_pad);
        x_ = x;

        const int rows = n_ * hi_ * wi_;
        const int rlen = k * k * out_ch;
        Tensor<S> cols({rows, rlen});
        cols.as_matrix(rows, rlen).noalias() =
            x.as_matrix(rows, in_ch) * w.as_matrix(in_ch, rlen);

        Tensor<S> y({n_, ho_, wo_, out_ch});
        scatter_patches_add(y.data.data(), n_, ho_, wo_, out_ch, hi_, wi_, k, stride, pad,
                            cols.data.data());
        auto ym = y.as_matrix(n_ * ho_ * wo_, out_ch);
        ym.rowwise() += ConstMapRM<S>(b.data.data(), 1, out_ch).row(0);
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        const int rows = n_ * hi_ * wi_;
        const int rlen = k * k * out_ch;
        Tensor<S> patches({rows, rlen});
        gather_patches(dy.data.data(), n_, ho_, wo_, out_ch, hi_, wi_, k, stride, pad,
                       patches.data.data());

        gw.as_matrix(in_ch, rlen).noalias() +=
            x_.as_matrix(rows, in_ch).transpose() * patches.as_matrix(rows, rlen);
        const int dy_rows = n_ * ho_ * wo_;
        for (int r = 0; r < dy_rows; ++r)
            for (int c = 0; c < out_ch; ++c)
                gb.data[static_cast<std::size_t>(c)] += dy.data[static_cast<std::size_t>(r) * out_ch + c];

        Tensor<S> dx({n_, hi_, wi_, in_ch});
        dx.as_matrix(rows, in_ch).noalias() =
            patches.as_matrix(rows, rlen) * w.as_matrix(in_ch, rlen).transpose();
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
        out.push_back({prefix + ".w", &w, &gw});
        out.push_back({prefix + ".b", &b, &gb});
    }
};

template <class S>
struct Linear {
    int in_f = 0, out_f = 0;
    Tensor<S> w;  // [in_f, out_f]
    Tensor<S> b;  // [out_f]
    Tensor<S> gw, gb;
    Tensor<S> x_;

    void init(int in_features, int out_features, Rng& rng) {
        in_f = in_features;
        out_f = out_features;
        w.resize({in_f, out_f});
        b.resize({out_f});
        gw.resize({in_f, out_f});
        gb.resize({out_f});
        const double std_dev = std::sqrt(2.0 / static_cast<double>(in_f));
        for (auto& v : w.data) v = static_cast<S>(rng.normal(0.0, std_dev));
    }

    Tensor<S> forward(const Tensor<S>& x) {
        x_ = x;
        const int n = static_cast<int>(x.numel()) / in_f;
        Tensor<S> y({n, out_f});
        auto ym = y.as_matrix(n, out_f);
        ym.noalias() = x.as_matrix(n, in_f) * w.as_matrix(in_f, out_f);
        ym.rowwise() += ConstMapRM<S>(b.data.data(), 1, out_f).row(0);
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        const int n = static_cast<int>(x_.numel()) / in_f;
        auto dym = dy.as_matrix(n, out_f);
        gw.as_matrix(in_f, out_f).noalias() += x_.as_matrix(n, in_f).transpose() * dym;
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < out_f; ++c)
                gb.data[static_cast<std::size_t>(c)] += dy.data[static_cast<std::size_t>(r) * out_f + c];
        Tensor<S> dx(x_.shape);
        dx.as_matrix(n, in_f).noalias() = dym * w.as_matrix(in_f, out_f).transpose();
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
        out.push_back({prefix + ".w", &w, &gw});
        out.push_back({prefix + ".b", &b, &gb});
    }
};

template <class S>
struct Relu {
    Tensor<S> mask_;

    Tensor<S> forward(const Tensor<S>& x) {
        mask_.resize(x.shape);
        Tensor<S> y(x.shape);
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            const bool on = x.data[i] > S(0);
            mask_.data[i] = on ? S(1) : S(0);
            y.data[i] = on ? x.data[i] : S(0);
        }
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        Tensor<S> dx(dy.shape);
        for (std::size_t i = 0; i < dy.data.size(); ++i) dx.data[i] = dy.data[i] * mask_.data[i];
        return dx;
    }
};

template <class S>
struct Sigmoid {
    Tensor<S> y_;

    Tensor<S> forward(const Tensor<S>& x) {
        Tensor<S> y(x.shape);
        for (std::size_t i = 0; i < x.data.size(); ++i)
            y.data[i] = S(1) / (S(1) + std::exp(-x.data[i]));
        y_ = y;
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        Tensor<S> dx(dy.shape);
        for (std::size_t i = 0; i < dy.data.size(); ++i)
            dx.data[i] = dy.data[i] * y_.data[i] * (S(1) - y_.data[i]);
        return dx;
    }
};

}  // namespace morphbench::nn
