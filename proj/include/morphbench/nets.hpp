#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "morphbench/data.hpp"
#include "morphbench/nn.hpp"

namespace morphbench::models {

using nn::ParamRef;
using nn::Tensor;

// Class indices used by every classifier in the harness.
constexpr int kClassControl = 0;
constexpr int kClassDrug = 1;

inline int class_index(Label label) { return label == Label::drug ? kClassDrug : kClassControl; }

struct BackboneConfig {
    struct Block {
        int out_channels = 0;
        int kernel = 3;
        int stride = 2;
        bool operator==(const Block&) const = default;
    };
    std::vector<Block> blocks;
    int latent_dim = 128;
    int in_side = 64;
    int in_channels = 1;

    bool operator==(const BackboneConfig&) const = default;

    int final_side() const {
        int side = in_side;
        for (const auto& b : blocks) side = nn::conv_out_side(side, b.kernel, b.stride, b.kernel / 2);
        return side;
    }
    int flat_dim() const {
        return blocks.empty() ? in_side * in_side * in_channels
                              : final_side() * final_side() * blocks.back().out_channels;
    }
    void check() const;
};

// 4 stride-2 blocks: 64 -> 32 -> 16 -> 8 -> 4, flatten, linear to 128.
BackboneConfig default_backbone();
// 8x8 single-channel input, 2 blocks, latent 8. Small enough for finite differences.
BackboneConfig micro_backbone();

struct ByolConfig {
    int projection_size = 64;
    int projection_hidden_size = 64;
    double moving_average_decay = 0.99;

    bool operator==(const ByolConfig&) const = default;
};

// --------------------------------------------------------------------------
// Losses. Each returns the scalar and the gradient wrt its first argument.
// --------------------------------------------------------------------------

template <class S>
struct LossGrad {
    S value = S(0);
    Tensor<S> grad;
};

// Mean over the batch of -log softmax(logits)[label].
template <class S>
LossGrad<S> ce_loss_grad(const Tensor<S>& logits, const std::vector<int>& labels) {
    const int n = logits.dim(0);
    const int c = logits.dim(1);
    LossGrad<S> out;
    out.grad.resize(logits.shape);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const S* row = &logits.data[static_cast<std::size_t>(i) * c];
        S* grow = &out.grad.data[static_cast<std::size_t>(i) * c];
        S mx = row[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (int j = 0; j < c; ++j) denom += std::exp(static_cast<double>(row[j] - mx));
        const int y = labels[static_cast<std::size_t>(i)];
        total += -(static_cast<double>(row[y] - mx) - std::log(denom));
        for (int j = 0; j < c; ++j) {
            double p = std::exp(static_cast<double>(row[j] - mx)) / denom;
            grow[j] = static_cast<S>((p - (j == y ? 1.0 : 0.0)) / n);
        }
    }
    out.value = static_cast<S>(total / n);
    return out;
}

template <class S>
S ce_loss(const Tensor<S>& logits, const std::vector<int>& labels) {
    return ce_loss_grad(logits, labels).value;
}

// Mean over pixels of -[t log r + (1-t) log(1-r)], r clamped to [eps, 1-eps].
template <class S>
LossGrad<S> bce_loss_grad(const Tensor<S>& reconstruction, const Tensor<S>& target) {
    constexpr double eps = 1e-7;
    if (reconstruction.data.size() != target.data.size())
        throw DataError("bce: reconstruction/target shape mismatch");
    LossGrad<S> out;
    out.grad.resize(reconstruction.shape);
    const std::size_t total = reconstruction.data.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
        double r = std::clamp(static_cast<double>(reconstruction.data[i]), eps, 1.0 - eps);
        double t = target.data[i];
        acc += -(t * std::log(r) + (1.0 - t) * std::log1p(-r));
        out.grad.data[i] = static_cast<S>((-t / r + (1.0 - t) / (1.0 - r)) / static_cast<double>(total));
    }
    out.value = static_cast<S>(acc / static_cast<double>(total));
    return out;
}

template <class S>
S bce_reconstruction_loss(const Tensor<S>& reconstruction, const Tensor<S>& target) {
    return bce_loss_grad(reconstruction, target).value;
}

// Mean over rows of ||q_hat - z_hat||^2 = 2 - 2 cos(q, z). Targets carry no
// gradient; the returned gradient is wrt the raw (unnormalized) prediction.
template <class S>
LossGrad<S> byol_loss_grad(const Tensor<S>& prediction, const Tensor<S>& target) {
    const int n = prediction.dim(0);
    const int p = prediction.dim(1);
    if (target.dim(0) != n || target.dim(1) != p)
        throw DataError("byol: prediction/target shape mismatch");
    LossGrad<S> out;
    out.grad.resize(prediction.shape);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const S* q = &prediction.data[static_cast<std::size_t>(i) * p];
        const S* z = &target.data[static_cast<std::size_t>(i) * p];
        S* g = &out.grad.data[static_cast<std::size_t>(i) * p];
        double qn = 0.0, zn = 0.0, dot = 0.0;
        for (int j = 0; j < p; ++j) {
            qn += static_cast<double>(q[j]) * q[j];
            zn += static_cast<double>(z[j]) * z[j];
            dot += static_cast<double>(q[j]) * z[j];
        }
        qn = std::sqrt(qn);
        zn = std::sqrt(zn);
        if (qn == 0.0 || zn == 0.0) throw NumericError("byol_loss: zero-norm row");
        const double cos = dot / (qn * zn);
        acc += 2.0 - 2.0 * cos;
        for (int j = 0; j < p; ++j) {
            // d/dq of -2 (q.z)/(|q||z|), averaged over rows
            double zh = z[j] / zn;
            double qh = q[j] / qn;
            g[j] = static_cast<S>(-2.0 * (zh - cos * qh) / qn / n);
        }
    }
    out.value = static_cast<S>(acc / n);
    return out;
}

template <class S>
S byol_loss(const Tensor<S>& prediction, const Tensor<S>& target) {
    return byol_loss_grad(prediction, target).value;
}

// theta_target' = tau * theta_target + (1 - tau) * theta_online, elementwise.
// tau in {0, 1} short-circuits so those cases stay bitwise exact.
template <class S>
void ema_update(std::vector<ParamRef<S>>& target, const std::vector<ParamRef<S>>& online, double tau) {
    if (target.size() != online.size()) throw DataError("ema_update: parameter layout mismatch");
    if (tau == 1.0) return;
    for (std::size_t t = 0; t < target.size(); ++t) {
        auto& dst = *target[t].value;
        const auto& src = *online[t].value;
        if (dst.shape != src.shape) throw DataError("ema_update: shape mismatch at " + target[t].name);
        if (tau == 0.0) {
            dst.data = src.data;
            continue;
        }
        for (std::size_t i = 0; i < dst.data.size(); ++i)
            dst.data[i] = static_cast<S>(tau * dst.data[i] + (1.0 - tau) * src.data[i]);
    }
}

// --------------------------------------------------------------------------
// Networks
// --------------------------------------------------------------------------

template <class S>
struct Backbone {
    BackboneConfig cfg;
    std::vector<nn::Conv2d<S>> convs;
    std::vector<nn::Relu<S>> relus;
    nn::Linear<S> fc;

    void init(const BackboneConfig& config, Rng& rng) {
        config.check();
        cfg = config;
        convs.clear();
        relus.clear();
        int ch = cfg.in_channels;
        for (const auto& b : cfg.blocks) {
            nn::Conv2d<S> conv;
            conv.init(ch, b.out_channels, b.kernel, b.stride, rng);
            convs.push_back(std::move(conv));
            relus.emplace_back();
            ch = b.out_channels;
        }
        fc.init(cfg.flat_dim(), cfg.latent_dim, rng);
    }

    // x: [N, side, side, in_channels] -> latent [N, latent_dim]
    Tensor<S> forward(const Tensor<S>& x) {
        Tensor<S> h = x;
        for (std::size_t i = 0; i < convs.size(); ++i) {
            h = convs[i].forward(h);
            h = relus[i].forward(h);
        }
        const int n = h.dim(0);
        h.shape = {n, cfg.flat_dim()};  // NHWC flatten is a relabel, data untouched
        return fc.forward(h);
    }

    Tensor<S> backward(const Tensor<S>& dlatent) {
        Tensor<S> dh = fc.backward(dlatent);
        const int n = dh.dim(0);
        const int side = cfg.final_side();
        dh.shape = {n, side, side, cfg.blocks.empty() ? cfg.in_channels : cfg.blocks.back().out_channels};
        for (std::size_t i = convs.size(); i-- > 0;) {
            dh = relus[i].backward(dh);
            dh = convs[i].backward(dh);
        }
        return dh;
    }

    void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
        for (std::size_t i = 0; i < convs.size(); ++i)
            convs[i].collect(prefix + ".conv" + std::to_string(i), out);
        fc.collect(prefix + ".fc", out);
    }
};

// Mirror of the backbone through transposed convolutions, sigmoid output.
template <class S>
struct Decoder {
    BackboneConfig cfg;  // the *encoder* config being mirrored
    nn::Linear<S> fc;
    nn::Relu<S> fc_relu;
    std::vector<nn::ConvTranspose2d<S>> tconvs;
    std::vector<nn::Relu<S>> relus;  // between tconv blocks (not after the last)
    nn::Sigmoid<S> out_act;

    void init(const BackboneConfig& encoder_cfg, Rng& rng) {
        cfg = encoder_cfg;
        fc.init(cfg.latent_dim, cfg.flat_dim(), rng);
        tconvs.clear();
        relus.clear();
        const auto& blocks = cfg.blocks;
        for (std::size_t i = blocks.size(); i-- > 0;) {
            int in_ch = blocks[i].out_channels;
            int out_ch = i == 0 ? cfg.in_channels : blocks[i - 1].out_channels;
            nn::ConvTranspose2d<S> t;
            t.init(in_ch, out_ch, blocks[i].kernel, blocks[i].stride, rng);
            tconvs.push_back(std::move(t));
            if (i > 0) relus.emplace_back();
        }
    }

    // latent [N, latent_dim] -> [N, side, side, in_channels], values in (0,1)
    Tensor<S> forward(const Tensor<S>& latent) {
        Tensor<S> h = fc.forward(latent);
        h = fc_relu.forward(h);
        const int n = h.dim(0);
        const int side = cfg.final_side();
        h.shape = {n, side, side, cfg.blocks.back().out_channels};
        for (std::size_t i = 0; i < tconvs.size(); ++i) {
            h = tconvs[i].forward(h);
            if (i + 1 < tconvs.size()) h = relus[i].forward(h);
        }
        return out_act.forward(h);
    }

    Tensor<S> backward(const Tensor<S>& drecon) {
        Tensor<S> dh = out_act.backward(drecon);
        for (std::size_t i = tconvs.size(); i-- > 0;) {
            if (i + 1 < tconvs.size()) dh = relus[i].backward(dh);
            dh = tconvs[i].backward(dh);
        }
        const int n = dh.dim(0);
        dh.shape = {n, cfg.flat_dim()};
        dh = fc_relu.backward(dh);
        return fc.backward(dh);
    }

    void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
        fc.collect(prefix + ".fc", out);
        for (std::size_t i = 0; i < tconvs.size(); ++i)
            tconvs[i].collect(prefix + ".tconv" + std::to_string(i), out);
    }
};

// Two-layer perceptron (linear, relu, linear).
template <class S>
struct Mlp {
    nn::Linear<S> l1, l2;
    nn::Relu<S> relu;

    void init(int in_f, int hidden, int out_f, Rng& rng) {
        l1.init(in_f, hidden, rng);
        l2.init(hidden, out_f, rng);
    }

    Tensor<S> forward(const Tensor<S>& x) { return l2.forward(relu.forward(l1.forward(x))); }

    Tensor<S> backward(const Tensor<S>& dy) { return l1.backward(relu.backward(l2.backward(dy))); }

    void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
        l1.collect(prefix + ".l1", out);
        l2.collect(prefix + ".l2", out);
    }
};

void check_finite(const std::vector<ParamRef<float>>& params);

}  // namespace morphbench::models
