#pragma once

#include "morphbench/nets.hpp"

namespace morphbench::models {

// Stacks crops into an NHWC batch tensor [N, side, side, 1].
template <class S>
Tensor<S> batch_from_crops(const std::vector<const ImageCrop*>& crops) {
    if (crops.empty()) throw DataError("empty batch");
    const int side = ImageCrop::kSide;
    Tensor<S> x({static_cast<int>(crops.size()), side, side, 1});
    for (std::size_t i = 0; i < crops.size(); ++i)
        for (int p = 0; p < ImageCrop::kPixels; ++p)
            x.data[i * ImageCrop::kPixels + static_cast<std::size_t>(p)] =
                static_cast<S>(crops[i]->px[static_cast<std::size_t>(p)]);
    return x;
}

// Weakly-supervised classifier: backbone + linear head, cross-entropy.
template <class S>
struct WslModel {
    Backbone<S> backbone;
    nn::Linear<S> head;

    void init(const BackboneConfig& cfg, Rng& rng) {
        backbone.init(cfg, rng);
        head.init(cfg.latent_dim, 2, rng);
    }

    Tensor<S> forward_logits(const Tensor<S>& x) { return head.forward(backbone.forward(x)); }

    // Computes loss and accumulates gradients in one pass.
    S loss_backward(const Tensor<S>& x, const std::vector<int>& labels) {
        auto logits = forward_logits(x);
        auto lg = ce_loss_grad(logits, labels);
        backbone.backward(head.backward(lg.grad));
        return lg.value;
    }

    std::vector<ParamRef<S>> params() {
        std::vector<ParamRef<S>> out;
        backbone.collect("backbone", out);
        head.collect("head", out);
        return out;
    }
};

// Convolutional autoencoder: backbone encoder + mirrored decoder, pixel BCE.
template <class S>
struct SslModel {
    Backbone<S> backbone;
    Decoder<S> decoder;

    void init(const BackboneConfig& cfg, Rng& rng) {
        backbone.init(cfg, rng);
        decoder.init(cfg, rng);
    }

    Tensor<S> reconstruct(const Tensor<S>& x) { return decoder.forward(backbone.forward(x)); }

    S loss_backward(const Tensor<S>& x) {
        auto recon = reconstruct(x);
        auto lg = bce_loss_grad(recon, x);
        backbone.backward(decoder.backward(lg.grad));
        return lg.value;
    }

    std::vector<ParamRef<S>> params() {
        std::vector<ParamRef<S>> out;
        backbone.collect("backbone", out);
        decoder.collect("decoder", out);
        return out;
    }
};

// Regularized autoencoder: one shared encoder, classifier and decoder heads
// trained in turns. Which loss steps when is the training loop's business.
template <class S>
struct SsrModel {
    Backbone<S> backbone;
    nn::Linear<S> head;
    Decoder<S> decoder;

    void init(const BackboneConfig& cfg, Rng& rng) {
        backbone.init(cfg, rng);
        head.init(cfg.latent_dim, 2, rng);
        decoder.init(cfg, rng);
    }

    struct ForwardResult {
        Tensor<S> reconstruction;
        Tensor<S> logits;
        S bce = S(0);
        S ce = S(0);
    };

    // Both heads evaluated from a single encoder pass; no gradients.
    ForwardResult forward(const Tensor<S>& x, const std::vector<int>& labels) {
        auto latent = backbone.forward(x);
        ForwardResult r;
        r.logits = head.forward(latent);
        r.reconstruction = decoder.forward(latent);
        r.ce = ce_loss(r.logits, labels);
        r.bce = bce_reconstruction_loss(r.reconstruction, x);
        return r;
    }

    S classifier_loss_backward(const Tensor<S>& x, const std::vector<int>& labels) {
        auto logits = head.forward(backbone.forward(x));
        auto lg = ce_loss_grad(logits, labels);
        backbone.backward(head.backward(lg.grad));
        return lg.value;
    }

    S autoencoder_loss_backward(const Tensor<S>& x) {
        auto recon = decoder.forward(backbone.forward(x));
        auto lg = bce_loss_grad(recon, x);
        backbone.backward(decoder.backward(lg.grad));
        return lg.value;
    }

    std::vector<ParamRef<S>> encoder_classifier_params() {
        std::vector<ParamRef<S>> out;
        backbone.collect("backbone", out);
        head.collect("head", out);
        return out;
    }
    std::vector<ParamRef<S>> encoder_decoder_params() {
        std::vector<ParamRef<S>> out;
        backbone.collect("backbone", out);
        decoder.collect("decoder", out);
        return out;
    }
    std::vector<ParamRef<S>> params() {
        std::vector<ParamRef<S>> out;
        backbone.collect("backbone", out);
        head.collect("head", out);
        decoder.collect("decoder", out);
        return out;
    }
};

// BYOL: online backbone + projector + predictor against an EMA target
// backbone + projector. Loss is normalized MSE (2 - 2 cos) on predictions.
template <class S>
struct IclModel {
    Backbone<S> online_backbone;
    Mlp<S> online_projector;
    Mlp<S> predictor;
    Backbone<S> target_backbone;
    Mlp<S> target_projector;
    ByolConfig byol;

    void init(const BackboneConfig& cfg, const ByolConfig& byol_cfg, Rng& rng) {
        byol = byol_cfg;
        online_backbone.init(cfg, rng);
        online_projector.init(cfg.latent_dim, byol.projection_hidden_size, byol.projection_size, rng);
        predictor.init(byol.projection_size, byol.projection_hidden_size, byol.projection_size, rng);
        // Target starts as an exact copy of the online weights.
        target_backbone.init(cfg, rng);
        target_projector.init(cfg.latent_dim, byol.projection_hidden_size, byol.projection_size, rng);
        auto t = target_params();
        ema_update(t, online_ema_params(), 0.0);
    }

    Tensor<S> target_projection(const Tensor<S>& x) {
        return target_projector.forward(target_backbone.forward(x));
    }

    Tensor<S> online_prediction(const Tensor<S>& x) {
        return predictor.forward(online_projector.forward(online_backbone.forward(x)));
    }

    // One BYOL direction: online sees view_a, target sees view_b.
    S loss_backward(const Tensor<S>& view_a, const Tensor<S>& view_b) {
        auto prediction = online_prediction(view_a);
        auto target = target_projection(view_b);
        auto lg = byol_loss_grad(prediction, target);
        online_backbone.backward(online_projector.backward(predictor.backward(lg.grad)));
        return lg.value;
    }

    void ema_step() {
        auto t = target_params();
        ema_update(t, online_ema_params(), byol.moving_average_decay);
    }

    std::vector<ParamRef<S>> online_params() {
        std::vector<ParamRef<S>> out;
        online_backbone.collect("online.backbone", out);
        online_projector.collect("online.projector", out);
        predictor.collect("predictor", out);
        return out;
    }
    // The slice of online weights the EMA target tracks (no predictor).
    std::vector<ParamRef<S>> online_ema_params() {
        std::vector<ParamRef<S>> out;
        online_backbone.collect("online.backbone", out);
        online_projector.collect("online.projector", out);
        return out;
    }
    // Target tensors tracked for checkpointing; they never receive gradients.
    std::vector<ParamRef<S>> target_params() {
        std::vector<ParamRef<S>> out;
        target_backbone.collect("target.backbone", out);
        target_projector.collect("target.projector", out);
        return out;
    }
    std::vector<ParamRef<S>> params() {
        auto out = online_params();
        auto t = target_params();
        out.insert(out.end(), t.begin(), t.end());
        return out;
    }
};

// Spec-level entry: validates parameters, stacks crops, runs the encoder.
Tensor<float> backbone_forward(Backbone<float>& backbone,
                               const std::vector<const ImageCrop*>& crops);

}  // namespace morphbench::models
