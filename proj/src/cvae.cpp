#include "cvae.hpp"

#include <algorithm>
#include <cmath>

namespace mcq {

CvaeModel CvaeModel::make(std::size_t state_dim, std::size_t action_dim,
                          const std::vector<std::size_t>& hidden, Rng& rng) {
    CvaeModel m;
    m.state_dim = state_dim;
    m.action_dim = action_dim;
    m.latent_dim = 2 * action_dim;

    std::vector<std::size_t> enc_sizes;
    enc_sizes.push_back(state_dim + action_dim);
    enc_sizes.insert(enc_sizes.end(), hidden.begin(), hidden.end());
    enc_sizes.push_back(2 * m.latent_dim);
    m.encoder = DenseNet::make(enc_sizes, Activation::relu, rng);

    std::vector<std::size_t> dec_sizes;
    dec_sizes.push_back(state_dim + m.latent_dim);
    dec_sizes.insert(dec_sizes.end(), hidden.begin(), hidden.end());
    dec_sizes.push_back(action_dim);
    m.decoder = DenseNet::make(dec_sizes, Activation::relu, rng);
    return m;
}

CvaeLossResult cvae_loss(const CvaeModel& model, const Mat& states,
                         const Mat& actions, Rng& rng, double kl_weight) {
    if (states.rows == 0) fail(ErrorKind::shape_mismatch, "empty batch");
    if (states.cols != model.state_dim || actions.cols != model.action_dim)
        fail(ErrorKind::shape_mismatch, "cvae batch widths");
    const std::size_t b = states.rows;
    const std::size_t latent = model.latent_dim;
    const double inv_b = 1.0 / static_cast<double>(b);

    ForwardCache enc_cache;
    const Mat enc_in = hstack(states, actions);
    const Mat enc_out = forward(model.encoder, enc_in, &enc_cache);

    Mat mu_z(b, latent), log_std(b, latent), clamp_mask(b, latent), sigma(b, latent);
    Mat eta(b, latent), z(b, latent);
    for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t k = 0; k < latent; ++k) {
            const double m = enc_out.at(r, k);
            const double raw = enc_out.at(r, latent + k);
            const double ls = std::clamp(raw, kCvaeLogStdMin, kCvaeLogStdMax);
            mu_z.at(r, k) = m;
            log_std.at(r, k) = ls;
            clamp_mask.at(r, k) =
                (raw > kCvaeLogStdMin && raw < kCvaeLogStdMax) ? 1.0 : 0.0;
            sigma.at(r, k) = std::exp(ls);
            const double n = rng.normal();
            eta.at(r, k) = n;
            z.at(r, k) = m + sigma.at(r, k) * n;
        }
    }

    ForwardCache dec_cache;
    const Mat dec_in = hstack(states, z);
    const Mat dec_raw = forward(model.decoder, dec_in, &dec_cache);

    CvaeLossResult res;
    res.encoder_grads = NetGrads::zeros_like(model.encoder);
    res.decoder_grads = NetGrads::zeros_like(model.decoder);

    Mat recon(b, model.action_dim);
    Mat d_dec_raw(b, model.action_dim);
    for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t k = 0; k < model.action_dim; ++k) {
            const double ahat = std::tanh(dec_raw.at(r, k));
            recon.at(r, k) = ahat;
            const double diff = ahat - actions.at(r, k);
            res.reconstruction += diff * diff * inv_b;
            d_dec_raw.at(r, k) = 2.0 * diff * (1.0 - ahat * ahat) * inv_b;
        }
    }

    for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t k = 0; k < latent; ++k) {
            const double m = mu_z.at(r, k);
            const double s2 = sigma.at(r, k) * sigma.at(r, k);
            res.kl += 0.5 * (m * m + s2 - 1.0 - 2.0 * log_std.at(r, k)) * inv_b;
        }
    }
    res.loss = res.reconstruction + kl_weight * res.kl;

    // Backward: decoder first, then split the input gradient into the state
    // part (discarded) and the latent part feeding the reparameterization.
    const Mat d_dec_in = backward(model.decoder, dec_cache, d_dec_raw,
                                  res.decoder_grads);
    Mat d_enc_out(b, 2 * latent);
    for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t k = 0; k < latent; ++k) {
            const double dz = d_dec_in.at(r, model.state_dim + k);
            const double m = mu_z.at(r, k);
            const double s = sigma.at(r, k);
            const double d_mu = dz + kl_weight * m * inv_b;
            const double d_ls =
                dz * s * eta.at(r, k) + kl_weight * (s * s - 1.0) * inv_b;
            d_enc_out.at(r, k) = d_mu;
            d_enc_out.at(r, latent + k) = d_ls * clamp_mask.at(r, k);
        }
    }
    backward(model.encoder, enc_cache, d_enc_out, res.encoder_grads);
    return res;
}

CvaeOptimizer CvaeOptimizer::make(const CvaeModel& model, double lr) {
    AdamConfig cfg;
    cfg.lr = lr;
    return CvaeOptimizer{AdamState::make(model.encoder, cfg),
                         AdamState::make(model.decoder, cfg)};
}

double cvae_train_step(CvaeModel& model, CvaeOptimizer& opt, const Mat& states,
                       const Mat& actions, Rng& rng, double kl_weight) {
    CvaeLossResult res = cvae_loss(model, states, actions, rng, kl_weight);
    if (!std::isfinite(res.loss)) fail(ErrorKind::non_finite_loss, "cvae loss");
    adam_step(model.encoder, opt.encoder, res.encoder_grads);
    adam_step(model.decoder, opt.decoder, res.decoder_grads);
    return res.loss;
}

Mat cvae_sample(const CvaeModel& model, const Mat& states, std::size_t count,
                Rng& rng, double latent_clip) {
    if (count < 1) fail(ErrorKind::shape_mismatch, "count must be >= 1");
    const std::size_t b = states.rows;
    Mat dec_in(b * count, model.state_dim + model.latent_dim);
    for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t c = 0; c < count; ++c) {
            double* row = dec_in.row(r * count + c);
            std::copy(states.row(r), states.row(r) + model.state_dim, row);
            for (std::size_t k = 0; k < model.latent_dim; ++k) {
                double zv = rng.normal();
                if (latent_clip > 0.0)
                    zv = std::clamp(zv, -latent_clip, latent_clip);
                row[model.state_dim + k] = zv;
            }
        }
    }
    Mat raw = forward(model.decoder, dec_in);
    for (auto& v : raw.data) v = std::tanh(v);
    return raw;
}

}  // namespace mcq
