#include "nn.hpp"

#include <algorithm>
#include <cmath>

namespace mcq {

DenseNet DenseNet::make(const std::vector<std::size_t>& sizes, Activation act,
                        Rng& rng) {
    if (sizes.size() < 2)
        fail(ErrorKind::shape_mismatch, "a net needs at least input and output sizes");
    DenseNet net;
    net.layer_sizes = sizes;
    net.activation = act;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(sizes[i]));
        DenseLayer layer;
        layer.w = Mat::uniform(sizes[i], sizes[i + 1], scale, rng);
        layer.b.resize(sizes[i + 1]);
        for (auto& v : layer.b) v = rng.uniform(-scale, scale);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

std::size_t DenseNet::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
}

namespace {

inline double activate(double x, Activation act) {
    return act == Activation::relu ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

inline double activate_grad(double pre, double post, Activation act) {
    return act == Activation::relu ? (pre > 0.0 ? 1.0 : 0.0) : 1.0 - post * post;
}

}  // namespace

Mat forward(const DenseNet& net, const Mat& input, ForwardCache* cache) {
    if (input.cols != net.input_dim())
        fail(ErrorKind::shape_mismatch, "forward input width");
    if (!all_finite(input)) fail(ErrorKind::non_finite_input, "forward input");
    if (cache) {
        cache->input = input;
        cache->pre.clear();
        cache->post.clear();
    }
    Mat x = input;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        Mat y;
        matmul(x, net.layers[i].w, y);
        add_bias(y, net.layers[i].b);
        const bool last = (i + 1 == net.layers.size());
        if (cache) cache->pre.push_back(y);
        if (!last) {
            for (auto& v : y.data) v = activate(v, net.activation);
            if (cache) cache->post.push_back(y);
        }
        x = std::move(y);
    }
    return x;
}

NetGrads NetGrads::zeros_like(const DenseNet& net) {
    NetGrads g;
    for (const auto& l : net.layers) {
        g.dw.emplace_back(l.w.rows, l.w.cols);
        g.db.emplace_back(l.b.size(), 0.0);
    }
    return g;
}

void NetGrads::add(const NetGrads& other) {
    for (std::size_t i = 0; i < dw.size(); ++i) {
        add_inplace(dw[i], other.dw[i]);
        for (std::size_t j = 0; j < db[i].size(); ++j) db[i][j] += other.db[i][j];
    }
}

void NetGrads::scale(double factor) {
    for (auto& m : dw)
        for (auto& v : m.data) v *= factor;
    for (auto& b : db)
        for (auto& v : b) v *= factor;
}

Mat backward(const DenseNet& net, const ForwardCache& cache, const Mat& dout,
             NetGrads& grads) {
    const std::size_t n_layers = net.layers.size();
    Mat delta = dout;
    for (std::size_t li = n_layers; li-- > 0;) {
        const Mat& layer_input = (li == 0) ? cache.input : cache.post[li - 1];
        Mat dw;
        matmul_at(layer_input, delta, dw);
        add_inplace(grads.dw[li], dw);
        const auto bsum = col_sums(delta);
        for (std::size_t j = 0; j < bsum.size(); ++j) grads.db[li][j] += bsum[j];

        Mat dx;
        matmul_bt(delta, net.layers[li].w, dx);
        if (li > 0) {
            const Mat& pre = cache.pre[li - 1];
            const Mat& post = cache.post[li - 1];
            for (std::size_t i = 0; i < dx.data.size(); ++i)
                dx.data[i] *= activate_grad(pre.data[i], post.data[i], net.activation);
        }
        delta = std::move(dx);
    }
    return delta;
}

AdamState AdamState::make(const DenseNet& net, const AdamConfig& cfg) {
    AdamState st;
    st.cfg = cfg;
    for (const auto& l : net.layers) {
        st.mw.emplace_back(l.w.rows, l.w.cols);
        st.vw.emplace_back(l.w.rows, l.w.cols);
        st.mb.emplace_back(l.b.size(), 0.0);
        st.vb.emplace_back(l.b.size(), 0.0);
    }
    return st;
}

namespace {

inline void adam_update_span(double* p, double* m, double* v, const double* g,
                             std::size_t n, const AdamConfig& cfg, double bc1,
                             double bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

}  // namespace

void adam_step(DenseNet& net, AdamState& state, const NetGrads& grads) {
    if (grads.dw.size() != net.layers.size())
        fail(ErrorKind::shape_mismatch, "adam gradient layout");
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        adam_update_span(net.layers[i].w.data.data(), state.mw[i].data.data(),
                         state.vw[i].data.data(), grads.dw[i].data.data(),
                         net.layers[i].w.size(), state.cfg, bc1, bc2);
        adam_update_span(net.layers[i].b.data(), state.mb[i].data(),
                         state.vb[i].data(), grads.db[i].data(),
                         net.layers[i].b.size(), state.cfg, bc1, bc2);
    }
}

void adam_step_scalar(double& param, ScalarAdam& state, double grad) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.cfg.beta2, static_cast<double>(state.step));
    state.m = state.cfg.beta1 * state.m + (1.0 - state.cfg.beta1) * grad;
    state.v = state.cfg.beta2 * state.v + (1.0 - state.cfg.beta2) * grad * grad;
    param -= state.cfg.lr * (state.m / bc1) / (std::sqrt(state.v / bc2) + state.cfg.eps);
}

std::vector<double> flatten_params(const DenseNet& net) {
    std::vector<double> flat;
    flat.reserve(net.param_count());
    for (const auto& l : net.layers) {
        flat.insert(flat.end(), l.w.data.begin(), l.w.data.end());
        flat.insert(flat.end(), l.b.begin(), l.b.end());
    }
    return flat;
}

void unflatten_params(DenseNet& net, const std::vector<double>& flat) {
    if (flat.size() != net.param_count())
        fail(ErrorKind::shape_mismatch, "flattened parameter size");
    std::size_t k = 0;
    for (auto& l : net.layers) {
        std::copy(flat.begin() + k, flat.begin() + k + l.w.size(), l.w.data.begin());
        k += l.w.size();
        std::copy(flat.begin() + k, flat.begin() + k + l.b.size(), l.b.begin());
        k += l.b.size();
    }
}

std::vector<double*> param_pointers(DenseNet& net) {
    std::vector<double*> ptrs;
    ptrs.reserve(net.param_count());
    for (auto& l : net.layers) {
        for (auto& v : l.w.data) ptrs.push_back(&v);
        for (auto& v : l.b) ptrs.push_back(&v);
    }
    return ptrs;
}

void polyak_update(DenseNet& target, const DenseNet& online, double tau) {
    for (std::size_t i = 0; i < target.layers.size(); ++i) {
        auto& tw = target.layers[i].w.data;
        const auto& ow = online.layers[i].w.data;
        for (std::size_t j = 0; j < tw.size(); ++j)
            tw[j] = tau * ow[j] + (1.0 - tau) * tw[j];
        auto& tb = target.layers[i].b;
        const auto& ob = online.layers[i].b;
        for (std::size_t j = 0; j < tb.size(); ++j)
            tb[j] = tau * ob[j] + (1.0 - tau) * tb[j];
    }
}

double log_one_minus_tanh_sq(double x) {
    // log(1 - tanh(x)^2) = 2 (log 2 - x - softplus(-2x))
    const double t = -2.0 * x;
    const double softplus = t > 0.0 ? t + std::log1p(std::exp(-t))
                                    : std::log1p(std::exp(t));
    return 2.0 * (0.6931471805599453 - x - softplus);
}

GaussianSample squash_with_noise(const Mat& head_out, std::size_t action_dim,
                                 const Mat& zeta) {
    if (head_out.cols != 2 * action_dim)
        fail(ErrorKind::shape_mismatch, "head output must be 2 x action_dim wide");
    const std::size_t b = head_out.rows;
    GaussianSample s;
    s.mean = Mat(b, action_dim);
    s.log_std = Mat(b, action_dim);
    s.clamp_mask = Mat(b, action_dim);
    s.zeta = zeta;
    s.pre_squash = Mat(b, action_dim);
    s.action = Mat(b, action_dim);
    s.log_prob.assign(b, 0.0);
    constexpr double kHalfLog2Pi = 0.9189385332046727;
    for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t k = 0; k < action_dim; ++k) {
            const double mean = head_out.at(r, k);
            const double raw = head_out.at(r, action_dim + k);
            const double log_std = std::clamp(raw, kLogStdMin, kLogStdMax);
            const double sigma = std::exp(log_std);
            const double z = zeta.at(r, k);
            const double u = mean + sigma * z;
            // tanh rounds to exactly +-1 past |u| ~ 19; keep the open interval.
            constexpr double kAlmostOne = 0.99999999999999989;  // nextafter(1, 0)
            const double a = std::clamp(std::tanh(u), -kAlmostOne, kAlmostOne);
            s.mean.at(r, k) = mean;
            s.log_std.at(r, k) = log_std;
            s.clamp_mask.at(r, k) = (raw > kLogStdMin && raw < kLogStdMax) ? 1.0 : 0.0;
            s.pre_squash.at(r, k) = u;
            s.action.at(r, k) = a;
            s.log_prob[r] += -0.5 * z * z - kHalfLog2Pi - log_std
                             - log_one_minus_tanh_sq(u);
        }
    }
    return s;
}

GaussianSample sample_tanh_gaussian(const Mat& head_out, std::size_t action_dim,
                                    Rng& rng) {
    Mat zeta(head_out.rows, action_dim);
    for (auto& v : zeta.data) v = rng.normal();
    return squash_with_noise(head_out, action_dim, zeta);
}

Mat tanh_mean_action(const Mat& head_out, std::size_t action_dim) {
    Mat a(head_out.rows, action_dim);
    for (std::size_t r = 0; r < head_out.rows; ++r)
        for (std::size_t k = 0; k < action_dim; ++k)
            a.at(r, k) = std::tanh(head_out.at(r, k));
    return a;
}

Mat gaussian_head_backward(const GaussianSample& sample, const Mat& d_action,
                           const std::vector<double>& d_log_prob) {
    const std::size_t b = sample.action.rows;
    const std::size_t action_dim = sample.action.cols;
    Mat d_head(b, 2 * action_dim);
    for (std::size_t r = 0; r < b; ++r) {
        const double dlp = d_log_prob.empty() ? 0.0 : d_log_prob[r];
        for (std::size_t k = 0; k < action_dim; ++k) {
            const double a = sample.action.at(r, k);
            const double sigma = std::exp(sample.log_std.at(r, k));
            const double z = sample.zeta.at(r, k);
            const double da = d_action.size() ? d_action.at(r, k) : 0.0;
            const double du = da * (1.0 - a * a) + dlp * 2.0 * a;
            // d log_prob / d log_std carries the -1 entropy term; everything
            // else routes through u = mean + sigma * zeta.
            d_head.at(r, k) = du;
            d_head.at(r, action_dim + k) =
                (du * sigma * z - dlp) * sample.clamp_mask.at(r, k);
        }
    }
    return d_head;
}

GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::vector<double*>& params,
                           const std::vector<double>& analytic_grad,
                           std::size_t max_coords, Rng& rng, double h) {
    if (params.size() != analytic_grad.size())
        fail(ErrorKind::shape_mismatch, "grad_check sizes");
    std::vector<std::size_t> coords;
    if (params.size() <= max_coords) {
        coords.resize(params.size());
        for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    } else {
        for (std::size_t i = 0; i < max_coords; ++i)
            coords.push_back(rng.uniform_int(params.size()));
    }

    GradCheckReport report;
    for (std::size_t i : coords) {
        double* p = params[i];
        const double saved = *p;
        *p = saved + h;
        const double up = loss();
        *p = saved - h;
        const double down = loss();
        *p = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double analytic = analytic_grad[i];
        const double denom = std::max(std::abs(numeric), std::abs(analytic));
        double rel;
        if (denom < 1e-8) {
            rel = std::abs(numeric - analytic) < 1e-8 ? 0.0
                                                      : std::abs(numeric - analytic);
        } else {
            rel = std::abs(numeric - analytic) / denom;
        }
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_coord = i;
        }
        ++report.coords_checked;
    }
    return report;
}

}  // namespace mcq
