#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "process.hpp"
#include "rng.hpp"

// Ground-truth scores for tractable data laws, the denoising score-matching
// objective with exact hand-written backpropagation, and a small MLP score
// network. The network predicts the standardized residual; dividing the raw
// output by sqrt(v_t) yields the score, which keeps the trainable part O(1)
// while the closed-form head carries the stiff small-t factor.

namespace d3gm {

//---------------------------------------------------------------------------
// Data and degradation specifications.

struct DegradationSpec {
    std::vector<Vec> A;        // n rows of length d; y = A x + noise
    double noise_sigma = 0.0;

    int output_dim() const { return static_cast<int>(A.size()); }
    int input_dim() const {
        return A.empty() ? 0 : static_cast<int>(A.front().size());
    }

    void validate() const {
        if (A.empty()) throw std::invalid_argument("degradation: empty operator");
        const std::size_t d = A.front().size();
        if (d == 0) throw std::invalid_argument("degradation: empty rows");
        for (const auto& row : A)
            if (row.size() != d)
                throw std::invalid_argument("degradation: ragged operator");
        if (!(noise_sigma >= 0.0))
            throw std::invalid_argument("degradation: negative noise sigma");
    }

    Vec measure(const Vec& x0, RngStream& stream) const {
        if (static_cast<int>(x0.size()) != input_dim())
            throw std::invalid_argument("degradation: dimension mismatch");
        Vec y(A.size(), 0.0);
        for (std::size_t r = 0; r < A.size(); ++r) {
            for (std::size_t c = 0; c < x0.size(); ++c) y[r] += A[r][c] * x0[c];
            if (noise_sigma > 0.0) y[r] += noise_sigma * stream.normal();
        }
        return y;
    }

    // Adjoint embedding back into state space: lift(y) = A^T y.
    Vec lift(const Vec& y) const {
        if (y.size() != A.size())
            throw std::invalid_argument("degradation: lift dimension mismatch");
        Vec out(static_cast<std::size_t>(input_dim()), 0.0);
        for (std::size_t r = 0; r < A.size(); ++r)
            for (std::size_t c = 0; c < out.size(); ++c)
                out[c] += A[r][c] * y[r];
        return out;
    }

    static DegradationSpec identity(int d, double noise_sigma = 0.0) {
        DegradationSpec spec;
        spec.noise_sigma = noise_sigma;
        spec.A.assign(static_cast<std::size_t>(d), Vec(static_cast<std::size_t>(d), 0.0));
        for (int i = 0; i < d; ++i)
            spec.A[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
        return spec;
    }

    // Keeps every `factor`-th sample; the adjoint re-embeds them with zeros
    // in between.
    static DegradationSpec subsample(int d, int factor, double noise_sigma = 0.0) {
        if (factor < 1) throw std::invalid_argument("degradation: factor must be >= 1");
        DegradationSpec spec;
        spec.noise_sigma = noise_sigma;
        for (int i = 0; i < d; i += factor) {
            Vec row(static_cast<std::size_t>(d), 0.0);
            row[static_cast<std::size_t>(i)] = 1.0;
            spec.A.push_back(std::move(row));
        }
        return spec;
    }

    // Uninformative measurement (single all-zero row): lift(y) == 0, so the
    // conditioning input carries no signal. Used for unconditional training.
    static DegradationSpec uninformative(int d) {
        DegradationSpec spec;
        spec.A.assign(1, Vec(static_cast<std::size_t>(d), 0.0));
        return spec;
    }
};

enum class DataKind { PointMass, Gaussian, GaussianMixture };

struct MixtureComponent {
    double weight = 1.0;
    Vec mean;
    double std = 0.0;
};

struct DataSpec {
    DataKind kind = DataKind::PointMass;
    std::vector<MixtureComponent> components;
    DegradationSpec degradation;

    int dim() const {
        return components.empty() ? 0 : static_cast<int>(components.front().mean.size());
    }

    void validate() const {
        if (components.empty()) throw std::invalid_argument("data: no components");
        const std::size_t d = components.front().mean.size();
        double wsum = 0.0;
        for (const auto& comp : components) {
            if (comp.mean.size() != d)
                throw std::invalid_argument("data: component dimension mismatch");
            if (!(comp.weight > 0.0))
                throw std::invalid_argument("data: weights must be positive");
            if (!(comp.std >= 0.0))
                throw std::invalid_argument("data: stds must be nonnegative");
            wsum += comp.weight;
        }
        if (std::abs(wsum - 1.0) > 1e-9)
            throw std::invalid_argument("data: weights must sum to 1");
        if (kind == DataKind::PointMass &&
            (components.size() != 1 || components.front().std != 0.0))
            throw std::invalid_argument("data: point-mass needs one zero-std component");
        if (kind == DataKind::Gaussian && components.size() != 1)
            throw std::invalid_argument("data: gaussian needs exactly one component");
    }

    Vec draw_x0(RngStream& stream) const {
        std::size_t pick = 0;
        if (components.size() > 1) {
            const double u = stream.uniform();
            double acc = 0.0;
            for (std::size_t k = 0; k < components.size(); ++k) {
                acc += components[k].weight;
                if (u <= acc || k + 1 == components.size()) {
                    pick = k;
                    break;
                }
            }
        }
        const auto& comp = components[pick];
        Vec x0 = comp.mean;
        if (comp.std > 0.0)
            for (auto& v : x0) v += comp.std * stream.normal();
        return x0;
    }

    static DataSpec point_mass(Vec x0, DegradationSpec deg) {
        DataSpec d;
        d.kind = DataKind::PointMass;
        d.components = {MixtureComponent{1.0, std::move(x0), 0.0}};
        d.degradation = std::move(deg);
        return d;
    }
};

//---------------------------------------------------------------------------
// Analytic scores.

// Kernel variance v_t = tau^2 lambda^2 (1 - e^{-2 theta_bar_t}); independent
// of x0 and mu.
inline double kernel_variance(double t, const ProcessParams& p, const Schedule& s) {
    const double decay = std::exp(-theta_bar(s, t));
    return p.tau * p.tau * p.lambda * p.lambda * (1.0 - decay * decay);
}

// Score of the transition kernel: -(x_t - mean_t) / v_t.
inline Vec true_score_kernel(const Vec& x_t, const Vec& x0, double t,
                             const ProcessParams& p, const Schedule& s) {
    if (!(t > 0.0))
        throw std::domain_error("true_score_kernel: kernel is singular at t = 0");
    const GaussianMarginal m = marginal(x0, t, p, s);
    if (!(m.variance > 0.0))
        throw std::domain_error("true_score_kernel: zero kernel variance");
    Vec out(x_t.size());
    for (std::size_t c = 0; c < x_t.size(); ++c)
        out[c] = -(x_t[c] - m.mean[c]) / m.variance;
    return out;
}

namespace detail {

struct EvolvedMixture {
    std::vector<Vec> means;       // per component
    std::vector<double> vars;     // per component
    std::vector<double> log_w;
};

// Component k of the data law maps to N(mean_k e^{-tb} + mu (1 - e^{-tb}),
// v_t + std_k^2 e^{-2 tb}) after time t of forward dynamics.
inline EvolvedMixture evolve_mixture(const DataSpec& data, const Vec& mu_eff,
                                     double t, const ProcessParams& p,
                                     const Schedule& s) {
    const double decay = std::exp(-theta_bar(s, t));
    const double v_t = kernel_variance(t, p, s);
    EvolvedMixture out;
    for (const auto& comp : data.components) {
        Vec m(comp.mean.size());
        for (std::size_t c = 0; c < m.size(); ++c)
            m[c] = comp.mean[c] * decay + mu_eff[c] * (1.0 - decay);
        out.means.push_back(std::move(m));
        out.vars.push_back(v_t + comp.std * comp.std * decay * decay);
        out.log_w.push_back(std::log(comp.weight));
    }
    return out;
}

}  // namespace detail

// Log-density of the forward marginal for mixture (or gaussian, or point
// mass) data. `y` is the raw measurement; when non-empty it is lifted through
// the data's degradation operator and replaces mu as the drift target.
inline double mixture_log_density(const Vec& x_t, const DataSpec& data,
                                  const Vec& y, double t,
                                  const ProcessParams& p, const Schedule& s) {
    data.validate();
    if (!(t > 0.0)) throw std::domain_error("mixture density: singular at t = 0");
    const Vec mu_eff = y.empty() ? p.mu : data.degradation.lift(y);
    const auto mix = detail::evolve_mixture(data, mu_eff, t, p, s);
    const double d = static_cast<double>(x_t.size());

    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> logs(mix.means.size());
    for (std::size_t k = 0; k < mix.means.size(); ++k) {
        if (!(mix.vars[k] > 0.0))
            throw std::domain_error("mixture density: zero component variance");
        double sq = 0.0;
        for (std::size_t c = 0; c < x_t.size(); ++c) {
            const double dv = x_t[c] - mix.means[k][c];
            sq += dv * dv;
        }
        logs[k] = mix.log_w[k] - 0.5 * sq / mix.vars[k] -
                  0.5 * d * std::log(2.0 * std::numbers::pi * mix.vars[k]);
        best = std::max(best, logs[k]);
    }
    double acc = 0.0;
    for (double lg : logs) acc += std::exp(lg - best);
    return best + std::log(acc);
}

// Exact marginal score for mixture data, via log-sum-exp responsibilities.
inline Vec true_score_mixture(const Vec& x_t, const DataSpec& data, const Vec& y,
                              double t, const ProcessParams& p,
                              const Schedule& s) {
    data.validate();
    if (!(t > 0.0))
        throw std::domain_error("true_score_mixture: singular at t = 0");
    const Vec mu_eff = y.empty() ? p.mu : data.degradation.lift(y);
    const auto mix = detail::evolve_mixture(data, mu_eff, t, p, s);
    const double d = static_cast<double>(x_t.size());

    std::vector<double> logs(mix.means.size());
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < mix.means.size(); ++k) {
        if (!(mix.vars[k] > 0.0))
            throw std::domain_error("true_score_mixture: zero component variance");
        double sq = 0.0;
        for (std::size_t c = 0; c < x_t.size(); ++c) {
            const double dv = x_t[c] - mix.means[k][c];
            sq += dv * dv;
        }
        logs[k] = mix.log_w[k] - 0.5 * sq / mix.vars[k] -
                  0.5 * d * std::log(2.0 * std::numbers::pi * mix.vars[k]);
        best = std::max(best, logs[k]);
    }
    double norm = 0.0;
    for (double lg : logs) norm += std::exp(lg - best);

    Vec score(x_t.size(), 0.0);
    for (std::size_t k = 0; k < mix.means.size(); ++k) {
        const double resp = std::exp(logs[k] - best) / norm;
        for (std::size_t c = 0; c < x_t.size(); ++c)
            score[c] += resp * (-(x_t[c] - mix.means[k][c]) / mix.vars[k]);
    }
    return score;
}

//---------------------------------------------------------------------------
// Score network: fully-connected tanh MLP over [x_t, y_lift, time features],
// raw output divided by sqrt(v_t).

struct MlpParams {
    std::vector<int> widths;    // input, hidden..., output (= d)
    std::string activation = "tanh";
    std::uint64_t seed = 0;
    std::string loss_weight_mode = "paper-magnitude";
    int time_features = 3;
    std::vector<std::vector<double>> weights;  // per layer, row-major out x in
    std::vector<std::vector<double>> biases;

    int input_width() const { return widths.front(); }
    int output_width() const { return widths.back(); }
    std::size_t n_layers() const { return weights.size(); }

    void validate() const {
        if (widths.size() < 2) throw std::invalid_argument("mlp: need input and output widths");
        if (weights.size() != widths.size() - 1 || biases.size() != weights.size())
            throw std::invalid_argument("mlp: layer count mismatch");
        if (activation != "tanh")
            throw std::invalid_argument("mlp: unsupported activation " + activation);
        for (std::size_t l = 0; l < weights.size(); ++l) {
            const std::size_t rows = static_cast<std::size_t>(widths[l + 1]);
            const std::size_t cols = static_cast<std::size_t>(widths[l]);
            if (weights[l].size() != rows * cols || biases[l].size() != rows)
                throw std::invalid_argument("mlp: parameter shape mismatch");
            for (double w : weights[l])
                if (!std::isfinite(w)) throw std::invalid_argument("mlp: non-finite weight");
            for (double b : biases[l])
                if (!std::isfinite(b)) throw std::invalid_argument("mlp: non-finite bias");
        }
    }
};

// Input layout: d state coordinates, d lifted conditioning coordinates,
// then the time features (t, sin 2 pi t, cos 2 pi t).
inline MlpParams make_score_net(int d, const std::vector<int>& hidden,
                                std::uint64_t seed) {
    if (d <= 0) throw std::invalid_argument("mlp: d must be positive");
    MlpParams net;
    net.seed = seed;
    net.widths.push_back(2 * d + net.time_features);
    for (int h : hidden) {
        if (h <= 0) throw std::invalid_argument("mlp: hidden width must be positive");
        net.widths.push_back(h);
    }
    net.widths.push_back(d);
    for (std::size_t l = 0; l + 1 < net.widths.size(); ++l) {
        const int rows = net.widths[l + 1];
        const int cols = net.widths[l];
        RngStream stream(seed, stream::weights, l);
        const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
        std::vector<double> W(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
        for (auto& w : W) w = scale * stream.normal();
        net.weights.push_back(std::move(W));
        net.biases.emplace_back(static_cast<std::size_t>(rows), 0.0);
    }
    net.validate();
    return net;
}

namespace detail {

inline void time_features(double t, Vec& out) {
    out[0] = t;
    out[1] = std::sin(2.0 * std::numbers::pi * t);
    out[2] = std::cos(2.0 * std::numbers::pi * t);
}

struct MlpWorkspace {
    std::vector<Vec> act;  // act[0] = input, act.back() = raw output
};

inline void mlp_forward(const MlpParams& net, const Vec& input, MlpWorkspace& ws) {
    const std::size_t L = net.n_layers();
    ws.act.resize(L + 1);
    ws.act[0] = input;
    for (std::size_t l = 0; l < L; ++l) {
        const int rows = net.widths[l + 1];
        const int cols = net.widths[l];
        Vec& out = ws.act[l + 1];
        out.assign(static_cast<std::size_t>(rows), 0.0);
        const Vec& in = ws.act[l];
        const auto& W = net.weights[l];
        for (int r = 0; r < rows; ++r) {
            double z = net.biases[l][static_cast<std::size_t>(r)];
            const double* wrow = W.data() + static_cast<std::size_t>(r) * cols;
            for (int c = 0; c < cols; ++c) z += wrow[c] * in[static_cast<std::size_t>(c)];
            out[static_cast<std::size_t>(r)] =
                (l + 1 < L) ? std::tanh(z) : z;  // linear output layer
        }
    }
}

inline Vec build_input(const MlpParams& net, const Vec& x_t, const Vec& y_lift,
                       double t) {
    const std::size_t d = x_t.size();
    if (y_lift.size() != d)
        throw std::invalid_argument("mlp: conditioning dimension mismatch");
    Vec input(2 * d + static_cast<std::size_t>(net.time_features));
    std::copy(x_t.begin(), x_t.end(), input.begin());
    std::copy(y_lift.begin(), y_lift.end(), input.begin() + static_cast<std::ptrdiff_t>(d));
    Vec feats(static_cast<std::size_t>(net.time_features));
    time_features(t, feats);
    std::copy(feats.begin(), feats.end(), input.begin() + static_cast<std::ptrdiff_t>(2 * d));
    return input;
}

}  // namespace detail

// Network score S(x_t, y_lift, t) = raw_mlp(...) / sqrt(v_t).
inline Vec net_score(const MlpParams& net, const Vec& x_t, const Vec& y_lift,
                     double t, const ProcessParams& p, const Schedule& s) {
    net.validate();
    if (!(t > 0.0)) throw std::domain_error("net_score: singular at t = 0");
    const double v_t = kernel_variance(t, p, s);
    if (!(v_t > 0.0)) throw std::domain_error("net_score: zero kernel variance");
    detail::MlpWorkspace ws;
    detail::mlp_forward(net, detail::build_input(net, x_t, y_lift, t), ws);
    Vec out = ws.act.back();
    const double inv = 1.0 / std::sqrt(v_t);
    for (auto& v : out) v *= inv;
    return out;
}

//---------------------------------------------------------------------------
// Denoising score matching.

struct ScoreBatchItem {
    Vec x0;
    Vec y_lift;  // conditioning, already lifted to d dimensions
    double t = 0.0;
    Vec x_t;
    // Ablation hook: when non-empty this replaces the network's conditioning
    // input while the regression target still uses y_lift as drift target.
    Vec y_input;
};

struct TrainConfig {
    std::string loss_weight_mode = "paper-magnitude";  // or "unit"
    std::int64_t steps = 2000;
    int batch = 32;
    double learning_rate = 1e-2;
    std::uint64_t seed = 42;
    double t_min = 1e-3;  // v_0 = 0, so training times stay above this
    double T = 1.0;
    std::string optimizer = "sgd";  // or "adam"
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::int64_t history_every = 1;

    void validate() const {
        if (loss_weight_mode != "paper-magnitude" && loss_weight_mode != "unit")
            throw std::invalid_argument("train: unknown loss_weight_mode");
        if (optimizer != "sgd" && optimizer != "adam")
            throw std::invalid_argument("train: unknown optimizer");
        if (steps <= 0 || batch <= 0 || !(learning_rate > 0.0))
            throw std::invalid_argument("train: bad steps/batch/learning rate");
        if (!(t_min > 0.0) || !(T > t_min))
            throw std::invalid_argument("train: need 0 < t_min < T");
    }

    double loss_weight(double tau) const {
        return loss_weight_mode == "unit" ? 1.0 : 1.0 / (tau * tau);
    }
};

struct MlpGrads {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    static MlpGrads zeros_like(const MlpParams& net) {
        MlpGrads g;
        for (std::size_t l = 0; l < net.n_layers(); ++l) {
            g.weights.emplace_back(net.weights[l].size(), 0.0);
            g.biases.emplace_back(net.biases[l].size(), 0.0);
        }
        return g;
    }
};

// Batch DSM objective
//   loss = |w| * (1/B) sum_i | S(x_t_i, y_i, t_i) - kernel_score_i |^2,
// with the kernel target computed at drift target mu := y_lift (the
// conditioning IS the drift target throughout the restoration pipeline).
// Gradients are exact backpropagation; pass grads = nullptr to skip them.
inline double dsm_loss(const MlpParams& net,
                       const std::vector<ScoreBatchItem>& batch,
                       const ProcessParams& p, const Schedule& s,
                       const TrainConfig& cfg, MlpGrads* grads) {
    net.validate();
    cfg.validate();
    if (batch.empty()) throw std::invalid_argument("dsm_loss: empty batch");
    const double w = cfg.loss_weight(p.tau);
    const std::size_t L = net.n_layers();
    if (grads) *grads = MlpGrads::zeros_like(net);

    double loss = 0.0;
    detail::MlpWorkspace ws;
    std::vector<Vec> delta(L + 1);
    for (const auto& item : batch) {
        if (!(item.t >= cfg.t_min))
            throw std::invalid_argument("dsm_loss: t below t_min");
        ProcessParams local = p;
        local.mu = item.y_lift;
        const Vec target = true_score_kernel(item.x_t, item.x0, item.t, local, s);
        const double v_t = kernel_variance(item.t, p, s);
        const double inv_sd = 1.0 / std::sqrt(v_t);

        const Vec& cond = item.y_input.empty() ? item.y_lift : item.y_input;
        detail::mlp_forward(net, detail::build_input(net, item.x_t, cond, item.t), ws);
        const Vec& raw = ws.act[L];

        const std::size_t d = target.size();
        Vec& dout = delta[L];
        dout.assign(d, 0.0);
        for (std::size_t c = 0; c < d; ++c) {
            const double diff = raw[c] * inv_sd - target[c];
            loss += w * diff * diff / static_cast<double>(batch.size());
            // d loss / d raw = 2 w diff * inv_sd / B
            dout[c] = 2.0 * w * diff * inv_sd / static_cast<double>(batch.size());
        }
        if (!grads) continue;

        for (std::size_t l = L; l-- > 0;) {
            const int rows = net.widths[l + 1];
            const int cols = net.widths[l];
            const Vec& in = ws.act[l];
            const Vec& do_ = delta[l + 1];
            auto& gW = grads->weights[l];
            auto& gb = grads->biases[l];
            Vec& din = delta[l];
            din.assign(static_cast<std::size_t>(cols), 0.0);
            for (int r = 0; r < rows; ++r) {
                double dz = do_[static_cast<std::size_t>(r)];
                if (l + 1 < L) {
                    const double a = ws.act[l + 1][static_cast<std::size_t>(r)];
                    dz *= 1.0 - a * a;  // tanh'
                }
                gb[static_cast<std::size_t>(r)] += dz;
                const std::size_t base = static_cast<std::size_t>(r) * cols;
                const double* wrow = net.weights[l].data() + base;
                for (int c = 0; c < cols; ++c) {
                    gW[base + static_cast<std::size_t>(c)] += dz * in[static_cast<std::size_t>(c)];
                    din[static_cast<std::size_t>(c)] += dz * wrow[c];
                }
            }
        }
    }
    return loss;
}

struct TrainingError : std::runtime_error {
    std::int64_t step;
    explicit TrainingError(std::int64_t step_)
        : std::runtime_error("training diverged at step " + std::to_string(step_)),
          step(step_) {}
};

struct TrainResult {
    MlpParams net;
    std::vector<double> loss_history;
};

// Single-threaded deterministic training loop. Per step: draw x0 from the
// data law, measure y, lift it (which also becomes the drift target), sample
// t uniform on (t_min, T] and x_t from the closed-form marginal, then apply
// SGD or adaptive-moment updates on the DSM gradients.
inline TrainResult train(MlpParams net, const DataSpec& data,
                         const ProcessParams& p, const Schedule& s,
                         const TrainConfig& cfg) {
    net.validate();
    data.validate();
    cfg.validate();
    net.loss_weight_mode = cfg.loss_weight_mode;

    MlpGrads grads;
    MlpGrads m1 = MlpGrads::zeros_like(net);   // adam moments
    MlpGrads m2 = MlpGrads::zeros_like(net);
    TrainResult result;

    std::vector<ScoreBatchItem> batch(static_cast<std::size_t>(cfg.batch));
    for (std::int64_t step = 0; step < cfg.steps; ++step) {
        RngStream stream(cfg.seed, stream::batch, static_cast<std::uint64_t>(step));
        for (auto& item : batch) {
            item.x0 = data.draw_x0(stream);
            const Vec y = data.degradation.measure(item.x0, stream);
            item.y_lift = data.degradation.lift(y);
            item.t = cfg.t_min + (cfg.T - cfg.t_min) * stream.uniform();
            ProcessParams local = p;
            local.mu = item.y_lift;
            item.x_t = sample_marginal(marginal(item.x0, item.t, local, s), stream);
        }
        const double loss = dsm_loss(net, batch, p, s, cfg, &grads);
        if (!std::isfinite(loss)) throw TrainingError(step);
        if (step % cfg.history_every == 0) result.loss_history.push_back(loss);

        if (cfg.optimizer == "sgd") {
            for (std::size_t l = 0; l < net.n_layers(); ++l) {
                for (std::size_t i = 0; i < net.weights[l].size(); ++i)
                    net.weights[l][i] -= cfg.learning_rate * grads.weights[l][i];
                for (std::size_t i = 0; i < net.biases[l].size(); ++i)
                    net.biases[l][i] -= cfg.learning_rate * grads.biases[l][i];
            }
        } else {
            const double t1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step + 1));
            const double t2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step + 1));
            auto update = [&](std::vector<double>& param, const std::vector<double>& g,
                              std::vector<double>& mm, std::vector<double>& vv) {
                for (std::size_t i = 0; i < param.size(); ++i) {
                    mm[i] = cfg.adam_beta1 * mm[i] + (1.0 - cfg.adam_beta1) * g[i];
                    vv[i] = cfg.adam_beta2 * vv[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
                    param[i] -= cfg.learning_rate * (mm[i] / t1) /
                                (std::sqrt(vv[i] / t2) + cfg.adam_eps);
                }
            };
            for (std::size_t l = 0; l < net.n_layers(); ++l) {
                update(net.weights[l], grads.weights[l], m1.weights[l], m2.weights[l]);
                update(net.biases[l], grads.biases[l], m1.biases[l], m2.biases[l]);
            }
        }
    }
    result.net = std::move(net);
    return result;
}

//---------------------------------------------------------------------------
// Checkpoints: JSON manifest plus raw little-endian float64 parameters,
// row-major per layer (weights then biases, layer by layer).

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

inline void save_checkpoint(const MlpParams& net, const std::string& base_path) {
    net.validate();
    nlohmann::json manifest;
    manifest["widths"] = net.widths;
    manifest["activation"] = net.activation;
    manifest["seed"] = net.seed;
    manifest["loss_weight_mode"] = net.loss_weight_mode;
    std::ofstream jf(base_path + ".json", std::ios::binary);
    if (!jf) throw std::runtime_error("checkpoint: cannot write " + base_path + ".json");
    jf << manifest.dump(2) << "\n";

    std::ofstream bf(base_path + ".bin", std::ios::binary);
    if (!bf) throw std::runtime_error("checkpoint: cannot write " + base_path + ".bin");
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
        bf.write(reinterpret_cast<const char*>(net.weights[l].data()),
                 static_cast<std::streamsize>(net.weights[l].size() * sizeof(double)));
        bf.write(reinterpret_cast<const char*>(net.biases[l].data()),
                 static_cast<std::streamsize>(net.biases[l].size() * sizeof(double)));
    }
}

inline MlpParams load_checkpoint(const std::string& base_path) {
    std::ifstream jf(base_path + ".json");
    if (!jf) throw std::runtime_error("checkpoint: cannot read " + base_path + ".json");
    nlohmann::json manifest = nlohmann::json::parse(jf);

    MlpParams net;
    net.widths = manifest.at("widths").get<std::vector<int>>();
    net.activation = manifest.at("activation").get<std::string>();
    net.seed = manifest.at("seed").get<std::uint64_t>();
    net.loss_weight_mode = manifest.at("loss_weight_mode").get<std::string>();

    std::ifstream bf(base_path + ".bin", std::ios::binary);
    if (!bf) throw std::runtime_error("checkpoint: cannot read " + base_path + ".bin");
    for (std::size_t l = 0; l + 1 < net.widths.size(); ++l) {
        const std::size_t rows = static_cast<std::size_t>(net.widths[l + 1]);
        const std::size_t cols = static_cast<std::size_t>(net.widths[l]);
        std::vector<double> W(rows * cols);
        std::vector<double> b(rows);
        bf.read(reinterpret_cast<char*>(W.data()),
                static_cast<std::streamsize>(W.size() * sizeof(double)));
        bf.read(reinterpret_cast<char*>(b.data()),
                static_cast<std::streamsize>(b.size() * sizeof(double)));
        if (!bf) throw std::runtime_error("checkpoint: truncated parameter file");
        net.weights.push_back(std::move(W));
        net.biases.push_back(std::move(b));
    }
    net.validate();
    return net;
}

}  // namespace d3gm
