#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "discrepancy.hpp"
#include "parallel.hpp"
#include "process.hpp"
#include "rng.hpp"
#include "schedule.hpp"
#include "score.hpp"

// Reverse-time integration of the mean-reverting diffusion and the
// comparison variants used in the stability study. All ensembles reduce in
// fixed chunk order, so outputs are byte-identical for any thread count.

namespace d3gm {

//---------------------------------------------------------------------------
// Variants.

enum class VariantKind { D3gm, Ou, CoefDecoupled, SgmVp };

inline std::string to_string(VariantKind k) {
    switch (k) {
        case VariantKind::D3gm: return "d3gm";
        case VariantKind::Ou: return "ou";
        case VariantKind::CoefDecoupled: return "coef-decoupled";
        case VariantKind::SgmVp: return "sgm-vp";
    }
    throw std::invalid_argument("unknown variant kind");
}

inline VariantKind variant_kind_from_string(const std::string& name) {
    if (name == "d3gm") return VariantKind::D3gm;
    if (name == "ou") return VariantKind::Ou;
    if (name == "coef-decoupled") return VariantKind::CoefDecoupled;
    if (name == "sgm-vp") return VariantKind::SgmVp;
    throw std::invalid_argument("unknown variant kind: " + name);
}

struct VariantSpec {
    VariantKind kind = VariantKind::D3gm;
    ProcessParams params;
    Schedule sched;
    Volatility vol = CoupledVolatility{1.0};
    double beta_min = 0.1;  // sgm-vp only; linear beta_t with terminal var ~ 1
    double beta_max = 20.0;

    void validate() const {
        params.validate();
        sched.validate();
        const bool coupled = std::holds_alternative<CoupledVolatility>(vol);
        switch (kind) {
            case VariantKind::D3gm:
                if (!coupled) throw std::invalid_argument("d3gm requires coupled volatility");
                if (!(params.tau >= 1.0))
                    throw std::invalid_argument("d3gm requires tau >= 1");
                break;
            case VariantKind::Ou:
                if (!coupled) throw std::invalid_argument("ou requires coupled volatility");
                if (params.tau != 1.0) throw std::invalid_argument("ou requires tau = 1");
                break;
            case VariantKind::CoefDecoupled:
                if (coupled)
                    throw std::invalid_argument("coef-decoupled requires decoupled volatility");
                break;
            case VariantKind::SgmVp:
                if (!(beta_min > 0.0) || !(beta_max > beta_min))
                    throw std::invalid_argument("sgm-vp requires 0 < beta_min < beta_max");
                break;
        }
    }
};

inline VariantSpec make_d3gm(ProcessParams params, Schedule sched) {
    VariantSpec v;
    v.kind = VariantKind::D3gm;
    v.vol = CoupledVolatility{params.lambda};
    v.params = std::move(params);
    v.sched = std::move(sched);
    v.validate();
    return v;
}

inline VariantSpec make_ou(ProcessParams params, Schedule sched) {
    VariantSpec v;
    v.kind = VariantKind::Ou;
    params.tau = 1.0;
    v.vol = CoupledVolatility{params.lambda};
    v.params = std::move(params);
    v.sched = std::move(sched);
    v.validate();
    return v;
}

inline VariantSpec make_coef_decoupled(ProcessParams params, Schedule sched,
                                       double sigma_const) {
    VariantSpec v;
    v.kind = VariantKind::CoefDecoupled;
    v.vol = DecoupledVolatility::constant(sigma_const);
    v.params = std::move(params);
    v.sched = std::move(sched);
    v.validate();
    return v;
}

// The no-prior contrast: drift -beta_t x / 2, mu and lambda ignored.
inline VariantSpec make_sgm_vp(int d, Schedule sched, double beta_min = 0.1,
                               double beta_max = 20.0) {
    VariantSpec v;
    v.kind = VariantKind::SgmVp;
    v.params.mu.assign(static_cast<std::size_t>(d), 0.0);
    v.sched = std::move(sched);
    v.beta_min = beta_min;
    v.beta_max = beta_max;
    v.validate();
    return v;
}

namespace detail {

inline double vp_beta(const VariantSpec& v, double t) {
    return v.beta_min + (v.beta_max - v.beta_min) * t / v.sched.t_end;
}

// B(t) = integral of beta over [0, t].
inline double vp_beta_bar(const VariantSpec& v, double t) {
    return v.beta_min * t + 0.5 * (v.beta_max - v.beta_min) * t * t / v.sched.t_end;
}

// Adaptive Simpson, enough for the decoupled-variance integral.
template <typename F>
double simpson_recurse(const F& f, double a, double b, double fa, double fm,
                       double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <typename F>
double integrate(const F& f, double a, double b, double tol = 1e-12) {
    if (a == b) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_recurse(f, a, b, fa, fm, fb, whole, tol, 48);
}

// Variance of the decoupled process: e^{-2 tb(t)} * int_0^t e^{2 tb(s)}
// tau^2 sigma^2(s) ds, by quadrature.
inline double decoupled_variance(const VariantSpec& v, double t) {
    const double tb_t = theta_bar(v.sched, t);
    const double g2 = [&] {
        return integrate(
            [&](double s) {
                const double g = v.params.tau * sigma_at(v.vol, v.sched, s);
                return std::exp(2.0 * (theta_bar(v.sched, s) - tb_t)) * g * g;
            },
            0.0, t, 1e-12 * std::max(1.0, t));
    }();
    return g2;
}

}  // namespace detail

// Forward-SDE diffusion coefficient g(t) of the variant.
inline double variant_diffusion(const VariantSpec& v, double t) {
    if (v.kind == VariantKind::SgmVp) return std::sqrt(detail::vp_beta(v, t));
    return v.params.tau * sigma_at(v.vol, v.sched, t);
}

// Forward-SDE drift f(x, t) of the variant.
inline Vec variant_drift(const VariantSpec& v, const Vec& x, double t) {
    Vec out(x.size());
    if (v.kind == VariantKind::SgmVp) {
        const double half_beta = 0.5 * detail::vp_beta(v, t);
        for (std::size_t c = 0; c < x.size(); ++c) out[c] = -half_beta * x[c];
        return out;
    }
    const double th = theta_at(v.sched, t);
    for (std::size_t c = 0; c < x.size(); ++c)
        out[c] = th * (v.params.mu[c] - x[c]);
    return out;
}

// Gaussian forward marginal of the variant started at x0.
inline GaussianMarginal variant_marginal(const VariantSpec& v, const Vec& x0,
                                         double t) {
    GaussianMarginal m;
    switch (v.kind) {
        case VariantKind::D3gm:
        case VariantKind::Ou:
            return marginal(x0, t, v.params, v.sched);
        case VariantKind::CoefDecoupled: {
            const double decay = std::exp(-theta_bar(v.sched, t));
            m.mean.resize(x0.size());
            for (std::size_t c = 0; c < x0.size(); ++c)
                m.mean[c] = v.params.mu[c] + (x0[c] - v.params.mu[c]) * decay;
            m.variance = detail::decoupled_variance(v, t);
            return m;
        }
        case VariantKind::SgmVp: {
            const double decay = std::exp(-0.5 * detail::vp_beta_bar(v, t));
            m.mean.resize(x0.size());
            for (std::size_t c = 0; c < x0.size(); ++c) m.mean[c] = x0[c] * decay;
            m.variance = 1.0 - decay * decay;
            return m;
        }
    }
    throw std::invalid_argument("unknown variant kind");
}

// Law the sampler initializes from (from-stationary). For coef-decoupled this
// is the quasi-stationary scale sigma^2 / (2 theta) evaluated at t_end, which
// is exact for constant coefficients and is precisely the oversized-attractor
// regime when sigma/theta is large.
inline GaussianMarginal variant_stationary(const VariantSpec& v) {
    GaussianMarginal m;
    switch (v.kind) {
        case VariantKind::D3gm:
        case VariantKind::Ou:
            return stationary_law(v.params);
        case VariantKind::CoefDecoupled: {
            const double sig = v.params.tau * sigma_at(v.vol, v.sched, v.sched.t_end);
            const double th = theta_at(v.sched, v.sched.t_end);
            if (!(th > 0.0))
                throw std::domain_error("coef-decoupled stationary scale needs theta > 0");
            m.mean = v.params.mu;
            m.variance = sig * sig / (2.0 * th);
            return m;
        }
        case VariantKind::SgmVp:
            m.mean.assign(v.params.mu.size(), 0.0);
            m.variance = 1.0;
            return m;
    }
    throw std::invalid_argument("unknown variant kind");
}

// Forward marginal of Gaussian (or point-mass) data under the variant:
// component mean evolves like any x0, component variance decays with the
// squared mean-decay factor and adds the kernel variance.
inline GaussianMarginal variant_data_marginal(const VariantSpec& v,
                                              const MixtureComponent& comp,
                                              double t) {
    GaussianMarginal m = variant_marginal(v, comp.mean, t);
    const double decay = (v.kind == VariantKind::SgmVp)
                             ? std::exp(-0.5 * detail::vp_beta_bar(v, t))
                             : std::exp(-theta_bar(v.sched, t));
    m.variance += comp.std * comp.std * decay * decay;
    return m;
}

using ScoreFn = std::function<Vec(const Vec&, double)>;

// Exact marginal score for single-component data under any variant's
// dynamics; the oracle used by the comparison study. Decoupled variances
// come from quadrature and reverse grids revisit the same times for every
// path, so marginals are memoized per time behind a small lock.
inline ScoreFn make_variant_gaussian_score(const VariantSpec& v,
                                           const MixtureComponent& comp) {
    struct MarginalCache {
        std::mutex mu;
        std::unordered_map<double, GaussianMarginal> by_t;
    };
    auto cache = std::make_shared<MarginalCache>();
    return [v, comp, cache](const Vec& x, double t) {
        GaussianMarginal m;
        {
            std::lock_guard<std::mutex> lock(cache->mu);
            auto it = cache->by_t.find(t);
            if (it == cache->by_t.end())
                it = cache->by_t.emplace(t, variant_data_marginal(v, comp, t))
                         .first;
            m = it->second;
        }
        if (!(m.variance > 0.0))
            throw std::domain_error("variant score: zero marginal variance");
        Vec out(x.size());
        for (std::size_t c = 0; c < x.size(); ++c)
            out[c] = -(x[c] - m.mean[c]) / m.variance;
        return out;
    };
}

inline ScoreFn make_kernel_score(const Vec& x0, const ProcessParams& p,
                                 const Schedule& s) {
    return [x0, p, s](const Vec& x, double t) {
        return true_score_kernel(x, x0, t, p, s);
    };
}

inline ScoreFn make_mixture_score(const DataSpec& data, const Vec& y,
                                  const ProcessParams& p, const Schedule& s) {
    return [data, y, p, s](const Vec& x, double t) {
        return true_score_mixture(x, data, y, t, p, s);
    };
}

inline ScoreFn make_net_score(const MlpParams& net, const Vec& y_lift,
                              const ProcessParams& p, const Schedule& s) {
    return [net, y_lift, p, s](const Vec& x, double t) {
        return net_score(net, x, y_lift, t, p, s);
    };
}

//---------------------------------------------------------------------------
// Reverse steps.

// One Euler-Maruyama step of the reverse SDE for the mean-reverting process:
//   x <- x - [theta_t (mu - x) - tau^2 sigma_t^2 score] dt + tau sigma_t dW,
// with dt > 0 the magnitude of the (negative) time increment.
inline Vec reverse_step(const Vec& x, double t, double dt, const Vec& score,
                        const ProcessParams& p, const Schedule& s, const Vec& dW,
                        const Volatility& vol) {
    if (!(dt > 0.0)) throw std::invalid_argument("reverse_step: dt must be positive");
    if (score.size() != x.size() || dW.size() != x.size())
        throw std::invalid_argument("reverse_step: dimension mismatch");
    const double th = theta_at(s, t);
    const double g = p.tau * sigma_at(vol, s, t);
    const double g2 = g * g;
    Vec out(x.size());
    for (std::size_t c = 0; c < x.size(); ++c) {
        out[c] = x[c] - (th * (p.mu[c] - x[c]) - g2 * score[c]) * dt + g * dW[c];
        if (!std::isfinite(out[c]))
            throw SimulationError(0, "reverse_step produced a non-finite state");
    }
    return out;
}

inline Vec reverse_step(const Vec& x, double t, double dt, const Vec& score,
                        const ProcessParams& p, const Schedule& s, const Vec& dW) {
    return reverse_step(x, t, dt, score, p, s, dW, CoupledVolatility{p.lambda});
}

// Variant-generic reverse step: x <- x - [f(x,t) - g^2 score] dt + g dW.
inline Vec reverse_step_variant(const VariantSpec& v, const Vec& x, double t,
                                double dt, const Vec& score, const Vec& dW) {
    if (!(dt > 0.0)) throw std::invalid_argument("reverse_step: dt must be positive");
    const Vec f = variant_drift(v, x, t);
    const double g = variant_diffusion(v, t);
    const double g2 = g * g;
    Vec out(x.size());
    for (std::size_t c = 0; c < x.size(); ++c) {
        out[c] = x[c] - (f[c] - g2 * score[c]) * dt + g * dW[c];
        if (!std::isfinite(out[c]))
            throw SimulationError(0, "reverse step produced a non-finite state");
    }
    return out;
}

//---------------------------------------------------------------------------
// Single runs.

enum class InitMode { FromStationary, FromForward };

inline std::string to_string(InitMode m) {
    return m == InitMode::FromStationary ? "from-stationary" : "from-forward";
}

struct SampleRun {
    InitMode init = InitMode::FromStationary;
    Trajectory trajectory;         // times decreasing from T to t_min
    Vec terminal;                  // state at t_min, the reconstruction
    std::vector<double> score_norms;  // |score| at each step's start
    std::vector<double> drift_norms;  // |f - g^2 score| at each step's start
};

// noise_fn(step, coord) -> Brownian increment for that reverse step.
using ReverseNoiseFn = std::function<double(int, std::size_t)>;

inline SampleRun integrate_reverse(const VariantSpec& v, const ScoreFn& score_fn,
                                   int n_steps, double t_min, Vec x_init,
                                   InitMode init, const ReverseNoiseFn& noise_fn) {
    v.validate();
    if (n_steps <= 0) throw std::invalid_argument("sample: n_steps must be positive");
    const double T = v.sched.t_end;
    if (!(t_min > 0.0) || !(t_min < T))
        throw std::invalid_argument("sample: need 0 < t_min < t_end");
    const double dt = (T - t_min) / static_cast<double>(n_steps);
    const std::size_t d = x_init.size();

    SampleRun run;
    run.init = init;
    run.trajectory.times.reserve(static_cast<std::size_t>(n_steps) + 1);
    run.trajectory.states.reserve(static_cast<std::size_t>(n_steps) + 1);
    run.score_norms.reserve(static_cast<std::size_t>(n_steps));
    run.drift_norms.reserve(static_cast<std::size_t>(n_steps));

    Vec x = std::move(x_init);
    Vec dW(d);
    run.trajectory.times.push_back(T);
    run.trajectory.states.push_back(x);
    for (int j = 0; j < n_steps; ++j) {
        const double t = T - dt * static_cast<double>(j);
        const Vec score = score_fn(x, t);
        if (score.size() != d)
            throw std::invalid_argument("sample: score dimension mismatch");
        for (std::size_t c = 0; c < d; ++c) dW[c] = noise_fn(j, c);

        const Vec f = variant_drift(v, x, t);
        const double g = variant_diffusion(v, t);
        double s2 = 0.0, f2 = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            s2 += score[c] * score[c];
            const double rd = f[c] - g * g * score[c];
            f2 += rd * rd;
        }
        run.score_norms.push_back(std::sqrt(s2));
        run.drift_norms.push_back(std::sqrt(f2));

        try {
            x = reverse_step_variant(v, x, t, dt, score, dW);
        } catch (const SimulationError&) {
            throw SimulationError(j, "reverse integration diverged at step " +
                                         std::to_string(j));
        }
        run.trajectory.times.push_back(T - dt * static_cast<double>(j + 1));
        run.trajectory.states.push_back(x);
    }
    run.terminal = run.trajectory.states.back();
    return run;
}

namespace detail {

inline std::uint64_t reverse_key(std::uint64_t seed, std::uint64_t path_index) {
    return rng_chain(rng_chain(seed, stream::reverse), path_index);
}

}  // namespace detail

// Integrates the reverse SDE from t_end down to t_min. Initialization draws
// from the variant's stationary law (from-stationary, the inference-time
// default) or uses the supplied forward terminal state (from-forward).
// Brownian increments come from a dedicated reverse stream keyed on
// (seed, reverse tag, path_index), independent of all forward streams.
inline SampleRun sample(const VariantSpec& v, const ScoreFn& score_fn, int n_steps,
                        InitMode init, std::uint64_t seed, double t_min = 1e-3,
                        std::uint64_t path_index = 0,
                        const Vec* forward_terminal = nullptr) {
    v.validate();
    const std::size_t d = static_cast<std::size_t>(v.params.dim());
    Vec x0T;
    if (init == InitMode::FromForward) {
        if (!forward_terminal)
            throw std::invalid_argument("sample: from-forward needs a terminal state");
        x0T = *forward_terminal;
    } else {
        RngStream init_stream(rng_chain(seed, stream::init), stream::reverse,
                              path_index);
        x0T = sample_marginal(variant_stationary(v), init_stream);
    }
    if (x0T.size() != d) throw std::invalid_argument("sample: init dimension mismatch");

    const double dt = (v.sched.t_end - t_min) / static_cast<double>(n_steps);
    const double sqrt_dt = std::sqrt(dt);
    const std::uint64_t key = detail::reverse_key(seed, path_index);
    auto noise = [key, sqrt_dt](int step, std::size_t coord) {
        return sqrt_dt * normal_scalar(rng_chain(key, static_cast<std::uint64_t>(step)),
                                       static_cast<std::uint64_t>(coord));
    };
    return integrate_reverse(v, score_fn, n_steps, t_min, std::move(x0T), init, noise);
}

//---------------------------------------------------------------------------
// Ensembles.

struct ReverseEnsembleStats {
    std::vector<double> times;               // decreasing, strided checkpoints
    std::vector<Vec> mean;                    // per checkpoint
    std::vector<double> variance;             // pooled per checkpoint
    TerminalEnsemble terminal;
};

// Runs n_paths reverse trajectories and accumulates per-checkpoint moments in
// fixed chunk order (byte-identical for any thread count). Checkpoints are
// every `stride`-th grid time, always including T and t_min.
inline ReverseEnsembleStats reverse_ensemble_stats(
    const VariantSpec& v, const ScoreFn& score_fn, int n_steps, int n_paths,
    std::uint64_t seed, double t_min = 1e-3, int stride = 1, int threads = 1) {
    v.validate();
    if (n_paths <= 0 || n_steps <= 0 || stride <= 0)
        throw std::invalid_argument("reverse ensemble: bad sizes");
    const std::size_t d = static_cast<std::size_t>(v.params.dim());
    const double T = v.sched.t_end;
    const double dt = (T - t_min) / static_cast<double>(n_steps);

    std::vector<int> checkpoint_steps;
    for (int j = 0; j <= n_steps; j += stride) checkpoint_steps.push_back(j);
    if (checkpoint_steps.back() != n_steps) checkpoint_steps.push_back(n_steps);
    const std::size_t n_check = checkpoint_steps.size();

    ReverseEnsembleStats out;
    out.times.resize(n_check);
    for (std::size_t i = 0; i < n_check; ++i)
        out.times[i] = T - dt * static_cast<double>(checkpoint_steps[i]);
    out.terminal.dim = static_cast<int>(d);
    out.terminal.n_paths = n_paths;
    out.terminal.values.assign(static_cast<std::size_t>(n_paths) * d, 0.0);

    const std::size_t n = static_cast<std::size_t>(n_paths);
    const std::size_t n_chunks = (n + kChunkSize - 1) / kChunkSize;
    std::vector<std::vector<RunningMoments>> slots(
        n_chunks, std::vector<RunningMoments>(n_check * d));

    parallel_chunks(n, threads, [&](std::size_t chunk, std::size_t lo, std::size_t hi) {
        auto& mom = slots[chunk];
        for (std::size_t pth = lo; pth < hi; ++pth) {
            const SampleRun run =
                sample(v, score_fn, n_steps, InitMode::FromStationary, seed, t_min,
                       static_cast<std::uint64_t>(pth));
            for (std::size_t i = 0; i < n_check; ++i) {
                const Vec& x = run.trajectory.states[static_cast<std::size_t>(
                    checkpoint_steps[i])];
                for (std::size_t c = 0; c < d; ++c) mom[i * d + c].add(x[c]);
            }
            std::copy(run.terminal.begin(), run.terminal.end(),
                      out.terminal.values.begin() + static_cast<std::ptrdiff_t>(pth * d));
        }
    });

    out.mean.assign(n_check, Vec(d, 0.0));
    out.variance.assign(n_check, 0.0);
    for (std::size_t i = 0; i < n_check; ++i) {
        double pooled = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            RunningMoments agg;
            for (std::size_t chunk = 0; chunk < n_chunks; ++chunk)
                agg.merge(slots[chunk][i * d + c]);
            out.mean[i][c] = agg.mean;
            pooled += agg.variance_unbiased();
        }
        out.variance[i] = pooled / static_cast<double>(d);
    }
    return out;
}

//---------------------------------------------------------------------------
// Variant comparison.

struct CompareRow {
    std::string variant;
    std::uint64_t seed = 0;
    double terminal_mse = 0.0;  // mean over paths of |x_hat - data mean|^2 / d
    double terminal_w2 = 0.0;   // W2 between moment-fitted terminal law and data law
    int steps = 0;
};

struct CurvePoint {
    std::string variant;
    double t = 0.0;
    double mean_dist = 0.0;  // |ensemble mean - data-marginal mean| (L2 over d)
    double var = 0.0;        // pooled ensemble variance
};

struct CompareResult {
    std::vector<CompareRow> rows;      // variant x seed
    std::vector<CurvePoint> curves;    // per-step curves from the first seed
};

struct CompareBudget {
    int n_steps = 1000;
    int n_paths = 2000;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    double t_min = 1e-3;
    int curve_stride = 10;
    int threads = 1;
};

// Shared-budget comparison on single-component (Gaussian or point-mass)
// data. Every variant gets its own exact marginal score; seeds are shared
// across variants so reverse noise is common, making per-seed orderings a
// paired comparison.
inline CompareResult trajectory_compare(const std::vector<VariantSpec>& variants,
                                        const DataSpec& shared_data,
                                        const CompareBudget& budget) {
    shared_data.validate();
    if (shared_data.components.size() != 1)
        throw std::invalid_argument("trajectory_compare: single-component data only");
    if (budget.seeds.empty())
        throw std::invalid_argument("trajectory_compare: need at least one seed");
    const MixtureComponent& comp = shared_data.components.front();
    const std::size_t d = comp.mean.size();

    CompareResult result;
    for (const auto& v : variants) {
        v.validate();
        if (static_cast<std::size_t>(v.params.dim()) != d)
            throw std::invalid_argument("trajectory_compare: dimension mismatch");
        const ScoreFn score = make_variant_gaussian_score(v, comp);
        const std::string name = to_string(v.kind);

        bool first_seed = true;
        for (std::uint64_t seed : budget.seeds) {
            const ReverseEnsembleStats stats = reverse_ensemble_stats(
                v, score, budget.n_steps, budget.n_paths, seed, budget.t_min,
                budget.curve_stride, budget.threads);

            RunningMoments sq_dist;
            for (std::size_t pth = 0; pth < stats.terminal.n_paths; ++pth) {
                const auto x = stats.terminal.path(pth);
                double sq = 0.0;
                for (std::size_t c = 0; c < d; ++c) {
                    const double dv = x[c] - comp.mean[c];
                    sq += dv * dv;
                }
                sq_dist.add(sq / static_cast<double>(d));
            }

            GaussianMarginal fit;
            fit.mean.assign(d, 0.0);
            double pooled = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                RunningMoments m;
                for (std::size_t pth = 0; pth < stats.terminal.n_paths; ++pth)
                    m.add(stats.terminal.path(pth)[c]);
                fit.mean[c] = m.mean;
                pooled += m.variance_unbiased();
            }
            fit.variance = pooled / static_cast<double>(d);

            GaussianMarginal data_law;
            data_law.mean = comp.mean;
            data_law.variance = comp.std * comp.std;

            CompareRow row;
            row.variant = name;
            row.seed = seed;
            row.terminal_mse = sq_dist.mean;
            row.terminal_w2 = gaussian_w2(fit, data_law);
            row.steps = budget.n_steps;
            result.rows.push_back(std::move(row));

            if (first_seed) {
                first_seed = false;
                for (std::size_t i = 0; i < stats.times.size(); ++i) {
                    const GaussianMarginal target =
                        variant_data_marginal(v, comp, stats.times[i]);
                    double sq = 0.0;
                    for (std::size_t c = 0; c < d; ++c) {
                        const double dv = stats.mean[i][c] - target.mean[c];
                        sq += dv * dv;
                    }
                    CurvePoint pt;
                    pt.variant = name;
                    pt.t = stats.times[i];
                    pt.mean_dist = std::sqrt(sq);
                    pt.var = stats.variance[i];
                    result.curves.push_back(std::move(pt));
                }
            }
        }
    }
    return result;
}

}  // namespace d3gm
