#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "brownian.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "schedule.hpp"

// The mean-reverting forward process
//   dx_t = theta_t (mu - x_t) dt + tau sigma_t dW_t
// with isotropic coordinates, its Euler-Maruyama discretization, and the
// closed-form Gaussian marginals available under the coupled volatility.

namespace d3gm {

using Vec = std::vector<double>;

struct ProcessParams {
    Vec mu;              // drift target, one entry per coordinate
    double lambda = 1.0; // stationary scale (coupled volatility)
    double tau = 1.0;    // stiffening factor, >= 1

    int dim() const { return static_cast<int>(mu.size()); }

    void validate() const {
        if (mu.empty()) throw std::invalid_argument("process: mu must be non-empty");
        for (double m : mu)
            if (!std::isfinite(m)) throw std::invalid_argument("process: mu must be finite");
        if (!(lambda > 0.0)) throw std::invalid_argument("process: lambda must be positive");
        if (!(tau >= 1.0)) throw std::invalid_argument("process: tau must be >= 1");
    }
};

// Isotropic Gaussian: one variance shared by all coordinates.
struct GaussianMarginal {
    Vec mean;
    double variance = 0.0;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
};

struct SimulationError : std::runtime_error {
    std::int64_t step;
    explicit SimulationError(std::int64_t step_)
        : std::runtime_error("simulation diverged at step " + std::to_string(step_)),
          step(step_) {}
    SimulationError(std::int64_t step_, const std::string& what_)
        : std::runtime_error(what_), step(step_) {}
};

namespace detail {
inline void check_state(const Vec& x, const char* what) {
    for (double v : x)
        if (!std::isfinite(v)) throw std::domain_error(std::string(what) + ": non-finite input");
}
}  // namespace detail

// One Euler-Maruyama step from state x at time t:
//   x + theta_t (mu - x) dt + tau sigma_t dW.
inline Vec em_step(const Vec& x, double t, double dt, const ProcessParams& p,
                   const Schedule& s, const Vec& dW,
                   const Volatility& vol) {
    if (x.size() != p.mu.size() || dW.size() != x.size())
        throw std::invalid_argument("em_step: dimension mismatch");
    if (!(dt > 0.0)) throw std::invalid_argument("em_step: dt must be positive");
    if (!(p.tau >= 1.0) || !(p.lambda > 0.0))
        throw std::invalid_argument("em_step: invalid process parameters");
    detail::check_state(x, "em_step");
    detail::check_state(dW, "em_step");
    const double a = theta_at(s, t) * dt;
    const double b = p.tau * sigma_at(vol, s, t);
    Vec out(x.size());
    for (std::size_t c = 0; c < x.size(); ++c)
        out[c] = x[c] + a * (p.mu[c] - x[c]) + b * dW[c];
    return out;
}

inline Vec em_step(const Vec& x, double t, double dt, const ProcessParams& p,
                   const Schedule& s, const Vec& dW) {
    return em_step(x, t, dt, p, s, dW, Volatility{CoupledVolatility{p.lambda}});
}

// Integrates the full grid of `path` starting from x0 at time 0. The grid
// must not extend past the schedule horizon. States are checked each step;
// a non-finite coordinate aborts with the offending step index.
inline Trajectory simulate_forward(const Vec& x0, const ProcessParams& p,
                                   const Schedule& s, const BrownianPath& path,
                                   const Volatility& vol) {
    p.validate();
    if (static_cast<int>(x0.size()) != p.dim() || path.dim() != p.dim())
        throw std::invalid_argument("simulate_forward: dimension mismatch");
    detail::check_state(x0, "simulate_forward");
    const std::int64_t n = path.n_steps();
    const double dt = path.dt();
    if (static_cast<double>(n) * dt > s.t_end * (1.0 + 1e-12))
        throw std::invalid_argument("simulate_forward: grid exceeds schedule horizon");

    Trajectory out;
    out.times.reserve(static_cast<std::size_t>(n) + 1);
    out.states.reserve(static_cast<std::size_t>(n) + 1);
    out.times.push_back(0.0);
    out.states.push_back(x0);

    Vec x = x0;
    for (std::int64_t j = 0; j < n; ++j) {
        const double t = static_cast<double>(j) * dt;
        const double a = theta_at(s, t) * dt;
        const double b = p.tau * sigma_at(vol, s, t);
        for (std::size_t c = 0; c < x.size(); ++c) {
            x[c] += a * (p.mu[c] - x[c]) + b * path.increment(j, static_cast<int>(c));
            if (!std::isfinite(x[c])) throw SimulationError(j);
        }
        out.times.push_back(static_cast<double>(j + 1) * dt);
        out.states.push_back(x);
    }
    return out;
}

inline Trajectory simulate_forward(const Vec& x0, const ProcessParams& p,
                                   const Schedule& s, const BrownianPath& path) {
    return simulate_forward(x0, p, s, path, Volatility{CoupledVolatility{p.lambda}});
}

// Exact law of x_t given x_0 under the coupled volatility:
//   mean     mu + (x0 - mu) e^{-theta_bar(t)}
//   variance tau^2 lambda^2 (1 - e^{-2 theta_bar(t)})
inline GaussianMarginal marginal(const Vec& x0, double t,
                                 const ProcessParams& p, const Schedule& s) {
    p.validate();
    if (static_cast<int>(x0.size()) != p.dim())
        throw std::invalid_argument("marginal: dimension mismatch");
    const double decay = std::exp(-theta_bar(s, t));
    GaussianMarginal m;
    m.mean.resize(x0.size());
    for (std::size_t c = 0; c < x0.size(); ++c)
        m.mean[c] = p.mu[c] + (x0[c] - p.mu[c]) * decay;
    m.variance = p.tau * p.tau * p.lambda * p.lambda * (1.0 - decay * decay);
    return m;
}

inline GaussianMarginal stationary_law(const ProcessParams& p) {
    p.validate();
    return GaussianMarginal{p.mu, p.tau * p.tau * p.lambda * p.lambda};
}

inline Vec sample_marginal(const GaussianMarginal& m, RngStream& stream) {
    if (!(m.variance >= 0.0))
        throw std::domain_error("sample_marginal: negative variance");
    const double sd = std::sqrt(m.variance);
    Vec out(m.mean.size());
    for (std::size_t c = 0; c < out.size(); ++c)
        out[c] = m.mean[c] + sd * stream.normal();
    return out;
}

//---------------------------------------------------------------------------
// Ensemble machinery. Paths are independent by construction (counter-based
// noise keyed by path index), so ensembles are chunked for threading and all
// reductions fold chunk slots in index order; see parallel.hpp for why that
// keeps outputs independent of the thread count.

// Terminal states of n_paths forward runs, flattened path-major.
struct TerminalEnsemble {
    int dim = 1;
    std::size_t n_paths = 0;
    std::vector<double> values;  // n_paths * dim

    const double* path(std::size_t p) const {
        return values.data() + p * static_cast<std::size_t>(dim);
    }
};

struct EnsembleConfig {
    std::int64_t n_steps = 100;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 42;
    unsigned threads = 1;  // 0 = hardware concurrency
};

namespace detail {

// Per-step coefficients are path-independent; hoist them out of the path loop.
struct StepCoeffs {
    std::vector<double> drift;  // theta_j * dt
    std::vector<double> noise;  // tau * sigma_j  (increments already carry sqrt(dt))
};

inline StepCoeffs step_coeffs(const ProcessParams& p, const Schedule& s,
                              const Volatility& vol, std::int64_t n_steps,
                              double dt) {
    StepCoeffs c;
    c.drift.resize(static_cast<std::size_t>(n_steps));
    c.noise.resize(static_cast<std::size_t>(n_steps));
    for (std::int64_t j = 0; j < n_steps; ++j) {
        const double t = static_cast<double>(j) * dt;
        c.drift[static_cast<std::size_t>(j)] = theta_at(s, t) * dt;
        c.noise[static_cast<std::size_t>(j)] = p.tau * sigma_at(vol, s, t);
    }
    return c;
}

}  // namespace detail

inline TerminalEnsemble forward_terminal_ensemble(
    const Vec& x0, const ProcessParams& p, const Schedule& s,
    const Volatility& vol, const EnsembleConfig& cfg) {
    p.validate();
    const int d = p.dim();
    if (static_cast<int>(x0.size()) != d)
        throw std::invalid_argument("ensemble: dimension mismatch");
    const double dt = s.t_end / static_cast<double>(cfg.n_steps);
    const auto coeffs = detail::step_coeffs(p, s, vol, cfg.n_steps, dt);

    TerminalEnsemble out;
    out.dim = d;
    out.n_paths = cfg.n_paths;
    out.values.assign(cfg.n_paths * static_cast<std::size_t>(d), 0.0);

    parallel_chunks(cfg.n_paths, cfg.threads, [&](std::size_t, std::size_t lo,
                                                  std::size_t hi) {
        Vec x(static_cast<std::size_t>(d));
        for (std::size_t pidx = lo; pidx < hi; ++pidx) {
            BrownianPath path(cfg.seed, pidx, d, dt, cfg.n_steps);
            x.assign(x0.begin(), x0.end());
            for (std::int64_t j = 0; j < cfg.n_steps; ++j) {
                const double a = coeffs.drift[static_cast<std::size_t>(j)];
                const double b = coeffs.noise[static_cast<std::size_t>(j)];
                for (int c = 0; c < d; ++c) {
                    auto& xc = x[static_cast<std::size_t>(c)];
                    xc += a * (p.mu[static_cast<std::size_t>(c)] - xc) +
                          b * path.increment(j, c);
                    if (!std::isfinite(xc)) throw SimulationError(j);
                }
            }
            for (int c = 0; c < d; ++c)
                out.values[pidx * static_cast<std::size_t>(d) +
                           static_cast<std::size_t>(c)] = x[static_cast<std::size_t>(c)];
        }
    });
    return out;
}

// Per-coordinate mean plus pooled (coordinate-averaged) unbiased variance.
struct MomentSummary {
    Vec mean;
    double variance = 0.0;
    std::size_t count = 0;
};

inline MomentSummary summarize(const TerminalEnsemble& e) {
    const int d = e.dim;
    std::vector<RunningMoments> acc(static_cast<std::size_t>(d));
    for (std::size_t p = 0; p < e.n_paths; ++p)
        for (int c = 0; c < d; ++c)
            acc[static_cast<std::size_t>(c)].add(e.path(p)[c]);
    MomentSummary s;
    s.mean.resize(static_cast<std::size_t>(d));
    double pooled = 0.0;
    for (int c = 0; c < d; ++c) {
        s.mean[static_cast<std::size_t>(c)] = acc[static_cast<std::size_t>(c)].mean;
        pooled += acc[static_cast<std::size_t>(c)].variance_unbiased();
    }
    s.variance = pooled / static_cast<double>(d);
    s.count = e.n_paths;
    return s;
}

// Mean/variance of the ensemble at every grid time, reduced chunk-by-chunk
// in fixed order (thread-count independent).
struct EnsembleStats {
    std::vector<double> times;
    std::vector<Vec> mean;            // per time, per coordinate
    std::vector<double> variance;     // per time, pooled over coordinates
    std::size_t n_paths = 0;
};

inline EnsembleStats forward_ensemble_stats(const Vec& x0, const ProcessParams& p,
                                            const Schedule& s, const Volatility& vol,
                                            const EnsembleConfig& cfg) {
    p.validate();
    const int d = p.dim();
    if (static_cast<int>(x0.size()) != d)
        throw std::invalid_argument("ensemble: dimension mismatch");
    const double dt = s.t_end / static_cast<double>(cfg.n_steps);
    const auto coeffs = detail::step_coeffs(p, s, vol, cfg.n_steps, dt);
    const std::size_t n_times = static_cast<std::size_t>(cfg.n_steps) + 1;
    const std::size_t n_chunks = (cfg.n_paths + kChunkSize - 1) / kChunkSize;

    // chunk -> time -> coordinate
    std::vector<std::vector<RunningMoments>> slots(
        n_chunks, std::vector<RunningMoments>(n_times * static_cast<std::size_t>(d)));

    parallel_chunks(cfg.n_paths, cfg.threads, [&](std::size_t chunk, std::size_t lo,
                                                  std::size_t hi) {
        auto& slot = slots[chunk];
        Vec x(static_cast<std::size_t>(d));
        for (std::size_t pidx = lo; pidx < hi; ++pidx) {
            BrownianPath path(cfg.seed, pidx, d, dt, cfg.n_steps);
            x.assign(x0.begin(), x0.end());
            for (int c = 0; c < d; ++c)
                slot[static_cast<std::size_t>(c)].add(x[static_cast<std::size_t>(c)]);
            for (std::int64_t j = 0; j < cfg.n_steps; ++j) {
                const double a = coeffs.drift[static_cast<std::size_t>(j)];
                const double b = coeffs.noise[static_cast<std::size_t>(j)];
                for (int c = 0; c < d; ++c) {
                    auto& xc = x[static_cast<std::size_t>(c)];
                    xc += a * (p.mu[static_cast<std::size_t>(c)] - xc) +
                          b * path.increment(j, c);
                    if (!std::isfinite(xc)) throw SimulationError(j);
                    slot[static_cast<std::size_t>(j + 1) * static_cast<std::size_t>(d) +
                         static_cast<std::size_t>(c)]
                        .add(xc);
                }
            }
        }
    });

    std::vector<RunningMoments> total(n_times * static_cast<std::size_t>(d));
    for (std::size_t chunk = 0; chunk < n_chunks; ++chunk)
        for (std::size_t i = 0; i < total.size(); ++i)
            total[i].merge(slots[chunk][i]);

    EnsembleStats stats;
    stats.n_paths = cfg.n_paths;
    stats.times.resize(n_times);
    stats.mean.assign(n_times, Vec(static_cast<std::size_t>(d)));
    stats.variance.assign(n_times, 0.0);
    for (std::size_t ti = 0; ti < n_times; ++ti) {
        stats.times[ti] = static_cast<double>(ti) * dt;
        double pooled = 0.0;
        for (int c = 0; c < d; ++c) {
            const auto& m = total[ti * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)];
            stats.mean[ti][static_cast<std::size_t>(c)] = m.mean;
            pooled += m.variance_unbiased();
        }
        stats.variance[ti] = pooled / static_cast<double>(d);
    }
    return stats;
}

}  // namespace d3gm
