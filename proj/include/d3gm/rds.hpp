#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "process.hpp"

// Random-dynamical-systems view of the forward process: the solution flow
// over a shared noise path, the shift operator on noise (base_shift in
// brownian.hpp), cocycle diagnostics, pullback estimates of the attracting
// law, and the Lyapunov operator used to certify contraction.

namespace d3gm {

struct AlignmentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct FlowMap {
    ProcessParams params;
    Schedule sched;
    Volatility vol;

    FlowMap(ProcessParams p, Schedule s, Volatility v)
        : params(std::move(p)), sched(std::move(s)), vol(std::move(v)) {
        params.validate();
    }
};

namespace detail {

// Flows may run from negative start times (pullback); rates are extended to
// all of R by t_end-periodic repetition. On [0, t_end] this is the identity,
// so in-horizon flows agree exactly with the forward simulator.
inline double wrap_time(const Schedule& s, double t) {
    if (t >= 0.0 && t <= s.t_end) return t;
    double r = std::fmod(t, s.t_end);
    if (r < 0.0) r += s.t_end;
    return r;
}

inline std::int64_t grid_index(double t, double dt, const char* what) {
    const double steps = t / dt;
    const double rounded = std::nearbyint(steps);
    if (std::abs(steps - rounded) > 1e-9)
        throw AlignmentError(std::string(what) + ": time not on the dt grid");
    return static_cast<std::int64_t>(rounded);
}

}  // namespace detail

// Solution map phi(t, s; omega) x: integrate the forward dynamics from time s
// to time t using the increments of `omega` over [s, t). Both s and t must be
// grid-aligned with omega's dt.
inline Vec flow(const FlowMap& fm, double t, double s, const BrownianPath& omega,
                const Vec& x) {
    if (static_cast<int>(x.size()) != fm.params.dim() || omega.dim() != fm.params.dim())
        throw std::invalid_argument("flow: dimension mismatch");
    if (t < s) throw std::invalid_argument("flow: requires t >= s");
    const double dt = omega.dt();
    const std::int64_t is = detail::grid_index(s, dt, "flow");
    const std::int64_t it = detail::grid_index(t, dt, "flow");

    Vec out = x;
    for (std::int64_t j = is; j < it; ++j) {
        const double tj = detail::wrap_time(fm.sched, static_cast<double>(j) * dt);
        const double a = theta_at(fm.sched, tj) * dt;
        const double b = fm.params.tau * sigma_at(fm.vol, fm.sched, tj);
        for (std::size_t c = 0; c < out.size(); ++c) {
            out[c] += a * (fm.params.mu[c] - out[c]) +
                      b * omega.increment(j, static_cast<int>(c));
            if (!std::isfinite(out[c])) throw SimulationError(j);
        }
    }
    return out;
}

//---------------------------------------------------------------------------
// Cocycle diagnostics. The cocycle identity
//   phi(t, s; omega) x == phi(t - s, 0; shift_s omega) x
// holds exactly when the coefficients are autonomous (constant rate, coupled
// volatility) and fails once theta depends on t; the report records the
// worst deviation per (s, t) pair so both outcomes are visible.

struct CocyclePair {
    double s = 0.0;
    double t = 0.0;
    double deviation = 0.0;
};

struct CocycleReport {
    std::string schedule;
    double tol = 0.0;
    std::vector<CocyclePair> pairs;
    double max_deviation = 0.0;
    bool holds = false;
};

struct CocycleConfig {
    std::vector<std::pair<double, double>> pairs;  // (s, t) with 0 <= s < t
    double dt = 1e-3;
    std::size_t n_paths = 100;
    std::uint64_t seed = 42;
    double tol = 1e-12;
};

inline CocycleReport check_cocycle(const FlowMap& fm, const Vec& x,
                                   const CocycleConfig& cfg) {
    if (cfg.pairs.empty())
        throw std::invalid_argument("check_cocycle: no (s, t) pairs");
    CocycleReport report;
    report.schedule = to_string(fm.sched.kind);
    report.tol = cfg.tol;

    const std::int64_t horizon =
        detail::grid_index(fm.sched.t_end, cfg.dt, "check_cocycle");
    for (const auto& [s, t] : cfg.pairs) {
        if (!(s >= 0.0) || !(t > s) || t > fm.sched.t_end)
            throw std::invalid_argument("check_cocycle: need 0 <= s < t <= t_end");
        CocyclePair entry{s, t, 0.0};
        for (std::size_t p = 0; p < cfg.n_paths; ++p) {
            // Window of 2*horizon steps: enough for any in-horizon shift.
            BrownianPath omega(cfg.seed, p, fm.params.dim(), cfg.dt, horizon);
            const Vec lhs = flow(fm, t, s, omega, x);
            const Vec rhs = flow(fm, t - s, 0.0, base_shift(omega, s), x);
            double sq = 0.0;
            for (std::size_t c = 0; c < lhs.size(); ++c) {
                const double dv = lhs[c] - rhs[c];
                sq += dv * dv;
            }
            entry.deviation = std::max(entry.deviation, std::sqrt(sq));
        }
        report.max_deviation = std::max(report.max_deviation, entry.deviation);
        report.pairs.push_back(entry);
    }
    report.holds = report.max_deviation <= cfg.tol;
    return report;
}

//---------------------------------------------------------------------------
// Pullback estimate: push a spread of initial states from receding start
// times s < 0 up to time 0 and summarize the empirical law. Under the coupled
// volatility this contracts onto N(mu, tau^2 lambda^2) regardless of where
// the initial set sits.

struct PullbackEstimate {
    std::vector<double> s_values;
    std::vector<GaussianMarginal> law;      // one estimate per start time
    std::vector<bool> window_ok;            // accumulated rate >= threshold?
    double window_threshold = 10.0;
};

namespace detail {

// Integral of the (periodically extended) rate over [s, 0] for s <= 0.
inline double window_theta_bar(const Schedule& sc, double s) {
    if (s >= 0.0) return 0.0;
    const double span = -s;
    const double full = theta_bar(sc, sc.t_end);
    const double periods = std::floor(span / sc.t_end);
    const double rest = span - periods * sc.t_end;
    // The trailing partial window [-rest, 0) maps onto [t_end - rest, t_end).
    return periods * full + (full - theta_bar(sc, sc.t_end - rest));
}

}  // namespace detail

inline PullbackEstimate pullback_attractor_estimate(
    const FlowMap& fm, const std::vector<Vec>& x_set,
    const std::vector<double>& s_values, double dt, std::size_t n_paths,
    std::uint64_t seed) {
    if (x_set.empty()) throw std::invalid_argument("pullback: empty initial set");
    for (const auto& x : x_set)
        if (static_cast<int>(x.size()) != fm.params.dim())
            throw std::invalid_argument("pullback: dimension mismatch");
    PullbackEstimate out;
    const int d = fm.params.dim();
    for (double s : s_values) {
        if (!(s < 0.0))
            throw std::invalid_argument("pullback: start times must be negative");
        const std::int64_t is = detail::grid_index(s, dt, "pullback");
        std::vector<RunningMoments> acc(static_cast<std::size_t>(d));
        for (std::size_t p = 0; p < n_paths; ++p) {
            BrownianPath omega(seed, p, d, dt, -is, is, -is);
            for (const auto& x : x_set) {
                const Vec z = flow(fm, 0.0, s, omega, x);
                for (int c = 0; c < d; ++c)
                    acc[static_cast<std::size_t>(c)].add(z[static_cast<std::size_t>(c)]);
            }
        }
        GaussianMarginal law;
        law.mean.resize(static_cast<std::size_t>(d));
        double pooled = 0.0;
        for (int c = 0; c < d; ++c) {
            law.mean[static_cast<std::size_t>(c)] = acc[static_cast<std::size_t>(c)].mean;
            pooled += acc[static_cast<std::size_t>(c)].variance_unbiased();
        }
        law.variance = pooled / static_cast<double>(d);
        out.s_values.push_back(s);
        out.law.push_back(std::move(law));
        out.window_ok.push_back(detail::window_theta_bar(fm.sched, s) >=
                                out.window_threshold);
    }
    return out;
}

//---------------------------------------------------------------------------
// Lyapunov operator in deviation coordinates z = x - mu:
//   LV(z, t) = z^T Q b(z, t) + b(z, t)^T Q z + sigma(z, t)^T Q sigma(z, t)
// for the quadratic certificate V(z) = z^T Q z.

struct LyapunovSpec {
    std::function<Vec(const Vec&, double)> drift;      // b(z, t)
    std::function<Vec(const Vec&, double)> diffusion;  // per-coordinate sigma(z, t)
    std::vector<Vec> Q;                                // symmetric positive definite
};

namespace detail {
inline Vec mat_vec(const std::vector<Vec>& Q, const Vec& v) {
    Vec out(Q.size(), 0.0);
    for (std::size_t i = 0; i < Q.size(); ++i) {
        if (Q[i].size() != v.size())
            throw std::invalid_argument("lyapunov: Q shape mismatch");
        for (std::size_t j = 0; j < v.size(); ++j) out[i] += Q[i][j] * v[j];
    }
    return out;
}

inline double dot(const Vec& a, const Vec& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}
}  // namespace detail

inline double lyapunov_lv(const LyapunovSpec& spec, const Vec& z, double t) {
    if (spec.Q.size() != z.size())
        throw std::invalid_argument("lyapunov: Q shape mismatch");
    const Vec b = spec.drift(z, t);
    const Vec sig = spec.diffusion(z, t);
    if (b.size() != z.size() || sig.size() != z.size())
        throw std::invalid_argument("lyapunov: drift/diffusion dimension mismatch");
    const Vec Qb = detail::mat_vec(spec.Q, b);
    const Vec Qz = detail::mat_vec(spec.Q, z);
    const Vec Qs = detail::mat_vec(spec.Q, sig);
    return detail::dot(z, Qb) + detail::dot(b, Qz) + detail::dot(sig, Qs);
}

struct NegativityScan {
    bool holds = false;
    double worst_value = 0.0;  // largest LV encountered
    Vec worst_point;
};

// Scans LV over the annulus inner_radius <= |z| <= radius at time t.
// Directions are the coordinate axes plus a deterministic set of random unit
// vectors; `resolution` controls both radii count and extra directions. An
// inner ball must be excluded because additive noise makes LV positive near
// 0; when inner_radius is unset the scan uses radius/100, so callers with a
// wide noise ball (large sigma relative to radius) should pass it explicitly.
inline NegativityScan check_negative_definite(const LyapunovSpec& spec, int d,
                                              double radius, int resolution,
                                              double t, double inner_radius = 0.0,
                                              std::uint64_t seed = 0xd3) {
    if (d <= 0 || resolution < 2 || !(radius > 0.0))
        throw std::invalid_argument("lyapunov: bad scan parameters");
    if (!(inner_radius >= 0.0) || inner_radius >= radius)
        throw std::invalid_argument("lyapunov: inner radius must lie inside radius");
    std::vector<Vec> dirs;
    for (int c = 0; c < d; ++c) {
        Vec e(static_cast<std::size_t>(d), 0.0);
        e[static_cast<std::size_t>(c)] = 1.0;
        dirs.push_back(e);
        e[static_cast<std::size_t>(c)] = -1.0;
        dirs.push_back(e);
    }
    if (d > 1) {
        RngStream stream(seed);
        for (int i = 0; i < 4 * resolution; ++i) {
            Vec v(static_cast<std::size_t>(d));
            double norm = 0.0;
            for (auto& vc : v) {
                vc = stream.normal();
                norm += vc * vc;
            }
            norm = std::sqrt(norm);
            if (norm < 1e-12) continue;
            for (auto& vc : v) vc /= norm;
            dirs.push_back(std::move(v));
        }
    }

    const double eps = inner_radius > 0.0 ? inner_radius : radius / 100.0;
    NegativityScan scan;
    scan.holds = true;
    bool first = true;
    for (int ri = 0; ri < resolution; ++ri) {
        const double r =
            eps + (radius - eps) * static_cast<double>(ri) /
                      static_cast<double>(resolution - 1);
        for (const auto& dir : dirs) {
            Vec z(static_cast<std::size_t>(d));
            for (int c = 0; c < d; ++c)
                z[static_cast<std::size_t>(c)] = r * dir[static_cast<std::size_t>(c)];
            const double lv = lyapunov_lv(spec, z, t);
            if (first || lv > scan.worst_value) {
                scan.worst_value = lv;
                scan.worst_point = z;
                first = false;
            }
            if (!(lv < 0.0)) scan.holds = false;
        }
    }
    return scan;
}

// Convenience: the forward process in deviation coordinates.
inline LyapunovSpec process_lyapunov_spec(const ProcessParams& p, const Schedule& s,
                                          const Volatility& vol) {
    LyapunovSpec spec;
    spec.drift = [s](const Vec& z, double t) {
        const double th = theta_at(s, detail::wrap_time(s, t));
        Vec b(z.size());
        for (std::size_t c = 0; c < z.size(); ++c) b[c] = -th * z[c];
        return b;
    };
    spec.diffusion = [p, s, vol](const Vec& z, double t) {
        const double sg = p.tau * sigma_at(vol, s, detail::wrap_time(s, t));
        return Vec(z.size(), sg);
    };
    const std::size_t d = static_cast<std::size_t>(p.dim());
    spec.Q.assign(d, Vec(d, 0.0));
    for (std::size_t i = 0; i < d; ++i) spec.Q[i][i] = 1.0;
    return spec;
}

}  // namespace d3gm
