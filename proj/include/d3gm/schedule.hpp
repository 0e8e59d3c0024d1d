#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <variant>

// Time-dependent mean-reversion schedules and the volatility couplings that
// go with them. Each schedule kind carries a closed-form running integral
// theta_bar so downstream marginals stay exact instead of quadrature-based.

namespace d3gm {

enum class ScheduleKind { Constant, Linear, Quadratic, Cosine, Log };

inline const char* to_string(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::Constant: return "constant";
        case ScheduleKind::Linear: return "linear";
        case ScheduleKind::Quadratic: return "quadratic";
        case ScheduleKind::Cosine: return "cosine";
        case ScheduleKind::Log: return "log";
    }
    throw std::invalid_argument("unknown schedule kind");
}

inline ScheduleKind schedule_kind_from_string(const std::string& name) {
    if (name == "constant") return ScheduleKind::Constant;
    if (name == "linear") return ScheduleKind::Linear;
    if (name == "quadratic") return ScheduleKind::Quadratic;
    if (name == "cosine") return ScheduleKind::Cosine;
    if (name == "log") return ScheduleKind::Log;
    throw std::invalid_argument("unknown schedule kind: " + name);
}

struct Schedule {
    ScheduleKind kind = ScheduleKind::Constant;
    double theta = 1.0;   // magnitude parameter
    double k = 10.0;      // sharpness, used by the log kind only
    double t_end = 1.0;   // horizon; rates are defined on [0, t_end]

    Schedule() = default;
    Schedule(ScheduleKind kind_, double theta_, double k_ = 10.0,
             double t_end_ = 1.0)
        : kind(kind_), theta(theta_), k(k_), t_end(t_end_) {
        validate();
    }

    void validate() const {
        if (!(theta > 0.0)) throw std::invalid_argument("schedule: theta must be positive");
        if (!(t_end > 0.0)) throw std::invalid_argument("schedule: t_end must be positive");
        if (kind == ScheduleKind::Log && !(k > 0.0))
            throw std::invalid_argument("schedule: k must be positive");
        // The cosine rate theta*(1 - cos(theta t)) returns to zero at
        // theta*t = 2*pi, which would stall mean reversion mid-horizon.
        if (kind == ScheduleKind::Cosine &&
            theta * t_end >= 2.0 * std::numbers::pi)
            throw std::invalid_argument(
                "schedule: cosine requires theta * t_end < 2*pi");
    }
};

namespace detail {
inline void check_time(const Schedule& s, double t) {
    if (!(t >= 0.0) || !(t <= s.t_end))
        throw std::domain_error("schedule: t outside [0, t_end]");
}
}  // namespace detail

// Instantaneous mean-reversion rate theta_t.
inline double theta_at(const Schedule& s, double t) {
    detail::check_time(s, t);
    switch (s.kind) {
        case ScheduleKind::Constant: return s.theta;
        case ScheduleKind::Linear: return s.theta * t;
        case ScheduleKind::Quadratic: return s.theta * t * t;
        case ScheduleKind::Cosine: return s.theta * (1.0 - std::cos(s.theta * t));
        case ScheduleKind::Log:
            // theta * e^{kt} / (1 + e^{kt}), written overflow-safe.
            return s.theta / (1.0 + std::exp(-s.k * t));
    }
    throw std::invalid_argument("unknown schedule kind");
}

// Running integral of the rate over [0, t]. Closed forms per kind:
//   constant  theta*t
//   linear    theta*t^2/2
//   quadratic theta*t^3/3
//   cosine    theta*t - sin(theta*t)
//   log       (theta/k) * ln((1 + e^{kt}) / 2)
inline double theta_bar(const Schedule& s, double t) {
    detail::check_time(s, t);
    switch (s.kind) {
        case ScheduleKind::Constant: return s.theta * t;
        case ScheduleKind::Linear: return 0.5 * s.theta * t * t;
        case ScheduleKind::Quadratic: return s.theta * t * t * t / 3.0;
        case ScheduleKind::Cosine: return s.theta * t - std::sin(s.theta * t);
        case ScheduleKind::Log:
            // (theta/k) * (kt + log1p(e^{-kt}) - ln 2) avoids exp overflow
            // and is exactly 0 at t = 0.
            return (s.theta / s.k) *
                   (s.k * t + std::log1p(std::exp(-s.k * t)) - std::numbers::ln2);
    }
    throw std::invalid_argument("unknown schedule kind");
}

// Volatility tied to the rate so that sigma_t^2 / (2 theta_t) == lambda^2 at
// every t; this is what keeps the stationary law fixed while theta moves.
struct CoupledVolatility {
    double lambda = 1.0;

    explicit CoupledVolatility(double lambda_ = 1.0) : lambda(lambda_) {
        if (!(lambda > 0.0))
            throw std::invalid_argument("volatility: lambda must be positive");
    }
};

// Free-standing volatility, either a constant or a user-supplied curve.
// Breaking the coupling is deliberate: it is the contrast case in which the
// stationary variance drifts away from lambda^2.
struct DecoupledVolatility {
    std::function<double(double)> sigma_fn;

    static DecoupledVolatility constant(double sigma) {
        if (!(sigma > 0.0))
            throw std::invalid_argument("volatility: sigma must be positive");
        return DecoupledVolatility{[sigma](double) { return sigma; }};
    }
};

using Volatility = std::variant<CoupledVolatility, DecoupledVolatility>;

inline double sigma_at(const Volatility& vol, const Schedule& s, double t) {
    if (const auto* c = std::get_if<CoupledVolatility>(&vol))
        return c->lambda * std::sqrt(2.0 * theta_at(s, t));
    const auto& dec = std::get<DecoupledVolatility>(vol);
    detail::check_time(s, t);
    const double sigma = dec.sigma_fn(t);
    if (!(sigma > 0.0))
        throw std::domain_error("volatility: sigma_t must be positive");
    return sigma;
}

}  // namespace d3gm
