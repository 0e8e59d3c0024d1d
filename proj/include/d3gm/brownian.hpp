#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rng.hpp"

namespace d3gm {

// One driving Brownian path on a uniform grid. Increment i spans
// [i*dt, (i+1)*dt) and is a pure function of (seed, path_index, i, coord),
// so the same path can be regenerated bit-identically anywhere and the time
// shift below is just index arithmetic. Step indices are signed: pullback
// constructions integrate from negative start times on the same noise.
//
// Paths cover a finite window of steps. By default the window is twice the
// requested horizon so that shifted paths (see base_shift) still have a full
// horizon of increments ahead of them.
class BrownianPath {
public:
    BrownianPath(std::uint64_t seed, std::uint64_t path_index, int dim,
                 double dt, std::int64_t n_steps,
                 std::int64_t first_step = 0, std::int64_t window_steps = -1)
        : seed_(seed),
          path_index_(path_index),
          key_(rng_chain(rng_chain(seed, stream::forward), path_index)),
          dim_(dim),
          dt_(dt),
          n_steps_(n_steps),
          first_step_(first_step),
          window_steps_(window_steps < 0 ? 2 * n_steps : window_steps) {
        if (dim <= 0) throw std::invalid_argument("brownian: dim must be positive");
        if (!(dt > 0.0)) throw std::invalid_argument("brownian: dt must be positive");
        if (n_steps <= 0) throw std::invalid_argument("brownian: n_steps must be positive");
        if (window_steps_ < n_steps_)
            throw std::invalid_argument("brownian: window smaller than horizon");
        sqrt_dt_ = std::sqrt(dt);
    }

    int dim() const { return dim_; }
    double dt() const { return dt_; }
    std::int64_t n_steps() const { return n_steps_; }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t path_index() const { return path_index_; }
    std::int64_t shift_steps() const { return shift_steps_; }

    // N(0, dt) increment for global step index `step`, coordinate `coord`.
    double increment(std::int64_t step, int coord) const {
        const std::int64_t base = step + shift_steps_;
        if (base < first_step_ || base >= first_step_ + window_steps_)
            throw std::range_error("brownian: step outside generated window");
        const std::uint64_t step_key =
            rng_chain(key_, static_cast<std::uint64_t>(base));
        return sqrt_dt_ *
               normal_scalar(step_key, static_cast<std::uint64_t>(coord));
    }

    std::vector<double> increment_vec(std::int64_t step) const {
        std::vector<double> out(static_cast<std::size_t>(dim_));
        for (int c = 0; c < dim_; ++c) out[static_cast<std::size_t>(c)] = increment(step, c);
        return out;
    }

    // W(t) - W(0) by summation of increments; t must sit on the grid.
    std::vector<double> cumulative(std::int64_t upto_step) const {
        std::vector<double> acc(static_cast<std::size_t>(dim_), 0.0);
        for (std::int64_t i = 0; i < upto_step; ++i)
            for (int c = 0; c < dim_; ++c)
                acc[static_cast<std::size_t>(c)] += increment(i, c);
        return acc;
    }

private:
    std::uint64_t seed_;
    std::uint64_t path_index_;
    std::uint64_t key_;
    int dim_;
    double dt_;
    double sqrt_dt_;
    std::int64_t n_steps_;
    std::int64_t first_step_;
    std::int64_t window_steps_;
    std::int64_t shift_steps_ = 0;

    friend BrownianPath base_shift(const BrownianPath& path, double s);
};

// The measure-preserving time shift on noise:
//   (shifted path) increment i == (original path) increment i + s/dt,
// i.e. W(t, shifted) = W(t + s) - W(s). Shifts compose additively. The shift
// must be grid-aligned, and the shifted view still bounds-checks against the
// original window, so shifting past the generated headroom raises.
inline BrownianPath base_shift(const BrownianPath& path, double s) {
    const double steps = s / path.dt_;
    const double rounded = std::nearbyint(steps);
    if (std::abs(steps - rounded) > 1e-9)
        throw std::invalid_argument("base_shift: s is not grid-aligned");
    BrownianPath out = path;
    out.shift_steps_ += static_cast<std::int64_t>(rounded);
    return out;
}

}  // namespace d3gm
