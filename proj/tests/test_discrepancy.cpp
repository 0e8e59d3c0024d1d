#include "test_util.hpp"

#include <cmath>
#include <vector>

#include "d3gm/discrepancy.hpp"
#include "oracles.hpp"

using namespace d3gm;

namespace {
ProcessParams make_params(double mu, double lambda, double tau, int d = 1) {
    ProcessParams p;
    p.mu.assign(static_cast<std::size_t>(d), mu);
    p.lambda = lambda;
    p.tau = tau;
    return p;
}
}  // namespace

//---------------------------------------------------------------------------
// Chi-square tail radius.

TEST_CASE("tail radius at the pinned point") {
    const double expected = 1.0 + 2.0 * std::sqrt(std::log(20.0)) + 2.0 * std::log(20.0);
    CHECK_REL(chi_square_tail_term(1, 0.05), expected, 1e-14);
    CHECK_CLOSE(chi_square_tail_term(1, 0.05), 10.453, 1e-3);
}

TEST_CASE("tail radius collapses to d as delta approaches one") {
    CHECK_CLOSE(chi_square_tail_term(3, 1.0 - 1e-12), 3.0, 1e-5);
}

TEST_CASE("tail radius grows with dimension") {
    double prev = chi_square_tail_term(1, 0.1);
    for (int d = 2; d <= 10; ++d) {
        const double cur = chi_square_tail_term(d, 0.1);
        REQUIRE(cur > prev);
        prev = cur;
    }
}

TEST_CASE("tail radius rejects bad arguments") {
    REQUIRE_THROWS_AS(chi_square_tail_term(0, 0.1), std::domain_error);
    REQUIRE_THROWS_AS(chi_square_tail_term(1, 0.0), std::domain_error);
    REQUIRE_THROWS_AS(chi_square_tail_term(1, 1.0), std::domain_error);
}

//---------------------------------------------------------------------------
// Terminal-discrepancy lower bound.

TEST_CASE("lower bound at the pinned configuration") {
    const TddInputs in({2.0}, make_params(0.0, 1.0, 1.0),
                       Schedule(ScheduleKind::Constant, 1.0), 1.0, 0.05, 1.0,
                       std::sqrt(2.0));
    const TddReport r = tdd_lower_bound(in);
    // Independent arithmetic: |3 e^{-2} + 1 - 2 (2 + chi)|.
    const double chi = 1.0 + 2.0 * std::sqrt(std::log(20.0)) + 2.0 * std::log(20.0);
    const double expected = std::abs(3.0 * std::exp(-2.0) + 1.0 - 2.0 * (2.0 + chi));
    CHECK_REL(r.bound, expected, 1e-12);
    CHECK_CLOSE(r.bound, 23.5, 0.01);
    CHECK_REL(r.term_stationary, 1.0, 1e-12);
    CHECK_REL(r.term_residual, 3.0 * std::exp(-2.0), 1e-12);
    REQUIRE(r.delta == 0.05);
    REQUIRE_FALSE(r.empirical_lhs.has_value());
}

TEST_CASE("residual term vanishes for deep accumulated rates") {
    const TddInputs in({3.0}, make_params(0.0, 0.7, 2.0),
                       Schedule(ScheduleKind::Constant, 30.0), 1.0, 0.05, 0.5);
    const TddReport r = tdd_lower_bound(in);
    REQUIRE(std::abs(r.term_residual) < 1e-20);
    CHECK_REL(r.term_stationary, 4.0 * 0.49, 1e-12);
    CHECK_REL(r.bound, std::abs(r.term_stationary - r.term_noise), 1e-12);
}

TEST_CASE("starting on the attractor leaves only the negated stationary residual") {
    const TddInputs in({0.0}, make_params(0.0, 0.5, 2.0),
                       Schedule(ScheduleKind::Constant, 1.0), 1.0, 0.05, 1.0);
    const TddReport r = tdd_lower_bound(in);
    // dist^2 = 0, so the residual is -tau^2 lambda^2 e^{-2 theta_bar}.
    CHECK_REL(r.term_residual, -1.0 * std::exp(-2.0), 1e-12);
}

TEST_CASE("residual magnitude decays as the horizon grows") {
    double prev = 1e300;
    for (double T : {0.4, 0.6, 0.8, 1.0}) {
        const TddInputs in({2.0}, make_params(0.0, 1.0, 1.0),
                           Schedule(ScheduleKind::Cosine, 3.0), T, 0.05, 1.0);
        const double cur = std::abs(tdd_lower_bound(in).term_residual);
        REQUIRE(cur < prev);
        prev = cur;
    }
}

TEST_CASE("bound inputs are validated") {
    const ProcessParams p = make_params(0.0, 1.0, 1.0);
    const Schedule s(ScheduleKind::Constant, 1.0);
    REQUIRE_THROWS_AS(TddInputs({2.0}, p, s, 0.0, 0.05, 1.0), std::domain_error);
    REQUIRE_THROWS_AS(TddInputs({2.0}, p, s, 2.0, 0.05, 1.0), std::domain_error);
    REQUIRE_THROWS_AS(TddInputs({2.0}, p, s, 1.0, 1.5, 1.0), std::domain_error);
    // sigma_max below the diffusion sup.
    REQUIRE_THROWS_AS(TddInputs({2.0}, p, s, 1.0, 0.05, 1.0, 0.5),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(TddInputs({2.0, 1.0}, p, s, 1.0, 0.05, 1.0),
                      std::invalid_argument);
}

TEST_CASE("forward runs clear the bound at the advertised rate") {
    struct KindCfg {
        ScheduleKind kind;
        double theta;
    };
    // Cosine stays at a moderate rate: its instantaneous peak 2*theta enters
    // sigma_max and a large peak pushes the noise term past the residual.
    const KindCfg cfgs[] = {{ScheduleKind::Constant, 1.0},
                            {ScheduleKind::Linear, 2.0},
                            {ScheduleKind::Quadratic, 3.0},
                            {ScheduleKind::Cosine, 2.0},
                            {ScheduleKind::Log, 1.0}};
    for (const KindCfg& kc : cfgs) {
        for (double delta : {0.05, 0.2}) {
            // Small lambda keeps the inner expression positive, so the bound
            // is meaningful rather than vacuously inverted.
            const TddInputs in({2.0}, make_params(0.0, 0.01, 2.0),
                               Schedule(kc.kind, kc.theta, 10.0, 1.0), 1.0,
                               delta, 1.0);
            const std::size_t n_runs = 500;
            const TddReport r = validate_tdd(in, n_runs, 400, 2024);
            REQUIRE(r.term_residual + r.term_stationary - r.term_noise > 0.0);
            const double mc_err =
                std::sqrt(delta * (1.0 - delta) / static_cast<double>(n_runs));
            INFO(to_string(kc.kind) << " delta " << delta << " exceed "
                                    << *r.exceed_fraction);
            REQUIRE(*r.exceed_fraction >= (1.0 - delta) - 2.0 * mc_err);
            REQUIRE(*r.empirical_lhs >= r.bound);
        }
    }
}

//---------------------------------------------------------------------------
// Empirical forward gaps.

TEST_CASE("gaps vanish for a deep accumulated rate") {
    const ProcessParams p = make_params(0.0, 1.0, 1.0);
    const Schedule s(ScheduleKind::Constant, 50.0);
    EnsembleConfig cfg;
    cfg.n_steps = 500;
    cfg.n_paths = 10000;
    const ForwardGap gap = empirical_forward_gap({2.0}, p, s, cfg);
    REQUIRE(gap.mean_gap[0] < 0.04);
    REQUIRE(gap.var_gap < 0.09);
}

TEST_CASE("mean gap matches the closed-form residual") {
    const ProcessParams p = make_params(0.0, 1.0, 1.0);
    const Schedule s(ScheduleKind::Constant, 1.0);
    EnsembleConfig cfg;
    cfg.n_steps = 200;
    cfg.n_paths = 20000;
    const ForwardGap gap = empirical_forward_gap({2.0}, p, s, cfg);
    const double se = 0.93 / std::sqrt(static_cast<double>(cfg.n_paths));
    CHECK_CLOSE(gap.mean_gap[0], 0.7358, 4.0 * se + 0.003);
}

TEST_CASE("the stiffening factor does not move the mean gap") {
    const Schedule s(ScheduleKind::Constant, 1.0);
    EnsembleConfig cfg;
    cfg.n_steps = 200;
    cfg.n_paths = 20000;
    const double target = 2.0 * std::exp(-1.0);
    for (double tau : {1.0, 2.0}) {
        const ProcessParams p = make_params(0.0, 1.0, tau);
        const ForwardGap gap = empirical_forward_gap({2.0}, p, s, cfg);
        const double sd = tau * std::sqrt(0.86466);
        CHECK_CLOSE(gap.mean_gap[0], target,
                    4.0 * sd / std::sqrt(static_cast<double>(cfg.n_paths)) + 0.003);
    }
}

TEST_CASE("gaps match closed forms for every rate shape") {
    const ScheduleKind kinds[] = {ScheduleKind::Constant, ScheduleKind::Linear,
                                  ScheduleKind::Quadratic, ScheduleKind::Cosine,
                                  ScheduleKind::Log};
    for (ScheduleKind kind : kinds) {
        const double theta = kind == ScheduleKind::Cosine ? 2.0 : 1.2;
        const Schedule s(kind, theta, 10.0, 1.0);
        const ProcessParams p = make_params(-1.0, 0.8, 2.0);
        const Vec x0 = {2.0};
        EnsembleConfig cfg;
        cfg.n_steps = 200;
        cfg.n_paths = 30000;
        const ForwardGap gap = empirical_forward_gap(x0, p, s, cfg);

        const double tb = theta_bar(s, 1.0);
        const double mean_ref = std::abs(x0[0] - p.mu[0]) * std::exp(-tb);
        const double var_total = p.tau * p.tau * p.lambda * p.lambda;
        const double var_ref = var_total * std::exp(-2.0 * tb);
        const double sd = std::sqrt(var_total * (1.0 - std::exp(-2.0 * tb)));
        INFO(to_string(kind));
        CHECK_CLOSE(gap.mean_gap[0], mean_ref,
                    4.0 * sd / std::sqrt(static_cast<double>(cfg.n_paths)) +
                        0.01 * sd);
        CHECK_CLOSE(gap.var_gap, var_ref,
                    4.0 * var_total * std::sqrt(2.0 / cfg.n_paths) +
                        0.01 * var_total);
    }
}

//---------------------------------------------------------------------------
// Gaussian divergences.

TEST_CASE("kl of identical laws is zero") {
    const GaussianMarginal a{{1.0, -2.0}, 3.0};
    CHECK_CLOSE(gaussian_kl(a, a), 0.0, 1e-14);
}

TEST_CASE("kl at the pinned configuration") {
    const GaussianMarginal a{{0.0}, 1.0};
    const GaussianMarginal b{{0.0}, std::exp(1.0)};
    CHECK_REL(gaussian_kl(a, b), 0.5 / std::exp(1.0), 1e-12);
    CHECK_CLOSE(gaussian_kl(a, b), 0.1839, 1e-4);
}

TEST_CASE("kl to stationarity strictly decreases in the stiffening factor") {
    const Schedule s(ScheduleKind::Constant, 1.0);
    const Vec x0 = {2.0};
    double prev = 1e300;
    for (double tau : {1.0, 2.0, 4.0}) {
        const ProcessParams p = make_params(0.0, 1.0, tau);
        const double kl = gaussian_kl(marginal(x0, 1.0, p, s), stationary_law(p));
        REQUIRE(kl < prev);
        prev = kl;
    }
}

TEST_CASE("kl validation and degenerate inputs") {
    const GaussianMarginal a{{0.0}, 1.0};
    const GaussianMarginal zero_var{{0.0}, 0.0};
    const GaussianMarginal wrong_d{{0.0, 1.0}, 1.0};
    REQUIRE_THROWS_AS(gaussian_kl(a, zero_var), std::domain_error);
    REQUIRE_THROWS_AS(gaussian_kl(a, wrong_d), std::invalid_argument);
    REQUIRE(std::isinf(gaussian_kl(zero_var, a)));
}

TEST_CASE("w2 distance has its closed-form special cases") {
    const GaussianMarginal a{{1.0, 2.0}, 4.0};
    const GaussianMarginal b{{1.0, 2.0}, 9.0};
    CHECK_REL(gaussian_w2(a, b), std::sqrt(2.0), 1e-12);  // |2-3| sqrt(d)
    const GaussianMarginal c{{4.0, 6.0}, 4.0};
    CHECK_REL(gaussian_w2(a, c), 5.0, 1e-12);  // pure translation 3-4-5
    CHECK_CLOSE(gaussian_w2(a, a), 0.0, 1e-14);
}

//---------------------------------------------------------------------------
// Initial coefficient magnitude.

TEST_CASE("initial magnitude at the pinned configuration") {
    const ProcessParams p = make_params(0.0, 1.0, 1.0);
    const Schedule s(ScheduleKind::Constant, 1.0);
    CHECK_REL(initial_magnitude({2.0}, p, s, 1.0), 6.0, 1e-12);
}

TEST_CASE("initial magnitude vanishes on the attractor with tiny noise") {
    const ProcessParams p = make_params(1.0, 1e-8, 1.0);
    const Schedule s(ScheduleKind::Constant, 1.0);
    CHECK_CLOSE(initial_magnitude({1.0}, p, s, 1.0), 0.0, 1e-12);
}

TEST_CASE("doubling lambda quadruples the diffusion share") {
    const Schedule s(ScheduleKind::Linear, 2.0);
    const Vec x0 = {3.0};
    const double base = 9.0 * theta_bar(s, 1.0) * theta_bar(s, 1.0);
    const double d1 = initial_magnitude(x0, make_params(0.0, 0.7, 2.0), s, 1.0) - base;
    const double d2 = initial_magnitude(x0, make_params(0.0, 1.4, 2.0), s, 1.0) - base;
    CHECK_REL(d2, 4.0 * d1, 1e-12);
}

TEST_CASE("default score bound follows the tail radius") {
    const GaussianMarginal at_T{{0.0}, 1.0};
    const double chi = chi_square_tail_term(1, 1e-3);
    CHECK_REL(default_score_bound(1, at_T), std::sqrt(chi), 1e-12);
    const GaussianMarginal wide{{0.0}, 4.0};
    CHECK_REL(default_score_bound(1, wide), 0.5 * std::sqrt(chi), 1e-12);
    REQUIRE_THROWS_AS(default_score_bound(1, GaussianMarginal{{0.0}, 0.0}),
                      std::domain_error);
}
