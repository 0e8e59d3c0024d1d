// Acceptance gate: one check per release criterion, each printing a single
// PASS/FAIL line. Exits nonzero if any criterion fails. Budgets are sized for
// a single laptop-class core.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <d3gm.hpp>

using namespace d3gm;
namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.8g", v);
    return buf;
}

struct Checker {
    std::vector<std::string> errors;
    void expect(bool ok, const std::string& msg) {
        if (!ok) errors.push_back(msg);
    }
};

int g_index = 0;
int g_failures = 0;

void criterion(const std::string& name, const std::function<void(Checker&)>& body,
               double time_limit_s = 0.0) {
    ++g_index;
    Checker ck;
    const auto start = std::chrono::steady_clock::now();
    try {
        body(ck);
    } catch (const std::exception& e) {
        ck.errors.push_back(std::string("exception: ") + e.what());
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (time_limit_s > 0.0 && elapsed > time_limit_s)
        ck.errors.push_back("runtime " + fmt(elapsed) + " s exceeds " +
                            fmt(time_limit_s) + " s");
    if (ck.errors.empty()) {
        std::printf("[PASS] %d %s (%.1f s)\n", g_index, name.c_str(), elapsed);
    } else {
        ++g_failures;
        std::printf("[FAIL] %d %s (%.1f s)\n", g_index, name.c_str(), elapsed);
        for (const auto& e : ck.errors) std::printf("       - %s\n", e.c_str());
    }
    std::fflush(stdout);
}

ProcessParams make_params(double mu, double lambda, double tau, int d = 1) {
    ProcessParams p;
    p.mu.assign(static_cast<std::size_t>(d), mu);
    p.lambda = lambda;
    p.tau = tau;
    return p;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

//---------------------------------------------------------------------------

void forward_moments(Checker& ck) {
    struct Case {
        ScheduleKind kind;
        double theta;
    };
    const Case cases[] = {{ScheduleKind::Constant, 1.0},
                          {ScheduleKind::Linear, 2.0},
                          {ScheduleKind::Quadratic, 3.0},
                          {ScheduleKind::Cosine, 2.0},
                          {ScheduleKind::Log, 1.0}};
    const Vec x0 = {2.0};
    const ProcessParams p = make_params(0.0, 1.0, 1.0);
    for (const auto& c : cases) {
        const Schedule s(c.kind, c.theta);
        EnsembleConfig ec;
        ec.n_paths = 100000;
        ec.n_steps = 1000;
        ec.seed = 2026;
        const EnsembleStats stats =
            forward_ensemble_stats(x0, p, s, CoupledVolatility{p.lambda}, ec);
        for (std::size_t i : {std::size_t(200), std::size_t(400), std::size_t(600),
                              std::size_t(800), std::size_t(1000)}) {
            const GaussianMarginal m = marginal(x0, stats.times[i], p, s);
            const double se = std::sqrt(m.variance / 100000.0);
            const std::string tag =
                std::string(to_string(c.kind)) + " t=" + fmt(stats.times[i]);
            ck.expect(std::abs(stats.mean[i][0] - m.mean[0]) <= 4.0 * se,
                      tag + ": mean " + fmt(stats.mean[i][0]) + " vs " +
                          fmt(m.mean[0]) + " beyond 4 se");
            ck.expect(std::abs(stats.variance[i] - m.variance) <=
                          0.03 * m.variance,
                      tag + ": variance " + fmt(stats.variance[i]) + " vs " +
                          fmt(m.variance) + " beyond 3%");
        }
    }
}

void cocycle_dichotomy(Checker& ck) {
    CocycleConfig cc;
    cc.pairs = {{0.1, 0.6}, {0.2, 0.9}, {0.3, 0.7}, {0.4, 1.0}, {0.5, 0.8}};
    cc.dt = 1e-3;
    cc.n_paths = 100;
    cc.seed = 7;
    cc.tol = 1e-12;
    const ProcessParams p = make_params(0.0, 1.0, 1.0);

    FlowMap constant{p, Schedule(ScheduleKind::Constant, 1.0),
                     CoupledVolatility{1.0}};
    const CocycleReport hold = check_cocycle(constant, {2.0}, cc);
    ck.expect(hold.holds && hold.max_deviation <= 1e-12,
              "constant rate deviation " + fmt(hold.max_deviation) +
                  " above 1e-12");

    FlowMap cosine{p, Schedule(ScheduleKind::Cosine, 2.0),
                   CoupledVolatility{1.0}};
    const CocycleReport broken = check_cocycle(cosine, {2.0}, cc);
    ck.expect(broken.max_deviation > 1e-6,
              "cosine rate deviation " + fmt(broken.max_deviation) +
                  " not above 1e-6");
}

void distance_lower_bound(Checker& ck) {
    // Plug-in value against independent arithmetic.
    const Schedule s(ScheduleKind::Constant, 1.0);
    TddInputs in({2.0}, make_params(0.0, 1.0, 1.0), s, 1.0, 0.05, 1.0,
                 std::sqrt(2.0));
    const TddReport r = tdd_lower_bound(in);
    const double chi =
        1.0 + 2.0 * std::sqrt(std::log(20.0)) + 2.0 * std::log(20.0);
    const double oracle =
        std::abs((4.0 - 1.0) * std::exp(-2.0) + 1.0 - 2.0 * (1.0 * 2.0 + chi));
    ck.expect(std::abs(r.bound - oracle) <= 1e-12 * oracle,
              "plug-in bound " + fmt(r.bound) + " vs oracle " + fmt(oracle));

    // Monte Carlo exceedance on the 1d Gaussian toy in the tight-law regime.
    const ProcessParams pm = make_params(0.0, 0.01, 2.0);
    for (double delta : {0.05, 0.2}) {
        TddInputs im({2.0}, pm, s, 1.0, delta, 1.0);
        const TddReport mc = validate_tdd(im, 500, 400, 321);
        const double inner =
            mc.term_residual + mc.term_stationary - mc.term_noise;
        ck.expect(inner > 0.0, "inner expression not positive at delta " +
                                   fmt(delta));
        const double threshold = (1.0 - delta) - 0.02;
        ck.expect(mc.exceed_fraction.value() >= threshold,
                  "delta " + fmt(delta) + ": exceed fraction " +
                      fmt(mc.exceed_fraction.value()) + " below " +
                      fmt(threshold));
    }
}

void tau_stiffening(Checker& ck) {
    const Schedule s(ScheduleKind::Constant, 1.0);
    const Vec x0 = {2.0};
    std::vector<double> exact, empirical, tol;
    for (double tau : {1.0, 2.0, 4.0}) {
        const ProcessParams p = make_params(0.0, 1.0, tau);
        exact.push_back(gaussian_kl(marginal(x0, 1.0, p, s), stationary_law(p)));

        EnsembleConfig ec;
        ec.n_paths = 100000;
        ec.n_steps = 500;
        ec.seed = 11 + static_cast<std::uint64_t>(tau);
        const TerminalEnsemble ens = forward_terminal_ensemble(
            x0, p, s, Volatility{CoupledVolatility{p.lambda}}, ec);
        const MomentSummary m = summarize(ens);
        GaussianMarginal fit;
        fit.mean = m.mean;
        fit.variance = m.variance;
        const GaussianMarginal st = stationary_law(p);
        empirical.push_back(gaussian_kl(fit, st));

        // Delta-method error bar for the fitted-moment KL.
        const double se_mean = std::sqrt(m.variance / 100000.0);
        const double se_var = m.variance * std::sqrt(2.0 / 100000.0);
        const double dm = std::abs(m.mean[0] / st.variance);
        const double dv = 0.5 * std::abs(1.0 / st.variance - 1.0 / m.variance);
        tol.push_back(4.0 * (dm * se_mean + dv * se_var) + 2e-3);
    }
    for (std::size_t i = 0; i + 1 < exact.size(); ++i) {
        ck.expect(exact[i] > exact[i + 1], "closed-form divergence not "
                                           "strictly decreasing in tau");
        ck.expect(empirical[i] > empirical[i + 1],
                  "empirical divergence not strictly decreasing in tau");
    }
    for (std::size_t i = 0; i < exact.size(); ++i)
        ck.expect(std::abs(empirical[i] - exact[i]) <= tol[i],
                  "tau sweep point " + std::to_string(i) + ": empirical " +
                      fmt(empirical[i]) + " vs " + fmt(exact[i]) +
                      " beyond " + fmt(tol[i]));
}

void score_correctness(Checker& ck) {
    DataSpec data;
    data.kind = DataKind::GaussianMixture;
    data.components = {MixtureComponent{0.4, {-2.0}, 0.3},
                       MixtureComponent{0.6, {2.0}, 0.7}};
    data.degradation = DegradationSpec::uninformative(1);
    const ProcessParams p = make_params(0.3, 1.2, 1.5);
    const Schedule s(ScheduleKind::Constant, 1.0);

    const double h = 1e-5;
    double worst = 0.0;
    RngStream stream(501, 1, 0);
    for (int i = 0; i < 1000; ++i) {
        const double t = 0.05 + 0.95 * stream.uniform();
        const double x = 10.0 * (stream.uniform() - 0.5);
        auto log_pdf = [&](double u) {
            return mixture_log_density({u}, data, {}, t, p, s);
        };
        const double fd =
            (log_pdf(x + h) - log_pdf(x - h)) / (2.0 * h);
        const double sc = true_score_mixture({x}, data, {}, t, p, s)[0];
        const double rel = std::abs(sc - fd) /
                           std::max({std::abs(fd), std::abs(sc), 1e-2});
        worst = std::max(worst, rel);
    }
    ck.expect(worst < 1e-6, "mixture score max relative error " + fmt(worst));

    // Backpropagation against central differences of the objective.
    MlpParams net = make_score_net(1, {6, 5}, 31);
    TrainConfig cfg;
    std::vector<ScoreBatchItem> batch(4);
    for (auto& item : batch) {
        item.x0 = {2.0 * stream.normal()};
        item.y_lift = {stream.normal()};
        item.t = 0.2 + 0.7 * stream.uniform();
        ProcessParams local = p;
        local.mu = item.y_lift;
        item.x_t = sample_marginal(marginal(item.x0, item.t, local, s), stream);
    }
    MlpGrads grads;
    dsm_loss(net, batch, p, s, cfg, &grads);
    double worst_grad = 0.0;
    auto block = [&](std::vector<double>& params, const std::vector<double>& g) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double saved = params[i];
            params[i] = saved + h;
            const double up = dsm_loss(net, batch, p, s, cfg, nullptr);
            params[i] = saved - h;
            const double dn = dsm_loss(net, batch, p, s, cfg, nullptr);
            params[i] = saved;
            const double fd = (up - dn) / (2.0 * h);
            worst_grad = std::max(
                worst_grad, std::abs(fd - g[i]) /
                                std::max({std::abs(fd), std::abs(g[i]), 1e-6}));
        }
    };
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
        block(net.weights[l], grads.weights[l]);
        block(net.biases[l], grads.biases[l]);
    }
    ck.expect(worst_grad < 1e-4,
              "backprop max relative error " + fmt(worst_grad));
}

void reverse_recovery(Checker& ck) {
    // Point-mass recovery through the exact kernel score.
    const Schedule s(ScheduleKind::Constant, 1.0);
    const VariantSpec v = make_d3gm(make_params(0.0, 1.0, 2.0), s);
    const Vec x0 = {2.0};
    const double t_min = 1e-3;
    const ReverseEnsembleStats stats = reverse_ensemble_stats(
        v, make_kernel_score(x0, v.params, s), 2000, 10000, 2025, t_min, 2000);
    // Undo the residual decay of the short unintegrated segment so the
    // estimate targets the start state itself.
    const double lift = std::exp(theta_bar(s, t_min));
    RunningMoments rec;
    for (std::size_t pth = 0; pth < stats.terminal.n_paths; ++pth)
        rec.add(lift * stats.terminal.path(pth)[0]);
    const double se = std::sqrt(rec.variance_unbiased() / 10000.0);
    ck.expect(std::abs(rec.mean - 2.0) <= 4.0 * se,
              "recovered mean " + fmt(rec.mean) + " vs 2 beyond 4 se (" +
                  fmt(se) + ")");

    // Marginal consistency at five checkpoints on a deep horizon.
    const Schedule deep(ScheduleKind::Constant, 1.0, 10.0, 4.0);
    const VariantSpec vd = make_d3gm(make_params(0.0, 1.0, 2.0), deep);
    const MixtureComponent comp{1.0, {3.0}, 0.5};
    const int n_paths = 4000;
    const ReverseEnsembleStats closure =
        reverse_ensemble_stats(vd, make_variant_gaussian_score(vd, comp), 2500,
                               n_paths, 31, 0.02, 625);
    ck.expect(closure.times.size() == 5, "expected five checkpoints");
    for (std::size_t i = 0; i < closure.times.size(); ++i) {
        const GaussianMarginal target =
            variant_data_marginal(vd, comp, closure.times[i]);
        const double se_mean = std::sqrt(target.variance / n_paths);
        const double se_var = target.variance * std::sqrt(2.0 / (n_paths - 1));
        const std::string tag = "checkpoint t=" + fmt(closure.times[i]);
        ck.expect(std::abs(closure.mean[i][0] - target.mean[0]) <= 4.0 * se_mean,
                  tag + ": mean " + fmt(closure.mean[i][0]) + " vs " +
                      fmt(target.mean[0]));
        ck.expect(std::abs(closure.variance[i] - target.variance) <=
                      4.0 * se_var + 0.05 * target.variance,
                  tag + ": variance " + fmt(closure.variance[i]) + " vs " +
                      fmt(target.variance));
    }
}

void variant_ordering(Checker& ck) {
    DataSpec data;
    data.kind = DataKind::Gaussian;
    data.components = {MixtureComponent{1.0, {10.0}, 1.0}};
    data.degradation = DegradationSpec::uninformative(1);

    const Schedule s(ScheduleKind::Constant, 1.0);
    const double attractor_scale = 1000.0;
    const std::vector<VariantSpec> variants = {
        make_d3gm(make_params(0.0, 1.0, 2.0), s),
        make_ou(make_params(0.0, 1.0, 1.0), s),
        make_coef_decoupled(make_params(0.0, 1.0, 1.0), s,
                            std::sqrt(2.0 * attractor_scale)),
    };
    CompareBudget budget;  // 1000 steps, 2000 paths, seeds 1..10
    const CompareResult result = trajectory_compare(variants, data, budget);

    std::map<std::string, std::map<std::uint64_t, double>> mse;
    for (const auto& row : result.rows) mse[row.variant][row.seed] = row.terminal_mse;
    int wins = 0;
    for (std::uint64_t seed : budget.seeds) {
        const double d3 = mse["d3gm"][seed];
        const double ou = mse["ou"][seed];
        const double dec = mse["coef-decoupled"][seed];
        if (d3 <= ou && ou < dec) ++wins;
    }
    ck.expect(wins >= 8, "mse ordering held on " + std::to_string(wins) +
                             "/10 seeds");

    // Terminal spread in the oversized-attractor regime.
    double var_d3 = 0.0, var_dec = 0.0;
    for (const auto& pt : result.curves) {
        if (pt.t > budget.t_min + 1e-9) continue;
        if (pt.variant == "d3gm") var_d3 = pt.var;
        if (pt.variant == "coef-decoupled") var_dec = pt.var;
    }
    ck.expect(var_dec >= 2.0 * var_d3, "terminal variance " + fmt(var_dec) +
                                           " not 2x above " + fmt(var_d3));
}

void toy_restoration(Checker& ck) {
    const fs::path dir = fs::temp_directory_path() / "d3gm_acceptance_toy";
    fs::remove_all(dir);
    RunConfig cfg;
    cfg.command = "train-restore";
    cfg.process.lambda = 0.25;
    cfg.process.tau = 2.0;
    cfg.mc.seed = 42;
    cfg.train.steps = 4000;
    cfg.output.directory = dir.string();
    ck.expect(run_command(cfg) == 0, "pipeline exit code nonzero");

    std::ifstream in(dir / "metrics.json");
    ck.expect(in.good(), "metrics.json missing");
    if (!in.good()) return;
    const nlohmann::json metrics = nlohmann::json::parse(in);
    const int wins = metrics["wins_restored_vs_degraded"].get<int>();
    ck.expect(wins >= 8,
              "restoration beat the degraded input on " + std::to_string(wins) +
                  "/10 signals (mean degraded " +
                  fmt(metrics["mean_mse_degraded"].get<double>()) +
                  ", restored " +
                  fmt(metrics["mean_mse_restored"].get<double>()) + ")");
    fs::remove_all(dir);
}

void determinism(Checker& ck) {
    const fs::path a = fs::temp_directory_path() / "d3gm_acceptance_det_a";
    const fs::path b = fs::temp_directory_path() / "d3gm_acceptance_det_b";
    fs::remove_all(a);
    fs::remove_all(b);

    RunConfig cfg;
    cfg.command = "simulate";
    cfg.mc.paths = 2000;
    cfg.mc.steps = 100;
    cfg.mc.seed = 7;
    cfg.mc.threads = 1;
    cfg.output.directory = a.string();
    ck.expect(run_command(cfg) == 0, "simulate run failed");
    cfg.mc.threads = 4;
    cfg.output.directory = b.string();
    ck.expect(run_command(cfg) == 0, "threaded simulate run failed");
    for (const char* name :
         {"ensemble_stats.csv", "closed_form.csv", "trajectories.csv"})
        ck.expect(slurp(a / name) == slurp(b / name),
                  std::string(name) + " differs across thread counts");

    RunConfig tc;
    tc.command = "tdd";
    tc.process.lambda = 0.01;
    tc.mc.paths = 400;
    tc.mc.steps = 200;
    tc.mc.threads = 1;
    tc.output.directory = a.string();
    ck.expect(run_command(tc) == 0, "tdd run failed");
    tc.mc.threads = 4;
    tc.output.directory = b.string();
    ck.expect(run_command(tc) == 0, "threaded tdd run failed");
    ck.expect(slurp(a / "tdd_report.json") == slurp(b / "tdd_report.json"),
              "tdd_report.json differs across thread counts");
    fs::remove_all(a);
    fs::remove_all(b);
}

}  // namespace

int main() {
    std::printf("acceptance checks\n");
    criterion("forward moments match closed-form marginals", forward_moments,
              60.0);
    criterion("cocycle holds for constant rates and breaks for cosine",
              cocycle_dichotomy, 10.0);
    criterion("distance lower bound: plug-in oracle and exceedance",
              distance_lower_bound, 120.0);
    criterion("stiffening shrinks the terminal divergence", tau_stiffening);
    criterion("scores match finite differences", score_correctness);
    criterion("reverse runs recover the data and its marginals",
              reverse_recovery);
    criterion("variant comparison ordering", variant_ordering);
    criterion("toy restoration beats the degraded input", toy_restoration,
              900.0);
    criterion("byte-identical outputs across thread counts", determinism);
    if (g_failures == 0) {
        std::printf("all %d criteria passed\n", g_index);
        return 0;
    }
    std::printf("%d of %d criteria failed\n", g_failures, g_index);
    return 1;
}
