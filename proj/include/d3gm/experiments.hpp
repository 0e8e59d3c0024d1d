#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "discrepancy.hpp"
#include "io.hpp"
#include "process.hpp"
#include "rds.hpp"
#include "reverse.hpp"
#include "rng.hpp"
#include "schedule.hpp"
#include "score.hpp"

#ifndef D3GM_VERSION
#define D3GM_VERSION "dev"
#endif

// Experiment runners behind the command-line front end. Every run writes a
// manifest.json echoing the fully resolved configuration and the code
// version; outputs contain no timestamps, so identical config + seed means
// byte-identical files.

namespace d3gm {

//---------------------------------------------------------------------------
// Configuration blocks.

struct ScheduleBlock {
    std::string kind = "constant";
    double theta = 1.0;
    double k = 10.0;
    double t_end = 1.0;

    Schedule build() const {
        Schedule s;
        s.kind = schedule_kind_from_string(kind);
        s.theta = theta;
        s.k = k;
        s.t_end = t_end;
        s.validate();
        return s;
    }

    nlohmann::json to_json() const {
        return {{"kind", kind}, {"theta", theta}, {"k", k}, {"t_end", t_end}};
    }
};

struct ProcessBlock {
    std::string mu_source = "constant";  // constant | measurement (toy pipeline)
    double mu_value = 0.0;
    double x0_value = 2.0;
    double lambda = 10.0;
    double tau = 2.0;
    int d = 1;

    ProcessParams build() const {
        ProcessParams p;
        p.mu.assign(static_cast<std::size_t>(d), mu_value);
        p.lambda = lambda;
        p.tau = tau;
        p.validate();
        return p;
    }

    Vec x0() const { return Vec(static_cast<std::size_t>(d), x0_value); }

    nlohmann::json to_json() const {
        return {{"mu_source", mu_source}, {"mu_value", mu_value},
                {"x0_value", x0_value},   {"lambda", lambda},
                {"tau", tau},             {"d", d}};
    }
};

struct McBlock {
    std::size_t paths = 1000;
    std::int64_t steps = 100;
    std::uint64_t seed = 42;
    int threads = 1;

    nlohmann::json to_json() const {
        return {{"paths", paths}, {"steps", steps}, {"seed", seed},
                {"threads", threads}};
    }
};

struct OutputBlock {
    std::string directory = "out";
    std::string formats = "csv,json";

    nlohmann::json to_json() const {
        return {{"directory", directory}, {"formats", formats}};
    }
};

struct CocycleBlock {
    std::vector<double> s_values = {0.1, 0.2, 0.3, 0.4, 0.5};
    std::vector<double> t_values = {0.6, 0.9, 0.7, 1.0, 0.8};
    double dt = 1e-3;
    double tol = 1e-12;

    nlohmann::json to_json() const {
        return {{"s_values", s_values}, {"t_values", t_values}, {"dt", dt},
                {"tol", tol}};
    }
};

struct TddBlock {
    double delta = 0.05;
    double score_bound = 0.0;  // 0 = derive from the analytic score at T
    double t_grid_start = 0.1;
    double t_grid_stop = 1.0;
    int t_grid_n = 10;
    std::vector<double> taus = {1.0, 2.0, 4.0};

    nlohmann::json to_json() const {
        return {{"delta", delta},
                {"score_bound", score_bound},
                {"t_grid_start", t_grid_start},
                {"t_grid_stop", t_grid_stop},
                {"t_grid_n", t_grid_n},
                {"taus", taus}};
    }
};

struct CompareBlock {
    std::vector<std::string> variants = {"d3gm", "ou", "coef-decoupled", "sgm-vp"};
    double data_mean = 3.0;
    double data_std = 1.0;
    double attractor_scale = 1000.0;  // sigma^2 / (2 theta) of the decoupled variant
    int n_seeds = 10;
    double t_min = 1e-3;
    int curve_stride = 10;

    nlohmann::json to_json() const {
        return {{"variants", variants},
                {"data_mean", data_mean},
                {"data_std", data_std},
                {"attractor_scale", attractor_scale},
                {"n_seeds", n_seeds},
                {"t_min", t_min},
                {"curve_stride", curve_stride}};
    }
};

struct TrainBlock {
    std::string loss_weight_mode = "paper-magnitude";
    std::int64_t steps = 3000;
    int batch = 16;
    double learning_rate = 3e-3;
    std::string optimizer = "adam";
    double t_min = 0.01;
    std::vector<int> hidden = {48, 32};

    TrainConfig build(std::uint64_t seed, double T) const {
        TrainConfig tc;
        tc.loss_weight_mode = loss_weight_mode;
        tc.steps = steps;
        tc.batch = batch;
        tc.learning_rate = learning_rate;
        tc.seed = seed;
        tc.t_min = t_min;
        tc.T = T;
        tc.optimizer = optimizer;
        tc.validate();
        return tc;
    }

    nlohmann::json to_json() const {
        return {{"loss_weight_mode", loss_weight_mode},
                {"steps", steps},
                {"batch", batch},
                {"learning_rate", learning_rate},
                {"optimizer", optimizer},
                {"t_min", t_min},
                {"hidden", hidden}};
    }
};

struct ToyBlock {
    int d = 32;
    int subsample = 2;
    double noise_sigma = 0.05;
    int n_train_signals = 256;
    int n_test = 10;
    int n_restore_paths = 16;
    std::int64_t restore_steps = 400;
    double component_std = 0.02;

    nlohmann::json to_json() const {
        return {{"d", d},
                {"subsample", subsample},
                {"noise_sigma", noise_sigma},
                {"n_train_signals", n_train_signals},
                {"n_test", n_test},
                {"n_restore_paths", n_restore_paths},
                {"restore_steps", restore_steps},
                {"component_std", component_std}};
    }
};

struct RunConfig {
    std::string command;
    ScheduleBlock schedule;
    ProcessBlock process;
    McBlock mc;
    OutputBlock output;
    CocycleBlock cocycle;
    TddBlock tdd;
    CompareBlock compare;
    TrainBlock train;
    ToyBlock toy;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["command"] = command;
        j["version"] = D3GM_VERSION;
        j["schedule"] = schedule.to_json();
        j["process"] = process.to_json();
        j["mc"] = mc.to_json();
        j["output"] = output.to_json();
        if (command == "cocycle") j["cocycle"] = cocycle.to_json();
        if (command == "tdd") j["tdd"] = tdd.to_json();
        if (command == "compare") j["compare"] = compare.to_json();
        if (command == "train-restore") {
            j["train"] = train.to_json();
            j["toy"] = toy.to_json();
        }
        return j;
    }
};

inline std::string out_path(const RunConfig& cfg, const std::string& name) {
    return cfg.output.directory + "/" + name;
}

inline void write_manifest(const RunConfig& cfg) {
    ensure_directory(cfg.output.directory);
    write_json(out_path(cfg, "manifest.json"), cfg.to_json());
}

//---------------------------------------------------------------------------
// simulate: forward ensemble statistics next to the closed-form marginals.

inline void run_simulate(const RunConfig& cfg) {
    const Schedule sched = cfg.schedule.build();
    const ProcessParams params = cfg.process.build();
    const Vec x0 = cfg.process.x0();

    EnsembleConfig ec;
    ec.n_steps = cfg.mc.steps;
    ec.n_paths = cfg.mc.paths;
    ec.seed = cfg.mc.seed;
    ec.threads = cfg.mc.threads;

    const EnsembleStats stats = forward_ensemble_stats(
        x0, params, sched, CoupledVolatility{params.lambda}, ec);

    write_manifest(cfg);
    std::vector<std::string> header = {"t"};
    for (int c = 0; c < cfg.process.d; ++c)
        header.push_back("mean_" + std::to_string(c));
    header.push_back("variance");

    CsvFile empirical(out_path(cfg, "ensemble_stats.csv"), header);
    CsvFile closed(out_path(cfg, "closed_form.csv"), header);
    // Row 0 is the deterministic start state; the stats files carry only the
    // simulated times so a one-step grid yields exactly one data row.
    for (std::size_t i = 1; i < stats.times.size(); ++i) {
        std::vector<std::string> row = {csv_num(stats.times[i])};
        for (double m : stats.mean[i]) row.push_back(csv_num(m));
        row.push_back(csv_num(stats.variance[i]));
        empirical.row(row);

        const GaussianMarginal m = marginal(x0, stats.times[i], params, sched);
        std::vector<std::string> ref = {csv_num(stats.times[i])};
        for (double v : m.mean) ref.push_back(csv_num(v));
        ref.push_back(csv_num(m.variance));
        closed.row(ref);
    }

    CsvFile traj(out_path(cfg, "trajectories.csv"),
                 {"t", "path", "dim", "value"});
    const std::size_t n_export = std::min<std::size_t>(cfg.mc.paths, 5);
    const double dt = sched.t_end / static_cast<double>(cfg.mc.steps);
    for (std::size_t pth = 0; pth < n_export; ++pth) {
        BrownianPath omega(cfg.mc.seed, pth, params.dim(), dt,
                           static_cast<std::int64_t>(cfg.mc.steps));
        const Trajectory tr = simulate_forward(x0, params, sched, omega);
        for (std::size_t i = 0; i < tr.times.size(); ++i)
            for (int c = 0; c < params.dim(); ++c)
                traj.row({csv_num(tr.times[i]), csv_num(static_cast<std::uint64_t>(pth)),
                          csv_num(c), csv_num(tr.states[i][static_cast<std::size_t>(c)])});
    }
}

//---------------------------------------------------------------------------
// cocycle: solution-operator identity check.

inline void run_cocycle(const RunConfig& cfg) {
    const Schedule sched = cfg.schedule.build();
    const ProcessParams params = cfg.process.build();
    if (cfg.cocycle.s_values.size() != cfg.cocycle.t_values.size())
        throw std::invalid_argument("cocycle: s/t lists differ in length");

    FlowMap fm{params, sched, CoupledVolatility{params.lambda}};
    CocycleConfig cc;
    cc.pairs.clear();
    for (std::size_t i = 0; i < cfg.cocycle.s_values.size(); ++i)
        cc.pairs.emplace_back(cfg.cocycle.s_values[i], cfg.cocycle.t_values[i]);
    cc.dt = cfg.cocycle.dt;
    cc.n_paths = cfg.mc.paths;
    cc.seed = cfg.mc.seed;
    cc.tol = cfg.cocycle.tol;

    const CocycleReport report = check_cocycle(fm, cfg.process.x0(), cc);

    write_manifest(cfg);
    nlohmann::json j;
    j["schedule"] = report.schedule;
    j["tol"] = report.tol;
    j["max_deviation"] = report.max_deviation;
    j["verdict"] = report.holds ? "holds" : "violated";
    j["pairs"] = nlohmann::json::array();
    for (const auto& pr : report.pairs)
        j["pairs"].push_back(
            {{"s", pr.s}, {"t", pr.t}, {"deviation", pr.deviation}});
    write_json(out_path(cfg, "cocycle_report.json"), j);
}

//---------------------------------------------------------------------------
// tdd: lower-bound report, Monte Carlo validation, and a (tau, T) sweep.

inline double resolved_score_bound(const RunConfig& cfg, const ProcessParams& params,
                                   const Schedule& sched, double T) {
    if (cfg.tdd.score_bound > 0.0) return cfg.tdd.score_bound;
    return default_score_bound(params.dim(),
                               marginal(cfg.process.x0(), T, params, sched));
}

inline void run_tdd(const RunConfig& cfg) {
    const Schedule sched = cfg.schedule.build();
    const ProcessParams params = cfg.process.build();
    const double T = sched.t_end;

    TddInputs in(cfg.process.x0(), params, sched, T, cfg.tdd.delta,
                 resolved_score_bound(cfg, params, sched, T));
    const TddReport report = validate_tdd(in, cfg.mc.paths, cfg.mc.steps,
                                          cfg.mc.seed,
                                          static_cast<unsigned>(cfg.mc.threads));

    write_manifest(cfg);
    nlohmann::json j;
    j["bound"] = report.bound;
    j["term_residual"] = report.term_residual;
    j["term_stationary"] = report.term_stationary;
    j["term_noise"] = report.term_noise;
    j["empirical_lhs"] = report.empirical_lhs.value();
    j["exceed_fraction"] = report.exceed_fraction.value();
    j["delta"] = report.delta;
    write_json(out_path(cfg, "tdd_report.json"), j);

    CsvFile sweep(out_path(cfg, "tdd_sweep.csv"),
                  {"tau", "T", "bound", "term_residual", "term_stationary",
                   "term_noise", "kl"});
    for (double tau : cfg.tdd.taus) {
        ProcessParams pt = params;
        pt.tau = tau;
        for (int i = 0; i < cfg.tdd.t_grid_n; ++i) {
            const double Ti =
                cfg.tdd.t_grid_start +
                (cfg.tdd.t_grid_stop - cfg.tdd.t_grid_start) *
                    (cfg.tdd.t_grid_n == 1
                         ? 0.0
                         : static_cast<double>(i) / (cfg.tdd.t_grid_n - 1));
            TddInputs ini(cfg.process.x0(), pt, sched, Ti, cfg.tdd.delta,
                          resolved_score_bound(cfg, pt, sched, Ti));
            const TddReport r = tdd_lower_bound(ini);
            const double kl = gaussian_kl(marginal(cfg.process.x0(), Ti, pt, sched),
                                          stationary_law(pt));
            sweep.row({csv_num(tau), csv_num(Ti), csv_num(r.bound),
                       csv_num(r.term_residual), csv_num(r.term_stationary),
                       csv_num(r.term_noise), csv_num(kl)});
        }
    }
}

//---------------------------------------------------------------------------
// compare: shared-budget variant study on the Gaussian toy.

inline std::vector<VariantSpec> build_variants(const RunConfig& cfg) {
    const Schedule sched = cfg.schedule.build();
    const ProcessParams params = cfg.process.build();
    std::vector<VariantSpec> out;
    for (const auto& name : cfg.compare.variants) {
        switch (variant_kind_from_string(name)) {
            case VariantKind::D3gm:
                out.push_back(make_d3gm(params, sched));
                break;
            case VariantKind::Ou:
                out.push_back(make_ou(params, sched));
                break;
            case VariantKind::CoefDecoupled: {
                ProcessParams pd = params;
                pd.tau = 1.0;
                const double sigma = std::sqrt(2.0 * theta_at(sched, sched.t_end) *
                                               cfg.compare.attractor_scale);
                out.push_back(make_coef_decoupled(pd, sched, sigma));
                break;
            }
            case VariantKind::SgmVp:
                out.push_back(make_sgm_vp(cfg.process.d, sched));
                break;
        }
    }
    return out;
}

inline void run_compare(const RunConfig& cfg) {
    DataSpec data;
    data.kind = DataKind::Gaussian;
    data.components = {MixtureComponent{
        1.0, Vec(static_cast<std::size_t>(cfg.process.d), cfg.compare.data_mean),
        cfg.compare.data_std}};
    data.degradation = DegradationSpec::identity(cfg.process.d);

    CompareBudget budget;
    budget.n_steps = static_cast<int>(cfg.mc.steps);
    budget.n_paths = static_cast<int>(cfg.mc.paths);
    budget.seeds.clear();
    for (int i = 1; i <= cfg.compare.n_seeds; ++i)
        budget.seeds.push_back(cfg.mc.seed + static_cast<std::uint64_t>(i));
    budget.t_min = cfg.compare.t_min;
    budget.curve_stride = cfg.compare.curve_stride;
    budget.threads = cfg.mc.threads;

    const CompareResult result =
        trajectory_compare(build_variants(cfg), data, budget);

    write_manifest(cfg);
    CsvFile table(out_path(cfg, "compare_table.csv"),
                  {"variant", "seed", "terminal_mse", "terminal_w2", "steps"});
    for (const auto& row : result.rows)
        table.row({row.variant, csv_num(row.seed), csv_num(row.terminal_mse),
                   csv_num(row.terminal_w2), csv_num(row.steps)});

    CsvFile curves(out_path(cfg, "compare_curves.csv"),
                   {"variant", "t", "mean_dist", "var"});
    for (const auto& pt : result.curves)
        curves.row({pt.variant, csv_num(pt.t), csv_num(pt.mean_dist),
                    csv_num(pt.var)});
}

//---------------------------------------------------------------------------
// train-restore: toy inverse problem end to end.

// Piecewise-smooth 1d signal: two sinusoids plus one step discontinuity,
// amplitudes O(1), fully determined by the stream state.
inline Vec make_signal(int d, RngStream& stream) {
    const double a1 = 0.5 + 0.5 * stream.uniform();
    const double f1 = 1.0 + std::floor(2.0 * stream.uniform());
    const double ph1 = 2.0 * std::numbers::pi * stream.uniform();
    const double a2 = 0.1 + 0.2 * stream.uniform();
    const double f2 = 3.0 + std::floor(3.0 * stream.uniform());
    const double ph2 = 2.0 * std::numbers::pi * stream.uniform();
    const double jump = 1.6 * (stream.uniform() - 0.5);
    const double at = 0.2 + 0.6 * stream.uniform();

    Vec x(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(d - 1);
        x[static_cast<std::size_t>(i)] =
            a1 * std::sin(2.0 * std::numbers::pi * f1 * u + ph1) +
            a2 * std::sin(2.0 * std::numbers::pi * f2 * u + ph2) +
            (u > at ? jump : 0.0);
    }
    return x;
}

struct ToyInverseProblem {
    int d = 32;
    DegradationSpec degradation;
    std::uint64_t train_seed = 42;
    std::uint64_t test_seed = 43;

    Vec train_signal(std::uint64_t index) const {
        RngStream stream(train_seed, stream::data, index);
        return make_signal(d, stream);
    }

    // Held-out signal plus its reproducible measurement.
    std::pair<Vec, Vec> test_case(std::uint64_t index) const {
        RngStream stream(test_seed, stream::data, index);
        Vec x = make_signal(d, stream);
        Vec y = degradation.measure(x, stream);
        return {std::move(x), std::move(y)};
    }
};

inline ToyInverseProblem build_toy_problem(const RunConfig& cfg) {
    ToyInverseProblem prob;
    prob.d = cfg.toy.d;
    prob.degradation = DegradationSpec::subsample(cfg.toy.d, cfg.toy.subsample,
                                                  cfg.toy.noise_sigma);
    prob.train_seed = cfg.mc.seed;
    prob.test_seed = cfg.mc.seed + 1;
    return prob;
}

// Training distribution: an empirical family of signals as a mixture with a
// small per-component std, so DataSpec machinery (and the exact mixture
// score) applies unchanged.
inline DataSpec toy_training_data(const ToyInverseProblem& prob, int n_signals,
                                  double component_std) {
    DataSpec data;
    data.kind = DataKind::GaussianMixture;
    data.degradation = prob.degradation;
    const double w = 1.0 / static_cast<double>(n_signals);
    for (int k = 0; k < n_signals; ++k)
        data.components.push_back(MixtureComponent{
            w, prob.train_signal(static_cast<std::uint64_t>(k)), component_std});
    data.validate();
    return data;
}

// Posterior-mean estimate: average over reverse runs, each followed by the
// conditional-expectation step x + v_t * score(x, t) at t_min which removes
// the residual kernel noise.
inline Vec restore_signal(const VariantSpec& v, const ScoreFn& score_fn,
                          int n_paths, int n_steps, double t_min,
                          std::uint64_t seed) {
    const std::size_t d = static_cast<std::size_t>(v.params.dim());
    Vec acc(d, 0.0);
    for (int pth = 0; pth < n_paths; ++pth) {
        const SampleRun run = sample(v, score_fn, n_steps, InitMode::FromStationary,
                                     seed, t_min, static_cast<std::uint64_t>(pth));
        const Vec sc = score_fn(run.terminal, t_min);
        const double v_t = kernel_variance(t_min, v.params, v.sched);
        for (std::size_t c = 0; c < d; ++c)
            acc[c] += run.terminal[c] + v_t * sc[c];
    }
    for (auto& a : acc) a /= static_cast<double>(n_paths);
    return acc;
}

inline double mean_squared_error(const Vec& a, const Vec& b) {
    double acc = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        const double dv = a[c] - b[c];
        acc += dv * dv;
    }
    return acc / static_cast<double>(a.size());
}

inline double peak_snr(const Vec& truth, double mse) {
    double peak = 0.0;
    for (double v : truth) peak = std::max(peak, std::abs(v));
    if (!(mse > 0.0) || peak == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

inline void run_train_and_restore(const RunConfig& cfg) {
    const Schedule sched = cfg.schedule.build();
    const ToyInverseProblem prob = build_toy_problem(cfg);
    const DataSpec data =
        toy_training_data(prob, cfg.toy.n_train_signals, cfg.toy.component_std);

    ProcessParams params;
    params.mu.assign(static_cast<std::size_t>(prob.d), 0.0);
    params.lambda = cfg.process.lambda;
    params.tau = cfg.process.tau;
    params.validate();
    ProcessParams params_ou = params;
    params_ou.tau = 1.0;

    const TrainConfig tc = cfg.train.build(cfg.mc.seed, sched.t_end);
    const TrainResult res = train(make_score_net(prob.d, cfg.train.hidden, cfg.mc.seed),
                                  data, params, sched, tc);
    const TrainResult res_ou =
        train(make_score_net(prob.d, cfg.train.hidden, cfg.mc.seed), data,
              params_ou, sched, tc);

    write_manifest(cfg);
    save_checkpoint(res.net, out_path(cfg, "score_net_d3gm"));
    save_checkpoint(res_ou.net, out_path(cfg, "score_net_ou"));

    CsvFile losses(out_path(cfg, "training_loss.csv"),
                   {"step", "loss_d3gm", "loss_ou"});
    for (std::size_t i = 0; i < res.loss_history.size(); ++i)
        losses.row({csv_num(static_cast<std::int64_t>(i)),
                    csv_num(res.loss_history[i]), csv_num(res_ou.loss_history[i])});

    CsvFile restored(out_path(cfg, "restored.csv"),
                     {"signal", "coord", "truth", "degraded", "restored",
                      "restored_ou"});
    nlohmann::json signals = nlohmann::json::array();
    int wins = 0, wins_ou = 0;
    double sum_deg = 0.0, sum_res = 0.0, sum_res_ou = 0.0;
    for (int i = 0; i < cfg.toy.n_test; ++i) {
        const auto [x_true, y] = prob.test_case(static_cast<std::uint64_t>(i));
        const Vec y_lift = prob.degradation.lift(y);

        ProcessParams pi = params;
        pi.mu = y_lift;
        ProcessParams pi_ou = params_ou;
        pi_ou.mu = y_lift;

        const std::uint64_t restore_seed = rng_chain(cfg.mc.seed, 100 + static_cast<std::uint64_t>(i));
        const Vec x_hat = restore_signal(
            make_d3gm(pi, sched), make_net_score(res.net, y_lift, pi, sched),
            cfg.toy.n_restore_paths, static_cast<int>(cfg.toy.restore_steps),
            cfg.train.t_min, restore_seed);
        const Vec x_hat_ou = restore_signal(
            make_ou(pi_ou, sched), make_net_score(res_ou.net, y_lift, pi_ou, sched),
            cfg.toy.n_restore_paths, static_cast<int>(cfg.toy.restore_steps),
            cfg.train.t_min, restore_seed);

        const double mse_deg = mean_squared_error(y_lift, x_true);
        const double mse_res = mean_squared_error(x_hat, x_true);
        const double mse_res_ou = mean_squared_error(x_hat_ou, x_true);
        wins += mse_res < mse_deg;
        wins_ou += mse_res_ou < mse_deg;
        sum_deg += mse_deg;
        sum_res += mse_res;
        sum_res_ou += mse_res_ou;

        signals.push_back({{"index", i},
                           {"mse_degraded", mse_deg},
                           {"mse_restored", mse_res},
                           {"mse_restored_ou", mse_res_ou},
                           {"psnr_degraded", peak_snr(x_true, mse_deg)},
                           {"psnr_restored", peak_snr(x_true, mse_res)},
                           {"psnr_restored_ou", peak_snr(x_true, mse_res_ou)}});
        for (int c = 0; c < prob.d; ++c)
            restored.row({csv_num(i), csv_num(c),
                          csv_num(x_true[static_cast<std::size_t>(c)]),
                          csv_num(y_lift[static_cast<std::size_t>(c)]),
                          csv_num(x_hat[static_cast<std::size_t>(c)]),
                          csv_num(x_hat_ou[static_cast<std::size_t>(c)])});
    }

    nlohmann::json metrics;
    metrics["signals"] = signals;
    metrics["n_test"] = cfg.toy.n_test;
    metrics["wins_restored_vs_degraded"] = wins;
    metrics["wins_restored_ou_vs_degraded"] = wins_ou;
    metrics["mean_mse_degraded"] = sum_deg / cfg.toy.n_test;
    metrics["mean_mse_restored"] = sum_res / cfg.toy.n_test;
    metrics["mean_mse_restored_ou"] = sum_res_ou / cfg.toy.n_test;
    metrics["final_loss_d3gm"] = res.loss_history.back();
    metrics["final_loss_ou"] = res_ou.loss_history.back();
    write_json(out_path(cfg, "metrics.json"), metrics);
}

//---------------------------------------------------------------------------
// Dispatch and exit-code policy: 0 success, 1 validation error, 2 numeric or
// IO failure.

template <typename Fn>
int run_guarded(Fn&& fn) noexcept {
    try {
        fn();
        return 0;
    } catch (const SimulationError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 2;
    } catch (const TrainingError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 2;
    } catch (const std::range_error& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 2;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

inline int run_command(const RunConfig& cfg) {
    return run_guarded([&] {
        if (cfg.command == "simulate") return run_simulate(cfg);
        if (cfg.command == "cocycle") return run_cocycle(cfg);
        if (cfg.command == "tdd") return run_tdd(cfg);
        if (cfg.command == "compare") return run_compare(cfg);
        if (cfg.command == "train-restore") return run_train_and_restore(cfg);
        throw std::invalid_argument("unknown command: " + cfg.command);
    });
}

}  // namespace d3gm
