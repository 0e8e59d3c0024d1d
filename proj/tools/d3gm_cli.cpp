#include <CLI11.hpp>

#include <d3gm.hpp>

// Command-line front end. One positional command selects the experiment;
// every config key lives under a section that doubles as the long-flag
// prefix, so `--schedule.kind cosine` overrides `[schedule] kind=cosine`
// from a config file.

namespace {

// The stock config pass maps INI sections onto subcommands. This front end
// keeps every option on the root app under dotted names instead, so the file
// is applied by hand: `[section] key` targets `--section.key`, and values
// given on the command line win over file values.
void apply_config(CLI::App& app, const std::string& path) {
    const std::vector<CLI::ConfigItem> items =
        app.get_config_formatter()->from_file(path);
    for (const CLI::ConfigItem& item : items) {
        if (item.name == "++" || item.name == "--") continue;  // section markers
        CLI::Option* op = app.get_option_no_throw("--" + item.fullname());
        if (op == nullptr) throw CLI::ConfigError::Extras(item.fullname());
        if (op->count() > 0) continue;
        for (const std::string& v : item.inputs) op->add_result(v);
        op->run_callback();
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mean-reverting SDE diffusion experiments"};
    d3gm::RunConfig cfg;
    std::string config_path;

    app.add_option("command", cfg.command,
                   "simulate | cocycle | tdd | train-restore | compare")
        ->required();
    app.add_option("--config", config_path,
                   "INI-style config file; sections match flag prefixes");

    app.add_option("--schedule.kind", cfg.schedule.kind,
                   "constant | linear | quadratic | cosine | log")
        ->capture_default_str();
    app.add_option("--schedule.theta", cfg.schedule.theta, "rate scale")
        ->capture_default_str();
    app.add_option("--schedule.k", cfg.schedule.k, "log-schedule growth rate")
        ->capture_default_str();
    app.add_option("--schedule.t_end", cfg.schedule.t_end, "time horizon")
        ->capture_default_str();

    app.add_option("--process.mu_source", cfg.process.mu_source,
                   "constant | measurement")
        ->capture_default_str();
    app.add_option("--process.mu_value", cfg.process.mu_value, "drift target value")
        ->capture_default_str();
    app.add_option("--process.x0_value", cfg.process.x0_value, "initial state value")
        ->capture_default_str();
    app.add_option("--process.lambda", cfg.process.lambda, "stationary scale")
        ->capture_default_str();
    app.add_option("--process.tau", cfg.process.tau, "stiffening factor")
        ->capture_default_str();
    app.add_option("--process.d", cfg.process.d, "state dimension")
        ->capture_default_str();

    app.add_option("--mc.paths", cfg.mc.paths, "Monte Carlo paths / runs")
        ->capture_default_str();
    app.add_option("--mc.steps", cfg.mc.steps, "integration steps")
        ->capture_default_str();
    app.add_option("--mc.seed", cfg.mc.seed, "root seed")->capture_default_str();
    app.add_option("--mc.threads", cfg.mc.threads, "worker threads")
        ->capture_default_str();

    app.add_option("--output.directory", cfg.output.directory, "output directory")
        ->capture_default_str();
    app.add_option("--output.formats", cfg.output.formats, "output formats")
        ->capture_default_str();

    app.add_option("--cocycle.s_values", cfg.cocycle.s_values,
                   "restart times s of the tested pairs");
    app.add_option("--cocycle.t_values", cfg.cocycle.t_values,
                   "end times t of the tested pairs");
    app.add_option("--cocycle.dt", cfg.cocycle.dt, "integration step")
        ->capture_default_str();
    app.add_option("--cocycle.tol", cfg.cocycle.tol, "deviation tolerance")
        ->capture_default_str();

    app.add_option("--tdd.delta", cfg.tdd.delta, "tail probability")
        ->capture_default_str();
    app.add_option("--tdd.score_bound", cfg.tdd.score_bound,
                   "score bound C (0 = derive from the analytic score)")
        ->capture_default_str();
    app.add_option("--tdd.t_grid_start", cfg.tdd.t_grid_start, "sweep start")
        ->capture_default_str();
    app.add_option("--tdd.t_grid_stop", cfg.tdd.t_grid_stop, "sweep stop")
        ->capture_default_str();
    app.add_option("--tdd.t_grid_n", cfg.tdd.t_grid_n, "sweep points")
        ->capture_default_str();
    app.add_option("--tdd.taus", cfg.tdd.taus, "stiffening sweep values");

    app.add_option("--compare.variants", cfg.compare.variants,
                   "subset of d3gm ou coef-decoupled sgm-vp");
    app.add_option("--compare.data_mean", cfg.compare.data_mean, "toy data mean")
        ->capture_default_str();
    app.add_option("--compare.data_std", cfg.compare.data_std, "toy data std")
        ->capture_default_str();
    app.add_option("--compare.attractor_scale", cfg.compare.attractor_scale,
                   "decoupled variant sigma^2/(2 theta)")
        ->capture_default_str();
    app.add_option("--compare.n_seeds", cfg.compare.n_seeds, "seeds per variant")
        ->capture_default_str();
    app.add_option("--compare.t_min", cfg.compare.t_min, "reverse-time cutoff")
        ->capture_default_str();
    app.add_option("--compare.curve_stride", cfg.compare.curve_stride,
                   "checkpoint stride for curves")
        ->capture_default_str();

    app.add_option("--train.loss_weight_mode", cfg.train.loss_weight_mode,
                   "paper-magnitude | unit")
        ->capture_default_str();
    app.add_option("--train.steps", cfg.train.steps, "optimizer steps")
        ->capture_default_str();
    app.add_option("--train.batch", cfg.train.batch, "batch size")
        ->capture_default_str();
    app.add_option("--train.learning_rate", cfg.train.learning_rate, "learning rate")
        ->capture_default_str();
    app.add_option("--train.optimizer", cfg.train.optimizer, "sgd | adam")
        ->capture_default_str();
    app.add_option("--train.t_min", cfg.train.t_min, "training time cutoff")
        ->capture_default_str();
    app.add_option("--train.hidden", cfg.train.hidden, "hidden layer widths");

    app.add_option("--toy.d", cfg.toy.d, "signal length")->capture_default_str();
    app.add_option("--toy.subsample", cfg.toy.subsample, "subsampling factor")
        ->capture_default_str();
    app.add_option("--toy.noise_sigma", cfg.toy.noise_sigma, "measurement noise")
        ->capture_default_str();
    app.add_option("--toy.n_train_signals", cfg.toy.n_train_signals,
                   "training family size")
        ->capture_default_str();
    app.add_option("--toy.n_test", cfg.toy.n_test, "held-out signals")
        ->capture_default_str();
    app.add_option("--toy.n_restore_paths", cfg.toy.n_restore_paths,
                   "reverse runs averaged per restoration")
        ->capture_default_str();
    app.add_option("--toy.restore_steps", cfg.toy.restore_steps,
                   "reverse integration steps")
        ->capture_default_str();
    app.add_option("--toy.component_std", cfg.toy.component_std,
                   "training family component std")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
        if (!config_path.empty()) apply_config(app, config_path);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    return d3gm::run_command(cfg);
}
