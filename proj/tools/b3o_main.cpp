// Command-line driver: replicated benchmark runs (`run`, `bench-all`) and
// ask/tell sessions for external objectives (`init`, `ask`, `tell`).
// Exit codes: 0 success, 2 usage error (bad flags or unknown names),
// 1 runtime error (I/O, protocol-state violations).

#include <CLI11.hpp>

#include <b3o/harness.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

//! Flags shared by `run`, `bench-all`, and `init`. The -1 sentinels mean
//! "unset"; RunConfig fills them from the problem dimension.
struct CommonArgs {
    std::string function;
    std::string strategy;
    int iters = -1;
    int init = -1;
    int batch = -1;
    double beta_sqrt = -1.0;
    double gamma = -1.0;
    int replicates = -1;
    std::uint64_t seed = 0;
    int jobs = 1;
};

b3o::RunConfig to_config(const CommonArgs& a) {
    b3o::RunConfig cfg;
    cfg.function_name = a.function;
    cfg.strategy = a.strategy;
    cfg.iterations = a.iters;
    cfg.initial_points = a.init;
    cfg.fixed_batch_size = a.batch;
    cfg.ucb_beta_sqrt = a.beta_sqrt;
    cfg.kernel_gamma = a.gamma;
    cfg.replicates = a.replicates;
    cfg.seed = a.seed;
    return cfg;
}

// --- flat key=value config files -------------------------------------------
// Each subcommand accepts --config <file> whose keys mirror its own flags
// (function=..., iters=..., beta-sqrt=...). Values given explicitly on the
// command line take precedence over the file.

//! Per-subcommand map from config key (flag name without dashes) to a setter.
using ConfigSetters = std::map<std::string, std::function<void(const std::string&)>>;

int parse_int(const std::string& v) {
    std::size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument("not an integer: '" + v + "'");
    return x;
}

double parse_double(const std::string& v) {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("not a number: '" + v + "'");
    return x;
}

std::uint64_t parse_u64(const std::string& v) {
    if (v.find('-') != std::string::npos)
        throw std::invalid_argument("not an unsigned integer: '" + v + "'");
    std::size_t used = 0;
    const std::uint64_t x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("not an unsigned integer: '" + v + "'");
    return x;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::map<std::string, std::string> read_flat_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string text = trim(line);
        if (text.empty() || text[0] == '#' || text[0] == ';') continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": expected key=value, got '" + text + "'");
        const std::string key = trim(text.substr(0, eq));
        if (key.empty())
            throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": empty key");
        kv[key] = trim(text.substr(eq + 1));
    }
    return kv;
}

//! Fill every flag the file names and the command line left unset.
void apply_config(const CLI::App* cmd, const std::string& config_path,
                  const ConfigSetters& setters) {
    if (config_path.empty()) return;
    for (const auto& [key, value] : read_flat_config(config_path)) {
        const auto it = setters.find(key);
        if (it == setters.end())
            throw std::invalid_argument("unknown config key '" + key + "' in " + config_path +
                                        " (keys mirror the subcommand's flags)");
        if (cmd->count("--" + key) > 0) continue;  // explicit flags win
        it->second(value);
    }
}

void require_set(const std::string& value, const char* flag) {
    if (value.empty())
        throw std::invalid_argument(std::string(flag) + " is required (flag or config file)");
}

//! Add the model/budget flags shared by run, bench-all, and init, and
//! register their config-file setters.
void add_model_flags(CLI::App* cmd, CommonArgs& a, std::string& config_path, ConfigSetters& s) {
    cmd->add_option("--iters", a.iters, "Optimization iterations T (default 10*D)");
    cmd->add_option("--init", a.init, "Initial design size (default 3*D)");
    cmd->add_option("--batch", a.batch,
                    "Fixed batch size q for the fixed-size strategies (default 3, or D when D >= 5)");
    cmd->add_option("--beta-sqrt", a.beta_sqrt,
                    "sqrt(beta) for confidence-bound strategies (default 2)");
    cmd->add_option("--gamma", a.gamma, "Kernel inverse squared length-scale (default 1/(0.2*D))");
    cmd->add_option("--seed", a.seed, "Base seed; replicates derive child streams (default 0)");
    cmd->add_option("--config", config_path, "Flat key=value file mirroring this subcommand's flags");
    s["iters"] = [&a](const std::string& v) { a.iters = parse_int(v); };
    s["init"] = [&a](const std::string& v) { a.init = parse_int(v); };
    s["batch"] = [&a](const std::string& v) { a.batch = parse_int(v); };
    s["beta-sqrt"] = [&a](const std::string& v) { a.beta_sqrt = parse_double(v); };
    s["gamma"] = [&a](const std::string& v) { a.gamma = parse_double(v); };
    s["seed"] = [&a](const std::string& v) { a.seed = parse_u64(v); };
}

// --- subcommand bodies ------------------------------------------------------

//! Run one experiment and write <out>/<function>-<strategy>.{csv,json}.
void run_and_write(const b3o::RunConfig& cfg, const fs::path& out_dir, int jobs) {
    const b3o::ExperimentResult result = b3o::run_experiment(cfg, jobs);
    fs::create_directories(out_dir);
    const std::string stem = result.config.function_name + "-" + result.config.strategy;
    const fs::path csv = out_dir / (stem + ".csv");
    const fs::path json = out_dir / (stem + ".json");
    b3o::write_traces(result, csv);
    b3o::write_summary(result, json);

    const bool minimizes = result.benchmark.sense == b3o::Sense::kMin;
    const double final_median =
        minimizes ? -result.median_best.back() : result.median_best.back();
    std::cout << stem << ": median best objective " << final_median << " ("
              << result.config.replicates << " replicates), mean evaluations "
              << result.mean_total_evaluations << "; wrote " << csv.string() << '\n';
}

int do_run(const CommonArgs& args, const std::string& out_dir) {
    require_set(args.function, "--function");
    require_set(args.strategy, "--strategy");
    require_set(out_dir, "--out");
    run_and_write(to_config(args), out_dir, args.jobs);
    return 0;
}

int do_bench_all(const CommonArgs& overrides, const std::string& out_dir) {
    require_set(out_dir, "--out");
    const auto functions = b3o::benchmark_names();
    const auto strategies = b3o::strategy_names();
    int done = 0;
    const int total = static_cast<int>(functions.size() * strategies.size());
    for (const std::string& function : functions) {
        for (const std::string& strategy : strategies) {
            CommonArgs cell = overrides;
            cell.function = function;
            cell.strategy = strategy;
            std::cout << "[" << ++done << "/" << total << "] ";
            run_and_write(to_config(cell), out_dir, overrides.jobs);
        }
    }
    return 0;
}

int do_init(const CommonArgs& args, const fs::path& session_file) {
    require_set(args.function, "--function");
    require_set(args.strategy, "--strategy");
    require_set(session_file.string(), "--session");
    if (fs::exists(session_file))
        throw std::runtime_error("session file already exists: " + session_file.string() +
                                 " (remove it to start a new session)");
    const b3o::SessionState state = b3o::make_session(to_config(args));
    b3o::save_session(state, session_file);
    std::cout << "initialized session " << session_file.string() << ": "
              << state.config.function_name << " / " << state.config.strategy << ", "
              << state.config.iterations << " iterations, initial design of "
              << state.config.initial_points << '\n';
    return 0;
}

int do_ask(const fs::path& session_file) {
    b3o::SessionState state = b3o::load_session(session_file);
    const b3o::BatchProposal proposal = b3o::session_ask(state);
    b3o::save_session(state, session_file);
    if (proposal.fallback) std::cerr << "note: " << proposal.note << '\n';
    for (long i = 0; i < proposal.size(); ++i) {
        for (long c = 0; c < proposal.points.cols(); ++c) {
            if (c > 0) std::cout << ',';
            std::cout << b3o::detail::format_double(proposal.points(i, c));
        }
        std::cout << '\n';
    }
    return 0;
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> values;
    std::string item;
    std::istringstream ss(text);
    while (std::getline(ss, item, ',')) values.push_back(std::stod(item));
    return values;
}

int do_tell(const fs::path& session_file, const std::string& values_text) {
    b3o::SessionState state = b3o::load_session(session_file);
    const std::vector<double> values = parse_values(values_text);
    b3o::session_tell(state, values);
    b3o::save_session(state, session_file);
    std::cout << "recorded " << values.size() << " outcome(s); completed rounds: "
              << state.iteration;
    if (state.observations.n() > 0)
        std::cout << "; best so far: " << state.observations.best_outcome();
    std::cout << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Budgeted batch Bayesian optimization over box domains"};
    app.require_subcommand(1);

    CommonArgs run_args;
    std::string run_out;
    std::string run_config;
    ConfigSetters run_setters;
    CLI::App* run_cmd =
        app.add_subcommand("run", "Run a replicated experiment on a registered benchmark");
    run_cmd->add_option("--function", run_args.function, "Benchmark key, e.g. forrester-1");
    run_cmd->add_option("--strategy", run_args.strategy, "Strategy id, e.g. b3o or cl-ucb");
    run_cmd->add_option("--replicates", run_args.replicates, "Independent repeats (default 20)");
    run_cmd->add_option("--jobs", run_args.jobs, "Concurrent replicate workers (default 1)");
    run_cmd->add_option("--out", run_out, "Output directory for trace and summary files");
    add_model_flags(run_cmd, run_args, run_config, run_setters);
    run_setters["function"] = [&](const std::string& v) { run_args.function = v; };
    run_setters["strategy"] = [&](const std::string& v) { run_args.strategy = v; };
    run_setters["replicates"] = [&](const std::string& v) { run_args.replicates = parse_int(v); };
    run_setters["jobs"] = [&](const std::string& v) { run_args.jobs = parse_int(v); };
    run_setters["out"] = [&](const std::string& v) { run_out = v; };

    CommonArgs bench_args;
    std::string bench_out;
    std::string bench_config;
    ConfigSetters bench_setters;
    CLI::App* bench_cmd = app.add_subcommand(
        "bench-all", "Run every registered benchmark under every strategy");
    bench_cmd->add_option("--replicates", bench_args.replicates,
                          "Independent repeats per cell (default 20)");
    bench_cmd->add_option("--jobs", bench_args.jobs, "Concurrent replicate workers (default 1)");
    bench_cmd->add_option("--out", bench_out, "Output directory for trace and summary files");
    add_model_flags(bench_cmd, bench_args, bench_config, bench_setters);
    bench_setters["replicates"] = [&](const std::string& v) {
        bench_args.replicates = parse_int(v);
    };
    bench_setters["jobs"] = [&](const std::string& v) { bench_args.jobs = parse_int(v); };
    bench_setters["out"] = [&](const std::string& v) { bench_out = v; };

    CommonArgs init_args;
    std::string init_session;
    std::string init_config;
    ConfigSetters init_setters;
    CLI::App* init_cmd = app.add_subcommand(
        "init", "Start an ask/tell session for an external objective on a benchmark's domain");
    init_cmd->add_option("--function", init_args.function, "Benchmark key providing the domain");
    init_cmd->add_option("--strategy", init_args.strategy, "Strategy id");
    init_cmd->add_option("--session", init_session, "Session file to create");
    add_model_flags(init_cmd, init_args, init_config, init_setters);
    init_setters["function"] = [&](const std::string& v) { init_args.function = v; };
    init_setters["strategy"] = [&](const std::string& v) { init_args.strategy = v; };
    init_setters["session"] = [&](const std::string& v) { init_session = v; };

    std::string ask_session;
    CLI::App* ask_cmd = app.add_subcommand(
        "ask", "Print the next batch (one CSV row per point) and mark it pending");
    ask_cmd->add_option("--session", ask_session, "Session file")->required();

    std::string tell_session;
    std::string tell_values;
    CLI::App* tell_cmd =
        app.add_subcommand("tell", "Record outcomes for the pending batch, in row order");
    tell_cmd->add_option("--session", tell_session, "Session file")->required();
    tell_cmd->add_option("--values", tell_values,
                         "Comma-separated outcomes, one per pending point (nan = failed)")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (run_cmd->parsed()) {
            apply_config(run_cmd, run_config, run_setters);
            return do_run(run_args, run_out);
        }
        if (bench_cmd->parsed()) {
            apply_config(bench_cmd, bench_config, bench_setters);
            return do_bench_all(bench_args, bench_out);
        }
        if (init_cmd->parsed()) {
            apply_config(init_cmd, init_config, init_setters);
            return do_init(init_args, init_session);
        }
        if (ask_cmd->parsed()) return do_ask(ask_session);
        if (tell_cmd->parsed()) return do_tell(tell_session, tell_values);
        std::cerr << "error: no subcommand selected\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
