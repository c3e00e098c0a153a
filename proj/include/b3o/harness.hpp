#pragma once

#include <Eigen/Dense>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "benchfns.hpp"
#include "strategies.hpp"

namespace b3o {

//! A replicated experiment on one registered benchmark: the raw per-replicate
//! histories plus the aggregates that the trace files serve (per-iteration
//! median/IQR of best-so-far, mean total evaluations, mean iteration time).
//! Aggregate arrays have length T+1: entry 0 is the initial design.
struct ExperimentResult {
    RunConfig config;     // fully resolved (defaults applied)
    Benchmark benchmark;  // the objective the runs evaluated
    std::vector<RunHistory> histories;
    std::vector<double> median_best;
    std::vector<double> iqr_best;
    double mean_total_evaluations = 0.0;
    double mean_iteration_wall_ms = 0.0;
};

namespace detail {

//! Quantile of a pre-sorted sample by linear interpolation between order
//! statistics at fractional rank p*(n-1).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile_sorted: empty sample");
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

//! Shortest decimal form that parses back to exactly the same double.
inline std::string format_double(double v) {
    std::array<char, 32> buf;
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline std::vector<double> to_std_vector(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

inline std::vector<std::vector<double>> to_nested_vector(const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()));
    for (long i = 0; i < m.rows(); ++i) {
        auto& row = rows[static_cast<std::size_t>(i)];
        row.resize(static_cast<std::size_t>(m.cols()));
        for (long c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(i, c);
    }
    return rows;
}

}  // namespace detail

//! Run `config.replicates` independent optimization loops on the named
//! benchmark. Replicate r draws from the seed's child stream r, so results
//! do not depend on the worker count; minimization benchmarks are negated
//! onto the canonical maximization scale before entering the loop.
inline ExperimentResult run_experiment(RunConfig config, int jobs = 1) {
    if (jobs < 1) throw std::invalid_argument("run_experiment: jobs must be >= 1");
    const Benchmark bench = get_benchmark(config.function_name);
    const StrategyId strategy = parse_strategy(config.strategy);
    config.dim = bench.dim;
    config.apply_defaults();
    if (config.replicates < 1)
        throw std::invalid_argument("run_experiment: replicates must be >= 1");

    const bool negate = bench.sense == Sense::kMin;
    const auto objective = [evaluate = bench.evaluate, negate](const Eigen::VectorXd& x) {
        const double y = evaluate(x);
        return negate ? -y : y;
    };

    ExperimentResult result;
    result.config = config;
    result.benchmark = bench;
    result.histories.resize(static_cast<std::size_t>(config.replicates));

    const RngStream root(config.seed);
    const auto run_one = [&](int r) {
        result.histories[static_cast<std::size_t>(r)] =
            run_loop(objective, bench.domain, strategy, config,
                     root.substream(static_cast<std::uint64_t>(r)));
    };

    const int workers = std::min(jobs, config.replicates);
    if (workers <= 1) {
        for (int r = 0; r < config.replicates; ++r) run_one(r);
    } else {
        std::atomic<int> next{0};
        std::mutex error_mutex;
        std::exception_ptr first_error;
        const auto work = [&] {
            for (;;) {
                const int r = next.fetch_add(1);
                if (r >= config.replicates) return;
                try {
                    run_one(r);
                } catch (...) {
                    const std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& th : pool) th.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    const int T = config.iterations;
    result.median_best.assign(static_cast<std::size_t>(T) + 1, 0.0);
    result.iqr_best.assign(static_cast<std::size_t>(T) + 1, 0.0);
    std::vector<double> best(result.histories.size());
    for (int t = 0; t <= T; ++t) {
        for (std::size_t r = 0; r < result.histories.size(); ++r) {
            const auto& records = result.histories[r].records;
            // Aborted runs are shorter than T+1; their last best-so-far carries forward.
            const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(t),
                                                          records.size() - 1);
            best[r] = records[idx].best_so_far;
        }
        std::vector<double> sorted = best;
        std::sort(sorted.begin(), sorted.end());
        result.median_best[static_cast<std::size_t>(t)] = detail::quantile_sorted(sorted, 0.5);
        result.iqr_best[static_cast<std::size_t>(t)] =
            detail::quantile_sorted(sorted, 0.75) - detail::quantile_sorted(sorted, 0.25);
    }

    double total = 0.0;
    double wall = 0.0;
    long iteration_count = 0;
    for (const RunHistory& h : result.histories) {
        total += static_cast<double>(h.total_evaluations());
        for (const IterationRecord& rec : h.records) {
            wall += rec.wall_ms;
            ++iteration_count;
        }
    }
    result.mean_total_evaluations = total / static_cast<double>(result.histories.size());
    result.mean_iteration_wall_ms = wall / static_cast<double>(iteration_count);
    return result;
}

//! Serialize every iteration of every replicate as plot-ready CSV. All
//! numeric text is shortest round-trip decimal; rows are replicate-major
//! with iteration 0 carrying the initial design.
inline void write_traces(const ExperimentResult& result, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_traces: cannot open " + path.string());
    out << "replicate,iteration,batch_size,cum_evaluations,best_value,wall_ms\n";
    for (std::size_t r = 0; r < result.histories.size(); ++r) {
        for (const IterationRecord& rec : result.histories[r].records) {
            out << r << ',' << rec.iteration << ',' << rec.proposal.size() << ','
                << rec.cum_evaluations << ',' << detail::format_double(rec.best_so_far) << ','
                << detail::format_double(rec.wall_ms) << '\n';
        }
    }
    out.flush();
    if (!out) throw std::runtime_error("write_traces: write failed for " + path.string());
}

//! One machine-readable object per experiment: the resolved configuration
//! and the headline aggregates. `final_best_median` is on the canonical
//! maximization scale; `final_objective_median` is on the benchmark's own.
inline void write_summary(const ExperimentResult& result, const std::filesystem::path& path) {
    const RunConfig& cfg = result.config;
    const bool minimizes = result.benchmark.sense == Sense::kMin;
    nlohmann::ordered_json j;
    j["function"] = cfg.function_name;
    j["strategy"] = cfg.strategy;
    j["dim"] = cfg.dim;
    j["iterations"] = cfg.iterations;
    j["initial_points"] = cfg.initial_points;
    j["fixed_batch_size"] = cfg.fixed_batch_size;
    j["ucb_beta_sqrt"] = cfg.ucb_beta_sqrt;
    j["kernel_gamma"] = cfg.kernel_gamma;
    j["replicates"] = cfg.replicates;
    j["seed"] = cfg.seed;
    j["sense"] = minimizes ? "min" : "max";
    j["final_best_median"] = result.median_best.back();
    j["final_best_iqr"] = result.iqr_best.back();
    j["final_objective_median"] =
        minimizes ? -result.median_best.back() : result.median_best.back();
    j["mean_total_evaluations"] = result.mean_total_evaluations;
    j["mean_iteration_wall_ms"] = result.mean_iteration_wall_ms;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_summary: cannot open " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write_summary: write failed for " + path.string());
}

//! One optimization run opened up for an external objective: ask() hands out
//! the next batch, tell() returns its outcomes. Outcomes are maximized as
//! given — negate before telling when the external goal is a minimum.
struct SessionState {
    RunConfig config;  // resolved; replicates are not meaningful here
    SearchDomain domain;
    int iteration = 0;  // completed ask/tell rounds (0 = initial design next)
    ObservationSet observations;
    std::optional<Eigen::MatrixXd> pending;  // batch awaiting outcomes

    SessionState(RunConfig cfg, SearchDomain dom)
        : config(std::move(cfg)), domain(std::move(dom)), observations(domain.dim()) {}
};

//! Resolve names and defaults for a fresh session on a registered
//! benchmark's domain (the objective itself stays external).
inline SessionState make_session(RunConfig config) {
    const Benchmark bench = get_benchmark(config.function_name);
    parse_strategy(config.strategy);  // validate early; sessions store the name
    config.dim = bench.dim;
    config.apply_defaults();
    return SessionState(std::move(config), bench.domain);
}

//! Propose the next batch and mark it pending. Iteration 0 is the uniform
//! initial design; later iterations fit the surrogate on everything told so
//! far and dispatch the configured strategy, drawing from the same seed →
//! iteration stream chain as the closed loop, so a session driven on a
//! benchmark reproduces run_loop point for point.
inline BatchProposal session_ask(SessionState& s) {
    if (s.pending)
        throw std::logic_error(
            "session_ask: the previous batch is still pending; tell its outcomes first");
    const RngStream root(s.config.seed);
    BatchProposal proposal;
    if (s.iteration == 0) {
        RngStream init_rng = root.substream(0);
        const int n0 = s.config.initial_points;
        proposal.points.resize(n0, s.domain.dim());
        proposal.metadata =
            Eigen::VectorXd::LinSpaced(n0, 0.0, static_cast<double>(n0 - 1));
        proposal.note = "initial design";
        for (int i = 0; i < n0; ++i)
            proposal.points.row(i) = uniform_point(s.domain, init_rng).transpose();
    } else {
        if (s.observations.n() == 0)
            throw std::runtime_error(
                "session_ask: no successful outcomes recorded; the surrogate cannot be fit");
        const StrategyId strategy = parse_strategy(s.config.strategy);
        const detail::Standardizer std_y = detail::Standardizer::from(s.observations.outcomes);
        ObservationSet fit_obs = s.observations;
        for (long i = 0; i < fit_obs.outcomes.size(); ++i)
            fit_obs.outcomes[i] = std_y.forward(fit_obs.outcomes[i]);
        const KernelParams params{s.config.kernel_gamma, 1.0, 1e-6};
        const GpPosterior gp = fit_with_retry(fit_obs, params);
        const AcquisitionSpec spec =
            strategy_uses_ei(strategy)
                ? AcquisitionSpec::ei(std_y.forward(s.observations.best_outcome()))
                : AcquisitionSpec::ucb(s.config.ucb_beta_sqrt);
        proposal = detail::dispatch_proposal(strategy, gp, spec, s.domain, s.config,
                                             root.substream(static_cast<std::uint64_t>(s.iteration)));
    }
    s.pending = proposal.points;
    return proposal;
}

//! Resolve the pending batch with one outcome per proposed point, in row
//! order. Non-finite outcomes mark failed evaluations and are skipped, as in
//! the closed loop; the iteration counter advances either way.
inline void session_tell(SessionState& s, const std::vector<double>& outcomes) {
    if (!s.pending)
        throw std::logic_error("session_tell: no pending batch; ask for one first");
    if (static_cast<long>(outcomes.size()) != s.pending->rows())
        throw std::invalid_argument("session_tell: expected " +
                                    std::to_string(s.pending->rows()) + " outcome(s), got " +
                                    std::to_string(outcomes.size()));
    for (long i = 0; i < s.pending->rows(); ++i) {
        if (std::isfinite(outcomes[static_cast<std::size_t>(i)]))
            s.observations.append(s.pending->row(i).transpose(),
                                  outcomes[static_cast<std::size_t>(i)]);
    }
    s.pending.reset();
    s.iteration += 1;
}

//! Persist a session as self-contained JSON (config, domain bounds,
//! observations, pending batch). Doubles serialize in shortest round-trip
//! form, which is what makes replay-from-file bit-identical.
inline void save_session(const SessionState& s, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["format"] = "b3o-session-v1";
    nlohmann::ordered_json cfg;
    cfg["function"] = s.config.function_name;
    cfg["strategy"] = s.config.strategy;
    cfg["dim"] = s.config.dim;
    cfg["iterations"] = s.config.iterations;
    cfg["initial_points"] = s.config.initial_points;
    cfg["fixed_batch_size"] = s.config.fixed_batch_size;
    cfg["ucb_beta_sqrt"] = s.config.ucb_beta_sqrt;
    cfg["kernel_gamma"] = s.config.kernel_gamma;
    cfg["seed"] = s.config.seed;
    j["config"] = std::move(cfg);
    j["domain"]["lower"] = detail::to_std_vector(s.domain.lower());
    j["domain"]["upper"] = detail::to_std_vector(s.domain.upper());
    j["iteration"] = s.iteration;
    j["observations"]["inputs"] = detail::to_nested_vector(s.observations.inputs);
    j["observations"]["outcomes"] = detail::to_std_vector(s.observations.outcomes);
    if (s.pending)
        j["pending"] = detail::to_nested_vector(*s.pending);
    else
        j["pending"] = nullptr;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_session: cannot open " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("save_session: write failed for " + path.string());
}

inline SessionState load_session(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_session: cannot open " + path.string());
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.value("format", std::string()) != "b3o-session-v1")
        throw std::runtime_error("load_session: " + path.string() +
                                 " is not a recognized session file");

    const nlohmann::json& cj = j.at("config");
    RunConfig cfg;
    cfg.function_name = cj.at("function").get<std::string>();
    cfg.strategy = cj.at("strategy").get<std::string>();
    cfg.dim = cj.at("dim").get<int>();
    cfg.iterations = cj.at("iterations").get<int>();
    cfg.initial_points = cj.at("initial_points").get<int>();
    cfg.fixed_batch_size = cj.at("fixed_batch_size").get<int>();
    cfg.ucb_beta_sqrt = cj.at("ucb_beta_sqrt").get<double>();
    cfg.kernel_gamma = cj.at("kernel_gamma").get<double>();
    cfg.seed = cj.at("seed").get<std::uint64_t>();
    cfg.replicates = 1;

    const auto lower = j.at("domain").at("lower").get<std::vector<double>>();
    const auto upper = j.at("domain").at("upper").get<std::vector<double>>();
    SearchDomain domain(
        Eigen::Map<const Eigen::VectorXd>(lower.data(), static_cast<long>(lower.size())),
        Eigen::Map<const Eigen::VectorXd>(upper.data(), static_cast<long>(upper.size())));

    SessionState s(std::move(cfg), std::move(domain));
    s.iteration = j.at("iteration").get<int>();
    const auto inputs = j.at("observations").at("inputs").get<std::vector<std::vector<double>>>();
    const auto outcomes = j.at("observations").at("outcomes").get<std::vector<double>>();
    if (inputs.size() != outcomes.size())
        throw std::runtime_error("load_session: observation inputs and outcomes disagree");
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        s.observations.append(
            Eigen::Map<const Eigen::VectorXd>(inputs[i].data(), static_cast<long>(inputs[i].size())),
            outcomes[i]);
    }
    if (!j.at("pending").is_null()) {
        const auto rows = j.at("pending").get<std::vector<std::vector<double>>>();
        Eigen::MatrixXd pending(static_cast<long>(rows.size()), s.domain.dim());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (static_cast<int>(rows[i].size()) != s.domain.dim())
                throw std::runtime_error("load_session: pending point dimension mismatch");
            pending.row(static_cast<long>(i)) =
                Eigen::Map<const Eigen::VectorXd>(rows[i].data(),
                                                  static_cast<long>(rows[i].size()))
                    .transpose();
        }
        s.pending = std::move(pending);
    }
    return s;
}

}  // namespace b3o
