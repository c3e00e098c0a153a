#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "acquisition.hpp"
#include "bgss.hpp"
#include "domain.hpp"
#include "errors.hpp"
#include "gp.hpp"
#include "igmm.hpp"
#include "rng.hpp"

namespace b3o {

//! One iteration's batch. `metadata` carries per-point provenance: the peak
//! weight for density-derived batches, the slot index for fixed-size batches.
//! `fallback` marks batches where the primary mechanism degraded to a single
//! acquisition maximizer; `note` says why.
struct BatchProposal {
    Eigen::MatrixXd points;    // n_t x d
    Eigen::VectorXd metadata;  // n_t
    bool fallback = false;
    std::string note;

    long size() const { return points.rows(); }
};

//! Record of one loop iteration (iteration 0 is the initial design).
//! `outcomes` aligns with the proposal rows; failed evaluations are NaN.
//! `best_so_far` and `outcomes` are on the canonical maximization scale.
struct IterationRecord {
    int iteration = 0;
    BatchProposal proposal;
    Eigen::VectorXd outcomes;
    double best_so_far = -std::numeric_limits<double>::infinity();
    long cum_evaluations = 0;
    double wall_ms = 0.0;
    std::string note;
};

//! Full run output: one record per iteration plus the initial design record.
struct RunHistory {
    std::vector<IterationRecord> records;
    bool aborted = false;
    std::string abort_reason;

    double best_value() const {
        if (records.empty()) throw std::logic_error("RunHistory: empty");
        return records.back().best_so_far;
    }
    long total_evaluations() const {
        if (records.empty()) throw std::logic_error("RunHistory: empty");
        return records.back().cum_evaluations;
    }
};

enum class StrategyId { kB3o, kEi, kUcb, kRandEi, kRandUcb, kClEi, kClUcb, kBucb };

inline const std::vector<std::pair<std::string, StrategyId>>& strategy_table() {
    static const std::vector<std::pair<std::string, StrategyId>> table = {
        {"b3o", StrategyId::kB3o},         {"ei", StrategyId::kEi},
        {"ucb", StrategyId::kUcb},         {"rand-ei", StrategyId::kRandEi},
        {"rand-ucb", StrategyId::kRandUcb}, {"cl-ei", StrategyId::kClEi},
        {"cl-ucb", StrategyId::kClUcb},     {"bucb", StrategyId::kBucb}};
    return table;
}

inline std::vector<std::string> strategy_names() {
    std::vector<std::string> names;
    for (const auto& [name, id] : strategy_table()) names.push_back(name);
    return names;
}

inline std::string strategy_name(StrategyId id) {
    for (const auto& [name, sid] : strategy_table())
        if (sid == id) return name;
    throw std::logic_error("strategy_name: unknown id");
}

inline StrategyId parse_strategy(const std::string& name) {
    for (const auto& [sname, id] : strategy_table())
        if (sname == name) return id;
    std::string msg = "unknown strategy '" + name + "'; valid strategies:";
    for (const auto& [sname, id] : strategy_table()) msg += " " + sname;
    throw std::invalid_argument(msg);
}

//! True when the strategy ranks candidates by expected improvement (the
//! incumbent-bearing acquisitions); false for the confidence-bound family.
inline bool strategy_uses_ei(StrategyId id) {
    return id == StrategyId::kEi || id == StrategyId::kRandEi || id == StrategyId::kClEi;
}

namespace detail {

// Substream ids inside one iteration-scoped stream. Every proposal's first
// acquisition maximization uses kMaximizeBase + 0, which is what makes the
// q = 1 reductions of all fixed-batch strategies coincide with the
// sequential strategy point-for-point.
inline constexpr std::uint64_t kMaximizeBase = 1000;
inline constexpr std::uint64_t kRandomTail = 2000;
inline constexpr std::uint64_t kDensityMinimize = 3000;
inline constexpr std::uint64_t kDensitySample = 3001;
inline constexpr std::uint64_t kDensityFit = 3002;

}  // namespace detail

//! One point: the acquisition maximizer.
inline BatchProposal propose_sequential(const GpPosterior& gp, const AcquisitionSpec& spec,
                                        const SearchDomain& domain, const RngStream& rng) {
    RngStream sub = rng.substream(detail::kMaximizeBase);
    SearchResult top = find_max(spec, gp, domain, sub);
    BatchProposal out;
    out.points = top.location.transpose();
    out.metadata = Eigen::VectorXd::Zero(1);
    return out;
}

//! Acquisition maximizer plus q-1 uniform draws.
inline BatchProposal propose_random_batch(const GpPosterior& gp, const AcquisitionSpec& spec,
                                          const SearchDomain& domain, int q,
                                          const RngStream& rng) {
    if (q < 1) throw std::invalid_argument("propose_random_batch: q must be >= 1");
    BatchProposal out = propose_sequential(gp, spec, domain, rng);
    out.points.conservativeResize(q, domain.dim());
    out.metadata = Eigen::VectorXd::LinSpaced(q, 0.0, static_cast<double>(q - 1));
    RngStream tail = rng.substream(detail::kRandomTail);
    for (int j = 1; j < q; ++j) out.points.row(j) = uniform_point(domain, tail).transpose();
    return out;
}

//! Greedy batch: maximize, commit to the predictive mean at the chosen point
//! (the "lie"), condition the surrogate on it, repeat. Conditioning on the
//! predictive mean leaves the posterior mean unchanged and shrinks the
//! variance, so only the uncertainty (and, for improvement-based
//! acquisitions, the incumbent) moves between slots.
inline BatchProposal propose_constant_liar(const GpPosterior& gp, const AcquisitionSpec& spec,
                                           const SearchDomain& domain, int q,
                                           const RngStream& rng) {
    if (q < 1) throw std::invalid_argument("propose_constant_liar: q must be >= 1");
    BatchProposal out;
    out.points.resize(q, domain.dim());
    out.metadata = Eigen::VectorXd::LinSpaced(q, 0.0, static_cast<double>(q - 1));

    GpPosterior current = gp;
    AcquisitionSpec step = spec;
    for (int j = 0; j < q; ++j) {
        RngStream sub = rng.substream(detail::kMaximizeBase + static_cast<std::uint64_t>(j));
        SearchResult top = find_max(step, current, domain, sub);
        out.points.row(j) = top.location.transpose();
        if (j + 1 < q) {
            const double lie = current.predict(top.location).mean;
            current = current.hallucinate(top.location);
            if (step.kind != AcquisitionSpec::Kind::kUcb)
                step.incumbent = std::max(step.incumbent, lie);
        }
    }
    return out;
}

//! Greedy confidence-bound batch: maximize the upper confidence bound,
//! condition the surrogate on the chosen point (variance-only update since
//! the hallucinated outcome is the predictive mean), repeat.
inline BatchProposal propose_bucb(const GpPosterior& gp, const SearchDomain& domain, int q,
                                  double beta_sqrt, const RngStream& rng) {
    return propose_constant_liar(gp, AcquisitionSpec::ucb(beta_sqrt), domain, q, rng);
}

//! Density-derived batch: locate the acquisition floor, draw samples whose
//! density is proportional to the acquisition excess above that floor, fit
//! the truncated Dirichlet-process mixture to the samples, and propose the
//! surviving component means. The batch size is however many components the
//! mixture keeps. If the sampler cannot produce enough points (flat or
//! degenerate acquisition), the proposal degrades to the single acquisition
//! maximizer and is flagged as a fallback.
inline BatchProposal propose_b3o(const GpPosterior& gp, const AcquisitionSpec& spec,
                                 const SearchDomain& domain, const SamplerConfig& sampler_config,
                                 const IgmmPrior& igmm_prior, const RngStream& rng) {
    RngStream min_rng = rng.substream(detail::kDensityMinimize);
    const SearchResult floor = find_min(spec, gp, domain, min_rng);

    SampleSet samples;
    try {
        samples = bgss(AcqSurface(spec, gp), domain, floor.value, sampler_config,
                       rng.substream(detail::kDensitySample));
    } catch (const TooFewSamplesError& err) {
        BatchProposal out = propose_sequential(gp, spec, domain, rng);
        out.metadata = Eigen::VectorXd::Ones(1);
        out.fallback = true;
        out.note = std::string("density sampler starved (") + err.what() +
                   "); fell back to the acquisition maximizer";
        return out;
    }

    const IgmmPosterior post =
        fit_igmm(samples, igmm_prior, rng.substream(detail::kDensityFit));
    const PeakSet peaks = extract_peaks(post, domain);

    BatchProposal out;
    const long n_t = static_cast<long>(peaks.means.size());
    out.points.resize(n_t, domain.dim());
    out.metadata.resize(n_t);
    for (long i = 0; i < n_t; ++i) {
        out.points.row(i) = peaks.means[static_cast<size_t>(i)].transpose();
        out.metadata[i] = peaks.weights[static_cast<size_t>(i)];
    }
    return out;
}

namespace detail {

//! Outcomes shifted to zero mean and unit scale for surrogate fitting (the
//! prior is zero-mean with unit signal variance). Degenerate spread keeps
//! scale 1 so constant data stays representable.
struct Standardizer {
    double shift = 0.0;
    double scale = 1.0;

    static Standardizer from(const Eigen::VectorXd& y) {
        Standardizer s;
        s.shift = y.mean();
        const double var = (y.array() - s.shift).square().mean();
        s.scale = var > 1e-24 ? std::sqrt(var) : 1.0;
        return s;
    }
    double forward(double y) const { return (y - shift) / scale; }
};

inline BatchProposal dispatch_proposal(StrategyId id, const GpPosterior& gp,
                                       const AcquisitionSpec& spec, const SearchDomain& domain,
                                       const RunConfig& cfg, const RngStream& rng) {
    switch (id) {
        case StrategyId::kB3o:
            return propose_b3o(gp, spec, domain, SamplerConfig{}, IgmmPrior{}, rng);
        case StrategyId::kEi:
        case StrategyId::kUcb:
            return propose_sequential(gp, spec, domain, rng);
        case StrategyId::kRandEi:
        case StrategyId::kRandUcb:
            return propose_random_batch(gp, spec, domain, cfg.fixed_batch_size, rng);
        case StrategyId::kClEi:
        case StrategyId::kClUcb:
            return propose_constant_liar(gp, spec, domain, cfg.fixed_batch_size, rng);
        case StrategyId::kBucb:
            return propose_bucb(gp, domain, cfg.fixed_batch_size, cfg.ucb_beta_sqrt, rng);
    }
    throw std::logic_error("dispatch_proposal: unknown strategy");
}

}  // namespace detail

//! Run the full loop: uniform initial design, then per iteration fit the
//! surrogate (on standardized outcomes), build the acquisition, propose a
//! batch, evaluate the objective at every batch point, and extend the data.
//! The objective is maximized; wrap minimization problems as -f beforehand.
//! A point whose evaluation throws or returns a non-finite value is recorded
//! as failed (NaN outcome) and skipped; an iteration with zero successful
//! evaluations aborts the run, returning the partial history.
template <class Objective>
RunHistory run_loop(Objective&& objective, const SearchDomain& domain, StrategyId strategy,
                    RunConfig config, const RngStream& rng) {
    if (config.dim < 1) config.dim = domain.dim();
    if (config.dim != domain.dim())
        throw std::invalid_argument("run_loop: config dimension does not match domain");
    config.apply_defaults();

    const auto evaluate = [&](const Eigen::VectorXd& x) -> double {
        try {
            const double y = objective(x);
            return std::isfinite(y) ? y : std::numeric_limits<double>::quiet_NaN();
        } catch (const std::exception&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    };
    const auto tick = [] { return std::chrono::steady_clock::now(); };
    const auto ms_since = [](std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    };

    RunHistory history;
    ObservationSet obs(domain.dim());

    {  // iteration 0: initial design
        const auto t0 = tick();
        RngStream init_rng = rng.substream(0);
        IterationRecord rec;
        rec.iteration = 0;
        rec.proposal.points.resize(config.initial_points, domain.dim());
        rec.proposal.metadata = Eigen::VectorXd::LinSpaced(
            config.initial_points, 0.0, static_cast<double>(config.initial_points - 1));
        rec.proposal.note = "initial design";
        for (int i = 0; i < config.initial_points; ++i)
            rec.proposal.points.row(i) = uniform_point(domain, init_rng).transpose();

        rec.outcomes.resize(config.initial_points);
        int failures = 0;
        for (int i = 0; i < config.initial_points; ++i) {
            const Eigen::VectorXd x = rec.proposal.points.row(i).transpose();
            rec.outcomes[i] = evaluate(x);
            if (std::isfinite(rec.outcomes[i]))
                obs.append(x, rec.outcomes[i]);
            else
                ++failures;
        }
        rec.cum_evaluations = config.initial_points;
        if (failures > 0) rec.note = std::to_string(failures) + " evaluation(s) failed";
        if (obs.n() == 0) {
            rec.wall_ms = ms_since(t0);
            history.records.push_back(std::move(rec));
            history.aborted = true;
            history.abort_reason = "no successful evaluations in the initial design";
            return history;
        }
        rec.best_so_far = obs.best_outcome();
        rec.wall_ms = ms_since(t0);
        history.records.push_back(std::move(rec));
    }

    const KernelParams params{config.kernel_gamma, 1.0, 1e-6};
    for (int t = 1; t <= config.iterations; ++t) {
        const auto t0 = tick();
        const RngStream iter_rng = rng.substream(static_cast<std::uint64_t>(t));

        const detail::Standardizer std_y = detail::Standardizer::from(obs.outcomes);
        ObservationSet fit_obs = obs;
        for (long i = 0; i < fit_obs.outcomes.size(); ++i)
            fit_obs.outcomes[i] = std_y.forward(fit_obs.outcomes[i]);
        const GpPosterior gp = fit_with_retry(fit_obs, params);

        const AcquisitionSpec spec = strategy_uses_ei(strategy)
                                         ? AcquisitionSpec::ei(std_y.forward(obs.best_outcome()))
                                         : AcquisitionSpec::ucb(config.ucb_beta_sqrt);

        IterationRecord rec;
        rec.iteration = t;
        rec.proposal = detail::dispatch_proposal(strategy, gp, spec, domain, config, iter_rng);

        const long n_t = rec.proposal.size();
        rec.outcomes.resize(n_t);
        int failures = 0;
        for (long i = 0; i < n_t; ++i) {
            const Eigen::VectorXd x = rec.proposal.points.row(i).transpose();
            rec.outcomes[i] = evaluate(x);
            if (std::isfinite(rec.outcomes[i]))
                obs.append(x, rec.outcomes[i]);
            else
                ++failures;
        }
        rec.cum_evaluations = history.records.back().cum_evaluations + n_t;
        rec.best_so_far = obs.best_outcome();
        if (failures > 0) rec.note = std::to_string(failures) + " evaluation(s) failed";
        rec.wall_ms = ms_since(t0);

        const bool all_failed = failures == n_t;
        history.records.push_back(std::move(rec));
        if (all_failed) {
            history.aborted = true;
            history.abort_reason =
                "iteration " + std::to_string(t) + " had no successful evaluations";
            return history;
        }
    }
    return history;
}

}  // namespace b3o
