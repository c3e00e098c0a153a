#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "domain.hpp"
#include "gp.hpp"
#include "rng.hpp"

namespace b3o {

namespace detail {
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr double kSqrtHalf = 0.70710678118654752440;

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * kSqrtHalf); }
inline double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

// Lexicographic order breaks value ties deterministically.
inline bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return true;
        if (a[i] > b[i]) return false;
    }
    return false;
}
}  // namespace detail

//! Probability of improving on `incumbent`; degenerates to a step (with a 0.5
//! tie) when the predictive spread vanishes.
inline double pi_value(double mean, double sigma, double incumbent) {
    if (sigma <= 0.0) return mean > incumbent ? 1.0 : (mean < incumbent ? 0.0 : 0.5);
    return detail::normal_cdf((mean - incumbent) / sigma);
}

//! Expected improvement over `incumbent`; exactly zero at zero spread. The
//! closed form can round to a tiny negative deep in the left tail, so the
//! result is clamped at zero.
inline double ei_value(double mean, double sigma, double incumbent) {
    if (sigma <= 0.0) return 0.0;
    double u = (mean - incumbent) / sigma;
    double v = (mean - incumbent) * detail::normal_cdf(u) + sigma * detail::normal_pdf(u);
    return v > 0.0 ? v : 0.0;
}

//! Upper confidence bound mean + sqrt(beta) * sigma.
inline double ucb_value(double mean, double sigma, double beta_sqrt) {
    return mean + beta_sqrt * sigma;
}

struct AcquisitionSpec {
    enum class Kind { kPi, kEi, kUcb };
    Kind kind;
    double incumbent = 0.0;  // best outcome so far; meaningful for PI/EI
    double beta_sqrt = 2.0;  // exploration weight; meaningful for UCB

    static AcquisitionSpec pi(double incumbent) { return {Kind::kPi, incumbent, 0.0}; }
    static AcquisitionSpec ei(double incumbent) { return {Kind::kEi, incumbent, 0.0}; }
    static AcquisitionSpec ucb(double beta_sqrt) { return {Kind::kUcb, 0.0, beta_sqrt}; }

    double from_moments(double mean, double sigma) const {
        switch (kind) {
            case Kind::kPi: return pi_value(mean, sigma, incumbent);
            case Kind::kEi: return ei_value(mean, sigma, incumbent);
            case Kind::kUcb: return ucb_value(mean, sigma, beta_sqrt);
        }
        throw std::logic_error("AcquisitionSpec: bad kind");
    }
};

inline double acq_value(const AcquisitionSpec& spec, const GpPosterior& gp,
                        const Eigen::VectorXd& x) {
    Prediction pr = gp.predict(x);
    double v = spec.from_moments(pr.mean, std::sqrt(pr.variance));
    if (!std::isfinite(v)) throw std::runtime_error("acq_value: non-finite acquisition value");
    return v;
}

//! Acquisition surface bound to a GP posterior; exposes a vectorized path so
//! global search can evaluate probe blocks with matrix kernels.
class AcqSurface {
public:
    AcqSurface(const AcquisitionSpec& spec, const GpPosterior& gp) : spec_(spec), gp_(&gp) {}

    double operator()(const Eigen::VectorXd& x) const { return acq_value(spec_, *gp_, x); }

    Eigen::VectorXd eval_batch(const Eigen::MatrixXd& pts) const {
        auto [means, vars] = gp_->predict_batch(pts);
        Eigen::VectorXd out(pts.rows());
        for (Eigen::Index i = 0; i < pts.rows(); ++i) {
            out[i] = spec_.from_moments(means[i], std::sqrt(vars[i]));
            if (!std::isfinite(out[i]))
                throw std::runtime_error("acq_value: non-finite acquisition value");
        }
        return out;
    }

private:
    AcquisitionSpec spec_;
    const GpPosterior* gp_;
};

struct SearchResult {
    Eigen::VectorXd location;
    double value;
};

namespace detail {

template <class F>
concept BatchEvaluable = requires(const F& f, const Eigen::MatrixXd& m) {
    { f.eval_batch(m) } -> std::convertible_to<Eigen::VectorXd>;
};

template <class F>
Eigen::VectorXd eval_block(const F& f, const Eigen::MatrixXd& pts) {
    if constexpr (BatchEvaluable<F>) {
        return f.eval_batch(pts);
    } else {
        Eigen::VectorXd out(pts.rows());
        for (Eigen::Index i = 0; i < pts.rows(); ++i) {
            out[i] = f(pts.row(i).transpose().eval());
            if (!std::isfinite(out[i]))
                throw std::runtime_error("global search: non-finite surface value");
        }
        return out;
    }
}

// Multi-start minimization: a uniform probe sweep seeds compass searches at the
// most promising probes, within a total evaluation budget. Deterministic for a
// fixed stream; value ties resolve to the lexicographically smallest location.
template <class F>
SearchResult minimize_surface(const F& f, const SearchDomain& domain, RngStream& rng, long budget,
                              int starts) {
    const int d = domain.dim();
    if (budget <= 0) budget = 2000L * d;
    if (starts <= 0) starts = 20 + 5 * d;

    const long n_probe = std::min<long>(1000, budget / 2);
    Eigen::MatrixXd probes(n_probe, d);
    for (long i = 0; i < n_probe; ++i) probes.row(i) = uniform_point(domain, rng).transpose();
    Eigen::VectorXd pv = eval_block(f, probes);
    long spent = n_probe;

    Eigen::VectorXd best_x = probes.row(0).transpose();
    double best_v = pv[0];
    auto consider = [&](const Eigen::VectorXd& x, double v) {
        if (v < best_v || (v == best_v && lex_less(x, best_x))) {
            best_v = v;
            best_x = x;
        }
    };
    for (long i = 1; i < n_probe; ++i) consider(probes.row(i).transpose(), pv[i]);

    std::vector<long> order(n_probe);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](long a, long b) { return pv[a] < pv[b]; });
    const int n_starts = static_cast<int>(std::min<long>(starts, n_probe));
    const long per_start = std::max<long>(2L * d, (budget - spent) / std::max(1, n_starts));

    const Eigen::VectorXd widths = domain.widths();
    for (int s = 0; s < n_starts && spent < budget; ++s) {
        Eigen::VectorXd x = probes.row(order[s]).transpose();
        double fx = pv[order[s]];
        double h = 0.1;
        long local = std::min(per_start, budget - spent);
        while (local >= 2 * d && h > 1e-7) {
            Eigen::MatrixXd nb(2 * d, d);
            for (int axis = 0; axis < d; ++axis) {
                Eigen::VectorXd lo = x, hi = x;
                lo[axis] = std::max(domain.lower()[axis], x[axis] - h * widths[axis]);
                hi[axis] = std::min(domain.upper()[axis], x[axis] + h * widths[axis]);
                nb.row(2 * axis) = lo.transpose();
                nb.row(2 * axis + 1) = hi.transpose();
            }
            Eigen::VectorXd nv = eval_block(f, nb);
            local -= 2 * d;
            spent += 2 * d;
            Eigen::Index arg;
            double mv = nv.minCoeff(&arg);
            if (mv < fx) {
                x = nb.row(arg).transpose();
                fx = mv;
            } else {
                h *= 0.5;
            }
        }
        consider(x, fx);
    }
    return {best_x, best_v};
}

}  // namespace detail

//! Global minimum search over an arbitrary surface (test hooks use this directly).
template <class F>
SearchResult find_min(const F& f, const SearchDomain& domain, RngStream& rng, long budget = -1,
                      int starts = -1) {
    return detail::minimize_surface(f, domain, rng, budget, starts);
}

template <class F>
struct NegatedSurface {
    const F* f;
    double operator()(const Eigen::VectorXd& x) const { return -(*f)(x); }
    Eigen::VectorXd eval_batch(const Eigen::MatrixXd& m) const
        requires detail::BatchEvaluable<F>
    {
        return -f->eval_batch(m);
    }
};

template <class F>
SearchResult find_max(const F& f, const SearchDomain& domain, RngStream& rng, long budget = -1,
                      int starts = -1) {
    NegatedSurface<F> neg{&f};
    SearchResult r = detail::minimize_surface(neg, domain, rng, budget, starts);
    return {std::move(r.location), -r.value};
}

inline SearchResult find_min(const AcquisitionSpec& spec, const GpPosterior& gp,
                             const SearchDomain& domain, RngStream& rng) {
    return find_min(AcqSurface(spec, gp), domain, rng);
}

inline SearchResult find_max(const AcquisitionSpec& spec, const GpPosterior& gp,
                             const SearchDomain& domain, RngStream& rng) {
    return find_max(AcqSurface(spec, gp), domain, rng);
}

}  // namespace b3o
