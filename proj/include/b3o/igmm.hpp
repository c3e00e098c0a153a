#pragma once

#include <b3o/bgss.hpp>
#include <b3o/domain.hpp>
#include <b3o/errors.hpp>
#include <b3o/rng.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace b3o {

//! Digamma (logarithmic derivative of the gamma function) for x > 0.
//! Recurrence up to x >= 6, then the asymptotic Bernoulli series; absolute
//! error below 1e-11 over that range.
inline double digamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("digamma: requires x > 0");
    double acc = 0.0;
    while (x < 6.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    const double tail =
        std::log(x) - 0.5 * inv -
        inv2 * (1.0 / 12 -
                inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 * (1.0 / 132)))));
    return acc + tail;
}

//! Prior for the truncated Dirichlet-process Gaussian mixture. Component
//! means carry a N(mean_center, I) prior with the identity covariance fixed;
//! component precisions carry a Wishart(wishart_dof, wishart_scale) prior.
struct IgmmPrior {
    double concentration = 1.0;     //!< stick-breaking strength (gamma)
    int truncation = 10;            //!< number of explicit components K
    Eigen::VectorXd mean_center;    //!< empty -> sample mean
    double wishart_dof = -1.0;      //!< negative -> D + 2
    Eigen::MatrixXd wishart_scale;  //!< empty -> identity

    //! Fill defaults against a concrete sample matrix and validate.
    IgmmPrior resolved(const Eigen::MatrixXd& samples) const {
        const long d = samples.cols();
        IgmmPrior out = *this;
        if (out.mean_center.size() == 0)
            out.mean_center = samples.colwise().mean().transpose();
        if (out.wishart_dof < 0.0) out.wishart_dof = static_cast<double>(d) + 2.0;
        if (out.wishart_scale.size() == 0)
            out.wishart_scale = Eigen::MatrixXd::Identity(d, d);

        if (!(out.concentration > 0.0))
            throw std::invalid_argument("IgmmPrior: concentration must be > 0");
        if (out.truncation < 1) throw std::invalid_argument("IgmmPrior: truncation must be >= 1");
        if (out.mean_center.size() != d)
            throw std::invalid_argument("IgmmPrior: mean_center dimension mismatch");
        if (!out.mean_center.allFinite())
            throw std::invalid_argument("IgmmPrior: mean_center must be finite");
        if (!(out.wishart_dof > static_cast<double>(d) - 1.0))
            throw std::invalid_argument("IgmmPrior: wishart_dof must exceed dimension - 1");
        if (out.wishart_scale.rows() != d || out.wishart_scale.cols() != d)
            throw std::invalid_argument("IgmmPrior: wishart_scale must be D x D");
        if (!out.wishart_scale.allFinite())
            throw std::invalid_argument("IgmmPrior: wishart_scale must be finite");
        Eigen::LLT<Eigen::MatrixXd> llt(out.wishart_scale);
        if (llt.info() != Eigen::Success)
            throw std::invalid_argument("IgmmPrior: wishart_scale must be positive definite");
        return out;
    }
};

//! Variational posterior over the truncated mixture. Stick weights are
//! Beta(stick(k,0), stick(k,1)) for k < K-1; the last stick is pinned to 1 and
//! its row holds the prior placeholder. Component means are Gaussian with the
//! given centers and free covariances; precisions are Wishart.
struct IgmmPosterior {
    Eigen::MatrixXd stick;                       //!< K x 2 Beta parameters
    Eigen::MatrixXd means;                       //!< K x D component mean centers
    std::vector<Eigen::MatrixXd> mean_cov;       //!< K mean covariances, D x D
    Eigen::VectorXd wishart_dof;                 //!< K degrees of freedom
    std::vector<Eigen::MatrixXd> wishart_scale;  //!< K scale matrices, D x D
    Eigen::MatrixXd resp;                        //!< N x K responsibilities
    std::vector<double> elbo_trace;              //!< bound value after each sweep
    IgmmPrior prior;                             //!< resolved prior used by the fit

    //! Expected mixing weights: column means of the responsibilities.
    Eigen::VectorXd weights() const { return resp.colwise().mean().transpose(); }
};

//! Surviving component means (clipped to the domain) with their weights.
struct PeakSet {
    std::vector<Eigen::VectorXd> means;
    std::vector<double> weights;
};

inline double elbo(const IgmmPosterior& q, const Eigen::MatrixXd& samples,
                   const IgmmPrior& prior_in);

namespace detail {

//! log det of a symmetric positive-definite matrix; NaN when the
//! factorization fails so callers' finiteness checks fire.
inline double logdet_spd(const Eigen::MatrixXd& m) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

inline double log_multivariate_gamma(long dim, double x) {
    double r = static_cast<double>(dim) * static_cast<double>(dim - 1) / 4.0 *
               std::log(std::numbers::pi);
    for (long j = 1; j <= dim; ++j) r += std::lgamma(x + (1.0 - static_cast<double>(j)) / 2.0);
    return r;
}

inline double log_wishart_norm(long dim, double dof, double logdet_scale) {
    return dof * static_cast<double>(dim) / 2.0 * std::numbers::ln2 + dof / 2.0 * logdet_scale +
           log_multivariate_gamma(dim, dof / 2.0);
}

//! E[log det Lambda] under Wishart(dof, scale).
inline double e_logdet_precision(long dim, double dof, double logdet_scale) {
    double s = 0.0;
    for (long j = 1; j <= dim; ++j) s += digamma((dof + 1.0 - static_cast<double>(j)) / 2.0);
    return s + static_cast<double>(dim) * std::numbers::ln2 + logdet_scale;
}

//! E[log pi_k] for every component under the stick-breaking posterior.
inline Eigen::VectorXd e_log_mixing(const Eigen::MatrixXd& stick) {
    const long k_max = stick.rows();
    Eigen::VectorXd out(k_max);
    double carried = 0.0;  // sum of E[log(1 - v_j)] over j < k
    for (long k = 0; k < k_max; ++k) {
        if (k < k_max - 1) {
            const double e1 = stick(k, 0), e2 = stick(k, 1);
            const double common = digamma(e1 + e2);
            out[k] = carried + digamma(e1) - common;
            carried += digamma(e2) - common;
        } else {
            out[k] = carried;  // last stick pinned to one
        }
    }
    return out;
}

inline void update_stick(IgmmPosterior& q) {
    const long k_max = q.resp.cols();
    const Eigen::VectorXd nk = q.resp.colwise().sum().transpose();
    q.stick.resize(k_max, 2);
    q.stick(k_max - 1, 0) = 1.0;
    q.stick(k_max - 1, 1) = q.prior.concentration;
    double tail = 0.0;
    for (long k = k_max - 2; k >= 0; --k) {
        tail += nk[k + 1];
        q.stick(k, 0) = 1.0 + nk[k];
        q.stick(k, 1) = q.prior.concentration + tail;
    }
}

inline void update_means(IgmmPosterior& q, const Eigen::MatrixXd& samples) {
    const long d = samples.cols();
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
    for (long k = 0; k < q.resp.cols(); ++k) {
        const double a = q.wishart_dof[k];
        const Eigen::MatrixXd& b = q.wishart_scale[static_cast<size_t>(k)];
        const double nk = q.resp.col(k).sum();
        const Eigen::VectorXd sk = samples.transpose() * q.resp.col(k);
        const Eigen::MatrixXd prec = eye + a * nk * b;
        const Eigen::VectorXd rhs = q.prior.mean_center + a * (b * sk);
        const Eigen::LLT<Eigen::MatrixXd> llt(prec);
        q.means.row(k) = llt.solve(rhs).transpose();
        q.mean_cov[static_cast<size_t>(k)] = llt.solve(eye);
    }
}

inline void update_wishart(IgmmPosterior& q, const Eigen::MatrixXd& samples,
                           const Eigen::MatrixXd& b0_inv) {
    const long d = samples.cols();
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
    for (long k = 0; k < q.resp.cols(); ++k) {
        const double nk = q.resp.col(k).sum();
        const Eigen::MatrixXd centered = samples.rowwise() - q.means.row(k);
        const Eigen::MatrixXd scatter =
            centered.transpose() * q.resp.col(k).asDiagonal() * centered;
        // the mean posterior's covariance contributes nk * Cov_q(mu_k)
        const Eigen::MatrixXd scale_inv =
            b0_inv + scatter + nk * q.mean_cov[static_cast<size_t>(k)];
        q.wishart_dof[k] = q.prior.wishart_dof + nk;
        q.wishart_scale[static_cast<size_t>(k)] = scale_inv.llt().solve(eye);
    }
}

inline void update_resp(IgmmPosterior& q, const Eigen::MatrixXd& samples) {
    const long n = samples.rows();
    const long d = samples.cols();
    const long k_max = q.resp.cols();
    const Eigen::VectorXd e_logpi = e_log_mixing(q.stick);
    const double ln2pi = std::log(2.0 * std::numbers::pi);

    Eigen::MatrixXd lnrho(n, k_max);
    for (long k = 0; k < k_max; ++k) {
        const double a = q.wishart_dof[k];
        const Eigen::MatrixXd& b = q.wishart_scale[static_cast<size_t>(k)];
        const double e_logdet = e_logdet_precision(d, a, logdet_spd(b));
        const Eigen::MatrixXd centered = samples.rowwise() - q.means.row(k);
        const Eigen::VectorXd quad = (centered * b).cwiseProduct(centered).rowwise().sum();
        lnrho.col(k) =
            (e_logpi[k] + 0.5 * e_logdet - static_cast<double>(d) / 2.0 * ln2pi -
             0.5 * a * (b * q.mean_cov[static_cast<size_t>(k)]).trace()) -
            (0.5 * a) * quad.array();
    }
    const Eigen::VectorXd row_max = lnrho.rowwise().maxCoeff();
    Eigen::MatrixXd w = (lnrho.colwise() - row_max).array().exp();
    q.resp = w.array().colwise() / w.rowwise().sum().array();
}

//! Relabel components in descending-mass order (joint permutation of all
//! per-component state). For a truncated stick-breaking posterior this is
//! itself an ascent move on the bound, and it collapses duplicate components
//! orders of magnitude faster than plain cycling. Stable, so equal masses
//! keep their order and the fit stays deterministic.
inline void sort_components_by_mass(IgmmPosterior& q) {
    const long k_max = q.resp.cols();
    const Eigen::VectorXd nk = q.resp.colwise().sum().transpose();
    std::vector<long> order(static_cast<size_t>(k_max));
    for (long k = 0; k < k_max; ++k) order[static_cast<size_t>(k)] = k;
    std::stable_sort(order.begin(), order.end(), [&](long a, long b) { return nk[a] > nk[b]; });

    bool identity = true;
    for (long k = 0; k < k_max; ++k)
        if (order[static_cast<size_t>(k)] != k) identity = false;
    if (identity) return;

    Eigen::MatrixXd resp(q.resp.rows(), k_max);
    Eigen::MatrixXd means(k_max, q.means.cols());
    std::vector<Eigen::MatrixXd> cov(static_cast<size_t>(k_max));
    Eigen::VectorXd dof(k_max);
    std::vector<Eigen::MatrixXd> scale(static_cast<size_t>(k_max));
    for (long k = 0; k < k_max; ++k) {
        const long src = order[static_cast<size_t>(k)];
        resp.col(k) = q.resp.col(src);
        means.row(k) = q.means.row(src);
        cov[static_cast<size_t>(k)] = q.mean_cov[static_cast<size_t>(src)];
        dof[k] = q.wishart_dof[src];
        scale[static_cast<size_t>(k)] = q.wishart_scale[static_cast<size_t>(src)];
    }
    q.resp = std::move(resp);
    q.means = std::move(means);
    q.mean_cov = std::move(cov);
    q.wishart_dof = std::move(dof);
    q.wishart_scale = std::move(scale);
    // stick parameters are rebuilt from the permuted responsibilities next
}

//! Approximate length scale of a component under its Wishart precision.
inline double component_width(const IgmmPosterior& q, long k) {
    const double d = static_cast<double>(q.means.cols());
    const double mean_precision =
        q.wishart_dof[k] * q.wishart_scale[static_cast<size_t>(k)].trace() / d;
    return mean_precision > 0.0 ? std::sqrt(1.0 / mean_precision)
                                : std::numeric_limits<double>::infinity();
}

//! Bound-guarded merge moves. Mean-field stick-breaking posteriors admit a
//! near-flat manifold where several components share one location and split
//! its mass in a self-consistent ratio; plain cycling escapes it only after
//! O(N) sweeps. Tentatively pooling the responsibilities of nearby component
//! pairs and keeping the result only when the bound strictly improves removes
//! those duplicates in one step while preserving the ascent guarantee.
//! Returns the (possibly improved) bound.
inline double try_merges(IgmmPosterior& q, const Eigen::MatrixXd& samples,
                         const Eigen::MatrixXd& b0_inv, double current_bound) {
    const long k_max = q.resp.cols();
    if (k_max < 2 || !std::isfinite(current_bound)) return current_bound;

    bool accepted = true;
    while (accepted) {
        accepted = false;
        const Eigen::VectorXd nk = q.resp.colwise().sum().transpose();
        std::vector<std::tuple<double, long, long>> candidates;  // (distance, i, j)
        for (long i = 0; i < k_max; ++i) {
            for (long j = i + 1; j < k_max; ++j) {
                if (nk[i] < 1.0 || nk[j] < 1.0) continue;
                const double dist = (q.means.row(i) - q.means.row(j)).norm();
                const double reach = std::max(component_width(q, i), component_width(q, j));
                if (dist <= reach) candidates.emplace_back(dist, i, j);
            }
        }
        std::sort(candidates.begin(), candidates.end());
        for (const auto& [dist, i, j] : candidates) {
            IgmmPosterior trial = q;
            trial.resp.col(i) += trial.resp.col(j);
            trial.resp.col(j).setZero();
            sort_components_by_mass(trial);
            update_stick(trial);
            update_means(trial, samples);
            update_wishart(trial, samples, b0_inv);
            const double merged = elbo(trial, samples, q.prior);
            if (std::isfinite(merged) && merged > current_bound) {
                q = std::move(trial);
                current_bound = merged;
                accepted = true;
                break;  // rescan against the merged state
            }
        }
    }
    return current_bound;
}

//! k-means++-style seeding turned into smoothed hard-assignment
//! responsibilities. Deterministic given the stream.
inline Eigen::MatrixXd seeded_responsibilities(const Eigen::MatrixXd& samples, int k_max,
                                               RngStream& rng) {
    const long n = samples.rows();
    const long n_seeds = std::min<long>(k_max, n);

    std::vector<long> seeds;
    seeds.reserve(static_cast<size_t>(n_seeds));
    seeds.push_back(std::min<long>(n - 1, static_cast<long>(rng.uniform01() * n)));
    Eigen::VectorXd d2 = (samples.rowwise() - samples.row(seeds[0])).rowwise().squaredNorm();

    while (static_cast<long>(seeds.size()) < n_seeds) {
        const double total = d2.sum();
        long pick = 0;
        if (!(total > 0.0) || !std::isfinite(total)) {
            d2.maxCoeff(&pick);  // degenerate weights: take the farthest point
        } else {
            const double r = rng.uniform01() * total;
            double cum = 0.0;
            pick = n - 1;
            for (long i = 0; i < n; ++i) {
                cum += d2[i];
                if (cum > r) {
                    pick = i;
                    break;
                }
            }
        }
        seeds.push_back(pick);
        d2 = d2.cwiseMin((samples.rowwise() - samples.row(pick)).rowwise().squaredNorm());
    }

    Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, k_max);
    for (long i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        long arg = 0;
        for (size_t j = 0; j < seeds.size(); ++j) {
            const double dd = (samples.row(i) - samples.row(seeds[j])).squaredNorm();
            if (dd < best) {
                best = dd;
                arg = static_cast<long>(j);
            }
        }
        resp(i, arg) = 1.0;
    }
    const double eps = 1e-3;  // keep every component faintly alive
    resp = (resp.array() + eps) / (1.0 + k_max * eps);
    return resp;
}

}  // namespace detail

//! Evidence lower bound of the variational posterior on the given samples.
//! Pure function of its arguments: recomputing on unchanged inputs is
//! bit-stable.
inline double elbo(const IgmmPosterior& q, const Eigen::MatrixXd& samples,
                   const IgmmPrior& prior_in) {
    const long n = samples.rows();
    const long d = samples.cols();
    const long k_max = q.means.rows();
    if (q.resp.rows() != n || q.resp.cols() != k_max || q.means.cols() != d ||
        q.stick.rows() != k_max || q.stick.cols() != 2 || q.wishart_dof.size() != k_max ||
        static_cast<long>(q.wishart_scale.size()) != k_max)
        throw std::invalid_argument("elbo: posterior/sample shape mismatch");

    if (static_cast<long>(q.mean_cov.size()) != k_max)
        throw std::invalid_argument("elbo: posterior/sample shape mismatch");

    const IgmmPrior prior = prior_in.resolved(samples);
    const double gamma = prior.concentration;
    const double a0 = prior.wishart_dof;
    const double ln2pi = std::log(2.0 * std::numbers::pi);
    const Eigen::MatrixXd b0_inv =
        prior.wishart_scale.llt().solve(Eigen::MatrixXd::Identity(d, d));
    const double logdet_b0 = detail::logdet_spd(prior.wishart_scale);
    const double ln_norm_prior = detail::log_wishart_norm(d, a0, logdet_b0);

    Eigen::VectorXd e_logdet(k_max);
    for (long k = 0; k < k_max; ++k)
        e_logdet[k] = detail::e_logdet_precision(
            d, q.wishart_dof[k], detail::logdet_spd(q.wishart_scale[static_cast<size_t>(k)]));
    const Eigen::VectorXd e_logpi = detail::e_log_mixing(q.stick);

    double bound = 0.0;

    // stick-breaking prior and Beta entropies (free sticks only)
    for (long k = 0; k < k_max - 1; ++k) {
        const double e1 = q.stick(k, 0), e2 = q.stick(k, 1);
        const double common = digamma(e1 + e2);
        const double e_log1mv = digamma(e2) - common;
        bound += std::log(gamma) + (gamma - 1.0) * e_log1mv;
        const double ln_beta = std::lgamma(e1) + std::lgamma(e2) - std::lgamma(e1 + e2);
        bound += ln_beta - (e1 - 1.0) * digamma(e1) - (e2 - 1.0) * digamma(e2) +
                 (e1 + e2 - 2.0) * common;
    }

    // mean prior (unit prior covariance) + Gaussian entropy (free covariance)
    for (long k = 0; k < k_max; ++k) {
        const Eigen::MatrixXd& v = q.mean_cov[static_cast<size_t>(k)];
        const double sq = (q.means.row(k).transpose() - prior.mean_center).squaredNorm();
        bound += -static_cast<double>(d) / 2.0 * ln2pi - 0.5 * (sq + v.trace());
        bound += static_cast<double>(d) / 2.0 *
                     std::log(2.0 * std::numbers::pi * std::numbers::e) +
                 0.5 * detail::logdet_spd(v);
    }

    // precision prior + Wishart entropy
    for (long k = 0; k < k_max; ++k) {
        const double a = q.wishart_dof[k];
        const Eigen::MatrixXd& b = q.wishart_scale[static_cast<size_t>(k)];
        bound += (a0 - static_cast<double>(d) - 1.0) / 2.0 * e_logdet[k] -
                 0.5 * (b0_inv * (a * b)).trace() - ln_norm_prior;
        const double logdet_b = detail::logdet_spd(b);
        bound += detail::log_wishart_norm(d, a, logdet_b) -
                 (a - static_cast<double>(d) - 1.0) / 2.0 * e_logdet[k] +
                 a * static_cast<double>(d) / 2.0;
    }

    // assignments, data term, and multinomial entropy
    for (long k = 0; k < k_max; ++k) {
        const double a = q.wishart_dof[k];
        const Eigen::MatrixXd& b = q.wishart_scale[static_cast<size_t>(k)];
        const Eigen::MatrixXd centered = samples.rowwise() - q.means.row(k);
        const Eigen::VectorXd quad = (centered * b).cwiseProduct(centered).rowwise().sum();
        const double fixed =
            e_logpi[k] + 0.5 * e_logdet[k] - static_cast<double>(d) / 2.0 * ln2pi -
            0.5 * a * (b * q.mean_cov[static_cast<size_t>(k)]).trace();
        for (long i = 0; i < n; ++i) {
            const double phi = q.resp(i, k);
            bound += phi * (fixed - 0.5 * a * quad[i]);
            if (phi > 0.0) bound -= phi * std::log(phi);
        }
    }
    return bound;
}

//! Fit the truncated Dirichlet-process Gaussian mixture by coordinate-ascent
//! variational inference. Responsibilities are initialized from a
//! k-means++-style seeding driven by `rng`; sweeps cycle
//! {responsibilities, sticks, means, precisions}, followed by bound-guarded
//! duplicate merges, until the bound improves by less than `tol` (relative)
//! or `max_sweeps` is reached. Every accepted step is an ascent move, so the
//! recorded bound trace is nondecreasing after the first sweep.
inline IgmmPosterior fit_igmm(const Eigen::MatrixXd& samples, const IgmmPrior& prior_in,
                              RngStream rng, double tol = 1e-5, int max_sweeps = 200) {
    const long n = samples.rows();
    const long d = samples.cols();
    if (n == 0 || d == 0) throw std::invalid_argument("fit_igmm: empty sample matrix");
    if (!samples.allFinite()) throw std::invalid_argument("fit_igmm: samples must be finite");
    if (n < d + 2)
        throw TooFewSamplesError(n, d + 2,
                                 "fit_igmm: got " + std::to_string(n) + " samples, need " +
                                     std::to_string(d + 2) + " for dimension " +
                                     std::to_string(d));
    if (!(tol >= 0.0)) throw std::invalid_argument("fit_igmm: tol must be >= 0");
    if (max_sweeps < 1) throw std::invalid_argument("fit_igmm: max_sweeps must be >= 1");

    const IgmmPrior prior = prior_in.resolved(samples);
    const int k_max = prior.truncation;
    const Eigen::MatrixXd b0_inv =
        prior.wishart_scale.llt().solve(Eigen::MatrixXd::Identity(d, d));

    IgmmPosterior q;
    q.prior = prior;
    q.resp = detail::seeded_responsibilities(samples, k_max, rng);
    q.means = Eigen::MatrixXd::Zero(k_max, d);
    q.mean_cov.assign(static_cast<size_t>(k_max), Eigen::MatrixXd::Identity(d, d));
    q.wishart_dof = Eigen::VectorXd::Constant(k_max, prior.wishart_dof);
    q.wishart_scale.assign(static_cast<size_t>(k_max), prior.wishart_scale);

    // sweep 0: globals from the seeded responsibilities
    detail::sort_components_by_mass(q);
    detail::update_stick(q);
    detail::update_means(q, samples);
    detail::update_wishart(q, samples, b0_inv);
    double prev = elbo(q, samples, prior);
    if (!std::isfinite(prev))
        throw DivergenceError(0, "fit_igmm: non-finite bound after initialization");
    q.elbo_trace.push_back(prev);

    for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
        detail::update_resp(q, samples);
        detail::sort_components_by_mass(q);
        detail::update_stick(q);
        detail::update_means(q, samples);
        detail::update_wishart(q, samples, b0_inv);
        double cur = elbo(q, samples, prior);
        if (!std::isfinite(cur))
            throw DivergenceError(sweep, "fit_igmm: non-finite bound at sweep " +
                                             std::to_string(sweep));
        cur = detail::try_merges(q, samples, b0_inv, cur);
        q.elbo_trace.push_back(cur);
        if (std::abs(cur - prev) < tol * (1.0 + std::abs(cur))) break;
        prev = cur;
    }
    return q;
}

inline IgmmPosterior fit_igmm(const SampleSet& samples, const IgmmPrior& prior, RngStream rng,
                              double tol = 1e-5, int max_sweeps = 200) {
    return fit_igmm(samples.points, prior, std::move(rng), tol, max_sweeps);
}

namespace detail {

//! Log density of the fitted mixture at x, using the expected component
//! precisions E[Lambda_k] = a_k B_k. Components with nonpositive weight or a
//! failed factorization are skipped.
inline double log_mixture_density(const IgmmPosterior& post, const Eigen::VectorXd& w,
                                  const Eigen::VectorXd& x) {
    const double d = static_cast<double>(x.size());
    const double ln2pi = std::log(2.0 * std::numbers::pi);
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    for (long k = 0; k < post.means.rows(); ++k) {
        if (!(w[k] > 0.0)) continue;
        const Eigen::MatrixXd prec = post.wishart_dof[k] * post.wishart_scale[static_cast<size_t>(k)];
        const double logdet = logdet_spd(prec);
        if (!std::isfinite(logdet)) continue;
        const Eigen::VectorXd diff = x - post.means.row(k).transpose();
        const double term = std::log(w[k]) + 0.5 * logdet - d / 2.0 * ln2pi -
                            0.5 * diff.dot(prec * diff);
        terms.push_back(term);
        best = std::max(best, term);
    }
    if (terms.empty() || !std::isfinite(best)) return -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - best);
    return best + std::log(acc);
}

//! True when two component means sit on one mode of the mixture density:
//! along the segment between them, the density never drops below half of the
//! lower endpoint density. Duplicates and tiles of one broad peak are
//! connected; means separated by a genuine valley are not.
inline bool density_connected(const IgmmPosterior& post, const Eigen::VectorXd& w,
                              const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    constexpr int kProbes = 15;
    constexpr double kValleyRatio = 0.5;
    const double floor_a = log_mixture_density(post, w, a);
    const double floor_b = log_mixture_density(post, w, b);
    const double endpoint = std::min(floor_a, floor_b);
    if (!std::isfinite(endpoint)) return false;
    const double cutoff = endpoint + std::log(kValleyRatio);
    for (int i = 1; i <= kProbes; ++i) {
        const double t = static_cast<double>(i) / (kProbes + 1);
        if (log_mixture_density(post, w, a + t * (b - a)) < cutoff) return false;
    }
    return true;
}

//! Deterministic compass ascent of the mixture log density, confined to the
//! domain. Moves a merged group's representative from its mass centroid onto
//! the mode it belongs to; `step` should match the group's spatial scale so
//! the ascent cannot hop across a density valley onto a different mode.
inline Eigen::VectorXd ascend_density(const IgmmPosterior& post, const Eigen::VectorXd& w,
                                      Eigen::VectorXd x, const SearchDomain& domain,
                                      double step) {
    const double floor_step = 1e-9 * domain.diagonal();
    if (!std::isfinite(step) || step <= 0.0) step = 0.01 * domain.diagonal();
    double fx = log_mixture_density(post, w, x);
    if (!std::isfinite(fx)) return x;
    while (step > floor_step) {
        bool moved = false;
        for (long a = 0; a < domain.dim(); ++a) {
            for (double sgn : {1.0, -1.0}) {
                Eigen::VectorXd y = x;
                y[a] = std::clamp(y[a] + sgn * step, domain.lower()[a], domain.upper()[a]);
                const double fy = log_mixture_density(post, w, y);
                if (fy > fx) {
                    x = std::move(y);
                    fx = fy;
                    moved = true;
                }
            }
        }
        if (!moved) step *= 0.5;
    }
    return x;
}

}  // namespace detail

//! Reduce a fitted posterior to batch candidates: keep components whose
//! expected weight clears `weight_threshold`, collapse components that share
//! one mode of the fitted density onto their mass centroid, then merge means
//! closer than `merge_tol` (the heavier member keeps its mean), clip
//! survivors to the domain, and merge again so clipping cannot reintroduce
//! near-duplicates. Never empty: if nothing clears the threshold the heaviest
//! component is returned alone. A negative `merge_tol` selects the default of
//! 1% of the domain diagonal.
inline PeakSet extract_peaks(const IgmmPosterior& post, const SearchDomain& domain,
                             double weight_threshold = 0.02, double merge_tol = -1.0) {
    const Eigen::VectorXd w = post.weights();
    const long k_max = w.size();
    if (post.means.rows() != k_max || post.wishart_dof.size() != k_max ||
        static_cast<long>(post.wishart_scale.size()) != k_max)
        throw std::invalid_argument("extract_peaks: posterior shape mismatch");
    if (post.means.cols() != domain.dim())
        throw std::invalid_argument("extract_peaks: domain dimension mismatch");
    if (merge_tol < 0.0) merge_tol = 0.01 * domain.diagonal();

    std::vector<long> order(static_cast<size_t>(k_max));
    for (long k = 0; k < k_max; ++k) order[static_cast<size_t>(k)] = k;
    std::stable_sort(order.begin(), order.end(), [&](long a, long b) { return w[a] > w[b]; });

    struct Candidate {
        Eigen::VectorXd mean;
        double weight;
        double width;
    };
    std::vector<Candidate> cand;  // weight-descending
    for (long k : order)
        if (w[k] >= weight_threshold)
            cand.push_back(
                {post.means.row(k).transpose(), w[k], detail::component_width(post, k)});
    if (cand.empty())
        cand.push_back({post.means.row(order[0]).transpose(), w[order[0]],
                        detail::component_width(post, order[0])});

    // mode connectivity: candidates sharing a density ridge collapse into one
    // group at their mass centroid (repeat until stable, since absorbing a
    // candidate moves the centroid)
    bool absorbed_any = true;
    while (absorbed_any && cand.size() > 1) {
        absorbed_any = false;
        for (size_t i = 0; i + 1 < cand.size(); ++i) {
            for (size_t j = i + 1; j < cand.size();) {
                if (detail::density_connected(post, w, cand[i].mean, cand[j].mean)) {
                    const double mass = cand[i].weight + cand[j].weight;
                    cand[i].mean =
                        (cand[i].weight * cand[i].mean + cand[j].weight * cand[j].mean) / mass;
                    cand[i].weight = mass;
                    cand[i].width = std::max(cand[i].width, cand[j].width);
                    cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(j));
                    absorbed_any = true;
                } else {
                    ++j;
                }
            }
        }
    }

    // a group's representative is the mode it sits on, not its centroid: for
    // skewed or tiled groups the centroid can sit well off the density peak
    for (auto& c : cand) {
        c.mean = clip_to_domain(c.mean, domain);
        c.mean = detail::ascend_density(post, w, std::move(c.mean), domain, c.width);
    }
    std::stable_sort(cand.begin(), cand.end(),
                     [](const Candidate& a, const Candidate& b) { return a.weight > b.weight; });

    // representatives pushed onto one mode (or one boundary point) collapse
    std::vector<Candidate> kept;
    for (auto& c : cand) {
        bool absorbed = false;
        for (auto& k : kept)
            if ((c.mean - k.mean).norm() < merge_tol) {
                k.weight += c.weight;
                absorbed = true;
                break;
            }
        if (!absorbed) kept.push_back(std::move(c));
    }

    PeakSet out;
    for (auto& c : kept) {
        out.means.push_back(std::move(c.mean));
        out.weights.push_back(c.weight);
    }
    return out;
}

}  // namespace b3o
