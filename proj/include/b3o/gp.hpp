#pragma once

#include <Eigen/Core>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

#include "domain.hpp"
#include "errors.hpp"

namespace b3o {

//! Squared-exponential kernel k(x,x') = signal_variance * exp(-gamma * ||x-x'||^2),
//! with `jitter` added to the diagonal of the training matrix (doubles as
//! observation noise and numerical stabilizer).
struct KernelParams {
    double gamma;
    double signal_variance = 1.0;
    double jitter = 1e-6;

    void validate() const {
        if (!(std::isfinite(gamma) && gamma > 0))
            throw std::invalid_argument("KernelParams: gamma must be positive");
        if (!(std::isfinite(signal_variance) && signal_variance > 0))
            throw std::invalid_argument("KernelParams: signal variance must be positive");
        if (!(std::isfinite(jitter) && jitter >= 0))
            throw std::invalid_argument("KernelParams: jitter must be >= 0");
    }
};

inline double kernel_eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                          const KernelParams& p) {
    p.validate();
    if (x.size() != y.size()) throw std::invalid_argument("kernel_eval: dimension mismatch");
    return p.signal_variance * std::exp(-p.gamma * (x - y).squaredNorm());
}

struct Prediction {
    double mean;
    double variance;      // clamped to [0, signal_variance]
    double variance_raw;  // before clamping, for diagnostics
};

namespace detail {

// In-place lower Cholesky with an explicit pivot check so the failing index can
// be reported. Tolerance is a few ulps of the largest diagonal entry: exact
// duplicates at zero jitter must fail rather than produce garbage factors.
inline void cholesky_lower(Eigen::MatrixXd& a) {
    const Eigen::Index n = a.rows();
    const double tol = 32.0 * std::numeric_limits<double>::epsilon() * a.diagonal().maxCoeff();
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = a(j, j) - a.row(j).head(j).squaredNorm();
        if (!(d > tol))
            throw FactorizationError(static_cast<int>(j),
                                     "cholesky: non-positive pivot at index " + std::to_string(j));
        d = std::sqrt(d);
        a(j, j) = d;
        for (Eigen::Index i = j + 1; i < n; ++i)
            a(i, j) = (a(i, j) - a.row(i).head(j).dot(a.row(j).head(j))) / d;
    }
    a.triangularView<Eigen::StrictlyUpper>().setZero();
}

inline Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, const KernelParams& p) {
    Eigen::VectorXd sq = x.rowwise().squaredNorm();
    Eigen::MatrixXd d2 = sq.replicate(1, x.rows()) + sq.transpose().replicate(x.rows(), 1) -
                         2.0 * (x * x.transpose());
    return p.signal_variance * (-p.gamma * d2.array().cwiseMax(0.0)).exp();
}

}  // namespace detail

//! Zero-mean GP regression state: training inputs, Cholesky factor of
//! K + jitter I, and the prediction weights. Hallucinated (phantom) points are
//! carried in the same structure.
class GpPosterior {
public:
    GpPosterior(Eigen::MatrixXd x, Eigen::VectorXd y, Eigen::MatrixXd chol, KernelParams params)
        : params_(params), x_(std::move(x)), y_(std::move(y)), chol_(std::move(chol)) {
        refresh_weights();
    }

    GpPosterior(const GpPosterior& o)
        : params_(o.params_), x_(o.x_), y_(o.y_), chol_(o.chol_), weights_(o.weights_),
          clamp_count_(o.clamp_count_.load()) {}
    GpPosterior& operator=(const GpPosterior& o) {
        params_ = o.params_;
        x_ = o.x_;
        y_ = o.y_;
        chol_ = o.chol_;
        weights_ = o.weights_;
        clamp_count_.store(o.clamp_count_.load());
        return *this;
    }
    GpPosterior(GpPosterior&& o) noexcept
        : params_(o.params_), x_(std::move(o.x_)), y_(std::move(o.y_)), chol_(std::move(o.chol_)),
          weights_(std::move(o.weights_)), clamp_count_(o.clamp_count_.load()) {}
    GpPosterior& operator=(GpPosterior&& o) noexcept {
        params_ = o.params_;
        x_ = std::move(o.x_);
        y_ = std::move(o.y_);
        chol_ = std::move(o.chol_);
        weights_ = std::move(o.weights_);
        clamp_count_.store(o.clamp_count_.load());
        return *this;
    }

    long n() const { return x_.rows(); }
    int dim() const { return static_cast<int>(x_.cols()); }
    const KernelParams& params() const { return params_; }
    const Eigen::MatrixXd& train_inputs() const { return x_; }
    const Eigen::MatrixXd& chol_lower() const { return chol_; }
    std::uint64_t clamp_count() const { return clamp_count_.load(); }

    Prediction predict(const Eigen::VectorXd& x) const {
        if (x.size() != x_.cols()) throw std::invalid_argument("predict: dimension mismatch");
        Eigen::VectorXd ks =
            (params_.signal_variance *
             (-params_.gamma * (x_.rowwise() - x.transpose()).rowwise().squaredNorm().array())
                 .exp())
                .matrix();
        double mean = ks.dot(weights_);
        Eigen::VectorXd q = chol_.triangularView<Eigen::Lower>().solve(ks);
        double raw = params_.signal_variance - q.squaredNorm();
        return clampped(mean, raw);
    }

    //! Vectorized predictions for a block of query points (rows).
    std::pair<Eigen::VectorXd, Eigen::VectorXd> predict_batch(const Eigen::MatrixXd& pts) const {
        if (pts.cols() != x_.cols())
            throw std::invalid_argument("predict_batch: dimension mismatch");
        Eigen::VectorXd sqp = pts.rowwise().squaredNorm();
        Eigen::VectorXd sqx = x_.rowwise().squaredNorm();
        Eigen::MatrixXd d2 = sqp.replicate(1, x_.rows()) + sqx.transpose().replicate(pts.rows(), 1) -
                             2.0 * (pts * x_.transpose());
        Eigen::MatrixXd ks =
            params_.signal_variance * (-params_.gamma * d2.array().cwiseMax(0.0)).exp();
        Eigen::VectorXd means = ks * weights_;
        Eigen::MatrixXd q = chol_.triangularView<Eigen::Lower>().solve(ks.transpose());
        Eigen::VectorXd vars(pts.rows());
        for (Eigen::Index i = 0; i < pts.rows(); ++i) {
            Prediction pr = clampped(means[i], params_.signal_variance - q.col(i).squaredNorm());
            vars[i] = pr.variance;
        }
        return {std::move(means), std::move(vars)};
    }

    //! Phantom update: condition on x_new with its own predictive mean as the
    //! outcome. That leaves the posterior mean identical everywhere while the
    //! variance contracts exactly as a full refit would.
    GpPosterior hallucinate(const Eigen::VectorXd& x_new) const {
        if (x_new.size() != x_.cols())
            throw std::invalid_argument("hallucinate: dimension mismatch");
        const long n0 = n();
        Eigen::VectorXd ks =
            (params_.signal_variance *
             (-params_.gamma *
              (x_.rowwise() - x_new.transpose()).rowwise().squaredNorm().array())
                 .exp())
                .matrix();
        double lie = ks.dot(weights_);
        Eigen::VectorXd l = chol_.triangularView<Eigen::Lower>().solve(ks);
        double diag = params_.signal_variance + params_.jitter;
        double d2 = diag - l.squaredNorm();
        if (!(d2 > 32.0 * std::numeric_limits<double>::epsilon() * diag))
            throw FactorizationError(static_cast<int>(n0),
                                     "hallucinate: non-positive pivot extending the factor");
        Eigen::MatrixXd chol(n0 + 1, n0 + 1);
        chol.setZero();
        chol.topLeftCorner(n0, n0) = chol_;
        chol.row(n0).head(n0) = l.transpose();
        chol(n0, n0) = std::sqrt(d2);
        Eigen::MatrixXd x(n0 + 1, x_.cols());
        x.topRows(n0) = x_;
        x.row(n0) = x_new.transpose();
        Eigen::VectorXd y(n0 + 1);
        y.head(n0) = y_;
        y[n0] = lie;
        return GpPosterior(std::move(x), std::move(y), std::move(chol), params_);
    }

private:
    Prediction clampped(double mean, double raw) const {
        double v = raw;
        if (v < 0.0) {
            v = 0.0;
            clamp_count_.fetch_add(1, std::memory_order_relaxed);
        } else if (v > params_.signal_variance) {
            v = params_.signal_variance;
        }
        return {mean, v, raw};
    }

    void refresh_weights() {
        weights_ = chol_.triangularView<Eigen::Lower>().solve(y_);
        chol_.triangularView<Eigen::Lower>().adjoint().solveInPlace(weights_);
    }

    KernelParams params_;
    Eigen::MatrixXd x_;
    Eigen::VectorXd y_;
    Eigen::MatrixXd chol_;
    Eigen::VectorXd weights_;
    mutable std::atomic<std::uint64_t> clamp_count_{0};
};

inline GpPosterior fit(const ObservationSet& obs, const KernelParams& params) {
    params.validate();
    if (obs.n() < 1) throw std::invalid_argument("fit: need at least one observation");
    Eigen::MatrixXd k = detail::kernel_matrix(obs.inputs, params);
    k.diagonal().array() += params.jitter;
    detail::cholesky_lower(k);  // throws FactorizationError with the pivot index
    return GpPosterior(obs.inputs, obs.outcomes, std::move(k), params);
}

//! fit() with the standard jitter-escalation fallback: on factorization failure
//! the jitter is doubled (from a small floor if it was zero) up to
//! `max_doublings` times before the error is allowed to escape.
inline GpPosterior fit_with_retry(const ObservationSet& obs, KernelParams params,
                                  int max_doublings = 5) {
    params.validate();
    double base = params.jitter > 0 ? params.jitter : 1e-12 * params.signal_variance;
    for (int attempt = 0;; ++attempt) {
        try {
            return fit(obs, params);
        } catch (const FactorizationError&) {
            if (attempt >= max_doublings) throw;
            params.jitter = base * std::pow(2.0, attempt + 1);
        }
    }
}

//! No-data belief: mean 0 and full prior variance.
inline Prediction predict_prior(const KernelParams& params) {
    params.validate();
    return {0.0, params.signal_variance, params.signal_variance};
}

}  // namespace b3o
