#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "rng.hpp"

namespace b3o {

//! Axis-aligned box over which everything (sampling, optimization, clipping) runs.
class SearchDomain {
public:
    SearchDomain(Eigen::VectorXd lower, Eigen::VectorXd upper)
        : lower_(std::move(lower)), upper_(std::move(upper)) {
        if (lower_.size() == 0) throw std::invalid_argument("SearchDomain: dimension must be >= 1");
        if (lower_.size() != upper_.size())
            throw std::invalid_argument("SearchDomain: bound sizes differ");
        for (Eigen::Index d = 0; d < lower_.size(); ++d) {
            if (!std::isfinite(lower_[d]) || !std::isfinite(upper_[d]))
                throw std::invalid_argument("SearchDomain: bounds must be finite");
            if (!(lower_[d] < upper_[d]))
                throw std::invalid_argument("SearchDomain: need lower < upper on axis " +
                                            std::to_string(d));
        }
    }

    int dim() const { return static_cast<int>(lower_.size()); }
    const Eigen::VectorXd& lower() const { return lower_; }
    const Eigen::VectorXd& upper() const { return upper_; }
    Eigen::VectorXd widths() const { return upper_ - lower_; }
    double diagonal() const { return (upper_ - lower_).norm(); }

    bool contains(const Eigen::VectorXd& x, double tol = 0.0) const {
        if (x.size() != lower_.size()) return false;
        return (x.array() >= lower_.array() - tol).all() &&
               (x.array() <= upper_.array() + tol).all();
    }

private:
    Eigen::VectorXd lower_;
    Eigen::VectorXd upper_;
};

template <class Rng>
Eigen::VectorXd uniform_point(const SearchDomain& domain, Rng& rng) {
    Eigen::VectorXd x(domain.dim());
    for (int d = 0; d < domain.dim(); ++d) x[d] = rng.uniform(domain.lower()[d], domain.upper()[d]);
    return x;
}

inline Eigen::VectorXd clip_to_domain(const Eigen::VectorXd& x, const SearchDomain& domain) {
    if (x.size() != domain.dim())
        throw std::invalid_argument("clip_to_domain: point dimension mismatch");
    return x.cwiseMax(domain.lower()).cwiseMin(domain.upper());
}

///! Evaluated design: one input row per observation, outcomes on the
//! maximization scale. Appends validate shape and finiteness.
struct ObservationSet {
    Eigen::MatrixXd inputs;    // n x d
    Eigen::VectorXd outcomes;  // n

    explicit ObservationSet(int dim) : inputs(0, dim), outcomes(0) {
        if (dim < 1) throw std::invalid_argument("ObservationSet: dimension must be >= 1");
    }

    long n() const { return inputs.rows(); }
    int dim() const { return static_cast<int>(inputs.cols()); }

    void append(const Eigen::VectorXd& x, double y) {
        if (x.size() != inputs.cols())
            throw std::invalid_argument("ObservationSet: point dimension mismatch");
        if (!std::isfinite(y)) throw std::invalid_argument("ObservationSet: outcome must be finite");
        inputs.conservativeResize(inputs.rows() + 1, Eigen::NoChange);
        inputs.row(inputs.rows() - 1) = x.transpose();
        outcomes.conservativeResize(outcomes.size() + 1);
        outcomes[outcomes.size() - 1] = y;
    }

    double best_outcome() const {
        if (n() == 0) throw std::logic_error("ObservationSet: empty");
        return outcomes.maxCoeff();
    }
};

//! One experiment's knobs. Unset numeric fields (-1) are filled by
//! apply_defaults() from the problem dimension: T = 10·D, n0 = 3·D,
//! q = 3 (D < 5) else D, sqrt(beta) = 2, 20 replicates. The kernel default
//! treats 0.1·D as the squared length-scale, so gamma = 1/(2·0.1·D): the
//! exponent-coefficient reading collapses for small D (on a unit-width
//! domain at D = 1 every pair of points would be over 90% correlated and
//! the fit could not separate a wiggly objective from a constant).
struct RunConfig {
    std::string function_name;
    int dim = -1;
    std::string strategy;
    int iterations = -1;
    int initial_points = -1;
    int fixed_batch_size = -1;
    double ucb_beta_sqrt = -1;
    double kernel_gamma = -1;
    int replicates = -1;
    std::uint64_t seed = 0;

    void apply_defaults() {
        if (dim < 1) throw std::invalid_argument("RunConfig: dim must be set before defaults");
        if (iterations < 0) iterations = 10 * dim;
        if (initial_points < 0) initial_points = 3 * dim;
        if (fixed_batch_size < 0) fixed_batch_size = dim < 5 ? 3 : dim;
        if (ucb_beta_sqrt < 0) ucb_beta_sqrt = 2.0;
        if (kernel_gamma < 0) kernel_gamma = 1.0 / (2.0 * 0.1 * dim);
        if (replicates < 0) replicates = 20;
    }
};

}  // namespace b3o
