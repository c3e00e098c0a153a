#pragma once

#include <b3o/domain.hpp>
#include <b3o/errors.hpp>
#include <b3o/rng.hpp>

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace b3o {

//! Knobs for the generalized slice sampler.
struct SamplerConfig {
    int chains = 200;          //!< independent chains pooled into one sample set
    int max_iter = 50;         //!< accepted samples per chain (upper bound)
    int rejection_cap = 1000;  //!< proposals per slice level before resampling it
    double flat_epsilon = 1e-9;  //!< excess below this treats the slice as degenerate

    void validate() const {
        if (chains < 1) throw std::invalid_argument("SamplerConfig: chains must be >= 1");
        if (max_iter < 1) throw std::invalid_argument("SamplerConfig: max_iter must be >= 1");
        if (rejection_cap < 1)
            throw std::invalid_argument("SamplerConfig: rejection_cap must be >= 1");
        if (!(flat_epsilon >= 0.0))
            throw std::invalid_argument("SamplerConfig: flat_epsilon must be >= 0");
    }
};

//! Points drawn from the excess-acquisition density, with the surface value at each.
struct SampleSet {
    Eigen::MatrixXd points;  //!< n x d, one sample per row
    Eigen::VectorXd values;  //!< surface value at each sample

    long n() const { return points.rows(); }
};

//! One slice-sampling chain targeting the density proportional to
//! alpha(x) - alpha_min over the domain.
//!
//! Each step draws a level uniformly between alpha_min and the surface value
//! at the previous sample, then rejection-samples uniform proposals until one
//! clears the level. The level stays fixed across rejections; only after
//! `rejection_cap` failures is it redrawn (from the same anchor), and three
//! consecutive cap hits end the chain early with a partial set. Anchors whose
//! excess is below `flat_epsilon` span no usable slice, so the proposal is
//! accepted outright — a flat surface therefore samples uniformly.
template <class F, class Rng>
SampleSet gss_chain(F&& alpha, const SearchDomain& domain, double alpha_min,
                    const SamplerConfig& cfg, Rng& rng) {
    cfg.validate();
    std::vector<Eigen::VectorXd> pts;
    std::vector<double> vals;
    pts.reserve(static_cast<size_t>(cfg.max_iter));
    vals.reserve(static_cast<size_t>(cfg.max_iter));

    Eigen::VectorXd anchor = uniform_point(domain, rng);
    double anchor_val = alpha(anchor);
    int consecutive_caps = 0;

    for (int i = 0; i < cfg.max_iter; ++i) {
        Eigen::VectorXd s;
        double s_val;
        if (anchor_val - alpha_min < cfg.flat_epsilon) {
            s = uniform_point(domain, rng);
            s_val = alpha(s);
            consecutive_caps = 0;
        } else {
            double level = rng.uniform(alpha_min, anchor_val);
            int rejections = 0;
            bool terminated = false;
            for (;;) {
                s = uniform_point(domain, rng);
                s_val = alpha(s);
                if (s_val > level) {
                    consecutive_caps = 0;
                    break;
                }
                if (++rejections >= cfg.rejection_cap) {
                    if (++consecutive_caps >= 3) {
                        terminated = true;
                        break;
                    }
                    level = rng.uniform(alpha_min, anchor_val);
                    rejections = 0;
                }
            }
            if (terminated) break;
        }
        pts.push_back(s);
        vals.push_back(s_val);
        anchor = std::move(s);
        anchor_val = s_val;
    }

    SampleSet out;
    out.points.resize(static_cast<long>(pts.size()), domain.dim());
    out.values.resize(static_cast<long>(pts.size()));
    for (size_t i = 0; i < pts.size(); ++i) {
        out.points.row(static_cast<long>(i)) = pts[i].transpose();
        out.values[static_cast<long>(i)] = vals[i];
    }
    return out;
}

//! Pool `cfg.chains` independent chains, chain-major, each driven by its own
//! substream so the pooled set is reproducible regardless of evaluation order.
//! Throws TooFewSamplesError if the pool is too small to fit a mixture on
//! (fewer than dim + 2 points).
template <class F>
SampleSet bgss(F&& alpha, const SearchDomain& domain, double alpha_min, const SamplerConfig& cfg,
               const RngStream& rng) {
    cfg.validate();
    std::vector<SampleSet> blocks;
    blocks.reserve(static_cast<size_t>(cfg.chains));
    long total = 0;
    for (int c = 0; c < cfg.chains; ++c) {
        RngStream chain_rng = rng.substream(static_cast<std::uint64_t>(c));
        blocks.push_back(gss_chain(alpha, domain, alpha_min, cfg, chain_rng));
        total += blocks.back().n();
    }

    const long needed = domain.dim() + 2;
    if (total < needed)
        throw TooFewSamplesError(total, needed,
                                 "slice sampler pooled " + std::to_string(total) +
                                     " samples; need at least " + std::to_string(needed));

    SampleSet out;
    out.points.resize(total, domain.dim());
    out.values.resize(total);
    long row = 0;
    for (const SampleSet& b : blocks) {
        out.points.middleRows(row, b.n()) = b.points;
        out.values.segment(row, b.n()) = b.values;
        row += b.n();
    }
    return out;
}

}  // namespace b3o
