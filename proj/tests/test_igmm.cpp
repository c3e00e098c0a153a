#include <catch2/catch_amalgamated.hpp>

#include <b3o/bgss.hpp>
#include <b3o/domain.hpp>
#include <b3o/errors.hpp>
#include <b3o/igmm.hpp>
#include <b3o/rng.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

using namespace b3o;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double std_normal(RngStream& rng) {
    double u1 = 1.0 - rng.uniform01();  // (0,1] keeps the log finite
    double u2 = rng.uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Rows grouped by cluster: counts[c] draws from N(centers.row(c), sigma^2 I).
MatrixXd make_blobs(const MatrixXd& centers, const std::vector<int>& counts, double sigma,
                    RngStream& rng) {
    const int d = static_cast<int>(centers.cols());
    int total = 0;
    for (int c : counts) total += c;
    MatrixXd out(total, d);
    int row = 0;
    for (size_t c = 0; c < counts.size(); ++c)
        for (int i = 0; i < counts[c]; ++i, ++row)
            for (int j = 0; j < d; ++j)
                out(row, j) = centers(static_cast<long>(c), j) + sigma * std_normal(rng);
    return out;
}

// ---------------------------------------------------------------------------
// Independent straight-line evidence-bound oracle. Plain loops, digamma via a
// central finite difference of lgamma — deliberately sharing no code with the
// library implementation.
// ---------------------------------------------------------------------------

double fd_digamma(double x) {
    const double h = 1e-5;
    return (std::lgamma(x + h) - std::lgamma(x - h)) / (2.0 * h);
}

double oracle_elbo(const IgmmPosterior& q, const MatrixXd& S, const IgmmPrior& prior) {
    const int n = static_cast<int>(S.rows());
    const int d = static_cast<int>(S.cols());
    const int k_max = static_cast<int>(q.means.rows());
    const double gamma = prior.concentration;
    const VectorXd mu0 = prior.mean_center;
    const double a0 = prior.wishart_dof;
    const MatrixXd b0 = prior.wishart_scale;
    const double ln2pi = std::log(2.0 * std::numbers::pi);

    auto logdet = [](const MatrixXd& m) { return std::log(m.determinant()); };
    auto lmvgamma = [&](double x) {
        double r = d * (d - 1) / 4.0 * std::log(std::numbers::pi);
        for (int j = 1; j <= d; ++j) r += std::lgamma(x + (1.0 - j) / 2.0);
        return r;
    };
    auto ln_wishart_norm = [&](double a, const MatrixXd& b) {
        return a * d / 2.0 * std::log(2.0) + a / 2.0 * logdet(b) + lmvgamma(a / 2.0);
    };

    std::vector<double> e_logdet(k_max), e_logv(k_max, 0.0), e_log1mv(k_max, 0.0);
    for (int k = 0; k < k_max; ++k) {
        double a = q.wishart_dof[k];
        double s = 0.0;
        for (int j = 1; j <= d; ++j) s += fd_digamma((a + 1.0 - j) / 2.0);
        e_logdet[k] = s + d * std::log(2.0) + logdet(q.wishart_scale[static_cast<size_t>(k)]);
        if (k < k_max - 1) {
            double e1 = q.stick(k, 0), e2 = q.stick(k, 1);
            e_logv[k] = fd_digamma(e1) - fd_digamma(e1 + e2);
            e_log1mv[k] = fd_digamma(e2) - fd_digamma(e1 + e2);
        }
    }
    std::vector<double> e_logpi(k_max);
    for (int k = 0; k < k_max; ++k) {
        double acc = (k < k_max - 1) ? e_logv[k] : 0.0;
        for (int j = 0; j < k; ++j) acc += e_log1mv[j];
        e_logpi[k] = acc;
    }

    double t_stick = 0.0;
    for (int k = 0; k < k_max - 1; ++k) t_stick += std::log(gamma) + (gamma - 1.0) * e_log1mv[k];

    double t_mean = 0.0;
    for (int k = 0; k < k_max; ++k) {
        const MatrixXd& v = q.mean_cov[static_cast<size_t>(k)];
        double sq = (q.means.row(k).transpose() - mu0).squaredNorm();
        t_mean += -d / 2.0 * ln2pi - 0.5 * (sq + v.trace());
    }

    double t_prec = 0.0;
    for (int k = 0; k < k_max; ++k) {
        double a = q.wishart_dof[k];
        const MatrixXd& b = q.wishart_scale[static_cast<size_t>(k)];
        t_prec += (a0 - d - 1.0) / 2.0 * e_logdet[k] - 0.5 * (b0.inverse() * (a * b)).trace() -
                  ln_wishart_norm(a0, b0);
    }

    double t_assign = 0.0, t_data = 0.0, h_mult = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < k_max; ++k) {
            double phi = q.resp(i, k);
            t_assign += phi * e_logpi[k];
            double a = q.wishart_dof[k];
            const MatrixXd& b = q.wishart_scale[static_cast<size_t>(k)];
            VectorXd diff = S.row(i).transpose() - q.means.row(k).transpose();
            t_data += phi * (0.5 * e_logdet[k] - d / 2.0 * ln2pi -
                             0.5 * a *
                                 (diff.dot(b * diff) +
                                  (b * q.mean_cov[static_cast<size_t>(k)]).trace()));
            if (phi > 0.0) h_mult -= phi * std::log(phi);
        }
    }

    double h_beta = 0.0;
    for (int k = 0; k < k_max - 1; ++k) {
        double al = q.stick(k, 0), be = q.stick(k, 1);
        double ln_b = std::lgamma(al) + std::lgamma(be) - std::lgamma(al + be);
        h_beta += ln_b - (al - 1.0) * fd_digamma(al) - (be - 1.0) * fd_digamma(be) +
                  (al + be - 2.0) * fd_digamma(al + be);
    }
    double h_gauss = k_max * (d / 2.0) * std::log(2.0 * std::numbers::pi * std::numbers::e);
    for (int k = 0; k < k_max; ++k)
        h_gauss += 0.5 * std::log(q.mean_cov[static_cast<size_t>(k)].determinant());
    double h_wish = 0.0;
    for (int k = 0; k < k_max; ++k) {
        double a = q.wishart_dof[k];
        const MatrixXd& b = q.wishart_scale[static_cast<size_t>(k)];
        h_wish += ln_wishart_norm(a, b) - (a - d - 1.0) / 2.0 * e_logdet[k] + a * d / 2.0;
    }

    return t_stick + t_mean + t_prec + t_assign + t_data + h_beta + h_gauss + h_wish + h_mult;
}

// Posterior stub whose expected weights and means are set directly; every
// component gets an isotropic expected precision of 1/sigma^2 so the mixture
// density (and hence mode connectivity) is controlled by the test.
IgmmPosterior stub_posterior(const std::vector<double>& weights, const MatrixXd& means,
                             double sigma = 1.0) {
    IgmmPosterior p;
    const int k = static_cast<int>(weights.size());
    const int d = static_cast<int>(means.cols());
    p.resp = MatrixXd(1, k);
    for (int j = 0; j < k; ++j) p.resp(0, j) = weights[static_cast<size_t>(j)];
    p.means = means;
    p.mean_cov.assign(static_cast<size_t>(k), MatrixXd::Identity(d, d));
    p.wishart_dof = VectorXd::Constant(k, static_cast<double>(d) + 2.0);
    p.wishart_scale.assign(
        static_cast<size_t>(k),
        MatrixXd::Identity(d, d) / ((static_cast<double>(d) + 2.0) * sigma * sigma));
    return p;
}

}  // namespace

TEST_CASE("digamma matches a finite-difference oracle and known values") {
    REQUIRE(digamma(1.0) == Catch::Approx(-0.57721566490153286).margin(1e-12));
    // recurrence psi(x+1) = psi(x) + 1/x
    for (double x : {0.3, 0.7, 1.9, 4.2}) {
        REQUIRE(digamma(x + 1.0) == Catch::Approx(digamma(x) + 1.0 / x).margin(1e-12));
    }
    for (int i = 0; i <= 200; ++i) {
        double x = 0.5 + i * 0.25;
        REQUIRE(digamma(x) == Catch::Approx(fd_digamma(x)).margin(1e-7));
    }
    REQUIRE_THROWS_AS(digamma(0.0), std::domain_error);
    REQUIRE_THROWS_AS(digamma(-2.0), std::domain_error);
}

TEST_CASE("single isotropic cluster collapses onto one heavy component") {
    RngStream rng(11, 0);
    MatrixXd centers(1, 2);
    centers << 2.0, -1.0;
    MatrixXd s = make_blobs(centers, {500}, 1.0, rng);
    VectorXd sample_mean = s.colwise().mean().transpose();

    IgmmPosterior post = fit_igmm(s, IgmmPrior{}, rng.substream(1));
    VectorXd w = post.weights();

    int heavy = 0, arg = 0;
    for (int k = 0; k < w.size(); ++k) {
        if (w[k] >= 0.95) {
            heavy++;
            arg = k;
        }
    }
    REQUIRE(heavy == 1);
    REQUIRE((post.means.row(arg).transpose() - sample_mean).norm() <= 0.1);

    // any residual low-weight fragments share the single density mode, so
    // peak extraction still reports one candidate
    SearchDomain domain(VectorXd::Constant(2, -10.0), VectorXd::Constant(2, 10.0));
    REQUIRE(extract_peaks(post, domain).means.size() == 1);

    // weights nonnegative, summing to one
    REQUIRE(w.minCoeff() >= 0.0);
    REQUIRE(w.sum() == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("two clusters at +/-5 with unit scatter are both recovered") {
    RngStream rng(12, 0);
    MatrixXd centers(2, 1);
    centers << -5.0, 5.0;
    MatrixXd s = make_blobs(centers, {1000, 1000}, 1.0, rng);

    // labeled-draw oracle: per-cluster sample means (the EM fixed point for
    // this separation)
    double oracle_lo = s.col(0).head(1000).mean();
    double oracle_hi = s.col(0).tail(1000).mean();

    IgmmPosterior post = fit_igmm(s, IgmmPrior{}, rng.substream(1));
    VectorXd w = post.weights();

    std::vector<double> heavy_means;
    for (int k = 0; k < w.size(); ++k)
        if (w[k] >= 0.3) heavy_means.push_back(post.means(k, 0));
    REQUIRE(heavy_means.size() == 2);
    std::sort(heavy_means.begin(), heavy_means.end());
    REQUIRE(heavy_means[0] == Catch::Approx(-5.0).margin(0.2));
    REQUIRE(heavy_means[1] == Catch::Approx(5.0).margin(0.2));
    REQUIRE(heavy_means[0] == Catch::Approx(oracle_lo).margin(0.1));
    REQUIRE(heavy_means[1] == Catch::Approx(oracle_hi).margin(0.1));
}

TEST_CASE("three well-separated clusters yield exactly three peaks near truth") {
    RngStream rng(13, 0);
    MatrixXd centers(3, 2);
    centers << 0.0, 0.0, 8.0, 0.0, 4.0, 7.0;
    MatrixXd s = make_blobs(centers, {667, 667, 666}, 1.0, rng);

    IgmmPosterior post = fit_igmm(s, IgmmPrior{}, rng.substream(1));
    SearchDomain domain(VectorXd::Constant(2, -10.0), VectorXd::Constant(2, 12.0));
    PeakSet peaks = extract_peaks(post, domain);

    REQUIRE(peaks.means.size() == 3);
    for (int c = 0; c < 3; ++c) {
        double best = std::numeric_limits<double>::infinity();
        for (const VectorXd& m : peaks.means)
            best = std::min(best, (m - centers.row(c).transpose()).norm());
        REQUIRE(best <= 0.2);
    }
    // responsibilities: every row is a distribution
    for (long i = 0; i < post.resp.rows(); ++i)
        REQUIRE(post.resp.row(i).sum() == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(post.resp.minCoeff() >= 0.0);
}

TEST_CASE("evidence bound strictly increases over the first sweep") {
    RngStream rng(14, 0);
    MatrixXd centers(2, 2);
    centers << -4.0, 0.0, 4.0, 1.0;
    MatrixXd s = make_blobs(centers, {40, 40}, 1.0, rng);
    IgmmPosterior post = fit_igmm(s, IgmmPrior{}, rng.substream(1));
    REQUIRE(post.elbo_trace.size() >= 2);
    REQUIRE(post.elbo_trace[1] > post.elbo_trace[0]);
}

TEST_CASE("evidence bound is monotone on 50 random datasets") {
    RngStream master(15, 0);
    for (int trial = 0; trial < 50; ++trial) {
        RngStream rng = master.substream(static_cast<std::uint64_t>(trial));
        int d = 1 + static_cast<int>(rng.uniform01() * 3);
        int n_clusters = 1 + static_cast<int>(rng.uniform01() * 3);
        double sigma = rng.uniform(0.5, 2.0);
        MatrixXd centers(n_clusters, d);
        for (int c = 0; c < n_clusters; ++c)
            for (int j = 0; j < d; ++j) centers(c, j) = rng.uniform(-8.0, 8.0);
        std::vector<int> counts(static_cast<size_t>(n_clusters));
        for (int& c : counts) c = 15 + static_cast<int>(rng.uniform01() * 25);
        MatrixXd s = make_blobs(centers, counts, sigma, rng);

        IgmmPosterior post = fit_igmm(s, IgmmPrior{}, rng.substream(999));
        for (size_t t = 1; t < post.elbo_trace.size(); ++t)
            REQUIRE(post.elbo_trace[t] >= post.elbo_trace[t - 1] - 1e-6);
        for (long i = 0; i < post.resp.rows(); ++i)
            REQUIRE(post.resp.row(i).sum() == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("evidence bound matches an independent term-by-term oracle") {
    MatrixXd s(10, 1);
    s << -5.2, -4.9, -5.05, 0.1, 0.05, -0.1, 5.0, 5.1, 4.9, 5.3;
    IgmmPrior prior;
    prior.truncation = 3;
    RngStream rng(16, 0);
    IgmmPosterior post = fit_igmm(s, prior, rng);

    IgmmPrior resolved = post.prior;
    double lib = elbo(post, s, resolved);
    double oracle = oracle_elbo(post, s, resolved);
    REQUIRE(lib == Catch::Approx(oracle).margin(1e-8));
    REQUIRE(lib == post.elbo_trace.back());  // bit-stable recompute
    REQUIRE(elbo(post, s, resolved) == lib); // and again
}

TEST_CASE("evidence bound is invariant to sample order and rejects bad shapes") {
    MatrixXd s(6, 2);
    s << 0.1, 0.2, 1.1, -0.3, -0.9, 0.7, 2.0, 1.5, -1.2, -0.4, 0.6, 0.9;
    RngStream rng(17, 0);
    IgmmPosterior post = fit_igmm(s, IgmmPrior{}, rng);
    double base = elbo(post, s, post.prior);

    // reverse rows of both the samples and their responsibilities
    MatrixXd s_rev = s.colwise().reverse();
    IgmmPosterior post_rev = post;
    post_rev.resp = post.resp.colwise().reverse();
    REQUIRE(elbo(post_rev, s_rev, post.prior) == Catch::Approx(base).margin(1e-10));

    MatrixXd wrong(5, 2);
    wrong.setZero();
    REQUIRE_THROWS_AS(elbo(post, wrong, post.prior), std::invalid_argument);
}

TEST_CASE("raising the truncation does not change the surviving peak count") {
    RngStream rng(18, 0);
    MatrixXd centers(1, 2);
    centers << 1.0, 1.0;
    MatrixXd s = make_blobs(centers, {400}, 1.0, rng);
    SearchDomain domain(VectorXd::Constant(2, -10.0), VectorXd::Constant(2, 10.0));

    IgmmPrior p10;
    p10.truncation = 10;
    IgmmPrior p20;
    p20.truncation = 20;
    PeakSet peaks10 = extract_peaks(fit_igmm(s, p10, rng.substream(1)), domain);
    PeakSet peaks20 = extract_peaks(fit_igmm(s, p20, rng.substream(2)), domain);
    REQUIRE(peaks10.means.size() == 1);
    REQUIRE(peaks20.means.size() == 1);
    REQUIRE((peaks10.means[0] - peaks20.means[0]).norm() <= 0.05);
}

TEST_CASE("translating the samples translates every recovered mean") {
    RngStream rng(19, 0);
    MatrixXd centers(2, 2);
    centers << -5.0, 0.0, 5.0, 0.0;
    MatrixXd s = make_blobs(centers, {300, 300}, 1.0, rng);
    VectorXd shift(2);
    shift << 13.5, -7.25;
    MatrixXd s_shifted = s.rowwise() + shift.transpose();

    IgmmPosterior a = fit_igmm(s, IgmmPrior{}, rng.substream(1));
    IgmmPosterior b = fit_igmm(s_shifted, IgmmPrior{}, rng.substream(1));

    VectorXd wa = a.weights(), wb = b.weights();
    REQUIRE((wa - wb).cwiseAbs().maxCoeff() <= 1e-6);
    for (int k = 0; k < a.means.rows(); ++k) {
        if (wa[k] < 0.02) continue;
        VectorXd expect = a.means.row(k).transpose() + shift;
        REQUIRE((b.means.row(k).transpose() - expect).norm() <= 1e-6);
    }
}

TEST_CASE("fit is deterministic for a fixed stream and consistent across wrappers") {
    RngStream rng(20, 0);
    MatrixXd centers(2, 1);
    centers << -5.0, 5.0;
    MatrixXd s = make_blobs(centers, {60, 60}, 1.0, rng);

    IgmmPosterior a = fit_igmm(s, IgmmPrior{}, RngStream(99, 3));
    IgmmPosterior b = fit_igmm(s, IgmmPrior{}, RngStream(99, 3));
    REQUIRE(a.resp == b.resp);
    REQUIRE(a.means == b.means);
    REQUIRE(a.elbo_trace == b.elbo_trace);

    SampleSet set;
    set.points = s;
    set.values = VectorXd::Zero(s.rows());
    IgmmPosterior c = fit_igmm(set, IgmmPrior{}, RngStream(99, 3));
    REQUIRE(c.means == a.means);
}

TEST_CASE("peak extraction filters, merges, clips, and never returns empty") {
    SearchDomain domain(VectorXd::Zero(2), VectorXd::Ones(2));
    const double diag = std::sqrt(2.0);

    SECTION("threshold filter keeps only the visible components") {
        MatrixXd means(4, 2);
        means << 0.2, 0.2, 0.8, 0.8, 0.5, 0.5, 0.4, 0.6;
        PeakSet p =
            extract_peaks(stub_posterior({0.55, 0.40, 0.01, 0.04}, means, 0.02), domain);
        REQUIRE(p.means.size() == 3);        // 0.01 dropped
        REQUIRE(p.weights.size() == 3);
        REQUIRE(p.weights[0] == Catch::Approx(0.55));
        REQUIRE(p.means[0](0) == Catch::Approx(0.2));
    }

    SECTION("coincident means collapse onto the heavier component") {
        MatrixXd means(2, 2);
        means << 0.5, 0.5, 0.5, 0.5;
        PeakSet p = extract_peaks(stub_posterior({0.45, 0.55}, means), domain);
        REQUIRE(p.means.size() == 1);
        REQUIRE(p.weights[0] == Catch::Approx(1.0));  // absorbed mass
        REQUIRE(p.means[0](0) == Catch::Approx(0.5));
    }

    SECTION("means closer than the tolerance merge, farther ones survive") {
        MatrixXd means(3, 2);
        means << 0.50, 0.50, 0.50, 0.50 + 0.005 * diag, 0.9, 0.9;
        PeakSet p = extract_peaks(stub_posterior({0.5, 0.3, 0.2}, means, 0.02), domain);
        REQUIRE(p.means.size() == 2);  // second point within 1% of the diagonal of the first
        REQUIRE(p.weights[0] == Catch::Approx(0.8));
    }

    SECTION("components sharing one density mode collapse onto their centroid") {
        // three overlapping components tile a single broad ridge; the fourth
        // sits across a deep valley
        MatrixXd means(4, 2);
        means << 0.4, 0.5, 0.5, 0.5, 0.6, 0.5, 0.9, 0.9;
        PeakSet p = extract_peaks(stub_posterior({0.3, 0.3, 0.3, 0.1}, means, 0.1), domain);
        REQUIRE(p.means.size() == 2);
        REQUIRE(p.means[0](0) == Catch::Approx(0.5));
        REQUIRE(p.means[0](1) == Catch::Approx(0.5));
        REQUIRE(p.weights[0] == Catch::Approx(0.9));
        REQUIRE(p.weights[1] == Catch::Approx(0.1));
    }

    SECTION("out-of-domain means are clipped to the boundary") {
        MatrixXd means(1, 2);
        means << 1.7, -0.3;
        PeakSet p = extract_peaks(stub_posterior({1.0}, means), domain);
        REQUIRE(p.means.size() == 1);
        REQUIRE(p.means[0](0) == 1.0);
        REQUIRE(p.means[0](1) == 0.0);
    }

    SECTION("clipping re-triggers the merge pass") {
        // distinct before clipping, coincident on the boundary afterwards
        MatrixXd means(2, 2);
        means << 1.5, 0.5, 1.9, 0.5;
        PeakSet p = extract_peaks(stub_posterior({0.6, 0.4}, means, 0.05), domain);
        REQUIRE(p.means.size() == 1);
        REQUIRE(p.means[0](0) == 1.0);
        REQUIRE(p.weights[0] == Catch::Approx(1.0));  // merged on the boundary
    }

    SECTION("all components below threshold fall back to the heaviest one") {
        MatrixXd means(3, 2);
        means << 0.1, 0.1, 0.5, 0.5, 0.9, 0.9;
        PeakSet p = extract_peaks(stub_posterior({0.004, 0.010, 0.006}, means, 0.02), domain,
                                  /*weight_threshold=*/0.02);
        REQUIRE(p.means.size() == 1);
        REQUIRE(p.means[0](0) == Catch::Approx(0.5));
    }

    SECTION("pairwise distances respect the tolerance after extraction") {
        MatrixXd means(5, 2);
        means << 0.1, 0.1, 0.105, 0.1, 0.5, 0.5, 0.505, 0.5, 0.9, 0.9;
        PeakSet p =
            extract_peaks(stub_posterior({0.2, 0.2, 0.2, 0.2, 0.2}, means, 0.02), domain);
        double tol = 0.01 * domain.diagonal();
        for (size_t i = 0; i < p.means.size(); ++i)
            for (size_t j = i + 1; j < p.means.size(); ++j)
                REQUIRE((p.means[i] - p.means[j]).norm() >= tol);
        REQUIRE(p.means.size() == 3);
    }
}

TEST_CASE("undersized sample sets and divergent fits raise dedicated errors") {
    RngStream rng(21, 0);

    MatrixXd tiny(3, 2);  // need D + 2 = 4
    tiny.setRandom();
    try {
        fit_igmm(tiny, IgmmPrior{}, rng);
        FAIL("expected TooFewSamplesError");
    } catch (const TooFewSamplesError& e) {
        REQUIRE(e.got() == 3);
        REQUIRE(e.needed() == 4);
    }

    // astronomically spread samples overflow the scatter matrix -> the bound
    // turns non-finite during the very first parameter pass
    MatrixXd wild(4, 1);
    wild << 0.0, 0.1, 0.2, 1e200;
    try {
        fit_igmm(wild, IgmmPrior{}, rng);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        REQUIRE(e.sweep() == 0);
    }
}

TEST_CASE("prior validation") {
    MatrixXd s(6, 2);
    s.setRandom();
    RngStream rng(22, 0);

    IgmmPrior bad;
    bad.concentration = 0.0;
    REQUIRE_THROWS_AS(fit_igmm(s, bad, rng), std::invalid_argument);
    bad = IgmmPrior{};
    bad.truncation = 0;
    REQUIRE_THROWS_AS(fit_igmm(s, bad, rng), std::invalid_argument);
    bad = IgmmPrior{};
    bad.wishart_dof = 0.5;  // needs dof > D - 1 = 1
    REQUIRE_THROWS_AS(fit_igmm(s, bad, rng), std::invalid_argument);
    bad = IgmmPrior{};
    bad.mean_center = VectorXd::Zero(3);  // dimension mismatch
    REQUIRE_THROWS_AS(fit_igmm(s, bad, rng), std::invalid_argument);

    MatrixXd with_nan = s;
    with_nan(2, 1) = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(fit_igmm(with_nan, IgmmPrior{}, rng), std::invalid_argument);
}
