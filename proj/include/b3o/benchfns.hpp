#pragma once

#include <b3o/domain.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace b3o {

enum class Sense { kMin, kMax };

//! A synthetic objective with its domain and both published and analytically
//! attainable optima. `reported_optimum` is the value as published;
//! `optimal_value` is the best value the formula can actually attain on the
//! domain (they differ where the published number is rounded or inconsistent
//! with the stated constants).
struct Benchmark {
    std::string name;
    int dim = 0;
    SearchDomain domain{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)};
    std::function<double(const Eigen::VectorXd&)> evaluate;
    double reported_optimum = 0.0;
    double optimal_value = 0.0;
    Sense sense = Sense::kMin;
};

namespace detail {

inline void require_dim(const Eigen::VectorXd& x, long dim, const char* fn) {
    if (x.size() != dim)
        throw std::invalid_argument(std::string(fn) + ": expected dimension " +
                                    std::to_string(dim) + ", got " + std::to_string(x.size()));
}

inline void require_range(const Eigen::VectorXd& x, double lo, double hi, const char* fn) {
    for (long i = 0; i < x.size(); ++i)
        if (!(x[i] >= lo && x[i] <= hi))
            throw std::domain_error(std::string(fn) + ": coordinate " + std::to_string(i) +
                                    " = " + std::to_string(x[i]) + " outside [" +
                                    std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

}  // namespace detail

//! (6x-2)^2 sin(12x-4) on [0,1].
inline double forrester(double x) {
    if (!(x >= 0.0 && x <= 1.0))
        throw std::domain_error("forrester: x = " + std::to_string(x) + " outside [0, 1]");
    const double t = 6.0 * x - 2.0;
    return t * t * std::sin(12.0 * x - 4.0);
}

//! -(1 + cos(12 r)) / (r^2/2 + 2) with r = |x|, on [-5.12, 5.12]^2.
inline double dropwave(const Eigen::VectorXd& x) {
    detail::require_dim(x, 2, "dropwave");
    detail::require_range(x, -5.12, 5.12, "dropwave");
    const double r2 = x.squaredNorm();
    return -(1.0 + std::cos(12.0 * std::sqrt(r2))) / (0.5 * r2 + 2.0);
}

//! Four-peak exponential sum on the unit cube, 3- or 6-dimensional. The
//! mixing weights come from the published benchmark; the A and P constants
//! below are the standard ones from the optimization-benchmark literature.
inline double hartmann(const Eigen::VectorXd& x) {
    static const double kAlpha[4] = {1.0, 1.2, 3.0, 3.2};
    static const double kA3[4][3] = {{3, 10, 30}, {0.1, 10, 35}, {3, 10, 30}, {0.1, 10, 35}};
    static const double kP3[4][3] = {{0.3689, 0.1170, 0.2673},
                                     {0.4699, 0.4387, 0.7470},
                                     {0.1091, 0.8732, 0.5547},
                                     {0.0381, 0.5743, 0.8828}};
    static const double kA6[4][6] = {{10, 3, 17, 3.5, 1.7, 8},
                                     {0.05, 10, 17, 0.1, 8, 14},
                                     {3, 3.5, 1.7, 10, 17, 8},
                                     {17, 8, 0.05, 10, 0.1, 14}};
    static const double kP6[4][6] = {{0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886},
                                     {0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991},
                                     {0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650},
                                     {0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381}};
    const long d = x.size();
    if (d != 3 && d != 6)
        throw std::invalid_argument("hartmann: expected a 3- or 6-vector, got dimension " +
                                    std::to_string(d));
    detail::require_range(x, 0.0, 1.0, "hartmann");

    double value = 0.0;
    for (int k = 0; k < 4; ++k) {
        double expo = 0.0;
        for (long j = 0; j < d; ++j) {
            const double diff = x[j] - (d == 3 ? kP3[k][j] : kP6[k][j]);
            expo += (d == 3 ? kA3[k][j] : kA6[k][j]) * diff * diff;
        }
        value -= kAlpha[k] * std::exp(-expo);
    }
    return value;
}

//! prod_i sin(x_i) sqrt(x_i) on [0, 10]^D; a maximization benchmark.
inline double alpine2(const Eigen::VectorXd& x) {
    if (x.size() < 1) throw std::invalid_argument("alpine2: empty point");
    detail::require_range(x, 0.0, 10.0, "alpine2");
    double value = 1.0;
    for (long i = 0; i < x.size(); ++i) value *= std::sin(x[i]) * std::sqrt(x[i]);
    return value;
}

//! prod_i (|4 x_i - 2| + 1) / 2 on [-4, 6]^D.
inline double gsobol(const Eigen::VectorXd& x) {
    if (x.size() < 1) throw std::invalid_argument("gsobol: empty point");
    detail::require_range(x, -4.0, 6.0, "gsobol");
    double value = 1.0;
    for (long i = 0; i < x.size(); ++i) value *= (std::abs(4.0 * x[i] - 2.0) + 1.0) / 2.0;
    return value;
}

namespace detail {

inline SearchDomain cube(int dim, double lo, double hi) {
    return SearchDomain(Eigen::VectorXd::Constant(dim, lo), Eigen::VectorXd::Constant(dim, hi));
}

inline std::map<std::string, Benchmark> build_registry() {
    std::map<std::string, Benchmark> reg;

    Benchmark fr;
    fr.name = "forrester-1";
    fr.dim = 1;
    fr.domain = cube(1, 0.0, 1.0);
    fr.evaluate = [](const Eigen::VectorXd& x) {
        require_dim(x, 1, "forrester");
        return forrester(x[0]);
    };
    fr.reported_optimum = -6.0;
    fr.optimal_value = -6.0207400557670825;
    fr.sense = Sense::kMin;
    reg[fr.name] = fr;

    Benchmark dw;
    dw.name = "dropwave-2";
    dw.dim = 2;
    dw.domain = cube(2, -5.12, 5.12);
    dw.evaluate = [](const Eigen::VectorXd& x) { return dropwave(x); };
    dw.reported_optimum = -1.0;
    dw.optimal_value = -1.0;
    dw.sense = Sense::kMin;
    reg[dw.name] = dw;

    for (int d : {3, 6}) {
        Benchmark h;
        h.name = "hartmann-" + std::to_string(d);
        h.dim = d;
        h.domain = cube(d, 0.0, 1.0);
        h.evaluate = [](const Eigen::VectorXd& x) { return hartmann(x); };
        h.reported_optimum = d == 3 ? -3.86276 : -3.32237;
        h.optimal_value = d == 3 ? -3.862779787332662 : -3.3223680114155143;
        h.sense = Sense::kMin;
        reg[h.name] = h;
    }

    for (int d : {5, 10}) {
        Benchmark al;
        al.name = "alpine2-" + std::to_string(d);
        al.dim = d;
        al.domain = cube(d, 0.0, 10.0);
        al.evaluate = [](const Eigen::VectorXd& x) { return alpine2(x); };
        al.reported_optimum = -std::pow(2.808, d);  // published with a sign discrepancy
        al.optimal_value = d == 5 ? 174.6171753021145 : 30491.157910489386;
        al.sense = Sense::kMax;
        reg[al.name] = al;

        Benchmark gs;
        gs.name = "gsobol-" + std::to_string(d);
        gs.dim = d;
        gs.domain = cube(d, -4.0, 6.0);
        gs.evaluate = [](const Eigen::VectorXd& x) { return gsobol(x); };
        gs.reported_optimum = 0.0;  // published value; the formula's floor is 0.5^D
        gs.optimal_value = std::pow(0.5, d);
        gs.sense = Sense::kMin;
        reg[gs.name] = gs;
    }

    return reg;
}

}  // namespace detail

inline const std::map<std::string, Benchmark>& benchmark_registry() {
    static const std::map<std::string, Benchmark> kRegistry = detail::build_registry();
    return kRegistry;
}

inline std::vector<std::string> benchmark_names() {
    std::vector<std::string> names;
    for (const auto& [key, bench] : benchmark_registry()) names.push_back(key);
    return names;
}

//! Look up a benchmark; unknown keys throw with the full list of valid names.
inline Benchmark get_benchmark(const std::string& key) {
    const auto& reg = benchmark_registry();
    auto it = reg.find(key);
    if (it == reg.end()) {
        std::string msg = "unknown benchmark '" + key + "'; available:";
        for (const auto& [name, bench] : reg) msg += " " + name;
        throw std::out_of_range(msg);
    }
    return it->second;
}

}  // namespace b3o
