#pragma once

#include <stdexcept>
#include <string>

namespace b3o {

//! Cholesky factorization hit a non-positive pivot even after jitter.
class FactorizationError : public std::runtime_error {
public:
    FactorizationError(int pivot, const std::string& what)
        : std::runtime_error(what), pivot_(pivot) {}
    int pivot() const { return pivot_; }

private:
    int pivot_;
};

//! The sampler produced fewer points than a downstream fit needs.
class TooFewSamplesError : public std::runtime_error {
public:
    TooFewSamplesError(long got, long needed, const std::string& what)
        : std::runtime_error(what), got_(got), needed_(needed) {}
    long got() const { return got_; }
    long needed() const { return needed_; }

private:
    long got_;
    long needed_;
};

//! Variational fit diverged (non-finite bound); carries the sweep index.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int sweep, const std::string& what)
        : std::runtime_error(what), sweep_(sweep) {}
    int sweep() const { return sweep_; }

private:
    int sweep_;
};

}  // namespace b3o
