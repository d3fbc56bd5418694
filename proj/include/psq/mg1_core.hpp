#pragma once

#include <cstddef>

#include "psq/model.hpp"

namespace psq {

struct BusyPeriodValue {
    double value;
    std::size_t iterations;
    /// |pi - beta(r + lambda - lambda pi)| at the returned pi.
    double residual;
};

/// Busy-period transform pi(r) = beta(r + lambda - lambda pi(r)), solved by
/// fixed-point iteration from pi_0 = 0. The iterates increase monotonically to
/// the minimal root; a decrease is reported as NotConverged.
class BusyPeriodSolver {
public:
    explicit BusyPeriodSolver(ModelParams params, double tol = 1e-12,
                              std::size_t max_iters = 1'000'000);

    const ModelParams& params() const noexcept { return params_; }

    BusyPeriodValue lst(double r) const;

    /// Mean busy period, mean size / (1 - rho).
    double mean() const;

private:
    ModelParams params_;
    double tol_;
    std::size_t max_iters_;
};

/// P(N = n) = (1-rho)^(K+1) C(n+K, K) rho^n for the number of ordinary jobs.
double qlen_pmf(const ModelParams& params, std::size_t n);

/// (K+1) rho / (1-rho).
double qlen_mean(const ModelParams& params);

}  // namespace psq
