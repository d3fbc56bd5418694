#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "psq/model.hpp"
#include "psq/ps_kernel.hpp"

namespace psq {

/// Highest moment order the alternating recursion is run for.
inline constexpr std::size_t kMaxMomentOrder = 30;

/// Raw sojourn moments v_n(u) = E[V_K(u)^n] for n = 1..order over a list of sizes u.
struct MomentTable {
    std::vector<double> u_grid;
    std::size_t order = 0;
    std::size_t permanent_jobs = 0;
    /// values[n-1][j] is v_n(u_grid[j]).
    std::vector<std::vector<double>> values;

    double at(std::size_t n, std::size_t j) const { return values.at(n - 1).at(j); }
    double mean(std::size_t j) const { return at(1, j); }
    double variance(std::size_t j) const;
    double third_central(std::size_t j) const;
};

/// Exact binomial coefficient as a double, n <= kMaxMomentOrder.
double binomial(std::size_t n, std::size_t k);

/// E[V_K(u)] = (K+1) u / (1-rho).
double conditional_mean(const ModelParams& params, double u);

/// Var[V_K(u)] = (K+1) * 2/(1-rho)^2 * int_0^u (u-x)(1-W(x)) dx, trapezoid rule
/// over the workspace grid (with a partial last cell when u is off-grid).
/// The permanent-job count is taken from `params`.
double conditional_variance(const ModelParams& params, double u, const KernelWorkspace& ws);

/// v_n(u) for the queue without permanent jobs, from
/// v_n = sum_{i=1..n} C(n,i) v_{n-i} xi_i (-1)^{i+1}, v_0 = 1.
/// Off-grid u values are interpolated linearly between the bracketing nodes.
MomentTable moments_upto(KernelWorkspace& ws, std::size_t order, std::span<const double> u_values);

/// Same over every grid node up to the workspace's valid range.
MomentTable moments_upto(KernelWorkspace& ws, std::size_t order);

/// Moments of the sum of K+1 independent copies of V(u), by repeated
/// binomial convolution of the moment sequences.
MomentTable k_moments(const MomentTable& base, std::size_t permanent_jobs);

/// (K+1) u^2 rho / (1-rho)^2, the small-u behaviour of the variance.
double small_u_var_asymptote(const ModelParams& params, double u);

}  // namespace psq
