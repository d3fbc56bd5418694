#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "psq/grid_measure.hpp"
#include "psq/model.hpp"

namespace psq {

inline constexpr double kDefaultTruncationTol = 1e-10;

/// Smallest M with rho^(M+1) / (1 - rho) < eps: the number of terms after which
/// the geometric series for the waiting-time law is certified to eps.
std::size_t geometric_truncation_terms(double rho, double eps);

/// Stationary FCFS M/G/1 waiting-time law W = (1-rho) sum_n rho^n F^{n*},
/// F the excess of the service law.
///
/// The series is summed in closed form by marching the equivalent defective
/// renewal equation W = (1-rho) + rho * (W * F) over the grid with the same
/// midpoint rule `stieltjes_convolve` uses, so the result is the M -> infinity
/// limit of the discrete partial sums (and within eps of the partial sum at
/// `geometric_truncation_terms(rho, eps)`). The atom at 0 is exactly 1 - rho.
GriddedDF waiting_cdf(const ModelParams& params, double step, double horizon,
                      double eps = kDefaultTruncationTol);

/// Explicit partial sum (1-rho) sum_{n<=terms} rho^n F^{n*} of the same series.
GriddedDF waiting_cdf_partial(const ModelParams& params, double step, double horizon,
                              std::size_t terms);

/// Grid, waiting-time law and the lazily extended caches the sojourn kernels need.
///
/// Construction and `prepare` are single-owner. After `prepare(n)` all const
/// queries up to order n are read-only and safe to share between threads.
class KernelWorkspace {
public:
    KernelWorkspace(ModelParams params, double step, double horizon,
                    double truncation_tol = kDefaultTruncationTol);

    const ModelParams& params() const noexcept { return params_; }
    double step() const noexcept { return step_; }
    std::size_t last_node() const noexcept { return excess_.last_node(); }
    double horizon() const noexcept { return excess_.horizon(); }
    double truncation_tol() const noexcept { return tol_; }
    std::size_t truncation_terms() const noexcept { return truncation_terms_; }

    /// Excess law F sampled on the grid.
    const GriddedDF& excess() const noexcept { return excess_; }

    /// W; throws UnstableLoad when rho >= 1.
    const GriddedDF& waiting() const;

    /// Index of the node at u. Throws HorizonExceeded past the grid and
    /// InvalidArgument when u is not within 1e-9 steps of a node.
    std::size_t node_of(double u) const;

    /// Extends the W^{k*} cache so that xi_at(n, .) works for n <= max_order.
    void prepare(std::size_t max_order);
    std::size_t prepared_order() const noexcept { return nfold_.size(); }

    /// W^{n*} by repeated self-convolution of W; requires n < prepared_order().
    const GriddedDF& nfold(std::size_t n) const;

    /// xi_n at one node: (1-rho)^-n int_[0,u] (u-x)^n dW^{(n-1)*}(x).
    double xi_at(std::size_t n, std::size_t node) const;

    /// xi_n on the whole grid (cached).
    const GridFunction& xi_grid(std::size_t n);

    /// F^{k*} at every node (cached); F^{0*} is the unit step.
    const std::vector<double>& excess_power(std::size_t k);

private:
    ModelParams params_;
    double step_;
    double tol_;
    std::size_t truncation_terms_;
    GriddedDF excess_;
    std::vector<GriddedDF> nfold_;
    std::vector<std::vector<double>> nfold_increments_;
    std::vector<std::vector<double>> excess_powers_;
    std::map<std::size_t, GridFunction> xi_cache_;
};

/// W^{n*} = (1-rho)^n sum_k C(k+n-1, n-1) rho^k F^{k*}, truncated once the
/// remaining negative-binomial weight is below the workspace tolerance.
GriddedDF w_nfold(KernelWorkspace& ws, std::size_t n);

/// xi_n over the grid; xi_1(u) = u / (1-rho).
GridFunction xi(KernelWorkspace& ws, std::size_t n);

struct LstEvaluation {
    double value;
    std::size_t terms_used;
    /// Certified bound on the neglected part of the reciprocal series.
    double tail_bound;
};

/// E[exp(-r V(u))] for the queue without permanent jobs, as the reciprocal of
/// sum_n r^n xi_n(u) / n!. Terms are added until the dominated tail
/// (xi_n(u) <= (u/(1-rho))^n) is below 1e-12 of the partial sum; if
/// `max_terms` runs out before the tail is below 1e-9, NotConverged is thrown.
LstEvaluation sojourn_lst(KernelWorkspace& ws, double r, double u, std::size_t max_terms = 200);

struct WcircValue {
    double value;
    /// True when the value is a partial sum without a convergence certificate (rho >= 1).
    bool partial;
    std::size_t terms;
};

/// W(x) / (1-rho) for rho < 1; for rho >= 1 the partial sum
/// sum_{n<=max_terms} rho^n F^{n*}(x).
WcircValue wcirc(KernelWorkspace& ws, double x, std::size_t max_terms);

}  // namespace psq
