#include "psq/mg1_core.hpp"

#include <cmath>

#include "psq/error.hpp"
#include "psq/format.hpp"

namespace psq {

BusyPeriodSolver::BusyPeriodSolver(ModelParams params, double tol, std::size_t max_iters)
    : params_(std::move(params)), tol_(tol), max_iters_(max_iters) {
    if (!(tol_ > 0.0)) throw Error(ErrorKind::InvalidArgument, "tolerance must be > 0");
    if (max_iters_ == 0) throw Error(ErrorKind::InvalidArgument, "max_iters must be >= 1");
}

BusyPeriodValue BusyPeriodSolver::lst(double r) const {
    params_.require_stable();
    if (!(r >= 0.0) || !std::isfinite(r)) {
        throw Error(ErrorKind::InvalidArgument, "r must be >= 0, got " + format_double(r));
    }
    const double lambda = params_.lambda();
    const ServiceDistribution& b = params_.service();
    double pi = 0.0;
    for (std::size_t m = 1; m <= max_iters_; ++m) {
        const double next = b.lst(r + lambda - lambda * pi);
        if (next < pi - 1e-15) {
            throw Error(ErrorKind::NotConverged,
                        "busy-period iteration lost monotonicity at step " + std::to_string(m));
        }
        const double diff = next - pi;
        pi = next;
        if (diff < tol_) {
            const double residual = std::abs(pi - b.lst(r + lambda - lambda * pi));
            return {pi, m, residual};
        }
    }
    throw Error(ErrorKind::NotConverged, "busy-period iteration did not converge in " +
                                             std::to_string(max_iters_) + " steps at r=" +
                                             format_double(r));
}

double BusyPeriodSolver::mean() const {
    params_.require_stable();
    return params_.service().mean() / (1.0 - params_.rho());
}

double qlen_pmf(const ModelParams& params, std::size_t n) {
    params.require_stable();
    const double rho = params.rho();
    const auto k = static_cast<double>(params.permanent_jobs());
    const auto nd = static_cast<double>(n);
    if (rho == 0.0) return n == 0 ? 1.0 : 0.0;
    if (n <= 1000 && params.permanent_jobs() <= 1000) {
        // C(n+K, K) as a running product; exact for the small cases.
        double coeff = 1.0;
        for (std::size_t j = 1; j <= params.permanent_jobs(); ++j) {
            coeff *= (nd + static_cast<double>(j)) / static_cast<double>(j);
        }
        const double value = std::pow(1.0 - rho, k + 1.0) * coeff * std::pow(rho, nd);
        if (std::isfinite(value)) return value;
    }
    const double log_coeff = std::lgamma(nd + k + 1.0) - std::lgamma(k + 1.0) - std::lgamma(nd + 1.0);
    return std::exp((k + 1.0) * std::log1p(-rho) + log_coeff + nd * std::log(rho));
}

double qlen_mean(const ModelParams& params) {
    params.require_stable();
    const double rho = params.rho();
    return static_cast<double>(params.permanent_jobs() + 1) * rho / (1.0 - rho);
}

}  // namespace psq
