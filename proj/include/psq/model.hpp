#pragma once

#include <cstddef>

#include "psq/service_dist.hpp"

namespace psq {

/// Arrival rate, job-size law and the number of permanent (never-departing) jobs.
class ModelParams {
public:
    ModelParams(double lambda, ServiceDistribution service, std::size_t permanent_jobs = 0);

    double lambda() const noexcept { return lambda_; }
    const ServiceDistribution& service() const noexcept { return service_; }
    std::size_t permanent_jobs() const noexcept { return permanent_jobs_; }

    /// Offered load lambda * mean size.
    double rho() const noexcept { return rho_; }
    bool stable() const noexcept { return rho_ < 1.0; }

    /// Throws UnstableLoad unless rho < 1.
    void require_stable() const;

    ModelParams with_permanent_jobs(std::size_t k) const;

private:
    double lambda_;
    ServiceDistribution service_;
    std::size_t permanent_jobs_;
    double rho_;
};

}  // namespace psq
