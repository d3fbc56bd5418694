#include "psq/model.hpp"

#include <cmath>

#include "psq/error.hpp"
#include "psq/format.hpp"

namespace psq {

ModelParams::ModelParams(double lambda, ServiceDistribution service, std::size_t permanent_jobs)
    : lambda_(lambda),
      service_(std::move(service)),
      permanent_jobs_(permanent_jobs),
      rho_(lambda * service_.mean()) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw Error(ErrorKind::InvalidArgument,
                    "arrival rate must be finite and >= 0, got " + format_double(lambda));
    }
}

void ModelParams::require_stable() const {
    if (!stable()) {
        throw Error(ErrorKind::UnstableLoad,
                    "unstable: rho=" + format_double(rho_) + " >= 1");
    }
}

ModelParams ModelParams::with_permanent_jobs(std::size_t k) const {
    return ModelParams(lambda_, service_, k);
}

}  // namespace psq
