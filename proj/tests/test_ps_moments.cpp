#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "psq/error.hpp"
#include "psq/ps_moments.hpp"

using psq::KernelWorkspace;
using psq::ModelParams;
using psq::ServiceDistribution;

namespace {

psq::ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const psq::Error& e) {
        return e.kind();
    }
    FAIL("expected psq::Error");
    return psq::ErrorKind::Usage;
}

ModelParams mm1(double lambda, std::size_t k = 0) {
    return ModelParams(lambda, ServiceDistribution::exponential(1.0), k);
}

}  // namespace

TEST_CASE("binomial table") {
    CHECK(psq::binomial(0, 0) == 1.0);
    CHECK(psq::binomial(5, 2) == 10.0);
    CHECK(psq::binomial(30, 15) == 155117520.0);
    CHECK(kind_of([] { (void)psq::binomial(31, 2); }) == psq::ErrorKind::InvalidArgument);
    for (std::size_t n = 1; n <= 30; ++n) {
        for (std::size_t k = 1; k < n; ++k) {
            CHECK(psq::binomial(n, k) == psq::binomial(n - 1, k - 1) + psq::binomial(n - 1, k));
        }
    }
}

TEST_CASE("conditional mean") {
    CHECK(psq::conditional_mean(mm1(0.5), 2.0) == 4.0);
    CHECK(psq::conditional_mean(mm1(0.5, 1), 2.0) == 8.0);
    CHECK(psq::conditional_mean(mm1(0.0, 3), 1.5) == 6.0);
    CHECK(kind_of([] { (void)psq::conditional_mean(mm1(1.0), 1.0); }) == psq::ErrorKind::UnstableLoad);
}

TEST_CASE("conditional variance against the closed form") {
    KernelWorkspace ws(mm1(0.5), 1e-3, 5.0);
    CHECK(std::abs(psq::conditional_variance(mm1(0.5), 2.0, ws) - 16.0 * std::exp(-1.0)) < 1e-4);
    for (double u : {0.25, 1.0, 3.3, 5.0, 1.2345}) {
        CAPTURE(u);
        CHECK(std::abs(psq::conditional_variance(mm1(0.5), u, ws) - oracle::mm1_ps_variance(0.5, 1.0, u)) <
              1e-5);
    }
    CHECK(psq::conditional_variance(mm1(0.5, 1), 2.0, ws) ==
          doctest::Approx(2.0 * psq::conditional_variance(mm1(0.5), 2.0, ws)));
    CHECK(psq::conditional_variance(mm1(0.5), 0.0, ws) == 0.0);
    CHECK(kind_of([&] { (void)psq::conditional_variance(mm1(0.5), 6.0, ws); }) ==
          psq::ErrorKind::HorizonExceeded);
    CHECK(kind_of([&] { (void)psq::conditional_variance(mm1(0.3), 1.0, ws); }) ==
          psq::ErrorKind::InvalidArgument);
}

TEST_CASE("moment recursion examples") {
    KernelWorkspace ws(mm1(0.5), 1e-3, 2.0);
    const std::vector<double> us{2.0};
    const psq::MomentTable base = psq::moments_upto(ws, 2, us);
    CHECK(base.mean(0) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(std::abs(base.at(2, 0) - (16.0 + 16.0 * std::exp(-1.0))) < 1e-4);
    CHECK(std::abs(base.at(2, 0) - 21.88610) < 1e-4);
    const psq::MomentTable one = psq::k_moments(base, 1);
    CHECK(one.mean(0) == doctest::Approx(8.0).epsilon(1e-12));
    CHECK(std::abs(one.variance(0) - 11.77214) < 1e-4);
    CHECK(std::abs(one.at(2, 0) - (64.0 + 32.0 * std::exp(-1.0))) < 2e-4);
}

TEST_CASE("moments agree with the oracle series reciprocal") {
    const double lambda = 0.5;
    KernelWorkspace ws(mm1(lambda), 1e-3, 3.0);
    const std::vector<double> us{0.5, 1.0, 3.0};
    const psq::MomentTable table = psq::moments_upto(ws, 4, us);
    for (std::size_t j = 0; j < us.size(); ++j) {
        std::vector<double> xi{1.0};
        for (std::size_t n = 1; n <= 4; ++n) xi.push_back(oracle::mm1_xi(lambda, 1.0, n, us[j]));
        const std::vector<double> ref = oracle::moments_from_xi(xi);
        for (std::size_t n = 1; n <= 4; ++n) {
            CAPTURE(us[j]);
            CAPTURE(n);
            CHECK(table.at(n, j) == doctest::Approx(ref[n]).epsilon(1e-5));
        }
    }
}

TEST_CASE("recursion and integral routes give the same variance") {
    for (const auto& dist : {ServiceDistribution::exponential(1.0), ServiceDistribution::deterministic(1.0),
                             ServiceDistribution::hyperexponential({0.2, 0.8}, {0.4, 2.0})}) {
        const ModelParams params(0.6 / dist.mean(), dist);
        KernelWorkspace ws(params, 1e-3, 4.0);
        const std::vector<double> us{0.5, 1.0, 2.0, 4.0};
        const psq::MomentTable table = psq::moments_upto(ws, 2, us);
        for (std::size_t j = 0; j < us.size(); ++j) {
            const double integral = psq::conditional_variance(params, us[j], ws);
            CHECK(std::abs(table.variance(j) - integral) <= std::max(1e-6, 1e-3 * integral));
        }
    }
}

TEST_CASE("moments are those of a nonnegative variable") {
    const ModelParams params(0.7, ServiceDistribution::erlang(3, 3.0));
    KernelWorkspace ws(params, 0.005, 3.0);
    const psq::MomentTable t = psq::moments_upto(ws, 6);
    for (std::size_t j = 1; j < t.u_grid.size(); j += 37) {
        // Lyapunov: m_n^(1/n) nondecreasing in n; mean = (u)/(1-rho).
        CHECK(t.mean(j) == doctest::Approx(t.u_grid[j] / (1.0 - params.rho())).epsilon(1e-9));
        double prev = t.mean(j);
        for (std::size_t n = 2; n <= 6; ++n) {
            const double root = std::pow(t.at(n, j), 1.0 / static_cast<double>(n));
            CHECK(root >= prev * (1.0 - 1e-9));
            prev = root;
        }
        CHECK(t.variance(j) >= 0.0);
    }
}

TEST_CASE("no load gives a point mass") {
    KernelWorkspace ws(mm1(0.0), 0.01, 2.0);
    const std::vector<double> us{0.37, 1.0, 2.0};
    const psq::MomentTable t = psq::moments_upto(ws, 5, us);
    for (std::size_t j = 0; j < us.size(); ++j) {
        for (std::size_t n = 1; n <= 5; ++n) {
            CHECK(t.at(n, j) == doctest::Approx(std::pow(us[j], n)).epsilon(1e-9));
        }
    }
}

TEST_CASE("permanent jobs add independent copies") {
    KernelWorkspace ws(ModelParams(0.4, ServiceDistribution::hyperexponential({0.5, 0.5}, {1.0, 3.0})), 0.01,
                       2.0);
    const std::vector<double> us{0.5, 2.0};
    const psq::MomentTable base = psq::moments_upto(ws, 4, us);
    for (std::size_t k = 0; k <= 5; ++k) {
        const psq::MomentTable t = psq::k_moments(base, k);
        CHECK(t.permanent_jobs == k);
        const double c = static_cast<double>(k + 1);
        for (std::size_t j = 0; j < us.size(); ++j) {
            CHECK(t.mean(j) == doctest::Approx(c * base.mean(j)).epsilon(1e-12));
            CHECK(t.variance(j) == doctest::Approx(c * base.variance(j)).epsilon(1e-9));
            CHECK(t.third_central(j) == doctest::Approx(c * base.third_central(j)).epsilon(1e-8));
        }
    }
    CHECK(kind_of([&] { (void)psq::k_moments(psq::k_moments(base, 1), 1); }) == psq::ErrorKind::InvalidArgument);
}

TEST_CASE("small-u asymptote") {
    CHECK(psq::small_u_var_asymptote(mm1(0.5), 1e-3) == doctest::Approx(2e-6).epsilon(1e-12));
    CHECK(psq::small_u_var_asymptote(mm1(0.5, 2), 1e-3) == doctest::Approx(6e-6).epsilon(1e-12));
}

TEST_CASE("order and moment limits") {
    KernelWorkspace ws(mm1(0.5), 0.1, 1.0);
    CHECK(kind_of([&] { (void)psq::moments_upto(ws, 31); }) == psq::ErrorKind::InvalidArgument);
    CHECK(kind_of([&] { (void)psq::moments_upto(ws, 0); }) == psq::ErrorKind::InvalidArgument);
    const std::vector<double> far{2.0};
    CHECK(kind_of([&] { (void)psq::moments_upto(ws, 2, far); }) == psq::ErrorKind::HorizonExceeded);
}
