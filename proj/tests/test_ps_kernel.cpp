#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "psq/error.hpp"
#include "psq/ps_kernel.hpp"

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

ModelParams mm1(double lambda) { return ModelParams(lambda, ServiceDistribution::exponential(1.0)); }

}  // namespace

TEST_CASE("truncation terms bound the geometric tail") {
    for (double rho : {0.1, 0.5, 0.9, 0.99}) {
        for (double eps : {1e-6, 1e-10}) {
            const std::size_t m = psq::geometric_truncation_terms(rho, eps);
            CHECK(std::pow(rho, static_cast<double>(m + 1)) / (1.0 - rho) < eps);
            if (m > 0) CHECK(std::pow(rho, static_cast<double>(m)) / (1.0 - rho) >= eps);
        }
    }
    CHECK(psq::geometric_truncation_terms(0.0, 1e-10) == 0);
}

TEST_CASE("waiting-time law of M/M/1") {
    const double h = 1e-3;
    const psq::GriddedDF w = psq::waiting_cdf(mm1(0.5), h, 4.0);
    CHECK(w.atom0() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(w[2000] == doctest::Approx(0.816060).epsilon(1e-6));
    for (std::size_t k = 0; k <= w.last_node(); k += 7) {
        CHECK(std::abs(w[k] - oracle::mm1_waiting_cdf(0.5, 1.0, h * k)) < 10 * h * h);
    }
}

TEST_CASE("waiting-time law of M/D/1") {
    const double h = 1e-3;
    for (double lambda : {0.3, 0.7}) {
        const psq::GriddedDF w =
            psq::waiting_cdf(ModelParams(lambda, ServiceDistribution::deterministic(1.0)), h, 5.0);
        for (std::size_t k = 0; k <= w.last_node(); k += 11) {
            CAPTURE(k);
            CHECK(std::abs(w[k] - oracle::md1_waiting_cdf(lambda, 1.0, h * k)) < 1e-5);
        }
    }
}

TEST_CASE("truncated series approaches the full law") {
    const auto params = mm1(0.5);
    const psq::GriddedDF full = psq::waiting_cdf(params, 0.01, 3.0);
    const psq::GriddedDF few = psq::waiting_cdf_partial(params, 0.01, 3.0, 3);
    const psq::GriddedDF many = psq::waiting_cdf_partial(params, 0.01, 3.0, 60);
    for (std::size_t k = 0; k <= full.last_node(); ++k) {
        CHECK(few[k] <= many[k] + 1e-12);
        CHECK(std::abs(many[k] - full[k]) < 1e-9);
    }
}

TEST_CASE("xi examples and oracle") {
    KernelWorkspace ws(mm1(0.5), 1e-3, 4.0);
    CHECK(ws.xi_at(1, 2000) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(std::abs(ws.xi_at(2, 2000) - (16.0 - 16.0 * std::exp(-1.0))) < 1e-5);
    for (std::size_t n = 1; n <= 4; ++n) {
        const psq::GridFunction grid = psq::xi(ws, n);
        for (double u : {0.5, 1.0, 2.5, 4.0}) {
            CAPTURE(n);
            CAPTURE(u);
            const double ref = oracle::mm1_xi(0.5, 1.0, n, u);
            CHECK(std::abs(ws.xi_at(n, ws.node_of(u)) - ref) < 1e-5 * std::max(1.0, ref));
            CHECK(grid.at(u) == doctest::Approx(ws.xi_at(n, ws.node_of(u))).epsilon(1e-10));
        }
    }
}

TEST_CASE("xi without load is a power") {
    KernelWorkspace ws(mm1(0.0), 0.01, 3.0);
    ws.prepare(5);
    for (std::size_t n = 1; n <= 5; ++n) {
        for (std::size_t node : {0, 17, 100, 300}) {
            const double u = 0.01 * node;
            CHECK(ws.xi_at(n, node) == doctest::Approx(std::pow(u, n)).epsilon(1e-12));
        }
    }
}

TEST_CASE("xi grows with u and with load") {
    for (double lambda : {0.2, 0.6}) {
        KernelWorkspace ws(ModelParams(lambda, ServiceDistribution::erlang(2, 2.0)), 0.01, 3.0);
        ws.prepare(3);
        for (std::size_t n = 1; n <= 3; ++n) {
            double prev = 0.0;
            for (std::size_t k = 0; k <= ws.last_node(); ++k) {
                const double v = ws.xi_at(n, k);
                CHECK(v >= prev);
                prev = v;
            }
        }
    }
}

TEST_CASE("wcirc examples") {
    KernelWorkspace ws(mm1(0.5), 1e-3, 2.0);
    const psq::WcircValue at0 = psq::wcirc(ws, 0.0, 200);
    CHECK(at0.value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(psq::wcirc(ws, 2.0, 200).value - (2.0 - 2.0 * 0.5 * std::exp(-1.0))) < 1e-5);
    CHECK_FALSE(at0.partial);
}

TEST_CASE("wcirc beyond stability reports partial sums") {
    KernelWorkspace ws(mm1(1.5), 0.01, 2.0);
    CHECK(kind_of([&] { (void)ws.waiting(); }) == psq::ErrorKind::UnstableLoad);
    const psq::WcircValue few = psq::wcirc(ws, 2.0, 10);
    const psq::WcircValue more = psq::wcirc(ws, 2.0, 20);
    CHECK(few.partial);
    CHECK(more.value >= few.value);
    CHECK(psq::wcirc(ws, 0.0, 10).value == doctest::Approx(1.0));
}

TEST_CASE("n-fold waiting law") {
    const double h = 0.005;
    KernelWorkspace ws(mm1(0.5), h, 6.0);
    for (std::size_t n = 0; n <= 4; ++n) {
        const psq::GriddedDF series = psq::w_nfold(ws, n);
        CHECK(series.atom0() == doctest::Approx(std::pow(0.5, n)).epsilon(1e-12));
        for (std::size_t k = 0; k <= series.last_node(); k += 13) {
            CAPTURE(n);
            CAPTURE(k);
            CHECK(std::abs(series[k] - oracle::mm1_waiting_nfold_cdf(0.5, 1.0, n, h * k)) < 1e-4);
        }
    }
}

TEST_CASE("sojourn transform") {
    SUBCASE("r = 0") {
        KernelWorkspace ws(mm1(0.5), 0.01, 2.0);
        const psq::LstEvaluation v = psq::sojourn_lst(ws, 0.0, 1.0);
        CHECK(v.value == 1.0);
    }
    SUBCASE("no load gives a point mass at u") {
        KernelWorkspace ws(mm1(0.0), 0.01, 3.0);
        for (double r : {0.1, 1.0, 3.0}) {
            for (double u : {0.5, 1.0, 3.0}) {
                CHECK(std::abs(psq::sojourn_lst(ws, r, u).value - std::exp(-r * u)) < 1e-9);
            }
        }
    }
    SUBCASE("matches the oracle series") {
        KernelWorkspace ws(mm1(0.5), 1e-3, 2.0);
        for (double r : {0.25, 0.5}) {
            double sum = 1.0;
            double coef = 1.0;
            for (std::size_t n = 1; n <= 30; ++n) {
                coef *= r / static_cast<double>(n);
                sum += coef * oracle::mm1_xi(0.5, 1.0, n, 1.0);
            }
            const psq::LstEvaluation v = psq::sojourn_lst(ws, r, 1.0);
            CHECK(std::abs(v.value - 1.0 / sum) < 1e-6);
            CHECK(v.tail_bound <= 1e-12 * (1.0 / v.value));
        }
    }
    SUBCASE("decreasing in r and bounded by the mean") {
        KernelWorkspace ws(ModelParams(0.4, ServiceDistribution::hyperexponential({0.3, 0.7}, {0.5, 3.0})),
                           0.01, 2.0);
        double prev = 1.0;
        const double mean = 2.0 / (1.0 - ws.params().rho());
        for (int i = 1; i <= 10; ++i) {
            const double r = 0.2 * i;
            const double v = psq::sojourn_lst(ws, r, 2.0).value;
            CHECK(v < prev);
            CHECK(v > 0.0);
            CHECK(v >= std::exp(-r * mean) - 1e-9);  // Jensen
            prev = v;
        }
    }
    SUBCASE("series cap") {
        KernelWorkspace ws(mm1(0.5), 0.01, 2.0);
        CHECK(kind_of([&] { (void)psq::sojourn_lst(ws, 5.0, 2.0, 3); }) == psq::ErrorKind::NotConverged);
    }
}

TEST_CASE("workspace argument checks") {
    KernelWorkspace ws(mm1(0.5), 0.01, 1.0);
    CHECK(kind_of([&] { (void)ws.node_of(1.5); }) == psq::ErrorKind::HorizonExceeded);
    CHECK(kind_of([&] { (void)ws.node_of(0.005); }) == psq::ErrorKind::InvalidArgument);
    CHECK(kind_of([&] { (void)ws.nfold(5); }) == psq::ErrorKind::InvalidArgument);
    CHECK(kind_of([&] { (void)psq::sojourn_lst(ws, -1.0, 0.5); }) == psq::ErrorKind::InvalidArgument);
}
