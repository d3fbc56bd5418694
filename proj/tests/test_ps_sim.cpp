#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "psq/error.hpp"
#include "psq/ps_sim.hpp"

using psq::EpsQueue;
using psq::ModelParams;
using psq::ServiceDistribution;
using psq::SimConfig;

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

ServiceDistribution probe_mix() {
    return ServiceDistribution::probe_mixture(ServiceDistribution::exponential(1.0), 1.0, 0.1);
}

SimConfig small_config(ModelParams params, std::size_t departures = 200'000) {
    SimConfig c{std::move(params)};
    c.measured_departures = departures;
    c.warmup_departures = 5'000;
    return c;
}

}  // namespace

TEST_CASE("lone job with permanent jobs") {
    for (std::size_t k : {0, 1, 2, 5}) {
        EpsQueue q(k);
        q.arrive(1.5, true);
        const double t = q.next_departure();
        CHECK(t == doctest::Approx(1.5 * static_cast<double>(k + 1)).epsilon(1e-14));
        q.advance(t);
        const EpsQueue::Departure d = q.depart();
        CHECK(d.probe);
        CHECK(d.time - d.arrival_time == doctest::Approx(1.5 * static_cast<double>(k + 1)).epsilon(1e-14));
        CHECK(q.jobs() == 0);
        CHECK(std::isinf(q.next_departure()));
    }
}

TEST_CASE("jobs share the server equally") {
    EpsQueue q(0);
    q.arrive(1.0);
    q.arrive(2.0);
    CHECK(q.next_departure() == doctest::Approx(2.0));
    q.advance(2.0);
    CHECK(q.depart().size == 1.0);
    CHECK(q.next_departure() == doctest::Approx(3.0));
    q.advance(2.5);
    q.arrive(0.25);  // remaining 0.5 vs 0.25, two jobs
    CHECK(q.next_departure() == doctest::Approx(3.0));
    q.advance(3.0);
    CHECK(q.depart().size == 0.25);
    CHECK(q.next_departure() == doctest::Approx(3.25));
    q.advance(3.25);
    q.depart();
    CHECK(q.remaining_work() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(q.delivered_to_ordinary() == doctest::Approx(3.25).epsilon(1e-12));
    CHECK(q.arrived_work() == 3.25);
}

TEST_CASE("queue rejects misuse") {
    EpsQueue q(1);
    CHECK(kind_of([&] { q.depart(); }) == psq::ErrorKind::InvalidArgument);
    CHECK(kind_of([&] { q.arrive(-1.0); }) == psq::ErrorKind::InvalidArgument);
    q.advance(1.0);
    CHECK(kind_of([&] { q.advance(0.5); }) == psq::ErrorKind::InvalidArgument);
}

TEST_CASE("normal quantile") {
    CHECK(psq::normal_quantile(0.99) == doctest::Approx(2.5758293035489).epsilon(1e-10));
    CHECK(psq::normal_quantile(0.95) == doctest::Approx(1.9599639845401).epsilon(1e-10));
    CHECK(kind_of([] { (void)psq::normal_quantile(1.0); }) == psq::ErrorKind::InvalidArgument);
}

TEST_CASE("no load: every probe sojourn is (K+1)u") {
    const ModelParams params(0.0, probe_mix(), 2);
    SimConfig c = small_config(params, 20'000);
    c.r_values = {1.0};
    const psq::SimResult r = psq::run(c);
    REQUIRE(r.probe_size.has_value());
    CHECK(*r.probe_size == 1.0);
    CHECK(r.probe_moments.at(0).estimate.value == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(r.probe_variance->value == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(r.lst_estimates.at(0).estimate.value == doctest::Approx(std::exp(-3.0)).epsilon(1e-12));
}

TEST_CASE("transform estimates") {
    const ModelParams params(0.0, probe_mix());
    const std::vector<double> rs{0.0, 1.0};
    const psq::SimResult r = psq::estimate_lst(small_config(params, 20'000), rs);
    REQUIRE(r.lst_estimates.size() == 2);
    CHECK(r.lst_estimates[0].estimate.value == 1.0);
    CHECK(r.lst_estimates[0].estimate.ci_halfwidth == 0.0);
    CHECK(r.lst_estimates[1].estimate.value == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("mean queue length and PASTA") {
    const ModelParams params(0.5, ServiceDistribution::exponential(1.0));
    const psq::SimResult r = psq::run(small_config(params, 500'000));
    CHECK(std::abs(r.mean_queue_length.value - 1.0) <= 3.0 * r.mean_queue_length.ci_halfwidth);
    CHECK(r.mean_queue_length.ci_halfwidth < 0.1);
    const std::size_t bins = std::min(r.qlen_histogram.size(), r.arrival_qlen_histogram.size());
    for (std::size_t n = 0; n < bins; ++n) {
        CHECK(std::abs(r.qlen_histogram[n] - r.arrival_qlen_histogram[n]) < 0.01);
    }
    double total = 0.0;
    for (double p : r.qlen_histogram) total += p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("occupancy is insensitive to the service law") {
    for (const auto& dist : {ServiceDistribution::deterministic(1.0),
                             ServiceDistribution::hyperexponential({0.2, 0.8}, {0.5, 2.0})}) {
        const ModelParams params(0.6 / dist.mean(), dist, 1);
        const psq::SimResult r = psq::run(small_config(params, 500'000));
        double tv = 0.0;
        for (std::size_t n = 0; n < r.qlen_histogram.size(); ++n) {
            tv += std::abs(r.qlen_histogram[n] - oracle::qlen_pmf(0.6, 1, n));
        }
        CHECK(0.5 * tv < 0.02);
    }
}

TEST_CASE("work balance") {
    const ModelParams params(0.7, ServiceDistribution::erlang(2, 2.0), 1);
    const psq::SimResult r = psq::run(small_config(params, 100'000));
    CHECK(r.work_balance_error < 1e-9);
}

TEST_CASE("runs are reproducible") {
    const ModelParams params(0.5, probe_mix(), 1);
    SimConfig c = small_config(params, 100'000);
    c.r_values = {0.5};
    const auto a = psq::to_json(psq::run(c)).dump();
    const auto b = psq::to_json(psq::run(c)).dump();
    CHECK(a == b);
    c.seed = 43;
    CHECK(psq::to_json(psq::run(c)).dump() != a);

    c.seed = 42;
    c.replications = 3;
    const psq::SimResult r1 = psq::run(c);
    const psq::SimResult r2 = psq::run(c);
    CHECK(r1.replication_count == 3);
    CHECK(psq::to_json(r1).dump() == psq::to_json(r2).dump());
}

TEST_CASE("invalid configurations") {
    const ModelParams params(0.5, probe_mix());
    SimConfig c = small_config(params, 100);
    c.batches = 1;
    CHECK(kind_of([&] { (void)psq::run(c); }) == psq::ErrorKind::InvalidConfig);
    c.batches = 200;
    CHECK(kind_of([&] { (void)psq::run(c); }) == psq::ErrorKind::InvalidConfig);
    c = small_config(params, 1000);
    c.r_values = {-1.0};
    CHECK(kind_of([&] { (void)psq::run(c); }) == psq::ErrorKind::InvalidConfig);
    c = small_config(ModelParams(1.2, ServiceDistribution::exponential(1.0)), 1000);
    CHECK(kind_of([&] { (void)psq::run(c); }) == psq::ErrorKind::UnstableLoad);
}

TEST_CASE("json summary") {
    const psq::SimResult r = psq::run(small_config(ModelParams(0.5, probe_mix()), 50'000));
    const auto j = psq::to_json(r);
    CHECK(j.contains("probe_moments"));
    CHECK(j.contains("qlen_histogram"));
    CHECK(j.at("probe_count").get<std::size_t>() == r.probe_count);
}
