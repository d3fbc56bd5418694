#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "psq/model.hpp"

namespace psq {

/// Egalitarian processor-sharing server with K permanent jobs.
///
/// With n ordinary jobs present every job, permanent or not, is served at rate
/// 1/(n+K). Attained service is tracked through a shared virtual clock that
/// advances by dt/(n+K); a job leaves when the clock reaches its arrival
/// reading plus its size, so remaining sizes are never discretised.
class EpsQueue {
public:
    struct Departure {
        std::uint64_t id;
        double arrival_time;
        double size;
        double time;
        bool probe;
    };

    explicit EpsQueue(std::size_t permanent_jobs) : permanent_(permanent_jobs) {}

    double now() const noexcept { return now_; }
    std::size_t jobs() const noexcept { return heap_.size(); }

    /// Absolute time of the next departure, +inf when no ordinary job is present.
    double next_departure() const;

    /// Moves the clock forward to t, which must not pass next_departure().
    void advance(double t);

    /// Adds a job of the given size at the current time.
    std::uint64_t arrive(double size, bool probe = false);

    /// Removes the job with the least remaining size; call once advanced to it.
    Departure depart();

    double delivered_to_ordinary() const noexcept { return delivered_ordinary_; }
    double delivered_to_permanent() const noexcept { return delivered_permanent_; }
    double arrived_work() const noexcept { return arrived_work_; }
    double remaining_work() const;

private:
    struct Job {
        double finish;  // virtual-clock reading at which the job completes
        double arrival_time;
        double size;
        std::uint64_t id;
        bool probe;
    };

    std::size_t permanent_;
    double now_ = 0.0;
    double virtual_ = 0.0;
    std::uint64_t next_id_ = 0;
    std::vector<Job> heap_;
    double delivered_ordinary_ = 0.0;
    double delivered_permanent_ = 0.0;
    double arrived_work_ = 0.0;
};

struct SimConfig {
    ModelParams params;
    std::size_t warmup_departures = 10'000;
    std::size_t measured_departures = 1'000'000;
    std::size_t batches = 20;
    std::uint64_t seed = 42;
    std::size_t replications = 1;
    /// Highest raw moment of the probe sojourn time to estimate (>= 2).
    std::size_t moment_order = 2;
    /// Transform arguments r for E[exp(-r V)] estimates.
    std::vector<double> r_values;
    double confidence = 0.99;
};

struct Estimate {
    double value = 0.0;
    double ci_halfwidth = 0.0;
};

struct MomentEstimate {
    std::size_t order;
    Estimate estimate;
};

struct LstEstimate {
    double r;
    Estimate estimate;
};

struct SimResult {
    std::optional<double> probe_size;
    std::size_t probe_count = 0;
    std::vector<MomentEstimate> probe_moments;
    std::optional<Estimate> probe_variance;
    std::vector<LstEstimate> lst_estimates;
    /// Time-average fraction with n ordinary jobs present, n = 0, 1, ...
    std::vector<double> qlen_histogram;
    std::vector<double> qlen_ci_halfwidth;
    /// Number of ordinary jobs seen by arriving jobs.
    std::vector<double> arrival_qlen_histogram;
    Estimate mean_queue_length;
    std::size_t replication_count = 0;
    std::size_t batch_count = 0;
    std::uint64_t total_events = 0;
    /// |work delivered to ordinary jobs - (arrived - remaining)| relative to arrived work.
    double work_balance_error = 0.0;
};

/// Two-sided standard normal quantile for the given confidence level.
double normal_quantile(double confidence);

/// Simulates the queue and returns batch-means estimates. Probe statistics are
/// produced when the service law is a ProbeMixture; its atom jobs are the probes.
/// With lambda = 0 every job arrives to a system free of ordinary jobs.
SimResult run(const SimConfig& config);

/// run() with the sample mean of exp(-r V) over probe jobs for each r.
SimResult estimate_lst(SimConfig config, std::span<const double> r_values);

nlohmann::json to_json(const SimResult& result);

}  // namespace psq
