#include "psq/ps_sim.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include "psq/error.hpp"
#include "psq/format.hpp"

namespace psq {

namespace {

// Min-heap on the virtual finishing clock; ties broken by id for determinism.
struct LaterFinish {
    template <class Job>
    bool operator()(const Job& a, const Job& b) const {
        if (a.finish != b.finish) return a.finish > b.finish;
        return a.id > b.id;
    }
};

}  // namespace

double EpsQueue::next_departure() const {
    if (heap_.empty()) return std::numeric_limits<double>::infinity();
    const double share = static_cast<double>(heap_.size() + permanent_);
    return now_ + std::max(0.0, heap_.front().finish - virtual_) * share;
}

void EpsQueue::advance(double t) {
    const double dt = t - now_;
    if (dt < 0.0) throw Error(ErrorKind::InvalidArgument, "EpsQueue cannot move backwards in time");
    const std::size_t n = heap_.size();
    const std::size_t total = n + permanent_;
    if (total > 0) {
        const double per_job = dt / static_cast<double>(total);
        virtual_ += per_job;
        delivered_ordinary_ += per_job * static_cast<double>(n);
        delivered_permanent_ += per_job * static_cast<double>(permanent_);
    }
    now_ = t;
}

std::uint64_t EpsQueue::arrive(double size, bool probe) {
    if (!(size >= 0.0)) throw Error(ErrorKind::InvalidArgument, "job size must be >= 0");
    if (heap_.empty()) virtual_ = 0.0;  // keep the virtual clock small
    const std::uint64_t id = next_id_++;
    heap_.push_back(Job{virtual_ + size, now_, size, id, probe});
    std::push_heap(heap_.begin(), heap_.end(), LaterFinish{});
    arrived_work_ += size;
    return id;
}

EpsQueue::Departure EpsQueue::depart() {
    if (heap_.empty()) throw Error(ErrorKind::InvalidArgument, "no job to depart");
    std::pop_heap(heap_.begin(), heap_.end(), LaterFinish{});
    const Job job = heap_.back();
    heap_.pop_back();
    // Absorb rounding so the remaining jobs see the exact completion reading.
    const double share = static_cast<double>(heap_.size() + 1 + permanent_);
    const double slack = job.finish - virtual_;
    delivered_ordinary_ += slack * static_cast<double>(heap_.size() + 1);
    delivered_permanent_ += slack * static_cast<double>(permanent_);
    now_ += slack * share;
    virtual_ = job.finish;
    return Departure{job.id, job.arrival_time, job.size, now_, job.probe};
}

double EpsQueue::remaining_work() const {
    double sum = 0.0;
    for (const Job& j : heap_) sum += j.finish - virtual_;
    return sum;
}

double normal_quantile(double confidence) {
    if (!(confidence > 0.0 && confidence < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "confidence must be in (0,1)");
    }
    // Solve P(|Z| <= z) = confidence, i.e. erfc(z / sqrt 2) = 1 - confidence.
    const double target = 1.0 - confidence;
    double lo = 0.0;
    double hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (std::erfc(mid / std::sqrt(2.0)) > target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

namespace {

struct BatchRecord {
    std::size_t probes = 0;
    std::vector<double> power_sums;  // sum of V^n, n = 1..order
    std::vector<double> lst_sums;    // sum of exp(-r V) per r
    std::vector<double> occupancy;   // time with n ordinary jobs
    double duration = 0.0;
};

struct ReplicationOutput {
    std::vector<BatchRecord> batches;
    std::vector<double> occupancy;  // whole measured period
    std::vector<double> arrival_counts;
    double duration = 0.0;
    std::uint64_t events = 0;
    double work_balance_error = 0.0;
};

void add_time(std::vector<double>& hist, std::size_t n, double dt) {
    if (hist.size() <= n) hist.resize(n + 1, 0.0);
    hist[n] += dt;
}

ReplicationOutput simulate_one(const SimConfig& config, std::uint64_t stream) {
    const ModelParams& params = config.params;
    const ServiceDistribution& law = params.service();
    const double lambda = params.lambda();
    const bool isolated = lambda == 0.0;

    std::seed_seq seq{static_cast<std::uint32_t>(config.seed & 0xffffffffu),
                      static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    Rng rng(seq);

    const std::size_t order = config.moment_order;
    const std::size_t batch_count = config.batches;
    const std::size_t per_batch = config.measured_departures / batch_count;

    ReplicationOutput out;
    out.batches.resize(batch_count);
    for (BatchRecord& b : out.batches) {
        b.power_sums.assign(order, 0.0);
        b.lst_sums.assign(config.r_values.size(), 0.0);
    }

    EpsQueue queue(params.permanent_jobs());
    const std::size_t total = config.warmup_departures + config.measured_departures;
    std::size_t departures = 0;
    bool measuring = config.warmup_departures == 0;
    double next_arrival = isolated ? 0.0 : -std::log(uniform_open0(rng)) / lambda;

    auto current_batch = [&] {
        const std::size_t measured = departures - config.warmup_departures;
        return std::min(measured / per_batch, batch_count - 1);
    };
    auto account = [&](double until) {
        if (!measuring || isolated) return;
        const double dt = until - queue.now();
        if (dt <= 0.0) return;
        BatchRecord& b = out.batches[current_batch()];
        add_time(b.occupancy, queue.jobs(), dt);
        b.duration += dt;
    };

    while (departures < total) {
        if (isolated && queue.jobs() == 0) next_arrival = queue.now();
        const double dep_time = queue.next_departure();
        if (next_arrival < dep_time) {
            account(next_arrival);
            queue.advance(next_arrival);
            if (measuring && !isolated) add_time(out.arrival_counts, queue.jobs(), 1.0);
            const Draw draw = law.draw(rng);
            queue.arrive(draw.size, draw.probe);
            if (!isolated) next_arrival += -std::log(uniform_open0(rng)) / lambda;
            else next_arrival = std::numeric_limits<double>::infinity();
            ++out.events;
            continue;
        }
        account(dep_time);
        queue.advance(dep_time);
        const EpsQueue::Departure dep = queue.depart();
        ++out.events;
        if (measuring && dep.probe) {
            BatchRecord& b = out.batches[current_batch()];
            const double sojourn = dep.time - dep.arrival_time;
            ++b.probes;
            double power = 1.0;
            for (std::size_t n = 0; n < order; ++n) {
                power *= sojourn;
                b.power_sums[n] += power;
            }
            for (std::size_t i = 0; i < config.r_values.size(); ++i) {
                b.lst_sums[i] += std::exp(-config.r_values[i] * sojourn);
            }
        }
        ++departures;
        if (departures == config.warmup_departures) measuring = true;
    }

    for (const BatchRecord& b : out.batches) {
        if (out.occupancy.size() < b.occupancy.size()) out.occupancy.resize(b.occupancy.size(), 0.0);
        for (std::size_t n = 0; n < b.occupancy.size(); ++n) out.occupancy[n] += b.occupancy[n];
        out.duration += b.duration;
    }
    const double arrived = queue.arrived_work();
    const double balance = queue.delivered_to_ordinary() - (arrived - queue.remaining_work());
    out.work_balance_error = arrived > 0.0 ? std::abs(balance) / arrived : 0.0;
    return out;
}

Estimate batch_estimate(const std::vector<double>& values, double z) {
    const auto count = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / count;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = values.size() > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
    return {mean, z * sd / std::sqrt(count)};
}

void validate(const SimConfig& config) {
    config.params.require_stable();
    auto bad = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); };
    if (config.batches < 2) bad("need at least 2 batches");
    if (config.measured_departures < config.batches) bad("measured departures must be >= batches");
    if (config.replications < 1) bad("need at least one replication");
    if (config.moment_order < 2) bad("moment order must be >= 2");
    for (double r : config.r_values) {
        if (!(r >= 0.0) || !std::isfinite(r)) bad("transform arguments must be >= 0");
    }
}

}  // namespace

SimResult run(const SimConfig& config) {
    validate(config);
    const double z = normal_quantile(config.confidence);

    std::vector<std::future<ReplicationOutput>> jobs;
    for (std::size_t rep = 0; rep < config.replications; ++rep) {
        jobs.push_back(std::async(config.replications > 1 ? std::launch::async : std::launch::deferred,
                                  simulate_one, std::cref(config), static_cast<std::uint64_t>(rep)));
    }
    std::vector<ReplicationOutput> reps;
    for (auto& job : jobs) reps.push_back(job.get());

    SimResult result;
    result.replication_count = reps.size();
    const bool isolated = config.params.lambda() == 0.0;
    if (const auto* mix = std::get_if<ProbeMixture>(&config.params.service().kind())) {
        result.probe_size = mix->probe_size;
    }

    std::vector<const BatchRecord*> batches;
    std::vector<double> occupancy;
    std::vector<double> arrivals;
    double duration = 0.0;
    for (const ReplicationOutput& rep : reps) {
        for (const BatchRecord& b : rep.batches) batches.push_back(&b);
        if (occupancy.size() < rep.occupancy.size()) occupancy.resize(rep.occupancy.size(), 0.0);
        for (std::size_t n = 0; n < rep.occupancy.size(); ++n) occupancy[n] += rep.occupancy[n];
        if (arrivals.size() < rep.arrival_counts.size()) arrivals.resize(rep.arrival_counts.size(), 0.0);
        for (std::size_t n = 0; n < rep.arrival_counts.size(); ++n) arrivals[n] += rep.arrival_counts[n];
        duration += rep.duration;
        result.total_events += rep.events;
        result.work_balance_error = std::max(result.work_balance_error, rep.work_balance_error);
    }
    result.batch_count = batches.size();

    // Queue-length occupancy.
    if (isolated) {
        result.qlen_histogram = {1.0};
        result.qlen_ci_halfwidth = {0.0};
        result.mean_queue_length = {0.0, 0.0};
    } else {
        result.qlen_histogram.resize(occupancy.size());
        for (std::size_t n = 0; n < occupancy.size(); ++n) result.qlen_histogram[n] = occupancy[n] / duration;
        result.qlen_ci_halfwidth.resize(occupancy.size());
        std::vector<double> per_batch(batches.size());
        for (std::size_t n = 0; n < occupancy.size(); ++n) {
            for (std::size_t b = 0; b < batches.size(); ++b) {
                const auto& occ = batches[b]->occupancy;
                per_batch[b] = n < occ.size() ? occ[n] / batches[b]->duration : 0.0;
            }
            result.qlen_ci_halfwidth[n] = batch_estimate(per_batch, z).ci_halfwidth;
        }
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const auto& occ = batches[b]->occupancy;
            double weighted = 0.0;
            for (std::size_t n = 0; n < occ.size(); ++n) weighted += static_cast<double>(n) * occ[n];
            per_batch[b] = weighted / batches[b]->duration;
        }
        result.mean_queue_length = batch_estimate(per_batch, z);
        const double arrivals_total = std::accumulate(arrivals.begin(), arrivals.end(), 0.0);
        result.arrival_qlen_histogram.resize(arrivals.size());
        for (std::size_t n = 0; n < arrivals.size(); ++n) {
            result.arrival_qlen_histogram[n] = arrivals[n] / arrivals_total;
        }
    }

    // Probe sojourn statistics.
    for (const BatchRecord* b : batches) result.probe_count += b->probes;
    if (result.probe_size) {
        std::vector<const BatchRecord*> usable;
        for (const BatchRecord* b : batches) {
            if (b->probes >= 2) usable.push_back(b);
        }
        if (usable.size() < 2) {
            throw Error(ErrorKind::InvalidConfig,
                        "too few probe jobs per batch; increase departures or the probe probability");
        }
        std::vector<double> values(usable.size());
        for (std::size_t n = 1; n <= config.moment_order; ++n) {
            for (std::size_t b = 0; b < usable.size(); ++b) {
                values[b] = usable[b]->power_sums[n - 1] / static_cast<double>(usable[b]->probes);
            }
            result.probe_moments.push_back({n, batch_estimate(values, z)});
        }
        for (std::size_t b = 0; b < usable.size(); ++b) {
            const double c = static_cast<double>(usable[b]->probes);
            const double s1 = usable[b]->power_sums[0];
            const double s2 = usable[b]->power_sums[1];
            values[b] = (s2 - s1 * s1 / c) / (c - 1.0);
        }
        result.probe_variance = batch_estimate(values, z);
        for (std::size_t i = 0; i < config.r_values.size(); ++i) {
            for (std::size_t b = 0; b < usable.size(); ++b) {
                values[b] = usable[b]->lst_sums[i] / static_cast<double>(usable[b]->probes);
            }
            result.lst_estimates.push_back({config.r_values[i], batch_estimate(values, z)});
        }
    }
    return result;
}

SimResult estimate_lst(SimConfig config, std::span<const double> r_values) {
    config.r_values.assign(r_values.begin(), r_values.end());
    return run(config);
}

nlohmann::json to_json(const SimResult& result) {
    using nlohmann::json;
    auto estimate = [](const Estimate& e) {
        return json{{"value", e.value}, {"ci_halfwidth", e.ci_halfwidth}};
    };
    json moments = json::array();
    for (const MomentEstimate& m : result.probe_moments) {
        json row = estimate(m.estimate);
        row["n"] = m.order;
        moments.push_back(row);
    }
    json lst = json::array();
    for (const LstEstimate& l : result.lst_estimates) {
        json row = estimate(l.estimate);
        row["r"] = l.r;
        lst.push_back(row);
    }
    json out{
        {"probe_size", result.probe_size ? json(*result.probe_size) : json(nullptr)},
        {"probe_count", result.probe_count},
        {"probe_moments", moments},
        {"probe_variance", result.probe_variance ? estimate(*result.probe_variance) : json(nullptr)},
        {"lst_estimates", lst},
        {"qlen_histogram", result.qlen_histogram},
        {"qlen_ci_halfwidth", result.qlen_ci_halfwidth},
        {"arrival_qlen_histogram", result.arrival_qlen_histogram},
        {"mean_queue_length", estimate(result.mean_queue_length)},
        {"replication_count", result.replication_count},
        {"batch_count", result.batch_count},
        {"total_events", result.total_events},
        {"work_balance_error", result.work_balance_error},
    };
    return out;
}

}  // namespace psq
