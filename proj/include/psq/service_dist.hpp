#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace psq {

using Rng = std::mt19937_64;

/// Uniform draw on (0, 1], built from the top 53 bits of one engine output.
double uniform_open0(Rng& rng);

class ServiceDistribution;

struct Exponential {
    double rate;
};

struct Deterministic {
    double size;
};

struct Erlang {
    unsigned shape;
    double rate;
};

struct HyperExponential {
    std::vector<double> weights;
    std::vector<double> rates;
};

/// With probability `probe_prob` a job has size exactly `probe_size`,
/// otherwise its size is drawn from `base`.
struct ProbeMixture {
    std::shared_ptr<const ServiceDistribution> base;
    double probe_size;
    double probe_prob;
};

/// CDF samples at 0, h, 2h, ... with linear interpolation in between and
/// B(x) = 1 past the last point. The law is piecewise uniform per cell.
struct Tabulated {
    double grid_step;
    std::vector<double> cdf_values;
};

/// A point mass of a service law at a positive location.
struct PointMass {
    double at;
    double mass;
};

/// A size draw that remembers whether it came from the probe atom.
struct Draw {
    double size;
    bool probe;
};

/// Job-size law B(x) with B(0) = 0 and a finite, positive mean.
///
/// Values are immutable after construction; every query is const and safe to
/// call concurrently. Sampling takes a caller-owned random stream.
class ServiceDistribution {
public:
    using Kind = std::variant<Exponential, Deterministic, Erlang, HyperExponential,
                              ProbeMixture, Tabulated>;

    static ServiceDistribution exponential(double rate);
    static ServiceDistribution deterministic(double size);
    static ServiceDistribution erlang(unsigned shape, double rate);
    static ServiceDistribution hyperexponential(std::vector<double> weights,
                                                std::vector<double> rates);
    static ServiceDistribution probe_mixture(ServiceDistribution base, double probe_size,
                                             double probe_prob);
    static ServiceDistribution tabulated(double grid_step, std::vector<double> cdf_values);

    const Kind& kind() const noexcept { return kind_; }

    /// B(x) for x >= 0.
    double cdf(double x) const;

    /// j-th raw moment; throws InfiniteMoment when the value is not finite.
    double moment(int j) const;
    double mean() const noexcept { return mean_; }

    /// Laplace-Stieltjes transform E[exp(-sB)]. Accepts any s inside the
    /// region of convergence, which always contains s >= 0.
    double lst(double s) const;

    /// Stationary excess law F(x) = (1/mean) * int_0^x (1 - B(y)) dy.
    double excess_cdf(double x) const;

    double sample(Rng& rng) const { return draw(rng).size; }
    Draw draw(Rng& rng) const;

    /// Positive point masses of B (deterministic sizes and probe atoms).
    std::vector<PointMass> atoms() const;

    /// Spec string that `parse_distribution` maps back to this law.
    std::string describe() const;

private:
    explicit ServiceDistribution(Kind kind);

    Kind kind_;
    double mean_ = 0.0;
};

/// Parses `exp:RATE`, `det:SIZE`, `erlang:SHAPE:RATE`, `hyperexp:w1:r1:w2:r2...`,
/// `mix:BASE_SPEC:probe_size:probe_prob` and `table:PATH` (two-column CSV x,B(x)).
ServiceDistribution parse_distribution(std::string_view spec);

/// Loads a uniform-step CDF table from CSV. A header line is skipped if present.
ServiceDistribution load_tabulated(const std::string& path);

}  // namespace psq
