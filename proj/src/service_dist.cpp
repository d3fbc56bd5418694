#include "psq/service_dist.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "psq/error.hpp"
#include "psq/format.hpp"

namespace psq {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void invalid(const std::string& what) {
    throw Error(ErrorKind::InvalidArgument, what);
}

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        invalid(std::string(name) + " must be positive and finite, got " + format_double(v));
    }
}

void require_nonnegative_arg(double x) {
    if (!(x >= 0.0)) invalid("argument must be >= 0, got " + format_double(x));
}

double erlang_cdf(unsigned shape, double rate, double x) {
    if (x <= 0.0) return 0.0;
    const double z = rate * x;
    double term = 1.0;
    double sum = 1.0;
    for (unsigned i = 1; i < shape; ++i) {
        term *= z / i;
        sum += term;
    }
    return std::max(0.0, 1.0 - std::exp(-z) * sum);
}

struct TabulatedView {
    const Tabulated& t;

    std::size_t cells() const { return t.cdf_values.size() - 1; }

    double cdf(double x) const {
        const double pos = x / t.grid_step;
        if (pos >= static_cast<double>(cells())) return 1.0;
        const auto k = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(k);
        return t.cdf_values[k] + frac * (t.cdf_values[k + 1] - t.cdf_values[k]);
    }

    double moment(int j) const {
        const double h = t.grid_step;
        double sum = 0.0;
        for (std::size_t k = 1; k <= cells(); ++k) {
            const double mass = t.cdf_values[k] - t.cdf_values[k - 1];
            if (mass == 0.0) continue;
            const double a = (k - 1) * h;
            const double b = k * h;
            sum += mass * (std::pow(b, j + 1) - std::pow(a, j + 1)) / ((j + 1) * h);
        }
        return sum;
    }

    double lst(double s) const {
        if (s == 0.0) return 1.0;
        const double h = t.grid_step;
        // Mass uniform on [a, a+h]: E exp(-sX) = exp(-sa) * (1 - exp(-sh)) / (sh).
        const double cell_factor = -std::expm1(-s * h) / (s * h);
        double sum = 0.0;
        for (std::size_t k = 1; k <= cells(); ++k) {
            const double mass = t.cdf_values[k] - t.cdf_values[k - 1];
            if (mass == 0.0) continue;
            sum += mass * std::exp(-s * (k - 1) * h);
        }
        return sum * cell_factor;
    }

    // int_0^x (1 - B(y)) dy; exact for the piecewise-linear CDF.
    double integrated_survival(double x) const {
        const double h = t.grid_step;
        double acc = 0.0;
        for (std::size_t k = 1; k <= cells(); ++k) {
            const double a = (k - 1) * h;
            if (x <= a) return acc;
            const double b = std::min(x, k * h);
            const double fa = t.cdf_values[k - 1];
            const double fb = cdf(b);
            acc += (b - a) * (1.0 - 0.5 * (fa + fb));
        }
        return acc;
    }

    double sample(Rng& rng) const {
        const double u = uniform_open0(rng);
        const auto& v = t.cdf_values;
        const auto it = std::lower_bound(v.begin(), v.end(), u);
        if (it == v.begin()) return 0.0;
        if (it == v.end()) return cells() * t.grid_step;
        const auto k = static_cast<std::size_t>(it - v.begin());
        const double lo = v[k - 1];
        const double hi = v[k];
        const double frac = hi > lo ? (u - lo) / (hi - lo) : 1.0;
        return ((k - 1) + frac) * t.grid_step;
    }
};

double exp_draw(double rate, Rng& rng) { return -std::log(uniform_open0(rng)) / rate; }

}  // namespace

double uniform_open0(Rng& rng) {
    return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

ServiceDistribution::ServiceDistribution(Kind kind) : kind_(std::move(kind)) {
    mean_ = moment(1);
    require_positive(mean_, "mean service size");
}

ServiceDistribution ServiceDistribution::exponential(double rate) {
    require_positive(rate, "exponential rate");
    return ServiceDistribution(Exponential{rate});
}

ServiceDistribution ServiceDistribution::deterministic(double size) {
    require_positive(size, "deterministic size");
    return ServiceDistribution(Deterministic{size});
}

ServiceDistribution ServiceDistribution::erlang(unsigned shape, double rate) {
    if (shape == 0) invalid("erlang shape must be >= 1");
    require_positive(rate, "erlang rate");
    return ServiceDistribution(Erlang{shape, rate});
}

ServiceDistribution ServiceDistribution::hyperexponential(std::vector<double> weights,
                                                          std::vector<double> rates) {
    if (weights.empty() || weights.size() != rates.size()) {
        invalid("hyperexponential needs matching, non-empty weight and rate lists");
    }
    for (double w : weights) {
        if (!(w >= 0.0) || w > 1.0) invalid("hyperexponential weight out of [0,1]");
    }
    for (double r : rates) require_positive(r, "hyperexponential rate");
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-12) {
        invalid("hyperexponential weights sum to " + format_double(total) + ", expected 1");
    }
    return ServiceDistribution(HyperExponential{std::move(weights), std::move(rates)});
}

ServiceDistribution ServiceDistribution::probe_mixture(ServiceDistribution base,
                                                       double probe_size, double probe_prob) {
    require_positive(probe_size, "probe size");
    if (!(probe_prob >= 0.0 && probe_prob <= 1.0)) invalid("probe probability out of [0,1]");
    return ServiceDistribution(ProbeMixture{
        std::make_shared<const ServiceDistribution>(std::move(base)), probe_size, probe_prob});
}

ServiceDistribution ServiceDistribution::tabulated(double grid_step,
                                                   std::vector<double> cdf_values) {
    require_positive(grid_step, "table step");
    if (cdf_values.size() < 2) invalid("table needs at least two points");
    if (std::abs(cdf_values.front()) > 1e-12) invalid("table must start with B(0) = 0");
    cdf_values.front() = 0.0;
    for (std::size_t k = 1; k < cdf_values.size(); ++k) {
        if (cdf_values[k] < cdf_values[k - 1]) invalid("table CDF must be nondecreasing");
    }
    const double last = cdf_values.back();
    if (std::abs(last - 1.0) > 1e-9) {
        invalid("table CDF must end at 1, got " + format_double(last));
    }
    for (double& v : cdf_values) v /= last;
    return ServiceDistribution(Tabulated{grid_step, std::move(cdf_values)});
}

double ServiceDistribution::cdf(double x) const {
    require_nonnegative_arg(x);
    return std::visit(
        Overloaded{
            [&](const Exponential& d) { return -std::expm1(-d.rate * x); },
            [&](const Deterministic& d) { return x >= d.size ? 1.0 : 0.0; },
            [&](const Erlang& d) { return erlang_cdf(d.shape, d.rate, x); },
            [&](const HyperExponential& d) {
                double sum = 0.0;
                for (std::size_t i = 0; i < d.weights.size(); ++i) {
                    sum += d.weights[i] * -std::expm1(-d.rates[i] * x);
                }
                return sum;
            },
            [&](const ProbeMixture& d) {
                return (1.0 - d.probe_prob) * d.base->cdf(x) +
                       (x >= d.probe_size ? d.probe_prob : 0.0);
            },
            [&](const Tabulated& d) { return TabulatedView{d}.cdf(x); },
        },
        kind_);
}

double ServiceDistribution::moment(int j) const {
    if (j < 1) invalid("moment order must be >= 1");
    const double value = std::visit(
        Overloaded{
            [&](const Exponential& d) { return std::tgamma(j + 1.0) / std::pow(d.rate, j); },
            [&](const Deterministic& d) { return std::pow(d.size, j); },
            [&](const Erlang& d) {
                double v = 1.0;
                for (int i = 0; i < j; ++i) v *= (d.shape + i) / d.rate;
                return v;
            },
            [&](const HyperExponential& d) {
                double sum = 0.0;
                for (std::size_t i = 0; i < d.weights.size(); ++i) {
                    sum += d.weights[i] * std::tgamma(j + 1.0) / std::pow(d.rates[i], j);
                }
                return sum;
            },
            [&](const ProbeMixture& d) {
                return (1.0 - d.probe_prob) * d.base->moment(j) +
                       d.probe_prob * std::pow(d.probe_size, j);
            },
            [&](const Tabulated& d) { return TabulatedView{d}.moment(j); },
        },
        kind_);
    if (!std::isfinite(value)) {
        throw Error(ErrorKind::InfiniteMoment,
                    "moment of order " + std::to_string(j) + " is not finite for " + describe());
    }
    return value;
}

double ServiceDistribution::lst(double s) const {
    if (std::isnan(s)) invalid("transform argument is NaN");
    auto outside = [&] {
        invalid("transform argument " + format_double(s) + " outside the region of convergence");
    };
    const double value = std::visit(
        Overloaded{
            [&](const Exponential& d) {
                if (s <= -d.rate) outside();
                return d.rate / (d.rate + s);
            },
            [&](const Deterministic& d) { return std::exp(-s * d.size); },
            [&](const Erlang& d) {
                if (s <= -d.rate) outside();
                return std::pow(d.rate / (d.rate + s), static_cast<double>(d.shape));
            },
            [&](const HyperExponential& d) {
                double sum = 0.0;
                for (std::size_t i = 0; i < d.weights.size(); ++i) {
                    if (s <= -d.rates[i]) outside();
                    sum += d.weights[i] * d.rates[i] / (d.rates[i] + s);
                }
                return sum;
            },
            [&](const ProbeMixture& d) {
                return (1.0 - d.probe_prob) * d.base->lst(s) +
                       d.probe_prob * std::exp(-s * d.probe_size);
            },
            [&](const Tabulated& d) { return TabulatedView{d}.lst(s); },
        },
        kind_);
    if (!std::isfinite(value)) outside();
    return value;
}

double ServiceDistribution::excess_cdf(double x) const {
    require_nonnegative_arg(x);
    return std::visit(
        Overloaded{
            [&](const Exponential& d) { return -std::expm1(-d.rate * x); },
            [&](const Deterministic& d) { return std::min(x, d.size) / d.size; },
            [&](const Erlang& d) {
                double sum = 0.0;
                for (unsigned k = 1; k <= d.shape; ++k) sum += erlang_cdf(k, d.rate, x);
                return sum / d.shape;
            },
            [&](const HyperExponential& d) {
                double sum = 0.0;
                for (std::size_t i = 0; i < d.weights.size(); ++i) {
                    sum += d.weights[i] / d.rates[i] * -std::expm1(-d.rates[i] * x);
                }
                return sum / mean_;
            },
            [&](const ProbeMixture& d) {
                const double base_part =
                    (1.0 - d.probe_prob) * d.base->mean() * d.base->excess_cdf(x);
                const double atom_part = d.probe_prob * std::min(x, d.probe_size);
                return (base_part + atom_part) / mean_;
            },
            [&](const Tabulated& d) {
                return std::min(1.0, TabulatedView{d}.integrated_survival(x) / mean_);
            },
        },
        kind_);
}

Draw ServiceDistribution::draw(Rng& rng) const {
    return std::visit(
        Overloaded{
            [&](const Exponential& d) { return Draw{exp_draw(d.rate, rng), false}; },
            [&](const Deterministic& d) { return Draw{d.size, false}; },
            [&](const Erlang& d) {
                double sum = 0.0;
                for (unsigned i = 0; i < d.shape; ++i) sum += exp_draw(d.rate, rng);
                return Draw{sum, false};
            },
            [&](const HyperExponential& d) {
                const double u = uniform_open0(rng);
                double cum = 0.0;
                std::size_t branch = d.weights.size() - 1;
                for (std::size_t i = 0; i < d.weights.size(); ++i) {
                    cum += d.weights[i];
                    if (u <= cum) {
                        branch = i;
                        break;
                    }
                }
                return Draw{exp_draw(d.rates[branch], rng), false};
            },
            [&](const ProbeMixture& d) {
                if (uniform_open0(rng) <= d.probe_prob) return Draw{d.probe_size, true};
                return Draw{d.base->sample(rng), false};
            },
            [&](const Tabulated& d) { return Draw{TabulatedView{d}.sample(rng), false}; },
        },
        kind_);
}

std::vector<PointMass> ServiceDistribution::atoms() const {
    if (const auto* d = std::get_if<Deterministic>(&kind_)) return {{d->size, 1.0}};
    if (const auto* m = std::get_if<ProbeMixture>(&kind_)) {
        std::vector<PointMass> out;
        bool merged = false;
        for (PointMass a : m->base->atoms()) {
            a.mass *= 1.0 - m->probe_prob;
            if (a.at == m->probe_size) {
                a.mass += m->probe_prob;
                merged = true;
            }
            out.push_back(a);
        }
        if (!merged && m->probe_prob > 0.0) out.push_back({m->probe_size, m->probe_prob});
        std::sort(out.begin(), out.end(),
                  [](const PointMass& a, const PointMass& b) { return a.at < b.at; });
        return out;
    }
    return {};
}

std::string ServiceDistribution::describe() const {
    return std::visit(
        Overloaded{
            [](const Exponential& d) { return "exp:" + format_double(d.rate); },
            [](const Deterministic& d) { return "det:" + format_double(d.size); },
            [](const Erlang& d) {
                return "erlang:" + std::to_string(d.shape) + ":" + format_double(d.rate);
            },
            [](const HyperExponential& d) {
                std::string s = "hyperexp";
                for (std::size_t i = 0; i < d.weights.size(); ++i) {
                    s += ":" + format_double(d.weights[i]) + ":" + format_double(d.rates[i]);
                }
                return s;
            },
            [](const ProbeMixture& d) {
                return "mix:" + d.base->describe() + ":" + format_double(d.probe_size) + ":" +
                       format_double(d.probe_prob);
            },
            [](const Tabulated& d) {
                return "table:step=" + format_double(d.grid_step) +
                       ",points=" + std::to_string(d.cdf_values.size());
            },
        },
        kind_);
}

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.push_back(s.substr(start));
            return parts;
        }
        parts.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

double number(std::string_view token, std::string_view spec) {
    token = trim(token);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) {
        invalid("cannot parse number '" + std::string(token) + "' in distribution spec '" +
                std::string(spec) + "'");
    }
    return value;
}

}  // namespace

ServiceDistribution parse_distribution(std::string_view spec) {
    const auto parts = split(spec, ':');
    const std::string_view head = parts.front();
    auto expect = [&](std::size_t count) {
        if (parts.size() != count) {
            invalid("distribution spec '" + std::string(spec) + "' expects " +
                    std::to_string(count - 1) + " parameter(s)");
        }
    };
    if (head == "exp") {
        expect(2);
        return ServiceDistribution::exponential(number(parts[1], spec));
    }
    if (head == "det") {
        expect(2);
        return ServiceDistribution::deterministic(number(parts[1], spec));
    }
    if (head == "erlang") {
        expect(3);
        const double shape = number(parts[1], spec);
        if (shape < 1.0 || shape != std::floor(shape)) invalid("erlang shape must be an integer >= 1");
        return ServiceDistribution::erlang(static_cast<unsigned>(shape), number(parts[2], spec));
    }
    if (head == "hyperexp") {
        if (parts.size() < 3 || parts.size() % 2 == 0) {
            invalid("hyperexp spec needs weight:rate pairs, got '" + std::string(spec) + "'");
        }
        std::vector<double> weights;
        std::vector<double> rates;
        for (std::size_t i = 1; i + 1 < parts.size(); i += 2) {
            weights.push_back(number(parts[i], spec));
            rates.push_back(number(parts[i + 1], spec));
        }
        return ServiceDistribution::hyperexponential(std::move(weights), std::move(rates));
    }
    if (head == "mix") {
        if (parts.size() < 4) invalid("mix spec is mix:BASE_SPEC:probe_size:probe_prob");
        const std::size_t tail = spec.rfind(':');
        const std::size_t mid = spec.rfind(':', tail - 1);
        const std::string_view base = spec.substr(4, mid - 4);
        return ServiceDistribution::probe_mixture(parse_distribution(base),
                                                  number(spec.substr(mid + 1, tail - mid - 1), spec),
                                                  number(spec.substr(tail + 1), spec));
    }
    if (head == "table") {
        if (parts.size() < 2) invalid("table spec is table:PATH");
        return load_tabulated(std::string(spec.substr(6)));
    }
    invalid("unknown distribution kind '" + std::string(head) + "'");
}

ServiceDistribution load_tabulated(const std::string& path) {
    std::ifstream in(path);
    if (!in) invalid("cannot open table file '" + path + "'");
    std::vector<double> xs;
    std::vector<double> values;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        const std::string_view row = trim(line);
        if (row.empty() || row.front() == '#') continue;
        const auto cols = split(row, ',');
        if (cols.size() != 2) invalid("table row '" + std::string(row) + "' needs two columns");
        double x = 0.0;
        const auto tx = trim(cols[0]);
        const auto [ptr, ec] = std::from_chars(tx.data(), tx.data() + tx.size(), x);
        if (ec != std::errc() || ptr != tx.data() + tx.size()) {
            if (first) {
                first = false;
                continue;
            }
            invalid("bad x value in table row '" + std::string(row) + "'");
        }
        first = false;
        xs.push_back(x);
        values.push_back(number(cols[1], row));
    }
    if (xs.size() < 2) invalid("table '" + path + "' has fewer than two rows");
    const double step = xs[1] - xs[0];
    if (!(step > 0.0)) invalid("table x column must be increasing");
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const double expected = xs[0] + k * step;
        if (std::abs(xs[k] - expected) > 1e-9 * std::max(1.0, step)) {
            invalid("table x column must be uniformly spaced");
        }
    }
    const double offset = xs[0] / step;
    if (std::abs(offset - std::round(offset)) > 1e-9 || offset < -1e-9) {
        invalid("table x column must lie on a grid anchored at 0");
    }
    const auto lead = static_cast<std::size_t>(std::llround(offset));
    // Grid points before the first row carry B = 0.
    std::vector<double> cdf(lead, 0.0);
    cdf.insert(cdf.end(), values.begin(), values.end());
    return ServiceDistribution::tabulated(step, std::move(cdf));
}

}  // namespace psq
