#include "psq/ps_moments.hpp"

#include <array>
#include <cmath>
#include <cstdint>

#include "psq/error.hpp"
#include "psq/format.hpp"

namespace psq {

namespace {

using PascalRow = std::array<std::uint64_t, kMaxMomentOrder + 1>;

constexpr std::array<PascalRow, kMaxMomentOrder + 1> make_pascal() {
    std::array<PascalRow, kMaxMomentOrder + 1> rows{};
    for (std::size_t n = 0; n <= kMaxMomentOrder; ++n) {
        rows[n][0] = 1;
        for (std::size_t k = 1; k <= n; ++k) rows[n][k] = rows[n - 1][k - 1] + (k < n ? rows[n - 1][k] : 0);
    }
    return rows;
}

constexpr auto kPascal = make_pascal();

void require_order(std::size_t order) {
    if (order < 1 || order > kMaxMomentOrder) {
        throw Error(ErrorKind::InvalidArgument,
                    "moment order must be in [1, " + std::to_string(kMaxMomentOrder) + "], got " +
                        std::to_string(order));
    }
}

// v_1..v_order at one node from xi_1..xi_order.
std::vector<double> recursion_at(const KernelWorkspace& ws, std::size_t order, std::size_t node) {
    std::vector<double> xi(order + 1);
    for (std::size_t i = 1; i <= order; ++i) xi[i] = ws.xi_at(i, node);
    std::vector<double> v(order + 1);
    v[0] = 1.0;
    for (std::size_t n = 1; n <= order; ++n) {
        double sum = 0.0;
        for (std::size_t i = 1; i <= n; ++i) {
            const double term = binomial(n, i) * v[n - i] * xi[i];
            sum += (i % 2 == 1) ? term : -term;
        }
        v[n] = sum;
    }
    return v;
}

}  // namespace

double binomial(std::size_t n, std::size_t k) {
    if (n > kMaxMomentOrder || k > n) {
        throw Error(ErrorKind::InvalidArgument, "binomial coefficient out of table range");
    }
    return static_cast<double>(kPascal[n][k]);
}

double MomentTable::variance(std::size_t j) const {
    const double m1 = at(1, j);
    return at(2, j) - m1 * m1;
}

double MomentTable::third_central(std::size_t j) const {
    const double m1 = at(1, j);
    return at(3, j) - 3.0 * m1 * at(2, j) + 2.0 * m1 * m1 * m1;
}

double conditional_mean(const ModelParams& params, double u) {
    params.require_stable();
    if (!(u >= 0.0)) throw Error(ErrorKind::InvalidArgument, "u must be >= 0");
    return static_cast<double>(params.permanent_jobs() + 1) * u / (1.0 - params.rho());
}

double conditional_variance(const ModelParams& params, double u, const KernelWorkspace& ws) {
    params.require_stable();
    if (!(u >= 0.0)) throw Error(ErrorKind::InvalidArgument, "u must be >= 0");
    if (std::abs(params.rho() - ws.params().rho()) > 1e-12) {
        throw Error(ErrorKind::InvalidArgument, "workspace was built for a different load");
    }
    if (u > ws.horizon() * (1.0 + 1e-12)) {
        throw Error(ErrorKind::HorizonExceeded, "u=" + format_double(u) + " exceeds workspace horizon " +
                                                    format_double(ws.horizon()));
    }
    const GriddedDF& w = ws.waiting();
    const double h = ws.step();
    const double pos = std::min(u / h, static_cast<double>(w.last_node()));
    auto full = static_cast<std::size_t>(std::floor(pos + 1e-9));
    full = std::min(full, w.last_node());
    auto integrand = [&](double x, double wx) { return (u - x) * (1.0 - wx); };

    double integral = 0.0;
    for (std::size_t k = 1; k <= full; ++k) {
        const double a = h * static_cast<double>(k - 1);
        const double b = h * static_cast<double>(k);
        integral += 0.5 * h * (integrand(a, w[k - 1]) + integrand(b, w[k]));
    }
    const double rest = u - h * static_cast<double>(full);
    if (rest > 0.0 && full < w.last_node()) {
        const double a = h * static_cast<double>(full);
        // Integrand vanishes at x = u.
        integral += 0.5 * rest * integrand(a, w[full]);
    }
    const double one_minus = 1.0 - ws.params().rho();
    return static_cast<double>(params.permanent_jobs() + 1) * 2.0 / (one_minus * one_minus) * integral;
}

MomentTable moments_upto(KernelWorkspace& ws, std::size_t order, std::span<const double> u_values) {
    require_order(order);
    ws.params().require_stable();
    ws.prepare(order);
    // Moments of the service law the recursion implicitly relies on must be finite.
    for (std::size_t j = 1; j <= order; ++j) (void)ws.params().service().moment(static_cast<int>(j));

    MomentTable table;
    table.u_grid.assign(u_values.begin(), u_values.end());
    table.order = order;
    table.permanent_jobs = 0;
    table.values.assign(order, std::vector<double>(u_values.size()));
    const double h = ws.step();
    for (std::size_t j = 0; j < u_values.size(); ++j) {
        const double u = u_values[j];
        if (!(u >= 0.0)) throw Error(ErrorKind::InvalidArgument, "u must be >= 0");
        const double pos = u / h;
        if (pos > static_cast<double>(ws.last_node()) + 1e-9) {
            throw Error(ErrorKind::HorizonExceeded, "u=" + format_double(u) +
                                                        " is beyond the grid horizon " +
                                                        format_double(ws.horizon()));
        }
        const double nearest = std::round(pos);
        if (std::abs(pos - nearest) <= 1e-9 * std::max(1.0, nearest)) {
            const auto v = recursion_at(ws, order, static_cast<std::size_t>(nearest));
            for (std::size_t n = 1; n <= order; ++n) table.values[n - 1][j] = v[n];
            continue;
        }
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const double frac = pos - static_cast<double>(lo);
        const auto va = recursion_at(ws, order, lo);
        const auto vb = recursion_at(ws, order, lo + 1);
        for (std::size_t n = 1; n <= order; ++n) {
            table.values[n - 1][j] = va[n] + frac * (vb[n] - va[n]);
        }
    }
    return table;
}

MomentTable moments_upto(KernelWorkspace& ws, std::size_t order) {
    const std::size_t last = std::min(ws.last_node(), ws.waiting().valid_to());
    std::vector<double> grid(last + 1);
    for (std::size_t k = 0; k <= last; ++k) grid[k] = ws.step() * static_cast<double>(k);
    return moments_upto(ws, order, grid);
}

MomentTable k_moments(const MomentTable& base, std::size_t permanent_jobs) {
    if (base.permanent_jobs != 0) {
        throw Error(ErrorKind::InvalidArgument, "k_moments expects a table for K = 0");
    }
    MomentTable out = base;
    out.permanent_jobs = permanent_jobs;
    const std::size_t order = base.order;
    for (std::size_t j = 0; j < base.u_grid.size(); ++j) {
        std::vector<double> v(order + 1);
        v[0] = 1.0;
        for (std::size_t n = 1; n <= order; ++n) v[n] = base.values[n - 1][j];
        std::vector<double> m = v;
        for (std::size_t copy = 0; copy < permanent_jobs; ++copy) {
            std::vector<double> next(order + 1);
            for (std::size_t n = 0; n <= order; ++n) {
                double sum = 0.0;
                for (std::size_t i = 0; i <= n; ++i) sum += binomial(n, i) * m[n - i] * v[i];
                next[n] = sum;
            }
            m = std::move(next);
        }
        for (std::size_t n = 1; n <= order; ++n) out.values[n - 1][j] = m[n];
    }
    return out;
}

double small_u_var_asymptote(const ModelParams& params, double u) {
    params.require_stable();
    const double rho = params.rho();
    return static_cast<double>(params.permanent_jobs() + 1) * u * u * rho /
           ((1.0 - rho) * (1.0 - rho));
}

}  // namespace psq
