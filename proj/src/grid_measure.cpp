#include "psq/grid_measure.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "psq/error.hpp"
#include "psq/format.hpp"

namespace psq {

namespace {

void require_step(double step) {
    if (!(step > 0.0) || !std::isfinite(step)) {
        throw Error(ErrorKind::InvalidArgument, "grid step must be positive, got " + format_double(step));
    }
}

void require_same_step(double a, double b) {
    if (std::abs(a - b) > 1e-12 * std::max(a, b)) {
        throw Error(ErrorKind::StepMismatch,
                    "grid steps differ: " + format_double(a) + " vs " + format_double(b));
    }
}

std::vector<double> increments(const std::vector<double>& c) {
    std::vector<double> inc(c.size(), 0.0);
    for (std::size_t i = 1; i < c.size(); ++i) inc[i] = c[i] - c[i - 1];
    return inc;
}

}  // namespace

namespace detail {

void accumulate_midpoint(std::span<const double> fmid, std::span<const double> inc,
                         std::span<double> out) {
    const std::size_t n = inc.size() - 1;
    // rev[k] = inc[n - k], so inc[m - j] = rev[n - m + j] walks forward with j.
    std::vector<double> rev(inc.rbegin(), inc.rend());
    for (std::size_t m = 1; m <= n; ++m) {
        const double* a = fmid.data();
        const double* b = rev.data() + (n - m);
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        std::size_t j = 0;
        for (; j + 4 <= m; j += 4) {
            s0 += a[j] * b[j];
            s1 += a[j + 1] * b[j + 1];
            s2 += a[j + 2] * b[j + 2];
            s3 += a[j + 3] * b[j + 3];
        }
        for (; j < m; ++j) s0 += a[j] * b[j];
        out[m] += (s0 + s1) + (s2 + s3);
    }
}

}  // namespace detail

std::size_t cells_for(double step, double horizon) {
    require_step(step);
    if (!(horizon >= step * (1.0 - 1e-9))) {
        throw Error(ErrorKind::InvalidArgument, "grid horizon " + format_double(horizon) +
                                                    " must be at least one step " +
                                                    format_double(step));
    }
    return static_cast<std::size_t>(std::floor(horizon / step + 1e-9));
}

GridFunction::GridFunction(double step, std::vector<double> values, std::size_t valid_to)
    : step_(step), values_(std::move(values)), valid_to_(std::min(valid_to, values_.size() - 1)) {
    require_step(step);
    if (values_.empty()) throw Error(ErrorKind::InvalidArgument, "grid function needs a node");
}

double GridFunction::at(double x) const {
    const double pos = x / step_;
    const double last = static_cast<double>(last_node());
    if (!(pos >= -1e-9) || pos > static_cast<double>(valid_to_) + 1e-9) {
        throw Error(ErrorKind::HorizonExceeded,
                    "x=" + format_double(x) + " outside the valid grid [0, " +
                        format_double(step_ * static_cast<double>(valid_to_)) + "]");
    }
    const double clamped = std::clamp(pos, 0.0, last);
    const auto k = std::min(static_cast<std::size_t>(clamped), last_node());
    if (k == last_node()) return values_[k];
    const double frac = clamped - static_cast<double>(k);
    return values_[k] + frac * (values_[k + 1] - values_[k]);
}

GriddedDF::GriddedDF(double step, std::vector<double> values, std::vector<GridAtom> atoms,
                     std::size_t valid_to)
    : step_(step),
      values_(std::move(values)),
      atoms_(std::move(atoms)),
      valid_to_(std::min(valid_to, values_.size() - 1)) {
    require_step(step);
    if (values_.empty()) throw Error(ErrorKind::InvalidArgument, "distribution needs a node");
    std::sort(atoms_.begin(), atoms_.end(),
              [](const GridAtom& a, const GridAtom& b) { return a.node < b.node; });
    for (const GridAtom& a : atoms_) {
        if (a.node > last_node() || !(a.mass >= 0.0) || a.mass > 1.0 + 1e-9) {
            throw Error(ErrorKind::InvalidArgument, "atom outside grid or with invalid mass");
        }
    }
    const double a0 = atom0();
    if (values_[0] < a0 - 1e-9) {
        throw Error(ErrorKind::InvalidArgument, "G(0) is below the atom at the origin");
    }
    for (std::size_t k = 1; k < values_.size(); ++k) {
        if (values_[k] < values_[k - 1] - 1e-9) {
            throw Error(ErrorKind::InvalidArgument,
                        "distribution values decrease at node " + std::to_string(k));
        }
    }
    if (values_.back() > 1.0 + 1e-9) {
        throw Error(ErrorKind::InvalidArgument,
                    "distribution exceeds 1: " + format_double(values_.back()));
    }
}

GriddedDF GriddedDF::unit_step(double step, std::size_t last_node) {
    return GriddedDF(step, std::vector<double>(last_node + 1, 1.0), {{0, 1.0}});
}

double GriddedDF::atom0() const noexcept {
    return (!atoms_.empty() && atoms_.front().node == 0) ? atoms_.front().mass : 0.0;
}

std::vector<double> GriddedDF::continuous_part() const {
    std::vector<double> c(values_);
    double jumps = 0.0;
    std::size_t next = 0;
    for (std::size_t k = 0; k < c.size(); ++k) {
        while (next < atoms_.size() && atoms_[next].node == k) jumps += atoms_[next++].mass;
        c[k] -= jumps;
    }
    return c;
}

GriddedDF from_distribution(const ServiceDistribution& d, double step, double horizon) {
    const std::size_t cells = cells_for(step, horizon);
    std::vector<GridAtom> atoms;
    std::vector<double> snap_to;
    for (const PointMass& pm : d.atoms()) {
        const double pos = pm.at / step;
        const double node = std::round(pos);
        if (std::abs(pos - node) > 1e-9) {
            throw Error(ErrorKind::AtomOffGrid,
                        "point mass at " + format_double(pm.at) + " is not a multiple of the grid step " +
                            format_double(step) + "; pick a step that divides it");
        }
        const auto k = static_cast<std::size_t>(node);
        if (k <= cells) {
            atoms.push_back({k, pm.mass});
            snap_to.push_back(pm.at);
        }
    }
    std::vector<double> values(cells + 1);
    for (std::size_t k = 0; k <= cells; ++k) {
        double x = step * static_cast<double>(k);
        for (double at : snap_to) {
            if (std::abs(x - at) <= 1e-9 * step) x = std::max(x, at);
        }
        values[k] = d.cdf(x);
    }
    return GriddedDF(step, std::move(values), std::move(atoms));
}

GriddedDF sample_continuous(double step, std::size_t cells,
                            const std::function<double(double)>& cdf) {
    std::vector<double> values(cells + 1);
    for (std::size_t k = 0; k <= cells; ++k) values[k] = cdf(step * static_cast<double>(k));
    return GriddedDF(step, std::move(values), {});
}

namespace {

GridFunction convolve_impl(std::span<const double> f_nodes, std::span<const double> f_mid,
                           double step, std::size_t valid_to, const GriddedDF& g) {
    const std::size_t n = std::min(f_nodes.size() - 1, g.last_node());
    std::vector<double> out(n + 1, 0.0);
    for (const GridAtom& a : g.atoms()) {
        for (std::size_t m = a.node; m <= n; ++m) out[m] += f_nodes[m - a.node] * a.mass;
    }
    std::vector<double> c = g.continuous_part();
    c.resize(n + 1);
    detail::accumulate_midpoint(f_mid, increments(c), out);
    return GridFunction(step, std::move(out), std::min(valid_to, g.valid_to()));
}

}  // namespace

GridFunction stieltjes_convolve(const GridFunction& f, const GriddedDF& g) {
    require_same_step(f.step(), g.step());
    const auto v = f.values();
    std::vector<double> mid(v.size() - 1);
    for (std::size_t k = 0; k + 1 < v.size(); ++k) mid[k] = 0.5 * (v[k] + v[k + 1]);
    return convolve_impl(v, mid, f.step(), f.valid_to(), g);
}

GridFunction stieltjes_convolve(const std::function<double(double)>& f, const GriddedDF& g) {
    const std::size_t n = g.last_node();
    const double h = g.step();
    std::vector<double> nodes(n + 1);
    std::vector<double> mid(n);
    for (std::size_t k = 0; k <= n; ++k) nodes[k] = f(h * static_cast<double>(k));
    for (std::size_t k = 0; k < n; ++k) mid[k] = f(h * (static_cast<double>(k) + 0.5));
    return convolve_impl(nodes, mid, h, g.valid_to(), g);
}

GriddedDF convolve(const GriddedDF& a, const GriddedDF& b) {
    require_same_step(a.step(), b.step());
    const std::size_t n = std::min(a.last_node(), b.last_node());
    std::vector<double> out(n + 1, 0.0);
    const std::vector<double> ca = a.continuous_part();
    std::vector<double> cb = b.continuous_part();
    cb.resize(n + 1);

    // Atoms of b against all of a.
    for (const GridAtom& atom : b.atoms()) {
        for (std::size_t m = atom.node; m <= n; ++m) out[m] += a[m - atom.node] * atom.mass;
    }
    // Atoms of a against the continuous part of b.
    for (const GridAtom& atom : a.atoms()) {
        for (std::size_t m = atom.node; m <= n; ++m) out[m] += atom.mass * cb[m - atom.node];
    }
    std::vector<double> mid(n);
    for (std::size_t k = 0; k < n; ++k) mid[k] = 0.5 * (ca[k] + ca[k + 1]);
    detail::accumulate_midpoint(mid, increments(cb), out);

    std::map<std::size_t, double> merged;
    for (const GridAtom& x : a.atoms()) {
        for (const GridAtom& y : b.atoms()) {
            if (x.node + y.node <= n) merged[x.node + y.node] += x.mass * y.mass;
        }
    }
    std::vector<GridAtom> atoms;
    for (const auto& [node, mass] : merged) atoms.push_back({node, mass});
    return GriddedDF(a.step(), std::move(out), std::move(atoms),
                     std::min(a.valid_to(), b.valid_to()));
}

GriddedDF self_convolve(const GriddedDF& g, std::size_t n) {
    if (n == 0) return GriddedDF::unit_step(g.step(), g.last_node());
    GriddedDF result = g;
    for (std::size_t i = 1; i < n; ++i) result = convolve(result, g);
    return result;
}

void write_csv(std::ostream& out, const GridFunction& f) {
    out << "x,value\n";
    for (std::size_t k = 0; k <= f.last_node(); ++k) {
        out << format_double(f.step() * static_cast<double>(k)) << ',' << format_double(f[k]) << '\n';
    }
}

void write_csv(std::ostream& out, const GriddedDF& g) { write_csv(out, g.as_function()); }

}  // namespace psq
