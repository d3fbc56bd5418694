#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "psq/service_dist.hpp"

namespace psq {

/// Number of grid cells covering [0, horizon] with spacing `step`.
std::size_t cells_for(double step, double horizon);

/// Real-valued function sampled at the nodes 0, h, ..., Nh.
class GridFunction {
public:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    GridFunction(double step, std::vector<double> values, std::size_t valid_to = npos);

    double step() const noexcept { return step_; }
    std::size_t last_node() const noexcept { return values_.size() - 1; }
    double horizon() const noexcept { return step_ * static_cast<double>(last_node()); }
    std::size_t valid_to() const noexcept { return valid_to_; }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t k) const { return values_[k]; }

    /// Linear interpolation between nodes; throws HorizonExceeded past the last node.
    double at(double x) const;

private:
    double step_;
    std::vector<double> values_;
    std::size_t valid_to_;
};

struct GridAtom {
    std::size_t node;
    double mass;
};

/// Distribution function on the nodes 0, h, ..., Nh.
///
/// `values()[k]` is G(kh) including every atom at or below kh, so
/// `values()[0]` equals the atom at the origin. Point masses are kept
/// separately so that convolutions can treat them exactly; everything else is
/// the continuous part, assumed smooth between nodes.
class GriddedDF {
public:
    static constexpr std::size_t npos = GridFunction::npos;

    GriddedDF(double step, std::vector<double> values, std::vector<GridAtom> atoms,
              std::size_t valid_to = npos);

    /// The distribution of the constant 0: G(x) = 1 for x >= 0.
    static GriddedDF unit_step(double step, std::size_t last_node);

    double step() const noexcept { return step_; }
    std::size_t last_node() const noexcept { return values_.size() - 1; }
    double horizon() const noexcept { return step_ * static_cast<double>(last_node()); }
    std::size_t valid_to() const noexcept { return valid_to_; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<const GridAtom> atoms() const noexcept { return atoms_; }
    double operator[](std::size_t k) const { return values_[k]; }

    double atom0() const noexcept;

    /// G minus its point masses, at every node.
    std::vector<double> continuous_part() const;

    GridFunction as_function() const { return GridFunction(step_, values_, valid_to_); }

private:
    double step_;
    std::vector<double> values_;
    std::vector<GridAtom> atoms_;
    std::size_t valid_to_;
};

/// Samples the CDF of `d` on [0, horizon]. Every point mass of `d` must sit on a
/// node (within 1e-9 * step); otherwise AtomOffGrid is thrown.
GriddedDF from_distribution(const ServiceDistribution& d, double step, double horizon);

/// Samples a continuous distribution function (no atoms) at the nodes 0..cells.
GriddedDF sample_continuous(double step, std::size_t cells,
                            const std::function<double(double)>& cdf);

/// (f * g)(u) = int_[0,u] f(u - x) dg(x).
///
/// Atoms of g contribute f(u - a) * mass exactly. Each increment of the
/// continuous part over [x_{i-1}, x_i] is weighted by f at u - x_i + h/2;
/// for a sampled f that midpoint value is the average of the two adjacent nodes.
GridFunction stieltjes_convolve(const GridFunction& f, const GriddedDF& g);

/// Same rule with f known in closed form, evaluated exactly at the midpoints.
GridFunction stieltjes_convolve(const std::function<double(double)>& f, const GriddedDF& g);

/// Stieltjes convolution of two distribution functions. Atom-atom and
/// atom-continuous terms are exact on the lattice; the continuous-continuous
/// term uses the midpoint rule.
GriddedDF convolve(const GriddedDF& a, const GriddedDF& b);

/// n-fold convolution of g with itself; n = 0 gives the unit step at 0.
GriddedDF self_convolve(const GriddedDF& g, std::size_t n);

void write_csv(std::ostream& out, const GridFunction& f);
void write_csv(std::ostream& out, const GriddedDF& g);

namespace detail {

/// out[m] += sum_{i=1..m} fmid[m-i] * inc[i] for m = 1..N, with inc.size() == N+1
/// and fmid.size() >= N.
void accumulate_midpoint(std::span<const double> fmid, std::span<const double> inc,
                         std::span<double> out);

}  // namespace detail

}  // namespace psq
