#include "psq/ps_kernel.hpp"

#include <cmath>
#include <limits>

#include "psq/error.hpp"
#include "psq/format.hpp"

namespace psq {

namespace {

GriddedDF excess_on_grid(const ModelParams& params, double step, double horizon) {
    const std::size_t cells = cells_for(step, horizon);
    const ServiceDistribution& b = params.service();
    return sample_continuous(step, cells, [&](double x) { return b.excess_cdf(x); });
}

// Renewal march of W = (1-rho) + rho * int_[0,x] W(x-y) dF(y), midpoint rule.
std::vector<double> march_waiting(const GriddedDF& excess, double rho) {
    const std::size_t n = excess.last_node();
    const auto f = excess.values();
    std::vector<double> inc(n + 1, 0.0);
    for (std::size_t i = 1; i <= n; ++i) inc[i] = f[i] - f[i - 1];
    std::vector<double> rev(inc.rbegin(), inc.rend());

    std::vector<double> w(n + 1, 0.0);
    std::vector<double> mid(n, 0.0);
    w[0] = 1.0 - rho;
    const double diag = 1.0 - 0.5 * rho * (n >= 1 ? inc[1] : 0.0);
    for (std::size_t m = 1; m <= n; ++m) {
        // sum over i = 2..m of mid[m-i] * inc[i], i.e. j = m-i in [0, m-2].
        const double* a = mid.data();
        const double* b = rev.data() + (n - m);
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        std::size_t j = 0;
        const std::size_t len = m - 1;
        for (; j + 4 <= len; j += 4) {
            s0 += a[j] * b[j];
            s1 += a[j + 1] * b[j + 1];
            s2 += a[j + 2] * b[j + 2];
            s3 += a[j + 3] * b[j + 3];
        }
        for (; j < len; ++j) s0 += a[j] * b[j];
        const double known = (s0 + s1) + (s2 + s3) + 0.5 * w[m - 1] * inc[1];
        w[m] = ((1.0 - rho) + rho * known) / diag;
        mid[m - 1] = 0.5 * (w[m - 1] + w[m]);
    }
    return w;
}

std::vector<double> increments_of(const GriddedDF& g) {
    const std::vector<double> c = g.continuous_part();
    std::vector<double> inc(c.size(), 0.0);
    for (std::size_t i = 1; i < c.size(); ++i) inc[i] = c[i] - c[i - 1];
    return inc;
}

double int_pow(double x, std::size_t n) {
    double result = 1.0;
    for (std::size_t i = 0; i < n; ++i) result *= x;
    return result;
}

}  // namespace

std::size_t geometric_truncation_terms(double rho, double eps) {
    if (!(rho < 1.0)) {
        throw Error(ErrorKind::UnstableLoad, "unstable: rho=" + format_double(rho) + " >= 1");
    }
    if (rho <= 0.0) return 0;
    // rho^(M+1) < eps (1 - rho)
    const double m = std::log(eps * (1.0 - rho)) / std::log(rho) - 1.0;
    auto terms = static_cast<std::size_t>(std::max(0.0, std::ceil(m)));
    while (std::pow(rho, static_cast<double>(terms + 1)) / (1.0 - rho) >= eps) ++terms;
    return terms;
}

GriddedDF waiting_cdf(const ModelParams& params, double step, double horizon, double eps) {
    params.require_stable();
    if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "truncation tolerance must be > 0");
    const GriddedDF excess = excess_on_grid(params, step, horizon);
    const double rho = params.rho();
    return GriddedDF(step, march_waiting(excess, rho), {{0, 1.0 - rho}});
}

GriddedDF waiting_cdf_partial(const ModelParams& params, double step, double horizon,
                              std::size_t terms) {
    params.require_stable();
    const GriddedDF excess = excess_on_grid(params, step, horizon);
    const double rho = params.rho();
    GridFunction power(step, std::vector<double>(excess.last_node() + 1, 1.0));
    std::vector<double> sum(excess.last_node() + 1, 1.0 - rho);
    double weight = 1.0 - rho;
    for (std::size_t k = 1; k <= terms; ++k) {
        power = stieltjes_convolve(power, excess);
        weight *= rho;
        for (std::size_t m = 0; m < sum.size(); ++m) sum[m] += weight * power[m];
    }
    return GriddedDF(step, std::move(sum), {{0, 1.0 - rho}});
}

KernelWorkspace::KernelWorkspace(ModelParams params, double step, double horizon,
                                 double truncation_tol)
    : params_(std::move(params)),
      step_(step),
      tol_(truncation_tol),
      truncation_terms_(0),
      excess_(excess_on_grid(params_, step, horizon)) {
    if (!(tol_ > 0.0)) throw Error(ErrorKind::InvalidArgument, "truncation tolerance must be > 0");
    if (params_.stable()) {
        truncation_terms_ = geometric_truncation_terms(params_.rho(), tol_);
        nfold_.push_back(GriddedDF::unit_step(step_, last_node()));
        nfold_.push_back(
            GriddedDF(step_, march_waiting(excess_, params_.rho()), {{0, 1.0 - params_.rho()}}));
        nfold_increments_.push_back(increments_of(nfold_[0]));
        nfold_increments_.push_back(increments_of(nfold_[1]));
    }
}

const GriddedDF& KernelWorkspace::waiting() const {
    params_.require_stable();
    return nfold_[1];
}

std::size_t KernelWorkspace::node_of(double u) const {
    const double pos = u / step_;
    if (!(pos >= -1e-9)) {
        throw Error(ErrorKind::InvalidArgument, "u must be >= 0, got " + format_double(u));
    }
    if (pos > static_cast<double>(last_node()) + 1e-9) {
        throw Error(ErrorKind::HorizonExceeded, "u=" + format_double(u) +
                                                    " is beyond the grid horizon " +
                                                    format_double(horizon()));
    }
    const double node = std::round(pos);
    if (std::abs(pos - node) > 1e-9 * std::max(1.0, node)) {
        throw Error(ErrorKind::InvalidArgument,
                    "u=" + format_double(u) + " is not a grid node (step " + format_double(step_) + ")");
    }
    return static_cast<std::size_t>(node);
}

void KernelWorkspace::prepare(std::size_t max_order) {
    params_.require_stable();
    // xi_n needs W^{(n-1)*}, so the cache must hold indices 0..max_order-1.
    while (nfold_.size() < max_order) {
        nfold_.push_back(convolve(nfold_.back(), nfold_[1]));
        nfold_increments_.push_back(increments_of(nfold_.back()));
    }
}

const GriddedDF& KernelWorkspace::nfold(std::size_t n) const {
    params_.require_stable();
    if (n >= nfold_.size()) {
        throw Error(ErrorKind::InvalidArgument, "W^{" + std::to_string(n) +
                                                    "*} not prepared; call prepare(" +
                                                    std::to_string(n + 1) + ") first");
    }
    return nfold_[n];
}

double KernelWorkspace::xi_at(std::size_t n, std::size_t node) const {
    if (n == 0) return 1.0;
    const GriddedDF& g = nfold(n - 1);
    const std::vector<double>& inc = nfold_increments_[n - 1];
    const double h = step_;
    double sum = 0.0;
    for (const GridAtom& a : g.atoms()) {
        if (a.node > node) break;
        sum += int_pow(h * static_cast<double>(node - a.node), n) * a.mass;
    }
    for (std::size_t i = 1; i <= node; ++i) {
        if (inc[i] == 0.0) continue;
        sum += int_pow(h * (static_cast<double>(node - i) + 0.5), n) * inc[i];
    }
    return sum / int_pow(1.0 - params_.rho(), n);
}

const GridFunction& KernelWorkspace::xi_grid(std::size_t n) {
    if (n == 0) throw Error(ErrorKind::InvalidArgument, "xi_n needs n >= 1");
    if (auto it = xi_cache_.find(n); it != xi_cache_.end()) return it->second;
    prepare(n);
    const double scale = 1.0 / int_pow(1.0 - params_.rho(), n);
    GridFunction raw =
        stieltjes_convolve([n](double y) { return int_pow(y, n); }, nfold(n - 1));
    std::vector<double> values(raw.values().begin(), raw.values().end());
    for (double& v : values) v *= scale;
    return xi_cache_.emplace(n, GridFunction(step_, std::move(values), raw.valid_to()))
        .first->second;
}

const std::vector<double>& KernelWorkspace::excess_power(std::size_t k) {
    if (excess_powers_.empty()) excess_powers_.emplace_back(last_node() + 1, 1.0);
    while (excess_powers_.size() <= k) {
        GridFunction prev(step_, excess_powers_.back());
        GridFunction next = stieltjes_convolve(prev, excess_);
        excess_powers_.emplace_back(next.values().begin(), next.values().end());
    }
    return excess_powers_[k];
}

GriddedDF w_nfold(KernelWorkspace& ws, std::size_t n) {
    ws.params().require_stable();
    const std::size_t nodes = ws.last_node() + 1;
    if (n == 0) return GriddedDF::unit_step(ws.step(), ws.last_node());
    const double rho = ws.params().rho();
    std::vector<double> sum(nodes, 0.0);
    double weight = std::pow(1.0 - rho, static_cast<double>(n));
    const double atom = weight;
    double covered = 0.0;
    constexpr std::size_t kMaxTerms = 100000;
    for (std::size_t k = 0;; ++k) {
        if (k > kMaxTerms) {
            throw Error(ErrorKind::NotConverged, "negative-binomial series did not reach tolerance");
        }
        const std::vector<double>& power = ws.excess_power(k);
        for (std::size_t m = 0; m < nodes; ++m) sum[m] += weight * power[m];
        covered += weight;
        if (1.0 - covered < ws.truncation_tol()) break;
        weight *= rho * static_cast<double>(k + n) / static_cast<double>(k + 1);
    }
    return GriddedDF(ws.step(), std::move(sum), {{0, atom}});
}

GridFunction xi(KernelWorkspace& ws, std::size_t n) { return ws.xi_grid(n); }

LstEvaluation sojourn_lst(KernelWorkspace& ws, double r, double u, std::size_t max_terms) {
    ws.params().require_stable();
    if (!(r >= 0.0) || !std::isfinite(r)) {
        throw Error(ErrorKind::InvalidArgument, "r must be >= 0, got " + format_double(r));
    }
    if (max_terms < 1) throw Error(ErrorKind::InvalidArgument, "need at least one series term");
    const std::size_t node = ws.node_of(u);
    if (r == 0.0) return {1.0, 0, 0.0};

    const double z = r * u / (1.0 - ws.params().rho());
    double sum = 1.0;
    double coef = 1.0;    // r^n / n!
    double domin = 1.0;   // z^n / n!
    double tail = std::numeric_limits<double>::infinity();
    std::size_t n = 0;
    while (n < max_terms) {
        ++n;
        ws.prepare(n);
        coef *= r / static_cast<double>(n);
        domin *= z / static_cast<double>(n);
        sum += coef * ws.xi_at(n, node);
        // sum_{k>n} z^k/k! <= z^{n+1}/(n+1)! / (1 - z/(n+2)) once n+2 > z.
        const double next = domin * z / static_cast<double>(n + 1);
        const double ratio = z / static_cast<double>(n + 2);
        tail = ratio < 1.0 ? next / (1.0 - ratio) : std::numeric_limits<double>::infinity();
        if (tail <= 1e-12 * sum) break;
    }
    if (!(tail <= 1e-9 * sum)) {
        throw Error(ErrorKind::NotConverged,
                    "sojourn LST series not certified after " + std::to_string(n) +
                        " terms (tail bound " + format_double(tail) + ")");
    }
    return {1.0 / sum, n, tail};
}

WcircValue wcirc(KernelWorkspace& ws, double x, std::size_t max_terms) {
    const std::size_t node = ws.node_of(x);
    const double rho = ws.params().rho();
    if (rho < 1.0) {
        return {ws.waiting()[node] / (1.0 - rho), false, ws.truncation_terms()};
    }
    double sum = 0.0;
    double weight = 1.0;
    for (std::size_t k = 0; k <= max_terms; ++k) {
        sum += weight * ws.excess_power(k)[node];
        weight *= rho;
    }
    return {sum, true, max_terms};
}

}  // namespace psq
