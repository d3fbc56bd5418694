#include "psq/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "psq/error.hpp"
#include "psq/format.hpp"
#include "psq/grid_measure.hpp"
#include "psq/mg1_core.hpp"
#include "psq/ps_kernel.hpp"
#include "psq/ps_moments.hpp"
#include "psq/ps_sim.hpp"

namespace psq::cli {

namespace {

using nlohmann::json;

[[noreturn]] void usage(const std::string& what) { throw Error(ErrorKind::Usage, what); }

struct RawArgs {
    double lambda = 0.0;
    std::string dist;
    long long k = 0;
    std::optional<double> step;
    std::optional<double> horizon;
    double eps = 1e-10;
    long long order = 2;
    long long terms = 200;
    std::vector<double> u;
    std::vector<double> r;
    std::vector<double> x;
    long long max_n = 10;
    long long warmup = 10'000;
    long long departures = 1'000'000;
    long long batches = 20;
    std::uint64_t seed = 42;
    long long replications = 1;
    double tol = 1e-12;
    long long max_iters = 1'000'000;
    std::string format = "json";
    std::string output;
};

bool uses_grid(Command c) {
    return c == Command::Moments || c == Command::Variance || c == Command::Lst ||
           c == Command::Wdist || c == Command::Validate;
}

std::size_t positive_count(long long v, const char* flag, long long min = 1) {
    if (v < min) usage(std::string(flag) + " must be >= " + std::to_string(min));
    return static_cast<std::size_t>(v);
}

double grid_ceiling(double value, double step) {
    const double cells = std::max(1.0, std::ceil(value / step - 1e-9));
    return cells * step;
}

void check_atoms(const ServiceDistribution& d, double step, const char* flag) {
    for (const PointMass& pm : d.atoms()) {
        const double pos = pm.at / step;
        if (std::abs(pos - std::round(pos)) > 1e-9) {
            const double suggestion = pm.at / std::ceil(pos);
            usage("AtomOffGrid: point mass at " + format_double(pm.at) + " is not a multiple of " +
                  flag + " " + format_double(step) + "; use a step that divides it, e.g. " + flag +
                  " " + format_double(suggestion));
        }
    }
}

}  // namespace

std::string to_string(Command c) {
    switch (c) {
        case Command::Moments: return "moments";
        case Command::Variance: return "variance";
        case Command::Lst: return "lst";
        case Command::Qlen: return "qlen";
        case Command::Busy: return "busy";
        case Command::Wdist: return "wdist";
        case Command::Simulate: return "simulate";
        case Command::Validate: return "validate";
    }
    return "unknown";
}

RunSpec parse(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("psq");
    for (const std::string& a : args) argv.push_back(a.c_str());
    return parse(static_cast<int>(argv.size()), argv.data());
}

RunSpec parse(int argc, const char* const* argv) {
    CLI::App app{"Sojourn-time analytics and simulation for the M/G/1 processor-sharing queue"};
    app.name("psq");
    app.require_subcommand(1);
    RawArgs raw;

    auto add_model = [&](CLI::App* sub) {
        sub->add_option("--lambda", raw.lambda, "Poisson arrival rate")->required();
        sub->add_option("--dist", raw.dist,
                        "service law: exp:RATE, det:SIZE, erlang:SHAPE:RATE, hyperexp:w1:r1:..., "
                        "mix:BASE:probe_size:probe_prob, table:PATH")
            ->required();
        sub->add_option("--K", raw.k, "number of permanent jobs");
        sub->add_option("--format", raw.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--output", raw.output, "write the report to this path");
    };
    auto add_grid = [&](CLI::App* sub) {
        sub->add_option("--step,--grid-step", raw.step, "grid step (default 1e-3 x mean size)");
        sub->add_option("--horizon", raw.horizon, "grid horizon (default max u, else 50 x mean size)");
        sub->add_option("--eps", raw.eps, "series truncation tolerance");
    };
    auto add_sim = [&](CLI::App* sub) {
        sub->add_option("--departures", raw.departures, "measured departures");
        sub->add_option("--warmup", raw.warmup, "departures discarded before measuring");
        sub->add_option("--batches", raw.batches, "batches for batch-means intervals");
        sub->add_option("--seed", raw.seed, "random seed");
        sub->add_option("--replications", raw.replications, "independent replications");
    };
    auto list = [](CLI::App* sub, const char* name, std::vector<double>& target, const char* help) {
        return sub->add_option(name, target, help)->delimiter(',');
    };

    std::vector<std::pair<CLI::App*, Command>> subs;
    {
        auto* sub = app.add_subcommand("moments", "raw sojourn moments v_n(u)");
        add_model(sub);
        add_grid(sub);
        list(sub, "--u", raw.u, "job sizes")->required();
        sub->add_option("--order", raw.order, "highest moment order");
        subs.emplace_back(sub, Command::Moments);
    }
    {
        auto* sub = app.add_subcommand("variance", "conditional sojourn variance");
        add_model(sub);
        add_grid(sub);
        list(sub, "--u", raw.u, "job sizes")->required();
        subs.emplace_back(sub, Command::Variance);
    }
    {
        auto* sub = app.add_subcommand("lst", "sojourn-time transform E[exp(-r V_K(u))]");
        add_model(sub);
        add_grid(sub);
        list(sub, "--u", raw.u, "job sizes (grid nodes)")->required();
        list(sub, "--r", raw.r, "transform arguments")->required();
        sub->add_option("--terms", raw.terms, "maximum series terms");
        subs.emplace_back(sub, Command::Lst);
    }
    {
        auto* sub = app.add_subcommand("qlen", "stationary number of ordinary jobs");
        add_model(sub);
        sub->add_option("--max-n", raw.max_n, "largest n to report");
        subs.emplace_back(sub, Command::Qlen);
    }
    {
        auto* sub = app.add_subcommand("busy", "busy-period transform and mean");
        add_model(sub);
        list(sub, "--r", raw.r, "transform arguments");
        sub->add_option("--tol", raw.tol, "fixed-point tolerance");
        sub->add_option("--max-iters", raw.max_iters, "fixed-point iteration cap");
        subs.emplace_back(sub, Command::Busy);
    }
    {
        auto* sub = app.add_subcommand("wdist", "FCFS waiting-time law W(x) and W(x)/(1-rho)");
        add_model(sub);
        add_grid(sub);
        list(sub, "--x", raw.x, "points (grid nodes); default ~100 evenly spaced nodes");
        sub->add_option("--terms", raw.terms, "series terms when rho >= 1");
        subs.emplace_back(sub, Command::Wdist);
    }
    {
        auto* sub = app.add_subcommand("simulate", "discrete-event simulation");
        add_model(sub);
        add_sim(sub);
        sub->add_option("--step,--grid-step", raw.step,
                        "grid step of the analytic companion (checked for atom alignment)");
        list(sub, "--r", raw.r, "transform arguments for probe estimates");
        sub->add_option("--order", raw.order, "highest probe moment");
        subs.emplace_back(sub, Command::Simulate);
    }
    {
        auto* sub = app.add_subcommand("validate", "analytic values against the simulator");
        add_model(sub);
        add_grid(sub);
        add_sim(sub);
        list(sub, "--u", raw.u, "probe size (defaults to the mixture's probe size)");
        list(sub, "--r", raw.r, "transform arguments");
        sub->add_option("--order", raw.order, "highest moment order");
        sub->add_option("--terms", raw.terms, "maximum series terms");
        subs.emplace_back(sub, Command::Validate);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::ostringstream os;
        app.exit(e, os, os);
        throw HelpRequested(os.str());
    } catch (const CLI::ParseError& e) {
        usage(e.what());
    }

    Command command = Command::Moments;
    for (const auto& [sub, cmd] : subs) {
        if (sub->parsed()) command = cmd;
    }

    if (raw.k < 0) usage("--K must be >= 0");
    std::optional<ServiceDistribution> dist;
    try {
        dist = parse_distribution(raw.dist);
    } catch (const Error& e) {
        usage(std::string("--dist: ") + e.what());
    }
    std::optional<ModelParams> model;
    try {
        model.emplace(raw.lambda, *dist, static_cast<std::size_t>(raw.k));
    } catch (const Error& e) {
        usage(std::string("--lambda: ") + e.what());
    }
    if (command != Command::Wdist && !model->stable()) {
        usage("unstable: rho=" + format_double(model->rho()) + " ≥ 1");
    }

    RunSpec spec{command, *model, raw.dist};
    spec.format = raw.format == "csv" ? OutputFormat::Csv : OutputFormat::Json;
    spec.output_path = raw.output;
    spec.order = positive_count(raw.order, "--order");
    if (spec.order > kMaxMomentOrder) usage("--order must be <= " + std::to_string(kMaxMomentOrder));
    spec.terms = positive_count(raw.terms, "--terms");
    spec.max_n = positive_count(raw.max_n, "--max-n", 0);
    spec.warmup = positive_count(raw.warmup, "--warmup", 0);
    spec.departures = positive_count(raw.departures, "--departures");
    spec.batches = positive_count(raw.batches, "--batches", 2);
    if (spec.departures < spec.batches) usage("--departures must be >= --batches");
    spec.replications = positive_count(raw.replications, "--replications");
    spec.seed = raw.seed;
    spec.max_iters = positive_count(raw.max_iters, "--max-iters");
    if (!(raw.tol > 0.0)) usage("--tol must be > 0");
    spec.tol = raw.tol;
    if (!(raw.eps > 0.0)) usage("--eps must be > 0");
    spec.eps = raw.eps;
    for (double v : raw.u) {
        if (!(v >= 0.0)) usage("--u values must be >= 0");
    }
    for (double v : raw.r) {
        if (!(v >= 0.0)) usage("--r values must be >= 0");
    }
    for (double v : raw.x) {
        if (!(v >= 0.0)) usage("--x values must be >= 0");
    }
    spec.u_values = raw.u;
    spec.r_values = raw.r;
    spec.x_values = raw.x;

    const auto* mix = std::get_if<ProbeMixture>(&model->service().kind());
    if (command == Command::Validate) {
        if (mix == nullptr) usage("--dist: validate needs a mix:BASE:probe_size:probe_prob law");
        if (spec.u_values.empty()) spec.u_values = {mix->probe_size};
        if (spec.u_values.size() != 1 || std::abs(spec.u_values[0] - mix->probe_size) > 1e-12) {
            usage("--u: the simulator observes only the probe size " + format_double(mix->probe_size));
        }
    }

    const double mean = model->service().mean();
    if (raw.step && !(*raw.step > 0.0)) usage("--grid-step must be > 0");
    spec.step = raw.step.value_or(1e-3 * mean);
    if (uses_grid(command) || (command == Command::Simulate && raw.step)) {
        check_atoms(model->service(), spec.step, "--grid-step");
    }
    if (uses_grid(command)) {
        double horizon = 0.0;
        if (raw.horizon) {
            horizon = *raw.horizon;
        } else if (!spec.u_values.empty()) {
            horizon = *std::max_element(spec.u_values.begin(), spec.u_values.end());
        } else if (!spec.x_values.empty()) {
            horizon = *std::max_element(spec.x_values.begin(), spec.x_values.end());
        } else {
            horizon = 50.0 * mean;
        }
        spec.horizon = grid_ceiling(horizon, spec.step);
        for (double u : spec.u_values) {
            if (u > spec.horizon * (1.0 + 1e-12)) usage("--u value beyond --horizon");
        }
    }
    return spec;
}

namespace {

json model_json(const RunSpec& spec) {
    return json{{"lambda", spec.model.lambda()},
                {"dist", spec.dist_spec},
                {"K", spec.model.permanent_jobs()},
                {"rho", spec.model.rho()}};
}

json base_diagnostics() {
    return json{{"truncation_terms", nullptr}, {"grid_step", nullptr}, {"iterations", nullptr}};
}

SimConfig sim_config(const RunSpec& spec) {
    SimConfig c{spec.model};
    c.warmup_departures = spec.warmup;
    c.measured_departures = spec.departures;
    c.batches = spec.batches;
    c.seed = spec.seed;
    c.replications = spec.replications;
    c.moment_order = std::max<std::size_t>(2, spec.order);
    c.r_values = spec.r_values;
    return c;
}

json sim_controls(const RunSpec& spec) {
    return json{{"departures", spec.departures}, {"warmup", spec.warmup}, {"batches", spec.batches},
                {"seed", spec.seed}, {"replications", spec.replications}};
}

double z_score(double analytic, double estimate, double halfwidth) {
    const double diff = std::abs(analytic - estimate);
    if (diff <= 1e-9 * std::max(1.0, std::abs(analytic))) return 0.0;
    if (halfwidth <= 0.0) return std::numeric_limits<double>::infinity();
    return diff / halfwidth;
}

std::vector<double> default_points(double step, double horizon) {
    const std::size_t cells = cells_for(step, horizon);
    const std::size_t stride = std::max<std::size_t>(1, cells / 100);
    std::vector<double> xs;
    for (std::size_t k = 0; k <= cells; k += stride) xs.push_back(step * static_cast<double>(k));
    return xs;
}

}  // namespace

Report compute(const RunSpec& spec) {
    Report report;
    report.command = to_string(spec.command);
    report.model = model_json(spec);
    report.diagnostics = base_diagnostics();
    const ModelParams& model = spec.model;
    const std::size_t k = model.permanent_jobs();

    switch (spec.command) {
        case Command::Moments: {
            KernelWorkspace ws(model, spec.step, spec.horizon, spec.eps);
            const MomentTable table = k_moments(moments_upto(ws, spec.order, spec.u_values), k);
            for (std::size_t j = 0; j < table.u_grid.size(); ++j) {
                for (std::size_t n = 1; n <= table.order; ++n) {
                    report.results.push_back({.name = "moment", .u = table.u_grid[j], .n = n,
                                              .value = table.at(n, j)});
                }
            }
            report.controls = {{"step", spec.step}, {"horizon", spec.horizon}, {"eps", spec.eps},
                               {"order", spec.order}, {"u", spec.u_values}};
            report.diagnostics["truncation_terms"] = ws.truncation_terms();
            report.diagnostics["grid_step"] = spec.step;
            break;
        }
        case Command::Variance: {
            KernelWorkspace ws(model, spec.step, spec.horizon, spec.eps);
            for (double u : spec.u_values) {
                report.results.push_back(
                    {.name = "variance", .u = u, .value = conditional_variance(model, u, ws)});
                report.results.push_back({.name = "variance_small_u_asymptote", .u = u,
                                          .value = small_u_var_asymptote(model, u)});
            }
            report.controls = {{"step", spec.step}, {"horizon", spec.horizon}, {"eps", spec.eps},
                               {"u", spec.u_values}};
            report.diagnostics["truncation_terms"] = ws.truncation_terms();
            report.diagnostics["grid_step"] = spec.step;
            break;
        }
        case Command::Lst: {
            KernelWorkspace ws(model, spec.step, spec.horizon, spec.eps);
            std::size_t most_terms = 0;
            for (double u : spec.u_values) {
                for (double r : spec.r_values) {
                    const LstEvaluation base = sojourn_lst(ws, r, u, spec.terms);
                    most_terms = std::max(most_terms, base.terms_used);
                    report.results.push_back({.name = "lst", .u = u, .r = r,
                                              .value = std::pow(base.value, static_cast<double>(k + 1))});
                }
            }
            report.controls = {{"step", spec.step}, {"horizon", spec.horizon}, {"eps", spec.eps},
                               {"terms", spec.terms}, {"u", spec.u_values}, {"r", spec.r_values}};
            report.diagnostics["truncation_terms"] = ws.truncation_terms();
            report.diagnostics["grid_step"] = spec.step;
            report.diagnostics["series_terms"] = most_terms;
            break;
        }
        case Command::Qlen: {
            for (std::size_t n = 0; n <= spec.max_n; ++n) {
                report.results.push_back({.name = "pmf", .n = n, .value = qlen_pmf(model, n)});
            }
            report.controls = {{"max_n", spec.max_n}};
            report.diagnostics["mean_queue_length"] = qlen_mean(model);
            break;
        }
        case Command::Busy: {
            const BusyPeriodSolver solver(model, spec.tol, spec.max_iters);
            std::size_t iterations = 0;
            for (double r : spec.r_values) {
                const BusyPeriodValue v = solver.lst(r);
                iterations = std::max(iterations, v.iterations);
                report.results.push_back({.name = "busy_lst", .r = r, .value = v.value});
            }
            report.results.push_back({.name = "busy_mean", .value = solver.mean()});
            report.controls = {{"tol", spec.tol}, {"max_iters", spec.max_iters}, {"r", spec.r_values}};
            report.diagnostics["iterations"] = iterations;
            break;
        }
        case Command::Wdist: {
            KernelWorkspace ws(model, spec.step, spec.horizon, spec.eps);
            const std::vector<double> xs =
                spec.x_values.empty() ? default_points(spec.step, spec.horizon) : spec.x_values;
            bool partial = false;
            for (double x : xs) {
                const WcircValue wc = wcirc(ws, x, spec.terms);
                partial = partial || wc.partial;
                if (model.stable()) {
                    report.results.push_back(
                        {.name = "W", .x = x, .value = ws.waiting()[ws.node_of(x)]});
                }
                report.results.push_back({.name = "Wcirc", .x = x, .value = wc.value});
            }
            report.controls = {{"step", spec.step}, {"horizon", spec.horizon}, {"eps", spec.eps},
                               {"terms", spec.terms}};
            report.diagnostics["truncation_terms"] =
                model.stable() ? json(ws.truncation_terms()) : json(spec.terms);
            report.diagnostics["grid_step"] = spec.step;
            report.diagnostics["partial_sums"] = partial;
            break;
        }
        case Command::Simulate: {
            const SimResult sim = run(sim_config(spec));
            const std::optional<double> u = sim.probe_size;
            for (const MomentEstimate& m : sim.probe_moments) {
                report.results.push_back({.name = "probe_moment", .u = u, .n = m.order,
                                          .value = m.estimate.value,
                                          .ci_halfwidth = m.estimate.ci_halfwidth});
            }
            if (sim.probe_variance) {
                report.results.push_back({.name = "probe_variance", .u = u,
                                          .value = sim.probe_variance->value,
                                          .ci_halfwidth = sim.probe_variance->ci_halfwidth});
            }
            for (const LstEstimate& l : sim.lst_estimates) {
                report.results.push_back({.name = "probe_lst", .u = u, .r = l.r,
                                          .value = l.estimate.value,
                                          .ci_halfwidth = l.estimate.ci_halfwidth});
            }
            for (std::size_t n = 0; n < sim.qlen_histogram.size(); ++n) {
                report.results.push_back({.name = "qlen", .n = n, .value = sim.qlen_histogram[n],
                                          .ci_halfwidth = sim.qlen_ci_halfwidth[n]});
            }
            report.results.push_back({.name = "mean_queue_length",
                                      .value = sim.mean_queue_length.value,
                                      .ci_halfwidth = sim.mean_queue_length.ci_halfwidth});
            report.controls = sim_controls(spec);
            report.controls["r"] = spec.r_values;
            report.diagnostics["total_events"] = sim.total_events;
            report.diagnostics["probe_count"] = sim.probe_count;
            report.diagnostics["work_balance_error"] = sim.work_balance_error;
            break;
        }
        case Command::Validate: {
            const double u = spec.u_values.front();
            KernelWorkspace ws(model, spec.step, spec.horizon, spec.eps);
            const std::vector<double> us{u};
            const MomentTable table = k_moments(moments_upto(ws, spec.order, us), k);
            const SimResult sim = run(sim_config(spec));
            bool pass = true;
            auto compare = [&](ResultRow row, const Estimate& est) {
                row.estimate = est.value;
                row.ci_halfwidth = est.ci_halfwidth;
                row.z = z_score(row.value, est.value, est.ci_halfwidth);
                pass = pass && *row.z <= 3.0;
                report.results.push_back(row);
            };
            for (std::size_t n = 1; n <= spec.order; ++n) {
                compare({.name = "moment", .u = u, .n = n, .value = table.at(n, 0)},
                        sim.probe_moments.at(n - 1).estimate);
            }
            std::size_t most_terms = 0;
            for (const LstEstimate& l : sim.lst_estimates) {
                const LstEvaluation base = sojourn_lst(ws, l.r, u, spec.terms);
                most_terms = std::max(most_terms, base.terms_used);
                compare({.name = "lst", .u = u, .r = l.r,
                         .value = std::pow(base.value, static_cast<double>(k + 1))},
                        l.estimate);
            }
            for (std::size_t n = 0;; ++n) {
                const double p = qlen_pmf(model, n);
                if (p < 0.01) break;
                const Estimate est =
                    n < sim.qlen_histogram.size()
                        ? Estimate{sim.qlen_histogram[n], sim.qlen_ci_halfwidth[n]}
                        : Estimate{0.0, 0.0};
                compare({.name = "pmf", .n = n, .value = p}, est);
            }
            report.controls = sim_controls(spec);
            report.controls.update(json{{"step", spec.step}, {"horizon", spec.horizon},
                                        {"eps", spec.eps}, {"order", spec.order},
                                        {"u", spec.u_values}, {"r", spec.r_values}});
            report.diagnostics["truncation_terms"] = ws.truncation_terms();
            report.diagnostics["grid_step"] = spec.step;
            report.diagnostics["series_terms"] = most_terms;
            report.diagnostics["total_events"] = sim.total_events;
            report.diagnostics["probe_count"] = sim.probe_count;
            report.verdict = pass ? "PASS" : "FAIL";
            break;
        }
    }
    return report;
}

json to_json(const Report& report) {
    json results = json::array();
    for (const ResultRow& row : report.results) {
        json item{{"name", row.name}};
        if (row.u) item["u"] = *row.u;
        if (row.n) item["n"] = *row.n;
        if (row.r) item["r"] = *row.r;
        if (row.x) item["x"] = *row.x;
        item["value"] = row.value;
        if (row.ci_halfwidth) item["ci_halfwidth"] = *row.ci_halfwidth;
        if (row.estimate) item["estimate"] = *row.estimate;
        if (row.z) item["z"] = std::isfinite(*row.z) ? json(*row.z) : json(nullptr);
        results.push_back(item);
    }
    json out{{"command", report.command},
             {"model", report.model},
             {"controls", report.controls},
             {"results", results},
             {"diagnostics", report.diagnostics}};
    if (report.verdict) out["verdict"] = *report.verdict;
    return out;
}

std::string to_csv(const Report& report) {
    const auto& rows = report.results;
    auto any = [&](auto pred) { return std::any_of(rows.begin(), rows.end(), pred); };
    const bool mixed = any([&](const ResultRow& r) { return r.name != rows.front().name; });
    const bool has_u = any([](const ResultRow& r) { return r.u.has_value(); });
    const bool has_n = any([](const ResultRow& r) { return r.n.has_value(); });
    const bool has_r = any([](const ResultRow& r) { return r.r.has_value(); });
    const bool has_x = any([](const ResultRow& r) { return r.x.has_value(); });
    const bool has_ci = any([](const ResultRow& r) { return r.ci_halfwidth.has_value(); });
    const bool has_est = any([](const ResultRow& r) { return r.estimate.has_value(); });
    const bool has_z = any([](const ResultRow& r) { return r.z.has_value(); });

    std::vector<std::string> header;
    if (mixed) header.emplace_back("quantity");
    if (has_u) header.emplace_back("u");
    if (has_n) header.emplace_back("n");
    if (has_r) header.emplace_back("r");
    if (has_x) header.emplace_back("x");
    header.emplace_back("value");
    if (has_ci) header.emplace_back("ci_halfwidth");
    if (has_est) header.emplace_back("estimate");
    if (has_z) header.emplace_back("z");

    std::ostringstream out;
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    auto num = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    for (const ResultRow& row : rows) {
        std::vector<std::string> cells;
        if (mixed) cells.push_back(row.name);
        if (has_u) cells.push_back(num(row.u));
        if (has_n) cells.push_back(row.n ? std::to_string(*row.n) : std::string());
        if (has_r) cells.push_back(num(row.r));
        if (has_x) cells.push_back(num(row.x));
        cells.push_back(format_double(row.value));
        if (has_ci) cells.push_back(num(row.ci_halfwidth));
        if (has_est) cells.push_back(num(row.estimate));
        if (has_z) cells.push_back(num(row.z));
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << '\n';
    }
    return out.str();
}

int execute(const RunSpec& spec, std::ostream& out, std::ostream& err) {
    std::ofstream file;
    std::ostream* sink = &out;
    if (!spec.output_path.empty()) {
        file.open(spec.output_path);
        if (!file) {
            err << "psq: cannot open " << spec.output_path << " for writing\n";
            return 1;
        }
        sink = &file;
    }
    try {
        const Report report = compute(spec);
        if (spec.format == OutputFormat::Json) {
            *sink << to_json(report).dump(2) << '\n';
        } else {
            *sink << to_csv(report);
        }
        return report.verdict && *report.verdict != "PASS" ? 1 : 0;
    } catch (const Error& e) {
        if (spec.format == OutputFormat::Json) {
            const json error{{"error", {{"kind", std::string(psq::to_string(e.kind()))},
                                        {"message", e.what()}}}};
            *sink << error.dump(2) << '\n';
        }
        err << "psq: " << psq::to_string(e.kind()) << ": " << e.what() << '\n';
        return 1;
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        return execute(parse(args), out, err);
    } catch (const HelpRequested& help) {
        out << help.what();
        return 0;
    } catch (const Error& e) {
        err << "psq: " << e.what() << '\n';
        return e.kind() == ErrorKind::Usage ? 2 : 1;
    }
}

}  // namespace psq::cli
