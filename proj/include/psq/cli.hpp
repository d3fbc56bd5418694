#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "psq/model.hpp"

namespace psq::cli {

enum class Command { Moments, Variance, Lst, Qlen, Busy, Wdist, Simulate, Validate };
enum class OutputFormat { Csv, Json };

std::string to_string(Command c);

/// A fully validated command line.
struct RunSpec {
    Command command;
    ModelParams model;
    std::string dist_spec;

    double step = 0.0;
    double horizon = 0.0;
    double eps = 1e-10;
    std::size_t order = 2;
    std::size_t terms = 200;
    std::vector<double> u_values;
    std::vector<double> r_values;
    std::vector<double> x_values;
    std::size_t max_n = 10;

    std::size_t warmup = 10'000;
    std::size_t departures = 1'000'000;
    std::size_t batches = 20;
    std::uint64_t seed = 42;
    std::size_t replications = 1;

    double tol = 1e-12;
    std::size_t max_iters = 1'000'000;

    OutputFormat format = OutputFormat::Json;
    std::string output_path;  // empty: standard output
};

/// Thrown by parse() for --help; carries the usage text.
struct HelpRequested : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Builds a RunSpec or throws Error{Usage} naming the offending flag.
RunSpec parse(int argc, const char* const* argv);
RunSpec parse(const std::vector<std::string>& args);

struct ResultRow {
    std::string name;
    std::optional<double> u;
    std::optional<std::size_t> n;
    std::optional<double> r;
    std::optional<double> x;
    double value = 0.0;
    std::optional<double> ci_halfwidth;
    std::optional<double> estimate;
    std::optional<double> z;
};

struct Report {
    std::string command;
    nlohmann::json model;
    nlohmann::json controls;
    std::vector<ResultRow> results;
    nlohmann::json diagnostics;
    std::optional<std::string> verdict;
};

/// Runs the engine a spec asks for.
Report compute(const RunSpec& spec);

nlohmann::json to_json(const Report& report);

/// Header then one row per result; the `quantity` column appears only when
/// rows carry different names, and unused columns are omitted.
std::string to_csv(const Report& report);

/// Runs `spec`, writes the report, returns the process exit code
/// (0 success or PASS, 1 engine failure or FAIL).
int execute(const RunSpec& spec, std::ostream& out, std::ostream& err);

/// Whole front end: parse + execute; usage errors return 2.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace psq::cli
