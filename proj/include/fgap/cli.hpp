#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fgap/events.hpp"
#include "fgap/lattice.hpp"
#include "fgap/mc.hpp"
#include "fgap/models.hpp"

namespace fgap::cli {

using json = nlohmann::json;

// Bad or inconsistent configuration; maps to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct VerifyOptions {
    int L = 2;                        // exact torus side
    int B = 0;                        // block side for exact checks; 0 = the family's
    int grid = 4;                     // points per continuous variable
    std::vector<double> betas{0.5, 1.0, 2.0};
    int tuples = 20;                  // random chessboard tuples per beta
    bool diagonal_planes = false;
    bool literal_dis_lower = false;   // (2 pi)^{|T|} <= Z^dis as displayed
    std::size_t family_samples = 100000;
    int quad_grid = 32;               // constrained partitions; checked against 2x
};

struct BoundsOptions {
    std::vector<double> q_grid;
    std::vector<double> p_grid;
    std::vector<double> beta_grid;
    std::vector<double> eps_grid{0.05, 0.1, 0.2, 0.3, 0.45};
    double C = 10.0;
    double kappa = 0.5;
};

struct RunConfig {
    json resolved;  // the full document after preset and overrides
    ModelSpec model;
    TorusGeometry geometry{2, 4, 1};
    std::vector<double> betas;
    EventParams events;
    Schedule schedule;
    std::vector<Start> starts{Start::ordered, Start::disordered};
    double epsilon = 0.1;
    double exact_budget = 1e8;
    VerifyOptions verify;
    BoundsOptions bounds;
    std::string output = "out";
    std::uint64_t seed = 1;
};

std::vector<std::string> preset_names();
json preset(const std::string& name);  // throws ConfigError for unknown names

// Missing keys fall back to the defaults above; unknown keys are errors.
RunConfig parse_config(const json& doc);
std::string config_hash(const RunConfig& cfg);  // FNV-1a of the resolved document minus output/seed

enum class Status { pass, fail, refused };
std::string status_name(Status s);

struct CheckResult {
    std::string name;
    Status status = Status::pass;
    std::string diagnostic;
    double seconds = 0.0;
};

struct VerificationReport {
    std::vector<CheckResult> checks;
    bool any_fail() const;
};

VerificationReport cmd_verify(const RunConfig& cfg);
ScanCurve cmd_scan(const RunConfig& cfg, GapReport* gap = nullptr);
json cmd_bounds(const RunConfig& cfg, std::string* csv = nullptr);
json cmd_exact(const RunConfig& cfg);

// Serialization. Every artifact carries the config hash and seed; wall-clock
// data lives only under "metadata".
json report_json(const RunConfig& cfg, const VerificationReport& rep);
std::string scan_csv(const RunConfig& cfg, const ScanCurve& curve);
json gap_json(const RunConfig& cfg, const ScanCurve& curve, const GapReport& gap);
std::string scan_svg(const RunConfig& cfg, const ScanCurve& curve, const GapReport& gap);
std::string format_number(double v);  // 12 significant digits

// Entry point for the executable: returns the process exit code.
int run(int argc, char** argv);

}  // namespace fgap::cli
