#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fgap/events.hpp"
#include "fgap/lattice.hpp"
#include "fgap/models.hpp"

namespace fgap {

enum class Start { ordered, disordered };
std::string start_name(Start s);
Start parse_start(const std::string& s);

struct Schedule {
    long burn_in = 10000;
    long sweeps = 100000;
    int batches = 20;
    int measure_every = 1;
};

// Ordered starts: every variable at its reference value, except O2AF which
// gets stripes (variant 0 horizontal, 1 vertical). Disordered: the beta = 0 measure.
Configuration start_configuration(const ModelSpec& m, const TorusGeometry& g, Start start, std::mt19937_64& rng,
                                  int variant = 0);

struct ChainState {
    Configuration config;
    std::mt19937_64 rng;
    long sweeps_done = 0;
    double angle_window = 1.0;  // half-width, capped at pi
    double edge_window = 0.5;
    bool tuning = true;         // windows adapt only while true
    long proposed = 0;
    long accepted = 0;
    long edge_proposed = 0;
    long edge_accepted = 0;
};

// The stream depends only on (seed, chain).
ChainState make_chain(Configuration config, std::uint64_t seed, std::uint64_t chain);

// Single-variable Metropolis update. `old_*` fields remember the replaced values.
struct Move {
    enum class Kind { site, edge } kind = Kind::site;
    std::size_t index = 0;
    int label = 0;
    std::uint8_t occupancy = 0;
    double angle = 0.0;
    double r = 0.0;
};

Move propose(const ModelSpec& m, const TorusGeometry& g, const Configuration& c, Move::Kind kind, std::size_t index,
             double angle_window, double edge_window, std::mt19937_64& rng);
// Density (or mass) of proposing `move` from c. Proposals are symmetric, so the
// reverse move has the same value; the detailed-balance test checks that.
double proposal_density(const ModelSpec& m, const Configuration& c, const Move& move, double angle_window,
                        double edge_window);
double energy_change(const ModelSpec& m, const TorusGeometry& g, Configuration& c, const Move& move);
// Value at `index` in c, in Move form; applying it undoes a move.
Move current_value(const ModelSpec& m, const Configuration& c, Move::Kind kind, std::size_t index);
void apply(Configuration& c, const Move& move);

// One pass over all sites, then (magnetostriction) one pass over all edges.
void sweep(const ModelSpec& m, const TorusGeometry& g, double beta, ChainState& state);

struct ScanRow {
    double beta = 0.0;
    Start start = Start::ordered;
    double energy_mean = 0.0;
    double energy_err = 0.0;
    std::vector<double> rho;      // per good event
    std::vector<double> rho_err;
    double rho_bad = 0.0;
    double rho_bad_err = 0.0;
    long samples = 0;
    double acceptance = 0.0;
    bool converged = true;
    std::string flags;            // ';'-separated
};

struct ScanCurve {
    std::vector<std::string> events;
    std::vector<ScanRow> rows;
};

// Burn-in then measurement on the given chain. Block densities use the
// reflection placement on the factor torus of side L / B.
ScanRow estimate_rho(const ModelSpec& m, const TorusGeometry& g, double beta, const GoodFamily& family,
                     const Schedule& schedule, ChainState& state, Start start = Start::ordered);

// One chain per (start, beta); chain id = start position * |grid| + beta position.
ScanCurve beta_scan(const ModelSpec& m, const TorusGeometry& g, const GoodFamily& family,
                    const std::vector<double>& betas, const Schedule& schedule, const std::vector<Start>& starts,
                    std::uint64_t seed);

struct GapReport {
    bool jump = false;
    double bracket_lo = 0.0, bracket_hi = 0.0;
    bool gap = false;
    double gap_lo = 0.0, gap_hi = 0.0;  // lower-branch max, upper-branch min over the bracket
    double width() const { return gap ? gap_hi - gap_lo : 0.0; }
    double epsilon = 0.1;
    std::vector<std::size_t> inside_gap;        // rows whose energy lies in the gap beyond error bars
    std::vector<std::size_t> no_dominant;       // converged rows with every rho < 1 - epsilon
    std::vector<std::size_t> unconverged;
};

// Rows are paired by beta between the ordered and disordered starts; pairs
// with an unconverged row do not enter the bracket or the gap.
GapReport gap_report(const ScanCurve& curve, double epsilon = 0.1, double z = 3.0);

}  // namespace fgap
