#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fgap/events.hpp"
#include "fgap/lattice.hpp"
#include "fgap/models.hpp"

namespace fgap {

// Thrown instead of silently truncating an enumeration.
struct Refused : std::runtime_error {
    double size;
    Refused(const std::string& what, double size_) : std::runtime_error(what), size(size_) {}
};

// Normalized Gibbs weights over an enumerated (or grid-discretized) state space.
// State index = mixed-radix number over the variables: sites first, then edges.
struct ExactMeasure {
    TorusGeometry geometry;
    ModelSpec model;
    double beta = 0.0;
    int grid = 0;          // points per continuous variable; 0 for enumerations
    double origin = 0.0;   // angle grid shift
    std::vector<int> radix;
    std::vector<double> weights;
    std::vector<double> energies;  // torus energy per state
    double log_z = 0.0;    // includes the quadrature cell volume for grids

    std::size_t size() const { return weights.size(); }
    double z() const;
    Configuration configuration(std::size_t idx) const;
    double expectation(const std::function<double(const Configuration&)>& f) const;
    double mean_energy_density() const;
};

constexpr double default_exact_budget = 1e8;

ExactMeasure enumerate_measure(const ModelSpec& m, const TorusGeometry& g, double beta,
                               double budget = default_exact_budget);

// Midpoint rule: angle j sits at -pi + (j + 1/2) 2pi/G + origin; bond lengths
// use G midpoints of (0, r_max].
ExactMeasure grid_measure(const ModelSpec& m, const TorusGeometry& g, double beta, int G, double origin = 0.0,
                          double budget = default_exact_budget);

struct PlacedEvent {
    Coord t;
    BlockEvent event;
};

// P(intersection over j of theta_{t_j}(A_j)); B-blocks of the measure's geometry.
double prob_disseminated(const ExactMeasure& meas, const std::vector<PlacedEvent>& events);
// A placed at every factor-torus point.
double prob_full_dissemination(const ExactMeasure& meas, const BlockEvent& a);

struct ChessboardReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;  // lhs - rhs
    bool pass = false;    // margin <= 1e-10
};
ChessboardReport chessboard_check(const ExactMeasure& meas, const std::vector<PlacedEvent>& events);

struct RpReport {
    bool pass = false;
    double min_eigenvalue = 0.0;
    double asymmetry = 0.0;  // max |M_ab - M_ba|
    int depth = 0;
    std::size_t half_space = 0;
    std::size_t fixed = 0;
    std::size_t blocks = 0;
    std::size_t block_size = 0;
};

// Gram matrix E[X_a theta_P(X_b)] over indicators of configurations on the
// half-space {0 <= k <= depth}. depth < 0 picks the deepest half-space whose
// overlap with its mirror image is pointwise fixed.
RpReport rp_gram_check(const ExactMeasure& meas, const PlaneSpec& plane, int depth = -1,
                       std::size_t max_block = 4096);

// (full-dissemination probability)^{1/|factor torus|}
double p_finite(const ExactMeasure& meas, const BlockEvent& a);
double p_finite(const BlockEvent& a, const TorusGeometry& g, const ModelSpec& m, double beta, int grid = 16);

// Event given by a truth table over block states sum_u state_u k^u (discrete models).
BlockEvent table_event(std::string name, const ModelSpec& m, int d, int B, std::vector<std::uint8_t> truth);
BlockEvent random_table_event(std::string name, const ModelSpec& m, int d, int B, double density, std::mt19937_64& rng);

enum class BondPattern { all, so, wo, dis, mix };
std::string pattern_name(BondPattern p);

struct QuadratureResult {
    double value = 0.0;
    std::string diagnostic;  // nonempty when the constraint set is empty
};

// Z_L restricted to a bond-class pattern on the L = 2, d = 2 torus, integrated
// with G midpoints on every maximal interval allowed by the constraints. The
// midpoints are graded toward both interval ends, where the integrand peaks.
// mix: bonds on even horizontal and even vertical lines strongly ordered,
// bonds on odd lines disordered.
QuadratureResult constrained_partition(const NonlinearFerromagnet& m, const TorusGeometry& g, double beta, BondPattern pattern,
                                       double C, int G);

}  // namespace fgap
