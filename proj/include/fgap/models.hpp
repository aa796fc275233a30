#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "fgap/lattice.hpp"

namespace fgap {

// Potts labels are 0..q-1. The optional axial_next term couples x and x + 2e_i
// and exists only to build models that are not reflection positive.
struct Potts {
    int q = 2;
    double coupling = 1.0;
    double axial_next = 0.0;
};

struct DilutedPotts {
    int q = 2;
    double lambda = 0.0;
    double kappa = 0.0;
};

struct DilutedXY {
    double lambda = 0.0;
    double kappa = 0.0;
};

// d = 2 only. Spins are unit vectors stored as angles.
struct O2AF {
    double gamma = 1.0;
};

struct NonlinearFerromagnet {
    double p = 1.0;
};

// Ising spins stored as +1/-1 labels; one bond length per edge.
struct Magnetostriction {
    double J1 = 2.0;
    double J2 = 0.1;
    double eta_J = 1.0;
    double kappa = 1.0;
    double lambda = 0.5;
    double R = 1.0;
    double r_max = 4.0;

    double J(double r) const { return r <= eta_J ? J1 : J2; }
};

using ModelSpec = std::variant<Potts, DilutedPotts, DilutedXY, O2AF, NonlinearFerromagnet, Magnetostriction>;

std::string model_name(const ModelSpec& m);
bool is_discrete(const ModelSpec& m);
void validate(const ModelSpec& m, const TorusGeometry& g);

struct Configuration {
    std::vector<int> labels;             // Potts labels or Ising spins
    std::vector<std::uint8_t> occupancy; // diluted models
    std::vector<double> angles;          // (-pi, pi]
    std::vector<double> edges;           // magnetostriction bond lengths, index TorusGeometry::edge

    bool operator==(const Configuration& o) const = default;
};

// Reduce an angle to (-pi, pi].
double wrap_angle(double a);

// A valid configuration with every variable at a reference value
// (label 0 / spin +1, occupied, angle 0, r = R).
Configuration constant_configuration(const ModelSpec& m, const TorusGeometry& g);
void check_shape(const ModelSpec& m, const TorusGeometry& g, const Configuration& c);

// Discrete models only: per-site state index. Potts: the label. Diluted Potts:
// occupancy * q + label, so the label of an empty site is still a variable.
int discrete_site_states(const ModelSpec& m);
int discrete_state(const ModelSpec& m, const Configuration& c, Site s);
void set_discrete_state(const ModelSpec& m, Configuration& c, Site s, int k);

// c'(map(x)) = c(x), and likewise for edges.
Configuration transport(const Configuration& c, const SiteMap& map);

double torus_energy(const ModelSpec& m, const TorusGeometry& g, const Configuration& c);
double energy_density(const ModelSpec& m, const TorusGeometry& g, const Configuration& c);
double gibbs_weight(const ModelSpec& m, const TorusGeometry& g, double beta, const Configuration& c);

// Sum of every energy term that involves site s (or edge e). Differences of
// these give the change of torus_energy under a single-variable update.
double site_energy(const ModelSpec& m, const TorusGeometry& g, const Configuration& c, Site s);
double edge_energy(const Magnetostriction& m, const TorusGeometry& g, const Configuration& c, std::size_t e);

// Two-body couplings J(x - y) for the norm and boundary-sum checks.
struct PairInteraction {
    enum class Kind { cube, yukawa, powerlaw };
    Kind kind = Kind::cube;
    int d = 2;
    double mu = 1.0;        // yukawa
    double varkappa = 4.0;  // powerlaw
    // cube: coupling per nonempty set of moving coordinates (bitmask - 1), size 2^d - 1
    std::vector<double> cube_couplings;
    double spin_bound = 1.0;  // sup |(s, s')| of the inner product

    static PairInteraction cube(int d, double J = 1.0);
    static PairInteraction yukawa(int d, double mu);
    static PairInteraction powerlaw(int d, double varkappa);

    double coupling(const Coord& z) const;
};

struct NormResult {
    double partial = 0.0;     // exact sum within the cutoff
    double tail_bound = 0.0;  // rigorous upper bound on the remainder
    bool divergent = false;
};

// Number of z in Z^d with |z|_1 = n.
double l1_shell_count(int d, long n);

NormResult interaction_norm(const PairInteraction& pi, long tail_cutoff);

// Sum over x in {0..L-1}^d, y outside, of |J(x - y)| * spin_bound.
NormResult boundary_interaction_sum(const PairInteraction& pi, int L, long cutoff = 0);

}  // namespace fgap
