#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fgap/lattice.hpp"
#include "fgap/models.hpp"

namespace fgap {

// Read access to one placed block of a configuration.
struct BlockView {
    const BlockShape* shape;
    const BlockLayout* layout;
    const Configuration* config;

    int label(std::size_t u) const { return config->labels[layout->sites[u]]; }
    bool occupied(std::size_t u) const { return config->occupancy[layout->sites[u]] != 0; }
    double angle(std::size_t u) const { return config->angles[layout->sites[u]]; }
    double edge(std::size_t u, int dir) const { return config->edges[layout->edges[shape->edge_slot(u, dir)]]; }
};

// A configuration of a single standalone block (identity layout).
struct LocalBlock {
    BlockShape shape;
    BlockLayout layout;
    Configuration config;

    LocalBlock(const ModelSpec& m, int d, int B);
    BlockView view() const { return {&shape, &layout, &config}; }
};

// Block-local constraints used to prove disjointness of events analytically.
// An event carrying constraints must imply all of them.
struct EventConstraints {
    enum class Field { none, label, occupancy };
    Field field = Field::none;
    std::vector<std::vector<int>> site_values;  // allowed values per local site; empty = any

    struct AnglePair {
        std::size_t u, v;
        double lo, hi;  // |phi_u - phi_v| reduced to [0, pi] lies in [lo, hi]
    };
    std::vector<AnglePair> angle_pairs;

    struct EdgeRange {
        std::size_t slot;
        double lo, hi;
    };
    std::vector<EdgeRange> edge_ranges;
};

using BlockPredicate = std::function<bool(const BlockView&)>;
using BlockSampler = std::function<void(LocalBlock&, std::mt19937_64&)>;

struct BlockEvent {
    std::string name;
    BlockPredicate predicate;
    bool reflection_symmetric = true;
    std::optional<EventConstraints> constraints;
    BlockSampler sampler;  // draws a block satisfying the event; optional

    bool operator()(const BlockView& v) const { return predicate(v); }
};

BlockEvent whole_space_event();
BlockEvent empty_event();
BlockEvent union_event(const BlockEvent& a, const BlockEvent& b);
BlockEvent complement_event(const BlockEvent& a, std::string name);

struct GoodFamily {
    std::vector<BlockEvent> goods;
    int B = 1;

    // Index of the first good event that holds, or -1 for the bad event.
    int classify(const BlockView& v) const;
    BlockEvent bad() const;
    std::vector<std::string> names() const;
};

// q >= 3: dis, ord_1..ord_q. q = 2: the disordered event splits into the
// two checkerboards dis_a (even sites carry label 1) and dis_b.
GoodFamily potts_events(int q);
// Potts labels 0..q-1 are named 1..q.
BlockEvent potts_ordered(int label);
BlockEvent potts_disordered();

// dense (or dense_1..dense_q for diluted Potts), even, odd on 1-blocks.
GoodFamily diluted_events(const ModelSpec& m, int d = 2);

GoodFamily o2af_events(double kappa, int B);

enum class BondClass { strongly_ordered, weakly_ordered, disordered };
BondClass classify_bond(double dphi, double C, double p);
GoodFamily nlvm_events(double C, double p, int d = 2);
std::pair<BlockEvent, BlockEvent> nlvm_bad_split(double C, double p);

GoodFamily magnetostriction_events(double eta, double eps, double r_max, int d = 2);

// Family used by scans and checks when the config does not override it.
struct EventParams {
    double o2af_kappa = 0.1;
    int o2af_B = 4;
    double nlvm_C = 3.0;
    double magneto_eta = 0.9;
    double magneto_eps = 0.2;
};
GoodFamily default_family(const ModelSpec& m, const EventParams& params = {}, int d = 2);

// R_N(A) over the factor points {0..N-1}^d. Translation placement is the
// textbook τ_{Bx}; reflection placement evaluates A on θ_x instead.
double block_density(const BlockEvent& a, const TorusGeometry& g, const Configuration& c, int N,
                     Placement placement = Placement::translation);

struct FamilyReport {
    bool pass = true;
    std::string method;  // "exhaustive" or "analytic+randomized"
    std::vector<std::string> findings;
    std::optional<std::string> witness;
    std::size_t samples = 0;
};

struct FamilyCheckOptions {
    std::size_t random_samples = 1000000;
    std::uint64_t seed = 1;
    std::size_t exhaustive_budget = 10000000;
};

// Conditions (1) and (2) of the good-family definition on blocks of g.
FamilyReport check_family(const GoodFamily& f, const ModelSpec& m, const TorusGeometry& g,
                          const FamilyCheckOptions& opt = {});

}  // namespace fgap
