#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fgap {

struct BoundReport {
    std::string name;
    std::vector<std::pair<std::string, double>> parameters;
    double value = 0.0;
    bool valid = true;       // preconditions met
    std::string formula;
    std::string error;       // violated hypothesis when !valid
};

// Upper bound on p_beta(bad) for the q-state Potts model:
// [q^{d - 2^{-(d-1)}} / (q - 2d)^d]^{1/(2d)}. Requires q > 2d.
double potts_bad_bound(double q, int d);

struct EnerbdConstants {
    double a = 0.25;
    double b = 0.0;
    double argmax = 0.0;
};
// a = 1/4 (the x -> 0 limit); b = max over (0, 1] of -ln((1 + cos x)/2) / x^2.
EnerbdConstants enerbd_constants();

struct SandwichCheck {
    double max_violation = 0.0;  // max of lower - mid and mid - upper, >= 0 when violated
    bool strict_interior = true; // both inequalities strict away from x = 0
    int points = 0;
};
// exp(-b x^2) <= (1 + cos x)/2 <= exp(-a x^2) on an evenly spaced grid of [-1, 1].
SandwichCheck enerbd_sandwich(double a, double b, int points = 10000);

struct NlvmBounds {
    double pwo = 0.0, pmix = 0.0, gdis = 0.0, gso = 0.0;
    double pwo_branch[2] = {0.0, 0.0};   // the two arguments of the min before ^(1/4)
    double pmix_branch[2] = {0.0, 0.0};  // before ^(1/2)
};
// Requires C <= sqrt(p), kappa in (0, 1), beta >= 0, 0 < a <= b.
NlvmBounds nlvm_bounds(double beta, double C, double p, double kappa, double a, double b);

struct PartitionBounds {
    double cells = 0.0;  // |T_L| = L^2
    double dis_lower = 0.0, dis_upper = 0.0;
    double so_lower = 0.0, so_upper = 0.0;
    double wo_upper = 0.0;
    double mix_upper = 0.0;
    // natural logs of the same quantities (the values overflow quickly in L)
    double log_dis_lower = 0.0, log_dis_upper = 0.0;
    double log_so_lower = 0.0, log_so_upper = 0.0;
    double log_wo_upper = 0.0, log_mix_upper = 0.0;
};
// d = 2 torus of side L. kappa may equal 1 here (the lower bound on the
// strongly ordered partition function is used with kappa = 1).
PartitionBounds partition_bound_values(int L, double beta, double C, double p, double kappa, double a, double b);

// --- block grids Lambda_{N-1} = {0..N-1}^d (no periodicity) ---

enum class SeparatorConvention { all, no_singletons };

constexpr int max_separator_sites = 20;

// Connected subsets of the box meeting every nearest-neighbour path from x to
// y, as bitmasks over the row-major site index. Throws Refused past N^d = 20.
std::vector<std::uint32_t> separating_sets(int x, int y, int N, int d,
                                           SeparatorConvention conv = SeparatorConvention::all);
std::vector<int> box_coords(int site, int N, int d);
int box_index(const std::vector<int>& coords, int N);

double contour_sum(int x, int y, int N, int d, double pval, SeparatorConvention conv = SeparatorConvention::all);

struct C1Fit {
    double c1 = 0.0;
    int N = 0, x = 0, y = 0;
    double pval = 0.0;
};
std::vector<double> default_pval_grid();
// max over enumerable N >= 2, pairs x != y and the pval grid of contour_sum / pval^d.
C1Fit c1_fit(int d, SeparatorConvention conv = SeparatorConvention::no_singletons,
             const std::vector<double>& pvals = default_pval_grid());

// (eps^2 / (4 c1))^{1/d}; eps in (0, 1/2), c1 > 0.
double delta_for_epsilon(double eps, int d, double c1);

struct QStar {
    double q_star = 0.0;  // potts_bad_bound(q, d) < delta for every q > q_star
    double delta = 0.0;
    double c1 = 0.0;
};
QStar potts_q_star(double eps, int d, double c1);

// 0 = bad, 1..r = good_i.
struct BlockLabeling {
    int N = 2, d = 2, r = 1;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    void validate() const;
};

// Ordered pairs x != y not joined by a path of good blocks (any good type).
long y_n_count(const BlockLabeling& lab);
bool c_n_holds(const BlockLabeling& lab, double eps);
bool e_n_holds(const BlockLabeling& lab, double eps);
// No two adjacent blocks carry different good labels.
bool realizable(const BlockLabeling& lab);

struct InclusionCheck {
    bool pass = true;
    long checked = 0;
    long filtered = 0;
    std::optional<BlockLabeling> counterexample;
};
InclusionCheck lemma_incl_bruteforce(int N, int d, int r, double eps, bool filter = true, double budget = 1e8);

// Fraction of the M^d disjoint N-superblocks of an (M N)-side labeling on which E_N holds.
double r_mn_fraction(const BlockLabeling& lab, int M, int N, double eps);

}  // namespace fgap
