#include "fgap/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/tools/minima.hpp>

#include "fgap/exact.hpp"
#include "parallel.hpp"

namespace fgap {

namespace {

constexpr double pi = std::numbers::pi;

double enerbd_ratio(double x) { return -std::log((1.0 + std::cos(x)) / 2.0) / (x * x); }

void require(bool ok, const char* hypothesis) {
    if (!ok) throw std::domain_error(std::string("hypothesis violated: ") + hypothesis);
}

void check_common(double C, double p, double beta, double a, double b) {
    require(p > 0.0 && C > 0.0, "C > 0 and p > 0");
    require(C <= std::sqrt(p), "C <= sqrt(p)");
    require(beta >= 0.0, "beta >= 0");
    require(a > 0.0 && a <= b, "0 < a <= b");
}

struct Box {
    int N, d, n;
    std::vector<std::uint32_t> nbr;  // neighbour masks

    Box(int N_, int d_) : N(N_), d(d_), n(1) {
        if (N < 1 || d < 1) throw std::domain_error("box needs N >= 1 and d >= 1");
        double sites = std::pow(static_cast<double>(N), d);
        if (sites > max_separator_sites) throw Refused("separator enumeration limited to 20 sites", std::exp2(sites));
        for (int i = 0; i < d; ++i) n *= N;
        nbr.assign(n, 0);
        for (int s = 0; s < n; ++s) {
            auto c = box_coords(s, N, d);
            for (int i = 0; i < d; ++i)
                for (int step : {-1, 1}) {
                    auto e = c;
                    e[i] += step;
                    if (e[i] < 0 || e[i] >= N) continue;
                    nbr[s] |= std::uint32_t{1} << box_index(e, N);
                }
        }
    }

    // Sites reachable from `from` inside `allowed`.
    std::uint32_t reach(int from, std::uint32_t allowed) const {
        std::uint32_t seen = std::uint32_t{1} << from, frontier = seen;
        while (frontier) {
            std::uint32_t next = 0;
            for (std::uint32_t f = frontier; f; f &= f - 1) next |= nbr[__builtin_ctz(f)];
            next &= allowed & ~seen;
            seen |= next;
            frontier = next;
        }
        return seen;
    }

    bool connected(std::uint32_t set) const {
        if (!set) return false;
        return reach(__builtin_ctz(set), set) == set;
    }

    std::uint32_t full() const { return n == 32 ? ~std::uint32_t{0} : (std::uint32_t{1} << n) - 1; }
};

std::vector<std::uint32_t> connected_subsets(const Box& box) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t s = 1; s <= box.full(); ++s)
        if (box.connected(s)) out.push_back(s);
    return out;
}

bool separates(const Box& box, std::uint32_t gamma, int x, int y) {
    std::uint32_t bx = std::uint32_t{1} << x, by = std::uint32_t{1} << y;
    if ((gamma & bx) || (gamma & by)) return true;
    return !(box.reach(x, box.full() & ~gamma) & by);
}

bool keep(std::uint32_t gamma, int x, int y, SeparatorConvention conv) {
    if (conv == SeparatorConvention::all) return true;
    return gamma != (std::uint32_t{1} << x) && gamma != (std::uint32_t{1} << y);
}

}  // namespace

double potts_bad_bound(double q, int d) {
    require(d >= 1, "d >= 1");
    require(q > 2.0 * d, "q > 2d");
    double expo = d - std::exp2(-(d - 1));
    return std::exp((expo * std::log(q) - d * std::log(q - 2.0 * d)) / (2.0 * d));
}

EnerbdConstants enerbd_constants() {
    EnerbdConstants c;
    // Coarse grid first so that Brent starts near the global maximum; the
    // endpoint x = 1 is included explicitly.
    const int n = 1000;
    double best_x = 1.0, best = enerbd_ratio(1.0);
    for (int k = 1; k < n; ++k) {
        double x = static_cast<double>(k) / n;
        double v = enerbd_ratio(x);
        if (v > best) best = v, best_x = x;
    }
    double lo = std::max(1e-3, best_x - 1.0 / n), hi = std::min(1.0, best_x + 1.0 / n);
    auto r = boost::math::tools::brent_find_minima([](double x) { return -enerbd_ratio(x); }, lo, hi, 50);
    c.b = std::max(best, -r.second);
    c.argmax = -r.second >= best ? r.first : best_x;
    return c;
}

SandwichCheck enerbd_sandwich(double a, double b, int points) {
    if (points < 2) throw std::domain_error("sandwich grid needs >= 2 points");
    SandwichCheck chk;
    chk.points = points;
    for (int k = 0; k < points; ++k) {
        double x = -1.0 + 2.0 * k / (points - 1);
        double mid = (1.0 + std::cos(x)) / 2.0;
        double lower = std::exp(-b * x * x), upper = std::exp(-a * x * x);
        chk.max_violation = std::max({chk.max_violation, lower - mid, mid - upper});
        // b is attained at the endpoints, so strictness is checked on the open interval
        bool interior = std::abs(x) > 1e-3 && std::abs(x) < 1.0 - 1e-9;
        if (interior && !(lower < mid && mid < upper)) chk.strict_interior = false;
    }
    return chk;
}

NlvmBounds nlvm_bounds(double beta, double C, double p, double kappa, double a, double b) {
    check_common(C, p, beta, a, b);
    require(kappa > 0.0 && kappa < 1.0, "kappa in (0,1)");
    const double sp = std::sqrt(p), C2 = C * C;
    NlvmBounds r;
    r.pwo_branch[0] = C2 / kappa * std::exp(-2.0 * beta * (std::exp(-b * kappa * kappa / C2) - std::exp(-a / C2)));
    r.pwo_branch[1] = C / (pi * sp) * std::exp(2.0 * beta * std::exp(-a / C2));
    r.pwo = 4.0 * std::pow(std::min(r.pwo_branch[0], r.pwo_branch[1]), 0.25);
    r.pmix_branch[0] = std::exp(-2.0 * beta * (1.5 * std::exp(-b / C2) - 1.0 - std::exp(-a * C2)));
    r.pmix_branch[1] = std::exp(2.0 * beta) * std::pow(1.0 / (pi * C * sp), 0.75);
    r.pmix = 4.0 * std::sqrt(std::min(r.pmix_branch[0], r.pmix_branch[1]));
    r.gdis = pi * C * sp * std::exp(-2.0 * beta * (std::exp(-b / C2) - std::exp(-a * C2)));
    r.gso = std::exp(2.0 * beta) / (pi * C * sp);
    return r;
}

PartitionBounds partition_bound_values(int L, double beta, double C, double p, double kappa, double a, double b) {
    check_common(C, p, beta, a, b);
    require(kappa > 0.0 && kappa <= 1.0, "kappa in (0,1]");
    require(L >= 2 && L % 2 == 0, "L even and >= 2");
    PartitionBounds r;
    const double T = static_cast<double>(L) * L;
    const double sp = std::sqrt(p), l2pi = std::log(2.0 * pi), lso = std::log(2.0 / (C * sp));
    r.cells = T;
    r.log_dis_lower = T * l2pi;
    r.log_dis_upper = T * l2pi + 2.0 * beta * std::exp(-a * C * C) * T;
    r.log_so_lower = T * (2.0 * beta * std::exp(-b * kappa * kappa / (C * C)) + std::log(2.0 * kappa / (C * sp)));
    r.log_so_upper = l2pi + 2.0 * beta * T + (T - 1.0) * lso;
    r.log_wo_upper = l2pi + T * (2.0 * beta * std::exp(-a / (C * C)) + std::log(2.0 * C / sp));
    r.log_mix_upper = l2pi + beta * (1.0 + std::exp(-a * C * C)) * T + T / 4.0 * l2pi + (0.75 * T - 1.0) * lso;
    r.dis_lower = std::exp(r.log_dis_lower);
    r.dis_upper = std::exp(r.log_dis_upper);
    r.so_lower = std::exp(r.log_so_lower);
    r.so_upper = std::exp(r.log_so_upper);
    r.wo_upper = std::exp(r.log_wo_upper);
    r.mix_upper = std::exp(r.log_mix_upper);
    return r;
}

std::vector<int> box_coords(int site, int N, int d) {
    std::vector<int> c(d);
    for (int i = 0; i < d; ++i) {
        c[i] = site % N;
        site /= N;
    }
    return c;
}

int box_index(const std::vector<int>& coords, int N) {
    int idx = 0;
    for (std::size_t i = coords.size(); i-- > 0;) idx = idx * N + coords[i];
    return idx;
}

std::vector<std::uint32_t> separating_sets(int x, int y, int N, int d, SeparatorConvention conv) {
    Box box(N, d);
    if (x < 0 || y < 0 || x >= box.n || y >= box.n || x == y) throw std::domain_error("separating sets need distinct x, y in the box");
    std::vector<std::uint32_t> out;
    for (std::uint32_t s : connected_subsets(box))
        if (keep(s, x, y, conv) && separates(box, s, x, y)) out.push_back(s);
    return out;
}

double contour_sum(int x, int y, int N, int d, double pval, SeparatorConvention conv) {
    if (!(pval > 0.0 && pval < 1.0)) throw std::domain_error("contour sum needs pval in (0,1)");
    double s = 0.0;
    for (std::uint32_t g : separating_sets(x, y, N, d, conv)) s += std::pow(pval, __builtin_popcount(g));
    return s;
}

std::vector<double> default_pval_grid() { return {1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 1e-1}; }

C1Fit c1_fit(int d, SeparatorConvention conv, const std::vector<double>& pvals) {
    if (d < 1) throw std::domain_error("c1 fit needs d >= 1");
    C1Fit best;
    for (int N = 2; std::pow(static_cast<double>(N), d) <= max_separator_sites; ++N) {
        Box box(N, d);
        auto subsets = connected_subsets(box);
        for (int x = 0; x < box.n; ++x)
            for (int y = x + 1; y < box.n; ++y) {
                // histogram of separator sizes for this pair
                std::vector<double> sizes(box.n + 1, 0.0);
                for (std::uint32_t s : subsets)
                    if (keep(s, x, y, conv) && separates(box, s, x, y)) sizes[__builtin_popcount(s)] += 1.0;
                for (double pv : pvals) {
                    double sum = 0.0;
                    for (int k = 1; k <= box.n; ++k) sum += sizes[k] * std::pow(pv, k);
                    double ratio = sum / std::pow(pv, d);
                    if (ratio > best.c1) best = {ratio, N, x, y, pv};
                }
            }
    }
    return best;
}

double delta_for_epsilon(double eps, int d, double c1) {
    if (!(eps > 0.0 && eps < 0.5)) throw std::domain_error("delta needs eps in (0, 1/2)");
    if (!(c1 > 0.0) || d < 1) throw std::domain_error("delta needs c1 > 0 and d >= 1");
    return std::pow(eps * eps / (4.0 * c1), 1.0 / d);
}

QStar potts_q_star(double eps, int d, double c1) {
    QStar r;
    r.c1 = c1;
    r.delta = delta_for_epsilon(eps, d, c1);
    // The bound decreases strictly in q, so the threshold is a root.
    double lo = 2.0 * d, hi = 4.0 * d;
    while (potts_bad_bound(hi, d) >= r.delta) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw std::domain_error("no threshold below 1e300");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        (potts_bad_bound(mid, d) >= r.delta ? lo : hi) = mid;
    }
    r.q_star = hi;
    return r;
}

void BlockLabeling::validate() const {
    if (N < 1 || d < 1 || r < 1) throw std::domain_error("labeling needs N, d, r >= 1");
    double n = std::pow(static_cast<double>(N), d);
    if (static_cast<double>(labels.size()) != n) throw std::domain_error("labeling size must be N^d");
    for (int l : labels)
        if (l < 0 || l > r) throw std::domain_error("labels must lie in 0..r");
}

namespace {

std::vector<std::vector<int>> box_neighbors(int N, int d) {
    int n = 1;
    for (int i = 0; i < d; ++i) n *= N;
    std::vector<std::vector<int>> nb(n);
    for (int s = 0; s < n; ++s) {
        auto c = box_coords(s, N, d);
        for (int i = 0; i < d; ++i)
            for (int step : {-1, 1}) {
                auto e = c;
                e[i] += step;
                if (e[i] >= 0 && e[i] < N) nb[s].push_back(box_index(e, N));
            }
    }
    return nb;
}

long y_count(const std::vector<int>& labels, const std::vector<std::vector<int>>& nb) {
    const long n = static_cast<long>(labels.size());
    std::vector<int> comp(labels.size(), -1);
    long connected_pairs = 0;
    std::vector<int> stack;
    for (long s = 0; s < n; ++s) {
        if (labels[s] == 0 || comp[s] >= 0) continue;
        long size = 0;
        stack.assign(1, static_cast<int>(s));
        comp[s] = static_cast<int>(s);
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            ++size;
            for (int v : nb[u])
                if (labels[v] != 0 && comp[v] < 0) {
                    comp[v] = static_cast<int>(s);
                    stack.push_back(v);
                }
        }
        connected_pairs += size * (size - 1);
    }
    return n * (n - 1) - connected_pairs;
}

bool e_holds(const std::vector<int>& labels, int r, double eps) {
    std::vector<double> frac(r + 1, 0.0);
    for (int l : labels) frac[l] += 1.0;
    for (double& f : frac) f /= static_cast<double>(labels.size());
    if (frac[0] > eps) return true;
    int above = 0;
    for (int i = 1; i <= r; ++i) above += frac[i] > eps;
    return above >= 2;
}

bool c_holds(long y, std::size_t n, double eps) {
    double t = eps * static_cast<double>(n);
    return static_cast<double>(y) >= t * t;
}

bool realizable_with(const std::vector<int>& labels, const std::vector<std::vector<int>>& nb) {
    for (std::size_t u = 0; u < labels.size(); ++u)
        for (int v : nb[u])
            if (labels[u] != 0 && labels[v] != 0 && labels[u] != labels[v]) return false;
    return true;
}

}  // namespace

long y_n_count(const BlockLabeling& lab) {
    lab.validate();
    return y_count(lab.labels, box_neighbors(lab.N, lab.d));
}

bool c_n_holds(const BlockLabeling& lab, double eps) { return c_holds(y_n_count(lab), lab.size(), eps); }

bool e_n_holds(const BlockLabeling& lab, double eps) {
    lab.validate();
    return e_holds(lab.labels, lab.r, eps);
}

bool realizable(const BlockLabeling& lab) {
    lab.validate();
    return realizable_with(lab.labels, box_neighbors(lab.N, lab.d));
}

InclusionCheck lemma_incl_bruteforce(int N, int d, int r, double eps, bool filter, double budget) {
    BlockLabeling proto{N, d, r, {}};
    int n = 1;
    for (int i = 0; i < d; ++i) n *= N;
    proto.labels.assign(n, 0);
    proto.validate();
    double total = std::pow(static_cast<double>(r + 1), n);
    if (total > budget) throw Refused("labeling enumeration exceeds budget", total);
    const auto nb = box_neighbors(N, d);
    const long count = static_cast<long>(total);

    // Chunks are scanned in order; the first counterexample in index order wins.
    const long chunk = 1 << 14;
    const long chunks = (count + chunk - 1) / chunk;
    struct Part {
        long checked = 0, filtered = 0, first_bad = -1;
    };
    std::vector<Part> parts(chunks);
    detail::parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t c) {
        Part& part = parts[c];
        std::vector<int> labels(n);
        for (long idx = static_cast<long>(c) * chunk; idx < std::min(count, (static_cast<long>(c) + 1) * chunk); ++idx) {
            long v = idx;
            for (int s = 0; s < n; ++s) labels[s] = static_cast<int>(v % (r + 1)), v /= (r + 1);
            if (filter && !realizable_with(labels, nb)) {
                ++part.filtered;
                continue;
            }
            ++part.checked;
            if (e_holds(labels, r, eps) && !c_holds(y_count(labels, nb), labels.size(), eps) && part.first_bad < 0)
                part.first_bad = idx;
        }
    });
    InclusionCheck out;
    for (const auto& p : parts) {
        out.checked += p.checked;
        out.filtered += p.filtered;
        if (p.first_bad >= 0 && !out.counterexample) {
            BlockLabeling bad = proto;
            long v = p.first_bad;
            for (int s = 0; s < n; ++s) bad.labels[s] = static_cast<int>(v % (r + 1)), v /= (r + 1);
            out.counterexample = bad;
            out.pass = false;
        }
    }
    return out;
}

double r_mn_fraction(const BlockLabeling& lab, int M, int N, double eps) {
    lab.validate();
    if (M < 1 || N < 1 || lab.N != M * N) throw std::domain_error("labeling side must equal M N");
    const int d = lab.d;
    int supers = 1, inner = 1;
    for (int i = 0; i < d; ++i) supers *= M, inner *= N;
    int hits = 0;
    std::vector<int> sub(inner);
    for (int k = 0; k < supers; ++k) {
        auto origin = box_coords(k, M, d);
        for (int u = 0; u < inner; ++u) {
            auto c = box_coords(u, N, d);
            for (int i = 0; i < d; ++i) c[i] += N * origin[i];
            sub[u] = lab.labels[box_index(c, lab.N)];
        }
        hits += e_holds(sub, lab.r, eps);
    }
    return static_cast<double>(hits) / supers;
}

}  // namespace fgap
