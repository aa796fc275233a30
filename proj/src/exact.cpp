#include "fgap/exact.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "parallel.hpp"

namespace fgap {

namespace {

constexpr double pi = std::numbers::pi;

double state_count(const std::vector<int>& radix) {
    double n = 1.0;
    for (int k : radix) n *= k;
    return n;
}

void refuse_if_over(double size, double budget, const std::string& what) {
    if (size > budget) {
        std::ostringstream os;
        os << what << ": " << size << " states exceed the budget of " << budget;
        throw Refused(os.str(), size);
    }
}

void set_variable(const ExactMeasure& meas, Configuration& c, std::size_t var, int k) {
    const auto& g = meas.geometry;
    const auto& m = meas.model;
    if (meas.grid == 0) {
        set_discrete_state(m, c, var, k);
        return;
    }
    const int G = meas.grid;
    if (var >= g.sites()) {
        const auto& ms = std::get<Magnetostriction>(m);
        c.edges[var - g.sites()] = (k + 0.5) * ms.r_max / G;
        return;
    }
    auto angle = [&](int j) { return wrap_angle(-pi + (j + 0.5) * 2.0 * pi / G + meas.origin); };
    if (std::holds_alternative<DilutedXY>(m)) {
        c.occupancy[var] = static_cast<std::uint8_t>(k / G);
        c.angles[var] = angle(k % G);
    } else if (std::holds_alternative<Magnetostriction>(m)) {
        c.labels[var] = k == 0 ? 1 : -1;
    } else {
        c.angles[var] = angle(k);
    }
}

void load(const ExactMeasure& meas, std::size_t idx, Configuration& c) {
    for (std::size_t v = 0; v < meas.radix.size(); ++v) {
        int k = meas.radix[v];
        set_variable(meas, c, v, static_cast<int>(idx % k));
        idx /= k;
    }
}

// Fills energies, weights and log_z; log_cell is the log volume of one grid cell.
void finish_measure(ExactMeasure& meas, double log_cell) {
    const std::size_t n = static_cast<std::size_t>(state_count(meas.radix));
    meas.energies.assign(n, 0.0);
    meas.weights.assign(n, 0.0);
    const std::size_t chunk = 1 << 14;
    detail::parallel_for((n + chunk - 1) / chunk, [&](std::size_t ch) {
        Configuration c = constant_configuration(meas.model, meas.geometry);
        for (std::size_t i = ch * chunk; i < std::min(n, (ch + 1) * chunk); ++i) {
            load(meas, i, c);
            meas.energies[i] = torus_energy(meas.model, meas.geometry, c);
        }
    });
    double emin = *std::min_element(meas.energies.begin(), meas.energies.end());
    double shift = -meas.beta * emin;
    double total = detail::chunked_sum(n, [&](std::size_t a, std::size_t b) {
        double s = 0.0;
        for (std::size_t i = a; i < b; ++i) {
            meas.weights[i] = std::exp(-meas.beta * meas.energies[i] - shift);
            s += meas.weights[i];
        }
        return s;
    });
    for (auto& w : meas.weights) w /= total;
    meas.log_z = shift + std::log(total) + log_cell;
}

std::size_t block_state_count(int k, std::size_t sites) {
    double n = std::pow(static_cast<double>(k), static_cast<double>(sites));
    return n > double(1 << 22) ? 0 : static_cast<std::size_t>(n);
}

std::vector<std::uint8_t> truth_table(const ExactMeasure& meas, const BlockEvent& a, const BlockShape& shape, std::size_t count) {
    const int k = discrete_site_states(meas.model);
    LocalBlock blk(meas.model, shape.d, shape.side - 1);
    std::vector<std::uint8_t> out(count);
    for (std::size_t idx = 0; idx < count; ++idx) {
        std::size_t r = idx;
        for (std::size_t u = 0; u < shape.sites; ++u) {
            set_discrete_state(meas.model, blk.config, u, static_cast<int>(r % k));
            r /= k;
        }
        out[idx] = a.predicate(blk.view());
    }
    return out;
}

// Mass of a subset relative to the total mass summed in the same order, so the
// whole space has probability exactly 1.
double total_fraction(const ExactMeasure& meas, const std::function<double(std::size_t, std::size_t)>& part) {
    double num = detail::chunked_sum(meas.size(), part);
    double den = detail::chunked_sum(meas.size(), [&](std::size_t a, std::size_t b) {
        double s = 0.0;
        for (std::size_t i = a; i < b; ++i)
            if (meas.weights[i] != 0.0) s += meas.weights[i];
        return s;
    });
    return num / den;
}

void check_factor_point(const TorusGeometry& g, const Coord& t) {
    if (static_cast<int>(t.size()) != g.d()) throw std::domain_error("factor point has the wrong dimension");
    for (int v : t)
        if (v < 0 || v >= g.factor_side()) throw std::domain_error("factor point outside the factor torus");
}

}  // namespace

double ExactMeasure::z() const { return std::exp(log_z); }

Configuration ExactMeasure::configuration(std::size_t idx) const {
    Configuration c = constant_configuration(model, geometry);
    load(*this, idx, c);
    return c;
}

double ExactMeasure::expectation(const std::function<double(const Configuration&)>& f) const {
    Configuration c = constant_configuration(model, geometry);
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
        if (weights[i] == 0.0) continue;
        load(*this, i, c);
        s += weights[i] * f(c);
    }
    return s;
}

double ExactMeasure::mean_energy_density() const {
    double s = detail::chunked_sum(size(), [&](std::size_t a, std::size_t b) {
        double t = 0.0;
        for (std::size_t i = a; i < b; ++i) t += weights[i] * energies[i];
        return t;
    });
    return s / static_cast<double>(geometry.sites());
}

ExactMeasure enumerate_measure(const ModelSpec& m, const TorusGeometry& g, double beta, double budget) {
    if (!is_discrete(m)) throw std::domain_error("enumerate_measure needs a discrete model; use grid_measure");
    if (!(beta >= 0.0)) throw std::domain_error("beta must be nonnegative");
    validate(m, g);
    ExactMeasure meas{g, m, beta, 0, 0.0, {}, {}, {}, 0.0};
    meas.radix.assign(g.sites(), discrete_site_states(m));
    refuse_if_over(state_count(meas.radix), budget, "enumeration of " + model_name(m));
    finish_measure(meas, 0.0);
    return meas;
}

ExactMeasure grid_measure(const ModelSpec& m, const TorusGeometry& g, double beta, int G, double origin, double budget) {
    if (is_discrete(m)) throw std::domain_error("grid_measure needs a continuous model; use enumerate_measure");
    if (!(beta >= 0.0)) throw std::domain_error("beta must be nonnegative");
    if (G < 1) throw std::domain_error("grid needs at least one point");
    validate(m, g);
    ExactMeasure meas{g, m, beta, 0, 0.0, {}, {}, {}, 0.0};
    meas.grid = G;
    meas.origin = origin;
    double log_cell = 0.0;
    const double angle_cell = std::log(2.0 * pi / G);
    if (std::holds_alternative<DilutedXY>(m)) {
        meas.radix.assign(g.sites(), 2 * G);
        log_cell = angle_cell * g.sites();
    } else if (auto ms = std::get_if<Magnetostriction>(&m)) {
        meas.radix.assign(g.sites(), 2);
        meas.radix.resize(g.sites() + g.edges(), G);
        log_cell = std::log(ms->r_max / G) * g.edges();
    } else {
        meas.radix.assign(g.sites(), G);
        log_cell = angle_cell * g.sites();
    }
    refuse_if_over(state_count(meas.radix), budget, "angle grid for " + model_name(m));
    finish_measure(meas, log_cell);
    return meas;
}

double prob_disseminated(const ExactMeasure& meas, const std::vector<PlacedEvent>& events) {
    const auto& g = meas.geometry;
    std::set<Coord> seen;
    for (const auto& e : events) {
        check_factor_point(g, e.t);
        if (!seen.insert(e.t).second) throw std::domain_error("factor points in a disseminated event must be distinct");
    }
    if (events.empty()) return 1.0;
    BlockShape shape(g.d(), g.B());
    std::vector<BlockLayout> layouts;
    for (const auto& e : events) layouts.push_back(block_layout(g, shape, e.t, Placement::reflection));

    std::size_t table_size = meas.grid == 0 ? block_state_count(discrete_site_states(meas.model), shape.sites) : 0;
    if (table_size > 0) {
        const int k = discrete_site_states(meas.model);
        std::vector<std::vector<std::uint8_t>> tables;
        for (const auto& e : events) tables.push_back(truth_table(meas, e.event, shape, table_size));
        const std::size_t nsites = g.sites();
        return total_fraction(meas, [&](std::size_t a, std::size_t b) {
            std::vector<int> digit(nsites);
            double s = 0.0;
            for (std::size_t i = a; i < b; ++i) {
                if (meas.weights[i] == 0.0) continue;
                std::size_t r = i;
                for (std::size_t v = 0; v < nsites; ++v) {
                    digit[v] = static_cast<int>(r % k);
                    r /= k;
                }
                bool all = true;
                for (std::size_t j = 0; j < events.size() && all; ++j) {
                    std::size_t idx = 0;
                    for (std::size_t u = shape.sites; u-- > 0;) idx = idx * k + digit[layouts[j].sites[u]];
                    all = tables[j][idx] != 0;
                }
                if (all) s += meas.weights[i];
            }
            return s;
        });
    }
    return total_fraction(meas, [&](std::size_t a, std::size_t b) {
        Configuration c = constant_configuration(meas.model, g);
        double s = 0.0;
        for (std::size_t i = a; i < b; ++i) {
            if (meas.weights[i] == 0.0) continue;
            load(meas, i, c);
            bool all = true;
            for (std::size_t j = 0; j < events.size() && all; ++j) all = events[j].event.predicate(BlockView{&shape, &layouts[j], &c});
            if (all) s += meas.weights[i];
        }
        return s;
    });
}

double prob_full_dissemination(const ExactMeasure& meas, const BlockEvent& a) {
    std::vector<PlacedEvent> all;
    for (std::size_t k = 0; k < meas.geometry.factor_points(); ++k) all.push_back({meas.geometry.factor_coords(k), a});
    return prob_disseminated(meas, all);
}

double p_finite(const ExactMeasure& meas, const BlockEvent& a) {
    double full = prob_full_dissemination(meas, a);
    return std::pow(full, 1.0 / static_cast<double>(meas.geometry.factor_points()));
}

double p_finite(const BlockEvent& a, const TorusGeometry& g, const ModelSpec& m, double beta, int grid) {
    if (is_discrete(m)) return p_finite(enumerate_measure(m, g, beta), a);
    return p_finite(grid_measure(m, g, beta, grid), a);
}

ChessboardReport chessboard_check(const ExactMeasure& meas, const std::vector<PlacedEvent>& events) {
    ChessboardReport r;
    r.lhs = prob_disseminated(meas, events);
    r.rhs = 1.0;
    for (const auto& e : events) r.rhs *= p_finite(meas, e.event);
    r.margin = r.lhs - r.rhs;
    r.pass = r.margin <= 1e-10;
    return r;
}

RpReport rp_gram_check(const ExactMeasure& meas, const PlaneSpec& plane, int depth, std::size_t max_block) {
    if (meas.grid != 0) throw std::domain_error("rp_gram_check needs an enumerated discrete measure");
    const auto& g = meas.geometry;
    SiteMap theta = plane_reflection(g, plane);
    auto clean = [&](const std::vector<Site>& S) {
        std::set<Site> in(S.begin(), S.end());
        for (Site s : S)
            if (in.count(theta(s)) && theta(s) != s) return false;
        return true;
    };
    std::vector<Site> S;
    if (depth < 0) {
        for (depth = g.L() / 2; depth >= 0; --depth) {
            S = half_space_sites(g, plane, depth);
            if (clean(S)) break;
        }
    } else {
        S = half_space_sites(g, plane, depth);
        if (!clean(S)) throw std::domain_error("half-space meets its mirror image off the plane");
    }
    std::vector<Site> fixed, moving;
    for (Site s : S) (theta(s) == s ? fixed : moving).push_back(s);

    const int k = discrete_site_states(meas.model);
    double nb = std::pow(double(k), double(fixed.size())), nf = std::pow(double(k), double(moving.size()));
    if (nf > double(max_block) || nb * nf * nf > 1e8)
        throw Refused("Gram matrix blocks too large for the half-space", nb * nf * nf);
    const std::size_t blocks = static_cast<std::size_t>(nb), n = static_cast<std::size_t>(nf);

    std::vector<Eigen::MatrixXd> M(blocks, Eigen::MatrixXd::Zero(n, n));
    std::vector<int> digit(g.sites());
    for (std::size_t i = 0; i < meas.size(); ++i) {
        std::size_t r = i;
        for (std::size_t v = 0; v < g.sites(); ++v) {
            digit[v] = static_cast<int>(r % k);
            r /= k;
        }
        std::size_t f = 0, a = 0, b = 0;
        for (Site s : fixed) f = f * k + digit[s];
        for (Site s : moving) {
            a = a * k + digit[s];
            b = b * k + digit[theta(s)];
        }
        M[f](a, b) += meas.weights[i];
    }

    RpReport rep;
    rep.depth = depth;
    rep.half_space = S.size();
    rep.fixed = fixed.size();
    rep.blocks = blocks;
    rep.block_size = n;
    rep.min_eigenvalue = std::numeric_limits<double>::infinity();
    for (const auto& B : M) {
        rep.asymmetry = std::max(rep.asymmetry, (B - B.transpose()).cwiseAbs().maxCoeff());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (B + B.transpose()), Eigen::EigenvaluesOnly);
        rep.min_eigenvalue = std::min(rep.min_eigenvalue, es.eigenvalues().minCoeff());
    }
    rep.pass = rep.asymmetry <= 1e-10 && rep.min_eigenvalue >= -1e-10;
    return rep;
}

BlockEvent table_event(std::string name, const ModelSpec& m, int d, int B, std::vector<std::uint8_t> truth) {
    if (!is_discrete(m)) throw std::domain_error("table events need a discrete model");
    BlockShape shape(d, B);
    const int k = discrete_site_states(m);
    if (truth.size() != block_state_count(k, shape.sites)) throw std::domain_error("truth table has the wrong size");
    BlockEvent e;
    e.name = std::move(name);
    e.reflection_symmetric = false;
    e.predicate = [m, k, truth = std::move(truth)](const BlockView& v) {
        std::size_t idx = 0;
        for (std::size_t u = v.shape->sites; u-- > 0;) idx = idx * k + discrete_state(m, *v.config, v.layout->sites[u]);
        return truth[idx] != 0;
    };
    return e;
}

BlockEvent random_table_event(std::string name, const ModelSpec& m, int d, int B, double density, std::mt19937_64& rng) {
    std::size_t n = block_state_count(discrete_site_states(m), BlockShape(d, B).sites);
    std::bernoulli_distribution coin(density);
    std::vector<std::uint8_t> truth(n);
    for (auto& t : truth) t = coin(rng);
    return table_event(std::move(name), m, d, B, std::move(truth));
}

std::string pattern_name(BondPattern p) {
    switch (p) {
    case BondPattern::all: return "all";
    case BondPattern::so: return "so";
    case BondPattern::wo: return "wo";
    case BondPattern::dis: return "dis";
    case BondPattern::mix: return "mix";
    }
    return "?";
}

namespace {

using Intervals = std::vector<std::pair<double, double>>;

// Allowed values of a wrapped bond gap in [-pi, pi] for one bond class.
Intervals class_set(BondPattern cls, double lo, double hi) {
    switch (cls) {
    case BondPattern::all: return {{-pi, pi}};
    case BondPattern::so: return lo >= pi ? Intervals{{-pi, pi}} : Intervals{{-lo, lo}};
    case BondPattern::wo: {
        double top = std::min(hi, pi);
        if (lo >= top) return {};
        return {{-top, -lo}, {lo, top}};
    }
    case BondPattern::dis:
        if (hi >= pi) return {};
        return {{-pi, -hi}, {hi, pi}};
    default: return {};
    }
}

// {w : wrap(w - s) in set}, as sorted intervals of [-pi, pi].
Intervals shifted(const Intervals& set, double s) {
    Intervals out;
    for (auto [a, b] : set) {
        double x = a + s, y = b + s;
        double k = std::floor((x + pi) / (2 * pi));
        x -= 2 * pi * k;
        y -= 2 * pi * k;
        if (y <= pi) {
            out.push_back({x, y});
        } else {
            out.push_back({x, pi});
            out.push_back({-pi, y - 2 * pi});
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

Intervals intersect(const Intervals& A, const Intervals& B) {
    Intervals out;
    for (auto [a0, a1] : A)
        for (auto [b0, b1] : B) {
            double x = std::max(a0, b0), y = std::min(a1, b1);
            if (y > x) out.push_back({x, y});
        }
    return out;
}

// Splits every interval at the given points (already wrapped into [-pi, pi]).
Intervals split_at(const Intervals& set, std::initializer_list<double> cuts) {
    Intervals out;
    for (auto [a, b] : set) {
        std::vector<double> pts{a, b};
        for (double c : cuts)
            if (c > a && c < b) pts.push_back(c);
        std::sort(pts.begin(), pts.end());
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) out.push_back({pts[i], pts[i + 1]});
    }
    return out;
}

// Midpoint rule in t after x = a + (b - a)(t - sin(2 pi t)/(2 pi)), which
// clusters nodes at both ends where the integrand peaks.
template <class F>
double midpoint(const Intervals& set, int G, F&& f) {
    double s = 0.0;
    for (auto [a, b] : set) {
        double len = b - a;
        for (int j = 0; j < G; ++j) {
            double t = (j + 0.5) / G;
            double x = a + len * (t - std::sin(2 * pi * t) / (2 * pi));
            s += len * (1.0 - std::cos(2 * pi * t)) / G * f(x);
        }
    }
    return s;
}

}  // namespace

QuadratureResult constrained_partition(const NonlinearFerromagnet& m, const TorusGeometry& g, double beta, BondPattern pattern,
                                       double C, int G) {
    if (g.d() != 2 || g.L() != 2) throw std::domain_error("constrained_partition is implemented for the L = 2, d = 2 torus");
    if (!(m.p >= 1.0)) throw std::domain_error("nlvm needs p >= 1");
    if (!(C > 0.0)) throw std::domain_error("C must be positive");
    if (!(beta >= 0.0)) throw std::domain_error("beta must be nonnegative");
    if (G < 1) throw std::domain_error("grid needs at least one point");
    const double sp = std::sqrt(m.p);
    const double lo = 1.0 / (C * sp), hi = C / sp;
    // sites a=(0,0), b=(1,0), c=(0,1), e=(1,1); u = phi_b - phi_a, v = phi_c - phi_a,
    // w = phi_e - phi_a; each neighbour pair is joined by two torus bonds.
    BondPattern cu = pattern, cv = pattern, cwu = pattern, cwv = pattern;
    if (pattern == BondPattern::mix) {
        cu = cv = BondPattern::so;
        cwu = cwv = BondPattern::dis;
    }
    Intervals su = class_set(cu, lo, hi), sv = class_set(cv, lo, hi), swu = class_set(cwu, lo, hi), swv = class_set(cwv, lo, hi);
    QuadratureResult res;
    if (su.empty() || sv.empty() || swu.empty() || swv.empty()) {
        std::ostringstream os;
        os << "empty constraint set for pattern " << pattern_name(pattern) << " at C=" << C << ", p=" << m.p;
        res.diagnostic = os.str();
        return res;
    }
    auto f = [&](double x) { return std::pow((1.0 + std::cos(x)) / 2.0, m.p); };
    // the integrand peaks where a bond gap vanishes; put those points on interval ends
    double inner = midpoint(split_at(su, {0.0}), G, [&](double u) {
        double fu = f(u);
        Intervals wu = shifted(swu, u);
        return midpoint(split_at(sv, {0.0}), G, [&](double v) {
            double fv = f(v);
            Intervals ws = split_at(intersect(wu, shifted(swv, v)), {u, v});
            return midpoint(ws, G, [&](double w) { return std::exp(2.0 * beta * (fu + fv + f(w - u) + f(w - v))); });
        });
    });
    res.value = 2.0 * pi * inner;
    return res;
}

}  // namespace fgap
