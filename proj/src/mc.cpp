#include "fgap/mc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "parallel.hpp"

namespace fgap {

namespace {

constexpr double pi = std::numbers::pi;

double unit(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }
double uniform_angle(std::mt19937_64& rng) { return wrap_angle(pi - 2.0 * pi * unit(rng)); }
int uniform_label(int q, std::mt19937_64& rng) { return std::uniform_int_distribution<int>(0, q - 1)(rng); }

bool has_angles(const ModelSpec& m) {
    return std::holds_alternative<O2AF>(m) || std::holds_alternative<NonlinearFerromagnet>(m) ||
           std::holds_alternative<DilutedXY>(m);
}

// Density of a window step from a to b on the circle.
double window_density(double a, double b, double w) {
    if (w >= pi) return 1.0 / (2.0 * pi);
    return std::abs(wrap_angle(b - a)) <= w ? 1.0 / (2.0 * w) : 0.0;
}

struct Stats {
    double mean = 0.0, err = 0.0;
};

Stats batch_stats(const std::vector<double>& b) {
    Stats s;
    std::size_t n = b.size();
    if (n == 0) return s;
    for (double x : b) s.mean += x;
    s.mean /= static_cast<double>(n);
    if (n < 2) return s;
    double v = 0.0;
    for (double x : b) v += (x - s.mean) * (x - s.mean);
    s.err = std::sqrt(v / static_cast<double>(n - 1) / static_cast<double>(n));
    return s;
}

// A chain that changes phase mid-run inflates its own batch errors, so the
// split-half test can miss it. Noise is instead estimated from successive
// batch differences (robust to a single step) and a step is flagged when some
// batch sits more than 6 noise units from the median.
bool has_step(const std::vector<double>& b) {
    const std::size_t n = b.size();
    if (n < 4) return false;
    std::vector<double> d(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) d[k] = std::abs(b[k + 1] - b[k]);
    auto median = [](std::vector<double> v) {
        std::size_t h = v.size() / 2;
        std::nth_element(v.begin(), v.begin() + static_cast<long>(h), v.end());
        double m = v[h];
        if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<long>(h)));
        return m;
    };
    const double noise = 1.4826 * median(d) / std::sqrt(2.0);
    const double mid = median(b);
    double worst = 0.0;
    for (double x : b) worst = std::max(worst, std::abs(x - mid));
    return worst > 6.0 * noise && worst > 1e-12;
}

void append_flag(std::string& flags, const std::string& f) {
    if (!flags.empty()) flags += ';';
    flags += f;
}

void tune(double& w, long proposed, long accepted, double cap) {
    if (proposed == 0) return;
    double rate = static_cast<double>(accepted) / static_cast<double>(proposed);
    w *= std::clamp(rate / 0.45, 0.5, 2.0);
    w = std::clamp(w, 1e-4, cap);
}

}  // namespace

std::string start_name(Start s) { return s == Start::ordered ? "ordered" : "disordered"; }

Start parse_start(const std::string& s) {
    if (s == "ordered") return Start::ordered;
    if (s == "disordered") return Start::disordered;
    throw std::invalid_argument("unknown start: " + s);
}

Configuration start_configuration(const ModelSpec& m, const TorusGeometry& g, Start start, std::mt19937_64& rng,
                                  int variant) {
    Configuration c = constant_configuration(m, g);
    const std::size_t n = g.sites();
    if (start == Start::ordered) {
        if (std::holds_alternative<O2AF>(m)) {
            int across = variant == 0 ? 1 : 0;
            for (Site s = 0; s < n; ++s) c.angles[s] = g.coords(s)[across] % 2 ? pi : 0.0;
        } else if (auto p = std::get_if<Potts>(&m)) {
            for (auto& l : c.labels) l = variant % p->q;
        } else if (auto p = std::get_if<DilutedPotts>(&m)) {
            for (auto& l : c.labels) l = variant % p->q;
        } else if (std::holds_alternative<Magnetostriction>(m)) {
            for (auto& l : c.labels) l = variant % 2 ? -1 : 1;
        }
        return c;
    }
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Potts>) {
                for (auto& l : c.labels) l = uniform_label(p.q, rng);
            } else if constexpr (std::is_same_v<T, DilutedPotts>) {
                for (Site s = 0; s < n; ++s) {
                    c.occupancy[s] = unit(rng) < 0.5;
                    c.labels[s] = uniform_label(p.q, rng);
                }
            } else if constexpr (std::is_same_v<T, DilutedXY>) {
                for (Site s = 0; s < n; ++s) {
                    c.occupancy[s] = unit(rng) < 0.5;
                    c.angles[s] = uniform_angle(rng);
                }
            } else if constexpr (std::is_same_v<T, Magnetostriction>) {
                for (auto& l : c.labels) l = unit(rng) < 0.5 ? 1 : -1;
                for (auto& r : c.edges) r = p.r_max * (1.0 - unit(rng));
            } else {
                for (auto& a : c.angles) a = uniform_angle(rng);
            }
        },
        m);
    return c;
}

ChainState make_chain(Configuration config, std::uint64_t seed, std::uint64_t chain) {
    ChainState st;
    st.config = std::move(config);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(chain), static_cast<std::uint32_t>(chain >> 32)};
    st.rng.seed(seq);
    return st;
}

Move current_value(const ModelSpec& m, const Configuration& c, Move::Kind kind, std::size_t index) {
    Move mv;
    mv.kind = kind;
    mv.index = index;
    if (kind == Move::Kind::edge) {
        mv.r = c.edges[index];
        return mv;
    }
    if (!c.labels.empty()) mv.label = c.labels[index];
    if (!c.occupancy.empty()) mv.occupancy = c.occupancy[index];
    if (!c.angles.empty()) mv.angle = c.angles[index];
    (void)m;
    return mv;
}

void apply(Configuration& c, const Move& mv) {
    if (mv.kind == Move::Kind::edge) {
        c.edges[mv.index] = mv.r;
        return;
    }
    if (!c.labels.empty()) c.labels[mv.index] = mv.label;
    if (!c.occupancy.empty()) c.occupancy[mv.index] = mv.occupancy;
    if (!c.angles.empty()) c.angles[mv.index] = mv.angle;
}

Move propose(const ModelSpec& m, const TorusGeometry& g, const Configuration& c, Move::Kind kind, std::size_t index,
             double angle_window, double edge_window, std::mt19937_64& rng) {
    (void)g;
    Move mv = current_value(m, c, kind, index);
    if (kind == Move::Kind::edge) {
        const auto& ms = std::get<Magnetostriction>(m);
        double r = c.edges[index] + edge_window * (2.0 * unit(rng) - 1.0);
        if (r > 0.0 && r <= ms.r_max) mv.r = r;
        return mv;
    }
    auto step = [&](double a) { return angle_window >= pi ? uniform_angle(rng) : wrap_angle(a + angle_window * (2.0 * unit(rng) - 1.0)); };
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Potts>) {
                mv.label = uniform_label(p.q, rng);
            } else if constexpr (std::is_same_v<T, DilutedPotts>) {
                if (unit(rng) < 0.5) mv.occupancy = mv.occupancy ? 0 : 1;
                mv.label = uniform_label(p.q, rng);
            } else if constexpr (std::is_same_v<T, DilutedXY>) {
                if (unit(rng) < 0.5) {
                    mv.occupancy = mv.occupancy ? 0 : 1;
                    mv.angle = uniform_angle(rng);
                } else {
                    mv.angle = step(mv.angle);
                }
            } else if constexpr (std::is_same_v<T, Magnetostriction>) {
                mv.label = unit(rng) < 0.5 ? 1 : -1;
            } else {
                mv.angle = step(mv.angle);
            }
        },
        m);
    return mv;
}

double proposal_density(const ModelSpec& m, const Configuration& c, const Move& mv, double angle_window,
                        double edge_window) {
    if (mv.kind == Move::Kind::edge) {
        const auto& ms = std::get<Magnetostriction>(m);
        if (!(mv.r > 0.0 && mv.r <= ms.r_max)) return 0.0;
        if (mv.r == c.edges[mv.index]) return 0.0;  // rejected draws are not counted as moves
        return std::abs(mv.r - c.edges[mv.index]) <= edge_window ? 1.0 / (2.0 * edge_window) : 0.0;
    }
    const std::size_t s = mv.index;
    return std::visit(
        [&](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Potts>) {
                return 1.0 / p.q;
            } else if constexpr (std::is_same_v<T, DilutedPotts>) {
                return 0.5 / p.q;
            } else if constexpr (std::is_same_v<T, DilutedXY>) {
                if (mv.occupancy != c.occupancy[s]) return 0.5 / (2.0 * pi);
                return 0.5 * window_density(c.angles[s], mv.angle, angle_window);
            } else if constexpr (std::is_same_v<T, Magnetostriction>) {
                return 0.5;
            } else {
                return window_density(c.angles[s], mv.angle, angle_window);
            }
        },
        m);
}

double energy_change(const ModelSpec& m, const TorusGeometry& g, Configuration& c, const Move& mv) {
    Move old = current_value(m, c, mv.kind, mv.index);
    double before, after;
    if (mv.kind == Move::Kind::edge) {
        const auto& ms = std::get<Magnetostriction>(m);
        before = edge_energy(ms, g, c, mv.index);
        apply(c, mv);
        after = edge_energy(ms, g, c, mv.index);
    } else {
        before = site_energy(m, g, c, mv.index);
        apply(c, mv);
        after = site_energy(m, g, c, mv.index);
    }
    apply(c, old);
    return after - before;
}

void sweep(const ModelSpec& m, const TorusGeometry& g, double beta, ChainState& st) {
    if (beta < 0.0) throw std::domain_error("beta must be >= 0");
    const std::size_t n = g.sites();
    auto attempt = [&](Move::Kind kind, std::size_t idx) {
        Move mv = propose(m, g, st.config, kind, idx, st.angle_window, st.edge_window, st.rng);
        double dE = energy_change(m, g, st.config, mv);
        // Draw the uniform unconditionally so the stream does not depend on dE's sign.
        double u = unit(st.rng);
        bool ok = dE <= 0.0 || u < std::exp(-beta * dE);
        if (ok) apply(st.config, mv);
        return ok;
    };
    for (Site s = 0; s < n; ++s) {
        ++st.proposed;
        if (attempt(Move::Kind::site, s)) ++st.accepted;
    }
    if (std::holds_alternative<Magnetostriction>(m)) {
        for (std::size_t e = 0; e < g.edges(); ++e) {
            ++st.edge_proposed;
            if (attempt(Move::Kind::edge, e)) ++st.edge_accepted;
        }
    }
    ++st.sweeps_done;
}

ScanRow estimate_rho(const ModelSpec& m, const TorusGeometry& g, double beta, const GoodFamily& family,
                     const Schedule& sch, ChainState& st, Start start) {
    if (sch.burn_in < 0 || sch.sweeps < 1 || sch.batches < 2 || sch.measure_every < 1)
        throw std::domain_error("schedule needs burn_in >= 0, sweeps >= 1, batches >= 2, measure_every >= 1");
    if (family.B != g.B()) throw std::domain_error("event family block scale does not match the geometry");
    long n_meas = sch.sweeps / sch.measure_every;
    if (n_meas < sch.batches) throw std::domain_error("fewer measurements than batches");
    check_shape(m, g, st.config);

    const bool angles = has_angles(m);
    const bool magneto = std::holds_alternative<Magnetostriction>(m);
    const double r_cap = magneto ? std::get<Magnetostriction>(m).r_max : 1.0;
    st.tuning = true;
    for (long k = 0; k < sch.burn_in; ++k) {
        sweep(m, g, beta, st);
        if ((k + 1) % 50 == 0) {
            if (angles) tune(st.angle_window, st.proposed, st.accepted, pi);
            if (magneto) tune(st.edge_window, st.edge_proposed, st.edge_accepted, r_cap);
            st.proposed = st.accepted = st.edge_proposed = st.edge_accepted = 0;
        }
    }
    st.tuning = false;
    st.proposed = st.accepted = st.edge_proposed = st.edge_accepted = 0;

    BlockShape shape(g.d(), g.B());
    const auto layouts = all_block_layouts(g, shape, Placement::reflection);
    const std::size_t r = family.goods.size();
    const double nblocks = static_cast<double>(layouts.size());

    const long batch = n_meas / sch.batches;
    const long used = batch * sch.batches;
    std::vector<double> e_b(sch.batches, 0.0), bad_b(sch.batches, 0.0);
    std::vector<std::vector<double>> rho_b(r, std::vector<double>(sch.batches, 0.0));
    std::vector<std::size_t> counts(r + 1);
    double tail = 0.0;
    long taken = 0;
    for (long k = 0; k < sch.sweeps && taken < used; ++k) {
        sweep(m, g, beta, st);
        if ((k + 1) % sch.measure_every != 0) continue;
        std::size_t b = static_cast<std::size_t>(taken / batch);
        e_b[b] += energy_density(m, g, st.config);
        std::fill(counts.begin(), counts.end(), 0);
        for (const auto& lay : layouts) {
            int i = family.classify({&shape, &lay, &st.config});
            ++counts[i < 0 ? r : static_cast<std::size_t>(i)];
        }
        for (std::size_t i = 0; i < r; ++i) rho_b[i][b] += static_cast<double>(counts[i]) / nblocks;
        bad_b[b] += static_cast<double>(counts[r]) / nblocks;
        if (magneto) {
            std::size_t near = 0;
            for (double x : st.config.edges) near += x > 0.95 * r_cap;
            tail += static_cast<double>(near) / static_cast<double>(st.config.edges.size());
        }
        ++taken;
    }
    auto scale = [&](std::vector<double>& v) {
        for (double& x : v) x /= static_cast<double>(batch);
    };
    scale(e_b);
    scale(bad_b);
    for (auto& v : rho_b) scale(v);

    ScanRow row;
    row.beta = beta;
    row.start = start;
    row.samples = taken;
    Stats es = batch_stats(e_b);
    row.energy_mean = es.mean;
    row.energy_err = es.err;
    for (std::size_t i = 0; i < r; ++i) {
        Stats s = batch_stats(rho_b[i]);
        row.rho.push_back(s.mean);
        row.rho_err.push_back(s.err);
    }
    Stats bs = batch_stats(bad_b);
    row.rho_bad = bs.mean;
    row.rho_bad_err = bs.err;
    row.acceptance = st.proposed ? static_cast<double>(st.accepted) / static_cast<double>(st.proposed) : 0.0;

    // Split-half test on the energy batches.
    const std::size_t h = e_b.size() / 2;
    Stats first = batch_stats({e_b.begin(), e_b.begin() + static_cast<long>(h)});
    Stats second = batch_stats({e_b.begin() + static_cast<long>(h), e_b.end()});
    double sigma = std::hypot(first.err, second.err);
    double diff = std::abs(first.mean - second.mean);
    if (diff > 5.0 * sigma && diff > 1e-12) {
        row.converged = false;
        append_flag(row.flags, "nonconverged");
    } else if (has_step(e_b)) {
        row.converged = false;
        append_flag(row.flags, "nonconverged;phase_switch");
    }
    if (angles && (row.acceptance < 0.3 || row.acceptance > 0.6) && st.angle_window < pi)
        append_flag(row.flags, "acceptance");
    if (magneto) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "r_tail=%.3g", tail / static_cast<double>(taken));
        append_flag(row.flags, buf);
    }
    return row;
}

ScanCurve beta_scan(const ModelSpec& m, const TorusGeometry& g, const GoodFamily& family,
                    const std::vector<double>& betas, const Schedule& schedule, const std::vector<Start>& starts,
                    std::uint64_t seed) {
    if (!std::is_sorted(betas.begin(), betas.end())) throw std::domain_error("beta grid must be sorted");
    for (double b : betas)
        if (b < 0.0) throw std::domain_error("beta must be >= 0");
    validate(m, g);
    ScanCurve curve;
    curve.events = family.names();
    const std::size_t nb = betas.size();
    curve.rows.resize(starts.size() * nb);
    detail::parallel_for(curve.rows.size(), [&](std::size_t k) {
        std::size_t si = k / nb, bi = k % nb;
        ChainState st = make_chain({}, seed, k);
        st.config = start_configuration(m, g, starts[si], st.rng);
        curve.rows[k] = estimate_rho(m, g, betas[bi], family, schedule, st, starts[si]);
    });
    return curve;
}

GapReport gap_report(const ScanCurve& curve, double epsilon, double z) {
    GapReport rep;
    rep.epsilon = epsilon;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // ordered row, disordered row
    for (std::size_t i = 0; i < curve.rows.size(); ++i) {
        const auto& a = curve.rows[i];
        if (a.start != Start::ordered) continue;
        for (std::size_t j = 0; j < curve.rows.size(); ++j) {
            const auto& b = curve.rows[j];
            if (b.start == Start::disordered && b.beta == a.beta) {
                pairs.push_back({i, j});
                break;
            }
        }
    }
    double lower_max = 0.0, upper_min = 0.0;
    for (auto [i, j] : pairs) {
        const auto& o = curve.rows[i];
        const auto& d = curve.rows[j];
        if (!o.converged || !d.converged) continue;
        double sep = std::abs(o.energy_mean - d.energy_mean);
        if (sep <= z * std::hypot(o.energy_err, d.energy_err)) continue;
        double lo = std::min(o.energy_mean, d.energy_mean), hi = std::max(o.energy_mean, d.energy_mean);
        if (!rep.jump) {
            rep.jump = true;
            rep.bracket_lo = rep.bracket_hi = o.beta;
            lower_max = lo;
            upper_min = hi;
        }
        rep.bracket_lo = std::min(rep.bracket_lo, o.beta);
        rep.bracket_hi = std::max(rep.bracket_hi, o.beta);
        lower_max = std::max(lower_max, lo);
        upper_min = std::min(upper_min, hi);
    }
    if (rep.jump && lower_max < upper_min) {
        rep.gap = true;
        rep.gap_lo = lower_max;
        rep.gap_hi = upper_min;
    }
    for (std::size_t i = 0; i < curve.rows.size(); ++i) {
        const auto& row = curve.rows[i];
        if (!row.converged) {
            rep.unconverged.push_back(i);
            continue;
        }
        if (rep.gap && row.energy_mean - z * row.energy_err > rep.gap_lo &&
            row.energy_mean + z * row.energy_err < rep.gap_hi)
            rep.inside_gap.push_back(i);
        double best = row.rho.empty() ? 0.0 : *std::max_element(row.rho.begin(), row.rho.end());
        if (best < 1.0 - epsilon) rep.no_dominant.push_back(i);
    }
    return rep;
}

}  // namespace fgap
