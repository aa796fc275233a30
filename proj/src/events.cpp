#include "fgap/events.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fgap {

namespace {

constexpr double pi = std::numbers::pi;

std::uniform_real_distribution<double> unit(0.0, 1.0);

double uniform_angle(std::mt19937_64& rng) { return wrap_angle(pi - 2.0 * pi * unit(rng)); }

bool intervals_meet(double lo1, double hi1, double lo2, double hi2) { return !(hi1 < lo2 || hi2 < lo1); }

std::vector<std::size_t> face_sites(const BlockShape& s, int k, int side) {
    std::vector<std::size_t> out;
    for (std::size_t u = 0; u < s.sites; ++u)
        if (s.local_coords(u)[k] == side) out.push_back(u);
    return out;
}

void randomize_block(const ModelSpec& m, LocalBlock& b, std::mt19937_64& rng) {
    auto& c = b.config;
    std::size_t n = b.shape.sites;
    if (auto p = std::get_if<Potts>(&m)) {
        std::uniform_int_distribution<int> lab(0, p->q - 1);
        for (std::size_t u = 0; u < n; ++u) c.labels[u] = lab(rng);
    } else if (auto p = std::get_if<DilutedPotts>(&m)) {
        std::uniform_int_distribution<int> lab(0, p->q - 1);
        for (std::size_t u = 0; u < n; ++u) {
            c.labels[u] = lab(rng);
            c.occupancy[u] = unit(rng) < 0.5;
        }
    } else if (auto p = std::get_if<Magnetostriction>(&m)) {
        for (std::size_t u = 0; u < n; ++u) c.labels[u] = unit(rng) < 0.5 ? 1 : -1;
        for (auto& r : c.edges) r = p->r_max * (1.0 - unit(rng));
    } else {
        for (auto& a : c.angles) a = uniform_angle(rng);
        for (auto& o : c.occupancy) o = unit(rng) < 0.5;
    }
}

std::string describe_block(const LocalBlock& b) {
    std::ostringstream os;
    const auto& c = b.config;
    os << "[";
    for (std::size_t u = 0; u < b.shape.sites; ++u) {
        if (u) os << " ";
        os << "(";
        bool first = true;
        auto sep = [&] {
            if (!first) os << ",";
            first = false;
        };
        if (!c.occupancy.empty()) sep(), os << "n=" << int(c.occupancy[u]);
        if (!c.labels.empty()) sep(), os << "s=" << c.labels[u];
        if (!c.angles.empty()) sep(), os << "phi=" << c.angles[u];
        os << ")";
    }
    if (!c.edges.empty()) {
        os << " r:";
        for (const auto& bd : b.shape.bonds) os << " " << c.edges[b.shape.edge_slot(bd.u, bd.dir)];
    }
    os << "]";
    return os.str();
}

}  // namespace

LocalBlock::LocalBlock(const ModelSpec& m, int d, int B) : shape(d, B) {
    layout.sites.resize(shape.sites);
    for (std::size_t u = 0; u < shape.sites; ++u) layout.sites[u] = u;
    layout.edges.resize(shape.sites * d);
    for (std::size_t k = 0; k < layout.edges.size(); ++k) layout.edges[k] = k;
    std::size_t n = shape.sites;
    if (std::holds_alternative<Potts>(m)) config.labels.assign(n, 0);
    if (std::holds_alternative<DilutedPotts>(m)) {
        config.labels.assign(n, 0);
        config.occupancy.assign(n, 1);
    }
    if (std::holds_alternative<DilutedXY>(m)) {
        config.occupancy.assign(n, 1);
        config.angles.assign(n, 0.0);
    }
    if (std::holds_alternative<O2AF>(m) || std::holds_alternative<NonlinearFerromagnet>(m)) config.angles.assign(n, 0.0);
    if (auto p = std::get_if<Magnetostriction>(&m)) {
        config.labels.assign(n, 1);
        config.edges.assign(n * d, p->R);
    }
}

BlockEvent whole_space_event() { return {"all", [](const BlockView&) { return true; }, true, std::nullopt, {}}; }

BlockEvent empty_event() { return {"none", [](const BlockView&) { return false; }, true, std::nullopt, {}}; }

BlockEvent union_event(const BlockEvent& a, const BlockEvent& b) {
    auto pa = a.predicate, pb = b.predicate;
    return {a.name + "|" + b.name, [pa, pb](const BlockView& v) { return pa(v) || pb(v); },
            a.reflection_symmetric && b.reflection_symmetric, std::nullopt, {}};
}

BlockEvent complement_event(const BlockEvent& a, std::string name) {
    auto pa = a.predicate;
    return {std::move(name), [pa](const BlockView& v) { return !pa(v); }, a.reflection_symmetric, std::nullopt, {}};
}

int GoodFamily::classify(const BlockView& v) const {
    for (std::size_t i = 0; i < goods.size(); ++i)
        if (goods[i].predicate(v)) return static_cast<int>(i);
    return -1;
}

BlockEvent GoodFamily::bad() const {
    auto copy = goods;
    bool sym = true;
    for (const auto& g : goods) sym = sym && g.reflection_symmetric;
    return {"bad",
            [copy](const BlockView& v) {
                for (const auto& g : copy)
                    if (g.predicate(v)) return false;
                return true;
            },
            sym, std::nullopt, {}};
}

std::vector<std::string> GoodFamily::names() const {
    std::vector<std::string> out;
    for (const auto& g : goods) out.push_back(g.name);
    return out;
}

BlockEvent potts_ordered(int label) {
    BlockEvent e;
    e.name = "ord_" + std::to_string(label + 1);
    e.predicate = [label](const BlockView& v) {
        for (std::size_t u = 0; u < v.shape->sites; ++u)
            if (v.label(u) != label) return false;
        return true;
    };
    return e;
}

BlockEvent potts_disordered() {
    BlockEvent e;
    e.name = "dis";
    e.predicate = [](const BlockView& v) {
        for (const auto& b : v.shape->bonds)
            if (v.label(b.u) == v.label(b.v)) return false;
        return true;
    };
    return e;
}

GoodFamily potts_events(int q) {
    if (q < 2) throw std::domain_error("Potts events need q >= 2");
    GoodFamily f;
    if (q == 2) {
        for (int even_label : {0, 1}) {
            BlockEvent e;
            e.name = even_label == 0 ? "dis_a" : "dis_b";
            e.reflection_symmetric = false;  // the midplane reflection of a 1-block swaps parities
            e.predicate = [even_label](const BlockView& v) {
                for (std::size_t u = 0; u < v.shape->sites; ++u)
                    if (v.label(u) != (even_label ^ v.shape->parity[u])) return false;
                return true;
            };
            f.goods.push_back(e);
        }
    } else {
        f.goods.push_back(potts_disordered());
    }
    for (int m = 0; m < q; ++m) f.goods.push_back(potts_ordered(m));
    return f;
}

GoodFamily diluted_events(const ModelSpec& m, int d) {
    GoodFamily f;
    const auto* dp = std::get_if<DilutedPotts>(&m);
    if (!dp && !std::holds_alternative<DilutedXY>(m)) throw std::domain_error("diluted events need a diluted model");
    BlockShape shape(d, 1);
    auto occupancy_constraints = [](const BlockShape& s, int mode) {
        EventConstraints c;
        c.field = EventConstraints::Field::occupancy;
        for (std::size_t u = 0; u < s.sites; ++u) {
            int want = mode == 0 ? 1 : (mode == 1 ? 1 - s.parity[u] : s.parity[u]);
            c.site_values.push_back({want});
        }
        return c;
    };
    auto occupancy_sampler = [](int mode) {
        return [mode](LocalBlock& b, std::mt19937_64& rng) {
            for (std::size_t u = 0; u < b.shape.sites; ++u) {
                int want = mode == 0 ? 1 : (mode == 1 ? 1 - b.shape.parity[u] : b.shape.parity[u]);
                b.config.occupancy[u] = static_cast<std::uint8_t>(want);
                if (!b.config.angles.empty()) b.config.angles[u] = uniform_angle(rng);
            }
        };
    };
    if (dp) {
        for (int m2 = 0; m2 < dp->q; ++m2) {
            BlockEvent e;
            e.name = "dense_" + std::to_string(m2 + 1);
            e.predicate = [m2](const BlockView& v) {
                for (std::size_t u = 0; u < v.shape->sites; ++u)
                    if (!v.occupied(u) || v.label(u) != m2) return false;
                return true;
            };
            f.goods.push_back(e);
        }
    } else {
        BlockEvent e;
        e.name = "dense";
        e.predicate = [](const BlockView& v) {
            for (std::size_t u = 0; u < v.shape->sites; ++u)
                if (!v.occupied(u)) return false;
            return true;
        };
        e.constraints = occupancy_constraints(shape, 0);
        e.sampler = occupancy_sampler(0);
        f.goods.push_back(e);
    }
    for (int mode : {1, 2}) {
        BlockEvent e;
        e.name = mode == 1 ? "even" : "odd";
        // with B = 1 the midplane reflection exchanges the two sublattices
        e.reflection_symmetric = false;
        e.predicate = [mode](const BlockView& v) {
            for (std::size_t u = 0; u < v.shape->sites; ++u) {
                int want = mode == 1 ? 1 - v.shape->parity[u] : v.shape->parity[u];
                if (static_cast<int>(v.occupied(u)) != want) return false;
            }
            return true;
        };
        e.constraints = occupancy_constraints(shape, mode);
        e.sampler = occupancy_sampler(mode);
        f.goods.push_back(e);
    }
    return f;
}

GoodFamily o2af_events(double kappa, int B) {
    if (!(kappa > 0.0 && kappa < 1.0)) throw std::domain_error("o2af events need kappa in (0,1)");
    if (B < 2 || B % 2 != 0) throw std::domain_error("o2af events need an even block scale");
    GoodFamily f;
    f.B = B;
    BlockShape shape(2, B);
    const double a = std::acos(1.0 - kappa);  // |dphi| <= a  <=>  S.S >= 1 - kappa
    for (int along : {0, 1}) {
        int across = 1 - along;
        // pairs on a common line parallel to e_along, and adjacent pairs across
        EventConstraints c;
        for (std::size_t u = 0; u < shape.sites; ++u)
            for (std::size_t v = u + 1; v < shape.sites; ++v) {
                Coord x = shape.local_coords(u), y = shape.local_coords(v);
                if (x[across] == y[across]) c.angle_pairs.push_back({u, v, 0.0, a});
            }
        for (const auto& b : shape.bonds)
            if (b.dir == across) c.angle_pairs.push_back({b.u, b.v, pi - a, pi});
        BlockEvent e;
        e.name = along == 0 ? "horizontal" : "vertical";
        e.constraints = c;
        e.predicate = [c, kappa](const BlockView& v) {
            for (const auto& pr : c.angle_pairs) {
                double dot = std::cos(v.angle(pr.u) - v.angle(pr.v));
                if (pr.lo == 0.0 ? dot < 1.0 - kappa : dot > -1.0 + kappa) return false;
            }
            return true;
        };
        e.sampler = [across, a](LocalBlock& b, std::mt19937_64& rng) {
            double base = uniform_angle(rng);
            for (std::size_t u = 0; u < b.shape.sites; ++u) {
                int line = b.shape.local_coords(u)[across];
                b.config.angles[u] = wrap_angle(base + pi * (line % 2) + 0.49 * a * (2.0 * unit(rng) - 1.0));
            }
        };
        f.goods.push_back(e);
    }
    return f;
}

BondClass classify_bond(double dphi, double C, double p) {
    double g = std::abs(wrap_angle(dphi));
    double sp = std::sqrt(p);
    if (g <= 1.0 / (C * sp)) return BondClass::strongly_ordered;
    if (g >= C / sp) return BondClass::disordered;
    return BondClass::weakly_ordered;
}

namespace {

void check_nlvm_params(double C, double p) {
    if (!(p >= 1.0)) throw std::domain_error("nlvm events need p >= 1");
    if (!(C >= 1.0)) throw std::domain_error("nlvm events need C >= 1");
    if (C > std::sqrt(p)) throw std::domain_error("nlvm events need C <= sqrt(p)");
}

BlockEvent nlvm_all(BondClass cls, double C, double p, int d) {
    BlockShape shape(d, 1);
    double sp = std::sqrt(p);
    double lo = 1.0 / (C * sp), hi = C / sp;
    BlockEvent e;
    e.name = cls == BondClass::strongly_ordered ? "so" : "dis";
    EventConstraints c;
    for (const auto& b : shape.bonds) {
        if (cls == BondClass::strongly_ordered)
            c.angle_pairs.push_back({b.u, b.v, 0.0, lo});
        else
            c.angle_pairs.push_back({b.u, b.v, hi, pi});
    }
    e.constraints = c;
    e.predicate = [cls, C, p](const BlockView& v) {
        for (const auto& b : v.shape->bonds)
            if (classify_bond(v.angle(b.u) - v.angle(b.v), C, p) != cls) return false;
        return true;
    };
    if (cls == BondClass::strongly_ordered) {
        e.sampler = [lo](LocalBlock& b, std::mt19937_64& rng) {
            double base = uniform_angle(rng);
            for (auto& a : b.config.angles) a = wrap_angle(base + 0.49 * lo * (2.0 * unit(rng) - 1.0));
        };
    } else {
        double jitter = 0.49 * (pi - hi);
        e.sampler = [jitter](LocalBlock& b, std::mt19937_64& rng) {
            double base = uniform_angle(rng);
            for (std::size_t u = 0; u < b.shape.sites; ++u)
                b.config.angles[u] = wrap_angle(base + pi * b.shape.parity[u] + jitter * (2.0 * unit(rng) - 1.0));
        };
    }
    return e;
}

}  // namespace

GoodFamily nlvm_events(double C, double p, int d) {
    check_nlvm_params(C, p);
    GoodFamily f;
    f.goods.push_back(nlvm_all(BondClass::strongly_ordered, C, p, d));
    f.goods.push_back(nlvm_all(BondClass::disordered, C, p, d));
    return f;
}

std::pair<BlockEvent, BlockEvent> nlvm_bad_split(double C, double p) {
    check_nlvm_params(C, p);
    BlockEvent wo;
    wo.name = "wo";
    wo.predicate = [C, p](const BlockView& v) {
        for (const auto& b : v.shape->bonds)
            if (classify_bond(v.angle(b.u) - v.angle(b.v), C, p) == BondClass::weakly_ordered) return true;
        return false;
    };
    BlockEvent mix;
    mix.name = "mix";
    mix.predicate = [C, p](const BlockView& v) {
        const auto& bonds = v.shape->bonds;
        for (std::size_t i = 0; i < bonds.size(); ++i)
            for (std::size_t j = 0; j < bonds.size(); ++j) {
                const auto &a = bonds[i], &b = bonds[j];
                bool share = a.u == b.u || a.u == b.v || a.v == b.u || a.v == b.v;
                if (i == j || !share) continue;
                if (classify_bond(v.angle(a.u) - v.angle(a.v), C, p) == BondClass::strongly_ordered &&
                    classify_bond(v.angle(b.u) - v.angle(b.v), C, p) == BondClass::disordered)
                    return true;
            }
        return false;
    };
    return {wo, mix};
}

GoodFamily magnetostriction_events(double eta, double eps, double r_max, int d) {
    if (!(eta > 0.0 && eps > 0.0 && eta + eps < r_max)) throw std::domain_error("magnetostriction events need 0 < eta < eta + eps < r_max");
    BlockShape shape(d, 1);
    GoodFamily f;
    {
        BlockEvent e;
        e.name = "contr";
        EventConstraints c;
        for (const auto& b : shape.bonds) c.edge_ranges.push_back({shape.edge_slot(b.u, b.dir), 0.0, eta});
        e.constraints = c;
        e.predicate = [eta](const BlockView& v) {
            for (const auto& b : v.shape->bonds)
                if (!(v.edge(b.u, b.dir) <= eta)) return false;
            return true;
        };
        e.sampler = [eta](LocalBlock& b, std::mt19937_64& rng) {
            for (auto& s : b.config.labels) s = unit(rng) < 0.5 ? 1 : -1;
            for (const auto& bd : b.shape.bonds) b.config.edges[b.shape.edge_slot(bd.u, bd.dir)] = eta * (1.0 - unit(rng));
        };
        f.goods.push_back(e);
    }
    for (int sign : {1, -1}) {
        BlockEvent e;
        e.name = sign > 0 ? "exp_plus" : "exp_minus";
        EventConstraints c;
        c.field = EventConstraints::Field::label;
        c.site_values.assign(shape.sites, {sign});
        for (const auto& b : shape.bonds) c.edge_ranges.push_back({shape.edge_slot(b.u, b.dir), eta + eps, r_max});
        e.constraints = c;
        e.predicate = [eta, eps, sign](const BlockView& v) {
            for (std::size_t u = 0; u < v.shape->sites; ++u)
                if (v.label(u) != sign) return false;
            for (const auto& b : v.shape->bonds)
                if (!(v.edge(b.u, b.dir) >= eta + eps)) return false;
            return true;
        };
        double lo = eta + eps;
        e.sampler = [lo, r_max, sign](LocalBlock& b, std::mt19937_64& rng) {
            for (auto& s : b.config.labels) s = sign;
            for (const auto& bd : b.shape.bonds)
                b.config.edges[b.shape.edge_slot(bd.u, bd.dir)] = lo + (r_max - lo) * unit(rng);
        };
        f.goods.push_back(e);
    }
    return f;
}

GoodFamily default_family(const ModelSpec& m, const EventParams& params, int d) {
    if (auto p = std::get_if<Potts>(&m)) return potts_events(p->q);
    if (std::holds_alternative<DilutedPotts>(m) || std::holds_alternative<DilutedXY>(m)) return diluted_events(m, d);
    if (std::holds_alternative<O2AF>(m)) return o2af_events(params.o2af_kappa, params.o2af_B);
    if (auto p = std::get_if<NonlinearFerromagnet>(&m)) return nlvm_events(params.nlvm_C, p->p, d);
    const auto& ms = std::get<Magnetostriction>(m);
    return magnetostriction_events(params.magneto_eta, params.magneto_eps, ms.r_max, d);
}

double block_density(const BlockEvent& a, const TorusGeometry& g, const Configuration& c, int N, Placement placement) {
    if (N < 1 || N * g.B() > g.L()) throw std::domain_error("block density needs 1 <= N and N B <= L");
    BlockShape shape(g.d(), g.B());
    std::size_t total = 1, hits = 0;
    for (int i = 0; i < g.d(); ++i) total *= static_cast<std::size_t>(N);
    for (std::size_t k = 0; k < total; ++k) {
        Coord t(g.d());
        std::size_t r = k;
        for (int i = 0; i < g.d(); ++i) {
            t[i] = static_cast<int>(r % N);
            r /= N;
        }
        BlockLayout lay = block_layout(g, shape, t, placement);
        if (a.predicate(BlockView{&shape, &lay, &c})) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

namespace {

struct Face {
    int k, side;
    std::vector<std::size_t> sites;
};

std::vector<Face> all_faces(const BlockShape& s) {
    std::vector<Face> out;
    for (int k = 0; k < s.d; ++k)
        for (int side : {0, s.side - 1}) out.push_back({k, side, face_sites(s, k, side)});
    return out;
}

bool in_face(const Face& f, const BlockShape& s, std::size_t u) { return s.local_coords(u)[f.k] == f.side; }

// True when the constraints of a and b (restricted to `keep`) cannot hold together.
bool constraints_conflict(const EventConstraints& a, const EventConstraints& b, const BlockShape& s,
                          const std::function<bool(std::size_t)>& keep) {
    if (a.field != EventConstraints::Field::none && a.field == b.field && !a.site_values.empty() && !b.site_values.empty()) {
        for (std::size_t u = 0; u < s.sites; ++u) {
            if (!keep(u) || a.site_values[u].empty() || b.site_values[u].empty()) continue;
            bool meet = false;
            for (int x : a.site_values[u])
                for (int y : b.site_values[u]) meet = meet || x == y;
            if (!meet) return true;
        }
    }
    for (const auto& pa : a.angle_pairs) {
        if (!keep(pa.u) || !keep(pa.v)) continue;
        for (const auto& pb : b.angle_pairs) {
            bool same = (pa.u == pb.u && pa.v == pb.v) || (pa.u == pb.v && pa.v == pb.u);
            if (same && !intervals_meet(pa.lo, pa.hi, pb.lo, pb.hi)) return true;
        }
    }
    for (const auto& ea : a.edge_ranges)
        for (const auto& eb : b.edge_ranges)
            if (ea.slot == eb.slot && !intervals_meet(ea.lo, ea.hi, eb.lo, eb.hi)) {
                std::size_t u = ea.slot / s.d;
                int dir = static_cast<int>(ea.slot % s.d);
                Coord y = s.local_coords(u);
                ++y[dir];
                std::size_t v = 0, stride = 1;
                for (int i = 0; i < s.d; ++i) {
                    v += stride * static_cast<std::size_t>(y[i]);
                    stride *= static_cast<std::size_t>(s.side);
                }
                if (keep(u) && keep(v)) return true;
            }
    return false;
}

void copy_face(const Face& f, const LocalBlock& from, LocalBlock& to) {
    const auto& s = from.shape;
    for (std::size_t u : f.sites) {
        if (!from.config.labels.empty()) to.config.labels[u] = from.config.labels[u];
        if (!from.config.occupancy.empty()) to.config.occupancy[u] = from.config.occupancy[u];
        if (!from.config.angles.empty()) to.config.angles[u] = from.config.angles[u];
    }
    if (from.config.edges.empty()) return;
    for (const auto& b : s.bonds)
        if (in_face(f, s, b.u) && in_face(f, s, b.v)) {
            std::size_t slot = s.edge_slot(b.u, b.dir);
            to.config.edges[slot] = from.config.edges[slot];
        }
}

FamilyReport check_discrete(const GoodFamily& f, const ModelSpec& m, int d, const FamilyCheckOptions& opt) {
    FamilyReport rep;
    rep.method = "exhaustive";
    LocalBlock blk(m, d, f.B);
    const int k = discrete_site_states(m);
    const std::size_t n = blk.shape.sites;
    double count = std::pow(static_cast<double>(k), static_cast<double>(n));
    if (count > static_cast<double>(opt.exhaustive_budget)) {
        rep.pass = false;
        rep.method = "refused";
        rep.findings.push_back("block state space " + std::to_string(count) + " exceeds budget");
        return rep;
    }
    auto faces = all_faces(blk.shape);
    // face pattern -> first block index, per (face, event)
    std::vector<std::vector<std::map<std::uint64_t, std::uint64_t>>> seen(faces.size(), std::vector<std::map<std::uint64_t, std::uint64_t>>(f.goods.size()));
    auto load = [&](LocalBlock& b, std::uint64_t idx) {
        for (std::size_t u = 0; u < n; ++u) {
            set_discrete_state(m, b.config, u, static_cast<int>(idx % k));
            idx /= k;
        }
    };
    auto total = static_cast<std::uint64_t>(count);
    for (std::uint64_t idx = 0; idx < total; ++idx) {
        load(blk, idx);
        auto v = blk.view();
        int first = -1;
        for (std::size_t i = 0; i < f.goods.size(); ++i) {
            if (!f.goods[i].predicate(v)) continue;
            if (first >= 0) {
                rep.pass = false;
                rep.findings.push_back("events " + f.goods[first].name + " and " + f.goods[i].name + " overlap");
                if (!rep.witness) rep.witness = "block " + describe_block(blk) + " satisfies both " + f.goods[first].name + " and " + f.goods[i].name;
                continue;
            }
            first = static_cast<int>(i);
            for (std::size_t fi = 0; fi < faces.size(); ++fi) {
                std::uint64_t pat = 0;
                for (std::size_t u : faces[fi].sites) pat = pat * k + discrete_state(m, blk.config, u);
                seen[fi][i].emplace(pat, idx);
            }
        }
        ++rep.samples;
    }
    for (std::size_t fi = 0; fi < faces.size(); ++fi)
        for (std::size_t i = 0; i < f.goods.size(); ++i)
            for (std::size_t j = i + 1; j < f.goods.size(); ++j)
                for (const auto& [pat, idx] : seen[fi][i]) {
                    auto it = seen[fi][j].find(pat);
                    if (it == seen[fi][j].end()) continue;
                    rep.pass = false;
                    std::ostringstream os;
                    os << f.goods[i].name << " and " << f.goods[j].name << " are compatible across face (axis " << faces[fi].k
                       << ", side " << faces[fi].side << ")";
                    rep.findings.push_back(os.str());
                    if (!rep.witness) {
                        LocalBlock a(m, d, f.B), b(m, d, f.B);
                        load(a, idx);
                        load(b, it->second);
                        rep.witness = f.goods[i].name + " block " + describe_block(a) + " and " + f.goods[j].name + " block " +
                                      describe_block(b) + " agree on the shared face";
                    }
                    break;
                }
    return rep;
}

FamilyReport check_continuous(const GoodFamily& f, const ModelSpec& m, int d, const FamilyCheckOptions& opt) {
    FamilyReport rep;
    rep.method = "analytic+randomized";
    std::mt19937_64 rng(opt.seed);
    LocalBlock a(m, d, f.B), b(m, d, f.B);
    const auto& shape = a.shape;
    auto faces = all_faces(shape);
    const std::size_t r = f.goods.size();
    auto everywhere = [](std::size_t) { return true; };
    std::size_t per_pair = r > 1 ? std::max<std::size_t>(1, opt.random_samples / (r * (r - 1))) : 0;

    for (std::size_t i = 0; i < r; ++i) {
        const auto& gi = f.goods[i];
        if (gi.sampler) {
            gi.sampler(a, rng);
            if (!gi.predicate(a.view())) rep.findings.push_back("sampler of " + gi.name + " left the event");
        }
        for (std::size_t j = 0; j < r; ++j) {
            if (i == j) continue;
            const auto& gj = f.goods[j];
            bool proven = gi.constraints && gj.constraints && constraints_conflict(*gi.constraints, *gj.constraints, shape, everywhere);
            if (!proven && gi.sampler) {
                for (std::size_t s = 0; s < per_pair; ++s, ++rep.samples) {
                    gi.sampler(a, rng);
                    if (gj.predicate(a.view())) {
                        rep.pass = false;
                        rep.findings.push_back("events " + gi.name + " and " + gj.name + " overlap");
                        if (!rep.witness) rep.witness = "block " + describe_block(a) + " satisfies both";
                        break;
                    }
                }
                if (rep.pass) rep.findings.push_back(gi.name + "/" + gj.name + " disjointness: randomized only");
            }
            if (j < i) continue;
            for (const auto& face : faces) {
                auto keep = [&](std::size_t u) { return in_face(face, shape, u); };
                if (gi.constraints && gj.constraints && constraints_conflict(*gi.constraints, *gj.constraints, shape, keep)) continue;
                bool found = false;
                if (gi.sampler && gj.sampler) {
                    for (std::size_t s = 0; s < per_pair && !found; ++s, ++rep.samples) {
                        gi.sampler(a, rng);
                        gj.sampler(b, rng);
                        copy_face(face, a, b);
                        if (gj.predicate(b.view())) found = true;
                    }
                }
                if (found) {
                    rep.pass = false;
                    std::ostringstream os;
                    os << gi.name << " and " << gj.name << " are compatible across face (axis " << face.k << ", side " << face.side << ")";
                    rep.findings.push_back(os.str());
                    if (!rep.witness) rep.witness = gi.name + " block " + describe_block(a) + " and " + gj.name + " block " + describe_block(b);
                } else {
                    rep.findings.push_back(gi.name + "/" + gj.name + " face non-compatibility: randomized only");
                }
            }
        }
    }
    // uniform blocks: at most one good event may hold
    for (std::size_t s = 0; s < opt.random_samples / 10 + 1; ++s, ++rep.samples) {
        randomize_block(m, a, rng);
        int hits = 0;
        for (const auto& g : f.goods) hits += g.predicate(a.view());
        if (hits > 1) {
            rep.pass = false;
            if (!rep.witness) rep.witness = "block " + describe_block(a) + " satisfies two good events";
            break;
        }
    }
    return rep;
}

}  // namespace

FamilyReport check_family(const GoodFamily& f, const ModelSpec& m, const TorusGeometry& g, const FamilyCheckOptions& opt) {
    if (g.B() != f.B) throw std::domain_error("family block scale does not match geometry");
    if (is_discrete(m)) return check_discrete(f, m, g.d(), opt);
    return check_continuous(f, m, g.d(), opt);
}

}  // namespace fgap
