#include "fgap/lattice.hpp"

#include <stdexcept>

namespace fgap {

namespace {

int wrap(long v, long m) {
    long r = v % m;
    return static_cast<int>(r < 0 ? r + m : r);
}

// Affine map on doubled coordinates: X'_j = sign_j * X_{perm_j} + shift_j (mod 2L).
// Doubling lets one formula move sites (all even) and edge midpoints (one odd).
struct Affine {
    std::vector<int> perm, sign, shift;

    static Affine identity(int d) {
        Affine a;
        for (int i = 0; i < d; ++i) {
            a.perm.push_back(i);
            a.sign.push_back(1);
            a.shift.push_back(0);
        }
        return a;
    }

    Coord apply(const Coord& X, int L) const {
        Coord out(X.size());
        for (std::size_t j = 0; j < X.size(); ++j)
            out[j] = wrap(static_cast<long>(sign[j]) * X[perm[j]] + shift[j], 2L * L);
        return out;
    }
};

Site map_site(const TorusGeometry& g, const Affine& a, const Coord& x) {
    Coord X(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) X[i] = 2 * x[i];
    Coord Y = a.apply(X, g.L());
    for (auto& v : Y) v /= 2;
    return g.index(Y);
}

std::size_t map_edge(const TorusGeometry& g, const Affine& a, const Coord& x, int dir) {
    Coord M(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) M[i] = 2 * x[i] + (static_cast<int>(i) == dir ? 1 : 0);
    Coord Y = a.apply(M, g.L());
    int odd = -1;
    Coord base(Y.size());
    for (std::size_t j = 0; j < Y.size(); ++j) {
        if (Y[j] % 2 != 0) {
            odd = static_cast<int>(j);
            base[j] = (Y[j] - 1) / 2;
        } else {
            base[j] = Y[j] / 2;
        }
    }
    return g.edge(g.index(base), odd);
}

SiteMap realize(const TorusGeometry& g, const Affine& a) {
    SiteMap m;
    m.site.resize(g.sites());
    m.edge.resize(g.edges());
    for (Site s = 0; s < g.sites(); ++s) {
        Coord x = g.coords(s);
        m.site[s] = map_site(g, a, x);
        for (int i = 0; i < g.d(); ++i) m.edge[g.edge(s, i)] = map_edge(g, a, x, i);
    }
    return m;
}

Affine theta_affine(const TorusGeometry& g, const Coord& t) {
    Affine a = Affine::identity(g.d());
    for (int i = 0; i < g.d(); ++i) {
        if (t[i] % 2 != 0) {
            a.sign[i] = -1;
            a.shift[i] = 2 * g.B() * (t[i] + 1);
        } else {
            a.shift[i] = 2 * g.B() * t[i];
        }
    }
    return a;
}

Affine plane_affine(const TorusGeometry& g, const PlaneSpec& p) {
    Affine a = Affine::identity(g.d());
    switch (p.kind) {
    case PlaneSpec::Kind::axis:
        if (p.axis < 0 || p.axis >= g.d()) throw std::domain_error("plane axis out of range");
        a.sign[p.axis] = -1;
        a.shift[p.axis] = 4 * p.offset;
        return a;
    case PlaneSpec::Kind::diagonal:
        if (g.d() != 2) throw std::domain_error("diagonal planes need d = 2");
        a.perm = {1, 0};
        a.shift = {2 * p.offset, -2 * p.offset};
        return a;
    case PlaneSpec::Kind::antidiagonal:
        if (g.d() != 2) throw std::domain_error("diagonal planes need d = 2");
        a.perm = {1, 0};
        a.sign = {-1, -1};
        a.shift = {2 * p.offset, 2 * p.offset};
        return a;
    }
    throw std::domain_error("unsupported plane");
}

void check_factor_point(const TorusGeometry& g, const Coord& t) {
    if (static_cast<int>(t.size()) != g.d()) throw std::domain_error("factor point has wrong dimension");
    for (int v : t)
        if (v < 0 || v >= g.factor_side()) throw std::domain_error("factor point outside the factor torus");
}

}  // namespace

TorusGeometry::TorusGeometry(int d, int L, int B) : d_(d), L_(L), B_(B) {
    if (d < 1) throw std::domain_error("dimension must be >= 1");
    if (B < 1) throw std::domain_error("block scale must be >= 1");
    if (L < 2 || L % 2 != 0) throw std::domain_error("L must be even");
    if (L % B != 0) throw std::domain_error("B must divide L");
    int n = L / B;
    if (n < 2 || n % 2 != 0) throw std::domain_error("L/B must be even and >= 2");
    if ((n & (n - 1)) != 0) warning_ = "L/B = " + std::to_string(n) + " is not a power of 2";
    sites_ = 1;
    factor_points_ = 1;
    for (int i = 0; i < d; ++i) {
        sites_ *= static_cast<std::size_t>(L);
        factor_points_ *= static_cast<std::size_t>(n);
    }
    plus_.resize(sites_ * d);
    minus_.resize(sites_ * d);
    for (Site s = 0; s < sites_; ++s) {
        Coord x = coords(s);
        for (int i = 0; i < d; ++i) {
            Coord y = x;
            y[i] = wrap(x[i] + 1, L);
            plus_[s * d + i] = index(y);
            y[i] = wrap(x[i] - 1, L);
            minus_[s * d + i] = index(y);
        }
    }
}

Coord TorusGeometry::coords(Site s) const {
    Coord x(d_);
    for (int i = 0; i < d_; ++i) {
        x[i] = static_cast<int>(s % L_);
        s /= L_;
    }
    return x;
}

Site TorusGeometry::index(const Coord& x) const {
    Site s = 0;
    for (int i = d_ - 1; i >= 0; --i) s = s * L_ + wrap(x[i], L_);
    return s;
}

Site TorusGeometry::neighbor(Site s, int dir, int step) const {
    if (step == 1) return plus_[s * d_ + dir];
    if (step == -1) return minus_[s * d_ + dir];
    Coord x = coords(s);
    x[dir] += step;
    return index(x);
}

Coord TorusGeometry::factor_coords(std::size_t t) const {
    Coord x(d_);
    int n = factor_side();
    for (int i = 0; i < d_; ++i) {
        x[i] = static_cast<int>(t % n);
        t /= n;
    }
    return x;
}

std::size_t TorusGeometry::factor_index(const Coord& t) const {
    check_factor_point(*this, t);
    std::size_t k = 0;
    for (int i = d_ - 1; i >= 0; --i) k = k * factor_side() + t[i];
    return k;
}

bool SiteMap::is_bijection() const {
    std::vector<char> seen(site.size(), 0);
    for (Site s : site) {
        if (s >= site.size() || seen[s]) return false;
        seen[s] = 1;
    }
    std::vector<char> eseen(edge.size(), 0);
    for (std::size_t e : edge) {
        if (e >= edge.size() || eseen[e]) return false;
        eseen[e] = 1;
    }
    return true;
}

bool SiteMap::is_involution() const {
    for (Site s = 0; s < site.size(); ++s)
        if (site[site[s]] != s) return false;
    for (std::size_t e = 0; e < edge.size(); ++e)
        if (edge[edge[e]] != e) return false;
    return true;
}

std::vector<Site> SiteMap::fixed_sites() const {
    std::vector<Site> out;
    for (Site s = 0; s < site.size(); ++s)
        if (site[s] == s) out.push_back(s);
    return out;
}

SiteMap compose(const SiteMap& outer, const SiteMap& inner) {
    SiteMap m;
    m.site.resize(inner.site.size());
    m.edge.resize(inner.edge.size());
    for (std::size_t s = 0; s < inner.site.size(); ++s) m.site[s] = outer.site[inner.site[s]];
    for (std::size_t e = 0; e < inner.edge.size(); ++e) m.edge[e] = outer.edge[inner.edge[e]];
    return m;
}

SiteMap inverse(const SiteMap& m) {
    SiteMap r;
    r.site.resize(m.site.size());
    r.edge.resize(m.edge.size());
    for (std::size_t s = 0; s < m.site.size(); ++s) r.site[m.site[s]] = s;
    for (std::size_t e = 0; e < m.edge.size(); ++e) r.edge[m.edge[e]] = e;
    return r;
}

SiteMap identity_map(const TorusGeometry& g) { return realize(g, Affine::identity(g.d())); }

SiteMap translation_map(const TorusGeometry& g, const Coord& shift) {
    if (static_cast<int>(shift.size()) != g.d()) throw std::domain_error("shift has wrong dimension");
    Affine a = Affine::identity(g.d());
    for (int i = 0; i < g.d(); ++i) a.shift[i] = 2 * shift[i];
    return realize(g, a);
}

std::vector<Site> block_sites(const TorusGeometry& g, const Coord& t) {
    check_factor_point(g, t);
    BlockShape shape(g.d(), g.B());
    return block_layout(g, shape, t, Placement::translation).sites;
}

SiteMap theta_t_map(const TorusGeometry& g, const Coord& t) {
    check_factor_point(g, t);
    return realize(g, theta_affine(g, t));
}

std::string describe(const PlaneSpec& p) {
    switch (p.kind) {
    case PlaneSpec::Kind::axis:
        return "axis" + std::to_string(p.axis) + "@" + std::to_string(p.offset);
    case PlaneSpec::Kind::diagonal:
        return "diagonal@" + std::to_string(p.offset);
    case PlaneSpec::Kind::antidiagonal:
        return "antidiagonal@" + std::to_string(p.offset);
    }
    return "?";
}

SiteMap plane_reflection(const TorusGeometry& g, const PlaneSpec& plane) {
    return realize(g, plane_affine(g, plane));
}

std::vector<Site> half_space_sites(const TorusGeometry& g, const PlaneSpec& plane, int depth) {
    if (depth < 0 || depth > g.L() / 2) throw std::domain_error("half-space depth out of range");
    plane_affine(g, plane);  // validates the spec
    std::vector<Site> out;
    for (Site s = 0; s < g.sites(); ++s) {
        Coord x = g.coords(s);
        int k = 0;
        switch (plane.kind) {
        case PlaneSpec::Kind::axis: k = wrap(x[plane.axis] - plane.offset, g.L()); break;
        case PlaneSpec::Kind::diagonal: k = wrap(x[0] - x[1] - plane.offset, g.L()); break;
        case PlaneSpec::Kind::antidiagonal: k = wrap(x[0] + x[1] - plane.offset, g.L()); break;
        }
        if (k <= depth) out.push_back(s);
    }
    return out;
}

BlockShape::BlockShape(int d_, int B) : d(d_), side(B + 1), sites(1) {
    if (d_ < 1 || B < 1) throw std::domain_error("invalid block shape");
    for (int i = 0; i < d; ++i) sites *= static_cast<std::size_t>(side);
    parity.resize(sites);
    std::vector<std::size_t> stride(d, 1);
    for (int i = 1; i < d; ++i) stride[i] = stride[i - 1] * side;
    for (std::size_t u = 0; u < sites; ++u) {
        Coord y = local_coords(u);
        int sum = 0;
        for (int v : y) sum += v;
        parity[u] = sum % 2;
        for (int i = 0; i < d; ++i)
            if (y[i] < B) bonds.push_back({u, u + stride[i], i});
    }
}

Coord BlockShape::local_coords(std::size_t u) const {
    Coord y(d);
    for (int i = 0; i < d; ++i) {
        y[i] = static_cast<int>(u % side);
        u /= side;
    }
    return y;
}

BlockLayout block_layout(const TorusGeometry& g, const BlockShape& shape, const Coord& t, Placement placement) {
    check_factor_point(g, t);
    if (shape.d != g.d() || shape.side != g.B() + 1) throw std::domain_error("block shape does not match geometry");
    Affine a = Affine::identity(g.d());
    if (placement == Placement::reflection) {
        a = theta_affine(g, t);
    } else {
        for (int i = 0; i < g.d(); ++i) a.shift[i] = 2 * g.B() * t[i];
    }
    BlockLayout out;
    out.sites.resize(shape.sites);
    out.edges.assign(shape.sites * shape.d, 0);
    for (std::size_t u = 0; u < shape.sites; ++u) out.sites[u] = map_site(g, a, shape.local_coords(u));
    for (const auto& b : shape.bonds) out.edges[shape.edge_slot(b.u, b.dir)] = map_edge(g, a, shape.local_coords(b.u), b.dir);
    return out;
}

std::vector<BlockLayout> all_block_layouts(const TorusGeometry& g, const BlockShape& shape, Placement placement) {
    std::vector<BlockLayout> out;
    out.reserve(g.factor_points());
    for (std::size_t t = 0; t < g.factor_points(); ++t) out.push_back(block_layout(g, shape, g.factor_coords(t), placement));
    return out;
}

}  // namespace fgap
