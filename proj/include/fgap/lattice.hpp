#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace fgap {

using Site = std::size_t;
using Coord = std::vector<int>;

// Periodic box T_L = (Z/LZ)^d tiled by closed B-blocks. Sites are indexed
// row-major with coordinate 0 fastest. Edge (x, i) joins x and x + e_i and has
// index x * d + i.
class TorusGeometry {
public:
    TorusGeometry(int d, int L, int B = 1);

    int d() const { return d_; }
    int L() const { return L_; }
    int B() const { return B_; }
    int factor_side() const { return L_ / B_; }
    std::size_t sites() const { return sites_; }
    std::size_t edges() const { return sites_ * static_cast<std::size_t>(d_); }
    std::size_t factor_points() const { return factor_points_; }

    // Set when L/B is not a power of two.
    const std::optional<std::string>& warning() const { return warning_; }

    Coord coords(Site s) const;
    Site index(const Coord& x) const;  // wraps every coordinate
    Site neighbor(Site s, int dir, int step) const;
    std::size_t edge(Site s, int dir) const { return s * static_cast<std::size_t>(d_) + dir; }

    Coord factor_coords(std::size_t t) const;
    std::size_t factor_index(const Coord& t) const;  // throws on out-of-range t

    bool operator==(const TorusGeometry& o) const {
        return d_ == o.d_ && L_ == o.L_ && B_ == o.B_;
    }

private:
    int d_, L_, B_;
    std::size_t sites_, factor_points_;
    std::vector<Site> plus_, minus_;
    std::optional<std::string> warning_;
};

// A lattice automorphism stored as site and edge permutations.
struct SiteMap {
    std::vector<Site> site;
    std::vector<std::size_t> edge;

    Site operator()(Site s) const { return site[s]; }
    bool is_bijection() const;
    bool is_involution() const;
    std::vector<Site> fixed_sites() const;
};

SiteMap compose(const SiteMap& outer, const SiteMap& inner);
SiteMap inverse(const SiteMap& m);
SiteMap identity_map(const TorusGeometry& g);
SiteMap translation_map(const TorusGeometry& g, const Coord& shift);

// Sites of Λ_B + Bt in local order (local coordinate 0 fastest).
std::vector<Site> block_sites(const TorusGeometry& g, const Coord& t);

// θ_t: odd components reflect through the block midplane, then every
// component is shifted by B t_i.
SiteMap theta_t_map(const TorusGeometry& g, const Coord& t);

struct PlaneSpec {
    enum class Kind { axis, diagonal, antidiagonal };
    Kind kind = Kind::axis;
    int axis = 0;    // used by Kind::axis
    int offset = 0;  // axis: fixed coordinate; diagonal: x0 - x1; antidiagonal: x0 + x1
};

std::string describe(const PlaneSpec& p);

// Axis planes fix the columns offset and offset + L/2. Diagonal planes exist
// for d = 2 only and fix exactly their own line.
SiteMap plane_reflection(const TorusGeometry& g, const PlaneSpec& plane);

// Sites on the plane side of T_L^+ within `depth` lattice steps of the plane.
std::vector<Site> half_space_sites(const TorusGeometry& g, const PlaneSpec& plane, int depth);

// Local geometry of a (B+1)^d block: bonds joining in-block neighbours.
struct LocalBond {
    std::size_t u, v;
    int dir;
};

struct BlockShape {
    int d, side;
    std::size_t sites;
    std::vector<LocalBond> bonds;
    std::vector<int> parity;  // parity of the local coordinate sum

    BlockShape(int d, int B);
    Coord local_coords(std::size_t u) const;
    // Local edge slot of a bond starting at u in direction dir.
    std::size_t edge_slot(std::size_t u, int dir) const { return u * d + dir; }
};

enum class Placement { translation, reflection };

// Global indices of a block's local sites and local edge slots.
struct BlockLayout {
    std::vector<Site> sites;
    std::vector<std::size_t> edges;  // indexed by BlockShape::edge_slot; unused slots hold 0
};

BlockLayout block_layout(const TorusGeometry& g, const BlockShape& shape, const Coord& t, Placement placement);
std::vector<BlockLayout> all_block_layouts(const TorusGeometry& g, const BlockShape& shape, Placement placement);

}  // namespace fgap
