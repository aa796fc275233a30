#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "fgap/events.hpp"

using namespace fgap;

namespace {

constexpr double pi = std::numbers::pi;

std::size_t local_index(const BlockShape& s, const Coord& x) {
    std::size_t u = 0, stride = 1;
    for (int i = 0; i < s.d; ++i) {
        u += stride * static_cast<std::size_t>(x[i]);
        stride *= static_cast<std::size_t>(s.side);
    }
    return u;
}

// Mirror image of a block through its midplane normal to axis k.
LocalBlock mirrored(const LocalBlock& b, int k) {
    LocalBlock out = b;
    const auto& s = b.shape;
    for (std::size_t u = 0; u < s.sites; ++u) {
        Coord x = s.local_coords(u);
        x[k] = s.side - 1 - x[k];
        std::size_t w = local_index(s, x);
        if (!b.config.labels.empty()) out.config.labels[w] = b.config.labels[u];
        if (!b.config.occupancy.empty()) out.config.occupancy[w] = b.config.occupancy[u];
        if (!b.config.angles.empty()) out.config.angles[w] = b.config.angles[u];
    }
    if (!b.config.edges.empty())
        for (const auto& bd : s.bonds) {
            Coord x = s.local_coords(bd.u);
            x[k] = s.side - 1 - x[k];
            if (bd.dir == k) --x[k];
            out.config.edges[s.edge_slot(local_index(s, x), bd.dir)] = b.config.edges[s.edge_slot(bd.u, bd.dir)];
        }
    return out;
}

void randomize(const ModelSpec& m, LocalBlock& b, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto& c = b.config;
    int q = 2;
    if (auto p = std::get_if<Potts>(&m)) q = p->q;
    if (auto p = std::get_if<DilutedPotts>(&m)) q = p->q;
    for (auto& l : c.labels) l = static_cast<int>(u(rng) * q);
    if (std::holds_alternative<Magnetostriction>(m))
        for (auto& l : c.labels) l = u(rng) < 0.5 ? 1 : -1;
    for (auto& o : c.occupancy) o = u(rng) < 0.5;
    for (auto& a : c.angles) a = wrap_angle(2 * pi * u(rng));
    if (auto p = std::get_if<Magnetostriction>(&m))
        for (auto& r : c.edges) r = p->r_max * (1.0 - u(rng));
}

struct Case {
    ModelSpec model;
    GoodFamily family;
};

std::vector<Case> catalog() {
    return {{Potts{3}, potts_events(3)},
            {Potts{2}, potts_events(2)},
            {Potts{5}, potts_events(5)},
            {DilutedPotts{3, 0.5, 0.5}, diluted_events(DilutedPotts{3, 0.5, 0.5})},
            {DilutedXY{0.5, 0.5}, diluted_events(DilutedXY{0.5, 0.5})},
            {O2AF{1.0}, o2af_events(0.1, 4)},
            {NonlinearFerromagnet{100.0}, nlvm_events(3.0, 100.0)},
            {Magnetostriction{}, magnetostriction_events(0.9, 0.2, 4.0)}};
}

}  // namespace

TEST_CASE("Potts event examples") {
    auto f = potts_events(4);
    REQUIRE(f.goods.size() == 5);
    LocalBlock b(Potts{4}, 2, 1);
    for (int m = 0; m < 4; ++m) {
        for (auto& l : b.config.labels) l = m;
        CHECK(f.classify(b.view()) == m + 1);
        CHECK(f.goods[m + 1].name == "ord_" + std::to_string(m + 1));
    }
    b.config.labels = {0, 1, 2, 3};
    CHECK(f.classify(b.view()) == 0);
    b.config.labels = {0, 0, 0, 1};
    CHECK(f.classify(b.view()) == -1);
    CHECK(f.bad()(b.view()));

    auto f2 = potts_events(2);
    CHECK(f2.names() == std::vector<std::string>{"dis_a", "dis_b", "ord_1", "ord_2"});
    LocalBlock c(Potts{2}, 2, 1);
    c.config.labels = {0, 1, 1, 0};
    CHECK(f2.classify(c.view()) == 0);
    c.config.labels = {1, 0, 0, 1};
    CHECK(f2.classify(c.view()) == 1);
    CHECK_THROWS_AS(potts_events(1), std::domain_error);
}

TEST_CASE("diluted event examples") {
    auto f = diluted_events(DilutedXY{0.5, 0.5});
    CHECK(f.names() == std::vector<std::string>{"dense", "even", "odd"});
    LocalBlock b(DilutedXY{0.5, 0.5}, 2, 1);
    CHECK(f.classify(b.view()) == 0);
    // local order (0,0),(1,0),(0,1),(1,1): even sites are 0 and 3
    b.config.occupancy = {1, 0, 0, 1};
    CHECK(f.goods[1](b.view()));
    CHECK_FALSE(f.goods[2](b.view()));
    b.config.occupancy = {0, 1, 1, 0};
    CHECK(f.classify(b.view()) == 2);
    b.config.occupancy = {0, 0, 0, 0};
    CHECK(f.classify(b.view()) == -1);

    auto fp = diluted_events(DilutedPotts{3, 0.5, 0.5});
    CHECK(fp.names() == std::vector<std::string>{"dense_1", "dense_2", "dense_3", "even", "odd"});
    LocalBlock c(DilutedPotts{3, 0.5, 0.5}, 2, 1);
    c.config.labels = {2, 2, 2, 2};
    CHECK(fp.classify(c.view()) == 2);
    c.config.labels = {2, 2, 1, 2};
    CHECK(fp.classify(c.view()) == -1);
    CHECK_THROWS_AS(diluted_events(Potts{3}), std::domain_error);
}

TEST_CASE("O(2) antiferromagnet stripe events") {
    TorusGeometry g(2, 8, 4);
    auto f = o2af_events(0.1, 4);
    REQUIRE(f.B == 4);
    Configuration c = constant_configuration(O2AF{1.0}, g);
    auto fill = [&](auto sign) {
        for (Site s = 0; s < g.sites(); ++s) c.angles[s] = wrap_angle(0.7 + (sign(g.coords(s)) ? pi : 0.0));
    };
    for (double kappa : {0.01, 0.1, 0.5}) {
        auto fk = o2af_events(kappa, 4);
        fill([](const Coord& x) { return x[1] % 2 != 0; });
        CHECK(block_density(fk.goods[0], g, c, 2) == 1.0);
        CHECK(block_density(fk.goods[1], g, c, 2) == 0.0);
        fill([](const Coord& x) { return x[0] % 2 != 0; });
        CHECK(block_density(fk.goods[0], g, c, 2) == 0.0);
        CHECK(block_density(fk.goods[1], g, c, 2) == 1.0);
    }
    fill([](const Coord& x) { return (x[0] + x[1]) % 2 != 0; });
    CHECK(block_density(f.bad(), g, c, 2) == 1.0);
    CHECK_THROWS_AS(o2af_events(0.1, 3), std::domain_error);
    CHECK_THROWS_AS(o2af_events(1.0, 4), std::domain_error);
}

TEST_CASE("bond classification") {
    CHECK(classify_bond(0.0005, 10, 1e4) == BondClass::strongly_ordered);
    CHECK(classify_bond(0.05, 10, 1e4) == BondClass::weakly_ordered);
    CHECK(classify_bond(0.1, 10, 1e4) == BondClass::disordered);
    CHECK(classify_bond(0.001, 10, 1e4) == BondClass::strongly_ordered);
    CHECK(classify_bond(2 * pi - 0.0005, 10, 1e4) == BondClass::strongly_ordered);

    auto rank = [](BondClass c) { return c == BondClass::strongly_ordered ? 0 : c == BondClass::weakly_ordered ? 1 : 2; };
    for (double p : {1.0, 100.0, 1e4}) {
        double C = std::min(3.0, std::sqrt(p));
        int prev = 0;
        for (int k = 0; k <= 20000; ++k) {
            double x = pi * k / 20000.0;
            int r = rank(classify_bond(x, C, p));
            CHECK(r == rank(classify_bond(-x, C, p)));
            CHECK(r >= prev);
            prev = r;
        }
    }
}

TEST_CASE("nonlinear ferromagnet events") {
    const double C = 3.0, p = 100.0;
    auto f = nlvm_events(C, p);
    auto [wo, mix] = nlvm_bad_split(C, p);
    LocalBlock b(NonlinearFerromagnet{p}, 2, 1);
    b.config.angles = {0.4, 0.4, 0.4, 0.4};
    CHECK(f.classify(b.view()) == 0);
    b.config.angles = {0.0, pi, pi, 0.0};
    CHECK(f.classify(b.view()) == 1);
    // A 4-cycle cannot carry exactly one nonzero gap, so the weak gap sits on two bonds.
    const double w = C / (2 * std::sqrt(p));
    b.config.angles = {0.0, 0.0, 0.0, w};
    CHECK(f.classify(b.view()) == -1);
    CHECK(wo(b.view()));
    CHECK_FALSE(mix(b.view()));
    b.config.angles = {0.0, 0.0, 0.0, 2.0};
    CHECK(f.classify(b.view()) == -1);
    CHECK(mix(b.view()));
    CHECK_FALSE(wo(b.view()));

    CHECK_THROWS_AS(nlvm_events(11.0, 100.0), std::domain_error);
    CHECK_THROWS_AS(nlvm_bad_split(0.5, 100.0), std::domain_error);
}

TEST_CASE("bad split covers the nonlinear ferromagnet bad event") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto [C, p] : {std::pair{3.0, 100.0}, std::pair{10.0, 1e4}, std::pair{1.0, 1.0}}) {
        auto f = nlvm_events(C, p);
        auto [wo, mix] = nlvm_bad_split(C, p);
        LocalBlock b(NonlinearFerromagnet{p}, 2, 1);
        // spread angles on scales straddling both thresholds
        const double scales[] = {1.0 / (C * std::sqrt(p)), C / std::sqrt(p), 1.0, pi};
        for (int k = 0; k < 100000; ++k) {
            double s = scales[k % 4];
            for (auto& a : b.config.angles) a = wrap_angle(s * u(rng));
            if (k % 8 == 7) b.config.angles[3] = wrap_angle(b.config.angles[3] + pi);
            auto v = b.view();
            bool bad = f.classify(v) < 0;
            if (bad) REQUIRE((wo(v) || mix(v)));
            else REQUIRE_FALSE((wo(v) || mix(v)));
        }
    }
}

TEST_CASE("magnetostriction event examples") {
    const double eta = 0.9, eps = 0.2;
    auto f = magnetostriction_events(eta, eps, 4.0);
    CHECK(f.names() == std::vector<std::string>{"contr", "exp_plus", "exp_minus"});
    LocalBlock b(Magnetostriction{}, 2, 1);
    auto set_edges = [&](double r) {
        for (const auto& bd : b.shape.bonds) b.config.edges[b.shape.edge_slot(bd.u, bd.dir)] = r;
    };
    set_edges(eta / 2);
    b.config.labels = {1, -1, -1, 1};
    CHECK(f.classify(b.view()) == 0);
    set_edges(eta + 2 * eps);
    b.config.labels = {1, 1, 1, 1};
    CHECK(f.classify(b.view()) == 1);
    b.config.labels = {-1, -1, -1, -1};
    CHECK(f.classify(b.view()) == 2);
    b.config.edges[b.shape.edge_slot(0, 0)] = eta + eps / 2;
    CHECK(f.classify(b.view()) == -1);
    set_edges(eta / 2);
    b.config.edges[b.shape.edge_slot(0, 1)] = eta + 2 * eps;
    CHECK(f.classify(b.view()) == -1);
    CHECK_THROWS_AS(magnetostriction_events(0.9, 0.2, 1.0), std::domain_error);
}

TEST_CASE("goods and bad partition the block space") {
    std::mt19937_64 rng(17);
    for (auto& [m, f] : catalog()) {
        CAPTURE(model_name(m));
        LocalBlock b(m, 2, f.B);
        auto bad = f.bad();
        for (int k = 0; k < 20000; ++k) {
            // mix uniform blocks with blocks drawn from each good event
            std::size_t pick = k % (f.goods.size() + 1);
            if (pick < f.goods.size() && f.goods[pick].sampler)
                f.goods[pick].sampler(b, rng);
            else
                randomize(m, b, rng);
            auto v = b.view();
            int hits = 0;
            for (const auto& g : f.goods) hits += g(v);
            REQUIRE(hits + static_cast<int>(bad(v)) == 1);
        }
    }
}

TEST_CASE("reflection symmetry flags are accurate") {
    std::mt19937_64 rng(23);
    for (auto& [m, f] : catalog()) {
        CAPTURE(model_name(m));
        LocalBlock b(m, 2, f.B);
        for (const auto& e : f.goods) {
            CAPTURE(e.name);
            bool broken = false;
            int positives = 0;
            for (int k = 0; k < 4000; ++k) {
                if (e.sampler && k % 2 == 0)
                    e.sampler(b, rng);
                else if (std::holds_alternative<Potts>(m) || std::holds_alternative<DilutedPotts>(m)) {
                    // exhaustive-ish: small discrete blocks hit every event often enough
                    randomize(m, b, rng);
                    if (k % 3 == 0) {
                        int l = b.config.labels[0];
                        for (std::size_t u = 0; u < b.shape.sites; ++u) {
                            b.config.labels[u] = (b.shape.parity[u] && std::holds_alternative<Potts>(m) && k % 2) ? (l + 1) % 2 : l;
                            if (!b.config.occupancy.empty()) b.config.occupancy[u] = k % 6 == 0 ? 1 : 1 - b.shape.parity[u];
                        }
                    }
                } else
                    randomize(m, b, rng);
                bool here = e(b.view());
                positives += here;
                for (int k2 = 0; k2 < 2; ++k2) {
                    LocalBlock r = mirrored(b, k2);
                    if (e(r.view()) != here) broken = true;
                }
            }
            CHECK(positives > 0);
            CHECK(broken == !e.reflection_symmetric);
        }
    }
}

TEST_CASE("check_family passes for every catalog family") {
    FamilyCheckOptions opt;
    opt.random_samples = 100000;
    for (auto& [m, f] : catalog()) {
        CAPTURE(model_name(m));
        TorusGeometry g(2, 8, f.B);
        auto rep = check_family(f, m, g, opt);
        CAPTURE(rep.witness.value_or(""));
        CHECK(rep.pass);
        CHECK(rep.method == (is_discrete(m) ? "exhaustive" : "analytic+randomized"));
    }
    // Potts with 2-blocks: 3^9 block states
    GoodFamily f2 = potts_events(3);
    f2.B = 2;
    auto rep = check_family(f2, Potts{3}, TorusGeometry(2, 8, 2), opt);
    CHECK(rep.pass);
    CHECK(rep.samples == 19683);
    CHECK_THROWS_AS(check_family(potts_events(3), Potts{3}, TorusGeometry(2, 8, 2), opt), std::domain_error);
}

TEST_CASE("check_family rejects broken families with a witness") {
    FamilyCheckOptions opt;
    opt.random_samples = 20000;
    GoodFamily dup = potts_events(3);
    dup.goods.push_back(dup.goods[1]);
    auto rep = check_family(dup, Potts{3}, TorusGeometry(2, 4), opt);
    CHECK_FALSE(rep.pass);
    REQUIRE(rep.witness);
    CHECK(rep.witness->find("ord_1") != std::string::npos);

    // neighbour-compatible: ordered and "no two equal neighbours on the bottom row"
    GoodFamily loose;
    loose.goods.push_back(potts_ordered(0));
    BlockEvent e;
    e.name = "loose";
    e.predicate = [](const BlockView& v) { return v.label(0) != v.label(1); };
    loose.goods.push_back(e);
    rep = check_family(loose, Potts{3}, TorusGeometry(2, 4), opt);
    CHECK_FALSE(rep.pass);
    CHECK(rep.witness);

    auto nl = nlvm_events(3.0, 100.0);
    nl.goods.push_back(nl.goods[0]);
    nl.goods.back().name = "so_copy";
    rep = check_family(nl, NonlinearFerromagnet{100.0}, TorusGeometry(2, 4), opt);
    CHECK_FALSE(rep.pass);
    CHECK(rep.witness);
}

TEST_CASE("block density") {
    TorusGeometry g(2, 8);
    Configuration c = constant_configuration(Potts{10}, g);
    for (auto& l : c.labels) l = 6;
    CHECK(block_density(whole_space_event(), g, c, 8) == 1.0);
    CHECK(block_density(empty_event(), g, c, 8) == 0.0);
    CHECK(block_density(potts_ordered(6), g, c, 8) == 1.0);
    CHECK(block_density(potts_ordered(5), g, c, 8) == 0.0);
    CHECK_THROWS_AS(block_density(whole_space_event(), g, c, 9), std::domain_error);

    // a single flipped site spoils the four 1-blocks containing it
    c.labels[g.index({3, 3})] = 0;
    CHECK(block_density(potts_ordered(6), g, c, 8) == doctest::Approx(60.0 / 64.0));
    CHECK(block_density(potts_events(10).bad(), g, c, 8) == doctest::Approx(4.0 / 64.0));
}

TEST_CASE("block density is translation covariant over full periods") {
    std::mt19937_64 rng(3);
    for (auto& [m, f] : catalog()) {
        CAPTURE(model_name(m));
        TorusGeometry g(2, 8, f.B);
        int N = g.factor_side();
        Configuration c = constant_configuration(m, g);
        // patchwork: each block drawn from a random good event or uniformly
        for (int rep = 0; rep < 3; ++rep) {
            LocalBlock b(m, 2, f.B);
            randomize(m, b, rng);
            for (Site s = 0; s < g.sites(); ++s) {
                std::size_t u = (s * 7 + rep) % b.shape.sites;
                if (!c.labels.empty()) c.labels[s] = b.config.labels[u];
                if (!c.occupancy.empty()) c.occupancy[s] = b.config.occupancy[u];
                if (!c.angles.empty()) c.angles[s] = b.config.angles[u];
            }
            for (std::size_t e = 0; e < c.edges.size(); ++e) c.edges[e] = b.config.edges[e % b.config.edges.size()];
            auto shifted = transport(c, translation_map(g, {f.B, 0}));
            auto shifted2 = transport(c, translation_map(g, {0, 3 * f.B}));
            for (const auto& e : f.goods) {
                double r = block_density(e, g, c, N);
                CHECK(block_density(e, g, shifted, N) == r);
                CHECK(block_density(e, g, shifted2, N) == r);
                if (e.reflection_symmetric) CHECK(block_density(e, g, c, N, Placement::reflection) == r);
            }
        }
    }
}
