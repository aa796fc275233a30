#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "fgap/mc.hpp"

using namespace fgap;

namespace {

constexpr double pi = std::numbers::pi;

Schedule short_schedule(long burn, long sweeps) {
    Schedule s;
    s.burn_in = burn;
    s.sweeps = sweeps;
    return s;
}

bool within(double x, double target, double err, double k = 3.0) { return std::abs(x - target) <= k * err + 1e-12; }

// log of w(c) q(c -> c') A(c -> c') with the global energy.
double log_flux(const ModelSpec& m, const TorusGeometry& g, double beta, Configuration& c, const Move& mv, double aw,
                double ew) {
    double q = proposal_density(m, c, mv, aw, ew);
    double dE = energy_change(m, g, c, mv);
    double log_a = std::min(0.0, -beta * dE);
    return -beta * torus_energy(m, g, c) + std::log(q) + log_a;
}

}  // namespace

TEST_CASE("detailed balance of single updates") {
    TorusGeometry g(2, 4);
    std::vector<ModelSpec> models{Potts{3, 1.0, 0.0},      Potts{2, 1.0, -0.5},      DilutedPotts{3, 0.5, 0.3},
                                  DilutedXY{0.5, 0.2},     O2AF{1.0},                NonlinearFerromagnet{4.0},
                                  Magnetostriction{}};
    std::mt19937_64 rng(7);
    const double beta = 0.7;
    int checked = 0;
    for (const auto& m : models) {
        const bool magneto = std::holds_alternative<Magnetostriction>(m);
        for (int trial = 0; trial < 2000; ++trial) {
            Configuration c = start_configuration(m, g, Start::disordered, rng);
            double aw = trial % 3 == 0 ? pi : 0.2 + 2.0 * std::uniform_real_distribution<double>(0, 1)(rng);
            double ew = 0.1 + std::uniform_real_distribution<double>(0, 1)(rng);
            Move::Kind kind = magneto && trial % 2 ? Move::Kind::edge : Move::Kind::site;
            std::size_t idx = kind == Move::Kind::edge ? rng() % g.edges() : rng() % g.sites();
            Move fwd = propose(m, g, c, kind, idx, aw, ew, rng);
            Move back = current_value(m, c, kind, idx);
            Configuration c2 = c;
            apply(c2, fwd);
            if (c2 == c) continue;  // identity proposals carry no flux
            double qf = proposal_density(m, c, fwd, aw, ew);
            double qb = proposal_density(m, c2, back, aw, ew);
            REQUIRE(qf > 0.0);
            CHECK(qb == doctest::Approx(qf).epsilon(1e-12));
            double lf = log_flux(m, g, beta, c, fwd, aw, ew);
            double lb = log_flux(m, g, beta, c2, back, aw, ew);
            CHECK(std::abs(lf - lb) < 1e-9 * (1.0 + std::abs(lf)));
            ++checked;
        }
    }
    CHECK(checked >= 10000);
}

TEST_CASE("edge proposals stay inside (0, r_max]") {
    TorusGeometry g(2, 4);
    Magnetostriction ms;
    ModelSpec m = ms;
    std::mt19937_64 rng(3);
    Configuration c = start_configuration(m, g, Start::disordered, rng);
    for (int k = 0; k < 20000; ++k) {
        Move mv = propose(m, g, c, Move::Kind::edge, rng() % g.edges(), pi, 3.0, rng);
        CHECK((mv.r > 0.0 && mv.r <= ms.r_max));
    }
}

TEST_CASE("beta = 0 Potts: uniform marginals and independence oracles") {
    TorusGeometry g(2, 16);
    ModelSpec m = Potts{10, 1.0, 0.0};
    ChainState st = make_chain({}, 11, 0);
    st.config = start_configuration(m, g, Start::ordered, st.rng);
    for (int k = 0; k < 20; ++k) sweep(m, g, 0.0, st);
    std::vector<double> counts(10, 0.0);
    const int samples = 200;
    for (int k = 0; k < samples; ++k) {
        sweep(m, g, 0.0, st);
        for (int l : st.config.labels) counts[l] += 1.0;
    }
    double expected = samples * 256.0 / 10.0, chi2 = 0.0;
    for (double x : counts) chi2 += (x - expected) * (x - expected) / expected;
    CHECK(chi2 < 21.666);  // chi-square 99% quantile, 9 degrees of freedom

    ChainState st2 = make_chain({}, 12, 0);
    st2.config = start_configuration(m, g, Start::disordered, st2.rng);
    ScanRow row = estimate_rho(m, g, 0.0, potts_events(10), short_schedule(100, 20000), st2);
    CHECK(within(row.energy_mean, -0.2, row.energy_err));
    double dis = (std::pow(9.0, 4) + 9.0) / 1e4;
    double total = row.rho_bad;
    for (double x : row.rho) total += x;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(within(row.rho[0], dis, row.rho_err[0]));
    CHECK(row.energy_err > 0.0);
    CHECK(row.converged);
}

TEST_CASE("beta = 0 oracles for the other models") {
    TorusGeometry g(2, 8);
    const int d = 2;
    struct Case {
        ModelSpec m;
        double energy;
    };
    const double q = 3.0, lam = 0.5, kap = 0.3;
    Magnetostriction ms;
    double r2 = ms.r_max * ms.r_max;
    std::vector<Case> cases{
        {DilutedPotts{3, lam, kap}, -lam / 2 - d / 4.0 * (kap - (1.0 - 1.0 / q))},
        {DilutedXY{lam, kap}, -lam / 2 - d / 4.0 * (kap - 1.0)},
        {O2AF{1.0}, 0.0},
        // E cos^8(x/2) over a uniform angle = C(8,4) / 2^8
        {NonlinearFerromagnet{4.0}, -d * 70.0 / 256.0},
        // spring: E (r - R)^2 for r uniform on (0, r_max]; four perpendicular pairs per site
        {ms, d * ms.kappa * (r2 / 12.0 + std::pow(ms.r_max / 2 - ms.R, 2)) + 4.0 * ms.lambda * r2 / 6.0},
    };
    std::uint64_t chain = 0;
    for (const auto& cs : cases) {
        CAPTURE(model_name(cs.m));
        ChainState st = make_chain({}, 21, chain++);
        st.config = start_configuration(cs.m, g, Start::ordered, st.rng);
        GoodFamily fam{{whole_space_event()}, 1};
        ScanRow row = estimate_rho(cs.m, g, 0.0, fam, short_schedule(500, 20000), st);
        CHECK(within(row.energy_mean, cs.energy, row.energy_err));
        CHECK(row.rho[0] == 1.0);
        CHECK(row.rho_err[0] == 0.0);
        CHECK(row.rho_bad == 0.0);
    }
}

TEST_CASE("low temperature Potts stays ordered") {
    TorusGeometry g(2, 16);
    ModelSpec m = Potts{10, 1.0, 0.0};
    ChainState st = make_chain({}, 5, 0);
    st.config = start_configuration(m, g, Start::ordered, st.rng);
    GoodFamily fam = potts_events(10);
    ScanRow row = estimate_rho(m, g, 3.0, fam, short_schedule(500, 3000), st);
    CHECK(fam.names()[1] == "ord_1");
    CHECK(row.rho[1] > 0.9);
    CHECK(row.rho[0] < 0.05);
    CHECK(row.energy_mean < -1.9);
}

TEST_CASE("block densities partition every sample") {
    TorusGeometry g(2, 8);
    ModelSpec m = Potts{3, 1.0, 0.0};
    ChainState st = make_chain({}, 9, 0);
    st.config = start_configuration(m, g, Start::disordered, st.rng);
    ScanRow row = estimate_rho(m, g, 1.0, potts_events(3), short_schedule(100, 2000), st);
    double total = row.rho_bad;
    for (double x : row.rho) {
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
        total += x;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(row.samples == 2000);
}

TEST_CASE("scans are reproducible from the seed") {
    TorusGeometry g(2, 8);
    ModelSpec m = Potts{3, 1.0, 0.0};
    GoodFamily fam = potts_events(3);
    std::vector<double> betas{0.5, 1.0, 1.5};
    Schedule sch = short_schedule(100, 1000);
    std::vector<Start> both{Start::ordered, Start::disordered};
    ScanCurve a = beta_scan(m, g, fam, betas, sch, both, 42);
    ScanCurve b = beta_scan(m, g, fam, betas, sch, both, 42);
    ScanCurve c = beta_scan(m, g, fam, betas, sch, both, 43);
    REQUIRE(a.rows.size() == 6);
    CHECK(a.events == fam.names());
    bool differs = false;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].energy_mean == b.rows[i].energy_mean);
        CHECK(a.rows[i].energy_err == b.rows[i].energy_err);
        CHECK(a.rows[i].rho == b.rows[i].rho);
        CHECK(a.rows[i].rho_bad == b.rows[i].rho_bad);
        differs = differs || a.rows[i].energy_mean != c.rows[i].energy_mean;
    }
    CHECK(differs);
    CHECK(a.rows[0].start == Start::ordered);
    CHECK(a.rows[3].start == Start::disordered);
    CHECK(a.rows[4].beta == 1.0);
}

TEST_CASE("O2AF settles into one stripe family") {
    // At beta = 5 spin waves exceed the default tolerance (kappa = 0.1, B = 4); a
    // looser kappa on 2-blocks resolves the stripes.
    TorusGeometry g(2, 16, 2);
    ModelSpec m = O2AF{1.0};
    GoodFamily fam = o2af_events(0.7, 2);
    for (int variant : {0, 1}) {
        ChainState st = make_chain({}, 77, static_cast<std::uint64_t>(variant));
        st.config = start_configuration(m, g, Start::ordered, st.rng, variant);
        ScanRow row = estimate_rho(m, g, 5.0, fam, short_schedule(1000, 4000), st);
        CAPTURE(variant);
        CHECK(row.rho[0] + row.rho[1] > 0.8);
        CHECK(row.rho[variant] > 0.8);
        CHECK(row.rho[1 - variant] < 0.05);
        CHECK(row.acceptance > 0.3);
        CHECK(row.acceptance < 0.6);
    }
}

TEST_CASE("magnetostriction rows report the bond-length tail") {
    TorusGeometry g(2, 4);
    ModelSpec m = Magnetostriction{};
    ChainState st = make_chain({}, 1, 0);
    st.config = start_configuration(m, g, Start::disordered, st.rng);
    ScanRow row = estimate_rho(m, g, 1.0, default_family(m, EventParams{}, 2), short_schedule(200, 1000), st);
    CHECK(row.flags.find("r_tail=") != std::string::npos);
    for (double r : st.config.edges) CHECK((r > 0.0 && r <= 4.0));
}

TEST_CASE("gap report on constructed curves") {
    ScanCurve curve;
    curve.events = {"low", "high"};
    auto row = [](double beta, Start s, double e, std::vector<double> rho) {
        ScanRow r;
        r.beta = beta;
        r.start = s;
        r.energy_mean = e;
        r.energy_err = 0.01;
        r.rho = rho;
        r.rho_err = {0.0, 0.0};
        r.rho_bad = 1.0 - rho[0] - rho[1];
        return r;
    };
    // disordered branch jumps from -1 to -2 after beta = 1.5
    for (double b : {1.0, 1.25, 1.5, 1.75, 2.0}) {
        curve.rows.push_back(row(b, Start::ordered, -2.0, {0.0, 0.95}));
        curve.rows.push_back(row(b, Start::disordered, b <= 1.5 ? -1.0 : -2.0, b <= 1.5 ? std::vector<double>{0.95, 0.0} : std::vector<double>{0.0, 0.95}));
    }
    GapReport rep = gap_report(curve, 0.1);
    CHECK(rep.jump);
    CHECK(rep.bracket_lo == 1.0);
    CHECK(rep.bracket_hi == 1.5);
    REQUIRE(rep.gap);
    CHECK(rep.gap_lo == -2.0);
    CHECK(rep.gap_hi == -1.0);
    CHECK(rep.width() == 1.0);
    CHECK(rep.inside_gap.empty());
    CHECK(rep.no_dominant.empty());

    // a chain stuck halfway and a chain with no dominant event
    curve.rows.push_back(row(3.0, Start::ordered, -1.5, {0.5, 0.3}));
    curve.rows.back().flags = "";
    ScanRow bad = row(3.5, Start::ordered, -2.0, {0.0, 0.95});
    bad.converged = false;
    curve.rows.push_back(bad);
    rep = gap_report(curve, 0.1);
    REQUIRE(rep.inside_gap.size() == 1);
    CHECK(rep.inside_gap[0] == 10);
    REQUIRE(rep.no_dominant.size() == 1);
    CHECK(rep.no_dominant[0] == 10);
    REQUIRE(rep.unconverged.size() == 1);
    CHECK(rep.unconverged[0] == 11);

    // an unconverged partner keeps its beta out of the bracket
    ScanCurve partial = curve;
    partial.rows[1].converged = false;  // beta = 1.0, disordered
    rep = gap_report(partial, 0.1);
    CHECK(rep.bracket_lo == 1.25);
    CHECK(rep.bracket_hi == 1.5);

    ScanCurve flat;
    for (double b : {0.5, 1.0}) {
        flat.rows.push_back(row(b, Start::ordered, -b, {0.95, 0.0}));
        flat.rows.push_back(row(b, Start::disordered, -b + 0.02, {0.95, 0.0}));
    }
    GapReport none = gap_report(flat);
    CHECK_FALSE(none.jump);
    CHECK_FALSE(none.gap);
    CHECK(none.width() == 0.0);
}

TEST_CASE("Ising-like scan has no gap") {
    TorusGeometry g(2, 8);
    ModelSpec m = Potts{2, 1.0, 0.0};
    ScanCurve curve = beta_scan(m, g, potts_events(2), {0.3, 0.6, 0.88, 1.2}, short_schedule(2000, 20000),
                                {Start::ordered, Start::disordered}, 5);
    GapReport rep = gap_report(curve);
    CHECK_FALSE(rep.gap);
}

TEST_CASE("mc argument checks") {
    TorusGeometry g(2, 8);
    ModelSpec m = Potts{3, 1.0, 0.0};
    ChainState st = make_chain({}, 1, 0);
    st.config = start_configuration(m, g, Start::ordered, st.rng);
    CHECK_THROWS_AS(sweep(m, g, -1.0, st), std::domain_error);
    CHECK_THROWS_AS(estimate_rho(m, g, 1.0, o2af_events(0.1, 2), Schedule{}, st), std::domain_error);
    CHECK_THROWS_AS(estimate_rho(m, g, 1.0, potts_events(3), short_schedule(0, 5), st), std::domain_error);
    CHECK_THROWS_AS(beta_scan(m, g, potts_events(3), {1.0, 0.5}, Schedule{}, {Start::ordered}, 1), std::domain_error);
    CHECK(parse_start("disordered") == Start::disordered);
    CHECK_THROWS_AS(parse_start("hot"), std::invalid_argument);
}
