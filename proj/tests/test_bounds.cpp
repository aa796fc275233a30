#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

#include "fgap/bounds.hpp"
#include "fgap/exact.hpp"

using namespace fgap;

namespace {

constexpr double pi = std::numbers::pi;

int idx2(int x0, int x1, int N) { return x0 + N * x1; }

// Depth-first enumeration of simple nearest-neighbour paths from x to y that avoid gamma.
bool path_avoiding(int N, int d, int x, int y, std::uint32_t gamma) {
    int n = 1;
    for (int i = 0; i < d; ++i) n *= N;
    if ((gamma >> x & 1u) || (gamma >> y & 1u)) return false;
    std::vector<char> on(n, 0);
    std::function<bool(int)> dfs = [&](int u) {
        if (u == y) return true;
        on[u] = 1;
        auto c = box_coords(u, N, d);
        for (int i = 0; i < d; ++i)
            for (int step : {-1, 1}) {
                auto e = c;
                e[i] += step;
                if (e[i] < 0 || e[i] >= N) continue;
                int v = box_index(e, N);
                if (on[v] || (gamma >> v & 1u)) continue;
                if (dfs(v)) return true;
            }
        on[u] = 0;
        return false;
    };
    return dfs(x);
}

bool connected_mask(int N, int d, std::uint32_t s) {
    if (!s) return false;
    std::uint32_t seen = s & (~s + 1), grow = seen;
    while (grow) {
        std::uint32_t next = 0;
        for (int u = 0; u < 32; ++u) {
            if (!(grow >> u & 1u)) continue;
            auto c = box_coords(u, N, d);
            for (int i = 0; i < d; ++i)
                for (int step : {-1, 1}) {
                    auto e = c;
                    e[i] += step;
                    if (e[i] >= 0 && e[i] < N) next |= 1u << box_index(e, N);
                }
        }
        next &= s & ~seen;
        seen |= next;
        grow = next;
    }
    return seen == s;
}

BlockLabeling labeling(int N, int r, std::vector<int> labels) { return {N, 2, r, std::move(labels)}; }

}  // namespace

TEST_CASE("Potts bad-event bound") {
    CHECK(potts_bad_bound(25, 2) == doctest::Approx(std::pow(125.0 / 441.0, 0.25)).epsilon(1e-12));
    CHECK(std::abs(potts_bad_bound(25, 2) - 0.7297) < 1e-4);
    double prev = potts_bad_bound(5, 2);
    for (double q = 5.0 * 1.1; q <= 1e6; q *= 1.1) {
        double v = potts_bad_bound(q, 2);
        CHECK(v < prev);
        prev = v;
    }
    // q^{-1/8} (1 - 4/q)^{-1/2}: exceeds 0.01 only in the 16th digit
    CHECK(potts_bad_bound(1e16, 2) <= 0.01 * (1.0 + 1e-12));
    CHECK(potts_bad_bound(1e16, 2) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(potts_bad_bound(7, 3) > 0.0);
    CHECK_THROWS_AS(potts_bad_bound(4, 2), std::domain_error);
    CHECK_THROWS_AS(potts_bad_bound(3, 2), std::domain_error);
}

TEST_CASE("energy sandwich constants") {
    EnerbdConstants c = enerbd_constants();
    CHECK(c.a == 0.25);
    // independent fine scan of -ln((1 + cos x)/2)/x^2 on (0, 1]
    double best = 0.0;
    for (int k = 1; k <= 200000; ++k) {
        double x = k / 200000.0;
        best = std::max(best, -std::log((1.0 + std::cos(x)) / 2.0) / (x * x));
    }
    CHECK(std::abs(c.b - best) < 1e-6);
    CHECK(std::abs(c.b - 0.26117) < 1e-5);
    CHECK(c.a < c.b);
    SandwichCheck chk = enerbd_sandwich(c.a, c.b, 10000);
    CHECK(chk.max_violation <= 1e-12);
    CHECK(chk.strict_interior);
    CHECK(std::exp(-c.b * 0.0) == (1.0 + std::cos(0.0)) / 2.0);
    // a too large or b too small breaks the sandwich
    CHECK(enerbd_sandwich(0.26, c.b, 10000).max_violation > 0.0);
    CHECK(enerbd_sandwich(c.a, 0.255, 10000).max_violation > 0.0);
}

TEST_CASE("nonlinear model bounds") {
    EnerbdConstants ab = enerbd_constants();
    NlvmBounds r = nlvm_bounds(0.0, 10.0, 1e6, 0.5, ab.a, ab.b);
    CHECK(r.gso == doctest::Approx(1.0 / (pi * 10.0 * 1e3)).epsilon(1e-12));
    CHECK(std::abs(r.gso - 3.1831e-5) < 1e-9);

    NlvmBounds s = nlvm_bounds(10.0, 3.0, 1e4, 0.5, 0.25, 0.2612);
    double oracle = pi * 300.0 * std::exp(-20.0 * (std::exp(-0.2612 / 9.0) - std::exp(-2.25)));
    CHECK(s.gdis == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(std::abs(s.gdis - 2.84e-5) < 0.01e-5);

    // every bound is at most the value either branch of its minimum would give
    for (double beta : {0.0, 0.5, 2.0, 10.0}) {
        NlvmBounds b = nlvm_bounds(beta, 3.0, 1e6, 0.5, ab.a, ab.b);
        for (double br : b.pwo_branch) CHECK(b.pwo <= 4.0 * std::pow(br, 0.25) * (1 + 1e-15));
        for (double br : b.pmix_branch) CHECK(b.pmix <= 4.0 * std::sqrt(br) * (1 + 1e-15));
        CHECK(b.pwo >= 0.0);
        CHECK(b.pmix >= 0.0);
        CHECK(b.gdis >= 0.0);
        CHECK(b.gso >= 0.0);
    }

    // uniform-in-beta decay as p doubles (C = 3, kappa = 0.5 satisfy both positivity conditions)
    double prev_wo = INFINITY, prev_mix = INFINITY;
    for (double p = 1e4; p <= 1e4 * 64; p *= 2) {
        double wo = 0.0, mix = 0.0;
        for (double beta = 0.0; beta <= 20.0; beta += 0.05) {
            NlvmBounds b = nlvm_bounds(beta, 3.0, p, 0.5, ab.a, ab.b);
            wo = std::max(wo, b.pwo);
            mix = std::max(mix, b.pmix);
        }
        CHECK(wo < prev_wo);
        CHECK(mix < prev_mix);
        prev_wo = wo;
        prev_mix = mix;
    }

    CHECK_THROWS_WITH_AS(nlvm_bounds(1.0, 200.0, 1e4, 0.5, 0.25, 0.26), doctest::Contains("C <= sqrt(p)"), std::domain_error);
    CHECK_THROWS_WITH_AS(nlvm_bounds(1.0, 3.0, 1e4, 1.0, 0.25, 0.26), doctest::Contains("kappa"), std::domain_error);
    CHECK_THROWS_AS(nlvm_bounds(-1.0, 3.0, 1e4, 0.5, 0.25, 0.26), std::domain_error);
}

TEST_CASE("partition function bound values") {
    EnerbdConstants ab = enerbd_constants();
    PartitionBounds z = partition_bound_values(2, 1.0, 3.0, 100.0, 1.0, ab.a, ab.b);
    CHECK(z.cells == 4.0);
    CHECK(z.dis_lower == doctest::Approx(std::pow(2 * pi, 4)).epsilon(1e-12));
    CHECK(std::abs(z.dis_lower - 1558.55) < 0.01);
    PartitionBounds z0 = partition_bound_values(2, 0.0, 3.0, 100.0, 1.0, ab.a, ab.b);
    CHECK(z0.dis_upper == doctest::Approx(z0.dis_lower).epsilon(1e-14));
    for (double beta : {0.0, 1.0, 5.0, 20.0})
        for (double kappa : {0.25, 0.5, 1.0})
            for (double p : {100.0, 1e4}) {
                PartitionBounds b = partition_bound_values(2, beta, 3.0, p, kappa, ab.a, ab.b);
                CHECK(b.so_lower <= b.so_upper);
                CHECK(b.dis_lower <= b.dis_upper);
                CHECK(std::log(b.so_upper) == doctest::Approx(b.log_so_upper).epsilon(1e-12));
            }
    // (e^{2 beta e^{-b/9}} 2 / (3 * 10))^4 at beta = 1, kappa = 1
    CHECK(z.so_lower == doctest::Approx(std::pow(std::exp(2 * std::exp(-ab.b / 9)) * 2.0 / 30.0, 4)).epsilon(1e-12));
    CHECK(z.mix_upper == doctest::Approx(2 * pi * std::exp(4.0 * (1.0 + std::exp(-2.25))) * (2 * pi) * std::pow(2.0 / 30.0, 2)).epsilon(1e-12));
    CHECK(partition_bound_values(64, 1.0, 3.0, 100.0, 1.0, ab.a, ab.b).log_dis_lower == doctest::Approx(4096 * std::log(2 * pi)));
    CHECK_THROWS_AS(partition_bound_values(3, 1.0, 3.0, 100.0, 1.0, ab.a, ab.b), std::domain_error);
}

TEST_CASE("separating sets") {
    const int N = 2, d = 2;
    int x = idx2(0, 0, N), y = idx2(1, 1, N), a = idx2(1, 0, N), b = idx2(0, 1, N);
    auto sets = separating_sets(x, y, N, d);
    auto has = [&](std::uint32_t m) { return std::find(sets.begin(), sets.end(), m) != sets.end(); };
    CHECK(has(1u << x));
    CHECK(has(1u << y));
    CHECK_FALSE(has((1u << a) | (1u << b)));  // separating but not connected
    CHECK_FALSE(has(1u << a));                // the path through b avoids it
    CHECK(path_avoiding(N, d, x, y, 1u << a));
    CHECK_FALSE(path_avoiding(N, d, x, y, (1u << a) | (1u << b)));

    auto no_single = separating_sets(x, y, N, d, SeparatorConvention::no_singletons);
    CHECK(no_single.size() + 2 == sets.size());

    // soundness and completeness against the path oracle
    for (int NN : {2, 3}) {
        int n = NN * NN;
        for (int px = 0; px < n; ++px)
            for (int py = 0; py < n; ++py) {
                if (px == py) continue;
                auto got = separating_sets(px, py, NN, 2);
                std::vector<char> mark(1u << n, 0);
                for (auto s : got) {
                    mark[s] = 1;
                    CHECK(connected_mask(NN, 2, s));
                    CHECK_FALSE(path_avoiding(NN, 2, px, py, s));
                }
                for (std::uint32_t s = 1; s < (1u << n); ++s)
                    if (!mark[s] && connected_mask(NN, 2, s)) CHECK(path_avoiding(NN, 2, px, py, s));
            }
    }
    CHECK_THROWS_AS(separating_sets(0, 1, 5, 2), Refused);
    CHECK_THROWS_AS(separating_sets(0, 0, 2, 2), std::domain_error);
}

TEST_CASE("contour sums and the c1 fit") {
    int x = idx2(0, 0, 3), y = idx2(1, 0, 3);
    double v = contour_sum(x, y, 3, 2, 0.01);
    CHECK(v >= 0.02);
    CHECK(v <= 0.03);
    double prev = 0.0;
    for (double pv : {1e-4, 1e-3, 1e-2, 0.1, 0.5}) {
        double s = contour_sum(x, y, 3, 2, pv);
        CHECK(s > prev);
        prev = s;
    }
    // leading order: the two singletons
    int gx = idx2(0, 0, 3), gy = idx2(2, 2, 3);
    CHECK(contour_sum(gx, gy, 3, 2, 1e-6) / 1e-6 == doctest::Approx(2.0).epsilon(1e-4));
    // without singletons the sum is O(pval^2)
    double r1 = contour_sum(gx, gy, 3, 2, 1e-4, SeparatorConvention::no_singletons) / 1e-8;
    double r2 = contour_sum(gx, gy, 3, 2, 1e-5, SeparatorConvention::no_singletons) / 1e-10;
    CHECK(r1 == doctest::Approx(r2).epsilon(1e-2));

    C1Fit fit = c1_fit(2);
    CHECK(fit.c1 > 0.0);
    CHECK(std::isfinite(fit.c1));
    C1Fit all = c1_fit(2, SeparatorConvention::all);
    CHECK(all.c1 >= 2.0 / 1e-3);  // singletons dominate at the smallest grid value
    CHECK(all.pval == 1e-3);
}

TEST_CASE("delta for epsilon and the Potts threshold") {
    CHECK(delta_for_epsilon(0.1, 2, 10.0) == doctest::Approx(std::sqrt(0.01 / 40.0)).epsilon(1e-14));
    CHECK(std::abs(delta_for_epsilon(0.1, 2, 10.0) - 0.0158) < 1e-4);
    double prev = 0.0;
    for (double e : {0.01, 0.1, 0.2, 0.3, 0.45}) {
        double dlt = delta_for_epsilon(e, 2, 7.0);
        CHECK(dlt > prev);
        prev = dlt;
        CHECK(dlt / e == doctest::Approx(delta_for_epsilon(0.1, 2, 7.0) / 0.1).epsilon(1e-12));
    }
    CHECK(delta_for_epsilon(0.2, 3, 5.0) / std::pow(0.2, 2.0 / 3) ==
          doctest::Approx(delta_for_epsilon(0.4, 3, 5.0) / std::pow(0.4, 2.0 / 3)).epsilon(1e-12));
    CHECK_THROWS_AS(delta_for_epsilon(0.5, 2, 1.0), std::domain_error);
    CHECK_THROWS_AS(delta_for_epsilon(0.1, 2, 0.0), std::domain_error);

    double c1 = c1_fit(2).c1;
    QStar qs = potts_q_star(0.45, 2, c1);
    CHECK(qs.delta == delta_for_epsilon(0.45, 2, c1));
    for (double f : {1.0 + 1e-9, 2.0, 1e3, 1e9}) CHECK(potts_bad_bound(qs.q_star * f, 2) < qs.delta);
    CHECK(potts_bad_bound(qs.q_star * 0.999, 2) >= qs.delta);
}

TEST_CASE("Y_N, C_N and E_N") {
    BlockLabeling bad = labeling(2, 2, {0, 0, 0, 0});
    CHECK(y_n_count(bad) == 12);
    CHECK(c_n_holds(bad, 0.5));
    CHECK(e_n_holds(bad, 0.5));

    BlockLabeling good = labeling(2, 2, {1, 1, 1, 1});
    CHECK(y_n_count(good) == 0);
    for (double e : {0.01, 0.2, 0.5}) CHECK_FALSE(c_n_holds(good, e));

    // g1 at (0,0), g2 at (1,1), the off-diagonal blocks bad
    BlockLabeling diag = labeling(2, 2, {1, 0, 0, 2});
    CHECK(e_n_holds(diag, 0.2));
    CHECK(y_n_count(diag) == 12);
    CHECK(c_n_holds(diag, 0.2));
    CHECK(realizable(diag));
    CHECK_FALSE(realizable(labeling(2, 2, {1, 2, 0, 0})));

    // a good path of length three in a 3x3 box: 3*2 connected ordered pairs
    BlockLabeling row = labeling(3, 1, {1, 1, 1, 0, 0, 0, 0, 0, 0});
    CHECK(y_n_count(row) == 72 - 6);
    CHECK_THROWS_AS(y_n_count(labeling(2, 1, {0, 1, 2, 0})), std::domain_error);
    CHECK_THROWS_AS(y_n_count(labeling(2, 1, {0, 1, 1})), std::domain_error);
}

TEST_CASE("E_N inside C_N by exhaustion") {
    InclusionCheck a = lemma_incl_bruteforce(2, 2, 2, 0.3);
    CHECK(a.pass);
    CHECK(a.checked + a.filtered == 81);
    CHECK(a.filtered > 0);

    InclusionCheck open = lemma_incl_bruteforce(2, 2, 2, 0.3, false);
    CHECK_FALSE(open.pass);
    REQUIRE(open.counterexample);
    const auto& ce = *open.counterexample;
    CHECK_FALSE(realizable(ce));
    CHECK(e_n_holds(ce, 0.3));
    CHECK_FALSE(c_n_holds(ce, 0.3));

    for (double e : {0.2, 0.34, 0.5}) {
        CHECK(lemma_incl_bruteforce(3, 2, 2, e).pass);
        CHECK(lemma_incl_bruteforce(2, 2, 3, e).pass);
    }
    CHECK_THROWS_AS(lemma_incl_bruteforce(4, 2, 3, 0.2, true, 1e6), Refused);
}

TEST_CASE("superblock fraction") {
    // 4x4 labeling, M = N = 2
    BlockLabeling all_bad{4, 2, 1, std::vector<int>(16, 0)};
    CHECK(r_mn_fraction(all_bad, 2, 2, 0.3) == 1.0);
    BlockLabeling all_good{4, 2, 1, std::vector<int>(16, 1)};
    CHECK(r_mn_fraction(all_good, 2, 2, 0.3) == 0.0);
    BlockLabeling half = all_good;
    for (int x1 = 0; x1 < 4; ++x1)
        for (int x0 = 0; x0 < 2; ++x0) half.labels[idx2(x0, x1, 4)] = 0;  // left superblocks bad
    CHECK(r_mn_fraction(half, 2, 2, 0.3) == 0.5);
    CHECK_THROWS_AS(r_mn_fraction(half, 3, 2, 0.3), std::domain_error);
}
