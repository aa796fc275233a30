#include "fgap/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "fgap/bounds.hpp"
#include "fgap/exact.hpp"

namespace fgap::cli {

namespace {

constexpr const char* version = "0.1.0";

// Shipped presets. Each one is complete: parse_config fills nothing in for them.
const std::map<std::string, const char*>& preset_table() {
    static const std::map<std::string, const char*> t{
        {"potts", R"({
  "model": {"name": "potts", "q": 10, "coupling": 1.0, "axial_next": 0.0},
  "geometry": {"d": 2, "L": 32},
  "betas": [1.0, 1.2, 1.3, 1.35, 1.38, 1.4, 1.405, 1.41, 1.415, 1.42, 1.425, 1.43, 1.435, 1.44, 1.445,
            1.45, 1.46, 1.48, 1.5, 1.55, 1.6, 1.8, 2.0, 2.5, 3.0],
  "schedule": {"burn_in": 1000, "sweeps": 10000, "batches": 20, "measure_every": 1},
  "verify": {"L": 2, "betas": [0.5, 1.0, 2.0]},
  "bounds": {"q_grid": [3, 5, 10, 25, 50, 100, 1000, 10000, 100000, 1000000, 1e9, 1e12]}
})"},
        {"diluted-potts", R"({
  "model": {"name": "diluted-potts", "q": 2, "lambda": 0.5, "kappa": 0.3},
  "geometry": {"d": 2, "L": 16},
  "betas": [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0],
  "schedule": {"burn_in": 5000, "sweeps": 20000, "batches": 20, "measure_every": 1},
  "verify": {"L": 2, "betas": [0.5, 1.0, 2.0]}
})"},
        {"diluted-xy", R"({
  "model": {"name": "diluted-xy", "lambda": 0.5, "kappa": 0.3},
  "geometry": {"d": 2, "L": 16},
  "betas": [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0],
  "schedule": {"burn_in": 5000, "sweeps": 20000, "batches": 20, "measure_every": 1},
  "verify": {"L": 2, "grid": 4, "betas": [0.5, 1.0, 2.0]}
})"},
        {"o2af", R"({
  "model": {"name": "o2af", "gamma": 1.0},
  "geometry": {"d": 2, "L": 16},
  "events": {"o2af_kappa": 0.7, "o2af_B": 2},
  "betas": [1.0, 2.0, 5.0, 10.0, 20.0],
  "schedule": {"burn_in": 5000, "sweeps": 20000, "batches": 20, "measure_every": 1},
  "verify": {"L": 4, "B": 2, "grid": 2, "betas": [0.5, 1.0, 2.0]}
})"},
        {"nlvm", R"({
  "model": {"name": "nlvm", "p": 100.0},
  "geometry": {"d": 2, "L": 16},
  "events": {"nlvm_C": 3.0},
  "betas": [0.5, 1.0, 2.0, 5.0, 10.0, 20.0],
  "schedule": {"burn_in": 5000, "sweeps": 20000, "batches": 20, "measure_every": 1},
  "verify": {"L": 2, "grid": 6, "betas": [0.0, 1.0, 5.0]},
  "bounds": {"C": 10.0, "kappa": 0.5,
             "p_grid": [10000, 100000, 1000000, 10000000, 100000000],
             "beta_grid": [0, 1, 2, 5, 10, 20]}
})"},
        {"magnetostriction", R"({
  "model": {"name": "magnetostriction", "J1": 2.0, "J2": 0.1, "eta_J": 1.0, "kappa": 1.0,
            "lambda": 0.5, "R": 1.0, "r_max": 4.0},
  "geometry": {"d": 2, "L": 16},
  "betas": [0.5, 1.0, 2.0, 3.0, 5.0],
  "schedule": {"burn_in": 5000, "sweeps": 20000, "batches": 20, "measure_every": 1},
  "verify": {"L": 2, "grid": 3, "betas": [0.5, 1.0, 2.0]}
})"},
    };
    return t;
}

[[noreturn]] void config_fail(const std::string& msg) { throw ConfigError(msg); }

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) config_fail(where + " must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : keys) known |= it.key() == k;
        if (!known) config_fail("unknown key " + where + "." + it.key());
    }
}

template <class T>
T get(const json& obj, const char* key, T fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        config_fail("bad value for " + where + "." + key);
    }
}

std::vector<double> get_grid(const json& obj, const char* key, std::vector<double> fallback, const std::string& where) {
    auto v = get<std::vector<double>>(obj, key, std::move(fallback), where);
    for (double x : v)
        if (!std::isfinite(x)) config_fail(where + "." + key + " must hold finite numbers");
    return v;
}

ModelSpec parse_model(const json& j) {
    if (!j.is_object() || !j.contains("name")) config_fail("model.name is required");
    auto name = get<std::string>(j, "name", "", "model");
    if (name == "potts") {
        only_keys(j, "model", {"name", "q", "coupling", "axial_next"});
        Potts p;
        p.q = get(j, "q", p.q, "model");
        p.coupling = get(j, "coupling", p.coupling, "model");
        p.axial_next = get(j, "axial_next", p.axial_next, "model");
        return p;
    }
    if (name == "diluted-potts") {
        only_keys(j, "model", {"name", "q", "lambda", "kappa"});
        DilutedPotts p;
        p.q = get(j, "q", p.q, "model");
        p.lambda = get(j, "lambda", p.lambda, "model");
        p.kappa = get(j, "kappa", p.kappa, "model");
        return p;
    }
    if (name == "diluted-xy") {
        only_keys(j, "model", {"name", "lambda", "kappa"});
        DilutedXY p;
        p.lambda = get(j, "lambda", p.lambda, "model");
        p.kappa = get(j, "kappa", p.kappa, "model");
        return p;
    }
    if (name == "o2af") {
        only_keys(j, "model", {"name", "gamma"});
        O2AF p;
        p.gamma = get(j, "gamma", p.gamma, "model");
        return p;
    }
    if (name == "nlvm") {
        only_keys(j, "model", {"name", "p"});
        NonlinearFerromagnet p;
        p.p = get(j, "p", p.p, "model");
        return p;
    }
    if (name == "magnetostriction") {
        only_keys(j, "model", {"name", "J1", "J2", "eta_J", "kappa", "lambda", "R", "r_max"});
        Magnetostriction p;
        p.J1 = get(j, "J1", p.J1, "model");
        p.J2 = get(j, "J2", p.J2, "model");
        p.eta_J = get(j, "eta_J", p.eta_J, "model");
        p.kappa = get(j, "kappa", p.kappa, "model");
        p.lambda = get(j, "lambda", p.lambda, "model");
        p.R = get(j, "R", p.R, "model");
        p.r_max = get(j, "r_max", p.r_max, "model");
        return p;
    }
    config_fail("unknown model " + name);
}

json model_json(const ModelSpec& m) {
    json j;
    j["name"] = model_name(m);
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Potts>) {
                j["q"] = p.q;
                j["coupling"] = p.coupling;
                j["axial_next"] = p.axial_next;
            } else if constexpr (std::is_same_v<T, DilutedPotts>) {
                j["q"] = p.q;
                j["lambda"] = p.lambda;
                j["kappa"] = p.kappa;
            } else if constexpr (std::is_same_v<T, DilutedXY>) {
                j["lambda"] = p.lambda;
                j["kappa"] = p.kappa;
            } else if constexpr (std::is_same_v<T, O2AF>) {
                j["gamma"] = p.gamma;
            } else if constexpr (std::is_same_v<T, NonlinearFerromagnet>) {
                j["p"] = p.p;
            } else {
                j["J1"] = p.J1;
                j["J2"] = p.J2;
                j["eta_J"] = p.eta_J;
                j["kappa"] = p.kappa;
                j["lambda"] = p.lambda;
                j["R"] = p.R;
                j["r_max"] = p.r_max;
            }
        },
        m);
    return j;
}

json resolved_document(const RunConfig& c) {
    json starts = json::array();
    for (Start s : c.starts) starts.push_back(start_name(s));
    return json{
        {"model", model_json(c.model)},
        {"geometry", {{"d", c.geometry.d()}, {"L", c.geometry.L()}, {"B", c.geometry.B()}}},
        {"betas", c.betas},
        {"events",
         {{"o2af_kappa", c.events.o2af_kappa},
          {"o2af_B", c.events.o2af_B},
          {"nlvm_C", c.events.nlvm_C},
          {"magneto_eta", c.events.magneto_eta},
          {"magneto_eps", c.events.magneto_eps}}},
        {"schedule",
         {{"burn_in", c.schedule.burn_in},
          {"sweeps", c.schedule.sweeps},
          {"batches", c.schedule.batches},
          {"measure_every", c.schedule.measure_every}}},
        {"starts", starts},
        {"epsilon", c.epsilon},
        {"exact_budget", c.exact_budget},
        {"verify",
         {{"L", c.verify.L},
          {"B", c.verify.B},
          {"grid", c.verify.grid},
          {"betas", c.verify.betas},
          {"tuples", c.verify.tuples},
          {"diagonal_planes", c.verify.diagonal_planes},
          {"literal_dis_lower", c.verify.literal_dis_lower},
          {"family_samples", c.verify.family_samples},
          {"quad_grid", c.verify.quad_grid}}},
        {"bounds",
         {{"q_grid", c.bounds.q_grid},
          {"p_grid", c.bounds.p_grid},
          {"beta_grid", c.bounds.beta_grid},
          {"eps_grid", c.bounds.eps_grid},
          {"C", c.bounds.C},
          {"kappa", c.bounds.kappa}}},
        {"output", c.output},
        {"seed", c.seed},
    };
}

GoodFamily family_for(const RunConfig& cfg) { return default_family(cfg.model, cfg.events, cfg.geometry.d()); }

EventParams verify_events(const RunConfig& cfg) {
    EventParams ev = cfg.events;
    if (cfg.verify.B > 0) ev.o2af_B = cfg.verify.B;
    return ev;
}

TorusGeometry verify_geometry(const RunConfig& cfg, const GoodFamily& fam) {
    return TorusGeometry(cfg.geometry.d(), cfg.verify.L, fam.B);
}

ExactMeasure exact_measure(const RunConfig& cfg, const TorusGeometry& g, double beta) {
    if (is_discrete(cfg.model)) return enumerate_measure(cfg.model, g, beta, cfg.exact_budget);
    return grid_measure(cfg.model, g, beta, cfg.verify.grid, 0.0, cfg.exact_budget);
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string beta_tag(double b) { return "beta=" + format_number(b); }

std::string refused_text(const Refused& r, double budget) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "size estimate %.6g exceeds budget %.6g (%s)", r.size, budget, r.what());
    return buf;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::string utc_timestamp() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json metadata(double elapsed) {
    return {{"timestamp", utc_timestamp()}, {"version", version}, {"elapsed_seconds", elapsed}};
}

// Chessboard tuples: each factor point carries an event with probability 1/2.
// The first tuples per event are the "half" tuples (the event on every point
// with t_0 < N/2) which are the hardest for the estimate.
std::vector<std::vector<PlacedEvent>> chessboard_tuples(const TorusGeometry& g, const std::vector<BlockEvent>& pool,
                                                        int random_tuples, std::mt19937_64& rng) {
    std::vector<std::vector<PlacedEvent>> out;
    const int half = g.factor_side() / 2;
    for (const auto& ev : pool) {
        std::vector<PlacedEvent> t;
        for (std::size_t p = 0; p < g.factor_points(); ++p) {
            auto c = g.factor_coords(p);
            if (c[0] < std::max(half, 1)) t.push_back({c, ev});
        }
        out.push_back(std::move(t));
    }
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (int k = 0; k < random_tuples; ++k) {
        std::vector<PlacedEvent> t;
        while (t.empty()) {
            for (std::size_t p = 0; p < g.factor_points(); ++p)
                if (rng() & 1) t.push_back({g.factor_coords(p), pool[pick(rng)]});
        }
        out.push_back(std::move(t));
    }
    return out;
}

void add(VerificationReport& rep, std::string name, Status s, std::string diag, const Timer& t) {
    rep.checks.push_back({std::move(name), s, std::move(diag), t.seconds()});
}

void verify_exact(const RunConfig& cfg, const GoodFamily& fam, VerificationReport& rep) {
    const TorusGeometry g = verify_geometry(cfg, fam);
    std::vector<PlaneSpec> planes;
    if (is_discrete(cfg.model)) {
        for (int i = 0; i < g.d(); ++i) planes.push_back({PlaneSpec::Kind::axis, i, 0});
        if (cfg.verify.diagonal_planes && g.d() == 2) {
            planes.push_back({PlaneSpec::Kind::diagonal, 0, 0});
            planes.push_back({PlaneSpec::Kind::antidiagonal, 0, 0});
        }
    }
    for (std::size_t bi = 0; bi < cfg.verify.betas.size(); ++bi) {
        const double beta = cfg.verify.betas[bi];
        Timer t;
        const std::string cb = "chessboard/" + beta_tag(beta);
        std::optional<ExactMeasure> meas;
        try {
            meas = exact_measure(cfg, g, beta);
        } catch (const Refused& r) {
            add(rep, cb, Status::refused, refused_text(r, cfg.exact_budget), t);
            for (const auto& pl : planes) add(rep, "rp/" + describe(pl) + "/" + beta_tag(beta), Status::refused, refused_text(r, cfg.exact_budget), t);
            continue;
        }
        std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                          static_cast<std::uint32_t>(bi), 0x43u};
        std::mt19937_64 rng(seq);
        std::vector<BlockEvent> pool = fam.goods;
        pool.push_back(fam.bad());
        if (is_discrete(cfg.model))
            for (int k = 0; k < 4; ++k)
                pool.push_back(random_table_event("table_" + std::to_string(k), cfg.model, g.d(), g.B(), 0.5, rng));
        auto tuples = chessboard_tuples(g, pool, cfg.verify.tuples, rng);
        double worst = -INFINITY;
        std::size_t failures = 0;
        for (const auto& tup : tuples) {
            auto r = chessboard_check(*meas, tup);
            worst = std::max(worst, r.margin);
            failures += !r.pass;
        }
        std::string diag = std::to_string(tuples.size()) + " tuples, worst margin " + format_number(worst);
        if (failures) diag += ", " + std::to_string(failures) + " above 1e-10";
        add(rep, cb, failures ? Status::fail : Status::pass, diag, t);

        for (const auto& pl : planes) {
            Timer tp;
            auto r = rp_gram_check(*meas, pl);
            std::string d = "min eigenvalue " + format_number(r.min_eigenvalue) + ", asymmetry " +
                            format_number(r.asymmetry) + ", depth " + std::to_string(r.depth);
            add(rep, "rp/" + describe(pl) + "/" + beta_tag(beta), r.pass ? Status::pass : Status::fail, d, tp);
        }
    }
}

void verify_partition(const RunConfig& cfg, VerificationReport& rep) {
    const auto* m = std::get_if<NonlinearFerromagnet>(&cfg.model);
    if (!m) return;
    const TorusGeometry g(2, 2);
    const double C = cfg.events.nlvm_C, kappa = 1.0;
    const int G = cfg.verify.quad_grid;
    const auto ab = enerbd_constants();
    const BondPattern pats[] = {BondPattern::so, BondPattern::dis, BondPattern::wo, BondPattern::mix};
    std::map<BondPattern, double> dis0;
    for (double beta : cfg.verify.betas) {
        Timer t;
        const std::string name = "partition/" + beta_tag(beta);
        PartitionBounds pb;
        try {
            pb = partition_bound_values(2, beta, C, m->p, kappa, ab.a, ab.b);
        } catch (const std::domain_error& e) {
            add(rep, name, Status::fail, std::string("hypothesis violated: ") + e.what(), t);
            continue;
        }
        std::map<BondPattern, double> z;
        std::vector<std::string> bad;
        for (auto p : pats) {
            auto lo = constrained_partition(*m, g, beta, p, C, G);
            auto hi = constrained_partition(*m, g, beta, p, C, 2 * G);
            z[p] = hi.value;
            if (hi.value == 0.0 && lo.value == 0.0) continue;
            double rel = std::abs(lo.value / hi.value - 1.0);
            if (!(rel < 0.01)) bad.push_back("Z^" + pattern_name(p) + " quadrature not converged (" + format_number(rel) + ")");
        }
        if (!dis0.count(BondPattern::dis)) dis0[BondPattern::dis] = constrained_partition(*m, g, 0.0, BondPattern::dis, C, 2 * G).value;
        auto below = [&](double v, double bound, const std::string& what) {
            if (!(v <= bound)) bad.push_back(what + ": " + format_number(v) + " > " + format_number(bound));
        };
        below(pb.so_lower, z[BondPattern::so], "Z^so lower");
        below(z[BondPattern::so], pb.so_upper, "Z^so upper");
        below(z[BondPattern::dis], pb.dis_upper, "Z^dis upper");
        // H <= 0 for this model, so Z^dis(beta) >= Z^dis(0).
        below(dis0[BondPattern::dis], z[BondPattern::dis], "Z^dis lower (beta = 0 value)");
        if (cfg.verify.literal_dis_lower) below(pb.dis_lower, z[BondPattern::dis], "Z^dis lower ((2 pi)^|T|)");
        below(z[BondPattern::wo], pb.wo_upper, "Z^wo upper");
        below(z[BondPattern::mix], pb.mix_upper, "Z^mix upper");
        std::string diag;
        if (bad.empty()) {
            diag = "so " + format_number(z[BondPattern::so]) + " dis " + format_number(z[BondPattern::dis]) + " wo " +
                   format_number(z[BondPattern::wo]) + " mix " + format_number(z[BondPattern::mix]);
        } else {
            for (std::size_t i = 0; i < bad.size(); ++i) diag += (i ? "; " : "") + bad[i];
        }
        add(rep, name, bad.empty() ? Status::pass : Status::fail, diag, t);
    }
}

void verify_bounds(const RunConfig& cfg, VerificationReport& rep) {
    {
        Timer t;
        auto ab = enerbd_constants();
        auto s = enerbd_sandwich(ab.a, ab.b, 10000);
        bool ok = s.max_violation <= 1e-12 && s.strict_interior;
        add(rep, "enerbd", ok ? Status::pass : Status::fail,
            "a " + format_number(ab.a) + ", b " + format_number(ab.b) + ", max violation " + format_number(s.max_violation), t);
    }
    {
        Timer t;
        const int d = cfg.geometry.d();
        double prev = INFINITY;
        bool ok = true;
        std::string diag;
        int n = 0;
        for (double lq = std::log10(5.0); lq <= 6.0 + 1e-9; lq += 0.25) {
            double q = std::pow(10.0, lq);
            if (q <= 2.0 * d) continue;
            double v = potts_bad_bound(q, d);
            if (!(v < prev)) {
                ok = false;
                diag = "not decreasing at q = " + format_number(q);
            }
            prev = v;
            ++n;
        }
        if (ok) diag = std::to_string(n) + " grid points, strictly decreasing";
        add(rep, "potts_bound/monotone", ok ? Status::pass : Status::fail, diag, t);
    }
    const int combos[3][3] = {{2, 2, 2}, {2, 2, 3}, {3, 2, 2}};
    for (const auto& c : combos)
        for (double eps : {0.2, 0.34, 0.5}) {
            Timer t;
            std::string name = "lemma_incl/N=" + std::to_string(c[0]) + ",d=" + std::to_string(c[1]) +
                               ",r=" + std::to_string(c[2]) + ",eps=" + format_number(eps);
            try {
                auto r = lemma_incl_bruteforce(c[0], c[1], c[2], eps, true, cfg.exact_budget);
                std::string diag = std::to_string(r.checked) + " labelings, " + std::to_string(r.filtered) + " filtered";
                add(rep, name, r.pass ? Status::pass : Status::fail, diag, t);
            } catch (const Refused& r) {
                add(rep, name, Status::refused, refused_text(r, cfg.exact_budget), t);
            }
        }
}

json row_json(const ScanCurve& curve, const ScanRow& r) {
    json rho = json::object();
    for (std::size_t i = 0; i < curve.events.size(); ++i) rho[curve.events[i]] = {r.rho[i], r.rho_err[i]};
    return {{"beta", r.beta}, {"start", start_name(r.start)}, {"energy_mean", r.energy_mean},
            {"energy_err", r.energy_err}, {"rho", rho}, {"rho_bad", {r.rho_bad, r.rho_bad_err}},
            {"converged", r.converged}, {"flags", r.flags}};
}

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << content;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json base_report(const RunConfig& cfg, const std::string& command) {
    return {{"command", command}, {"config_hash", config_hash(cfg)}, {"seed", cfg.seed}, {"config", cfg.resolved}};
}

std::string csv_header_comment(const RunConfig& cfg) {
    return "# config_hash=" + config_hash(cfg) + ",seed=" + std::to_string(cfg.seed) + "\n";
}

// --- bounds tables ---

json bound_row(const BoundReport& b) {
    json params = json::object();
    for (const auto& [k, v] : b.parameters) params[k] = v;
    json j{{"name", b.name}, {"parameters", params}, {"valid", b.valid}, {"formula", b.formula}};
    if (b.valid)
        j["value"] = b.value;
    else
        j["error"] = b.error;
    return j;
}

std::string csv_value(const BoundReport& b) { return b.valid ? format_number(b.value) : ""; }

}  // namespace

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (const auto& [k, v] : preset_table()) out.push_back(k);
    return out;
}

json preset(const std::string& name) {
    auto it = preset_table().find(name);
    if (it == preset_table().end()) config_fail("unknown preset " + name);
    return json::parse(it->second);
}

RunConfig parse_config(const json& doc_in) {
    if (!doc_in.is_object()) config_fail("config must be a JSON object");
    json doc = doc_in;
    if (doc.contains("preset")) {
        json base = preset(get<std::string>(doc, "preset", "", "config"));
        doc.erase("preset");
        base.merge_patch(doc);
        doc = std::move(base);
    }
    only_keys(doc, "config", {"model", "geometry", "betas", "events", "schedule", "starts", "epsilon", "exact_budget",
                              "verify", "bounds", "output", "seed"});
    RunConfig c;
    c.model = parse_model(doc.value("model", json::object()));

    const json ev = doc.value("events", json::object());
    only_keys(ev, "events", {"o2af_kappa", "o2af_B", "nlvm_C", "magneto_eta", "magneto_eps"});
    c.events.o2af_kappa = get(ev, "o2af_kappa", c.events.o2af_kappa, "events");
    c.events.o2af_B = get(ev, "o2af_B", c.events.o2af_B, "events");
    c.events.nlvm_C = get(ev, "nlvm_C", c.events.nlvm_C, "events");
    c.events.magneto_eta = get(ev, "magneto_eta", c.events.magneto_eta, "events");
    c.events.magneto_eps = get(ev, "magneto_eps", c.events.magneto_eps, "events");

    const json geo = doc.value("geometry", json::object());
    only_keys(geo, "geometry", {"d", "L", "B"});
    const int d = get(geo, "d", 2, "geometry");
    const int L = get(geo, "L", 4, "geometry");
    GoodFamily fam;
    try {
        fam = default_family(c.model, c.events, d);
    } catch (const std::exception& e) {
        config_fail(std::string("event family: ") + e.what());
    }
    const int B = get(geo, "B", fam.B, "geometry");
    if (B != fam.B) config_fail("geometry.B must equal the event family block side " + std::to_string(fam.B));
    try {
        c.geometry = TorusGeometry(d, L, B);
        validate(c.model, c.geometry);
    } catch (const std::exception& e) {
        config_fail(std::string("geometry: ") + e.what());
    }
    if (c.geometry.factor_side() % 2) config_fail("geometry: L / B must be even");

    c.betas = get_grid(doc, "betas", {}, "config");
    if (!std::is_sorted(c.betas.begin(), c.betas.end())) config_fail("betas must be sorted");
    for (double b : c.betas)
        if (b < 0.0) config_fail("betas must be >= 0");

    const json sch = doc.value("schedule", json::object());
    only_keys(sch, "schedule", {"burn_in", "sweeps", "batches", "measure_every"});
    c.schedule.burn_in = get(sch, "burn_in", c.schedule.burn_in, "schedule");
    c.schedule.sweeps = get(sch, "sweeps", c.schedule.sweeps, "schedule");
    c.schedule.batches = get(sch, "batches", c.schedule.batches, "schedule");
    c.schedule.measure_every = get(sch, "measure_every", c.schedule.measure_every, "schedule");
    if (c.schedule.burn_in < 0 || c.schedule.sweeps < 1 || c.schedule.batches < 2 || c.schedule.measure_every < 1 ||
        c.schedule.sweeps / c.schedule.measure_every < c.schedule.batches)
        config_fail("schedule: need burn_in >= 0, batches >= 2 and at least one measurement per batch");

    if (doc.contains("starts")) {
        c.starts.clear();
        try {
            for (const auto& s : doc.at("starts")) c.starts.push_back(parse_start(s.get<std::string>()));
        } catch (const std::exception& e) {
            config_fail(std::string("starts: ") + e.what());
        }
        if (c.starts.empty()) config_fail("starts must not be empty");
    }
    c.epsilon = get(doc, "epsilon", c.epsilon, "config");
    if (!(c.epsilon > 0.0 && c.epsilon < 0.5)) config_fail("epsilon must lie in (0, 1/2)");
    c.exact_budget = get(doc, "exact_budget", c.exact_budget, "config");
    if (!(c.exact_budget > 0.0)) config_fail("exact_budget must be positive");

    const json ver = doc.value("verify", json::object());
    only_keys(ver, "verify", {"L", "B", "grid", "betas", "tuples", "diagonal_planes", "literal_dis_lower",
                              "family_samples", "quad_grid"});
    auto& v = c.verify;
    v.L = get(ver, "L", v.L, "verify");
    v.B = get(ver, "B", v.B, "verify");
    v.grid = get(ver, "grid", v.grid, "verify");
    v.betas = get_grid(ver, "betas", v.betas, "verify");
    v.tuples = get(ver, "tuples", v.tuples, "verify");
    v.diagonal_planes = get(ver, "diagonal_planes", v.diagonal_planes, "verify");
    v.literal_dis_lower = get(ver, "literal_dis_lower", v.literal_dis_lower, "verify");
    v.family_samples = get(ver, "family_samples", v.family_samples, "verify");
    v.quad_grid = get(ver, "quad_grid", v.quad_grid, "verify");
    if (v.grid < 1 || v.tuples < 0 || v.quad_grid < 2) config_fail("verify: grid >= 1, tuples >= 0, quad_grid >= 2");
    for (double b : v.betas)
        if (b < 0.0) config_fail("verify.betas must be >= 0");
    if (v.B < 0) config_fail("verify.B must be >= 0");
    if (v.B > 0 && !std::holds_alternative<O2AF>(c.model) && v.B != fam.B)
        config_fail("verify.B can differ from the family block side only for o2af");
    try {
        auto vf = default_family(c.model, verify_events(c), d);
        auto vg = verify_geometry(c, vf);
        validate(c.model, vg);
    } catch (const std::exception& e) {
        config_fail(std::string("verify geometry: ") + e.what());
    }

    const json bnd = doc.value("bounds", json::object());
    only_keys(bnd, "bounds", {"q_grid", "p_grid", "beta_grid", "eps_grid", "C", "kappa"});
    auto& b = c.bounds;
    b.q_grid = get_grid(bnd, "q_grid", b.q_grid, "bounds");
    b.p_grid = get_grid(bnd, "p_grid", b.p_grid, "bounds");
    b.beta_grid = get_grid(bnd, "beta_grid", b.beta_grid, "bounds");
    b.eps_grid = get_grid(bnd, "eps_grid", b.eps_grid, "bounds");
    b.C = get(bnd, "C", b.C, "bounds");
    b.kappa = get(bnd, "kappa", b.kappa, "bounds");

    c.output = get(doc, "output", c.output, "config");
    c.seed = get(doc, "seed", c.seed, "config");
    c.resolved = resolved_document(c);
    return c;
}

std::string config_hash(const RunConfig& cfg) {
    json j = cfg.resolved;
    j.erase("output");
    j.erase("seed");
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string status_name(Status s) {
    switch (s) {
    case Status::pass: return "PASS";
    case Status::fail: return "FAIL";
    case Status::refused: return "REFUSED";
    }
    return "?";
}

bool VerificationReport::any_fail() const {
    return std::any_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.status == Status::fail; });
}

VerificationReport cmd_verify(const RunConfig& cfg) {
    VerificationReport rep;
    const GoodFamily fam = default_family(cfg.model, verify_events(cfg), cfg.geometry.d());
    {
        Timer t;
        FamilyCheckOptions opt;
        opt.random_samples = cfg.verify.family_samples;
        opt.seed = cfg.seed;
        auto r = check_family(fam, cfg.model, verify_geometry(cfg, fam), opt);
        std::string diag = r.method + ", " + std::to_string(r.samples) + " samples";
        for (const auto& f : r.findings) diag += "; " + f;
        if (r.witness) diag += "; witness " + *r.witness;
        add(rep, "family/" + model_name(cfg.model), r.pass ? Status::pass : Status::fail, diag, t);
    }
    verify_exact(cfg, fam, rep);
    verify_partition(cfg, rep);
    verify_bounds(cfg, rep);
    return rep;
}

ScanCurve cmd_scan(const RunConfig& cfg, GapReport* gap) {
    if (cfg.betas.empty()) throw ConfigError("scan needs a nonempty betas grid");
    auto curve = beta_scan(cfg.model, cfg.geometry, family_for(cfg), cfg.betas, cfg.schedule, cfg.starts, cfg.seed);
    if (gap) *gap = gap_report(curve, cfg.epsilon);
    return curve;
}

json cmd_bounds(const RunConfig& cfg, std::string* csv) {
    const int d = cfg.geometry.d();
    const auto ab = enerbd_constants();
    json out = base_report(cfg, "bounds");
    out["enerbd"] = {{"a", ab.a}, {"b", ab.b}, {"argmax", ab.argmax}};
    std::ostringstream t;
    t << csv_header_comment(cfg);
    json rows = json::array();

    if (std::holds_alternative<Potts>(cfg.model)) {
        t << "q,d,value,valid,error\n";
        for (double q : cfg.bounds.q_grid) {
            BoundReport b{"potts_bad", {{"q", q}, {"d", double(d)}}, 0.0, true,
                          "[q^(d - 2^-(d-1)) / (q - 2d)^d]^(1/(2d))", ""};
            try {
                b.value = potts_bad_bound(q, d);
            } catch (const std::domain_error& e) {
                b.valid = false;
                b.error = e.what();
            }
            rows.push_back(bound_row(b));
            t << format_number(q) << ',' << d << ',' << csv_value(b) << ',' << (b.valid ? 1 : 0) << ',' << b.error << '\n';
        }
    } else if (std::holds_alternative<NonlinearFerromagnet>(cfg.model)) {
        const double C = cfg.bounds.C, kappa = cfg.bounds.kappa;
        t << "C,p,beta,kappa,pwo,pmix,gdis,gso,valid,error\n";
        const char* names[] = {"pwo", "pmix", "gdis", "gso"};
        for (double p : cfg.bounds.p_grid)
            for (double beta : cfg.bounds.beta_grid) {
                json entry{{"parameters", {{"C", C}, {"p", p}, {"beta", beta}, {"kappa", kappa}}}};
                t << format_number(C) << ',' << format_number(p) << ',' << format_number(beta) << ','
                  << format_number(kappa) << ',';
                try {
                    auto nb = nlvm_bounds(beta, C, p, kappa, ab.a, ab.b);
                    double vals[] = {nb.pwo, nb.pmix, nb.gdis, nb.gso};
                    for (int i = 0; i < 4; ++i) {
                        entry[names[i]] = vals[i];
                        t << format_number(vals[i]) << ',';
                    }
                    entry["valid"] = true;
                    t << "1,\n";
                } catch (const std::domain_error& e) {
                    entry["valid"] = false;
                    entry["error"] = std::string("hypothesis violated: ") + e.what();
                    t << ",,,,0," << entry["error"].get<std::string>() << '\n';
                }
                rows.push_back(entry);
            }
    } else {
        auto fit = c1_fit(d);
        t << "eps,d,c1,delta\n";
        for (double eps : cfg.bounds.eps_grid) {
            BoundReport b{"delta", {{"eps", eps}, {"d", double(d)}}, 0.0, true, "(eps^2 / (4 c1))^(1/d)", ""};
            try {
                b.value = delta_for_epsilon(eps, d, fit.c1);
            } catch (const std::domain_error& e) {
                b.valid = false;
                b.error = e.what();
            }
            rows.push_back(bound_row(b));
            t << format_number(eps) << ',' << d << ',' << format_number(fit.c1) << ',' << csv_value(b) << '\n';
        }
    }
    out["rows"] = rows;

    auto fit = c1_fit(d);
    out["c1_fit"] = {{"c1", fit.c1}, {"N", fit.N}, {"x", fit.x}, {"y", fit.y}, {"pval", fit.pval},
                     {"convention", "no_singletons"}};
    json qs = json::array();
    for (double eps : cfg.bounds.eps_grid) {
        try {
            auto s = potts_q_star(eps, d, fit.c1);
            qs.push_back({{"eps", eps}, {"delta", s.delta}, {"q_star", s.q_star}});
        } catch (const std::domain_error& e) {
            qs.push_back({{"eps", eps}, {"error", e.what()}});
        }
    }
    out["potts_q_star"] = qs;
    if (csv) *csv = t.str();
    return out;
}

json cmd_exact(const RunConfig& cfg) {
    const GoodFamily fam = default_family(cfg.model, verify_events(cfg), cfg.geometry.d());
    json results = json::array();
    for (int L : {cfg.verify.L, 2 * cfg.verify.L}) {
        TorusGeometry g(cfg.geometry.d(), L, fam.B);
        for (double beta : cfg.verify.betas) {
            json e{{"L", L}, {"beta", beta}};
            try {
                auto meas = exact_measure(cfg, g, beta);
                e["states"] = meas.size();
                e["log_z"] = meas.log_z;
                e["energy_density"] = meas.mean_energy_density();
                json pf = json::object();
                for (const auto& ev : fam.goods) pf[ev.name] = p_finite(meas, ev);
                pf["bad"] = p_finite(meas, fam.bad());
                e["p_finite"] = pf;
            } catch (const Refused& r) {
                e["refused"] = refused_text(r, cfg.exact_budget);
            }
            results.push_back(e);
        }
    }
    json out = base_report(cfg, "exact");
    out["grid"] = is_discrete(cfg.model) ? 0 : cfg.verify.grid;
    out["results"] = results;
    return out;
}

json report_json(const RunConfig& cfg, const VerificationReport& rep) {
    json out = base_report(cfg, "verify");
    json checks = json::array();
    json timings = json::object();
    for (const auto& c : rep.checks) {
        checks.push_back({{"name", c.name}, {"status", status_name(c.status)}, {"diagnostic", c.diagnostic}});
        timings[c.name] = c.seconds;
    }
    out["checks"] = checks;
    out["any_fail"] = rep.any_fail();
    out["metadata"] = {{"timings", timings}};
    return out;
}

std::string scan_csv(const RunConfig& cfg, const ScanCurve& curve) {
    std::ostringstream o;
    o << csv_header_comment(cfg);
    o << "beta,start,energy_mean,energy_err";
    for (const auto& e : curve.events) o << ",rho_" << e << ",rho_" << e << "_err";
    o << ",rho_bad,rho_bad_err,samples,acceptance,converged,flags\n";
    for (const auto& r : curve.rows) {
        o << format_number(r.beta) << ',' << start_name(r.start) << ',' << format_number(r.energy_mean) << ','
          << format_number(r.energy_err);
        for (std::size_t i = 0; i < curve.events.size(); ++i)
            o << ',' << format_number(r.rho[i]) << ',' << format_number(r.rho_err[i]);
        o << ',' << format_number(r.rho_bad) << ',' << format_number(r.rho_bad_err) << ',' << r.samples << ','
          << format_number(r.acceptance) << ',' << (r.converged ? 1 : 0) << ',' << r.flags << '\n';
    }
    return o.str();
}

json gap_json(const RunConfig& cfg, const ScanCurve& curve, const GapReport& gap) {
    json out{{"config_hash", config_hash(cfg)}, {"seed", cfg.seed}, {"model", model_name(cfg.model)}};
    out["jump"] = gap.jump;
    out["bracket"] = gap.jump ? json{gap.bracket_lo, gap.bracket_hi} : json(nullptr);
    out["gap"] = gap.gap;
    out["gap_interval"] = gap.gap ? json{gap.gap_lo, gap.gap_hi} : json(nullptr);
    out["gap_width"] = gap.width();
    out["epsilon"] = gap.epsilon;
    auto rows = [&](const std::vector<std::size_t>& idx) {
        json a = json::array();
        for (auto i : idx) a.push_back({{"beta", curve.rows[i].beta}, {"start", start_name(curve.rows[i].start)}});
        return a;
    };
    out["inside_gap"] = rows(gap.inside_gap);
    out["no_dominant"] = rows(gap.no_dominant);
    out["unconverged"] = rows(gap.unconverged);
    return out;
}

std::string scan_svg(const RunConfig& cfg, const ScanCurve& curve, const GapReport& gap) {
    const double W = 820, H = 640, left = 70, right = 20, top = 40, ph = 250, gapy = 60;
    double bmin = INFINITY, bmax = -INFINITY, emin = INFINITY, emax = -INFINITY;
    for (const auto& r : curve.rows) {
        bmin = std::min(bmin, r.beta);
        bmax = std::max(bmax, r.beta);
        emin = std::min(emin, r.energy_mean - r.energy_err);
        emax = std::max(emax, r.energy_mean + r.energy_err);
    }
    if (curve.rows.empty()) bmin = 0, bmax = 1, emin = 0, emax = 1;
    if (bmax <= bmin) bmax = bmin + 1;
    if (emax <= emin) emax = emin + 1;
    const double pw = W - left - right;
    auto X = [&](double b) { return left + (b - bmin) / (bmax - bmin) * pw; };
    auto Y = [&](double v, double lo, double hi, int panel) {
        double y0 = top + panel * (ph + gapy);
        return y0 + ph - (v - lo) / (hi - lo) * ph;
    };
    std::ostringstream o;
    auto n = [](double v) { return fmt("%.2f", v); };
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    o << "<!-- config_hash=" << config_hash(cfg) << " seed=" << cfg.seed << " -->\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (int panel = 0; panel < 2; ++panel) {
        double y0 = top + panel * (ph + gapy);
        if (gap.jump) {
            double x0 = X(gap.bracket_lo), x1 = X(gap.bracket_hi);
            o << "<rect x=\"" << n(x0 - 3) << "\" y=\"" << n(y0) << "\" width=\"" << n(x1 - x0 + 6) << "\" height=\"" << ph
              << "\" fill=\"#ffd8a8\" opacity=\"0.6\"/>\n";
        }
        o << "<rect x=\"" << left << "\" y=\"" << n(y0) << "\" width=\"" << pw << "\" height=\"" << ph
          << "\" fill=\"none\" stroke=\"black\"/>\n";
        double lo = panel == 0 ? emin : 0.0, hi = panel == 0 ? emax : 1.0;
        for (int k = 0; k <= 4; ++k) {
            double v = lo + (hi - lo) * k / 4.0;
            o << "<text x=\"" << left - 6 << "\" y=\"" << n(Y(v, lo, hi, panel) + 4) << "\" text-anchor=\"end\">"
              << fmt("%.3g", v) << "</text>\n";
            double b = bmin + (bmax - bmin) * k / 4.0;
            o << "<text x=\"" << n(X(b)) << "\" y=\"" << n(y0 + ph + 14) << "\" text-anchor=\"middle\">" << fmt("%.3g", b)
              << "</text>\n";
        }
        o << "<text x=\"" << left << "\" y=\"" << n(y0 - 8) << "\">"
          << (panel == 0 ? "energy density" : "block densities (solid: ordered start, dashed: disordered start)")
          << "</text>\n";
    }
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2",
                                    "#7f7f7f", "#bcbd22", "#17becf", "#ff7f0e"};
    const std::size_t ne = curve.events.size();
    for (Start s : {Start::ordered, Start::disordered}) {
        std::vector<const ScanRow*> rows;
        for (const auto& r : curve.rows)
            if (r.start == s) rows.push_back(&r);
        if (rows.empty()) continue;
        const char* dash = s == Start::ordered ? "" : " stroke-dasharray=\"5,3\"";
        const char* col = s == Start::ordered ? "#1f77b4" : "#d62728";
        std::string pts;
        for (auto* r : rows) {
            pts += n(X(r->beta)) + "," + n(Y(r->energy_mean, emin, emax, 0)) + " ";
            double x = X(r->beta);
            o << "<line x1=\"" << n(x) << "\" x2=\"" << n(x) << "\" y1=\"" << n(Y(r->energy_mean - r->energy_err, emin, emax, 0))
              << "\" y2=\"" << n(Y(r->energy_mean + r->energy_err, emin, emax, 0)) << "\" stroke=\"" << col << "\"/>\n";
            o << "<circle cx=\"" << n(x) << "\" cy=\"" << n(Y(r->energy_mean, emin, emax, 0)) << "\" r=\"2.5\" fill=\"" << col
              << "\"/>\n";
        }
        o << "<polyline fill=\"none\" stroke=\"" << col << "\"" << dash << " points=\"" << pts << "\"/>\n";
        for (std::size_t e = 0; e <= ne; ++e) {
            std::string p;
            for (auto* r : rows) {
                double v = e < ne ? r->rho[e] : r->rho_bad;
                p += n(X(r->beta)) + "," + n(Y(v, 0.0, 1.0, 1)) + " ";
            }
            const char* c = e < ne ? palette[e % 10] : "black";
            o << "<polyline fill=\"none\" stroke=\"" << c << "\"" << dash << " points=\"" << p << "\"/>\n";
        }
    }
    double ly = top + 2 * ph + gapy + 34;
    for (std::size_t e = 0; e <= ne && e < 14; ++e) {
        double x = left + e * 52.0;
        const char* c = e < ne ? palette[e % 10] : "black";
        o << "<line x1=\"" << n(x) << "\" x2=\"" << n(x + 12) << "\" y1=\"" << n(ly) << "\" y2=\"" << n(ly) << "\" stroke=\"" << c
          << "\"/><text x=\"" << n(x + 15) << "\" y=\"" << n(ly + 4) << "\">" << (e < ne ? curve.events[e] : "bad")
          << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

int run(int argc, char** argv) {
    CLI::App app{"Block-event checks and forbidden-gap scans for torus spin models"};
    app.require_subcommand(1);
    std::string config_path, preset_name, out_dir;
    std::optional<std::uint64_t> seed;
    for (const char* name : {"verify", "scan", "bounds", "exact"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--preset", preset_name, "shipped preset: potts, diluted-potts, diluted-xy, o2af, nlvm, magnetostriction");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "master seed override");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    RunConfig cfg;
    try {
        json doc = json::object();
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f) throw ConfigError("cannot read " + config_path);
            try {
                doc = json::parse(f);
            } catch (const json::parse_error& e) {
                throw ConfigError(std::string("config parse error: ") + e.what());
            }
        }
        if (!doc.is_object()) throw ConfigError("config must be a JSON object");
        if (!preset_name.empty()) doc["preset"] = preset_name;
        if (!doc.contains("preset") && !doc.contains("model")) doc["preset"] = "potts";
        if (seed) doc["seed"] = *seed;
        if (!out_dir.empty()) doc["output"] = out_dir;
        cfg = parse_config(doc);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    Timer timer;
    try {
        namespace fs = std::filesystem;
        const fs::path out(cfg.output);
        fs::create_directories(out);
        const std::string model = model_name(cfg.model);
        int code = 0;
        json report;
        if (command == "verify") {
            auto rep = cmd_verify(cfg);
            for (const auto& c : rep.checks) std::cout << status_name(c.status) << "  " << c.name << "  " << c.diagnostic << "\n";
            report = report_json(cfg, rep);
            code = rep.any_fail() ? 1 : 0;
        } else if (command == "scan") {
            GapReport gap;
            auto curve = cmd_scan(cfg, &gap);
            write_file(out / ("scan_" + model + ".csv"), scan_csv(cfg, curve));
            json g = gap_json(cfg, curve, gap);
            write_file(out / ("gap_" + model + ".json"), dump(g));
            write_file(out / ("plot_" + model + ".svg"), scan_svg(cfg, curve, gap));
            report = base_report(cfg, "scan");
            json rows = json::array();
            for (const auto& r : curve.rows) rows.push_back(row_json(curve, r));
            report["rows"] = rows;
            report["gap"] = g;
            std::cout << "wrote scan_" << model << ".csv, gap_" << model << ".json, plot_" << model << ".svg\n";
            if (gap.jump)
                std::cout << "bracket [" << format_number(gap.bracket_lo) << ", " << format_number(gap.bracket_hi) << "]"
                          << ", gap width " << format_number(gap.width()) << "\n";
        } else if (command == "bounds") {
            std::string csv;
            report = cmd_bounds(cfg, &csv);
            write_file(out / ("bounds_" + model + ".csv"), csv);
            std::cout << "wrote bounds_" << model << ".csv\n";
        } else {
            report = cmd_exact(cfg);
            for (const auto& e : report["results"]) std::cout << e.dump() << "\n";
        }
        json meta = metadata(timer.seconds());
        if (report.contains("metadata")) meta.update(report["metadata"]);
        report["metadata"] = meta;
        write_file(out / "report.json", dump(report));
        return code;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace fgap::cli
