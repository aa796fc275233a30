#include "fgap/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/binomial.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace fgap {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double nlvm_bond(double p, double dphi) {
    // ((1 + cos x) / 2)^p = |cos(x/2)|^(2p)
    return std::pow(std::abs(std::cos(0.5 * dphi)), 2.0 * p);
}

double magneto_lambda_site(const Magnetostriction& m, const TorusGeometry& g, const Configuration& c, Site y) {
    double sum = 0.0;
    int d = g.d();
    for (int i = 0; i < d; ++i) {
        std::size_t ai[2] = {g.edge(y, i), g.edge(g.neighbor(y, i, -1), i)};
        for (int j = i + 1; j < d; ++j) {
            std::size_t bj[2] = {g.edge(y, j), g.edge(g.neighbor(y, j, -1), j)};
            for (std::size_t a : ai)
                for (std::size_t b : bj) {
                    double dr = c.edges[a] - c.edges[b];
                    sum += dr * dr;
                }
        }
    }
    return m.lambda * sum;
}

}  // namespace

std::string model_name(const ModelSpec& m) {
    return std::visit(overloaded{[](const Potts&) { return std::string("potts"); },
                                 [](const DilutedPotts&) { return std::string("diluted-potts"); },
                                 [](const DilutedXY&) { return std::string("diluted-xy"); },
                                 [](const O2AF&) { return std::string("o2af"); },
                                 [](const NonlinearFerromagnet&) { return std::string("nlvm"); },
                                 [](const Magnetostriction&) { return std::string("magnetostriction"); }},
                      m);
}

bool is_discrete(const ModelSpec& m) {
    return std::holds_alternative<Potts>(m) || std::holds_alternative<DilutedPotts>(m);
}

void validate(const ModelSpec& m, const TorusGeometry& g) {
    auto finite = [](double v, const char* what) {
        if (!std::isfinite(v)) throw std::domain_error(std::string(what) + " must be finite");
    };
    std::visit(overloaded{[&](const Potts& p) {
                              if (p.q < 2) throw std::domain_error("Potts needs q >= 2");
                              finite(p.coupling, "coupling");
                              finite(p.axial_next, "axial_next");
                          },
                          [&](const DilutedPotts& p) {
                              if (p.q < 2) throw std::domain_error("diluted Potts needs q >= 2");
                              finite(p.lambda, "lambda");
                              finite(p.kappa, "kappa");
                          },
                          [&](const DilutedXY& p) {
                              finite(p.lambda, "lambda");
                              finite(p.kappa, "kappa");
                          },
                          [&](const O2AF& p) {
                              finite(p.gamma, "gamma");
                              if (g.d() != 2) throw std::domain_error("O2AF is defined for d = 2");
                          },
                          [&](const NonlinearFerromagnet& p) {
                              if (!(p.p >= 1.0) || !std::isfinite(p.p)) throw std::domain_error("nonlinear ferromagnet needs p >= 1");
                          },
                          [&](const Magnetostriction& p) {
                              for (double v : {p.J1, p.J2, p.eta_J, p.kappa, p.lambda}) finite(v, "magnetostriction coupling");
                              if (!(p.R > 0.0) || !(p.r_max > p.R)) throw std::domain_error("magnetostriction needs r_max > R > 0");
                          }},
               m);
}

double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(a, two_pi);
    if (r > std::numbers::pi) r -= two_pi;
    if (r <= -std::numbers::pi) r += two_pi;
    return r;
}

Configuration constant_configuration(const ModelSpec& m, const TorusGeometry& g) {
    Configuration c;
    std::size_t n = g.sites();
    std::visit(overloaded{[&](const Potts&) { c.labels.assign(n, 0); },
                          [&](const DilutedPotts&) {
                              c.labels.assign(n, 0);
                              c.occupancy.assign(n, 1);
                          },
                          [&](const DilutedXY&) {
                              c.occupancy.assign(n, 1);
                              c.angles.assign(n, 0.0);
                          },
                          [&](const O2AF&) { c.angles.assign(n, 0.0); },
                          [&](const NonlinearFerromagnet&) { c.angles.assign(n, 0.0); },
                          [&](const Magnetostriction& p) {
                              c.labels.assign(n, 1);
                              c.edges.assign(g.edges(), p.R);
                          }},
               m);
    return c;
}

void check_shape(const ModelSpec& m, const TorusGeometry& g, const Configuration& c) {
    Configuration ref = constant_configuration(m, g);
    if (c.labels.size() != ref.labels.size() || c.occupancy.size() != ref.occupancy.size() ||
        c.angles.size() != ref.angles.size() || c.edges.size() != ref.edges.size())
        throw std::domain_error("configuration shape does not match " + model_name(m) + " on L=" + std::to_string(g.L()));
}

int discrete_site_states(const ModelSpec& m) {
    if (auto p = std::get_if<Potts>(&m)) return p->q;
    if (auto p = std::get_if<DilutedPotts>(&m)) return 2 * p->q;
    throw std::domain_error(model_name(m) + " has no discrete state space");
}

int discrete_state(const ModelSpec& m, const Configuration& c, Site s) {
    if (std::holds_alternative<Potts>(m)) return c.labels[s];
    if (auto p = std::get_if<DilutedPotts>(&m)) return c.occupancy[s] * p->q + c.labels[s];
    throw std::domain_error(model_name(m) + " has no discrete state space");
}

void set_discrete_state(const ModelSpec& m, Configuration& c, Site s, int k) {
    if (std::holds_alternative<Potts>(m)) {
        c.labels[s] = k;
    } else if (auto p = std::get_if<DilutedPotts>(&m)) {
        c.occupancy[s] = static_cast<std::uint8_t>(k / p->q);
        c.labels[s] = k % p->q;
    } else {
        throw std::domain_error(model_name(m) + " has no discrete state space");
    }
}

Configuration transport(const Configuration& c, const SiteMap& map) {
    Configuration out = c;
    for (std::size_t s = 0; s < c.labels.size(); ++s) out.labels[map.site[s]] = c.labels[s];
    for (std::size_t s = 0; s < c.occupancy.size(); ++s) out.occupancy[map.site[s]] = c.occupancy[s];
    for (std::size_t s = 0; s < c.angles.size(); ++s) out.angles[map.site[s]] = c.angles[s];
    for (std::size_t e = 0; e < c.edges.size(); ++e) out.edges[map.edge[e]] = c.edges[e];
    return out;
}

double torus_energy(const ModelSpec& m, const TorusGeometry& g, const Configuration& c) {
    check_shape(m, g, c);
    const int d = g.d();
    const std::size_t n = g.sites();
    double E = 0.0;
    std::visit(overloaded{[&](const Potts& p) {
                              for (Site s = 0; s < n; ++s)
                                  for (int i = 0; i < d; ++i) {
                                      if (c.labels[s] == c.labels[g.neighbor(s, i, 1)]) E -= p.coupling;
                                      if (p.axial_next != 0.0 && c.labels[s] == c.labels[g.neighbor(s, i, 2)]) E -= p.axial_next;
                                  }
                          },
                          [&](const DilutedPotts& p) {
                              for (Site s = 0; s < n; ++s) {
                                  if (!c.occupancy[s]) continue;
                                  E -= p.lambda;
                                  for (int i = 0; i < d; ++i) {
                                      Site t = g.neighbor(s, i, 1);
                                      if (!c.occupancy[t]) continue;
                                      E -= (c.labels[s] == c.labels[t] ? 0.0 : -1.0) + p.kappa;
                                  }
                              }
                          },
                          [&](const DilutedXY& p) {
                              for (Site s = 0; s < n; ++s) {
                                  if (!c.occupancy[s]) continue;
                                  E -= p.lambda;
                                  for (int i = 0; i < d; ++i) {
                                      Site t = g.neighbor(s, i, 1);
                                      if (!c.occupancy[t]) continue;
                                      E -= std::cos(c.angles[s] - c.angles[t]) - 1.0 + p.kappa;
                                  }
                              }
                          },
                          [&](const O2AF& p) {
                              for (Site s = 0; s < n; ++s) {
                                  Site r = g.neighbor(s, 0, 1);
                                  Site u = g.neighbor(s, 1, 1);
                                  E += std::cos(c.angles[s] - c.angles[g.neighbor(r, 1, 1)]);
                                  E += std::cos(c.angles[s] - c.angles[g.neighbor(r, 1, -1)]);
                                  E += p.gamma * (std::cos(c.angles[s] - c.angles[r]) + std::cos(c.angles[s] - c.angles[u]));
                              }
                          },
                          [&](const NonlinearFerromagnet& p) {
                              for (Site s = 0; s < n; ++s)
                                  for (int i = 0; i < d; ++i) E -= nlvm_bond(p.p, c.angles[s] - c.angles[g.neighbor(s, i, 1)]);
                          },
                          [&](const Magnetostriction& p) {
                              for (Site s = 0; s < n; ++s) {
                                  for (int i = 0; i < d; ++i) {
                                      double r = c.edges[g.edge(s, i)];
                                      E -= p.J(r) * c.labels[s] * c.labels[g.neighbor(s, i, 1)];
                                      E += p.kappa * (r - p.R) * (r - p.R);
                                  }
                                  E += magneto_lambda_site(p, g, c, s);
                              }
                          }},
               m);
    return E;
}

double energy_density(const ModelSpec& m, const TorusGeometry& g, const Configuration& c) {
    return torus_energy(m, g, c) / static_cast<double>(g.sites());
}

double gibbs_weight(const ModelSpec& m, const TorusGeometry& g, double beta, const Configuration& c) {
    if (beta < 0.0) throw std::domain_error("beta must be >= 0");
    if (beta == 0.0) return 1.0;
    return std::exp(-beta * torus_energy(m, g, c));
}

double site_energy(const ModelSpec& m, const TorusGeometry& g, const Configuration& c, Site s) {
    const int d = g.d();
    double E = 0.0;
    std::visit(overloaded{[&](const Potts& p) {
                              for (int i = 0; i < d; ++i)
                                  for (int step : {-1, 1}) {
                                      if (c.labels[s] == c.labels[g.neighbor(s, i, step)]) E -= p.coupling;
                                      if (p.axial_next != 0.0 && c.labels[s] == c.labels[g.neighbor(s, i, 2 * step)])
                                          E -= p.axial_next;
                                  }
                          },
                          [&](const DilutedPotts& p) {
                              if (!c.occupancy[s]) return;
                              E -= p.lambda;
                              for (int i = 0; i < d; ++i)
                                  for (int step : {-1, 1}) {
                                      Site t = g.neighbor(s, i, step);
                                      if (!c.occupancy[t]) continue;
                                      E -= (c.labels[s] == c.labels[t] ? 0.0 : -1.0) + p.kappa;
                                  }
                          },
                          [&](const DilutedXY& p) {
                              if (!c.occupancy[s]) return;
                              E -= p.lambda;
                              for (int i = 0; i < d; ++i)
                                  for (int step : {-1, 1}) {
                                      Site t = g.neighbor(s, i, step);
                                      if (!c.occupancy[t]) continue;
                                      E -= std::cos(c.angles[s] - c.angles[t]) - 1.0 + p.kappa;
                                  }
                          },
                          [&](const O2AF& p) {
                              for (int step : {-1, 1}) {
                                  Site h = g.neighbor(s, 0, step);
                                  E += p.gamma * std::cos(c.angles[s] - c.angles[h]);
                                  E += p.gamma * std::cos(c.angles[s] - c.angles[g.neighbor(s, 1, step)]);
                                  E += std::cos(c.angles[s] - c.angles[g.neighbor(h, 1, 1)]);
                                  E += std::cos(c.angles[s] - c.angles[g.neighbor(h, 1, -1)]);
                              }
                          },
                          [&](const NonlinearFerromagnet& p) {
                              for (int i = 0; i < d; ++i)
                                  for (int step : {-1, 1}) E -= nlvm_bond(p.p, c.angles[s] - c.angles[g.neighbor(s, i, step)]);
                          },
                          [&](const Magnetostriction& p) {
                              for (int i = 0; i < d; ++i) {
                                  Site up = g.neighbor(s, i, 1), down = g.neighbor(s, i, -1);
                                  E -= p.J(c.edges[g.edge(s, i)]) * c.labels[s] * c.labels[up];
                                  E -= p.J(c.edges[g.edge(down, i)]) * c.labels[s] * c.labels[down];
                              }
                          }},
               m);
    return E;
}

double edge_energy(const Magnetostriction& m, const TorusGeometry& g, const Configuration& c, std::size_t e) {
    const int d = g.d();
    Site x = e / d;
    int i = static_cast<int>(e % d);
    Site y = g.neighbor(x, i, 1);
    double r = c.edges[e];
    double E = -m.J(r) * c.labels[x] * c.labels[y] + m.kappa * (r - m.R) * (r - m.R);
    double sum = 0.0;
    for (Site end : {x, y})
        for (int j = 0; j < d; ++j) {
            if (j == i) continue;
            for (std::size_t b : {g.edge(end, j), g.edge(g.neighbor(end, j, -1), j)}) {
                double dr = r - c.edges[b];
                sum += dr * dr;
            }
        }
    return E + m.lambda * sum;
}

PairInteraction PairInteraction::cube(int d, double J) {
    PairInteraction p;
    p.kind = Kind::cube;
    p.d = d;
    p.cube_couplings.assign((std::size_t{1} << d) - 1, J);
    return p;
}

PairInteraction PairInteraction::yukawa(int d, double mu) {
    if (!(mu > 0.0)) throw std::domain_error("yukawa needs mu > 0");
    PairInteraction p;
    p.kind = Kind::yukawa;
    p.d = d;
    p.mu = mu;
    return p;
}

PairInteraction PairInteraction::powerlaw(int d, double varkappa) {
    if (!(varkappa > 0.0)) throw std::domain_error("power law needs exponent > 0");
    PairInteraction p;
    p.kind = Kind::powerlaw;
    p.d = d;
    p.varkappa = varkappa;
    return p;
}

namespace {

double radial(const PairInteraction& pi, double n) {
    return pi.kind == PairInteraction::Kind::yukawa ? std::exp(-pi.mu * n) : std::pow(n, -pi.varkappa);
}

// Upper bound on sum_{n > K} s_d(n) J(n), using s_d(n) <= 3^d n^{d-1} and an
// integral beyond a far cutoff where the summand is decreasing.
double radial_tail(const PairInteraction& pi, long K) {
    const int d = pi.d;
    long K2 = std::max<long>(100 * K, 1000);
    if (pi.kind == PairInteraction::Kind::yukawa) K2 = std::max<long>(K2, static_cast<long>(std::ceil((d - 1) / pi.mu)) + 1);
    double sum = 0.0;
    for (long n = K + 1; n <= K2; ++n) sum += l1_shell_count(d, n) * radial(pi, static_cast<double>(n));
    double c = std::pow(3.0, d);
    double rest;
    if (pi.kind == PairInteraction::Kind::yukawa) {
        // int_{K2}^inf x^{d-1} e^{-mu x} dx = Gamma(d, mu K2) / mu^d
        rest = c * boost::math::tgamma(static_cast<double>(d), pi.mu * K2) / std::pow(pi.mu, d);
    } else {
        rest = c * std::pow(static_cast<double>(K2), d - pi.varkappa) / (pi.varkappa - d);
    }
    return sum + rest;
}

}  // namespace

double PairInteraction::coupling(const Coord& z) const {
    long l1 = 0;
    for (int v : z) l1 += std::abs(v);
    if (l1 == 0) return 0.0;
    if (kind == Kind::cube) {
        std::size_t mask = 0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            if (std::abs(z[i]) > 1) return 0.0;
            if (z[i] != 0) mask |= std::size_t{1} << i;
        }
        return cube_couplings.at(mask - 1);
    }
    return radial(*this, static_cast<double>(l1));
}

double l1_shell_count(int d, long n) {
    if (n == 0) return 1.0;
    double s = 0.0;
    for (int k = 1; k <= std::min<long>(d, n); ++k)
        s += std::ldexp(1.0, k) * boost::math::binomial_coefficient<double>(d, k) *
             boost::math::binomial_coefficient<double>(static_cast<unsigned>(n - 1), static_cast<unsigned>(k - 1));
    return s;
}

NormResult interaction_norm(const PairInteraction& pi, long tail_cutoff) {
    if (tail_cutoff < 1) throw std::domain_error("tail cutoff must be >= 1");
    NormResult r;
    if (pi.kind == PairInteraction::Kind::cube) {
        // every partner in {-1,0,1}^d \ {0}, grouped by the set of moving coordinates
        for (std::size_t mask = 1; mask < (std::size_t{1} << pi.d); ++mask) {
            int k = __builtin_popcountll(mask);
            r.partial += std::ldexp(1.0, k) * std::abs(pi.cube_couplings.at(mask - 1));
        }
        r.partial *= pi.spin_bound;
        return r;
    }
    if (pi.kind == PairInteraction::Kind::powerlaw && pi.varkappa <= pi.d) {
        r.divergent = true;
        r.tail_bound = std::numeric_limits<double>::infinity();
    }
    for (long n = 1; n <= tail_cutoff; ++n) r.partial += l1_shell_count(pi.d, n) * radial(pi, static_cast<double>(n));
    r.partial *= pi.spin_bound;
    if (!r.divergent) r.tail_bound = pi.spin_bound * radial_tail(pi, tail_cutoff);
    return r;
}

NormResult boundary_interaction_sum(const PairInteraction& pi, int L, long cutoff) {
    if (L < 1) throw std::domain_error("L must be >= 1");
    const int d = pi.d;
    double vol = std::pow(static_cast<double>(L), d);
    NormResult r;
    // displacements inside (-L, L)^d: count of x with x + z outside the box
    Coord z(d, -(L - 1));
    double inside = 0.0;
    for (;;) {
        double J = std::abs(pi.coupling(z));
        if (J != 0.0) {
            double stay = 1.0;
            for (int v : z) stay *= static_cast<double>(L - std::abs(v));
            r.partial += J * (vol - stay);
            inside += J;
        }
        int i = 0;
        while (i < d && z[i] == L - 1) z[i++] = -(L - 1);
        if (i == d) break;
        ++z[i];
    }
    if (pi.kind != PairInteraction::Kind::cube) {
        // every other displacement leaves the box for all x
        NormResult norm = interaction_norm(pi, std::max<long>(cutoff, static_cast<long>(d) * (L - 1)));
        if (norm.divergent) {
            r.divergent = true;
            r.tail_bound = std::numeric_limits<double>::infinity();
        } else {
            r.partial += vol * std::max(0.0, norm.partial / pi.spin_bound - inside);
            r.tail_bound = vol * norm.tail_bound;
        }
    }
    r.partial *= pi.spin_bound;
    return r;
}

}  // namespace fgap
