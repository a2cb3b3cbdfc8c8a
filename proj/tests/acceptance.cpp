// Acceptance battery: twelve end-to-end checks of the library and CLI at
// fixed tolerances and time budgets.  Each criterion prints exactly one
// PASS/FAIL line; the process exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "nbody/bounds.hpp"
#include "nbody/cli.hpp"
#include "nbody/core.hpp"
#include "nbody/dynamics.hpp"
#include "nbody/minimize.hpp"
#include "oracles.hpp"

using namespace nbody;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

double rel_err(double got, double want) {
    return std::abs(got - want) / std::max(1e-300, std::abs(want));
}

Configuration two_points(double ax, double ay, double bx, double by) {
    Mat c(2, 2);
    c(0, 0) = ax;
    c(1, 0) = ay;
    c(0, 1) = bx;
    c(1, 1) = by;
    return Configuration(c);
}

double mean_pair_distance(const Configuration& x) {
    const int n = x.n_bodies();
    if (n < 2) return 0.0;
    double sum = 0.0;
    int count = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            sum += (x.coords.col(i) - x.coords.col(j)).norm();
            ++count;
        }
    return sum / count;
}

// Mirror of the solver's automatic collision floor for default options.
double auto_collision_floor(const Configuration& x, const Configuration& x_prime) {
    double eps = 1e-6 * 0.5 * (mean_pair_distance(x) + mean_pair_distance(x_prime));
    const double endpoint_min = std::min(min_pair_distance(x), min_pair_distance(x_prime));
    if (endpoint_min <= eps) eps = 0.5 * endpoint_min;
    return eps;
}

double max_energy_error(const MassSystem& sys, const DiscretePath& path, double h) {
    double worst = 0.0;
    for (const auto& [t, e] : energy_profile(sys, path)) worst = std::max(worst, std::abs(e - h));
    return worst;
}

std::vector<double> random_masses(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> unif(0.5, 2.0);
    std::vector<double> m(static_cast<std::size_t>(n));
    for (auto& v : m) v = unif(rng);
    return m;
}

// ---- shared state between criteria 4/5 and 9/10 ----

struct SweepCase {
    bool converged = false;
    double err64 = kInfinity;
    double err256 = kInfinity;
    double h = 0.0;
    double margin64 = 0.0;
    double margin256 = 0.0;
    double floor0 = 0.0;
};

std::vector<SweepCase> g_sweep;
bool g_sweep_ran = false;

std::vector<const AsymptoticsReport*> g_reports;  // fixtures seen by the classifier
AsymptoticsReport g_parabolic, g_hyperbolic, g_pairs;
bool g_asymptotics_ran = false;

// ---- criteria ----

// Free particle: the closed-form value sqrt(2 h m) * l and the optimal
// transfer time l * sqrt(m / (2h)).
Outcome criterion_1() {
    const MassSystem sys({2.0}, 2);
    Configuration a = Configuration::zero(2, 1);
    Configuration b = Configuration::zero(2, 1);
    b.coords(0, 0) = 3.0;
    const MinimizeResult res = minimize_free_time(sys, a, b, 2.0);
    const double want_value = std::sqrt(2.0 * 2.0 * 2.0) * 3.0;  // sqrt(8) * 3
    const double want_tau = 3.0 / std::sqrt(2.0);
    const double ev = rel_err(res.value, want_value);
    const double et = rel_err(res.tau, want_tau);
    const bool pass = res.converged && ev <= 1e-6 && et <= 1e-6;
    return {pass, fmt("value rel %.1e, tau rel %.1e%s", ev, et,
                      res.converged ? "" : ", not converged")};
}

// Elliptic two-body arc against the closed-form conic action at 256 segments.
Outcome criterion_2() {
    oracles::KeplerEllipse orb;
    orb.m1 = 1.0;
    orb.m2 = 1.0;
    orb.a = 1.0;
    orb.e = 0.3;
    const double E0 = 0.4, E1 = 1.9, h = 0.7;
    const double tau = orb.time_at(E1) - orb.time_at(E0);
    const double exact = orb.action_between(E0, E1, h);
    SolveOptions opts;
    opts.segments = 256;
    opts.max_iters = 5000;
    const MinimizeResult res =
        minimize_fixed_time(orb.system(), orb.position(E0), orb.position(E1), tau, h, opts);
    const double e = rel_err(res.value, exact);
    const bool pass = res.converged && e <= 1e-5;
    return {pass, fmt("action rel %.2e vs conic closed form%s", e,
                      res.converged ? "" : ", not converged")};
}

// Splitting identity: h-term + center kinetic + cluster actions + interaction
// reproduces the action to round-off on random paths and 2-block partitions.
Outcome criterion_3() {
    std::mt19937_64 rng(20250825);
    const double hs[] = {0.0, 0.5, 2.0};
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 4;
        const MassSystem sys(random_masses(rng, n), 3);
        const DiscretePath path = helpers::random_path(rng, 3, n, 12, 1.5);
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        const int cut = 1 + static_cast<int>(rng() % (n - 1));
        ClusterPartition p({{order.begin(), order.begin() + cut}, {order.begin() + cut, order.end()}},
                           n);
        const double h = hs[trial % 3];
        const double a = action(sys, path, h);
        const ActionSplit split = split_action(sys, path, p, h);
        const double defect = std::abs(split.total - a) / (1.0 + std::abs(a));
        worst = std::max(worst, defect);
    }
    return {worst <= 1e-10, fmt("worst split defect %.2e over 100 paths", worst)};
}

// Free-time minimizers run at constant energy h: midpoint energy error at 64
// segments, and at least fourfold reduction when re-solved at 256.
Outcome criterion_4() {
    std::mt19937_64 rng(777);
    const double hs[] = {0.1, 1.0, 10.0};
    g_sweep.clear();
    g_sweep.reserve(50);
    int n_conv = 0, n_energy = 0, n_reduce = 0, n_floor = 0;
    double worst_scaled = 0.0, worst_ratio = kInfinity;
    for (int i = 0; i < 50; ++i) {
        SweepCase c;
        const int n = 2 + i % 3;
        c.h = hs[(i / 3) % 3];
        const MassSystem sys(random_masses(rng, n), 2);
        const Configuration a = helpers::separated_configuration(rng, 2, n, 2.0, 1.5);
        // Transfer target: a shape-only random displacement of the start whose
        // size tracks the travel speed (so the time step, and with it the
        // discretization error, is comparable across energies), kept collision
        // free along the whole straight chord.
        std::normal_distribution<double> kick(0.0, std::sqrt(1.0 + c.h));
        Configuration b;
        for (int attempt = 0;; ++attempt) {
            b = a;
            Mat k(2, n);
            for (int col = 0; col < n; ++col)
                for (int d = 0; d < 2; ++d) k(d, col) = kick(rng);
            Vec com = Vec::Zero(2);
            for (int col = 0; col < n; ++col) com += sys.mass(col) * k.col(col);
            k.colwise() -= Vec(com / sys.total_mass());
            b.coords += k;
            if (min_pair_distance(b) >= 1.2 &&
                min_quadrature_distance(straight_line_path(a, b, 0.0, 1.0, 32)) >= 0.9)
                break;
            if (attempt > 5000) return {false, "endpoint rejection sampling failed"};
        }
        c.floor0 = auto_collision_floor(a, b);
        SolveOptions opts;
        opts.max_iters = 5000;
        opts.grad_tol = 1e-10;
        opts.segments = 64;
        const MinimizeResult r64 = minimize_free_time(sys, a, b, c.h, opts);
        opts.segments = 256;
        const MinimizeResult r256 = minimize_free_time(sys, a, b, c.h, opts);
        c.converged = r64.converged && r256.converged;
        if (c.converged) {
            ++n_conv;
            c.err64 = max_energy_error(sys, r64.path, c.h);
            c.err256 = max_energy_error(sys, r256.path, c.h);
            c.margin64 = interior_collision_margin(r64);
            c.margin256 = interior_collision_margin(r256);
            const double scaled = c.err64 / (1e-3 * (1.0 + c.h));
            worst_scaled = std::max(worst_scaled, scaled);
            if (c.err64 <= 1e-3 * (1.0 + c.h)) ++n_energy;
            // The reduction ratio is only meaningful where the coarse error is
            // measurable: below a thousandth of the energy budget both solves
            // sit at the solver-termination floor and the ratio is noise.
            if (c.err64 <= 1e-6 * (1.0 + c.h)) {
                ++n_reduce;
                ++n_floor;
            } else {
                const double ratio = c.err64 / c.err256;
                worst_ratio = std::min(worst_ratio, ratio);
                if (ratio >= 4.0) ++n_reduce;
            }
        }
        g_sweep.push_back(c);
    }
    g_sweep_ran = true;
    const bool pass = n_conv == 50 && n_energy == 50 && n_reduce == 50;
    return {pass,
            fmt("converged %d/50, worst err64 %.2f of budget, worst reduction %.1fx (%d at floor)",
                n_conv, worst_scaled, worst_ratio, n_floor)};
}

// Every converged sweep solve stays clear of the collision floor strictly
// inside the arc.
Outcome criterion_5() {
    if (!g_sweep_ran) return {false, "energy sweep unavailable"};
    int checked = 0, ok = 0;
    double tightest = kInfinity;
    for (const SweepCase& c : g_sweep) {
        if (!c.converged) continue;
        ++checked;
        const double margin = std::min(c.margin64, c.margin256);
        tightest = std::min(tightest, margin / c.floor0);
        if (margin > c.floor0) ++ok;
    }
    const bool pass = checked > 0 && ok == checked;
    return {pass, fmt("%d/%d margins above floor, tightest %.1ex", ok, checked, tightest)};
}

// Kepler-scaling covariance: (x, tau, h) -> (l x, l^{3/2} tau, h / l)
// multiplies the value by l^{1/2}, on matched grids.
Outcome criterion_6() {
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> tau_dist(0.8, 2.5), h_dist(0.2, 2.0);
    const double lambdas[] = {0.5, 2.0, 10.0};
    int matched = 0, total = 0;
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
        const int n = 2 + i % 2;
        const MassSystem sys(random_masses(rng, n), 2);
        const Configuration a = helpers::separated_configuration(rng, 2, n, 1.5, 1.0);
        const Configuration b = helpers::separated_configuration(rng, 2, n, 1.5, 1.0);
        const double tau = tau_dist(rng), h = h_dist(rng);
        SolveOptions opts;
        opts.max_iters = 3000;
        const MinimizeResult base = minimize_fixed_time(sys, a, b, tau, h, opts);
        for (double lam : lambdas) {
            ++total;
            const Configuration as(Mat(lam * a.coords)), bs(Mat(lam * b.coords));
            const MinimizeResult scaled =
                minimize_fixed_time(sys, as, bs, std::pow(lam, 1.5) * tau, h / lam, opts);
            if (!base.converged || !scaled.converged) continue;
            const double e = rel_err(scaled.value, std::sqrt(lam) * base.value);
            worst = std::max(worst, e);
            if (e <= 1e-6) ++matched;
        }
    }
    return {matched == total, fmt("%d/%d matched, worst rel %.1e", matched, total, worst)};
}

// Fit (alpha, beta) on a seeded sweep, then confirm the no-interaction phase
// bound on 200 fresh draws for every admissible R on the test grid.
Outcome criterion_7() {
    const MassSystem sys({1.2, 0.8, 1.5}, 3);
    FitSampleSpec fspec;
    fspec.count = 200;
    fspec.radius_min = 0.5;
    fspec.radius_max = 4.0;
    fspec.tau_min = 0.1;
    fspec.tau_max = 8.0;
    fspec.seed = 7;
    fspec.segments = 24;
    BoundConstants c;
    try {
        c = fit_phi_constants(sys, fspec);
    } catch (const FitRejected& e) {
        return {false, fmt("fit rejected: %s", e.what())};
    }

    const std::vector<ClusterPartition> pool = {
        ClusterPartition({{0, 1}, {2}}, 3), ClusterPartition({{0}, {1, 2}}, 3),
        ClusterPartition({{0, 2}, {1}}, 3), ClusterPartition::singletons(3)};
    const double hs[] = {0.3, 1.0, 3.0};
    std::mt19937_64 rng(fspec.seed + 1000);
    std::uniform_real_distribution<double> log_scale(std::log(0.6), std::log(3.0));
    int satisfied = 0, solved = 0;
    double worst_ratio = 0.0;
    const int kGrid = 8;
    for (int s = 0; s < 200; ++s) {
        const double scale = std::exp(log_scale(rng));
        const Configuration x = helpers::separated_configuration(rng, 3, 3, scale, 0.15 * scale);
        const Configuration xp = helpers::separated_configuration(rng, 3, 3, scale, 0.15 * scale);
        const ClusterPartition& p = pool[static_cast<std::size_t>(s % 4)];
        const double h = hs[s % 3];
        SolveOptions inner;
        inner.segments = 24;
        inner.max_iters = 2000;
        const NoInteractionResult ni = phi_no_interaction(sys, x, xp, p, h, std::nullopt, inner);
        if (!ni.converged) continue;
        ++solved;
        const double rz = r_z(sys, x, xp, p);
        bool all_ok = true;
        for (int g = 1; g <= kGrid; ++g) {
            const double R = rz + (10.0 * rz + 1.0 - rz) * g / kGrid;
            const double rhs = lemma1_rhs(sys, h, c, x, xp, p, R);
            worst_ratio = std::max(worst_ratio, ni.value / rhs);
            if (!(ni.value <= rhs)) all_ok = false;
        }
        if (all_ok) ++satisfied;
    }
    const bool pass = solved == 200 && satisfied == 200;
    return {pass, fmt("alpha %.3g beta %.3g; %d/200 solved, %d/200 bounded, worst ratio %.3f",
                      c.alpha, c.beta, solved, satisfied, worst_ratio)};
}

// Chain inequality: the full minimizer never beats the no-interaction value
// plus the interaction integral along the split path.
Outcome criterion_8() {
    std::mt19937_64 rng(9090);
    const std::vector<ClusterPartition> pool = {ClusterPartition({{0, 1}, {2}}, 3),
                                                ClusterPartition({{0}, {1, 2}}, 3),
                                                ClusterPartition({{0, 2}, {1}}, 3)};
    const double hs[] = {0.3, 1.0, 3.0};
    int held = 0, solved = 0;
    double tightest = kInfinity;
    for (int i = 0; i < 30; ++i) {
        const MassSystem sys(random_masses(rng, 3), 3);
        const Configuration a = helpers::separated_configuration(rng, 3, 3, 2.0, 1.0);
        const Configuration b = helpers::separated_configuration(rng, 3, 3, 2.0, 1.0);
        const double h = hs[i % 3];
        const ClusterPartition& p = pool[static_cast<std::size_t>(i % 3)];
        SolveOptions opts;
        opts.max_iters = 3000;
        const MinimizeResult full = minimize_free_time(sys, a, b, h, opts);
        const NoInteractionResult ni = phi_no_interaction(sys, a, b, p, h, std::nullopt, opts);
        if (!full.converged || !ni.converged) continue;
        ++solved;
        const double cross = interaction_integral(sys, ni.path, p);
        const double rhs = ni.value + cross;
        const double slack = rhs + 1e-6 * (1.0 + std::abs(rhs)) - full.value;
        tightest = std::min(tightest, slack);
        if (slack >= 0.0) ++held;
    }
    const bool pass = solved == 30 && held == 30;
    return {pass,
            fmt("%d/30 solved, %d/30 inequalities held, tightest slack %.2e", solved, held, tightest)};
}

// Integrated escape asymptotics: separation exponents 2/3 (parabolic, with
// matching potential decay) and 1 (hyperbolic), plus exact recovery of the
// two-pairs partition from a synthetic four-body trajectory.
Outcome criterion_9() {
    // parabolic escape integrated to t = 1e4
    oracles::RadialEscape par;
    par.r0 = 1.0;
    par.v0 = 2.0;  // eps = 0 exactly
    const Trajectory tp = integrate(par.system(), par.position(0.0), par.velocity(0.0), 1e4,
                                    1e-9, 512);
    g_parabolic = classify(par.system(), tp);
    const PairExponent& pe = g_parabolic.exponents.at(0, 1);
    const bool par_ok = pe.determinate && std::abs(pe.exponent - 2.0 / 3.0) <= 0.02;
    bool decay_ok = false;
    double decay = 0.0;
    if (g_parabolic.partition.partition == ClusterPartition::single_block(2) &&
        !g_parabolic.cluster_potential_exponents.empty() &&
        g_parabolic.cluster_potential_determinate[0]) {
        decay = g_parabolic.cluster_potential_exponents[0];
        decay_ok = std::abs(decay + 2.0 / 3.0) <= 0.02;
    }

    // hyperbolic escape integrated to t = 1e4
    oracles::RadialEscape hyp;
    hyp.r0 = 1.0;
    hyp.v0 = 2.5;  // eps = 1.125
    const Trajectory th = integrate(hyp.system(), hyp.position(0.0), hyp.velocity(0.0), 1e4,
                                    1e-9, 512);
    g_hyperbolic = classify(hyp.system(), th);
    const PairExponent& he = g_hyperbolic.exponents.at(0, 1);
    const bool hyp_ok = he.determinate && std::abs(he.exponent - 1.0) <= 0.01;

    // synthetic two escaping pairs: the partition must come back exactly
    const Trajectory pairs = oracles::two_escaping_pairs(1.0, 1e3, 384);
    const MassSystem sys4({1.0, 1.0, 1.0, 1.0}, 2);
    g_pairs = classify(sys4, pairs);
    const bool part_ok =
        !g_pairs.partition.inconsistent &&
        g_pairs.partition.partition == ClusterPartition({{0, 1}, {2, 3}}, 4);
    g_asymptotics_ran = true;

    const bool pass = par_ok && decay_ok && hyp_ok && part_ok;
    return {pass, fmt("parabolic %.4f, U-decay %.4f, hyperbolic %.4f, partition %s",
                      pe.exponent, decay, he.exponent,
                      g_pairs.partition.partition.to_string().c_str())};
}

// Classifier sanity: bounded motion is neither expansive nor superhyperbolic,
// quadratic spreading is superhyperbolic, and no fixture is ever flagged
// superhyperbolic while its drift residuals look linear.
Outcome criterion_10() {
    oracles::CircularOrbit orb;
    orb.m1 = 2.0;
    orb.m2 = 1.0;
    orb.d = 1.0;
    const Trajectory circ = oracles::synthetic_trajectory(
        2, 2, [&](int i, double t) { return Vec(orb.position(t).body(i)); },
        [&](int i, double t) { return Vec(orb.velocity(t).body(i)); }, 1.0, 1e3, 384);
    const AsymptoticsReport circ_rep = classify(orb.system(), circ);
    const bool circ_ok = circ_rep.expansive == TriState::no &&
                         circ_rep.superhyperbolic == TriState::no;

    // separation growing like t^2: R(t)/t is unbounded
    const Trajectory quad = oracles::synthetic_trajectory(
        2, 2,
        [](int i, double t) {
            Vec p = Vec::Zero(2);
            p(0) = (i == 0 ? 0.5 : -0.5) * t * t;
            return p;
        },
        [](int i, double t) {
            Vec v = Vec::Zero(2);
            v(0) = (i == 0 ? 1.0 : -1.0) * t;
            return v;
        },
        1.0, 1e3, 384);
    const MassSystem sys2({1.0, 1.0}, 2);
    const AsymptoticsReport quad_rep = classify(sys2, quad);
    const bool quad_ok = quad_rep.superhyperbolic == TriState::yes;

    std::vector<const AsymptoticsReport*> fixtures = {&circ_rep, &quad_rep};
    if (g_asymptotics_ran) {
        fixtures.push_back(&g_parabolic);
        fixtures.push_back(&g_hyperbolic);
        fixtures.push_back(&g_pairs);
    }
    int consistent = 0;
    for (const AsymptoticsReport* rep : fixtures)
        if (!(rep->superhyperbolic == TriState::yes && rep->drift_residual_small)) ++consistent;
    const bool invariant_ok = consistent == static_cast<int>(fixtures.size());

    const bool pass = circ_ok && quad_ok && invariant_ok;
    return {pass, fmt("circular %s/%s, quadratic %s, invariant %d/%d fixtures",
                      to_string(circ_rep.expansive), to_string(circ_rep.superhyperbolic),
                      to_string(quad_rep.superhyperbolic), consistent,
                      static_cast<int>(fixtures.size()))};
}

// Analytic interior gradient against central differences at 50 random nodes.
Outcome criterion_11() {
    std::mt19937_64 rng(5150);
    const MassSystem sys({1.1, 0.9, 1.4}, 3);
    const double h = 0.8;
    int ok = 0, total = 0;
    double worst = 0.0;
    for (int pi = 0; pi < 10; ++pi) {
        DiscretePath path = helpers::random_path(rng, 3, 3, 8, 1.5);
        const std::vector<Mat> grad = action_gradient_interior(sys, path, h);
        std::vector<int> nodes(static_cast<std::size_t>(path.n_segments() - 1));
        std::iota(nodes.begin(), nodes.end(), 1);
        std::shuffle(nodes.begin(), nodes.end(), rng);
        for (int k = 0; k < 5; ++k) {
            ++total;
            const int node = nodes[static_cast<std::size_t>(k)];
            const Mat& g_an = grad[static_cast<std::size_t>(node - 1)];
            Mat g_fd = Mat::Zero(3, 3);
            for (int d = 0; d < 3; ++d)
                for (int b = 0; b < 3; ++b) {
                    const double saved = path.nodes[static_cast<std::size_t>(node)].coords(d, b);
                    const double step = 1e-6 * std::max(1.0, std::abs(saved));
                    path.nodes[static_cast<std::size_t>(node)].coords(d, b) = saved + step;
                    const double fp = action(sys, path, h);
                    path.nodes[static_cast<std::size_t>(node)].coords(d, b) = saved - step;
                    const double fm = action(sys, path, h);
                    path.nodes[static_cast<std::size_t>(node)].coords(d, b) = saved;
                    g_fd(d, b) = (fp - fm) / (2.0 * step);
                }
            const double e = (g_fd - g_an).norm() / (1.0 + g_an.norm());
            worst = std::max(worst, e);
            if (e <= 1e-6) ++ok;
        }
    }
    return {ok == total, fmt("%d/%d nodes matched, worst rel %.1e", ok, total, worst)};
}

// CLI determinism and round trip: identical spec and seed produce
// byte-identical reports, and the stored path reproduces the reported value.
Outcome criterion_12() {
    helpers::ScratchDir tmp("acceptance12");
    const char* spec = R"({
  "system": {"masses": [1.0, 1.5], "dim": 2},
  "seed": 99,
  "minimize": {"h": 1.0, "segments": 48,
               "start": [[-1.2, 0.0], [1.0, 0.3]],
               "end": [[1.1, 0.4], [-1.0, -0.2]]}
})";
    {
        std::ofstream f(tmp.str("spec.json"), std::ios::binary);
        f << spec;
    }
    auto run_into = [&](const std::string& dir) {
        CliOverrides ov;
        ov.out_dir = tmp.str(dir);
        ov.quiet = true;
        return run_experiment("minimize", tmp.str("spec.json"), ov, nullptr);
    };
    const int rc_a = run_into("a");
    const int rc_b = run_into("b");
    if (rc_a != 0 || rc_b != 0) return {false, fmt("exit codes %d/%d", rc_a, rc_b)};

    auto slurp = [](const std::string& p) {
        std::ifstream f(p, std::ios::binary);
        std::ostringstream ss;
        ss << f.rdbuf();
        return ss.str();
    };
    const bool summary_same = slurp(tmp.str("a/summary.txt")) == slurp(tmp.str("b/summary.txt"));
    const bool path_same = slurp(tmp.str("a/path.csv")) == slurp(tmp.str("b/path.csv"));

    // reload the path and recompute the reported action
    double reported = kInfinity;
    {
        std::istringstream is(slurp(tmp.str("a/summary.txt")));
        std::string line;
        while (std::getline(is, line))
            if (line.rfind("value=", 0) == 0) reported = std::strtod(line.c_str() + 6, nullptr);
    }
    std::ifstream pf(tmp.str("a/path.csv"), std::ios::binary);
    const DiscretePath path = read_path_csv(pf);
    const MassSystem sys({1.0, 1.5}, 2);
    const double recomputed = action(sys, path, 1.0);
    const double e = rel_err(recomputed, reported);
    const bool pass = summary_same && path_same && e <= 1e-12;
    return {pass, fmt("summary %s, path %s, reload rel %.1e", summary_same ? "identical" : "DIFFERS",
                      path_same ? "identical" : "DIFFERS", e)};
}

}  // namespace

int main() {
    struct Entry {
        int id;
        const char* label;
        double budget_s;  // 0 = no stated budget
        Outcome (*fn)();
    };
    const Entry entries[] = {
        {1, "free-particle closed form", 1.0, criterion_1},
        {2, "Kepler arc action", 30.0, criterion_2},
        {3, "action splitting identity", 10.0, criterion_3},
        {4, "constant-energy sweep", 600.0, criterion_4},
        {5, "interior collision margins", 0.0, criterion_5},
        {6, "scaling covariance", 0.0, criterion_6},
        {7, "fitted phase bound", 600.0, criterion_7},
        {8, "interaction chain inequality", 0.0, criterion_8},
        {9, "escape asymptotics", 300.0, criterion_9},
        {10, "classifier sanity", 0.0, criterion_10},
        {11, "gradient consistency", 0.0, criterion_11},
        {12, "report determinism and round trip", 0.0, criterion_12},
    };

    int failures = 0;
    for (const Entry& e : entries) {
        const auto t0 = Clock::now();
        Outcome out;
        try {
            out = e.fn();
        } catch (const std::exception& ex) {
            out = {false, fmt("exception: %s", ex.what())};
        }
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        bool pass = out.pass;
        if (pass && e.budget_s > 0.0 && secs >= e.budget_s) {
            pass = false;
            out.detail += fmt("; over %.0f s budget", e.budget_s);
        }
        std::printf("%s criterion %2d: %s (%s) [%.2f s]\n", pass ? "PASS" : "FAIL", e.id, e.label,
                    out.detail.c_str(), secs);
        std::fflush(stdout);
        if (!pass) ++failures;
    }
    std::printf("%d/12 criteria passed\n", 12 - failures);
    return failures;
}
