#include "nbody/minimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <random>
#include <sstream>

namespace nbody {

void SolveOptions::validate() const {
    if (segments < 2) throw UsageError("SolveOptions: segments must be >= 2");
    if (!(grad_tol > 0.0)) throw UsageError("SolveOptions: grad_tol must be positive");
    if (max_iters < 1) throw UsageError("SolveOptions: max_iters must be >= 1");
    if (collision_floor < 0.0) throw UsageError("SolveOptions: collision_floor must be >= 0");
    if (!(tau_rel_tol > 0.0)) throw UsageError("SolveOptions: tau_rel_tol must be positive");
}

double path_gradient_norm(const MassSystem& sys, const std::vector<Mat>& grad) {
    double s = 0.0;
    for (const Mat& g : grad) s += mass_norm_sq(sys, g);
    return std::sqrt(s);
}

namespace {

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

// U, optional gradient accumulation (g += dU/dx), and min pair distance.
double potential_raw(const MassSystem& sys, const Mat& c, Mat* g, double& dmin) {
    const int n = static_cast<int>(c.cols());
    const double G = sys.grav_const();
    double u = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double dx0 = c(0, i) - c(0, j);
            double d2 = dx0 * dx0;
            for (int r = 1; r < c.rows(); ++r) {
                const double dr = c(r, i) - c(r, j);
                d2 += dr * dr;
            }
            const double d = std::sqrt(d2);
            dmin = std::min(dmin, d);
            if (d == 0.0) return kInfinity;
            const double w = G * sys.mass(i) * sys.mass(j) / d;
            u += w;
            if (g) {
                const double scale = -w / d2;
                for (int r = 0; r < c.rows(); ++r) {
                    const double dr = c(r, i) - c(r, j);
                    (*g)(r, i) += scale * dr;
                    (*g)(r, j) -= scale * dr;
                }
            }
        }
    }
    return u;
}

// Discretized fixed-time action over the interior nodes, with a hard
// feasibility floor on the pairwise distance at every quadrature node.
class FixedTimeObjective {
public:
    FixedTimeObjective(const MassSystem& sys, const Configuration& x0,
                       const Configuration& x1, double t_start, double tau, int segments,
                       double h)
        : sys_(sys), segments_(segments), h_(h), dim_(sys.dim()), n_(sys.n_bodies()) {
        times_.resize(static_cast<std::size_t>(segments_) + 1);
        for (int k = 0; k <= segments_; ++k)
            times_[static_cast<std::size_t>(k)] = t_start + tau * k / segments_;
        times_.back() = t_start + tau;
        nodes_.assign(static_cast<std::size_t>(segments_) + 1, Mat::Zero(dim_, n_));
        nodes_.front() = x0.coords;
        nodes_.back() = x1.coords;
        u_node_.assign(nodes_.size(), 0.0);
        g_node_.assign(nodes_.size(), Mat::Zero(dim_, n_));
        mid_ = Mat::Zero(dim_, n_);
        g_mid_ = Mat::Zero(dim_, n_);
    }

    int n_vars() const { return (segments_ - 1) * dim_ * n_; }
    double eps_coll = 0.0;

    void pack(const std::vector<Mat>& interior, Vec& z) const {
        z.resize(n_vars());
        int off = 0;
        for (const Mat& m : interior) {
            std::copy(m.data(), m.data() + dim_ * n_, z.data() + off);
            off += dim_ * n_;
        }
    }

    void unpack(const Vec& z) {
        int off = 0;
        for (int k = 1; k < segments_; ++k) {
            std::copy(z.data() + off, z.data() + off + dim_ * n_,
                      nodes_[static_cast<std::size_t>(k)].data());
            off += dim_ * n_;
        }
    }

    // Returns false when infeasible (collision floor violated); f is then +inf.
    bool eval(const Vec& z, double& f, Vec* grad) {
        unpack(z);
        double dmin = kInfinity;
        const std::size_t kn = nodes_.size();
        for (std::size_t k = 0; k < kn; ++k) {
            if (grad) g_node_[k].setZero();
            u_node_[k] = potential_raw(sys_, nodes_[k], grad ? &g_node_[k] : nullptr, dmin);
        }
        if (grad) {
            grad->resize(n_vars());
            grad->setZero();
        }
        f = 0.0;
        for (std::size_t k = 0; k + 1 < kn; ++k) {
            const double dt = times_[k + 1] - times_[k];
            mid_ = 0.5 * (nodes_[k] + nodes_[k + 1]);
            if (grad) g_mid_.setZero();
            const double u_mid = potential_raw(sys_, mid_, grad ? &g_mid_ : nullptr, dmin);

            double kin = 0.0;
            for (int i = 0; i < n_; ++i)
                kin += sys_.mass(i) * (nodes_[k + 1].col(i) - nodes_[k].col(i)).squaredNorm();
            f += kin / (2.0 * dt) + dt / 6.0 * (u_node_[k] + 4.0 * u_mid + u_node_[k + 1]) +
                 h_ * dt;

            if (grad) {
                // node k contribution: -m dx/dt + dt/6 (gU_k + 2 gU_mid)
                // node k+1:            +m dx/dt + dt/6 (gU_{k+1} + 2 gU_mid)
                for (int side = 0; side < 2; ++side) {
                    const std::size_t node = k + static_cast<std::size_t>(side);
                    if (node == 0 || node + 1 == kn) continue;  // endpoints fixed
                    double* gp = grad->data() + (node - 1) * static_cast<std::size_t>(dim_ * n_);
                    Eigen::Map<Mat> gm(gp, dim_, n_);
                    const double sign = side ? 1.0 : -1.0;
                    for (int i = 0; i < n_; ++i)
                        gm.col(i) += sign * sys_.mass(i) / dt *
                                     (nodes_[k + 1].col(i) - nodes_[k].col(i));
                    gm += dt / 6.0 * ((side ? g_node_[k + 1] : g_node_[k]) + 2.0 * g_mid_);
                }
            }
        }
        last_min_dist_ = dmin;
        if (!(dmin > eps_coll) || !std::isfinite(f)) {
            f = kInfinity;
            return false;
        }
        return true;
    }

    // Applies the inverse of the kinetic-energy Hessian (per body and
    // coordinate a tridiagonal Toeplitz system) to a flattened interior
    // gradient.  Used as the initial metric of the quasi-Newton descent: the
    // kinetic part dominates the curvature, so this brings the conditioning
    // close to unity.
    void apply_kinetic_inverse(Vec& q) const {
        const int inner = segments_ - 1;
        if (inner < 1) return;
        const double dt = times_[1] - times_[0];  // uniform grid
        scratch_diag_.resize(static_cast<std::size_t>(inner));
        scratch_rhs_.resize(static_cast<std::size_t>(inner));
        for (int i = 0; i < n_; ++i) {
            const double diag = 2.0 * sys_.mass(i) / dt;
            const double off = -sys_.mass(i) / dt;
            for (int r = 0; r < dim_; ++r) {
                for (int k = 0; k < inner; ++k)
                    scratch_rhs_[static_cast<std::size_t>(k)] =
                        q[static_cast<Eigen::Index>(k) * dim_ * n_ + i * dim_ + r];
                // Thomas forward sweep
                scratch_diag_[0] = diag;
                for (int k = 1; k < inner; ++k) {
                    const double w = off / scratch_diag_[static_cast<std::size_t>(k - 1)];
                    scratch_diag_[static_cast<std::size_t>(k)] = diag - w * off;
                    scratch_rhs_[static_cast<std::size_t>(k)] -=
                        w * scratch_rhs_[static_cast<std::size_t>(k - 1)];
                }
                // back substitution
                scratch_rhs_[static_cast<std::size_t>(inner - 1)] /=
                    scratch_diag_[static_cast<std::size_t>(inner - 1)];
                for (int k = inner - 2; k >= 0; --k)
                    scratch_rhs_[static_cast<std::size_t>(k)] =
                        (scratch_rhs_[static_cast<std::size_t>(k)] -
                         off * scratch_rhs_[static_cast<std::size_t>(k + 1)]) /
                        scratch_diag_[static_cast<std::size_t>(k)];
                for (int k = 0; k < inner; ++k)
                    q[static_cast<Eigen::Index>(k) * dim_ * n_ + i * dim_ + r] =
                        scratch_rhs_[static_cast<std::size_t>(k)];
            }
        }
    }

    double grad_mass_norm(const Vec& g) const {
        double s = 0.0;
        int off = 0;
        for (int k = 1; k < segments_; ++k) {
            for (int i = 0; i < n_; ++i) {
                double b = 0.0;
                for (int r = 0; r < dim_; ++r) {
                    const double v = g[off + i * dim_ + r];
                    b += v * v;
                }
                s += sys_.mass(i) * b;
            }
            off += dim_ * n_;
        }
        return std::sqrt(s);
    }

    double last_min_dist() const { return last_min_dist_; }

    DiscretePath to_path(const Vec& z) {
        unpack(z);
        DiscretePath path;
        path.times = times_;
        path.nodes.reserve(nodes_.size());
        for (const Mat& m : nodes_) path.nodes.emplace_back(m);
        return path;
    }

private:
    const MassSystem& sys_;
    int segments_;
    double h_;
    int dim_, n_;
    std::vector<double> times_;
    std::vector<Mat> nodes_;
    std::vector<double> u_node_;
    std::vector<Mat> g_node_;
    Mat mid_, g_mid_;
    double last_min_dist_ = kInfinity;
    mutable std::vector<double> scratch_diag_, scratch_rhs_;
};

struct DescentOutcome {
    bool converged = false;
    bool line_search_failed = false;
    bool stalled = false;
    int iterations = 0;
    double f = kInfinity;
    double grad_norm = kInfinity;
};

// L-BFGS with Armijo backtracking.  Steps that violate the collision floor
// are treated as f = +inf and rejected by the line search.
DescentOutcome lbfgs_descent(FixedTimeObjective& obj, Vec& z, int max_iters,
                             double grad_tol) {
    constexpr int kMemory = 10;
    constexpr double kArmijo = 1e-4;

    DescentOutcome out;
    double f;
    Vec g;
    if (!obj.eval(z, f, &g)) {
        out.line_search_failed = true;  // infeasible start
        return out;
    }

    std::deque<Vec> s_mem, y_mem;
    std::deque<double> rho_mem;
    Vec q, d, z_new, g_new;
    int stagnant = 0;

    for (int iter = 0; iter < max_iters; ++iter) {
        const double gnorm = obj.grad_mass_norm(g);
        if (gnorm <= grad_tol) {
            out.converged = true;
            out.iterations = iter;
            out.f = f;
            out.grad_norm = gnorm;
            return out;
        }

        // two-loop recursion
        q = g;
        std::vector<double> alpha(s_mem.size());
        for (int i = static_cast<int>(s_mem.size()) - 1; i >= 0; --i) {
            alpha[static_cast<std::size_t>(i)] =
                rho_mem[static_cast<std::size_t>(i)] * s_mem[static_cast<std::size_t>(i)].dot(q);
            q -= alpha[static_cast<std::size_t>(i)] * y_mem[static_cast<std::size_t>(i)];
        }
        obj.apply_kinetic_inverse(q);  // initial metric: exact kinetic Hessian
        for (std::size_t i = 0; i < s_mem.size(); ++i) {
            const double beta = rho_mem[i] * y_mem[i].dot(q);
            q += (alpha[i] - beta) * s_mem[i];
        }
        d = -q;
        double gd = g.dot(d);
        if (!(gd < 0.0) || !d.allFinite()) {
            d = -g;
            gd = -g.squaredNorm();
            s_mem.clear();
            y_mem.clear();
            rho_mem.clear();
        }

        // Backtracking line search.  Near the discrete minimizer the action
        // differences drop below double-precision rounding noise while the
        // analytic gradient is still resolvable, so once Armijo cannot
        // certify a decrease we accept steps that shrink the gradient norm.
        double step = 1.0;
        double f_new = kInfinity;
        bool accepted = false;
        bool grad_evaluated = false;
        const double f_noise = 1e-14 * (1.0 + std::abs(f));
        for (int ls = 0; ls < 60; ++ls) {
            z_new = z + step * d;
            if (obj.eval(z_new, f_new, nullptr)) {
                if (f_new <= f + kArmijo * step * gd) {
                    accepted = true;
                    break;
                }
                if (f_new <= f + f_noise) {
                    obj.eval(z_new, f_new, &g_new);
                    grad_evaluated = true;
                    if (obj.grad_mass_norm(g_new) <= 0.9 * gnorm) {
                        accepted = true;
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (!s_mem.empty()) {
                // drop the memory and retry from steepest descent once
                s_mem.clear();
                y_mem.clear();
                rho_mem.clear();
                continue;
            }
            out.line_search_failed = true;
            out.iterations = iter;
            out.f = f;
            out.grad_norm = gnorm;
            return out;
        }

        if (!grad_evaluated) obj.eval(z_new, f_new, &g_new);
        const Vec s = z_new - z;
        const Vec y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            s_mem.push_back(s);
            y_mem.push_back(y);
            rho_mem.push_back(1.0 / sy);
            if (static_cast<int>(s_mem.size()) > kMemory) {
                s_mem.pop_front();
                y_mem.pop_front();
                rho_mem.pop_front();
            }
        }
        // Stagnation only counts when neither the value nor the gradient
        // improves; gradient-fallback steps keep the counter at zero.
        if (std::abs(f - f_new) <= 1e-16 * (1.0 + std::abs(f)) &&
            obj.grad_mass_norm(g_new) > 0.9 * gnorm)
            ++stagnant;
        else
            stagnant = 0;
        z = z_new;
        f = f_new;
        g = g_new;
        out.iterations = iter + 1;
        if (stagnant >= 8) {  // no further progress at this precision
            out.stalled = true;
            break;
        }
    }
    out.f = f;
    out.grad_norm = obj.grad_mass_norm(g);
    out.converged = out.grad_norm <= grad_tol;
    return out;
}

double resolve_collision_floor(const SolveOptions& opts, const Configuration& x,
                               const Configuration& x_prime) {
    if (opts.collision_floor > 0.0) return opts.collision_floor;
    const double mean = 0.5 * (mean_pair_distance(x) + mean_pair_distance(x_prime));
    return 1e-6 * mean;
}

// Deterministic orthogonal bump for straight-line paths that graze a
// collision: per body, a seeded unit direction orthogonal to its
// displacement, scaled by a half-sine profile along the path.  Per-body
// random magnitudes keep symmetric endpoint pairs (e.g. two bodies swapping
// places) from being bumped onto each other again.
void deflect_interior(std::vector<Mat>& interior, const Configuration& x,
                      const Configuration& x_prime, double amplitude, std::uint64_t seed) {
    const int dim = x.dim();
    const int n = x.n_bodies();
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.5, 1.5);
    Mat dirs(dim, n);
    for (int i = 0; i < n; ++i) {
        Vec disp = x_prime.coords.col(i) - x.coords.col(i);
        Vec u(dim);
        for (int r = 0; r < dim; ++r) u[r] = gauss(rng);
        const double dn = disp.norm();
        if (dn > 0.0) u -= u.dot(disp) / (dn * dn) * disp;
        if (u.norm() < 1e-12) {
            u.setZero();
            u[(i + 1) % dim] = 1.0;  // displacement-aligned draw; pick an axis
        }
        dirs.col(i) = unif(rng) * u / u.norm();
    }
    const int k_inner = static_cast<int>(interior.size());
    for (int k = 0; k < k_inner; ++k) {
        const double s = static_cast<double>(k + 1) / (k_inner + 1);
        interior[static_cast<std::size_t>(k)] += amplitude * std::sin(M_PI * s) * dirs;
    }
}

MinimizeResult solve_fixed_time(const MassSystem& sys, const Configuration& x,
                                const Configuration& x_prime, double tau, double h,
                                const SolveOptions& opts,
                                const std::vector<Mat>* warm_interior) {
    opts.validate();
    if (!(tau > 0.0)) throw UsageError("minimize_fixed_time: tau must be positive");
    if (h < 0.0) throw UsageError("minimize_fixed_time: h must be >= 0");
    check_shape(sys, x, "minimize_fixed_time");
    check_shape(sys, x_prime, "minimize_fixed_time");
    if (!in_omega(x) || !in_omega(x_prime))
        throw UsageError("minimize_fixed_time: endpoint collision");

    double eps = resolve_collision_floor(opts, x, x_prime);
    const double endpoint_min = std::min(min_pair_distance(x), min_pair_distance(x_prime));
    if (endpoint_min <= eps) eps = 0.5 * endpoint_min;

    FixedTimeObjective obj(sys, x, x_prime, 0.0, tau, opts.segments, h);
    obj.eps_coll = eps;

    // initial interior nodes
    std::vector<Mat> interior;
    if (warm_interior && static_cast<int>(warm_interior->size()) == opts.segments - 1) {
        interior = *warm_interior;
    } else {
        interior.reserve(static_cast<std::size_t>(opts.segments) - 1);
        for (int k = 1; k < opts.segments; ++k) {
            const double w = static_cast<double>(k) / opts.segments;
            interior.emplace_back((1.0 - w) * x.coords + w * x_prime.coords);
        }
    }

    Vec z;
    obj.pack(interior, z);
    double f0;
    if (!obj.eval(z, f0, nullptr)) {
        // graze: deflect with doubling amplitude until feasible
        const double scale = std::max(mean_pair_distance(x), mean_pair_distance(x_prime));
        double amp = 0.05 * (scale > 0.0 ? scale : 1.0);
        bool feasible = false;
        for (int attempt = 0; attempt < 40 && !feasible; ++attempt) {
            std::vector<Mat> bumped = interior;
            deflect_interior(bumped, x, x_prime, amp, opts.seed);
            obj.pack(bumped, z);
            feasible = obj.eval(z, f0, nullptr);
            amp *= 2.0;
        }
        if (!feasible) {
            MinimizeResult res;
            res.tau = tau;
            res.diagnostic = "no collision-free initial path found";
            res.path = obj.to_path(z);
            res.value = kInfinity;
            return res;
        }
    }

    DescentOutcome outcome;
    constexpr int kMaxBarrierRounds = 8;
    for (int round = 0; round < kMaxBarrierRounds; ++round) {
        outcome = lbfgs_descent(obj, z, opts.max_iters, opts.grad_tol);
        double f_cur;
        obj.eval(z, f_cur, nullptr);  // refresh the margin at the accepted point
        const double margin = obj.last_min_dist();
        const bool binding = margin <= 2.0 * obj.eps_coll && obj.eps_coll > 0.0;
        if (binding && (outcome.converged || outcome.line_search_failed)) {
            obj.eps_coll *= 0.5;  // barrier binds; shrink and resolve
            continue;
        }
        break;
    }

    MinimizeResult res;
    res.path = obj.to_path(z);
    res.tau = tau;
    res.iterations = outcome.iterations;
    res.converged = outcome.converged;
    res.grad_norm = outcome.grad_norm;
    res.value = action(sys, res.path, h);
    res.interior_min_distance = interior_min_distance(res.path);
    if (!res.converged && res.diagnostic.empty()) {
        if (outcome.line_search_failed)
            res.diagnostic = "line search failed";
        else if (outcome.stalled)
            res.diagnostic = "stalled at numerical precision";
        else
            res.diagnostic = "max_iters reached";
    }
    return res;
}

std::vector<Mat> interior_nodes(const DiscretePath& path) {
    std::vector<Mat> out;
    if (path.nodes.size() < 3) return out;
    out.reserve(path.nodes.size() - 2);
    for (std::size_t k = 1; k + 1 < path.nodes.size(); ++k) out.push_back(path.nodes[k].coords);
    return out;
}

}  // namespace

MinimizeResult minimize_fixed_time(const MassSystem& sys, const Configuration& x,
                                   const Configuration& x_prime, double tau, double h,
                                   const SolveOptions& opts) {
    return solve_fixed_time(sys, x, x_prime, tau, h, opts, nullptr);
}

MinimizeResult minimize_free_time(const MassSystem& sys, const Configuration& x,
                                  const Configuration& x_prime, double h,
                                  const SolveOptions& opts) {
    opts.validate();
    if (h < 0.0) throw UsageError("minimize_free_time: h must be >= 0");
    check_shape(sys, x, "minimize_free_time");
    check_shape(sys, x_prime, "minimize_free_time");
    if (!in_omega(x) || !in_omega(x_prime))
        throw UsageError("minimize_free_time: endpoint collision");

    const double displacement = mass_norm(sys, x_prime.coords - x.coords);
    if (displacement == 0.0 && h > 0.0) {
        MinimizeResult res;
        res.value = 0.0;
        res.tau = 0.0;
        res.converged = true;
        res.trivial_endpoint = true;
        res.diagnostic = "trivial endpoint";
        return res;
    }

    MinimizeResult best;
    std::vector<std::pair<double, double>> trace;
    std::map<double, double> cache;

    auto probe = [&](double tau) -> double {
        auto it = cache.find(tau);
        if (it != cache.end()) return it->second;
        const std::vector<Mat> warm = interior_nodes(best.path);
        MinimizeResult r = solve_fixed_time(sys, x, x_prime, tau, h, opts,
                                            warm.empty() ? nullptr : &warm);
        trace.emplace_back(tau, r.value);
        cache.emplace(tau, r.value);
        if (r.value < best.value) best = std::move(r);
        return cache[tau];
    };

    const double tau0 = h > 0.0 ? displacement / std::sqrt(2.0 * h)
                                : std::max(displacement, 1.0);

    // bracket by doubling/halving from the free-particle heuristic
    double lo = tau0, hi = tau0;
    double f_mid = probe(tau0);
    bool closed = true;
    constexpr int kMaxExpand = 60;
    if (probe(2.0 * tau0) < f_mid) {
        hi = 2.0 * tau0;
        int k = 0;
        while (probe(2.0 * hi) < cache[hi] && ++k <= kMaxExpand) hi *= 2.0;
        if (k > kMaxExpand) closed = false;
        lo = hi / 4.0;
        hi = 2.0 * hi;
    } else if (probe(0.5 * tau0) < f_mid) {
        lo = 0.5 * tau0;
        int k = 0;
        while (probe(0.5 * lo) < cache[lo] && ++k <= kMaxExpand) lo *= 0.5;
        if (k > kMaxExpand) closed = false;
        hi = lo * 4.0;
        lo = 0.5 * lo;
    } else {
        lo = 0.5 * tau0;
        hi = 2.0 * tau0;
    }

    if (closed) {
        // golden section on log tau
        const double invphi = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = std::log(lo), b = std::log(hi);
        double c = b - invphi * (b - a), d = a + invphi * (b - a);
        double fc = probe(std::exp(c)), fd = probe(std::exp(d));
        const double tol_log = std::max(opts.tau_rel_tol, 1e-14);
        while (b - a > tol_log) {
            if (fc < fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - invphi * (b - a);
                fc = probe(std::exp(c));
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + invphi * (b - a);
                fd = probe(std::exp(d));
            }
        }
    }

    int total_iters = 0;
    (void)total_iters;
    best.tau_trace = std::move(trace);
    if (!closed) {
        best.converged = false;
        best.diagnostic = h == 0.0 ? "h=0 free-time search did not close"
                                   : "free-time search did not close";
    }
    return best;
}

NoInteractionResult phi_no_interaction(const MassSystem& sys, const Configuration& x,
                                       const Configuration& x_prime, const ClusterPartition& p,
                                       double h, std::optional<double> tau,
                                       const SolveOptions& opts) {
    opts.validate();
    if (h < 0.0) throw UsageError("phi_no_interaction: h must be >= 0");
    check_shape(sys, x, "phi_no_interaction");
    check_shape(sys, x_prime, "phi_no_interaction");
    if (p.n_bodies() != sys.n_bodies())
        throw UsageError("phi_no_interaction: partition does not match system");

    const ClusterSplit s0 = cluster_split(sys, x, p);
    const ClusterSplit s1 = cluster_split(sys, x_prime, p);
    const std::vector<double> block_mass = p.block_masses(sys);
    const double center_disp_sq = weighted_norm_sq(block_mass, s1.centers - s0.centers);

    struct BlockProblem {
        MassSystem sys;
        Configuration z0, z1;
        int block_index;
    };
    std::vector<BlockProblem> problems;
    for (int k = 0; k < p.n_blocks(); ++k) {
        const auto& blk = p.block(k);
        if (blk.size() < 2) continue;
        std::vector<double> masses;
        Mat z0(sys.dim(), static_cast<int>(blk.size()));
        Mat z1(sys.dim(), static_cast<int>(blk.size()));
        for (std::size_t a = 0; a < blk.size(); ++a) {
            masses.push_back(sys.mass(blk[a]));
            z0.col(static_cast<int>(a)) = s0.relatives.col(blk[a]);
            z1.col(static_cast<int>(a)) = s1.relatives.col(blk[a]);
        }
        problems.push_back({MassSystem(masses, sys.dim(), sys.grav_const()),
                            Configuration(z0), Configuration(z1), k});
    }

    std::vector<std::vector<Mat>> warm(problems.size());

    auto solve_at = [&](double t, NoInteractionResult& out) {
        out = NoInteractionResult{};
        out.tau = t;
        out.h_term = h * t;
        out.center_value = center_disp_sq / (2.0 * t);
        out.cluster_values.assign(static_cast<std::size_t>(p.n_blocks()), 0.0);
        out.converged = true;
        double total = out.h_term + out.center_value;

        std::vector<DiscretePath> block_paths(problems.size());
        for (std::size_t q = 0; q < problems.size(); ++q) {
            const auto& bp = problems[q];
            MinimizeResult r =
                solve_fixed_time(bp.sys, bp.z0, bp.z1, t, 0.0, opts,
                                 warm[q].empty() ? nullptr : &warm[q]);
            out.cluster_values[static_cast<std::size_t>(bp.block_index)] = r.value;
            out.converged = out.converged && r.converged;
            total += r.value;
            warm[q] = interior_nodes(r.path);
            block_paths[q] = std::move(r.path);
        }
        out.value = total;

        // assemble: uniform rectilinear centers plus block internal paths
        DiscretePath path;
        const int segs = opts.segments;
        path.times.resize(static_cast<std::size_t>(segs) + 1);
        path.nodes.assign(static_cast<std::size_t>(segs) + 1,
                          Configuration::zero(sys.dim(), sys.n_bodies()));
        for (int k = 0; k <= segs; ++k) {
            const double w = static_cast<double>(k) / segs;
            path.times[static_cast<std::size_t>(k)] = w * t;
            const Mat centers = (1.0 - w) * s0.centers + w * s1.centers;
            Mat& node = path.nodes[static_cast<std::size_t>(k)].coords;
            for (int i = 0; i < sys.n_bodies(); ++i) node.col(i) = centers.col(p.block_of(i));
        }
        path.times.back() = t;
        for (std::size_t q = 0; q < problems.size(); ++q) {
            const auto& blk = p.block(problems[q].block_index);
            for (int k = 0; k <= segs; ++k) {
                Mat& node = path.nodes[static_cast<std::size_t>(k)].coords;
                for (std::size_t a = 0; a < blk.size(); ++a)
                    node.col(blk[a]) +=
                        block_paths[q].nodes[static_cast<std::size_t>(k)].coords.col(
                            static_cast<int>(a));
            }
        }
        out.path = std::move(path);
    };

    if (tau.has_value()) {
        if (!(*tau > 0.0)) throw UsageError("phi_no_interaction: tau must be positive");
        NoInteractionResult out;
        solve_at(*tau, out);
        return out;
    }

    // outer 1D search over tau, as in minimize_free_time
    std::vector<std::pair<double, double>> trace;
    std::map<double, double> cache;
    NoInteractionResult best;
    auto probe = [&](double t) -> double {
        auto it = cache.find(t);
        if (it != cache.end()) return it->second;
        NoInteractionResult out;
        solve_at(t, out);
        trace.emplace_back(t, out.value);
        cache.emplace(t, out.value);
        if (out.value < best.value) best = std::move(out);
        return cache[t];
    };

    double base = std::sqrt(center_disp_sq);
    if (base == 0.0) base = mass_norm(sys, x_prime.coords - x.coords);
    if (base == 0.0) base = 1.0;
    const double tau0 = h > 0.0 ? base / std::sqrt(2.0 * h) : base;

    bool closed = true;
    constexpr int kMaxExpand = 60;
    double lo = tau0, hi = tau0;
    const double f_mid = probe(tau0);
    if (probe(2.0 * tau0) < f_mid) {
        hi = 2.0 * tau0;
        int k = 0;
        while (probe(2.0 * hi) < cache[hi] && ++k <= kMaxExpand) hi *= 2.0;
        if (k > kMaxExpand) closed = false;
        lo = hi / 4.0;
        hi = 2.0 * hi;
    } else if (probe(0.5 * tau0) < f_mid) {
        lo = 0.5 * tau0;
        int k = 0;
        while (probe(0.5 * lo) < cache[lo] && ++k <= kMaxExpand) lo *= 0.5;
        if (k > kMaxExpand) closed = false;
        hi = lo * 4.0;
        lo = 0.5 * lo;
    } else {
        lo = 0.5 * tau0;
        hi = 2.0 * tau0;
    }

    if (closed) {
        const double invphi = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = std::log(lo), b = std::log(hi);
        double c = b - invphi * (b - a), d = a + invphi * (b - a);
        double fc = probe(std::exp(c)), fd = probe(std::exp(d));
        const double tol_log = std::max(opts.tau_rel_tol, 1e-14);
        while (b - a > tol_log) {
            if (fc < fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - invphi * (b - a);
                fc = probe(std::exp(c));
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + invphi * (b - a);
                fd = probe(std::exp(d));
            }
        }
    } else {
        best.converged = false;
    }
    best.tau_trace = std::move(trace);
    return best;
}

double interior_collision_margin(const MinimizeResult& result) {
    if (result.trivial_endpoint || result.path.nodes.size() < 2) return kInfinity;
    return interior_min_distance(result.path);
}

}  // namespace nbody
