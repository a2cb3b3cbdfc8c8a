#include "nbody/action.hpp"

#include <algorithm>
#include <cmath>

namespace nbody {

Configuration DiscretePath::at(double t) const {
    if (times.empty()) throw UsageError("DiscretePath::at: empty path");
    if (t <= times.front()) return nodes.front();
    if (t >= times.back()) return nodes.back();
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - times.begin()) - 1;
    const double dt = times[k + 1] - times[k];
    const double w = (t - times[k]) / dt;
    return Configuration((1.0 - w) * nodes[k].coords + w * nodes[k + 1].coords);
}

DiscretePath DiscretePath::restrict(double t_lo, double t_hi) const {
    if (t_lo < times.front() || t_hi > times.back() || !(t_lo < t_hi))
        throw UsageError("DiscretePath::restrict: window outside path span");
    DiscretePath out;
    out.times.push_back(t_lo);
    out.nodes.push_back(at(t_lo));
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] > t_lo && times[k] < t_hi) {
            out.times.push_back(times[k]);
            out.nodes.push_back(nodes[k]);
        }
    }
    out.times.push_back(t_hi);
    out.nodes.push_back(at(t_hi));
    return out;
}

void DiscretePath::validate(const MassSystem& sys) const {
    if (times.size() != nodes.size())
        throw UsageError("DiscretePath: times/nodes size mismatch");
    if (times.size() < 2)
        throw UsageError("DiscretePath: need at least one segment");
    for (std::size_t k = 0; k + 1 < times.size(); ++k)
        if (!(times[k] < times[k + 1]))
            throw UsageError("DiscretePath: times must be strictly increasing");
    for (const auto& node : nodes) check_shape(sys, node, "DiscretePath");
}

DiscretePath straight_line_path(const Configuration& x, const Configuration& x_prime,
                                double t0, double tau, int segments) {
    if (segments < 1) throw UsageError("straight_line_path: segments must be >= 1");
    if (!(tau > 0.0)) throw UsageError("straight_line_path: tau must be positive");
    if (x.dim() != x_prime.dim() || x.n_bodies() != x_prime.n_bodies())
        throw UsageError("straight_line_path: endpoint shapes differ");
    DiscretePath path;
    path.times.reserve(static_cast<std::size_t>(segments) + 1);
    path.nodes.reserve(static_cast<std::size_t>(segments) + 1);
    for (int k = 0; k <= segments; ++k) {
        const double w = static_cast<double>(k) / segments;
        path.times.push_back(t0 + w * tau);
        path.nodes.emplace_back((1.0 - w) * x.coords + w * x_prime.coords);
    }
    // pin endpoints exactly
    path.times.back() = t0 + tau;
    path.nodes.front() = x;
    path.nodes.back() = x_prime;
    return path;
}

namespace {

// Simpson weights over one segment: dt/6 * (f(a) + 4 f(mid) + f(b)).
template <typename F>
double simpson_segment(double dt, const F& f, const Configuration& a,
                       const Configuration& mid, const Configuration& b) {
    return dt / 6.0 * (f(a) + 4.0 * f(mid) + f(b));
}

}  // namespace

double action(const MassSystem& sys, const DiscretePath& path, double h) {
    if (h < 0.0) throw UsageError("action: h must be >= 0");
    path.validate(sys);
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < path.times.size(); ++k) {
        const double dt = path.times[k + 1] - path.times[k];
        const Mat dx = path.nodes[k + 1].coords - path.nodes[k].coords;
        const Configuration mid(0.5 * (path.nodes[k].coords + path.nodes[k + 1].coords));
        const double u = simpson_segment(
            dt, [&](const Configuration& c) { return potential(sys, c); },
            path.nodes[k], mid, path.nodes[k + 1]);
        if (std::isinf(u)) return kInfinity;
        total += mass_norm_sq(sys, dx) / (2.0 * dt) + u + h * dt;
    }
    return total;
}

ActionSplit split_action(const MassSystem& sys, const DiscretePath& path,
                         const ClusterPartition& p, double h) {
    if (h < 0.0) throw UsageError("split_action: h must be >= 0");
    path.validate(sys);
    if (p.n_bodies() != sys.n_bodies())
        throw UsageError("split_action: partition does not match system");

    ActionSplit out;
    out.cluster_actions.assign(static_cast<std::size_t>(p.n_blocks()), 0.0);
    out.h_term = h * path.duration();

    const std::vector<double> block_mass = p.block_masses(sys);
    std::vector<ClusterSplit> splits;
    splits.reserve(path.nodes.size());
    for (const auto& node : path.nodes) splits.push_back(cluster_split(sys, node, p));

    for (std::size_t k = 0; k + 1 < path.times.size(); ++k) {
        const double dt = path.times[k + 1] - path.times[k];
        const Configuration mid(0.5 * (path.nodes[k].coords + path.nodes[k + 1].coords));

        // cluster_split is linear, so the midpoint split is the split midpoint
        out.center_kinetic +=
            weighted_norm_sq(block_mass, splits[k + 1].centers - splits[k].centers) / (2.0 * dt);

        for (int b = 0; b < p.n_blocks(); ++b) {
            double kin = 0.0;
            for (int i : p.block(b))
                kin += sys.mass(i) *
                       (splits[k + 1].relatives.col(i) - splits[k].relatives.col(i)).squaredNorm();
            const double ub = simpson_segment(
                dt, [&](const Configuration& c) { return block_potential(sys, c, p, b); },
                path.nodes[k], mid, path.nodes[k + 1]);
            out.cluster_actions[static_cast<std::size_t>(b)] += kin / (2.0 * dt) + ub;
        }

        out.interaction += simpson_segment(
            dt, [&](const Configuration& c) { return cross_potential(sys, c, p); },
            path.nodes[k], mid, path.nodes[k + 1]);
    }

    out.total = out.h_term + out.center_kinetic + out.interaction;
    for (double a : out.cluster_actions) out.total += a;
    return out;
}

double interaction_integral(const MassSystem& sys, const DiscretePath& path,
                            const ClusterPartition& p) {
    path.validate(sys);
    if (p.n_bodies() != sys.n_bodies())
        throw UsageError("interaction_integral: partition does not match system");
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < path.times.size(); ++k) {
        const double dt = path.times[k + 1] - path.times[k];
        const Configuration mid(0.5 * (path.nodes[k].coords + path.nodes[k + 1].coords));
        total += simpson_segment(
            dt, [&](const Configuration& c) { return cross_potential(sys, c, p); },
            path.nodes[k], mid, path.nodes[k + 1]);
    }
    return total;
}

std::vector<std::pair<double, double>> energy_profile(const MassSystem& sys,
                                                      const DiscretePath& path) {
    path.validate(sys);
    std::vector<std::pair<double, double>> out;
    out.reserve(path.times.size() - 1);
    for (std::size_t k = 0; k + 1 < path.times.size(); ++k) {
        const double dt = path.times[k + 1] - path.times[k];
        const Mat v = (path.nodes[k + 1].coords - path.nodes[k].coords) / dt;
        const Configuration mid(0.5 * (path.nodes[k].coords + path.nodes[k + 1].coords));
        const double e = 0.5 * mass_norm_sq(sys, v) - potential(sys, mid);
        out.emplace_back(0.5 * (path.times[k] + path.times[k + 1]), e);
    }
    return out;
}

std::vector<Mat> action_gradient_interior(const MassSystem& sys,
                                          const DiscretePath& path, double h) {
    (void)h;  // fixed time grid: the h term has no node dependence
    path.validate(sys);
    const std::size_t n_nodes = path.nodes.size();
    std::vector<Mat> grad(n_nodes, Mat::Zero(sys.dim(), sys.n_bodies()));

    for (std::size_t k = 0; k + 1 < n_nodes; ++k) {
        const double dt = path.times[k + 1] - path.times[k];
        const Mat dx = path.nodes[k + 1].coords - path.nodes[k].coords;
        const Configuration mid(0.5 * (path.nodes[k].coords + path.nodes[k + 1].coords));

        // kinetic: |dx|_m^2 / (2 dt)
        Mat gk = dx / dt;
        for (int i = 0; i < gk.cols(); ++i) gk.col(i) *= sys.mass(i);
        grad[k] -= gk;
        grad[k + 1] += gk;

        // potential Simpson: dt/6 (U(a) + 4 U(mid) + U(b)),  dmid/da = 1/2
        const Mat ga = potential_gradient(sys, path.nodes[k]);
        const Mat gm = potential_gradient(sys, mid);
        const Mat gb = potential_gradient(sys, path.nodes[k + 1]);
        grad[k] += dt / 6.0 * (ga + 2.0 * gm);
        grad[k + 1] += dt / 6.0 * (gb + 2.0 * gm);
    }

    std::vector<Mat> interior;
    interior.reserve(n_nodes - 2);
    for (std::size_t k = 1; k + 1 < n_nodes; ++k) interior.push_back(std::move(grad[k]));
    return interior;
}

double min_quadrature_distance(const DiscretePath& path) {
    double dmin = kInfinity;
    for (std::size_t k = 0; k < path.nodes.size(); ++k) {
        dmin = std::min(dmin, min_pair_distance(path.nodes[k]));
        if (k + 1 < path.nodes.size()) {
            const Configuration mid(0.5 * (path.nodes[k].coords + path.nodes[k + 1].coords));
            dmin = std::min(dmin, min_pair_distance(mid));
        }
    }
    return dmin;
}

double interior_min_distance(const DiscretePath& path) {
    double dmin = kInfinity;
    for (std::size_t k = 0; k + 1 < path.nodes.size(); ++k) {
        if (k > 0) dmin = std::min(dmin, min_pair_distance(path.nodes[k]));
        const Configuration mid(0.5 * (path.nodes[k].coords + path.nodes[k + 1].coords));
        dmin = std::min(dmin, min_pair_distance(mid));
    }
    return dmin;
}

}  // namespace nbody
