#ifndef NBODY_ACTION_HPP
#define NBODY_ACTION_HPP

#include "nbody/core.hpp"

#include <utility>
#include <vector>

namespace nbody {

/// Time-gridded curve in configuration space, piecewise linear between nodes.
struct DiscretePath {
    std::vector<double> times;
    std::vector<Configuration> nodes;

    DiscretePath() = default;
    DiscretePath(std::vector<double> t, std::vector<Configuration> n)
        : times(std::move(t)), nodes(std::move(n)) {}

    int n_segments() const { return static_cast<int>(times.size()) - 1; }
    double duration() const { return times.back() - times.front(); }

    /// Piecewise-linear interpolation; t clamped to [t_0, t_n].
    Configuration at(double t) const;

    /// Subcurve on [t_lo, t_hi] with interpolated endpoints.
    DiscretePath restrict(double t_lo, double t_hi) const;

    /// Throws UsageError unless times are strictly increasing, there is at
    /// least one segment, and every node matches the system shape.
    void validate(const MassSystem& sys) const;
};

/// Straight-line path from x to x_prime on a uniform grid of `segments` steps.
DiscretePath straight_line_path(const Configuration& x, const Configuration& x_prime,
                                double t0, double tau, int segments);

/// Components of the action of a path under a cluster partition.
/// total = h_term + center_kinetic + sum(cluster_actions) + interaction,
/// exactly (same quadrature nodes throughout).
struct ActionSplit {
    double h_term = 0.0;
    double center_kinetic = 0.0;
    std::vector<double> cluster_actions;
    double interaction = 0.0;
    double total = 0.0;
};

/// Discretized A_{L+h}: per segment, exact kinetic energy of the linear
/// segment plus Simpson quadrature of U, plus h * dt.  Returns +infinity
/// if any quadrature node is a collision.  Requires h >= 0.
double action(const MassSystem& sys, const DiscretePath& path, double h);

/// Action split along a partition; identical quadrature, so the splitting
/// identity holds to round-off.
ActionSplit split_action(const MassSystem& sys, const DiscretePath& path,
                         const ClusterPartition& p, double h);

/// Integral of the cross-block potential sum along the path (I_AB for a
/// two-block partition, generalized to all cross-block pairs).
double interaction_integral(const MassSystem& sys, const DiscretePath& path,
                            const ClusterPartition& p);

/// Midpoint energies E = T - U, one entry (t_mid, E) per segment.
std::vector<std::pair<double, double>> energy_profile(const MassSystem& sys,
                                                      const DiscretePath& path);

/// Gradient of the discretized action with respect to the interior nodes
/// (nodes 1..n-1), as a vector of configuration-shaped matrices.
std::vector<Mat> action_gradient_interior(const MassSystem& sys,
                                          const DiscretePath& path, double h);

/// Minimum pairwise distance over all quadrature nodes (segment endpoints and
/// midpoints).  +infinity when there is no pair.
double min_quadrature_distance(const DiscretePath& path);

/// Same restricted to strictly interior samples: interior nodes and all
/// segment midpoints; the two path endpoints are excluded.
double interior_min_distance(const DiscretePath& path);

}  // namespace nbody

#endif
