#ifndef NBODY_MINIMIZE_HPP
#define NBODY_MINIMIZE_HPP

#include "nbody/action.hpp"
#include "nbody/core.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace nbody {

struct SolveOptions {
    int segments = 64;
    double grad_tol = 1e-8;       // on the mass norm of the action gradient
    int max_iters = 500;
    double collision_floor = 0.0; // eps_coll; 0 = auto (1e-6 * initial mean pair distance)
    double tau_rel_tol = 1e-8;    // relative width target of the outer tau search
    std::uint64_t seed = 0;

    void validate() const;
};

/// Outcome of a fixed- or free-time solve.  `value` always equals
/// action(path, h) recomputed on the returned path.
struct MinimizeResult {
    DiscretePath path;
    double value = kInfinity;
    double tau = 0.0;
    double grad_norm = kInfinity;
    int iterations = 0;
    bool converged = false;
    double interior_min_distance = kInfinity;
    bool trivial_endpoint = false;
    std::string diagnostic;
    std::vector<std::pair<double, double>> tau_trace;  // (tau, value) probes of the outer search
};

/// Direct-method approximation of phi_h(x, x', tau): descent over the
/// interior nodes of a `segments`-segment path with endpoints pinned.
/// Endpoints must be collision free; h >= 0.  Non-convergence is reported
/// through `converged`, not as an exception.
MinimizeResult minimize_fixed_time(const MassSystem& sys, const Configuration& x,
                                   const Configuration& x_prime, double tau, double h,
                                   const SolveOptions& opts = {});

/// phi_h(x, x'): best fixed-time value over a bracketed golden-section
/// search in log tau.  For h = 0 the outer infimum may not close at finite
/// tau; that case returns converged = false with a diagnostic.
MinimizeResult minimize_free_time(const MassSystem& sys, const Configuration& x,
                                  const Configuration& x_prime, double h,
                                  const SolveOptions& opts = {});

/// The no-interaction value phi_{h,I=0}:
///   h tau + |y'-y|^2 / (2 tau) + sum_A phi_A(z_A, z'_A, tau)
/// with the center part in closed form and each block solved internally at
/// h = 0 (h enters once, globally).  When tau is absent the outer 1D search
/// over tau is performed.
struct NoInteractionResult {
    double value = kInfinity;
    double center_value = 0.0;            // |y'-y|^2/(2 tau), block-mass norm
    std::vector<double> cluster_values;   // phi_A per block
    double tau = 0.0;
    double h_term = 0.0;
    DiscretePath path;                    // assembled minimizer (centers + block paths)
    bool converged = false;
    std::vector<std::pair<double, double>> tau_trace;
};

NoInteractionResult phi_no_interaction(const MassSystem& sys, const Configuration& x,
                                       const Configuration& x_prime, const ClusterPartition& p,
                                       double h, std::optional<double> tau,
                                       const SolveOptions& opts = {});

/// Minimum of r over strictly interior samples of the result's path
/// (endpoints excluded).  +infinity when no pair exists.
double interior_collision_margin(const MinimizeResult& result);

/// Norm used for the gradient convergence test: mass norm accumulated over
/// interior nodes.
double path_gradient_norm(const MassSystem& sys, const std::vector<Mat>& grad);

}  // namespace nbody

#endif
