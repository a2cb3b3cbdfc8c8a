#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "nbody/action.hpp"
#include "nbody/core.hpp"
#include "nbody/minimize.hpp"

namespace nbody {

// A fitting sweep that could not produce usable constants (too many dropped
// samples, empty sample, or held-out domination failure).
class FitRejected : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FitProvenance {
    int sample_count = 0;
    int dropped = 0;
    int held_out_count = 0;
    std::uint64_t seed = 0;
    std::vector<double> masses;
    double radius_min = 0.0;
    double radius_max = 0.0;
    double tau_min = 0.0;
    double tau_max = 0.0;
};

// Constants for the phase bounds: phi <= alpha r^2/tau + beta tau/r on
// bounded configurations, and the cross-interaction log bound
// alpha1 log(1 + beta1 tau/t).
struct BoundConstants {
    double alpha = 1.0;
    double beta = 1.0;
    double alpha1 = 1.0;
    double beta1 = 1.0;
    FitProvenance provenance;

    void validate() const;
};

// alpha r^2/tau + beta tau/r.
double maderna_rhs(const BoundConstants& c, double r, double tau);

// (2 y_dist^2 + 4 alpha R^2)^{1/2} (h + beta/R)^{1/2}: an upper bound for the
// no-interaction phase when R exceeds every block's relative displacement.
double lemma1_rhs(double h, const BoundConstants& c, double y_dist, double R);

// Largest block relative displacement (mass norm) between two configurations.
double r_z(const MassSystem& sys, const Configuration& x, const Configuration& x_prime,
           const ClusterPartition& p);

// Checked variant: computes y_dist and r_z from the endpoints and enforces
// R > r_z before evaluating the bound.
double lemma1_rhs(const MassSystem& sys, double h, const BoundConstants& c,
                  const Configuration& x, const Configuration& x_prime,
                  const ClusterPartition& p, double R);

// Endpoint sampling plan for the constant fit.
struct FitSampleSpec {
    int count = 0;
    double radius_min = 0.0;
    double radius_max = 0.0;
    double tau_min = 0.0;
    double tau_max = 0.0;
    std::uint64_t seed = 0;
    int segments = 32;

    void validate() const;
};

// Fits (alpha, beta) so that alpha r^2/tau + beta tau/r dominates measured
// fixed-time minima with 10% headroom, for every r from the sample size up to
// ten times it.  The fit is validated against a held-out sample of equal size.
BoundConstants fit_phi_constants(const MassSystem& sys, const FitSampleSpec& spec);

struct DefectBound {
    double defect = 0.0;    // action of the sub-arc minus the free-time value
    double bound = 0.0;     // tau * u(tau)
    double residual = 0.0;  // defect - bound
};

// Compares the action defect of a sub-arc against the cluster-potential lower
// bound tau * sum_A min{U_A(start), U_A(end)}.
DefectBound defect_lower_bound(const MassSystem& sys, const DiscretePath& path, double t,
                               double tau, const ClusterPartition& p, double h,
                               const SolveOptions& opts = {});

// alpha1 log(1 + beta1 tau / t).
double interaction_log_rhs(const BoundConstants& c, double t, double tau);

}  // namespace nbody
