#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nbody/action.hpp"
#include "nbody/core.hpp"

namespace nbody {

struct TrajectorySample {
    double t = 0.0;
    Configuration x;
    Configuration v;
};

struct IntegratorStats {
    double energy_drift = 0.0;  // max relative drift observed at samples
    long accepted_steps = 0;
    long rejected_steps = 0;
    bool close_encounter = false;
    double stop_time = 0.0;
    std::string diagnostic;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    IntegratorStats stats;
    double tol = 0.0;  // requested energy-drift tolerance

    double span_start() const { return samples.empty() ? 0.0 : samples.front().t; }
    double span_end() const { return samples.empty() ? 0.0 : samples.back().t; }
    void validate(const MassSystem& sys) const;
};

// Adaptive embedded Runge-Kutta integration of Newton's equations with
// energy-drift monitoring.  Samples are emitted on a geometric time grid so
// log-log fits stay well conditioned.  A close approach below the step floor
// stops the run early with a diagnostic instead of degrading silently.
Trajectory integrate(const MassSystem& sys, const Configuration& x0, const Configuration& v0,
                     double horizon, double tol, int samples = 512);

// First-segment difference quotient, for handing a computed minimizer to the flow.
Configuration initial_velocity(const DiscretePath& path);

struct PairExponent {
    int i = 0;
    int j = 0;
    double exponent = 0.0;
    double std_error = kInfinity;
    bool determinate = false;
};

struct ExponentTable {
    int n_bodies = 0;
    std::vector<PairExponent> pairs;  // ordered (i, j), i < j
    double window_t_lo = 0.0;
    double window_t_hi = 0.0;
    bool span_ok = false;

    const PairExponent& at(int i, int j) const;
};

// Least-squares slope of log r_ij versus log t per pair over a trailing
// window.  window_fraction in (0, 1] selects that fraction of the log-time
// span from the end; 0 selects the default trailing decade.  A span shorter
// than two decades yields indeterminate markers, not an exception.
ExponentTable fit_pair_exponents(const Trajectory& traj, double window_fraction = 0.0);

struct PartitionDetection {
    ClusterPartition partition = ClusterPartition::singletons(1);
    bool inconsistent = false;                  // closure merged a linear-growth pair
    std::vector<std::pair<int, int>> excluded;  // indeterminate pairs left unrelated
};

// Clusters bodies whose pairwise exponent is <= 2/3 + delta and closes the
// relation transitively.
PartitionDetection detect_partition(const ExponentTable& table, double delta = 0.1);

enum class TriState { no, yes, indeterminate };

const char* to_string(TriState s);

struct AsymptoticsReport {
    ExponentTable exponents;
    PartitionDetection partition;
    Mat drift;                           // dim x n fitted linear velocities
    std::vector<double> drift_std_errors;
    std::vector<double> drift_residuals;  // rms residual / window position scale
    bool drift_residual_small = false;    // all residuals below 1%
    bool within_class_drift_consistent = true;
    TriState superhyperbolic = TriState::indeterminate;
    TriState expansive = TriState::indeterminate;
    // per partition block: fitted decay exponent of the internal potential
    std::vector<double> cluster_potential_exponents;
    std::vector<bool> cluster_potential_determinate;
    std::string notes;
};

// Windowed heuristics for the asymptotic classification; all detectors are
// tri-state and their thresholds documented in the implementation.
AsymptoticsReport classify(const MassSystem& sys, const Trajectory& traj);

}  // namespace nbody
