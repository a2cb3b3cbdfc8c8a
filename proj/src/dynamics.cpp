#include "nbody/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nbody {

void Trajectory::validate(const MassSystem& sys) const {
    if (samples.size() < 2) throw UsageError("Trajectory: need at least two samples");
    for (std::size_t k = 0; k < samples.size(); ++k) {
        check_shape(sys, samples[k].x, "Trajectory");
        check_shape(sys, samples[k].v, "Trajectory");
        if (k > 0 && !(samples[k].t > samples[k - 1].t))
            throw UsageError("Trajectory: times must be strictly increasing");
    }
    if (tol > 0.0 && stats.energy_drift > tol)
        throw UsageError("Trajectory: recorded energy drift exceeds the stated tolerance");
}

const char* to_string(TriState s) {
    switch (s) {
        case TriState::no: return "no";
        case TriState::yes: return "yes";
        default: return "indeterminate";
    }
}

namespace {

double total_energy(const MassSystem& sys, const Mat& pos, const Mat& vel) {
    double kin = 0.0;
    for (int i = 0; i < sys.n_bodies(); ++i)
        kin += sys.mass(i) * vel.col(i).squaredNorm();
    return 0.5 * kin - potential(sys, Configuration(pos));
}

void acceleration(const MassSystem& sys, const Mat& pos, Mat& acc) {
    acc = potential_gradient(sys, Configuration(pos));
    for (int i = 0; i < sys.n_bodies(); ++i) acc.col(i) /= sys.mass(i);
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = kInfinity;
    double rms_resid = kInfinity;
    int n = 0;
    bool ok = false;
};

LineFit ols(const std::vector<double>& xs, const std::vector<double>& ys) {
    LineFit f;
    f.n = static_cast<int>(xs.size());
    if (f.n < 3) return f;
    const double xbar = std::accumulate(xs.begin(), xs.end(), 0.0) / f.n;
    const double ybar = std::accumulate(ys.begin(), ys.end(), 0.0) / f.n;
    double sxx = 0.0, sxy = 0.0;
    for (int k = 0; k < f.n; ++k) {
        sxx += (xs[static_cast<std::size_t>(k)] - xbar) * (xs[static_cast<std::size_t>(k)] - xbar);
        sxy += (xs[static_cast<std::size_t>(k)] - xbar) * (ys[static_cast<std::size_t>(k)] - ybar);
    }
    if (!(sxx > 0.0)) return f;
    f.slope = sxy / sxx;
    f.intercept = ybar - f.slope * xbar;
    double ss = 0.0;
    for (int k = 0; k < f.n; ++k) {
        const double r =
            ys[static_cast<std::size_t>(k)] - f.intercept - f.slope * xs[static_cast<std::size_t>(k)];
        ss += r * r;
    }
    f.rms_resid = std::sqrt(ss / f.n);
    f.slope_stderr = std::sqrt(ss / (f.n - 2) / sxx);
    f.ok = true;
    return f;
}

}  // namespace

Trajectory integrate(const MassSystem& sys, const Configuration& x0, const Configuration& v0,
                     double horizon, double tol, int samples) {
    check_shape(sys, x0, "integrate");
    check_shape(sys, v0, "integrate");
    if (!in_omega(x0)) throw UsageError("integrate: initial configuration has a collision");
    if (!(horizon > 0.0)) throw UsageError("integrate: horizon must be positive");
    if (!(tol > 0.0)) throw UsageError("integrate: tol must be positive");
    if (samples < 2) throw UsageError("integrate: need at least two samples");

    // Dormand-Prince 5(4) tableau (autonomous system; the time fractions drop out)
    static const double a21 = 1.0 / 5;
    static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
    static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static const double e1 = b1 - 5179.0 / 57600, e3 = b3 - 7571.0 / 16695,
                        e4 = b4 - 393.0 / 640, e5 = b5 + 92097.0 / 339200,
                        e6 = b6 - 187.0 / 2100, e7 = -1.0 / 40;

    const int dim = sys.dim(), n = sys.n_bodies();
    // Internal step tolerance well below the requested drift tolerance so the
    // accumulated energy error stays within it over the whole horizon.
    const double steptol = std::max(tol * 1e-3, 5e-15);

    // geometric output grid: t = 0, then t_min .. horizon
    std::vector<double> out_times;
    out_times.reserve(static_cast<std::size_t>(samples));
    out_times.push_back(0.0);
    const double t_min = horizon * 1e-4;
    for (int k = 0; k + 1 < samples; ++k)
        out_times.push_back(t_min * std::pow(horizon / t_min,
                                             samples == 2 ? 1.0 : k / double(samples - 2)));
    out_times.back() = horizon;

    Mat pos = x0.coords, vel = v0.coords;
    Mat kx[7], kv[7], pos_new(dim, n), vel_new(dim, n), tmp(dim, n);
    for (auto& m : kx) m.resize(dim, n);
    for (auto& m : kv) m.resize(dim, n);

    Trajectory traj;
    traj.tol = tol;
    const double e0 = total_energy(sys, pos, vel);
    double u0 = potential(sys, x0);
    double kin0 = e0 + u0;
    const double e_scale = std::max(std::abs(e0), std::max(kin0 + u0, 1e-12));

    auto record = [&](double t) {
        traj.samples.push_back({t, Configuration(pos), Configuration(vel)});
        const double e = total_energy(sys, pos, vel);
        traj.stats.energy_drift =
            std::max(traj.stats.energy_drift, std::abs(e - e0) / e_scale);
    };

    double t = 0.0;
    std::size_t next_out = 0;
    record(out_times[next_out++]);

    // kx[i] holds the acceleration stage, kv[i] the velocity stage:
    // the state derivative is (vel, acc).
    double dt;
    if (n >= 2) {
        // crude initial step from the dynamical time of the closest pair
        const PairExtremes ext = pairwise_extremes(x0);
        const double m_max = *std::max_element(sys.masses().begin(), sys.masses().end());
        const double t_dyn =
            std::sqrt(std::pow(ext.min_dist, 3) / (sys.grav_const() * 2.0 * m_max));
        dt = std::min(horizon, 1e-2 * t_dyn);
    } else {
        dt = horizon * 1e-3;
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) dt = horizon * 1e-6;

    Mat acc_cur(dim, n);
    acceleration(sys, pos, acc_cur);

    const auto stage = [&](int idx, const Mat& p_stage, const Mat& v_stage) {
        kv[idx] = v_stage;
        tmp = p_stage;
        acceleration(sys, tmp, kx[idx]);
    };

    while (next_out < out_times.size()) {
        bool hits_output = false;
        double dt_eff = dt;
        if (t + dt_eff >= out_times[next_out]) {
            dt_eff = out_times[next_out] - t;
            hits_output = true;
        }
        if (dt_eff < 1e-13 * std::max(1.0, t)) {
            traj.stats.close_encounter = true;
            traj.stats.diagnostic = "close encounter: step size collapsed";
            break;
        }

        // stages (k1 = current state's derivative)
        kv[0] = vel;
        kx[0] = acc_cur;
        stage(1, pos + dt_eff * a21 * kv[0], vel + dt_eff * a21 * kx[0]);
        stage(2, pos + dt_eff * (a31 * kv[0] + a32 * kv[1]),
              vel + dt_eff * (a31 * kx[0] + a32 * kx[1]));
        stage(3, pos + dt_eff * (a41 * kv[0] + a42 * kv[1] + a43 * kv[2]),
              vel + dt_eff * (a41 * kx[0] + a42 * kx[1] + a43 * kx[2]));
        stage(4, pos + dt_eff * (a51 * kv[0] + a52 * kv[1] + a53 * kv[2] + a54 * kv[3]),
              vel + dt_eff * (a51 * kx[0] + a52 * kx[1] + a53 * kx[2] + a54 * kx[3]));
        stage(5,
              pos + dt_eff * (a61 * kv[0] + a62 * kv[1] + a63 * kv[2] + a64 * kv[3] +
                              a65 * kv[4]),
              vel + dt_eff * (a61 * kx[0] + a62 * kx[1] + a63 * kx[2] + a64 * kx[3] +
                              a65 * kx[4]));
        pos_new = pos + dt_eff * (b1 * kv[0] + b3 * kv[2] + b4 * kv[3] + b5 * kv[4] +
                                  b6 * kv[5]);
        vel_new = vel + dt_eff * (b1 * kx[0] + b3 * kx[2] + b4 * kx[3] + b5 * kx[4] +
                                  b6 * kx[5]);
        stage(6, pos_new, vel_new);  // FSAL stage

        // embedded error estimate
        double err = 0.0;
        long count = 0;
        auto accumulate_err = [&](const Mat& y_old, const Mat& y_new, const Mat& d1,
                                  const Mat& d3, const Mat& d4, const Mat& d5, const Mat& d6,
                                  const Mat& d7) {
            for (int i = 0; i < n; ++i)
                for (int r = 0; r < dim; ++r) {
                    const double e = dt_eff * (e1 * d1(r, i) + e3 * d3(r, i) + e4 * d4(r, i) +
                                               e5 * d5(r, i) + e6 * d6(r, i) + e7 * d7(r, i));
                    const double sc =
                        steptol * (1.0 + std::max(std::abs(y_old(r, i)), std::abs(y_new(r, i))));
                    err += (e / sc) * (e / sc);
                    ++count;
                }
        };
        accumulate_err(pos, pos_new, kv[0], kv[2], kv[3], kv[4], kv[5], kv[6]);
        accumulate_err(vel, vel_new, kx[0], kx[2], kx[3], kx[4], kx[5], kx[6]);
        err = std::sqrt(err / std::max<long>(count, 1));

        if (err <= 1.0 || !std::isfinite(err)) {
            if (!std::isfinite(err)) {
                // collision blow-up inside the step; shrink hard
                dt *= 0.1;
                ++traj.stats.rejected_steps;
                if (dt < 1e-13 * std::max(1.0, t)) {
                    traj.stats.close_encounter = true;
                    traj.stats.diagnostic = "close encounter: step size collapsed";
                    break;
                }
                continue;
            }
            t += dt_eff;
            pos.swap(pos_new);
            vel.swap(vel_new);
            acc_cur = kx[6];
            ++traj.stats.accepted_steps;
            if (hits_output) {
                t = out_times[next_out];
                record(out_times[next_out]);
                ++next_out;
                // skip duplicate/overlapping output points
                while (next_out < out_times.size() &&
                       out_times[next_out] <= out_times[next_out - 1])
                    ++next_out;
            }
            const double grow = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
            dt = std::max(dt, dt_eff) * std::clamp(grow, 0.2, 5.0);
        } else {
            ++traj.stats.rejected_steps;
            dt = dt_eff * std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
        }
    }
    traj.stats.stop_time = t;
    return traj;
}

Configuration initial_velocity(const DiscretePath& path) {
    if (path.nodes.size() < 2) throw UsageError("initial_velocity: path has no segment");
    const double dt = path.times[1] - path.times[0];
    return Configuration((path.nodes[1].coords - path.nodes[0].coords) / dt);
}

const PairExponent& ExponentTable::at(int i, int j) const {
    if (i > j) std::swap(i, j);
    for (const PairExponent& p : pairs)
        if (p.i == i && p.j == j) return p;
    throw UsageError("ExponentTable::at: no such pair");
}

ExponentTable fit_pair_exponents(const Trajectory& traj, double window_fraction) {
    if (window_fraction < 0.0 || window_fraction > 1.0)
        throw UsageError("fit_pair_exponents: window_fraction must be in [0, 1]");
    ExponentTable table;
    if (traj.samples.empty()) return table;
    table.n_bodies = traj.samples.front().x.n_bodies();

    // positive-time samples only (log t)
    double t_lo = kInfinity, t_hi = 0.0;
    for (const auto& s : traj.samples)
        if (s.t > 0.0) {
            t_lo = std::min(t_lo, s.t);
            t_hi = std::max(t_hi, s.t);
        }
    const double decades = t_lo < t_hi ? std::log10(t_hi / t_lo) : 0.0;
    table.span_ok = decades >= 2.0;

    double w_lo = t_hi;
    if (table.span_ok) {
        const double frac = window_fraction > 0.0
                                ? window_fraction
                                : std::min(1.0, 1.0 / decades);  // default: last decade
        w_lo = t_hi * std::pow(t_lo / t_hi, frac);
    }
    table.window_t_lo = w_lo;
    table.window_t_hi = t_hi;

    const int n = table.n_bodies;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            PairExponent pe;
            pe.i = i;
            pe.j = j;
            if (table.span_ok) {
                std::vector<double> xs, ys;
                for (const auto& s : traj.samples) {
                    if (!(s.t >= w_lo && s.t <= t_hi)) continue;
                    const double r = (s.x.coords.col(i) - s.x.coords.col(j)).norm();
                    if (!(r > 0.0)) continue;
                    xs.push_back(std::log(s.t));
                    ys.push_back(std::log(r));
                }
                const LineFit f = ols(xs, ys);
                if (f.ok && f.n >= 8) {
                    pe.exponent = f.slope;
                    pe.std_error = f.slope_stderr;
                    pe.determinate = true;
                }
            }
            table.pairs.push_back(pe);
        }
    return table;
}

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int a) {
        while (parent[static_cast<std::size_t>(a)] != a) {
            parent[static_cast<std::size_t>(a)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            a = parent[static_cast<std::size_t>(a)];
        }
        return a;
    }
    void unite(int a, int b) { parent[static_cast<std::size_t>(find(a))] = find(b); }
};

}  // namespace

PartitionDetection detect_partition(const ExponentTable& table, double delta) {
    if (!(delta > 0.0)) throw UsageError("detect_partition: delta must be positive");
    const int n = table.n_bodies;
    if (n < 1) throw UsageError("detect_partition: empty exponent table");

    PartitionDetection out{ClusterPartition::singletons(n)};
    UnionFind uf(n);
    for (const PairExponent& p : table.pairs) {
        if (!p.determinate) {
            out.excluded.emplace_back(p.i, p.j);
            continue;
        }
        if (p.exponent <= 2.0 / 3.0 + delta) uf.unite(p.i, p.j);
    }
    std::vector<std::vector<int>> blocks;
    std::vector<int> root_block(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
        const int r = uf.find(i);
        if (root_block[static_cast<std::size_t>(r)] < 0) {
            root_block[static_cast<std::size_t>(r)] = static_cast<int>(blocks.size());
            blocks.emplace_back();
        }
        blocks[static_cast<std::size_t>(root_block[static_cast<std::size_t>(r)])].push_back(i);
    }
    out.partition = ClusterPartition(std::move(blocks), n);
    for (const PairExponent& p : table.pairs)
        if (p.determinate && p.exponent >= 1.0 - delta &&
            out.partition.block_of(p.i) == out.partition.block_of(p.j))
            out.inconsistent = true;
    return out;
}

AsymptoticsReport classify(const MassSystem& sys, const Trajectory& traj) {
    traj.validate(sys);
    AsymptoticsReport rep;
    rep.exponents = fit_pair_exponents(traj);
    if (rep.exponents.n_bodies == 0) rep.exponents.n_bodies = sys.n_bodies();
    rep.partition = detect_partition(rep.exponents);

    const int n = sys.n_bodies(), dim = sys.dim();
    const double t_hi = traj.span_end();
    double t_lo_pos = kInfinity;
    for (const auto& s : traj.samples)
        if (s.t > 0.0) t_lo_pos = std::min(t_lo_pos, s.t);

    // ---- drift fit: position vs t per body over the trailing decade ----
    rep.drift = Mat::Zero(dim, n);
    rep.drift_std_errors.assign(static_cast<std::size_t>(n), kInfinity);
    rep.drift_residuals.assign(static_cast<std::size_t>(n), kInfinity);
    const double drift_lo = t_hi / 10.0;
    const double drift_mid = t_hi / std::sqrt(10.0);  // log-midpoint of the window
    bool drift_ok = true;
    for (int i = 0; i < n; ++i) {
        std::vector<double> ts;
        std::vector<std::vector<double>> coords(static_cast<std::size_t>(dim));
        double scale = 0.0;
        for (const auto& s : traj.samples) {
            if (s.t < drift_lo) continue;
            ts.push_back(s.t);
            for (int r = 0; r < dim; ++r)
                coords[static_cast<std::size_t>(r)].push_back(s.x.coords(r, i));
            scale = std::max(scale, s.x.coords.col(i).norm());
        }
        std::vector<double> ts_early, ts_late;
        std::vector<double> ys_early, ys_late;
        double se2 = 0.0, resid2 = 0.0;
        bool ok = true;
        for (int r = 0; r < dim; ++r) {
            const auto& ys = coords[static_cast<std::size_t>(r)];
            const LineFit f = ols(ts, ys);
            if (!f.ok || f.n < 8) {
                ok = false;
                break;
            }
            rep.drift(r, i) = f.slope;
            // The OLS standard error only reflects scatter about a line.  A
            // slope that is still moving with the window (systematic
            // curvature, e.g. t^{2/3} cluster spread) shows up as disagreement
            // between the two log-halves of the window; fold the larger of the
            // two into the reported uncertainty.
            ts_early.clear(), ts_late.clear(), ys_early.clear(), ys_late.clear();
            for (std::size_t k = 0; k < ts.size(); ++k) {
                if (ts[k] <= drift_mid) {
                    ts_early.push_back(ts[k]);
                    ys_early.push_back(ys[k]);
                }
                if (ts[k] >= drift_mid) {
                    ts_late.push_back(ts[k]);
                    ys_late.push_back(ys[k]);
                }
            }
            const LineFit f_early = ols(ts_early, ys_early);
            const LineFit f_late = ols(ts_late, ys_late);
            double sigma = f.slope_stderr;
            if (f_early.ok && f_late.ok)
                sigma = std::max(sigma, std::abs(f_early.slope - f_late.slope));
            se2 += sigma * sigma;
            resid2 += f.rms_resid * f.rms_resid;
        }
        if (!ok) {
            drift_ok = false;
            continue;
        }
        rep.drift_std_errors[static_cast<std::size_t>(i)] = std::sqrt(se2);
        rep.drift_residuals[static_cast<std::size_t>(i)] =
            std::sqrt(resid2) / std::max(scale, 1e-12);
    }
    if (drift_ok) {
        rep.drift_residual_small = true;
        for (double r : rep.drift_residuals)
            if (!(r <= 0.01)) rep.drift_residual_small = false;  // 1% threshold
    }

    // within-class drift agreement: |a_i - a_j| <= 3 (se_i + se_j)
    for (int k = 0; k < rep.partition.partition.n_blocks() && drift_ok; ++k) {
        const auto& blk = rep.partition.partition.block(k);
        for (std::size_t a = 0; a < blk.size(); ++a)
            for (std::size_t b = a + 1; b < blk.size(); ++b) {
                const double diff = (rep.drift.col(blk[a]) - rep.drift.col(blk[b])).norm();
                const double tol3 = 3.0 * (rep.drift_std_errors[static_cast<std::size_t>(blk[a])] +
                                           rep.drift_std_errors[static_cast<std::size_t>(blk[b])]);
                if (diff > tol3 + 1e-12) rep.within_class_drift_consistent = false;
            }
    }

    // ---- dyadic windows for the growth detectors ----
    // window k (k = 0 newest): (t_hi / 2^{k+1}, t_hi / 2^k]
    int n_windows = 0;
    if (std::isfinite(t_lo_pos) && t_lo_pos > 0.0)
        while (t_hi / std::pow(2.0, n_windows + 1) >= t_lo_pos && n_windows < 24) ++n_windows;

    if (n_windows < 3 || n < 2) {
        rep.superhyperbolic = TriState::indeterminate;
        rep.expansive = TriState::indeterminate;
        rep.notes += "insufficient span for dyadic window detectors; ";
    } else {
        const int used = std::min(n_windows, 5);
        // windowed max of R/t, oldest -> newest
        std::vector<double> rmax(static_cast<std::size_t>(used), 0.0);
        std::vector<std::vector<double>> rmin_pair;  // per pair, per window
        const int n_pairs = n * (n - 1) / 2;
        rmin_pair.assign(static_cast<std::size_t>(n_pairs),
                         std::vector<double>(static_cast<std::size_t>(used), kInfinity));
        for (const auto& s : traj.samples) {
            if (!(s.t > 0.0)) continue;
            int w = -1;
            for (int k = 0; k < used; ++k)
                if (s.t > t_hi / std::pow(2.0, k + 1) && s.t <= t_hi / std::pow(2.0, k)) {
                    w = used - 1 - k;  // store oldest first
                    break;
                }
            if (w < 0) continue;
            const PairExtremes ext = pairwise_extremes(s.x);
            rmax[static_cast<std::size_t>(w)] =
                std::max(rmax[static_cast<std::size_t>(w)], ext.max_dist / s.t);
            int pair = 0;
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j, ++pair) {
                    const double r = (s.x.coords.col(i) - s.x.coords.col(j)).norm();
                    auto& cell = rmin_pair[static_cast<std::size_t>(pair)]
                                          [static_cast<std::size_t>(w)];
                    cell = std::min(cell, r);
                }
        }

        bool windows_populated = true;
        for (int k = 0; k < used; ++k)
            if (!(rmax[static_cast<std::size_t>(k)] > 0.0)) windows_populated = false;
        if (!windows_populated) {
            rep.superhyperbolic = TriState::indeterminate;
            rep.expansive = TriState::indeterminate;
            rep.notes += "empty dyadic window; ";
        } else {
            // superhyperbolic: windowed max of R/t grows by >= 1.5 between
            // consecutive windows, over the trailing windows
            bool growing = true;
            for (int k = 1; k < used; ++k)
                if (!(rmax[static_cast<std::size_t>(k)] >=
                      1.5 * rmax[static_cast<std::size_t>(k - 1)]))
                    growing = false;
            rep.superhyperbolic = growing ? TriState::yes : TriState::no;

            // expansive: every pair's windowed minimum increases window to
            // window, and the final minimum separation exceeds twice its
            // value near the geometric mid-horizon (log-midpoint, so
            // sub-linear growth like t^{2/3} still registers)
            bool expanding = true;
            for (const auto& mins : rmin_pair)
                for (int k = 1; k < used; ++k)
                    if (!(mins[static_cast<std::size_t>(k)] >
                          mins[static_cast<std::size_t>(k - 1)]))
                        expanding = false;
            const double t_mid = std::sqrt(t_lo_pos * t_hi);
            double best = kInfinity;
            const TrajectorySample* mid_sample = nullptr;
            for (const auto& s : traj.samples) {
                if (!(s.t > 0.0)) continue;
                const double d = std::abs(std::log(s.t / t_mid));
                if (d < best) {
                    best = d;
                    mid_sample = &s;
                }
            }
            if (mid_sample) {
                const double r_end = min_pair_distance(traj.samples.back().x);
                const double r_mid = min_pair_distance(mid_sample->x);
                if (!(r_end > 2.0 * r_mid)) expanding = false;
            }
            rep.expansive = expanding ? TriState::yes : TriState::no;
        }
    }

    // ---- per-block internal potential decay ----
    const ClusterPartition& part = rep.partition.partition;
    rep.cluster_potential_exponents.assign(static_cast<std::size_t>(part.n_blocks()), 0.0);
    rep.cluster_potential_determinate.assign(static_cast<std::size_t>(part.n_blocks()), false);
    for (int k = 0; k < part.n_blocks(); ++k) {
        if (part.block(k).size() < 2) continue;  // no internal potential
        std::vector<double> xs, ys;
        for (const auto& s : traj.samples) {
            if (!(s.t >= rep.exponents.window_t_lo && s.t <= rep.exponents.window_t_hi))
                continue;
            if (!(s.t > 0.0)) continue;
            const double u = block_potential(sys, s.x, part, k);
            if (!(u > 0.0) || !std::isfinite(u)) continue;
            xs.push_back(std::log(s.t));
            ys.push_back(std::log(u));
        }
        const LineFit f = ols(xs, ys);
        if (f.ok && f.n >= 8) {
            rep.cluster_potential_exponents[static_cast<std::size_t>(k)] = f.slope;
            rep.cluster_potential_determinate[static_cast<std::size_t>(k)] = true;
        }
    }
    return rep;
}

}  // namespace nbody
