#include "oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace oracles {

namespace {

using nbody::Mat;

// Two-body configuration about the barycenter from the relative separation
// vector: x0 = (m2/M) rel, x1 = -(m1/M) rel.
Configuration from_relative(double m1, double m2, const Vec& rel) {
    const double total = m1 + m2;
    Mat coords(rel.size(), 2);
    coords.col(0) = (m2 / total) * rel;
    coords.col(1) = -(m1 / total) * rel;
    return Configuration(coords);
}

}  // namespace

double CircularOrbit::omega() const { return std::sqrt(G * total_mass() / (d * d * d)); }

double CircularOrbit::period() const { return 2.0 * M_PI / omega(); }

double CircularOrbit::kinetic() const {
    const double w = omega();
    return 0.5 * reduced_mass() * d * d * w * w;
}

double CircularOrbit::potential() const { return G * m1 * m2 / d; }

Configuration CircularOrbit::position(double t) const {
    const double phase = omega() * t;
    Vec rel(2);
    rel << d * std::cos(phase), d * std::sin(phase);
    return from_relative(m1, m2, rel);
}

Configuration CircularOrbit::velocity(double t) const {
    const double w = omega();
    const double phase = w * t;
    Vec rel(2);
    rel << -d * w * std::sin(phase), d * w * std::cos(phase);
    return from_relative(m1, m2, rel);
}

double CircularOrbit::action(double tau, double h) const {
    return (kinetic() + potential() + h) * tau;
}

double KeplerEllipse::time_at(double E) const {
    return std::sqrt(a * a * a / mu()) * (E - e * std::sin(E));
}

Configuration KeplerEllipse::position(double E) const {
    const double b = a * std::sqrt(1.0 - e * e);
    Vec rel(2);
    rel << a * (std::cos(E) - e), b * std::sin(E);
    return from_relative(m1, m2, rel);
}

Configuration KeplerEllipse::velocity(double E) const {
    const double b = a * std::sqrt(1.0 - e * e);
    // dE/dt = sqrt(mu/a^3) / (1 - e cos E)
    const double e_rate = std::sqrt(mu() / (a * a * a)) / (1.0 - e * std::cos(E));
    Vec rel(2);
    rel << -a * std::sin(E) * e_rate, b * std::cos(E) * e_rate;
    return from_relative(m1, m2, rel);
}

double KeplerEllipse::action_between(double E0, double E1, double h) const {
    const double tau = time_at(E1) - time_at(E0);
    const double u_integral = G * m1 * m2 * std::sqrt(a / mu()) * (E1 - E0);
    return (total_energy() + h) * tau + 2.0 * u_integral;
}

double KeplerEllipse::action_quadrature(double E0, double E1, double h, int panels) const {
    // Composite Simpson in E of (T + U + h) dt/dE.
    const double mred = m1 * m2 / (m1 + m2);
    const auto integrand = [&](double E) {
        const Configuration v = velocity(E);
        const Vec rel_v = v.body(0) - v.body(1);
        const double kinetic = 0.5 * mred * rel_v.squaredNorm();
        const double pot = G * m1 * m2 / separation(E);
        const double dt_dE = std::sqrt(a * a * a / mu()) * (1.0 - e * std::cos(E));
        return (kinetic + pot + h) * dt_dE;
    };
    const double dE = (E1 - E0) / panels;
    double total = 0.0;
    for (int k = 0; k < panels; ++k) {
        const double lo = E0 + k * dE;
        total += dE / 6.0 * (integrand(lo) + 4.0 * integrand(lo + 0.5 * dE) + integrand(lo + dE));
    }
    return total;
}

bool RadialEscape::parabolic() const { return std::abs(eps()) <= 1e-12 * mu() / r0; }

double RadialEscape::v_infinity() const {
    if (eps() <= 0.0) throw std::invalid_argument("v_infinity requires eps > 0");
    return std::sqrt(2.0 * eps());
}

double RadialEscape::separation(double t) const {
    if (v0 <= 0.0) throw std::invalid_argument("RadialEscape requires v0 > 0");
    if (parabolic()) {
        // d/dt r^{3/2} = (3/2) sqrt(2 mu) is constant when rdot = sqrt(2mu/r).
        const double base = std::pow(r0, 1.5) + 1.5 * std::sqrt(2.0 * mu()) * t;
        return std::pow(base, 2.0 / 3.0);
    }
    const double energy = eps();
    if (energy < 0.0) throw std::invalid_argument("RadialEscape requires eps >= 0");
    // t(r) = (F(r) - F(r0)) / sqrt(2 eps) with
    //   F(s) = sqrt(s (s + p)) - p log(sqrt(s) + sqrt(s + p)),  p = mu / eps,
    // an antiderivative of sqrt(s / (s + p)).  Invert by bisection.
    const double p = mu() / energy;
    const auto antiderivative = [p](double s) {
        return std::sqrt(s * (s + p)) - p * std::log(std::sqrt(s) + std::sqrt(s + p));
    };
    const auto time_of = [&](double r) {
        return (antiderivative(r) - antiderivative(r0)) / std::sqrt(2.0 * energy);
    };
    if (t <= 0.0) return r0;
    double lo = r0;
    double hi = r0 + std::sqrt(2.0 * energy + 2.0 * mu() / r0) * t + 1.0;
    while (time_of(hi) < t) hi *= 2.0;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (time_of(mid) < t)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-15 * hi) break;
    }
    return 0.5 * (lo + hi);
}

double RadialEscape::separation_rate(double t) const {
    return std::sqrt(2.0 * eps() + 2.0 * mu() / separation(t));
}

Configuration RadialEscape::position(double t) const {
    Vec rel(2);
    rel << separation(t), 0.0;
    return from_relative(m1, m2, rel);
}

Configuration RadialEscape::velocity(double t) const {
    Vec rel(2);
    rel << separation_rate(t), 0.0;
    return from_relative(m1, m2, rel);
}

Trajectory synthetic_trajectory(int dim, int n_bodies,
                                const std::function<Vec(int, double)>& pos,
                                const std::function<Vec(int, double)>& vel, double t_lo,
                                double t_hi, int samples) {
    if (samples < 2 || t_lo <= 0.0 || t_hi <= t_lo)
        throw std::invalid_argument("synthetic_trajectory: bad grid");
    Trajectory traj;
    traj.tol = 0.0;
    const double ratio = std::log(t_hi / t_lo);
    for (int s = 0; s < samples; ++s) {
        const double frac = static_cast<double>(s) / (samples - 1);
        const double t = t_lo * std::exp(ratio * frac);
        TrajectorySample sample;
        sample.t = t;
        sample.x = Configuration::zero(dim, n_bodies);
        sample.v = Configuration::zero(dim, n_bodies);
        for (int i = 0; i < n_bodies; ++i) {
            sample.x.coords.col(i) = pos(i, t);
            sample.v.coords.col(i) = vel(i, t);
        }
        traj.samples.push_back(std::move(sample));
    }
    traj.stats.stop_time = t_hi;
    return traj;
}

Trajectory two_escaping_pairs(double t_lo, double t_hi, int samples, double drift,
                              double spread) {
    const auto pos = [&](int body, double t) {
        Vec x(2);
        const double side = body < 2 ? 1.0 : -1.0;
        const double sign = (body % 2 == 0) ? 1.0 : -1.0;
        x << side * drift * t, sign * 0.5 * spread * std::pow(t, 2.0 / 3.0);
        return x;
    };
    const auto vel = [&](int body, double t) {
        Vec v(2);
        const double side = body < 2 ? 1.0 : -1.0;
        const double sign = (body % 2 == 0) ? 1.0 : -1.0;
        v << side * drift, sign * 0.5 * spread * (2.0 / 3.0) * std::pow(t, -1.0 / 3.0);
        return v;
    };
    return synthetic_trajectory(2, 4, pos, vel, t_lo, t_hi, samples);
}

}  // namespace oracles
