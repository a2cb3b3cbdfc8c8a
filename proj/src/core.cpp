#include "nbody/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace nbody {

MassSystem::MassSystem(std::vector<double> masses, int dim, double grav_const)
    : masses_(std::move(masses)), dim_(dim), grav_const_(grav_const) {
    if (masses_.empty())
        throw UsageError("MassSystem: need at least one body");
    if (dim_ < 2)
        throw UsageError("MassSystem: dim must be >= 2");
    if (grav_const_ <= 0.0)
        throw UsageError("MassSystem: G must be positive");
    for (double m : masses_)
        if (!(m > 0.0))
            throw UsageError("MassSystem: masses must be positive");
    total_mass_ = std::accumulate(masses_.begin(), masses_.end(), 0.0);
}

void check_shape(const MassSystem& sys, const Configuration& x, const char* who) {
    if (x.dim() != sys.dim() || x.n_bodies() != sys.n_bodies()) {
        std::ostringstream msg;
        msg << who << ": configuration shape " << x.dim() << "x" << x.n_bodies()
            << " does not match system " << sys.dim() << "x" << sys.n_bodies();
        throw UsageError(msg.str());
    }
}

PairExtremes pairwise_extremes(const Configuration& x) {
    const int n = x.n_bodies();
    if (n < 2)
        throw UsageError("pairwise_extremes: no pair exists for n_bodies < 2");
    double rmax = 0.0, rmin = kInfinity;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double d = (x.coords.col(i) - x.coords.col(j)).norm();
            rmax = std::max(rmax, d);
            rmin = std::min(rmin, d);
        }
    }
    return {rmax, rmin};
}

double min_pair_distance(const Configuration& x) {
    if (x.n_bodies() < 2) return kInfinity;
    return pairwise_extremes(x).min_dist;
}

bool in_omega(const Configuration& x) {
    return min_pair_distance(x) > 0.0;
}

double potential(const MassSystem& sys, const Configuration& x) {
    check_shape(sys, x, "potential");
    const int n = sys.n_bodies();
    const double G = sys.grav_const();
    double u = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double d = (x.coords.col(i) - x.coords.col(j)).norm();
            if (d == 0.0) return kInfinity;
            u += G * sys.mass(i) * sys.mass(j) / d;
        }
    }
    return u;
}

Mat potential_gradient(const MassSystem& sys, const Configuration& x) {
    check_shape(sys, x, "potential_gradient");
    const int n = sys.n_bodies();
    const double G = sys.grav_const();
    Mat grad = Mat::Zero(x.dim(), n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const Vec dij = x.coords.col(i) - x.coords.col(j);
            const double d = dij.norm();
            if (d == 0.0)
                throw UsageError("potential_gradient: collision");
            // d/dx_i of 1/r_ij
            const Vec g = (-G * sys.mass(i) * sys.mass(j) / (d * d * d)) * dij;
            grad.col(i) += g;
            grad.col(j) -= g;
        }
    }
    return grad;
}

double weighted_norm_sq(const std::vector<double>& weights, const Mat& v) {
    if (static_cast<int>(weights.size()) != v.cols())
        throw UsageError("weighted_norm: weight count does not match columns");
    double s = 0.0;
    for (int i = 0; i < v.cols(); ++i)
        s += weights[static_cast<std::size_t>(i)] * v.col(i).squaredNorm();
    return s;
}

double weighted_norm(const std::vector<double>& weights, const Mat& v) {
    return std::sqrt(weighted_norm_sq(weights, v));
}

double mass_norm_sq(const MassSystem& sys, const Mat& v) {
    if (v.rows() != sys.dim() || v.cols() != sys.n_bodies())
        throw UsageError("mass_norm: shape does not match system");
    return weighted_norm_sq(sys.masses(), v);
}

double mass_norm(const MassSystem& sys, const Mat& v) {
    return std::sqrt(mass_norm_sq(sys, v));
}

ClusterPartition::ClusterPartition(std::vector<std::vector<int>> blocks, int n_bodies)
    : blocks_(std::move(blocks)), n_bodies_(n_bodies) {
    if (n_bodies_ < 1)
        throw UsageError("ClusterPartition: n_bodies must be >= 1");
    block_of_.assign(static_cast<std::size_t>(n_bodies_), -1);
    for (auto& b : blocks_) {
        if (b.empty())
            throw UsageError("ClusterPartition: empty block");
        std::sort(b.begin(), b.end());
        for (int i : b) {
            if (i < 0 || i >= n_bodies_)
                throw UsageError("ClusterPartition: body index out of range");
            if (block_of_[static_cast<std::size_t>(i)] != -1)
                throw UsageError("ClusterPartition: body appears in two blocks");
            block_of_[static_cast<std::size_t>(i)] = 0;  // placeholder, renumbered below
        }
    }
    for (int i = 0; i < n_bodies_; ++i)
        if (block_of_[static_cast<std::size_t>(i)] == -1)
            throw UsageError("ClusterPartition: body not covered by any block");
    std::sort(blocks_.begin(), blocks_.end(),
              [](const std::vector<int>& a, const std::vector<int>& b) { return a.front() < b.front(); });
    for (int k = 0; k < n_blocks(); ++k)
        for (int i : blocks_[static_cast<std::size_t>(k)])
            block_of_[static_cast<std::size_t>(i)] = k;
}

ClusterPartition ClusterPartition::single_block(int n_bodies) {
    std::vector<int> all(static_cast<std::size_t>(n_bodies));
    std::iota(all.begin(), all.end(), 0);
    return ClusterPartition({all}, n_bodies);
}

ClusterPartition ClusterPartition::singletons(int n_bodies) {
    std::vector<std::vector<int>> blocks;
    for (int i = 0; i < n_bodies; ++i) blocks.push_back({i});
    return ClusterPartition(std::move(blocks), n_bodies);
}

std::vector<double> ClusterPartition::block_masses(const MassSystem& sys) const {
    if (sys.n_bodies() != n_bodies_)
        throw UsageError("block_masses: partition does not match system");
    std::vector<double> out;
    out.reserve(blocks_.size());
    for (const auto& b : blocks_) {
        double m = 0.0;
        for (int i : b) m += sys.mass(i);
        out.push_back(m);
    }
    return out;
}

std::string ClusterPartition::to_string() const {
    std::ostringstream os;
    os << "{";
    for (int k = 0; k < n_blocks(); ++k) {
        os << (k ? ",{" : "{");
        const auto& b = blocks_[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < b.size(); ++i) os << (i ? "," : "") << b[i];
        os << "}";
    }
    os << "}";
    return os.str();
}

Mat ClusterSplit::reconstruct(const ClusterPartition& p) const {
    Mat out(relatives.rows(), relatives.cols());
    for (int i = 0; i < out.cols(); ++i)
        out.col(i) = centers.col(p.block_of(i)) + relatives.col(i);
    return out;
}

ClusterSplit cluster_split(const MassSystem& sys, const Configuration& x,
                           const ClusterPartition& p) {
    check_shape(sys, x, "cluster_split");
    if (p.n_bodies() != sys.n_bodies())
        throw UsageError("cluster_split: partition does not match system");
    ClusterSplit split;
    split.centers = Mat::Zero(x.dim(), p.n_blocks());
    split.relatives = Mat::Zero(x.dim(), x.n_bodies());
    for (int k = 0; k < p.n_blocks(); ++k) {
        double mass = 0.0;
        Vec center = Vec::Zero(x.dim());
        for (int i : p.block(k)) {
            center += sys.mass(i) * x.coords.col(i);
            mass += sys.mass(i);
        }
        center /= mass;
        split.centers.col(k) = center;
        for (int i : p.block(k))
            split.relatives.col(i) = x.coords.col(i) - center;
    }
    return split;
}

double block_potential(const MassSystem& sys, const Configuration& x,
                       const ClusterPartition& p, int k) {
    check_shape(sys, x, "block_potential");
    const double G = sys.grav_const();
    const auto& b = p.block(k);
    double u = 0.0;
    for (std::size_t a = 0; a < b.size(); ++a) {
        for (std::size_t c = a + 1; c < b.size(); ++c) {
            const int i = b[a], j = b[c];
            const double d = (x.coords.col(i) - x.coords.col(j)).norm();
            if (d == 0.0) return kInfinity;
            u += G * sys.mass(i) * sys.mass(j) / d;
        }
    }
    return u;
}

double cross_potential(const MassSystem& sys, const Configuration& x,
                       const ClusterPartition& p) {
    check_shape(sys, x, "cross_potential");
    const int n = sys.n_bodies();
    const double G = sys.grav_const();
    double u = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (p.block_of(i) == p.block_of(j)) continue;
            const double d = (x.coords.col(i) - x.coords.col(j)).norm();
            if (d == 0.0) return kInfinity;
            u += G * sys.mass(i) * sys.mass(j) / d;
        }
    }
    return u;
}

}  // namespace nbody
