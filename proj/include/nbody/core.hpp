#ifndef NBODY_CORE_HPP
#define NBODY_CORE_HPP

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace nbody {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Thrown on precondition violations (bad shapes, invalid partitions, ...).
class UsageError : public std::invalid_argument {
public:
    explicit UsageError(const std::string& what) : std::invalid_argument(what) {}
};

/// Masses, gravitational constant and the ambient Euclidean dimension.
/// Requires dim >= 2; one-dimensional systems are rejected.
class MassSystem {
public:
    MassSystem(std::vector<double> masses, int dim, double grav_const = 1.0);

    int n_bodies() const { return static_cast<int>(masses_.size()); }
    int dim() const { return dim_; }
    double mass(int i) const { return masses_[static_cast<std::size_t>(i)]; }
    const std::vector<double>& masses() const { return masses_; }
    double grav_const() const { return grav_const_; }
    double total_mass() const { return total_mass_; }

private:
    std::vector<double> masses_;
    int dim_;
    double grav_const_;
    double total_mass_;
};

/// One point of configuration space: a dim x n_bodies matrix, one body per column.
struct Configuration {
    Mat coords;

    Configuration() = default;
    explicit Configuration(Mat c) : coords(std::move(c)) {}

    static Configuration zero(int dim, int n_bodies) {
        return Configuration(Mat::Zero(dim, n_bodies));
    }

    int dim() const { return static_cast<int>(coords.rows()); }
    int n_bodies() const { return static_cast<int>(coords.cols()); }
    Eigen::Ref<const Vec> body(int i) const { return coords.col(i); }
};

/// Check coords shape against the owning system; throws UsageError on mismatch.
void check_shape(const MassSystem& sys, const Configuration& x, const char* who);

struct PairExtremes {
    double max_dist;  // R
    double min_dist;  // r
};

/// R = max r_ij, r = min r_ij over unordered pairs.  Throws for n_bodies < 2.
PairExtremes pairwise_extremes(const Configuration& x);

/// min r_ij, with +infinity when no pair exists (n_bodies < 2).
double min_pair_distance(const Configuration& x);

/// True iff all bodies are at pairwise positive distance (x in Omega).
bool in_omega(const Configuration& x);

/// Newtonian force function U = sum_{i<j} G m_i m_j / r_ij (positive sign).
/// Returns +infinity when two bodies coincide.
double potential(const MassSystem& sys, const Configuration& x);

/// Gradient of U with respect to body coordinates, same shape as x.
/// Must not be called at a collision.
Mat potential_gradient(const MassSystem& sys, const Configuration& x);

/// sqrt(sum_i w_i |v_i|^2) with one weight per column.
double weighted_norm_sq(const std::vector<double>& weights, const Mat& v);
double weighted_norm(const std::vector<double>& weights, const Mat& v);

/// Mass inner-product norm of a configuration-shaped vector:
/// sqrt(sum_i m_i |v_i|^2).  This is the norm under which the kinetic
/// energy is |xdot|^2 / 2.
double mass_norm_sq(const MassSystem& sys, const Mat& v);
double mass_norm(const MassSystem& sys, const Mat& v);

/// Partition of body indices {0, ..., n_bodies-1} into nonempty disjoint blocks.
/// Canonical form: blocks sorted internally and ordered by smallest member.
class ClusterPartition {
public:
    ClusterPartition(std::vector<std::vector<int>> blocks, int n_bodies);

    static ClusterPartition single_block(int n_bodies);
    static ClusterPartition singletons(int n_bodies);

    int n_bodies() const { return n_bodies_; }
    int n_blocks() const { return static_cast<int>(blocks_.size()); }
    const std::vector<int>& block(int k) const { return blocks_[static_cast<std::size_t>(k)]; }
    const std::vector<std::vector<int>>& blocks() const { return blocks_; }
    int block_of(int body) const { return block_of_[static_cast<std::size_t>(body)]; }

    /// Total mass M_A per block.
    std::vector<double> block_masses(const MassSystem& sys) const;

    bool operator==(const ClusterPartition& other) const { return blocks_ == other.blocks_; }

    std::string to_string() const;

private:
    std::vector<std::vector<int>> blocks_;
    std::vector<int> block_of_;
    int n_bodies_;
};

/// x decomposed as x_i = y_{A(i)} + z_i where y_A is the mass-weighted
/// center of block A and z has zero mass-weighted mean per block.
struct ClusterSplit {
    Mat centers;    // dim x n_blocks, column k = y of block k
    Mat relatives;  // dim x n_bodies, column i = z_i

    Mat reconstruct(const ClusterPartition& p) const;
};

ClusterSplit cluster_split(const MassSystem& sys, const Configuration& x,
                           const ClusterPartition& p);

/// Within-block part of U for block k of the partition: sum over pairs
/// i<j inside the block of G m_i m_j / r_ij.  Equals U(z_A) since relative
/// coordinates preserve within-block differences.
double block_potential(const MassSystem& sys, const Configuration& x,
                       const ClusterPartition& p, int k);

/// Cross-block part of U: sum over pairs in different blocks.
double cross_potential(const MassSystem& sys, const Configuration& x,
                       const ClusterPartition& p);

}  // namespace nbody

#endif
