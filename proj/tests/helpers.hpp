#pragma once

// Small utilities shared by the test suites: seeded random configurations and
// paths, and a scratch-directory guard for CLI tests.

#include <filesystem>
#include <random>
#include <string>

#include "nbody/action.hpp"
#include "nbody/core.hpp"

namespace helpers {

using nbody::Configuration;
using nbody::DiscretePath;
using nbody::MassSystem;

inline Configuration random_configuration(std::mt19937_64& rng, int dim, int n_bodies,
                                          double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Configuration x = Configuration::zero(dim, n_bodies);
    for (int i = 0; i < n_bodies; ++i)
        for (int d = 0; d < dim; ++d) x.coords(d, i) = scale * gauss(rng);
    return x;
}

// Random configuration conditioned to keep every pair at distance >= min_sep.
inline Configuration separated_configuration(std::mt19937_64& rng, int dim, int n_bodies,
                                             double scale, double min_sep) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Configuration x = random_configuration(rng, dim, n_bodies, scale);
        if (nbody::min_pair_distance(x) >= min_sep) return x;
    }
    throw std::runtime_error("separated_configuration: rejection sampling failed");
}

// Random piecewise-linear path with collision-free quadrature nodes.
inline DiscretePath random_path(std::mt19937_64& rng, int dim, int n_bodies, int segments,
                                double scale = 1.0) {
    std::uniform_real_distribution<double> unif(0.1, 0.6);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<double> times(static_cast<std::size_t>(segments) + 1);
        times[0] = 0.0;
        for (int k = 1; k <= segments; ++k)
            times[static_cast<std::size_t>(k)] = times[static_cast<std::size_t>(k - 1)] + unif(rng);
        std::vector<Configuration> nodes;
        nodes.reserve(times.size());
        for (std::size_t k = 0; k < times.size(); ++k)
            nodes.push_back(random_configuration(rng, dim, n_bodies, scale));
        DiscretePath path(std::move(times), std::move(nodes));
        if (nbody::min_quadrature_distance(path) > 0.05 * scale) return path;
    }
    throw std::runtime_error("random_path: rejection sampling failed");
}

// Creates a unique scratch directory under the system temp root and removes it
// on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        static std::mt19937_64 rng(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() /
                ("nbody_test_" + tag + "_" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& child = "") const {
        return child.empty() ? path_.string() : (path_ / child).string();
    }

private:
    std::filesystem::path path_;
};

}  // namespace helpers
