#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "nbody/action.hpp"
#include "nbody/dynamics.hpp"

namespace nbody {

inline constexpr const char* kLibraryVersion = "0.1.0";

// Exit codes of run_experiment and the nbody binary.
inline constexpr int kExitOk = 0;
inline constexpr int kExitSpecError = 2;
inline constexpr int kExitNotConverged = 3;
inline constexpr int kExitIoError = 4;

struct CliOverrides {
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> segments;
    bool quiet = false;
};

// Loads and validates the experiment spec (a JSON document with a "system"
// block and exactly one command payload), runs the requested command and
// writes CSV tables plus a key=value summary into the output directory.
// Returns one of the kExit* codes; diagnostics go to `log` when given.
int run_experiment(const std::string& command, const std::string& spec_path,
                   const CliOverrides& overrides = {}, std::ostream* log = nullptr);

// ---- report plumbing, exposed for tests ----

// Full-precision decimal formatting (%.17g); round-trips doubles exactly.
std::string format_full(double v);

std::string sha256_hex(const unsigned char* data, std::size_t len);
std::string sha256_hex(const std::string& bytes);

// path.csv: header `t,body,x0..x{dim-1}`, one row per (sample, body), LF.
void write_path_csv(std::ostream& os, const DiscretePath& path);
DiscretePath read_path_csv(std::istream& is);

// traj.csv: path.csv columns plus v0..v{dim-1}.
void write_traj_csv(std::ostream& os, const Trajectory& traj);
Trajectory read_traj_csv(std::istream& is);

}  // namespace nbody
