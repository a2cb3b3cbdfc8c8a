#include "nbody/cli.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include "json.hpp"

#include "nbody/bounds.hpp"
#include "nbody/minimize.hpp"

namespace nbody {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------- formatting

std::string format_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ------------------------------------------------------------------- sha-256

namespace {

constexpr std::uint32_t kShaK[64] = {
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
    0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
    0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
    0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
    0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
    0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
    0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
    0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
    0xc67178f2};

inline std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

class Sha256 {
public:
    Sha256() {
        static constexpr std::uint32_t init[8] = {0x6a09e667, 0xbb67ae85, 0x3c6ef372,
                                                  0xa54ff53a, 0x510e527f, 0x9b05688c,
                                                  0x1f83d9ab, 0x5be0cd19};
        std::copy(std::begin(init), std::end(init), h_);
    }

    void update(const unsigned char* data, std::size_t len) {
        bits_ += static_cast<std::uint64_t>(len) * 8;
        while (len > 0) {
            const std::size_t take = std::min<std::size_t>(64 - fill_, len);
            std::memcpy(buf_ + fill_, data, take);
            fill_ += take;
            data += take;
            len -= take;
            if (fill_ == 64) {
                transform(buf_);
                fill_ = 0;
            }
        }
    }

    std::array<unsigned char, 32> digest() {
        unsigned char pad[72] = {0x80};
        const std::uint64_t bits = bits_;
        std::size_t padlen = (fill_ < 56) ? 56 - fill_ : 120 - fill_;
        unsigned char lenbuf[8];
        for (int i = 0; i < 8; ++i)
            lenbuf[i] = static_cast<unsigned char>(bits >> (56 - 8 * i));
        update(pad, padlen);
        update(lenbuf, 8);
        std::array<unsigned char, 32> out{};
        for (int i = 0; i < 8; ++i)
            for (int b = 0; b < 4; ++b)
                out[static_cast<std::size_t>(4 * i + b)] =
                    static_cast<unsigned char>(h_[i] >> (24 - 8 * b));
        return out;
    }

private:
    void transform(const unsigned char* p) {
        std::uint32_t w[64];
        for (int i = 0; i < 16; ++i)
            w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
                   (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
        for (int i = 16; i < 64; ++i) {
            const std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
            const std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16] + s0 + w[i - 7] + s1;
        }
        std::uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4], f = h_[5],
                      g = h_[6], h = h_[7];
        for (int i = 0; i < 64; ++i) {
            const std::uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
            const std::uint32_t ch = (e & f) ^ (~e & g);
            const std::uint32_t t1 = h + s1 + ch + kShaK[i] + w[i];
            const std::uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
            const std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
            const std::uint32_t t2 = s0 + maj;
            h = g;
            g = f;
            f = e;
            e = d + t1;
            d = c;
            c = b;
            b = a;
            a = t1 + t2;
        }
        h_[0] += a;
        h_[1] += b;
        h_[2] += c;
        h_[3] += d;
        h_[4] += e;
        h_[5] += f;
        h_[6] += g;
        h_[7] += h;
    }

    std::uint32_t h_[8];
    std::uint64_t bits_ = 0;
    unsigned char buf_[64];
    std::size_t fill_ = 0;
};

}  // namespace

std::string sha256_hex(const unsigned char* data, std::size_t len) {
    Sha256 s;
    s.update(data, len);
    const auto d = s.digest();
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (unsigned char b : d) {
        out.push_back(hex[b >> 4]);
        out.push_back(hex[b & 0xf]);
    }
    return out;
}

std::string sha256_hex(const std::string& bytes) {
    return sha256_hex(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
}

// ------------------------------------------------------------------ csv I/O

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, const char* ctx) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw UsageError(std::string(ctx) + ": bad number '" + s + "'");
    return v;
}

}  // namespace

void write_path_csv(std::ostream& os, const DiscretePath& path) {
    if (path.nodes.empty()) throw UsageError("write_path_csv: empty path");
    const int dim = path.nodes.front().dim();
    const int n = path.nodes.front().n_bodies();
    os << "t,body";
    for (int r = 0; r < dim; ++r) os << ",x" << r;
    os << "\n";
    for (std::size_t k = 0; k < path.nodes.size(); ++k)
        for (int i = 0; i < n; ++i) {
            os << format_full(path.times[k]) << ',' << i;
            for (int r = 0; r < dim; ++r)
                os << ',' << format_full(path.nodes[k].coords(r, i));
            os << "\n";
        }
}

DiscretePath read_path_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw UsageError("read_path_csv: empty file");
    const auto head = split_csv(line);
    if (head.size() < 3 || head[0] != "t" || head[1] != "body")
        throw UsageError("read_path_csv: bad header");
    const int dim = static_cast<int>(head.size()) - 2;

    DiscretePath path;
    std::vector<Vec> bodies;
    double cur_t = 0.0;
    auto flush = [&]() {
        if (bodies.empty()) return;
        Mat node(dim, static_cast<int>(bodies.size()));
        for (std::size_t i = 0; i < bodies.size(); ++i) node.col(static_cast<int>(i)) = bodies[i];
        path.times.push_back(cur_t);
        path.nodes.emplace_back(std::move(node));
        bodies.clear();
    };
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (static_cast<int>(cells.size()) != dim + 2)
            throw UsageError("read_path_csv: wrong column count");
        const double t = parse_double(cells[0], "read_path_csv");
        const int body = static_cast<int>(parse_double(cells[1], "read_path_csv"));
        if (body == 0) flush();
        if (body != static_cast<int>(bodies.size()))
            throw UsageError("read_path_csv: body indices out of order");
        cur_t = t;
        Vec v(dim);
        for (int r = 0; r < dim; ++r)
            v[r] = parse_double(cells[static_cast<std::size_t>(2 + r)], "read_path_csv");
        bodies.push_back(std::move(v));
    }
    flush();
    if (path.nodes.size() < 2) throw UsageError("read_path_csv: need at least two samples");
    return path;
}

void write_traj_csv(std::ostream& os, const Trajectory& traj) {
    if (traj.samples.empty()) throw UsageError("write_traj_csv: empty trajectory");
    const int dim = traj.samples.front().x.dim();
    const int n = traj.samples.front().x.n_bodies();
    os << "t,body";
    for (int r = 0; r < dim; ++r) os << ",x" << r;
    for (int r = 0; r < dim; ++r) os << ",v" << r;
    os << "\n";
    for (const auto& s : traj.samples)
        for (int i = 0; i < n; ++i) {
            os << format_full(s.t) << ',' << i;
            for (int r = 0; r < dim; ++r) os << ',' << format_full(s.x.coords(r, i));
            for (int r = 0; r < dim; ++r) os << ',' << format_full(s.v.coords(r, i));
            os << "\n";
        }
}

Trajectory read_traj_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw UsageError("read_traj_csv: empty file");
    const auto head = split_csv(line);
    if (head.size() < 4 || head[0] != "t" || head[1] != "body" || head.size() % 2 != 0)
        throw UsageError("read_traj_csv: bad header");
    const int dim = (static_cast<int>(head.size()) - 2) / 2;

    Trajectory traj;
    std::vector<Vec> xs, vs;
    double cur_t = 0.0;
    auto flush = [&]() {
        if (xs.empty()) return;
        Mat x(dim, static_cast<int>(xs.size())), v(dim, static_cast<int>(vs.size()));
        for (std::size_t i = 0; i < xs.size(); ++i) {
            x.col(static_cast<int>(i)) = xs[i];
            v.col(static_cast<int>(i)) = vs[i];
        }
        traj.samples.push_back({cur_t, Configuration(std::move(x)), Configuration(std::move(v))});
        xs.clear();
        vs.clear();
    };
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (static_cast<int>(cells.size()) != 2 * dim + 2)
            throw UsageError("read_traj_csv: wrong column count");
        const double t = parse_double(cells[0], "read_traj_csv");
        const int body = static_cast<int>(parse_double(cells[1], "read_traj_csv"));
        if (body == 0) flush();
        if (body != static_cast<int>(xs.size()))
            throw UsageError("read_traj_csv: body indices out of order");
        cur_t = t;
        Vec x(dim), v(dim);
        for (int r = 0; r < dim; ++r) {
            x[r] = parse_double(cells[static_cast<std::size_t>(2 + r)], "read_traj_csv");
            v[r] = parse_double(cells[static_cast<std::size_t>(2 + dim + r)], "read_traj_csv");
        }
        xs.push_back(std::move(x));
        vs.push_back(std::move(v));
    }
    flush();
    if (traj.samples.size() < 2) throw UsageError("read_traj_csv: need at least two samples");
    return traj;
}

// ----------------------------------------------------------- spec plumbing

namespace {

class SpecError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

const char* const kCommands[] = {"minimize", "flow",          "classify",
                                 "fit-bounds", "verify-bounds", "sweep"};

const json& need(const json& j, const char* key, const std::string& ctx) {
    if (!j.is_object() || !j.contains(key))
        throw SpecError(ctx + ": missing key '" + key + "'");
    return j.at(key);
}

double need_num(const json& j, const char* key, const std::string& ctx) {
    const json& v = need(j, key, ctx);
    if (!v.is_number()) throw SpecError(ctx + ": '" + key + "' must be a number");
    return v.get<double>();
}

double opt_num(const json& j, const char* key, double fallback, const std::string& ctx) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number()) throw SpecError(ctx + ": '" + key + "' must be a number");
    return v.get<double>();
}

int opt_int(const json& j, const char* key, int fallback, const std::string& ctx) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_integer()) throw SpecError(ctx + ": '" + key + "' must be an integer");
    return v.get<int>();
}

MassSystem parse_system(const json& spec) {
    const json& sys = need(spec, "system", "spec");
    const json& masses_j = need(sys, "masses", "system");
    if (!masses_j.is_array() || masses_j.empty())
        throw SpecError("system: 'masses' must be a non-empty array");
    std::vector<double> masses;
    for (const json& m : masses_j) {
        if (!m.is_number() || !(m.get<double>() > 0.0))
            throw SpecError("system: masses must be positive numbers");
        masses.push_back(m.get<double>());
    }
    const int dim = opt_int(sys, "dim", 2, "system");
    const double G = opt_num(sys, "G", 1.0, "system");
    try {
        return MassSystem(std::move(masses), dim, G);
    } catch (const UsageError& e) {
        throw SpecError(std::string("system: ") + e.what());
    }
}

Configuration parse_config(const json& arr, const MassSystem& sys, const std::string& ctx) {
    if (!arr.is_array() || static_cast<int>(arr.size()) != sys.n_bodies())
        throw SpecError(ctx + ": expected one coordinate array per body");
    Mat c(sys.dim(), sys.n_bodies());
    for (int i = 0; i < sys.n_bodies(); ++i) {
        const json& row = arr.at(static_cast<std::size_t>(i));
        if (!row.is_array() || static_cast<int>(row.size()) != sys.dim())
            throw SpecError(ctx + ": body " + std::to_string(i) + " needs " +
                            std::to_string(sys.dim()) + " coordinates");
        for (int r = 0; r < sys.dim(); ++r) {
            const json& v = row.at(static_cast<std::size_t>(r));
            if (!v.is_number()) throw SpecError(ctx + ": coordinates must be numbers");
            c(r, i) = v.get<double>();
        }
    }
    return Configuration(std::move(c));
}

ClusterPartition parse_partition(const json& arr, int n_bodies, const std::string& ctx) {
    if (!arr.is_array() || arr.empty())
        throw SpecError(ctx + ": partition must be a non-empty array of blocks");
    std::vector<std::vector<int>> blocks;
    for (const json& blk : arr) {
        if (!blk.is_array()) throw SpecError(ctx + ": each partition block must be an array");
        std::vector<int> b;
        for (const json& v : blk) {
            if (!v.is_number_integer()) throw SpecError(ctx + ": body indices must be integers");
            b.push_back(v.get<int>());
        }
        blocks.push_back(std::move(b));
    }
    try {
        return ClusterPartition(std::move(blocks), n_bodies);
    } catch (const UsageError& e) {
        throw SpecError(ctx + ": " + e.what());
    }
}

SolveOptions parse_options(const json& spec, std::uint64_t seed,
                           const std::optional<int>& segments_override) {
    SolveOptions opts;
    if (spec.contains("options")) {
        const json& o = spec.at("options");
        opts.segments = opt_int(o, "segments", opts.segments, "options");
        opts.grad_tol = opt_num(o, "grad_tol", opts.grad_tol, "options");
        opts.max_iters = opt_int(o, "max_iters", opts.max_iters, "options");
        opts.collision_floor = opt_num(o, "collision_floor", opts.collision_floor, "options");
        opts.tau_rel_tol = opt_num(o, "tau_rel_tol", opts.tau_rel_tol, "options");
    }
    if (segments_override) opts.segments = *segments_override;
    opts.seed = seed;
    try {
        opts.validate();
    } catch (const UsageError& e) {
        throw SpecError(std::string("options: ") + e.what());
    }
    return opts;
}

struct Summary {
    std::vector<std::pair<std::string, std::string>> rows;

    void add(const std::string& k, const std::string& v) { rows.emplace_back(k, v); }
    void add(const std::string& k, double v) { add(k, format_full(v)); }
    void add(const std::string& k, int v) { add(k, std::to_string(v)); }
    void add(const std::string& k, long v) { add(k, std::to_string(v)); }
    void add(const std::string& k, std::uint64_t v) { add(k, std::to_string(v)); }
    void add_bool(const std::string& k, bool v) { add(k, std::string(v ? "1" : "0")); }

    std::string text() const {
        std::string out;
        for (const auto& [k, v] : rows) {
            out += k;
            out += '=';
            out += v;
            out += '\n';
        }
        return out;
    }
};

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + p.string());
    f << content;
    f.flush();
    if (!f.good()) throw IoError("write failed: " + p.string());
}

std::string config_row(const Mat& m, int col) {
    std::string out;
    for (int r = 0; r < m.rows(); ++r) {
        if (r) out += ',';
        out += format_full(m(r, col));
    }
    return out;
}

// ------------------------------------------------------------- commands

int run_minimize(const MassSystem& sys, const json& payload, const SolveOptions& opts,
                 const fs::path& out_dir, Summary& summary) {
    const double h = need_num(payload, "h", "minimize");
    const Configuration x = parse_config(need(payload, "start", "minimize"), sys, "minimize.start");
    const Configuration x_prime =
        parse_config(need(payload, "end", "minimize"), sys, "minimize.end");

    MinimizeResult res;
    std::string mode;
    try {
        if (payload.contains("tau")) {
            const double tau = need_num(payload, "tau", "minimize");
            mode = "fixed";
            res = minimize_fixed_time(sys, x, x_prime, tau, h, opts);
        } else {
            mode = "free";
            res = minimize_free_time(sys, x, x_prime, h, opts);
        }
    } catch (const UsageError& e) {
        throw SpecError(std::string("minimize: ") + e.what());
    }

    summary.add("mode", mode);
    summary.add("h", h);
    summary.add("segments", opts.segments);
    summary.add("value", res.value);
    summary.add("tau", res.tau);
    summary.add("grad_norm", res.grad_norm);
    summary.add("iterations", res.iterations);
    summary.add_bool("converged", res.converged);
    summary.add("interior_min_distance", res.interior_min_distance);
    summary.add_bool("trivial_endpoint", res.trivial_endpoint);
    if (!res.diagnostic.empty()) summary.add("diagnostic", res.diagnostic);
    summary.add("tau_probes", static_cast<int>(res.tau_trace.size()));

    if (!res.path.nodes.empty()) {
        std::ostringstream csv;
        write_path_csv(csv, res.path);
        write_file(out_dir / "path.csv", csv.str());
        summary.add("path_csv", std::string("path.csv"));
    }
    return res.converged ? kExitOk : kExitNotConverged;
}

Trajectory flow_trajectory(const MassSystem& sys, const json& payload, const fs::path& spec_dir,
                           const std::string& ctx) {
    const double horizon = need_num(payload, "horizon", ctx);
    const double tol = opt_num(payload, "tol", 1e-9, ctx);
    const int samples = opt_int(payload, "samples", 512, ctx);

    Configuration x0, v0;
    if (payload.contains("path_csv")) {
        const std::string rel = need(payload, "path_csv", ctx).get<std::string>();
        const fs::path file = spec_dir / rel;
        if (!fs::exists(file)) throw SpecError(ctx + ": referenced file not found: " + file.string());
        std::ifstream in(file, std::ios::binary);
        DiscretePath path;
        try {
            path = read_path_csv(in);
        } catch (const UsageError& e) {
            throw SpecError(ctx + ": " + e.what());
        }
        x0 = path.nodes.front();
        v0 = initial_velocity(path);
    } else {
        x0 = parse_config(need(payload, "start", ctx), sys, ctx + ".start");
        v0 = parse_config(need(payload, "velocity", ctx), sys, ctx + ".velocity");
    }
    try {
        return integrate(sys, x0, v0, horizon, tol, samples);
    } catch (const UsageError& e) {
        throw SpecError(ctx + ": " + e.what());
    }
}

void add_flow_summary(Summary& summary, const Trajectory& traj) {
    summary.add("samples", static_cast<int>(traj.samples.size()));
    summary.add("stop_time", traj.stats.stop_time);
    summary.add("energy_drift", traj.stats.energy_drift);
    summary.add("accepted_steps", traj.stats.accepted_steps);
    summary.add("rejected_steps", traj.stats.rejected_steps);
    summary.add_bool("close_encounter", traj.stats.close_encounter);
    if (!traj.stats.diagnostic.empty()) summary.add("diagnostic", traj.stats.diagnostic);
}

int run_flow(const MassSystem& sys, const json& payload, const fs::path& spec_dir,
             const fs::path& out_dir, Summary& summary) {
    const Trajectory traj = flow_trajectory(sys, payload, spec_dir, "flow");
    add_flow_summary(summary, traj);
    std::ostringstream csv;
    write_traj_csv(csv, traj);
    write_file(out_dir / "traj.csv", csv.str());
    summary.add("traj_csv", std::string("traj.csv"));
    return kExitOk;
}

int run_classify(const MassSystem& sys, const json& payload, const fs::path& spec_dir,
                 const fs::path& out_dir, Summary& summary) {
    Trajectory traj;
    bool integrated = false;
    if (payload.contains("traj_csv")) {
        const std::string rel = need(payload, "traj_csv", "classify").get<std::string>();
        const fs::path file = spec_dir / rel;
        if (!fs::exists(file))
            throw SpecError("classify: referenced file not found: " + file.string());
        std::ifstream in(file, std::ios::binary);
        try {
            traj = read_traj_csv(in);
        } catch (const UsageError& e) {
            throw SpecError(std::string("classify: ") + e.what());
        }
    } else {
        traj = flow_trajectory(sys, payload, spec_dir, "classify");
        integrated = true;
    }

    AsymptoticsReport rep;
    try {
        rep = classify(sys, traj);
    } catch (const UsageError& e) {
        throw SpecError(std::string("classify: ") + e.what());
    }

    if (integrated) {
        add_flow_summary(summary, traj);
        std::ostringstream csv;
        write_traj_csv(csv, traj);
        write_file(out_dir / "traj.csv", csv.str());
        summary.add("traj_csv", std::string("traj.csv"));
    }

    for (const PairExponent& p : rep.exponents.pairs) {
        const std::string tag = std::to_string(p.i) + "_" + std::to_string(p.j);
        if (p.determinate) {
            summary.add("exponent_" + tag, p.exponent);
            summary.add("exponent_stderr_" + tag, p.std_error);
        } else {
            summary.add("exponent_" + tag, std::string("indeterminate"));
        }
    }
    summary.add("partition", rep.partition.partition.to_string());
    summary.add_bool("partition_inconsistent", rep.partition.inconsistent);
    summary.add("excluded_pairs", static_cast<int>(rep.partition.excluded.size()));
    summary.add("superhyperbolic", std::string(to_string(rep.superhyperbolic)));
    summary.add("expansive", std::string(to_string(rep.expansive)));
    for (int i = 0; i < rep.drift.cols(); ++i) {
        summary.add("drift_" + std::to_string(i), config_row(rep.drift, i));
        summary.add("drift_residual_" + std::to_string(i),
                    rep.drift_residuals[static_cast<std::size_t>(i)]);
    }
    summary.add_bool("drift_residual_small", rep.drift_residual_small);
    summary.add_bool("within_class_drift_consistent", rep.within_class_drift_consistent);
    for (int k = 0; k < rep.partition.partition.n_blocks(); ++k) {
        if (rep.cluster_potential_determinate[static_cast<std::size_t>(k)])
            summary.add("cluster_potential_exponent_" + std::to_string(k),
                        rep.cluster_potential_exponents[static_cast<std::size_t>(k)]);
        else
            summary.add("cluster_potential_exponent_" + std::to_string(k),
                        std::string("indeterminate"));
    }
    if (!rep.notes.empty()) summary.add("notes", rep.notes);
    return kExitOk;
}

int run_fit_bounds(const MassSystem& sys, const json& payload, const SolveOptions& opts,
                   std::uint64_t seed, Summary& summary) {
    FitSampleSpec fit;
    fit.count = opt_int(payload, "count", 100, "fit-bounds");
    fit.radius_min = need_num(payload, "radius_min", "fit-bounds");
    fit.radius_max = need_num(payload, "radius_max", "fit-bounds");
    fit.tau_min = need_num(payload, "tau_min", "fit-bounds");
    fit.tau_max = need_num(payload, "tau_max", "fit-bounds");
    fit.segments = opt_int(payload, "segments", opts.segments, "fit-bounds");
    fit.seed = seed;
    try {
        fit.validate();
    } catch (const UsageError& e) {
        throw SpecError(std::string("fit-bounds: ") + e.what());
    }

    try {
        const BoundConstants c = fit_phi_constants(sys, fit);
        summary.add("alpha", c.alpha);
        summary.add("beta", c.beta);
        summary.add("alpha1", c.alpha1);
        summary.add("beta1", c.beta1);
        summary.add("fit_samples", c.provenance.sample_count);
        summary.add("fit_dropped", c.provenance.dropped);
        summary.add("fit_held_out", c.provenance.held_out_count);
        summary.add("fit_seed", c.provenance.seed);
        summary.add("fit_radius_min", c.provenance.radius_min);
        summary.add("fit_radius_max", c.provenance.radius_max);
        summary.add("fit_tau_min", c.provenance.tau_min);
        summary.add("fit_tau_max", c.provenance.tau_max);
        std::string masses;
        for (std::size_t i = 0; i < c.provenance.masses.size(); ++i) {
            if (i) masses += ',';
            masses += format_full(c.provenance.masses[i]);
        }
        summary.add("fit_masses", masses);
        return kExitOk;
    } catch (const FitRejected& e) {
        summary.add_bool("fit_rejected", true);
        summary.add("diagnostic", std::string(e.what()));
        return kExitNotConverged;
    }
}

int run_verify_bounds(const MassSystem& sys, const json& payload, const SolveOptions& opts,
                      std::uint64_t seed, Summary& summary) {
    const json& cj = need(payload, "constants", "verify-bounds");
    BoundConstants c;
    c.alpha = need_num(cj, "alpha", "verify-bounds.constants");
    c.beta = need_num(cj, "beta", "verify-bounds.constants");
    c.alpha1 = opt_num(cj, "alpha1", 1.0, "verify-bounds.constants");
    c.beta1 = opt_num(cj, "beta1", 1.0, "verify-bounds.constants");
    try {
        c.validate();
    } catch (const UsageError& e) {
        throw SpecError(std::string("verify-bounds: ") + e.what());
    }
    const ClusterPartition part =
        parse_partition(need(payload, "partition", "verify-bounds"), sys.n_bodies(),
                        "verify-bounds");
    const int count = opt_int(payload, "count", 20, "verify-bounds");
    const double radius_min = need_num(payload, "radius_min", "verify-bounds");
    const double radius_max = need_num(payload, "radius_max", "verify-bounds");
    if (!(radius_min > 0.0) || !(radius_max >= radius_min))
        throw SpecError("verify-bounds: need 0 < radius_min <= radius_max");
    std::vector<double> h_values;
    if (payload.contains("h_values")) {
        for (const json& v : payload.at("h_values")) {
            if (!v.is_number() || !(v.get<double>() > 0.0))
                throw SpecError("verify-bounds: h_values must be positive numbers");
            h_values.push_back(v.get<double>());
        }
    }
    if (h_values.empty()) h_values.push_back(1.0);
    const int r_grid = opt_int(payload, "r_grid", 5, "verify-bounds");

    int checked = 0, skipped = 0, violations = 0;
    for (int s = 0; s < count; ++s) {
        std::mt19937_64 rng(splitmix64(seed + 0x7e57ull) + static_cast<std::uint64_t>(s));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);
        const double r_s = radius_min * std::pow(radius_max / radius_min, unit(rng));
        auto draw = [&]() {
            for (int attempt = 0; attempt < 256; ++attempt) {
                Mat m(sys.dim(), sys.n_bodies());
                for (int i = 0; i < sys.n_bodies(); ++i)
                    for (int r = 0; r < sys.dim(); ++r) m(r, i) = gauss(rng);
                const double norm = mass_norm(sys, m);
                if (norm == 0.0) continue;
                m *= r_s / norm;
                Configuration x(m);
                if (min_pair_distance(x) > 0.02 * r_s / sys.n_bodies()) return x;
            }
            throw SpecError("verify-bounds: failed to draw collision-free sample");
        };
        const Configuration x = draw(), x_prime = draw();
        const double h = h_values[static_cast<std::size_t>(s) % h_values.size()];

        SolveOptions inner = opts;
        inner.seed = splitmix64(seed + static_cast<std::uint64_t>(s));
        NoInteractionResult res;
        try {
            res = phi_no_interaction(sys, x, x_prime, part, h, std::nullopt, inner);
        } catch (const UsageError&) {
            ++skipped;
            continue;
        }
        if (!res.converged) {
            ++skipped;
            continue;
        }
        const double rz = r_z(sys, x, x_prime, part);
        bool ok = true;
        for (int g = 1; g <= r_grid; ++g) {
            const double R = rz + (10.0 * rz + 1.0 - rz) * g / r_grid;
            if (!(res.value <= lemma1_rhs(sys, h, c, x, x_prime, part, R))) ok = false;
        }
        ++checked;
        if (!ok) ++violations;
    }
    summary.add("checked", checked);
    summary.add("skipped", skipped);
    summary.add("violations", violations);
    summary.add_bool("ok", violations == 0 && checked > 0);
    return (violations == 0 && checked > 0) ? kExitOk : kExitNotConverged;
}

int dispatch(const json& spec, const std::string& command, const std::string& spec_sha,
             const fs::path& spec_dir, const fs::path& out_dir, std::uint64_t seed,
             const std::optional<int>& segments_override, std::ostream* log, bool quiet);

int run_sweep(const json& spec, const json& payload, const std::string& spec_sha,
              const fs::path& spec_dir, const fs::path& out_dir, std::uint64_t seed,
              const std::optional<int>& segments_override, std::ostream* log, bool quiet,
              Summary& summary) {
    (void)spec;
    const json& exps = need(payload, "experiments", "sweep");
    if (!exps.is_array() || exps.empty())
        throw SpecError("sweep: 'experiments' must be a non-empty array");

    // pre-validate instance payload shape (exactly one non-sweep payload each)
    std::vector<std::string> inst_commands;
    for (std::size_t i = 0; i < exps.size(); ++i) {
        const json& item = exps.at(i);
        std::string found;
        int n_found = 0;
        for (const char* cmd : kCommands) {
            if (item.is_object() && item.contains(cmd)) {
                found = cmd;
                ++n_found;
            }
        }
        if (n_found != 1)
            throw SpecError("sweep: experiment " + std::to_string(i) +
                            " must contain exactly one command payload");
        if (found == "sweep")
            throw SpecError("sweep: experiments cannot be nested sweeps");
        inst_commands.push_back(found);
    }

    std::vector<int> codes(exps.size(), 0);
    std::atomic<std::size_t> next{0};
    const unsigned n_threads =
        std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                        static_cast<unsigned>(exps.size())));
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= exps.size()) return;
            const fs::path inst_dir = out_dir / ("instance_" + std::to_string(i));
            const std::uint64_t inst_seed = splitmix64(seed + i);
            int rc;
            try {
                rc = dispatch(exps.at(i), inst_commands[i], spec_sha, spec_dir, inst_dir,
                              inst_seed, segments_override, nullptr, true);
            } catch (...) {
                rc = kExitSpecError;
            }
            codes[i] = rc;
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    int worst = kExitOk;
    for (std::size_t i = 0; i < exps.size(); ++i) {
        summary.add("instance_" + std::to_string(i) + "_command", inst_commands[i]);
        summary.add("instance_" + std::to_string(i) + "_exit", codes[i]);
        worst = std::max(worst, codes[i]);
    }
    summary.add("instances", static_cast<int>(exps.size()));
    if (log && !quiet) *log << "sweep: " << exps.size() << " instances\n";
    return worst;
}

int dispatch(const json& spec, const std::string& command, const std::string& spec_sha,
             const fs::path& spec_dir, const fs::path& out_dir, std::uint64_t seed,
             const std::optional<int>& segments_override, std::ostream* log, bool quiet) {
    // exactly one command payload, and it must match the invoked command
    int n_found = 0;
    for (const char* cmd : kCommands)
        if (spec.is_object() && spec.contains(cmd)) ++n_found;
    if (n_found != 1)
        throw SpecError("spec: expected exactly one command payload, found " +
                        std::to_string(n_found));
    if (!spec.contains(command))
        throw SpecError("spec: payload does not match command '" + command + "'");
    const json& payload = spec.at(command);
    if (!payload.is_object()) throw SpecError("spec: payload '" + command + "' must be an object");

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory: " + out_dir.string());

    Summary summary;
    summary.add("command", command);
    summary.add("spec_sha256", spec_sha);
    summary.add("library_version", std::string(kLibraryVersion));
    summary.add("seed", seed);

    int rc = kExitOk;
    if (command == "sweep") {
        rc = run_sweep(spec, payload, spec_sha, spec_dir, out_dir, seed, segments_override, log,
                       quiet, summary);
    } else {
        const MassSystem sys = parse_system(spec);
        const SolveOptions opts = parse_options(spec, seed, segments_override);
        if (command == "minimize")
            rc = run_minimize(sys, payload, opts, out_dir, summary);
        else if (command == "flow")
            rc = run_flow(sys, payload, spec_dir, out_dir, summary);
        else if (command == "classify")
            rc = run_classify(sys, payload, spec_dir, out_dir, summary);
        else if (command == "fit-bounds")
            rc = run_fit_bounds(sys, payload, opts, seed, summary);
        else  // verify-bounds
            rc = run_verify_bounds(sys, payload, opts, seed, summary);
    }

    summary.add("exit_code", rc);
    write_file(out_dir / "summary.txt", summary.text());
    if (log && !quiet) *log << summary.text();
    return rc;
}

}  // namespace

int run_experiment(const std::string& command, const std::string& spec_path,
                   const CliOverrides& overrides, std::ostream* log) {
    const bool known =
        std::any_of(std::begin(kCommands), std::end(kCommands),
                    [&](const char* c) { return command == c; });
    if (!known) {
        if (log) *log << "error: unknown command '" << command << "'\n";
        return kExitSpecError;
    }

    std::string raw;
    {
        std::ifstream f(spec_path, std::ios::binary);
        if (!f) {
            if (log) *log << "error: cannot open spec file: " << spec_path << "\n";
            return kExitSpecError;
        }
        std::ostringstream ss;
        ss << f.rdbuf();
        raw = ss.str();
    }
    const std::string spec_sha = sha256_hex(raw);

    json spec;
    try {
        spec = json::parse(raw);
    } catch (const json::parse_error& e) {
        // anchor the message at the line containing the offending byte
        std::size_t line = 1;
        const std::size_t upto = std::min<std::size_t>(e.byte, raw.size());
        for (std::size_t i = 0; i < upto; ++i)
            if (raw[i] == '\n') ++line;
        if (log)
            *log << "error: " << spec_path << ":" << line << ": " << e.what() << "\n";
        return kExitSpecError;
    }

    std::uint64_t seed = 0;
    if (overrides.seed) {
        seed = *overrides.seed;
    } else if (spec.is_object() && spec.contains("seed")) {
        const json& sj = spec.at("seed");
        if (!sj.is_number_unsigned()) {
            if (log)
                *log << "error: " << spec_path << ": 'seed' must be a non-negative integer\n";
            return kExitSpecError;
        }
        seed = sj.get<std::uint64_t>();
    }
    std::string out_dir = ".";
    if (overrides.out_dir)
        out_dir = *overrides.out_dir;
    else if (spec.is_object() && spec.contains("out") && spec.at("out").is_string())
        out_dir = spec.at("out").get<std::string>();

    const fs::path spec_dir = fs::path(spec_path).parent_path();
    try {
        return dispatch(spec, command, spec_sha, spec_dir, fs::path(out_dir), seed,
                        overrides.segments, log, overrides.quiet);
    } catch (const SpecError& e) {
        if (log) *log << "error: " << spec_path << ": " << e.what() << "\n";
        return kExitSpecError;
    } catch (const IoError& e) {
        if (log) *log << "error: " << e.what() << "\n";
        return kExitIoError;
    } catch (const UsageError& e) {
        if (log) *log << "error: " << spec_path << ": " << e.what() << "\n";
        return kExitSpecError;
    }
}

}  // namespace nbody
