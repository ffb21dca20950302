#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcpd/confidence.hpp"
#include "tcpd/detector.hpp"
#include "tcpd/errors.hpp"
#include "tcpd/harness.hpp"
#include "tcpd/simgen.hpp"
#include "tcpd/tensor.hpp"

namespace tcpd {

// ---------------------------------------------------------------------------
// TCPD binary container: magic "TCPD", u16 version, u16 kappa, kappa x u32
// dims, u64 n, then n*p little-endian float64 values row-major by time.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_bytes(std::ostream& os, const void* ptr, std::size_t len) {
    os.write(static_cast<const char*>(ptr), static_cast<std::streamsize>(len));
}

template <typename T>
inline void put_le(std::ostream& os, T value) {
    unsigned char buf[sizeof(T)];
    std::uint64_t bits;
    if constexpr (sizeof(T) == 8 && std::is_floating_point_v<T>) {
        std::memcpy(&bits, &value, 8);
    } else {
        bits = static_cast<std::uint64_t>(value);
    }
    for (std::size_t b = 0; b < sizeof(T); ++b) buf[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFF);
    put_bytes(os, buf, sizeof(T));
}

template <typename T>
inline T get_le(std::istream& is) {
    unsigned char buf[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw FormatError("TCPD file truncated");
    std::uint64_t bits = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) bits |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
    if constexpr (sizeof(T) == 8 && std::is_floating_point_v<T>) {
        T out;
        std::memcpy(&out, &bits, 8);
        return out;
    } else {
        return static_cast<T>(bits);
    }
}

}  // namespace detail

inline constexpr std::uint16_t kTcpdVersion = 1;

inline void write_tcpd(std::ostream& os, const TensorSeq& seq) {
    os.write("TCPD", 4);
    detail::put_le<std::uint16_t>(os, kTcpdVersion);
    detail::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(seq.shape().order()));
    for (int m = 1; m <= seq.shape().order(); ++m)
        detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(seq.shape().dim(m)));
    detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(seq.n()));
    for (double v : seq.data()) detail::put_le<double>(os, v);
    if (!os) throw std::runtime_error("TCPD write failed");
}

inline void write_tcpd(const std::string& path, const TensorSeq& seq) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    write_tcpd(os, seq);
}

inline TensorSeq read_tcpd(std::istream& is, const std::string& name = "<stream>") {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "TCPD", 4) != 0)
        throw FormatError(name + ": not a TCPD file");
    const auto version = detail::get_le<std::uint16_t>(is);
    if (version != kTcpdVersion)
        throw FormatError(name + ": unsupported TCPD version " + std::to_string(version));
    const auto kappa = detail::get_le<std::uint16_t>(is);
    if (kappa < 1) throw FormatError(name + ": order must be >= 1");
    std::vector<long long> dims;
    for (int m = 0; m < kappa; ++m) dims.push_back(detail::get_le<std::uint32_t>(is));
    const Shape shape(dims);
    const auto n = static_cast<long long>(detail::get_le<std::uint64_t>(is));
    std::vector<double> data(static_cast<std::size_t>(n * shape.elem_count()));
    for (double& v : data) v = detail::get_le<double>(is);
    is.peek();
    if (!is.eof()) throw FormatError(name + ": payload longer than declared n*p");
    try {
        return TensorSeq(shape, n, std::move(data));
    } catch (const FormatError& e) {
        throw FormatError(name + ": " + e.what());
    }
}

inline TensorSeq read_tcpd(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open: " + path);
    return read_tcpd(is, path);
}

// ---------------------------------------------------------------------------
// CSV ingestion: long layout "t,idx1,...,idxK,value" or wide layout
// "t,v1,...,vp" (order-1 only).
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) {
        while (!cur.empty() && (cur.back() == '\r' || cur.back() == ' ')) cur.pop_back();
        std::size_t b = 0;
        while (b < cur.size() && cur[b] == ' ') ++b;
        out.push_back(cur.substr(b));
    }
    return out;
}

}  // namespace detail

inline TensorSeq read_csv(std::istream& is, const std::string& name = "<stream>") {
    std::string line;
    if (!std::getline(is, line)) throw FormatError(name + ": empty CSV");
    const std::vector<std::string> header = detail::split_csv(line);
    if (header.size() < 2 || header[0] != "t")
        throw FormatError(name + ": CSV header must start with 't'");
    const bool long_layout = header.back() == "value";

    if (long_layout) {
        const int kappa = static_cast<int>(header.size()) - 2;
        if (kappa < 1) throw FormatError(name + ": long CSV needs at least one index column");
        struct Cell {
            long long t;
            std::vector<long long> idx;
            double v;
        };
        std::vector<Cell> cells;
        std::vector<long long> dims(static_cast<std::size_t>(kappa), 0);
        long long n = 0;
        long long line_no = 1;
        while (std::getline(is, line)) {
            ++line_no;
            if (line.empty()) continue;
            const auto f = detail::split_csv(line);
            if (static_cast<int>(f.size()) != kappa + 2)
                throw FormatError(name + ": line " + std::to_string(line_no) + ": wrong column count");
            Cell c;
            try {
                c.t = std::stoll(f[0]);
                for (int m = 0; m < kappa; ++m) {
                    c.idx.push_back(std::stoll(f[static_cast<std::size_t>(m + 1)]));
                    if (c.idx.back() < 1)
                        throw FormatError(name + ": line " + std::to_string(line_no) + ": index < 1");
                    dims[static_cast<std::size_t>(m)] = std::max(dims[static_cast<std::size_t>(m)], c.idx.back());
                }
                c.v = std::stod(f.back());
            } catch (const FormatError&) {
                throw;
            } catch (const std::exception&) {
                throw FormatError(name + ": line " + std::to_string(line_no) + ": parse error");
            }
            if (c.t < 1) throw FormatError(name + ": line " + std::to_string(line_no) + ": t < 1");
            n = std::max(n, c.t);
            cells.push_back(std::move(c));
        }
        const Shape shape(dims);
        const long long p = shape.elem_count();
        std::vector<double> data(static_cast<std::size_t>(n * p), 0.0);
        std::vector<char> seen(static_cast<std::size_t>(n * p), 0);
        for (const Cell& c : cells) {
            const long long flat = flatten_index(c.idx, shape);
            const long long k = (c.t - 1) * p + flat;
            if (seen[static_cast<std::size_t>(k)])
                throw FormatError(name + ": duplicate cell at t=" + std::to_string(c.t));
            seen[static_cast<std::size_t>(k)] = 1;
            data[static_cast<std::size_t>(k)] = c.v;
        }
        for (long long k = 0; k < n * p; ++k)
            if (!seen[static_cast<std::size_t>(k)])
                throw FormatError(name + ": missing cell at t=" + std::to_string(k / p + 1) +
                                  ", flat element " + std::to_string(k % p));
        return TensorSeq(shape, n, std::move(data));
    }

    // wide layout
    const long long p = static_cast<long long>(header.size()) - 1;
    std::vector<double> data;
    long long n = 0;
    long long line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = detail::split_csv(line);
        if (static_cast<long long>(f.size()) != p + 1)
            throw FormatError(name + ": line " + std::to_string(line_no) + ": wrong column count");
        ++n;
        try {
            if (std::stoll(f[0]) != n)
                throw FormatError(name + ": line " + std::to_string(line_no) + ": t must run 1..n in order");
            for (long long j = 1; j <= p; ++j) data.push_back(std::stod(f[static_cast<std::size_t>(j)]));
        } catch (const FormatError&) {
            throw;
        } catch (const std::exception&) {
            throw FormatError(name + ": line " + std::to_string(line_no) + ": parse error");
        }
    }
    if (n == 0) throw FormatError(name + ": CSV has no data rows");
    return TensorSeq(Shape({p}), n, std::move(data));
}

inline TensorSeq read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open: " + path);
    return read_csv(is, path);
}

/// Dispatch on file contents: TCPD magic -> binary, a "t,..." header -> CSV,
/// anything else is rejected.
inline TensorSeq read_tensorseq(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw FormatError("cannot open: " + path);
    char magic[4] = {0, 0, 0, 0};
    probe.read(magic, 4);
    probe.close();
    if (std::memcmp(magic, "TCPD", 4) == 0) return read_tcpd(path);
    if (magic[0] == 't' && magic[1] == ',') return read_csv(path);
    throw FormatError(path + ": not a TCPD file (and no CSV header)");
}

// ---------------------------------------------------------------------------
// Key-value config files. Exactly the documented keys; unknown keys are
// rejected. "alpha = auto" defers to the alpha_n formula.
// ---------------------------------------------------------------------------

namespace detail {

inline std::map<std::string, std::string> parse_kv(std::istream& is, const std::string& name) {
    std::map<std::string, std::string> kv;
    std::string line;
    long long line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = true;
            for (char c : line)
                if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
            if (blank) continue;
            throw ConfigError(name + ": line " + std::to_string(line_no) + ": expected key = value");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(name + ": line " + std::to_string(line_no) + ": empty key");
        if (kv.count(key)) throw ConfigError(name + ": duplicate key '" + key + "'");
        kv[key] = value;
    }
    return kv;
}

inline double kv_double(const std::map<std::string, std::string>& kv, const std::string& key, double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' is not a number");
    }
}

inline long long kv_int(const std::map<std::string, std::string>& kv, const std::string& key, long long fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return std::stoll(it->second);
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' is not an integer");
    }
}

}  // namespace detail

inline DetectorConfig parse_config(std::istream& is, const std::string& name = "<config>") {
    static const std::vector<std::string> known = {"mode", "structural_mode", "alpha", "eps",  "nu",
                                                   "s",    "s1",              "tau",   "ci.level",
                                                   "ci.paths", "seed"};
    const auto kv = detail::parse_kv(is, name);
    for (const auto& [key, value] : kv)
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError(name + ": unknown key '" + key + "'");
    DetectorConfig cfg;
    if (auto it = kv.find("mode"); it != kv.end()) {
        if (it->second == "sfd")
            cfg.mode = DetectMode::sfd;
        else if (it->second == "msfd")
            cfg.mode = DetectMode::msfd;
        else
            throw ConfigError(name + ": mode must be sfd or msfd");
    }
    cfg.structural_mode = static_cast<int>(detail::kv_int(kv, "structural_mode", 0));
    if (auto it = kv.find("alpha"); it != kv.end() && it->second != "auto")
        cfg.alpha = static_cast<int>(detail::kv_int(kv, "alpha", 0));
    if (kv.count("eps")) cfg.eps = detail::kv_double(kv, "eps", 0.0);
    if (kv.count("nu")) cfg.nu = detail::kv_double(kv, "nu", 0.0);
    if (kv.count("s")) cfg.s = detail::kv_double(kv, "s", 0.0);
    if (kv.count("s1")) cfg.s1 = detail::kv_double(kv, "s1", 0.0);
    if (kv.count("tau")) cfg.tau = detail::kv_double(kv, "tau", 0.0);
    cfg.ci_level = detail::kv_double(kv, "ci.level", cfg.ci_level);
    cfg.ci_paths = detail::kv_int(kv, "ci.paths", cfg.ci_paths);
    cfg.seed = static_cast<std::uint64_t>(detail::kv_int(kv, "seed", 1));
    if (!(cfg.ci_level > 0.0 && cfg.ci_level < 1.0)) throw ConfigError(name + ": ci.level must lie in (0,1)");
    return cfg;
}

inline DetectorConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config: " + path);
    return parse_config(is, path);
}

// ---------------------------------------------------------------------------
// Simulation specs in the same key-value format.
// ---------------------------------------------------------------------------

inline SimSpec parse_simspec(std::istream& is, const std::string& name = "<spec>") {
    const auto kv = detail::parse_kv(is, name);
    auto need = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw ConfigError(name + ": missing key '" + key + "'");
        return it->second;
    };
    const std::string preset = need("preset");
    const auto seed = static_cast<std::uint64_t>(detail::kv_int(kv, "seed", 1));
    if (preset == "dense-order1") {
        SimSpec spec = gen_dense_order1(detail::kv_int(kv, "p", 50),
                                        detail::kv_double(kv, "signal", 0.4), seed)
                           .second;
        return spec;
    }
    if (preset == "sparse-order1")
        return make_sparse_order1_spec(detail::kv_int(kv, "p", 50), detail::kv_double(kv, "signal", 0.4),
                                       detail::kv_double(kv, "sparsity", 0.1), seed);
    if (preset == "order2-symmetric" || preset == "order2-asymmetric") {
        const long long p1 = detail::kv_int(kv, "p1", 50);
        const long long p2 = detail::kv_int(kv, "p2", preset == "order2-symmetric" ? p1 : 16 * p1);
        const bool corr = detail::kv_int(kv, "correlated_rows", 0) != 0;
        return gen_order2(p1, p2,
                          preset == "order2-symmetric" ? Order2Design::symmetric : Order2Design::asymmetric,
                          corr, seed)
            .second;
    }
    if (preset == "custom") {
        SimSpec spec;
        // shape = AxBxC
        {
            std::vector<long long> dims;
            std::stringstream ss(need("shape"));
            std::string tok;
            while (std::getline(ss, tok, 'x')) dims.push_back(std::stoll(tok));
            spec.shape = Shape(dims);
        }
        spec.n = detail::kv_int(kv, "n", 1800);
        {
            std::stringstream ss(need("changepoints"));
            std::string tok;
            while (std::getline(ss, tok, ',')) spec.changepoints.push_back(std::stoll(tok));
        }
        const double base = detail::kv_double(kv, "mean.base", 1.0);
        const double jump = detail::kv_double(kv, "mean.jump", 0.4);
        const double sparsity = detail::kv_double(kv, "mean.sparsity", 1.0);
        const long long p = spec.shape.elem_count();
        std::vector<double> hi(static_cast<std::size_t>(p), base);
        const long long changed =
            std::max(1LL, static_cast<long long>(std::floor(sparsity * static_cast<double>(p))));
        for (long long j = 0; j < changed; ++j) hi[static_cast<std::size_t>(j)] = base + jump;
        const std::vector<double> lo(static_cast<std::size_t>(p), base);
        for (std::size_t k = 0; k <= spec.changepoints.size(); ++k)
            spec.seg_means.push_back(k % 2 == 0 ? hi : lo);
        const std::string noise = kv.count("noise") ? kv.at("noise") : "iid";
        if (noise == "iid") {
            spec.noise.kind = NoiseKind::iid_gaussian;
            spec.noise.sigma = detail::kv_double(kv, "sigma", 1.0);
        } else if (noise == "none") {
            spec.noise.kind = NoiseKind::iid_gaussian;
            spec.noise.sigma = 0.0;
        } else if (noise == "ar-rows") {
            spec.noise.kind = NoiseKind::row_correlated;
            spec.noise.row_cov =
                ar_covariance(spec.shape.dim(spec.shape.order()), detail::kv_double(kv, "rho", 0.8));
        } else {
            throw ConfigError(name + ": noise must be iid, none, or ar-rows");
        }
        spec.seed = seed;
        spec.label = "custom";
        spec.validate();
        return spec;
    }
    throw ConfigError(name + ": unknown preset '" + preset + "'");
}

inline SimSpec load_simspec(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open spec: " + path);
    return parse_simspec(is, path);
}

// ---------------------------------------------------------------------------
// Machine-readable reports (versioned schemas).
// ---------------------------------------------------------------------------

inline nlohmann::json detection_to_json(const Detection& det) {
    nlohmann::json j;
    j["schema"] = "tcpd.detect/1";
    j["mode"] = det.mode == DetectMode::sfd ? "sfd" : "msfd";
    j["alpha"] = det.alpha;
    j["tau"] = det.tau;
    j["k_hat"] = det.k_hat;
    j["locations"] = det.locations;
    j["intervals"] = nlohmann::json::array();
    for (const auto& iv : det.intervals) {
        nlohmann::json e;
        e["M"] = iv.M;
        e["m"] = iv.m;
        e["edge"] = iv.edge;
        e["overlaps_prev"] = iv.overlaps_prev;
        e["pruned"] = iv.pruned;
        if (!iv.reason.empty()) e["reason"] = iv.reason;
        if (iv.r) e["r"] = *iv.r;
        if (iv.location) e["location"] = *iv.location;
        j["intervals"].push_back(std::move(e));
    }
    return j;
}

inline nlohmann::json ci_to_json(const CIResult& ci) {
    nlohmann::json j;
    j["k"] = ci.k;
    j["level"] = ci.level;
    j["available"] = ci.available;
    if (ci.available) {
        j["lower"] = ci.lower;
        j["upper"] = ci.upper;
        j["center"] = ci.center;
        j["q_lo"] = ci.q_lo;
        j["q_hi"] = ci.q_hi;
        j["lower_over_alpha"] = ci.lower_norm;
        j["upper_over_alpha"] = ci.upper_norm;
    }
    if (!ci.note.empty()) j["note"] = ci.note;
    return j;
}

/// Deterministic report content: identical across worker counts for the same
/// master seed (wall-clock timings are reported separately).
inline nlohmann::json report_to_json(const RunReport& r, bool include_timings = false) {
    nlohmann::json j;
    j["schema"] = "tcpd.bench/1";
    j["label"] = r.label;
    j["reps"] = r.reps;
    j["K"] = r.K;
    j["truth"] = r.truth;
    j["mean_khat"] = r.mean_khat;
    j["mse"] = r.mse;
    if (!std::isnan(r.cp)) j["cp"] = r.cp;
    j["hist"] = {{"<=-3", r.hist[0]}, {"-2", r.hist[1]}, {"-1", r.hist[2]}, {"0", r.hist[3]},
                 {"1", r.hist[4]},   {"2", r.hist[5]},  {">=3", r.hist[6]}};
    j["failures"] = r.failures;
    j["per_rep"] = nlohmann::json::array();
    for (const auto& rec : r.per_rep) {
        nlohmann::json e;
        e["index"] = rec.index;
        e["seed"] = rec.seed;
        e["k_hat"] = rec.k_hat;
        e["locations"] = rec.locations;
        e["correct"] = rec.correct;
        e["failed"] = rec.failed;
        if (!rec.error.empty()) e["error"] = rec.error;
        if (include_timings) e["seconds"] = rec.seconds;
        j["per_rep"].push_back(std::move(e));
    }
    return j;
}

/// Aligned text table in the style of the benchmark tables.
inline std::string report_to_table(const RunReport& r) {
    std::ostringstream os;
    os << "label: " << r.label << "\n";
    os << "reps: " << r.reps << "  K: " << r.K << "  failures: " << r.failures << "\n";
    char line[256];
    std::snprintf(line, sizeof(line), "%-8s %-8s %-6s  %5s %4s %4s %4s %4s %4s %5s\n", "Mean", "MSE", "CP",
                  "<=-3", "-2", "-1", "0", "1", "2", ">=3");
    os << line;
    std::snprintf(line, sizeof(line), "%-8.3f %-8.3f %-6.3f  %5lld %4lld %4lld %4lld %4lld %4lld %5lld\n",
                  r.mean_khat, r.mse, r.cp, r.hist[0], r.hist[1], r.hist[2], r.hist[3], r.hist[4], r.hist[5],
                  r.hist[6]);
    os << line;
    return os.str();
}

}  // namespace tcpd
