// tcpd: multiple change point detection in tensor sequences.
// Subcommands: detect | simulate | bench | plot.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "tcpd/confidence.hpp"
#include "tcpd/detector.hpp"
#include "tcpd/harness.hpp"
#include "tcpd/io.hpp"
#include "tcpd/simgen.hpp"
#include "tcpd/svg.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

tcpd::DetectorConfig load_config_opt(const std::string& flag_path,
                                     std::optional<std::uint64_t> seed_flag) {
    std::string path = flag_path;
    if (path.empty()) {
        if (const char* env = std::getenv("TCPD_CONFIG")) path = env;
    }
    tcpd::DetectorConfig cfg;
    if (!path.empty()) cfg = tcpd::load_config(path);
    if (seed_flag) cfg.seed = *seed_flag;
    return cfg;
}

void print_detection(const tcpd::Detection& det, double rate) {
    std::cout << "mode: " << (det.mode == tcpd::DetectMode::sfd ? "sfd" : "msfd") << "  alpha: " << det.alpha
              << "  tau: " << det.tau << "\n";
    std::cout << "K_hat: " << det.k_hat << "\n";
    std::cout << "locations:";
    for (long long z : det.locations) {
        std::cout << " " << z;
        if (rate > 0) std::cout << " (" << static_cast<double>(z) / rate << "s)";
    }
    std::cout << "\n";
    std::cout << "intervals:\n";
    for (const auto& iv : det.intervals) {
        std::cout << "  M=" << iv.M << " m=" << iv.m;
        if (iv.edge) std::cout << " [edge]";
        if (iv.overlaps_prev) std::cout << " [overlaps-previous]";
        if (iv.pruned) {
            std::cout << " pruned: " << iv.reason;
        } else if (iv.location) {
            std::cout << " r=" << *iv.r << " z_hat=" << *iv.location;
        }
        std::cout << "\n";
    }
}

int cmd_detect(const std::string& input, const std::string& config_path, const std::string& json_out,
               bool with_ci, double rate, int threads, std::optional<std::uint64_t> seed_flag) {
    tcpd::DetectorConfig cfg = load_config_opt(config_path, seed_flag);
    cfg.threads = threads;
    const tcpd::TensorSeq data = tcpd::read_tensorseq(input);
    const tcpd::Detection det = tcpd::detect(data, cfg);
    print_detection(det, rate);

    nlohmann::json j = tcpd::detection_to_json(det);
    if (with_ci) {
        j["ci"] = nlohmann::json::array();
        std::optional<std::pair<double, double>> unit;
        if (det.k_hat > 1)
            unit = tcpd::brownian_argmax_quantiles(1.0, cfg.ci_level, cfg.ci_paths, tcpd::GridSpec{},
                                                   cfg.seed, threads);
        for (int k = 1; k <= det.k_hat; ++k) {
            const tcpd::CIResult ci =
                tcpd::ci_for_changepoint(data, det, k, cfg.ci_level, cfg.ci_paths, cfg.seed, threads,
                                         tcpd::GridSpec{}, unit ? &*unit : nullptr);
            j["ci"].push_back(tcpd::ci_to_json(ci));
            std::cout << "CI[" << k << "]";
            if (ci.available)
                std::cout << " level " << ci.level << ": [" << ci.lower << ", " << ci.upper << "]"
                          << " center " << ci.center;
            else
                std::cout << " unavailable";
            if (!ci.note.empty()) std::cout << "  (" << ci.note << ")";
            std::cout << "\n";
        }
    }
    if (!json_out.empty()) {
        std::ofstream os(json_out);
        if (!os) throw std::runtime_error("cannot open for writing: " + json_out);
        os << j.dump(2) << "\n";
    }
    return 0;
}

int cmd_simulate(const std::string& spec_path, const std::string& out_path) {
    const tcpd::SimSpec spec = tcpd::load_simspec(spec_path);
    for (const std::string& w : spec.validate()) std::cerr << "warning: " << w << "\n";
    const tcpd::TensorSeq data = tcpd::gen_custom(spec);
    tcpd::write_tcpd(out_path, data);

    // sidecar: the input spec plus the resolved ground truth
    std::ifstream src(spec_path);
    std::ofstream side(out_path + ".spec");
    if (!side) throw std::runtime_error("cannot open for writing: " + out_path + ".spec");
    side << src.rdbuf();
    side << "\n# resolved\n# label = " << spec.label << "\n# n = " << spec.n << "\n# changepoints =";
    for (long long z : spec.changepoints) side << " " << z;
    side << "\n";
    std::cout << "wrote " << out_path << " (n=" << data.n() << ", p=" << data.p() << ") and " << out_path
              << ".spec\n";
    return 0;
}

int cmd_bench(const std::string& spec_path, const std::string& config_path, long long reps, bool paper,
              const std::string& jsonl_out, int threads, std::optional<std::uint64_t> seed_flag) {
    tcpd::SimSpec spec = tcpd::load_simspec(spec_path);
    if (seed_flag) spec.seed = *seed_flag;
    tcpd::DetectorConfig cfg = load_config_opt(config_path, seed_flag);
    cfg.threads = 1;  // parallelism at the replication level
    if (paper) reps = 200;
    const tcpd::RunReport report = tcpd::run_experiment(spec, cfg, reps, threads);
    std::cout << tcpd::report_to_table(report);
    if (!jsonl_out.empty()) {
        std::ofstream os(jsonl_out);
        if (!os) throw std::runtime_error("cannot open for writing: " + jsonl_out);
        for (const auto& rec : report.per_rep) {
            nlohmann::json e;
            e["schema"] = "tcpd.rep/1";
            e["index"] = rec.index;
            e["seed"] = rec.seed;
            e["k_hat"] = rec.k_hat;
            e["locations"] = rec.locations;
            e["correct"] = rec.correct;
            e["failed"] = rec.failed;
            e["seconds"] = rec.seconds;
            os << e.dump() << "\n";
        }
        os << tcpd::report_to_json(report, true).dump() << "\n";
    }
    return 0;
}

int cmd_plot(const std::string& input, const std::string& config_path, const std::string& out_path,
             int threads, std::optional<std::uint64_t> seed_flag) {
    tcpd::DetectorConfig cfg = load_config_opt(config_path, seed_flag);
    cfg.threads = threads;
    const tcpd::TensorSeq data = tcpd::read_tensorseq(input);
    const tcpd::Detection det = tcpd::detect(data, cfg);
    tcpd::write_detection_svg(out_path, det);
    std::cout << "wrote " << out_path << " (K_hat=" << det.k_hat << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiple change point detection in tensor sequences"};
    app.require_subcommand(1);
    app.fallthrough();  // --threads / --seed may follow the subcommand
    int threads = 1;
    app.add_option("--threads", threads, "Worker thread cap")->capture_default_str();
    std::optional<std::uint64_t> seed_flag;
    app.add_option("--seed", seed_flag, "Override the config seed");

    std::string input, config_path, json_out, out_path, spec_path;
    double rate = 0.0;
    bool with_ci = false;
    long long reps = 50;
    bool paper = false;

    auto* detect = app.add_subcommand("detect", "Detect change points in a tensor-sequence file");
    detect->add_option("--input", input, "TCPD or CSV input file")->required();
    detect->add_option("--config", config_path, "Config file (or TCPD_CONFIG env var)");
    detect->add_option("--json", json_out, "Write machine-readable report here");
    detect->add_option("--rate", rate, "Samples per second; prints locations in seconds too");
    detect->add_flag("--ci", with_ci, "Also compute confidence intervals");

    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic tensor sequence");
    simulate->add_option("--spec", spec_path, "Simulation spec file")->required();
    simulate->add_option("--out", out_path, "Output TCPD file")->required();

    auto* bench = app.add_subcommand("bench", "Replicated generate+detect benchmark");
    bench->add_option("--spec", spec_path, "Simulation spec file")->required();
    bench->add_option("--config", config_path, "Config file (or TCPD_CONFIG env var)");
    bench->add_option("--reps", reps, "Replications")->capture_default_str();
    bench->add_flag("--paper", paper, "Full-scale run (200 replications)");
    bench->add_option("--json", json_out, "Write line-delimited per-rep records here");

    auto* plot = app.add_subcommand("plot", "Detect and render the ratio curve as SVG");
    plot->add_option("--input", input, "TCPD or CSV input file")->required();
    plot->add_option("--config", config_path, "Config file (or TCPD_CONFIG env var)");
    plot->add_option("--out", out_path, "Output SVG path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(detect)) return cmd_detect(input, config_path, json_out, with_ci, rate, threads, seed_flag);
        if (app.got_subcommand(simulate)) return cmd_simulate(spec_path, out_path);
        if (app.got_subcommand(bench)) return cmd_bench(spec_path, config_path, reps, paper, json_out, threads, seed_flag);
        if (app.got_subcommand(plot)) return cmd_plot(input, config_path, out_path, threads, seed_flag);
    } catch (const tcpd::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const tcpd::SequenceTooShortError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const tcpd::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
