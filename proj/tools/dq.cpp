// dq: batch front-end for diffusion-path quantization experiments.
//
// Subcommands:
//   simulate         write a simulated ensemble (x, w, m, a, phi) to the output dir
//   build-codebooks  build and cache the codebook set for the configured scheme
//   encode           encode an ensemble path-by-path, writing per-path records
//   curve            rate-distortion sweep, writing curve.csv (+ .long.csv)
//   verify           run the acceptance and property suites; exit 1 on failure
//   inspect          dump file headers; --export-path N writes one path as CSV
//
// Exit codes: 0 ok, 1 verification failure, 2 usage/config error, 3 I/O error.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "dq/codec.hpp"
#include "dq/config.hpp"
#include "dq/io.hpp"
#include "dq/lab.hpp"
#include "dq/verify.hpp"

namespace {

constexpr const char* kUsage =
    "usage: dq <simulate|build-codebooks|encode|curve|verify|inspect>\n"
    "          [--config FILE] [--section.key value ...] [--quick] [files...]\n"
    "\n"
    "Config keys use section-qualified names (e.g. --sim.dt 2^-9, --curve.rates\n"
    "2^4..2^12). DQ_CACHE_DIR overrides the codebook cache location.\n";

struct CliArgs {
    std::string subcommand;
    std::string config_file;
    std::vector<std::pair<std::string, std::string>> overrides;
    std::vector<std::string> positional;
    bool quick = false;
    std::size_t export_path = static_cast<std::size_t>(-1);
};

CliArgs parse_args(int argc, char** argv) {
    if (argc < 2) throw dq::ConfigError("missing subcommand");
    CliArgs args;
    args.subcommand = argv[1];
    for (int i = 2; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--quick") {
            args.quick = true;
        } else if (arg == "--config") {
            if (++i >= argc) throw dq::ConfigError("--config needs a file");
            args.config_file = argv[i];
        } else if (arg == "--export-path") {
            if (++i >= argc) throw dq::ConfigError("--export-path needs an index");
            args.export_path = static_cast<std::size_t>(std::stoul(argv[i]));
        } else if (arg.rfind("--", 0) == 0) {
            if (++i >= argc) throw dq::ConfigError(arg + " needs a value");
            args.overrides.emplace_back(arg.substr(2), argv[i]);
        } else {
            args.positional.push_back(arg);
        }
    }
    return args;
}

dq::ExperimentConfig load_config(const CliArgs& args) {
    if (!args.config_file.empty()) return dq::ExperimentConfig::load(args.config_file, args.overrides);
    return dq::ExperimentConfig::from_overrides(args.overrides);
}

std::string cache_file(const dq::ExperimentConfig& cfg, const std::string& name) {
    return cfg.resolved_cache_dir() + "/" + name;
}

int cmd_simulate(const dq::ExperimentConfig& cfg) {
    const auto bundles = dq::simulate_ensemble(cfg.make_spec(), cfg.x0, cfg.dt, cfg.T,
                                               cfg.n_paths, cfg.seed, {1.0, cfg.workers});
    std::filesystem::create_directories(cfg.output_dir);
    auto collect = [&](auto member) {
        std::vector<dq::SampledPath> out;
        out.reserve(bundles.size());
        for (const auto& b : bundles) out.push_back(b.*member);
        return out;
    };
    dq::save_ensemble(cfg.output_dir + "/x.dqpath", collect(&dq::PathBundle::x));
    dq::save_ensemble(cfg.output_dir + "/w.dqpath", collect(&dq::PathBundle::w_driver));
    dq::save_ensemble(cfg.output_dir + "/m.dqpath", collect(&dq::PathBundle::m));
    dq::save_ensemble(cfg.output_dir + "/a.dqpath", collect(&dq::PathBundle::a));
    std::vector<dq::SampledPath> phis;
    for (const auto& b : bundles) phis.push_back(b.phi);
    dq::save_ensemble(cfg.output_dir + "/phi.dqpath", phis);
    std::cout << "wrote " << bundles.size() << " paths to " << cfg.output_dir << "/{x,w,m,a,phi}.dqpath\n";
    return 0;
}

dq::EncodingBudget budget_for(const dq::ExperimentConfig& cfg, double rate) {
    dq::BudgetPolicy policy;
    policy.gamma1 = cfg.gamma1;
    policy.gamma3 = cfg.gamma3;
    policy.slack = cfg.slack;
    dq::EncodingBudget budget =
        cfg.scheme == "lp" ? dq::EncodingBudget::for_lp(rate, cfg.beta, cfg.d, policy)
                           : dq::EncodingBudget::for_sup(rate, cfg.beta, policy);
    if (cfg.n_blocks > 0) budget.n_blocks = cfg.n_blocks;
    return budget;
}

dq::CodebookSet build_set(const dq::ExperimentConfig& cfg, const std::vector<dq::PathBundle>& bundles,
                          const dq::EncodingBudget& budget) {
    dq::CodebookSetOptions opts;
    opts.phi_smoothness = cfg.phi_smoothness;
    opts.phi_eta = cfg.phi_eta;
    opts.hard_cap = cfg.hard_cap;
    opts.samples_per_coord = cfg.samples_per_coord;
    opts.wiener_norm = cfg.scheme == "lp" ? dq::Norm::lq(cfg.q) : dq::Norm::sup();
    opts.p = cfg.p;
    opts.lp_extras = cfg.scheme == "lp";
    opts.seed = cfg.seed;
    return dq::build_codebook_set(bundles, budget, opts);
}

int cmd_build_codebooks(const dq::ExperimentConfig& cfg) {
    if (cfg.rates.empty()) throw dq::ConfigError("build-codebooks needs curve.rates");
    const auto bundles = dq::simulate_ensemble(cfg.make_spec(), cfg.x0, cfg.dt, cfg.T,
                                               cfg.n_paths, cfg.seed, {1.0, cfg.workers});
    const dq::EncodingBudget budget = budget_for(cfg, cfg.rates.back());
    const dq::CodebookSet set = build_set(cfg, bundles, budget);

    std::filesystem::create_directories(cfg.resolved_cache_dir());
    dq::save_codebook(cache_file(cfg, "phi.dqcb"), set.phi_cb);
    dq::save_codebook(cache_file(cfg, "drift.dqcb"), set.drift_cb);
    for (std::size_t i = 0; i < set.wiener_ladder.size(); ++i)
        dq::save_codebook(cache_file(cfg, "wiener_" + std::to_string(i) + ".dqcb"),
                          set.wiener_ladder[i]);
    std::cout << "cached phi (" << set.phi_cb.size() << "), drift (" << set.drift_cb.size()
              << "), wiener ladder (" << set.wiener_ladder.size() << " rungs) in "
              << cfg.resolved_cache_dir() << "\n";
    return 0;
}

int cmd_encode(const dq::ExperimentConfig& cfg) {
    if (cfg.rates.empty()) throw dq::ConfigError("encode needs curve.rates");
    const std::string phi_file = cache_file(cfg, "phi.dqcb");
    if (!std::filesystem::exists(phi_file))
        throw dq::IoError("codebook cache missing (" + phi_file + "); run `dq build-codebooks` first");

    const auto bundles = dq::simulate_ensemble(cfg.make_spec(), cfg.x0, cfg.dt, cfg.T,
                                               cfg.n_paths, cfg.seed, {1.0, cfg.workers});
    const dq::EncodingBudget budget = budget_for(cfg, cfg.rates.back());

    dq::CodebookSet set;
    set.phi_cb = dq::load_codebook(phi_file);
    set.drift_cb = dq::load_codebook(cache_file(cfg, "drift.dqcb"));
    for (std::size_t i = 0;; ++i) {
        const std::string f = cache_file(cfg, "wiener_" + std::to_string(i) + ".dqcb");
        if (!std::filesystem::exists(f)) break;
        set.wiener_ladder.push_back(dq::load_codebook(f));
        set.wiener_ladder.back().rate = set.wiener_ladder.back().log_size();
    }
    if (set.wiener_ladder.empty())
        throw dq::IoError("wiener codebook cache missing; run `dq build-codebooks` first");
    if (cfg.scheme == "lp") {
        // anchor/offset quantizers are small and rebuilt deterministically
        dq::CodebookSet rebuilt = build_set(cfg, bundles, budget);
        set.anchor_cb = rebuilt.anchor_cb;
        set.offset_cb = rebuilt.offset_cb;
        set.probe_paths = rebuilt.probe_paths;
    }

    std::vector<dq::Reconstruction> recs(bundles.size());
    for (std::size_t i = 0; i < bundles.size(); ++i)
        recs[i] = cfg.scheme == "lp" ? dq::encode_lp(bundles[i], budget, cfg.p, set)
                                     : dq::encode_sup(bundles[i], budget, set);

    std::filesystem::create_directories(cfg.output_dir);
    dq::CsvOptions csv;
    csv.timestamp = !cfg.no_timestamp;
    csv.seed = cfg.seed;
    dq::save_encode_csv(cfg.output_dir + "/encode.csv", recs, csv);
    std::cout << "wrote " << recs.size() << " records to " << cfg.output_dir << "/encode.csv\n";
    return 0;
}

int cmd_curve(const dq::ExperimentConfig& cfg) {
    if (cfg.rates.empty()) throw dq::ConfigError("curve needs curve.rates");
    const auto curve = dq::rate_distortion_curve(cfg.make_curve_request());
    std::filesystem::create_directories(cfg.output_dir);
    dq::CsvOptions csv;
    csv.timestamp = !cfg.no_timestamp;
    csv.seed = cfg.seed;
    dq::save_curve_csv(cfg.output_dir + "/curve.csv", curve, csv);
    std::cout << "wrote " << curve.size() << " points to " << cfg.output_dir << "/curve.csv\n";
    for (const auto& r : curve)
        std::cout << "  rate " << dq::format_double(r.rate) << "  D " << dq::format_double(r.distortion)
                  << "  sqrt(r)D " << dq::format_double(r.sqrt_r_times_d) << "\n";
    return 0;
}

int cmd_verify(const CliArgs& args) {
    dq::VerifyOptions options;
    if (args.quick) options.scale = 0.05;

    std::vector<dq::CheckResult> results = dq::run_acceptance_checks(options);
    if (!args.config_file.empty() || !args.overrides.empty()) {
        const dq::ExperimentConfig cfg = load_config(args);
        options.workers = cfg.workers;
        const auto props = dq::run_property_checks(cfg, options);
        results.insert(results.end(), props.begin(), props.end());
    }
    std::cout << dq::format_check_table(results);
    int failures = 0;
    for (const auto& r : results)
        if (!r.pass) ++failures;
    if (failures > 0) {
        std::cout << failures << " check(s) failed\n";
        return 1;
    }
    std::cout << "all " << results.size() << " checks passed\n";
    return 0;
}

int cmd_inspect(const CliArgs& args) {
    if (args.positional.empty()) throw dq::ConfigError("inspect needs at least one file");
    for (const std::string& file : args.positional) {
        std::cout << file << ": " << dq::describe_file(file) << "\n";
        if (args.export_path != static_cast<std::size_t>(-1)) {
            const auto paths = dq::load_ensemble(file);
            if (args.export_path >= paths.size())
                throw dq::IoError("path index out of range for " + file);
            const std::string out = file + ".path" + std::to_string(args.export_path) + ".csv";
            dq::save_path_csv(out, paths[args.export_path]);
            std::cout << "  exported " << out << "\n";
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        const CliArgs args = parse_args(argc, argv);
        if (args.subcommand == "simulate") return cmd_simulate(load_config(args));
        if (args.subcommand == "build-codebooks") return cmd_build_codebooks(load_config(args));
        if (args.subcommand == "encode") return cmd_encode(load_config(args));
        if (args.subcommand == "curve") return cmd_curve(load_config(args));
        if (args.subcommand == "verify") return cmd_verify(args);
        if (args.subcommand == "inspect") return cmd_inspect(args);
        std::cerr << "unknown subcommand '" << args.subcommand << "'\n" << kUsage;
        return 2;
    } catch (const dq::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n" << kUsage;
        return 2;
    } catch (const dq::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
