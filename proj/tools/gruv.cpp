// Command-line front end: simulate data, run the two-stage analysis, run replicate studies.

#include "gruv/gruv.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace gruv;

namespace {

std::vector<double> parse_grid(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (!part.empty()) {
            out.push_back(parse_double(part, "gamma list"));
        }
    }
    if (out.empty()) {
        throw Error("empty gamma list");
    }
    for (double g : out) {
        if (!(g >= 0)) {
            throw Error("gamma must be nonnegative");
        }
    }
    return out;
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void write_indices(const std::string& path, const std::vector<Index>& idx, const std::vector<std::string>& ids) {
    auto out = detail::open_output(path);
    for (auto j : idx) {
        out << ids[static_cast<std::size_t>(j)] << '\n';
    }
}

ScenarioSpec load_scenario(const std::string& path) {
    if (path.empty()) {
        return ScenarioSpec{};
    }
    auto in = detail::open_input(path);
    return parse_scenario(in);
}

struct SimulateArgs {
    std::string scenario;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<double> pi_o;
};

int simulate(const SimulateArgs& args) {
    auto spec = load_scenario(args.scenario);
    if (args.seed) {
        spec.seed = *args.seed;
    }
    if (args.pi_o) {
        spec.pi_o = *args.pi_o;
    }
    spec.validate();
    const auto gt = generate(spec);
    fs::create_directories(args.out);
    const auto& samples = gt.y.sample_ids();
    const auto& genes = gt.y.gene_ids();
    write_expression(join_path(args.out, "Y.tsv"), gt.y);
    write_expression(join_path(args.out, "Y0.tsv"), gt.y0);
    write_table(join_path(args.out, "X.tsv"), gt.x, samples, {"x"}, "sample_id");
    std::vector<std::string> wcols;
    for (Index c = 0; c < gt.w.cols(); ++c) {
        wcols.push_back("w" + std::to_string(c + 1));
    }
    write_table(join_path(args.out, "W.tsv"), gt.w, samples, wcols, "sample_id");
    {
        Matrix truth(spec.p, 3);
        truth.col(0) = gt.beta;
        truth.col(1) = gt.delta;
        truth.col(2) = gt.sigma2;
        write_table(join_path(args.out, "truth.tsv"), truth, genes, {"beta", "delta", "sigma2"}, "gene_id");
    }
    write_table(join_path(args.out, "mask.tsv"), gt.contamination_mask.cast<double>().matrix(), samples, genes, "sample_id");
    write_indices(join_path(args.out, "controls.txt"), gt.controls, genes);
    write_indices(join_path(args.out, "de_genes.txt"), gt.de_genes(), genes);

    nlohmann::json j;
    j["version"] = version;
    j["scenario"] = {{"n", spec.n}, {"p", spec.p}, {"n_de", spec.n_de}, {"pi_o", spec.pi_o},
                     {"sigma_o", spec.sigma_o}, {"n_controls", spec.n_controls}, {"seed", spec.seed}};
    j["contaminated_entries"] = gt.contamination_mask.count();
    auto out = detail::open_output(join_path(args.out, "sim_manifest.json"));
    out << j.dump(2) << '\n';
    return 0;
}

struct RunArgs {
    std::string data;
    std::string covariate;
    std::string controls_file;
    std::string control_indices;
    std::string ruv = "gamma";
    std::string test = "gamma_lse";
    std::optional<std::string> k;
    std::string k_range = "1-20";
    std::string truth_file;
    int top = 100;
    std::string gamma = "0.5";
    std::optional<double> ruv_gamma;
    double alpha = 0.05;
    std::string true_w;
    bool exclude_controls = false;
    int ruv_max_iter = 500;
    int lse_max_iter = 200;
    double tol = 1e-8;
    double ridge = 1e-8;
    int threads = 0;
    std::string out;
};

PipelineInput load_input(const RunArgs& args) {
    auto y = read_expression(args.data);
    Vector x = read_covariate(args.covariate, y.sample_ids());
    std::vector<Index> controls;
    if (!args.controls_file.empty()) {
        controls = ids_to_indices(read_id_list(args.controls_file), y.gene_ids());
    } else if (!args.control_indices.empty()) {
        controls = parse_index_list(args.control_indices);
    }
    std::optional<Matrix> w;
    if (!args.true_w.empty()) {
        w = read_sample_table(args.true_w, y.sample_ids());
    }
    return PipelineInput{std::move(y), std::move(x), std::move(controls), std::move(w)};
}

void print_summary(const PipelineConfig& cfg, const PipelineResult& res, const std::string& dir) {
    std::cout << to_string(cfg.ruv) << "[+" << to_string(cfg.test) << "]"
              << " calls=" << res.calls.indices.size() << " nonconverged=" << res.nonconverged
              << " collapsed=" << res.collapsed << " non_identified=" << res.failed_fits
              << " rle_mean_iqr=" << format_double(res.rle.mean_iqr) << " -> " << dir << '\n';
    if (!res.factors.converged) {
        std::cerr << "warning: factor estimation did not converge\n";
    }
    for (const auto& d : res.factors.diagnostics) {
        std::cerr << "note: " << d << '\n';
    }
}

int run(const RunArgs& args) {
    PipelineConfig cfg;
    cfg.ruv = parse_ruv_method(args.ruv);
    cfg.test = parse_test_method(args.test);
    cfg.ruv_gamma = args.ruv_gamma;
    cfg.fwer_alpha = args.alpha;
    cfg.exclude_controls = args.exclude_controls;
    cfg.ruv_max_iter = args.ruv_max_iter;
    cfg.lse_max_iter = args.lse_max_iter;
    cfg.tol = args.tol;
    cfg.ridge = args.ridge;
    cfg.threads = args.threads > 0 ? args.threads : default_threads();
    const auto grid = parse_grid(args.gamma);
    cfg.gamma = grid.front();

    const auto input = load_input(args);
    if (cfg.ruv == RuvMethod::TrueW && !input.true_w) {
        throw Error("the true_w strategy needs --true-w");
    }
    if ((cfg.ruv == RuvMethod::IgnoreW || cfg.ruv == RuvMethod::TrueW) && args.k) {
        throw Error(std::string("the ") + to_string(cfg.ruv) + " strategy takes no k");
    }
    fs::create_directories(args.out);

    if (args.k && *args.k == "scan") {
        if (args.truth_file.empty()) {
            throw Error("k scan needs --truth-file");
        }
        const auto dash = args.k_range.find('-');
        if (dash == std::string::npos) {
            throw Error("bad --k-range '" + args.k_range + "'");
        }
        const int k_min = std::stoi(args.k_range.substr(0, dash)), k_max = std::stoi(args.k_range.substr(dash + 1));
        const auto truth = ids_to_indices(read_id_list(args.truth_file), input.y.gene_ids());
        const auto rows = scan_k(input, cfg, k_min, k_max, truth, args.top);
        auto out = detail::open_output(join_path(args.out, "k_scan.tsv"));
        out << "k\tn_calls\ttp\ttp_top" << args.top << '\n';
        for (const auto& r : rows) {
            out << r.k << '\t' << r.n_calls << '\t' << r.tp << '\t' << r.tp_top << '\n';
        }
        std::cout << "k scan " << k_min << ".." << k_max << " -> " << join_path(args.out, "k_scan.tsv") << '\n';
        return 0;
    }

    if (args.k) {
        cfg.k = std::stoi(*args.k);
    }
    if (grid.size() == 1) {
        const auto res = run_pipeline(input, cfg);
        write_bundle(args.out, input, cfg, res);
        print_summary(cfg, res, args.out);
        return 0;
    }

    // One bundle per gamma value; the factor estimate does not depend on the testing gamma.
    const auto factors = estimate_factors(input, cfg);
    auto table = detail::open_output(join_path(args.out, "gamma_grid.tsv"));
    table << "gamma\tn_calls\tnonconverged\tvariance_collapse\tnon_identified\trle_mean_iqr\n";
    for (double g : grid) {
        cfg.gamma = g;
        const auto res = analyze_with_factors(input, cfg, factors);
        const auto dir = join_path(args.out, "gamma_" + format_double(g));
        write_bundle(dir, input, cfg, res);
        print_summary(cfg, res, dir);
        table << format_double(g) << '\t' << res.calls.indices.size() << '\t' << res.nonconverged << '\t' << res.collapsed
              << '\t' << res.failed_fits << '\t' << format_double(res.rle.mean_iqr) << '\n';
    }
    return 0;
}

struct ReplicateArgs {
    std::string scenario;
    int replicates = 20;
    std::uint64_t seed = 1;
    std::optional<double> pi_o;
    int k = 8;
    double gamma = 0.5;
    std::optional<double> ruv_gamma;
    double alpha = 0.05;
    int threads = 0;
    std::vector<std::string> combinations;
    std::string out;
};

int replicate(const ReplicateArgs& args) {
    auto spec = load_scenario(args.scenario);
    if (args.pi_o) {
        spec.pi_o = *args.pi_o;
    }
    spec.validate();
    PipelineConfig cfg;
    cfg.k = args.k;
    cfg.gamma = args.gamma;
    cfg.ruv_gamma = args.ruv_gamma;
    cfg.fwer_alpha = args.alpha;
    cfg.threads = args.threads > 0 ? args.threads : default_threads();

    std::vector<Combination> combos;
    if (args.combinations.empty()) {
        combos = all_combinations();
    } else {
        for (const auto& name : args.combinations) {
            const auto plus = name.find("[+");
            if (plus == std::string::npos || name.back() != ']') {
                throw Error("combination must look like ruv[+test], got '" + name + "'");
            }
            combos.push_back({parse_ruv_method(name.substr(0, plus)), parse_test_method(name.substr(plus + 2, name.size() - plus - 3))});
        }
    }

    const auto study = run_replicates(spec, args.replicates, cfg, combos, args.seed);
    fs::create_directories(args.out);
    {
        auto out = detail::open_output(join_path(args.out, "replicates.tsv"));
        out << "replicate\tseed\tprocedure\ttp\tfp\tauc\tmean_iqr\tnonconverged\n";
        for (const auto& r : study.rows) {
            out << (r.replicate + 1) << '\t' << r.seed << '\t' << r.combination.name() << '\t' << r.tp << '\t' << r.fp << '\t'
                << format_double(r.auc) << '\t' << format_double(r.mean_iqr) << '\t' << r.nonconverged << '\n';
        }
    }
    {
        auto out = detail::open_output(join_path(args.out, "summary.tsv"));
        out << "procedure\treplicates\tmean_tp\tse_tp\tmean_fp\tse_fp\tmean_auc\tse_auc\tmean_iqr\tse_iqr\n";
        for (const auto& s : study.summary) {
            out << s.combination.name() << '\t' << s.replicates << '\t' << format_double(s.mean_tp) << '\t' << format_double(s.se_tp)
                << '\t' << format_double(s.mean_fp) << '\t' << format_double(s.se_fp) << '\t' << format_double(s.mean_auc) << '\t'
                << format_double(s.se_auc) << '\t' << format_double(s.mean_iqr) << '\t' << format_double(s.se_iqr) << '\n';
        }
    }
    {
        nlohmann::json j;
        j["version"] = version;
        j["master_seed"] = args.seed;
        j["replicates"] = args.replicates;
        j["failed"] = study.failed;
        j["failures"] = study.failures;
        j["scenario"] = {{"n", spec.n}, {"p", spec.p}, {"n_de", spec.n_de}, {"pi_o", spec.pi_o},
                         {"sigma_o", spec.sigma_o}, {"n_controls", spec.n_controls}};
        j["config"] = config_to_json(cfg);
        auto out = detail::open_output(join_path(args.out, "run_manifest.json"));
        out << j.dump(2) << '\n';
    }
    std::printf("%-22s %8s %8s %8s %8s\n", "procedure", "TP", "FP", "AUC", "IQR");
    for (const auto& s : study.summary) {
        std::printf("%-22s %8.2f %8.2f %8.4f %8.4f\n", s.combination.name().c_str(), s.mean_tp, s.mean_fp, s.mean_auc, s.mean_iqr);
    }
    for (const auto& f : study.failures) {
        std::cerr << "failed: " << f << '\n';
    }
    if (study.failed > 0) {
        std::cerr << study.failed << " replicate(s) excluded\n";
    }
    return 0;
}

}

int main(int argc, char** argv) {
    CLI::App app{"Robust removal of unwanted variation and differential-expression testing"};
    app.set_config("--config", "", "INI/TOML file with option values; command-line flags take precedence");
    app.set_version_flag("--version", std::string(version));
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a simulated dataset with its ground truth");
    sim_cmd->add_option("--scenario", sim.scenario, "Scenario file of key = value lines")->check(CLI::ExistingFile);
    sim_cmd->add_option("--seed", sim.seed, "Override the scenario seed");
    sim_cmd->add_option("--pi-o", sim.pi_o, "Override the contamination parameter");
    sim_cmd->add_option("--out", sim.out, "Output directory")->required();

    RunArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "Estimate unwanted variation and test every gene");
    run_cmd->add_option("--data", run_args.data, "Samples-by-genes expression table")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--covariate", run_args.covariate, "Per-sample covariate table")->required()->check(CLI::ExistingFile);
    auto* cfile = run_cmd->add_option("--controls-file", run_args.controls_file, "Control gene ids, one per line")->check(CLI::ExistingFile);
    auto* cidx = run_cmd->add_option("--control-indices", run_args.control_indices, "1-based control indices, e.g. 801-1000");
    cfile->excludes(cidx);
    run_cmd->add_option("--ruv", run_args.ruv, "ruv2 | ruv4 | gamma | true_w | ignore_w")->capture_default_str()
        ->check(CLI::IsMember({"ruv2", "ruv4", "gamma", "true_w", "ignore_w"}));
    run_cmd->add_option("--test", run_args.test, "lse | gamma_lse")->capture_default_str()->check(CLI::IsMember({"lse", "gamma_lse"}));
    run_cmd->add_option("--k", run_args.k, "Number of unwanted factors (default 8), or 'scan'");
    run_cmd->add_option("--k-range", run_args.k_range, "Inclusive k range for a scan")->capture_default_str();
    run_cmd->add_option("--truth-file", run_args.truth_file, "Gene ids treated as true positives in a k scan")->check(CLI::ExistingFile);
    run_cmd->add_option("--top", run_args.top, "Top-ranked genes counted in a k scan")->capture_default_str();
    run_cmd->add_option("--gamma", run_args.gamma, "Testing gamma, or a comma-separated grid")->capture_default_str();
    run_cmd->add_option("--ruv-gamma", run_args.ruv_gamma, "Gamma of the factor stage (default 1/n)");
    run_cmd->add_option("--alpha", run_args.alpha, "Family-wise error rate")->capture_default_str();
    run_cmd->add_option("--true-w", run_args.true_w, "Per-sample table of the true unwanted factors")->check(CLI::ExistingFile);
    run_cmd->add_flag("--exclude-controls", run_args.exclude_controls, "Never call control genes");
    run_cmd->add_option("--ruv-max-iter", run_args.ruv_max_iter)->capture_default_str();
    run_cmd->add_option("--lse-max-iter", run_args.lse_max_iter)->capture_default_str();
    run_cmd->add_option("--tol", run_args.tol)->capture_default_str();
    run_cmd->add_option("--ridge", run_args.ridge)->capture_default_str();
    run_cmd->add_option("--threads", run_args.threads, "Worker threads")->envname("GRUV_THREADS");
    run_cmd->add_option("--out", run_args.out, "Output directory")->required();

    ReplicateArgs rep;
    auto* rep_cmd = app.add_subcommand("replicate", "Simulation study over seeded replicates");
    rep_cmd->add_option("--scenario", rep.scenario, "Scenario file of key = value lines")->check(CLI::ExistingFile);
    rep_cmd->add_option("--replicates", rep.replicates)->capture_default_str()->check(CLI::PositiveNumber);
    rep_cmd->add_option("--seed", rep.seed, "Master seed")->capture_default_str();
    rep_cmd->add_option("--pi-o", rep.pi_o, "Override the contamination parameter");
    rep_cmd->add_option("--k", rep.k)->capture_default_str()->check(CLI::PositiveNumber);
    rep_cmd->add_option("--gamma", rep.gamma, "Testing gamma")->capture_default_str();
    rep_cmd->add_option("--ruv-gamma", rep.ruv_gamma, "Gamma of the factor stage (default 1/n)");
    rep_cmd->add_option("--alpha", rep.alpha)->capture_default_str();
    rep_cmd->add_option("--procedure", rep.combinations, "Restrict to procedures such as gamma[+gamma_lse]");
    rep_cmd->add_option("--threads", rep.threads, "Worker threads")->envname("GRUV_THREADS");
    rep_cmd->add_option("--out", rep.out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim_cmd) {
            return simulate(sim);
        }
        if (*run_cmd) {
            return run(run_args);
        }
        return replicate(rep);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
