#ifndef GRUV_BUNDLE_HPP
#define GRUV_BUNDLE_HPP

#include "io.hpp"
#include "pipeline.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>

/**
 * @file bundle.hpp
 *
 * @brief Output directory of a pipeline run.
 *
 * | file               | content                                                         |
 * |--------------------|-----------------------------------------------------------------|
 * | pvalues.tsv        | one row per gene: id, 1-based index, beta, var, sigma2, p-value |
 * | de_calls.tsv       | Bonferroni calls                                                |
 * | what_adjusted.tsv  | adjusted expression `Y - W_hat alpha_hat`                        |
 * | what.tsv           | unwanted-variation columns of the design                        |
 * | rle.tsv            | per-chip RLE median and quartiles                               |
 * | eigratio.tsv       | robust scatter spectrum and cumulative ratios (gamma-RUV only)  |
 * | run_manifest.json  | configuration, diagnostics and summary counts                   |
 */

namespace gruv {

inline constexpr const char* version = "1.0.0";

inline nlohmann::json config_to_json(const PipelineConfig& cfg) {
    nlohmann::json j;
    j["ruv_method"] = to_string(cfg.ruv);
    j["test_method"] = to_string(cfg.test);
    j["k"] = cfg.ruv == RuvMethod::IgnoreW || cfg.ruv == RuvMethod::TrueW ? nlohmann::json() : nlohmann::json(cfg.k);
    j["gamma"] = cfg.gamma;
    j["ruv_gamma"] = cfg.ruv_gamma ? nlohmann::json(*cfg.ruv_gamma) : nlohmann::json("1/n");
    j["fwer_alpha"] = cfg.fwer_alpha;
    j["exclude_controls"] = cfg.exclude_controls;
    j["ruv_max_iter"] = cfg.ruv_max_iter;
    j["lse_max_iter"] = cfg.lse_max_iter;
    j["tol"] = cfg.tol;
    j["ridge"] = cfg.ridge;
    j["threads"] = cfg.threads;
    return j;
}

inline void write_bundle(const std::string& dir, const PipelineInput& input, const PipelineConfig& cfg,
                         const PipelineResult& res, const nlohmann::json& extra = nlohmann::json::object()) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };
    const auto& genes = input.y.gene_ids();

    {
        auto out = detail::open_output(path("pvalues.tsv"));
        out << "gene_id\tindex\tbeta\tbeta_var\tsigma2\tpvalue\tconverged\titerations\n";
        for (std::size_t j = 0; j < res.tests.size(); ++j) {
            const auto& t = res.tests[j];
            out << genes[j] << '\t' << (j + 1) << '\t' << format_double(t.beta()) << '\t' << format_double(t.beta_var) << '\t'
                << format_double(t.sigma2) << '\t' << format_double(t.pvalue) << '\t' << (t.converged ? 1 : 0) << '\t'
                << t.iterations << '\n';
        }
    }
    {
        auto out = detail::open_output(path("de_calls.tsv"));
        out << "gene_id\tindex\tpvalue\n";
        for (auto j : res.calls.indices) {
            const auto jj = static_cast<std::size_t>(j);
            out << genes[jj] << '\t' << (j + 1) << '\t' << format_double(res.tests[jj].pvalue) << '\n';
        }
    }
    write_table(path("what_adjusted.tsv"), res.adjusted, input.y.sample_ids(), genes, "sample_id");
    {
        const Index q = res.design.cols() - 2;
        std::vector<std::string> cols;
        for (Index c = 0; c < q; ++c) {
            cols.push_back("w" + std::to_string(c + 1));
        }
        write_table(path("what.tsv"), res.design.z().rightCols(q), input.y.sample_ids(), cols, "sample_id");
    }
    {
        auto out = detail::open_output(path("rle.tsv"));
        out << "chip_id\tmedian\tq1\tq3\tiqr\n";
        for (std::size_t i = 0; i < res.rle.per_chip.size(); ++i) {
            const auto& c = res.rle.per_chip[i];
            out << input.y.sample_ids()[i] << '\t' << format_double(c.median) << '\t' << format_double(c.q1) << '\t'
                << format_double(c.q3) << '\t' << format_double(c.iqr) << '\n';
        }
    }
    {
        auto out = detail::open_output(path("eigratio.tsv"));
        out << "m\teigenvalue\tcumulative_ratio\n";
        for (Index m = 0; m < res.eigen_ratios.size(); ++m) {
            out << (m + 1) << '\t' << format_double(res.factors.eigenvalues(m)) << '\t' << format_double(res.eigen_ratios(m)) << '\n';
        }
    }
    {
        nlohmann::json j;
        j["version"] = version;
        j["config"] = config_to_json(cfg);
        j["n"] = input.y.n();
        j["p"] = input.y.p();
        j["n_controls"] = input.controls.size();
        j["ruv_gamma_used"] = res.ruv_gamma;
        j["design_columns"] = res.design.cols();
        j["factor"] = {
            {"method", to_string(res.factors.method)},
            {"columns", res.factors.w_hat.cols()},
            {"iterations", res.factors.iterations},
            {"converged", res.factors.converged},
            {"spectrum_tie", res.factors.spectrum_tie},
            {"diagnostics", res.factors.diagnostics},
        };
        j["genes"] = {
            {"nonconverged", res.nonconverged},
            {"variance_collapse", res.collapsed},
            {"non_identified", res.failed_fits},
        };
        j["de_calls"] = res.calls.indices.size();
        j["threshold"] = res.calls.threshold;
        j["rle_mean_iqr"] = res.rle.mean_iqr;
        j["rle_sd_iqr"] = res.rle.sd_iqr;
        for (const auto& [key, value] : extra.items()) {
            j[key] = value;
        }
        auto out = detail::open_output(path("run_manifest.json"));
        out << j.dump(2) << '\n';
    }
}

}

#endif
