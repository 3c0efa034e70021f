#ifndef GRUV_PIPELINE_HPP
#define GRUV_PIPELINE_HPP

#include "core.hpp"
#include "gamma_lse.hpp"
#include "gamma_ruv.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "ruv_classic.hpp"
#include "simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

/**
 * @file pipeline.hpp
 *
 * @brief Two-stage analysis: estimate the unwanted variation, then test every gene with `Z = [1, X, W_hat]`.
 *
 * Procedures are named `A[+B]` with A the factor strategy and B the per-gene fit,
 * e.g. `gamma[+gamma_lse]` for gamma-RUV followed by gamma-LSE.
 */

namespace gruv {

enum class RuvMethod { RUV2, RUV4, Gamma, TrueW, IgnoreW };
enum class TestMethod { LSE, GammaLSE };

inline const char* to_string(RuvMethod m) {
    switch (m) {
        case RuvMethod::RUV2: return "ruv2";
        case RuvMethod::RUV4: return "ruv4";
        case RuvMethod::Gamma: return "gamma";
        case RuvMethod::TrueW: return "true_w";
        case RuvMethod::IgnoreW: return "ignore_w";
    }
    return "unknown";
}

inline const char* to_string(TestMethod m) {
    return m == TestMethod::LSE ? "lse" : "gamma_lse";
}

inline RuvMethod parse_ruv_method(const std::string& s) {
    for (auto m : {RuvMethod::RUV2, RuvMethod::RUV4, RuvMethod::Gamma, RuvMethod::TrueW, RuvMethod::IgnoreW}) {
        if (s == to_string(m)) {
            return m;
        }
    }
    throw Error("unknown RUV method '" + s + "'");
}

inline TestMethod parse_test_method(const std::string& s) {
    if (s == "lse") {
        return TestMethod::LSE;
    }
    if (s == "gamma_lse") {
        return TestMethod::GammaLSE;
    }
    throw Error("unknown test method '" + s + "'");
}

/**
 * @brief Settings of one pipeline run.
 *
 * `gamma` is used by gamma-LSE. gamma-RUV uses `ruv_gamma` when set, and `1 / n` otherwise.
 * The location/scatter weights are `exp(-gamma d^2 / 2)` with squared distances `d^2` of order n,
 * so a fixed gamma concentrates the weight on a handful of control genes as n grows;
 * at `gamma = 1 / n` inliers keep comparable weights while observations with `d^2 >> n` are still suppressed.
 */
struct PipelineConfig {
    RuvMethod ruv = RuvMethod::Gamma;
    TestMethod test = TestMethod::GammaLSE;
    int k = 8;
    double gamma = 0.5;
    std::optional<double> ruv_gamma;
    double fwer_alpha = 0.05;
    bool exclude_controls = false;
    int ruv_max_iter = 500;
    int lse_max_iter = 200;
    double tol = 1e-8;
    double ridge = 1e-8;
    int threads = 1;

    double effective_ruv_gamma(Index n) const {
        return ruv_gamma ? *ruv_gamma : 1.0 / static_cast<double>(n);
    }

    GammaConfig ruv_config(Index n) const {
        return GammaConfig{effective_ruv_gamma(n), ruv_max_iter, tol, ridge};
    }

    GammaConfig lse_config() const {
        return GammaConfig{gamma, lse_max_iter, tol, ridge};
    }
};

/**
 * @brief Observed data. `true_w` is required by the `true_w` strategy only.
 */
struct PipelineInput {
    ExpressionMatrix y;
    Vector covariate;
    std::vector<Index> controls;
    std::optional<Matrix> true_w;
};

struct PipelineResult {
    FactorEstimate factors;
    RegressionDesign design;
    std::vector<GeneTest> tests;
    DeCallSet calls;
    Matrix adjusted;
    RleSummary rle;
    Vector eigen_ratios;
    double ruv_gamma = 0;
    int nonconverged = 0;
    int collapsed = 0;
    int failed_fits = 0;
};

inline StudyDesign make_study_design(const PipelineInput& input, const PipelineConfig& cfg) {
    StudyDesign d;
    d.covariate = input.covariate;
    d.controls = input.controls;
    d.k = cfg.k;
    d.fwer_alpha = cfg.fwer_alpha;
    return d;
}

/**
 * Stage one: the unwanted-variation basis for the configured strategy.
 */
inline FactorEstimate estimate_factors(const PipelineInput& input, const PipelineConfig& cfg) {
    const auto design = make_study_design(input, cfg);
    switch (cfg.ruv) {
        case RuvMethod::RUV2:
            design.validate(input.y.n(), input.y.p());
            return ruv2(input.y, design);
        case RuvMethod::RUV4:
            design.validate(input.y.n(), input.y.p());
            return ruv4(input.y, design);
        case RuvMethod::Gamma:
            design.validate(input.y.n(), input.y.p());
            return gamma_ruv(input.y, design, cfg.ruv_config(input.y.n()), cfg.threads);
        case RuvMethod::TrueW: {
            if (!input.true_w) {
                throw Error("true_w strategy needs the true W");
            }
            if (input.true_w->rows() != input.y.n()) {
                throw Error("true W has the wrong number of rows");
            }
            FactorEstimate out;
            out.method = FactorMethod::TrueW;
            out.w_hat = center_columns(*input.true_w);
            return out;
        }
        case RuvMethod::IgnoreW: {
            FactorEstimate out;
            out.method = FactorMethod::None;
            out.w_hat = Matrix(input.y.n(), 0);
            return out;
        }
    }
    throw Error("unknown RUV method");
}

/**
 * Stage two: one fit per gene, in gene order.
 * A gene whose sandwich is not identified is kept with `pvalue = 1` and counted in `failed_fits`.
 */
inline std::vector<GeneTest> test_genes(const Matrix& y, const RegressionDesign& design, const PipelineConfig& cfg, int* failed = nullptr) {
    const Index p = y.cols();
    std::vector<GeneTest> tests(static_cast<std::size_t>(p));
    std::vector<char> bad(static_cast<std::size_t>(p), 0);
    const auto lse_cfg = cfg.lse_config();
    parallel_for(static_cast<std::size_t>(p), cfg.threads, [&](std::size_t j) {
        const Vector yj = y.col(static_cast<Index>(j));
        if (cfg.test == TestMethod::LSE) {
            tests[j] = fit_lse(yj, design);
            return;
        }
        try {
            tests[j] = fit_gamma_lse(yj, design, lse_cfg);
        } catch (const Error&) {
            GeneTest t = fit_lse(yj, design);
            t.converged = false;
            t.pvalue = 1;
            tests[j] = t;
            bad[j] = 1;
        }
    });
    if (failed) {
        *failed = static_cast<int>(std::count(bad.begin(), bad.end(), 1));
    }
    return tests;
}

/**
 * `Y - W_hat alpha_hat`, using the unwanted columns of the design and the fitted per-gene coefficients.
 */
inline Matrix adjust_expression(const Matrix& y, const RegressionDesign& design, const std::vector<GeneTest>& tests) {
    const Index q = design.cols() - 2;
    if (q == 0) {
        return y;
    }
    Matrix alpha(q, y.cols());
    for (Index j = 0; j < y.cols(); ++j) {
        alpha.col(j) = tests[static_cast<std::size_t>(j)].eta.tail(q);
    }
    return y - design.z().rightCols(q) * alpha;
}

/**
 * Stage two and the derived outputs, for a given factor estimate.
 */
inline PipelineResult analyze_with_factors(const PipelineInput& input, const PipelineConfig& cfg, FactorEstimate factors) {
    if (input.covariate.size() != input.y.n()) {
        throw Error("covariate length does not match the number of samples");
    }
    PipelineResult out;
    out.ruv_gamma = cfg.ruv == RuvMethod::Gamma ? cfg.effective_ruv_gamma(input.y.n()) : 0.0;
    out.factors = std::move(factors);
    out.design = make_design(input.covariate, out.factors);
    out.tests = test_genes(input.y.values(), out.design, cfg, &out.failed_fits);
    for (const auto& t : out.tests) {
        out.nonconverged += (cfg.test == TestMethod::GammaLSE && !t.converged) ? 1 : 0;
        out.collapsed += t.variance_collapse ? 1 : 0;
    }
    out.calls = call_de_genes(out.tests, make_study_design(input, cfg), cfg.exclude_controls);
    out.adjusted = adjust_expression(input.y.values(), out.design, out.tests);
    out.rle = rle_summary(out.adjusted);
    if (out.factors.eigenvalues.size() > 0) {
        out.eigen_ratios = eigenvalue_ratios(out.factors.eigenvalues);
    }
    return out;
}

/**
 * Full analysis of one dataset.
 */
inline PipelineResult run_pipeline(const PipelineInput& input, const PipelineConfig& cfg) {
    if (input.covariate.size() != input.y.n()) {
        throw Error("covariate length does not match the number of samples");
    }
    return analyze_with_factors(input, cfg, estimate_factors(input, cfg));
}

/**
 * @brief TP counts for one value of k.
 */
struct KScanRow {
    int k = 0;
    int n_calls = 0;
    int tp = 0;
    int tp_top = 0;
};

/**
 * Rerun the pipeline for every k in `[k_min, k_max]`, counting true positives among the Bonferroni calls
 * and among the `top` smallest p-values.
 */
inline std::vector<KScanRow> scan_k(const PipelineInput& input, PipelineConfig cfg, int k_min, int k_max,
                                    const std::vector<Index>& truth, int top = 100) {
    if (k_min < 1 || k_max < k_min) {
        throw Error("invalid k range");
    }
    const std::unordered_set<Index> de(truth.begin(), truth.end());
    std::vector<KScanRow> rows;
    for (int k = k_min; k <= k_max; ++k) {
        cfg.k = k;
        const auto res = run_pipeline(input, cfg);
        KScanRow row;
        row.k = k;
        row.n_calls = static_cast<int>(res.calls.indices.size());
        row.tp = tp_fp(res.calls, truth).tp;

        std::vector<Index> order(res.tests.size());
        std::iota(order.begin(), order.end(), Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
            return res.tests[static_cast<std::size_t>(a)].pvalue < res.tests[static_cast<std::size_t>(b)].pvalue;
        });
        const auto take = std::min<std::size_t>(static_cast<std::size_t>(std::max(top, 0)), order.size());
        for (std::size_t i = 0; i < take; ++i) {
            row.tp_top += de.count(order[i]) ? 1 : 0;
        }
        rows.push_back(row);
    }
    return rows;
}

/**
 * @brief One strategy/test pairing of the replicate study.
 */
struct Combination {
    RuvMethod ruv;
    TestMethod test;

    std::string name() const { return std::string(to_string(ruv)) + "[+" + to_string(test) + "]"; }
    bool operator==(const Combination&) const = default;
};

/**
 * The ten procedures: five strategies times two tests.
 */
inline std::vector<Combination> all_combinations() {
    std::vector<Combination> out;
    for (auto r : {RuvMethod::Gamma, RuvMethod::RUV2, RuvMethod::RUV4, RuvMethod::IgnoreW, RuvMethod::TrueW}) {
        for (auto t : {TestMethod::LSE, TestMethod::GammaLSE}) {
            out.push_back({r, t});
        }
    }
    return out;
}

struct ReplicateRow {
    int replicate = 0;
    std::uint64_t seed = 0;
    Combination combination{RuvMethod::Gamma, TestMethod::GammaLSE};
    int tp = 0;
    int fp = 0;
    double auc = 0;
    double mean_iqr = 0;
    int nonconverged = 0;
};

struct SummaryRow {
    Combination combination{RuvMethod::Gamma, TestMethod::GammaLSE};
    int replicates = 0;
    double mean_tp = 0, se_tp = 0;
    double mean_fp = 0, se_fp = 0;
    double mean_auc = 0, se_auc = 0;
    double mean_iqr = 0, se_iqr = 0;
};

struct ReplicateStudy {
    std::vector<ReplicateRow> rows;
    std::vector<SummaryRow> summary;
    int failed = 0;
    std::vector<std::string> failures;

    const SummaryRow& find(const Combination& c) const {
        for (const auto& s : summary) {
            if (s.combination == c) {
                return s;
            }
        }
        throw Error("combination not part of the study: " + c.name());
    }
};

/**
 * Seed of replicate `r` under a master seed.
 */
inline std::uint64_t replicate_seed(std::uint64_t master, int r) {
    return splitmix_mix(master + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(r + 1));
}

namespace detail {

inline ReplicateRow score_replicate(const GroundTruth& gt, const ScenarioSpec& spec, const PipelineResult& res) {
    ReplicateRow row;
    const auto calls = tp_fp(res.calls, gt);
    row.tp = calls.tp;
    row.fp = calls.fp;
    std::vector<double> de, null;
    for (int j = 0; j < spec.p - spec.n_controls; ++j) {
        (j < spec.n_de ? de : null).push_back(res.tests[static_cast<std::size_t>(j)].pvalue);
    }
    row.auc = auc_pvalues(de, null);
    row.mean_iqr = res.rle.mean_iqr;
    row.nonconverged = res.nonconverged;
    return row;
}

inline void mean_se(const std::vector<double>& v, double& mean, double& se) {
    mean = 0;
    se = 0;
    if (v.empty()) {
        return;
    }
    mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0;
        for (double x : v) {
            ss += (x - mean) * (x - mean);
        }
        se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    }
}

}

/**
 * Analyze one simulated dataset with every requested combination.
 * The `true_w` strategy uses the uncontaminated data together with the true W.
 */
inline std::vector<ReplicateRow> run_replicate(const ScenarioSpec& spec, const PipelineConfig& cfg,
                                               const std::vector<Combination>& combos, int replicate = 0) {
    const auto gt = generate(spec);
    std::vector<ReplicateRow> rows;
    for (auto ruv : {RuvMethod::Gamma, RuvMethod::RUV2, RuvMethod::RUV4, RuvMethod::IgnoreW, RuvMethod::TrueW}) {
        std::vector<TestMethod> tests;
        for (const auto& c : combos) {
            if (c.ruv == ruv) {
                tests.push_back(c.test);
            }
        }
        if (tests.empty()) {
            continue;
        }
        PipelineInput input{ruv == RuvMethod::TrueW ? gt.y0 : gt.y, gt.x, gt.controls, gt.w};
        PipelineConfig run_cfg = cfg;
        run_cfg.ruv = ruv;
        const auto factors = estimate_factors(input, run_cfg);
        for (auto t : tests) {
            run_cfg.test = t;
            const auto res = analyze_with_factors(input, run_cfg, factors);
            auto row = detail::score_replicate(gt, spec, res);
            row.replicate = replicate;
            row.seed = spec.seed;
            row.combination = {ruv, t};
            rows.push_back(row);
        }
    }
    return rows;
}

/**
 * Replicate study over `replicates` seeds derived from `master_seed`.
 * Replicates run in parallel (gene fits inside a replicate are sequential); rows come out in replicate order.
 * A replicate that throws is excluded and reported in `failures`.
 */
inline ReplicateStudy run_replicates(const ScenarioSpec& base, int replicates, const PipelineConfig& cfg,
                                     const std::vector<Combination>& combos, std::uint64_t master_seed) {
    if (replicates < 1) {
        throw Error("need at least one replicate");
    }
    std::vector<std::vector<ReplicateRow>> per(static_cast<std::size_t>(replicates));
    std::vector<std::string> errors(static_cast<std::size_t>(replicates));
    PipelineConfig inner = cfg;
    inner.threads = 1;
    parallel_for(static_cast<std::size_t>(replicates), cfg.threads, [&](std::size_t r) {
        ScenarioSpec spec = base;
        spec.seed = replicate_seed(master_seed, static_cast<int>(r));
        try {
            per[r] = run_replicate(spec, inner, combos, static_cast<int>(r));
        } catch (const std::exception& e) {
            errors[r] = std::string("replicate ") + std::to_string(r) + ": " + e.what();
        }
    });

    ReplicateStudy out;
    for (std::size_t r = 0; r < per.size(); ++r) {
        if (!errors[r].empty()) {
            ++out.failed;
            out.failures.push_back(errors[r]);
            continue;
        }
        out.rows.insert(out.rows.end(), per[r].begin(), per[r].end());
    }
    for (const auto& c : combos) {
        SummaryRow s;
        s.combination = c;
        std::vector<double> tp, fp, auc, iqr;
        for (const auto& row : out.rows) {
            if (row.combination == c) {
                tp.push_back(row.tp);
                fp.push_back(row.fp);
                auc.push_back(row.auc);
                iqr.push_back(row.mean_iqr);
            }
        }
        s.replicates = static_cast<int>(tp.size());
        detail::mean_se(tp, s.mean_tp, s.se_tp);
        detail::mean_se(fp, s.mean_fp, s.se_fp);
        detail::mean_se(auc, s.mean_auc, s.se_auc);
        detail::mean_se(iqr, s.mean_iqr, s.se_iqr);
        out.summary.push_back(s);
    }
    return out;
}

}

#endif
