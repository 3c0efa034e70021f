#include "gruv/bundle.hpp"
#include "gruv/pipeline.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace gruv;

namespace {

ScenarioSpec small_scenario(std::uint64_t seed = 3) {
    ScenarioSpec s;
    s.n = 30;
    s.p = 200;
    s.n_de = 20;
    s.n_controls = 60;
    s.seed = seed;
    return s;
}

PipelineConfig small_config() {
    PipelineConfig cfg;
    cfg.k = 4;
    return cfg;
}

PipelineInput input_from(const GroundTruth& gt, bool clean = false) {
    return PipelineInput{clean ? gt.y0 : gt.y, gt.x, gt.controls, gt.w};
}

}

TEST(Config, NamesRoundTrip) {
    for (auto m : {RuvMethod::RUV2, RuvMethod::RUV4, RuvMethod::Gamma, RuvMethod::TrueW, RuvMethod::IgnoreW}) {
        EXPECT_EQ(parse_ruv_method(to_string(m)), m);
    }
    EXPECT_EQ(parse_test_method("lse"), TestMethod::LSE);
    EXPECT_EQ(parse_test_method("gamma_lse"), TestMethod::GammaLSE);
    EXPECT_THROW(parse_ruv_method("ruv3"), Error);
    EXPECT_THROW(parse_test_method("ols"), Error);
    EXPECT_EQ((Combination{RuvMethod::Gamma, TestMethod::GammaLSE}).name(), "gamma[+gamma_lse]");
    EXPECT_EQ(all_combinations().size(), 10u);
    PipelineConfig cfg;
    EXPECT_DOUBLE_EQ(cfg.effective_ruv_gamma(50), 0.02);
    cfg.ruv_gamma = 0.3;
    EXPECT_DOUBLE_EQ(cfg.effective_ruv_gamma(50), 0.3);
}

TEST(RunPipeline, OutputsAreCompleteForEveryStrategy) {
    const auto gt = generate(small_scenario());
    for (auto ruv : {RuvMethod::RUV2, RuvMethod::RUV4, RuvMethod::Gamma, RuvMethod::TrueW, RuvMethod::IgnoreW}) {
        for (auto test : {TestMethod::LSE, TestMethod::GammaLSE}) {
            auto cfg = small_config();
            cfg.ruv = ruv;
            cfg.test = test;
            const auto res = run_pipeline(input_from(gt), cfg);
            ASSERT_EQ(res.tests.size(), 200u);
            for (const auto& t : res.tests) {
                EXPECT_TRUE(std::isfinite(t.pvalue));
                EXPECT_GE(t.pvalue, 0.0);
                EXPECT_LE(t.pvalue, 1.0);
            }
            EXPECT_EQ(res.adjusted.rows(), 30);
            EXPECT_EQ(res.adjusted.cols(), 200);
            EXPECT_EQ(res.rle.per_chip.size(), 30u);
            for (auto j : res.calls.indices) {
                EXPECT_LT(res.tests[static_cast<std::size_t>(j)].pvalue, res.calls.threshold);
            }
            const Index expected_cols = ruv == RuvMethod::IgnoreW ? 2
                                        : ruv == RuvMethod::TrueW ? 9
                                        : ruv == RuvMethod::Gamma ? 2 + 5
                                                                  : 2 + 4;
            EXPECT_EQ(res.design.cols(), expected_cols) << to_string(ruv);
            EXPECT_EQ(res.eigen_ratios.size() > 0, ruv == RuvMethod::Gamma);
        }
    }
}

TEST(RunPipeline, IgnoreWLeavesDataUnadjusted) {
    const auto gt = generate(small_scenario());
    auto cfg = small_config();
    cfg.ruv = RuvMethod::IgnoreW;
    cfg.test = TestMethod::LSE;
    const auto res = run_pipeline(input_from(gt), cfg);
    EXPECT_EQ(res.adjusted, gt.y.values());
}

TEST(RunPipeline, AdjustedMatchesFittedFactors) {
    const auto gt = generate(small_scenario());
    auto cfg = small_config();
    cfg.ruv = RuvMethod::RUV2;
    cfg.test = TestMethod::LSE;
    const auto res = run_pipeline(input_from(gt), cfg);
    const Matrix w = res.design.z().rightCols(4);
    for (Index j : {0, 50, 199}) {
        const Vector expected = gt.y.values().col(j) - w * res.tests[static_cast<std::size_t>(j)].eta.tail(4);
        EXPECT_LT((res.adjusted.col(j) - expected).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(RunPipeline, Errors) {
    const auto gt = generate(small_scenario());
    auto input = input_from(gt);
    auto cfg = small_config();
    cfg.ruv = RuvMethod::TrueW;
    input.true_w.reset();
    EXPECT_THROW(run_pipeline(input, cfg), Error);
    input = input_from(gt);
    input.covariate = Vector::Ones(30);
    cfg.ruv = RuvMethod::RUV2;
    EXPECT_THROW(run_pipeline(input, cfg), Error);
    input = input_from(gt);
    input.covariate = Vector::Ones(29);
    EXPECT_THROW(run_pipeline(input, cfg), Error);
    input = input_from(gt);
    input.controls = {1, 2, 3};
    EXPECT_THROW(run_pipeline(input, cfg), Error);
}

TEST(RunPipeline, ThreadCountDoesNotChangeResults) {
    const auto gt = generate(small_scenario());
    auto cfg = small_config();
    const auto a = run_pipeline(input_from(gt), cfg);
    cfg.threads = 3;
    const auto b = run_pipeline(input_from(gt), cfg);
    for (std::size_t j = 0; j < a.tests.size(); ++j) {
        EXPECT_EQ(a.tests[j].pvalue, b.tests[j].pvalue);
        EXPECT_EQ(a.tests[j].eta, b.tests[j].eta);
    }
    EXPECT_EQ(a.factors.w_hat, b.factors.w_hat);
}

TEST(Replicates, SingleReplicateReproducesPipeline) {
    const auto base = small_scenario();
    const auto cfg = small_config();
    const Combination combo{RuvMethod::Gamma, TestMethod::GammaLSE};
    const auto study = run_replicates(base, 1, cfg, {combo}, 77);
    ASSERT_EQ(study.rows.size(), 1u);

    auto spec = base;
    spec.seed = replicate_seed(77, 0);
    const auto gt = generate(spec);
    const auto res = run_pipeline(input_from(gt), cfg);
    const auto counts = tp_fp(res.calls, gt);
    std::vector<double> de, null;
    for (int j = 0; j < spec.p - spec.n_controls; ++j) {
        (j < spec.n_de ? de : null).push_back(res.tests[static_cast<std::size_t>(j)].pvalue);
    }
    EXPECT_EQ(study.rows[0].tp, counts.tp);
    EXPECT_EQ(study.rows[0].fp, counts.fp);
    EXPECT_EQ(study.rows[0].auc, oracle::pairwise_auc(de, null));
    EXPECT_EQ(study.rows[0].mean_iqr, res.rle.mean_iqr);
    EXPECT_EQ(study.rows[0].seed, spec.seed);
}

TEST(Replicates, DeterministicAndComplete) {
    auto cfg = small_config();
    const auto combos = all_combinations();
    const auto a = run_replicates(small_scenario(), 3, cfg, combos, 5);
    cfg.threads = 3;
    const auto b = run_replicates(small_scenario(), 3, cfg, combos, 5);
    EXPECT_EQ(a.failed, 0);
    ASSERT_EQ(a.rows.size(), 30u);
    ASSERT_EQ(b.rows.size(), 30u);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_EQ(a.rows[i].combination, b.rows[i].combination);
        EXPECT_EQ(a.rows[i].tp, b.rows[i].tp);
        EXPECT_EQ(a.rows[i].fp, b.rows[i].fp);
        EXPECT_EQ(a.rows[i].auc, b.rows[i].auc);
        EXPECT_EQ(a.rows[i].mean_iqr, b.rows[i].mean_iqr);
    }
    for (const auto& c : combos) {
        int count = 0;
        for (const auto& r : a.rows) {
            count += r.combination == c ? 1 : 0;
        }
        EXPECT_EQ(count, 3) << c.name();
        const auto& s = a.find(c);
        EXPECT_EQ(s.replicates, 3);
        EXPECT_GE(s.mean_auc, 0.0);
        EXPECT_LE(s.mean_auc, 1.0);
        EXPECT_GE(s.se_auc, 0.0);
    }
    EXPECT_EQ(a.summary.size(), 10u);
}

TEST(Replicates, FailuresAreExcludedAndCounted) {
    auto cfg = small_config();
    cfg.k = 80;  // more factors than samples: every replicate fails
    const auto study = run_replicates(small_scenario(), 2, cfg, {{RuvMethod::RUV2, TestMethod::LSE}}, 1);
    EXPECT_EQ(study.failed, 2);
    EXPECT_EQ(study.failures.size(), 2u);
    EXPECT_TRUE(study.rows.empty());
    EXPECT_EQ(study.summary[0].replicates, 0);
}

TEST(MeanSe, Values) {
    double m = 0, se = 0;
    detail::mean_se({1, 2, 3, 4}, m, se);
    EXPECT_DOUBLE_EQ(m, 2.5);
    EXPECT_NEAR(se, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
}

TEST(ScanK, OneRowPerK) {
    const auto gt = generate(small_scenario());
    auto cfg = small_config();
    cfg.test = TestMethod::LSE;
    const auto rows = scan_k(input_from(gt), cfg, 1, 4, gt.de_genes(), 20);
    ASSERT_EQ(rows.size(), 4u);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i].k, static_cast<int>(i) + 1);
        EXPECT_LE(rows[i].tp, rows[i].n_calls);
        EXPECT_LE(rows[i].tp_top, 20);
    }
    EXPECT_THROW(scan_k(input_from(gt), cfg, 0, 3, gt.de_genes()), Error);
    EXPECT_THROW(scan_k(input_from(gt), cfg, 4, 3, gt.de_genes()), Error);
}

TEST(Bundle, WritesEveryFile) {
    const auto gt = generate(small_scenario());
    const auto cfg = small_config();
    const auto input = input_from(gt);
    const auto res = run_pipeline(input, cfg);
    const auto dir = (std::filesystem::temp_directory_path() / "gruv_test_bundle").string();
    std::filesystem::remove_all(dir);
    write_bundle(dir, input, cfg, res, {{"seed", 3}});
    for (const char* name : {"pvalues.tsv", "de_calls.tsv", "what_adjusted.tsv", "what.tsv", "rle.tsv", "eigratio.tsv", "run_manifest.json"}) {
        EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(dir) / name)) << name;
    }

    auto in = detail::open_input(dir + "/pvalues.tsv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line.rfind("gene_id\tindex\tbeta", 0), 0u);
    int rows = 0;
    while (std::getline(in, line)) {
        const auto cells = detail::split(line, '\t');
        const double p = parse_double(cells[5], "pvalue");
        EXPECT_EQ(p, res.tests[static_cast<std::size_t>(rows)].pvalue);
        ++rows;
    }
    EXPECT_EQ(rows, 200);

    const auto adjusted = read_table(dir + "/what_adjusted.tsv");
    EXPECT_EQ(adjusted.values, res.adjusted);

    auto mf = detail::open_input(dir + "/run_manifest.json");
    const auto j = nlohmann::json::parse(mf);
    EXPECT_EQ(j["config"]["ruv_method"], "gamma");
    EXPECT_EQ(j["p"], 200);
    EXPECT_EQ(j["seed"], 3);
    EXPECT_EQ(j["de_calls"], res.calls.indices.size());
}
