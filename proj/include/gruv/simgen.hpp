#ifndef GRUV_SIMGEN_HPP
#define GRUV_SIMGEN_HPP

#include "core.hpp"
#include "rng.hpp"

#include <cmath>
#include <cstdint>
#include <istream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

/**
 * @file simgen.hpp
 *
 * @brief Synthetic expression data with batch and random unwanted variation and structured outliers.
 *
 * Model: `Y0 = 1 delta + X beta + W alpha + E` with
 * - `X_i ~ Bernoulli(0.5)`;
 * - `W = [W1, W2]`, W1 the indicators of 5 equiprobable batches (batch 5 is the all-zero reference row),
 *   `W2 = 2 X zeta + E2` with `zeta` uniform on the unit sphere in R^3 and `E2` standard normal;
 * - `delta_j ~ N(0, 4)`, `beta_j ~ N(1, 0.04)` for the first `n_de` genes and 0 otherwise, `alpha_j ~ N(0, I_7)`;
 * - `sigma_j^2 = 2 / G_j` with `G_j ~ Gamma(3, 1)`, an inverse-gamma with shape 3 and scale 2, so that E = Var = 1.
 *
 * Outliers: `O = [X, W1] zeta_o + E_o` with `zeta_o ~ N(0, sigma_o^2)` entries and `E_o` standard normal,
 * then all entries of `round(p (1 - sqrt(pi_o)))` random columns are zeroed and each remaining entry is zeroed
 * with probability `1 - sqrt(pi_o)`. `Y = Y0 + O`.
 *
 * Each block draws from its own counter-based stream keyed by the scenario seed.
 */

namespace gruv {

/**
 * @brief Simulation parameters. The control genes are the last `n_controls` genes.
 */
struct ScenarioSpec {
    static constexpr int k_true = 7;
    static constexpr int n_batch_columns = 4;

    int n = 100;
    int p = 1000;
    int n_de = 100;
    double pi_o = 0.05;
    double sigma_o = 20;
    int n_controls = 200;
    std::uint64_t seed = 1;

    void validate() const {
        if (n < 2 || p < 1) {
            throw Error("scenario needs n >= 2 and p >= 1");
        }
        if (n_de < 0 || n_controls < 0 || n_de + n_controls > p) {
            throw Error("scenario needs n_de + n_controls <= p");
        }
        if (!(pi_o >= 0 && pi_o <= 1)) {
            throw Error("pi_o must lie in [0, 1]");
        }
        if (!(sigma_o >= 0)) {
            throw Error("sigma_o must be nonnegative");
        }
    }

    std::vector<Index> controls() const {
        std::vector<Index> out;
        for (int j = p - n_controls; j < p; ++j) {
            out.push_back(j);
        }
        return out;
    }
};

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/**
 * @brief Simulated data together with every latent quantity used to produce it. X and W are stored uncentered.
 */
struct GroundTruth {
    Vector x;
    Matrix w;
    Vector beta;
    Vector delta;
    Matrix alpha;
    Vector sigma2;
    BoolMatrix contamination_mask;
    ExpressionMatrix y0;
    ExpressionMatrix y;
    std::vector<Index> controls;

    std::vector<Index> de_genes() const {
        std::vector<Index> out;
        for (Index j = 0; j < beta.size(); ++j) {
            if (beta(j) != 0) {
                out.push_back(j);
            }
        }
        return out;
    }
};

namespace simgen_streams {
enum : std::uint64_t {
    covariate = 1,
    batch,
    zeta,
    w_noise,
    delta,
    beta,
    alpha,
    sigma2,
    noise,
    outlier_zeta,
    outlier_noise,
    outlier_columns,
    outlier_entries,
};
}

/**
 * @brief Outlier matrix and its support.
 */
struct OutlierDraw {
    Matrix o;
    BoolMatrix mask;
};

/**
 * Two-stage sparse outliers `O = basis * zeta_o + E_o`, masked column-wise then entry-wise.
 * `basis` is n-by-d; `zeta_o` is d-by-p.
 */
inline OutlierDraw make_outliers(const Matrix& basis, int p, double pi_o, double sigma_o, std::uint64_t seed) {
    const Index n = basis.rows(), d = basis.cols();
    OutlierDraw out;
    out.o = Matrix::Zero(n, p);
    out.mask = BoolMatrix::Constant(n, p, false);

    CounterRng zeta_rng(seed, simgen_streams::outlier_zeta);
    CounterRng noise_rng(seed, simgen_streams::outlier_noise);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix zeta(d, p);
    for (Index j = 0; j < p; ++j) {
        for (Index r = 0; r < d; ++r) {
            zeta(r, j) = sigma_o * normal(zeta_rng);
        }
    }
    Matrix full = basis * zeta;
    normal.reset();
    for (Index j = 0; j < p; ++j) {
        for (Index i = 0; i < n; ++i) {
            full(i, j) += normal(noise_rng);
        }
    }

    const double keep = std::sqrt(pi_o);
    const auto zeroed = static_cast<int>(std::lround(static_cast<double>(p) * (1.0 - keep)));

    // Partial Fisher-Yates: the first `zeroed` entries of `order` are the removed columns.
    std::vector<Index> order(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) {
        order[static_cast<std::size_t>(j)] = j;
    }
    CounterRng column_rng(seed, simgen_streams::outlier_columns);
    for (int c = 0; c < zeroed; ++c) {
        std::uniform_int_distribution<int> pick(c, p - 1);
        std::swap(order[static_cast<std::size_t>(c)], order[static_cast<std::size_t>(pick(column_rng))]);
    }
    std::vector<char> kept(static_cast<std::size_t>(p), 1);
    for (int c = 0; c < zeroed; ++c) {
        kept[static_cast<std::size_t>(order[static_cast<std::size_t>(c)])] = 0;
    }

    CounterRng entry_rng(seed, simgen_streams::outlier_entries);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Index j = 0; j < p; ++j) {
        if (!kept[static_cast<std::size_t>(j)]) {
            continue;
        }
        for (Index i = 0; i < n; ++i) {
            // Zeroed with probability 1 - sqrt(pi_o).
            if (unif(entry_rng) < keep) {
                out.o(i, j) = full(i, j);
                out.mask(i, j) = out.o(i, j) != 0;
            }
        }
    }
    return out;
}

/**
 * Replace `gt.y` by `gt.y0 + O` with `O` drawn from `[X, W1]`.
 */
inline GroundTruth inject_outliers(GroundTruth gt, const ScenarioSpec& spec) {
    spec.validate();
    const Index n = gt.x.size();
    Matrix basis(n, 1 + ScenarioSpec::n_batch_columns);
    basis.col(0) = gt.x;
    basis.rightCols(ScenarioSpec::n_batch_columns) = gt.w.leftCols(ScenarioSpec::n_batch_columns);
    auto draw = make_outliers(basis, spec.p, spec.pi_o, spec.sigma_o, spec.seed);
    gt.y = ExpressionMatrix(gt.y0.values() + draw.o, gt.y0.gene_ids(), gt.y0.sample_ids());
    gt.contamination_mask = std::move(draw.mask);
    return gt;
}

/**
 * Uncontaminated data; `y` equals `y0` and the mask is all false.
 */
inline GroundTruth generate_clean(const ScenarioSpec& spec) {
    spec.validate();
    const Index n = spec.n, p = spec.p;
    constexpr int k = ScenarioSpec::k_true, nb = ScenarioSpec::n_batch_columns;
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto fresh_normal = [&](std::uint64_t stream) {
        normal.reset();
        return CounterRng(spec.seed, stream);
    };

    GroundTruth gt;
    {
        CounterRng rng(spec.seed, simgen_streams::covariate);
        std::bernoulli_distribution coin(0.5);
        gt.x.resize(n);
        for (Index i = 0; i < n; ++i) {
            gt.x(i) = coin(rng) ? 1.0 : 0.0;
        }
    }

    gt.w = Matrix::Zero(n, k);
    {
        CounterRng rng(spec.seed, simgen_streams::batch);
        std::uniform_int_distribution<int> batch(0, nb);
        for (Index i = 0; i < n; ++i) {
            const int b = batch(rng);
            if (b < nb) {
                gt.w(i, b) = 1.0;
            }
        }
    }
    {
        auto rng = fresh_normal(simgen_streams::zeta);
        Eigen::RowVector3d zeta;
        for (int c = 0; c < 3; ++c) {
            zeta(c) = normal(rng);
        }
        zeta /= zeta.norm();
        auto noise = fresh_normal(simgen_streams::w_noise);
        for (Index c = 0; c < 3; ++c) {
            for (Index i = 0; i < n; ++i) {
                gt.w(i, nb + c) = 2.0 * gt.x(i) * zeta(c) + normal(noise);
            }
        }
    }

    gt.delta.resize(p);
    {
        auto rng = fresh_normal(simgen_streams::delta);
        for (Index j = 0; j < p; ++j) {
            gt.delta(j) = 2.0 * normal(rng);
        }
    }
    gt.beta = Vector::Zero(p);
    {
        auto rng = fresh_normal(simgen_streams::beta);
        for (Index j = 0; j < spec.n_de; ++j) {
            gt.beta(j) = 1.0 + 0.2 * normal(rng);
        }
    }
    gt.alpha.resize(k, p);
    {
        auto rng = fresh_normal(simgen_streams::alpha);
        for (Index j = 0; j < p; ++j) {
            for (Index r = 0; r < k; ++r) {
                gt.alpha(r, j) = normal(rng);
            }
        }
    }
    gt.sigma2.resize(p);
    {
        CounterRng rng(spec.seed, simgen_streams::sigma2);
        std::gamma_distribution<double> shape3(3.0, 1.0);
        for (Index j = 0; j < p; ++j) {
            gt.sigma2(j) = 2.0 / shape3(rng);
        }
    }

    Matrix y0 = gt.x * gt.beta.transpose() + gt.w * gt.alpha;
    y0.rowwise() += gt.delta.transpose();
    {
        auto rng = fresh_normal(simgen_streams::noise);
        for (Index j = 0; j < p; ++j) {
            const double sd = std::sqrt(gt.sigma2(j));
            for (Index i = 0; i < n; ++i) {
                y0(i, j) += sd * normal(rng);
            }
        }
    }

    gt.y0 = ExpressionMatrix(std::move(y0));
    gt.y = gt.y0;
    gt.contamination_mask = BoolMatrix::Constant(n, p, false);
    gt.controls = spec.controls();
    return gt;
}

/**
 * Full scenario: clean data followed by `inject_outliers()`.
 */
inline GroundTruth generate(const ScenarioSpec& spec) {
    return inject_outliers(generate_clean(spec), spec);
}

/**
 * Parse `key = value` lines (`#` starts a comment) into a scenario.
 * Keys: n, p, n_de, pi_o, sigma_o, n_controls, seed.
 */
inline ScenarioSpec parse_scenario(std::istream& in, ScenarioSpec spec = {}) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        const auto eq = line.find('=');
        const auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) {
                return std::string();
            }
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        if (eq == std::string::npos) {
            if (!trim(line).empty()) {
                throw Error("scenario line " + std::to_string(lineno) + ": expected key = value");
            }
            continue;
        }
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        std::istringstream vs(value);
        bool ok = true;
        if (key == "n") {
            ok = static_cast<bool>(vs >> spec.n);
        } else if (key == "p") {
            ok = static_cast<bool>(vs >> spec.p);
        } else if (key == "n_de") {
            ok = static_cast<bool>(vs >> spec.n_de);
        } else if (key == "pi_o") {
            ok = static_cast<bool>(vs >> spec.pi_o);
        } else if (key == "sigma_o") {
            ok = static_cast<bool>(vs >> spec.sigma_o);
        } else if (key == "n_controls") {
            ok = static_cast<bool>(vs >> spec.n_controls);
        } else if (key == "seed") {
            ok = static_cast<bool>(vs >> spec.seed);
        } else {
            throw Error("scenario line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
        std::string rest;
        if (!ok || (vs >> rest)) {
            throw Error("scenario line " + std::to_string(lineno) + ": bad value for '" + key + "'");
        }
    }
    spec.validate();
    return spec;
}

}

#endif
