#include "orthogmm/factor_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <thread>

#include "orthogmm/distributions.hpp"
#include "orthogmm/errors.hpp"

namespace orthogmm {

namespace {

double median_of_sorted_descending(const Eigen::VectorXd& v) {
    const Eigen::Index n = v.size();
    return n % 2 == 1 ? v(n / 2) : 0.5 * (v(n / 2 - 1) + v(n / 2));
}

// Companion-matrix spectral radius of an AR polynomial.
double ar_spectral_radius(const Eigen::VectorXd& coeffs) {
    const int p = static_cast<int>(coeffs.size());
    if (p == 0) return 0.0;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
    companion.row(0) = coeffs.transpose();
    if (p > 1) companion.bottomLeftCorner(p - 1, p - 1).setIdentity();
    return companion.eigenvalues().cwiseAbs().maxCoeff();
}

// splitmix64: decorrelates (seed, replication) keys into stream seeds.
std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

int thread_budget(int requested) {
    int budget = requested > 0 ? requested
                               : std::max(1u, std::thread::hardware_concurrency());
    if (const char* cap_str = std::getenv("ORTHO_THREADS")) {
        const int cap = std::atoi(cap_str);
        if (cap > 0) budget = std::min(budget, cap);
    }
    return std::max(1, budget);
}

}  // namespace

SvtResult svt_rank(const Eigen::MatrixXd& panel_block) {
    if (panel_block.rows() < 3 || panel_block.cols() < 3) {
        throw ArgumentError("svt_rank: block must be at least 3x3");
    }
    Eigen::MatrixXd demeaned = panel_block;
    demeaned.rowwise() -= panel_block.colwise().mean();

    SvtResult result;
    if (demeaned.cwiseAbs().maxCoeff() == 0.0) {
        result.rank = 1;
        result.degenerate = true;
        return result;
    }
    const Eigen::VectorXd sv = demeaned.jacobiSvd().singularValues();
    const double threshold = 2.858 * median_of_sorted_descending(sv);
    int count = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > threshold) ++count;
    }
    result.rank = std::max(1, count);
    return result;
}

PcaFit pca_fit(const Eigen::MatrixXd& panel_block, int r) {
    const int t = static_cast<int>(panel_block.rows());
    const int units = static_cast<int>(panel_block.cols());
    if (r < 1 || r > std::min(t, units)) {
        throw ArgumentError("pca_fit: factor count out of range");
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(panel_block,
                                          Eigen::ComputeThinU | Eigen::ComputeThinV);
    PcaFit fit;
    fit.factor_series = svd.matrixU().leftCols(r) *
                        svd.singularValues().head(r).asDiagonal();
    fit.loadings = svd.matrixV().leftCols(r).transpose();

    for (int k = 0; k < r; ++k) {
        Eigen::VectorXd col = fit.factor_series.col(k);
        const double sd = t > 1 ? std::sqrt((col.array() - col.mean()).square().sum() / (t - 1))
                                : 0.0;
        if (sd > 0.0) {
            fit.factor_series.col(k) /= sd;
            fit.loadings.row(k) *= sd;
        }
        for (int u = 0; u < units; ++u) {
            const double entry = fit.loadings(k, u);
            if (entry == 0.0) continue;
            if (entry < 0.0) {
                fit.loadings.row(k) *= -1.0;
                fit.factor_series.col(k) *= -1.0;
            }
            break;
        }
    }
    return fit;
}

ArFit fit_ar(const Eigen::VectorXd& series, int max_order) {
    const int t = static_cast<int>(series.size());
    if (max_order < 0) throw ArgumentError("fit_ar: max_order must be nonnegative");
    if (t < std::max(3, 3 * max_order)) {
        throw ArgumentError("fit_ar: need at least 3 * max_order observations");
    }

    ArFit best;
    if ((series.array() - series(0)).abs().maxCoeff() == 0.0) {
        best.order = 0;
        best.intercept = series(0);
        best.coefficients.resize(0);
        best.innovation_variance = 0.0;
        best.constant_series = true;
        return best;
    }

    double best_aic = std::numeric_limits<double>::infinity();
    for (int order = 0; order <= max_order; ++order) {
        const int t_eff = t - order;
        Eigen::MatrixXd design(t_eff, order + 1);
        design.col(0).setOnes();
        Eigen::VectorXd target(t_eff);
        for (int i = 0; i < t_eff; ++i) {
            target(i) = series(order + i);
            for (int lag = 1; lag <= order; ++lag) {
                design(i, lag) = series(order + i - lag);
            }
        }
        const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(target);
        const double rss = (target - design * coef).squaredNorm();
        const double aic =
            t_eff * std::log(std::max(rss / t_eff, 1e-300)) + 2.0 * (order + 1);
        if (aic < best_aic) {
            best_aic = aic;
            best.order = order;
            best.intercept = coef(0);
            best.coefficients = coef.tail(order);
            best.innovation_variance = rss / t_eff;
        }
    }

    while (ar_spectral_radius(best.coefficients) >= 1.0 - 1e-6) {
        best.coefficients *= 0.99;
        best.stabilized = true;
    }
    return best;
}

void FactorModelFit::validate() const {
    if (r < 1 || loadings.rows() != r) {
        throw ArgumentError("factor model: loadings row count must equal the factor count");
    }
    if (static_cast<int>(factor_dynamics.size()) != r) {
        throw ArgumentError("factor model: one AR fit per factor required");
    }
    const int units = num_units();
    if (shock_variances.size() != units ||
        static_cast<int>(unit_names.size()) != units) {
        throw ArgumentError("factor model: per-unit fields must match loading columns");
    }
    if ((shock_variances.array() < 0.0).any()) {
        throw ArgumentError("factor model: shock variances must be nonnegative");
    }
    for (const ArFit& ar : factor_dynamics) {
        if (ar_spectral_radius(ar.coefficients) >= 1.0 - 1e-6) {
            throw ArgumentError("factor model: AR dynamics are not stable");
        }
        if (ar.innovation_variance < 0.0) {
            throw ArgumentError("factor model: innovation variance must be nonnegative");
        }
    }
}

FactorModelFit calibrate(const PanelData& panel, int max_ar_order) {
    panel.validate();
    std::vector<int> used;
    used.push_back(panel.treated_unit);
    used.insert(used.end(), panel.control_units.begin(), panel.control_units.end());
    used.insert(used.end(), panel.instrument_units.begin(), panel.instrument_units.end());
    const int units = static_cast<int>(used.size());
    if (units < 2) {
        throw ArgumentError("calibrate: need at least two units to fit a factor model");
    }
    const int t0 = panel.t0();

    Eigen::MatrixXd block(t0, units);
    for (int u = 0; u < units; ++u) {
        block.col(u) = panel.outcomes.row(used[u]).head(t0).transpose();
    }

    const SvtResult svt = svt_rank(block);
    const int r = std::min(svt.rank, std::min(t0, units));
    const PcaFit pca = pca_fit(block, r);

    FactorModelFit fit;
    fit.r = r;
    fit.loadings = pca.loadings;
    fit.degenerate_rank = svt.degenerate;
    const int ar_cap = std::min(max_ar_order, t0 / 3);
    for (int k = 0; k < r; ++k) {
        fit.factor_dynamics.push_back(fit_ar(pca.factor_series.col(k), ar_cap));
    }
    const Eigen::MatrixXd residuals = block - pca.factor_series * pca.loadings;
    fit.shock_variances.resize(units);
    for (int u = 0; u < units; ++u) {
        const Eigen::VectorXd col = residuals.col(u);
        fit.shock_variances(u) =
            t0 > 1 ? (col.array() - col.mean()).square().sum() / (t0 - 1) : 0.0;
    }

    fit.unit_names.reserve(units);
    for (int u : used) fit.unit_names.push_back(panel.unit_names[u]);
    fit.treated_unit = 0;
    for (int j = 0; j < static_cast<int>(panel.control_units.size()); ++j) {
        fit.control_units.push_back(1 + j);
    }
    for (int q = 0; q < static_cast<int>(panel.instrument_units.size()); ++q) {
        fit.instrument_units.push_back(1 + static_cast<int>(panel.control_units.size()) + q);
    }
    fit.include_constant_instrument = panel.include_constant_instrument;
    return fit;
}

void SimConfig::validate() const {
    if (t0 < 2 || t1 < 2) throw ArgumentError("sim config: t0 and t1 must be >= 2");
    if (replications < 1) throw ArgumentError("sim config: replications must be >= 1");
    if (effect.size() != 0 && effect.size() != 1 && effect.size() != t1) {
        throw ArgumentError("sim config: effect must be empty, a constant, or one per post period");
    }
    for (double level : levels) {
        if (!(level > 0.0 && level < 1.0)) {
            throw ArgumentError("sim config: levels must lie in (0,1)");
        }
    }
}

PanelData sample_panel(const FactorModelFit& fit, const SimConfig& config,
                       std::uint64_t replication) {
    fit.validate();
    config.validate();
    if (config.j != 0 && config.j != static_cast<int>(fit.control_units.size())) {
        throw ArgumentError("sample_panel: config J does not match the fitted model");
    }
    if (config.instrument_count != 0 &&
        config.instrument_count != static_cast<int>(fit.instrument_units.size())) {
        throw ArgumentError("sample_panel: config instrument count does not match the model");
    }

    const int units = fit.num_units();
    const int periods = config.t0 + config.t1;
    constexpr int burn_in = 200;

    std::mt19937_64 rng(mix64(mix64(config.seed) ^ replication));
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Factor paths first, then shocks, in a fixed order; the effect is added
    // afterwards so paired draws with different effects share all noise.
    Eigen::MatrixXd factors(periods, fit.r);
    for (int k = 0; k < fit.r; ++k) {
        const ArFit& ar = fit.factor_dynamics[k];
        const double innov_sd = std::sqrt(ar.innovation_variance);
        std::vector<double> path(burn_in + periods, 0.0);
        for (int t = 0; t < burn_in + periods; ++t) {
            double value = ar.intercept + innov_sd * gauss(rng);
            for (int lag = 1; lag <= ar.order; ++lag) {
                const int idx = t - lag;
                if (idx >= 0) value += ar.coefficients(lag - 1) * path[idx];
            }
            path[t] = value;
        }
        for (int t = 0; t < periods; ++t) factors(t, k) = path[burn_in + t];
    }

    PanelData panel;
    panel.outcomes.resize(units, periods);
    for (int u = 0; u < units; ++u) {
        const double shock_sd = std::sqrt(fit.shock_variances(u));
        for (int t = 0; t < periods; ++t) {
            panel.outcomes(u, t) =
                factors.row(t).dot(fit.loadings.col(u)) + shock_sd * gauss(rng);
        }
    }
    for (int t = 0; t < config.t1; ++t) {
        double effect = 0.0;
        if (config.effect.size() == 1) {
            effect = config.effect(0);
        } else if (config.effect.size() == config.t1) {
            effect = config.effect(t);
        }
        panel.outcomes(fit.treated_unit, config.t0 + t) += effect;
    }

    panel.unit_names = fit.unit_names;
    panel.treated_unit = fit.treated_unit;
    panel.control_units = fit.control_units;
    panel.instrument_units = fit.instrument_units;
    panel.include_constant_instrument = fit.include_constant_instrument;
    panel.treatment_start = config.t0;
    return panel;
}

McResult run_monte_carlo(const FactorModelFit& fit, const SimConfig& config) {
    fit.validate();
    config.validate();

    McResult result;
    result.levels = config.levels;
    result.replications = config.replications;
    result.records.resize(config.replications);

    const int workers =
        std::min(thread_budget(config.threads), config.replications);
    std::atomic<int> next{0};
    const auto worker = [&] {
        for (int rep = next.fetch_add(1); rep < config.replications;
             rep = next.fetch_add(1)) {
            ReplicationRecord& record = result.records[rep];
            record.replication = rep;
            try {
                const PanelData panel =
                    sample_panel(fit, config, static_cast<std::uint64_t>(rep));
                SceOverrides overrides;
                overrides.k = config.k_override;
                const SceFit sce = fit_sce(panel, overrides);
                record.ok = true;
                record.beta_tilde = sce.beta_tilde;
                record.p_value = sce.report.p_value;
                record.v_hat = sce.report.v_hat;
                record.k = sce.report.K;
            } catch (const NumericalError& e) {
                record.ok = false;
                record.error = e.what();
            }
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (std::thread& thread : pool) thread.join();
    }

    std::vector<double> betas;
    result.rejections.assign(config.levels.size(), 0);
    for (const ReplicationRecord& record : result.records) {
        if (!record.ok) {
            ++result.failures;
            continue;
        }
        ++result.successes;
        betas.push_back(record.beta_tilde);
        for (size_t l = 0; l < config.levels.size(); ++l) {
            if (record.p_value < config.levels[l]) ++result.rejections[l];
        }
    }
    result.failure_warning =
        result.failures > 0.05 * static_cast<double>(config.replications);

    result.rejection_rates.resize(config.levels.size());
    for (size_t l = 0; l < config.levels.size(); ++l) {
        result.rejection_rates[l] =
            result.successes > 0
                ? static_cast<double>(result.rejections[l]) / result.successes
                : 0.0;
    }
    if (!betas.empty()) {
        const Eigen::Map<const Eigen::VectorXd> beta_vec(betas.data(), betas.size());
        result.beta_mean = beta_vec.mean();
        result.beta_sd =
            betas.size() > 1
                ? std::sqrt((beta_vec.array() - result.beta_mean).square().sum() /
                            (betas.size() - 1))
                : 0.0;
        if (betas.size() >= 20 && result.beta_sd > 0.0) {
            const AdResult ad = normality_check(beta_vec);
            result.ad_stat = ad.stat;
            result.ad_p = ad.p_value;
        }
    }
    return result;
}

AdResult normality_check(const Eigen::VectorXd& samples) {
    const int n = static_cast<int>(samples.size());
    if (n < 20) throw ArgumentError("normality_check: need at least 20 samples");
    const double mean = samples.mean();
    const double sd = std::sqrt((samples.array() - mean).square().sum() / (n - 1));
    if (!(sd > 0.0)) {
        throw DegenerateVarianceError("normality_check: samples are constant");
    }

    std::vector<double> z(samples.data(), samples.data() + n);
    for (double& v : z) v = (v - mean) / sd;
    std::sort(z.begin(), z.end());

    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double lo = std::clamp(normal_cdf(z[i]), 1e-300, 1.0 - 1e-16);
        const double hi = std::clamp(normal_cdf(z[n - 1 - i]), 1e-300, 1.0 - 1e-16);
        acc += (2.0 * i + 1.0) * (std::log(lo) + std::log1p(-hi));
    }
    const double a2 = -n - acc / n;
    const double a2_star = a2 * (1.0 + 0.75 / n + 2.25 / (n * n));

    // Case-3 approximation (mean and variance estimated).
    double p;
    if (a2_star < 0.2) {
        p = 1.0 - std::exp(-13.436 + 101.14 * a2_star - 223.73 * a2_star * a2_star);
    } else if (a2_star < 0.34) {
        p = 1.0 - std::exp(-8.318 + 42.796 * a2_star - 59.938 * a2_star * a2_star);
    } else if (a2_star < 0.6) {
        p = std::exp(0.9177 - 4.279 * a2_star - 1.38 * a2_star * a2_star);
    } else {
        p = std::exp(1.2937 - 5.709 * a2_star + 0.0186 * a2_star * a2_star);
    }
    return {a2_star, std::clamp(p, 0.0, 1.0)};
}

double size_adjusted_power(std::vector<double> null_pvalues,
                           const std::vector<double>& alt_pvalues, double level) {
    if (null_pvalues.empty() || alt_pvalues.empty()) {
        throw ArgumentError("size_adjusted_power: empty p-value vectors");
    }
    std::sort(null_pvalues.begin(), null_pvalues.end());
    const size_t idx = static_cast<size_t>(level * null_pvalues.size());
    const double threshold = null_pvalues[std::min(idx, null_pvalues.size() - 1)];
    int rejections = 0;
    for (double p : alt_pvalues) {
        if (p <= threshold) ++rejections;
    }
    return static_cast<double>(rejections) / alt_pvalues.size();
}

}  // namespace orthogmm
