#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "loschmidt/config.hpp"
#include "loschmidt/dr_fidelity.hpp"
#include "loschmidt/quantum.hpp"
#include "loschmidt/statistics.hpp"
#include "loschmidt/table_io.hpp"
#include "loschmidt/version.hpp"

namespace loschmidt {

struct ManifestEntry {
    std::string file;
    std::size_t rows = 0;
    bool flagged = false;
    std::string note = "-";
};

struct RunManifest {
    std::string config_hash;
    std::string code_version = version;
    double wall_seconds = 0.0;
    std::vector<ManifestEntry> outputs;

    bool any_flagged() const {
        for (const auto& e : outputs)
            if (e.flagged) return true;
        return false;
    }
};

struct CompareReport {
    std::vector<int> times;
    std::vector<double> abs_dev;
    SlopeFit rate_a, rate_b;
    double rate_ratio = 1.0;
    double max_dev_before_cutoff = 0.0;
    double cutoff = 0.01;
};

// Pointwise deviation and fitted-rate ratio of two fidelity curves on the
// same time grid.
inline CompareReport compare_curves(const FidelityCurve& a, const FidelityCurve& b,
                                    FitWindow rate_window, double cutoff = 0.01) {
    if (a.times != b.times)
        throw std::invalid_argument("compare_curves: time grids do not match");
    CompareReport rep;
    rep.times = a.times;
    rep.cutoff = cutoff;
    rep.abs_dev.resize(a.times.size());
    for (std::size_t i = 0; i < a.times.size(); ++i) {
        rep.abs_dev[i] = std::fabs(a.m[i] - b.m[i]);
        if (a.m[i] >= cutoff && b.m[i] >= cutoff)
            rep.max_dev_before_cutoff = std::max(rep.max_dev_before_cutoff, rep.abs_dev[i]);
    }
    // decay rates: -slope of log M against t over the window
    rep.rate_a = fit_exponential_rate(a.times, a.m, rate_window);
    rep.rate_b = fit_exponential_rate(b.times, b.m, rate_window);
    const double ra = -rep.rate_a.slope, rb = -rep.rate_b.slope;
    if (std::fabs(ra) < 1e-12 && std::fabs(rb) < 1e-12) rep.rate_ratio = 1.0;
    else if (std::fabs(rb) < 1e-300) rep.rate_ratio = std::numeric_limits<double>::infinity();
    else rep.rate_ratio = ra / rb;
    return rep;
}

namespace detail {

class RunWriter {
public:
    RunWriter(std::string dir, std::string hash) : dir_(std::move(dir)), hash_(std::move(hash)) {
        std::filesystem::create_directories(dir_);
    }

    void emit(const Table& t, bool flagged = false, const std::string& note = "-") {
        t.write(dir_, hash_);
        entries_.push_back({t.name(), t.rows(), flagged, note});
    }

    void emit_text(const std::string& name, const std::string& content) {
        const std::string path = dir_ + "/" + name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << content;
        std::size_t lines = 0;
        for (char ch : content)
            if (ch == '\n') ++lines;
        entries_.push_back({name, lines, false, "-"});
    }

    void note(const std::string& pseudo_file, bool flagged, const std::string& note) {
        entries_.push_back({pseudo_file, 0, flagged, note});
    }

    const std::string& dir() const { return dir_; }
    const std::string& hash() const { return hash_; }
    std::vector<ManifestEntry> take() { return std::move(entries_); }

private:
    std::string dir_, hash_;
    std::vector<ManifestEntry> entries_;
};

inline void add_fit_row(Table& t, const std::string& name, const SlopeFit& f) {
    t.add_text_row({name, format_double(f.slope), format_double(f.intercept),
                    format_double(f.window.lo), format_double(f.window.hi),
                    format_double(f.residual_rms), format_double(f.r_squared),
                    std::to_string(f.n_points)});
}

inline Table make_fit_table() {
    return Table("fits.tsv",
                 {"name", "slope", "intercept", "window_lo", "window_hi", "residual_rms",
                  "r_squared", "n_points"});
}

inline std::string gnuplot_header() {
    return "# generated plot script (gnuplot)\nset datafile commentschars '#'\nset key left bottom\n";
}

inline bool window_set(FitWindow w) { return w.hi > w.lo; }

}  // namespace detail

inline RunManifest run(const ExperimentConfig& cfg, const std::string& out_dir,
                       unsigned workers = 1) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string canon = to_text(cfg);
    detail::RunWriter w(out_dir, hash_hex(canon));
    w.emit_text("config.txt", canon);

    const EnsembleSpec ens = ensemble_of(cfg);
    std::string plot = detail::gnuplot_header();

    switch (cfg.kind) {
        case ExperimentKind::VarianceVsTime: {
            const VarianceSeries v = variance_delta_action(ens, cfg.map, cfg.steps, workers);
            Table tab("variance.tsv", {"t", "variance", "se"});
            for (std::size_t i = 0; i < v.times.size(); ++i)
                tab.add_row({static_cast<double>(v.times[i]), v.value[i], v.se[i]});
            w.emit(tab);
            Table fits = detail::make_fit_table();
            if (detail::window_set(cfg.fit_primary)) {
                try {
                    detail::add_fit_row(fits, "variance_loglog", fit_loglog_slope(v, cfg.fit_primary));
                    w.emit(fits);
                } catch (const std::exception& e) {
                    w.note("fits.tsv", true, e.what());
                }
            } else {
                w.emit(fits);
            }
            plot += "set logscale xy\nplot 'variance.tsv' using 1:2 with linespoints title 'var dS'\n";
            break;
        }
        case ExperimentKind::PairVarianceVsTime: {
            const PairSpec pspec{ens, cfg.p_minus};
            const VarianceSeries raw =
                pair_variance_vs_time(pspec, cfg.map, cfg.steps, Smoothing::None, workers);
            const bool smooth = cfg.smoothing == Smoothing::WindowHalfT;
            const VarianceSeries fitted = smooth ? window_average_half_t(raw) : raw;
            Table tab("pair_variance.tsv", {"t", "second_moment", "se", "smoothed"});
            for (std::size_t i = 0; i < raw.times.size(); ++i)
                tab.add_row({static_cast<double>(raw.times[i]), raw.value[i], raw.se[i],
                             fitted.value[i]});
            w.emit(tab);
            Table fits = detail::make_fit_table();
            std::optional<SlopeFit> early, late;
            try {
                if (detail::window_set(cfg.fit_early)) {
                    early = cfg.fit_early_space == FitSpace::SemiLog
                                ? fit_exponential_rate(fitted, cfg.fit_early)
                                : fit_loglog_slope(fitted, cfg.fit_early);
                    detail::add_fit_row(fits, cfg.fit_early_space == FitSpace::SemiLog
                                                  ? "early_exp_rate"
                                                  : "early_loglog",
                                        *early);
                }
                if (detail::window_set(cfg.fit_late)) {
                    late = fit_loglog_slope(fitted, cfg.fit_late);
                    detail::add_fit_row(fits, "late_loglog", *late);
                }
                if (early && late) {
                    const double tx = crossover_time(
                        *early,
                        cfg.fit_early_space == FitSpace::SemiLog ? FitSpace::SemiLog
                                                                 : FitSpace::LogLog,
                        *late, FitSpace::LogLog);
                    Table xo("crossover.tsv", {"crossover_t"});
                    xo.add_row({tx});
                    w.emit(xo);
                }
                w.emit(fits);
            } catch (const std::exception& e) {
                w.note("fits.tsv", true, e.what());
            }
            plot += "set logscale xy\nplot 'pair_variance.tsv' using 1:2 title 'raw', "
                    "'pair_variance.tsv' using 1:4 with lines title 'smoothed'\n";
            break;
        }
        case ExperimentKind::PairVarianceVsSeparation: {
            const SeparationScan scan = pair_variance_vs_separation(
                ens, cfg.map, cfg.fixed_t, cfg.sep_grid.build(), workers);
            Table tab("separation_scan.tsv", {"p_minus", "second_moment", "se"});
            for (std::size_t i = 0; i < scan.p_minus.size(); ++i)
                tab.add_row({scan.p_minus[i], scan.second_moment[i], scan.se[i]});
            w.emit(tab);
            Table fits = detail::make_fit_table();
            try {
                if (detail::window_set(cfg.fit_small))
                    detail::add_fit_row(fits, "small_separation",
                                        fit_loglog_slope(scan.p_minus, scan.second_moment,
                                                         cfg.fit_small));
                if (detail::window_set(cfg.fit_plateau))
                    detail::add_fit_row(fits, "plateau",
                                        fit_loglog_slope(scan.p_minus, scan.second_moment,
                                                         cfg.fit_plateau));
                w.emit(fits);
            } catch (const std::exception& e) {
                w.note("fits.tsv", true, e.what());
            }
            plot += "set logscale xy\nplot 'separation_scan.tsv' using 1:2 with linespoints "
                    "title 'pair second moment'\n";
            break;
        }
        case ExperimentKind::Correlators: {
            const CorrelatorSeries cv =
                potential_correlator(ens, cfg.map, cfg.corr_t_max, cfg.corr_origins, workers);
            const CorrelatorSeries cf =
                force_correlator(ens, cfg.map, cfg.corr_t_max, cfg.corr_origins, workers);
            Table tv("correlator_v.tsv", {"lag", "C_V", "se"});
            for (std::size_t i = 0; i < cv.lag.size(); ++i)
                tv.add_row({static_cast<double>(cv.lag[i]), cv.value[i], cv.se[i]});
            w.emit(tv);
            Table tf("correlator_f.tsv", {"lag", "C_F", "se"});
            for (std::size_t i = 0; i < cf.lag.size(); ++i)
                tf.add_row({static_cast<double>(cf.lag[i]), cf.value[i], cf.se[i]});
            w.emit(tf);
            const CorrelatorIntegral K = integrate_correlator(cv, IntegralMode::SumToPlateau);
            const CorrelatorIntegral D = integrate_correlator(cf, IntegralMode::SumToPlateau);
            const CorrelatorIntegral Cinf = integrate_correlator(cv, IntegralMode::Cesaro);
            Table ti("integrals.tsv", {"name", "value", "converged", "cut_lag"});
            ti.add_text_row({"K", format_double(K.value), K.converged ? "1" : "0",
                             std::to_string(K.cut_lag)});
            ti.add_text_row({"D", format_double(D.value), D.converged ? "1" : "0",
                             std::to_string(D.cut_lag)});
            ti.add_text_row({"C_V_inf", format_double(Cinf.value), Cinf.converged ? "1" : "0",
                             std::to_string(Cinf.cut_lag)});
            const bool flag = !K.converged || !D.converged || !Cinf.converged;
            w.emit(ti, flag, flag ? "integral still drifting at T_max; partial value" : "-");
            plot += "plot 'correlator_v.tsv' using 1:2 with linespoints title 'C_V', "
                    "'correlator_f.tsv' using 1:2 with linespoints title 'C_F'\n";
            break;
        }
        case ExperimentKind::DrFidelity: {
            const bool want_mc = cfg.dr_method != DrMethod::Eq3Quadrature;
            const bool want_quad = cfg.dr_method != DrMethod::MonteCarlo;
            std::optional<FidelityCurve> mc, quad;
            std::optional<PairVarianceScan> scan;
            if (want_mc) mc = dr_overlap(ens, cfg.map, cfg.hbar, cfg.steps, workers);
            if (want_quad) {
                scan = pair_variance_scan(ens, cfg.map, cfg.steps, cfg.sep_grid.build(), workers);
                quad = fidelity_from_pair_variance(*scan, cfg.hbar);
            }
            const std::size_t nt = static_cast<std::size_t>(cfg.steps) + 1;
            Table tab("dr_fidelity.tsv", {"t", "m_mc", "se_mc", "m_quad", "kurtosis_diag"});
            for (std::size_t i = 0; i < nt; ++i) {
                double kd = 0.0;
                if (scan) {
                    // integrand-weighted mean excess kurtosis across the grid
                    double wsum = 0.0, ksum = 0.0;
                    for (std::size_t g = 0; g < scan->p_minus.size(); ++g) {
                        const double wt = std::exp(-scan->at(i, g) / (2.0 * cfg.hbar * cfg.hbar));
                        wsum += wt;
                        ksum += wt * scan->excess_kurtosis[i * scan->p_minus.size() + g];
                    }
                    kd = wsum > 0 ? ksum / wsum : 0.0;
                }
                tab.add_row({static_cast<double>(i), mc ? mc->m[i] : 0.0, mc ? mc->se[i] : 0.0,
                             quad ? quad->m[i] : 0.0, kd});
            }
            w.emit(tab);
            if (mc && quad) {
                // statistical-agreement check of the two estimators of the
                // same quantity, until the curve drops below 1e-2
                std::size_t violations = 0;
                std::size_t checked = 0;
                for (std::size_t i = 0; i < nt; ++i) {
                    if (mc->m[i] < 0.01) break;
                    ++checked;
                    if (std::fabs(mc->m[i] - quad->m[i]) > 3.0 * std::max(mc->se[i], 1e-12))
                        ++violations;
                }
                Table cons("consistency.tsv", {"checked_times", "violations"});
                cons.add_row({static_cast<double>(checked), static_cast<double>(violations)});
                w.emit(cons, violations > 0,
                       violations > 0 ? "eq3 quadrature departs from Monte Carlo beyond 3 se" : "-");
            }
            if (mc) {
                Table fits = detail::make_fit_table();
                bool have = false;
                if (detail::window_set(cfg.fit_primary)) {
                    try {
                        detail::add_fit_row(fits, "decay_exp_rate",
                                            fit_exponential_rate(*mc, cfg.fit_primary));
                        have = true;
                    } catch (const std::exception&) {
                    }
                    // shape diagnostic: slope of log(-log M) vs log t
                    try {
                        std::vector<double> neglog(nt);
                        for (std::size_t i = 0; i < nt; ++i)
                            neglog[i] = mc->m[i] > 0.0 && mc->m[i] < 1.0 ? -std::log(mc->m[i]) : 0.0;
                        detail::add_fit_row(fits, "neg_log_m_loglog",
                                            fit_loglog_slope(mc->times, neglog, cfg.fit_primary));
                        have = true;
                        Table g("gamma_fit.tsv", {"gamma_hat"});
                        g.add_row({fit_cubic_gamma(*mc, cfg.map.epsilon, cfg.fit_primary)});
                        w.emit(g);
                    } catch (const std::exception&) {
                    }
                }
                if (have) w.emit(fits);
            }
            plot += "set logscale y\nplot 'dr_fidelity.tsv' using 1:2 with yerrorbars title 'DR MC', "
                    "'dr_fidelity.tsv' using 1:4 with lines title 'eq3 quadrature'\n";
            break;
        }
        case ExperimentKind::QuantumFidelity: {
            if (cfg.ensemble_kind != EnsembleKind::PositionState)
                throw std::invalid_argument(
                    "invalid config: ensemble.kind: quantum-fidelity needs position-state");
            const QuantumState psi0 = position_state(cfg.quantum_n, cfg.q0);
            const FidelityCurve qf = quantum_fidelity(psi0, cfg.quantum_n, cfg.map.k,
                                                      cfg.map.epsilon, cfg.hbar, cfg.steps);
            Table tab("quantum_fidelity.tsv", {"t", "m"});
            for (std::size_t i = 0; i < qf.times.size(); ++i)
                tab.add_row({static_cast<double>(qf.times[i]), qf.m[i]});
            w.emit(tab);
            const std::size_t idx = position_grid_index(cfg.quantum_n, cfg.q0);
            Table rep("quantum_report.tsv", {"name", "value"});
            rep.add_text_row({"snapped_index", std::to_string(idx)});
            rep.add_text_row({"snapped_Q", format_double(two_pi * static_cast<double>(idx) /
                                                         static_cast<double>(cfg.quantum_n))});
            const KickedPropagator probe(cfg.quantum_n, cfg.map.k, cfg.map.epsilon, cfg.hbar);
            rep.add_text_row({"power_of_two_grid", probe.power_of_two_grid() ? "1" : "0"});
            rep.add_text_row({"canonical_hbar", probe.canonical_hbar() ? "1" : "0"});
            w.emit(rep, false,
                   probe.power_of_two_grid() ? "-" : "n is not a power of two (performance only)");
            plot += "set logscale y\nplot 'quantum_fidelity.tsv' using 1:2 with linespoints "
                    "title 'quantum'\n";
            break;
        }
        case ExperimentKind::Compare: {
            EnsembleSpec corr_spec;
            corr_spec.kind = EnsembleKind::UniformTorus;
            corr_spec.count = cfg.corr_count;
            corr_spec.seed = cfg.seed;
            const CorrelatorSeries cv =
                potential_correlator(corr_spec, cfg.map, cfg.corr_t_max, cfg.corr_origins, workers);
            const CorrelatorSeries cf =
                force_correlator(corr_spec, cfg.map, cfg.corr_t_max, cfg.corr_origins, workers);
            const CorrelatorIntegral K = integrate_correlator(cv, IntegralMode::SumToPlateau);
            const CorrelatorIntegral D = integrate_correlator(cf, IntegralMode::SumToPlateau);
            const CorrelatorIntegral Cinf = integrate_correlator(cv, IntegralMode::Cesaro);

            const FidelityCurve dr = dr_overlap(ens, cfg.map, cfg.hbar, cfg.steps, workers);
            const QuantumState psi0 = position_state(cfg.quantum_n, cfg.q0);
            const FidelityCurve qf = quantum_fidelity(psi0, cfg.quantum_n, cfg.map.k,
                                                      cfg.map.epsilon, cfg.hbar, cfg.steps);

            RegimeParams rp = cfg.rp;
            rp.K = K.value;
            rp.C_V_inf = Cinf.value;
            rp.D = D.value;
            rp.hbar = cfg.hbar;
            rp.epsilon = cfg.map.epsilon;
            std::optional<FidelityCurve> pred;
            std::string pred_err;
            try {
                pred = predict_fidelity(cfg.predict_regime, rp, dr.times);
            } catch (const std::exception& e) {
                pred_err = e.what();
            }

            const CompareReport rep = compare_curves(dr, qf, cfg.fit_primary);
            Table tab("compare.tsv", {"t", "m_dr", "se_dr", "m_quantum", "m_predicted", "abs_dev"});
            for (std::size_t i = 0; i < dr.times.size(); ++i)
                tab.add_row({static_cast<double>(dr.times[i]), dr.m[i], dr.se[i], qf.m[i],
                             pred ? pred->m[i] : 0.0, rep.abs_dev[i]});
            w.emit(tab);

            Table ti("integrals.tsv", {"name", "value", "converged", "cut_lag"});
            ti.add_text_row({"K", format_double(K.value), K.converged ? "1" : "0",
                             std::to_string(K.cut_lag)});
            ti.add_text_row({"D", format_double(D.value), D.converged ? "1" : "0",
                             std::to_string(D.cut_lag)});
            ti.add_text_row({"C_V_inf", format_double(Cinf.value), Cinf.converged ? "1" : "0",
                             std::to_string(Cinf.cut_lag)});
            w.emit(ti, !K.converged || !D.converged,
                   (!K.converged || !D.converged) ? "correlator integral still drifting" : "-");

            Table r("report.tsv", {"name", "value"});
            r.add_text_row({"rate_dr", format_double(-rep.rate_a.slope)});
            r.add_text_row({"rate_quantum", format_double(-rep.rate_b.slope)});
            r.add_text_row({"rate_ratio_dr_over_quantum", format_double(rep.rate_ratio)});
            r.add_text_row({"max_abs_dev_before_cutoff", format_double(rep.max_dev_before_cutoff)});
            const double fgr_rate = 2.0 * K.value * cfg.map.epsilon * cfg.map.epsilon /
                                    (cfg.hbar * cfg.hbar);
            r.add_text_row({"fgr_predicted_rate", format_double(fgr_rate)});
            r.add_text_row({"gaussian_predicted_coeff",
                            format_double(Cinf.value * cfg.map.epsilon * cfg.map.epsilon /
                                          (cfg.hbar * cfg.hbar))});
            w.emit(r, !pred_err.empty(), pred_err.empty() ? "-" : pred_err);
            plot += "set logscale y\nplot 'compare.tsv' using 1:2 title 'DR', "
                    "'compare.tsv' using 1:4 title 'quantum', "
                    "'compare.tsv' using 1:5 with lines title 'predicted'\n";
            break;
        }
        case ExperimentKind::Predict: {
            RegimeParams rp = cfg.rp;
            rp.hbar = cfg.hbar;
            rp.epsilon = cfg.map.epsilon;
            std::vector<int> times(static_cast<std::size_t>(cfg.steps) + 1);
            for (int t = 0; t <= cfg.steps; ++t) times[static_cast<std::size_t>(t)] = t;
            const FidelityCurve pred = predict_fidelity(cfg.predict_regime, rp, times);
            Table tab("predict.tsv", {"t", "m", "raw"});
            for (std::size_t i = 0; i < times.size(); ++i)
                tab.add_row({static_cast<double>(times[i]), pred.m[i], pred.raw[i]});
            w.emit(tab, pred.clamped,
                   pred.clamped ? "asymptotic prefactor exceeds 1 at small t; clamped" : "-");
            plot += "set logscale y\nplot 'predict.tsv' using 1:2 with lines title 'prediction'\n";
            break;
        }
    }

    w.emit_text("plot.gp", plot);

    RunManifest man;
    man.config_hash = w.hash();
    man.outputs = w.take();
    man.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::string mtext = "# loschmidt run manifest\n";
    mtext += "# config_hash = " + man.config_hash + "\n";
    mtext += "# code_version = " + std::string(man.code_version) + "\n";
    mtext += "# wall_seconds = " + format_double(man.wall_seconds) + " (informational)\n";
    mtext += "# file\trows\tflagged\tnote\n";
    for (const auto& e : man.outputs)
        mtext += e.file + "\t" + std::to_string(e.rows) + "\t" + (e.flagged ? "1" : "0") + "\t" +
                 e.note + "\n";
    {
        std::ofstream out(out_dir + "/manifest.txt", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write manifest");
        out << mtext;
    }
    return man;
}

}  // namespace loschmidt
