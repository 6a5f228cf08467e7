// Acceptance suite: reproduces the reference statistics and cross-validates
// the fidelity estimators end to end.  Prints one PASS/FAIL line per
// criterion and exits nonzero if any fails.

#include <cstdarg>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "loschmidt/loschmidt.hpp"

using namespace loschmidt;

namespace {

int g_failures = 0;
constexpr unsigned kWorkers = 2;

void report(int criterion, bool ok, const std::string& detail) {
    std::printf("%s  criterion %2d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
    if (!ok) ++g_failures;
}

bool in_range(double x, double lo, double hi) { return x >= lo && x <= hi; }

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --- criterion 1: variance growth is linear in the chaotic regime ---------
void criterion_1() {
    const ExperimentConfig c = preset("fig1a");
    const VarianceSeries v = variance_delta_action(ensemble_of(c), c.map, c.steps, kWorkers);
    const SlopeFit f = fit_loglog_slope(v, c.fit_primary);
    report(1, in_range(f.slope, 0.90, 1.10),
           fmt("fig1a: log-log slope of sigma^2 vs t = %.4f, want [0.90, 1.10] over [%g, %g]",
               f.slope, c.fit_primary.lo, c.fit_primary.hi));
}

// --- criterion 2: variance growth is quadratic in the quasi-integrable regime
void criterion_2() {
    const ExperimentConfig c = preset("fig1b");
    const VarianceSeries v = variance_delta_action(ensemble_of(c), c.map, c.steps, kWorkers);
    const SlopeFit f = fit_loglog_slope(v, c.fit_primary);
    report(2, in_range(f.slope, 1.90, 2.10),
           fmt("fig1b: log-log slope of sigma^2 vs t = %.4f, want [1.90, 2.10] over [%g, %g]",
               f.slope, c.fit_primary.lo, c.fit_primary.hi));
}

// --- criterion 3: separation scans at t = 7 --------------------------------
void criterion_3() {
    const ExperimentConfig ca = preset("fig2a");
    const SeparationScan sa =
        pair_variance_vs_separation(ensemble_of(ca), ca.map, ca.fixed_t, ca.sep_grid.build(), kWorkers);
    const double small_a = fit_loglog_slope(sa.p_minus, sa.second_moment, ca.fit_small).slope;
    const double plat_a = fit_loglog_slope(sa.p_minus, sa.second_moment, ca.fit_plateau).slope;

    const ExperimentConfig cb = preset("fig2b");
    const SeparationScan sb =
        pair_variance_vs_separation(ensemble_of(cb), cb.map, cb.fixed_t, cb.sep_grid.build(), kWorkers);
    const double small_b = fit_loglog_slope(sb.p_minus, sb.second_moment, cb.fit_small).slope;
    const double plat_b = fit_loglog_slope(sb.p_minus, sb.second_moment, cb.fit_plateau).slope;

    const bool ok = in_range(small_a, 1.85, 2.15) && in_range(plat_a, -0.10, 0.10) &&
                    in_range(small_b, 1.90, 2.10) && in_range(plat_b, -0.05, 0.05);
    report(3, ok,
           fmt("fig2 at t=7: chaotic slopes %.4f / %.4f (want [1.85,2.15] / [-0.1,0.1]), "
               "quasi-integrable %.4f / %.4f (want [1.90,2.10] / [-0.05,0.05])",
               small_a, plat_a, small_b, plat_b));
}

// --- criterion 4: pair variance vs time, quasi-integrable ------------------
void criterion_4() {
    const ExperimentConfig c = preset("fig3b");
    const PairSpec spec{ensemble_of(c), c.p_minus};
    const VarianceSeries w =
        pair_variance_vs_time(spec, c.map, c.steps, Smoothing::WindowHalfT, kWorkers);
    const SlopeFit early = fit_loglog_slope(w, c.fit_early);
    const SlopeFit late = fit_loglog_slope(w, c.fit_late);
    const bool ok = in_range(early.slope, 2.8, 3.3) && in_range(late.slope, 1.85, 2.15);
    report(4, ok,
           fmt("fig3b (smoothed): early slope %.3f want [2.8,3.3]; late slope %.3f want [1.85,2.15]",
               early.slope, late.slope));
}

// --- criterion 5: pair variance vs time, chaotic ----------------------------
void criterion_5() {
    const ExperimentConfig c = preset("fig3a");
    const PairSpec spec{ensemble_of(c), c.p_minus};
    const VarianceSeries w = pair_variance_vs_time(spec, c.map, c.steps, Smoothing::None, kWorkers);
    const SlopeFit early = fit_exponential_rate(w, c.fit_early);
    const SlopeFit late = fit_loglog_slope(w, c.fit_late);

    // tangent-map estimate of lambda over the same ensemble
    const auto points = sample(ensemble_of(c));
    double lambda = 0.0;
    const int n_lyap = 200;
    for (int i = 0; i < n_lyap; ++i)
        lambda += estimate_lyapunov(points[static_cast<std::size_t>(i)], c.map, 200).lambda;
    lambda /= n_lyap;

    const double ratio = early.slope / (2.0 * lambda);
    const bool ok = early.r_squared >= 0.98 && in_range(ratio, 0.70, 1.30) &&
                    in_range(late.slope, 0.8, 1.2);
    report(5, ok,
           fmt("fig3a: ln-variance linear (R^2=%.4f, want >= 0.98), rate %.3f = %.2f x 2*lambda "
               "(want within 30%%), late log-log slope %.3f want [0.8,1.2]",
               early.r_squared, early.slope, ratio, late.slope));
}

// --- criterion 6: Fermi-Golden-Rule closed loop -----------------------------
void criterion_6() {
    const double hbar = two_pi / 1000.0;
    const MapParams mp{20.0, 0.003, false};
    EnsembleSpec ens;
    ens.kind = EnsembleKind::PositionState;
    ens.q0 = 0.8 * pi;
    ens.count = 1000;
    ens.seed = 1;
    const FidelityCurve mc = dr_overlap(ens, mp, hbar, 120, kWorkers);

    EnsembleSpec u;
    u.kind = EnsembleKind::UniformTorus;
    u.count = 20000;
    u.seed = 1;
    const CorrelatorIntegral K = integrate_correlator(
        potential_correlator(u, mp, 64, 32, kWorkers), IntegralMode::SumToPlateau);
    const double predicted = 2.0 * K.value * mp.epsilon * mp.epsilon / (hbar * hbar);
    const double fitted = -fit_exponential_rate(mc, {5, 120}).slope;
    const double ratio = fitted / predicted;
    report(6, K.converged && in_range(ratio, 0.75, 1.25),
           fmt("FGR loop: fitted DR rate %.5f vs 2 K eps^2 / hbar^2 = %.5f (K=%.5f, converged=%d), "
               "ratio %.3f want within 25%%",
               fitted, predicted, K.value, static_cast<int>(K.converged), ratio));
}

// --- criterion 7: universal-formula quadrature vs Monte Carlo ---------------
struct ConsistencyResult {
    int checked = 0;
    int violations = 0;
    double worst_z = 0.0;
};

ConsistencyResult consistency(const EnsembleSpec& ens, const MapParams& mp, double hbar, int T,
                              const SeparationGrid& grid) {
    const FidelityCurve mc = dr_overlap(ens, mp, hbar, T, kWorkers);
    const PairVarianceScan scan = pair_variance_scan(ens, mp, T, grid.build(), kWorkers);
    const FidelityCurve quad = fidelity_from_pair_variance(scan, hbar);
    ConsistencyResult r;
    for (int t = 0; t <= T; ++t) {
        const auto i = static_cast<std::size_t>(t);
        if (mc.m[i] < 0.01) break;
        ++r.checked;
        const double z = std::fabs(mc.m[i] - quad.m[i]) / std::max(mc.se[i], 1e-12);
        r.worst_z = std::max(r.worst_z, z);
        if (z > 3.0) ++r.violations;
    }
    return r;
}

void criterion_7() {
    EnsembleSpec ens;
    ens.kind = EnsembleKind::PositionState;
    ens.q0 = 0.8 * pi;
    ens.count = 1000;
    ens.seed = 1;
    const ConsistencyResult chaotic = consistency(ens, {20.0, 0.003, false}, two_pi / 1000.0, 200,
                                                  {1e-12, pi, 60, 0.0, 0.05, {}});
    // the quasi-integrable run covers the regime where the action-difference
    // statistics stay Gaussian; past it the position-state curve saturates
    // near its stationary-phase floor and the Gaussian reduction departs
    const ConsistencyResult quasi = consistency(ens, {0.3, 0.005, false}, two_pi / 100.0, 100,
                                                {1e-10, pi, 60, 0.0, 0.05, {}});
    const bool ok = chaotic.violations == 0 && quasi.violations == 0;
    report(7, ok,
           fmt("eq3 vs Monte Carlo within 3 se until M < 0.01: chaotic %d/%d outside (worst z %.2f), "
               "quasi-integrable %d/%d outside (worst z %.2f)",
               chaotic.violations, chaotic.checked, chaotic.worst_z, quasi.violations,
               quasi.checked, quasi.worst_z));
}

// --- criterion 8: plateau second moment doubles the single variance ---------
void criterion_8() {
    double ratios[2];
    int idx = 0;
    for (const char* name : {"fig2a", "fig2b"}) {
        const ExperimentConfig c = preset(name);
        const SeparationScan scan =
            pair_variance_vs_separation(ensemble_of(c), c.map, c.fixed_t, c.sep_grid.build(), kWorkers);
        const VarianceSeries v = variance_delta_action(ensemble_of(c), c.map, c.fixed_t, kWorkers);
        double mean = 0.0;
        int n = 0;
        for (std::size_t i = 0; i < scan.p_minus.size(); ++i)
            if (scan.p_minus[i] >= c.fit_plateau.lo && scan.p_minus[i] <= c.fit_plateau.hi) {
                mean += scan.second_moment[i];
                ++n;
            }
        mean /= n;
        ratios[idx++] = mean / (2.0 * v.value[static_cast<std::size_t>(c.fixed_t)]);
    }
    const bool ok = in_range(ratios[0], 0.85, 1.15) && in_range(ratios[1], 0.85, 1.15);
    report(8, ok,
           fmt("plateau / (2 sigma^2) at t=7: chaotic %.3f, quasi-integrable %.3f, want within 15%%",
               ratios[0], ratios[1]));
}

// --- criterion 9: quantum reference ------------------------------------------
void criterion_9() {
    const std::size_t n = 1000;
    const double hbar = two_pi / static_cast<double>(n);

    QuantumState psi = position_state(n, 0.8 * pi);
    const KickedPropagator u(n, 20.0, 0.003, hbar);
    double drift = 0.0;
    for (int t = 0; t < 1000; ++t) {
        u.apply(psi);
        drift = std::max(drift, std::fabs(psi.norm_sq() - 1.0));
    }

    const QuantumState psi0 = position_state(n, 0.8 * pi);
    const FidelityCurve null_curve = quantum_fidelity(psi0, n, 20.0, 0.0, hbar, 200);
    double null_dev = 0.0;
    for (double m : null_curve.m) null_dev = std::max(null_dev, std::fabs(m - 1.0));

    const FidelityCurve qf = quantum_fidelity(psi0, n, 20.0, 0.003, hbar, 120);
    EnsembleSpec ens;
    ens.kind = EnsembleKind::PositionState;
    ens.q0 = 0.8 * pi;
    ens.count = 4000;
    ens.seed = 1;
    const FidelityCurve dr = dr_overlap(ens, {20.0, 0.003, false}, hbar, 120, kWorkers);
    const double rate_q = -fit_exponential_rate(qf, {3, 60}).slope;
    const double rate_dr = -fit_exponential_rate(dr, {3, 60}).slope;
    const double ratio = rate_dr / rate_q;

    const bool ok = drift < 1e-9 && null_dev < 1e-10 && in_range(ratio, 0.70, 1.30);
    report(9, ok,
           fmt("quantum: norm drift %.2e over 1000 steps (< 1e-9), eps=0 max |M-1| %.2e (< 1e-10), "
               "DR/quantum early rate ratio %.3f want [0.7, 1.3]",
               drift, null_dev, ratio));
}

// --- criterion 10: property sweep -------------------------------------------
void criterion_10() {
    std::string fails;

    // epsilon-linearity of the action difference, relative 1e-12
    {
        CounterRng rng(271, 0);
        bool ok = true;
        for (int i = 0; i < 25 && ok; ++i) {
            const PhasePoint x0{rng.next_angle(), rng.next_angle()};
            const ActionSeries base = propagate_with_action(x0, {20.0, 0.003, false}, 60);
            for (double cc : {2.0, 3.7, -1.5}) {
                const ActionSeries s = propagate_with_action(x0, {20.0, cc * 0.003, false}, 60);
                for (int t = 1; t <= 60; ++t) {
                    const double want = cc * base.delta_s[static_cast<std::size_t>(t)];
                    if (want != 0.0 &&
                        std::fabs(s.delta_s[static_cast<std::size_t>(t)] / want - 1.0) > 1e-12)
                        ok = false;
                }
            }
        }
        if (!ok) fails += " eps-linearity";
    }

    // epsilon^2 scaling of variances and pair moments, relative 1e-10
    {
        EnsembleSpec e;
        e.kind = EnsembleKind::PositionState;
        e.q0 = 0.8 * pi;
        e.count = 300;
        e.seed = 9;
        const VarianceSeries v1 = variance_delta_action(e, {20.0, 0.003, false}, 24, kWorkers);
        const VarianceSeries v9 = variance_delta_action(e, {20.0, 0.009, false}, 24, kWorkers);
        const PairSpec ps{e, 1e-6};
        const VarianceSeries w1 = pair_variance_vs_time(ps, {20.0, 0.003, false}, 24);
        const VarianceSeries w9 = pair_variance_vs_time(ps, {20.0, 0.009, false}, 24);
        bool ok = true;
        for (std::size_t t = 2; t <= 24; ++t) {
            if (v1.value[t] > 0 && std::fabs(v9.value[t] / (9.0 * v1.value[t]) - 1.0) > 1e-10)
                ok = false;
            if (w1.value[t] > 0 && std::fabs(w9.value[t] / (9.0 * w1.value[t]) - 1.0) > 1e-10)
                ok = false;
        }
        if (!ok) fails += " eps^2-scaling";
    }

    // |O_DR| <= 1 for assorted ensembles, and M(0) = 1 for every method
    {
        bool ok = true;
        for (std::uint64_t s : {1ull, 2ull, 3ull}) {
            EnsembleSpec e;
            e.kind = s % 2 ? EnsembleKind::UniformTorus : EnsembleKind::PositionState;
            e.q0 = 0.8 * pi;
            e.count = 400;
            e.seed = s;
            const FidelityCurve c = dr_overlap(e, {s == 2 ? 0.3 : 20.0, 0.004, false}, 0.01, 40);
            if (c.m[0] != 1.0) ok = false;
            for (double m : c.m)
                if (m < 0.0 || m > 1.0) ok = false;
        }
        RegimeParams rp;
        rp.K = 0.06;
        rp.C_V_inf = 0.011;
        rp.D = 0.26;
        rp.lambda = std::log(10.0);
        rp.alpha = 0.8;
        rp.beta = 0.5;
        rp.gamma = 0.02;
        rp.hbar = two_pi / 1000.0;
        rp.epsilon = 0.003;
        const std::vector<int> t0{0, 1, 2};
        if (predict_fidelity(Regime::FermiGoldenRule, rp, t0).m[0] != 1.0) ok = false;
        if (predict_fidelity(Regime::Gaussian, rp, t0).m[0] != 1.0) ok = false;
        if (predict_fidelity(Regime::Algebraic, rp, t0).m[0] != 1.0) ok = false;  // clamped
        if (predict_fidelity(Regime::CubicExponential, rp, t0).m[0] != 1.0) ok = false;
        // the superexponential "~" form carries a finite t=0 offset beta eps^2
        if (std::fabs(predict_fidelity(Regime::Superexponential, rp, t0).m[0] - 1.0) > 1e-5)
            ok = false;
        const QuantumState psi = position_state(256, 0.8 * pi);
        if (quantum_fidelity(psi, 256, 20.0, 0.003, 0.0, 3).m[0] != 1.0) ok = false;
        if (!ok) fails += " unit-bounds/M0";
    }

    // symplectic determinant over >= 1e4 steps
    {
        bool ok = true;
        CounterRng rng(733, 0);
        for (double k : {20.0, 0.3}) {
            const PhasePoint x0{rng.next_angle(), rng.next_angle()};
            if (std::fabs(estimate_lyapunov(x0, {k, 0.0, false}, 10000).log_det_drift) > 1e-9)
                ok = false;
        }
        if (!ok) fails += " symplecticity";
    }

    // byte-identical reruns under varying worker counts
    {
        namespace fs = std::filesystem;
        ExperimentConfig c = preset("fig2a");
        c.count = 300;
        c.sep_grid = {1e-9, pi, 8, 0.0, 0.05, {}};
        c.fit_small = {0, 0};
        c.fit_plateau = {0, 0};
        const fs::path d1 = "acceptance_tmp/w1", d2 = "acceptance_tmp/w3";
        fs::remove_all("acceptance_tmp");
        run(c, d1.string(), 1);
        run(c, d2.string(), 3);
        bool ok = true;
        for (const char* f : {"config.txt", "separation_scan.tsv", "plot.gp"})
            if (slurp(d1 / f) != slurp(d2 / f)) ok = false;
        const ExperimentConfig c1 = preset("fig1a");
        ExperimentConfig c2 = c1;
        if (to_text(c1) != to_text(c2)) ok = false;
        if (!ok) fails += " determinism";
    }

    report(10, fails.empty(),
           fails.empty()
               ? std::string("properties: eps-linearity 1e-12, eps^2-scaling 1e-10, |O_DR| <= 1, "
                             "M(0)=1 all methods, symplectic det 1 +- 1e-9, byte-identical reruns")
               : "properties failed:" + fails);
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    if (g_failures == 0) {
        std::printf("acceptance: all criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criterion(s) failed\n", g_failures);
    return 1;
}
