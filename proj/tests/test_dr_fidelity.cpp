#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "loschmidt/config.hpp"
#include "loschmidt/dr_fidelity.hpp"
#include "loschmidt/statistics.hpp"

using namespace loschmidt;

namespace {

EnsembleSpec position_ensemble(std::size_t count, std::uint64_t seed) {
    EnsembleSpec e;
    e.kind = EnsembleKind::PositionState;
    e.q0 = 0.8 * pi;
    e.count = count;
    e.seed = seed;
    return e;
}

RegimeParams chaotic_params() {
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
    return rp;
}

std::vector<int> times_to(int T) {
    std::vector<int> t(static_cast<std::size_t>(T) + 1);
    for (int i = 0; i <= T; ++i) t[static_cast<std::size_t>(i)] = i;
    return t;
}

PairVarianceScan synthetic_scan(const std::vector<double>& grid, const std::vector<int>& times,
                                double (*w)(double p, double t)) {
    PairVarianceScan scan;
    scan.p_minus = grid;
    scan.times = times;
    scan.w.resize(grid.size() * times.size());
    scan.excess_kurtosis.assign(scan.w.size(), 0.0);
    scan.count = 1;
    for (std::size_t t = 0; t < times.size(); ++t)
        for (std::size_t g = 0; g < grid.size(); ++g)
            scan.w[t * grid.size() + g] = w(grid[g], static_cast<double>(times[t]));
    return scan;
}

std::vector<double> dense_uniform_grid(std::size_t n) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i)
        g[i] = pi * static_cast<double>(i + 1) / static_cast<double>(n);
    return g;
}

}  // namespace

TEST_CASE("dr overlap limits") {
    const EnsembleSpec ens = position_ensemble(500, 1);
    SECTION("zero perturbation keeps M at one exactly") {
        const FidelityCurve c = dr_overlap(ens, {20.0, 0.0, false}, 0.01, 30);
        for (double m : c.m) CHECK(m == 1.0);
    }
    SECTION("M(0) = 1 exactly and the estimate never exceeds one") {
        const FidelityCurve c = dr_overlap(ens, {20.0, 0.003, false}, two_pi / 1000.0, 60);
        CHECK(c.m[0] == 1.0);
        CHECK(c.se[0] == 0.0);
        for (double m : c.m) {
            CHECK(m <= 1.0);
            CHECK(m >= 0.0);
        }
    }
    SECTION("hbar must be positive") {
        CHECK_THROWS_AS(dr_overlap(ens, {20.0, 0.003, false}, 0.0, 4), std::invalid_argument);
    }
}

TEST_CASE("dr overlap decays at the Fermi-Golden-Rule rate") {
    const double hbar = two_pi / 1000.0;
    const MapParams mp{20.0, 0.003, false};
    const FidelityCurve c = dr_overlap(position_ensemble(1000, 1), mp, hbar, 120, 2);

    EnsembleSpec u;
    u.kind = EnsembleKind::UniformTorus;
    u.count = 20000;
    u.seed = 1;
    const CorrelatorIntegral K =
        integrate_correlator(potential_correlator(u, mp, 64, 32, 2), IntegralMode::SumToPlateau);
    const double predicted = 2.0 * K.value * mp.epsilon * mp.epsilon / (hbar * hbar);
    const SlopeFit fit = fit_exponential_rate(c, {5, 120});
    CHECK(-fit.slope == Catch::Approx(predicted).epsilon(0.25));
}

TEST_CASE("closed-form predictions") {
    const RegimeParams rp = chaotic_params();
    SECTION("FGR starts at one and decays monotonically in t, eps, 1/hbar") {
        const FidelityCurve c = predict_fidelity(Regime::FermiGoldenRule, rp, times_to(50));
        CHECK(c.m[0] == 1.0);
        for (std::size_t i = 1; i < c.m.size(); ++i) CHECK(c.m[i] < c.m[i - 1]);
        RegimeParams stronger = rp;
        stronger.epsilon *= 2.0;
        const FidelityCurve cs = predict_fidelity(Regime::FermiGoldenRule, stronger, times_to(50));
        RegimeParams smaller_hbar = rp;
        smaller_hbar.hbar /= 2.0;
        const FidelityCurve ch = predict_fidelity(Regime::FermiGoldenRule, smaller_hbar, times_to(50));
        for (std::size_t i = 1; i < c.m.size(); ++i) {
            CHECK(cs.m[i] < c.m[i]);
            CHECK(ch.m[i] < c.m[i]);
        }
    }
    SECTION("Gaussian: doubling eps quadruples log M") {
        const FidelityCurve c1 = predict_fidelity(Regime::Gaussian, rp, times_to(20));
        RegimeParams rp2 = rp;
        rp2.epsilon *= 2.0;
        const FidelityCurve c2 = predict_fidelity(Regime::Gaussian, rp2, times_to(20));
        for (std::size_t i = 1; i < c1.m.size(); ++i)
            CHECK(std::log(c2.m[i]) == Catch::Approx(4.0 * std::log(c1.m[i])).epsilon(1e-12));
    }
    SECTION("algebraic decay drops by 4^(-3/2) per time quadrupling") {
        const FidelityCurve c = predict_fidelity(Regime::Algebraic, rp, {1, 4, 16, 0});
        CHECK(c.raw[1] / c.raw[0] == Catch::Approx(0.125).epsilon(1e-12));
        CHECK(c.raw[2] / c.raw[1] == Catch::Approx(0.125).epsilon(1e-12));
        CHECK(c.clamped);  // t = 0 diverges and is clamped to 1
        CHECK(c.m[3] == 1.0);
    }
    SECTION("Lyapunov form matches a hand evaluation and clamps its prefactor") {
        const FidelityCurve c = predict_fidelity(Regime::Lyapunov, rp, times_to(8));
        const double pre = rp.hbar / (rp.alpha * rp.Omega_u * rp.epsilon) *
                           std::sqrt(2.0 * pi * rp.lambda / rp.D);
        CHECK(c.raw[5] == Catch::Approx(pre * std::exp(-rp.lambda * 5.0)).epsilon(1e-12));
        for (std::size_t i = 0; i < c.m.size(); ++i) CHECK(c.m[i] <= 1.0);
    }
    SECTION("short-time forms") {
        const FidelityCurve cs = predict_fidelity(Regime::Superexponential, rp, times_to(3));
        CHECK(cs.m[2] == Catch::Approx(std::exp(-rp.beta * rp.epsilon * rp.epsilon *
                                                std::exp(4.0 * rp.lambda)))
                             .epsilon(1e-12));
        const FidelityCurve cc = predict_fidelity(Regime::CubicExponential, rp, times_to(3));
        CHECK(cc.m[3] == Catch::Approx(std::exp(-rp.gamma * rp.epsilon * rp.epsilon * 27.0))
                             .epsilon(1e-12));
    }
    SECTION("missing parameters are reported by name") {
        RegimeParams broken = rp;
        broken.K = RegimeParams::unset;
        CHECK_THROWS_WITH(predict_fidelity(Regime::FermiGoldenRule, broken, times_to(3)),
                          Catch::Matchers::ContainsSubstring("K"));
        RegimeParams nobeta = rp;
        nobeta.beta = RegimeParams::unset;
        CHECK_THROWS_WITH(predict_fidelity(Regime::Superexponential, nobeta, times_to(3)),
                          Catch::Matchers::ContainsSubstring("beta"));
    }
}

TEST_CASE("universal-formula quadrature") {
    const double hbar = 0.05;
    SECTION("zero variance gives unit fidelity") {
        const auto scan = synthetic_scan(dense_uniform_grid(64), {0, 1, 2},
                                         [](double, double) { return 0.0; });
        const FidelityCurve c = fidelity_from_pair_variance(scan, hbar);
        for (double m : c.m) CHECK(m == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("constant variance reproduces the uncorrelated closed form") {
        const auto scan = synthetic_scan(dense_uniform_grid(64), {1},
                                         [](double, double) { return 2e-3; });
        const FidelityCurve c = fidelity_from_pair_variance(scan, hbar);
        CHECK(c.m[0] == Catch::Approx(std::exp(-2e-3 / (2.0 * hbar * hbar))).epsilon(1e-12));
    }
    SECTION("quadratic variance in p reproduces the Lyapunov asymptotic form") {
        // W = (D/lambda) alpha^2 eps^2 e^{2 lambda t} p^2 integrates to
        // (hbar/(alpha Omega_u eps)) sqrt(2 pi lambda / D) e^{-lambda t}
        RegimeParams rp = chaotic_params();
        rp.hbar = hbar;
        static RegimeParams srp;
        srp = rp;
        const auto scan = synthetic_scan(dense_uniform_grid(300000), {4, 5}, [](double p, double t) {
            return srp.D / srp.lambda * srp.alpha * srp.alpha * srp.epsilon * srp.epsilon *
                   std::exp(2.0 * srp.lambda * t) * p * p;
        });
        const FidelityCurve c = fidelity_from_pair_variance(scan, hbar);
        const FidelityCurve ref = predict_fidelity(Regime::Lyapunov, rp, {4, 5});
        CHECK(c.m[0] == Catch::Approx(ref.raw[0]).epsilon(1e-6));
        CHECK(c.m[1] == Catch::Approx(ref.raw[1]).epsilon(1e-6));
    }
    SECTION("cubic-time variance reproduces the algebraic asymptotic form") {
        RegimeParams rp = chaotic_params();
        rp.hbar = hbar;
        static RegimeParams srp;
        srp = rp;
        const auto scan = synthetic_scan(dense_uniform_grid(300000), {60, 80}, [](double p, double t) {
            return 2.0 * srp.D / 3.0 * srp.epsilon * srp.epsilon * t * t * t * p * p;
        });
        const FidelityCurve c = fidelity_from_pair_variance(scan, hbar);
        const FidelityCurve ref = predict_fidelity(Regime::Algebraic, rp, {60, 80});
        CHECK(c.m[0] == Catch::Approx(ref.raw[0]).epsilon(1e-6));
        CHECK(c.m[1] == Catch::Approx(ref.raw[1]).epsilon(1e-6));
    }
    SECTION("insufficient coverage is rejected with the offending gap") {
        // a sharp cliff at p ~ 0.5 sampled by only a handful of nodes
        std::vector<double> sparse{0.1, 0.4, 0.7, 1.5, pi};
        const auto scan = synthetic_scan(sparse, {1}, [](double p, double) {
            return p > 0.5 ? 1.0 : 0.0;
        });
        CHECK_THROWS_AS(fidelity_from_pair_variance(scan, hbar), std::domain_error);
    }
    SECTION("grid must reach pi") {
        std::vector<double> short_grid{0.1, 0.5, 1.0, 2.0};
        const auto scan = synthetic_scan(short_grid, {1}, [](double, double) { return 0.0; });
        CHECK_THROWS_AS(fidelity_from_pair_variance(scan, hbar), std::domain_error);
    }
}

TEST_CASE("eq3 quadrature tracks the Monte Carlo estimator at desk scale") {
    const double hbar = two_pi / 1000.0;
    const MapParams mp{20.0, 0.003, false};
    const EnsembleSpec ens = position_ensemble(1000, 1);
    const FidelityCurve mc = dr_overlap(ens, mp, hbar, 40, 2);
    SeparationGrid g{1e-12, pi, 60, 0.0, 0.05, {}};
    const PairVarianceScan scan = pair_variance_scan(ens, mp, 40, g.build(), 2);
    const FidelityCurve quad = fidelity_from_pair_variance(scan, hbar);
    for (int t = 0; t <= 40; ++t) {
        if (mc.m[static_cast<std::size_t>(t)] < 0.01) break;
        CHECK(std::fabs(mc.m[static_cast<std::size_t>(t)] - quad.m[static_cast<std::size_t>(t)]) <=
              3.0 * std::max(mc.se[static_cast<std::size_t>(t)], 1e-12));
    }
}

TEST_CASE("regime classification") {
    auto fit = [](double slope) {
        SlopeFit f;
        f.slope = slope;
        f.residual_rms = 0.05;
        f.r_squared = 0.99;
        f.n_points = 10;
        return f;
    };
    SECTION("uncorrelated rows") {
        RegimeEvidence ev;
        ev.variance_vs_t = fit(1.02);
        CHECK(classify_regime(ev) == Regime::FermiGoldenRule);
        ev.variance_vs_t = fit(1.98);
        CHECK(classify_regime(ev) == Regime::Gaussian);
    }
    SECTION("correlated quasi-integrable rows") {
        RegimeEvidence ev;
        ev.variance_vs_t = fit(2.0);
        ev.pair_branch = fit(3.1);
        ev.pair_space = FitSpace::LogLog;
        CHECK(classify_regime(ev) == Regime::CubicExponential);
        ev.pair_asymptotic = true;
        CHECK(classify_regime(ev) == Regime::Algebraic);
    }
    SECTION("correlated chaotic rows") {
        RegimeEvidence ev;
        ev.variance_vs_t = fit(0.95);
        ev.pair_branch = fit(4.6);  // exponential growth rate
        ev.pair_space = FitSpace::SemiLog;
        CHECK(classify_regime(ev) == Regime::Superexponential);
        ev.pair_asymptotic = true;
        CHECK(classify_regime(ev) == Regime::Lyapunov);
    }
    SECTION("ambiguous evidence is unclassified") {
        RegimeEvidence ev;
        ev.variance_vs_t = fit(1.5);
        CHECK(classify_regime(ev) == Regime::Unclassified);
        ev.variance_vs_t = fit(1.0);
        ev.variance_vs_t.residual_rms = 2.0;
        CHECK(classify_regime(ev) == Regime::Unclassified);
        CHECK(std::string(regime_name(Regime::Unclassified)) == "mixed/unclassified");
    }
}

TEST_CASE("short-time constant fits recover synthetic inputs") {
    RegimeParams rp = chaotic_params();
    SECTION("beta from a superexponential curve") {
        const FidelityCurve c = predict_fidelity(Regime::Superexponential, rp, times_to(3));
        CHECK(fit_superexponential_beta(c, rp.lambda, rp.epsilon, {1, 3}) ==
              Catch::Approx(rp.beta).epsilon(1e-9));
    }
    SECTION("gamma from a cubic-exponential curve") {
        rp.gamma = 0.7;
        const FidelityCurve c = predict_fidelity(Regime::CubicExponential, rp, times_to(6));
        CHECK(fit_cubic_gamma(c, rp.epsilon, {1, 6}) == Catch::Approx(0.7).epsilon(1e-9));
    }
    SECTION("alpha from a synthetic pair-variance series") {
        VarianceSeries w;
        const double alpha = 0.62, p_minus = 1e-9, msp = 0.5;
        for (int t = 0; t <= 10; ++t) {
            w.times.push_back(t);
            w.value.push_back(rp.D / rp.lambda * alpha * alpha * rp.epsilon * rp.epsilon *
                              std::exp(2.0 * rp.lambda * t) * p_minus * p_minus * msp);
            w.se.push_back(0.0);
        }
        CHECK(estimate_alpha(w, p_minus, rp, {2, 8}, msp) == Catch::Approx(alpha).epsilon(1e-9));
    }
}
