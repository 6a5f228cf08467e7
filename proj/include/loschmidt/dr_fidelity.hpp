#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "loschmidt/ensembles.hpp"
#include "loschmidt/parallel.hpp"
#include "loschmidt/standard_map.hpp"
#include "loschmidt/statistics.hpp"

namespace loschmidt {

enum class FidelityMethod { DrMonteCarlo, TableII, Eq3Quadrature, QuantumExact };

enum class Regime {
    FermiGoldenRule,   // chaotic, uncorrelated
    Gaussian,          // quasi-integrable, uncorrelated
    Lyapunov,          // chaotic, correlated, large t
    Algebraic,         // quasi-integrable, correlated, large t
    Superexponential,  // chaotic, correlated, small t
    CubicExponential,  // quasi-integrable, correlated, small t
    Unclassified,
};

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::FermiGoldenRule: return "fermi-golden-rule";
        case Regime::Gaussian: return "gaussian";
        case Regime::Lyapunov: return "lyapunov";
        case Regime::Algebraic: return "algebraic";
        case Regime::Superexponential: return "superexponential";
        case Regime::CubicExponential: return "cubic-exponential";
        case Regime::Unclassified: return "mixed/unclassified";
    }
    return "?";
}

// Constants feeding the closed-form fidelity predictions.  Fields default to
// NaN; a prediction that needs a missing field reports it by name.
struct RegimeParams {
    static constexpr double unset = std::numeric_limits<double>::quiet_NaN();

    double K = unset;        // integral of the potential correlator
    double C_V_inf = unset;  // Cesaro limit of the potential correlator
    double D = unset;        // integral of the force-force correlator
    double lambda = unset;   // leading Lyapunov exponent per step
    double alpha = unset;    // prefactor of the unstable-direction growth
    double m = 1.0;          // mass implied by the drift q' = q + p'
    int d = 1;               // degrees of freedom
    double Omega = two_pi * two_pi;  // phase-space volume (2pi)^(2d)
    double Omega_p = two_pi;         // momentum-space volume (2pi)^d
    double Omega_u = two_pi;         // volume of the most unstable direction
    double beta = unset;     // short-time superexponential constant
    double gamma = unset;    // short-time cubic-exponential constant
    double hbar = unset;
    double epsilon = unset;
};

// t -> M(t) with M in [0, 1].
struct FidelityCurve {
    std::vector<int> times;
    std::vector<double> m;
    std::vector<double> se;       // Monte Carlo curves only
    std::vector<double> raw;      // predictions only: value before clamping
    FidelityMethod method = FidelityMethod::DrMonteCarlo;
    std::optional<Regime> regime;
    bool clamped = false;  // some prediction value exceeded 1 and was clamped
};

inline SlopeFit fit_exponential_rate(const FidelityCurve& c, FitWindow w) {
    return fit_exponential_rate(c.times, c.m, w);
}

// Monte Carlo estimate of Eq-type DR fidelity: M(t) = |<e^{i dS(x',t)/hbar}>|^2
// over the ensemble.  The phasor mean lies in the unit disk, so M <= 1 up to
// rounding (clamped); M(0) = 1 exactly.
inline FidelityCurve dr_overlap(const EnsembleSpec& spec, const MapParams& params, double hbar,
                                int T, unsigned workers = 1) {
    validate(spec);
    if (!(hbar > 0.0)) throw std::invalid_argument("dr_overlap: hbar must be > 0");
    const std::size_t nt = static_cast<std::size_t>(T) + 1;

    struct PhasorSums {
        std::vector<double> re, im, rr, ii, ri;
        explicit PhasorSums(std::size_t n) : re(n, 0.0), im(n, 0.0), rr(n, 0.0), ii(n, 0.0), ri(n, 0.0) {}
    };
    const std::size_t n_blocks = (spec.count + detail::reduce_block - 1) / detail::reduce_block;
    std::vector<PhasorSums> partials(n_blocks, PhasorSums(nt));
    parallel_for_indexed(n_blocks, workers, [&](std::size_t blk) {
        PhasorSums& acc = partials[blk];
        const std::size_t lo = blk * detail::reduce_block;
        const std::size_t hi = std::min(lo + detail::reduce_block, spec.count);
        for (std::size_t i = lo; i < hi; ++i) {
            const ActionSeries s = propagate_with_action(sample_point(spec, i), params, T);
            for (std::size_t t = 0; t < nt; ++t) {
                const double phase = s.delta_s[t] / hbar;
                const double re = std::cos(phase), im = std::sin(phase);
                acc.re[t] += re;
                acc.im[t] += im;
                acc.rr[t] += re * re;
                acc.ii[t] += im * im;
                acc.ri[t] += re * im;
            }
        }
    });

    const double n = static_cast<double>(spec.count);
    FidelityCurve out;
    out.method = FidelityMethod::DrMonteCarlo;
    out.times.resize(nt);
    out.m.resize(nt);
    out.se.resize(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        double sre = 0, sim = 0, srr = 0, sii = 0, sri = 0;
        for (const auto& p : partials) {
            sre += p.re[t]; sim += p.im[t];
            srr += p.rr[t]; sii += p.ii[t]; sri += p.ri[t];
        }
        const double ore = sre / n, oim = sim / n;
        out.times[t] = static_cast<int>(t);
        out.m[t] = std::min(1.0, ore * ore + oim * oim);
        // delta method: Var(|O|^2) ~ (4/n) grad' Cov grad, grad = (Re O, Im O)
        const double c_rr = std::max(0.0, srr / n - ore * ore);
        const double c_ii = std::max(0.0, sii / n - oim * oim);
        const double c_ri = sri / n - ore * oim;
        const double var =
            4.0 * (ore * ore * c_rr + 2.0 * ore * oim * c_ri + oim * oim * c_ii) / n;
        out.se[t] = std::sqrt(std::max(0.0, var));
    }
    return out;
}

namespace detail {

inline double require_param(double v, const char* name, const char* regime) {
    if (!(std::isfinite(v)) || !(v > 0.0))
        throw std::invalid_argument(std::string("predict_fidelity[") + regime +
                                    "]: RegimeParams." + name + " missing or not positive");
    return v;
}

}  // namespace detail

// Closed-form fidelity of the six decay laws.  The correlated large-t rows
// are asymptotic forms whose prefactor exceeds one at small t; such values
// are clamped to 1 and the curve is flagged (raw keeps the unclamped value).
inline FidelityCurve predict_fidelity(Regime regime, const RegimeParams& rp,
                                      const std::vector<int>& times) {
    using detail::require_param;
    const char* rn = regime_name(regime);
    const double hbar = (regime == Regime::Superexponential || regime == Regime::CubicExponential)
                            ? 1.0
                            : require_param(rp.hbar, "hbar", rn);
    if (!std::isfinite(rp.epsilon))
        throw std::invalid_argument(std::string("predict_fidelity[") + rn +
                                    "]: RegimeParams.epsilon missing");
    const double eps2 = rp.epsilon * rp.epsilon;

    auto model = [&](double t) -> double {
        switch (regime) {
            case Regime::FermiGoldenRule:
                return std::exp(-2.0 * require_param(rp.K, "K", rn) * eps2 * t / (hbar * hbar));
            case Regime::Gaussian:
                return std::exp(-require_param(rp.C_V_inf, "C_V_inf", rn) * eps2 * t * t /
                                (hbar * hbar));
            case Regime::Lyapunov: {
                const double lam = require_param(rp.lambda, "lambda", rn);
                const double pre = hbar /
                                   (require_param(rp.alpha, "alpha", rn) *
                                    require_param(rp.Omega_u, "Omega_u", rn) * std::fabs(rp.epsilon)) *
                                   std::sqrt(2.0 * pi * lam / require_param(rp.D, "D", rn));
                return pre * std::exp(-lam * t);
            }
            case Regime::Algebraic: {
                const double dd = static_cast<double>(rp.d);
                const double pre =
                    std::pow(3.0 * pi * hbar * hbar * rp.m * rp.m /
                                 (require_param(rp.D, "D", rn) * eps2),
                             0.5 * dd) /
                    require_param(rp.Omega_p, "Omega_p", rn);
                return t > 0.0 ? pre * std::pow(t, -1.5 * dd)
                               : std::numeric_limits<double>::infinity();
            }
            case Regime::Superexponential:
                return std::exp(-require_param(rp.beta, "beta", rn) * eps2 *
                                std::exp(2.0 * require_param(rp.lambda, "lambda", rn) * t));
            case Regime::CubicExponential:
                return std::exp(-require_param(rp.gamma, "gamma", rn) * eps2 * t * t * t);
            case Regime::Unclassified:
                break;
        }
        throw std::invalid_argument("predict_fidelity: no closed form for mixed/unclassified");
    };
    if (rp.d < 1) throw std::invalid_argument("predict_fidelity: RegimeParams.d must be >= 1");
    if (regime == Regime::Algebraic && !(rp.m > 0.0))
        throw std::invalid_argument("predict_fidelity[algebraic]: RegimeParams.m missing or not positive");

    FidelityCurve out;
    out.method = FidelityMethod::TableII;
    out.regime = regime;
    out.times = times;
    out.m.resize(times.size());
    out.raw.resize(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double v = model(static_cast<double>(times[i]));
        out.raw[i] = v;
        if (v > 1.0) {
            out.m[i] = 1.0;
            out.clamped = true;
        } else {
            out.m[i] = v;
        }
    }
    return out;
}

// Position-state reduction of the universal formula:
//   M(t) = (2/Omega_p) * int_0^pi dp exp[-W(p, t) / (2 hbar^2)]
// by trapezoidal quadrature over the measured pair second moments W.  The
// grid must be dense where the integrand varies: a gap between adjacent
// nodes is rejected when the integrand is above 1e-6 there, changes by more
// than 10% of full scale, and is wide enough for that change to move the
// integral by more than ~1e-9.  A leading [0, p_min) gap is filled by flat
// extension of the first node.
inline FidelityCurve fidelity_from_pair_variance(const PairVarianceScan& scan, double hbar,
                                                 double Omega_p = two_pi) {
    if (!(hbar > 0.0)) throw std::invalid_argument("fidelity_from_pair_variance: hbar must be > 0");
    if (!(Omega_p > 0.0)) throw std::invalid_argument("fidelity_from_pair_variance: Omega_p must be > 0");
    const std::size_t ng = scan.p_minus.size();
    if (ng < 2) throw std::invalid_argument("fidelity_from_pair_variance: need at least 2 grid nodes");
    for (std::size_t i = 1; i < ng; ++i)
        if (!(scan.p_minus[i] > scan.p_minus[i - 1]))
            throw std::invalid_argument("fidelity_from_pair_variance: grid must be strictly increasing");
    if (scan.p_minus.front() < 0.0)
        throw std::invalid_argument("fidelity_from_pair_variance: negative separation");
    if (scan.p_minus.back() < pi * (1.0 - 1e-9))
        throw std::domain_error("fidelity_from_pair_variance: coverage gap [" +
                                std::to_string(scan.p_minus.back()) + ", pi]");

    const double inv2h2 = 1.0 / (2.0 * hbar * hbar);
    FidelityCurve out;
    out.method = FidelityMethod::Eq3Quadrature;
    out.times = scan.times;
    out.m.resize(scan.times.size());
    std::vector<double> integrand(ng);
    for (std::size_t t = 0; t < scan.times.size(); ++t) {
        for (std::size_t i = 0; i < ng; ++i)
            integrand[i] = std::exp(-scan.at(t, i) * inv2h2);
        for (std::size_t i = 0; i + 1 < ng; ++i) {
            const double d = std::fabs(integrand[i + 1] - integrand[i]);
            const double gap = scan.p_minus[i + 1] - scan.p_minus[i];
            if (std::max(integrand[i], integrand[i + 1]) > 1e-6 && d > 0.10 &&
                gap * d > two_pi * 1e-9)
                throw std::domain_error(
                    "fidelity_from_pair_variance: integrand varies by " + std::to_string(d) +
                    " across grid gap [" + std::to_string(scan.p_minus[i]) + ", " +
                    std::to_string(scan.p_minus[i + 1]) + "] at t=" + std::to_string(scan.times[t]));
        }
        double integral = integrand.front() * scan.p_minus.front();
        for (std::size_t i = 0; i + 1 < ng; ++i)
            integral += 0.5 * (integrand[i] + integrand[i + 1]) *
                        (scan.p_minus[i + 1] - scan.p_minus[i]);
        out.m[t] = std::min(1.0, 2.0 * integral / Omega_p);
    }
    return out;
}

// Evidence for the regime decision rule: the uncorrelated variance growth
// exponent fixes the dynamics class; a pair-variance branch, when present,
// selects the correlated row (its window tag picks small-t vs large-t).
struct RegimeEvidence {
    SlopeFit variance_vs_t;  // log-log fit of sigma^2_dS vs t
    std::optional<SlopeFit> pair_branch;
    FitSpace pair_space = FitSpace::LogLog;  // SemiLog = exponential growth (chaotic)
    bool pair_asymptotic = false;            // branch observed past the prefactor<=1 onset
    double residual_threshold = 0.5;
};

inline Regime classify_regime(const RegimeEvidence& ev) {
    const double s = ev.variance_vs_t.slope;
    if (ev.variance_vs_t.residual_rms > ev.residual_threshold) return Regime::Unclassified;
    const bool chaotic = std::fabs(s - 1.0) <= 0.35;
    const bool quasi = std::fabs(s - 2.0) <= 0.35;
    if (chaotic == quasi) return Regime::Unclassified;
    if (!ev.pair_branch) return chaotic ? Regime::FermiGoldenRule : Regime::Gaussian;
    const SlopeFit& pb = *ev.pair_branch;
    if (pb.residual_rms > ev.residual_threshold) return Regime::Unclassified;
    if (chaotic) {
        // correlated chaotic growth is exponential in t
        if (ev.pair_space != FitSpace::SemiLog || pb.slope <= 0.0) return Regime::Unclassified;
        return ev.pair_asymptotic ? Regime::Lyapunov : Regime::Superexponential;
    }
    // correlated quasi-integrable growth is cubic in t
    if (ev.pair_space != FitSpace::LogLog || std::fabs(pb.slope - 3.0) > 0.5)
        return Regime::Unclassified;
    return ev.pair_asymptotic ? Regime::Algebraic : Regime::CubicExponential;
}

// Short-time constant of the superexponential law, from a DR curve with
// known lambda: beta(t) = -ln M / (eps^2 e^{2 lambda t}), averaged over the
// window.
inline double fit_superexponential_beta(const FidelityCurve& curve, double lambda, double epsilon,
                                        FitWindow window) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < curve.times.size(); ++i) {
        const double t = curve.times[i];
        if (t < window.lo || t > window.hi) continue;
        const double m = curve.m[i];
        if (m <= 0.0 || m >= 1.0) continue;
        acc += -std::log(m) / (epsilon * epsilon * std::exp(2.0 * lambda * t));
        ++n;
    }
    if (n == 0) throw std::invalid_argument("fit_superexponential_beta: empty window");
    return acc / static_cast<double>(n);
}

// Short-time constant of the cubic-exponential law: gamma(t) = -ln M /
// (eps^2 t^3), averaged over the window.
inline double fit_cubic_gamma(const FidelityCurve& curve, double epsilon, FitWindow window) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < curve.times.size(); ++i) {
        const double t = curve.times[i];
        if (t < window.lo || t > window.hi || t <= 0) continue;
        const double m = curve.m[i];
        if (m <= 0.0 || m >= 1.0) continue;
        acc += -std::log(m) / (epsilon * epsilon * t * t * t);
        ++n;
    }
    if (n == 0) throw std::invalid_argument("fit_cubic_gamma: empty window");
    return acc / static_cast<double>(n);
}

// Prefactor alpha of the correlated chaotic variance law, extracted from a
// measured pair second-moment series at separation p_minus:
//   W(t) = (D/lambda) alpha^2 eps^2 e^{2 lambda t} <x_u^2>,
// with <x_u^2> = p_minus^2 * mean_sq_projection of the momentum axis onto
// the unstable direction (1/2 for a strongly chaotic standard map).
inline double estimate_alpha(const VarianceSeries& pair_variance, double p_minus,
                             const RegimeParams& rp, FitWindow window,
                             double mean_sq_projection = 0.5) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pair_variance.times.size(); ++i) {
        const double t = pair_variance.times[i];
        if (t < window.lo || t > window.hi) continue;
        const double w = pair_variance.value[i];
        if (w <= 0.0) continue;
        const double denom = rp.D / rp.lambda * rp.epsilon * rp.epsilon *
                             std::exp(2.0 * rp.lambda * t) * p_minus * p_minus *
                             mean_sq_projection;
        acc += w / denom;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("estimate_alpha: empty window");
    return std::sqrt(acc / static_cast<double>(n));
}

}  // namespace loschmidt
