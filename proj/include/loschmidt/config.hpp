#pragma once

#include <cstdint>
#include <cstdlib>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "loschmidt/dr_fidelity.hpp"
#include "loschmidt/ensembles.hpp"
#include "loschmidt/statistics.hpp"
#include "loschmidt/table_io.hpp"

namespace loschmidt {

enum class ExperimentKind {
    VarianceVsTime,
    PairVarianceVsTime,
    PairVarianceVsSeparation,
    Correlators,
    DrFidelity,
    QuantumFidelity,
    Compare,
    Predict,
};

enum class DrMethod { MonteCarlo, Eq3Quadrature, Both };

// Separation grid: log-spaced nodes from lo up, switching to linear steps of
// linear_step at linear_from (0 disables the linear tail), ending at hi
// exactly.  An explicit list overrides everything.  The linear tail keeps
// plateau fits evenly weighted across the torus, where the pair statistics
// oscillate symmetrically about p_minus = pi.
struct SeparationGrid {
    double lo = 1e-12;
    double hi = pi;
    int per_decade = 16;
    double linear_from = 0.0;
    double linear_step = 0.05;
    std::vector<double> explicit_list;

    std::vector<double> build() const {
        if (!explicit_list.empty()) return explicit_list;
        if (!(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("sep_grid: need 0 < lo < hi");
        if (per_decade < 1) throw std::invalid_argument("sep_grid.per_decade must be >= 1");
        const bool tail = linear_from > lo && linear_from < hi;
        const double log_hi = tail ? linear_from : hi;
        std::vector<double> g;
        const double l0 = std::log10(lo), l1 = std::log10(log_hi);
        const int n = std::max(1, static_cast<int>(std::ceil((l1 - l0) * per_decade)));
        for (int i = 0; i <= n; ++i) {
            const double v = std::pow(10.0, l0 + (l1 - l0) * i / n);
            g.push_back(std::min(v, log_hi));
        }
        g.back() = log_hi;
        if (tail) {
            if (!(linear_step > 0.0))
                throw std::invalid_argument("sep_grid.linear_step must be positive");
            for (double v = linear_from + linear_step; v < hi; v += linear_step) g.push_back(v);
            g.push_back(hi);
        }
        return g;
    }
};

// Everything a run needs; round-trips losslessly through the key=value
// config format (see to_text/parse_config).
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::VarianceVsTime;
    std::string label = "custom";

    MapParams map;  // with_perturbation is chosen per experiment, not configured

    EnsembleKind ensemble_kind = EnsembleKind::PositionState;
    double q0 = 0.8 * pi;
    std::size_t count = 1000;
    std::uint64_t seed = 1;
    Placement placement = Placement::Random;

    double p_minus = 0.0;
    int steps = 100;
    int fixed_t = 7;
    SeparationGrid sep_grid;
    double hbar = two_pi / 1000.0;
    Smoothing smoothing = Smoothing::None;

    FitWindow fit_primary{0.0, 0.0};
    FitWindow fit_early{0.0, 0.0};
    FitSpace fit_early_space = FitSpace::LogLog;
    FitWindow fit_late{0.0, 0.0};
    FitWindow fit_small{0.0, 0.0};
    FitWindow fit_plateau{0.0, 0.0};

    int corr_t_max = 64;
    int corr_origins = 32;
    std::size_t corr_count = 20000;

    std::size_t quantum_n = 1000;
    DrMethod dr_method = DrMethod::MonteCarlo;

    Regime predict_regime = Regime::FermiGoldenRule;
    RegimeParams rp;  // hbar/epsilon are taken from the main fields when predicting
};

namespace config_detail {

inline const char* kind_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::VarianceVsTime: return "variance-vs-time";
        case ExperimentKind::PairVarianceVsTime: return "pair-variance-vs-time";
        case ExperimentKind::PairVarianceVsSeparation: return "pair-variance-vs-separation";
        case ExperimentKind::Correlators: return "correlators";
        case ExperimentKind::DrFidelity: return "dr-fidelity";
        case ExperimentKind::QuantumFidelity: return "quantum-fidelity";
        case ExperimentKind::Compare: return "compare";
        case ExperimentKind::Predict: return "predict";
    }
    return "?";
}

inline ExperimentKind parse_kind(const std::string& s) {
    for (ExperimentKind k :
         {ExperimentKind::VarianceVsTime, ExperimentKind::PairVarianceVsTime,
          ExperimentKind::PairVarianceVsSeparation, ExperimentKind::Correlators,
          ExperimentKind::DrFidelity, ExperimentKind::QuantumFidelity, ExperimentKind::Compare,
          ExperimentKind::Predict})
        if (s == kind_name(k)) return k;
    throw std::invalid_argument("invalid config: kind: unknown experiment '" + s + "'");
}

inline const char* regime_key(Regime r) { return regime_name(r); }

inline Regime parse_regime(const std::string& s) {
    for (Regime r : {Regime::FermiGoldenRule, Regime::Gaussian, Regime::Lyapunov,
                     Regime::Algebraic, Regime::Superexponential, Regime::CubicExponential})
        if (s == regime_name(r)) return r;
    throw std::invalid_argument("invalid config: predict.regime: unknown regime '" + s + "'");
}

inline double parse_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw std::invalid_argument("invalid config: " + key + ": not a number '" + v + "'");
    return x;
}

inline long long parse_int(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const long long x = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw std::invalid_argument("invalid config: " + key + ": not an integer '" + v + "'");
    return x;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw std::invalid_argument("invalid config: " + key + ": not an unsigned integer '" + v + "'");
    return x;
}

inline std::string list_to_string(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += format_double(v[i]);
    }
    return s;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    if (v.empty()) return out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(key, item));
    return out;
}

}  // namespace config_detail

// Canonical serialization: fixed key order, %.17g numbers.  parse_config of
// this text reproduces the config exactly.
inline std::string to_text(const ExperimentConfig& c) {
    using config_detail::kind_name;
    using config_detail::list_to_string;
    std::string s;
    auto put = [&s](const std::string& k, const std::string& v) { s += k + " = " + v + "\n"; };
    auto putd = [&](const std::string& k, double v) { put(k, format_double(v)); };
    auto puti = [&](const std::string& k, long long v) { put(k, std::to_string(v)); };
    put("kind", kind_name(c.kind));
    put("label", c.label);
    putd("map.k", c.map.k);
    putd("map.epsilon", c.map.epsilon);
    put("ensemble.kind", c.ensemble_kind == EnsembleKind::UniformTorus ? "uniform-torus"
                                                                       : "position-state");
    putd("ensemble.q0", c.q0);
    puti("ensemble.count", static_cast<long long>(c.count));
    put("ensemble.seed", std::to_string(c.seed));
    put("ensemble.placement", c.placement == Placement::Random ? "random" : "grid-p");
    putd("pair.p_minus", c.p_minus);
    puti("time.steps", c.steps);
    puti("time.fixed_t", c.fixed_t);
    putd("sep_grid.lo", c.sep_grid.lo);
    putd("sep_grid.hi", c.sep_grid.hi);
    puti("sep_grid.per_decade", c.sep_grid.per_decade);
    putd("sep_grid.linear_from", c.sep_grid.linear_from);
    putd("sep_grid.linear_step", c.sep_grid.linear_step);
    put("sep_grid.list", list_to_string(c.sep_grid.explicit_list));
    putd("hbar", c.hbar);
    put("smoothing", c.smoothing == Smoothing::None ? "none" : "window-half-t");
    putd("fit.primary.lo", c.fit_primary.lo);
    putd("fit.primary.hi", c.fit_primary.hi);
    putd("fit.early.lo", c.fit_early.lo);
    putd("fit.early.hi", c.fit_early.hi);
    put("fit.early.space", c.fit_early_space == FitSpace::LogLog ? "loglog" : "semilog");
    putd("fit.late.lo", c.fit_late.lo);
    putd("fit.late.hi", c.fit_late.hi);
    putd("fit.small.lo", c.fit_small.lo);
    putd("fit.small.hi", c.fit_small.hi);
    putd("fit.plateau.lo", c.fit_plateau.lo);
    putd("fit.plateau.hi", c.fit_plateau.hi);
    puti("correlator.t_max", c.corr_t_max);
    puti("correlator.origins", c.corr_origins);
    puti("correlator.count", static_cast<long long>(c.corr_count));
    puti("quantum.n", static_cast<long long>(c.quantum_n));
    put("dr.method", c.dr_method == DrMethod::MonteCarlo      ? "monte-carlo"
                     : c.dr_method == DrMethod::Eq3Quadrature ? "eq3-quadrature"
                                                              : "both");
    put("predict.regime", config_detail::regime_key(c.predict_regime));
    putd("rp.K", c.rp.K);
    putd("rp.C_V_inf", c.rp.C_V_inf);
    putd("rp.D", c.rp.D);
    putd("rp.lambda", c.rp.lambda);
    putd("rp.alpha", c.rp.alpha);
    putd("rp.m", c.rp.m);
    puti("rp.d", c.rp.d);
    putd("rp.Omega_u", c.rp.Omega_u);
    putd("rp.Omega_p", c.rp.Omega_p);
    putd("rp.beta", c.rp.beta);
    putd("rp.gamma", c.rp.gamma);
    return s;
}

inline std::map<std::string, std::string> parse_kv(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::stringstream ss(text);
    std::string line;
    auto trim = [](std::string v) {
        const char* ws = " \t\r";
        const auto b = v.find_first_not_of(ws);
        if (b == std::string::npos) return std::string();
        const auto e = v.find_last_not_of(ws);
        return v.substr(b, e - b + 1);
    };
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("invalid config: line " + std::to_string(lineno) +
                                        ": expected key = value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

// Apply key=value settings on top of a config; unknown keys are errors.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
    using namespace config_detail;
    if (key == "kind") c.kind = parse_kind(value);
    else if (key == "label") c.label = value;
    else if (key == "map.k") c.map.k = parse_double(key, value);
    else if (key == "map.epsilon") c.map.epsilon = parse_double(key, value);
    else if (key == "ensemble.kind") {
        if (value == "uniform-torus") c.ensemble_kind = EnsembleKind::UniformTorus;
        else if (value == "position-state") c.ensemble_kind = EnsembleKind::PositionState;
        else
            throw std::invalid_argument(
                "invalid config: ensemble.kind: '" + value +
                "' (explicit-list ensembles are library-only; use uniform-torus or position-state)");
    } else if (key == "ensemble.q0") c.q0 = parse_double(key, value);
    else if (key == "ensemble.count") c.count = static_cast<std::size_t>(parse_int(key, value));
    else if (key == "ensemble.seed") c.seed = parse_u64(key, value);
    else if (key == "ensemble.placement") {
        if (value == "random") c.placement = Placement::Random;
        else if (value == "grid-p") c.placement = Placement::GridP;
        else throw std::invalid_argument("invalid config: ensemble.placement: '" + value + "'");
    } else if (key == "pair.p_minus") c.p_minus = parse_double(key, value);
    else if (key == "time.steps") c.steps = static_cast<int>(parse_int(key, value));
    else if (key == "time.fixed_t") c.fixed_t = static_cast<int>(parse_int(key, value));
    else if (key == "sep_grid.lo") c.sep_grid.lo = parse_double(key, value);
    else if (key == "sep_grid.hi") c.sep_grid.hi = parse_double(key, value);
    else if (key == "sep_grid.per_decade") c.sep_grid.per_decade = static_cast<int>(parse_int(key, value));
    else if (key == "sep_grid.linear_from") c.sep_grid.linear_from = parse_double(key, value);
    else if (key == "sep_grid.linear_step") c.sep_grid.linear_step = parse_double(key, value);
    else if (key == "sep_grid.list") c.sep_grid.explicit_list = parse_list(key, value);
    else if (key == "hbar") c.hbar = parse_double(key, value);
    else if (key == "smoothing") {
        if (value == "none") c.smoothing = Smoothing::None;
        else if (value == "window-half-t") c.smoothing = Smoothing::WindowHalfT;
        else throw std::invalid_argument("invalid config: smoothing: '" + value + "'");
    } else if (key == "fit.primary.lo") c.fit_primary.lo = parse_double(key, value);
    else if (key == "fit.primary.hi") c.fit_primary.hi = parse_double(key, value);
    else if (key == "fit.early.lo") c.fit_early.lo = parse_double(key, value);
    else if (key == "fit.early.hi") c.fit_early.hi = parse_double(key, value);
    else if (key == "fit.early.space") {
        if (value == "loglog") c.fit_early_space = FitSpace::LogLog;
        else if (value == "semilog") c.fit_early_space = FitSpace::SemiLog;
        else throw std::invalid_argument("invalid config: fit.early.space: '" + value + "'");
    } else if (key == "fit.late.lo") c.fit_late.lo = parse_double(key, value);
    else if (key == "fit.late.hi") c.fit_late.hi = parse_double(key, value);
    else if (key == "fit.small.lo") c.fit_small.lo = parse_double(key, value);
    else if (key == "fit.small.hi") c.fit_small.hi = parse_double(key, value);
    else if (key == "fit.plateau.lo") c.fit_plateau.lo = parse_double(key, value);
    else if (key == "fit.plateau.hi") c.fit_plateau.hi = parse_double(key, value);
    else if (key == "correlator.t_max") c.corr_t_max = static_cast<int>(parse_int(key, value));
    else if (key == "correlator.origins") c.corr_origins = static_cast<int>(parse_int(key, value));
    else if (key == "correlator.count") c.corr_count = static_cast<std::size_t>(parse_int(key, value));
    else if (key == "quantum.n") c.quantum_n = static_cast<std::size_t>(parse_int(key, value));
    else if (key == "dr.method") {
        if (value == "monte-carlo") c.dr_method = DrMethod::MonteCarlo;
        else if (value == "eq3-quadrature") c.dr_method = DrMethod::Eq3Quadrature;
        else if (value == "both") c.dr_method = DrMethod::Both;
        else throw std::invalid_argument("invalid config: dr.method: '" + value + "'");
    } else if (key == "predict.regime") c.predict_regime = parse_regime(value);
    else if (key == "rp.K") c.rp.K = parse_double(key, value);
    else if (key == "rp.C_V_inf") c.rp.C_V_inf = parse_double(key, value);
    else if (key == "rp.D") c.rp.D = parse_double(key, value);
    else if (key == "rp.lambda") c.rp.lambda = parse_double(key, value);
    else if (key == "rp.alpha") c.rp.alpha = parse_double(key, value);
    else if (key == "rp.m") c.rp.m = parse_double(key, value);
    else if (key == "rp.d") c.rp.d = static_cast<int>(parse_int(key, value));
    else if (key == "rp.Omega_u") c.rp.Omega_u = parse_double(key, value);
    else if (key == "rp.Omega_p") c.rp.Omega_p = parse_double(key, value);
    else if (key == "rp.beta") c.rp.beta = parse_double(key, value);
    else if (key == "rp.gamma") c.rp.gamma = parse_double(key, value);
    else throw std::invalid_argument("invalid config: unknown key '" + key + "'");
}

inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig c;
    for (const auto& [k, v] : parse_kv(text)) apply_setting(c, k, v);
    return c;
}

inline EnsembleSpec ensemble_of(const ExperimentConfig& c) {
    EnsembleSpec spec;
    spec.kind = c.ensemble_kind;
    spec.q0 = c.q0;
    spec.count = c.count;
    spec.seed = c.seed;
    spec.placement = c.placement;
    return spec;
}

// Named experiment presets reproducing the reference figures and the
// cross-validation studies.
inline std::vector<std::string> preset_names() {
    return {"fig1a", "fig1b", "fig2a", "fig2b", "fig3a", "fig3b",
            "fgr-compare", "gaussian-compare", "cubic-exponential-search"};
}

inline ExperimentConfig preset(const std::string& name) {
    ExperimentConfig c;
    c.label = name;
    c.q0 = 0.8 * pi;
    if (name == "fig1a") {
        c.kind = ExperimentKind::VarianceVsTime;
        c.map = {20.0, 0.003, false};
        c.count = 1000;
        c.steps = 128;
        c.fit_primary = {5.0, 50.0};
    } else if (name == "fig1b") {
        c.kind = ExperimentKind::VarianceVsTime;
        c.map = {0.3, 0.005, false};
        c.count = 1000;
        c.steps = 256;
        c.fit_primary = {20.0, 200.0};
    } else if (name == "fig2a") {
        c.kind = ExperimentKind::PairVarianceVsSeparation;
        c.map = {20.0, 0.003, false};
        c.count = 1000;
        c.fixed_t = 7;
        c.sep_grid = {1e-12, 6.0, 16, 0.3, 0.05, {}};
        c.fit_small = {1e-12, 1e-8};
        c.fit_plateau = {0.35, 5.93};
    } else if (name == "fig2b") {
        c.kind = ExperimentKind::PairVarianceVsSeparation;
        c.map = {0.3, 0.005, false};
        c.count = 1000;
        c.fixed_t = 7;
        c.sep_grid = {1e-12, 6.0, 16, 0.3, 0.05, {}};
        c.fit_small = {1e-8, 1e-2};
        c.fit_plateau = {1.0, 5.28};
    } else if (name == "fig3a") {
        c.kind = ExperimentKind::PairVarianceVsTime;
        c.map = {20.0, 0.003, false};
        c.count = 1000;
        c.p_minus = 1e-9;
        c.steps = 200;
        c.fit_early = {2.0, 8.0};
        c.fit_early_space = FitSpace::SemiLog;
        c.fit_late = {50.0, 200.0};
    } else if (name == "fig3b") {
        // most-random state with stratified momenta: position-state phases
        // coherently amplify the island-boundary bursts, and random momentum
        // draws hit thin chaotic layers whose exponential pair separation
        // swamps the p_minus^2 t^2 branch
        c.kind = ExperimentKind::PairVarianceVsTime;
        c.map = {0.3, 0.005, false};
        c.ensemble_kind = EnsembleKind::UniformTorus;
        c.placement = Placement::GridP;
        c.count = 1024;
        c.p_minus = 1e-9;
        c.steps = 300;
        c.smoothing = Smoothing::WindowHalfT;
        c.fit_early = {2.0, 8.0};
        c.fit_early_space = FitSpace::LogLog;
        c.fit_late = {60.0, 300.0};
    } else if (name == "fgr-compare") {
        c.kind = ExperimentKind::Compare;
        c.map = {20.0, 0.003, false};
        c.count = 4000;
        c.steps = 150;
        c.quantum_n = 1000;
        c.hbar = two_pi / 1000.0;
        c.predict_regime = Regime::FermiGoldenRule;
        c.fit_primary = {3.0, 60.0};
        c.corr_t_max = 64;
        c.corr_origins = 32;
        c.corr_count = 20000;
    } else if (name == "gaussian-compare") {
        c.kind = ExperimentKind::Compare;
        c.map = {0.3, 0.005, false};
        c.count = 4000;
        c.steps = 400;
        c.quantum_n = 100;
        c.hbar = two_pi / 100.0;
        c.predict_regime = Regime::Gaussian;
        c.fit_primary = {10.0, 200.0};
        c.corr_t_max = 256;
        c.corr_origins = 64;
        c.corr_count = 20000;
    } else if (name == "cubic-exponential-search") {
        // short-time probe of the conjectured cubic-exponential decay
        c.kind = ExperimentKind::DrFidelity;
        c.map = {0.3, 0.05, false};
        c.ensemble_kind = EnsembleKind::UniformTorus;
        c.count = 20000;
        c.steps = 12;
        c.hbar = two_pi / 100.0;
        c.dr_method = DrMethod::MonteCarlo;
        c.fit_primary = {2.0, 8.0};
    } else {
        throw std::invalid_argument("unknown preset '" + name + "'");
    }
    return c;
}

}  // namespace loschmidt
