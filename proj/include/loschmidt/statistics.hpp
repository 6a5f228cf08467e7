#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "loschmidt/ensembles.hpp"
#include "loschmidt/parallel.hpp"
#include "loschmidt/standard_map.hpp"

namespace loschmidt {

enum class Smoothing { None, WindowHalfT };

// Ensemble variance (or raw second moment, for pair differences) of the
// action statistic as a function of map time.
struct VarianceSeries {
    std::vector<int> times;
    std::vector<double> value;
    std::vector<double> se;  // naive standard error of each entry
    std::size_t count = 0;
    Smoothing smoothing = Smoothing::None;
};

enum class CorrelatorKind { Potential, Force };

struct CorrelatorSeries {
    std::vector<int> lag;
    std::vector<double> value;
    std::vector<double> se;
    CorrelatorKind kind = CorrelatorKind::Potential;
};

// <(dS' - dS'')^2> at a fixed time, one entry per p_minus grid node.
struct SeparationScan {
    int t = 0;
    std::vector<double> p_minus;
    std::vector<double> second_moment;
    std::vector<double> se;
    std::size_t count = 0;
};

// Full (time x separation) table of pair second moments, the input to the
// universal-formula quadrature.  w and excess_kurtosis are row-major
// [t * n_sep + i].
struct PairVarianceScan {
    std::vector<double> p_minus;
    std::vector<int> times;
    std::vector<double> w;
    std::vector<double> excess_kurtosis;
    std::size_t count = 0;

    double at(std::size_t t, std::size_t i) const { return w[t * p_minus.size() + i]; }
};

struct FitWindow {
    double lo = 0.0;
    double hi = 0.0;
};

// Least-squares line in (log t, log y) or (t, log y) space.
struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    FitWindow window;
    double residual_rms = 0.0;  // in log space
    double r_squared = 0.0;
    std::size_t n_points = 0;
};

namespace detail {

inline constexpr std::size_t reduce_block = 16;

// y = a x + b least squares; xs/ys already transformed to fit space
inline SlopeFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys,
                         FitWindow window) {
    const std::size_t n = xs.size();
    if (n < 2) throw std::invalid_argument("slope fit needs at least two points in window");
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) { sx += xs[i]; sy += ys[i]; }
    const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw std::invalid_argument("slope fit: degenerate abscissas");
    SlopeFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.window = window;
    double ss_res = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ys[i] - (fit.slope * xs[i] + fit.intercept);
        ss_res += r * r;
    }
    fit.residual_rms = std::sqrt(ss_res / static_cast<double>(n));
    fit.r_squared = syy > 0 ? 1.0 - ss_res / syy : 1.0;
    fit.n_points = n;
    return fit;
}

template <typename Abscissa>
void collect_window(const std::vector<Abscissa>& times, const std::vector<double>& values,
                    FitWindow window, bool log_abscissa, const char* who,
                    std::vector<double>& xs, std::vector<double>& ys) {
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = static_cast<double>(times[i]);
        if (t < window.lo || t > window.hi) continue;
        if (values[i] <= 0.0)
            throw std::domain_error(std::string(who) + ": nonpositive value at abscissa " +
                                    std::to_string(times[i]) + " (index " + std::to_string(i) + ")");
        if (log_abscissa) {
            if (t <= 0.0)
                throw std::domain_error(std::string(who) + ": nonpositive abscissa " +
                                        std::to_string(times[i]));
            xs.push_back(std::log(t));
        } else {
            xs.push_back(t);
        }
        ys.push_back(std::log(values[i]));
    }
}

}  // namespace detail

// Least-squares slope of log y against log t over the window.
template <typename Abscissa>
SlopeFit fit_loglog_slope(const std::vector<Abscissa>& times, const std::vector<double>& values,
                          FitWindow window) {
    std::vector<double> xs, ys;
    detail::collect_window(times, values, window, true, "fit_loglog_slope", xs, ys);
    return detail::fit_line(xs, ys, window);
}

// Least-squares slope of log y against t over the window (decay/growth rate).
template <typename Abscissa>
SlopeFit fit_exponential_rate(const std::vector<Abscissa>& times, const std::vector<double>& values,
                              FitWindow window) {
    std::vector<double> xs, ys;
    detail::collect_window(times, values, window, false, "fit_exponential_rate", xs, ys);
    return detail::fit_line(xs, ys, window);
}

inline SlopeFit fit_loglog_slope(const VarianceSeries& s, FitWindow w) {
    return fit_loglog_slope(s.times, s.value, w);
}
inline SlopeFit fit_exponential_rate(const VarianceSeries& s, FitWindow w) {
    return fit_exponential_rate(s.times, s.value, w);
}

enum class FitSpace { LogLog, SemiLog };

// Time at which two fitted branches predict the same value.  Closed form for
// same-space fits; bisection on [1, 1e9] otherwise.
inline double crossover_time(const SlopeFit& a, FitSpace sa, const SlopeFit& b, FitSpace sb) {
    auto eval = [](const SlopeFit& f, FitSpace s, double t) {
        return s == FitSpace::LogLog ? f.slope * std::log(t) + f.intercept
                                     : f.slope * t + f.intercept;
    };
    if (sa == sb) {
        if (a.slope == b.slope) return std::numeric_limits<double>::quiet_NaN();
        if (sa == FitSpace::LogLog) return std::exp((b.intercept - a.intercept) / (a.slope - b.slope));
        return (b.intercept - a.intercept) / (a.slope - b.slope);
    }
    double lo = 1.0, hi = 1e9;
    auto diff = [&](double t) { return eval(a, sa, t) - eval(b, sb, t); };
    double flo = diff(lo);
    if (flo == 0.0) return lo;
    // expand until sign change
    double fhi = diff(hi);
    if (flo * fhi > 0.0) return std::numeric_limits<double>::quiet_NaN();
    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo * hi);
        const double fm = diff(mid);
        if (fm == 0.0) return mid;
        if (flo * fm < 0.0) { hi = mid; } else { lo = mid; flo = fm; }
    }
    return std::sqrt(lo * hi);
}

// Arithmetic mean of the series over integer times in (t/2, t]; used where
// raw pair variances oscillate strongly about their envelope.
inline VarianceSeries window_average_half_t(const VarianceSeries& in) {
    VarianceSeries out = in;
    out.smoothing = Smoothing::WindowHalfT;
    for (std::size_t idx = 0; idx < in.times.size(); ++idx) {
        const int t = in.times[idx];
        if (t <= 0) continue;
        double acc = 0.0, acc_se = 0.0;
        int n = 0;
        for (int u = t / 2 + 1; u <= t; ++u) {
            acc += in.value[static_cast<std::size_t>(u)];
            acc_se += in.se.empty() ? 0.0 : in.se[static_cast<std::size_t>(u)];
            ++n;
        }
        out.value[idx] = acc / n;
        if (!in.se.empty()) out.se[idx] = acc_se / n / std::sqrt(static_cast<double>(n));
    }
    return out;
}

namespace detail {

// Per-time raw moment sums (x, x^2, x^3, x^4), accumulated in fixed block
// order so results do not depend on the worker count.
struct MomentTable {
    std::size_t n_times = 0;
    std::vector<double> m1, m2, m3, m4;

    explicit MomentTable(std::size_t nt)
        : n_times(nt), m1(nt, 0.0), m2(nt, 0.0), m3(nt, 0.0), m4(nt, 0.0) {}

    void add(std::size_t t, double x) {
        const double x2 = x * x;
        m1[t] += x;
        m2[t] += x2;
        m3[t] += x2 * x;
        m4[t] += x2 * x2;
    }

    void merge(const MomentTable& other) {
        for (std::size_t t = 0; t < n_times; ++t) {
            m1[t] += other.m1[t];
            m2[t] += other.m2[t];
            m3[t] += other.m3[t];
            m4[t] += other.m4[t];
        }
    }
};

// Fill a MomentTable from per-index contributions: body(i, table) must add
// one value per time slot for index i.
template <typename Body>
MomentTable blockwise_moments(std::size_t count, std::size_t n_times, unsigned workers,
                              Body&& body) {
    const std::size_t n_blocks = (count + reduce_block - 1) / reduce_block;
    std::vector<MomentTable> partials(n_blocks, MomentTable(n_times));
    parallel_for_indexed(n_blocks, workers, [&](std::size_t b) {
        const std::size_t lo = b * reduce_block;
        const std::size_t hi = std::min(lo + reduce_block, count);
        for (std::size_t i = lo; i < hi; ++i) body(i, partials[b]);
    });
    MomentTable total(n_times);
    for (const auto& p : partials) total.merge(p);
    return total;
}

}  // namespace detail

// Unbiased ensemble variance of DeltaS(t) for each t = 0..T.
inline VarianceSeries variance_delta_action(const EnsembleSpec& spec, const MapParams& params,
                                            int T, unsigned workers = 1) {
    validate(spec);
    if (spec.count < 2)
        throw std::invalid_argument("variance_delta_action: ensemble count must be >= 2");
    const std::size_t nt = static_cast<std::size_t>(T) + 1;
    auto tbl = detail::blockwise_moments(
        spec.count, nt, workers, [&](std::size_t i, detail::MomentTable& acc) {
            const ActionSeries s = propagate_with_action(sample_point(spec, i), params, T);
            for (std::size_t t = 0; t < nt; ++t) acc.add(t, s.delta_s[t]);
        });
    const double n = static_cast<double>(spec.count);
    VarianceSeries out;
    out.count = spec.count;
    out.times.resize(nt);
    out.value.resize(nt);
    out.se.resize(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        out.times[t] = static_cast<int>(t);
        const double mean = tbl.m1[t] / n;
        const double m2c = std::max(0.0, tbl.m2[t] / n - mean * mean);
        out.value[t] = m2c * n / (n - 1.0);
        // central fourth moment from raw sums
        const double m4c = std::max(
            0.0, (tbl.m4[t] - 4.0 * mean * tbl.m3[t] + 6.0 * mean * mean * tbl.m2[t] -
                  3.0 * n * mean * mean * mean * mean) / n);
        out.se[t] = std::sqrt(std::max(0.0, m4c - m2c * m2c) / n);
    }
    return out;
}

namespace detail {

// Difference of cumulative actions for one trajectory pair, accumulated
// term by term to preserve precision at tiny separations.
template <typename PerTime>
void pair_difference_walk(PhasePoint a, PhasePoint b, const MapParams& params, int T,
                          PerTime&& per_time) {
    MapParams base = params;
    base.with_perturbation = false;
    double vdiff = 0.0;
    per_time(0, 0.0);
    for (int t = 1; t <= T; ++t) {
        vdiff += perturbation_potential(a.q) - perturbation_potential(b.q);
        a = step_map(a, base);
        b = step_map(b, base);
        per_time(t, -params.epsilon * vdiff);
    }
}

}  // namespace detail

// Raw second moment of DeltaS' - DeltaS'' versus time (the mean vanishes by
// symmetry and is not subtracted).
inline VarianceSeries pair_variance_vs_time(const PairSpec& spec, const MapParams& params, int T,
                                            Smoothing smoothing = Smoothing::None,
                                            unsigned workers = 1) {
    validate(spec.base);
    if (spec.base.count < 2)
        throw std::invalid_argument("pair_variance_vs_time: ensemble count must be >= 2");
    const std::size_t nt = static_cast<std::size_t>(T) + 1;
    auto tbl = detail::blockwise_moments(
        spec.base.count, nt, workers, [&](std::size_t i, detail::MomentTable& acc) {
            const auto [a, b] = sample_pair(spec, i);
            detail::pair_difference_walk(a, b, params, T,
                                         [&](int t, double d) { acc.add(static_cast<std::size_t>(t), d); });
        });
    const double n = static_cast<double>(spec.base.count);
    VarianceSeries out;
    out.count = spec.base.count;
    out.times.resize(nt);
    out.value.resize(nt);
    out.se.resize(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        out.times[t] = static_cast<int>(t);
        const double m2 = tbl.m2[t] / n;
        out.value[t] = m2;
        out.se[t] = std::sqrt(std::max(0.0, tbl.m4[t] / n - m2 * m2) / n);
    }
    if (smoothing == Smoothing::WindowHalfT) return window_average_half_t(out);
    return out;
}

// Pair second moment at a fixed time over a grid of separations; the same
// seed (hence the same phase-space sample) is used at every grid node.
inline SeparationScan pair_variance_vs_separation(const EnsembleSpec& base, const MapParams& params,
                                                  int t, const std::vector<double>& p_minus_grid,
                                                  unsigned workers = 1) {
    validate(base);
    if (base.count < 2)
        throw std::invalid_argument("pair_variance_vs_separation: ensemble count must be >= 2");
    for (double pm : p_minus_grid)
        if (pm < 0.0) throw std::invalid_argument("pair_variance_vs_separation: negative p_minus");
    SeparationScan scan;
    scan.t = t;
    scan.p_minus = p_minus_grid;
    scan.second_moment.resize(p_minus_grid.size());
    scan.se.resize(p_minus_grid.size());
    scan.count = base.count;
    parallel_for_indexed(p_minus_grid.size(), workers, [&](std::size_t g) {
        const PairSpec spec{base, p_minus_grid[g]};
        double s2 = 0.0, s4 = 0.0;
        for (std::size_t i = 0; i < base.count; ++i) {
            const auto [a, b] = sample_pair(spec, i);
            double last = 0.0;
            detail::pair_difference_walk(a, b, params, t, [&](int tt, double d) {
                if (tt == t) last = d;
            });
            s2 += last * last;
            s4 += last * last * last * last;
        }
        const double n = static_cast<double>(base.count);
        const double m2 = s2 / n;
        scan.second_moment[g] = m2;
        scan.se[g] = std::sqrt(std::max(0.0, s4 / n - m2 * m2) / n);
    });
    return scan;
}

// Full (t x p_minus) pair second-moment table plus an excess-kurtosis
// diagnostic of DeltaS' - DeltaS'' (the universal formula assumes the
// difference is Gaussian; large |kurtosis| marks where that strains).
inline PairVarianceScan pair_variance_scan(const EnsembleSpec& base, const MapParams& params,
                                           int T, const std::vector<double>& p_minus_grid,
                                           unsigned workers = 1) {
    validate(base);
    if (base.count < 2) throw std::invalid_argument("pair_variance_scan: ensemble count must be >= 2");
    const std::size_t nt = static_cast<std::size_t>(T) + 1;
    const std::size_t ng = p_minus_grid.size();
    PairVarianceScan scan;
    scan.p_minus = p_minus_grid;
    scan.times.resize(nt);
    for (std::size_t t = 0; t < nt; ++t) scan.times[t] = static_cast<int>(t);
    scan.w.assign(nt * ng, 0.0);
    scan.excess_kurtosis.assign(nt * ng, 0.0);
    scan.count = base.count;
    parallel_for_indexed(ng, workers, [&](std::size_t g) {
        const PairSpec spec{base, p_minus_grid[g]};
        std::vector<double> s2(nt, 0.0), s4(nt, 0.0);
        for (std::size_t i = 0; i < base.count; ++i) {
            const auto [a, b] = sample_pair(spec, i);
            detail::pair_difference_walk(a, b, params, T, [&](int tt, double d) {
                const double d2 = d * d;
                s2[static_cast<std::size_t>(tt)] += d2;
                s4[static_cast<std::size_t>(tt)] += d2 * d2;
            });
        }
        const double n = static_cast<double>(base.count);
        for (std::size_t t = 0; t < nt; ++t) {
            const double m2 = s2[t] / n;
            scan.w[t * ng + g] = m2;
            scan.excess_kurtosis[t * ng + g] = m2 > 0.0 ? (s4[t] / n) / (m2 * m2) - 3.0 : 0.0;
        }
    });
    return scan;
}

namespace detail {

template <typename Observable>
CorrelatorSeries observable_correlator(const EnsembleSpec& spec, const MapParams& params,
                                       int T_max, int origins, unsigned workers,
                                       CorrelatorKind kind, Observable observable) {
    validate(spec);
    if (T_max < 0) throw std::invalid_argument("correlator: T_max must be >= 0");
    if (origins < 1) throw std::invalid_argument("correlator: origins must be >= 1");
    const std::size_t nlag = static_cast<std::size_t>(T_max) + 1;
    MapParams base = params;
    base.with_perturbation = false;
    // per-lag sums of per-trajectory origin means and their squares
    const std::size_t n_blocks = (spec.count + reduce_block - 1) / reduce_block;
    std::vector<std::vector<double>> psum(n_blocks), psq(n_blocks);
    parallel_for_indexed(n_blocks, workers, [&](std::size_t blk) {
        psum[blk].assign(nlag, 0.0);
        psq[blk].assign(nlag, 0.0);
        std::vector<double> f(static_cast<std::size_t>(T_max + origins));
        const std::size_t lo = blk * reduce_block;
        const std::size_t hi = std::min(lo + reduce_block, spec.count);
        for (std::size_t i = lo; i < hi; ++i) {
            PhasePoint x = sample_point(spec, i);
            for (std::size_t t = 0; t < f.size(); ++t) {
                f[t] = observable(x.q);
                x = step_map(x, base);
            }
            for (std::size_t lag = 0; lag < nlag; ++lag) {
                double acc = 0.0;
                for (int o = 0; o < origins; ++o)
                    acc += f[static_cast<std::size_t>(o)] * f[static_cast<std::size_t>(o) + lag];
                acc /= static_cast<double>(origins);
                psum[blk][lag] += acc;
                psq[blk][lag] += acc * acc;
            }
        }
    });
    CorrelatorSeries out;
    out.kind = kind;
    out.lag.resize(nlag);
    out.value.resize(nlag);
    out.se.resize(nlag);
    const double n = static_cast<double>(spec.count);
    for (std::size_t lag = 0; lag < nlag; ++lag) {
        double s = 0.0, s2 = 0.0;
        for (std::size_t blk = 0; blk < n_blocks; ++blk) {
            s += psum[blk][lag];
            s2 += psq[blk][lag];
        }
        const double mean = s / n;
        out.lag[lag] = static_cast<int>(lag);
        out.value[lag] = mean;
        out.se[lag] = n > 1 ? std::sqrt(std::max(0.0, s2 / n - mean * mean) / (n - 1.0)) : 0.0;
    }
    return out;
}

}  // namespace detail

// C_V(lag) = <V[q(t0+lag)] V[q(t0)]>, averaged over trajectories and over
// `origins` time origins; the trajectory is always the unperturbed one.
inline CorrelatorSeries potential_correlator(const EnsembleSpec& spec, const MapParams& params,
                                             int T_max, int origins = 32, unsigned workers = 1) {
    return detail::observable_correlator(spec, params, T_max, origins, workers,
                                         CorrelatorKind::Potential,
                                         [](double q) { return perturbation_potential(q); });
}

// C_F(lag) = <V'[q(t0+lag)] V'[q(t0)]>.
inline CorrelatorSeries force_correlator(const EnsembleSpec& spec, const MapParams& params,
                                         int T_max, int origins = 32, unsigned workers = 1) {
    return detail::observable_correlator(spec, params, T_max, origins, workers,
                                         CorrelatorKind::Force,
                                         [](double q) { return perturbation_gradient(q); });
}

enum class IntegralMode { SumToPlateau, Cesaro };

struct CorrelatorIntegral {
    double value = 0.0;
    bool converged = true;
    std::size_t cut_lag = 0;  // SumToPlateau: first lag treated as noise
};

// Discrete-time integral of a correlator with the lag-0 term half-weighted
// (trapezoidal convention).  SumToPlateau truncates once increments drop
// below twice the tail noise and returns K or D; Cesaro returns the tail
// mean of the running time average (C_V^infinity).
inline CorrelatorIntegral integrate_correlator(const CorrelatorSeries& series, IntegralMode mode) {
    const std::size_t n = series.value.size();
    if (n < 4) throw std::invalid_argument("integrate_correlator: need at least 4 lags");
    const std::size_t tail_lo = n / 2;
    double tail_noise = 0.0;
    bool have_se = !series.se.empty();
    if (have_se) {
        double acc = 0.0;
        for (std::size_t i = tail_lo; i < n; ++i) acc += series.se[i];
        tail_noise = acc / static_cast<double>(n - tail_lo);
        if (tail_noise == 0.0) have_se = false;
    }
    if (!have_se) {
        // no per-lag errors: estimate the noise scale from tail increments so
        // a slowly-varying tail is not mistaken for noise
        double acc = 0.0;
        std::size_t m = 0;
        for (std::size_t i = tail_lo + 1; i < n; ++i) {
            const double d = series.value[i] - series.value[i - 1];
            acc += d * d;
            ++m;
        }
        tail_noise = m > 0 ? std::sqrt(acc / (2.0 * static_cast<double>(m))) : 0.0;
    }

    CorrelatorIntegral out;
    if (mode == IntegralMode::SumToPlateau) {
        const double noise_floor = 2.0 * tail_noise;
        std::size_t cut = 0;
        for (std::size_t lag = 1; lag < n; ++lag) {
            const bool quiet_here = std::fabs(series.value[lag]) <= noise_floor;
            const bool quiet_next = lag + 1 >= n || std::fabs(series.value[lag + 1]) <= noise_floor;
            if (quiet_here && quiet_next) { cut = lag; break; }
        }
        if (cut == 0) {
            out.converged = false;
            cut = n;
        }
        double k = 0.5 * series.value[0];
        for (std::size_t lag = 1; lag < cut; ++lag) k += series.value[lag];
        out.value = k;
        out.cut_lag = cut;
        return out;
    }

    // Cesaro: running average of the trapezoidal integral
    std::vector<double> avg(n - 1);
    double cum = 0.5 * series.value[0];
    for (std::size_t t = 1; t < n; ++t) {
        const double integral_t = cum + 0.5 * series.value[t];
        avg[t - 1] = integral_t / static_cast<double>(t);
        cum += series.value[t];
    }
    const std::size_t m = avg.size();
    double acc = 0.0;
    for (std::size_t i = m / 2; i < m; ++i) acc += avg[i];
    out.value = acc / static_cast<double>(m - m / 2);
    const double drift = std::fabs(avg[m - 1] - avg[m / 2]);
    const double scale = std::max(std::fabs(out.value), 0.01 * std::fabs(series.value[0]));
    out.converged = scale == 0.0 ? true : drift <= 0.1 * scale;
    out.cut_lag = m;
    return out;
}

}  // namespace loschmidt
