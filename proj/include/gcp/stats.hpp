#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace gcp::stats {

struct Interval {
    double lo = 0.0, hi = 0.0;
    bool contains(double x) const { return lo <= x && x <= hi; }
    bool overlaps(const Interval& o) const { return lo <= o.hi && o.lo <= hi; }
    // Distance between the intervals, 0 when they overlap.
    double gap(const Interval& o) const { return std::max({0.0, o.lo - hi, lo - o.hi}); }
};

struct Estimate {
    double value = 0.0;
    Interval ci;
    std::uint64_t n = 0;
    std::uint64_t successes = 0;
};

// Acklam's rational approximation refined with one Halley step.
inline double normal_quantile(double p) {
    require(p > 0.0 && p < 1.0, errc::invalid_argument, "normal_quantile needs p in (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01,  -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= phigh) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        double q = std::sqrt(-2 * std::log(1 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
    return x - u / (1 + x * u / 2);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Student-t quantile via the Cornish-Fisher expansion around the normal quantile.
inline double t_quantile(double p, double dof) {
    double z = normal_quantile(p);
    if (dof > 1e6) return z;
    double z3 = z * z * z, z5 = z3 * z * z, z7 = z5 * z * z, z9 = z7 * z * z;
    double g1 = (z3 + z) / 4, g2 = (5 * z5 + 16 * z3 + 3 * z) / 96;
    double g3 = (3 * z7 + 19 * z5 + 17 * z3 - 15 * z) / 384;
    double g4 = (79 * z9 + 776 * z7 + 1482 * z5 - 1920 * z3 - 945 * z) / 92160;
    return z + g1 / dof + g2 / (dof * dof) + g3 / (dof * dof * dof) + g4 / (dof * dof * dof * dof);
}

inline Interval wilson(std::uint64_t successes, std::uint64_t n, double level = 0.95) {
    require(n >= 1, errc::invalid_argument, "wilson needs n >= 1");
    double z = normal_quantile(0.5 + level / 2);
    double ph = double(successes) / double(n), nn = double(n);
    double denom = 1 + z * z / nn;
    double centre = (ph + z * z / (2 * nn)) / denom;
    double half = z * std::sqrt(ph * (1 - ph) / nn + z * z / (4 * nn * nn)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

inline Estimate summarize(std::uint64_t successes, std::uint64_t n, double level = 0.95) {
    return {double(successes) / double(n), wilson(successes, n, level), n, successes};
}

inline Estimate summarize(const std::vector<bool>& xs, double level = 0.95) {
    return summarize(std::uint64_t(std::count(xs.begin(), xs.end(), true)), xs.size(), level);
}

inline Estimate summarize(const std::vector<std::uint8_t>& xs, double level = 0.95) {
    std::uint64_t k = 0;
    for (auto x : xs) k += x ? 1 : 0;
    return summarize(k, xs.size(), level);
}

struct Moments {
    double mean = 0.0, var = 0.0, se = 0.0;
    std::size_t n = 0;
};

inline Moments moments(const std::vector<double>& xs) {
    Moments m;
    m.n = xs.size();
    if (m.n == 0) return m;
    // Welford
    double mean = 0.0, m2 = 0.0;
    std::size_t k = 0;
    for (double x : xs) {
        ++k;
        double d = x - mean;
        mean += d / double(k);
        m2 += d * (x - mean);
    }
    m.mean = mean;
    m.var = m.n > 1 ? m2 / double(m.n - 1) : 0.0;
    m.se = std::sqrt(m.var / double(m.n));
    return m;
}

inline Interval normal_ci(const Moments& m, double level = 0.95) {
    double z = normal_quantile(0.5 + level / 2);
    return {m.mean - z * m.se, m.mean + z * m.se};
}

inline double quantile(std::vector<double> xs, double q) {
    require(!xs.empty(), errc::invalid_argument, "quantile of empty sample");
    std::sort(xs.begin(), xs.end());
    double pos = q * double(xs.size() - 1);
    auto i = std::size_t(std::floor(pos));
    if (i + 1 >= xs.size()) return xs.back();
    double f = pos - double(i);
    return xs[i] * (1 - f) + xs[i + 1] * f;
}

inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

inline double covariance(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size() && x.size() > 1, errc::invalid_argument, "covariance sizes");
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
    double my = std::accumulate(y.begin(), y.end(), 0.0) / double(y.size());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
    return s / double(x.size() - 1);
}

inline double correlation(const std::vector<double>& x, const std::vector<double>& y) {
    double c = covariance(x, y), vx = covariance(x, x), vy = covariance(y, y);
    return (vx > 0 && vy > 0) ? c / std::sqrt(vx * vy) : 0.0;
}

struct LinearFit {
    double slope = 0.0, intercept = 0.0;
    double slope_se = 0.0;
    Interval slope_ci;
    double r2 = 0.0;
    std::size_t n = 0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                            double level = 0.95) {
    require(x.size() == y.size() && x.size() >= 3, errc::insufficient_range,
            "linear fit needs at least 3 points");
    const double n = double(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    require(sxx > 0, errc::insufficient_range, "degenerate regressor");
    LinearFit f;
    f.n = x.size();
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = y[i] - f.intercept - f.slope * x[i];
        sse += r * r;
    }
    f.slope_se = std::sqrt(sse / (n - 2) / sxx);
    double tq = t_quantile(0.5 + level / 2, n - 2);
    f.slope_ci = {f.slope - tq * f.slope_se, f.slope + tq * f.slope_se};
    f.r2 = syy > 0 ? 1 - sse / syy : 1.0;
    return f;
}

// Weighted least squares with weights w_i (inverse variances).
inline LinearFit weighted_linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                                     const std::vector<double>& w, double level = 0.95) {
    require(x.size() == y.size() && x.size() == w.size() && x.size() >= 3,
            errc::insufficient_range, "weighted fit needs at least 3 points");
    double sw = 0, mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += w[i];
        mx += w[i] * x[i];
        my += w[i] * y[i];
    }
    mx /= sw;
    my /= sw;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
    }
    require(sxx > 0, errc::insufficient_range, "degenerate regressor");
    LinearFit f;
    f.n = x.size();
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double chi2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = y[i] - f.intercept - f.slope * x[i];
        chi2 += w[i] * r * r;
    }
    // Known-variance standard error, inflated when the fit is worse than the weights claim.
    double scale = std::max(1.0, chi2 / double(x.size() - 2));
    f.slope_se = std::sqrt(scale / sxx);
    double z = normal_quantile(0.5 + level / 2);
    f.slope_ci = {f.slope - z * f.slope_se, f.slope + z * f.slope_se};
    return f;
}

// Percentile bootstrap over resampled index sets; `stat` maps a resample to a value.
template <class Stat>
Interval bootstrap_ci(std::size_t n, std::size_t resamples, Rng& rng, Stat&& stat,
                      double level = 0.95) {
    require(n >= 1 && resamples >= 2, errc::invalid_argument, "bootstrap sizes");
    std::vector<double> values;
    values.reserve(resamples);
    std::vector<std::size_t> idx(n);
    for (std::size_t b = 0; b < resamples; ++b) {
        for (auto& i : idx) i = std::size_t(rng.below(n));
        values.push_back(stat(idx));
    }
    return {quantile(values, (1 - level) / 2), quantile(values, (1 + level) / 2)};
}

// Regularized lower incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
    if (x <= 0) return 0.0;
    double gln = std::lgamma(a);
    if (x < a + 1) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 1000; ++i) {
            ap += 1;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
        }
        return sum * std::exp(-x + a * std::log(x) - gln);
    }
    // Lentz continued fraction for Q.
    double b = x + 1 - a, c = 1.0 / 1e-300, d = 1.0 / b, h = d;
    for (int i = 1; i < 1000; ++i) {
        double an = -i * (i - a);
        b += 2;
        d = an * d + b;
        if (std::fabs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::fabs(c) < 1e-300) c = 1e-300;
        d = 1 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1) < 1e-15) break;
    }
    return 1.0 - std::exp(-x + a * std::log(x) - gln) * h;
}

inline double chi2_sf(double stat, double dof) { return 1.0 - gamma_p(dof / 2, stat / 2); }

struct ChiSquare {
    double statistic = 0.0, dof = 0.0, p_value = 1.0;
};

inline ChiSquare chi_square(const std::vector<double>& observed, const std::vector<double>& expected,
                            int constraints = 1) {
    require(observed.size() == expected.size() && observed.size() >= 2, errc::invalid_argument,
            "chi-square sizes");
    ChiSquare r;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        double e = expected[i];
        require(e > 0, errc::invalid_argument, "chi-square expected count must be positive");
        r.statistic += (observed[i] - e) * (observed[i] - e) / e;
    }
    r.dof = double(observed.size()) - constraints;
    r.p_value = chi2_sf(r.statistic, r.dof);
    return r;
}

// Pearson test of independence on an r x c table.
inline ChiSquare chi_square_independence(const std::vector<std::vector<double>>& table) {
    std::size_t R = table.size(), C = table.at(0).size();
    std::vector<double> row(R, 0.0), col(C, 0.0);
    double tot = 0;
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) {
            row[i] += table[i][j];
            col[j] += table[i][j];
            tot += table[i][j];
        }
    ChiSquare r;
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) {
            double e = row[i] * col[j] / tot;
            if (e > 0) r.statistic += (table[i][j] - e) * (table[i][j] - e) / e;
        }
    r.dof = double((R - 1) * (C - 1));
    r.p_value = chi2_sf(r.statistic, r.dof);
    return r;
}

// Dvoretzky-Kiefer-Wolfowitz band half-width.
inline double dkw_epsilon(std::size_t n, double alpha) {
    return std::sqrt(std::log(2.0 / alpha) / (2.0 * double(n)));
}

} // namespace gcp::stats
