#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "latlab/error.hpp"

namespace latlab {

// Max activation over decode steps 1..min(window, length).
inline double feature_statistic(std::span<const float> trace, int window = 20) {
    if (trace.empty()) throw DataError("feature_statistic: empty trace");
    if (window < 1) throw DataError("feature_statistic: window must be >= 1");
    const size_t n = std::min<size_t>(size_t(window), trace.size());
    double best = double(trace[0]);
    for (size_t i = 1; i < n; ++i) best = std::max(best, double(trace[i]));
    return best;
}

namespace detail {

inline double log_beta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Lentz continued fraction for the regularized incomplete beta function.
inline double betacf(double a, double b, double x) {
    constexpr int max_iter = 400;
    constexpr double eps = 3e-16, fpmin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) return h;
    }
    throw NumericError("incomplete beta continued fraction did not converge");
}

}  // namespace detail

inline double reg_inc_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw DataError("reg_inc_beta: parameters must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double bt = std::exp(a * std::log(x) + b * std::log1p(-x) - detail::log_beta(a, b));
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * detail::betacf(a, b, x) / a;
    return 1.0 - bt * detail::betacf(b, a, 1.0 - x) / b;
}

// P(|T| > |t|) for Student's t with nu degrees of freedom.
inline double student_t_two_sided_p(double t, double nu) {
    if (nu <= 0.0) throw DataError("student_t_two_sided_p: nu must be positive");
    if (std::isinf(t)) return 0.0;
    return reg_inc_beta(nu / 2.0, 0.5, nu / (nu + t * t));
}

inline double student_t_cdf(double t, double nu) {
    const double half = 0.5 * reg_inc_beta(nu / 2.0, 0.5, nu / (nu + t * t));
    return t >= 0.0 ? 1.0 - half : half;
}

// Upper quantile by bisection on the CDF.
inline double student_t_quantile(double prob, double nu) {
    if (!(prob > 0.0 && prob < 1.0)) throw DataError("student_t_quantile: prob must be in (0,1)");
    double lo = -1e8, hi = 1e8;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (student_t_cdf(mid, nu) < prob)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

struct CorrelationReport {
    int n = 0, n1 = 0, n0 = 0;
    double mean_a = 0.0, std_a = 0.0;  // group with label 1
    double mean_b = 0.0, std_b = 0.0;  // group with label 0
    double r = 0.0;
    double t = 0.0;
    double p = 1.0;
};

struct GroupSummary {
    int n1 = 0, n0 = 0;
    double mean_a = 0.0, std_a = 0.0;
    double mean_b = 0.0, std_b = 0.0;
};

inline GroupSummary group_summary(std::span<const double> x, std::span<const int> y) {
    if (x.size() != y.size()) throw DataError("group_summary: length mismatch");
    GroupSummary g;
    double sum_a = 0.0, sum_b = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        if (y[i] == 1) {
            sum_a += x[i];
            ++g.n1;
        } else if (y[i] == 0) {
            sum_b += x[i];
            ++g.n0;
        } else {
            throw DataError("group_summary: labels must be 0 or 1");
        }
    }
    if (g.n1 == 0 || g.n0 == 0) throw DataError("group_summary: both labels must be present");
    g.mean_a = sum_a / double(g.n1);
    g.mean_b = sum_b / double(g.n0);
    double ss_a = 0.0, ss_b = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        if (y[i] == 1) {
            const double c = x[i] - g.mean_a;
            ss_a += c * c;
        } else {
            const double c = x[i] - g.mean_b;
            ss_b += c * c;
        }
    }
    g.std_a = g.n1 > 1 ? std::sqrt(ss_a / double(g.n1 - 1)) : 0.0;
    g.std_b = g.n0 > 1 ? std::sqrt(ss_b / double(g.n0 - 1)) : 0.0;
    return g;
}

// Point-biserial correlation, computed as the Pearson correlation of x with
// the 0/1-coded labels, plus the t test against nu = n - 2.
inline CorrelationReport point_biserial(std::span<const double> x, std::span<const int> y) {
    if (x.size() != y.size()) throw DataError("point_biserial: length mismatch");
    const int n = int(x.size());
    if (n < 3) throw DataError("point_biserial: need n >= 3");
    const GroupSummary g = group_summary(x, y);

    double mean_x = 0.0, mean_y = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        mean_x += x[i];
        mean_y += double(y[i]);
    }
    mean_x /= double(n);
    mean_y /= double(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mean_x;
        const double dy = double(y[i]) - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw DataError("point_biserial: x has zero variance");

    CorrelationReport rep;
    rep.n = n;
    rep.n1 = g.n1;
    rep.n0 = g.n0;
    rep.mean_a = g.mean_a;
    rep.std_a = g.std_a;
    rep.mean_b = g.mean_b;
    rep.std_b = g.std_b;
    rep.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double nu = double(n - 2);
    if (std::abs(rep.r) >= 1.0) {
        rep.t = rep.r > 0 ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
        rep.p = 0.0;
    } else {
        rep.t = rep.r * std::sqrt(nu / (1.0 - rep.r * rep.r));
        rep.p = student_t_two_sided_p(rep.t, nu);
    }
    return rep;
}

}  // namespace latlab
