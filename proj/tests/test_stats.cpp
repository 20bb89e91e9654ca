#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "latlab/rng.hpp"
#include "latlab/stats.hpp"

using namespace latlab;
using Catch::Approx;

namespace {

// Straight-line Pearson correlation, no shortcuts shared with the library.
double pearson_reference(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double num = 0.0, dx2 = 0.0, dy2 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        num += (x[i] - mx) * (y[i] - my);
        dx2 += (x[i] - mx) * (x[i] - mx);
        dy2 += (y[i] - my) * (y[i] - my);
    }
    return num / std::sqrt(dx2 * dy2);
}

}  // namespace

TEST_CASE("feature_statistic is the max over the leading window") {
    const std::vector<float> trace = {1.0f, 5.0f, 2.0f, 9.0f};
    REQUIRE(feature_statistic(trace, 2) == 5.0);
    REQUIRE(feature_statistic(trace, 4) == 9.0);
    REQUIRE(feature_statistic(trace, 20) == 9.0);
    REQUIRE(feature_statistic(std::vector<float>{-3.0f, -7.0f}, 20) == -3.0);
    REQUIRE_THROWS_AS(feature_statistic(std::vector<float>{}, 20), DataError);
    REQUIRE_THROWS_AS(feature_statistic(trace, 0), DataError);
}

TEST_CASE("point_biserial matches the Pearson reference on random data") {
    Rng rng(2718);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 3 + int(rng.below(40));
        std::vector<double> x(static_cast<size_t>(n));
        std::vector<int> y(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            x[size_t(i)] = rng.normal(0.0, 2.0);
            y[size_t(i)] = int(rng.below(2));
        }
        // require both labels and x variance
        bool has0 = false, has1 = false;
        for (int v : y) (v ? has1 : has0) = true;
        if (!has0 || !has1) continue;

        const CorrelationReport rep = point_biserial(x, y);
        std::vector<double> yd(y.begin(), y.end());
        REQUIRE(rep.r == Approx(pearson_reference(x, yd)).margin(1e-12));
        REQUIRE(rep.n == n);
        REQUIRE(rep.n1 + rep.n0 == n);
    }
}

TEST_CASE("point_biserial on a worked example") {
    // group 1: {3, 4, 5}; group 0: {1, 2, 3}
    const std::vector<double> x = {3, 4, 5, 1, 2, 3};
    const std::vector<int> y = {1, 1, 1, 0, 0, 0};
    const CorrelationReport rep = point_biserial(x, y);
    REQUIRE(rep.mean_a == Approx(4.0));
    REQUIRE(rep.mean_b == Approx(2.0));
    REQUIRE(rep.std_a == Approx(1.0));
    REQUIRE(rep.std_b == Approx(1.0));
    // r = (mean_a - mean_b)/s_x * sqrt(n1*n0/(n*(n-1))) with s_x the sample sd
    // s_x^2 = sum((x-3)^2)/5 = (0+1+4+4+1+0)/5 = 2
    const double want_r = (4.0 - 2.0) / std::sqrt(2.0) * std::sqrt(9.0 / 30.0);
    REQUIRE(rep.r == Approx(want_r).margin(1e-12));
    REQUIRE(rep.t == Approx(rep.r * std::sqrt(4.0 / (1.0 - rep.r * rep.r))).margin(1e-12));
    REQUIRE(rep.p > 0.0);
    REQUIRE(rep.p < 1.0);

    // flipping labels negates r, keeps p
    std::vector<int> flipped = {0, 0, 0, 1, 1, 1};
    const CorrelationReport neg = point_biserial(x, flipped);
    REQUIRE(neg.r == Approx(-rep.r).margin(1e-12));
    REQUIRE(neg.p == Approx(rep.p).margin(1e-12));
}

TEST_CASE("point_biserial handles degenerate input") {
    const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
    REQUIRE_THROWS_AS(point_biserial(x, std::vector<int>{1, 1, 1, 1}), DataError);
    REQUIRE_THROWS_AS(point_biserial(x, std::vector<int>{0, 1, 2, 0}), DataError);
    REQUIRE_THROWS_AS(point_biserial(std::vector<double>{5, 5, 5, 5}, std::vector<int>{0, 1, 0, 1}),
                      DataError);
    REQUIRE_THROWS_AS(point_biserial(std::vector<double>{1, 2}, std::vector<int>{0, 1}), DataError);

    // perfect separation clamps r and zeroes p
    const CorrelationReport sep =
        point_biserial(std::vector<double>{0, 0, 1, 1}, std::vector<int>{0, 0, 1, 1});
    REQUIRE(sep.r == 1.0);
    REQUIRE(std::isinf(sep.t));
    REQUIRE(sep.p == 0.0);
}

TEST_CASE("t distribution matches tabulated 97.5% quantiles") {
    REQUIRE(student_t_quantile(0.975, 1.0) == Approx(12.70620474).margin(1e-6));
    REQUIRE(student_t_quantile(0.975, 10.0) == Approx(2.228138852).margin(1e-6));
    REQUIRE(student_t_quantile(0.975, 100.0) == Approx(1.983971519).margin(1e-6));
}

TEST_CASE("t distribution basic identities") {
    REQUIRE(student_t_cdf(0.0, 5.0) == Approx(0.5).margin(1e-12));
    REQUIRE(student_t_two_sided_p(0.0, 5.0) == Approx(1.0).margin(1e-12));
    // symmetry
    REQUIRE(student_t_cdf(-1.3, 7.0) == Approx(1.0 - student_t_cdf(1.3, 7.0)).margin(1e-12));
    REQUIRE(student_t_two_sided_p(-2.0, 9.0) ==
            Approx(student_t_two_sided_p(2.0, 9.0)).margin(1e-14));
    // consistency: two-sided p equals 2 * (1 - cdf(|t|))
    REQUIRE(student_t_two_sided_p(1.7, 12.0) ==
            Approx(2.0 * (1.0 - student_t_cdf(1.7, 12.0))).margin(1e-12));
    // nu = 1 is a Cauchy distribution: cdf(1) = 3/4
    REQUIRE(student_t_cdf(1.0, 1.0) == Approx(0.75).margin(1e-10));
    REQUIRE(student_t_two_sided_p(std::numeric_limits<double>::infinity(), 3.0) == 0.0);
    REQUIRE_THROWS_AS(student_t_two_sided_p(1.0, 0.0), DataError);
    REQUIRE_THROWS_AS(student_t_quantile(0.0, 5.0), DataError);
}

TEST_CASE("regularized incomplete beta endpoints and known values") {
    REQUIRE(reg_inc_beta(2.0, 3.0, 0.0) == 0.0);
    REQUIRE(reg_inc_beta(2.0, 3.0, 1.0) == 1.0);
    // I_x(1,1) = x
    REQUIRE(reg_inc_beta(1.0, 1.0, 0.37) == Approx(0.37).margin(1e-12));
    // I_x(2,2) = x^2 (3 - 2x)
    const double x = 0.3;
    REQUIRE(reg_inc_beta(2.0, 2.0, x) == Approx(x * x * (3.0 - 2.0 * x)).margin(1e-12));
    // symmetry I_x(a,b) = 1 - I_{1-x}(b,a)
    REQUIRE(reg_inc_beta(2.5, 4.0, 0.2) ==
            Approx(1.0 - reg_inc_beta(4.0, 2.5, 0.8)).margin(1e-12));
    REQUIRE_THROWS_AS(reg_inc_beta(0.0, 1.0, 0.5), DataError);
}

TEST_CASE("group_summary separates labeled groups") {
    const std::vector<double> x = {10, 20, 1, 2, 3};
    const std::vector<int> y = {1, 1, 0, 0, 0};
    const GroupSummary g = group_summary(x, y);
    REQUIRE(g.n1 == 2);
    REQUIRE(g.n0 == 3);
    REQUIRE(g.mean_a == Approx(15.0));
    REQUIRE(g.mean_b == Approx(2.0));
    REQUIRE(g.std_a == Approx(std::sqrt(50.0)));
    REQUIRE(g.std_b == Approx(1.0));

    // singleton group gets std 0
    const GroupSummary s = group_summary(std::vector<double>{4.0, 1.0, 2.0},
                                         std::vector<int>{1, 0, 0});
    REQUIRE(s.std_a == 0.0);
}
