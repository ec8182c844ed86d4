#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "glmselect/design.hpp"
#include "glmselect/errors.hpp"
#include "glmselect/penalties.hpp"

using namespace glmselect;

TEST_CASE("penalty values") {
    const auto ctx = PenaltyContext::complete(10, 5, 100);
    CHECK(pen_value(aic(), 3, ctx) == 3.0);
    CHECK(pen_value(bic(), 2, ctx) == doctest::Approx(std::log(100.0)));
    CHECK(pen_value(bic(), 2, ctx) == doctest::Approx(4.6052).epsilon(1e-4));
    CHECK(pen_value(ebic(0.5), 2, ctx) == doctest::Approx(std::log(100.0) + std::log(10.0)));
    CHECK(pen_value(ric(17, 1), 2, ctx) == doctest::Approx(34 * std::log(10.0)));
    CHECK(pen_value(klogpk(17, 1), 2, ctx) == doctest::Approx(34 * std::log(5 * std::numbers::e)));
    CHECK(pen_value(klogpk(17, 1), 2, ctx) == doctest::Approx(88.72).epsilon(1e-4));
    CHECK(pen_value(klogpk(17, 2), 5, ctx) == doctest::Approx(17 * 2 * 5));
    CHECK(pen_value(linear(3.5), 4, ctx) == 14.0);
    CHECK(pen_value(aic(), 0, ctx) == 0.0);
    CHECK_THROWS_AS(pen_value(aic(), 6, ctx), InputError);
}

TEST_CASE("custom penalty follows the required form") {
    const auto ctx = PenaltyContext::complete(10, 3, 50);
    const auto w = constant_weights(std::log(10.0), 3);
    const auto rule = custom_rule(w, 2.0, 1.5, 1.25);
    const double L = std::log(10.0);
    CHECK(pen_value(rule, 2, ctx) ==
          doctest::Approx(1.25 * 2 * 1.5 * 2 * (2 + 2 * std::sqrt(2 * L) + 4 * L)));
}

TEST_CASE("rule validation") {
    CHECK_THROWS_AS(ebic(1.5).validate(), InputError);
    CHECK_THROWS_AS(ric(10, 1).validate(), InputError);
    CHECK_NOTHROW(ric(10, 1, true).validate());
    CHECK_THROWS_AS(klogpk(-1, 1, true).validate(), InputError);
    CHECK_THROWS_AS(custom_rule({1.0, -1.0}, 2.0, 1.0).validate(), InputError);
    CHECK_THROWS_AS(custom_rule({1.0}, 1.0, 1.0).validate(), InputError);
    CHECK_THROWS_AS(custom_rule({1.0}, 2.0, 1.0, 0.5).validate(), InputError);
    CHECK_THROWS_AS(linear(-1).validate(), InputError);
    CHECK_THROWS_AS(ric(17, 0.5).validate(), InputError);
    CHECK_THROWS_AS(penalty_kind_from_string("lasso"), InputError);
}

TEST_CASE("weight certificate sums") {
    const auto ctx = PenaltyContext::complete(10, 5, 100);
    const auto w = constant_weights(std::log(10.0), 5);
    const auto cert = weights_certificate(w, 2.0, aic(), ctx);
    double S = 0;
    for (int k = 1; k <= 4; ++k) S += static_cast<double>(binomial(10, k)) * std::pow(10.0, -k);
    S += 1e-5;
    CHECK(cert.S == doctest::Approx(S).epsilon(1e-14));
    CHECK(cert.S == doctest::Approx(1.59101).epsilon(1e-9));
    CHECK(cert.S <= std::pow(1.1, 10) - 1);
    CHECK_FALSE(cert.penalty_ok);
    CHECK(cert.first_violation == 1);

    const auto huge = weights_certificate(constant_weights(1e6, 5), 2.0, aic(), ctx);
    CHECK(huge.S < 1e-300);
    CHECK_FALSE(huge.penalty_ok);

    const double ct = 1.031;
    const auto kw = klogpk_weights(ct, 10, 5);
    const auto kc = weights_certificate(kw, ct, klogpk(17, 1), ctx);
    double bound = 0;
    for (int k = 1; k <= 4; ++k) bound += std::exp(-k * (kw[k - 1] - std::log(10 * std::numbers::e / k)));
    bound += std::exp(-5 * ct);
    CHECK(std::isfinite(kc.S));
    CHECK(kc.S <= bound);
    CHECK_THROWS_AS(weights_certificate(constant_weights(0.0, 5), 2.0, aic(), ctx), InputError);
    CHECK_THROWS_AS(weights_certificate(w, 1.0, aic(), ctx), InputError);
}

TEST_CASE("theory-mode penalties pass their own certificate") {
    for (int p : {5, 10, 50, 400}) {
        const int r = std::min(p, 30);
        const auto ctx = PenaltyContext::complete(p, r, 2 * p);
        for (double ratio : {1.0, 5.53}) {
            const double ct = theory_slack(17);
            CHECK(weights_certificate(klogpk_weights(ct, p, r), ct, klogpk(17, ratio), ctx).penalty_ok);
            CHECK(weights_certificate(constant_weights(ct * std::log(p), r), ct, ric(17, ratio), ctx).penalty_ok);
            CHECK(weights_certificate(structural_weights(ct, ctx), ct, structural(17, ratio), ctx).penalty_ok);
        }
    }
}

TEST_CASE("risk bound constant") {
    CHECK(risk_bound_constant(2, 1, 1) == doctest::Approx(16.0));
    CHECK(risk_bound_constant(INFINITY, 1, 1) == doctest::Approx(32.0 / 3));
    CHECK(risk_bound_constant(1.5, 0, 3) == 0.0);
    CHECK_THROWS_AS(risk_bound_constant(1.0, 1, 1), InputError);
    CHECK_THROWS_AS(theory_slack(16), InputError);
    CHECK(theory_slack(17) == doctest::Approx(std::sqrt(17.0 / 16)));
}

TEST_CASE("property: KLOGPK undercuts RIC at saturation for p >= 3") {
    for (int p = 3; p <= 200; ++p)
        for (int r : {1, 2, p / 2 + 1, p}) {
            if (r < 1 || r > p) continue;
            const auto ctx = PenaltyContext::complete(p, r, p);
            for (double c : {0.5, 2.0, 17.0})
                CHECK(pen_value(klogpk(c, 1.7, true), r, ctx) < pen_value(ric(c, 1.7, true), r, ctx));
        }
}

TEST_CASE("property: structural penalty with one model per size is C (U/L) k") {
    PenaltyContext ctx{.p = 12, .r = 12, .n = 40, .log_counts = std::vector<double>(13, 0.0)};
    for (int k = 1; k <= 12; ++k)
        CHECK(pen_value(structural(17, 2.5), k, ctx) == 17 * 2.5 * k);
}

TEST_CASE("property: structural over complete selection stays within a constant of KLOGPK") {
    for (int p = 2; p <= 300; p += 7) {
        const auto ctx = PenaltyContext::complete(p, p, p);
        for (int k = 1; k < p; ++k) {
            const double s = pen_value(structural(17, 1), k, ctx);
            const double kl = pen_value(klogpk(17, 1), k, ctx);
            CHECK(s <= kl * (1 + 1e-12));
            CHECK(s >= kl / std::log(p * std::numbers::e));
        }
    }
}

TEST_CASE("property: KLOGPK weights give S bounded independently of p") {
    double prev = 0;
    for (int p : {10, 100, 1000, 10000}) {
        const int r = std::min(p, 200);
        const auto ctx = PenaltyContext::complete(p, r, p);
        const auto cert = weights_certificate(klogpk_weights(1.2, p, r), 1.2, klogpk(17, 1), ctx);
        CHECK(std::isfinite(cert.S));
        CHECK(cert.S < 2.0);
        prev = std::max(prev, cert.S);
    }
    CHECK(prev > 0);
}
