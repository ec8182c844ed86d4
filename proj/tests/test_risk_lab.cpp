#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "glmselect/risk_lab.hpp"
#include "oracles.hpp"

using namespace glmselect;

namespace {

ExperimentSpec gaussian_identity(int n) {
    ExperimentSpec s;
    s.family = {FamilyKind::gaussian, {.sigma2 = 1.0}};
    s.design = {.kind = DesignKind::identity, .n = n, .p = n};
    return s;
}

double sample_mean(const VectorXd& v) { return v.mean(); }

}  // namespace

TEST_CASE("simulated responses have the family mean") {
    const int N = 100'000;
    const auto b = make_family(FamilyKind::bernoulli, {.c0 = 3.0});
    const VectorXd y = simulate_response(b, VectorXd::Constant(N, std::log(3.0)), 17);
    const double se = std::sqrt(0.75 * 0.25 / N);
    CHECK(std::abs(sample_mean(y) - 0.75) <= 3 * se);
    CHECK(((y.array() == 0.0) || (y.array() == 1.0)).all());

    const VectorXd half = simulate_response(b, VectorXd::Zero(N), 18);
    CHECK(std::abs(sample_mean(half) - 0.5) <= 3 * std::sqrt(0.25 / N));

    const auto g = make_family(FamilyKind::gaussian, {.sigma2 = 4.0});
    const VectorXd yg = simulate_response(g, VectorXd::Constant(N, -1.3), 19);
    CHECK(std::abs(sample_mean(yg) + 1.3) <= 4 * 2.0 / std::sqrt(N));

    const auto pois = make_family(FamilyKind::poisson, {.theta_space = {-2.0, 2.0}});
    const VectorXd yp = simulate_response(pois, VectorXd::Constant(N, 0.5), 20);
    CHECK(std::abs(sample_mean(yp) - std::exp(0.5)) <= 4 * std::sqrt(std::exp(0.5) / N));

    CHECK(simulate_response(b, VectorXd::Zero(50), 5) == simulate_response(b, VectorXd::Zero(50), 5));
    CHECK_THROWS_AS(simulate_response(b, VectorXd::Constant(3, 4.0), 1), InputError);
}

TEST_CASE("generated designs") {
    const DesignMatrix I = generate_design({.kind = DesignKind::identity, .n = 5, .p = 5});
    CHECK(I.X().isIdentity());
    CHECK_THROWS_AS(generate_design({.kind = DesignKind::identity, .n = 3, .p = 5}), InputError);

    const DesignSpec og{.kind = DesignKind::orthogonalized_gaussian, .n = 40, .p = 6, .seed = 9};
    const DesignMatrix X = generate_design(og);
    CHECK((X.gram() - 40.0 * MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(generate_design(og).X() == X.X());
    DesignSpec other = og;
    other.seed = 10;
    CHECK(generate_design(other).X() != X.X());
}

TEST_CASE("minimax rate") {
    CHECK(minimax_rate(0, 10, 8) == 0.0);
    CHECK(minimax_rate(2, 10, 8) == doctest::Approx(2 * std::log(5 * std::numbers::e)));
    CHECK(minimax_rate(8, 10, 8) == 8.0);
}

TEST_CASE("null truth with a punitive penalty has zero risk") {
    auto s = gaussian_identity(8);
    s.beta_true = VectorXd::Zero(8);
    s.rules = {linear(1e6)};
    s.replicates = 50;
    const RiskReport rep = mc_kl_risk(s);
    REQUIRE(rep.rows.size() == 1);
    CHECK(rep.rows[0].mean_kl == 0.0);
    CHECK(rep.rows[0].mean_model_size == 0.0);
    CHECK(rep.rows[0].failures == 0);
    CHECK(rep.rows[0].rate_ratio == 0.0);
}

TEST_CASE("the forced saturated fit has risk n/2") {
    auto s = gaussian_identity(30);
    s.p0_grid = {30};
    s.signal = {.support = SupportRule::first, .magnitude = MagnitudeRule::fixed, .amplitude = 0.7};
    s.structure = Structure::ordered;
    s.rules = {linear(0.0)};
    s.replicates = 300;
    s.seed = 4;
    const RiskReport rep = mc_kl_risk(s);
    const auto& row = rep.row(0, 30);
    CHECK(row.mean_model_size == 30.0);
    CHECK(std::abs(row.mean_kl - 15.0) <= 3 * row.stderr_kl);
    CHECK(row.rate_ratio == doctest::Approx(row.mean_kl / 30.0));
}

TEST_CASE("risk reports are reproducible across thread counts") {
    ExperimentSpec s;
    s.family = {FamilyKind::bernoulli, {.c0 = 3.0}};
    s.design = {.kind = DesignKind::orthogonalized_gaussian, .n = 60, .p = 6, .seed = 2};
    s.p0_grid = {1, 3};
    s.signal.amplitude = 0.8;
    s.rules = {klogpk(2, 1, true), bic()};
    s.replicates = 24;
    s.seed = 77;
    const RiskReport a = mc_kl_risk(s, 1);
    const RiskReport b = mc_kl_risk(s, 4);
    const RiskReport c = mc_kl_risk(s, 1);
    REQUIRE(a.rows.size() == 4);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].mean_kl == b.rows[i].mean_kl);
        CHECK(a.rows[i].stderr_kl == b.rows[i].stderr_kl);
        CHECK(a.rows[i].mean_model_size == b.rows[i].mean_model_size);
        CHECK(a.rows[i].mean_kl == c.rows[i].mean_kl);
    }
    CHECK(a.grid[1].beta_true == b.grid[1].beta_true);
    CHECK(a.grid[0].p0 == 1);
    CHECK(a.grid[1].p0 == 3);
}

TEST_CASE("a run whose replicates all fail raises with the partial report") {
    // Column 1 doubles column 0, and the empty model sits outside Theta.
    ExperimentSpec s;
    s.family = {FamilyKind::poisson, {.theta_space = {1.0, 3.0}}};
    MatrixXd x(2, 3);
    x << 1, 2, 0, 0, 0, 1;
    s.design = {.kind = DesignKind::custom, .n = 2, .p = 3, .matrix = x};
    VectorXd beta(3);
    beta << 2, 0, 2;
    s.beta_true = beta;
    s.structure = Structure::custom;
    s.custom_models = {ModelSpec({0, 1})};
    s.rules = {aic()};
    s.replicates = 10;
    try {
        mc_kl_risk(s);
        FAIL("expected RiskSimFailure");
    } catch (const RiskSimFailure& e) {
        REQUIRE(e.partial().rows.size() == 1);
        CHECK(e.partial().rows[0].failures == 10);
    }
}

TEST_CASE("signals outside the parameter space are rejected") {
    ExperimentSpec s;
    s.family = {FamilyKind::bernoulli, {.c0 = 1.0}};
    s.design = {.kind = DesignKind::identity, .n = 4, .p = 4};
    s.beta_true = VectorXd::Constant(4, 2.0);
    s.rules = {aic()};
    CHECK_THROWS_AS(mc_kl_risk(s), InputError);
    s.rules.clear();
    CHECK_THROWS_AS(mc_kl_risk(s), InputError);
}

TEST_CASE("property: a larger constant never enlarges the mean selected size") {
    ExperimentSpec s;
    s.family = {FamilyKind::gaussian, {.sigma2 = 1.0}};
    s.design = {.kind = DesignKind::orthogonalized_gaussian, .n = 40, .p = 8, .seed = 12};
    s.p0_grid = {3};
    s.signal.amplitude = 0.6;
    for (double c : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) s.rules.push_back(ric(c, 1, true));
    s.replicates = 60;
    s.seed = 5;
    const RiskReport rep = mc_kl_risk(s);
    for (std::size_t k = 1; k < s.rules.size(); ++k)
        CHECK(rep.rows[k].mean_model_size <= rep.rows[k - 1].mean_model_size);
    CHECK(rep.rows.front().mean_model_size > rep.rows.back().mean_model_size);
}

TEST_CASE("rate curve on the saturated identity design") {
    auto s = gaussian_identity(12);
    s.p0_grid = {12};
    s.signal = {.support = SupportRule::first, .magnitude = MagnitudeRule::fixed, .amplitude = 1.0};
    s.structure = Structure::ordered;
    s.rules = {linear(0.0)};
    s.replicates = 400;
    const RateCurve rc = rate_curve(s);
    CHECK(rc.tau_r == doctest::Approx(1.0));
    REQUIRE(rc.rows.size() == 1);
    CHECK(std::abs(rc.rows[0].rate_ratio - 0.5) <= 3 * rc.rows[0].stderr_kl / 12);
    CHECK(rc.rows[0].sparse_ratio == doctest::Approx(rc.rows[0].mean_kl / 12));
}

TEST_CASE("oracle inequality check") {
    const int n = 10;
    auto s = gaussian_identity(n);
    s.beta_true = VectorXd::Zero(n);
    const double A = theory_slack(17);
    const auto w = constant_weights(std::log(static_cast<double>(n)), n);
    s.rules = {custom_rule(w, A, 1.0)};
    s.replicates = 40;
    const RiskReport rep = mc_kl_risk(s);
    const auto ctx = PenaltyContext::complete(n, n, n);
    const auto cert = weights_certificate(w, A, s.rules[0], ctx);
    REQUIRE(cert.penalty_ok);
    const OracleCheck oc = oracle_inequality_check(s, rep, 0, cert);
    CHECK(oc.inf_term == 0.0);
    CHECK(oc.argmin.empty());
    CHECK(oc.constant > 0.0);
    CHECK(oc.rhs == doctest::Approx(oc.constant));
    CHECK(oc.holds);

    auto weak = s;
    weak.rules = {aic()};
    const auto bad = weights_certificate(w, A, aic(), ctx);
    CHECK_FALSE(bad.penalty_ok);
    CHECK_THROWS_AS(oracle_inequality_check(weak, mc_kl_risk(weak), 0, bad), InputError);
}

TEST_CASE("lower bound evaluations") {
    CHECK(minimax_lower_bound({.p0 = 2, .p = 10, .r = 8}) ==
          doctest::Approx(2 * std::log(5 * std::numbers::e)));
    CHECK(minimax_lower_bound({.p0 = 2, .p = 10, .r = 8}) == doctest::Approx(5.219).epsilon(1e-3));
    CHECK(minimax_lower_bound({.p0 = 8, .p = 10, .r = 8, .tau_p0 = 0.7, .curvature_ratio_inv = 0.5}) ==
          doctest::Approx(0.5 * 0.7 * 8));
    CHECK(minimax_lower_bound({.p0 = 2, .p = 10, .r = 8, .tau_2p0 = 0.0}) == 0.0);
    CHECK(minimax_lower_bound({.p0 = 1, .p = 10, .r = 8, .tau_p0 = 0.9, .log_m_p0 = std::log(10.0)}) ==
          doctest::Approx(0.9));
    CHECK(minimax_lower_bound({.p0 = 3, .p = 10, .r = 8, .log_m_p0 = std::log(120.0)}) ==
          doctest::Approx(std::max(std::log(120.0) / std::log(3.0), 3.0)));
    CHECK(minimax_lower_bound({.p0 = 3, .p = 10, .r = 8, .log_m_p0 = 0.0}) == doctest::Approx(3.0));
    CHECK_THROWS_AS(minimax_lower_bound({.p0 = 9, .p = 10, .r = 8}), InputError);
    CHECK_THROWS_AS(minimax_lower_bound({.p0 = 0, .p = 10, .r = 8}), InputError);
    CHECK_THROWS_AS(minimax_lower_bound({.p0 = 2, .p = 10, .r = 8, .curvature_ratio_inv = 1.5}), InputError);
}

TEST_CASE("VG packings") {
    const auto g = make_family(FamilyKind::gaussian, {.sigma2 = 1.0});
    const PackingSet s16 = vg_packing(16, 20, g, 1.0);
    CHECK(s16.cardinality() >= 4);
    CHECK(s16.min_hamming >= 2);
    CHECK(s16.target_distance == 2);
    CHECK(s16.min_hamming == certify_min_hamming(s16.vectors));
    CHECK(s16.amplitude * s16.amplitude == doctest::Approx(std::numbers::ln2 / 64));
    for (const auto& v : s16.vectors) CHECK(v.tail(4).isZero());

    const PackingSet s8 = vg_packing(8, 8, g, 2.0);
    CHECK(s8.cardinality() >= 2);
    CHECK(s8.min_hamming >= 1);
    CHECK(s8.amplitude * s8.amplitude == doctest::Approx(std::numbers::ln2 / 128));
    CHECK_THROWS_AS(vg_packing(7, 10, g, 1.0), InputError);

    const PackingSet tp = two_point_packing(3, 10, g, 1.0);
    CHECK(tp.cardinality() == 2);
    CHECK(tp.min_hamming == 3);
}

TEST_CASE("sparse packings") {
    const auto g = make_family(FamilyKind::gaussian, {.sigma2 = 1.0});
    const PackingSet one = sparse_packing(1, 4, g, 1.0, 5, 1, 2.0);
    CHECK(one.cardinality() == 4);
    CHECK(one.min_hamming == 2);
    CHECK(one.achieved_c == 2.0);

    const PackingSet amp = sparse_packing(2, 10, g, 1.0, 3, 1, 1.0);
    CHECK(amp.amplitude * amp.amplitude == doctest::Approx(std::log(5 * std::numbers::e) / 16));
    CHECK(amp.amplitude * amp.amplitude == doctest::Approx(0.1631).epsilon(1e-3));

    // Maximum clique on the Hamming graph of 2-sparse supports in 6 coordinates.
    const auto supports = oracle::subsets(6, 2);
    for (double c : {1.0, 2.0}) {
        const int d = static_cast<int>(std::ceil(c * 2));
        std::vector<std::vector<bool>> adj(supports.size(), std::vector<bool>(supports.size(), false));
        for (std::size_t i = 0; i < supports.size(); ++i)
            for (std::size_t j = 0; j < supports.size(); ++j) {
                if (i == j) continue;
                int shared = 0;
                for (int a : supports[i])
                    for (int b : supports[j]) shared += a == b;
                adj[i][j] = 2 * (2 - shared) >= d;
            }
        const PackingSet ps = sparse_packing(2, 6, g, 1.0, 20, 3, c);
        CHECK(static_cast<int>(ps.cardinality()) == oracle::max_clique_size(adj));
        CHECK(ps.min_hamming >= d);
        CHECK(ps.cardinality() >= (c == 1.0 ? 4u : 3u));
    }
    CHECK(sparse_packing(2, 6, g, 1.0, 4, 8, 1.0).vectors == sparse_packing(2, 6, g, 1.0, 4, 8, 1.0).vectors);
    CHECK_THROWS_AS(sparse_packing(7, 6, g, 1.0, 1, 0), InputError);
}

TEST_CASE("property: packed parameters are KL- and norm-separated") {
    std::mt19937_64 rng(123);
    std::normal_distribution<double> z(0.0, 1.0);
    const auto b = make_family(FamilyKind::bernoulli, {.c0 = 3.0});
    const double U = curvature_bounds(b).upper;
    for (int trial = 0; trial < 6; ++trial) {
        const int n = 25, p = 8, p0 = 1 + trial % 3;
        MatrixXd x(n, p);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < p; ++j) x(i, j) = 0.5 * z(rng);
        const DesignMatrix X(x);
        const auto sp = sparse_spectrum(X, std::min(2 * p0, X.rank()));
        const PackingSet ps = sparse_packing(p0, p, b, sp.phi_max, 4, trial, 1.0);
        for (const auto& v : ps.vectors) CHECK((v.array() != 0.0).count() == p0);
        for (std::size_t i = 0; i < ps.vectors.size(); ++i)
            for (std::size_t j = i + 1; j < ps.vectors.size(); ++j) {
                const VectorXd ti = x * ps.vectors[i], tj = x * ps.vectors[j];
                const int rho = hamming_distance(ps.vectors[i], ps.vectors[j]);
                CHECK(rho >= ps.min_hamming);
                const double kl = kl_divergence(b, ti, tj);
                CHECK(kl <= U / (2 * b.a()) * sp.phi_max * ps.amplitude * ps.amplitude * rho * (1 + 1e-12));
                const VectorXd db = ps.vectors[i] - ps.vectors[j];
                CHECK((ti - tj).squaredNorm() >= sp.phi_min * db.squaredNorm() * (1 - 1e-12));
            }
    }
    CHECK_THROWS_AS(hamming_distance(VectorXd::Zero(2), VectorXd::Zero(3)), InputError);
}
