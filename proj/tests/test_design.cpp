#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "glmselect/design.hpp"
#include "glmselect/errors.hpp"
#include "glmselect/random.hpp"
#include "oracles.hpp"

using namespace glmselect;

namespace {

MatrixXd mat(std::initializer_list<std::initializer_list<double>> rows) {
    MatrixXd M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        Eigen::Index j = 0;
        for (double v : r) M(i, j++) = v;
        ++i;
    }
    return M;
}

MatrixXd random_matrix(int n, int p, std::mt19937_64& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    MatrixXd X(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) X(i, j) = z(rng);
    return X;
}

}  // namespace

TEST_CASE("rank") {
    CHECK(rank_of(MatrixXd::Identity(5, 5)) == 5);
    VectorXd u(4), v(3);
    u << 1, 2, 3, 4;
    v << 1, -1, 2;
    CHECK(rank_of(u * v.transpose()) == 1);
    CHECK(rank_of(mat({{1, 1}, {0, 1}, {0, 0}})) == 2);
    DesignMatrix X(mat({{1, 2}, {2, 4}, {3, 6}}));
    CHECK(X.rank() == 1);
}

TEST_CASE("design validation") {
    CHECK_THROWS_AS(DesignMatrix(MatrixXd(0, 0)), InputError);
    CHECK_THROWS_AS(DesignMatrix(mat({{1, 0}, {2, 0}})), InputError);
    MatrixXd bad = MatrixXd::Ones(2, 2);
    bad(1, 1) = std::nan("");
    CHECK_THROWS_AS(DesignMatrix{bad}, InputError);
}

TEST_CASE("sparse spectrum of small explicit designs") {
    for (int k = 1; k <= 4; ++k) {
        const auto s = sparse_spectrum(DesignMatrix(MatrixXd::Identity(4, 4)), k);
        CHECK(s.phi_min == doctest::Approx(1.0));
        CHECK(s.phi_max == doctest::Approx(1.0));
        CHECK(s.tau == doctest::Approx(1.0));
        CHECK(s.exhaustive);
    }
    const DesignMatrix X(mat({{1, 1}, {0, 1}}));
    const auto s2 = sparse_spectrum(X, 2);
    CHECK(s2.phi_min == doctest::Approx((3 - std::sqrt(5.0)) / 2).epsilon(1e-12));
    CHECK(s2.phi_max == doctest::Approx((3 + std::sqrt(5.0)) / 2).epsilon(1e-12));
    CHECK(s2.tau == doctest::Approx(0.1459).epsilon(1e-3));
    const auto s1 = sparse_spectrum(X, 1);
    CHECK(s1.phi_min == doctest::Approx(1.0));
    CHECK(s1.phi_max == doctest::Approx(2.0));
}

TEST_CASE("weak collinearity verdicts") {
    const auto v = weak_collinearity(DesignMatrix(MatrixXd::Identity(5, 5)), 0.5);
    CHECK(v.tau_r == doctest::Approx(1.0));
    CHECK(v.weakly_collinear);

    const auto w = weak_collinearity(DesignMatrix(mat({{1, 1}, {0, 1}})), 0.2);
    CHECK(w.tau_r == doctest::Approx(0.1459).epsilon(1e-3));
    CHECK_FALSE(w.weakly_collinear);

    // Duplicated column: any r-subset containing both copies is singular.
    MatrixXd D(4, 3);
    D << 1, 0, 1, 0, 1, 0, 0, 0, 0, 1, 1, 1;
    D.col(2) = D.col(0);
    const DesignMatrix XD(D);
    CHECK(XD.rank() == 2);
    const auto d = weak_collinearity(XD, 0.1);
    CHECK(d.tau_r == 0.0);
    CHECK_FALSE(d.weakly_collinear);
}

TEST_CASE("property: brute-force eigenvalues agree with the sparse spectrum") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 4 + static_cast<int>(rng() % 6);
        const int p = 2 + static_cast<int>(rng() % 6);
        const DesignMatrix X(random_matrix(n, p, rng));
        for (int k = 1; k <= X.rank(); ++k) {
            double lo = 1e300, hi = 0;
            for (const auto& s : oracle::subsets(p, k)) {
                MatrixXd G(k, k);
                for (int a = 0; a < k; ++a)
                    for (int b = 0; b < k; ++b) G(a, b) = X.gram()(s[a], s[b]);
                const Eigen::SelfAdjointEigenSolver<MatrixXd> es(G);
                lo = std::min(lo, es.eigenvalues().minCoeff());
                hi = std::max(hi, es.eigenvalues().maxCoeff());
            }
            const auto sp = sparse_spectrum(X, k);
            CHECK(sp.phi_max == doctest::Approx(hi).epsilon(1e-10));
            CHECK(sp.phi_min == doctest::Approx(std::max(lo, 0.0)).epsilon(1e-8).scale(hi));
            CHECK(sp.tau >= 0.0);
            CHECK(sp.tau <= 1.0);
        }
    }
}

TEST_CASE("property: tau is nonincreasing in k and phi_min[k] <= phi_max[k]") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const DesignMatrix X(random_matrix(12, 7, rng));
        double prev_tau = 1.0 + 1e-12;
        for (int k = 1; k <= 7; ++k) {
            const auto s = sparse_spectrum(X, k);
            CHECK(s.phi_min <= s.phi_max);
            CHECK(s.tau <= prev_tau + 1e-12);
            prev_tau = s.tau;
        }
    }
}

TEST_CASE("sampled spectrum brackets the exhaustive one and is seed-deterministic") {
    std::mt19937_64 rng(11);
    const DesignMatrix X(random_matrix(30, 14, rng));
    const auto full = sparse_spectrum(X, 5);
    CHECK(full.exhaustive);
    const auto a = sparse_spectrum(X, 5, {.budget = 200, .seed = 3});
    const auto b = sparse_spectrum(X, 5, {.budget = 200, .seed = 3, .threads = 4});
    CHECK_FALSE(a.exhaustive);
    CHECK(a.subsets_examined == 200);
    CHECK(a.phi_min >= full.phi_min - 1e-12);
    CHECK(a.phi_max <= full.phi_max + 1e-12);
    CHECK(a.phi_min == b.phi_min);
    CHECK(a.phi_max == b.phi_max);
    const auto c = sparse_spectrum(X, 5, {.threads = 3});
    CHECK(c.phi_min == full.phi_min);
    CHECK(c.phi_max == full.phi_max);
}

TEST_CASE("column independence check") {
    const auto ok = check_column_independence(DesignMatrix(MatrixXd::Identity(4, 4)));
    CHECK(ok.exhaustive);
    CHECK(ok.dependent_subsets == 0);
    MatrixXd D(3, 3);
    D << 1, 0, 1, 0, 1, 0, 0, 0, 0;
    const auto bad = check_column_independence(DesignMatrix(D));
    CHECK(bad.dependent_subsets == 1);
}

TEST_CASE("binomials") {
    CHECK(binomial(10, 3) == 120);
    CHECK(binomial(5, 7) == 0);
    CHECK(binomial(200, 100) == UINT64_MAX);
    CHECK(std::exp(log_binomial(10, 4)) == doctest::Approx(210.0));
    CHECK(std::isinf(log_binomial(3, 4)));
}

TEST_CASE("random helpers") {
    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
    CHECK(derive_seed(1, 2, 3) != derive_seed(2, 2, 3));
    Engine rng(9);
    for (int t = 0; t < 200; ++t) {
        const auto s = random_subset(10, 4, rng);
        REQUIRE(s.size() == 4);
        CHECK(std::is_sorted(s.begin(), s.end()));
        CHECK(std::set<int>(s.begin(), s.end()).size() == 4);
        CHECK(s.front() >= 0);
        CHECK(s.back() < 10);
    }
    std::vector<int> c{0, 1};
    int count = 1;
    while (next_combination(c, 5)) ++count;
    CHECK(count == 10);
}
