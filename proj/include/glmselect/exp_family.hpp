#pragma once

#include <functional>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace glmselect {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class FamilyKind { gaussian, bernoulli, poisson, custom };

std::string to_string(FamilyKind kind);
FamilyKind family_kind_from_string(const std::string& name);

// Closed interval [lo, hi]; either end may be infinite.
struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    bool contains(double t) const { return t >= lo && t <= hi; }
    bool finite() const;
    double midpoint() const;
};

struct FamilyOptions {
    double sigma2 = 1.0;  // gaussian scale a
    double c0 = 0.0;      // bernoulli: Theta = [-c0, c0]
    // gaussian/poisson interval; gaussian defaults to the whole line.
    Interval theta_space;
};

// One-parameter natural exponential family
//   f(y) = exp{(y*theta - b(theta))/a + c(y, a)}.
// Built-in families evaluate closed forms; custom families carry callables.
class NaturalFamily {
public:
    using Scalar = std::function<double(double)>;

    NaturalFamily(std::string name, Scalar b, Scalar b1, Scalar b2, double a,
                  Interval theta_space);

    FamilyKind kind() const { return kind_; }
    const std::string& name() const { return name_; }
    double a() const { return a_; }
    const Interval& theta_space() const { return theta_space_; }

    double b(double t) const;
    double b1(double t) const;
    double b2(double t) const;

    VectorXd b(const VectorXd& theta) const;
    VectorXd b1(const VectorXd& theta) const;
    VectorXd b2(const VectorXd& theta) const;

    // b'(theta_i) and b''(theta_i) in one pass.
    void moments(const VectorXd& theta, VectorXd& mean, VectorXd& variance) const;
    // sum_i b(theta_i)
    double cumulant_sum(const VectorXd& theta) const;

    // The options this family was built from (meaningful for built-ins).
    const FamilyOptions& options() const { return options_; }

private:
    friend NaturalFamily make_family(FamilyKind, const FamilyOptions&);
    NaturalFamily() = default;

    FamilyKind kind_ = FamilyKind::custom;
    std::string name_;
    double a_ = 1.0;
    Interval theta_space_;
    FamilyOptions options_;
    Scalar b_, b1_, b2_;
};

NaturalFamily make_family(FamilyKind kind, const FamilyOptions& options = {});

struct CurvatureBounds {
    double lower = 0.0;  // inf of b'' over Theta
    double upper = 0.0;  // sup of b'' (over R when global_sup_holds)
    bool global_sup_holds = false;
    int grid_points = 0;  // 0 when the bounds are closed form

    double ratio() const { return upper / lower; }
};

inline constexpr int kCustomCurvatureGrid = 10001;

CurvatureBounds curvature_bounds(const NaturalFamily& fam);

// KL(theta1, theta2) = (1/a) sum_i { b'(t1)(t1 - t2) - b(t1) + b(t2) }.
// Both vectors must lie in Theta^n; out-of-range components are rejected.
double kl_divergence(const NaturalFamily& fam, const VectorXd& theta1,
                     const VectorXd& theta2);

// Throws InputError unless every component lies in Theta.
void require_in_theta(const NaturalFamily& fam, const VectorXd& theta,
                      const char* what);

}  // namespace glmselect
