#include "glmselect/exp_family.hpp"

#include <algorithm>
#include <cmath>

#include "glmselect/errors.hpp"

namespace glmselect {

namespace {

double softplus(double t) {
    return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double logistic(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

double logistic_variance(double t) {
    const double e = std::exp(-std::abs(t));
    return e / ((1.0 + e) * (1.0 + e));
}

}  // namespace

std::string to_string(FamilyKind kind) {
    switch (kind) {
        case FamilyKind::gaussian: return "gaussian";
        case FamilyKind::bernoulli: return "bernoulli";
        case FamilyKind::poisson: return "poisson";
        case FamilyKind::custom: return "custom";
    }
    return "custom";
}

FamilyKind family_kind_from_string(const std::string& name) {
    if (name == "gaussian") return FamilyKind::gaussian;
    if (name == "bernoulli" || name == "binomial" || name == "logistic")
        return FamilyKind::bernoulli;
    if (name == "poisson") return FamilyKind::poisson;
    throw InputError("unknown family '" + name + "'");
}

bool Interval::finite() const { return std::isfinite(lo) && std::isfinite(hi); }

double Interval::midpoint() const {
    if (finite()) return 0.5 * (lo + hi);
    if (std::isfinite(lo)) return lo + 1.0;
    if (std::isfinite(hi)) return hi - 1.0;
    return 0.0;
}

NaturalFamily::NaturalFamily(std::string name, Scalar b, Scalar b1, Scalar b2,
                             double a, Interval theta_space)
    : kind_(FamilyKind::custom),
      name_(std::move(name)),
      a_(a),
      theta_space_(theta_space),
      b_(std::move(b)),
      b1_(std::move(b1)),
      b2_(std::move(b2)) {
    if (!(a_ > 0.0)) throw InputError("family scale a must be positive");
    if (!(theta_space_.lo < theta_space_.hi))
        throw InputError("parameter interval must satisfy lo < hi");
    if (!theta_space_.finite())
        throw InputError("custom families need a finite parameter interval");
    if (!b_ || !b1_ || !b2_) throw InputError("custom family needs b, b', b''");
}

double NaturalFamily::b(double t) const {
    switch (kind_) {
        case FamilyKind::gaussian: return 0.5 * t * t;
        case FamilyKind::bernoulli: return softplus(t);
        case FamilyKind::poisson: return std::exp(t);
        case FamilyKind::custom: return b_(t);
    }
    return b_(t);
}

double NaturalFamily::b1(double t) const {
    switch (kind_) {
        case FamilyKind::gaussian: return t;
        case FamilyKind::bernoulli: return logistic(t);
        case FamilyKind::poisson: return std::exp(t);
        case FamilyKind::custom: return b1_(t);
    }
    return b1_(t);
}

double NaturalFamily::b2(double t) const {
    switch (kind_) {
        case FamilyKind::gaussian: return 1.0;
        case FamilyKind::bernoulli: return logistic_variance(t);
        case FamilyKind::poisson: return std::exp(t);
        case FamilyKind::custom: return b2_(t);
    }
    return b2_(t);
}

VectorXd NaturalFamily::b(const VectorXd& theta) const {
    return theta.unaryExpr([this](double t) { return b(t); });
}

VectorXd NaturalFamily::b1(const VectorXd& theta) const {
    return theta.unaryExpr([this](double t) { return b1(t); });
}

VectorXd NaturalFamily::b2(const VectorXd& theta) const {
    return theta.unaryExpr([this](double t) { return b2(t); });
}

void NaturalFamily::moments(const VectorXd& theta, VectorXd& mean, VectorXd& variance) const {
    const Eigen::Index n = theta.size();
    mean.resize(n);
    variance.resize(n);
    switch (kind_) {
        case FamilyKind::gaussian:
            mean = theta;
            variance.setOnes();
            return;
        case FamilyKind::bernoulli:
            for (Eigen::Index i = 0; i < n; ++i) {
                const double e = std::exp(-std::abs(theta[i]));
                const double s = 1.0 / (1.0 + e);
                mean[i] = theta[i] >= 0.0 ? s : e * s;
                variance[i] = e * s * s;
            }
            return;
        case FamilyKind::poisson:
            mean = theta.array().exp();
            variance = mean;
            return;
        case FamilyKind::custom:
            for (Eigen::Index i = 0; i < n; ++i) {
                mean[i] = b1_(theta[i]);
                variance[i] = b2_(theta[i]);
            }
            return;
    }
}

double NaturalFamily::cumulant_sum(const VectorXd& theta) const {
    double s = 0.0;
    switch (kind_) {
        case FamilyKind::gaussian: return 0.5 * theta.squaredNorm();
        case FamilyKind::bernoulli:
            for (Eigen::Index i = 0; i < theta.size(); ++i) s += softplus(theta[i]);
            return s;
        case FamilyKind::poisson: return theta.array().exp().sum();
        case FamilyKind::custom:
            for (Eigen::Index i = 0; i < theta.size(); ++i) s += b_(theta[i]);
            return s;
    }
    return s;
}

NaturalFamily make_family(FamilyKind kind, const FamilyOptions& options) {
    NaturalFamily fam;
    fam.kind_ = kind;
    fam.name_ = to_string(kind);
    fam.options_ = options;
    switch (kind) {
        case FamilyKind::gaussian:
            if (!(options.sigma2 > 0.0) || !std::isfinite(options.sigma2))
                throw InputError("gaussian family needs sigma2 > 0");
            if (!(options.theta_space.lo < options.theta_space.hi))
                throw InputError("parameter interval must satisfy lo < hi");
            fam.a_ = options.sigma2;
            fam.theta_space_ = options.theta_space;
            break;
        case FamilyKind::bernoulli:
            if (!(options.c0 > 0.0) || !std::isfinite(options.c0))
                throw InputError("bernoulli family needs a finite bound c0 > 0");
            fam.a_ = 1.0;
            fam.theta_space_ = {-options.c0, options.c0};
            break;
        case FamilyKind::poisson:
            if (!options.theta_space.finite())
                throw InputError(
                    "poisson family needs a finite parameter interval; b'' is "
                    "unbounded otherwise");
            if (!(options.theta_space.lo < options.theta_space.hi))
                throw InputError("parameter interval must satisfy lo < hi");
            fam.a_ = 1.0;
            fam.theta_space_ = options.theta_space;
            break;
        case FamilyKind::custom:
            throw InputError("custom families are built with the NaturalFamily constructor");
    }
    return fam;
}

CurvatureBounds curvature_bounds(const NaturalFamily& fam) {
    CurvatureBounds out;
    const Interval& th = fam.theta_space();
    switch (fam.kind()) {
        case FamilyKind::gaussian:
            out = {1.0, 1.0, true, 0};
            break;
        case FamilyKind::bernoulli: {
            const double c0 = th.hi;
            out = {logistic_variance(c0), 0.25, true, 0};
            break;
        }
        case FamilyKind::poisson:
            out = {std::exp(th.lo), std::exp(th.hi), false, 0};
            break;
        case FamilyKind::custom: {
            const int n = kCustomCurvatureGrid;
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (int i = 0; i < n; ++i) {
                const double t = th.lo + (th.hi - th.lo) * i / (n - 1);
                const double v = fam.b2(t);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            out = {lo, hi, false, n};
            break;
        }
    }
    if (!(out.lower > 0.0) || !std::isfinite(out.upper))
        throw NumericalError("degenerate family '" + fam.name() +
                             "': curvature lower bound is not positive");
    return out;
}

void require_in_theta(const NaturalFamily& fam, const VectorXd& theta,
                      const char* what) {
    const Interval& th = fam.theta_space();
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        if (!th.contains(theta[i]))
            throw InputError(std::string(what) + ": component " +
                             std::to_string(i) + " lies outside the parameter space");
    }
}

double kl_divergence(const NaturalFamily& fam, const VectorXd& theta1,
                     const VectorXd& theta2) {
    if (theta1.size() != theta2.size())
        throw InputError("kl_divergence: parameter vectors differ in length");
    require_in_theta(fam, theta1, "kl_divergence");
    require_in_theta(fam, theta2, "kl_divergence");

    double sum = 0.0;
    for (Eigen::Index i = 0; i < theta1.size(); ++i) {
        const double t1 = theta1[i];
        const double t2 = theta2[i];
        const double d = t1 - t2;
        double term = 0.0;
        switch (fam.kind()) {
            case FamilyKind::gaussian:
                term = 0.5 * d * d;
                break;
            case FamilyKind::poisson:
                // e^{t1} (d - 1 + e^{-d})
                term = std::exp(t1) * (d + std::expm1(-d));
                break;
            default:
                term = fam.b1(t1) * d - fam.b(t1) + fam.b(t2);
                break;
        }
        sum += std::max(term, 0.0);
    }
    return sum / fam.a();
}

}  // namespace glmselect
