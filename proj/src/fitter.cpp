#include "glmselect/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "glmselect/errors.hpp"

namespace glmselect {

namespace {

struct Constraint {
    Eigen::Index row;
    double sign;   // +1: x_i^t beta <= hi,  -1: -x_i^t beta <= -lo
    double bound;  // sign * (hi or lo)
};

double kernel(const NaturalFamily& fam, const VectorXd& Y, const VectorXd& theta) {
    return Y.dot(theta) - fam.cumulant_sum(theta);
}

// Full column rank of X restricted to idx. The Gram block settles clear cases
// cheaply; borderline ones go to the SVD with the design's own tolerance.
bool full_column_rank(const DesignMatrix& X, const std::vector<int>& idx, const MatrixXd& XM) {
    const auto m = static_cast<Eigen::Index>(idx.size());
    MatrixXd G(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b) G(a, b) = X.gram()(idx[a], idx[b]);
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(G, Eigen::EigenvaluesOnly);
    const double tol = X.rank_tol();
    const double err = 64.0 * static_cast<double>(m) * std::numeric_limits<double>::epsilon() * G.trace();
    if (es.info() == Eigen::Success && es.eigenvalues()[0] > tol * tol + err) return true;
    return rank_of(XM, tol) == m;
}

std::optional<VectorXd> starting_point(const MatrixXd& XM, const Interval& box) {
    const Eigen::Index m = XM.cols();
    if (box.lo < 0.0 && 0.0 < box.hi) return VectorXd::Zero(m);
    const double mid = box.midpoint();
    for (Eigen::Index j = 0; j < m; ++j) {
        const double c = XM(0, j);
        if (c != 0.0 && (XM.col(j).array() == c).all()) {
            VectorXd b = VectorXd::Zero(m);
            b[j] = mid / c;
            return b;
        }
    }
    return std::nullopt;
}

// Newton direction for H d = g; minimum-norm when H is singular.
VectorXd newton_direction(const MatrixXd& H, const VectorXd& g) {
    Eigen::LDLT<MatrixXd> ldlt(H);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        const VectorXd d = ldlt.solve(g);
        if (d.allFinite() && (H * d - g).norm() <= 1e-8 * (1.0 + g.norm())) return d;
    }
    return Eigen::CompleteOrthogonalDecomposition<MatrixXd>(H).solve(g);
}

FitResult solve(const NaturalFamily& fam, const DesignMatrix& X, const VectorXd& Y,
                const ModelSpec& M, const FitOptions& opts) {
    const int p = X.p();
    for (int j : M.indices)
        if (j < 0 || j >= p) throw InputError("model index out of range");
    if (M.size() > X.rank())
        throw InputError("model size exceeds rank(X)");

    FitResult out;
    out.beta = VectorXd::Zero(p);
    const Interval box = feasible_box(fam, opts.margin);

    if (M.empty()) {
        const VectorXd theta = VectorXd::Zero(X.n());
        if (!box.contains(0.0))
            throw NumericalError("the empty model is infeasible: 0 is outside the parameter space");
        out.theta_hat = theta;
        out.loglik = kernel(fam, Y, theta);
        out.converged = true;
        if (opts.keep_trace) out.objective_trace.push_back(out.loglik);
        return out;
    }

    const MatrixXd XM = X.columns(M.indices);
    const Eigen::Index n = XM.rows();
    const Eigen::Index m = XM.cols();
    if (!full_column_rank(X, M.indices, XM))
        throw NumericalError("restricted design is rank deficient");

    std::vector<Constraint> all;
    all.reserve(static_cast<std::size_t>(2 * n));
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::isfinite(box.hi)) all.push_back({i, 1.0, box.hi});
        if (std::isfinite(box.lo)) all.push_back({i, -1.0, -box.lo});
    }
    std::vector<char> active(all.size(), 0);
    std::vector<std::size_t> working;

    auto start = starting_point(XM, box);
    if (!start)
        throw NumericalError(
            "no feasible starting point: 0 is outside the parameter space and the "
            "model has no intercept column");
    VectorXd beta = *start;
    VectorXd theta = XM * beta;
    double obj = kernel(fam, Y, theta);
    if (opts.keep_trace) out.objective_trace.push_back(obj);

    bool small_change = false;
    int iter = 0;
    VectorXd mean, w;
    for (; iter < opts.max_iter; ++iter) {
        fam.moments(theta, mean, w);
        const VectorXd g = XM.transpose() * (Y - mean);

        MatrixXd Z;
        MatrixXd A;
        if (!working.empty()) {
            A.resize(static_cast<Eigen::Index>(working.size()), m);
            for (std::size_t a = 0; a < working.size(); ++a) {
                const Constraint& c = all[working[a]];
                A.row(static_cast<Eigen::Index>(a)) = c.sign * XM.row(c.row);
            }
            Eigen::HouseholderQR<MatrixXd> qr(A.transpose());
            const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(m, m);
            Z = Q.rightCols(m - static_cast<Eigen::Index>(working.size()));
        }
        const VectorXd gz = working.empty() ? g : VectorXd(Z.transpose() * g);

        if (gz.size() == 0 || gz.norm() <= opts.tol_grad || small_change) {
            if (working.empty()) {
                out.converged = true;
                break;
            }
            const VectorXd lambda = A.transpose().colPivHouseholderQr().solve(g);
            Eigen::Index worst = 0;
            const double lmin = lambda.minCoeff(&worst);
            if (lmin < -opts.tol_grad) {
                active[working[static_cast<std::size_t>(worst)]] = 0;
                working.erase(working.begin() + worst);
                small_change = false;
                continue;
            }
            if (gz.size() == 0 || gz.norm() <= opts.tol_grad || small_change) {
                out.converged = true;
                break;
            }
        }

        const MatrixXd XW = XM.array().colwise() * w.array();
        MatrixXd H(m, m);
        for (Eigen::Index a = 0; a < m; ++a)
            for (Eigen::Index b = 0; b <= a; ++b) H(a, b) = H(b, a) = XW.col(a).dot(XM.col(b));
        const VectorXd d = working.empty() ? newton_direction(H, gz)
                                           : VectorXd(Z * newton_direction(Z.transpose() * H * Z, gz));
        const VectorXd dtheta = XM * d;

        double t_max = std::numeric_limits<double>::infinity();
        std::optional<std::size_t> blocking;
        for (std::size_t c = 0; c < all.size(); ++c) {
            if (active[c]) continue;
            const double rate = all[c].sign * dtheta[all[c].row];
            if (rate <= 0.0) continue;
            const double slack = std::max(all[c].bound - all[c].sign * theta[all[c].row], 0.0);
            const double t = slack / rate;
            if (t < t_max) {
                t_max = t;
                blocking = c;
            }
        }

        double t = std::min(1.0, t_max);
        const bool hits_bound = blocking && t_max <= 1.0;
        const double floor = obj - 1e-15 * (1.0 + std::abs(obj));
        VectorXd theta_new = theta + t * dtheta;
        double obj_new = kernel(fam, Y, theta_new);
        int halvings = 0;
        while (!(obj_new >= floor) && halvings < opts.max_halvings) {
            t *= 0.5;
            ++halvings;
            theta_new = theta + t * dtheta;
            obj_new = kernel(fam, Y, theta_new);
        }
        if (!(obj_new >= floor)) break;  // no ascent possible along d

        beta += t * d;
        theta = std::move(theta_new);
        const double prev = obj;
        obj = obj_new;
        if (opts.keep_trace) out.objective_trace.push_back(obj);

        const bool added = hits_bound && halvings == 0;
        if (added) {
            active[*blocking] = 1;
            working.push_back(*blocking);
        }
        small_change = !added && std::abs(obj - prev) <= opts.tol_obj * std::max(1.0, std::abs(obj));
    }

    // Report the fit exactly at X_M beta rather than the accumulated iterate.
    theta = XM * beta;
    obj = kernel(fam, Y, theta);
    out.iterations = iter;
    for (std::size_t j = 0; j < M.indices.size(); ++j)
        out.beta[M.indices[j]] = beta[static_cast<Eigen::Index>(j)];
    out.theta_hat = theta;
    out.loglik = obj;
    out.boundary_active = !working.empty();
    return out;
}

}  // namespace

ModelSpec::ModelSpec(std::vector<int> idx) : indices(std::move(idx)) {
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0) throw InputError("model indices must be nonnegative");
        if (i > 0 && indices[i] <= indices[i - 1])
            throw InputError("model indices must be strictly increasing");
    }
}

Interval feasible_box(const NaturalFamily& fam, double margin) {
    const Interval& th = fam.theta_space();
    const double eps = th.finite() ? margin * (th.hi - th.lo) : margin;
    return {th.lo + eps, th.hi - eps};
}

void validate_response(const NaturalFamily& fam, const VectorXd& Y, int n) {
    if (Y.size() != n) throw InputError("response length does not match the design");
    if (!Y.allFinite()) throw InputError("response has non-finite entries");
    if (fam.kind() == FamilyKind::bernoulli) {
        for (Eigen::Index i = 0; i < Y.size(); ++i)
            if (Y[i] != 0.0 && Y[i] != 1.0)
                throw InputError("bernoulli response must be 0/1");
    } else if (fam.kind() == FamilyKind::poisson) {
        for (Eigen::Index i = 0; i < Y.size(); ++i)
            if (Y[i] < 0.0 || Y[i] != std::floor(Y[i]))
                throw InputError("poisson response must be a nonnegative integer");
    }
}

FitResult fit_mle(const NaturalFamily& fam, const DesignMatrix& X, const VectorXd& Y,
                  const ModelSpec& M, const FitOptions& opts) {
    validate_response(fam, Y, X.n());
    return solve(fam, X, Y, M, opts);
}

FitResult kl_projection(const NaturalFamily& fam, const DesignMatrix& X,
                        const VectorXd& theta, const ModelSpec& M,
                        const FitOptions& opts) {
    if (theta.size() != X.n()) throw InputError("theta length does not match the design");
    require_in_theta(fam, theta, "kl_projection");
    return solve(fam, X, fam.b1(theta), M, opts);
}

double log_likelihood(const NaturalFamily& fam, const MatrixXd& X, const VectorXd& Y,
                      const VectorXd& beta) {
    if (X.cols() != beta.size() || X.rows() != Y.size())
        throw InputError("log_likelihood: dimension mismatch");
    const VectorXd theta = X * beta;
    const Interval& th = fam.theta_space();
    for (Eigen::Index i = 0; i < theta.size(); ++i)
        if (!th.contains(theta[i]))
            throw InputError("log_likelihood: X beta leaves the parameter space");
    return Y.dot(theta) - fam.b(theta).sum();
}

}  // namespace glmselect
