#include "glmselect/selector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "glmselect/errors.hpp"
#include "glmselect/parallel.hpp"
#include "glmselect/random.hpp"

namespace glmselect {

namespace {

constexpr std::uint64_t kHierarchicalScanLimit = 50'000'000;

std::vector<int> sorted_union(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

bool closed_under_parents(const ModelFamily& fam, const std::vector<int>& idx) {
    for (int j : idx)
        for (int parent : fam.parents[static_cast<std::size_t>(j)])
            if (!std::binary_search(idx.begin(), idx.end(), parent)) return false;
    return true;
}

void grouped_dfs(const ModelFamily& fam, std::size_t g, int remaining, std::vector<int>& chosen,
                 std::vector<ModelSpec>& out) {
    if (remaining == 0) {
        std::vector<int> idx;
        for (int gi : chosen) idx = sorted_union(idx, fam.groups[static_cast<std::size_t>(gi)]);
        out.emplace_back(std::move(idx));
        return;
    }
    if (g == fam.groups.size()) return;
    const int sz = static_cast<int>(fam.groups[g].size());
    if (sz <= remaining) {
        chosen.push_back(static_cast<int>(g));
        grouped_dfs(fam, g + 1, remaining - sz, chosen, out);
        chosen.pop_back();
    }
    grouped_dfs(fam, g + 1, remaining, chosen, out);
}

struct Evaluated {
    ModelSpec model;
    std::optional<FitResult> fit;
    double objective = std::numeric_limits<double>::infinity();
    double penalty = 0.0;
};

Evaluated evaluate(const NaturalFamily& fam, const DesignMatrix& X, const VectorXd& Y,
                   const ModelSpec& M, double penalty, const FitOptions& fo) {
    Evaluated e;
    e.model = M;
    e.penalty = penalty;
    try {
        FitResult fit = fit_mle(fam, X, Y, M, fo);
        if (fit.converged) {
            e.objective = selection_objective(fam, fit, penalty);
            e.fit = std::move(fit);
        }
    } catch (const NumericalError&) {
        // excluded from contention, counted by the caller
    }
    return e;
}

void absorb(SelectionResult& res, std::optional<Evaluated>& best, Evaluated&& e, bool trace) {
    ++res.models_evaluated;
    if (!e.fit) ++res.fit_failures;
    if (trace) res.trace.push_back({e.model, e.objective, !e.fit.has_value()});
    if (!e.fit) return;
    if (!best || better_candidate(e.objective, e.model, best->objective, best->model))
        best = std::move(e);
}

SelectionResult finish(SelectionResult res, std::optional<Evaluated>& best) {
    if (!best) throw NumericalError("model selection failed: no candidate model could be fitted");
    res.model = best->model;
    res.fit = std::move(*best->fit);
    res.objective = best->objective;
    res.penalty = best->penalty;
    return res;
}

// Upper bound on the log-likelihood of every model: the fit on a basis of the
// column space of X, whose feasible set in theta contains every B_M.
std::optional<double> saturated_loglik(const NaturalFamily& fam, const DesignMatrix& X,
                                       const VectorXd& Y, const FitOptions& fo) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(X.X());
    std::vector<int> basis;
    for (int j = 0; j < X.rank(); ++j) basis.push_back(static_cast<int>(qr.colsPermutation().indices()[j]));
    std::sort(basis.begin(), basis.end());
    try {
        const FitResult fit = fit_mle(fam, X, Y, ModelSpec(basis), fo);
        if (fit.converged) return fit.loglik;
    } catch (const NumericalError&) {
    }
    return std::nullopt;
}

}  // namespace

std::string to_string(Structure s) {
    switch (s) {
        case Structure::complete: return "complete";
        case Structure::ordered: return "ordered";
        case Structure::grouped: return "grouped";
        case Structure::hierarchical: return "hierarchical";
        case Structure::custom: return "custom";
    }
    return "custom";
}

Structure structure_from_string(const std::string& name) {
    for (auto s : {Structure::complete, Structure::ordered, Structure::grouped,
                   Structure::hierarchical, Structure::custom})
        if (to_string(s) == name) return s;
    throw InputError("unknown model structure '" + name + "'");
}

ModelFamily ModelFamily::complete(int p, int max_size) {
    ModelFamily f{Structure::complete, p, max_size, {}, {}, {}};
    f.validate();
    return f;
}

ModelFamily ModelFamily::ordered(int p, int max_size) {
    ModelFamily f{Structure::ordered, p, max_size, {}, {}, {}};
    f.validate();
    return f;
}

ModelFamily ModelFamily::grouped(int p, std::vector<std::vector<int>> groups, int max_size) {
    for (auto& g : groups) std::sort(g.begin(), g.end());
    ModelFamily f{Structure::grouped, p, max_size, std::move(groups), {}, {}};
    f.validate();
    return f;
}

ModelFamily ModelFamily::hierarchical(int p, std::vector<std::vector<int>> parents, int max_size) {
    ModelFamily f{Structure::hierarchical, p, max_size, {}, std::move(parents), {}};
    f.validate();
    return f;
}

ModelFamily ModelFamily::custom(int p, std::vector<ModelSpec> models, int max_size) {
    std::sort(models.begin(), models.end());
    models.erase(std::unique(models.begin(), models.end()), models.end());
    ModelFamily f{Structure::custom, p, max_size, {}, {}, std::move(models)};
    f.validate();
    return f;
}

void ModelFamily::validate() const {
    if (p < 1) throw InputError("model family needs p >= 1");
    if (max_size < -1) throw InputError("max_size must be >= 0 (or -1 for no cap)");
    switch (kind) {
        case Structure::complete:
        case Structure::ordered:
            break;
        case Structure::grouped: {
            std::vector<int> seen(static_cast<std::size_t>(p), 0);
            for (const auto& g : groups) {
                if (g.empty()) throw InputError("groups must be nonempty");
                for (int j : g) {
                    if (j < 0 || j >= p) throw InputError("group index out of range");
                    if (seen[static_cast<std::size_t>(j)]++) throw InputError("groups overlap");
                }
            }
            if (std::count(seen.begin(), seen.end(), 0) != 0)
                throw InputError("groups must partition all predictors");
            break;
        }
        case Structure::hierarchical: {
            if (static_cast<int>(parents.size()) != p)
                throw InputError("parent map needs one entry per predictor");
            for (const auto& ps : parents)
                for (int q : ps)
                    if (q < 0 || q >= p) throw InputError("parent index out of range");
            // Kahn's algorithm: every node must be removable.
            std::vector<int> indeg(static_cast<std::size_t>(p), 0);
            std::vector<std::vector<int>> children(static_cast<std::size_t>(p));
            for (int j = 0; j < p; ++j)
                for (int q : parents[static_cast<std::size_t>(j)]) {
                    children[static_cast<std::size_t>(q)].push_back(j);
                    ++indeg[static_cast<std::size_t>(j)];
                }
            std::vector<int> queue;
            for (int j = 0; j < p; ++j)
                if (indeg[static_cast<std::size_t>(j)] == 0) queue.push_back(j);
            int removed = 0;
            while (!queue.empty()) {
                const int j = queue.back();
                queue.pop_back();
                ++removed;
                for (int c : children[static_cast<std::size_t>(j)])
                    if (--indeg[static_cast<std::size_t>(c)] == 0) queue.push_back(c);
            }
            if (removed != p) throw InputError("parent map contains a cycle");
            break;
        }
        case Structure::custom:
            for (const auto& m : models)
                for (int j : m.indices)
                    if (j >= p) throw InputError("custom model index out of range");
            break;
    }
}

bool ModelFamily::admits(const ModelSpec& M) const {
    if (M.empty()) return true;
    if (M.indices.back() >= p) return false;
    if (max_size >= 0 && M.size() > max_size) return false;
    switch (kind) {
        case Structure::complete: return true;
        case Structure::ordered: return M.indices.back() == M.size() - 1;
        case Structure::grouped:
            for (const auto& g : groups) {
                const auto hits = std::count_if(g.begin(), g.end(), [&](int j) {
                    return std::binary_search(M.indices.begin(), M.indices.end(), j);
                });
                if (hits != 0 && hits != static_cast<long>(g.size())) return false;
            }
            return true;
        case Structure::hierarchical: return closed_under_parents(*this, M.indices);
        case Structure::custom: return std::binary_search(models.begin(), models.end(), M);
    }
    return false;
}

std::vector<ModelSpec> enumerate_admissible(const ModelFamily& fam, int k) {
    if (k < 0) throw InputError("enumerate_admissible: k must be >= 0");
    if (k > fam.size_cap()) throw InputError("enumerate_admissible: k exceeds max_size");
    std::vector<ModelSpec> out;
    if (k == 0) {
        out.emplace_back();
        return out;
    }
    switch (fam.kind) {
        case Structure::complete: {
            std::vector<int> c(static_cast<std::size_t>(k));
            std::iota(c.begin(), c.end(), 0);
            do out.emplace_back(c);
            while (next_combination(c, fam.p));
            break;
        }
        case Structure::ordered: {
            std::vector<int> c(static_cast<std::size_t>(k));
            std::iota(c.begin(), c.end(), 0);
            out.emplace_back(std::move(c));
            break;
        }
        case Structure::grouped: {
            std::vector<int> chosen;
            grouped_dfs(fam, 0, k, chosen, out);
            std::sort(out.begin(), out.end());
            break;
        }
        case Structure::hierarchical: {
            if (binomial(fam.p, k) > kHierarchicalScanLimit)
                throw InputError("hierarchical enumeration too large at this size");
            std::vector<int> c(static_cast<std::size_t>(k));
            std::iota(c.begin(), c.end(), 0);
            do
                if (closed_under_parents(fam, c)) out.emplace_back(c);
            while (next_combination(c, fam.p));
            break;
        }
        case Structure::custom:
            for (const auto& m : fam.models)
                if (m.size() == k) out.push_back(m);
            break;
    }
    return out;
}

std::uint64_t admissible_count(const ModelFamily& fam, int k) {
    if (k < 0 || k > fam.size_cap()) return 0;
    if (k == 0) return 1;
    switch (fam.kind) {
        case Structure::complete: return binomial(fam.p, k);
        case Structure::ordered: return 1;
        case Structure::grouped: {
            // subset-sum count over group sizes
            std::vector<std::uint64_t> ways(static_cast<std::size_t>(k + 1), 0);
            ways[0] = 1;
            for (const auto& g : fam.groups) {
                const int sz = static_cast<int>(g.size());
                for (int s = k; s >= sz; --s)
                    ways[static_cast<std::size_t>(s)] += ways[static_cast<std::size_t>(s - sz)];
            }
            return ways[static_cast<std::size_t>(k)];
        }
        case Structure::hierarchical:
        case Structure::custom:
            return enumerate_admissible(fam, k).size();
    }
    return 0;
}

PenaltyContext penalty_context(const ModelFamily& fam, const DesignMatrix& X) {
    return penalty_context(fam, X.p(), X.rank(), X.n());
}

PenaltyContext penalty_context(const ModelFamily& fam, int p, int r, int n) {
    if (r < 1 || r > p || n < 1) throw InputError("penalty context needs 1 <= r <= p and n >= 1");
    PenaltyContext ctx;
    ctx.p = p;
    ctx.r = r;
    ctx.n = n;
    if (fam.kind == Structure::complete) {
        ctx.log_counts.resize(static_cast<std::size_t>(ctx.r + 1));
        for (int k = 0; k <= ctx.r; ++k)
            ctx.log_counts[static_cast<std::size_t>(k)] =
                k <= fam.size_cap() ? log_binomial(ctx.p, k) : -std::numeric_limits<double>::infinity();
        return ctx;
    }
    ctx.log_counts.assign(static_cast<std::size_t>(ctx.r + 1),
                          -std::numeric_limits<double>::infinity());
    for (int k = 0; k <= std::min(ctx.r, fam.size_cap()); ++k) {
        const std::uint64_t m = admissible_count(fam, k);
        if (m > 0) ctx.log_counts[static_cast<std::size_t>(k)] = std::log(static_cast<double>(m));
    }
    return ctx;
}

double selection_objective(const NaturalFamily& fam, const FitResult& fit, double penalty) {
    return -fit.loglik / fam.a() + penalty;
}

bool better_candidate(double obj_a, const ModelSpec& a, double obj_b, const ModelSpec& b) {
    if (obj_a != obj_b) return obj_a < obj_b;
    if (a.size() != b.size()) return a.size() < b.size();
    return a.indices < b.indices;
}

SelectionResult select_model(const NaturalFamily& fam, const DesignMatrix& X, const VectorXd& Y,
                             const ModelFamily& models, const PenaltyRule& rule,
                             const SelectOptions& opts) {
    models.validate();
    rule.validate();
    if (models.p != X.p()) throw InputError("model family and design disagree on p");
    validate_response(fam, Y, X.n());

    const int kmax = std::min(models.size_cap(), X.rank());
    const PenaltyContext ctx = penalty_context(models, X);

    std::vector<std::uint64_t> counts(static_cast<std::size_t>(kmax + 1));
    std::uint64_t total = 0;
    for (int k = 0; k <= kmax; ++k) {
        counts[static_cast<std::size_t>(k)] = admissible_count(models, k);
        total += counts[static_cast<std::size_t>(k)];
    }
    if (!opts.prune && total > opts.guard)
        throw InputError("selection would evaluate " + std::to_string(total) +
                         " models, above the guard of " + std::to_string(opts.guard) +
                         "; use greedy selection or raise the guard");

    std::optional<double> sat;
    if (opts.prune) sat = saturated_loglik(fam, X, Y, opts.fit);

    SelectionResult res;
    std::optional<Evaluated> best;
    std::uint64_t planned = 0;
    for (int k = 0; k <= kmax; ++k) {
        if (counts[static_cast<std::size_t>(k)] == 0) continue;
        const double pen = pen_value(rule, k, ctx);
        if (sat && best && k > 0) {
            const double bound = -*sat / fam.a() + pen;
            if (bound > best->objective + 1e-7 * (1.0 + std::abs(best->objective))) {
                ++res.sizes_pruned;
                continue;
            }
        }
        planned += counts[static_cast<std::size_t>(k)];
        if (planned > opts.guard)
            throw InputError("selection exceeded the evaluation guard of " +
                             std::to_string(opts.guard) + "; use greedy selection or raise the guard");
        const std::vector<ModelSpec> list = enumerate_admissible(models, k);
        std::vector<Evaluated> evals(list.size());
        parallel_for(list.size(), opts.threads, [&](std::size_t i) {
            evals[i] = evaluate(fam, X, Y, list[i], pen, opts.fit);
        });
        for (auto& e : evals) absorb(res, best, std::move(e), opts.keep_trace);
    }
    return finish(std::move(res), best);
}

SelectionResult greedy_select(const NaturalFamily& fam, const DesignMatrix& X, const VectorXd& Y,
                              const ModelFamily& models, const PenaltyRule& rule,
                              const SelectOptions& opts) {
    models.validate();
    rule.validate();
    if (models.p != X.p()) throw InputError("model family and design disagree on p");
    if (models.kind == Structure::hierarchical || models.kind == Structure::custom)
        throw InputError("greedy selection supports complete, ordered and grouped families");
    validate_response(fam, Y, X.n());

    const int kmax = std::min(models.size_cap(), X.rank());
    const PenaltyContext ctx = penalty_context(models, X);

    SelectionResult res;
    std::optional<Evaluated> best;
    ModelSpec current;
    {
        Evaluated e = evaluate(fam, X, Y, current, 0.0, opts.fit);
        absorb(res, best, std::move(e), opts.keep_trace);
    }

    for (;;) {
        std::vector<ModelSpec> steps;
        switch (models.kind) {
            case Structure::complete:
                for (int j = 0; j < models.p; ++j)
                    if (!std::binary_search(current.indices.begin(), current.indices.end(), j))
                        steps.emplace_back(sorted_union(current.indices, {j}));
                break;
            case Structure::ordered:
                if (current.size() < models.p) steps.emplace_back(sorted_union(current.indices, {current.size()}));
                break;
            case Structure::grouped:
                for (const auto& g : models.groups)
                    if (!std::binary_search(current.indices.begin(), current.indices.end(), g.front()))
                        steps.emplace_back(sorted_union(current.indices, g));
                break;
            default: break;
        }
        std::erase_if(steps, [&](const ModelSpec& m) { return m.size() > kmax; });
        if (steps.empty()) break;

        std::vector<Evaluated> evals(steps.size());
        parallel_for(steps.size(), opts.threads, [&](std::size_t i) {
            evals[i] = evaluate(fam, X, Y, steps[i], pen_value(rule, steps[i].size(), ctx), opts.fit);
        });
        // next step: largest likelihood, ties to the lexicographically smaller model
        std::optional<std::size_t> pick;
        for (std::size_t i = 0; i < evals.size(); ++i) {
            if (!evals[i].fit) continue;
            if (!pick || evals[i].fit->loglik > evals[*pick].fit->loglik ||
                (evals[i].fit->loglik == evals[*pick].fit->loglik &&
                 evals[i].model.indices < evals[*pick].model.indices))
                pick = i;
        }
        if (!pick) {
            for (auto& e : evals) absorb(res, best, std::move(e), opts.keep_trace);
            break;
        }
        current = evals[*pick].model;
        for (auto& e : evals) absorb(res, best, std::move(e), opts.keep_trace);
    }
    return finish(std::move(res), best);
}

}  // namespace glmselect
