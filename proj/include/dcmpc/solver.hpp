#ifndef DCMPC_SOLVER_HPP
#define DCMPC_SOLVER_HPP

/**
 * \file dcmpc/solver.hpp
 *
 * \brief Primal-dual interior-point method for the window programs.
 *
 * Each constraint g_i(w) <= 0 gets a slack s_i > 0 with g_i(w) + s_i = 0 and a
 * multiplier lambda_i; box bounds carry multipliers of their own. An iteration
 * resets the barrier weight to t = growth * m / eta from the surrogate gap
 * eta = sum_i lambda_i s_i, takes one Newton step on the perturbed KKT system
 *
 *   grad f0 + sum_i lambda_i grad g_i = 0,   g_i + s_i = 0,   lambda_i s_i = 1/t
 *
 * and backtracks on the residual norm while keeping every product lambda_i s_i
 * within a factor of the mean. Because the slacks absorb constraint violation
 * the iterates need not be feasible, so a warm start is used as given. The
 * method stops once eta, the dual residual and the constraint residual are all
 * below the tolerance. Variables with lo == hi are held fixed.
 *
 * Phase I minimizes an auxiliary level r subject to g_i(w) <= r, r >= -1 and
 * stops at the first iterate with max_i g_i(w) <= -strict_margin. A positive
 * Lagrangian bound at a dual-feasible iterate certifies that no feasible point
 * exists. It runs when there is no warm start or the warm-started solve fails.
 *
 * Constraints without variables are constants: they are checked once and
 * never enter the iteration.
 */

#include <dcmpc/errors.hpp>
#include <dcmpc/posy.hpp>
#include <dcmpc/program.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dcmpc {

struct SolverConfig {
    double tolerance = 1e-8;     ///< surrogate duality gap and dual residual at termination
    int max_iterations = 500;    ///< Newton steps per run, each with its own barrier update
    double growth = 3.0;        ///< barrier weight multiplier over m / gap
    double ls_alpha = 0.01;      ///< sufficient decrease constant
    double ls_beta = 0.5;        ///< backtracking shrink factor
    double initial_barrier = 1.0;
    double strict_margin = 1e-6;  ///< phase I target: max g <= -strict_margin
    double warm_slack = 1e-2;     ///< initial constraint slack floor when starting from a warm start

    void validate() const {
        if (!(tolerance > 0.0)) throw UsageError("solver tolerance must be positive");
        if (!(growth > 1.0)) throw UsageError("barrier growth factor must exceed 1");
        if (!(ls_alpha > 0.0 && ls_alpha < 1.0) || !(ls_beta > 0.0 && ls_beta < 1.0)) {
            throw UsageError("line-search constants must lie in (0, 1)");
        }
        if (!(initial_barrier > 0.0) || !(strict_margin > 0.0) || !(warm_slack > 0.0)) {
            throw UsageError("initial barrier weight, strict margin and warm slack must be positive");
        }
        if (max_iterations < 1) throw UsageError("iteration limit must be positive");
    }
};

enum class SolveStatus { optimal, infeasible, max_iter };

inline const char* to_string(SolveStatus s) noexcept {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::max_iter: return "max_iter";
    }
    return "unknown";
}

struct Solution {
    std::vector<double> w_star;
    double objective = std::numeric_limits<double>::quiet_NaN();
    SolveStatus status = SolveStatus::max_iter;
    long iterations = 0;   ///< Newton steps, phase I included
    long evaluations = 0;  ///< full passes over objective and constraints
    double worst_slack = std::numeric_limits<double>::quiet_NaN();  ///< max_i g_i(w_star)
    double gap = std::numeric_limits<double>::quiet_NaN();          ///< surrogate duality gap at w_star
    std::vector<double> outer_objectives;  ///< f0 after each outer iteration
};

struct Phase1Result {
    bool feasible = false;
    std::vector<double> w;
    double max_constraint = std::numeric_limits<double>::quiet_NaN();
    double lower_bound = -std::numeric_limits<double>::infinity();  ///< on min_w max_i g_i(w)
    long iterations = 0;
    long evaluations = 0;
};

namespace detail {

struct IpResult {
    std::vector<double> w;
    SolveStatus status = SolveStatus::max_iter;
    bool stopped_early = false;
    bool certified_infeasible = false;
    double last_bound = -std::numeric_limits<double>::infinity();
    double gap = std::numeric_limits<double>::infinity();
    long iterations = 0;
    long evaluations = 0;
    std::vector<double> outer_objectives;
};

class InteriorPoint {
public:
    using StopFn = std::function<bool(std::span<const double>)>;
    /// Called with (f0, gap) at dual-feasible iterates; true certifies infeasibility.
    using BoundFn = std::function<bool(double, double)>;

    InteriorPoint(const LogConvexFn& objective, std::vector<const LogConvexFn*> constraints, std::vector<double> lower,
                  std::vector<double> upper, const SolverConfig& cfg)
        : f0_(objective), g_(std::move(constraints)), lo_(std::move(lower)), hi_(std::move(upper)), cfg_(cfg) {
        n_ = lo_.size();
        free_index_.assign(n_, -1);
        for (std::size_t i = 0; i < n_; ++i) {
            if (lo_[i] < hi_[i]) {
                free_index_[i] = static_cast<int>(free_.size());
                free_.push_back(i);
                if (std::isfinite(lo_[i])) lo_free_.push_back(free_.size() - 1);
                if (std::isfinite(hi_[i])) hi_free_.push_back(free_.size() - 1);
            }
        }
        m_ = g_.size() + lo_free_.size() + hi_free_.size();
        free_pos_.push_back(free_positions(f0_));
        for (const auto* g : g_) free_pos_.push_back(free_positions(*g));
        free_local_.resize(free_pos_.size());
        free_local_[0].assign(f0_.support().size(), -1);
        for (std::size_t i = 0; i < g_.size(); ++i) free_local_[i + 1].assign(g_[i]->support().size(), -1);
        for (std::size_t f = 0; f < free_pos_.size(); ++f)
            for (const auto& [l, k] : free_pos_[f]) free_local_[f][static_cast<std::size_t>(l)] = k;
    }

    static constexpr double kMinSlack = 1e-12;

    std::size_t constraint_count() const noexcept { return m_; }

    /// Barrier weight whose central-path multipliers best cancel grad f0 at w.
    double central_weight(std::span<const double> w, double min_slack = 0.0) const {
        const auto nf = static_cast<Eigen::Index>(free_.size());
        Eigen::VectorXd g0 = Eigen::VectorXd::Zero(nf);
        Eigen::VectorXd gp = g0;
        scatter_grad(f0_, f0_.evaluate(w), 1.0, g0);
        for (const auto* g : g_) {
            const auto e = g->evaluate(w);
            scatter_grad(*g, e, 1.0 / std::max(-e.value, min_slack), gp);
        }
        for (std::size_t k : lo_free_) gp(static_cast<Eigen::Index>(k)) -= 1.0 / (w[free_[k]] - lo_[free_[k]]);
        for (std::size_t k : hi_free_) gp(static_cast<Eigen::Index>(k)) += 1.0 / (hi_[free_[k]] - w[free_[k]]);
        const double denom = g0.squaredNorm();
        if (!(denom > 0.0)) return cfg_.initial_barrier;
        const double t = -g0.dot(gp) / denom;
        const double tmax = static_cast<double>(std::max<std::size_t>(m_, 1)) / cfg_.tolerance;
        return std::clamp(std::isfinite(t) ? t : cfg_.initial_barrier, cfg_.initial_barrier, tmax);
    }

    /// \p w must lie strictly inside the box. Constraint slacks start at max(-g_i(w), min_slack), so \p w
    /// may violate constraints when min_slack > 0; multipliers start on the central path at weight \p t.
    IpResult run(std::vector<double> w, double t, const StopFn& stop = {}, const BoundFn& bound = {},
                 double min_slack = kMinSlack) const {
        IpResult r;
        for (std::size_t i = 0; i < n_; ++i)
            if (free_index_[i] < 0) w[i] = lo_[i];
        if (stop && stop(w)) {
            r.w = std::move(w);
            r.stopped_early = true;
            r.status = SolveStatus::optimal;
            return r;
        }
        const auto nf = static_cast<Eigen::Index>(free_.size());
        if (nf == 0 || m_ == 0) {
            // Every variable fixed, or nothing bounds the descent (these programs never pose the latter).
            r.w = std::move(w);
            r.status = nf == 0 ? SolveStatus::optimal : SolveStatus::max_iter;
            r.gap = 0.0;
            r.outer_objectives.push_back(f0_.value(r.w));
            return r;
        }

        Point cur = evaluate(w, r.evaluations);
        Duals d;
        d.slack.resize(g_.size());
        d.g.resize(g_.size());
        for (std::size_t i = 0; i < g_.size(); ++i) {
            d.slack[i] = std::max(-cur.g[i].value, min_slack);
            d.g[i] = 1.0 / (t * d.slack[i]);
        }
        d.lo.resize(lo_free_.size());
        for (std::size_t q = 0; q < lo_free_.size(); ++q) d.lo[q] = 1.0 / (t * lo_slack(cur.w, q));
        d.hi.resize(hi_free_.size());
        for (std::size_t q = 0; q < hi_free_.size(); ++q) d.hi[q] = 1.0 / (t * hi_slack(cur.w, q));

        const double m = static_cast<double>(m_);
        for (int it = 0; it < cfg_.max_iterations; ++it) {
            const double eta = surrogate_gap(cur, d);
            const Eigen::VectorXd rd = dual_residual(cur, d);
            const double rd_norm = rd.norm();
            const double rp_max = primal_residual_max(cur, d);
            r.gap = eta;
            r.outer_objectives.push_back(cur.f0.value);
            if (bound && rd_norm <= 1e-6 && bound(lagrangian_bound(cur, d), 0.0)) {
                r.certified_infeasible = true;
                r.last_bound = lagrangian_bound(cur, d);
                r.status = SolveStatus::infeasible;
                break;
            }
            if (eta <= cfg_.tolerance && rd_norm <= cfg_.tolerance && rp_max <= kPrimalFactor * cfg_.tolerance) {
                r.status = SolveStatus::optimal;
                r.last_bound = lagrangian_bound(cur, d);
                break;
            }
            t = std::max(t, cfg_.growth * m / eta);
            const double inv_t = 1.0 / t;

            // Reduced Newton system for the primal step; slacks and multipliers are eliminated.
            Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nf, nf);
            Eigen::VectorXd rhs = rd;
            if (f0_.term_count() > 0) accumulate(0, f0_.curvature(cur.w), 1.0, cur.f0, 0.0, H);
            for (std::size_t i = 0; i < g_.size(); ++i) {
                const auto& g = *g_[i];
                const double s = d.slack[i], lam = d.g[i];
                const double rc = lam * s - inv_t;
                const double rp = cur.g[i].value + s;
                scatter_grad(g, cur.g[i], (-rc + lam * rp) / s, rhs);
                accumulate(i + 1, g.term_count() > 0 ? g.curvature(cur.w) : LogConvexFn::Curvature{}, lam, cur.g[i],
                           lam / s, H);
            }
            for (std::size_t q = 0; q < lo_free_.size(); ++q) {
                const auto k = static_cast<Eigen::Index>(lo_free_[q]);
                const double s = lo_slack(cur.w, q);
                rhs(k) += d.lo[q] - inv_t / s;
                H(k, k) += d.lo[q] / s;
            }
            for (std::size_t q = 0; q < hi_free_.size(); ++q) {
                const auto k = static_cast<Eigen::Index>(hi_free_[q]);
                const double s = hi_slack(cur.w, q);
                rhs(k) -= d.hi[q] - inv_t / s;
                H(k, k) += d.hi[q] / s;
            }
            const Eigen::VectorXd dw = solve_newton(H, -rhs);

            Duals dd;
            dd.slack.resize(g_.size());
            dd.g.resize(g_.size());
            for (std::size_t i = 0; i < g_.size(); ++i) {
                const double s = d.slack[i], lam = d.g[i];
                dd.slack[i] = -(cur.g[i].value + s) - directional(*g_[i], cur.g[i], dw);
                dd.g[i] = (inv_t - lam * s - lam * dd.slack[i]) / s;
            }
            dd.lo.resize(lo_free_.size());
            for (std::size_t q = 0; q < lo_free_.size(); ++q) {
                const double s = lo_slack(cur.w, q);
                dd.lo[q] = -d.lo[q] * dw(static_cast<Eigen::Index>(lo_free_[q])) / s - d.lo[q] + inv_t / s;
            }
            dd.hi.resize(hi_free_.size());
            for (std::size_t q = 0; q < hi_free_.size(); ++q) {
                const double s = hi_slack(cur.w, q);
                dd.hi[q] = d.hi[q] * dw(static_cast<Eigen::Index>(hi_free_[q])) / s - d.hi[q] + inv_t / s;
            }

            // Largest step keeping slacks, multipliers and the box positive.
            double smax = 1.0;
            auto limit = [&smax](const std::vector<double>& v, const std::vector<double>& dv) {
                for (std::size_t i = 0; i < v.size(); ++i)
                    if (dv[i] < 0.0) smax = std::min(smax, -v[i] / dv[i]);
            };
            limit(d.slack, dd.slack);
            limit(d.g, dd.g);
            limit(d.lo, dd.lo);
            limit(d.hi, dd.hi);
            for (std::size_t q = 0; q < lo_free_.size(); ++q) {
                const double dk = dw(static_cast<Eigen::Index>(lo_free_[q]));
                if (dk < 0.0) smax = std::min(smax, lo_slack(cur.w, q) / -dk);
            }
            for (std::size_t q = 0; q < hi_free_.size(); ++q) {
                const double dk = dw(static_cast<Eigen::Index>(hi_free_[q]));
                if (dk > 0.0) smax = std::min(smax, hi_slack(cur.w, q) / dk);
            }
            double s = 0.99 * smax;

            const double res0 = residual_norm(cur, d, t, rd);
            // Wide-neighborhood safeguard: no complementarity product may fall far below the mean.
            const double floor0 = std::min(kCentrality, centrality(cur, d));
            bool accepted = false;
            std::vector<double> trial_w(cur.w);
            while (s > 1e-14) {
                for (std::size_t k = 0; k < free_.size(); ++k)
                    trial_w[free_[k]] = cur.w[free_[k]] + s * dw(static_cast<Eigen::Index>(k));
                Point next = evaluate(trial_w, r.evaluations);
                if (finite(next)) {
                    Duals nd = d.axpy(s, dd);
                    const double res = residual_norm(next, nd, t, dual_residual(next, nd));
                    if (res <= (1.0 - cfg_.ls_alpha * s) * res0 && centrality(next, nd) >= floor0) {
                        cur = std::move(next);
                        d = std::move(nd);
                        accepted = true;
                        break;
                    }
                }
                s *= cfg_.ls_beta;
            }
            ++r.iterations;
            if (!accepted) {
                // No representable progress: precision floor of the residual.
                if (eta <= cfg_.tolerance && rd_norm <= std::sqrt(cfg_.tolerance) && rp_max <= kPrimalFactor * cfg_.tolerance) {
                    r.status = SolveStatus::optimal;
                }
                break;
            }
            if (stop && stop(cur.w)) {
                r.stopped_early = true;
                r.status = SolveStatus::optimal;
                break;
            }
        }
        r.w = std::move(cur.w);
        return r;
    }

private:
    struct Point {
        std::vector<double> w;
        LogConvexFn::Eval f0;
        std::vector<LogConvexFn::Eval> g;
    };

    /// Constraint slacks (g_i + slack_i = 0 at convergence) and all multipliers.
    struct Duals {
        std::vector<double> slack, g, lo, hi;

        Duals axpy(double s, const Duals& d) const {
            Duals out = *this;
            for (std::size_t i = 0; i < slack.size(); ++i) out.slack[i] += s * d.slack[i];
            for (std::size_t i = 0; i < g.size(); ++i) out.g[i] += s * d.g[i];
            for (std::size_t i = 0; i < lo.size(); ++i) out.lo[i] += s * d.lo[i];
            for (std::size_t i = 0; i < hi.size(); ++i) out.hi[i] += s * d.hi[i];
            return out;
        }
    };

    static constexpr double kCentrality = 1e-3;
    static constexpr double kPrimalFactor = 1e-2;  // constraint residual tolerance relative to the gap tolerance

    double lo_slack(const std::vector<double>& w, std::size_t q) const {
        const std::size_t i = free_[lo_free_[q]];
        return w[i] - lo_[i];
    }

    double hi_slack(const std::vector<double>& w, std::size_t q) const {
        const std::size_t i = free_[hi_free_[q]];
        return hi_[i] - w[i];
    }

    Point evaluate(const std::vector<double>& w, long& evals) const {
        ++evals;
        Point p;
        p.w = w;
        p.f0 = f0_.evaluate(w);
        p.g.reserve(g_.size());
        for (const auto* g : g_) p.g.push_back(g->evaluate(w));
        return p;
    }

    static bool finite(const Point& p) {
        if (!std::isfinite(p.f0.value)) return false;
        for (const auto& e : p.g)
            if (!std::isfinite(e.value)) return false;
        return true;
    }

    double surrogate_gap(const Point& p, const Duals& d) const {
        double eta = 0.0;
        for (std::size_t i = 0; i < g_.size(); ++i) eta += d.g[i] * d.slack[i];
        for (std::size_t q = 0; q < lo_free_.size(); ++q) eta += d.lo[q] * lo_slack(p.w, q);
        for (std::size_t q = 0; q < hi_free_.size(); ++q) eta += d.hi[q] * hi_slack(p.w, q);
        return eta;
    }

    double primal_residual_max(const Point& p, const Duals& d) const {
        double worst = 0.0;
        for (std::size_t i = 0; i < g_.size(); ++i) worst = std::max(worst, std::abs(p.g[i].value + d.slack[i]));
        return worst;
    }

    /// f0 + sum lambda_i g_i - box terms: the Lagrangian, a lower bound on the optimum once grad_w vanishes.
    double lagrangian_bound(const Point& p, const Duals& d) const {
        double L = p.f0.value;
        for (std::size_t i = 0; i < g_.size(); ++i) L += d.g[i] * p.g[i].value;
        for (std::size_t q = 0; q < lo_free_.size(); ++q) L -= d.lo[q] * lo_slack(p.w, q);
        for (std::size_t q = 0; q < hi_free_.size(); ++q) L -= d.hi[q] * hi_slack(p.w, q);
        return L;
    }

    Eigen::VectorXd dual_residual(const Point& p, const Duals& d) const {
        Eigen::VectorXd rd = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(free_.size()));
        scatter_grad(f0_, p.f0, 1.0, rd);
        for (std::size_t i = 0; i < g_.size(); ++i) scatter_grad(*g_[i], p.g[i], d.g[i], rd);
        for (std::size_t q = 0; q < lo_free_.size(); ++q) rd(static_cast<Eigen::Index>(lo_free_[q])) -= d.lo[q];
        for (std::size_t q = 0; q < hi_free_.size(); ++q) rd(static_cast<Eigen::Index>(hi_free_[q])) += d.hi[q];
        return rd;
    }

    /// min_i lambda_i s_i over the mean product.
    double centrality(const Point& p, const Duals& d) const {
        double lo = std::numeric_limits<double>::infinity(), sum = 0.0;
        std::size_t count = 0;
        auto add = [&](double v) {
            lo = std::min(lo, v);
            sum += v;
            ++count;
        };
        for (std::size_t i = 0; i < g_.size(); ++i) add(d.g[i] * d.slack[i]);
        for (std::size_t q = 0; q < lo_free_.size(); ++q) add(d.lo[q] * lo_slack(p.w, q));
        for (std::size_t q = 0; q < hi_free_.size(); ++q) add(d.hi[q] * hi_slack(p.w, q));
        return count == 0 || sum <= 0.0 ? 1.0 : lo * static_cast<double>(count) / sum;
    }

    double residual_norm(const Point& p, const Duals& d, double t, const Eigen::VectorXd& rd) const {
        double sq = rd.squaredNorm();
        const double inv_t = 1.0 / t;
        for (std::size_t i = 0; i < g_.size(); ++i) {
            const double c = d.g[i] * d.slack[i] - inv_t;
            const double f = p.g[i].value + d.slack[i];
            sq += c * c + f * f;
        }
        for (std::size_t q = 0; q < lo_free_.size(); ++q) {
            const double c = d.lo[q] * lo_slack(p.w, q) - inv_t;
            sq += c * c;
        }
        for (std::size_t q = 0; q < hi_free_.size(); ++q) {
            const double c = d.hi[q] * hi_slack(p.w, q) - inv_t;
            sq += c * c;
        }
        return std::sqrt(sq);
    }

    double directional(const LogConvexFn& f, const LogConvexFn::Eval& e, const Eigen::VectorXd& dw) const {
        const auto& sup = f.support();
        double d = 0.0;
        for (std::size_t l = 0; l < sup.size(); ++l) {
            const int k = free_index_[static_cast<std::size_t>(sup[l])];
            if (k >= 0) d += e.grad[l] * dw(k);
        }
        return d;
    }

    void scatter_grad(const LogConvexFn& f, const LogConvexFn::Eval& e, double scale, Eigen::VectorXd& out) const {
        const auto& sup = f.support();
        for (std::size_t l = 0; l < sup.size(); ++l) {
            const int k = free_index_[static_cast<std::size_t>(sup[l])];
            if (k >= 0) out(k) += scale * e.grad[l];
        }
    }

    /// Lower triangle of H += scale_h * hess f + scale_g * grad grad^T over the free variables of
    /// function \p which (0 the objective, i + 1 constraint i).
    void accumulate(std::size_t which, const LogConvexFn::Curvature& c, double scale_h, const LogConvexFn::Eval& e,
                    double scale_g, Eigen::MatrixXd& H) const {
        const auto& pos = free_pos_[which];
        const auto& local = free_local_[which];
        const bool curved = !c.mean.empty();
        for (const auto& [a, b, v] : c.entries) {
            const int ka = local[static_cast<std::size_t>(a)], kb = local[static_cast<std::size_t>(b)];
            if (ka >= kb && kb >= 0) H(ka, kb) += scale_h * v;
        }
        // Two rank-one terms: -scale_h mean mean^T and scale_g grad grad^T.
        for (std::size_t j = 0; j < pos.size(); ++j) {
            const auto [lb, kb] = pos[j];
            const double mb = curved ? -scale_h * c.mean[static_cast<std::size_t>(lb)] : 0.0;
            const double gb = scale_g * e.grad[static_cast<std::size_t>(lb)];
            if (mb == 0.0 && gb == 0.0) continue;
            double* col = H.col(kb).data();
            for (std::size_t i = j; i < pos.size(); ++i) {
                const auto [la, ka] = pos[i];
                const auto l = static_cast<std::size_t>(la);
                col[ka] += gb * e.grad[l] + (curved ? mb * c.mean[l] : 0.0);
            }
        }
    }

    /// \p H holds its lower triangle only.
    static Eigen::VectorXd solve_newton(Eigen::MatrixXd& H, const Eigen::VectorXd& rhs) {
        Eigen::LLT<Eigen::MatrixXd> llt(H);
        if (llt.info() == Eigen::Success) return llt.solve(rhs);
        const double scale = std::max(H.diagonal().cwiseAbs().maxCoeff(), 1.0);
        for (double reg = 1e-12 * scale; reg < 1e6 * scale; reg *= 10.0) {
            Eigen::MatrixXd Hr = H;
            Hr.diagonal().array() += reg;
            Eigen::LLT<Eigen::MatrixXd> r(Hr);
            if (r.info() == Eigen::Success) return r.solve(rhs);
        }
        return rhs;
    }

    /// (local support index, free index) for each free variable of f, ascending in both.
    std::vector<std::pair<int, int>> free_positions(const LogConvexFn& f) const {
        std::vector<std::pair<int, int>> pos;
        const auto& sup = f.support();
        for (std::size_t l = 0; l < sup.size(); ++l) {
            const int k = free_index_[static_cast<std::size_t>(sup[l])];
            if (k >= 0) pos.emplace_back(static_cast<int>(l), k);
        }
        return pos;
    }

    const LogConvexFn& f0_;
    std::vector<const LogConvexFn*> g_;
    std::vector<double> lo_, hi_;
    SolverConfig cfg_;
    std::size_t n_ = 0;
    std::size_t m_ = 0;
    std::vector<std::size_t> free_;
    std::vector<int> free_index_;
    std::vector<std::size_t> lo_free_, hi_free_;  // positions in free_ with a finite bound
    std::vector<std::vector<std::pair<int, int>>> free_pos_;  // objective first, then constraints
    std::vector<std::vector<int>> free_local_;                 // local support index -> free index or -1
};

inline constexpr double kHintMargin = 1e-3;

/// A point strictly inside the box, preferring \p hint clamped away from the bounds.
inline std::vector<double> interior_start(const std::vector<double>& lo, const std::vector<double>& hi,
                                          const std::vector<double>* hint) {
    std::vector<double> w(lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i) {
        const bool has_lo = std::isfinite(lo[i]), has_hi = std::isfinite(hi[i]);
        // Hints closer than this to a bound would start with huge box multipliers.
        const double margin = has_lo && has_hi ? std::min(kHintMargin, 0.25 * (hi[i] - lo[i])) : kHintMargin;
        if (hint && std::isfinite((*hint)[i]) && lo[i] < hi[i]) {
            w[i] = std::clamp((*hint)[i], has_lo ? lo[i] + margin : -HUGE_VAL, has_hi ? hi[i] - margin : HUGE_VAL);
        } else if (lo[i] == hi[i]) {
            w[i] = lo[i];
        } else if (has_lo && has_hi) {
            w[i] = 0.5 * (lo[i] + hi[i]);
        } else if (has_lo) {
            w[i] = lo[i] + 1.0;
        } else if (has_hi) {
            w[i] = hi[i] - 1.0;
        } else {
            w[i] = 0.0;
        }
    }
    return w;
}

inline double max_value(const std::vector<const LogConvexFn*>& g, std::span<const double> w) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto* f : g) m = std::max(m, f->value(w));
    return m;
}

inline double max_value(const std::vector<LogConvexFn>& g, std::span<const double> w) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& f : g) m = std::max(m, f.value(w));
    return m;
}

/// Collects the constraints that depend on at least one variable. Returns
/// false when a variable-free one exceeds kFeasibilityRelTol.
inline bool split_constant(const std::vector<LogConvexFn>& all, std::vector<const LogConvexFn*>& active,
                           double& worst_constant) {
    worst_constant = -std::numeric_limits<double>::infinity();
    const std::vector<double> none;
    for (const auto& g : all) {
        if (g.support().empty()) {
            worst_constant = std::max(worst_constant, g.value(none));
        } else {
            active.push_back(&g);
        }
    }
    return !(worst_constant > kFeasibilityRelTol);
}

}  // namespace detail

/// Finds w with every g_i(w) <= -strict_margin strictly inside the box.
inline Phase1Result phase1(const ConvexProgram& program, const SolverConfig& config = {},
                           const std::vector<double>* hint = nullptr) {
    config.validate();
    const std::size_t n = program.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!(program.lower[i] <= program.upper[i])) throw UsageError("phase1: empty box");
    }
    Phase1Result res;
    std::vector<double> w0 = detail::interior_start(program.lower, program.upper, hint);
    std::vector<const LogConvexFn*> cons;
    double constant = 0.0;
    if (!detail::split_constant(program.constraints, cons, constant)) {
        res.w = std::move(w0);
        res.max_constraint = constant;
        res.lower_bound = constant;
        return res;
    }
    if (cons.empty()) {
        res.feasible = true;
        res.w = std::move(w0);
        res.max_constraint = detail::max_value(program.constraints, res.w);
        return res;
    }
    const double g0 = detail::max_value(cons, w0);
    res.evaluations = 1;
    if (g0 <= -config.strict_margin) {
        res.feasible = true;
        res.w = std::move(w0);
        res.max_constraint = detail::max_value(program.constraints, res.w);
        return res;
    }

    const int s_id = static_cast<int>(n);
    std::vector<LogConvexFn> aug;
    aug.reserve(cons.size());
    for (const auto* g : cons) aug.push_back(g->with_linear(s_id, -1.0));
    std::vector<const LogConvexFn*> aug_ptr;
    for (const auto& g : aug) aug_ptr.push_back(&g);
    const LogConvexFn level = LogConvexFn::affine({{s_id, 1.0}});
    std::vector<double> lo = program.lower, hi = program.upper;
    lo.push_back(-1.0);
    hi.push_back(std::numeric_limits<double>::infinity());
    w0.push_back(std::max(g0, -0.5) + 1.0);

    detail::InteriorPoint ip(level, std::move(aug_ptr), lo, hi, config);
    const double margin = config.strict_margin;
    auto stop = [&](std::span<const double> w) { return detail::max_value(cons, w.first(n)) <= -margin; };
    auto bound = [](double f, double gap) { return f - gap > 0.0; };
    auto r = ip.run(std::move(w0), config.initial_barrier, stop, bound);

    res.iterations = r.iterations;
    res.evaluations += r.evaluations;
    res.lower_bound = r.last_bound;
    res.w.assign(r.w.begin(), r.w.begin() + static_cast<long>(n));
    res.max_constraint = detail::max_value(program.constraints, res.w);
    res.feasible = r.stopped_early;
    return res;
}

inline Solution minimize(const ConvexProgram& program, const SolverConfig& config = {},
                         const std::optional<std::vector<double>>& warm_start = std::nullopt) {
    config.validate();
    const std::size_t n = program.size();
    if (program.upper.size() != n) throw UsageError("minimize: bound vectors differ in length");
    if (warm_start && warm_start->size() != n) throw UsageError("minimize: warm start has the wrong length");
    for (const auto& f : program.constraints) {
        for (const auto& [id, lb] : f.domain_lower()) {
            if (program.lower[static_cast<std::size_t>(id)] < lb) {
                throw PreconditionError("minimize: a cooling variable may leave its convexity domain");
            }
        }
    }

    Solution sol;
    std::vector<const LogConvexFn*> active;
    double constant = 0.0;
    if (!detail::split_constant(program.constraints, active, constant)) {
        sol.status = SolveStatus::infeasible;
        sol.w_star = detail::interior_start(program.lower, program.upper, warm_start ? &*warm_start : nullptr);
        sol.worst_slack = detail::max_value(program.constraints, sol.w_star);
        sol.objective = program.objective.value(sol.w_star);
        return sol;
    }
    detail::InteriorPoint ip(program.objective, std::move(active), program.lower, program.upper, config);
    if (warm_start) {
        // Infeasible start: slacks absorb the violation and Newton restores feasibility.
        std::vector<double> w = detail::interior_start(program.lower, program.upper, &*warm_start);
        auto r = ip.run(w, ip.central_weight(w, config.warm_slack), {}, {}, config.warm_slack);
        sol.iterations += r.iterations;
        sol.evaluations += r.evaluations;
        if (r.status == SolveStatus::optimal) {
            sol.status = r.status;
            sol.w_star = std::move(r.w);
            sol.objective = program.objective.value(sol.w_star);
            sol.worst_slack = detail::max_value(program.constraints, sol.w_star);
            sol.gap = r.gap;
            sol.outer_objectives = std::move(r.outer_objectives);
            return sol;
        }
    }
    std::vector<double> w;
    {
        auto p1 = phase1(program, config, warm_start ? &*warm_start : nullptr);
        sol.iterations += p1.iterations;
        sol.evaluations += p1.evaluations;
        if (!p1.feasible) {
            sol.status = SolveStatus::infeasible;
            sol.w_star = std::move(p1.w);
            sol.worst_slack = p1.max_constraint;
            sol.objective = program.objective.value(sol.w_star);
            return sol;
        }
        w = std::move(p1.w);
    }
    const double t = ip.central_weight(w);
    auto r = ip.run(std::move(w), t);
    sol.iterations += r.iterations;
    sol.evaluations += r.evaluations;
    sol.status = r.status;
    sol.w_star = std::move(r.w);
    sol.objective = program.objective.value(sol.w_star);
    sol.worst_slack = detail::max_value(program.constraints, sol.w_star);
    sol.gap = r.gap;
    sol.outer_objectives = std::move(r.outer_objectives);
    return sol;
}

}  // namespace dcmpc

#endif  // DCMPC_SOLVER_HPP
