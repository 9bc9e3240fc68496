#ifndef DCMPC_POSY_HPP
#define DCMPC_POSY_HPP

/**
 * \file dcmpc/posy.hpp
 *
 * \brief Monomials, posynomials and log-space convex functions.
 *
 * A posynomial f(v) = sum_k c_k prod_i v_i^{a_ki} becomes convex after the
 * change of variables v = exp(w): log f(exp w) is a log-sum-exp of affine
 * functions. LogConvexFn extends that form with an optional cooling factor
 * 1 + 1/CoP(exp w_k) per term, which is log-convex for w_k >= log 11.
 */

#include <dcmpc/errors.hpp>
#include <dcmpc/layout.hpp>
#include <dcmpc/model.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <utility>
#include <tuple>
#include <vector>

namespace dcmpc {

/// Sparse exponent list: (variable id, exponent), sorted by id, ids unique.
using Exponents = std::vector<std::pair<int, double>>;

namespace detail {

inline Exponents normalize(Exponents e) {
    std::sort(e.begin(), e.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    Exponents out;
    for (const auto& [id, a] : e) {
        if (id < 0) throw UsageError("negative variable id");
        if (!out.empty() && out.back().first == id) {
            out.back().second += a;
        } else {
            out.emplace_back(id, a);
        }
    }
    std::erase_if(out, [](const auto& p) { return p.second == 0.0; });
    return out;
}

}  // namespace detail

class Monomial {
public:
    explicit Monomial(double coeff, Exponents exponents = {})
        : coeff_(coeff), exponents_(detail::normalize(std::move(exponents))) {
        if (!(coeff > 0.0) || !std::isfinite(coeff)) {
            throw DomainError("monomial coefficient must be positive and finite");
        }
    }

    double coeff() const noexcept { return coeff_; }
    const Exponents& exponents() const noexcept { return exponents_; }

    double eval(std::span<const double> v) const {
        double r = coeff_;
        for (const auto& [id, a] : exponents_) {
            r *= std::pow(v[static_cast<std::size_t>(id)], a);
        }
        return r;
    }

private:
    double coeff_;
    Exponents exponents_;
};

class Posynomial {
public:
    Posynomial() = default;
    explicit Posynomial(std::vector<Monomial> terms) : terms_(std::move(terms)) {}

    Posynomial& add(const Monomial& m) {
        terms_.push_back(m);
        return *this;
    }

    /// Merges terms with identical exponent vectors.
    Posynomial& collect() {
        std::map<Exponents, double> acc;
        std::vector<Exponents> order;
        for (const auto& t : terms_) {
            auto [it, fresh] = acc.try_emplace(t.exponents(), 0.0);
            if (fresh) order.push_back(t.exponents());
            it->second += t.coeff();
        }
        std::vector<Monomial> merged;
        merged.reserve(order.size());
        for (auto& e : order) merged.emplace_back(acc[e], e);
        terms_ = std::move(merged);
        return *this;
    }

    const std::vector<Monomial>& terms() const noexcept { return terms_; }
    bool empty() const noexcept { return terms_.empty(); }

    /// One past the largest variable id referenced.
    std::size_t arity() const noexcept {
        std::size_t n = 0;
        for (const auto& t : terms_)
            for (const auto& [id, a] : t.exponents()) n = std::max(n, static_cast<std::size_t>(id) + 1);
        return n;
    }

private:
    std::vector<Monomial> terms_;
};

inline double posy_eval(const Posynomial& p, std::span<const double> v) {
    if (p.empty()) throw UsageError("posynomial has no terms");
    if (v.size() < p.arity()) throw UsageError("posy_eval: point has too few coordinates");
    for (double x : v) {
        if (!(x > 0.0)) throw DomainError("posynomials are evaluated at positive points only");
    }
    double s = 0.0;
    for (const auto& t : p.terms()) s += t.eval(v);
    return s;
}

struct LogEval {
    double value = 0.0;
    std::vector<double> grad;
};

/// log p(exp w) and its gradient, the softmax-weighted mean of exponent vectors.
inline LogEval posy_log_eval(const Posynomial& p, std::span<const double> w) {
    if (p.empty()) throw UsageError("posynomial has no terms");
    if (w.size() < p.arity()) throw UsageError("posy_log_eval: point has too few coordinates");
    std::vector<double> z;
    z.reserve(p.terms().size());
    double zmax = -std::numeric_limits<double>::infinity();
    for (const auto& t : p.terms()) {
        double zi = std::log(t.coeff());
        for (const auto& [id, a] : t.exponents()) zi += a * w[static_cast<std::size_t>(id)];
        z.push_back(zi);
        zmax = std::max(zmax, zi);
    }
    double s = 0.0;
    for (double& zi : z) {
        zi = std::exp(zi - zmax);
        s += zi;
    }
    LogEval out{zmax + std::log(s), std::vector<double>(w.size(), 0.0)};
    for (std::size_t k = 0; k < z.size(); ++k) {
        const double weight = z[k] / s;
        for (const auto& [id, a] : p.terms()[k].exponents()) out.grad[static_cast<std::size_t>(id)] += weight * a;
    }
    return out;
}

/// V(xi) = sum_i xi_i/xi_{i+1} + xi_{i+1}/xi_i; minimum 2(n-1) at constant xi.
inline double fluctuation_penalty(std::span<const double> xi) {
    if (xi.size() < 2) throw UsageError("fluctuation penalty needs at least two entries");
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < xi.size(); ++i) {
        if (!(xi[i] > 0.0) || !(xi[i + 1] > 0.0)) throw DomainError("fluctuation penalty needs positive entries");
        s += xi[i] / xi[i + 1] + xi[i + 1] / xi[i];
    }
    return s;
}

/// weight * V over the variables ids (empty when weight is zero or fewer than two ids).
inline Posynomial penalty_posynomial(std::span<const int> ids, double weight) {
    Posynomial p;
    if (weight <= 0.0 || ids.size() < 2) return p;
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
        p.add(Monomial(weight, {{ids[i], 1.0}, {ids[i + 1], -1.0}}));
        p.add(Monomial(weight, {{ids[i], -1.0}, {ids[i + 1], 1.0}}));
    }
    return p;
}

/// F(x) = log(1 + 1/CoP(e^x)) with its first two derivatives.
struct CoolingLog {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

inline CoolingLog cooling_log(double x) noexcept {
    constexpr double k2 = 0.0068, k1 = 0.0008, k0 = 0.458;
    const double T = std::exp(x);
    const double c = k2 * T * T + k1 * T + k0;
    const double c1 = 2.0 * k2 * T * T + k1 * T;  // dc/dx
    const double c2 = 4.0 * k2 * T * T + k1 * T;  // d2c/dx2
    const double cp = c + 1.0;
    CoolingLog f;
    f.value = std::log1p(1.0 / c);
    f.d1 = c1 / cp - c1 / c;
    f.d2 = (c2 * cp - c1 * c1) / (cp * cp) - (c2 * c - c1 * c1) / (c * c);
    return f;
}

inline double cooling_factor(double T) noexcept { return 1.0 + 1.0 / cop(T); }

/// Integer coefficients of q, highest degree first; F''(log T) has the sign of q(T).
inline constexpr std::array<std::int64_t, 6> kQCoefficients{9826, 2023, 136, -81426, -141899850, -4173525};

inline std::int64_t q_poly_exact(std::int64_t T) noexcept {
    std::int64_t r = 0;
    for (auto c : kQCoefficients) r = r * T + c;
    return r;
}

inline double q_poly(double T) noexcept {
    double r = 0.0;
    for (auto c : kQCoefficients) r = r * T + static_cast<double>(c);
    return r;
}

/// CPU temperature of cluster j at time t as a posynomial in the window inputs,
/// obtained by unrolling the thermal recursion from the measured state at tau.
/// loads[j][k] is the predicted load at tau + k.
inline Posynomial cpu_temp_posynomial(int j, long t, const VariableLayout& layout, const LoadMatrix& loads,
                                      const SystemState& state, const PlantParams& params) {
    const long tau = layout.tau;
    if (t < tau || t > tau + layout.horizon) throw UsageError("cpu_temp_posynomial: t outside the window");
    if (state.t != tau) throw UsageError("cpu_temp_posynomial: state time does not match the window start");
    if (j < 0 || static_cast<std::size_t>(j) >= params.cluster_count()) throw UsageError("cluster index out of range");
    if (loads.size() <= static_cast<std::size_t>(j) || loads[j].size() < static_cast<std::size_t>(t - tau)) {
        throw UsageError("cpu_temp_posynomial: loads do not cover the window");
    }
    const auto& c = params.clusters[static_cast<std::size_t>(j)];
    const auto& pm = params.power;
    const double T0 = state.t_cpu[static_cast<std::size_t>(j)];
    if (!(T0 > 0.0)) throw DomainError("initial CPU temperature must be positive");

    Posynomial p;
    double constant = std::pow(c.beta, static_cast<double>(t - tau)) * T0;
    for (long s = tau; s < t; ++s) {
        const double w = std::pow(c.beta, static_cast<double>(t - 1 - s));
        const double L = loads[static_cast<std::size_t>(j)][static_cast<std::size_t>(s - tau)];
        p.add(Monomial(c.alpha * w, {{layout.x(s), 1.0}}));
        if (L > 0.0) p.add(Monomial(pm.a1 * c.sigma * w * L, {{layout.y(j, s), -1.0}}));
        constant += pm.a2 * c.sigma * w;
    }
    p.add(Monomial(constant));
    return p.collect();
}

/// One generalized monomial: exp(log_coeff + a . w) * (1 + 1/CoP(exp w_k)) when
/// cool_var = k >= 0.
struct LogTerm {
    double log_coeff = 0.0;
    Exponents exponents;
    int cool_var = -1;
};

/**
 * g(w) = log sum_i exp(log c_i + a_i . w + F(w_{k_i})) + b . w + b0, or just the
 * affine part when there are no terms. Immutable once built; evaluation is pure.
 */
class LogConvexFn {
public:
    struct Eval {
        double value = 0.0;
        std::vector<double> grad;  ///< over support()
    };

    LogConvexFn() = default;

    LogConvexFn(std::vector<LogTerm> terms, Exponents linear, double offset)
        : offset_(offset) {
        std::vector<int> ids;
        for (auto& t : terms) {
            t.exponents = detail::normalize(std::move(t.exponents));
            for (const auto& [id, a] : t.exponents) ids.push_back(id);
            if (t.cool_var >= 0) ids.push_back(t.cool_var);
        }
        linear = detail::normalize(std::move(linear));
        for (const auto& [id, b] : linear) ids.push_back(id);
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        support_ = std::move(ids);

        auto local = [this](int id) {
            return static_cast<int>(std::lower_bound(support_.begin(), support_.end(), id) - support_.begin());
        };
        for (const auto& t : terms) {
            Term lt;
            lt.log_coeff = t.log_coeff;
            for (const auto& [id, a] : t.exponents) lt.exps.emplace_back(local(id), a);
            lt.cool = t.cool_var >= 0 ? local(t.cool_var) : -1;
            if (t.cool_var >= 0) {
                domain_lower_.emplace_back(t.cool_var, std::log(11.0));
            }
            terms_.push_back(std::move(lt));
        }
        for (const auto& [id, b] : linear) linear_.emplace_back(local(id), b);
        std::sort(domain_lower_.begin(), domain_lower_.end());
        domain_lower_.erase(std::unique(domain_lower_.begin(), domain_lower_.end()), domain_lower_.end());
    }

    static LogConvexFn affine(Exponents linear, double offset = 0.0) { return {{}, std::move(linear), offset}; }

    /// log p(exp w) + b . w + offset.
    static LogConvexFn log_posynomial(const Posynomial& p, Exponents linear = {}, double offset = 0.0) {
        std::vector<LogTerm> terms;
        for (const auto& m : p.terms()) terms.push_back({std::log(m.coeff()), m.exponents(), -1});
        return {std::move(terms), std::move(linear), offset};
    }

    /// Same terms plus an extra linear coefficient on one variable.
    LogConvexFn with_linear(int id, double coeff) const {
        std::vector<LogTerm> terms;
        for (const auto& t : terms_) {
            LogTerm g{t.log_coeff, {}, t.cool >= 0 ? support_[static_cast<std::size_t>(t.cool)] : -1};
            for (const auto& [l, a] : t.exps) g.exponents.emplace_back(support_[static_cast<std::size_t>(l)], a);
            terms.push_back(std::move(g));
        }
        Exponents lin;
        for (const auto& [l, b] : linear_) lin.emplace_back(support_[static_cast<std::size_t>(l)], b);
        lin.emplace_back(id, coeff);
        return {std::move(terms), std::move(lin), offset_};
    }

    const std::vector<int>& support() const noexcept { return support_; }
    std::size_t term_count() const noexcept { return terms_.size(); }

    /// Variables whose value must stay above a bound for convexity (cooling inputs).
    const std::vector<std::pair<int, double>>& domain_lower() const noexcept { return domain_lower_; }

    Eval evaluate(std::span<const double> w) const {
        Eval e;
        e.grad.assign(support_.size(), 0.0);
        std::vector<double> wl = gather(w);
        double val = offset_;
        for (const auto& [l, b] : linear_) {
            val += b * wl[static_cast<std::size_t>(l)];
            e.grad[static_cast<std::size_t>(l)] += b;
        }
        if (!terms_.empty()) {
            Scratch s = softmax(wl);
            val += s.lse;
            for (std::size_t i = 0; i < terms_.size(); ++i) {
                const auto& t = terms_[i];
                const double p = s.weight[i];
                for (const auto& [l, a] : t.exps) e.grad[static_cast<std::size_t>(l)] += p * a;
                if (t.cool >= 0) e.grad[static_cast<std::size_t>(t.cool)] += p * s.cool[i].d1;
            }
        }
        e.value = val;
        return e;
    }

    double value(std::span<const double> w) const { return evaluate(w).value; }

    /// Dense gradient of length n.
    std::vector<double> gradient(std::span<const double> w) const {
        const auto e = evaluate(w);
        std::vector<double> g(w.size(), 0.0);
        for (std::size_t l = 0; l < support_.size(); ++l) g[static_cast<std::size_t>(support_[l])] = e.grad[l];
        return g;
    }

    /// Hessian in factored form over local support indices: sum of entries minus mean mean^T.
    struct Curvature {
        std::vector<double> mean;                            ///< softmax-weighted exponent vector
        std::vector<std::tuple<int, int, double>> entries;  ///< (row, col, value), both orders present
    };

    Curvature curvature(std::span<const double> w) const {
        Curvature c;
        c.mean.assign(support_.size(), 0.0);
        if (terms_.empty()) return c;
        std::vector<double> wl = gather(w);
        Scratch s = softmax(wl);
        std::vector<std::pair<int, double>> b;
        for (std::size_t i = 0; i < terms_.size(); ++i) {
            const auto& t = terms_[i];
            const double p = s.weight[i];
            b.assign(t.exps.begin(), t.exps.end());
            if (t.cool >= 0) {
                auto it = std::find_if(b.begin(), b.end(), [&](const auto& q) { return q.first == t.cool; });
                if (it != b.end()) {
                    it->second += s.cool[i].d1;
                } else {
                    b.emplace_back(t.cool, s.cool[i].d1);
                }
                c.entries.emplace_back(t.cool, t.cool, p * s.cool[i].d2);
            }
            for (const auto& [l1, v1] : b) {
                c.mean[static_cast<std::size_t>(l1)] += p * v1;
                for (const auto& [l2, v2] : b) c.entries.emplace_back(l1, l2, p * v1 * v2);
            }
        }
        return c;
    }

    /// Hessian restricted to support() x support().
    Eigen::MatrixXd hessian(std::span<const double> w) const {
        const auto n = static_cast<Eigen::Index>(support_.size());
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
        if (terms_.empty()) return H;
        const Curvature c = curvature(w);
        for (const auto& [a, b, v] : c.entries) H(a, b) += v;
        const Eigen::Map<const Eigen::VectorXd> m(c.mean.data(), n);
        H.noalias() -= m * m.transpose();
        return H;
    }

private:
    struct Term {
        double log_coeff = 0.0;
        std::vector<std::pair<int, double>> exps;  // local indices
        int cool = -1;
    };

    struct Scratch {
        double lse = 0.0;
        std::vector<double> weight;
        std::vector<CoolingLog> cool;
    };

    std::vector<double> gather(std::span<const double> w) const {
        std::vector<double> wl(support_.size());
        for (std::size_t l = 0; l < support_.size(); ++l) {
            const auto id = static_cast<std::size_t>(support_[l]);
            if (id >= w.size()) throw UsageError("LogConvexFn: point has too few coordinates");
            wl[l] = w[id];
        }
        return wl;
    }

    // Max-shifted exponential sum.
    Scratch softmax(const std::vector<double>& wl) const {
        Scratch s;
        s.weight.resize(terms_.size());
        s.cool.resize(terms_.size());
        double zmax = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < terms_.size(); ++i) {
            const auto& t = terms_[i];
            double z = t.log_coeff;
            for (const auto& [l, a] : t.exps) z += a * wl[static_cast<std::size_t>(l)];
            if (t.cool >= 0) {
                s.cool[i] = cooling_log(wl[static_cast<std::size_t>(t.cool)]);
                z += s.cool[i].value;
            }
            s.weight[i] = z;
            zmax = std::max(zmax, z);
        }
        double sum = 0.0;
        for (double& z : s.weight) {
            z = std::exp(z - zmax);
            sum += z;
        }
        for (double& z : s.weight) z /= sum;
        s.lse = zmax + std::log(sum);
        return s;
    }

    std::vector<int> support_;
    std::vector<Term> terms_;
    std::vector<std::pair<int, double>> linear_;
    std::vector<std::pair<int, double>> domain_lower_;
    double offset_ = 0.0;
};

}  // namespace dcmpc

#endif  // DCMPC_POSY_HPP
