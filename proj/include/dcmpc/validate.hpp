#ifndef DCMPC_VALIDATE_HPP
#define DCMPC_VALIDATE_HPP

/**
 * \file dcmpc/validate.hpp
 *
 * \brief Numerical checks of the mathematical facts the convex reformulation
 * rests on: the sign polynomial q, convexity of the cooling term, log-log
 * convexity of posynomials and the scenario reliability bound.
 *
 * The bound is compared against exact rational summation (Boost.Multiprecision).
 */

#include <dcmpc/format.hpp>
#include <dcmpc/posy.hpp>
#include <dcmpc/scenario.hpp>

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace dcmpc {

struct ClaimCheck {
    std::string name;
    bool pass = false;
    std::string measured;
};

namespace validate {

/// Real roots of q in [lo, hi]: sign changes on a uniform scan, refined by bisection.
inline std::vector<double> q_roots(double lo = -50.0, double hi = 50.0, double step = 1e-3) {
    std::vector<double> roots;
    double a = lo, fa = q_poly(a);
    const long n = std::lround((hi - lo) / step);
    for (long i = 1; i <= n; ++i) {
        const double b = lo + static_cast<double>(i) * step;
        const double fb = q_poly(b);
        if (fa == 0.0) {
            roots.push_back(a);
        } else if ((fa < 0.0) != (fb < 0.0) && fb != 0.0) {
            double l = a, r = b, fl = fa;
            for (int k = 0; k < 200 && r - l > 1e-13; ++k) {
                const double m = 0.5 * (l + r);
                const double fm = q_poly(m);
                if ((fm < 0.0) == (fl < 0.0)) {
                    l = m;
                    fl = fm;
                } else {
                    r = m;
                }
            }
            roots.push_back(0.5 * (l + r));
        }
        a = b;
        fa = fb;
    }
    return roots;
}

/// Central second difference of F(x) = log(1 + 1/CoP(e^x)).
inline double cooling_d2_fd(double x, double h = 1e-4) {
    return (cooling_log(x + h).value - 2.0 * cooling_log(x).value + cooling_log(x - h).value) / (h * h);
}

/// Exact binomial lower tail as a rational; eps is taken as the exact value of the double.
inline double bound_oracle(double epsilon, std::size_t N, long d) {
    using boost::multiprecision::cpp_int;
    using boost::multiprecision::cpp_rational;
    // Exact rational value of the double epsilon.
    int exp = 0;
    const double frac = std::frexp(epsilon, &exp);
    const auto mant = static_cast<std::int64_t>(std::ldexp(frac, 53));
    cpp_rational e(mant);
    const int shift = exp - 53;
    if (shift >= 0) {
        e *= cpp_rational(cpp_int(1) << shift);
    } else {
        e /= cpp_rational(cpp_int(1) << -shift);
    }
    const cpp_rational one_minus = 1 - e;
    cpp_rational sum = 0;
    cpp_int binom = 1;
    for (long i = 0; i <= d; ++i) {
        if (i > 0) binom = binom * (static_cast<long>(N) - i + 1) / i;
        cpp_rational term(binom);
        for (long k = 0; k < i; ++k) term *= e;
        for (long k = 0; k < static_cast<long>(N) - i; ++k) term *= one_minus;
        sum += term;
    }
    return static_cast<double>(sum);
}

inline double relative_error(double a, double b) {
    const double s = std::max(std::abs(a), std::abs(b));
    return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

}  // namespace validate

/// The full claim suite; every check reports its measured values.
inline std::vector<ClaimCheck> run_claims(std::uint64_t seed = 1) {
    std::vector<ClaimCheck> out;
    auto add = [&out](std::string name, bool pass, std::string measured) {
        out.push_back({std::move(name), pass, std::move(measured)});
    };

    {
        const auto q11 = q_poly_exact(11), q0 = q_poly_exact(0);
        add("q(11) exact", q11 == 37362464, "q(11) = " + std::to_string(q11));
        add("q(0) exact", q0 == -4173525, "q(0) = " + std::to_string(q0));
    }
    {
        const auto roots = validate::q_roots();
        const double want[] = {-10.99, -0.029, 10.94};
        bool ok = roots.size() == 3;
        std::string m = "roots:";
        for (double r : roots) m += " " + format_double(r);
        for (std::size_t i = 0; ok && i < 3; ++i) ok = std::abs(roots[i] - want[i]) <= 0.01;
        add("q real roots near -10.99, -0.029, 10.94", ok, m);
    }
    {
        double min_d2 = std::numeric_limits<double>::infinity(), worst_fd = 0.0;
        constexpr int n = 10000;
        for (int i = 0; i < n; ++i) {
            const double T = 11.0 + 29.0 * i / (n - 1);
            const double x = std::log(T);
            const double d2 = cooling_log(x).d2;
            min_d2 = std::min(min_d2, d2);
            worst_fd = std::max(worst_fd, validate::relative_error(d2, validate::cooling_d2_fd(x)));
        }
        add("F'' > 0 on [11, 40]", min_d2 > 0.0, "min F'' = " + format_double(min_d2));
        const double lo = cooling_log(std::log(10.9)).d2, hi = cooling_log(std::log(11.0)).d2;
        add("F'' changes sign in (10.9, 11.0)", lo < 0.0 && hi > 0.0,
            "F''(10.9) = " + format_double(lo) + ", F''(11.0) = " + format_double(hi));
        add("F'' analytic vs finite difference", worst_fd <= 1e-5, "max rel err = " + format_double(worst_fd));
    }
    {
        std::mt19937_64 gen(seed);
        std::uniform_real_distribution<double> coef(0.1, 10.0), ex(-2.0, 2.0), pt(-1.5, 1.5);
        constexpr int vars = 4, checks = 1000;
        int passed = 0;
        double worst = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < checks; ++c) {
            Posynomial p;
            const int terms = 1 + static_cast<int>(gen() % 5);
            for (int k = 0; k < terms; ++k) {
                Exponents e;
                for (int v = 0; v < vars; ++v) e.emplace_back(v, ex(gen));
                p.add(Monomial(coef(gen), std::move(e)));
            }
            std::vector<double> a(vars), b(vars), mid(vars);
            for (int v = 0; v < vars; ++v) {
                a[v] = pt(gen);
                b[v] = pt(gen);
                mid[v] = 0.5 * (a[v] + b[v]);
            }
            const double fa = posy_log_eval(p, a).value, fb = posy_log_eval(p, b).value;
            const double fm = posy_log_eval(p, mid).value;
            const double gap = fm - 0.5 * (fa + fb);
            worst = std::max(worst, gap);
            if (gap <= 1e-12 * (1.0 + std::abs(fa) + std::abs(fb))) ++passed;
        }
        add("posynomial log-log midpoint convexity", passed == checks,
            std::to_string(passed) + "/" + std::to_string(checks) + ", max gap = " + format_double(worst));
    }
    {
        const auto b = satisfaction_bound(0.2, 100, 5, 3);
        const double oracle = validate::bound_oracle(0.2, 100, 18);
        const double err = validate::relative_error(b.value, oracle);
        add("reliability bound vs exact summation", !b.vacuous && err <= 1e-12,
            "bound = " + format_double(b.value) + ", exact = " + format_double(oracle) + ", rel err = " + format_double(err));
        const double b0 = satisfaction_bound(0.0, 100, 5, 3).value, b1 = satisfaction_bound(1.0, 100, 5, 3).value;
        add("reliability bound endpoints", b0 == 1.0 && b1 == 0.0,
            "bound(0) = " + format_double(b0) + ", bound(1) = " + format_double(b1));
        bool mono = true;
        double prev = 2.0;
        for (int i = 0; i < 100; ++i) {
            const double v = satisfaction_bound(i / 99.0, 100, 5, 3).value;
            mono = mono && v <= prev;
            prev = v;
        }
        add("reliability bound nonincreasing in epsilon", mono, "100-point grid on [0, 1]");
    }
    return out;
}

/// Prints one line per check; returns true when all pass.
inline bool report_claims(const std::vector<ClaimCheck>& checks, std::ostream& os) {
    bool all = true;
    for (const auto& c : checks) {
        os << (c.pass ? "PASS  " : "FAIL  ") << c.name << "  [" << c.measured << "]\n";
        all = all && c.pass;
    }
    return all;
}

}  // namespace dcmpc

#endif  // DCMPC_VALIDATE_HPP
