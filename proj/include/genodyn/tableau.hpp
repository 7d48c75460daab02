#pragma once

#include <optional>
#include <string>
#include <vector>

#include "genodyn/core.hpp"

namespace genodyn {

/// Coefficients of an embedded explicit Runge-Kutta pair. `b` carries the
/// higher-order weights that propagate the solution, `b_hat` the embedded
/// lower-order weights used for the error estimate.
template <typename T>
struct ButcherTableau {
    std::string name;
    int stages = 0;
    Mat<T> a;        // strictly lower triangular, stages x stages
    Vec<T> b;
    Vec<T> b_hat;
    Vec<T> c;
    int order = 0;
    int embedded_order = 0;
    bool fsal = false;  // last stage of an accepted step equals the first stage of the next

    /// Throws std::invalid_argument if any structural invariant is violated.
    /// Row-sum and weight-sum consistency are enforced at 1e-12 (scaled down
    /// automatically for scalars wider than their own epsilon allows).
    void validate() const {
        const T tol = std::max(T(1e-12), T(64) * machine_epsilon<T>());
        const auto s = static_cast<std::size_t>(stages);
        if (stages <= 0 || a.rows() != s || a.cols() != s || b.size() != s ||
            b_hat.size() != s || c.size() != s)
            throw std::invalid_argument(name + ": inconsistent tableau dimensions");
        if (!(order > embedded_order && embedded_order >= 1))
            throw std::invalid_argument(name + ": requires order > embedded_order >= 1");
        for (std::size_t i = 0; i < s; ++i)
            for (std::size_t j = i; j < s; ++j)
                if (a(i, j) != T(0))
                    throw std::invalid_argument(name + ": a is not strictly lower triangular");
        for (std::size_t i = 0; i < s; ++i) {
            T row = T(0);
            for (std::size_t j = 0; j < i; ++j) row += a(i, j);
            if (std::abs(row - c[i]) > tol)
                throw std::invalid_argument(name + ": row sum != c");
        }
        T sb = T(0), sbh = T(0);
        for (std::size_t i = 0; i < s; ++i) {
            sb += b[i];
            sbh += b_hat[i];
        }
        if (std::abs(sb - T(1)) > tol || std::abs(sbh - T(1)) > tol)
            throw std::invalid_argument(name + ": weights do not sum to one");
    }
};

/// One rooted-tree order condition evaluated for a tableau.
template <typename T>
struct OrderConditionResidual {
    std::string label;
    int order = 0;
    T residual_b = T(0);
    std::optional<T> residual_b_hat;  // absent when the condition exceeds embedded_order
};

namespace detail {

template <typename T>
Vec<T> apply_a(const ButcherTableau<T>& tbl, const Vec<T>& v) {
    const auto s = static_cast<std::size_t>(tbl.stages);
    Vec<T> out(s, T(0));
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < i; ++j) out[i] += tbl.a(i, j) * v[j];
    return out;
}

template <typename T>
T weight_dot(const Vec<T>& w, const Vec<T>& v) {
    T s = T(0);
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * v[i];
    return s;
}

}  // namespace detail

/// Evaluates the eight rooted-tree order conditions through order `up_to`
/// (1 <= up_to <= 4) for b, and for b_hat up to min(up_to, embedded_order).
/// Residuals are returned raw; the caller decides the pass threshold.
/// Conditions of order five and above are validated empirically through
/// convergence-slope measurements instead (see estimate_convergence_order).
template <typename T>
std::vector<OrderConditionResidual<T>> verify_order_conditions(const ButcherTableau<T>& tbl,
                                                               int up_to) {
    if (up_to < 1 || up_to > 4)
        throw std::invalid_argument("verify_order_conditions: up_to must be in 1..4");
    const auto s = static_cast<std::size_t>(tbl.stages);
    Vec<T> one(s, T(1));
    Vec<T> c = tbl.c;
    Vec<T> c2(s), c3(s);
    for (std::size_t i = 0; i < s; ++i) {
        c2[i] = c[i] * c[i];
        c3[i] = c2[i] * c[i];
    }
    const Vec<T> ac = detail::apply_a(tbl, c);
    Vec<T> c_ac(s);
    for (std::size_t i = 0; i < s; ++i) c_ac[i] = c[i] * ac[i];
    const Vec<T> ac2 = detail::apply_a(tbl, c2);
    const Vec<T> aac = detail::apply_a(tbl, ac);

    struct Cond {
        const char* label;
        int order;
        const Vec<T>* phi;
        T target;
    };
    const Cond conds[] = {
        {"sum(b) = 1", 1, &one, T(1)},
        {"b.c = 1/2", 2, &c, T(1) / T(2)},
        {"b.c^2 = 1/3", 3, &c2, T(1) / T(3)},
        {"b.(A c) = 1/6", 3, &ac, T(1) / T(6)},
        {"b.c^3 = 1/4", 4, &c3, T(1) / T(4)},
        {"b.(c*A c) = 1/8", 4, &c_ac, T(1) / T(8)},
        {"b.(A c^2) = 1/12", 4, &ac2, T(1) / T(12)},
        {"b.(A A c) = 1/24", 4, &aac, T(1) / T(24)},
    };

    std::vector<OrderConditionResidual<T>> out;
    for (const Cond& cond : conds) {
        if (cond.order > up_to) continue;
        OrderConditionResidual<T> r;
        r.label = cond.label;
        r.order = cond.order;
        r.residual_b = detail::weight_dot(tbl.b, *cond.phi) - cond.target;
        if (cond.order <= tbl.embedded_order)
            r.residual_b_hat = detail::weight_dot(tbl.b_hat, *cond.phi) - cond.target;
        out.push_back(std::move(r));
    }
    return out;
}

/// 5(4) pair of Tsitouras, 7 stages, FSAL. Coefficients carried at extended
/// precision and rounded to the requested scalar.
template <typename T>
ButcherTableau<T> tableau_tsit5() {
    ButcherTableau<T> t;
    t.name = "tsit5";
    t.stages = 7;
    t.order = 5;
    t.embedded_order = 4;
    t.fsal = true;
    t.a = Mat<T>(7, 7);
    t.b.resize(7);
    t.b_hat.resize(7);
    t.c.resize(7);

    const long double a_coef[7][7] = {
        {0.0L, 0, 0, 0, 0, 0, 0},
        {0.161L, 0, 0, 0, 0, 0, 0},
        {-0.008480655492356989L, 0.335480655492357L, 0, 0, 0, 0, 0},
        {2.8971530571054935L, -6.359448489975075L, 4.3622954328695815L, 0, 0, 0, 0},
        {5.325864828439257L, -11.748883564062828L, 7.4955393428898365L, -0.09249506636175525L, 0,
         0, 0},
        {5.86145544294642L, -12.92096931784711L, 8.159367898576159L, -0.071584973281401L,
         -0.028269050394068383L, 0, 0},
        {0.09646076681806523L, 0.01L, 0.4798896504144996L, 1.379008574103742L,
         -3.290069515436081L, 2.324710524099774L, 0},
    };
    const long double b_coef[7] = {0.09646076681806523L, 0.01L, 0.4798896504144996L,
                                   1.379008574103742L,   -3.290069515436081L,
                                   2.324710524099774L,   0.0L};
    // Error-estimator differences b - b_hat as published; b_hat follows.
    const long double btilde[7] = {-0.00178001105222577714L, -0.0008164344596567469L,
                                   0.007880878010261995L,    -0.1447110071732629L,
                                   0.5823571654525552L,      -0.45808210592918697L,
                                   0.015151515151515152L};
    const long double c_coef[7] = {0.0L, 0.161L, 0.327L, 0.9L, 0.9800255409045097L, 1.0L, 1.0L};

    for (int i = 0; i < 7; ++i) {
        for (int j = 0; j < i; ++j) t.a(i, j) = static_cast<T>(a_coef[i][j]);
        t.b[i] = static_cast<T>(b_coef[i]);
        t.b_hat[i] = static_cast<T>(b_coef[i] - btilde[i]);
        t.c[i] = static_cast<T>(c_coef[i]);
    }
    t.validate();
    return t;
}

/// Classic 5(4) pair of Dormand and Prince (the ode45 method), 7 stages, FSAL.
template <typename T>
ButcherTableau<T> tableau_dp5() {
    ButcherTableau<T> t;
    t.name = "dp5";
    t.stages = 7;
    t.order = 5;
    t.embedded_order = 4;
    t.fsal = true;
    t.a = Mat<T>(7, 7);
    auto frac = [](long long n, long long d) { return T(n) / T(d); };

    t.a(1, 0) = frac(1, 5);
    t.a(2, 0) = frac(3, 40);
    t.a(2, 1) = frac(9, 40);
    t.a(3, 0) = frac(44, 45);
    t.a(3, 1) = frac(-56, 15);
    t.a(3, 2) = frac(32, 9);
    t.a(4, 0) = frac(19372, 6561);
    t.a(4, 1) = frac(-25360, 2187);
    t.a(4, 2) = frac(64448, 6561);
    t.a(4, 3) = frac(-212, 729);
    t.a(5, 0) = frac(9017, 3168);
    t.a(5, 1) = frac(-355, 33);
    t.a(5, 2) = frac(46732, 5247);
    t.a(5, 3) = frac(49, 176);
    t.a(5, 4) = frac(-5103, 18656);
    t.a(6, 0) = frac(35, 384);
    t.a(6, 2) = frac(500, 1113);
    t.a(6, 3) = frac(125, 192);
    t.a(6, 4) = frac(-2187, 6784);
    t.a(6, 5) = frac(11, 84);

    t.b = {frac(35, 384), T(0), frac(500, 1113), frac(125, 192), frac(-2187, 6784), frac(11, 84),
           T(0)};
    t.b_hat = {frac(5179, 57600),    T(0),           frac(7571, 16695), frac(393, 640),
               frac(-92097, 339200), frac(187, 2100), frac(1, 40)};
    t.c = {T(0), frac(1, 5), frac(3, 10), frac(4, 5), frac(8, 9), T(1), T(1)};
    t.validate();
    return t;
}

/// Verner's classic 6(5) pair, 8 stages, not FSAL.
template <typename T>
ButcherTableau<T> tableau_vern6() {
    ButcherTableau<T> t;
    t.name = "vern6";
    t.stages = 8;
    t.order = 6;
    t.embedded_order = 5;
    t.fsal = false;
    t.a = Mat<T>(8, 8);
    auto frac = [](long long n, long long d) { return T(n) / T(d); };

    t.a(1, 0) = frac(1, 6);
    t.a(2, 0) = frac(4, 75);
    t.a(2, 1) = frac(16, 75);
    t.a(3, 0) = frac(5, 6);
    t.a(3, 1) = frac(-8, 3);
    t.a(3, 2) = frac(5, 2);
    t.a(4, 0) = frac(-165, 64);
    t.a(4, 1) = frac(55, 6);
    t.a(4, 2) = frac(-425, 64);
    t.a(4, 3) = frac(85, 96);
    t.a(5, 0) = frac(12, 5);
    t.a(5, 1) = frac(-8, 1);
    t.a(5, 2) = frac(4015, 612);
    t.a(5, 3) = frac(-11, 36);
    t.a(5, 4) = frac(88, 255);
    t.a(6, 0) = frac(-8263, 15000);
    t.a(6, 1) = frac(124, 75);
    t.a(6, 2) = frac(-643, 680);
    t.a(6, 3) = frac(-81, 250);
    t.a(6, 4) = frac(2484, 10625);
    t.a(7, 0) = frac(3501, 1720);
    t.a(7, 1) = frac(-300, 43);
    t.a(7, 2) = frac(297275, 52632);
    t.a(7, 3) = frac(-319, 2322);
    t.a(7, 4) = frac(24068, 84065);
    t.a(7, 6) = frac(3850, 26703);

    t.b = {frac(3, 40),    T(0), frac(875, 2244), frac(23, 72),
           frac(264, 1955), T(0), frac(125, 11592), frac(43, 616)};
    t.b_hat = {frac(13, 160), T(0), frac(2375, 5984), frac(5, 16),
               frac(12, 85),  frac(3, 44), T(0), T(0)};
    t.c = {T(0), frac(1, 6), frac(4, 15), frac(2, 3), frac(5, 6), T(1), frac(1, 15), T(1)};
    t.validate();
    return t;
}

/// Tableau lookup by the identifiers used on the command line.
template <typename T>
ButcherTableau<T> tableau_by_name(const std::string& name) {
    if (name == "tsit5") return tableau_tsit5<T>();
    if (name == "dp5") return tableau_dp5<T>();
    if (name == "vern6") return tableau_vern6<T>();
    throw std::invalid_argument("unknown method: " + name + " (expected tsit5, dp5 or vern6)");
}

}  // namespace genodyn
