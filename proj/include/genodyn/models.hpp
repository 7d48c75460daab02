#pragma once

#include <array>
#include <functional>
#include <string>

#include "genodyn/solver.hpp"

namespace genodyn {

/// Growth of the total population as a function of its current size.
template <typename T>
using GrowthFunction = std::function<T(T)>;

/// The shipped default: exponential growth, g(s) = s.
template <typename T>
GrowthFunction<T> exponential_growth() {
    return [](T s) { return s; };
}

/// Mixing matrices of the three-genotype inheritance model. All entries are
/// dyadic rationals (0, 1/4, 1/2, 1), so w1 + w2 + w3 equals the all-ones
/// matrix exactly in every floating-point format.
template <typename T>
struct InheritanceMatrices {
    Mat<T> w1, w2, w3;

    static InheritanceMatrices standard() {
        InheritanceMatrices m;
        const T h = T(0.5), q = T(0.25);
        m.w1 = Mat<T>(3, 3);
        m.w2 = Mat<T>(3, 3);
        m.w3 = Mat<T>(3, 3);
        m.w1(0, 0) = T(1); m.w1(0, 1) = h; m.w1(1, 0) = h; m.w1(1, 1) = q;
        m.w2(0, 1) = h; m.w2(0, 2) = T(1);
        m.w2(1, 0) = h; m.w2(1, 1) = h; m.w2(1, 2) = h;
        m.w2(2, 0) = T(1); m.w2(2, 1) = h;
        m.w3(1, 1) = q; m.w3(1, 2) = h; m.w3(2, 1) = h; m.w3(2, 2) = T(1);
        return m;
    }

    const Mat<T>& w(int i) const {
        switch (i) {
            case 1: return w1;
            case 2: return w2;
            case 3: return w3;
        }
        throw std::invalid_argument("InheritanceMatrices: index must be 1, 2 or 3");
    }

    /// q^T W_i q for i in {1,2,3}.
    T quadratic_form(int i, std::span<const T> q) const {
        const Mat<T>& m = w(i);
        T acc = T(0);
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t c = 0; c < 3; ++c) acc += q[r] * m(r, c) * q[c];
        return acc;
    }
};

/// Mutation strength of the reduced two-genotype model, constrained to (0,1).
template <typename T>
struct MutationParameter {
    T a;
    explicit MutationParameter(T value) : a(value) {
        if (!(a > T(0) && a < T(1)))
            throw std::invalid_argument("MutationParameter: a must lie in (0,1)");
    }
};

/// Compartment dynamics c_i' = g(c_sum)/c_sum^2 * (c^T W_i c). The component
/// sum equals g(c_sum) up to rounding.
template <typename T>
std::array<T, 3> rhs_compartments(const std::array<T, 3>& c, const GrowthFunction<T>& g) {
    const T c_sum = c[0] + c[1] + c[2];
    if (!(c_sum > T(0)))
        throw std::domain_error("rhs_compartments: total population must be positive");
    static const InheritanceMatrices<T> w = InheritanceMatrices<T>::standard();
    const T scale = g(c_sum) / (c_sum * c_sum);
    std::array<T, 3> out;
    for (int i = 0; i < 3; ++i) out[static_cast<std::size_t>(i)] = scale * w.quadratic_form(i + 1, c);
    return out;
}

/// Genotype-proportion dynamics under exponential growth, polynomial form.
/// Defined on all of R^3 on purpose: no clamping to the simplex.
template <typename T>
std::array<T, 3> rhs_proportions3(const std::array<T, 3>& q) {
    const T q1 = q[0], q2 = q[1], q3 = q[2];
    return {q1 * q1 + q1 * q2 + T(0.25) * q2 * q2 - q1,
            T(0.5) * q2 * q2 + q1 * q2 + T(2) * q1 * q3 + q2 * q3 - q2,
            T(0.25) * q2 * q2 + q2 * q3 + q3 * q3 - q3};
}

/// Same vector field written as q^T W_i q - q_i. Agrees with the polynomial
/// form up to rounding; kept as an independent evaluation route.
template <typename T>
std::array<T, 3> rhs_proportions3_matrix(const std::array<T, 3>& q) {
    static const InheritanceMatrices<T> w = InheritanceMatrices<T>::standard();
    std::array<T, 3> out;
    for (int i = 0; i < 3; ++i)
        out[static_cast<std::size_t>(i)] = w.quadratic_form(i + 1, q) - q[static_cast<std::size_t>(i)];
    return out;
}

template <typename T>
Mat<T> jac_proportions3(const std::array<T, 3>& q) {
    const T q1 = q[0], q2 = q[1], q3 = q[2];
    Mat<T> m(3, 3);
    m(0, 0) = T(-1) + T(2) * q1 + q2;
    m(0, 1) = q1 + T(0.5) * q2;
    m(0, 2) = T(0);
    m(1, 0) = q2 + T(2) * q3;
    m(1, 1) = T(-1) + q1 + q2 + q3;
    m(1, 2) = T(2) * q1 + q2;
    m(2, 0) = T(0);
    m(2, 1) = T(0.5) * q2 + q3;
    m(2, 2) = T(-1) + q2 + T(2) * q3;
    return m;
}

/// Two-genotype model with mutation parameter a.
template <typename T>
std::array<T, 2> rhs_mutation2(const std::array<T, 2>& q, const MutationParameter<T>& p) {
    const T q1 = q[0], q2 = q[1], a = p.a, b = T(1) - p.a;
    return {a * q1 * q1 + q1 * q2 + b * q2 * q2 - q1, b * q1 * q1 + q1 * q2 + a * q2 * q2 - q2};
}

template <typename T>
Mat<T> jac_mutation2(const std::array<T, 2>& q, const MutationParameter<T>& p) {
    const T q1 = q[0], q2 = q[1], a = p.a, b = T(1) - p.a;
    Mat<T> m(2, 2);
    m(0, 0) = T(2) * a * q1 + q2 - T(1);
    m(0, 1) = q1 + T(2) * b * q2;
    m(1, 0) = T(2) * b * q1 + q2;
    m(1, 1) = q1 + T(2) * a * q2 - T(1);
    return m;
}

/// Conservative reformulation of the two-genotype model. The two components
/// are computed as d and -d, so they sum to zero exactly.
template <typename T>
std::array<T, 2> rhs_modified2(const std::array<T, 2>& q, const MutationParameter<T>& p) {
    const T d = (T(1) - p.a) * (q[1] * q[1] - q[0] * q[0]);
    return {d, -d};
}

template <typename T>
Mat<T> jac_modified2(const std::array<T, 2>& q, const MutationParameter<T>& p) {
    const T f = T(2) * (T(1) - p.a);
    Mat<T> m(2, 2);
    m(0, 0) = -f * q[0];
    m(0, 1) = f * q[1];
    m(1, 0) = f * q[0];
    m(1, 1) = -f * q[1];
    return m;
}

/// Conservative reformulation of the three-genotype model. Written as
/// (d, -2d, d) with d = q2^2/4 - q1*q3, so the component sum vanishes exactly.
template <typename T>
std::array<T, 3> rhs_modified3(const std::array<T, 3>& q) {
    const T d = T(0.25) * q[1] * q[1] - q[0] * q[2];
    return {d, T(-2) * d, d};
}

template <typename T>
Mat<T> jac_modified3(const std::array<T, 3>& q) {
    const T q1 = q[0], q2 = q[1], q3 = q[2];
    Mat<T> m(3, 3);
    m(0, 0) = -q3;
    m(0, 1) = T(0.5) * q2;
    m(0, 2) = -q1;
    m(1, 0) = T(2) * q3;
    m(1, 1) = -q2;
    m(1, 2) = T(2) * q1;
    m(2, 0) = -q3;
    m(2, 1) = T(0.5) * q2;
    m(2, 2) = -q1;
    return m;
}

/// Dynamics of the conservation defect u = sum(q) - 1: u' = (1 + u) u.
template <typename T>
T rhs_deviation(T u) {
    return (T(1) + u) * u;
}

/// Thrown when the closed-form deviation solution is requested at or beyond
/// its finite blow-up time.
class DeviationBlowupError : public std::domain_error {
public:
    DeviationBlowupError(const std::string& msg, long double t_star)
        : std::domain_error(msg), t_star_(t_star) {}
    long double blowup_time() const { return t_star_; }

private:
    long double t_star_;
};

/// Finite blow-up time of u' = (1+u)u from u0 > 0; +infinity otherwise.
template <typename T>
T deviation_blowup_time(T u0) {
    if (u0 > T(0)) return std::log((T(1) + u0) / u0);
    return std::numeric_limits<T>::infinity();
}

/// Closed-form solution u(t) = u0 / (e^{-t} (1 + u0) - u0).
template <typename T>
T deviation_analytic(T u0, T t) {
    if (!(t >= T(0))) throw std::invalid_argument("deviation_analytic: t must be nonnegative");
    const T denom = std::exp(-t) * (T(1) + u0) - u0;
    if (u0 > T(0) && !(denom > T(0))) {
        const T ts = deviation_blowup_time(u0);
        throw DeviationBlowupError("deviation_analytic: requested time is at or beyond the "
                                   "blow-up time t* = " +
                                       std::to_string(static_cast<double>(ts)),
                                   static_cast<long double>(ts));
    }
    return u0 / denom;
}

// ---------------------------------------------------------------------------
// OdeSystem factories for the solver and the command line.
// ---------------------------------------------------------------------------

template <typename T>
OdeSystem<T> system3_original() {
    OdeSystem<T> s;
    s.name = "orig3";
    s.dim = 3;
    s.rhs = [](std::span<const T> q, std::span<T> out) {
        const auto r = rhs_proportions3<T>({q[0], q[1], q[2]});
        out[0] = r[0]; out[1] = r[1]; out[2] = r[2];
    };
    s.jac = [](std::span<const T> q) { return jac_proportions3<T>({q[0], q[1], q[2]}); };
    return s;
}

template <typename T>
OdeSystem<T> system3_modified() {
    OdeSystem<T> s;
    s.name = "mod3";
    s.dim = 3;
    s.rhs = [](std::span<const T> q, std::span<T> out) {
        const auto r = rhs_modified3<T>({q[0], q[1], q[2]});
        out[0] = r[0]; out[1] = r[1]; out[2] = r[2];
    };
    s.jac = [](std::span<const T> q) { return jac_modified3<T>({q[0], q[1], q[2]}); };
    return s;
}

template <typename T>
OdeSystem<T> system2_original(const MutationParameter<T>& p) {
    OdeSystem<T> s;
    s.name = "orig2";
    s.dim = 2;
    s.rhs = [p](std::span<const T> q, std::span<T> out) {
        const auto r = rhs_mutation2<T>({q[0], q[1]}, p);
        out[0] = r[0]; out[1] = r[1];
    };
    s.jac = [p](std::span<const T> q) { return jac_mutation2<T>({q[0], q[1]}, p); };
    return s;
}

template <typename T>
OdeSystem<T> system2_modified(const MutationParameter<T>& p) {
    OdeSystem<T> s;
    s.name = "mod2";
    s.dim = 2;
    s.rhs = [p](std::span<const T> q, std::span<T> out) {
        const auto r = rhs_modified2<T>({q[0], q[1]}, p);
        out[0] = r[0]; out[1] = r[1];
    };
    s.jac = [p](std::span<const T> q) { return jac_modified2<T>({q[0], q[1]}, p); };
    return s;
}

template <typename T>
OdeSystem<T> compartment_system(GrowthFunction<T> g = exponential_growth<T>()) {
    OdeSystem<T> s;
    s.name = "compartments";
    s.dim = 3;
    s.rhs = [g](std::span<const T> c, std::span<T> out) {
        const auto r = rhs_compartments<T>({c[0], c[1], c[2]}, g);
        out[0] = r[0]; out[1] = r[1]; out[2] = r[2];
    };
    return s;
}

template <typename T>
OdeSystem<T> deviation_system() {
    OdeSystem<T> s;
    s.name = "deviation";
    s.dim = 1;
    s.rhs = [](std::span<const T> u, std::span<T> out) { out[0] = rhs_deviation(u[0]); };
    s.jac = [](std::span<const T> u) {
        Mat<T> m(1, 1);
        m(0, 0) = T(1) + T(2) * u[0];
        return m;
    };
    return s;
}

template <typename T>
OdeSystem<T> system_by_name(const std::string& name, T a = T(0.7)) {
    if (name == "orig3") return system3_original<T>();
    if (name == "mod3") return system3_modified<T>();
    if (name == "orig2") return system2_original<T>(MutationParameter<T>(a));
    if (name == "mod2") return system2_modified<T>(MutationParameter<T>(a));
    if (name == "compartments") return compartment_system<T>();
    if (name == "deviation") return deviation_system<T>();
    throw std::invalid_argument("unknown system: " + name +
                                " (expected orig2, mod2, orig3, mod3, compartments or deviation)");
}

}  // namespace genodyn
