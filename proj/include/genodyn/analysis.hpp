#pragma once

#include <complex>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#include "genodyn/solver.hpp"

namespace genodyn {

/// Affine functional J(q) = gradient . q + offset. Its derivative is the
/// constant gradient, which is what makes the reformulation operators work.
template <typename T>
struct AffineFunctional {
    Vec<T> gradient;
    T offset = T(0);

    T value(std::span<const T> q) const { return dot<T>(gradient, q) + offset; }

    /// The conservation defect J(q) = sum(q) - 1.
    static AffineFunctional sum_minus_one(std::size_t dim) {
        return AffineFunctional{Vec<T>(dim, T(1)), T(-1)};
    }
};

template <typename T>
using ScalarField = std::function<T(std::span<const T>)>;

/// alpha(q) = sum(q), the balance function of both inheritance models.
template <typename T>
ScalarField<T> sum_field() {
    return [](std::span<const T> q) {
        T s = T(0);
        for (const T& x : q) s += x;
        return s;
    };
}

/// J'(q) . f(q); identically zero iff J is a first integral.
template <typename T>
T first_integral_residual(const OdeSystem<T>& system, const AffineFunctional<T>& J,
                          std::type_identity_t<std::span<const T>> q) {
    if (J.gradient.size() != system.dim || q.size() != system.dim)
        throw std::invalid_argument("first_integral_residual: dimension mismatch");
    const Vec<T> f = system.eval_rhs(q);
    return dot<T>(J.gradient, f);
}

/// J'(q) . f(q) - alpha(q) J(q); identically zero iff J is a second integral
/// with balance function alpha.
template <typename T>
T second_integral_residual(const OdeSystem<T>& system, const AffineFunctional<T>& J,
                           const ScalarField<T>& alpha, std::type_identity_t<std::span<const T>> q) {
    if (J.gradient.size() != system.dim || q.size() != system.dim)
        throw std::invalid_argument("second_integral_residual: dimension mismatch");
    const Vec<T> f = system.eval_rhs(q);
    return dot<T>(J.gradient, f) - alpha(q) * J.value(q);
}

/// Turns the affine second integral J into a first integral by subtracting
/// the gradient-direction correction: f~(q) = f(q) - alpha(q) J(q) g / |g|^2.
/// With g = 0, J is already a (trivial) first integral and the system is
/// returned unchanged. The result carries no closed-form Jacobian.
template <typename T>
OdeSystem<T> reformulate_projection(const OdeSystem<T>& system, const AffineFunctional<T>& J,
                                    const ScalarField<T>& alpha) {
    if (J.gradient.size() != system.dim)
        throw std::invalid_argument("reformulate_projection: dimension mismatch");
    const T g2 = dot<T>(J.gradient, J.gradient);
    if (g2 == T(0)) return system;

    OdeSystem<T> out;
    out.name = system.name + "[projected]";
    out.dim = system.dim;
    out.rhs = [base = system.rhs, J, alpha, g2](std::span<const T> q, std::span<T> dq) {
        base(q, dq);
        const T corr = alpha(q) * J.value(q) / g2;
        for (std::size_t i = 0; i < q.size(); ++i) dq[i] -= corr * J.gradient[i];
    };
    return out;
}

/// The state-scaled variant f~(q) = f(q) - J(q) q. Valid only when
/// alpha(q) = g . q, which is verified by sampling before the system is
/// built; a violating state is reported in the exception.
template <typename T>
OdeSystem<T> reformulate_state_scaled(const OdeSystem<T>& system, const AffineFunctional<T>& J,
                                      const ScalarField<T>& alpha) {
    if (J.gradient.size() != system.dim)
        throw std::invalid_argument("reformulate_state_scaled: dimension mismatch");

    std::mt19937_64 rng(0x5eed5ca1ed);
    std::uniform_real_distribution<double> dist(-1.0, 2.0);
    Vec<T> q(system.dim);
    for (int sample = 0; sample < 128; ++sample) {
        for (auto& x : q) x = static_cast<T>(dist(rng));
        const T lhs = alpha(q);
        const T rhs = dot<T>(J.gradient, q);
        if (std::abs(lhs - rhs) > T(1e-10)) {
            std::ostringstream msg;
            msg << "reformulate_state_scaled: alpha(q) != J'(q).q at q = (";
            for (std::size_t i = 0; i < q.size(); ++i)
                msg << static_cast<double>(q[i]) << (i + 1 < q.size() ? ", " : ")");
            msg << "; alpha = " << static_cast<double>(lhs)
                << ", J'.q = " << static_cast<double>(rhs);
            throw std::invalid_argument(msg.str());
        }
    }

    OdeSystem<T> out;
    out.name = system.name + "[state-scaled]";
    out.dim = system.dim;
    out.rhs = [base = system.rhs, J](std::span<const T> q, std::span<T> dq) {
        base(q, dq);
        const T j = J.value(q);
        for (std::size_t i = 0; i < q.size(); ++i) dq[i] -= j * q[i];
    };
    return out;
}

/// One-parameter family of nonnegative steady states of the original
/// three-genotype model: (s, 2(sqrt(s)-s), 1+s-2 sqrt(s)) for s in [0,1].
template <typename T>
std::array<T, 3> steady_state_family3(T s) {
    if (!(s >= T(0) && s <= T(1)))
        throw std::domain_error("steady_state_family3: parameter must lie in [0,1]");
    const T r = std::sqrt(s);
    return {s, T(2) * (r - s), T(1) + s - T(2) * r};
}

/// Steady states of the modified three-genotype model: q3 = q2^2/(4 q1) for
/// q1 > 0; for q1 = q2 = 0 any q3 >= 0 is steady and the supplied value is
/// used.
template <typename T>
std::array<T, 3> steady_state_modified3(T q1, T q2, T q3_when_origin = T(0)) {
    if (!(q1 >= T(0)) || !(q2 >= T(0)))
        throw std::domain_error("steady_state_modified3: components must be nonnegative");
    if (q1 == T(0)) {
        if (q2 != T(0))
            throw std::domain_error("steady_state_modified3: q2 must vanish when q1 = 0");
        if (!(q3_when_origin >= T(0)))
            throw std::domain_error("steady_state_modified3: q3 must be nonnegative");
        return {T(0), T(0), q3_when_origin};
    }
    return {q1, q2, q2 * q2 / (T(4) * q1)};
}

/// Central finite-difference Jacobian, step h * max(1, |q_j|) per column.
template <typename T>
Mat<T> finite_difference_jacobian(const OdeSystem<T>& system,
                                  std::type_identity_t<std::span<const T>> q,
                                  T h = std::cbrt(machine_epsilon<T>())) {
    const std::size_t n = system.dim;
    Mat<T> jac(n, n);
    Vec<T> qp(q.begin(), q.end()), qm(q.begin(), q.end()), fp(n), fm(n);
    for (std::size_t j = 0; j < n; ++j) {
        const T hj = h * std::max(T(1), std::abs(q[j]));
        qp[j] = q[j] + hj;
        qm[j] = q[j] - hj;
        system.rhs(qp, fp);
        system.rhs(qm, fm);
        for (std::size_t i = 0; i < n; ++i) jac(i, j) = (fp[i] - fm[i]) / (T(2) * hj);
        qp[j] = q[j];
        qm[j] = q[j];
    }
    return jac;
}

// ---------------------------------------------------------------------------
// Eigenanalysis of 2x2 and 3x3 matrices via closed-form characteristic roots.
// ---------------------------------------------------------------------------

/// Eigenvalues sorted by descending real part. vectors[i] is empty for the
/// surplus members of a defective cluster (no generalized vectors are
/// computed). Eigenvalues closer than 1e-8 * |M| are treated as repeated and
/// replaced by their cluster mean.
template <typename T>
struct EigenDecomposition {
    std::vector<std::complex<T>> values;
    std::vector<std::optional<std::vector<std::complex<T>>>> vectors;
    bool defective = false;
};

namespace detail {

/// Roots of lambda^3 - c2 lambda^2 + c1 lambda - c0 (real coefficients).
template <typename T>
std::array<std::complex<T>, 3> cubic_roots(T c2, T c1, T c0) {
    using C = std::complex<T>;
    const T m = c2 / T(3);
    const T p = c1 - c2 * c2 / T(3);
    const T q = T(-2) * c2 * c2 * c2 / T(27) + c1 * c2 / T(3) - c0;
    if (p == T(0) && q == T(0)) return {C(m), C(m), C(m)};

    const T disc = (q / T(2)) * (q / T(2)) + (p / T(3)) * (p / T(3)) * (p / T(3));
    if (disc <= T(0)) {
        // three real roots
        const T r = std::sqrt(-p / T(3));
        const T arg = std::clamp(-q / (T(2) * r * r * r), T(-1), T(1));
        const T phi = std::acos(arg);
        const T two_pi = T(2) * std::numbers::pi_v<T>;
        std::array<std::complex<T>, 3> out;
        for (int k = 0; k < 3; ++k)
            out[static_cast<std::size_t>(k)] =
                C(m + T(2) * r * std::cos((phi - two_pi * T(k)) / T(3)));
        return out;
    }
    // one real root plus a conjugate pair; pick the larger-magnitude cube
    // root to avoid cancellation
    const T sq = std::sqrt(disc);
    const T w = (q > T(0)) ? (-q / T(2) - sq) : (-q / T(2) + sq);
    const T u = std::cbrt(w);
    const T v = (u == T(0)) ? T(0) : -p / (T(3) * u);
    const T x1 = u + v;
    const T re = -x1 / T(2);
    const T im = std::sqrt(T(3)) / T(2) * (u - v);
    return {C(m + x1), C(m + re, std::abs(im)), C(m + re, -std::abs(im))};
}

/// Null-space basis of a small complex matrix, rank decided against the
/// pivot threshold. Full pivoting; vectors come back unit length with the
/// dominant component rotated onto the positive real axis.
template <typename T>
std::vector<std::vector<std::complex<T>>> null_space(Mat<std::complex<T>> a, T pivot_tol) {
    using C = std::complex<T>;
    const std::size_t n = a.rows();
    std::vector<std::size_t> col(n);
    for (std::size_t j = 0; j < n; ++j) col[j] = j;

    std::size_t rank = 0;
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t pi = r, pj = r;
        T best = T(0);
        for (std::size_t i = r; i < n; ++i)
            for (std::size_t j = r; j < n; ++j)
                if (std::abs(a(i, j)) > best) {
                    best = std::abs(a(i, j));
                    pi = i;
                    pj = j;
                }
        if (best <= pivot_tol) break;
        if (pi != r)
            for (std::size_t j = 0; j < n; ++j) std::swap(a(r, j), a(pi, j));
        if (pj != r) {
            for (std::size_t i = 0; i < n; ++i) std::swap(a(i, r), a(i, pj));
            std::swap(col[r], col[pj]);
        }
        for (std::size_t i = r + 1; i < n; ++i) {
            const C factor = a(i, r) / a(r, r);
            for (std::size_t j = r; j < n; ++j) a(i, j) -= factor * a(r, j);
        }
        ++rank;
    }

    std::vector<std::vector<C>> basis;
    for (std::size_t free = rank; free < n; ++free) {
        std::vector<C> xp(n, C(0));
        xp[free] = C(1);
        for (std::size_t i = rank; i-- > 0;) {
            C acc(0);
            for (std::size_t j = i + 1; j < n; ++j) acc += a(i, j) * xp[j];
            xp[i] = -acc / a(i, i);
        }
        std::vector<C> x(n);
        for (std::size_t j = 0; j < n; ++j) x[col[j]] = xp[j];

        T norm = T(0);
        for (const C& v : x) norm += std::norm(v);
        norm = std::sqrt(norm);
        std::size_t imax = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(x[i]) > std::abs(x[imax])) imax = i;
        const C phase = (std::abs(x[imax]) > T(0)) ? std::conj(x[imax]) / std::abs(x[imax]) : C(1);
        for (C& v : x) v = v * phase / norm;
        basis.push_back(std::move(x));
    }
    return basis;
}

}  // namespace detail

/// Eigenvalues and (where available) unit eigenvectors of a 2x2 or 3x3 real
/// matrix. Uses the quadratic formula respectively a trigonometric/Cardano
/// solution of the characteristic polynomial; no iterative factorization.
template <typename T>
EigenDecomposition<T> eigen_small(const Mat<T>& m) {
    using C = std::complex<T>;
    const std::size_t n = m.rows();
    if (n != m.cols() || (n != 2 && n != 3))
        throw std::invalid_argument("eigen_small: expected a 2x2 or 3x3 matrix");
    if (!all_finite<T>(m.data())) throw std::invalid_argument("eigen_small: non-finite entries");

    std::vector<C> vals;
    if (n == 2) {
        const T tr = m(0, 0) + m(1, 1);
        const T det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
        const T disc = tr * tr - T(4) * det;
        if (disc >= T(0)) {
            const T s = std::sqrt(disc);
            vals = {C((tr + s) / T(2)), C((tr - s) / T(2))};
        } else {
            const T s = std::sqrt(-disc) / T(2);
            vals = {C(tr / T(2), s), C(tr / T(2), -s)};
        }
    } else {
        const T tr = m(0, 0) + m(1, 1) + m(2, 2);
        const T minors = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1) + m(0, 0) * m(2, 2) -
                         m(0, 2) * m(2, 0) + m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
        const T det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
                      m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
                      m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
        const auto roots = detail::cubic_roots(tr, minors, det);
        vals.assign(roots.begin(), roots.end());
    }

    std::sort(vals.begin(), vals.end(), [](const C& a, const C& b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });

    const T scale = m.norm_inf();
    const T tol = T(1e-8) * scale;

    EigenDecomposition<T> out;
    out.vectors.resize(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && std::abs(vals[j] - vals[j - 1]) <= tol) ++j;
        C mean(0);
        for (std::size_t k = i; k < j; ++k) mean += vals[k];
        mean /= T(j - i);
        const std::size_t mult = j - i;
        if (mult == 1) mean = vals[i];

        Mat<C> shifted(n, n);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c)
                shifted(r, c) = C(m(r, c)) - (r == c ? mean : C(0));
        auto basis = detail::null_space<T>(shifted, std::max(tol, T(1e-8) * std::abs(mean)));

        for (std::size_t k = 0; k < mult; ++k) {
            out.values.push_back(mean);
            if (k < basis.size())
                out.vectors[i + k] = std::move(basis[k]);
            else
                out.defective = true;
        }
        i = j;
    }
    return out;
}

enum class Stability { asymptotically_stable, stable_nonhyperbolic, unstable };

inline const char* to_string(Stability s) {
    switch (s) {
        case Stability::asymptotically_stable: return "asymptotically_stable";
        case Stability::stable_nonhyperbolic: return "stable_nonhyperbolic";
        case Stability::unstable: return "unstable";
    }
    return "?";
}

/// Maps eigenvalue real parts onto the stability trichotomy. The tolerance
/// band turns numerically tiny real parts into "on the imaginary axis".
template <typename T>
Stability classify_stability(const std::vector<std::complex<T>>& eigenvalues, T tol = T(1e-9)) {
    bool all_negative = true;
    for (const auto& ev : eigenvalues) {
        if (ev.real() > tol) return Stability::unstable;
        if (!(ev.real() < -tol)) all_negative = false;
    }
    return all_negative ? Stability::asymptotically_stable : Stability::stable_nonhyperbolic;
}

/// A steady state with its eigenanalysis. Construction fails unless the
/// vector field actually vanishes there (sup norm <= residual_tol).
template <typename T>
struct SteadyStateRecord {
    Vec<T> point;
    EigenDecomposition<T> eigen;
    Stability classification = Stability::stable_nonhyperbolic;
};

template <typename T>
SteadyStateRecord<T> analyze_steady_state(const OdeSystem<T>& system, const Vec<T>& point,
                                          T residual_tol = T(1e-10), T stability_tol = T(1e-9)) {
    const Vec<T> f = system.eval_rhs(point);
    if (sup_norm<T>(f) > residual_tol)
        throw std::invalid_argument("analyze_steady_state: point is not steady (|f| = " +
                                    std::to_string(static_cast<double>(sup_norm<T>(f))) + ")");
    const Mat<T> jac =
        system.has_jacobian() ? system.jac(point) : finite_difference_jacobian(system, point);
    SteadyStateRecord<T> rec;
    rec.point = point;
    rec.eigen = eigen_small(jac);
    rec.classification = classify_stability(rec.eigen.values, stability_tol);
    return rec;
}

// ---------------------------------------------------------------------------
// Vector-field sampling for phase portraits.
// ---------------------------------------------------------------------------

template <typename T>
struct GridSpec {
    T x_min, x_max, y_min, y_max, step;
};

/// Direction and display length (sqrt of the field magnitude) at one grid
/// point. Steady points carry a zero direction and are flagged.
template <typename T>
struct FieldSample {
    T x, y, dx, dy, len;
    bool steady;
};

template <typename T>
std::vector<FieldSample<T>> sample_vector_field(const OdeSystem<T>& system,
                                                const GridSpec<T>& grid) {
    if (system.dim != 2)
        throw std::invalid_argument("sample_vector_field: only 2-component systems are supported");
    if (!(grid.step > T(0)) || !(grid.x_max >= grid.x_min) || !(grid.y_max >= grid.y_min))
        throw std::invalid_argument("sample_vector_field: malformed grid");

    const auto count = [&](T lo, T hi) {
        return static_cast<std::size_t>(std::floor((hi - lo) / grid.step + T(0.5))) + 1;
    };
    const std::size_t nx = count(grid.x_min, grid.x_max);
    const std::size_t ny = count(grid.y_min, grid.y_max);

    std::vector<FieldSample<T>> out;
    out.reserve(nx * ny);
    Vec<T> q(2), f(2);
    for (std::size_t i = 0; i < nx; ++i) {
        for (std::size_t j = 0; j < ny; ++j) {
            q[0] = grid.x_min + T(i) * grid.step;
            q[1] = grid.y_min + T(j) * grid.step;
            system.rhs(q, f);
            const T mag = std::hypot(f[0], f[1]);
            FieldSample<T> s;
            s.x = q[0];
            s.y = q[1];
            s.steady = (mag == T(0));
            s.dx = s.steady ? T(0) : f[0] / mag;
            s.dy = s.steady ? T(0) : f[1] / mag;
            s.len = std::sqrt(mag);
            out.push_back(s);
        }
    }
    return out;
}

}  // namespace genodyn
