#include <catch2/catch_amalgamated.hpp>

#include "genodyn/tableau.hpp"

using namespace genodyn;

namespace {

template <typename T>
void check_structural_invariants(const ButcherTableau<T>& t) {
    REQUIRE_NOTHROW(t.validate());
    REQUIRE(t.order > t.embedded_order);
    REQUIRE(t.embedded_order >= 1);
    const auto s = static_cast<std::size_t>(t.stages);
    for (std::size_t i = 0; i < s; ++i) {
        T row = T(0);
        for (std::size_t j = 0; j < i; ++j) row += t.a(i, j);
        REQUIRE(std::abs(row - t.c[i]) <= T(1e-12));
        for (std::size_t j = i; j < s; ++j) REQUIRE(t.a(i, j) == T(0));
    }
    T sb = 0, sbh = 0;
    for (std::size_t i = 0; i < s; ++i) {
        sb += t.b[i];
        sbh += t.b_hat[i];
    }
    REQUIRE(std::abs(sb - T(1)) <= T(1e-12));
    REQUIRE(std::abs(sbh - T(1)) <= T(1e-12));
}

double quadrature_sum(const ButcherTableau<double>& t, int power) {
    double acc = 0;
    for (int i = 0; i < t.stages; ++i)
        acc += t.b[static_cast<std::size_t>(i)] *
               std::pow(t.c[static_cast<std::size_t>(i)], power);
    return acc;
}

}  // namespace

TEST_CASE("shipped tableaus satisfy all structural invariants") {
    check_structural_invariants(tableau_tsit5<double>());
    check_structural_invariants(tableau_dp5<double>());
    check_structural_invariants(tableau_vern6<double>());
    check_structural_invariants(tableau_tsit5<long double>());
    check_structural_invariants(tableau_dp5<long double>());
    check_structural_invariants(tableau_vern6<long double>());
}

TEST_CASE("shipped tableaus validate in single precision") {
    REQUIRE_NOTHROW(tableau_tsit5<float>());
    REQUIRE_NOTHROW(tableau_dp5<float>());
    REQUIRE_NOTHROW(tableau_vern6<float>());
}

TEST_CASE("tsit5 metadata and quadrature conditions") {
    const auto t = tableau_tsit5<double>();
    REQUIRE(t.stages == 7);
    REQUIRE(t.fsal);
    REQUIRE(t.order == 5);
    REQUIRE(t.embedded_order == 4);
    REQUIRE(std::abs(quadrature_sum(t, 0) - 1.0) <= 1e-12);
    REQUIRE(std::abs(quadrature_sum(t, 1) - 0.5) <= 1e-12);
    REQUIRE(std::abs(quadrature_sum(t, 2) - 1.0 / 3.0) <= 1e-12);
}

TEST_CASE("dp5 metadata, node prefix and genuine embedding") {
    const auto t = tableau_dp5<double>();
    REQUIRE(t.stages == 7);
    REQUIRE(t.fsal);
    REQUIRE(t.order == 5);
    REQUIRE(t.embedded_order == 4);
    REQUIRE(t.c[0] == 0.0);
    REQUIRE(t.c[1] == Catch::Approx(0.2).margin(1e-15));
    REQUIRE(t.c[2] == Catch::Approx(0.3).margin(1e-15));
    double l1 = 0;
    for (int i = 0; i < t.stages; ++i)
        l1 += std::abs(t.b[static_cast<std::size_t>(i)] - t.b_hat[static_cast<std::size_t>(i)]);
    REQUIRE(l1 > 0.0);
}

TEST_CASE("vern6 metadata and order-4 quadrature condition") {
    const auto t = tableau_vern6<double>();
    REQUIRE(t.order == 6);
    REQUIRE(t.embedded_order == 5);
    REQUIRE_FALSE(t.fsal);
    REQUIRE(std::abs(quadrature_sum(t, 3) - 0.25) <= 1e-12);
}

TEST_CASE("FSAL pairs repeat the propagating weights in the last stage row") {
    for (const auto& t : {tableau_tsit5<double>(), tableau_dp5<double>()}) {
        REQUIRE(t.fsal);
        const auto last = static_cast<std::size_t>(t.stages - 1);
        for (std::size_t j = 0; j < static_cast<std::size_t>(t.stages); ++j)
            REQUIRE(std::abs(t.a(last, j) - t.b[j]) <= 1e-12);
    }
}

TEST_CASE("order conditions of all shipped tableaus evaluate below 1e-12") {
    for (const auto& t : {tableau_tsit5<double>(), tableau_dp5<double>(), tableau_vern6<double>()}) {
        const auto report = verify_order_conditions(t, 4);
        REQUIRE(report.size() == 8);
        for (const auto& cond : report) {
            INFO(t.name << ": " << cond.label);
            REQUIRE(std::abs(cond.residual_b) <= 1e-12);
            if (cond.residual_b_hat) REQUIRE(std::abs(*cond.residual_b_hat) <= 1e-12);
        }
    }
}

TEST_CASE("order condition report respects up_to and embedded_order") {
    const auto t = tableau_dp5<double>();
    const auto report = verify_order_conditions(t, 1);
    REQUIRE(report.size() == 1);
    REQUIRE(report[0].label == "sum(b) = 1");
    REQUIRE(std::abs(report[0].residual_b) <= 1e-15);
    REQUIRE(report[0].residual_b_hat.has_value());

    REQUIRE_THROWS_AS(verify_order_conditions(t, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(verify_order_conditions(t, 5), std::invalid_argument);
}

TEST_CASE("a scaled weight vector is reported as an order-1 violation") {
    auto t = tableau_dp5<double>();
    for (auto& w : t.b) w *= 1.01;
    const auto report = verify_order_conditions(t, 1);
    REQUIRE(report[0].residual_b == Catch::Approx(0.01).margin(1e-12));
}

TEST_CASE("tableau validation rejects broken structures") {
    auto t = tableau_dp5<double>();
    t.b[0] += 1e-6;
    REQUIRE_THROWS_AS(t.validate(), std::invalid_argument);

    auto t2 = tableau_dp5<double>();
    t2.a(0, 1) = 0.5;  // upper-triangular entry
    REQUIRE_THROWS_AS(t2.validate(), std::invalid_argument);

    auto t3 = tableau_dp5<double>();
    t3.embedded_order = 5;  // order must exceed embedded order
    REQUIRE_THROWS_AS(t3.validate(), std::invalid_argument);
}

TEST_CASE("tableau lookup by name") {
    REQUIRE(tableau_by_name<double>("vern6").name == "vern6");
    REQUIRE_THROWS_AS(tableau_by_name<double>("rk4"), std::invalid_argument);
}
