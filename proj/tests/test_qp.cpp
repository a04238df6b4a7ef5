#include <doctest.h>

#include <cmath>
#include <random>

#include "orthogmm/errors.hpp"
#include "orthogmm/qp.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace orthogmm;

TEST_CASE("identity objective on the simplex picks the barycenter") {
    QpProblem qp;
    qp.hessian = Eigen::MatrixXd::Identity(3, 3);
    qp.linear = Eigen::VectorXd::Zero(3);
    add_simplex_constraints(qp, 3, 3);
    const QpResult result = qp_solve(qp);
    for (int i = 0; i < 3; ++i) {
        CHECK(result.x(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
    }
    CHECK(result.kkt_residual < 1e-8);
}

TEST_CASE("one active bound on the 2-simplex") {
    QpProblem qp;
    qp.hessian = Eigen::MatrixXd::Identity(2, 2);
    qp.linear = Eigen::VectorXd::Zero(2);
    add_simplex_constraints(qp, 2, 2);
    // x_1 <= 0.2
    const Eigen::Index row = qp.ineq_matrix.rows();
    qp.ineq_matrix.conservativeResize(row + 1, 2);
    qp.ineq_matrix.row(row) << 1.0, 0.0;
    qp.ineq_rhs.conservativeResize(row + 1);
    qp.ineq_rhs(row) = 0.2;
    const QpResult result = qp_solve(qp);
    CHECK(result.x(0) == doctest::Approx(0.2).epsilon(1e-8));
    CHECK(result.x(1) == doctest::Approx(0.8).epsilon(1e-8));
}

TEST_CASE("random strictly convex problems match the active-set enumeration oracle") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::MatrixXd m = fixtures::random_matrix(4, 4, rng);
        QpProblem qp;
        qp.hessian = m.transpose() * m + Eigen::MatrixXd::Identity(4, 4);
        Eigen::VectorXd target(4);
        for (int i = 0; i < 4; ++i) target(i) = uniform(rng);
        qp.linear = -qp.hessian * target;  // unconstrained optimum at `target`
        qp.ineq_matrix = fixtures::random_matrix(3, 4, rng);
        qp.ineq_rhs = qp.ineq_matrix * target;
        for (int i = 0; i < 3; ++i) qp.ineq_rhs(i) += uniform(rng);  // some active

        const QpResult result = qp_solve(qp);
        CHECK(result.kkt_residual < 1e-8);

        const Eigen::VectorXd reference = oracles::qp_active_set_enumeration(
            qp.hessian, qp.linear, qp.ineq_matrix, qp.ineq_rhs);
        REQUIRE(reference.size() == 4);
        CHECK((result.x - reference).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("interior optimum matches the grid refinement oracle") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    for (int trial = 0; trial < 4; ++trial) {
        const Eigen::MatrixXd m = fixtures::random_matrix(4, 4, rng);
        QpProblem qp;
        qp.hessian = m.transpose() * m + Eigen::MatrixXd::Identity(4, 4);
        Eigen::VectorXd target(4);
        for (int i = 0; i < 4; ++i) target(i) = uniform(rng);
        qp.linear = -qp.hessian * target;
        qp.ineq_matrix = fixtures::random_matrix(3, 4, rng);
        // slack rhs keeps every constraint inactive at the optimum
        qp.ineq_rhs = qp.ineq_matrix * target + Eigen::VectorXd::Constant(3, 2.0);

        const QpResult result = qp_solve(qp);
        const auto objective = [&](const Eigen::VectorXd& x) {
            return 0.5 * x.dot(qp.hessian * x) + qp.linear.dot(x);
        };
        const auto feasible = [&](const Eigen::VectorXd& x) {
            return ((qp.ineq_matrix * x - qp.ineq_rhs).array() <= 1e-9).all();
        };
        const Eigen::VectorXd reference =
            oracles::qp_grid_refine(objective, feasible, Eigen::VectorXd::Zero(4), 3.0);
        CHECK((result.x - reference).cwiseAbs().maxCoeff() < 1e-4);
    }
}

TEST_CASE("equality-constrained quadratic with no inequalities") {
    QpProblem qp;
    qp.hessian = 2.0 * Eigen::MatrixXd::Identity(3, 3);
    qp.linear = Eigen::VectorXd::Zero(3);
    qp.eq_matrix.resize(1, 3);
    qp.eq_matrix << 1.0, 1.0, 1.0;
    qp.eq_rhs = Eigen::VectorXd::Constant(1, 3.0);
    const QpResult result = qp_solve(qp);
    for (int i = 0; i < 3; ++i) CHECK(result.x(i) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("argument and infeasibility errors") {
    QpProblem qp;
    qp.hessian = -Eigen::MatrixXd::Identity(2, 2);
    qp.linear = Eigen::VectorXd::Zero(2);
    CHECK_THROWS_AS(qp_solve(qp), ArgumentError);

    qp.hessian = Eigen::MatrixXd::Identity(2, 2);
    qp.hessian(0, 1) = 0.5;  // asymmetric
    CHECK_THROWS_AS(qp_solve(qp), ArgumentError);

    // x >= 1 and x <= 0 cannot both hold
    QpProblem infeasible;
    infeasible.hessian = Eigen::MatrixXd::Identity(1, 1);
    infeasible.linear = Eigen::VectorXd::Zero(1);
    infeasible.ineq_matrix.resize(2, 1);
    infeasible.ineq_matrix << -1.0, 1.0;
    infeasible.ineq_rhs.resize(2);
    infeasible.ineq_rhs << -1.0, 0.0;
    CHECK_THROWS_AS(qp_solve(infeasible), InfeasibleError);
    try {
        qp_solve(infeasible);
    } catch (const InfeasibleError& e) {
        CHECK(e.worst_constraint() >= 0);
        CHECK(e.violation() > 0.1);
    }
}

TEST_CASE("kkt residual certificate on a constrained optimum") {
    // minimize ||x - (2, 2)||^2 over the unit simplex: optimum (0.5, 0.5)
    QpProblem qp;
    qp.hessian = 2.0 * Eigen::MatrixXd::Identity(2, 2);
    qp.linear = Eigen::VectorXd::Constant(2, -4.0);
    add_simplex_constraints(qp, 2, 2);
    const QpResult result = qp_solve(qp);
    CHECK(result.x(0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(result.kkt_residual < 1e-8);
    CHECK(result.iterations > 0);
}
