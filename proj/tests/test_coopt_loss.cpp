#include "doctest.h"

#include <random>

#include "oracles.hpp"
#include "specopt/coopt_loss.hpp"
#include "specopt/spectral.hpp"

using namespace specopt;

namespace
{
ParameterGraph k2() { return ParameterGraph::from_edge_list(2, {{0, 1, 1.0}}); }
} // namespace

TEST_CASE("spectral_reg examples")
{
    CHECK(spectral_reg(k2(), MatrixXd(Eigen::Vector2d(1.0, 0.0))) == 1.0);

    std::mt19937_64 rng(1);
    const auto g = oracle::random_connected(6, 0.4, rng);
    const MatrixXd constant = Eigen::VectorXd::Ones(6) * Eigen::RowVector3d(0.3, -1.0, 2.0);
    CHECK(std::abs(spectral_reg(g, constant)) <= 1e-12);
    CHECK_THROWS_AS(spectral_reg(g, MatrixXd::Zero(5, 3)), std::invalid_argument);
}

TEST_CASE("regularizer triple identity: pairwise = trace = spectral")
{
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 60; ++rep)
    {
        const Index n = 2 + rep % 15;
        const Index d = 1 + rep % 8;
        const auto g = oracle::random_graph(n, 0.5, rng);
        const auto b = eigendecompose(g);
        const MatrixXd theta = oracle::gaussian(n, d, rng);

        const double pairwise = oracle::pairwise_dirichlet(g.weights(), theta);
        const double trace = spectral_reg(g, theta);
        const double spectral = spectral_energy(b, theta);
        CHECK(oracle::relative_error(pairwise, trace) <= 1e-10);
        CHECK(oracle::relative_error(pairwise, spectral) <= 1e-10);
    }
}

TEST_CASE("spectral_reg invariances")
{
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 20; ++rep)
    {
        const auto g = oracle::random_connected(10, 0.3, rng);
        const MatrixXd theta = oracle::gaussian(10, 4, rng);
        const double base = spectral_reg(g, theta);

        const Eigen::RowVectorXd shift = oracle::gaussian(1, 4, rng);
        const MatrixXd shifted = theta.rowwise() + shift;
        CHECK(std::abs(spectral_reg(g, shifted) - base) <= 1e-10 * std::max(1.0, base));

        const double c = -2.5;
        CHECK(oracle::relative_error(spectral_reg(g, MatrixXd(c * theta)), c * c * base) <= 1e-10);
    }
}

TEST_CASE("spectral_reg_grad")
{
    const MatrixXd g0 = spectral_reg_grad(k2(), MatrixXd(Eigen::Vector2d(1.0, 0.0)));
    CHECK(g0 == MatrixXd(Eigen::Vector2d(2.0, -2.0)));

    std::mt19937_64 rng(4);
    const auto g = oracle::random_connected(7, 0.4, rng);
    CHECK(spectral_reg_grad(g, MatrixXd::Ones(7, 2)).cwiseAbs().maxCoeff() <= 1e-12);

    for (int rep = 0; rep < 20; ++rep)
    {
        const auto gr = oracle::random_graph(8, 0.5, rng);
        const MatrixXd theta = oracle::gaussian(8, 3, rng);
        const MatrixXd numeric =
            oracle::central_difference([&](const MatrixXd& t) { return oracle::pairwise_dirichlet(gr.weights(), t); },
                                       theta);
        CHECK(oracle::relative_error(spectral_reg_grad(gr, theta), numeric) <= 1e-5);
    }
    CHECK_THROWS_AS(spectral_reg_grad(g, MatrixXd::Zero(6, 2)), std::invalid_argument);
}

TEST_CASE("joint_loss")
{
    CHECK(joint_loss(2.0, 3.0, {0.0}).joint == 2.0);
    CHECK(joint_loss(2.0, 3.0, {0.5}).joint == 3.5);
    CHECK(joint_loss(0.0, 0.0, {7.0}).joint == 0.0);
    const auto b = joint_loss(1.25, 4.0, {0.25});
    CHECK(b.task == 1.25);
    CHECK(b.spec == 4.0);
    CHECK(b.joint == 1.25 + 0.25 * 4.0);
    CHECK_THROWS_AS(joint_loss(NAN, 1.0, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(joint_loss(1.0, INFINITY, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(joint_loss(1.0, 1.0, {-1.0}), std::invalid_argument);
}

TEST_CASE("joint_grad")
{
    std::mt19937_64 rng(5);
    const auto g = oracle::random_connected(6, 0.4, rng);
    const MatrixXd theta = oracle::gaussian(6, 2, rng);
    const MatrixXd task_grad = oracle::gaussian(6, 2, rng);
    CHECK(joint_grad(task_grad, g, theta, {0.0}) == task_grad);
    CHECK(joint_grad(MatrixXd(MatrixXd::Zero(2, 1)), k2(), MatrixXd(Eigen::Vector2d(1.0, 0.0)), {1.0}) ==
          MatrixXd(Eigen::Vector2d(2.0, -2.0)));

    SUBCASE("finite differences of a quadratic task plus the regularizer")
    {
        for (int rep = 0; rep < 20; ++rep)
        {
            const MatrixXd target = oracle::gaussian(6, 2, rng);
            const MatrixXd x = oracle::gaussian(6, 2, rng);
            const double lambda = 0.1 + 0.2 * rep;
            // task: 0.5 |X - target|^2, gradient X - target
            auto objective = [&](const MatrixXd& t) {
                return 0.5 * (t - target).squaredNorm() + lambda * oracle::pairwise_dirichlet(g.weights(), t);
            };
            const MatrixXd analytic = joint_grad(MatrixXd(x - target), g, x, {lambda});
            CHECK(oracle::relative_error(analytic, oracle::central_difference(objective, x)) <= 1e-5);
        }
    }
    CHECK_THROWS_AS(joint_grad(MatrixXd(MatrixXd::Zero(5, 2)), g, theta, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(joint_grad(task_grad, g, MatrixXd(MatrixXd::Zero(6, 3)), {1.0}), std::invalid_argument);
}
