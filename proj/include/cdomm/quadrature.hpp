#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "cdomm/errors.hpp"

namespace cdomm::quad {

struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Golub-Welsch: eigenvalues of the symmetric Jacobi matrix are the nodes, squared first
// eigenvector components times the total mass are the weights.
inline Rule golub_welsch(const Eigen::VectorXd& offdiag, double mass) {
    const int n = static_cast<int>(offdiag.size()) + 1;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) J(i, i + 1) = J(i + 1, i) = offdiag(i);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    Rule r;
    for (int i = 0; i < n; ++i) {
        r.nodes.push_back(es.eigenvalues()(i));
        const double v = es.eigenvectors()(0, i);
        r.weights.push_back(mass * v * v);
    }
    return r;
}

// Nodes and weights integrating against the standard normal density; weights sum to 1.
inline Rule gauss_hermite(int n) {
    require(n >= 1, "gauss_hermite: n >= 1");
    if (n == 1) return {{0.0}, {1.0}};
    Eigen::VectorXd b(n - 1);
    for (int i = 1; i < n; ++i) b(i - 1) = std::sqrt(static_cast<double>(i));
    return golub_welsch(b, 1.0);
}

// Gauss-Legendre rule on [0,1]; weights sum to 1.
inline Rule gauss_legendre01(int n) {
    require(n >= 1, "gauss_legendre01: n >= 1");
    if (n == 1) return {{0.5}, {1.0}};
    Eigen::VectorXd b(n - 1);
    for (int i = 1; i < n; ++i) b(i - 1) = i / std::sqrt(4.0 * i * i - 1.0);
    Rule r = golub_welsch(b, 1.0);
    for (double& x : r.nodes) x = 0.5 * (x + 1.0);
    return r;
}

} // namespace cdomm::quad
