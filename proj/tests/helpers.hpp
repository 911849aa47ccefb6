#pragma once

#include <string>

#include "lotnet/otsolve.hpp"

namespace testing_helpers {

using namespace lotnet;

inline PointCloud cloud(const Matrix& pts, const std::string& id = "x") {
    PointCloud c;
    c.id = id;
    c.points = pts;
    return c;
}

// q |x|^2 / 2 + <lin, x> + bias, with the hidden layer switched off.
inline Icnn quadratic_potential(int dim, double q, const Vector& lin, double bias = 0.0) {
    IcnnConfig cfg;
    cfg.dim = dim;
    cfg.widths = {2};
    cfg.quadratic = q;
    Icnn net{cfg, IcnnParams::zeros(cfg)};
    net.params.layers.back().Wx = lin.transpose();
    net.params.layers.back().b(0) = bias;
    return net;
}

// Pair whose transport map is x -> q x + shift.
inline DualPair affine_pair(int dim, double q, const Vector& shift) {
    DualPair p;
    p.psi = quadratic_potential(dim, q, shift);
    p.phi = quadratic_potential(dim, 1.0, Vector::Zero(dim));
    return p;
}

inline Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

}  // namespace testing_helpers
