#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lotnet/nncore.hpp"

using namespace lotnet;

TEST_CASE("linear_forward examples") {
    Vector x(2);
    x << 1, -2;
    CHECK(linear_forward(Matrix::Identity(2, 2), Vector::Zero(2), x) == x);

    Vector b(2);
    b << 3, 3;
    CHECK(linear_forward(Matrix::Zero(2, 2), b, x) == b);

    Matrix W(2, 2);
    W << 1, 2, 0, 1;
    Vector b2(2);
    b2 << 1, 0;
    Vector ones = Vector::Ones(2);
    Vector expect(2);
    expect << 4, 1;
    CHECK(linear_forward(W, b2, ones) == expect);
}

TEST_CASE("linear_forward rejects bad shapes and non-finite input") {
    CHECK_THROWS_AS(linear_forward(Matrix::Zero(2, 3), Vector::Zero(2), Vector::Zero(2)), DimensionError);
    CHECK_THROWS_AS(linear_forward(Matrix::Zero(2, 2), Vector::Zero(3), Vector::Zero(2)), DimensionError);
    Vector x(2);
    x << 1, NAN;
    CHECK_THROWS_AS(linear_forward(Matrix::Identity(2, 2), Vector::Zero(2), x), NumericError);
}

TEST_CASE("adam first step on a scalar") {
    OptimState s(AdamConfig{0.1, 0.9, 0.999, 1e-8}, 1);
    Vector p = Vector::Zero(1);
    adam_step(p, Vector::Ones(1), s);
    CHECK(p(0) == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(s.step == 1);
}

TEST_CASE("adam with zero gradients leaves params and decays moments") {
    OptimState s(AdamConfig{}, 3);
    Vector p(3);
    p << 1, -2, 3;
    adam_step(p, Vector::Ones(3), s);
    const Vector after_first = p;
    const Vector m1 = s.m, v1 = s.v;
    // moments are nonzero, so a zero gradient still moves p; from a fresh state it must not
    OptimState fresh(AdamConfig{}, 3);
    Vector q = after_first;
    adam_step(q, Vector::Zero(3), fresh);
    CHECK(q == after_first);
    adam_step(p, Vector::Zero(3), s);
    CHECK((s.m.array().abs() < m1.array().abs()).all());
    CHECK((s.v.array() < v1.array()).all());
}

TEST_CASE("adam moves monotonically against a constant gradient") {
    OptimState s(AdamConfig{0.01}, 2);
    Vector p = Vector::Zero(2);
    Vector g(2);
    g << 1.0, -3.0;
    double prev0 = 0, prev1 = 0;
    for (int t = 0; t < 50; ++t) {
        adam_step(p, g, s);
        CHECK(p(0) < prev0);
        CHECK(p(1) > prev1);
        prev0 = p(0);
        prev1 = p(1);
    }
    CHECK(s.step == 50);
}

TEST_CASE("adam errors") {
    OptimState s(AdamConfig{}, 2);
    Vector p = Vector::Zero(2);
    Vector g(2);
    g << 1, INFINITY;
    CHECK_THROWS_AS(adam_step(p, g, s), NumericError);
    CHECK_THROWS_AS(adam_step(p, Vector::Zero(3), s), DimensionError);
    OptimState bad(AdamConfig{0.0}, 2);
    CHECK_THROWS_AS(adam_step(p, Vector::Zero(2), bad), ConfigError);
}

TEST_CASE("finite differences") {
    Vector x(2);
    x << 1, 2;
    Vector g = finite_diff_grad([](const Vector& v) { return v.squaredNorm(); }, x, 1e-5);
    CHECK(g(0) == doctest::Approx(2).epsilon(1e-8));
    CHECK(g(1) == doctest::Approx(4).epsilon(1e-8));

    g = finite_diff_grad([](const Vector&) { return 7.0; }, x, 1e-5);
    CHECK(g.norm() == 0.0);

    x << 3, 5;
    g = finite_diff_grad([](const Vector& v) { return v(0) * v(1); }, x, 1e-5);
    CHECK(g(0) == doctest::Approx(5).epsilon(1e-8));
    CHECK(g(1) == doctest::Approx(3).epsilon(1e-8));

    CHECK_THROWS_AS(finite_diff_grad([](const Vector&) { return 0.0; }, x, 0.0), ConfigError);
    CHECK_THROWS_AS(finite_diff_grad([](const Vector& v) { return v(0) > 3 ? NAN : 0.0; }, x, 1e-3), NumericError);
}

TEST_CASE("rng streams are fixed by the seed") {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const double u = a.uniform();
        CHECK(u == b.uniform());
        differs = differs || u != c.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    CHECK(differs);
    Rng d(1), e(1);
    CHECK(d.normal_matrix(3, 4) == e.normal_matrix(3, 4));
    for (int i = 0; i < 1000; ++i) CHECK(d.index(7) < 7);
}

TEST_CASE("normal variates have unit moments") {
    Rng r(5);
    const int n = 200000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        s += z;
        s2 += z * z;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("smooth activation derivatives match finite differences") {
    for (double sharp : {0.5, 1.0, 4.0}) {
        Activation act{ActivationKind::SmoothRelu, sharp};
        for (double a : {-30.0, -2.0, -0.1, 0.0, 0.3, 5.0, 40.0}) {
            Matrix A = Matrix::Constant(1, 1, a);
            const double h = 1e-6;
            const double fd = (act.value(Matrix::Constant(1, 1, a + h))(0, 0) - act.value(Matrix::Constant(1, 1, a - h))(0, 0)) / (2 * h);
            CHECK(act.deriv(A)(0, 0) == doctest::Approx(fd).epsilon(1e-6));
            const double fd2 = (act.deriv(Matrix::Constant(1, 1, a + h))(0, 0) - act.deriv(Matrix::Constant(1, 1, a - h))(0, 0)) / (2 * h);
            CHECK(std::abs(act.second_deriv(A)(0, 0) - fd2) <= 1e-6 * std::max(1.0, std::abs(fd2)));
            CHECK(act.value(A)(0, 0) >= std::max(a, 0.0));
        }
    }
}

TEST_CASE("mlp backward matches finite differences") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        const int in = 1 + static_cast<int>(rng.index(4));
        const int out = 1 + static_cast<int>(rng.index(3));
        std::vector<int> sizes{in};
        const int depth = 1 + static_cast<int>(rng.index(3));
        for (int l = 0; l < depth; ++l) sizes.push_back(1 + static_cast<int>(rng.index(6)));
        sizes.push_back(out);
        Mlp net(sizes, Activation{ActivationKind::SmoothRelu, 1.0 + rng.uniform()}, rng);
        const Matrix X = rng.normal_matrix(in, 3);
        const Matrix U = rng.normal_matrix(out, 3);

        Mlp::Tape tape;
        net.forward(X, tape);
        Vector grad = Vector::Zero(net.num_params());
        const Matrix dX = net.backward(tape, U, grad);

        const Vector theta = net.pack();
        auto f_params = [&](const Vector& t) {
            Mlp m = net;
            m.unpack(t);
            return (m.forward(X).array() * U.array()).sum();
        };
        CHECK(relative_error(grad, finite_diff_grad(f_params, theta, 1e-6)) <= 1e-4);

        Eigen::Map<const Vector> xflat(X.data(), X.size());
        auto f_input = [&](const Vector& xv) {
            Matrix Xp = Eigen::Map<const Matrix>(xv.data(), X.rows(), X.cols());
            return (net.forward(Xp).array() * U.array()).sum();
        };
        Eigen::Map<const Vector> dxflat(dX.data(), dX.size());
        CHECK(relative_error(dxflat, finite_diff_grad(f_input, xflat, 1e-6)) <= 1e-4);
    }
}

TEST_CASE("mlp pack and unpack round trip") {
    Rng rng(3);
    Mlp net({3, 5, 2}, Activation{}, rng);
    const Vector p = net.pack();
    CHECK(p.size() == net.num_params());
    CHECK(net.num_params() == 3 * 5 + 5 + 5 * 2 + 2);
    Mlp other({3, 5, 2}, Activation{}, rng);
    other.unpack(p);
    CHECK(other.pack() == p);
    CHECK_THROWS(other.unpack(Vector::Zero(3)));
}

TEST_CASE("mix_seed and fnv1a64 are stable") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(mix_seed(1, 2) == mix_seed(1, 2));
    CHECK(mix_seed(1, 2) != mix_seed(2, 1));
}
