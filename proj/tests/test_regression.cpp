#include <doctest.h>

#include <cmath>
#include <vector>

#include "jumpbsde/regression.hpp"
#include "jumpbsde/rng.hpp"

using namespace jumpbsde;

TEST_CASE("recovers an exact polynomial") {
    SubStream stream(1, 0, 0);
    const std::size_t n = 500;
    std::vector<double> x(n), y(n);
    for (std::size_t p = 0; p < n; ++p) {
        x[p] = 4.0 * stream.uniform() - 2.0;
        y[p] = 2.0 + 3.0 * x[p] - x[p] * x[p];
    }
    RegressionConfig cfg;
    cfg.basis_degree = 2;
    cfg.ridge = 0.0;
    const StateRegression reg(x, cfg, 0);
    const std::vector<double> fitted = reg.fit(y);
    for (std::size_t p = 0; p < n; ++p)
        CHECK(fitted[p] == doctest::Approx(y[p]).epsilon(1e-9));
    CHECK(reg.residual_rms(y, fitted) <= 1e-9);
}

TEST_CASE("degenerate state collapses to the mean") {
    const std::vector<double> x(100, 3.0);
    std::vector<double> y(100);
    for (std::size_t p = 0; p < 100; ++p) y[p] = static_cast<double>(p);
    RegressionConfig cfg;
    cfg.basis_degree = 4;
    const StateRegression reg(x, cfg, 0);
    CHECK(reg.n_terms() == 1);
    const std::vector<double> fitted = reg.fit(y);
    for (double v : fitted) CHECK(v == doctest::Approx(49.5));
}

TEST_CASE("excluded samples do not influence the fit") {
    SubStream stream(2, 0, 0);
    const std::size_t n = 400;
    std::vector<double> x(n), y(n);
    std::vector<std::uint8_t> exclude(n, 0);
    for (std::size_t p = 0; p < n; ++p) {
        x[p] = stream.uniform();
        y[p] = 1.0 + x[p];
    }
    for (std::size_t p = 0; p < n; p += 4) {
        exclude[p] = 1;
        y[p] = 1e6;  // garbage that must not matter
    }
    RegressionConfig cfg;
    cfg.basis_degree = 1;
    cfg.ridge = 0.0;
    const StateRegression reg(x, cfg, 0, exclude);
    const std::vector<double> fitted = reg.fit(y);
    for (std::size_t p = 0; p < n; ++p)
        if (!exclude[p]) CHECK(fitted[p] == doctest::Approx(1.0 + x[p]).epsilon(1e-9));
}

TEST_CASE("two distinct states survive through the ridge rescue") {
    std::vector<double> x(50);
    std::vector<double> y(50);
    for (std::size_t p = 0; p < 50; ++p) {
        x[p] = p % 2 ? 1.0 : -1.0;
        y[p] = p % 2 ? 2.0 : 0.0;
    }
    RegressionConfig cfg;
    cfg.basis_degree = 4;  // rank-deficient Gram on two support points
    cfg.ridge = 0.0;
    const StateRegression reg(x, cfg, 3);
    const std::vector<double> fitted = reg.fit(y);
    for (std::size_t p = 0; p < 50; ++p)
        CHECK(fitted[p] == doctest::Approx(y[p]).epsilon(1e-4));
}

TEST_CASE("path-count guards") {
    RegressionConfig cfg;
    cfg.min_paths_per_fit = 32;
    const std::vector<double> x(10, 1.0);
    CHECK_THROWS_AS(StateRegression(x, cfg, 5), NumericalError);

    const std::vector<double> none;
    cfg.min_paths_per_fit = 1;
    CHECK_THROWS_AS(StateRegression(none, cfg, 5), NumericalError);

    try {
        const std::vector<double> few(10, 1.0);
        RegressionConfig strict;
        strict.min_paths_per_fit = 32;
        StateRegression reg(few, strict, 7);
        CHECK(false);
    } catch (const NumericalError& e) {
        CHECK(e.step() == 7);
    }
}
