#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cavspin/quadrature.hpp"

using namespace cavspin;

namespace {
constexpr double kSqrtPi = 1.7724538509055160;
}

TEST_CASE("gauss_hermite basic structure") {
  for (int order : {1, 2, 7, 40, 41, 80}) {
    const QuadratureRule r = gauss_hermite(order);
    REQUIRE(int(r.nodes.size()) == order);
    REQUIRE(int(r.weights.size()) == order);

    double wsum = 0.0;
    for (int i = 0; i < order; ++i) {
      REQUIRE(r.weights[i] > 0.0);
      if (i > 0) REQUIRE(r.nodes[i] > r.nodes[i - 1]);
      wsum += r.weights[i];
    }
    REQUIRE(wsum == Catch::Approx(kSqrtPi).epsilon(1e-13));

    // Symmetry about zero.
    for (int i = 0; i < order / 2; ++i) {
      REQUIRE(r.nodes[i] == Catch::Approx(-r.nodes[order - 1 - i]).margin(1e-13));
      REQUIRE(r.weights[i] == Catch::Approx(r.weights[order - 1 - i]).epsilon(1e-13));
    }
  }
}

TEST_CASE("gauss_hermite polynomial moments") {
  const QuadratureRule r = gauss_hermite(40);
  double m1 = 0, m2 = 0, m3 = 0, m4 = 0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    const double x = r.nodes[i], w = r.weights[i];
    m1 += w * x;
    m2 += w * x * x;
    m3 += w * x * x * x;
    m4 += w * x * x * x * x;
  }
  REQUIRE(std::abs(m1) < 1e-14);
  REQUIRE(std::abs(m3) < 1e-13);
  REQUIRE(m2 == Catch::Approx(0.5 * kSqrtPi).epsilon(1e-13));
  REQUIRE(m4 == Catch::Approx(0.75 * kSqrtPi).epsilon(1e-13));
}

TEST_CASE("phase_average_rule reproduces Gaussian cosine moments") {
  for (double v : {0.0, 0.04, 0.5, 1.0, 2.0, 3.7}) {
    const QuadratureRule r = phase_average_rule(v);
    double wsum = 0, c1 = 0, c2 = 0, s1 = 0;
    for (std::size_t k = 0; k < r.nodes.size(); ++k) {
      wsum += r.weights[k];
      c1 += r.weights[k] * std::cos(r.nodes[k]);
      s1 += r.weights[k] * std::sin(r.nodes[k]);
      c2 += r.weights[k] * std::cos(r.nodes[k]) * std::cos(r.nodes[k]);
    }
    REQUIRE(wsum == Catch::Approx(1.0).epsilon(1e-13));
    REQUIRE(std::abs(s1) < 1e-14);
    // E[cos phi] = exp(-v/2), E[cos^2 phi] = (1 + exp(-2v))/2 for phi ~ N(0, v)
    REQUIRE(c1 == Catch::Approx(std::exp(-0.5 * v)).margin(1e-12));
    REQUIRE(c2 == Catch::Approx(0.5 * (1.0 + std::exp(-2.0 * v))).margin(1e-12));
  }
}

TEST_CASE("default order is converged against a doubled rule") {
  // Design gate: 40 vs 80 nodes must agree below 1e-9 on the moments the
  // dephasing average actually uses, across the whole variance range reached
  // by the toolkit (up to ~3.7 rad^2 at the top of the curvature scan).
  for (double v : {0.01, 0.2, 1.0, 2.5, 3.7}) {
    const QuadratureRule a = phase_average_rule(v, 40);
    const QuadratureRule b = phase_average_rule(v, 80);
    for (auto f : {+[](double x) { return std::cos(x); },
                   +[](double x) { return std::sin(x) * std::sin(x); },
                   +[](double x) { return std::cos(2.0 * x); }}) {
      double ea = 0, eb = 0;
      for (std::size_t k = 0; k < a.nodes.size(); ++k) ea += a.weights[k] * f(a.nodes[k]);
      for (std::size_t k = 0; k < b.nodes.size(); ++k) eb += b.weights[k] * f(b.nodes[k]);
      REQUIRE(std::abs(ea - eb) < 1e-9);
    }
  }
}

TEST_CASE("quadrature input validation") {
  REQUIRE_THROWS_AS(gauss_hermite(0), std::invalid_argument);
  REQUIRE_THROWS_AS(phase_average_rule(-0.1), std::invalid_argument);
}
