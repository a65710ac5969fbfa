#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "heatctl/time_sets.hpp"

using namespace heatctl;

namespace {

// Composite-midpoint oracle for the exponential weight integral.
double exp_weight_quadrature(const TimeSet& e, double a, double b, double mu,
                             int panels = 200000) {
  double sum = 0.0;
  for (const Interval& c : e.clipped(a, b)) {
    double h = c.length() / panels;
    for (int p = 0; p < panels; ++p) {
      double t = c.lo + (p + 0.5) * h;
      sum += std::exp(-mu * (b - t)) * h;
    }
  }
  return sum;
}

}  // namespace

TEST_CASE("interval union normalization merges and sorts") {
  TimeSet e({{0.6, 0.9}, {0.1, 0.3}, {0.25, 0.4}, {0.5, 0.5}}, 1.0);
  REQUIRE(e.components().size() == 2);
  CHECK(e.components()[0].lo == doctest::Approx(0.1));
  CHECK(e.components()[0].hi == doctest::Approx(0.4));
  CHECK(e.components()[1].lo == doctest::Approx(0.6));
  CHECK(e.components()[1].hi == doctest::Approx(0.9));
  CHECK(e.measure() == doctest::Approx(0.6));
  CHECK(e.horizon() == 1.0);
}

TEST_CASE("measure_within and clipped agree with hand values") {
  TimeSet e({{0.0, 0.4}, {0.6, 1.0}}, 1.0);
  CHECK(e.measure_within(0.2, 0.8) == doctest::Approx(0.4));
  CHECK(e.measure_within(0.45, 0.55) == 0.0);
  auto pieces = e.clipped(0.3, 0.7);
  REQUIRE(pieces.size() == 2);
  CHECK(pieces[0].lo == doctest::Approx(0.3));
  CHECK(pieces[0].hi == doctest::Approx(0.4));
  CHECK(pieces[1].lo == doctest::Approx(0.6));
  CHECK(pieces[1].hi == doctest::Approx(0.7));
}

TEST_CASE("shifted set is the preimage of the shift") {
  TimeSet e({{0.0, 0.4}, {0.6, 1.0}}, 1.0);
  TimeSet s = e.shifted(0.25);
  // {t : t + 0.25 in E} inside [0, 0.75] = [0, 0.15] u [0.35, 0.75]
  REQUIRE(s.components().size() == 2);
  CHECK(s.components()[0].lo == doctest::Approx(0.0));
  CHECK(s.components()[0].hi == doctest::Approx(0.15));
  CHECK(s.components()[1].lo == doctest::Approx(0.35));
  CHECK(s.components()[1].hi == doctest::Approx(0.75));
  CHECK(s.horizon() == doctest::Approx(0.75));
}

TEST_CASE("exp_weight_integral matches quadrature oracle") {
  TimeSet e({{0.05, 0.3}, {0.45, 0.7}, {0.9, 1.0}}, 1.0);
  for (double mu : {0.0, 1.0, 17.5, 250.0}) {
    for (auto [a, b] : {std::pair{0.0, 1.0}, {0.2, 0.95}, {0.5, 0.6}}) {
      double exact = exp_weight_integral(e, a, b, mu);
      double quad = exp_weight_quadrature(e, a, b, mu);
      CHECK(exact == doctest::Approx(quad).epsilon(1e-9));
    }
  }
  // mu = 0 reduces to the measure
  CHECK(exp_weight_integral(e, 0.0, 1.0, 0.0) == doctest::Approx(e.measure()));
}

TEST_CASE("density sequence: increasing points, gap ratio, accumulation") {
  TimeSet e({{0.0, 0.4}, {0.6, 1.0}}, 1.0);
  DensitySequenceOptions opt;
  opt.q = 0.5;
  opt.depth = 16;
  opt.margin = 0.02;
  DensitySequence seq = build_density_sequence(e, opt);

  std::vector<double> pts = seq.points();
  REQUIRE(pts.size() == seq.size());
  for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i] > pts[i - 1]);
  CHECK(pts.back() < seq.t_tilde());
  CHECK(seq.t_tilde() - seq.t1() <= 1.0 + 1e-12);
  CHECK(seq.c0() == doctest::Approx(2.0));

  const auto& gaps = seq.gaps();
  for (std::size_t i = 0; i + 1 < gaps.size(); ++i)
    CHECK(gaps[i] / gaps[i + 1] <= seq.c0() * (1.0 + 1e-12));

  DensityReport rep = verify_density_sequence(seq, e);
  CHECK(rep.ok());
  CHECK(rep.tightest_rho >= seq.rho() * (1.0 - 1e-12));
}

TEST_CASE("density sequence shift keeps gaps bit-identical") {
  TimeSet e({{0.0, 0.4}, {0.6, 1.0}}, 1.0);
  DensitySequence seq = build_density_sequence(e);
  for (double delta : {0.0, seq.t1() / 3.0, seq.t1()}) {
    DensitySequence s = seq.shifted(delta);
    REQUIRE(s.gaps().size() == seq.gaps().size());
    for (std::size_t i = 0; i < s.gaps().size(); ++i)
      CHECK(s.gaps()[i] == seq.gaps()[i]);  // exact, not approximate
    CHECK(s.t1() == seq.t1() - delta);
    CHECK(s.rho() == seq.rho());
    CHECK(s.c0() == seq.c0());
  }
}

TEST_CASE("density sequence anchors in the longest component") {
  TimeSet e({{0.0, 0.1}, {0.3, 0.9}}, 1.0);
  DensitySequence seq = build_density_sequence(e);
  CHECK(seq.t1() >= 0.3);
  CHECK(seq.t_tilde() <= 0.9 + 1e-12);
  // full density inside a single component
  DensityReport rep = verify_density_sequence(seq, e);
  CHECK(rep.ok());
  CHECK(rep.tightest_rho == doctest::Approx(1.0));
}

TEST_CASE("degenerate inputs are rejected or empty") {
  CHECK(TimeSet::empty(1.0).is_empty());
  CHECK(TimeSet::empty(1.0).measure() == 0.0);
  CHECK_THROWS(build_density_sequence(TimeSet::empty(1.0)));
  DensitySequenceOptions bad;
  bad.q = 1.5;
  CHECK_THROWS(build_density_sequence(TimeSet::full(1.0), bad));
}

TEST_CASE("randomized: exp_weight_integral additivity over splits") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    double a = 0.2 * u(rng), w1 = 0.3 * u(rng), g = 0.1 * u(rng),
           w2 = 0.3 * u(rng);
    TimeSet e({{a, a + w1}, {a + w1 + g, a + w1 + g + w2}}, 1.0);
    double mu = 50.0 * u(rng);
    double mid = u(rng);
    // int over [0, mid] weighted to endpoint mid, then decayed to 1, plus the
    // remainder, must equal the full integral to endpoint 1
    double left = exp_weight_integral(e, 0.0, mid, mu) * std::exp(-mu * (1.0 - mid));
    double right = exp_weight_integral(e, mid, 1.0, mu);
    double full = exp_weight_integral(e, 0.0, 1.0, mu);
    CHECK(left + right == doctest::Approx(full).epsilon(1e-12));
  }
}
