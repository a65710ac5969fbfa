#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace heatctl {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
};

// A finite union of disjoint closed intervals inside [0, horizon].
// Construction normalizes: sorts, merges overlaps, drops empty components.
class TimeSet {
 public:
  TimeSet() = default;
  TimeSet(std::vector<Interval> intervals, double horizon);

  static TimeSet full(double horizon) { return TimeSet({{0.0, horizon}}, horizon); }
  static TimeSet empty(double horizon) { return TimeSet({}, horizon); }

  const std::vector<Interval>& components() const { return comps_; }
  double horizon() const { return horizon_; }
  bool is_empty() const { return comps_.empty(); }

  double measure() const;
  double measure_within(double a, double b) const;

  // Components intersected with [a, b]; empty pieces dropped.
  std::vector<Interval> clipped(double a, double b) const;

  // {t : t + delta in E}, clipped to [0, horizon - delta].
  TimeSet shifted(double delta) const;

  // Longest component index (ties: earliest).
  std::size_t longest_component() const;

  std::string to_string() const;

 private:
  std::vector<Interval> comps_;
  double horizon_ = 0.0;
};

// Integral of e^{-mu (b - t)} over E intersected with [a, b], in closed form.
// mu = 0 reduces to the plain measure of the intersection.
double exp_weight_integral(const TimeSet& e, double a, double b, double mu);
double exp_weight_integral(const std::vector<Interval>& pieces, double b, double mu);

struct DensitySequenceOptions {
  double q = 0.5;              // geometric ratio in (0,1); C0 = 1/q
  int depth = 16;              // number of points t_1..t_depth
  int anchor = -1;             // component index; -1 = longest
  double margin = 0.0;         // t_tilde = component end - margin
  double start_fraction = 1.0 / 3.0;  // t_1 = c + (d - c) * start_fraction
  double span_cap = 1.0;       // enforce t_tilde - t_1 <= min(span_cap, 1)
};

// The accumulation point t_tilde and finite prefix t_1 < ... < t_n < t_tilde.
// Gaps are the primary representation; points are derived by prefix sums, so a
// delta-shift leaves every gap (and every ledger formula input) bit-identical.
class DensitySequence {
 public:
  DensitySequence(double t1, std::vector<double> gaps, double t_tilde,
                  double rho, double c0);

  double t1() const { return t1_; }
  double t_tilde() const { return t_tilde_; }
  double rho() const { return rho_; }
  double c0() const { return c0_; }
  const std::vector<double>& gaps() const { return gaps_; }
  std::size_t size() const { return gaps_.size() + 1; }

  double point(std::size_t i) const;  // 1-based: point(1) == t1
  std::vector<double> points() const;

  DensitySequence shifted(double delta) const;

 private:
  double t1_;
  std::vector<double> gaps_;  // gaps_[i] = t_{i+2} - t_{i+1}
  double t_tilde_;
  double rho_;
  double c0_;
};

DensitySequence build_density_sequence(const TimeSet& e,
                                       const DensitySequenceOptions& opt = {});

struct DensityCheck {
  std::size_t index;
  double measured_ratio;  // m(E cap [t_i, t_{i+1}]) / (t_{i+1} - t_i)
  double gap_ratio;       // (t_{i+1} - t_i) / (t_{i+2} - t_{i+1})
  bool rho_ok;
  bool c0_ok;
};

struct DensityReport {
  bool increasing = true;
  bool all_rho_ok = true;
  bool all_c0_ok = true;
  double tightest_rho = 0.0;  // min measured ratio
  double tightest_c0 = 0.0;   // max gap ratio
  std::vector<DensityCheck> checks;
  std::vector<std::size_t> failures;
  bool ok() const { return increasing && all_rho_ok && all_c0_ok; }
};

DensityReport verify_density_sequence(const DensitySequence& seq, const TimeSet& e);

}  // namespace heatctl
