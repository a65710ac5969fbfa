#include "heatctl/time_sets.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace heatctl {

TimeSet::TimeSet(std::vector<Interval> intervals, double horizon)
    : horizon_(horizon) {
  if (horizon < 0.0) throw std::invalid_argument("TimeSet: negative horizon");
  for (const auto& iv : intervals) {
    if (!(iv.lo <= iv.hi))
      throw std::invalid_argument("TimeSet: interval with lo > hi");
    if (iv.lo < 0.0 || iv.hi > horizon)
      throw std::invalid_argument("TimeSet: interval outside [0, horizon]");
  }
  std::sort(intervals.begin(), intervals.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  for (const auto& iv : intervals) {
    if (iv.length() <= 0.0) continue;
    if (!comps_.empty() && iv.lo <= comps_.back().hi)
      comps_.back().hi = std::max(comps_.back().hi, iv.hi);
    else
      comps_.push_back(iv);
  }
}

double TimeSet::measure() const {
  double m = 0.0;
  for (const auto& iv : comps_) m += iv.length();
  return m;
}

std::vector<Interval> TimeSet::clipped(double a, double b) const {
  std::vector<Interval> out;
  for (const auto& iv : comps_) {
    double lo = std::max(iv.lo, a), hi = std::min(iv.hi, b);
    if (hi > lo) out.push_back({lo, hi});
  }
  return out;
}

double TimeSet::measure_within(double a, double b) const {
  double m = 0.0;
  for (const auto& iv : clipped(a, b)) m += iv.length();
  return m;
}

TimeSet TimeSet::shifted(double delta) const {
  if (delta < 0.0) throw std::invalid_argument("TimeSet::shifted: delta < 0");
  if (delta > horizon_)
    throw std::invalid_argument("TimeSet::shifted: delta exceeds horizon");
  double new_horizon = horizon_ - delta;
  std::vector<Interval> out;
  for (const auto& iv : comps_) {
    double lo = std::max(iv.lo - delta, 0.0);
    double hi = std::min(iv.hi - delta, new_horizon);
    if (hi > lo) out.push_back({lo, hi});
  }
  return TimeSet(std::move(out), new_horizon);
}

std::size_t TimeSet::longest_component() const {
  if (comps_.empty()) throw std::runtime_error("TimeSet: empty set has no components");
  std::size_t best = 0;
  for (std::size_t j = 1; j < comps_.size(); ++j)
    if (comps_[j].length() > comps_[best].length()) best = j;
  return best;
}

std::string TimeSet::to_string() const {
  std::ostringstream os;
  for (std::size_t j = 0; j < comps_.size(); ++j) {
    if (j) os << " u ";
    os << "[" << comps_[j].lo << "," << comps_[j].hi << "]";
  }
  if (comps_.empty()) os << "{}";
  return os.str();
}

double exp_weight_integral(const std::vector<Interval>& pieces, double b, double mu) {
  double total = 0.0;
  for (const auto& iv : pieces) {
    if (mu == 0.0) {
      total += iv.length();
    } else {
      // int_lo^hi e^{-mu (b-t)} dt = (e^{-mu (b-hi)} - e^{-mu (b-lo)}) / mu
      total += (std::exp(-mu * (b - iv.hi)) - std::exp(-mu * (b - iv.lo))) / mu;
    }
  }
  return total;
}

double exp_weight_integral(const TimeSet& e, double a, double b, double mu) {
  if (b < a) throw std::invalid_argument("exp_weight_integral: b < a");
  if (mu < 0.0) throw std::invalid_argument("exp_weight_integral: mu < 0");
  return exp_weight_integral(e.clipped(a, b), b, mu);
}

DensitySequence::DensitySequence(double t1, std::vector<double> gaps,
                                 double t_tilde, double rho, double c0)
    : t1_(t1), gaps_(std::move(gaps)), t_tilde_(t_tilde), rho_(rho), c0_(c0) {
  if (gaps_.empty()) throw std::invalid_argument("DensitySequence: need >= 2 points");
  for (double g : gaps_)
    if (!(g > 0.0)) throw std::invalid_argument("DensitySequence: nonpositive gap");
}

double DensitySequence::point(std::size_t i) const {
  if (i < 1 || i > size()) throw std::out_of_range("DensitySequence::point");
  double t = t1_;
  for (std::size_t k = 0; k + 1 < i; ++k) t += gaps_[k];
  return t;
}

std::vector<double> DensitySequence::points() const {
  std::vector<double> ps(size());
  ps[0] = t1_;
  for (std::size_t k = 0; k < gaps_.size(); ++k) ps[k + 1] = ps[k] + gaps_[k];
  return ps;
}

DensitySequence DensitySequence::shifted(double delta) const {
  if (delta < 0.0 || delta > t1_)
    throw std::invalid_argument("DensitySequence::shifted: delta outside [0, t1]");
  return DensitySequence(t1_ - delta, gaps_, t_tilde_ - delta, rho_, c0_);
}

DensitySequence build_density_sequence(const TimeSet& e,
                                       const DensitySequenceOptions& opt) {
  if (e.is_empty())
    throw std::invalid_argument("build_density_sequence: E has no component");
  if (!(opt.q > 0.0 && opt.q < 1.0))
    throw std::invalid_argument("build_density_sequence: q outside (0,1)");
  if (opt.depth < 2)
    throw std::invalid_argument("build_density_sequence: depth < 2");

  std::size_t idx = opt.anchor >= 0 ? static_cast<std::size_t>(opt.anchor)
                                    : e.longest_component();
  if (idx >= e.components().size())
    throw std::invalid_argument("build_density_sequence: anchor out of range");
  const Interval comp = e.components()[idx];

  double t_tilde = comp.hi - opt.margin;
  if (!(t_tilde > comp.lo))
    throw std::invalid_argument("build_density_sequence: margin swallows component");

  // t1 = c + (d - c) * start_fraction, then pushed toward t_tilde if the
  // side condition t_tilde - t1 <= min(span_cap, 1) would fail.
  double t1 = comp.lo + (comp.hi - comp.lo) * opt.start_fraction;
  double cap = std::min(opt.span_cap, 1.0);
  if (!(cap > 0.0))
    throw std::invalid_argument("build_density_sequence: nonpositive span cap");
  if (t_tilde - t1 > cap) t1 = t_tilde - cap;
  double span = t_tilde - t1;
  if (!(span > 0.0))
    throw std::invalid_argument(
        "build_density_sequence: cannot satisfy side condition in component");

  // t_i = t_tilde - span * q^{i-1}; gaps stored directly so that shifts and
  // the constants ledger see identical inputs for every delta.
  std::vector<double> gaps(static_cast<std::size_t>(opt.depth) - 1);
  double scale = span;
  for (auto& g : gaps) {
    g = scale * (1.0 - opt.q);
    scale *= opt.q;
  }

  DensitySequence seq(t1, gaps, t_tilde, 1.0, 1.0 / opt.q);
  auto report = verify_density_sequence(seq, e);
  double rho = std::min(report.tightest_rho, 1.0);
  if (!(rho > 0.0))
    throw std::runtime_error("build_density_sequence: certified rho is zero");
  return DensitySequence(t1, seq.gaps(), t_tilde, rho, 1.0 / opt.q);
}

DensityReport verify_density_sequence(const DensitySequence& seq, const TimeSet& e) {
  DensityReport rep;
  auto pts = seq.points();
  const auto& gaps = seq.gaps();
  rep.tightest_rho = 1e300;
  rep.tightest_c0 = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    DensityCheck chk{};
    chk.index = i + 1;
    // the stored gaps are authoritative; points are derived prefix sums
    double gap = gaps[i];
    if (!(gap > 0.0) || !(pts[i + 1] < seq.t_tilde() + 1e-15)) rep.increasing = false;
    chk.measured_ratio = e.measure_within(pts[i], pts[i + 1]) / gap;
    chk.rho_ok = chk.measured_ratio + 1e-12 >= seq.rho();
    rep.tightest_rho = std::min(rep.tightest_rho, chk.measured_ratio);
    if (i + 2 < pts.size()) {
      chk.gap_ratio = gap / gaps[i + 1];
      chk.c0_ok = chk.gap_ratio <= seq.c0() * (1.0 + 1e-12);
      rep.tightest_c0 = std::max(rep.tightest_c0, chk.gap_ratio);
    } else {
      chk.gap_ratio = 0.0;
      chk.c0_ok = true;
    }
    if (!chk.rho_ok) rep.all_rho_ok = false;
    if (!chk.c0_ok) rep.all_c0_ok = false;
    if (!chk.rho_ok || !chk.c0_ok) rep.failures.push_back(chk.index);
    rep.checks.push_back(chk);
  }
  return rep;
}

}  // namespace heatctl
