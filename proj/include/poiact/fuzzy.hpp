#pragma once

#include <array>
#include <span>

namespace poiact {

inline constexpr int kHoursPerDay = 24;

/// Hour-of-day membership curve: ramps up over [a,b], plateau of 1 over
/// [b,c], ramps down over [c,d], zero outside [a,d). When `wraps_midnight` is
/// set, d (and possibly b, c) lie past midnight and are given as hours in
/// [0,24) on the next day, i.e. the curve is evaluated on [a, d+24].
class TrapezoidFuzzySet {
 public:
  TrapezoidFuzzySet() = default;
  TrapezoidFuzzySet(double a, double b, double c, double d, bool wraps_midnight = false);

  static TrapezoidFuzzySet zero() { return {}; }
  static TrapezoidFuzzySet whole_day() { return {0.0, 0.0, 24.0, 24.0}; }

  double a() const { return a_; }
  double b() const { return b_; }
  double c() const { return c_; }
  double d() const { return d_; }
  bool wraps_midnight() const { return wraps_; }
  bool is_zero() const { return zero_; }

  /// Membership at an hour in [0,24]; values outside are reduced mod 24.
  double membership(double hour) const;

 private:
  double unwrapped(double x) const;

  double a_ = 0.0, b_ = 0.0, c_ = 0.0, d_ = 0.0;
  bool wraps_ = false;
  bool zero_ = true;
};

/// Membership sampled at integer hours 0..23, the representation the area
/// quadrature works on.
using HourlyMembership = std::array<double, kHoursPerDay>;

HourlyMembership sample_hourly(const TrapezoidFuzzySet& set);

/// Pointwise max over several sets (union of an activity's scheduled periods).
HourlyMembership union_hourly(std::span<const TrapezoidFuzzySet> sets);

HourlyMembership pointwise_min(const HourlyMembership& x, const HourlyMembership& y);

/// Trapezoidal rule over the 24 hourly samples with unit step:
/// S(x) = sum_{i=0}^{22} (x_{i+1} + x_i) / 2.
double fuzzy_area(const HourlyMembership& samples);
double fuzzy_area(const TrapezoidFuzzySet& set);

}  // namespace poiact
