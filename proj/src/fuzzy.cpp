#include "poiact/fuzzy.hpp"

#include <algorithm>
#include <cmath>

#include "poiact/error.hpp"

namespace poiact {

TrapezoidFuzzySet::TrapezoidFuzzySet(double a, double b, double c, double d, bool wraps_midnight)
    : wraps_(wraps_midnight), zero_(false) {
  // Wrapped breakpoints after midnight are stored on the unwrapped axis.
  a_ = a;
  b_ = (wraps_midnight && b < a) ? b + kHoursPerDay : b;
  c_ = (wraps_midnight && c < a) ? c + kHoursPerDay : c;
  d_ = (wraps_midnight && d < a) ? d + kHoursPerDay : d;
  const bool in_range = a_ >= 0.0 && a_ <= kHoursPerDay && d_ <= 2.0 * kHoursPerDay;
  if (!in_range || !(a_ <= b_ && b_ <= c_ && c_ <= d_) || (!wraps_midnight && d_ > kHoursPerDay)) {
    throw Error(ErrorCode::kInvalidMembership, "trapezoid breakpoints must satisfy 0 <= a <= b <= c <= d <= 24");
  }
}

double TrapezoidFuzzySet::unwrapped(double x) const {
  // Support is [a, d): a zero-width falling edge drops at d, so a rectangle
  // over [6,10] samples to four unit hours and integrates to 4.
  if (x < a_ || x >= d_) return 0.0;
  if (x >= b_ && x <= c_) return 1.0;
  if (x < b_) return (x - a_) / (b_ - a_);
  return (d_ - x) / (d_ - c_);
}

double TrapezoidFuzzySet::membership(double hour) const {
  if (zero_) return 0.0;
  double h = std::fmod(hour, static_cast<double>(kHoursPerDay));
  if (h < 0.0) h += kHoursPerDay;
  double m = unwrapped(h);
  if (wraps_) m = std::max(m, unwrapped(h + kHoursPerDay));
  return m;
}

HourlyMembership sample_hourly(const TrapezoidFuzzySet& set) {
  HourlyMembership out{};
  for (int i = 0; i < kHoursPerDay; ++i) out[i] = set.membership(static_cast<double>(i));
  return out;
}

HourlyMembership union_hourly(std::span<const TrapezoidFuzzySet> sets) {
  HourlyMembership out{};
  for (const auto& s : sets) {
    const auto h = sample_hourly(s);
    for (int i = 0; i < kHoursPerDay; ++i) out[i] = std::max(out[i], h[i]);
  }
  return out;
}

HourlyMembership pointwise_min(const HourlyMembership& x, const HourlyMembership& y) {
  HourlyMembership out{};
  for (int i = 0; i < kHoursPerDay; ++i) out[i] = std::min(x[i], y[i]);
  return out;
}

double fuzzy_area(const HourlyMembership& x) {
  constexpr double h = 1.0;
  double s = 0.0;
  for (int i = 0; i <= 22; ++i) s += (x[i + 1] + x[i]) / 2.0 * h;
  return s;
}

double fuzzy_area(const TrapezoidFuzzySet& set) { return fuzzy_area(sample_hourly(set)); }

}  // namespace poiact
