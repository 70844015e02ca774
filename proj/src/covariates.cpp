// SPDX-License-Identifier: Apache-2.0
#include "distad/covariates.hpp"

#include <cmath>
#include <numbers>

#include "distad/error.hpp"

namespace distad {

namespace {

constexpr double kDay = 86400.0;
constexpr double kWeek = 7.0 * kDay;

void push_cycle(Covariates& x, double seconds, double period) {
  const double phase = 2.0 * std::numbers::pi * std::fmod(seconds, period) / period;
  x.push_back(std::sin(phase));
  x.push_back(std::cos(phase));
}

}  // namespace

std::size_t CovariateSpec::width() const noexcept {
  return (hour_of_day ? 2 : 0) + (day_of_week ? 2 : 0) + (age ? 1 : 0);
}

void CovariateSpec::fit_age(std::size_t length) {
  if (length == 0) throw InvalidArgument("CovariateSpec: empty training range");
  const double n = static_cast<double>(length);
  age_origin = 0.5 * (n - 1.0);
  age_scale = length > 1 ? std::sqrt((n * n - 1.0) / 12.0) : 1.0;
}

Covariates time_features(const CovariateSpec& spec, std::int64_t interval_index) {
  if (spec.window_seconds <= 0) throw InvalidArgument("CovariateSpec: window must be positive");
  if (!(spec.age_scale > 0.0)) throw InvalidArgument("CovariateSpec: age scale must be positive");
  Covariates x;
  x.reserve(spec.width());
  const double seconds =
      static_cast<double>(interval_index) * static_cast<double>(spec.window_seconds);
  if (spec.hour_of_day) push_cycle(x, seconds, kDay);
  if (spec.day_of_week) push_cycle(x, seconds, kWeek);
  if (spec.age) x.push_back((static_cast<double>(interval_index) - spec.age_origin) / spec.age_scale);
  return x;
}

std::vector<Covariates> time_features(const CovariateSpec& spec, std::int64_t first,
                                      std::size_t count) {
  std::vector<Covariates> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(time_features(spec, first + static_cast<std::int64_t>(i)));
  }
  return out;
}

}  // namespace distad
