// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "distad/dynamics.hpp"

namespace distad {

/// Calendar features derived from interval timestamps
/// (timestamp = interval_index * window_seconds).
struct CovariateSpec {
  std::int64_t window_seconds = 3600;
  bool hour_of_day = true;  // sin/cos with a 24 h period
  bool day_of_week = true;  // sin/cos with a 7 day period
  /// Linear age term (interval_index - age_origin) / age_scale.
  bool age = false;
  double age_origin = 0.0;
  double age_scale = 1.0;

  std::size_t width() const noexcept;

  /// Standardizes the age term over intervals [0, length).
  void fit_age(std::size_t length);

  friend bool operator==(const CovariateSpec&, const CovariateSpec&) = default;
};

Covariates time_features(const CovariateSpec& spec, std::int64_t interval_index);

/// time_features for intervals first .. first + count - 1.
std::vector<Covariates> time_features(const CovariateSpec& spec, std::int64_t first,
                                      std::size_t count);

}  // namespace distad
