// Copyright 2026 The predserve Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "predserve/model/batch_sizing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "predserve/core/errors.hpp"

namespace predserve::model {

LatencyProfile::LatencyProfile(std::size_t window) : ring_(window) {
  if (window == 0) throw InvalidArgument("latency profile window must be at least 1");
}

void LatencyProfile::record(LatencySample sample) {
  if (sample.batch_size == 0 || sample.latency <= Duration::zero()) return;
  ring_[next_] = sample;
  next_ = (next_ + 1) % ring_.size();
  count_ = std::min(count_ + 1, ring_.size());
}

std::size_t LatencyProfile::distinct_batch_sizes() const {
  std::set<std::uint32_t> sizes;
  for (const auto& s : samples()) sizes.insert(s.batch_size);
  return sizes.size();
}

std::vector<LatencySample> LatencyProfile::samples() const {
  std::vector<LatencySample> out;
  out.reserve(count_);
  const std::size_t start = count_ < ring_.size() ? 0 : next_;
  for (std::size_t i = 0; i < count_; ++i) out.push_back(ring_[(start + i) % ring_.size()]);
  return out;
}

std::optional<LatencySample> LatencyProfile::last() const {
  if (count_ == 0) return std::nullopt;
  return ring_[(next_ + ring_.size() - 1) % ring_.size()];
}

std::string_view batch_strategy_name(BatchStrategy s) {
  switch (s) {
    case BatchStrategy::kAimd: return "aimd";
    case BatchStrategy::kQuantile: return "quantile";
    case BatchStrategy::kFixed: return "fixed";
  }
  return "unknown";
}

std::optional<BatchStrategy> parse_batch_strategy(std::string_view name) {
  if (name == "aimd") return BatchStrategy::kAimd;
  if (name == "quantile") return BatchStrategy::kQuantile;
  if (name == "fixed") return BatchStrategy::kFixed;
  return std::nullopt;
}

std::uint32_t aimd_update(LatencySample observed, Duration slo, std::uint32_t current_max,
                          std::uint32_t additive_step) {
  current_max = std::max<std::uint32_t>(current_max, 1);
  if (observed.latency > slo) {
    const auto reduced = static_cast<std::uint32_t>(std::floor(0.9 * current_max));
    return std::max<std::uint32_t>(1, reduced);
  }
  if (observed.batch_size >= current_max) {
    return static_cast<std::uint32_t>(
        std::min<std::uint64_t>(std::uint64_t{current_max} + additive_step, kMaxBatchCap));
  }
  return current_max;
}

namespace {

double pinball(double residual, double tau) {
  return residual >= 0 ? tau * residual : (tau - 1.0) * residual;
}

}  // namespace

std::optional<LinearFit> fit_latency_quantile(const LatencyProfile& profile, double tau) {
  if (profile.size() < kQuantileMinSamples ||
      profile.distinct_batch_sizes() < kQuantileMinDistinctSizes) {
    return std::nullopt;
  }
  const auto samples = profile.samples();
  const auto n = static_cast<double>(samples.size());
  std::vector<double> x, y;
  x.reserve(samples.size());
  y.reserve(samples.size());
  for (const auto& s : samples) {
    x.push_back(s.batch_size);
    y.push_back(to_millis(s.latency));
  }

  // Standardize both axes so one step size suits any latency scale.
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double sx = std::sqrt(sxx / n);
  const double sy = syy > 0 ? std::sqrt(syy / n) : 1.0;
  std::vector<double> z(x.size()), u(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    z[i] = (x[i] - mx) / sx;
    u[i] = (y[i] - my) / sy;
  }

  auto objective = [&](double a, double b) {
    double total = 0;
    for (std::size_t i = 0; i < z.size(); ++i) total += pinball(u[i] - a - b * z[i], tau);
    return total / n;
  };

  // Least-squares slope, intercept moved to the tau-quantile of residuals.
  double b = sxx > 0 ? (sxy / sxx) * sx / sy : 0.0;
  std::vector<double> residuals(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) residuals[i] = u[i] - b * z[i];
  auto k = static_cast<std::size_t>(std::ceil(tau * n)) - 1;
  k = std::min(k, residuals.size() - 1);
  std::nth_element(residuals.begin(), residuals.begin() + static_cast<std::ptrdiff_t>(k),
                   residuals.end());
  double a = residuals[k];

  double best_a = a, best_b = b, best = objective(a, b);
  for (int t = 0; t < kQuantileIterations; ++t) {
    double ga = 0, gb = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double w = (u[i] - a - b * z[i]) < 0 ? tau - 1.0 : tau;
      ga -= w;
      gb -= w * z[i];
    }
    ga /= n;
    gb /= n;
    const double norm = std::hypot(ga, gb);
    if (norm == 0) break;
    const double step = 0.1 / std::sqrt(t + 1.0);
    a -= step * ga / norm;
    b -= step * gb / norm;
    if (const double obj = objective(a, b); obj < best) {
      best = obj;
      best_a = a;
      best_b = b;
    }
  }

  // Back to batch-size and millisecond units.
  LinearFit fit;
  fit.slope_ms = best_b * sy / sx;
  fit.intercept_ms = my + best_a * sy - fit.slope_ms * mx;
  return fit;
}

std::uint32_t max_batch_within(const LinearFit& fit, Duration slo) {
  // 1ns of slack absorbs nanosecond rounding of the samples.
  const double budget = to_millis(slo) - fit.intercept_ms + 1e-6;
  if (fit.slope_ms <= 0) return budget >= 0 ? kMaxBatchCap : 1;
  const double b = std::floor(budget / fit.slope_ms);
  if (!(b >= 1)) return 1;
  if (b >= kMaxBatchCap) return kMaxBatchCap;
  return static_cast<std::uint32_t>(b);
}

std::optional<std::uint32_t> quantile_max_batch(const LatencyProfile& profile, Duration slo,
                                                double tau) {
  auto fit = fit_latency_quantile(profile, tau);
  if (!fit) return std::nullopt;
  return max_batch_within(*fit, slo);
}

BatchSizer::BatchSizer(BatchingOptions options)
    : options_(options),
      profile_(options.profile_window),
      aimd_max_(std::clamp<std::uint32_t>(options.initial_max, 1, options.max_batch_size)),
      current_(aimd_max_) {
  if (options_.max_batch_size == 0) throw InvalidArgument("max_batch_size must be at least 1");
  if (options_.strategy == BatchStrategy::kFixed) current_ = options_.max_batch_size;
}

std::uint32_t BatchSizer::observe(LatencySample sample, Duration slo) {
  profile_.record(sample);
  if (options_.strategy == BatchStrategy::kFixed) return current_;
  aimd_max_ = std::min(aimd_update(sample, slo, aimd_max_, options_.additive_step),
                       options_.max_batch_size);
  current_ = aimd_max_;
  if (options_.strategy == BatchStrategy::kQuantile) {
    if (quantile_max_ && ++since_fit_ < options_.refit_interval) {
      current_ = *quantile_max_;
    } else if (auto q = quantile_max_batch(profile_, slo, options_.tau)) {
      since_fit_ = 0;
      quantile_max_ = std::min(*q, options_.max_batch_size);
      current_ = *quantile_max_;
    }
    if (quantile_max_) aimd_max_ = current_;
  }
  return current_;
}

}  // namespace predserve::model
