#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace nsvf {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moments for one parameter group plus the shared step counter.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update. `state.step` is incremented first, so the
/// first call uses t = 1.
template <typename T>
void adam_step(std::span<T> params, std::span<const double> grads, AdamState& state, double lr,
               const AdamOptions& options = {});

/// Learning rate with linear decay to zero at total_steps.
double linear_decay_lr(double lr, std::int64_t step, std::int64_t total_steps);

/// Moments for a resized parameter group: row r of the new group takes old row
/// `source[r]` (or zeros when source[r] < 0). Rows are `width` values wide.
void remap_rows(AdamState& state, std::span<const std::int32_t> source, std::size_t width);

}  // namespace nsvf
