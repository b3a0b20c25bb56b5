#include "nsvf/adam.hpp"

#include "nsvf/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace nsvf {

template <typename T>
void adam_step(std::span<T> params, std::span<const double> grads, AdamState& state, double lr,
               const AdamOptions& options) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw InvalidArgument("adam_step: parameter, gradient and state sizes differ");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = options.beta1 * state.m[i] + (1.0 - options.beta1) * g;
    state.v[i] = options.beta2 * state.v[i] + (1.0 - options.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] = static_cast<T>(params[i] - lr * m_hat / (std::sqrt(v_hat) + options.eps));
  }
}

template void adam_step<double>(std::span<double>, std::span<const double>, AdamState&, double, const AdamOptions&);
template void adam_step<float>(std::span<float>, std::span<const double>, AdamState&, double, const AdamOptions&);

double linear_decay_lr(double lr, std::int64_t step, std::int64_t total_steps) {
  if (total_steps <= 0) return lr;
  return lr * std::max(0.0, 1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

void remap_rows(AdamState& state, std::span<const std::int32_t> source, std::size_t width) {
  std::vector<double> m(source.size() * width, 0.0), v(source.size() * width, 0.0);
  const std::size_t old_rows = width == 0 ? 0 : state.m.size() / width;
  for (std::size_t r = 0; r < source.size(); ++r) {
    if (source[r] < 0) continue;
    const auto s = static_cast<std::size_t>(source[r]);
    if (s >= old_rows) throw InvalidArgument("remap_rows: source row out of range");
    std::copy_n(state.m.begin() + static_cast<std::ptrdiff_t>(s * width), width, m.begin() + static_cast<std::ptrdiff_t>(r * width));
    std::copy_n(state.v.begin() + static_cast<std::ptrdiff_t>(s * width), width, v.begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  state.m = std::move(m);
  state.v = std::move(v);
}

}  // namespace nsvf
