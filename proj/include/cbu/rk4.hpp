#pragma once

namespace cbu::detail {

// One classic fourth-order Runge-Kutta step for y' = f(t, y) where y is any
// Eigen expression-compatible value type.
template <typename Value, typename Rhs>
Value rk4_step(const Rhs& f, double t, const Value& y, double h) {
  const Value k1 = f(t, y);
  const Value k2 = f(t + 0.5 * h, Value(y + (0.5 * h) * k1));
  const Value k3 = f(t + 0.5 * h, Value(y + (0.5 * h) * k2));
  const Value k4 = f(t + h, Value(y + h * k3));
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace cbu::detail
