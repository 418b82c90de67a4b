#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>

namespace mrca {

/// Adam moments for one flat parameter vector.
template <typename Scalar>
struct AdamState {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector m;
  Vector v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(Eigen::Index n) : m(Vector::Zero(n)), v(Vector::Zero(n)) {}

  /// One descent step: params -= lr * m_hat / (sqrt(v_hat) + eps).
  template <typename Derived>
  void apply(Eigen::MatrixBase<Derived>& params, const Vector& grad, double lr) {
    if (m.size() != grad.size()) {
      m = Vector::Zero(grad.size());
      v = Vector::Zero(grad.size());
    }
    ++step;
    const Scalar b1 = Scalar(beta1), b2 = Scalar(beta2);
    m = b1 * m + (Scalar(1) - b1) * grad;
    v = b2 * v + (Scalar(1) - b2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    const Scalar step_size = Scalar(lr / c1);
    const Scalar inv_sqrt_c2 = Scalar(1.0 / std::sqrt(c2));
    params.derived().array() -=
        step_size * m.array() / (v.array().sqrt() * inv_sqrt_c2 + Scalar(epsilon));
  }
};

/// Rescales `grad` in place so its L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
template <typename Derived>
double clip_global_norm(Eigen::MatrixBase<Derived>& grad, double max_norm) {
  const double norm = static_cast<double>(grad.norm());
  if (max_norm > 0.0 && norm > max_norm) {
    grad.derived() *= static_cast<typename Derived::Scalar>(max_norm / norm);
  }
  return norm;
}

}  // namespace mrca
