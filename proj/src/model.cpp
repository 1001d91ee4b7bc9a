#include "dtpf/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dtpf::model {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kOmegaSeries = 1e-6;

// sin(wT)/w, (cos(wT)-1)/w and their w-derivatives; series below the switch.
struct CtCoeffs {
  double s, c, ds, dc;
};

CtCoeffs ct_coeffs(double w, double T) {
  CtCoeffs out;
  const double th = w * T;
  if (std::abs(w) < kOmegaSeries) {
    const double th2 = th * th;
    const double th4 = th2 * th2;
    out.s = T * (1.0 - th2 / 6.0 + th4 / 120.0);
    out.c = T * (-th / 2.0 + th * th2 / 24.0);
    out.ds = T * T * (-th / 3.0 + th * th2 / 30.0);
    out.dc = T * T * (-0.5 + th2 / 8.0 - th4 / 144.0);
    return out;
  }
  const double sn = std::sin(th), cs = std::cos(th);
  out.s = sn / w;
  out.c = (cs - 1.0) / w;
  out.ds = (th * cs - sn) / (w * w);
  out.dc = (-th * sn - cs + 1.0) / (w * w);
  return out;
}

}  // namespace

Transition ct_transition(const Vector& x, double period) {
  if (x.size() != 5) throw std::invalid_argument("ct_transition: state must be 5-dimensional");
  const double vx = x[2], vy = x[3], w = x[4];
  const double th = w * period;
  const double sn = std::sin(th), cs = std::cos(th);
  const CtCoeffs co = ct_coeffs(w, period);

  Vector f(5);
  f[0] = x[0] + co.s * vx + co.c * vy;
  f[1] = x[1] - co.c * vx + co.s * vy;
  f[2] = cs * vx - sn * vy;
  f[3] = sn * vx + cs * vy;
  f[4] = w;

  Matrix F = Matrix::Identity(5, 5);
  F(0, 2) = co.s;
  F(0, 3) = co.c;
  F(1, 2) = -co.c;
  F(1, 3) = co.s;
  F(2, 2) = cs;
  F(2, 3) = -sn;
  F(3, 2) = sn;
  F(3, 3) = cs;
  F(0, 4) = co.ds * vx + co.dc * vy;
  F(1, 4) = -co.dc * vx + co.ds * vy;
  F(2, 4) = period * (-sn * vx - cs * vy);
  F(3, 4) = period * (cs * vx - sn * vy);
  return {std::move(f), std::move(F)};
}

StateModel coordinated_turn_model(const Matrix& process_noise, double period) {
  if (process_noise.rows() != 5 || process_noise.cols() != 5)
    throw std::invalid_argument("coordinated_turn_model: process noise must be 5x5");
  StateModel m;
  m.state_dim = 5;
  m.f = [period](const Vector& x) { return ct_transition(x, period).value; };
  m.jacobian = [period](const Vector& x) { return ct_transition(x, period).jacobian; };
  m.process_noise = mat::symmetrized(process_noise);
  return m;
}

namespace {

Bearing bearing_from(const Vector& x, double sx, double sy) {
  const double dx = x[0] - sx;
  const double dy = x[1] - sy;
  const double r2 = dx * dx + dy * dy;
  if (r2 <= 0.0)
    throw std::domain_error("bearing_measure: target coincides with the sensor");
  Bearing b;
  b.value = std::atan2(dy, dx);
  if (b.value <= -kPi) b.value = kPi;  // keep the range half-open
  b.jacobian = Matrix::Zero(1, x.size());
  b.jacobian(0, 0) = -dy / r2;
  b.jacobian(0, 1) = dx / r2;
  return b;
}

}  // namespace

Bearing bearing_measure(const Vector& x, const SensorModel& sensor) {
  return bearing_from(x, sensor.pos_x, sensor.pos_y);
}

SensorModel bearing_sensor(int id, double x, double y, double sigma, int /*state_dim*/) {
  SensorModel s;
  s.sensor_id = id;
  s.meas_dim = 1;
  s.pos_x = x;
  s.pos_y = y;
  s.angular = true;
  s.meas_noise = Matrix::Constant(1, 1, sigma * sigma);
  s.h = [x, y](const Vector& state) {
    return Vector::Constant(1, bearing_from(state, x, y).value);
  };
  s.jacobian = [x, y](const Vector& state) { return bearing_from(state, x, y).jacobian; };
  return s;
}

double angle_diff(double a, double b) {
  double d = std::fmod(a - b, 2.0 * kPi);
  if (d > kPi) d -= 2.0 * kPi;
  if (d <= -kPi) d += 2.0 * kPi;
  return d;
}

Vector innovation(const SensorModel& sensor, const Vector& y, const Vector& hx) {
  if (y.size() != hx.size()) throw std::invalid_argument("innovation: dimension mismatch");
  if (!sensor.angular) return y - hx;
  Vector e(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) e[i] = angle_diff(y[i], hx[i]);
  return e;
}

}  // namespace dtpf::model
