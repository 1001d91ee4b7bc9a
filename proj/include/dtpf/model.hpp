#pragma once

#include <functional>

#include "dtpf/mat.hpp"

namespace dtpf::model {

using mat::Matrix;
using mat::Vector;

// Nonlinear state transition x_k = f(x_{k-1}) + process noise.
struct StateModel {
  int state_dim = 0;
  std::function<Vector(const Vector&)> f;
  std::function<Matrix(const Vector&)> jacobian;
  Matrix process_noise;  // V, symmetric PSD
};

// One sensor: y = h(x) + measurement noise. `angular` marks sensors whose
// innovations wrap at +-pi.
struct SensorModel {
  int sensor_id = 0;
  int meas_dim = 1;
  double pos_x = 0.0;
  double pos_y = 0.0;
  std::function<Vector(const Vector&)> h;
  std::function<Matrix(const Vector&)> jacobian;
  Matrix meas_noise;  // Q, symmetric PD
  bool angular = false;
};

struct Transition {
  Vector value;     // f(x)
  Matrix jacobian;  // F(x), d(f)/dx of the full nonlinear map
};

// Coordinated-turn step for x = [px, py, vx, vy, omega] over `period`
// seconds. The omega ~ 0 singularity is handled by 4th-order series.
Transition ct_transition(const Vector& x, double period = 1.0);

StateModel coordinated_turn_model(const Matrix& process_noise, double period = 1.0);

struct Bearing {
  double value;     // radians in (-pi, pi]
  Matrix jacobian;  // 1 x state_dim, nonzero only in the position columns
};

// Four-quadrant bearing of the target as seen from `sensor`. Throws if the
// target sits exactly on the sensor.
Bearing bearing_measure(const Vector& x, const SensorModel& sensor);

SensorModel bearing_sensor(int id, double x, double y, double sigma, int state_dim = 5);

// (a - b) wrapped to (-pi, pi].
double angle_diff(double a, double b);

// y - h(x), componentwise wrapped when the sensor is angular.
Vector innovation(const SensorModel& sensor, const Vector& y, const Vector& hx);

}  // namespace dtpf::model
