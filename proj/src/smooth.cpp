#include "dtpf/smooth.hpp"

#include <algorithm>
#include <stdexcept>

namespace dtpf::smooth {

const SmoothedStep& SmoothedWindow::at_time(int tau) const {
  if (!has(tau)) throw std::out_of_range("SmoothedWindow: step outside the smoothed range");
  return steps[static_cast<std::size_t>(tau - steps.front().time)];
}

SmoothedWindow rts_smooth(const oosm::WindowStore& window, const model::StateModel& model,
                          const std::vector<model::SensorModel>& sensors) {
  const int k = window.newest_time();
  const int start = std::max(window.oldest_time(), k - window.ell());
  const int count = k - start + 1;

  SmoothedWindow sw;
  sw.current_time = k;
  sw.steps.resize(count);

  auto sensor_jacobians = [&](const Vector& mean) {
    std::vector<Matrix> out;
    out.reserve(sensors.size());
    for (const auto& s : sensors) out.push_back(s.jacobian(mean));
    return out;
  };

  // Newest step: smoothed == filtered.
  {
    SmoothedStep& st = sw.steps.back();
    const auto& slot = window.slot(k);
    st.time = k;
    st.mean = slot.summary.mean;
    st.cov = mat::symmetrized(slot.summary.cov);
    st.transition_jac = model.jacobian(slot.summary.mean);
    st.product = Matrix::Identity(model.state_dim, model.state_dim);
    st.cross = st.cov;
    st.sensor_jac = sensor_jacobians(st.mean);
  }

  for (int tau = k - 1; tau >= start; --tau) {
    const auto& slot = window.slot(tau);
    const SmoothedStep& next = sw.steps[static_cast<std::size_t>(tau - start + 1)];
    SmoothedStep& st = sw.steps[static_cast<std::size_t>(tau - start)];
    st.time = tau;

    const Vector& mu = slot.summary.mean;
    const Matrix cov = mat::symmetrized(slot.summary.cov);
    st.transition_jac = model.jacobian(mu);
    const Matrix& A = st.transition_jac;

    const Matrix predicted = mat::symmetrized(A * cov * A.transpose() + model.process_noise);
    // K = cov A^T predicted^{-1}
    const Matrix gain = mat::spd_solve(predicted, A * cov).transpose();
    st.mean = mu + gain * (next.mean - model.f(mu));
    st.cov = mat::symmetrized(cov + gain * (next.cov - predicted) * gain.transpose());
    st.product = next.product * A;
    // cov(X_tau, X_k) through the backward Markov chain of the smoother;
    // keeps the (X_tau, X_k) joint positive semidefinite.
    st.cross = gain * next.cross;
    st.sensor_jac = sensor_jacobians(st.mean);
  }
  return sw;
}

Matrix meas_covariance(const SmoothedWindow& sw, int tau, const model::SensorModel& sensor) {
  const SmoothedStep& st = sw.at_time(tau);
  const Matrix& H = st.sensor_jac.at(static_cast<std::size_t>(sensor.sensor_id));
  return mat::symmetrized(H * st.cov * H.transpose() + sensor.meas_noise);
}

Matrix cross_covariance(const SmoothedWindow& sw, int tau, const model::SensorModel& sensor) {
  const SmoothedStep& st = sw.at_time(tau);
  const Matrix& H = st.sensor_jac.at(static_cast<std::size_t>(sensor.sensor_id));
  return st.product * st.cov * H.transpose();
}

}  // namespace dtpf::smooth
