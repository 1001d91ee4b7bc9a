#pragma once

#include <deque>
#include <vector>

#include "dtpf/pf.hpp"

namespace dtpf::oosm {

using mat::Matrix;
using mat::Vector;

// A delayed measurement: acquired at origin_time, received at arrival_time.
struct OosmRecord {
  int sensor_id = 0;
  int origin_time = 0;   // tau
  int arrival_time = 0;  // k
  Vector value;
};

struct StoredMeasurement {
  int sensor_id = 0;
  Vector value;
};

struct WindowSlot {
  int time = -1;
  pf::GaussianSummary summary;
  // Measurements made at this origin step that the filter has incorporated
  // (undelayed ones plus OOSMs admitted by some strategy). GARP reruns
  // replay exactly this list.
  std::vector<StoredMeasurement> measurements;
  // Per sensor: has the measurement from this origin step reached the
  // fusion centre (processed or not)? Drives the arrival probabilities.
  std::vector<bool> arrived;
};

// Rolling store over the last ell+2 steps: per-step Gaussian summaries,
// incorporated measurements and arrival bookkeeping.
class WindowStore {
 public:
  WindowStore(int ell, int n_sensors);

  // Appends a slot for `time` (must advance by one) and evicts anything
  // older than time - ell - 1.
  WindowSlot& push(int time, pf::GaussianSummary summary);

  bool has(int time) const;
  WindowSlot& slot(int time);
  const WindowSlot& slot(int time) const;

  int newest_time() const;
  int oldest_time() const;
  int ell() const { return ell_; }

 private:
  int ell_;
  int n_sensors_;
  std::deque<WindowSlot> slots_;
};

}  // namespace dtpf::oosm
