#include "dtpf/window.hpp"

#include <stdexcept>

namespace dtpf::oosm {

WindowStore::WindowStore(int ell, int n_sensors) : ell_(ell), n_sensors_(n_sensors) {
  if (ell < 0) throw std::invalid_argument("WindowStore: ell must be nonnegative");
  if (n_sensors < 0) throw std::invalid_argument("WindowStore: bad sensor count");
}

WindowSlot& WindowStore::push(int time, pf::GaussianSummary summary) {
  if (!slots_.empty() && time != slots_.back().time + 1)
    throw std::invalid_argument("WindowStore::push: time must advance by one");
  WindowSlot s;
  s.time = time;
  s.summary = std::move(summary);
  s.arrived.assign(n_sensors_, false);
  slots_.push_back(std::move(s));
  while (slots_.front().time < time - ell_ - 1) slots_.pop_front();
  return slots_.back();
}

bool WindowStore::has(int time) const {
  return !slots_.empty() && time >= slots_.front().time && time <= slots_.back().time;
}

WindowSlot& WindowStore::slot(int time) {
  if (!has(time)) throw std::out_of_range("WindowStore::slot: time outside the window");
  return slots_[static_cast<std::size_t>(time - slots_.front().time)];
}

const WindowSlot& WindowStore::slot(int time) const {
  if (!has(time)) throw std::out_of_range("WindowStore::slot: time outside the window");
  return slots_[static_cast<std::size_t>(time - slots_.front().time)];
}

int WindowStore::newest_time() const {
  if (slots_.empty()) throw std::out_of_range("WindowStore: empty");
  return slots_.back().time;
}

int WindowStore::oldest_time() const {
  if (slots_.empty()) throw std::out_of_range("WindowStore: empty");
  return slots_.front().time;
}

}  // namespace dtpf::oosm
