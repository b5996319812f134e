#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <tuple>

namespace nslb::detail {
namespace {

struct Plan {
  fftw_complex* buffer = nullptr;
  fftw_plan plan = nullptr;
  std::mutex lock;

  ~Plan() {
    if (plan) fftw_destroy_plan(plan);
    if (buffer) fftw_free(buffer);
  }
};

std::mutex& planner_lock() {
  static std::mutex m;
  return m;
}

Plan& plan_for(const TorusGrid& grid, int sign) {
  static std::map<std::tuple<int, int, int>, std::unique_ptr<Plan>> cache;
  std::lock_guard<std::mutex> guard(planner_lock());
  auto key = std::make_tuple(grid.dim(), grid.modes(), sign);
  auto it = cache.find(key);
  if (it != cache.end()) return *it->second;

  auto plan = std::make_unique<Plan>();
  plan->buffer = fftw_alloc_complex(grid.size());
  int dims[3] = {grid.modes(), grid.modes(), grid.modes()};
  plan->plan = fftw_plan_dft(grid.dim(), dims, plan->buffer, plan->buffer, sign, FFTW_ESTIMATE);
  Plan& ref = *plan;
  cache.emplace(key, std::move(plan));
  return ref;
}

}  // namespace

void forward_fft(const TorusGrid& grid, std::span<const double> in, std::span<Complex> out) {
  Plan& p = plan_for(grid, FFTW_FORWARD);
  std::lock_guard<std::mutex> guard(p.lock);
  const std::size_t n = grid.size();
  for (std::size_t j = 0; j < n; ++j) {
    p.buffer[j][0] = in[j];
    p.buffer[j][1] = 0.0;
  }
  fftw_execute(p.plan);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = Complex(p.buffer[j][0], p.buffer[j][1]) * scale;
}

void inverse_fft(const TorusGrid& grid, std::span<const Complex> in, std::span<double> out) {
  Plan& p = plan_for(grid, FFTW_BACKWARD);
  std::lock_guard<std::mutex> guard(p.lock);
  const std::size_t n = grid.size();
  for (std::size_t j = 0; j < n; ++j) {
    p.buffer[j][0] = in[j].real();
    p.buffer[j][1] = in[j].imag();
  }
  fftw_execute(p.plan);
  for (std::size_t j = 0; j < n; ++j) out[j] = p.buffer[j][0];
}

}  // namespace nslb::detail
