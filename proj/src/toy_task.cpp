#include "cocoedit/toy_task.hpp"

#include <cmath>
#include <numbers>

#include "cocoedit/errors.hpp"

namespace cocoedit {

std::vector<double> ToyEditTask::condition() const {
  std::vector<double> c;
  c.reserve(cond_dim(n));
  c.insert(c.end(), input.values().begin(), input.values().end());
  c.push_back(target_intensity);
  for (auto b : object.bits()) c.push_back(b);
  return c;
}

ToyEditTask generate_toy_task(std::uint64_t seed, std::size_t n, const SquareSpec& square,
                              int dilation_radius, double target, double target_scale) {
  if (n == 0) throw InvalidArgument("toy task: grid size must be positive");
  if (square.size == 0 || square.row + square.size > n || square.col + square.size > n) {
    throw InvalidArgument("toy task: square does not fit in the grid");
  }
  if (square.size * square.size == n * n) {
    throw InvalidArgument("toy task: square covers the whole grid");
  }
  if (!(target_scale > 0.0)) throw InvalidArgument("toy task: target_scale must be positive");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Low-frequency texture: a sum of two random plane waves in [0.25, 0.75].
  const double fx1 = 0.3 + 0.6 * unit(rng), fy1 = 0.3 + 0.6 * unit(rng);
  const double fx2 = 0.3 + 0.6 * unit(rng), fy2 = 0.3 + 0.6 * unit(rng);
  const double p1 = 2 * std::numbers::pi * unit(rng), p2 = 2 * std::numbers::pi * unit(rng);

  ToyEditTask task;
  task.id = "toy-" + std::to_string(seed);
  task.n = n;
  task.target_scale = target_scale;
  task.input = Grid2D(n, n);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const double v = std::sin(fx1 * x + fy1 * y + p1) + std::sin(fx2 * x - fy2 * y + p2);
      task.input(y, x) = 0.5 + 0.125 * v;
    }

  const double object_value = 0.15 + 0.7 * unit(rng);
  task.object = EditMask(n, n);
  for (std::size_t y = square.row; y < square.row + square.size; ++y)
    for (std::size_t x = square.col; x < square.col + square.size; ++x) {
      task.object.set(y, x, true);
      task.input(y, x) = object_value;
    }
  task.edit_mask = dilate(task.object, dilation_radius);
  if (task.edit_mask.all()) throw InvalidArgument("toy task: dilated mask covers the whole grid");

  if (target < 0.0) {
    // Pick from the part of [0.05, 0.95] at least 0.3 away from object_value.
    const double lo_len = std::max(0.0, (object_value - 0.3) - 0.05);
    const double hi_len = std::max(0.0, 0.95 - (object_value + 0.3));
    const double u = unit(rng) * (lo_len + hi_len);
    target = u < lo_len ? 0.05 + u : object_value + 0.3 + (u - lo_len);
  }
  if (!(target >= 0.0 && target <= 1.0)) throw InvalidArgument("toy task: target outside [0,1]");
  task.target_intensity = target;
  return task;
}

std::vector<ToyEditTask> make_task_pool(std::uint64_t seed, std::size_t count, std::size_t n,
                                        std::size_t min_size, std::size_t max_size,
                                        int dilation_radius, double target_scale) {
  if (min_size == 0 || min_size > max_size || max_size >= n) {
    throw InvalidArgument("task pool: need 0 < min_size <= max_size < n");
  }
  std::mt19937_64 rng(seed);
  std::vector<ToyEditTask> pool;
  pool.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> size_d(min_size, max_size);
    const std::size_t s = size_d(rng);
    std::uniform_int_distribution<std::size_t> pos_d(0, n - s);
    SquareSpec sq{pos_d(rng), pos_d(rng), s};
    pool.push_back(generate_toy_task(rng(), n, sq, dilation_radius, -1.0, target_scale));
    pool.back().id = "task-" + std::to_string(i);
  }
  return pool;
}

Grid2D base_editor_output(const ToyEditTask& task, double strength, double spill,
                          double background_noise, std::mt19937_64& rng, double drift) {
  const EditMask ring1 = dilate(task.object, 1);
  const EditMask ring2 = dilate(task.object, 2);
  std::normal_distribution<double> noise(0.0, 1.0);
  Grid2D out = task.input;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double w = 0.0;
    if (task.object[i]) w = 1.0;
    else if (ring1[i]) w = spill;
    else if (ring2[i]) w = spill * spill;
    else w = drift;
    out[i] += strength * w * (task.target_intensity - task.input[i]);
    if (!task.object[i]) out[i] += background_noise * noise(rng);
  }
  return out;
}

}  // namespace cocoedit
