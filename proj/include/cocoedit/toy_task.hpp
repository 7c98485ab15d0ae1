#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cocoedit/grid.hpp"
#include "cocoedit/rewards.hpp"

namespace cocoedit {

struct SquareSpec {
  std::size_t row = 2;
  std::size_t col = 2;
  std::size_t size = 3;
};

/// Synthetic local edit: recolour an axis-aligned square on a textured
/// background to a target intensity, leaving the background untouched.
struct ToyEditTask {
  std::string id;
  std::size_t n = 8;
  Grid2D input;          // background texture with the square drawn in
  EditMask object;       // the square itself
  EditMask edit_mask;    // object, optionally dilated; 1 = edit
  double target_intensity = 0.5;
  double target_scale = 0.5;

  std::size_t latent_dim() const { return n * n; }
  /// [input cells ‖ target intensity ‖ object mask cells].
  std::vector<double> condition() const;
  static std::size_t cond_dim(std::size_t n) { return 2 * n * n + 1; }
  EditSpec edit_spec() const { return {object, target_intensity, target_scale}; }
};

/// Deterministic task. `target` < 0 draws a target at least 0.3 away from the
/// square's current intensity.
ToyEditTask generate_toy_task(std::uint64_t seed, std::size_t n, const SquareSpec& square,
                              int dilation_radius = 1, double target = -1.0,
                              double target_scale = 0.5);

/// Pool of tasks with seeded square placement (sizes in [min_size, max_size]).
std::vector<ToyEditTask> make_task_pool(std::uint64_t seed, std::size_t count, std::size_t n,
                                        std::size_t min_size, std::size_t max_size,
                                        int dilation_radius, double target_scale);

/// Imperfect edit of the kind a base editor produces: the square moves a
/// fraction `strength` toward the target, the edit spills into the rings
/// around it with weights spill, spill^2, the rest of the grid drifts with
/// weight `drift`, and the background gets iid noise.
Grid2D base_editor_output(const ToyEditTask& task, double strength, double spill,
                          double background_noise, std::mt19937_64& rng, double drift = 0.0);

}  // namespace cocoedit
