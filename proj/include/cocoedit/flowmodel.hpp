#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cocoedit {

/// Flattened latent (row-major grid cells).
using Latent = std::vector<double>;

// Rectified-flow schedule: alpha(t) = 1 - t, sigma(t) = t. t = 0 is data,
// t = 1 is noise.
struct NoiseSchedule {
  static constexpr double alpha(double t) { return 1.0 - t; }
  static constexpr double sigma(double t) { return t; }
  static constexpr double alpha_dot = -1.0;
  static constexpr double sigma_dot = 1.0;
};

/// (1 - t) x0 + t x1. Throws InvalidArgument for t outside [0,1].
Latent interpolate(std::span<const double> x0, std::span<const double> x1, double t);

/// x1 - x0.
Latent target_velocity(std::span<const double> x0, std::span<const double> x1);

/// x_t - t v: the clean-sample estimate implied by a velocity.
Latent v_to_x(std::span<const double> x_t, double t, std::span<const double> v);

/// Parametric velocity v(x_t, t, c). Evaluation is a pure function of the
/// parameter vector.
class VelocityField {
 public:
  virtual ~VelocityField() = default;

  virtual std::size_t latent_dim() const = 0;
  virtual std::size_t cond_dim() const = 0;
  virtual std::span<double> params() = 0;
  virtual std::span<const double> params() const = 0;

  virtual Latent evaluate(std::span<const double> x_t, double t,
                          std::span<const double> cond) const = 0;

  /// Adds d<upstream, v(x_t,t,c)>/dparams into `grad` (same length as params).
  virtual void accumulate_param_grad(std::span<const double> x_t, double t,
                                     std::span<const double> cond,
                                     std::span<const double> upstream,
                                     std::span<double> grad) const = 0;

  virtual std::unique_ptr<VelocityField> clone() const = 0;
};

enum class Activation { Tanh };

/// Multilayer perceptron on z = [x_t ‖ t ‖ c] with tanh hidden layers and a
/// linear output. With `skip`, a linear map S [z ‖ z / max(t, 0.05)] (no bias)
/// is added to the output. Gradients are hand-derived reverse mode.
///
/// Parameter layout: for each layer W (out × in, row-major) then b; S last.
class MlpField final : public VelocityField {
 public:
  MlpField(std::size_t latent_dim, std::size_t cond_dim, std::vector<std::size_t> hidden,
           bool skip = false);

  std::size_t latent_dim() const override { return latent_dim_; }
  std::size_t cond_dim() const override { return cond_dim_; }
  std::span<double> params() override { return params_; }
  std::span<const double> params() const override { return params_; }
  const std::vector<std::size_t>& hidden() const { return hidden_; }
  bool skip() const { return skip_; }
  static constexpr double kSkipTimeFloor = 0.05;
  Activation activation() const { return Activation::Tanh; }

  Latent evaluate(std::span<const double> x_t, double t,
                  std::span<const double> cond) const override;
  void accumulate_param_grad(std::span<const double> x_t, double t,
                             std::span<const double> cond, std::span<const double> upstream,
                             std::span<double> grad) const override;
  std::unique_ptr<VelocityField> clone() const override;

  /// Sizes of every layer including input and output.
  std::vector<std::size_t> layer_sizes() const;
  static std::size_t param_count(std::size_t in_dim, const std::vector<std::size_t>& hidden,
                                 std::size_t out_dim, bool skip = false);

  /// Seeded initialization: weights N(0, 1/fan_in) scaled by `output_scale` on the
  /// last layer, biases zero.
  void initialize(std::uint64_t seed, double output_scale = 1.0);

 private:
  std::vector<double> input_vector(std::span<const double> x_t, double t,
                                   std::span<const double> cond) const;
  static std::vector<double> skip_features(const std::vector<double>& input, double t);

  std::size_t latent_dim_;
  std::size_t cond_dim_;
  std::vector<std::size_t> hidden_;
  bool skip_ = false;
  std::vector<double> params_;
};

MlpField build_mlp_field(std::size_t latent_dim, std::size_t cond_dim,
                         std::vector<std::size_t> hidden, std::uint64_t seed,
                         double output_scale = 1.0, bool skip = false);

struct LossAndGrad {
  double value = 0.0;
  std::vector<double> grad;  // over model params
};

/// ||(x1 - x0) - v(x_t, t, c)||^2 (sum over cells) and its parameter gradient.
LossAndGrad fm_loss(const VelocityField& model, std::span<const double> x0,
                    std::span<const double> x1, double t, std::span<const double> cond);

/// Euler integration from t = 1 to t = 0 with `steps` uniform steps.
Latent sample_ode(const VelocityField& model, std::span<const double> x1,
                  std::span<const double> cond, int steps);

// Checkpoints are JSON: {"magic": "cocoedit-mlp-v1", "latent_dim", "cond_dim",
// "hidden": [...], "skip": bool, "activation": "tanh", "params": [...]}.
inline constexpr const char* kCheckpointMagic = "cocoedit-mlp-v1";

std::string checkpoint_to_string(const MlpField& field);
MlpField checkpoint_from_string(const std::string& text);
void save_checkpoint(const MlpField& field, const std::filesystem::path& path);
MlpField load_checkpoint(const std::filesystem::path& path);

}  // namespace cocoedit
