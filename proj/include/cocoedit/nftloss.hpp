#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cocoedit/flowmodel.hpp"
#include "cocoedit/grid.hpp"

namespace cocoedit {

struct NftConfig {
  double beta = 1.0;
  double tau_plus = 0.001;
  double lambda_ner = 0.5;
  double lambda_er = 0.2;
  double kl_weight = 1e-4;

  void validate() const;
};

struct ImplicitVelocities {
  Latent plus;
  Latent minus;
};

/// v+ = (1 - beta) v_old + beta v_theta,  v- = (1 + beta) v_old - beta v_theta.
ImplicitVelocities implicit_velocities(std::span<const double> v_old,
                                       std::span<const double> v_theta, double beta);

/// z ⊙ edit and z ⊙ (1 - edit).
Latent project_er(std::span<const double> z, const EditMask& edit);
Latent project_ner(std::span<const double> z, const EditMask& edit);

/// RMS of (a - b) over the cells where `region` is 1.
double region_distance(std::span<const double> a, std::span<const double> b,
                       const EditMask& region);

/// Mean squared error over all cells.
double loss_pos(std::span<const double> x_plus_pred, std::span<const double> x0);
double loss_neg(std::span<const double> x_minus_pred, std::span<const double> x0);

/// max(0, d_ner(x+, c_I) - tau+), distance over the non-edit cells.
double reg_ner_plus(std::span<const double> x_plus_pred, std::span<const double> c_input,
                    const EditMask& edit, double tau_plus);

/// Adaptive threshold: d_er(x0, c_I) over the edit cells.
double tau_minus(std::span<const double> x0, std::span<const double> c_input,
                 const EditMask& edit);

/// max(0, tau- - d_er(x-, c_I)).
double reg_er_minus(std::span<const double> x_minus_pred, std::span<const double> c_input,
                    const EditMask& edit, double tau_minus_value);

/// Everything the objective needs for one (sample, t, noise) draw.
struct SampleContext {
  Latent x_t;
  double t = 0.5;
  std::vector<double> cond;
  Latent x0;       // group sample from the old policy
  Latent c_input;  // input latent
  EditMask edit;   // latent-shape edit mask, 1 = edit
  Latent v_old;    // old-policy velocity at (x_t, t, cond)
  std::optional<Latent> v_ref;  // frozen reference velocity, needed when kl_weight > 0
};

struct ObjectiveTerms {
  double l_pos = 0.0;
  double l_neg = 0.0;
  double l_ner = 0.0;
  double l_er = 0.0;
  double kl = 0.0;
  double total = 0.0;
  double d_ner = 0.0;
  double d_er = 0.0;
  double tau_minus = 0.0;
  bool ner_active = false;
  bool er_active = false;
};

struct ObjectiveResult {
  ObjectiveTerms terms;
  std::vector<double> grad;  // d total / d params of the current policy
};

/// r (L+ + lambda_ner L_ner+) + (1 - r)(L- + lambda_er L_er-) [+ kl_weight mean(v_theta - v_ref)^2]
ObjectiveTerms objective_terms(const VelocityField& model, const SampleContext& ctx, double r,
                               const NftConfig& cfg);

/// Same value as `objective_terms`, plus the analytic parameter gradient.
/// Hinge kinks use the zero subgradient.
ObjectiveResult total_objective(const VelocityField& model, const SampleContext& ctx, double r,
                                const NftConfig& cfg);

}  // namespace cocoedit
