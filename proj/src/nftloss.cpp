#include "cocoedit/nftloss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cocoedit/errors.hpp"

namespace cocoedit {

void NftConfig::validate() const {
  if (!(beta > 0.0)) throw InvalidArgument("nft.beta must be positive");
  if (tau_plus < 0.0) throw InvalidArgument("nft.tau_plus must be non-negative");
  if (lambda_ner < 0.0 || lambda_er < 0.0) throw InvalidArgument("nft lambdas must be non-negative");
  if (kl_weight < 0.0) throw InvalidArgument("nft.kl_weight must be non-negative");
}

namespace {

void require_same(std::size_t a, std::size_t b, const char* who) {
  if (a != b) throw InvalidArgument(std::string(who) + ": dimension mismatch");
}

double mean_sq_diff(std::span<const double> a, std::span<const double> b) {
  require_same(a.size(), b.size(), "diffusion loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

// RMS distance over cells where (mask[i] == want).
double rms_where(std::span<const double> a, std::span<const double> b, const EditMask& mask,
                 std::uint8_t want, const char* who) {
  require_same(a.size(), b.size(), who);
  require_same(a.size(), mask.size(), who);
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (mask[i] != want) continue;
    const double d = a[i] - b[i];
    acc += d * d;
    ++n;
  }
  if (n == 0) throw EmptyRegionError(std::string(who) + ": region is empty");
  return std::sqrt(acc / static_cast<double>(n));
}

std::size_t count_where(const EditMask& mask, std::uint8_t want) {
  return want ? mask.count() : mask.size() - mask.count();
}

}  // namespace

ImplicitVelocities implicit_velocities(std::span<const double> v_old,
                                       std::span<const double> v_theta, double beta) {
  require_same(v_old.size(), v_theta.size(), "implicit_velocities");
  ImplicitVelocities out{Latent(v_old.size()), Latent(v_old.size())};
  for (std::size_t i = 0; i < v_old.size(); ++i) {
    out.plus[i] = (1.0 - beta) * v_old[i] + beta * v_theta[i];
    out.minus[i] = (1.0 + beta) * v_old[i] - beta * v_theta[i];
  }
  return out;
}

Latent project_er(std::span<const double> z, const EditMask& edit) {
  require_same(z.size(), edit.size(), "project_er");
  Latent out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = edit[i] ? z[i] : 0.0;
  return out;
}

Latent project_ner(std::span<const double> z, const EditMask& edit) {
  require_same(z.size(), edit.size(), "project_ner");
  Latent out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = edit[i] ? 0.0 : z[i];
  return out;
}

double region_distance(std::span<const double> a, std::span<const double> b,
                       const EditMask& region) {
  return rms_where(a, b, region, 1, "region_distance");
}

double loss_pos(std::span<const double> x_plus_pred, std::span<const double> x0) {
  return mean_sq_diff(x_plus_pred, x0);
}

double loss_neg(std::span<const double> x_minus_pred, std::span<const double> x0) {
  return mean_sq_diff(x_minus_pred, x0);
}

double reg_ner_plus(std::span<const double> x_plus_pred, std::span<const double> c_input,
                    const EditMask& edit, double tau_plus) {
  const double d = rms_where(x_plus_pred, c_input, edit, 0, "reg_ner_plus");
  return std::max(0.0, d - tau_plus);
}

double tau_minus(std::span<const double> x0, std::span<const double> c_input,
                 const EditMask& edit) {
  return rms_where(x0, c_input, edit, 1, "tau_minus");
}

double reg_er_minus(std::span<const double> x_minus_pred, std::span<const double> c_input,
                    const EditMask& edit, double tau_minus_value) {
  const double d = rms_where(x_minus_pred, c_input, edit, 1, "reg_er_minus");
  return std::max(0.0, tau_minus_value - d);
}

namespace {

struct Forward {
  Latent v_theta;
  Latent x_plus;
  Latent x_minus;
  ObjectiveTerms terms;
};

Forward forward(const VelocityField& model, const SampleContext& ctx, double r,
                const NftConfig& cfg) {
  Forward f;
  f.v_theta = model.evaluate(ctx.x_t, ctx.t, ctx.cond);
  const ImplicitVelocities iv = implicit_velocities(ctx.v_old, f.v_theta, cfg.beta);
  f.x_plus = v_to_x(ctx.x_t, ctx.t, iv.plus);
  f.x_minus = v_to_x(ctx.x_t, ctx.t, iv.minus);

  ObjectiveTerms& o = f.terms;
  o.l_pos = loss_pos(f.x_plus, ctx.x0);
  o.l_neg = loss_neg(f.x_minus, ctx.x0);
  o.d_ner = rms_where(f.x_plus, ctx.c_input, ctx.edit, 0, "reg_ner_plus");
  o.d_er = rms_where(f.x_minus, ctx.c_input, ctx.edit, 1, "reg_er_minus");
  o.tau_minus = tau_minus(ctx.x0, ctx.c_input, ctx.edit);
  o.l_ner = std::max(0.0, o.d_ner - cfg.tau_plus);
  o.l_er = std::max(0.0, o.tau_minus - o.d_er);
  o.ner_active = o.d_ner > cfg.tau_plus;
  o.er_active = o.d_er < o.tau_minus;
  if (cfg.kl_weight > 0.0) {
    if (!ctx.v_ref) throw InvalidArgument("total_objective: kl_weight > 0 needs v_ref");
    o.kl = mean_sq_diff(f.v_theta, *ctx.v_ref);
  }
  o.total = r * (o.l_pos + cfg.lambda_ner * o.l_ner) +
            (1.0 - r) * (o.l_neg + cfg.lambda_er * o.l_er) + cfg.kl_weight * o.kl;
  return f;
}

}  // namespace

ObjectiveTerms objective_terms(const VelocityField& model, const SampleContext& ctx, double r,
                               const NftConfig& cfg) {
  return forward(model, ctx, r, cfg).terms;
}

ObjectiveResult total_objective(const VelocityField& model, const SampleContext& ctx, double r,
                                const NftConfig& cfg) {
  Forward f = forward(model, ctx, r, cfg);
  const ObjectiveTerms& o = f.terms;
  const std::size_t n = ctx.x0.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const std::size_t n_ner = count_where(ctx.edit, 0);
  const std::size_t n_er = count_where(ctx.edit, 1);

  // dTotal/dx+ and dTotal/dx-.
  std::vector<double> g_plus(n), g_minus(n);
  for (std::size_t i = 0; i < n; ++i) {
    g_plus[i] = r * 2.0 * (f.x_plus[i] - ctx.x0[i]) * inv_n;
    g_minus[i] = (1.0 - r) * 2.0 * (f.x_minus[i] - ctx.x0[i]) * inv_n;
  }
  if (o.ner_active && cfg.lambda_ner > 0.0) {
    const double s = r * cfg.lambda_ner / (static_cast<double>(n_ner) * o.d_ner);
    for (std::size_t i = 0; i < n; ++i)
      if (!ctx.edit[i]) g_plus[i] += s * (f.x_plus[i] - ctx.c_input[i]);
  }
  if (o.er_active && cfg.lambda_er > 0.0 && o.d_er > 0.0) {
    const double s = (1.0 - r) * cfg.lambda_er / (static_cast<double>(n_er) * o.d_er);
    for (std::size_t i = 0; i < n; ++i)
      if (ctx.edit[i]) g_minus[i] -= s * (f.x_minus[i] - ctx.c_input[i]);
  }

  // x+ = x_t - t((1-b) v_old + b v),  x- = x_t - t((1+b) v_old - b v).
  const double tb = ctx.t * cfg.beta;
  std::vector<double> upstream(n);
  for (std::size_t i = 0; i < n; ++i) upstream[i] = tb * (g_minus[i] - g_plus[i]);
  if (cfg.kl_weight > 0.0) {
    const Latent& vr = *ctx.v_ref;
    for (std::size_t i = 0; i < n; ++i)
      upstream[i] += cfg.kl_weight * 2.0 * (f.v_theta[i] - vr[i]) * inv_n;
  }

  ObjectiveResult out{o, std::vector<double>(model.params().size(), 0.0)};
  model.accumulate_param_grad(ctx.x_t, ctx.t, ctx.cond, upstream, out.grad);
  return out;
}

}  // namespace cocoedit
