#include "cocoedit/flowmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

#include "json.hpp"

#include "cocoedit/errors.hpp"

namespace cocoedit {

namespace {
void require_same(std::size_t a, std::size_t b, const char* who) {
  if (a != b) throw InvalidArgument(std::string(who) + ": dimension mismatch");
}
}  // namespace

Latent interpolate(std::span<const double> x0, std::span<const double> x1, double t) {
  require_same(x0.size(), x1.size(), "interpolate");
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("interpolate: t must lie in [0,1]");
  Latent out(x0.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - t) * x0[i] + t * x1[i];
  return out;
}

Latent target_velocity(std::span<const double> x0, std::span<const double> x1) {
  require_same(x0.size(), x1.size(), "target_velocity");
  Latent out(x0.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x1[i] - x0[i];
  return out;
}

Latent v_to_x(std::span<const double> x_t, double t, std::span<const double> v) {
  require_same(x_t.size(), v.size(), "v_to_x");
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("v_to_x: t must lie in [0,1]");
  Latent out(x_t.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x_t[i] - t * v[i];
  return out;
}

// ---------------------------------------------------------------------------
// MLP

MlpField::MlpField(std::size_t latent_dim, std::size_t cond_dim, std::vector<std::size_t> hidden,
                   bool skip)
    : latent_dim_(latent_dim), cond_dim_(cond_dim), hidden_(std::move(hidden)), skip_(skip) {
  if (latent_dim_ == 0) throw InvalidArgument("MlpField: latent_dim must be positive");
  for (auto h : hidden_)
    if (h == 0) throw InvalidArgument("MlpField: hidden sizes must be positive");
  params_.assign(param_count(latent_dim_ + 1 + cond_dim_, hidden_, latent_dim_, skip_), 0.0);
}

std::size_t MlpField::param_count(std::size_t in_dim, const std::vector<std::size_t>& hidden,
                                  std::size_t out_dim, bool skip) {
  std::size_t n = 0, prev = in_dim;
  for (auto h : hidden) {
    n += h * prev + h;
    prev = h;
  }
  return n + out_dim * prev + out_dim + (skip ? 2 * out_dim * in_dim : 0);
}

std::vector<std::size_t> MlpField::layer_sizes() const {
  std::vector<std::size_t> s{latent_dim_ + 1 + cond_dim_};
  s.insert(s.end(), hidden_.begin(), hidden_.end());
  s.push_back(latent_dim_);
  return s;
}

void MlpField::initialize(std::uint64_t seed, double output_scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto sizes = layer_sizes();
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t in = sizes[l], out = sizes[l + 1];
    const bool last = l + 2 == sizes.size();
    const double scale = (last ? output_scale : 1.0) / std::sqrt(static_cast<double>(in));
    for (std::size_t k = 0; k < in * out; ++k) params_[off + k] = scale * normal(rng);
    off += in * out;
    for (std::size_t k = 0; k < out; ++k) params_[off + k] = 0.0;
    off += out;
  }
  // Skip map starts at zero.
  for (std::size_t k = off; k < params_.size(); ++k) params_[k] = 0.0;
}

// [z ‖ z / max(t, floor)], so the skip map can express (x_t - c) / t.
std::vector<double> MlpField::skip_features(const std::vector<double>& input, double t) {
  const double inv = 1.0 / std::max(t, kSkipTimeFloor);
  std::vector<double> f(2 * input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    f[i] = input[i];
    f[input.size() + i] = input[i] * inv;
  }
  return f;
}

std::vector<double> MlpField::input_vector(std::span<const double> x_t, double t,
                                           std::span<const double> cond) const {
  require_same(x_t.size(), latent_dim_, "MlpField latent");
  require_same(cond.size(), cond_dim_, "MlpField condition");
  std::vector<double> in;
  in.reserve(latent_dim_ + 1 + cond_dim_);
  in.insert(in.end(), x_t.begin(), x_t.end());
  in.push_back(t);
  in.insert(in.end(), cond.begin(), cond.end());
  return in;
}

namespace {

// y = W x + b, W stored row-major (out × in) followed by b.
void affine(const double* p, std::size_t in, std::size_t out, const std::vector<double>& x,
            std::vector<double>& y) {
  const double* w = p;
  const double* b = p + in * out;
  y.resize(out);
  for (std::size_t j = 0; j < out; ++j) {
    double acc = b[j];
    const double* row = w + j * in;
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[j] = acc;
  }
}

}  // namespace

Latent MlpField::evaluate(std::span<const double> x_t, double t,
                          std::span<const double> cond) const {
  const std::vector<double> input = input_vector(x_t, t, cond);
  std::vector<double> a = input, z;
  const auto sizes = layer_sizes();
  const double* p = params_.data();
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    affine(p, sizes[l], sizes[l + 1], a, z);
    p += sizes[l] * sizes[l + 1] + sizes[l + 1];
    if (l + 2 < sizes.size())
      for (double& v : z) v = std::tanh(v);
    a.swap(z);
  }
  if (skip_) {
    const std::vector<double> feats = skip_features(input, t);
    const std::size_t in = feats.size();
    for (std::size_t j = 0; j < latent_dim_; ++j) {
      const double* row = p + j * in;
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * feats[i];
      a[j] += acc;
    }
  }
  return a;
}

void MlpField::accumulate_param_grad(std::span<const double> x_t, double t,
                                     std::span<const double> cond,
                                     std::span<const double> upstream,
                                     std::span<double> grad) const {
  require_same(upstream.size(), latent_dim_, "MlpField upstream");
  require_same(grad.size(), params_.size(), "MlpField grad");
  const auto sizes = layer_sizes();
  const std::size_t layers = sizes.size() - 1;

  // Forward, keeping each layer's input activation.
  std::vector<std::vector<double>> acts(layers + 1);
  std::vector<std::size_t> offsets(layers);
  acts[0] = input_vector(x_t, t, cond);
  std::size_t off = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets[l] = off;
    affine(params_.data() + off, sizes[l], sizes[l + 1], acts[l], acts[l + 1]);
    off += sizes[l] * sizes[l + 1] + sizes[l + 1];
    if (l + 1 < layers)
      for (double& v : acts[l + 1]) v = std::tanh(v);
  }

  if (skip_) {
    const std::vector<double> feats = skip_features(acts[0], t);
    const std::size_t in = feats.size();
    double* gs = grad.data() + off;
    for (std::size_t j = 0; j < latent_dim_; ++j) {
      const double d = upstream[j];
      if (d == 0.0) continue;
      for (std::size_t i = 0; i < in; ++i) gs[j * in + i] += d * feats[i];
    }
  }

  // Backward. delta = dL/dz for the current layer's pre-activation.
  std::vector<double> delta(upstream.begin(), upstream.end()), prev;
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = sizes[l], out = sizes[l + 1];
    const double* w = params_.data() + offsets[l];
    double* gw = grad.data() + offsets[l];
    double* gb = gw + in * out;
    const auto& x = acts[l];
    for (std::size_t j = 0; j < out; ++j) {
      const double d = delta[j];
      gb[j] += d;
      if (d == 0.0) continue;
      double* grow = gw + j * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] += d * x[i];
    }
    if (l == 0) break;
    prev.assign(in, 0.0);
    for (std::size_t j = 0; j < out; ++j) {
      const double d = delta[j];
      if (d == 0.0) continue;
      const double* row = w + j * in;
      for (std::size_t i = 0; i < in; ++i) prev[i] += row[i] * d;
    }
    // x = tanh(z_prev) => dz_prev = dx * (1 - x^2)
    for (std::size_t i = 0; i < in; ++i) prev[i] *= 1.0 - x[i] * x[i];
    delta.swap(prev);
  }
}

std::unique_ptr<VelocityField> MlpField::clone() const { return std::make_unique<MlpField>(*this); }

MlpField build_mlp_field(std::size_t latent_dim, std::size_t cond_dim,
                         std::vector<std::size_t> hidden, std::uint64_t seed,
                         double output_scale, bool skip) {
  MlpField f(latent_dim, cond_dim, std::move(hidden), skip);
  f.initialize(seed, output_scale);
  return f;
}

// ---------------------------------------------------------------------------

LossAndGrad fm_loss(const VelocityField& model, std::span<const double> x0,
                    std::span<const double> x1, double t, std::span<const double> cond) {
  const Latent xt = interpolate(x0, x1, t);
  const Latent v = target_velocity(x0, x1);
  const Latent pred = model.evaluate(xt, t, cond);
  LossAndGrad out;
  std::vector<double> upstream(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = pred[i] - v[i];
    out.value += r * r;
    upstream[i] = 2.0 * r;
  }
  out.grad.assign(model.params().size(), 0.0);
  model.accumulate_param_grad(xt, t, cond, upstream, out.grad);
  return out;
}

Latent sample_ode(const VelocityField& model, std::span<const double> x1,
                  std::span<const double> cond, int steps) {
  if (steps < 1) throw InvalidArgument("sample_ode: steps must be >= 1");
  Latent x(x1.begin(), x1.end());
  const double dt = 1.0 / steps;
  for (int k = steps; k > 0; --k) {
    const double t = k * dt;
    const Latent v = model.evaluate(x, t, cond);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= dt * v[i];
  }
  return x;
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string checkpoint_to_string(const MlpField& field) {
  nlohmann::json j;
  j["magic"] = kCheckpointMagic;
  j["latent_dim"] = field.latent_dim();
  j["cond_dim"] = field.cond_dim();
  j["hidden"] = field.hidden();
  j["skip"] = field.skip();
  j["activation"] = "tanh";
  j["params"] = std::vector<double>(field.params().begin(), field.params().end());
  return j.dump() + "\n";
}

MlpField checkpoint_from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), e.byte);
  }
  if (!j.is_object() || j.value("magic", "") != kCheckpointMagic) {
    throw ParseError("checkpoint: missing or wrong magic (expected " +
                         std::string(kCheckpointMagic) + ")",
                     0);
  }
  if (j.value("activation", "") != "tanh") throw ParseError("checkpoint: unsupported activation", 0);
  try {
    MlpField f(j.at("latent_dim").get<std::size_t>(), j.at("cond_dim").get<std::size_t>(),
               j.at("hidden").get<std::vector<std::size_t>>(), j.value("skip", false));
    const auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != f.params().size()) {
      throw ParseError("checkpoint: parameter count " + std::to_string(params.size()) +
                           " does not match architecture (" +
                           std::to_string(f.params().size()) + ")",
                       0);
    }
    std::copy(params.begin(), params.end(), f.params().begin());
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), 0);
  }
}

void save_checkpoint(const MlpField& field, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << checkpoint_to_string(field);
}

MlpField load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return checkpoint_from_string(std::string(std::istreambuf_iterator<char>(in), {}));
}

}  // namespace cocoedit
