#include "cocoedit/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cocoedit/errors.hpp"
#include "cocoedit/parallel.hpp"

namespace cocoedit {

std::mt19937_64 substream(std::uint64_t seed, Stream stream, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(static_cast<std::uint64_t>(stream)),
                    lo(a),    hi(a),    lo(b),
                    hi(b),    lo(c),    hi(c)};
  return std::mt19937_64(seq);
}

Grid2D decode(const Latent& latent, std::size_t n) {
  return Grid2D(n, n, std::vector<double>(latent.begin(), latent.end())).clamped_unit();
}

std::vector<SampleGroup> collect_samples(const VelocityField& old_policy,
                                         const std::vector<ToyEditTask>& tasks,
                                         const std::vector<std::size_t>& task_indices, int k,
                                         int sampler_steps, std::uint64_t seed,
                                         std::uint64_t iteration) {
  if (k < 1) throw InvalidArgument("collect_samples: group size must be positive");
  std::vector<SampleGroup> groups(task_indices.size());
  std::vector<std::vector<double>> conds(task_indices.size());
  for (std::size_t p = 0; p < task_indices.size(); ++p) {
    groups[p].task_index = task_indices[p];
    groups[p].samples.resize(static_cast<std::size_t>(k));
    conds[p] = tasks.at(task_indices[p]).condition();
  }
  const long total = static_cast<long>(task_indices.size()) * k;
  const std::size_t dim = old_policy.latent_dim();
#pragma omp parallel for num_threads(thread_count()) schedule(dynamic)
  for (long job = 0; job < total; ++job) {
    const std::size_t p = static_cast<std::size_t>(job / k);
    const std::size_t j = static_cast<std::size_t>(job % k);
    auto rng = substream(seed, Stream::Noise, iteration, p, j);
    std::normal_distribution<double> normal(0.0, 1.0);
    Latent x1(dim);
    for (double& v : x1) v = normal(rng);
    groups[p].samples[j] = sample_ode(old_policy, x1, conds[p], sampler_steps);
  }
  return groups;
}

GroupRewards collect_rewards(const SampleGroup& group, const ToyEditTask& task,
                             const RewardContext& ctx) {
  if (group.samples.size() < 2) throw InvalidArgument("collect_rewards: group size must be >= 2");
  if (!ctx.provider) throw InvalidArgument("collect_rewards: no reward provider");
  const std::size_t k = group.samples.size();
  std::vector<Grid2D> decoded(k);
  std::vector<std::string> ids(k);
  std::vector<double> r_sim(k);
  for (std::size_t j = 0; j < k; ++j) {
    decoded[j] = decode(group.samples[j], task.n);
    ids[j] = task.id + "/" + std::to_string(j);
    r_sim[j] = sim_reward(task.input, decoded[j], task.edit_mask, ctx.metrics, ctx.weights.w_ssim);
  }

  const EditSpec spec = task.edit_spec();
  const std::string cache_scope = ctx.provider->id() + "|" + task.id;
  std::vector<double> r_mllm(k, 0.0);
  std::vector<std::size_t> misses;
  std::vector<std::uint64_t> hashes(k);
  for (std::size_t j = 0; j < k; ++j) {
    hashes[j] = content_hash(decoded[j]);
    if (ctx.cache) {
      if (auto hit = ctx.cache->get(cache_scope, hashes[j])) {
        r_mllm[j] = *hit;
        continue;
      }
    }
    misses.push_back(j);
  }
  if (!misses.empty()) {
    std::vector<Grid2D> q_samples;
    std::vector<std::string> q_ids;
    for (auto j : misses) {
      q_samples.push_back(decoded[j]);
      q_ids.push_back(ids[j]);
    }
    const auto scores = ctx.provider->score({task.input, &spec, q_samples, q_ids});
    for (std::size_t m = 0; m < misses.size(); ++m) {
      r_mllm[misses[m]] = scores[m];
      if (ctx.cache) ctx.cache->put(cache_scope, hashes[misses[m]], scores[m]);
    }
  }
  return assemble_group(r_mllm, r_sim, ctx.weights, ctx.zc);
}

void Buffer::add(const SampleGroup& group, const GroupRewards& rewards) {
  if (group.samples.size() != rewards.optimality.size()) {
    throw InvalidArgument("Buffer::add: sample/reward count mismatch");
  }
  for (std::size_t j = 0; j < group.samples.size(); ++j) {
    entries_.push_back({group.task_index, group.samples[j], rewards.optimality[j]});
  }
}

SampleContext make_sample_context(const BufferEntry& entry, const ToyEditTask& task,
                                  const VelocityField& old_policy,
                                  const VelocityField* ref_policy, double t,
                                  std::span<const double> eps) {
  SampleContext ctx;
  ctx.t = t;
  ctx.x_t = interpolate(entry.x0, eps, t);
  ctx.cond = task.condition();
  ctx.x0 = entry.x0;
  ctx.c_input.assign(task.input.values().begin(), task.input.values().end());
  ctx.edit = task.edit_mask;
  ctx.v_old = old_policy.evaluate(ctx.x_t, t, ctx.cond);
  if (ref_policy) ctx.v_ref = ref_policy->evaluate(ctx.x_t, t, ctx.cond);
  return ctx;
}

namespace {

std::string dump_entry(const ToyEditTask& task, const SampleContext& ctx, double r,
                       const ObjectiveTerms& o) {
  std::ostringstream os;
  os << "non-finite objective for task " << task.id << " (t=" << ctx.t << ", r=" << r
     << "): total=" << o.total << " l_pos=" << o.l_pos << " l_neg=" << o.l_neg
     << " l_ner=" << o.l_ner << " l_er=" << o.l_er << " kl=" << o.kl;
  return os.str();
}

}  // namespace

StepDiagnostics optimize_step(const Buffer& buffer, VelocityField& policy,
                              const OptimizeContext& ctx) {
  if (buffer.empty()) throw InvalidArgument("optimize_step: buffer is empty");
  if (!ctx.tasks || !ctx.old_policy) throw InvalidArgument("optimize_step: missing context");
  if (ctx.batch_size < 1) throw InvalidArgument("optimize_step: batch_size must be >= 1");
  const bool use_ref = ctx.nft.kl_weight > 0.0;
  if (use_ref && !ctx.ref_policy) throw InvalidArgument("optimize_step: kl_weight > 0 needs a reference policy");

  const auto& entries = buffer.entries();
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  auto shuffle_rng = substream(ctx.seed, Stream::Shuffle, ctx.iteration, ctx.epoch);
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  const std::size_t nparams = policy.params().size();
  StepDiagnostics diag;
  double grad_sq = 0.0;
  std::size_t batches = 0;

  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(ctx.batch_size)) {
    const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(ctx.batch_size));
    const long count = static_cast<long>(stop - start);
    std::vector<ObjectiveResult> results(static_cast<std::size_t>(count));
    std::vector<std::string> failures(static_cast<std::size_t>(count));

#pragma omp parallel for num_threads(thread_count()) schedule(dynamic)
    for (long b = 0; b < count; ++b) {
      const std::size_t idx = order[start + static_cast<std::size_t>(b)];
      const BufferEntry& e = entries[idx];
      const ToyEditTask& task = (*ctx.tasks)[e.task_index];
      auto trng = substream(ctx.seed, Stream::TimeStep, ctx.iteration, ctx.epoch, idx);
      std::uniform_real_distribution<double> tdist(ctx.t_epsilon, 1.0 - ctx.t_epsilon);
      const double t = tdist(trng);
      auto erng = substream(ctx.seed, Stream::Epsilon, ctx.iteration, ctx.epoch, idx);
      std::normal_distribution<double> normal(0.0, 1.0);
      Latent eps(e.x0.size());
      for (double& v : eps) v = normal(erng);

      const SampleContext sc = make_sample_context(e, task, *ctx.old_policy,
                                                   use_ref ? ctx.ref_policy : nullptr, t, eps);
      ObjectiveResult res = total_objective(policy, sc, e.optimality, ctx.nft);
      bool finite = std::isfinite(res.terms.total);
      for (double g : res.grad) finite = finite && std::isfinite(g);
      if (!finite) failures[static_cast<std::size_t>(b)] = dump_entry(task, sc, e.optimality, res.terms);
      results[static_cast<std::size_t>(b)] = std::move(res);
    }
    for (const auto& f : failures)
      if (!f.empty()) throw NumericAbort(f);

    // Fixed-order reduction.
    std::vector<double> grad(nparams, 0.0);
    for (const auto& res : results) {
      for (std::size_t i = 0; i < nparams; ++i) grad[i] += res.grad[i];
      const auto& o = res.terms;
      diag.mean_objective += o.total;
      diag.mean_l_pos += o.l_pos;
      diag.mean_l_neg += o.l_neg;
      diag.mean_l_ner += o.l_ner;
      diag.mean_l_er += o.l_er;
      diag.ner_active_rate += o.ner_active ? 1.0 : 0.0;
      diag.er_active_rate += o.er_active ? 1.0 : 0.0;
    }
    const double inv = 1.0 / static_cast<double>(count);
    double gs = 0.0;
    for (std::size_t i = 0; i < nparams; ++i) {
      grad[i] *= inv;
      gs += grad[i] * grad[i];
    }
    if (ctx.optimizer) {
      ctx.optimizer->step(policy.params(), grad, ctx.learning_rate);
    } else {
      auto params = policy.params();
      for (std::size_t i = 0; i < nparams; ++i) params[i] -= ctx.learning_rate * grad[i];
    }
    grad_sq += std::sqrt(gs);
    ++batches;
  }

  const double n = static_cast<double>(entries.size());
  diag.entries = entries.size();
  diag.mean_objective /= n;
  diag.mean_l_pos /= n;
  diag.mean_l_neg /= n;
  diag.mean_l_ner /= n;
  diag.mean_l_er /= n;
  diag.ner_active_rate /= n;
  diag.er_active_rate /= n;
  diag.grad_norm = grad_sq / static_cast<double>(batches);
  return diag;
}

Optimizer::Kind Optimizer::parse(const std::string& name) {
  if (name == "sgd") return Kind::Sgd;
  if (name == "adam") return Kind::Adam;
  throw InvalidArgument("unknown optimizer '" + name + "' (expected sgd or adam)");
}

void Optimizer::step(std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != grad.size()) throw InvalidArgument("Optimizer::step: size mismatch");
  ++t_;
  if (kind_ == Kind::Sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
    return;
  }
  if (m_.size() != params.size()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
  }
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

void ema_update(std::span<double> theta_old, std::span<const double> theta, double eta) {
  if (theta_old.size() != theta.size()) throw InvalidArgument("ema_update: size mismatch");
  if (eta < 0.0 || eta > 1.0) throw InvalidArgument("ema_update: eta must lie in [0,1]");
  for (std::size_t i = 0; i < theta.size(); ++i) {
    theta_old[i] = eta * theta_old[i] + (1.0 - eta) * theta[i];
  }
}

void pretrain_reference(MlpField& field, const std::vector<ToyEditTask>& tasks,
                        const TaskConfig& task_cfg, int steps, int batch, double lr,
                        std::uint64_t seed) {
  if (tasks.empty() || steps <= 0) return;
  const std::size_t np = field.params().size();
  Optimizer adam(Optimizer::Kind::Adam);
  std::vector<std::vector<double>> conds;
  for (const auto& t : tasks) conds.push_back(t.condition());

  for (int step = 0; step < steps; ++step) {
    std::vector<std::vector<double>> grads(static_cast<std::size_t>(batch));
#pragma omp parallel for num_threads(thread_count()) schedule(dynamic)
    for (int b = 0; b < batch; ++b) {
      auto rng = substream(seed, Stream::Pretrain, static_cast<std::uint64_t>(step),
                           static_cast<std::uint64_t>(b));
      std::uniform_int_distribution<std::size_t> pick(0, tasks.size() - 1);
      std::uniform_real_distribution<double> strength(task_cfg.base_strength_min,
                                                      task_cfg.base_strength_max);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::normal_distribution<double> normal(0.0, 1.0);
      const std::size_t ti = pick(rng);
      const double s = strength(rng);
      const Grid2D x0g = base_editor_output(tasks[ti], s, task_cfg.base_spill,
                                            task_cfg.base_background_noise, rng,
                                            task_cfg.base_drift);
      const std::vector<double> x0(x0g.values().begin(), x0g.values().end());
      std::vector<double> x1(x0.size());
      for (double& e : x1) e = normal(rng);
      const double t = unit(rng);
      grads[static_cast<std::size_t>(b)] = fm_loss(field, x0, x1, t, conds[ti]).grad;
    }
    std::vector<double> g(np, 0.0);
    for (const auto& gb : grads)
      for (std::size_t i = 0; i < np; ++i) g[i] += gb[i];
    for (double& x : g) x /= batch;
    adam.step(field.params(), g, lr);
  }
}

PolicyEvaluation evaluate_policy(const VelocityField& policy, const std::vector<ToyEditTask>& tasks,
                                 int samples_per_task, int sampler_steps, std::uint64_t seed,
                                 const RewardWeights& weights, const MetricConfig& metrics) {
  const long total = static_cast<long>(tasks.size()) * samples_per_task;
  std::vector<std::array<double, 5>> rows(static_cast<std::size_t>(total));
#pragma omp parallel for num_threads(thread_count()) schedule(dynamic)
  for (long job = 0; job < total; ++job) {
    const std::size_t ti = static_cast<std::size_t>(job / samples_per_task);
    const std::size_t k = static_cast<std::size_t>(job % samples_per_task);
    const ToyEditTask& task = tasks[ti];
    auto rng = substream(seed, Stream::Eval, ti, k);
    std::normal_distribution<double> normal(0.0, 1.0);
    Latent x1(task.latent_dim());
    for (double& v : x1) v = normal(rng);
    const Grid2D img = decode(sample_ode(policy, x1, task.condition(), sampler_steps), task.n);
    const EditMask keep = complement(task.edit_mask);
    const double oracle = OracleRewardProvider::score_one(img, task.edit_spec());
    const double rsim = sim_reward(task.input, img, task.edit_mask, metrics, weights.w_ssim);
    const double psnr = masked_psnr_norm(task.input, img, keep, metrics).value;
    const std::vector<double> a(img.values().begin(), img.values().end());
    const std::vector<double> c(task.input.values().begin(), task.input.values().end());
    const double dist = region_distance(a, c, task.edit_mask);
    rows[static_cast<std::size_t>(job)] = {oracle, rsim, psnr, combine(oracle, rsim, weights), dist};
  }
  PolicyEvaluation e;
  for (const auto& r : rows) {
    e.mean_oracle += r[0];
    e.mean_r_sim += r[1];
    e.mean_psnr_norm += r[2];
    e.mean_raw += r[3];
    e.mean_edit_distance += r[4];
  }
  const double n = static_cast<double>(rows.size());
  e.mean_oracle /= n;
  e.mean_r_sim /= n;
  e.mean_psnr_norm /= n;
  e.mean_raw /= n;
  e.mean_edit_distance /= n;
  return e;
}

std::unique_ptr<RewardProvider> make_provider(const RewardsConfig& cfg) {
  if (cfg.provider == "oracle") return provider_synthetic_oracle();
  if (cfg.provider == "constant") return provider_constant(cfg.constant_value);
  if (cfg.provider == "file") return provider_file_backed(cfg.score_file);
  throw InvalidArgument("unknown reward provider '" + cfg.provider + "'");
}

std::vector<ToyEditTask> make_tasks(const Config& cfg) {
  auto rng = substream(cfg.train.seed, Stream::Tasks);
  return make_task_pool(rng(), cfg.task.pool_size, cfg.task.n, cfg.task.min_size,
                        cfg.task.max_size, cfg.task.dilation_radius, cfg.task.target_scale);
}

nlohmann::json to_json(const PolicyEvaluation& e) {
  return {{"mean_oracle", e.mean_oracle},
          {"mean_r_sim", e.mean_r_sim},
          {"mean_psnr_norm", e.mean_psnr_norm},
          {"mean_raw", e.mean_raw},
          {"mean_edit_distance", e.mean_edit_distance}};
}

TrainResult train(const Config& cfg, const TrainHooks& hooks) {
  validate(cfg);
  const TrainConfig& tc = cfg.train;
  const MetricConfig metrics = cfg.metrics.metric_config();
  const std::vector<ToyEditTask> tasks = make_tasks(cfg);
  const std::size_t n = cfg.task.n;

  auto init_rng = substream(tc.seed, Stream::Init);
  MlpField policy = build_mlp_field(n * n, ToyEditTask::cond_dim(n), tc.hidden, init_rng(),
                                    tc.init_output_scale, tc.skip);
  pretrain_reference(policy, tasks, cfg.task, tc.pretrain_steps, tc.pretrain_batch,
                     tc.pretrain_lr, tc.seed);

  const MlpField reference = policy;
  MlpField old_policy = policy;
  TrainResult result{policy, policy, {}, {}, {}};
  result.initial_eval = evaluate_policy(policy, tasks, tc.eval_samples, tc.sampler_steps, tc.seed,
                                        cfg.rewards.weights, metrics);

  const auto provider = make_provider(cfg.rewards);
  RewardCache cache;
  RewardContext rctx{provider.get(), cfg.rewards.weights,
                     ZcSpec{parse_zc_mode(tc.z_c_mode), tc.z_c_fixed}, metrics, &cache};
  Buffer buffer;
  Optimizer optimizer(Optimizer::parse(tc.optimizer));
  std::vector<double> last_good(policy.params().begin(), policy.params().end());

  try {
    for (int it = 0; it < tc.iterations; ++it) {
      const auto iter = static_cast<std::uint64_t>(it);
      auto prompt_rng = substream(tc.seed, Stream::Prompts, iter);
      std::uniform_int_distribution<std::size_t> pick(0, tasks.size() - 1);
      std::vector<std::size_t> indices(static_cast<std::size_t>(tc.prompts_per_iteration));
      for (auto& i : indices) i = pick(prompt_rng);

      const auto groups = collect_samples(old_policy, tasks, indices, tc.group_size,
                                          tc.sampler_steps, tc.seed, iter);
      double sum_raw = 0, sum_sim = 0, sum_mllm = 0, sum_opt = 0, sum_zc = 0, sum_psnr = 0,
             sum_dist = 0;
      std::size_t count = 0;
      cache.clear();
      for (const auto& g : groups) {
        const ToyEditTask& task = tasks[g.task_index];
        const GroupRewards r = collect_rewards(g, task, rctx);
        buffer.add(g, r);
        sum_zc += r.z_c;
        const EditMask keep = complement(task.edit_mask);
        const std::vector<double> c(task.input.values().begin(), task.input.values().end());
        for (std::size_t j = 0; j < g.samples.size(); ++j) {
          sum_raw += r.raw[j];
          sum_sim += r.r_sim[j];
          sum_mllm += r.r_mllm[j];
          sum_opt += r.optimality[j];
          const Grid2D img = decode(g.samples[j], n);
          sum_psnr += masked_psnr_norm(task.input, img, keep, metrics).value;
          const std::vector<double> a(img.values().begin(), img.values().end());
          sum_dist += region_distance(a, c, task.edit_mask);
          ++count;
        }
      }

      StepDiagnostics diag;
      for (int epoch = 0; epoch < tc.epochs_per_iteration; ++epoch) {
        OptimizeContext octx{&tasks,         &old_policy,      &reference,
                             cfg.nft,        tc.learning_rate, tc.batch_size,
                             tc.t_epsilon,   tc.seed,          iter,
                             static_cast<std::uint64_t>(epoch), &optimizer};
        diag = optimize_step(buffer, policy, octx);
      }
      ema_update(old_policy.params(), policy.params(), tc.ema_eta);
      buffer.clear();

      const double cn = static_cast<double>(count);
      nlohmann::json rec = {{"iteration", it + 1},
                            {"mean_raw_reward", sum_raw / cn},
                            {"mean_r_sim", sum_sim / cn},
                            {"mean_r_mllm", sum_mllm / cn},
                            {"mean_optimality", sum_opt / cn},
                            {"mean_z_c", sum_zc / static_cast<double>(groups.size())},
                            {"mean_psnr_norm", sum_psnr / cn},
                            {"mean_edit_distance", sum_dist / cn},
                            {"objective", diag.mean_objective},
                            {"l_pos", diag.mean_l_pos},
                            {"l_neg", diag.mean_l_neg},
                            {"l_ner", diag.mean_l_ner},
                            {"l_er", diag.mean_l_er},
                            {"ner_hinge_rate", diag.ner_active_rate},
                            {"er_hinge_rate", diag.er_active_rate},
                            {"grad_norm", diag.grad_norm}};
      result.log.push_back(rec);
      if (hooks.on_iteration) hooks.on_iteration(rec);
      std::copy(policy.params().begin(), policy.params().end(), last_good.begin());
    }
  } catch (const NumericAbort&) {
    if (hooks.abort_checkpoint) {
      MlpField good = policy;
      std::copy(last_good.begin(), last_good.end(), good.params().begin());
      save_checkpoint(good, *hooks.abort_checkpoint);
    }
    throw;
  }

  result.policy = policy;
  result.final_eval = evaluate_policy(policy, tasks, tc.eval_samples, tc.sampler_steps, tc.seed,
                                      cfg.rewards.weights, metrics);
  return result;
}

}  // namespace cocoedit
