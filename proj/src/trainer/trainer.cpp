#include "asf/trainer/trainer.hpp"

#include <chrono>
#include <cmath>

namespace asf::train {
namespace {

using nlohmann::json;
using nn::Tensor;
using nn::Var;

template <typename T>
void read_into(const json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("train config field '") + key + "' has the wrong type");
  }
}

std::vector<Var> as_constants(const data::VideoClip& clip) {
  std::vector<Var> out;
  for (const auto& f : clip.frames) out.push_back(nn::constant(f));
  return out;
}

// Names the first parameter holding a non-finite value, if any.
void require_finite(double value, const char* what, const nn::ParamStore& params) {
  if (std::isfinite(value)) return;
  for (const auto& [name, var] : params.entries()) {
    if (!var->value.all_finite()) {
      throw NonFiniteError(std::string("non-finite ") + what + ": parameter '" + name + "' is non-finite");
    }
  }
  throw NonFiniteError(std::string("non-finite ") + what + " with finite parameters; check the input clips");
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(weight_decay > 0.0)) throw ConfigError("weight_decay must be > 0");
  if (!(lambda_un >= 0.0)) throw ConfigError("lambda_un must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0)) {
    throw ConfigError("Adam betas must lie in [0, 1) and eps must be > 0");
  }
  if (crop < 1) throw ConfigError("crop must be >= 1");
  if (length < 1 || length % 2 == 0) throw ConfigError("temporal length L must be odd");
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
  model.validate();
  rede.validate();
}

json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"lambda_un", c.lambda_un},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps", c.eps},
          {"crop", c.crop},
          {"length", c.length},
          {"iterations", c.iterations},
          {"checkpoint_every", c.checkpoint_every},
          {"seed", c.seed},
          {"model", net::to_json(c.model)},
          {"rede", rede::to_json(c.rede)}};
}

TrainConfig train_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("train config must be an object");
  const json known = to_json(TrainConfig{});
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown train config field '" + key + "'");
  }
  TrainConfig c;
  read_into(j, "lr", c.lr);
  read_into(j, "weight_decay", c.weight_decay);
  read_into(j, "lambda_un", c.lambda_un);
  read_into(j, "beta1", c.beta1);
  read_into(j, "beta2", c.beta2);
  read_into(j, "eps", c.eps);
  read_into(j, "crop", c.crop);
  read_into(j, "length", c.length);
  read_into(j, "iterations", c.iterations);
  read_into(j, "checkpoint_every", c.checkpoint_every);
  read_into(j, "seed", c.seed);
  if (j.contains("model")) c.model = net::model_config_from_json(j.at("model"));
  if (j.contains("rede")) c.rede = rede::ranges_from_json(j.at("rede"));
  c.validate();
  return c;
}

Adam::Adam(const nn::ParamStore& params) {
  for (const auto& [name, var] : params.entries()) {
    m_.push_back(Tensor::zeros_like(var->value));
    v_.push_back(Tensor::zeros_like(var->value));
  }
}

void Adam::step(nn::ParamStore& params, const TrainConfig& c) {
  ++steps_;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(steps_));
  const double decay = 1.0 - c.lr * c.weight_decay;
  std::size_t k = 0;
  for (auto& [name, var] : params.entries()) {
    Tensor& p = var->value;
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    ++k;
    const bool has_grad = !var->grad.empty();
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double g = has_grad ? var->grad[i] : 0.0;
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      const double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + c.eps);
      p[i] = p[i] * decay - c.lr * update;
    }
  }
}

void Adam::save(data::Checkpoint& ck) const {
  ck.meta["adam_steps"] = steps_;
  for (std::size_t k = 0; k < m_.size(); ++k) {
    ck.arrays.push_back({"adam.m." + std::to_string(k), m_[k]});
    ck.arrays.push_back({"adam.v." + std::to_string(k), v_[k]});
  }
}

void Adam::load(const data::Checkpoint& ck, const nn::ParamStore& params) {
  if (!ck.meta.contains("adam_steps")) throw data::CheckpointError("checkpoint has no optimizer state");
  std::size_t k = 0;
  for (const auto& [name, var] : params.entries()) {
    const Tensor* m = ck.find("adam.m." + std::to_string(k));
    const Tensor* v = ck.find("adam.v." + std::to_string(k));
    if (m == nullptr || v == nullptr || !m->same_shape(var->value) || !v->same_shape(var->value)) {
      throw data::CheckpointError("optimizer state for '" + name + "' is missing or misshapen");
    }
    m_[k] = *m;
    v_[k] = *v;
    ++k;
  }
  steps_ = ck.meta.at("adam_steps").get<long>();
}

double mae_loss(const data::VideoClip& pred, const data::VideoClip& target) {
  if (!data::same_geometry(pred, target) || pred.frames.empty()) {
    throw ShapeMismatchError("mae_loss: clips differ in (T, H, W)");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (int t = 0; t < pred.length(); ++t) {
    nn::require_same_shape(pred.frames[t], target.frames[t], "mae_loss");
    for (std::size_t i = 0; i < pred.frames[t].numel(); ++i) sum += std::abs(pred.frames[t][i] - target.frames[t][i]);
    n += pred.frames[t].numel();
  }
  return sum / static_cast<double>(n);
}

Var mae_loss(std::span<const Var> pred, const data::VideoClip& target) {
  if (pred.size() != target.frames.size() || pred.empty()) {
    throw ShapeMismatchError("mae_loss: " + std::to_string(pred.size()) + " predicted frames for " +
                             std::to_string(target.frames.size()) + " targets");
  }
  // Frames share one size, so the mean of per-frame means is the global mean.
  Var total;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const Var frame_loss = nn::mean_abs_error(pred[t], nn::constant(target.frames[t]));
    total = total ? nn::add(total, frame_loss) : frame_loss;
  }
  return nn::scale(total, 1.0 / static_cast<double>(pred.size()));
}

PseudoPair make_pseudo_pair(net::AsfNet& model, const data::VideoClip& real, const data::VideoClip& s_l, Rng& rng,
                            const rede::Ranges& ranges) {
  PseudoPair pair;
  pair.b_u = model.restore(real);
  pair.s_u.role = data::Role::streak;
  for (int t = 0; t < real.length(); ++t) {
    Tensor s = real.frames[t];
    for (std::size_t i = 0; i < s.numel(); ++i) s[i] = std::max(s[i] - pair.b_u.frames[t][i], 0.0);
    pair.s_u.frames.push_back(std::move(s));
  }
  const data::VideoClip added = rede::rede(pair.s_u, s_l, rng, ranges, &pair.draw);
  pair.o_p.role = data::Role::rainy;
  for (int t = 0; t < real.length(); ++t) {
    Tensor o = pair.b_u.frames[t];
    for (std::size_t i = 0; i < o.numel(); ++i) o[i] = std::min(o[i] + added.frames[t][i], 1.0);
    pair.o_p.frames.push_back(std::move(o));
  }
  return pair;
}

StreakSampler streak_sampler(std::vector<data::VideoClip> layers) {
  return [layers = std::move(layers)](Rng& rng, int length, int height, int width) {
    if (layers.empty()) throw EmptyStreakDatabaseError("streak database is empty");
    const auto& clip = layers[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(layers.size()) - 1))];
    if (clip.length() < length || clip.height() < height || clip.width() < width) {
      throw data::ClipTooSmallError("streak layer smaller than the requested crop");
    }
    const int t0 = rng.uniform_int(0, clip.length() - length);
    const int y0 = rng.uniform_int(0, clip.height() - height);
    const int x0 = rng.uniform_int(0, clip.width() - width);
    data::VideoClip out = data::crop_clip(clip, t0, length, y0, x0, height, width);
    out.role = data::Role::streak;
    return out;
  };
}

StreakSampler streak_sampler(const data::Manifest& streak_db, data::ClipCache* cache) {
  return [&streak_db, cache](Rng& rng, int length, int height, int width) {
    if (streak_db.entries.empty()) throw EmptyStreakDatabaseError("streak database manifest has no entries");
    return data::sample_clip(streak_db, data::Role::streak, rng.next_u64(), height, width, length, cache);
  };
}

Trainer::Trainer(net::AsfNet& model, TrainConfig config)
    : model_(model), config_(std::move(config)), adam_(model.params()) {}

void Trainer::apply_step(const char* what) {
  // A non-finite weight poisons every upstream gradient; report it first.
  for (const auto& [name, var] : model_.params().entries()) {
    if (!var->value.all_finite()) {
      throw NonFiniteError(std::string(what) + ": parameter '" + name + "' is non-finite");
    }
  }
  for (const auto& [name, var] : model_.params().entries()) {
    if (!var->grad.empty() && !var->grad.all_finite()) {
      throw NonFiniteError(std::string(what) + ": non-finite gradient in parameter '" + name + "'");
    }
  }
  adam_.step(model_.params(), config_);
}

StepLosses Trainer::supervised_step(const data::TrainSample& batch) {
  model_.params().zero_grad();
  const auto pred = model_.forward(as_constants(batch.rainy));
  const Var loss = mae_loss(pred, batch.clean);
  StepLosses out;
  out.l_su = loss->value[0];
  out.total = out.l_su;
  require_finite(out.l_su, "supervised loss", model_.params());
  nn::backward(loss);
  apply_step("supervised_step");
  return out;
}

StepLosses Trainer::orl_step(const data::VideoClip& real, const data::TrainSample& syn, const StreakSampler& streaks,
                             Rng& rng) {
  real.validate();
  const data::VideoClip s_l = streaks(rng, real.length(), real.height(), real.width());
  const PseudoPair pair = make_pseudo_pair(model_, real, s_l, rng, config_.rede);

  model_.params().zero_grad();
  const Var l_su = mae_loss(model_.forward(as_constants(syn.rainy)), syn.clean);
  Var l_un;
  if (config_.lambda_un > 0.0) {
    l_un = mae_loss(model_.forward(as_constants(pair.o_p)), pair.b_u);
  } else {
    // A zero weight contributes no gradient; the loss is still reported.
    nn::NoGradGuard guard;
    l_un = mae_loss(model_.forward(as_constants(pair.o_p)), pair.b_u);
  }
  StepLosses out;
  out.l_su = l_su->value[0];
  out.l_un = l_un->value[0];
  out.total = out.l_su + config_.lambda_un * out.l_un;
  require_finite(out.l_su, "loss L_SU", model_.params());
  require_finite(out.l_un, "loss L_UN", model_.params());
  nn::backward(config_.lambda_un > 0.0 ? nn::add(l_su, nn::scale(l_un, config_.lambda_un)) : l_su);
  apply_step("orl_step");
  return out;
}

data::Checkpoint make_checkpoint(Trainer& trainer, long iteration) {
  data::Checkpoint ck = trainer.model().to_checkpoint();
  ck.meta["iteration"] = iteration;
  ck.meta["train"] = to_json(trainer.config());
  trainer.optimizer().save(ck);
  return ck;
}

long restore_checkpoint(Trainer& trainer, const data::Checkpoint& ck) {
  trainer.model().load(ck);
  trainer.optimizer().load(ck, trainer.model().params());
  if (!ck.meta.contains("iteration")) throw data::CheckpointError("checkpoint has no iteration");
  return ck.meta.at("iteration").get<long>();
}

std::filesystem::path train(const TrainData& data, const TrainConfig& config, Mode mode,
                            const TrainOptions& options) {
  config.validate();
  if (data.train.split != data::Split::train) throw MissingSplitError("training manifest must have split train");
  if (mode == Mode::orl) {
    if (!data.real || data.real->split != data::Split::real) {
      throw MissingSplitError("orl needs a manifest with split real");
    }
    if (!data.streak_db || data.streak_db->split != data::Split::streak_db) {
      throw MissingSplitError("orl needs a manifest with split streak_db");
    }
    if (data.streak_db->entries.empty()) throw EmptyStreakDatabaseError("streak database manifest has no entries");
  }

  net::AsfNet model(config.model);
  Trainer trainer(model, config);
  if (options.init) model.load(data::load_checkpoint(*options.init));
  long start = 0;
  if (options.resume) {
    start = restore_checkpoint(trainer, data::load_checkpoint(*options.resume));
    if (start > config.iterations) {
      throw data::CheckpointError("checkpoint iteration " + std::to_string(start) + " exceeds the configured " +
                                  std::to_string(config.iterations));
    }
  }
  std::error_code ec;
  std::filesystem::create_directories(options.out_dir, ec);
  if (ec) throw data::WriteError("cannot create " + options.out_dir.string() + ": " + ec.message());

  data::ClipCache cache;
  StreakSampler streaks;
  if (mode == Mode::orl) streaks = streak_sampler(*data.streak_db, &cache);

  std::filesystem::path last;
  auto save = [&](long iteration) {
    last = data::checkpoint_path(options.out_dir, iteration);
    data::save_checkpoint(make_checkpoint(trainer, iteration), last);
  };

  for (long i = start; i < config.iterations; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t s = mix_seed(config.seed, static_cast<std::uint64_t>(i));
    const data::TrainSample syn = data::sample_batch(data.train, mix_seed(s, 1), config.crop, config.length, &cache);
    StepLosses losses;
    if (mode == Mode::pretrain) {
      losses = trainer.supervised_step(syn);
    } else {
      data::VideoClip real =
          data::sample_clip(*data.real, data::Role::real, mix_seed(s, 2), config.crop, config.crop, config.length, &cache);
      Rng rng(mix_seed(s, 3));
      losses = trainer.orl_step(real, syn, streaks, rng);
    }
    const auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
    if (options.log != nullptr) {
      const json record{{"iter", i + 1},
                        {"L_SU", losses.l_su},
                        {"L_UN", losses.l_un},
                        {"total", losses.total},
                        {"lr", config.lr},
                        {"wall_ms", wall.count()}};
      *options.log << record.dump() << '\n';
      options.log->flush();
    }
    if (options.on_step) options.on_step(i + 1, losses);
    if ((i + 1) % config.checkpoint_every == 0) save(i + 1);
  }
  if (last != data::checkpoint_path(options.out_dir, config.iterations)) save(config.iterations);
  return last;
}

}  // namespace asf::train
