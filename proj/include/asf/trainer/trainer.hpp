#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "asf/datastore/datastore.hpp"
#include "asf/net/asfnet.hpp"
#include "asf/rede/rede.hpp"

namespace asf::train {

ASF_DEFINE_ERROR(NonFiniteError);
ASF_DEFINE_ERROR(EmptyStreakDatabaseError);
ASF_DEFINE_ERROR(MissingSplitError);

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double lambda_un = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int crop = 256;
  int length = 5;  // temporal length L of a training sample
  long iterations = 20000;
  long checkpoint_every = 1000;
  std::uint64_t seed = 0;
  net::ModelConfig model;
  rede::Ranges rede;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
// Keys missing from `j` keep their defaults; unknown keys are a ConfigError.
TrainConfig train_config_from_json(const nlohmann::json& j);

// Adam with decoupled weight decay:
//   p <- p (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps).
class Adam {
 public:
  explicit Adam(const nn::ParamStore& params);

  // Applies one update from the gradients currently held by `params`.
  void step(nn::ParamStore& params, const TrainConfig& config);
  long steps() const { return steps_; }

  void save(data::Checkpoint& checkpoint) const;
  void load(const data::Checkpoint& checkpoint, const nn::ParamStore& params);

 private:
  std::vector<nn::Tensor> m_, v_;
  long steps_ = 0;
};

// Mean absolute difference over every element of every frame.
double mae_loss(const data::VideoClip& pred, const data::VideoClip& target);
nn::Var mae_loss(std::span<const nn::Var> pred, const data::VideoClip& target);

struct StepLosses {
  double l_su = 0.0;
  double l_un = 0.0;
  double total = 0.0;
};

// O_P = min(B_U + ReDe(S_U, S_L), 1) with B_U = f(O_U) computed without a
// graph and S_U = max(O_U - B_U, 0).
struct PseudoPair {
  data::VideoClip o_p;
  data::VideoClip b_u;
  data::VideoClip s_u;
  rede::Draw draw;
};

PseudoPair make_pseudo_pair(net::AsfNet& model, const data::VideoClip& real, const data::VideoClip& s_l, Rng& rng,
                            const rede::Ranges& ranges = {});

// Returns a streak layer of the requested geometry.
using StreakSampler = std::function<data::VideoClip(Rng& rng, int length, int height, int width)>;
// Random crops of in-memory layers; empty input raises EmptyStreakDatabaseError on use.
StreakSampler streak_sampler(std::vector<data::VideoClip> layers);
StreakSampler streak_sampler(const data::Manifest& streak_db, data::ClipCache* cache);

class Trainer {
 public:
  Trainer(net::AsfNet& model, TrainConfig config);

  net::AsfNet& model() { return model_; }
  Adam& optimizer() { return adam_; }
  const TrainConfig& config() const { return config_; }

  // One Adam step on mae(f(O_L), B_L). Losses are measured before the step.
  StepLosses supervised_step(const data::TrainSample& batch);

  // One step of the online re-degraded loop on L_SU + lambda_un * L_UN.
  StepLosses orl_step(const data::VideoClip& real, const data::TrainSample& syn, const StreakSampler& streaks,
                      Rng& rng);

 private:
  void apply_step(const char* what);

  net::AsfNet& model_;
  TrainConfig config_;
  Adam adam_;
};

enum class Mode { pretrain, orl };

struct TrainData {
  data::Manifest train;                    // split train, paired rainy/clean
  std::optional<data::Manifest> real;      // split real (orl)
  std::optional<data::Manifest> streak_db; // split streak_db (orl)
};

struct TrainOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;  // continue from this checkpoint
  std::optional<std::filesystem::path> init;    // model weights to start from (fresh optimizer)
  std::ostream* log = nullptr;                  // NDJSON records
  // Called after every iteration with (iteration, losses).
  std::function<void(long, const StepLosses&)> on_step;
};

// Runs config.iterations iterations, writing ckpt_<iter>.bin every
// checkpoint_every iterations and at the end; returns the final checkpoint.
std::filesystem::path train(const TrainData& data, const TrainConfig& config, Mode mode,
                            const TrainOptions& options);

// Full training state at `iteration`.
data::Checkpoint make_checkpoint(Trainer& trainer, long iteration);
// Restores parameters and optimizer state; returns the stored iteration.
long restore_checkpoint(Trainer& trainer, const data::Checkpoint& checkpoint);

}  // namespace asf::train
