#include <doctest.h>

#include <fstream>
#include <sstream>

#include "asf/rainsim/rainsim.hpp"
#include "asf/trainer/trainer.hpp"
#include "support.hpp"

using namespace asf;
using namespace asf::train;
using nn::Tensor;
using asf::testing::scratch_dir;

namespace {

net::ModelConfig tiny_model() {
  net::ModelConfig m;
  m.channels = 8;
  m.frames = 3;
  m.extractor_blocks = 1;
  m.fusion_blocks = 2;
  m.attention_reduction = 4;
  m.seed = 3;
  return m;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.lr = 1e-3;
  c.crop = 16;
  c.length = 3;
  c.iterations = 6;
  c.checkpoint_every = 3;
  c.seed = 21;
  c.model = tiny_model();
  return c;
}

struct Scene {
  data::VideoClip clean, streaks, rainy;
};

Scene make_scene(std::uint64_t seed, int frames, int size) {
  rainsim::RainConfig rain;
  rain.seed = mix_seed(seed, 1);
  rain.spawn_rate = 4.0;
  rainsim::BackgroundConfig bg;
  bg.seed = mix_seed(seed, 2);
  Scene s;
  s.clean = rainsim::synthesize_background(bg, frames, {size, size});
  s.streaks = rainsim::synthesize_rain_video(rain, frames, {size, size});
  s.rainy = rainsim::composite(s.clean, s.streaks);
  return s;
}

// Writes `count` paired scenes and returns the train manifest.
data::Manifest write_train_set(const std::filesystem::path& dir, int count, int frames, int size) {
  data::Manifest m;
  m.split = data::Split::train;
  m.base_dir = dir;
  for (int i = 0; i < count; ++i) {
    const Scene s = make_scene(static_cast<std::uint64_t>(i), frames, size);
    for (const auto* role : {"clean", "rainy"}) {
      const std::string id = "clip" + std::to_string(i) + "_" + role;
      data::save_clip(std::string(role) == "clean" ? s.clean : s.rainy, dir / id);
      m.entries.push_back({id, id, frames, size, size, data::parse_role(role), static_cast<std::uint64_t>(i)});
    }
  }
  data::save_manifest(m, dir / "manifest.json");
  return m;
}

std::vector<std::pair<std::string, Tensor>> snapshot(const nn::ParamStore& store) {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& [name, var] : store.entries()) out.emplace_back(name, var->value);
  return out;
}

bool same_params(const nn::ParamStore& a, const nn::ParamStore& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a.entries()[i].second->value == b.entries()[i].second->value)) return false;
  return true;
}

data::TrainSample fixed_batch(int size, int frames, std::uint64_t seed) {
  const Scene s = make_scene(seed, frames, size);
  return {s.rainy, s.clean, {}};
}

// Makes the network output its centre frame unchanged.
void make_identity(net::AsfNet& model) {
  for (const char* name : {"reconstruct.weight", "reconstruct.bias"}) {
    Tensor t = model.params().get(name)->value;
    t.fill(0.0);
    model.params().assign(name, t);
  }
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("mae_loss closed forms") {
    const auto a = data::make_clip(2, 4, 4, data::Role::clean, 0.3);
    const auto b = data::make_clip(2, 4, 4, data::Role::clean, 0.4);
    CHECK(mae_loss(a, a) == 0.0);
    CHECK(mae_loss(b, a) == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(mae_loss(a, b) == mae_loss(b, a));
    CHECK_THROWS_AS(mae_loss(a, data::make_clip(2, 4, 5, data::Role::clean)), ShapeMismatchError);
    std::vector<nn::Var> pred;
    for (const auto& f : b.frames) pred.push_back(nn::constant(f));
    CHECK(mae_loss(pred, a)->value[0] == doctest::Approx(0.1).epsilon(1e-14));
  }

  TEST_CASE("lr = 0 leaves parameters unchanged but reports the loss") {
    net::AsfNet model(tiny_model());
    TrainConfig cfg = tiny_config();
    cfg.lr = 0.0;
    Trainer trainer(model, cfg);
    const auto before = snapshot(model.params());
    const auto batch = fixed_batch(16, 3, 1);
    const StepLosses l = trainer.supervised_step(batch);
    CHECK(l.l_su > 0.0);
    CHECK(l.l_su == doctest::Approx(mae_loss(model.restore(batch.rainy), batch.clean)).epsilon(1e-12));
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(model.params().entries()[i].second->value == before[i].second);
  }

  TEST_CASE("repeated steps on one batch give a non-increasing 50-step moving average") {
    net::AsfNet model(tiny_model());
    TrainConfig cfg = tiny_config();
    cfg.lr = 5e-4;
    Trainer trainer(model, cfg);
    const auto batch = fixed_batch(16, 3, 2);
    std::vector<double> losses;
    for (int i = 0; i < 200; ++i) losses.push_back(trainer.supervised_step(batch).l_su);
    double window = 0.0;
    for (int i = 0; i < 50; ++i) window += losses[static_cast<std::size_t>(i)];
    double previous = window;
    for (std::size_t i = 50; i < losses.size(); ++i) {
      window += losses[i] - losses[i - 50];
      CHECK(window <= previous);
      previous = window;
    }
    CHECK(losses.back() < 0.5 * losses.front());
  }

  TEST_CASE("supervised loss gradient matches central differences") {
    net::AsfNet model(tiny_model());
    Rng rng(4);
    for (const char* name : {"align.offset.weight", "align.offset.bias"})
      model.params().assign(name, asf::testing::random_tensor(model.params().get(name)->value.shape(), rng, -0.05, 0.05));
    const auto batch = fixed_batch(16, 3, 3);
    std::vector<nn::Var> inputs;
    for (const auto& f : batch.rainy.frames) inputs.push_back(nn::constant(f));
    auto loss = [&] { return mae_loss(model.forward(inputs), batch.clean); };
    const auto& entries = model.params().entries();
    const auto& pick = entries[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(entries.size()) - 1))];
    CAPTURE(pick.first);
    CHECK(asf::testing::check_gradient(loss, pick.second, 10, 5).rel_error < 1e-3);
    CHECK(asf::testing::check_gradient(loss, model.params().get("fusion.merge.weight"), 10, 6).rel_error < 1e-3);
  }

  TEST_CASE("a non-finite parameter aborts the step and is named") {
    net::AsfNet model(tiny_model());
    Trainer trainer(model, tiny_config());
    Tensor w = model.params().get("fusion.block1.conv1.weight")->value;
    w[3] = std::numeric_limits<double>::quiet_NaN();
    model.params().assign("fusion.block1.conv1.weight", w);
    try {
      trainer.supervised_step(fixed_batch(16, 3, 1));
      FAIL("expected NonFiniteError");
    } catch (const NonFiniteError& e) {
      const std::string what = e.what();
      CAPTURE(what);
      CHECK(std::string(e.what()).find("fusion.block1.conv1.weight") != std::string::npos);
    }
  }

  TEST_CASE("with lambda 0 an ORL step equals a supervised step") {
    TrainConfig cfg = tiny_config();
    cfg.lambda_un = 0.0;
    net::AsfNet a(tiny_model()), b(tiny_model());
    Trainer ta(a, cfg), tb(b, cfg);
    const auto syn = fixed_batch(16, 3, 5);
    const Scene real = make_scene(6, 3, 16);
    const auto streaks = streak_sampler({make_scene(7, 3, 16).streaks});
    for (int i = 0; i < 3; ++i) {
      Rng rng(static_cast<std::uint64_t>(i));
      const StepLosses lo = tb.orl_step(real.rainy, syn, streaks, rng);
      const StepLosses ls = ta.supervised_step(syn);
      CHECK(lo.l_su == ls.l_su);
      CHECK(lo.total == lo.l_su);
      CHECK(lo.l_un > 0.0);
    }
    CHECK(same_params(a.params(), b.params()));
  }

  TEST_CASE("reported total is L_SU + lambda * L_UN") {
    TrainConfig cfg = tiny_config();
    cfg.lambda_un = 0.7;
    net::AsfNet model(tiny_model());
    Trainer trainer(model, cfg);
    const auto streaks = streak_sampler({make_scene(7, 3, 16).streaks});
    Rng rng(8);
    const StepLosses l = trainer.orl_step(make_scene(6, 3, 16).rainy, fixed_batch(16, 3, 5), streaks, rng);
    CHECK(l.total == l.l_su + 0.7 * l.l_un);
  }

  TEST_CASE("an identity model yields zero S_U and O_P = B_U + ReDe(0, S_L)") {
    net::AsfNet model(tiny_model());
    make_identity(model);
    const Scene real = make_scene(9, 3, 16);
    const auto s_l = make_scene(10, 3, 16).streaks;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      Rng rng(seed);
      const PseudoPair pair = make_pseudo_pair(model, real.rainy, s_l, rng);
      CHECK(pair.b_u.frames == real.rainy.frames);
      for (const auto& f : pair.s_u.frames)
        for (double v : f.values()) CHECK(v == 0.0);
      const auto base = pair.draw.real_base ? pair.s_u : s_l;
      const auto added = rede::rede_with(base, pair.draw.chain1, pair.draw.chain2, pair.draw.mix);
      for (int t = 0; t < 3; ++t)
        for (std::size_t i = 0; i < added.frames[t].numel(); ++i)
          CHECK(pair.o_p.frames[t][i] == std::min(pair.b_u.frames[t][i] + added.frames[t][i], 1.0));
    }
  }

  TEST_CASE("pseudo-labels are constants in the unsupervised loss") {
    net::AsfNet model(tiny_model());
    Rng rng(11);
    for (const char* name : {"align.offset.weight", "align.offset.bias", "reconstruct.weight"})
      model.params().assign(name, asf::testing::random_tensor(model.params().get(name)->value.shape(), rng, -0.05, 0.05));
    const Scene real = make_scene(12, 3, 16);
    const PseudoPair pair = make_pseudo_pair(model, real.rainy, make_scene(13, 3, 16).streaks, rng);
    std::vector<nn::Var> inputs;
    for (const auto& f : pair.o_p.frames) inputs.push_back(nn::constant(f));
    const auto& probe = model.params().get("fusion.merge.weight");

    // The analytic gradient is that of the loss with B_U frozen ...
    auto frozen = [&] { return mae_loss(model.forward(inputs), pair.b_u); };
    CHECK(asf::testing::check_gradient(frozen, probe, 16, 1).rel_error < 1e-3);

    // ... and not that of the loss with B_U recomputed from the parameters.
    std::vector<nn::Var> real_inputs;
    for (const auto& f : real.rainy.frames) real_inputs.push_back(nn::constant(f));
    auto through = [&] {
      const auto label = model.forward(real_inputs);
      data::VideoClip b_u;
      for (const auto& v : label) b_u.frames.push_back(v->value);
      return mae_loss(model.forward(inputs), b_u);
    };
    CHECK(asf::testing::check_gradient(through, probe, 16, 1).rel_error > 1e-2);
  }

  TEST_CASE("S_U from a pretrained model correlates with the injected streaks") {
    net::ModelConfig m = tiny_model();
    m.channels = 12;
    m.attention_reduction = 4;
    net::AsfNet model(m);
    TrainConfig cfg = tiny_config();
    cfg.lr = 2e-3;
    cfg.model = m;
    Trainer trainer(model, cfg);
    std::vector<Scene> scenes;
    for (std::uint64_t i = 0; i < 3; ++i) scenes.push_back(make_scene(20 + i, 3, 32));
    const double before = [&] {
      const Scene pretend = make_scene(99, 3, 32);
      Rng rng(1);
      const PseudoPair p = make_pseudo_pair(model, pretend.rainy, pretend.streaks, rng);
      return rainsim::frame_correlation(p.s_u.frames[1], pretend.streaks.frames[1]);
    }();
    for (int i = 0; i < 150; ++i) {
      const Scene& s = scenes[static_cast<std::size_t>(i % 3)];
      trainer.supervised_step({s.rainy, s.clean, {}});
    }
    const Scene pretend = make_scene(99, 3, 32);
    Rng rng(1);
    const PseudoPair p = make_pseudo_pair(model, pretend.rainy, pretend.streaks, rng);
    double corr = 0.0;
    for (int t = 0; t < 3; ++t) corr += rainsim::frame_correlation(p.s_u.frames[t], pretend.streaks.frames[t]) / 3;
    MESSAGE("S_U correlation before " << before << ", after " << corr);
    CHECK(corr > 0.0);
    CHECK(corr > before);
  }

  TEST_CASE("an empty streak database is an error") {
    net::AsfNet model(tiny_model());
    Trainer trainer(model, tiny_config());
    Rng rng(1);
    CHECK_THROWS_AS(trainer.orl_step(make_scene(1, 3, 16).rainy, fixed_batch(16, 3, 2), streak_sampler({}), rng),
                    EmptyStreakDatabaseError);
  }

  TEST_CASE("zero iterations checkpoint the initialization") {
    const auto dir = scratch_dir("train_zero");
    TrainConfig cfg = tiny_config();
    cfg.iterations = 0;
    const auto ckpt = train::train({write_train_set(dir / "data", 1, 4, 24)}, cfg, Mode::pretrain, {dir / "run"});
    CHECK(ckpt.filename().string().rfind("ckpt_0", 0) == 0);
    const data::Checkpoint saved = data::load_checkpoint(ckpt);
    const net::AsfNet fresh(cfg.model);
    for (const auto& [name, var] : fresh.params().entries()) CHECK(*saved.find(name) == var->value);
    CHECK(saved.meta["iteration"] == 0);
  }

  TEST_CASE("resuming from a checkpoint continues bit-identically") {
    const auto dir = scratch_dir("train_resume");
    const data::Manifest m = write_train_set(dir / "data", 2, 4, 24);
    const TrainConfig cfg = tiny_config();

    std::ostringstream straight_log;
    std::vector<double> straight;
    TrainOptions a{dir / "a"};
    a.log = &straight_log;
    a.on_step = [&](long, const StepLosses& l) { straight.push_back(l.total); };
    const auto end_a = train::train({m}, cfg, Mode::pretrain, a);
    CHECK(std::filesystem::exists(dir / "a" / data::checkpoint_path("", 3)));

    std::vector<double> resumed;
    TrainOptions b{dir / "b"};
    b.resume = dir / "a" / data::checkpoint_path("", 3);
    b.on_step = [&](long, const StepLosses& l) { resumed.push_back(l.total); };
    const auto end_b = train::train({m}, cfg, Mode::pretrain, b);

    REQUIRE(straight.size() == 6);
    REQUIRE(resumed.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(resumed[static_cast<std::size_t>(i)] - straight[static_cast<std::size_t>(i + 3)]) <= 1e-12);
    const auto ca = data::load_checkpoint(end_a), cb = data::load_checkpoint(end_b);
    for (const auto& arr : ca.arrays) CHECK(*cb.find(arr.name) == arr.value);

    std::istringstream lines(straight_log.str());
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) {
      const auto j = nlohmann::json::parse(line);
      for (const char* key : {"iter", "L_SU", "L_UN", "total", "lr", "wall_ms"}) CHECK(j.contains(key));
      CHECK(j["iter"] == ++count);
    }
    CHECK(count == 6);
  }

  TEST_CASE("orl needs real and streak splits") {
    const auto dir = scratch_dir("train_orl_missing");
    const data::Manifest m = write_train_set(dir / "data", 1, 4, 24);
    CHECK_THROWS_AS(train::train({m}, tiny_config(), Mode::orl, {dir / "run"}), MissingSplitError);
  }

  TEST_CASE("optimizer state round-trips through a checkpoint") {
    net::AsfNet model(tiny_model());
    Trainer trainer(model, tiny_config());
    trainer.supervised_step(fixed_batch(16, 3, 1));
    const data::Checkpoint ck = make_checkpoint(trainer, 1);
    net::AsfNet other(tiny_model());
    Trainer t2(other, tiny_config());
    CHECK(restore_checkpoint(t2, ck) == 1);
    CHECK(t2.optimizer().steps() == 1);
    const auto batch = fixed_batch(16, 3, 2);
    trainer.supervised_step(batch);
    t2.supervised_step(batch);
    CHECK(same_params(model.params(), other.params()));
  }

  TEST_CASE("train configs round-trip and validate") {
    TrainConfig c = tiny_config();
    CHECK(to_json(train_config_from_json(to_json(c))) == to_json(c));
    CHECK_THROWS_AS(train_config_from_json({{"nope", 1}}), ConfigError);
    c.length = 4;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny_config();
    c.lambda_un = -1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK(TrainConfig{}.lr == 1e-4);
    CHECK(TrainConfig{}.weight_decay == 1e-4);
    CHECK(TrainConfig{}.lambda_un == 1.0);
  }
}
