#include "asf/cli/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>

#include "asf/common/config.hpp"
#include "asf/datastore/datastore.hpp"
#include "asf/metrics/metrics.hpp"
#include "asf/net/asfnet.hpp"
#include "asf/rainsim/rainsim.hpp"
#include "asf/trainer/trainer.hpp"

namespace asf::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

ASF_DEFINE_ERROR(UsageError);

struct Flags {
  std::string config;
  std::string out;
  std::string in;
  std::string ckpt;
  int count = 1;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::optional<long> iterations;
};

// Relative paths resolve against ASF_DATA_ROOT when it is set.
fs::path resolve(const std::string& path) {
  const fs::path p(path);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("ASF_DATA_ROOT"); root != nullptr && *root != '\0') return fs::path(root) / p;
  return p;
}

void require(const std::string& value, const char* flag, const char* command) {
  if (value.empty()) throw UsageError(std::string(command) + " requires " + flag);
}

// defaults <- config file <- --seed / --iterations <- --override.
json build_config(json defaults, const Flags& flags, bool has_iterations) {
  if (!flags.config.empty()) config::merge_checked(defaults, config::load_file(resolve(flags.config)));
  if (flags.seed) defaults["seed"] = *flags.seed;
  if (flags.iterations) {
    if (!has_iterations) throw UsageError("--iterations does not apply to this command");
    defaults["iterations"] = *flags.iterations;
  }
  for (const auto& o : flags.overrides) config::apply_override(defaults, o);
  return defaults;
}

json synth_defaults() {
  return {{"seed", 0},
          {"split", "train"},
          {"frames", 10},
          {"height", 64},
          {"width", 64},
          {"motion", {1.0, 0.0}},
          {"blobs", 6},
          {"rain", rainsim::to_json(rainsim::RainConfig{})}};
}

json train_defaults() {
  json j = train::to_json(train::TrainConfig{});
  j["data"] = {{"train", ""}, {"real", ""}, {"streak_db", ""}};
  return j;
}

int cmd_synth(const Flags& flags, std::ostream& out) {
  const json cfg = build_config(synth_defaults(), flags, false);
  require(flags.out, "--out", "synth");
  json rain_json = cfg.at("rain");
  const rainsim::RainConfig base_rain = rainsim::rain_config_from_json(rain_json);
  const data::Split split = data::parse_split(cfg.at("split").get<std::string>());
  const rainsim::FrameSize size{cfg.at("height").get<int>(), cfg.at("width").get<int>()};
  const int frames = cfg.at("frames").get<int>();
  if (frames < 1 || size.height < 1 || size.width < 1) throw ConfigError("frames, height and width must be >= 1");
  const auto seed = cfg.at("seed").get<std::uint64_t>();

  const fs::path root = resolve(flags.out);
  data::Manifest manifest;
  manifest.split = split;
  manifest.base_dir = root;
  auto write = [&](const std::string& id, const data::VideoClip& clip, std::uint64_t used) {
    data::save_clip(clip, root / id);
    manifest.entries.push_back({id, id, clip.length(), clip.height(), clip.width(), clip.role, used});
  };
  for (int i = 0; i < flags.count; ++i) {
    const std::uint64_t clip_seed = mix_seed(seed, static_cast<std::uint64_t>(i));
    rainsim::RainConfig rain = base_rain;
    rain.seed = mix_seed(clip_seed, 1);
    rainsim::BackgroundConfig bg;
    bg.motion = cfg.at("motion").get<std::array<double, 2>>();
    bg.blobs = cfg.at("blobs").get<int>();
    bg.seed = mix_seed(clip_seed, 2);
    const std::string group = "clip" + std::to_string(i);
    const data::VideoClip streaks = rainsim::synthesize_rain_video(rain, frames, size);
    if (split == data::Split::streak_db) {
      write(group + "_streak", streaks, clip_seed);
      continue;
    }
    const data::VideoClip clean = rainsim::synthesize_background(bg, frames, size);
    data::VideoClip rainy = rainsim::composite(clean, streaks);
    if (split == data::Split::real) {
      rainy.role = data::Role::real;
      write(group + "_real", rainy, clip_seed);
      continue;
    }
    write(group + "_clean", clean, clip_seed);
    write(group + "_rainy", rainy, clip_seed);
    write(group + "_streak", streaks, clip_seed);
  }
  data::save_manifest(manifest, root / "manifest.json");
  out << json{{"manifest", (root / "manifest.json").string()}, {"clips", manifest.entries.size()}}.dump() << '\n';
  return kSuccess;
}

int cmd_train(const Flags& flags, std::ostream& out, train::Mode mode) {
  const char* name = mode == train::Mode::orl ? "orl" : "train";
  json cfg = build_config(train_defaults(), flags, true);
  require(flags.out, "--out", name);
  const json data_cfg = cfg.at("data");
  cfg.erase("data");
  const train::TrainConfig tc = train::train_config_from_json(cfg);

  auto manifest_path = [&](const char* key) -> std::string {
    return data_cfg.at(key).get<std::string>();
  };
  std::string train_manifest = manifest_path("train");
  if (!flags.in.empty()) train_manifest = flags.in;
  if (train_manifest.empty()) throw UsageError(std::string(name) + " needs --in or data.train");

  train::TrainData data{data::load_manifest(resolve(train_manifest)), std::nullopt, std::nullopt};
  train::TrainOptions options;
  options.out_dir = resolve(flags.out);
  if (mode == train::Mode::orl) {
    if (manifest_path("real").empty() || manifest_path("streak_db").empty()) {
      throw UsageError("orl needs data.real and data.streak_db");
    }
    data.real = data::load_manifest(resolve(manifest_path("real")));
    data.streak_db = data::load_manifest(resolve(manifest_path("streak_db")));
    if (!flags.ckpt.empty()) options.init = resolve(flags.ckpt);
  } else if (!flags.ckpt.empty()) {
    options.resume = resolve(flags.ckpt);
  }
  std::filesystem::create_directories(options.out_dir);
  std::ofstream log(options.out_dir / (std::string(name) + "_log.ndjson"),
                    options.resume ? std::ios::app : std::ios::trunc);
  options.log = &log;
  const fs::path ckpt = train::train(data, tc, mode, options);
  out << json{{"checkpoint", ckpt.string()}}.dump() << '\n';
  return kSuccess;
}

net::AsfNet load_model(const std::string& ckpt_path) {
  const data::Checkpoint ck = data::load_checkpoint(resolve(ckpt_path));
  if (!ck.meta.contains("model")) throw data::CheckpointError("checkpoint carries no model config");
  net::AsfNet model(net::model_config_from_json(ck.meta.at("model")));
  model.load(ck);
  return model;
}

int cmd_infer(const Flags& flags, std::ostream& out) {
  require(flags.ckpt, "--ckpt", "infer");
  require(flags.in, "--in", "infer");
  require(flags.out, "--out", "infer");
  if (!flags.config.empty() || !flags.overrides.empty()) build_config(json::object({{"seed", 0}}), flags, false);
  net::AsfNet model = load_model(flags.ckpt);
  const data::VideoClip clip = data::load_clip(resolve(flags.in), data::Role::rainy);
  const data::VideoClip restored = model.restore(clip);
  data::save_clip(restored, resolve(flags.out));
  out << json{{"frames", restored.length()}, {"out", resolve(flags.out).string()}}.dump() << '\n';
  return kSuccess;
}

int cmd_eval(const Flags& flags, std::ostream& out) {
  require(flags.in, "--in", "eval");
  const data::Manifest test = data::load_manifest(resolve(flags.in));
  metrics::Restorer restorer = [](const data::VideoClip& c) { return c; };
  json meta{{"dataset", flags.in}, {"checkpoint", flags.ckpt.empty() ? "identity" : flags.ckpt}};
  std::optional<net::AsfNet> model;
  if (!flags.ckpt.empty()) {
    model.emplace(load_model(flags.ckpt));
    restorer = [&model](const data::VideoClip& c) { return model->restore(c); };
  }
  const metrics::MetricsReport report = metrics::evaluate(restorer, test, meta);
  const std::string text = metrics::to_json(report).dump(2);
  if (!flags.out.empty()) {
    std::ofstream file(resolve(flags.out));
    if (!file) throw data::WriteError("cannot write report to " + flags.out);
    file << text << '\n';
  }
  out << text << '\n';
  return kSuccess;
}

int cmd_verify(const Flags& flags, std::ostream& out, std::ostream& err) {
  require(flags.in, "--in", "verify-manifest");
  const data::Manifest manifest = data::load_manifest(resolve(flags.in));
  const auto problems = data::verify_manifest(manifest);
  out << json{{"entries", manifest.entries.size()}, {"problems", problems}}.dump() << '\n';
  if (problems.empty()) return kSuccess;
  err << "error: ManifestError: " << problems.size() << " inconsistent entries\n";
  return kRuntime;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Video rain removal: synthesis, training, adaptation, inference, evaluation", "asf"};
  app.require_subcommand(1);
  Flags flags;
  app.add_option("--config", flags.config, "Config file (.json or .toml)");
  app.add_option("--out", flags.out, "Output directory or file");
  app.add_option("--in", flags.in, "Input clip directory or manifest");
  app.add_option("--ckpt", flags.ckpt, "Checkpoint file");
  app.add_option("--count", flags.count, "Number of clips to synthesize")->check(CLI::PositiveNumber);
  app.add_option("--seed", flags.seed, "Seed for every random draw");
  app.add_option("--override", flags.overrides, "Config override key=value (repeatable)")->allow_extra_args(false);
  app.add_option("--iterations", flags.iterations, "Training iterations");
  const std::vector<std::pair<const char*, const char*>> commands{
      {"synth", "Render rain streaks over procedural backgrounds and write a manifest"},
      {"train", "Supervised training on a paired manifest"},
      {"orl", "Online re-degraded adaptation from a pretrained checkpoint"},
      {"infer", "Restore one clip directory"},
      {"eval", "Score a paired test manifest"},
      {"verify-manifest", "Check manifest entries against the clips on disk"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  // The first bare token is the subcommand; every flag takes one value.
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (!a.empty() && a.front() == '-') {
      if (a != "-h" && a != "--help" && a.find('=') == std::string::npos) ++i;
      continue;
    }
    const bool known = std::any_of(commands.begin(), commands.end(), [&](const auto& c) { return a == c.first; });
    if (!known) {
      err << "error: UsageError: unknown subcommand '" << a << "'\n";
      return kUsage;
    }
    break;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: UsageError: " << e.what() << '\n';
    return kUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "synth") return cmd_synth(flags, out);
    if (command == "train") return cmd_train(flags, out, train::Mode::pretrain);
    if (command == "orl") return cmd_train(flags, out, train::Mode::orl);
    if (command == "infer") return cmd_infer(flags, out);
    if (command == "eval") return cmd_eval(flags, out);
    return cmd_verify(flags, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.kind() << ": " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigNotFoundError& e) {
    err << "error: " << e.kind() << ": " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.kind() << ": " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << e.what() << '\n';
    return kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

}  // namespace asf::cli
