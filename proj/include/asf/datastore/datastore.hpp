#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "asf/common/error.hpp"
#include "asf/nn/tensor.hpp"

namespace asf::data {

ASF_DEFINE_ERROR(MissingDirectoryError);
ASF_DEFINE_ERROR(FrameShapeMismatchError);
ASF_DEFINE_ERROR(FrameDecodeError);
ASF_DEFINE_ERROR(EmptyClipError);
ASF_DEFINE_ERROR(WriteError);
ASF_DEFINE_ERROR(ClipTooSmallError);
ASF_DEFINE_ERROR(ManifestError);
ASF_DEFINE_ERROR(CheckpointError);

enum class Role { clean, rainy, streak, restored, real };
enum class Split { train, test, real, streak_db };

std::string_view to_string(Role role);
std::string_view to_string(Split split);
Role parse_role(std::string_view text);
Split parse_split(std::string_view text);

// Temporally ordered RGB frames, each stored planar as a 3 x H x W tensor.
// Clean, rainy, restored and real clips live in [0, 1]; streak layers are
// nonnegative.
struct VideoClip {
  std::vector<nn::Tensor> frames;
  Role role = Role::clean;

  int length() const { return static_cast<int>(frames.size()); }
  int height() const { return frames.empty() ? 0 : frames.front().dim(1); }
  int width() const { return frames.empty() ? 0 : frames.front().dim(2); }

  // Throws EmptyClipError / FrameShapeMismatchError / PreconditionError.
  void validate() const;
};

VideoClip make_clip(int length, int height, int width, Role role, double fill = 0.0);
bool same_geometry(const VideoClip& a, const VideoClip& b);

// Sub-clip [t0, t0 + length) x [y0, y0 + h) x [x0, x0 + w).
VideoClip crop_clip(const VideoClip& clip, int t0, int length, int y0, int x0, int h, int w);

// Reads `frame_*.png` (any decodable image works) from a directory in
// lexicographic order and maps 8-bit values v to v / 255.
VideoClip load_clip(const std::filesystem::path& dir, Role role = Role::clean);

// Writes frames as `frame_%05d.png`, 8-bit, value round(255 * clamp(v, 0, 1)).
void save_clip(const VideoClip& clip, const std::filesystem::path& dir);

struct ManifestEntry {
  std::string clip_id;
  std::string path;  // relative to the manifest's directory unless absolute
  int frames = 0;
  int height = 0;
  int width = 0;
  Role role = Role::clean;
  std::uint64_t seed_used = 0;
};

struct Manifest {
  Split split = Split::train;
  std::vector<ManifestEntry> entries;
  // Directory used to resolve relative entry paths; not serialized.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const ManifestEntry& entry) const;
  // Unique ids and roles consistent with the split.
  void validate() const;
};

nlohmann::json to_json(const Manifest& manifest);
Manifest manifest_from_json(const nlohmann::json& j, std::filesystem::path base_dir = {});
Manifest load_manifest(const std::filesystem::path& file);
void save_manifest(const Manifest& manifest, const std::filesystem::path& file);

// Checks every entry resolves to a clip whose (T, H, W) matches the entry.
// Returns a list of problems; empty means the manifest is consistent.
std::vector<std::string> verify_manifest(const Manifest& manifest);

// Entry ids follow "<group>_<role>"; a rainy/clean pair shares the group.
struct ClipPair {
  std::string group;
  const ManifestEntry* rainy = nullptr;
  const ManifestEntry* clean = nullptr;
};
std::vector<ClipPair> paired_entries(const Manifest& manifest);
std::string group_of(const ManifestEntry& entry);

// Memoises decoded clips by path; safe for concurrent readers.
class ClipCache {
 public:
  const VideoClip& get(const std::filesystem::path& dir, Role role);

 private:
  std::mutex mutex_;
  std::map<std::string, std::unique_ptr<VideoClip>> clips_;
};

struct Provenance {
  std::string clip_id;
  int frame_start = 0;
  int crop_y = 0;
  int crop_x = 0;
  std::uint64_t seed = 0;
};

struct TrainSample {
  VideoClip rainy;
  VideoClip clean;
  Provenance provenance;
};

// Chooses a rainy/clean pair, a temporal start in [0, T - length] and a crop
// origin uniformly, all as a pure function of (manifest, seed).
TrainSample sample_batch(const Manifest& manifest, std::uint64_t seed, int crop_size, int length,
                         ClipCache* cache = nullptr);

// Same sampling law for single clips of one role (real clips, streak layers).
VideoClip sample_clip(const Manifest& manifest, Role role, std::uint64_t seed, int crop_h,
                      int crop_w, int length, ClipCache* cache = nullptr,
                      Provenance* provenance = nullptr);

// Binary checkpoint: "ASFCKPT1", u64 header size, JSON header (meta plus
// array directory), then little-endian float64 payload.
struct NamedArray {
  std::string name;
  nn::Tensor value;
};

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedArray> arrays;

  const nn::Tensor* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& file);
Checkpoint load_checkpoint(const std::filesystem::path& file);
std::filesystem::path checkpoint_path(const std::filesystem::path& dir, long iteration);

}  // namespace asf::data
