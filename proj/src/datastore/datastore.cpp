#include "asf/datastore/datastore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "asf/common/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace asf::data {
namespace {

constexpr std::string_view kCheckpointMagic = "ASFCKPT1";

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  static const std::set<std::string> kExts{".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".ppm", ".pgm"};
  return kExts.count(ext) != 0;
}

nn::Tensor decode_frame(const fs::path& file) {
  cv::Mat img;
  try {
    img = cv::imread(file.string(), cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw FrameDecodeError("cannot decode frame " + file.string() + ": " + e.what());
  }
  if (img.empty()) throw FrameDecodeError("cannot decode frame " + file.string());
  nn::Tensor frame({3, img.rows, img.cols});
  for (int y = 0; y < img.rows; ++y) {
    const auto* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.cols; ++x) {
      // OpenCV stores BGR.
      frame.at(0, y, x) = row[x][2] / 255.0;
      frame.at(1, y, x) = row[x][1] / 255.0;
      frame.at(2, y, x) = row[x][0] / 255.0;
    }
  }
  return frame;
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

bool role_allowed(Split split, Role role) {
  switch (split) {
    case Split::train:
    case Split::test:
      return role == Role::clean || role == Role::rainy || role == Role::streak;
    case Split::real:
      return role == Role::real;
    case Split::streak_db:
      return role == Role::streak;
  }
  return false;
}

const ClipPair& pick_pair(const std::vector<ClipPair>& pairs, Rng& rng) {
  if (pairs.empty()) throw ManifestError("manifest has no rainy/clean pairs");
  return pairs[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pairs.size()) - 1))];
}

const VideoClip& fetch(const Manifest& manifest, const ManifestEntry& entry, ClipCache* cache,
                       std::unique_ptr<VideoClip>& owned) {
  if (cache) return cache->get(manifest.resolve(entry), entry.role);
  owned = std::make_unique<VideoClip>(load_clip(manifest.resolve(entry), entry.role));
  return *owned;
}

void require_fits(const VideoClip& clip, const std::string& id, int crop_h, int crop_w, int length) {
  if (clip.length() < length) {
    throw ClipTooSmallError("clip '" + id + "' has " + std::to_string(clip.length()) +
                            " frames, need " + std::to_string(length));
  }
  if (clip.height() < crop_h || clip.width() < crop_w) {
    throw ClipTooSmallError("clip '" + id + "' is " + std::to_string(clip.height()) + "x" +
                            std::to_string(clip.width()) + ", crop needs " + std::to_string(crop_h) +
                            "x" + std::to_string(crop_w));
  }
}

void write_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    const int c = in.get();
    if (c == EOF) throw CheckpointError("truncated checkpoint header");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::clean: return "clean";
    case Role::rainy: return "rainy";
    case Role::streak: return "streak";
    case Role::restored: return "restored";
    case Role::real: return "real";
  }
  return "?";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::real: return "real";
    case Split::streak_db: return "streak_db";
  }
  return "?";
}

Role parse_role(std::string_view text) {
  for (Role r : {Role::clean, Role::rainy, Role::streak, Role::restored, Role::real}) {
    if (to_string(r) == text) return r;
  }
  throw ManifestError("unknown role '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  for (Split s : {Split::train, Split::test, Split::real, Split::streak_db}) {
    if (to_string(s) == text) return s;
  }
  throw ManifestError("unknown split '" + std::string(text) + "'");
}

void VideoClip::validate() const {
  if (frames.empty()) throw EmptyClipError("clip has no frames");
  const auto& shape = frames.front().shape();
  if (shape.size() != 3 || shape[0] != 3 || shape[1] < 1 || shape[2] < 1) {
    throw FrameShapeMismatchError("frames must be 3 x H x W, got " + nn::shape_string(shape));
  }
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].shape() != shape) {
      throw FrameShapeMismatchError("frame " + std::to_string(t) + " has shape " +
                                    frames[t].shape_string() + ", expected " +
                                    nn::shape_string(shape));
    }
    const bool bounded = role != Role::streak;
    for (double v : frames[t].values()) {
      if (!std::isfinite(v) || v < 0.0 || (bounded && v > 1.0)) {
        throw PreconditionError("frame " + std::to_string(t) + " of a " + std::string(to_string(role)) +
                                " clip has out-of-range value " + std::to_string(v));
      }
    }
  }
}

VideoClip make_clip(int length, int height, int width, Role role, double fill) {
  VideoClip clip;
  clip.role = role;
  clip.frames.assign(static_cast<std::size_t>(length), nn::Tensor({3, height, width}, fill));
  return clip;
}

bool same_geometry(const VideoClip& a, const VideoClip& b) {
  return a.length() == b.length() && a.height() == b.height() && a.width() == b.width();
}

VideoClip crop_clip(const VideoClip& clip, int t0, int length, int y0, int x0, int h, int w) {
  if (t0 < 0 || length < 1 || t0 + length > clip.length() || y0 < 0 || x0 < 0 ||
      y0 + h > clip.height() || x0 + w > clip.width() || h < 1 || w < 1) {
    throw ClipTooSmallError("crop outside clip bounds");
  }
  VideoClip out;
  out.role = clip.role;
  for (int t = t0; t < t0 + length; ++t) {
    nn::Tensor f({3, h, w});
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) f.at(c, y, x) = clip.frames[t].at(c, y0 + y, x0 + x);
      }
    }
    out.frames.push_back(std::move(f));
  }
  return out;
}

VideoClip load_clip(const fs::path& dir, Role role) {
  if (!fs::is_directory(dir)) throw MissingDirectoryError("clip directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  if (files.empty()) throw EmptyClipError("no frames in " + dir.string());

  VideoClip clip;
  clip.role = role;
  for (const auto& file : files) {
    nn::Tensor frame = decode_frame(file);
    if (!clip.frames.empty() && !frame.same_shape(clip.frames.front())) {
      throw FrameShapeMismatchError("frame " + file.filename().string() + " is " +
                                    frame.shape_string() + ", earlier frames are " +
                                    clip.frames.front().shape_string());
    }
    clip.frames.push_back(std::move(frame));
  }
  return clip;
}

void save_clip(const VideoClip& clip, const fs::path& dir) {
  if (clip.frames.empty()) throw EmptyClipError("cannot save a clip with no frames");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw WriteError("cannot create clip directory " + dir.string() + ": " + ec.message());
  }
  const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 6};
  for (int t = 0; t < clip.length(); ++t) {
    const nn::Tensor& f = clip.frames[t];
    cv::Mat img(f.dim(1), f.dim(2), CV_8UC3);
    for (int y = 0; y < img.rows; ++y) {
      auto* row = img.ptr<cv::Vec3b>(y);
      for (int x = 0; x < img.cols; ++x) {
        row[x] = cv::Vec3b(quantize(f.at(2, y, x)), quantize(f.at(1, y, x)), quantize(f.at(0, y, x)));
      }
    }
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05d.png", t);
    const fs::path file = dir / name;
    bool ok = false;
    try {
      ok = cv::imwrite(file.string(), img, params);
    } catch (const cv::Exception& e) {
      throw WriteError("cannot write " + file.string() + ": " + e.what());
    }
    if (!ok) throw WriteError("cannot write " + file.string());
  }
}

fs::path Manifest::resolve(const ManifestEntry& entry) const {
  const fs::path p(entry.path);
  return p.is_absolute() ? p : base_dir / p;
}

void Manifest::validate() const {
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (e.clip_id.empty()) throw ManifestError("entry with empty clip_id");
    if (!ids.insert(e.clip_id).second) throw ManifestError("duplicate clip_id '" + e.clip_id + "'");
    if (!role_allowed(split, e.role)) {
      throw ManifestError("clip '" + e.clip_id + "' has role " + std::string(to_string(e.role)) +
                          " which is not allowed in a " + std::string(to_string(split)) + " split");
    }
    if (e.frames < 1 || e.height < 1 || e.width < 1) {
      throw ManifestError("clip '" + e.clip_id + "' has a non-positive dimension");
    }
  }
}

json to_json(const Manifest& manifest) {
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"clip_id", e.clip_id},
                       {"path", e.path},
                       {"T", e.frames},
                       {"H", e.height},
                       {"W", e.width},
                       {"role", std::string(to_string(e.role))},
                       {"seed_used", e.seed_used}});
  }
  return {{"split", std::string(to_string(manifest.split))}, {"entries", entries}};
}

Manifest manifest_from_json(const json& j, fs::path base_dir) {
  Manifest m;
  m.base_dir = std::move(base_dir);
  try {
    m.split = parse_split(j.at("split").get<std::string>());
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.clip_id = e.at("clip_id").get<std::string>();
      entry.path = e.at("path").get<std::string>();
      entry.frames = e.at("T").get<int>();
      entry.height = e.at("H").get<int>();
      entry.width = e.at("W").get<int>();
      entry.role = parse_role(e.at("role").get<std::string>());
      entry.seed_used = e.at("seed_used").get<std::uint64_t>();
      m.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw ManifestError(std::string("malformed manifest: ") + e.what());
  }
  m.validate();
  return m;
}

Manifest load_manifest(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ManifestError("cannot open manifest " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ManifestError("invalid JSON in " + file.string() + ": " + e.what());
  }
  return manifest_from_json(j, file.parent_path());
}

void save_manifest(const Manifest& manifest, const fs::path& file) {
  manifest.validate();
  std::error_code ec;
  if (file.has_parent_path()) fs::create_directories(file.parent_path(), ec);
  std::ofstream out(file);
  if (!out) throw WriteError("cannot write manifest " + file.string());
  out << to_json(manifest).dump(2) << "\n";
  if (!out) throw WriteError("cannot write manifest " + file.string());
}

std::vector<std::string> verify_manifest(const Manifest& manifest) {
  std::vector<std::string> problems;
  try {
    manifest.validate();
  } catch (const ManifestError& e) {
    problems.emplace_back(e.what());
  }
  for (const auto& e : manifest.entries) {
    try {
      const VideoClip clip = load_clip(manifest.resolve(e), e.role);
      if (clip.length() != e.frames || clip.height() != e.height || clip.width() != e.width) {
        problems.push_back("clip '" + e.clip_id + "': manifest says " + std::to_string(e.frames) + "x" +
                           std::to_string(e.height) + "x" + std::to_string(e.width) + ", disk has " +
                           std::to_string(clip.length()) + "x" + std::to_string(clip.height()) + "x" +
                           std::to_string(clip.width()));
      }
    } catch (const Error& err) {
      problems.push_back("clip '" + e.clip_id + "': " + err.kind() + ": " + err.what());
    }
  }
  return problems;
}

std::string group_of(const ManifestEntry& entry) {
  const std::string suffix = "_" + std::string(to_string(entry.role));
  const std::string& id = entry.clip_id;
  if (id.size() > suffix.size() && id.compare(id.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return id.substr(0, id.size() - suffix.size());
  }
  return id;
}

std::vector<ClipPair> paired_entries(const Manifest& manifest) {
  std::map<std::string, ClipPair> groups;
  for (const auto& e : manifest.entries) {
    if (e.role != Role::rainy && e.role != Role::clean) continue;
    ClipPair& pair = groups[group_of(e)];
    pair.group = group_of(e);
    (e.role == Role::rainy ? pair.rainy : pair.clean) = &e;
  }
  std::vector<ClipPair> out;
  for (auto& [group, pair] : groups) {
    if (!pair.rainy || !pair.clean) {
      throw ManifestError("clip group '" + group + "' lacks its " +
                          std::string(pair.rainy ? "clean" : "rainy") + " counterpart");
    }
    out.push_back(pair);
  }
  return out;
}

const VideoClip& ClipCache::get(const fs::path& dir, Role role) {
  std::lock_guard lock(mutex_);
  auto& slot = clips_[dir.string()];
  if (!slot) slot = std::make_unique<VideoClip>(load_clip(dir, role));
  return *slot;
}

TrainSample sample_batch(const Manifest& manifest, std::uint64_t seed, int crop_size, int length,
                         ClipCache* cache) {
  if (manifest.split != Split::train) {
    throw ManifestError("sample_batch needs a train split, got " + std::string(to_string(manifest.split)));
  }
  if (crop_size < 1 || length < 1) throw PreconditionError("crop size and length must be positive");
  const auto pairs = paired_entries(manifest);
  Rng rng(seed);
  const ClipPair& pair = pick_pair(pairs, rng);

  std::unique_ptr<VideoClip> rainy_owned, clean_owned;
  const VideoClip& rainy = fetch(manifest, *pair.rainy, cache, rainy_owned);
  const VideoClip& clean = fetch(manifest, *pair.clean, cache, clean_owned);
  if (!same_geometry(rainy, clean)) {
    throw FrameShapeMismatchError("rainy and clean clips of '" + pair.group + "' differ in shape");
  }
  require_fits(rainy, pair.group, crop_size, crop_size, length);

  TrainSample sample;
  sample.provenance.clip_id = pair.group;
  sample.provenance.seed = seed;
  sample.provenance.frame_start = rng.uniform_int(0, rainy.length() - length);
  sample.provenance.crop_y = rng.uniform_int(0, rainy.height() - crop_size);
  sample.provenance.crop_x = rng.uniform_int(0, rainy.width() - crop_size);
  const auto& p = sample.provenance;
  sample.rainy = crop_clip(rainy, p.frame_start, length, p.crop_y, p.crop_x, crop_size, crop_size);
  sample.clean = crop_clip(clean, p.frame_start, length, p.crop_y, p.crop_x, crop_size, crop_size);
  return sample;
}

VideoClip sample_clip(const Manifest& manifest, Role role, std::uint64_t seed, int crop_h, int crop_w,
                      int length, ClipCache* cache, Provenance* provenance) {
  std::vector<const ManifestEntry*> candidates;
  for (const auto& e : manifest.entries) {
    if (e.role == role) candidates.push_back(&e);
  }
  if (candidates.empty()) {
    throw ManifestError("manifest has no clips with role " + std::string(to_string(role)));
  }
  Rng rng(seed);
  const ManifestEntry& entry =
      *candidates[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(candidates.size()) - 1))];
  std::unique_ptr<VideoClip> owned;
  const VideoClip& clip = fetch(manifest, entry, cache, owned);
  require_fits(clip, entry.clip_id, crop_h, crop_w, length);
  Provenance p;
  p.clip_id = entry.clip_id;
  p.seed = seed;
  p.frame_start = rng.uniform_int(0, clip.length() - length);
  p.crop_y = rng.uniform_int(0, clip.height() - crop_h);
  p.crop_x = rng.uniform_int(0, clip.width() - crop_w);
  if (provenance) *provenance = p;
  return crop_clip(clip, p.frame_start, length, p.crop_y, p.crop_x, crop_h, crop_w);
}

const nn::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a.value;
  }
  return nullptr;
}

void save_checkpoint(const Checkpoint& checkpoint, const fs::path& file) {
  static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes little-endian");
  json directory = json::array();
  std::uint64_t offset = 0;
  for (const auto& a : checkpoint.arrays) {
    directory.push_back({{"name", a.name}, {"shape", a.value.shape()}, {"offset", offset}});
    offset += a.value.numel();
  }
  const std::string header =
      json{{"format", "asf-checkpoint"}, {"version", 1}, {"meta", checkpoint.meta}, {"arrays", directory}}
          .dump();

  std::error_code ec;
  if (file.has_parent_path()) fs::create_directories(file.parent_path(), ec);
  std::ofstream out(file, std::ios::binary);
  if (!out) throw WriteError("cannot write checkpoint " + file.string());
  out.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  write_u64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& a : checkpoint.arrays) {
    out.write(reinterpret_cast<const char*>(a.value.data()),
              static_cast<std::streamsize>(a.value.numel() * sizeof(double)));
  }
  if (!out) throw WriteError("cannot write checkpoint " + file.string());
}

Checkpoint load_checkpoint(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + file.string());
  std::string magic(kCheckpointMagic.size(), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (magic != kCheckpointMagic) throw CheckpointError(file.string() + " is not a checkpoint");
  const std::uint64_t header_size = read_u64(in);
  std::string header(header_size, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_size));
  if (!in) throw CheckpointError("truncated checkpoint header in " + file.string());

  Checkpoint ckpt;
  json h;
  try {
    h = json::parse(header);
    ckpt.meta = h.at("meta");
    for (const auto& a : h.at("arrays")) {
      ckpt.arrays.push_back({a.at("name").get<std::string>(),
                             nn::Tensor(a.at("shape").get<std::vector<int>>())});
    }
  } catch (const json::exception& e) {
    throw CheckpointError("malformed checkpoint header: " + std::string(e.what()));
  }
  for (auto& a : ckpt.arrays) {
    in.read(reinterpret_cast<char*>(a.value.data()),
            static_cast<std::streamsize>(a.value.numel() * sizeof(double)));
    if (!in) throw CheckpointError("truncated checkpoint payload in " + file.string());
  }
  return ckpt;
}

fs::path checkpoint_path(const fs::path& dir, long iteration) {
  return dir / ("ckpt_" + std::to_string(iteration) + ".bin");
}

}  // namespace asf::data
