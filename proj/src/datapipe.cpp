#include "tumorscope/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <set>
#include <tuple>

#include "json.hpp"
#include "tumorscope/binary_io.hpp"

namespace tumorscope {

using json = nlohmann::json;

std::string to_string(View v) {
  switch (v) {
    case View::kAxial: return "axial";
    case View::kCoronal: return "coronal";
    case View::kSagittal: return "sagittal";
  }
  return "?";
}

View parse_view(const std::string& s) {
  if (s == "axial") return View::kAxial;
  if (s == "coronal") return View::kCoronal;
  if (s == "sagittal") return View::kSagittal;
  throw Error("unknown view '" + s + "'");
}

namespace {

// Plane extraction: `sample(i, j)` returns the voxel index for image row i,
// column j.
template <typename F>
std::pair<TensorF, TensorF> take_plane(const Volume& volume, const Volume& mask,
                                       std::size_t rows, std::size_t cols, F sample) {
  TensorF img({1, rows, cols});
  TensorF msk({1, rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t idx = sample(i, j);
      img[i * cols + j] = volume.voxels[idx];
      msk[i * cols + j] = mask.voxels[idx] > 0.0f ? 1.0f : 0.0f;
    }
  }
  return {std::move(img), std::move(msk)};
}

std::size_t count_positive(const TensorF& t) {
  std::size_t n = 0;
  for (const float v : t.vec()) n += v > 0.0f ? 1 : 0;
  return n;
}

}  // namespace

std::vector<SliceRecord> extract_slices(const Volume& volume, const Volume& mask,
                                        std::size_t interval) {
  if (volume.dims != mask.dims) {
    throw ShapeError("extract_slices: volume and mask dimensions differ");
  }
  if (volume.voxels.size() != volume.dims[0] * volume.dims[1] * volume.dims[2] ||
      mask.voxels.size() != volume.voxels.size()) {
    throw ShapeError("extract_slices: voxel count does not match dims");
  }
  if (interval == 0) throw Error("extract_slices: interval must be positive");
  const auto [nx, ny, nz] = volume.dims;
  std::vector<SliceRecord> out;
  auto emit = [&](View view, std::size_t index, std::pair<TensorF, TensorF> planes) {
    SliceRecord r;
    r.image = min_max_normalize(planes.first);
    r.mask = std::move(planes.second);
    r.mask_pixels = count_positive(r.mask);
    r.label = r.mask_pixels > 0 ? 1 : 0;
    r.subject_id = volume.source_id;
    r.view = view;
    r.slice_index = index;
    out.push_back(std::move(r));
  };
  for (std::size_t z = 0; z < nz; z += interval) {
    emit(View::kAxial, z, take_plane(volume, mask, nx, ny, [&](std::size_t i, std::size_t j) {
           return volume.index(i, j, z);
         }));
  }
  for (std::size_t y = 0; y < ny; y += interval) {
    emit(View::kCoronal, y, take_plane(volume, mask, nz, nx, [&](std::size_t i, std::size_t j) {
           return volume.index(j, y, nz - 1 - i);
         }));
  }
  for (std::size_t x = 0; x < nx; x += interval) {
    emit(View::kSagittal, x, take_plane(volume, mask, nz, ny, [&](std::size_t i, std::size_t j) {
           return volume.index(x, j, nz - 1 - i);
         }));
  }
  return out;
}

double nonblack_ratio(const TensorF& image) {
  if (image.empty()) return 0.0;
  std::size_t n = 0;
  for (const float v : image.vec()) n += v > kNonBlackLevel ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(image.size());
}

double mean_sobel_magnitude(const TensorF& image) {
  const std::size_t h = image.dim(image.ndim() - 2), w = image.dim(image.ndim() - 1);
  if (h < 3 || w < 3) return 0.0;
  const float* p = image.data().data();
  auto at = [&](std::size_t y, std::size_t x) { return static_cast<double>(p[y * w + x]); };
  double total = 0.0;
  for (std::size_t y = 1; y + 1 < h; ++y) {
    for (std::size_t x = 1; x + 1 < w; ++x) {
      const double gx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
      const double gy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
      total += std::sqrt(gx * gx + gy * gy);
    }
  }
  return total / static_cast<double>((h - 2) * (w - 2));
}

bool is_informative(const TensorF& image, const FilterThresholds& thresholds) {
  return nonblack_ratio(image) >= thresholds.min_nonblack_ratio &&
         mean_sobel_magnitude(image) >= thresholds.min_edge_score;
}

TensorF min_max_normalize(const TensorF& image) {
  if (image.empty()) return image;
  const auto [lo_it, hi_it] = std::minmax_element(image.vec().begin(), image.vec().end());
  const double lo = *lo_it, hi = *hi_it;
  TensorF out(image.shape());
  if (!(hi > lo)) return out;
  const double range = hi - lo;
  for (std::size_t i = 0; i < image.size(); ++i) {
    out[i] = static_cast<float>((image[i] - lo) / range);
  }
  return out;
}

TensorF center_fit(const TensorF& image, std::size_t target_side) {
  if (target_side == 0) throw Error("center_fit: target side must be positive");
  const std::size_t h = image.dim(image.ndim() - 2), w = image.dim(image.ndim() - 1);
  TensorF out({1, target_side, target_side});
  const std::size_t src_y = h > target_side ? (h - target_side) / 2 : 0;
  const std::size_t dst_y = h < target_side ? (target_side - h) / 2 : 0;
  const std::size_t src_x = w > target_side ? (w - target_side) / 2 : 0;
  const std::size_t dst_x = w < target_side ? (target_side - w) / 2 : 0;
  const std::size_t rows = std::min(h, target_side), cols = std::min(w, target_side);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      out[(dst_y + i) * target_side + dst_x + j] = image[(src_y + i) * w + src_x + j];
    }
  }
  return out;
}

TensorF normalize_and_crop(const TensorF& image, std::size_t target_side) {
  return center_fit(min_max_normalize(image), target_side);
}

SplitCounts split_counts(std::size_t n, const SplitRatios& ratios) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      ratios.train + ratios.val + ratios.test != 100) {
    throw Error("split ratios must be non-negative percentages summing to 100");
  }
  SplitCounts c;
  c.train = (static_cast<std::size_t>(ratios.train) * n + 50) / 100;
  c.val = (static_cast<std::size_t>(ratios.val) * n + 50) / 100;
  c.val = std::min(c.val, n - std::min(n, c.train));
  c.test = n - c.train - c.val;
  return c;
}

void canonical_sort(std::vector<SliceRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const SliceRecord& a, const SliceRecord& b) {
    return std::tie(a.subject_id, a.view, a.slice_index) <
           std::tie(b.subject_id, b.view, b.slice_index);
  });
}

DatasetSplit subject_split(std::vector<SliceRecord> records, std::uint64_t seed,
                           const SplitRatios& ratios) {
  std::set<std::string> unique;
  for (const auto& r : records) unique.insert(r.subject_id);
  if (unique.size() < 3) {
    throw Error("subject_split: need at least 3 distinct subjects, got " +
                std::to_string(unique.size()));
  }
  std::vector<std::string> subjects(unique.begin(), unique.end());
  Rng rng(derive_seed(seed, "datapipe/split"));
  shuffle(subjects.begin(), subjects.end(), rng);
  const SplitCounts counts = split_counts(subjects.size(), ratios);
  std::map<std::string, int> which;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    which[subjects[i]] = i < counts.train ? 0 : i < counts.train + counts.val ? 1 : 2;
  }
  DatasetSplit split;
  for (auto& r : records) {
    switch (which[r.subject_id]) {
      case 0: split.train.push_back(std::move(r)); break;
      case 1: split.val.push_back(std::move(r)); break;
      default: split.test.push_back(std::move(r)); break;
    }
  }
  canonical_sort(split.train);
  canonical_sort(split.val);
  canonical_sort(split.test);
  return split;
}

std::vector<SliceRecord> undersample(std::vector<SliceRecord> records, std::uint64_t seed) {
  std::vector<SliceRecord> pos, neg;
  for (auto& r : records) (r.label == 1 ? pos : neg).push_back(std::move(r));
  if (pos.empty() || neg.empty()) {
    throw Error("undersample: both classes must be present (positives " +
                std::to_string(pos.size()) + ", negatives " + std::to_string(neg.size()) + ")");
  }
  Rng rng(derive_seed(seed, "datapipe/undersample"));
  std::vector<SliceRecord>& minority = pos.size() <= neg.size() ? pos : neg;
  std::vector<SliceRecord>& majority = pos.size() <= neg.size() ? neg : pos;
  shuffle(majority.begin(), majority.end(), rng);
  majority.resize(minority.size());
  std::vector<SliceRecord> out = std::move(minority);
  for (auto& r : majority) out.push_back(std::move(r));
  shuffle(out.begin(), out.end(), rng);
  return out;
}

AugmentParams draw_augment_params(Rng& rng) {
  AugmentParams p;
  p.flip = rng.uniform() < 0.5;
  p.angle_deg = rng.uniform(-kMaxRotationDeg, kMaxRotationDeg);
  return p;
}

TensorF apply_augment(const TensorF& image, const AugmentParams& params) {
  const std::size_t h = image.dim(image.ndim() - 2), w = image.dim(image.ndim() - 1);
  TensorF flipped = image;
  if (params.flip) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) flipped[y * w + x] = image[y * w + (w - 1 - x)];
    }
  }
  if (params.angle_deg == 0.0) return flipped;

  const double theta = params.angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  auto px = [&](long y, long x) -> double {
    if (y < 0 || x < 0 || y >= static_cast<long>(h) || x >= static_cast<long>(w)) return 0.0;
    return flipped[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  };
  TensorF out(image.shape());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      // Inverse-map the output pixel into the source image.
      const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
      const double sy = c * dy + s * dx + cy;
      const double sx = -s * dy + c * dx + cx;
      const double fy = std::floor(sy), fx = std::floor(sx);
      const double ty = sy - fy, tx = sx - fx;
      const long y0 = static_cast<long>(fy), x0 = static_cast<long>(fx);
      const double v = (1 - ty) * ((1 - tx) * px(y0, x0) + tx * px(y0, x0 + 1)) +
                       ty * ((1 - tx) * px(y0 + 1, x0) + tx * px(y0 + 1, x0 + 1));
      out[y * w + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

TensorF augment(const TensorF& image, Rng& rng) {
  return apply_augment(image, draw_augment_params(rng));
}

namespace {

// Sum of a few random low-frequency cosine waves, roughly in [-1, 1].
class SmoothNoise {
 public:
  SmoothNoise(Rng& rng, std::size_t size, int terms = 4) {
    for (int k = 0; k < terms; ++k) {
      Wave w;
      for (auto& f : w.freq) f = static_cast<double>(rng.below(3));
      if (w.freq[0] + w.freq[1] + w.freq[2] == 0.0) w.freq[rng.below(3)] = 1.0;
      w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      w.amp = 1.0 / terms;
      waves_.push_back(w);
    }
    scale_ = 2.0 * std::numbers::pi / static_cast<double>(size);
  }

  double operator()(std::size_t x, std::size_t y, std::size_t z) const {
    double v = 0.0;
    for (const auto& w : waves_) {
      v += w.amp * std::cos(scale_ * (w.freq[0] * x + w.freq[1] * y + w.freq[2] * z) + w.phase);
    }
    return v;
  }

 private:
  struct Wave {
    double freq[3];
    double phase;
    double amp;
  };
  std::vector<Wave> waves_;
  double scale_ = 0.0;
};

struct Ellipsoid {
  double c[3];
  double r[3];
  bool contains(double x, double y, double z) const {
    const double a = (x - c[0]) / r[0], b = (y - c[1]) / r[1], d = (z - c[2]) / r[2];
    return a * a + b * b + d * d <= 1.0;
  }
};

}  // namespace

SynthVolume synth_volume(const SynthSpec& spec, Rng& rng) {
  const std::size_t n = spec.size;
  if (n < 32) throw Error("synth_volume: size must be at least 32 voxels per axis");
  const double half = static_cast<double>(n - 1) / 2.0;
  const double sz = static_cast<double>(n);

  Ellipsoid brain{};
  for (int a = 0; a < 3; ++a) {
    brain.c[a] = half + rng.uniform(-0.03, 0.03) * sz;
    brain.r[a] = rng.uniform(0.36, 0.42) * sz;
  }
  const SmoothNoise tissue(rng, n);
  const SmoothNoise background(rng, n);

  SynthVolume out{Volume({n, n, n}), Volume({n, n, n})};
  for (std::size_t z = 0; z < n; ++z) {
    for (std::size_t y = 0; y < n; ++y) {
      for (std::size_t x = 0; x < n; ++x) {
        const double b = 0.012 + 0.01 * background(x, y, z);
        const double v = brain.contains(x, y, z) ? 0.45 + 0.08 * tissue(x, y, z) : b;
        out.image.at(x, y, z) = static_cast<float>(v);
      }
    }
  }

  if (spec.tumour_present) {
    Ellipsoid blob{};
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      for (int a = 0; a < 3; ++a) {
        blob.r[a] = rng.uniform(0.07, 0.13) * sz;
        const double slack = brain.r[a] - blob.r[a];
        blob.c[a] = brain.c[a] + rng.uniform(-0.8, 0.8) * slack;
      }
      placed = true;
      for (std::size_t z = 0; z < n && placed; ++z)
        for (std::size_t y = 0; y < n && placed; ++y)
          for (std::size_t x = 0; x < n && placed; ++x)
            if (blob.contains(x, y, z) && !brain.contains(x, y, z)) placed = false;
    }
    if (!placed) throw Error("synth_volume: could not place tumour inside brain");
    const SmoothNoise texture(rng, n);
    for (std::size_t z = 0; z < n; ++z) {
      for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
          if (!blob.contains(x, y, z)) continue;
          out.image.at(x, y, z) = static_cast<float>(1.0 + 0.05 * texture(x, y, z));
          out.mask.at(x, y, z) = 1.0f;
        }
      }
    }
  }
  return out;
}

std::vector<VolumeEntry> synthesize_cohort(const std::filesystem::path& dir, const CohortSpec& spec) {
  if (spec.subjects < 3) throw Error("synth: need at least 3 subjects for a three-way split");
  if (!(spec.tumour_rate >= 0.0 && spec.tumour_rate <= 1.0)) {
    throw Error("synth: tumour rate must lie in [0, 1]");
  }
  const auto n_tumour = static_cast<std::size_t>(std::floor(spec.tumour_rate * static_cast<double>(spec.subjects) + 0.5));
  std::vector<char> tumour(spec.subjects, 0);
  std::fill(tumour.begin(), tumour.begin() + static_cast<long>(n_tumour), 1);
  Rng order(derive_seed(spec.seed, "synth/tumour"));
  shuffle(tumour.begin(), tumour.end(), order);

  std::filesystem::create_directories(dir);
  std::vector<VolumeEntry> entries, relative;
  for (std::size_t i = 0; i < spec.subjects; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "subj_%03zu", i);
    Rng rng(derive_seed(spec.seed, "synth/subject", i));
    const SynthVolume sv = synth_volume({spec.size, tumour[i] != 0}, rng);
    VolumeEntry e{id, dir / (std::string(id) + ".nii"), dir / (std::string(id) + "_mask.nii")};
    write_nifti(sv.image, e.image_path);
    write_nifti(sv.mask, e.mask_path);
    relative.push_back({id, e.image_path.filename(), e.mask_path.filename()});
    entries.push_back(std::move(e));
  }
  write_volume_manifest(dir / "volumes.json", relative);
  return entries;
}

std::vector<VolumeEntry> read_volume_manifest(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw Error("volume manifest " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw Error("volume manifest must be a JSON array");
  const auto base = path.parent_path();
  std::vector<VolumeEntry> entries;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("subject_id") || !item.contains("image_path") ||
        !item.contains("mask_path")) {
      throw Error("volume manifest entries need subject_id, image_path and mask_path");
    }
    VolumeEntry e;
    e.subject_id = item.at("subject_id").get<std::string>();
    e.image_path = item.at("image_path").get<std::string>();
    e.mask_path = item.at("mask_path").get<std::string>();
    if (e.image_path.is_relative()) e.image_path = base / e.image_path;
    if (e.mask_path.is_relative()) e.mask_path = base / e.mask_path;
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_volume_manifest(const std::filesystem::path& path, const std::vector<VolumeEntry>& entries) {
  json doc = json::array();
  for (const auto& e : entries) {
    doc.push_back({{"subject_id", e.subject_id},
                   {"image_path", e.image_path.generic_string()},
                   {"mask_path", e.mask_path.generic_string()}});
  }
  io::write_text(path, doc.dump(2) + "\n");
}

DatasetSplit preprocess(const std::vector<VolumeEntry>& volumes, const PreprocessConfig& config,
                        PreprocessStats* stats) {
  PreprocessStats local;
  std::vector<SliceRecord> kept;
  for (const auto& entry : volumes) {
    Volume image = read_nifti(entry.image_path);
    const Volume mask = read_nifti(entry.mask_path);
    image.source_id = entry.subject_id;
    auto slices = extract_slices(image, mask, config.interval);
    local.extracted += slices.size();
    for (auto& r : slices) {
      if (!is_informative(r.image, config.thresholds)) continue;
      r.image = normalize_and_crop(r.image, config.target_side);
      r.mask = center_fit(r.mask, config.target_side);
      r.mask_pixels = count_positive(r.mask);
      r.label = r.mask_pixels > 0 ? 1 : 0;
      kept.push_back(std::move(r));
    }
  }
  local.informative = kept.size();
  DatasetSplit split = subject_split(std::move(kept), config.seed, config.ratios);
  local.train_before_balance = split.train.size();
  split.train = undersample(std::move(split.train), derive_seed(config.seed, "preprocess/train"));
  if (config.balance_val_test) {
    split.val = undersample(std::move(split.val), derive_seed(config.seed, "preprocess/val"));
    split.test = undersample(std::move(split.test), derive_seed(config.seed, "preprocess/test"));
  }
  canonical_sort(split.train);
  canonical_sort(split.val);
  canonical_sort(split.test);
  if (stats) *stats = local;
  return split;
}

std::vector<std::uint8_t> encode_slice(const TensorF& image) {
  const std::size_t h = image.dim(image.ndim() - 2), w = image.dim(image.ndim() - 1);
  if (h != w) throw ShapeError("encode_slice: slice must be square");
  io::ByteWriter wr;
  wr.bytes("TSSL");
  wr.u32(static_cast<std::uint32_t>(h));
  for (const float v : image.vec()) wr.f32(v);
  return std::move(wr.buffer());
}

TensorF decode_slice(const std::vector<std::uint8_t>& bytes) {
  try {
    io::ByteReader r(bytes);
    if (r.str(4) != "TSSL") throw Error("slice file: bad magic");
    const std::size_t side = r.u32();
    if (side == 0) throw Error("slice file: zero side");
    if (r.remaining() != side * side * 4) {
      throw Error("slice file: expected " + std::to_string(side * side * 4) + " pixel bytes, found " +
                  std::to_string(r.remaining()));
    }
    TensorF img({1, side, side});
    for (auto& v : img.vec()) v = r.f32();
    require_finite(img, "slice file");
    return img;
  } catch (const io::TruncatedError&) {
    throw Error("slice file: truncated");
  }
}

std::string record_id(const SliceRecord& r) {
  char idx[16];
  std::snprintf(idx, sizeof idx, "%04zu", r.slice_index);
  return r.subject_id + "_" + to_string(r.view) + "_" + idx;
}

void write_dataset(const std::filesystem::path& dir, const DatasetSplit& split) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "slices");
  fs::create_directories(dir / "masks");
  json records = json::array();
  std::size_t side = 0;
  const std::pair<const char*, const std::vector<SliceRecord>*> parts[] = {
      {"train", &split.train}, {"val", &split.val}, {"test", &split.test}};
  json counts = json::object();
  for (const auto& [name, recs] : parts) {
    std::vector<const SliceRecord*> order;
    for (const auto& r : *recs) order.push_back(&r);
    std::stable_sort(order.begin(), order.end(), [](const SliceRecord* a, const SliceRecord* b) {
      return std::tie(a->subject_id, a->view, a->slice_index) <
             std::tie(b->subject_id, b->view, b->slice_index);
    });
    std::size_t pos = 0;
    for (const SliceRecord* r : order) {
      side = r->image.dim(1);
      const std::string stem = record_id(*r);
      const auto bytes = encode_slice(r->image);
      io::write_file(dir / "slices" / (stem + ".tssl"), bytes);
      json rec = {{"split", name},
                  {"subject_id", r->subject_id},
                  {"view", to_string(r->view)},
                  {"slice_index", r->slice_index},
                  {"label", r->label},
                  {"mask_pixels", r->mask_pixels},
                  {"file", "slices/" + stem + ".tssl"},
                  {"checksum", io::fnv1a_hex(bytes)}};
      if (!r->mask.empty()) {
        const auto mbytes = encode_slice(r->mask);
        io::write_file(dir / "masks" / (stem + ".tssl"), mbytes);
        rec["mask_file"] = "masks/" + stem + ".tssl";
        rec["mask_checksum"] = io::fnv1a_hex(mbytes);
      }
      records.push_back(std::move(rec));
      pos += r->label == 1 ? 1 : 0;
    }
    counts[name] = {{"total", recs->size()}, {"positive", pos}, {"negative", recs->size() - pos}};
  }
  const json manifest = {{"format", "tumorscope-slices"},
                         {"version", 1},
                         {"side", side},
                         {"counts", counts},
                         {"records", records}};
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

DatasetSplit read_dataset(const std::filesystem::path& dir) {
  const auto bytes = io::read_file(dir / "manifest.json");
  json manifest;
  try {
    manifest = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw Error("dataset manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "tumorscope-slices") {
    throw Error("dataset manifest: not a tumorscope slice dataset");
  }
  DatasetSplit split;
  for (const auto& rec : manifest.at("records")) {
    SliceRecord r;
    r.subject_id = rec.at("subject_id").get<std::string>();
    r.view = parse_view(rec.at("view").get<std::string>());
    r.slice_index = rec.at("slice_index").get<std::size_t>();
    r.label = rec.at("label").get<int>();
    r.mask_pixels = rec.at("mask_pixels").get<std::size_t>();
    const auto file = io::read_file(dir / rec.at("file").get<std::string>());
    if (io::fnv1a_hex(file) != rec.at("checksum").get<std::string>()) {
      throw Error("dataset: checksum mismatch for " + rec.at("file").get<std::string>());
    }
    r.image = decode_slice(file);
    if (rec.contains("mask_file")) {
      const auto mfile = io::read_file(dir / rec.at("mask_file").get<std::string>());
      if (io::fnv1a_hex(mfile) != rec.at("mask_checksum").get<std::string>()) {
        throw Error("dataset: checksum mismatch for " + rec.at("mask_file").get<std::string>());
      }
      r.mask = decode_slice(mfile);
    }
    const std::string s = rec.at("split").get<std::string>();
    if (s == "train") split.train.push_back(std::move(r));
    else if (s == "val") split.val.push_back(std::move(r));
    else if (s == "test") split.test.push_back(std::move(r));
    else throw Error("dataset manifest: unknown split '" + s + "'");
  }
  return split;
}

}  // namespace tumorscope
