#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tumorscope/nifti.hpp"
#include "tumorscope/rng.hpp"
#include "tumorscope/tensor.hpp"

// Volume-to-slice dataset preparation: orthogonal slice extraction with
// any-tumour-pixel labels, informativeness filtering, min-max normalization
// with central crop/pad, subject-level splitting, majority-class
// undersampling, train-time augmentation and a synthetic volume generator.
namespace tumorscope {

enum class View : std::uint8_t { kAxial = 0, kCoronal = 1, kSagittal = 2 };

std::string to_string(View v);
View parse_view(const std::string& s);

struct SliceRecord {
  TensorF image;  // [1, H, W], values in [0, 1]
  TensorF mask;   // [1, H, W], 1 on tumour pixels; may be empty when unknown
  int label = 0;
  std::string subject_id;
  View view = View::kAxial;
  std::size_t slice_index = 0;
  std::size_t mask_pixels = 0;
};

struct DatasetSplit {
  std::vector<SliceRecord> train;
  std::vector<SliceRecord> val;
  std::vector<SliceRecord> test;
};

struct FilterThresholds {
  double min_nonblack_ratio = 0.10;
  double min_edge_score = 0.01;
};

// Pixels above this intensity count as tissue ("non-black").
inline constexpr float kNonBlackLevel = 0.05f;

// Axial planes are z-slices (rows x, cols y). Coronal (y fixed) and sagittal
// (x fixed) planes are rotated 90 degrees counter-clockwise so the z axis
// runs bottom-to-top. Planes are taken at 0, interval, 2*interval, ... along
// each axis; each plane is min-max normalized, and the mask plane is carried
// along in the same geometry.
std::vector<SliceRecord> extract_slices(const Volume& volume, const Volume& mask,
                                        std::size_t interval = 5);

double nonblack_ratio(const TensorF& image);
// Mean Sobel gradient magnitude over interior pixels.
double mean_sobel_magnitude(const TensorF& image);
bool is_informative(const TensorF& image, const FilterThresholds& thresholds = {});

// Min-max to [0, 1] (constant images become zeros), then central crop or
// symmetric zero-pad to target_side x target_side. Odd remainders put the
// extra row/column at the bottom/right.
TensorF normalize_and_crop(const TensorF& image, std::size_t target_side);
TensorF min_max_normalize(const TensorF& image);
// Crop/pad only, no intensity change (used for mask planes).
TensorF center_fit(const TensorF& image, std::size_t target_side);

struct SplitRatios {
  int train = 70;
  int val = 15;
  int test = 15;
};

struct SplitCounts {
  std::size_t train = 0, val = 0, test = 0;
};

// n_train = round_half_up(train% * N), n_val = round_half_up(val% * N),
// n_test = remainder. Integer arithmetic, so no floating-point rounding.
SplitCounts split_counts(std::size_t n_subjects, const SplitRatios& ratios = {});

DatasetSplit subject_split(std::vector<SliceRecord> records, std::uint64_t seed,
                           const SplitRatios& ratios = {});

std::vector<SliceRecord> undersample(std::vector<SliceRecord> records, std::uint64_t seed);

struct AugmentParams {
  bool flip = false;
  double angle_deg = 0.0;
};

inline constexpr double kMaxRotationDeg = 10.0;

// One flip draw then one angle draw, in that order.
AugmentParams draw_augment_params(Rng& rng);
// Horizontal flip, then rotation about the centre with bilinear sampling and
// zero fill; output clamped to [0, 1].
TensorF apply_augment(const TensorF& image, const AugmentParams& params);
TensorF augment(const TensorF& image, Rng& rng);

struct SynthSpec {
  std::size_t size = 64;  // voxels per axis
  bool tumour_present = true;
};

struct SynthVolume {
  Volume image;
  Volume mask;
};

// Smooth low-frequency background, a bright ellipsoidal brain, and (when
// requested) a high-intensity ellipsoid blob strictly inside the brain that
// is also written to the mask.
SynthVolume synth_volume(const SynthSpec& spec, Rng& rng);

// Sorts by (subject_id, view, slice_index).
void canonical_sort(std::vector<SliceRecord>& records);

struct VolumeEntry {
  std::string subject_id;
  std::filesystem::path image_path;
  std::filesystem::path mask_path;
};

// Input manifest: JSON array of {subject_id, image_path, mask_path}; relative
// paths are resolved against the manifest's directory.
std::vector<VolumeEntry> read_volume_manifest(const std::filesystem::path& path);
void write_volume_manifest(const std::filesystem::path& path, const std::vector<VolumeEntry>& entries);

struct CohortSpec {
  std::size_t subjects = 20;  // >= 3
  double tumour_rate = 0.5;   // round-half-up(rate * subjects) volumes carry a tumour
  std::size_t size = 64;
  std::uint64_t seed = 0;
};

// Writes subj_NNN.nii / subj_NNN_mask.nii (float32) plus volumes.json into
// dir. Which subjects carry a tumour is a seeded shuffle; each volume draws
// from derive_seed(seed, "synth/subject", i).
std::vector<VolumeEntry> synthesize_cohort(const std::filesystem::path& dir, const CohortSpec& spec);

struct PreprocessConfig {
  std::size_t interval = 5;
  std::size_t target_side = 240;
  FilterThresholds thresholds;
  SplitRatios ratios;
  std::uint64_t seed = 0;
  bool balance_val_test = false;
};

struct PreprocessStats {
  std::size_t extracted = 0;
  std::size_t informative = 0;
  std::size_t train_before_balance = 0;
};

// extract -> filter -> normalize/crop -> split -> undersample (train only
// unless balance_val_test).
DatasetSplit preprocess(const std::vector<VolumeEntry>& volumes, const PreprocessConfig& config,
                        PreprocessStats* stats = nullptr);

// Slice file: "TSSL", u32 side, side*side f32 pixels, little-endian.
std::vector<std::uint8_t> encode_slice(const TensorF& image);
TensorF decode_slice(const std::vector<std::uint8_t>& bytes);

// "<subject>_<view>_<slice index, 4 digits>"; also the slice file stem.
std::string record_id(const SliceRecord& record);

// Dataset directory: manifest.json plus slices/ and masks/ holding one slice
// file per record. Records within each split are written in canonical order.
void write_dataset(const std::filesystem::path& dir, const DatasetSplit& split);
DatasetSplit read_dataset(const std::filesystem::path& dir);

}  // namespace tumorscope
