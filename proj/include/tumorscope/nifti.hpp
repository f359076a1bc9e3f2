#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tumorscope/tensor.hpp"

namespace tumorscope {

// A 3D scalar volume. Voxels are stored in NIfTI order: x varies fastest,
// then y, then z (i.e. row-major over (z, y, x)).
struct Volume {
  std::array<std::size_t, 3> dims{0, 0, 0};  // (X, Y, Z)
  std::vector<float> voxels;
  std::string source_id;

  Volume() = default;
  Volume(std::array<std::size_t, 3> d, float fill = 0.0f, std::string id = {})
      : dims(d), voxels(d[0] * d[1] * d[2], fill), source_id(std::move(id)) {}

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + dims[0] * (y + dims[1] * z);
  }
  float& at(std::size_t x, std::size_t y, std::size_t z) { return voxels[index(x, y, z)]; }
  float at(std::size_t x, std::size_t y, std::size_t z) const { return voxels[index(x, y, z)]; }
  std::size_t size() const { return voxels.size(); }
};

enum class NiftiErrorKind {
  kIo,
  kGzip,
  kBadMagic,
  kBadHeader,
  kUnsupportedDatatype,
  kTruncated,
  kNonFinite,
};

class NiftiError : public Error {
 public:
  NiftiError(NiftiErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  NiftiErrorKind kind() const { return kind_; }

 private:
  NiftiErrorKind kind_;
};

// NIfTI-1 datatype codes supported by the reader.
enum class NiftiDatatype : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kFloat32 = 16,
  kFloat64 = 64,
};

struct NiftiWriteOptions {
  NiftiDatatype datatype = NiftiDatatype::kFloat32;
  bool big_endian = false;
  float scl_slope = 0.0f;  // 0 means "no scaling" per NIfTI-1
  float scl_inter = 0.0f;
};

// Single-file uncompressed NIfTI-1 (.nii, magic "n+1"). Byte order is
// detected from sizeof_hdr. scl_slope/scl_inter are applied when the slope is
// nonzero; orientation (qform/sform) is ignored and axes are kept in stored
// order.
Volume parse_nifti(const std::vector<std::uint8_t>& bytes, std::string source_id = {});
Volume read_nifti(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_nifti(const Volume& volume, const NiftiWriteOptions& options = {});
void write_nifti(const Volume& volume, const std::filesystem::path& path,
                 const NiftiWriteOptions& options = {});

}  // namespace tumorscope
