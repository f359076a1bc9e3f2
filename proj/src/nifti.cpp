#include "tumorscope/nifti.hpp"

#include <algorithm>
#include <cmath>

#include "tumorscope/binary_io.hpp"

namespace tumorscope {
namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDimOffset = 40;
constexpr std::size_t kDatatypeOffset = 70;
constexpr std::size_t kPixdimOffset = 76;
constexpr std::size_t kVoxOffsetOffset = 108;
constexpr std::size_t kMagicOffset = 344;

std::size_t bytes_per_voxel(std::int16_t datatype) {
  switch (static_cast<NiftiDatatype>(datatype)) {
    case NiftiDatatype::kUint8: return 1;
    case NiftiDatatype::kInt16: return 2;
    case NiftiDatatype::kFloat32: return 4;
    case NiftiDatatype::kFloat64: return 8;
  }
  return 0;
}

}  // namespace

Volume parse_nifti(const std::vector<std::uint8_t>& bytes, std::string source_id) {
  using K = NiftiErrorKind;
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) {
    throw NiftiError(K::kGzip,
                     "nifti: gzip-compressed input (.nii.gz) is not supported; "
                     "decompress to .nii first");
  }
  if (bytes.size() < kHeaderSize) {
    throw NiftiError(K::kTruncated, "nifti: file shorter than the 348-byte header");
  }
  io::ByteReader r(bytes);
  if (r.i32() != static_cast<std::int32_t>(kHeaderSize)) {
    r.set_big_endian(true);
    r.seek(0);
    if (r.i32() != static_cast<std::int32_t>(kHeaderSize)) {
      throw NiftiError(K::kBadHeader, "nifti: sizeof_hdr is not 348 in either byte order");
    }
  }
  r.seek(kMagicOffset);
  const std::string magic = r.str(4);
  if (magic != std::string("n+1\0", 4)) {
    throw NiftiError(K::kBadMagic, "nifti: bad magic (expected single-file \"n+1\")");
  }

  r.seek(kDimOffset);
  std::array<std::int16_t, 8> dim{};
  for (auto& d : dim) d = r.i16();
  if (dim[0] < 3 || dim[0] > 7) {
    throw NiftiError(K::kBadHeader, "nifti: expected a 3D volume, dim[0] = " + std::to_string(dim[0]));
  }
  for (int i = 4; i <= dim[0]; ++i) {
    if (dim[i] > 1) {
      throw NiftiError(K::kBadHeader, "nifti: only single 3D volumes are supported (dim[" +
                                          std::to_string(i) + "] = " + std::to_string(dim[i]) + ")");
    }
  }
  for (int i = 1; i <= 3; ++i) {
    if (dim[i] < 1) throw NiftiError(K::kBadHeader, "nifti: non-positive dimension");
  }

  r.seek(kDatatypeOffset);
  const std::int16_t datatype = r.i16();
  const std::size_t bpv = bytes_per_voxel(datatype);
  if (bpv == 0) {
    throw NiftiError(K::kUnsupportedDatatype,
                     "nifti: unsupported datatype " + std::to_string(datatype) +
                         " (supported: uint8, int16, float32, float64)");
  }

  r.seek(kVoxOffsetOffset);
  const float vox_offset_f = r.f32();
  const float slope = r.f32();
  const float inter = r.f32();
  if (!(vox_offset_f >= 0.0f) || !std::isfinite(vox_offset_f)) {
    throw NiftiError(K::kBadHeader, "nifti: invalid vox_offset");
  }
  const auto vox_offset = static_cast<std::size_t>(vox_offset_f);

  Volume vol({static_cast<std::size_t>(dim[1]), static_cast<std::size_t>(dim[2]),
              static_cast<std::size_t>(dim[3])},
             0.0f, std::move(source_id));
  const std::size_t n = vol.size();
  if (vox_offset > bytes.size() || (bytes.size() - vox_offset) / bpv < n) {
    throw NiftiError(K::kTruncated, "nifti: truncated data section (need " +
                                        std::to_string(n * bpv) + " bytes after offset " +
                                        std::to_string(vox_offset) + ")");
  }
  r.seek(vox_offset);
  const bool scale = slope != 0.0f && std::isfinite(slope) && std::isfinite(inter);
  for (std::size_t i = 0; i < n; ++i) {
    double v = 0.0;
    switch (static_cast<NiftiDatatype>(datatype)) {
      case NiftiDatatype::kUint8: v = r.u8(); break;
      case NiftiDatatype::kInt16: v = r.i16(); break;
      case NiftiDatatype::kFloat32: v = r.f32(); break;
      case NiftiDatatype::kFloat64: v = r.f64(); break;
    }
    if (scale) v = v * slope + inter;
    if (!std::isfinite(v)) throw NiftiError(K::kNonFinite, "nifti: non-finite voxel value");
    vol.voxels[i] = static_cast<float>(v);
  }
  return vol;
}

Volume read_nifti(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = io::read_file(path);
  } catch (const Error& e) {
    throw NiftiError(NiftiErrorKind::kIo, e.what());
  }
  return parse_nifti(bytes, path.stem().string());
}

std::vector<std::uint8_t> encode_nifti(const Volume& volume, const NiftiWriteOptions& options) {
  for (const auto d : volume.dims) {
    if (d == 0 || d > 32767) throw Error("nifti: dimension out of range for NIfTI-1");
  }
  const auto datatype = static_cast<std::int16_t>(options.datatype);
  const std::size_t bpv = bytes_per_voxel(datatype);
  io::ByteWriter w(options.big_endian);
  w.i32(static_cast<std::int32_t>(kHeaderSize));
  w.zeros(kDimOffset - w.size());
  w.i16(3);
  for (const auto d : volume.dims) w.i16(static_cast<std::int16_t>(d));
  for (int i = 4; i < 8; ++i) w.i16(1);
  w.zeros(kDatatypeOffset - w.size());
  w.i16(datatype);
  w.i16(static_cast<std::int16_t>(bpv * 8));
  w.zeros(kPixdimOffset - w.size());
  w.f32(1.0f);  // pixdim[0]: qfac
  for (int i = 1; i < 8; ++i) w.f32(i <= 3 ? 1.0f : 0.0f);
  w.f32(352.0f);  // vox_offset
  w.f32(options.scl_slope);
  w.f32(options.scl_inter);
  w.zeros(kMagicOffset - w.size());
  w.bytes(std::string_view("n+1\0", 4));
  w.zeros(4);  // no extensions
  for (const float v : volume.voxels) {
    switch (options.datatype) {
      case NiftiDatatype::kUint8: w.u8(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 255.0f)))); break;
      case NiftiDatatype::kInt16: w.i16(static_cast<std::int16_t>(std::lround(std::clamp(v, -32768.0f, 32767.0f)))); break;
      case NiftiDatatype::kFloat32: w.f32(v); break;
      case NiftiDatatype::kFloat64: w.f64(v); break;
    }
  }
  return std::move(w.buffer());
}

void write_nifti(const Volume& volume, const std::filesystem::path& path,
                 const NiftiWriteOptions& options) {
  io::write_file(path, encode_nifti(volume, options));
}

}  // namespace tumorscope
