#include <gtest/gtest.h>

#include <filesystem>

#include "tumorscope/binary_io.hpp"
#include "tumorscope/nifti.hpp"

namespace tumorscope {
namespace {

Volume ramp_volume(std::array<std::size_t, 3> dims) {
  Volume v(dims);
  for (std::size_t i = 0; i < v.size(); ++i) v.voxels[i] = 0.25f * static_cast<float>(i) - 3.0f;
  return v;
}

NiftiErrorKind parse_error_kind(const std::vector<std::uint8_t>& bytes) {
  try {
    parse_nifti(bytes);
  } catch (const NiftiError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected NiftiError";
  return NiftiErrorKind::kIo;
}

TEST(Nifti, Float32RoundTripIsBitwise) {
  const Volume v = ramp_volume({4, 4, 3});
  const Volume back = parse_nifti(encode_nifti(v));
  EXPECT_EQ(back.dims, v.dims);
  EXPECT_EQ(back.voxels, v.voxels);
}

TEST(Nifti, FileRoundTripUsesStemAsId) {
  const auto path = std::filesystem::temp_directory_path() / "tumorscope_nifti_rt.nii";
  const Volume v = ramp_volume({4, 4, 3});
  write_nifti(v, path);
  const Volume back = read_nifti(path);
  EXPECT_EQ(back.voxels, v.voxels);
  EXPECT_EQ(back.source_id, "tumorscope_nifti_rt");
  std::filesystem::remove(path);
}

TEST(Nifti, DimsComeFromHeader) {
  const Volume v({240, 240, 7}, 1.0f);
  const Volume back = parse_nifti(encode_nifti(v));
  EXPECT_EQ(back.dims, (std::array<std::size_t, 3>{240, 240, 7}));
}

TEST(Nifti, VoxelOrderIsXFastest) {
  Volume v({2, 3, 4});
  v.at(1, 2, 3) = 7.0f;
  const auto bytes = encode_nifti(v);
  io::ByteReader r(bytes);
  r.seek(352 + 4 * (1 + 2 * (2 + 3 * 3)));
  EXPECT_EQ(r.f32(), 7.0f);
}

TEST(Nifti, ByteSwappedHeaderParses) {
  const Volume v = ramp_volume({4, 4, 3});
  NiftiWriteOptions opt;
  opt.big_endian = true;
  const auto bytes = encode_nifti(v, opt);
  io::ByteReader le(bytes);
  EXPECT_EQ(le.u32(), 1543569408u);
  EXPECT_EQ(parse_nifti(bytes).voxels, v.voxels);
}

TEST(Nifti, IntegerDatatypesWithScaling) {
  Volume v({3, 2, 2});
  for (std::size_t i = 0; i < v.size(); ++i) v.voxels[i] = static_cast<float>(i * 20);
  NiftiWriteOptions opt;
  opt.datatype = NiftiDatatype::kInt16;
  opt.scl_slope = 0.5f;
  opt.scl_inter = 1.0f;
  const Volume back = parse_nifti(encode_nifti(v, opt));
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(back.voxels[i], v.voxels[i] * 0.5f + 1.0f);

  opt = {};
  opt.datatype = NiftiDatatype::kUint8;
  EXPECT_EQ(parse_nifti(encode_nifti(v, opt)).voxels, v.voxels);
  opt.datatype = NiftiDatatype::kFloat64;
  EXPECT_EQ(parse_nifti(encode_nifti(v, opt)).voxels, v.voxels);
}

TEST(Nifti, GzipInputIsRejectedClearly) {
  std::vector<std::uint8_t> bytes(400, 0);
  bytes[0] = 0x1f;
  bytes[1] = 0x8b;
  EXPECT_EQ(parse_error_kind(bytes), NiftiErrorKind::kGzip);
  try {
    parse_nifti(bytes);
  } catch (const NiftiError& e) {
    EXPECT_NE(std::string(e.what()).find("gzip"), std::string::npos);
  }
}

TEST(Nifti, BadMagic) {
  auto bytes = encode_nifti(ramp_volume({4, 4, 3}));
  bytes[345] = 'i';
  EXPECT_EQ(parse_error_kind(bytes), NiftiErrorKind::kBadMagic);
}

TEST(Nifti, UnsupportedDatatype) {
  auto bytes = encode_nifti(ramp_volume({4, 4, 3}));
  bytes[70] = 8;  // int32
  bytes[71] = 0;
  EXPECT_EQ(parse_error_kind(bytes), NiftiErrorKind::kUnsupportedDatatype);
}

TEST(Nifti, TruncatedDataSection) {
  auto bytes = encode_nifti(ramp_volume({4, 4, 3}));
  bytes.resize(bytes.size() - 1);
  EXPECT_EQ(parse_error_kind(bytes), NiftiErrorKind::kTruncated);
  bytes.resize(100);
  EXPECT_EQ(parse_error_kind(bytes), NiftiErrorKind::kTruncated);
}

TEST(Nifti, NonFiniteVoxel) {
  Volume v = ramp_volume({4, 4, 3});
  v.voxels[5] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_EQ(parse_error_kind(encode_nifti(v)), NiftiErrorKind::kNonFinite);
}

TEST(Nifti, MissingFileIsIoError) {
  try {
    read_nifti("/nonexistent/volume.nii");
    FAIL();
  } catch (const NiftiError& e) {
    EXPECT_EQ(e.kind(), NiftiErrorKind::kIo);
  }
}

}  // namespace
}  // namespace tumorscope
