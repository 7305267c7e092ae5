#pragma once

// Shared data model: acquisition metadata, RF frames, ROI and block geometry,
// and the QRF1 binary frame format.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace quskit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration or precondition violation (CLI exit code 2).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// File system failure (CLI exit code 3).
class IoError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public IoError {
 public:
  enum class Kind { bad_magic, unsupported_version, truncated, non_finite, bad_header };

  DecodeError(Kind kind, const std::string& what) : IoError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// A numerical stage could not produce a meaningful value.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Decomposition produced no IMF in the requested (diffuse or coherent) partition.
class EmptyComponentError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Fewer than two qualifying spectral peaks.
class NoPeriodicityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Regression slope implies a negative squared diameter.
class UnphysicalSlopeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct AcquisitionParams {
  double center_frequency_mhz = 10.0;
  double fractional_bandwidth = 0.65;
  double sampling_rate_mhz = 40.0;
  double sound_speed = 1540.0;  // m/s
  double pulse_length_mm = 0.4;
  double beam_width_mm = 2.2;
  double lateral_pitch_mm = 0.3;
  double aperture_ratio_q = 0.2;
  double gate_length_mm = 2.5;

  /// Throws InvalidArgument when any invariant is violated.
  void validate() const;

  /// Depth covered by one axial sample (round trip), in mm.
  double axial_spacing_mm() const { return sound_speed / (2.0 * sampling_rate_mhz * 1e6) * 1e3; }

  bool operator==(const AcquisitionParams&) const = default;
};

/// Rectangular grid of RF samples, axial-major: sample(i, j) is axial index i on line j.
class RFFrame {
 public:
  RFFrame() = default;
  RFFrame(std::size_t axial_count, std::size_t lateral_count, AcquisitionParams acq,
          double depth_offset_mm = 0.0);
  RFFrame(std::size_t axial_count, std::size_t lateral_count, std::vector<double> samples,
          AcquisitionParams acq, double depth_offset_mm = 0.0);

  std::size_t axial_count() const noexcept { return axial_; }
  std::size_t lateral_count() const noexcept { return lateral_; }
  bool empty() const noexcept { return samples_.empty(); }

  double& at(std::size_t i, std::size_t j) { return samples_[i * lateral_ + j]; }
  double at(std::size_t i, std::size_t j) const { return samples_[i * lateral_ + j]; }

  std::span<const double> samples() const noexcept { return samples_; }
  std::span<double> samples() noexcept { return samples_; }

  std::vector<double> line(std::size_t j) const;
  void set_line(std::size_t j, std::span<const double> values);

  const AcquisitionParams& acquisition() const noexcept { return acq_; }
  double depth_offset_mm() const noexcept { return depth_offset_mm_; }

  /// Depth of axial sample i in mm.
  double depth_mm(double i) const { return depth_offset_mm_ + i * acq_.axial_spacing_mm(); }

  /// Same geometry and metadata with a new sample buffer.
  RFFrame with_samples(std::vector<double> samples) const;

  bool operator==(const RFFrame&) const = default;

 private:
  std::size_t axial_ = 0;
  std::size_t lateral_ = 0;
  std::vector<double> samples_;
  AcquisitionParams acq_;
  double depth_offset_mm_ = 0.0;
};

enum class RoiTag { inside_lesion, outside_lesion, background, inclusion };

std::string_view to_string(RoiTag tag);
RoiTag roi_tag_from_string(std::string_view name);

/// ROI in mm, relative to the first sample / first line of the frame it is applied to.
struct RoiSpec {
  double axial_start_mm = 0.0;
  double axial_extent_mm = 0.0;
  double lateral_start_mm = 0.0;
  double lateral_extent_mm = 0.0;
  RoiTag tag = RoiTag::background;
};

/// Index window of an ROI inside a frame.
struct RoiWindow {
  std::size_t axial_begin = 0;
  std::size_t axial_count = 0;
  std::size_t lateral_begin = 0;
  std::size_t lateral_count = 0;
};

RoiWindow roi_window(const RFFrame& frame, const RoiSpec& roi);
RFFrame extract_roi(const RFFrame& frame, const RoiSpec& roi);

struct BlockSpec {
  std::size_t axial_len = 128;
  std::size_t lateral_len = 7;
  std::size_t axial_step = 64;
  std::size_t lateral_step = 3;
};

/// Roughly one beam width laterally, 128 axial samples, half-block steps.
BlockSpec default_block_spec(const AcquisitionParams& acq);

struct BlockIndex {
  std::size_t row = 0;  // axial block index
  std::size_t col = 0;  // lateral block index
  bool operator==(const BlockIndex&) const = default;
};

class BlockGrid {
 public:
  BlockGrid() = default;
  BlockGrid(BlockSpec spec, std::size_t rows, std::size_t cols)
      : spec_(spec), rows_(rows), cols_(cols) {}

  const BlockSpec& spec() const noexcept { return spec_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return rows_ * cols_; }

  std::size_t axial_begin(std::size_t row) const { return row * spec_.axial_step; }
  std::size_t lateral_begin(std::size_t col) const { return col * spec_.lateral_step; }

  /// Row-major enumeration.
  BlockIndex index(std::size_t flat) const { return {flat / cols_, flat % cols_}; }
  std::size_t flat(BlockIndex b) const { return b.row * cols_ + b.col; }

 private:
  BlockSpec spec_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

BlockGrid partition_blocks(const RFFrame& roi_frame, const BlockSpec& spec);

// QRF1 file format.
inline constexpr char kRfMagic[4] = {'Q', 'R', 'F', '1'};
inline constexpr std::uint16_t kRfFormatVersion = 1;

/// Encodes to the QRF1 byte layout. Samples are stored as f32.
std::vector<std::uint8_t> encode_rf_frame(const RFFrame& frame);
RFFrame decode_rf_frame(std::span<const std::uint8_t> bytes);

void save_rf_frame(const RFFrame& frame, const std::filesystem::path& path);
RFFrame load_rf_frame(const std::filesystem::path& path);

/// Whitespace/comma separated matrix, one axial sample per row, one column per line.
RFFrame import_rf_csv(const std::filesystem::path& path, const AcquisitionParams& acq,
                      double depth_offset_mm = 0.0);

/// Writes bytes to a temporary sibling then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace quskit
