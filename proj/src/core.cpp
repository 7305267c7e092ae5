#include "quskit/core.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace quskit {

namespace {

// Indices are computed from mm with a small tolerance so that exact multiples of
// the sample spacing do not fall one sample short.
constexpr double kIndexEps = 1e-9;

std::size_t floor_index(double value) {
  return static_cast<std::size_t>(std::floor(value + kIndexEps));
}

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::endian::native == std::endian::little, "little-endian host required");
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size())
      throw DecodeError(DecodeError::Kind::truncated, "QRF1: truncated header");
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::uint8_t* cursor() const { return bytes_.data() + pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void AcquisitionParams::validate() const {
  auto require_positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw InvalidArgument(std::string("acquisition: ") + name + " must be positive and finite");
  };
  require_positive(center_frequency_mhz, "center_frequency");
  require_positive(fractional_bandwidth, "fractional_bandwidth");
  require_positive(sampling_rate_mhz, "sampling_rate");
  require_positive(sound_speed, "sound_speed");
  require_positive(pulse_length_mm, "pulse_length");
  require_positive(beam_width_mm, "beam_width");
  require_positive(lateral_pitch_mm, "lateral_pitch");
  require_positive(aperture_ratio_q, "aperture_ratio_q");
  require_positive(gate_length_mm, "gate_length_L");
  if (fractional_bandwidth > 1.0)
    throw InvalidArgument("acquisition: fractional_bandwidth must be in (0, 1]");
  const double f_max = center_frequency_mhz * (1.0 + fractional_bandwidth / 2.0);
  if (!(sampling_rate_mhz > 2.0 * f_max))
    throw InvalidArgument("acquisition: sampling_rate must exceed twice the upper band edge");
}

RFFrame::RFFrame(std::size_t axial_count, std::size_t lateral_count, AcquisitionParams acq,
                 double depth_offset_mm)
    : RFFrame(axial_count, lateral_count, std::vector<double>(axial_count * lateral_count, 0.0),
              acq, depth_offset_mm) {}

RFFrame::RFFrame(std::size_t axial_count, std::size_t lateral_count, std::vector<double> samples,
                 AcquisitionParams acq, double depth_offset_mm)
    : axial_(axial_count),
      lateral_(lateral_count),
      samples_(std::move(samples)),
      acq_(acq),
      depth_offset_mm_(depth_offset_mm) {
  if (samples_.size() != axial_ * lateral_)
    throw InvalidArgument("RFFrame: sample count does not match axial x lateral");
  if (!all_finite(samples_)) throw InvalidArgument("RFFrame: non-finite sample");
  if (!std::isfinite(depth_offset_mm_)) throw InvalidArgument("RFFrame: non-finite depth offset");
}

std::vector<double> RFFrame::line(std::size_t j) const {
  if (j >= lateral_) throw InvalidArgument("RFFrame: line index out of range");
  std::vector<double> out(axial_);
  for (std::size_t i = 0; i < axial_; ++i) out[i] = samples_[i * lateral_ + j];
  return out;
}

void RFFrame::set_line(std::size_t j, std::span<const double> values) {
  if (j >= lateral_ || values.size() != axial_)
    throw InvalidArgument("RFFrame: set_line shape mismatch");
  for (std::size_t i = 0; i < axial_; ++i) samples_[i * lateral_ + j] = values[i];
}

RFFrame RFFrame::with_samples(std::vector<double> samples) const {
  return RFFrame(axial_, lateral_, std::move(samples), acq_, depth_offset_mm_);
}

std::string_view to_string(RoiTag tag) {
  switch (tag) {
    case RoiTag::inside_lesion: return "inside_lesion";
    case RoiTag::outside_lesion: return "outside_lesion";
    case RoiTag::background: return "background";
    case RoiTag::inclusion: return "inclusion";
  }
  return "background";
}

RoiTag roi_tag_from_string(std::string_view name) {
  if (name == "inside_lesion") return RoiTag::inside_lesion;
  if (name == "outside_lesion") return RoiTag::outside_lesion;
  if (name == "background") return RoiTag::background;
  if (name == "inclusion") return RoiTag::inclusion;
  throw InvalidArgument("unknown ROI tag: " + std::string(name));
}

RoiWindow roi_window(const RFFrame& frame, const RoiSpec& roi) {
  if (!(roi.axial_extent_mm > 0.0) || !(roi.lateral_extent_mm > 0.0))
    throw InvalidArgument("ROI: extents must be positive");
  if (roi.axial_start_mm < 0.0 || roi.lateral_start_mm < 0.0)
    throw InvalidArgument("ROI: start must be non-negative");
  const auto& acq = frame.acquisition();
  const double dz = acq.axial_spacing_mm();
  const double dx = acq.lateral_pitch_mm;

  RoiWindow w;
  w.axial_begin = floor_index(roi.axial_start_mm / dz);
  w.axial_count = floor_index(roi.axial_extent_mm / dz);
  w.lateral_begin = floor_index(roi.lateral_start_mm / dx);
  w.lateral_count = floor_index(roi.lateral_extent_mm / dx);
  if (w.lateral_count == 0) w.lateral_count = 1;

  if (w.axial_count == 0) throw InvalidArgument("ROI: axial extent shorter than one sample");
  if (w.lateral_begin >= frame.lateral_count())
    throw InvalidArgument("ROI: lateral start beyond last line");
  if (w.axial_begin >= frame.axial_count())
    throw InvalidArgument("ROI: axial start beyond last sample");
  if (w.axial_begin + w.axial_count > frame.axial_count() ||
      w.lateral_begin + w.lateral_count > frame.lateral_count())
    throw InvalidArgument("ROI: region extends outside the frame");
  return w;
}

RFFrame extract_roi(const RFFrame& frame, const RoiSpec& roi) {
  const RoiWindow w = roi_window(frame, roi);
  std::vector<double> out(w.axial_count * w.lateral_count);
  for (std::size_t i = 0; i < w.axial_count; ++i)
    for (std::size_t j = 0; j < w.lateral_count; ++j)
      out[i * w.lateral_count + j] = frame.at(w.axial_begin + i, w.lateral_begin + j);
  return RFFrame(w.axial_count, w.lateral_count, std::move(out), frame.acquisition(),
                 frame.depth_mm(static_cast<double>(w.axial_begin)));
}

BlockSpec default_block_spec(const AcquisitionParams& acq) {
  BlockSpec spec;
  spec.axial_len = 128;
  spec.axial_step = 64;
  spec.lateral_len =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(acq.beam_width_mm / acq.lateral_pitch_mm)));
  spec.lateral_step = std::max<std::size_t>(1, spec.lateral_len / 2);
  return spec;
}

BlockGrid partition_blocks(const RFFrame& roi_frame, const BlockSpec& spec) {
  if (spec.axial_len == 0 || spec.lateral_len == 0)
    throw InvalidArgument("blocks: block length must be positive");
  if (spec.axial_step == 0 || spec.lateral_step == 0)
    throw InvalidArgument("blocks: step must be positive");
  if (spec.axial_step > spec.axial_len || spec.lateral_step > spec.lateral_len)
    throw InvalidArgument("blocks: step must not exceed block length");
  if (spec.axial_len > roi_frame.axial_count() || spec.lateral_len > roi_frame.lateral_count())
    throw InvalidArgument("blocks: block larger than ROI");
  const std::size_t rows = (roi_frame.axial_count() - spec.axial_len) / spec.axial_step + 1;
  const std::size_t cols = (roi_frame.lateral_count() - spec.lateral_len) / spec.lateral_step + 1;
  return BlockGrid(spec, rows, cols);
}

std::vector<std::uint8_t> encode_rf_frame(const RFFrame& frame) {
  const auto& acq = frame.acquisition();
  if (frame.axial_count() > UINT32_MAX || frame.lateral_count() > UINT32_MAX)
    throw InvalidArgument("QRF1: frame too large");
  ByteWriter w;
  w.put_raw(kRfMagic, 4);
  w.put<std::uint16_t>(kRfFormatVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(frame.axial_count()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(frame.lateral_count()));
  w.put<double>(acq.sampling_rate_mhz);
  w.put<double>(acq.center_frequency_mhz);
  w.put<double>(acq.fractional_bandwidth);
  w.put<double>(acq.sound_speed);
  w.put<double>(acq.lateral_pitch_mm);
  w.put<double>(frame.depth_offset_mm());
  w.put<double>(acq.pulse_length_mm);
  w.put<double>(acq.beam_width_mm);
  w.put<double>(acq.aperture_ratio_q);
  w.put<double>(acq.gate_length_mm);
  for (double x : frame.samples()) {
    const auto f = static_cast<float>(x);
    if (!std::isfinite(f)) throw InvalidArgument("QRF1: sample not representable as finite f32");
    w.put<float>(f);
  }
  return w.take();
}

RFFrame decode_rf_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kRfMagic, 4) != 0)
    throw DecodeError(DecodeError::Kind::bad_magic, "QRF1: bad magic");
  ByteReader r(bytes.subspan(4));
  const auto version = r.get<std::uint16_t>();
  if (version != kRfFormatVersion)
    throw DecodeError(DecodeError::Kind::unsupported_version,
                      "QRF1: unsupported format version " + std::to_string(version));
  const std::size_t axial = r.get<std::uint32_t>();
  const std::size_t lateral = r.get<std::uint32_t>();
  AcquisitionParams acq;
  acq.sampling_rate_mhz = r.get<double>();
  acq.center_frequency_mhz = r.get<double>();
  acq.fractional_bandwidth = r.get<double>();
  acq.sound_speed = r.get<double>();
  acq.lateral_pitch_mm = r.get<double>();
  const double depth_offset = r.get<double>();
  acq.pulse_length_mm = r.get<double>();
  acq.beam_width_mm = r.get<double>();
  acq.aperture_ratio_q = r.get<double>();
  acq.gate_length_mm = r.get<double>();

  const std::size_t count = axial * lateral;
  if (r.remaining() < count * sizeof(float))
    throw DecodeError(DecodeError::Kind::truncated,
                      "QRF1: payload shorter than declared " + std::to_string(axial) + "x" +
                          std::to_string(lateral));
  std::vector<double> samples(count);
  const std::uint8_t* p = r.cursor();
  for (std::size_t k = 0; k < count; ++k) {
    float f;
    std::memcpy(&f, p + k * sizeof(float), sizeof(float));
    if (!std::isfinite(f))
      throw DecodeError(DecodeError::Kind::non_finite,
                        "QRF1: non-finite sample at index " + std::to_string(k));
    samples[k] = f;
  }
  if (!std::isfinite(depth_offset))
    throw DecodeError(DecodeError::Kind::bad_header, "QRF1: non-finite depth offset");
  return RFFrame(axial, lateral, std::move(samples), acq, depth_offset);
}

void save_rf_frame(const RFFrame& frame, const std::filesystem::path& path) {
  const auto bytes = encode_rf_frame(frame);
  write_file_atomic(path, bytes);
}

RFFrame load_rf_frame(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_rf_frame(bytes);
}

RFFrame import_rf_csv(const std::filesystem::path& path, const AcquisitionParams& acq,
                      double depth_offset_mm) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<double> samples;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string row;
  while (std::getline(in, row)) {
    for (char& ch : row)
      if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
    std::istringstream fields(row);
    std::size_t n = 0;
    double v;
    while (fields >> v) {
      samples.push_back(v);
      ++n;
    }
    if (!fields.eof()) throw InvalidArgument("CSV: unparsable value on row " + std::to_string(rows + 1));
    if (n == 0) continue;
    if (cols == 0) cols = n;
    if (n != cols) throw InvalidArgument("CSV: ragged row " + std::to_string(rows + 1));
    ++rows;
  }
  if (rows == 0) throw InvalidArgument("CSV: no samples");
  return RFFrame(rows, cols, std::move(samples), acq, depth_offset_mm);
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace quskit
