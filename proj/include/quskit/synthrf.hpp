#pragma once

// Forward simulator: scatterer fields with known size, concentration and spacing,
// rendered into RF frames through a Gaussian pulse, a Gaussian form factor,
// lateral beam weighting and frequency-dependent attenuation.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "quskit/core.hpp"

namespace quskit {

enum class RegionShape { rectangle, circle };

/// Coordinates are absolute: axial in mm of depth, lateral in mm from line 0.
struct PhantomRegion {
  RegionShape shape = RegionShape::rectangle;
  double axial_min_mm = 0.0;
  double axial_max_mm = 0.0;
  double lateral_min_mm = 0.0;
  double lateral_max_mm = 0.0;
  double center_axial_mm = 0.0;
  double center_lateral_mm = 0.0;
  double radius_mm = 0.0;

  double esd_um = 45.0;
  double concentration = 1.0;     // n_z, relative units
  double diffuse_density = 12.0;  // scatterers per resolution cell
  std::optional<double> coherent_spacing_mm;
  double coherent_jitter = 0.05;  // standard deviation as a fraction of the spacing
  double coherent_amplitude_ratio = 2.0;
  bool cyst = false;  // permits a near-zero diffuse density

  bool contains(double axial_mm, double lateral_mm) const;
};

struct PhantomSpec {
  std::vector<PhantomRegion> regions;  // later regions take precedence where they overlap
  double attenuation_beta = 0.0;       // Np/cm/MHz
  double axial_extent_mm = 40.0;
  double lateral_extent_mm = 38.4;
  double depth_offset_mm = 0.0;
  double diffraction_ripple_db = 1.0;  // below 2 MHz
  double noise_snr_db = 60.0;          // electronic noise vs frame RMS; +inf disables

  void validate() const;
};

enum class ScattererKind { diffuse, coherent };

struct Scatterer {
  double axial_mm = 0.0;
  double lateral_mm = 0.0;
  double amplitude = 0.0;
  ScattererKind kind = ScattererKind::diffuse;
  std::uint32_t region = 0;
};

struct ScattererField {
  std::vector<Scatterer> scatterers;
  PhantomSpec source_spec;
  AcquisitionParams acquisition;  // geometry the field was laid out for
  std::uint64_t seed = 0;
};

/// Index of the region owning a point, if any.
std::optional<std::size_t> region_at(const PhantomSpec& spec, double axial_mm, double lateral_mm);

/// Diffuse scatterers are Poisson-distributed per region with N(0, n_z) amplitudes;
/// coherent lattices are laid along each line that crosses a region with a spacing.
ScattererField generate_scatterer_field(const PhantomSpec& spec, std::uint64_t seed,
                                        const AcquisitionParams& acq = {});

RFFrame synthesize_rf(const ScattererField& field, const AcquisitionParams& acq);

/// Gaussian form factor scattering intensity; f in MHz, D in mm.
double theoretical_scattering(double f_mhz, double d_eff_mm, double n_z,
                              const AcquisitionParams& acq);

/// Zero-phase transmit pulse amplitude spectrum at f.
double pulse_spectrum(double f_mhz, const AcquisitionParams& acq);

struct Psf {
  std::vector<double> taps;
  std::size_t origin = 0;
};

/// Echo of a point Rayleigh scatterer: pulse spectrum times (f/fc)^2, centred in `length` taps.
Psf point_echo_psf(const AcquisitionParams& acq, std::size_t length = 129);

/// Round-trip envelope duration above -20 dB, expressed as a distance (mm).
double pulse_length_mm(const AcquisitionParams& acq);

}  // namespace quskit
