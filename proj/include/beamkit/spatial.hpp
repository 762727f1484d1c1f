#ifndef BEAMKIT_SPATIAL_HPP
#define BEAMKIT_SPATIAL_HPP

#include <string>
#include <vector>

#include <Eigen/Core>

namespace beamkit {

// Default speed of sound in m/s; every operation that needs it takes it as a
// parameter so configurations can override.
inline constexpr double kSpeedOfSound = 343.0;

// Angle convention: azimuth is measured in the x-y plane from +x, the polar
// angle from +z. Broadside corresponds to azimuth 90 deg (the +y axis).
struct Direction {
    double azimuth_deg = 0.0;         // [0, 360)
    double elevation_polar_deg = 90.0; // [0, 180], 0 = zenith

    bool operator==(const Direction&) const = default;
};

void validate(const Direction& dir);

// Unit vector pointing from the array origin toward the source. The wave
// vector of a plane wave arriving from `dir` is k(w) = -(w/c) * u.
Eigen::Vector3d unit_propagation_vector(const Direction& dir);

// Great-circle angle between two directions, degrees in [0, 180].
double angle_between_deg(const Direction& a, const Direction& b);

struct SourcePosition {
    Direction direction;
    double distance_m = 1.0; // > 0
};

void validate(const SourcePosition& src);

class ArrayGeometry {
public:
    ArrayGeometry(std::vector<Eigen::Vector3d> mics,
                  std::vector<std::string> labels,
                  int reference_mic);

    int mic_count() const { return static_cast<int>(mics_.size()); }
    const Eigen::Vector3d& mic(int n) const { return mics_.at(static_cast<std::size_t>(n)); }
    const std::vector<Eigen::Vector3d>& mics() const { return mics_; }
    const std::string& label(int n) const { return labels_.at(static_cast<std::size_t>(n)); }
    int reference_mic() const { return reference_mic_; }

    static ArrayGeometry load(const std::string& path);
    void save(const std::string& path) const;

private:
    std::vector<Eigen::Vector3d> mics_;
    std::vector<std::string> labels_;
    int reference_mic_ = 0;
};

struct FrequencyGrid {
    double sample_rate_hz = 0.0;
    std::vector<double> freqs_hz;  // strictly increasing, 0 < f <= fs/2
    double band_low_hz = 0.0;      // pass-band edges, inside [freqs.front(), freqs.back()]
    double band_high_hz = 0.0;

    std::size_t size() const { return freqs_hz.size(); }
    bool in_band(double f) const { return f >= band_low_hz && f <= band_high_hz; }

    // `count` uniformly spaced frequencies over (0, fs/2]: f_p = (p+1) * fs/2 / count.
    static FrequencyGrid uniform(double sample_rate_hz, int count,
                                 double band_low_hz, double band_high_hz);

    void validate() const;
};

// Azimuth scan at a fixed polar angle, from az_start to az_stop inclusive.
// The step must divide the span within tolerance.
std::vector<Direction> direction_grid(double azimuth_step_deg,
                                      double elevation_polar_deg,
                                      double az_start_deg = 0.0,
                                      double az_stop_deg = 180.0);

} // namespace beamkit

#endif
