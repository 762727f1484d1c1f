#include "beamkit/spatial.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "beamkit/error.hpp"

namespace beamkit {

namespace {
constexpr double kDegToRad = M_PI / 180.0;
} // namespace

void validate(const Direction& dir) {
    if (!std::isfinite(dir.azimuth_deg) || dir.azimuth_deg < 0.0 || dir.azimuth_deg >= 360.0)
        throw_config("azimuth must lie in [0, 360), got " + std::to_string(dir.azimuth_deg));
    if (!std::isfinite(dir.elevation_polar_deg) || dir.elevation_polar_deg < 0.0 ||
        dir.elevation_polar_deg > 180.0)
        throw_config("polar angle must lie in [0, 180], got " +
                     std::to_string(dir.elevation_polar_deg));
}

Eigen::Vector3d unit_propagation_vector(const Direction& dir) {
    validate(dir);
    const double az = dir.azimuth_deg * kDegToRad;
    const double polar = dir.elevation_polar_deg * kDegToRad;
    const double s = std::sin(polar);
    return {s * std::cos(az), s * std::sin(az), std::cos(polar)};
}

double angle_between_deg(const Direction& a, const Direction& b) {
    const double c = unit_propagation_vector(a).dot(unit_propagation_vector(b));
    return std::acos(std::clamp(c, -1.0, 1.0)) / kDegToRad;
}

void validate(const SourcePosition& src) {
    validate(src.direction);
    if (!(src.distance_m > 0.0) || !std::isfinite(src.distance_m))
        throw_config("source distance must be positive");
}

ArrayGeometry::ArrayGeometry(std::vector<Eigen::Vector3d> mics,
                             std::vector<std::string> labels, int reference_mic)
    : mics_(std::move(mics)), labels_(std::move(labels)), reference_mic_(reference_mic) {
    if (mics_.empty())
        throw_config("geometry needs at least one microphone");
    if (labels_.empty()) {
        labels_.reserve(mics_.size());
        for (std::size_t n = 0; n < mics_.size(); ++n)
            labels_.push_back("mic" + std::to_string(n));
    }
    if (labels_.size() != mics_.size())
        throw_config("geometry label count does not match microphone count");
    if (reference_mic_ < 0 || reference_mic_ >= static_cast<int>(mics_.size()))
        throw_config("reference_mic out of range");
    for (const auto& p : mics_)
        if (!p.allFinite())
            throw_config("microphone coordinates must be finite");
    for (std::size_t i = 0; i < mics_.size(); ++i)
        for (std::size_t j = i + 1; j < mics_.size(); ++j)
            if ((mics_[i] - mics_[j]).norm() < 1e-9)
                throw_config("microphones " + std::to_string(i) + " and " + std::to_string(j) +
                             " coincide");
}

ArrayGeometry ArrayGeometry::load(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw_io("cannot open geometry file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw_io("geometry parse error in " + path + ": " + e.what());
    }
    try {
        std::vector<Eigen::Vector3d> mics;
        for (const auto& row : j.at("mics")) {
            if (!row.is_array() || row.size() != 3)
                throw_config("each mic entry must be [x, y, z]");
            Eigen::Vector3d p(row[0].get<double>(), row[1].get<double>(), row[2].get<double>());
            if (!p.allFinite())
                throw_config("mic coordinates must be finite");
            mics.push_back(p);
        }
        std::vector<std::string> labels;
        if (j.contains("labels"))
            labels = j.at("labels").get<std::vector<std::string>>();
        const int ref = j.value("reference_mic", 0);
        return ArrayGeometry(std::move(mics), std::move(labels), ref);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw_config("invalid geometry file " + path + ": " + e.what());
    }
}

void ArrayGeometry::save(const std::string& path) const {
    nlohmann::json j;
    j["version"] = 1;
    auto& rows = j["mics"] = nlohmann::json::array();
    for (const auto& p : mics_)
        rows.push_back({p.x(), p.y(), p.z()});
    j["labels"] = labels_;
    j["reference_mic"] = reference_mic_;
    std::ofstream out(path);
    if (!out)
        throw_io("cannot write geometry file: " + path);
    out << j.dump(2) << '\n';
}

FrequencyGrid FrequencyGrid::uniform(double sample_rate_hz, int count,
                                     double band_low_hz, double band_high_hz) {
    if (count < 1)
        throw_config("frequency grid needs at least one point");
    FrequencyGrid grid;
    grid.sample_rate_hz = sample_rate_hz;
    grid.band_low_hz = band_low_hz;
    grid.band_high_hz = band_high_hz;
    grid.freqs_hz.resize(static_cast<std::size_t>(count));
    const double nyquist = sample_rate_hz / 2.0;
    for (int p = 0; p < count; ++p)
        grid.freqs_hz[static_cast<std::size_t>(p)] = (p + 1) * nyquist / count;
    grid.validate();
    return grid;
}

void FrequencyGrid::validate() const {
    if (!(sample_rate_hz > 0.0))
        throw_config("sample rate must be positive");
    if (freqs_hz.empty())
        throw_config("frequency grid is empty");
    const double nyquist = sample_rate_hz / 2.0;
    double prev = 0.0;
    for (double f : freqs_hz) {
        if (!(f > prev))
            throw_config("frequencies must be strictly increasing and positive");
        if (f > nyquist * (1.0 + 1e-12))
            throw_config("frequency above Nyquist: " + std::to_string(f));
        prev = f;
    }
    if (band_low_hz > band_high_hz)
        throw_config("pass-band edges out of order");
    if (band_low_hz < freqs_hz.front() - 1e-9 || band_high_hz > freqs_hz.back() + 1e-9)
        throw_config("pass-band must lie inside the frequency grid");
}

std::vector<Direction> direction_grid(double azimuth_step_deg, double elevation_polar_deg,
                                      double az_start_deg, double az_stop_deg) {
    if (!(azimuth_step_deg > 0.0))
        throw_config("azimuth step must be positive");
    if (az_stop_deg < az_start_deg)
        throw_config("azimuth span is empty");
    const double span = az_stop_deg - az_start_deg;
    const double steps = span / azimuth_step_deg;
    if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps))
        throw_config("azimuth step does not divide the span");
    const int count = static_cast<int>(std::llround(steps)) + 1;
    std::vector<Direction> grid;
    grid.reserve(static_cast<std::size_t>(count));
    for (int m = 0; m < count; ++m) {
        Direction d{az_start_deg + m * azimuth_step_deg, elevation_polar_deg};
        validate(d);
        grid.push_back(d);
    }
    return grid;
}

} // namespace beamkit
