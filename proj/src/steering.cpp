#include "beamkit/steering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>

#include <json.hpp>

#include "beamkit/dsp.hpp"
#include "beamkit/error.hpp"

namespace beamkit {

namespace {
using cd = std::complex<double>;
}

// ---------------------------------------------------------------------------
// HrtfSet
// ---------------------------------------------------------------------------

int HrtfSet::taps() const {
    if (hrirs.empty() || hrirs.front().empty())
        return 0;
    return static_cast<int>(hrirs.front().front().size());
}

void HrtfSet::validate() const {
    if (!(sample_rate_hz > 0.0))
        throw_config("HRTF set: sample rate must be positive");
    if (!(source_distance_m > 0.0))
        throw_config("HRTF set: source distance must be positive");
    if (directions.empty())
        throw_config("HRTF set: direction list is empty");
    if (mic_count < 1)
        throw_config("HRTF set: needs at least one microphone");
    if (hrirs.size() != directions.size())
        throw_config("HRTF set: one HRIR block per direction required");
    const int t = taps();
    if (t < 1)
        throw_config("HRTF set: impulse responses must be non-empty");
    for (std::size_t d = 0; d < hrirs.size(); ++d) {
        beamkit::validate(directions[d]);
        if (hrirs[d].size() != static_cast<std::size_t>(mic_count))
            throw_config("HRTF set: direction " + std::to_string(d) + " has wrong mic count");
        for (const auto& ir : hrirs[d]) {
            if (ir.size() != static_cast<std::size_t>(t))
                throw_config("HRTF set: impulse responses must share one length");
            for (double v : ir)
                if (!std::isfinite(v))
                    throw_config("HRTF set: impulse responses must be finite");
        }
    }
    for (std::size_t i = 0; i < directions.size(); ++i)
        for (std::size_t j = i + 1; j < directions.size(); ++j)
            if (angle_between_deg(directions[i], directions[j]) < 1e-9)
                throw_config("HRTF set: duplicate directions " + std::to_string(i) + ", " +
                             std::to_string(j));
}

int HrtfSet::find_direction(const Direction& dir, double tol_deg) const {
    int best = -1;
    double best_angle = tol_deg;
    for (std::size_t i = 0; i < directions.size(); ++i) {
        const double a = angle_between_deg(directions[i], dir);
        if (a <= best_angle) {
            best_angle = a;
            best = static_cast<int>(i);
        }
    }
    return best;
}

HrtfSet HrtfSet::load(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw_io("cannot open HRTF set: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw_io("HRTF set parse error in " + path + ": " + e.what());
    }
    HrtfSet set;
    try {
        set.sample_rate_hz = j.at("sample_rate_hz").get<double>();
        set.source_distance_m = j.at("source_distance_m").get<double>();
        set.bulk_delay_samples = j.value("bulk_delay_samples", 0.0);
        set.mic_count = j.at("mics").get<int>();
        for (const auto& d : j.at("directions"))
            set.directions.push_back(Direction{d.at("azimuth_deg").get<double>(),
                                               d.at("elevation_polar_deg").get<double>()});
        set.hrirs = j.at("hrirs").get<std::vector<std::vector<std::vector<double>>>>();
    } catch (const std::exception& e) {
        throw_config("invalid HRTF set " + path + ": " + e.what());
    }
    set.validate();
    return set;
}

void HrtfSet::save(const std::string& path) const {
    validate();
    nlohmann::json j;
    j["version"] = 1;
    j["sample_rate_hz"] = sample_rate_hz;
    j["source_distance_m"] = source_distance_m;
    j["bulk_delay_samples"] = bulk_delay_samples;
    j["mics"] = mic_count;
    auto& dirs = j["directions"] = nlohmann::json::array();
    for (const auto& d : directions)
        dirs.push_back({{"azimuth_deg", d.azimuth_deg},
                        {"elevation_polar_deg", d.elevation_polar_deg}});
    j["hrirs"] = hrirs;
    std::ofstream out(path);
    if (!out)
        throw_io("cannot write HRTF set: " + path);
    out << j.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Responses
// ---------------------------------------------------------------------------

Eigen::VectorXcd freefield_response(const ArrayGeometry& geom, const Direction& dir,
                                    double freq_hz, double speed_of_sound) {
    if (freq_hz < 0.0)
        throw_config("frequency must be nonnegative");
    const Eigen::Vector3d u = unit_propagation_vector(dir);
    const double k = 2.0 * M_PI * freq_hz / speed_of_sound;
    Eigen::VectorXcd g(geom.mic_count());
    for (int n = 0; n < geom.mic_count(); ++n)
        g(n) = std::exp(cd(0.0, k * u.dot(geom.mic(n))));
    return g;
}

Eigen::VectorXcd hrtf_response(const HrtfSet& set, const Direction& dir, double freq_hz,
                               double tol_deg) {
    const int idx = set.find_direction(dir, tol_deg);
    if (idx < 0)
        throw_config("no stored HRTF direction within " + std::to_string(tol_deg) +
                     " deg of azimuth " + std::to_string(dir.azimuth_deg) + ", polar " +
                     std::to_string(dir.elevation_polar_deg));
    const double omega = 2.0 * M_PI * freq_hz / set.sample_rate_hz;
    Eigen::VectorXcd g(set.mic_count);
    for (int n = 0; n < set.mic_count; ++n)
        g(n) = dsp::dtft(set.hrirs[static_cast<std::size_t>(idx)][static_cast<std::size_t>(n)],
                         omega);
    return g;
}

namespace {

Eigen::VectorXcd sphere_model_response(const RigidSphereModel& model, const ArrayGeometry& geom,
                                       const Direction& dir, double freq_hz) {
    const Eigen::Vector3d u = unit_propagation_vector(dir);
    SphereSeries series(model.radius_m, model.source_distance_m, freq_hz, model.max_order,
                        model.speed_of_sound);
    Eigen::VectorXcd g(geom.mic_count());
    for (int n = 0; n < geom.mic_count(); ++n) {
        const Eigen::Vector3d& p = geom.mic(n);
        if (p.norm() < 1e-12)
            throw_config("sphere backend needs microphones away from the origin");
        const double angle = std::acos(std::clamp(u.dot(p.normalized()), -1.0, 1.0));
        const SphereEval eval = series.evaluate(angle);
        if (!eval.converged)
            throw_numeric("sphere series did not converge at " + std::to_string(freq_hz) +
                          " Hz; raise max_order");
        g(n) = eval.value;
    }
    return g;
}

} // namespace

Eigen::VectorXcd model_response(const SteeringModel& model, const ArrayGeometry& geom,
                                const Direction& dir, double freq_hz) {
    return std::visit(
        [&](const auto& m) -> Eigen::VectorXcd {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, FreeFieldModel>) {
                return freefield_response(geom, dir, freq_hz, m.speed_of_sound);
            } else if constexpr (std::is_same_v<T, RigidSphereModel>) {
                return sphere_model_response(m, geom, dir, freq_hz);
            } else {
                if (!m.set)
                    throw_config("HRTF steering model has no set attached");
                if (m.set->mic_count != geom.mic_count())
                    throw_config("HRTF set mic count does not match the geometry");
                return hrtf_response(*m.set, dir, freq_hz, m.direction_tolerance_deg);
            }
        },
        model);
}

double model_bulk_delay_samples(const SteeringModel& model) {
    if (const auto* h = std::get_if<HrtfModel>(&model))
        return h->set ? h->set->bulk_delay_samples : 0.0;
    return 0.0;
}

std::string model_label(const SteeringModel& model) {
    return std::visit(
        [](const auto& m) -> std::string {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, FreeFieldModel>) {
                return "freefield";
            } else if constexpr (std::is_same_v<T, RigidSphereModel>) {
                return "sphere(a=" + std::to_string(m.radius_m) +
                       ",d=" + std::to_string(m.source_distance_m) + ")";
            } else {
                return m.set ? ("hrtf(d=" + std::to_string(m.set->source_distance_m) + ")")
                             : "hrtf(unset)";
            }
        },
        model);
}

SteeringMatrix steering_matrix(const SteeringModel& model, const ArrayGeometry& geom,
                               const std::vector<Direction>& directions, const Direction& look,
                               double freq_hz) {
    if (directions.empty())
        throw_config("steering matrix needs at least one direction");
    SteeringMatrix sm;
    sm.freq_hz = freq_hz;
    sm.response.resize(static_cast<Eigen::Index>(directions.size()), geom.mic_count());
    for (std::size_t m = 0; m < directions.size(); ++m)
        sm.response.row(static_cast<Eigen::Index>(m)) =
            model_response(model, geom, directions[m], freq_hz).transpose();
    sm.look_vector = model_response(model, geom, look, freq_hz);
    if (sm.look_vector.norm() <= 0.0)
        throw_numeric("steering look vector vanished");
    return sm;
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

namespace {

// Inverse DFT of a half spectrum (bins 0..T/2) with bulk delay, conjugate
// symmetry enforced, tails tapered with a raised-cosine fade.
std::vector<double> spectrum_to_hrir(std::vector<cd> half, int taps) {
    const std::size_t t = static_cast<std::size_t>(taps);
    std::vector<cd> full(t, cd(0.0, 0.0));
    const double bulk = static_cast<double>(taps) / 4.0;
    for (std::size_t k = 0; k <= t / 2; ++k) {
        const double w = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(taps);
        cd v = half[k] * std::exp(cd(0.0, -w * bulk));
        if (k == 0 || k == t / 2)
            v = cd(v.real(), 0.0);
        full[k] = v;
        if (k != 0 && k != t / 2)
            full[t - k] = std::conj(v);
    }
    dsp::fft(full, true);
    std::vector<double> ir(t);
    for (std::size_t i = 0; i < t; ++i)
        ir[i] = full[i].real();
    const std::size_t fade = std::max<std::size_t>(4, t / 64);
    for (std::size_t i = 0; i < fade; ++i) {
        const double g = 0.5 - 0.5 * std::cos(M_PI * static_cast<double>(i) /
                                              static_cast<double>(fade));
        ir[i] *= g;
        ir[t - 1 - i] *= g;
    }
    return ir;
}

HrtfSet synthesize_set(const ArrayGeometry& geom, double source_distance_m,
                       const std::vector<Direction>& directions, double sample_rate_hz,
                       int taps,
                       const std::function<cd(const Direction&, int, double)>& transfer) {
    if (taps < 8 || (taps & (taps - 1)) != 0)
        throw_config("HRIR length must be a power of two >= 8");
    if (directions.empty())
        throw_config("synthesis needs at least one direction");
    HrtfSet set;
    set.sample_rate_hz = sample_rate_hz;
    set.source_distance_m = source_distance_m;
    set.bulk_delay_samples = static_cast<double>(taps) / 4.0;
    set.mic_count = geom.mic_count();
    set.directions = directions;
    set.hrirs.resize(directions.size());
    const std::size_t bins = static_cast<std::size_t>(taps / 2) + 1;
    for (std::size_t d = 0; d < directions.size(); ++d) {
        set.hrirs[d].resize(static_cast<std::size_t>(geom.mic_count()));
        for (int n = 0; n < geom.mic_count(); ++n) {
            std::vector<cd> half(bins);
            for (std::size_t k = 0; k < bins; ++k) {
                const double f =
                    static_cast<double>(k) * sample_rate_hz / static_cast<double>(taps);
                half[k] = transfer(directions[d], n, f);
            }
            set.hrirs[d][static_cast<std::size_t>(n)] = spectrum_to_hrir(std::move(half), taps);
        }
    }
    set.validate();
    return set;
}

} // namespace

HrtfSet synthesize_sphere_hrtf_set(const ArrayGeometry& geom, double radius_m,
                                   double source_distance_m,
                                   const std::vector<Direction>& directions,
                                   double sample_rate_hz, int taps, int max_order,
                                   double speed_of_sound) {
    if (!(source_distance_m > radius_m))
        throw_infeasible("source distance must exceed the sphere radius");
    // mic surface normals from the projected positions
    std::vector<Eigen::Vector3d> normals;
    normals.reserve(static_cast<std::size_t>(geom.mic_count()));
    for (int n = 0; n < geom.mic_count(); ++n) {
        if (geom.mic(n).norm() < 1e-12)
            throw_config("sphere synthesis needs microphones away from the origin");
        normals.push_back(geom.mic(n).normalized());
    }
    // cache the radial series per frequency bin
    std::vector<std::unique_ptr<SphereSeries>> series(static_cast<std::size_t>(taps / 2) + 1);
    auto transfer = [&](const Direction& dir, int mic, double f) -> cd {
        const std::size_t bin =
            static_cast<std::size_t>(std::llround(f * taps / sample_rate_hz));
        if (!series[bin])
            series[bin] = std::make_unique<SphereSeries>(radius_m, source_distance_m, f,
                                                         max_order, speed_of_sound);
        const Eigen::Vector3d u = unit_propagation_vector(dir);
        const double angle =
            std::acos(std::clamp(u.dot(normals[static_cast<std::size_t>(mic)]), -1.0, 1.0));
        const SphereEval eval = series[bin]->evaluate(angle);
        if (!eval.converged)
            throw_numeric("sphere series did not converge during synthesis at " +
                          std::to_string(f) + " Hz; raise max_order");
        return eval.value;
    };
    return synthesize_set(geom, source_distance_m, directions, sample_rate_hz, taps, transfer);
}

HrtfSet synthesize_freefield_hrtf_set(const ArrayGeometry& geom, double source_distance_m,
                                      const std::vector<Direction>& directions,
                                      double sample_rate_hz, int taps, double speed_of_sound) {
    auto transfer = [&](const Direction& dir, int mic, double f) -> cd {
        const Eigen::Vector3d u = unit_propagation_vector(dir);
        const double k = 2.0 * M_PI * f / speed_of_sound;
        return std::exp(cd(0.0, k * u.dot(geom.mic(mic))));
    };
    return synthesize_set(geom, source_distance_m, directions, sample_rate_hz, taps, transfer);
}

} // namespace beamkit
