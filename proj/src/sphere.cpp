#include <cmath>
#include <complex>
#include <vector>

#include "beamkit/error.hpp"
#include "beamkit/steering.hpp"

namespace beamkit {

namespace {

using cd = std::complex<double>;

// Spherical Bessel j_m, y_m for m = 0..order at a fixed argument.
// y_m recurs upward (stable); j_m recurs downward from a padded start order
// and is normalized against j_0 (Miller's algorithm), which stays stable for
// m beyond the argument. Magnitudes are capped to keep y_m from overflowing
// at small arguments; modes that far out contribute nothing to the series.
struct SphericalBessel {
    std::vector<double> j, y;

    SphericalBessel(int order, double x) {
        j.assign(static_cast<std::size_t>(order) + 1, 0.0);
        y.assign(static_cast<std::size_t>(order) + 1, 0.0);
        const double j0 = (x < 1e-12) ? 1.0 : std::sin(x) / x;
        if (x < 1e-12) {
            j[0] = 1.0;
            for (auto& v : y)
                v = -1e300;
            return;
        }
        // downward recurrence for j
        const int start = order + 16 + static_cast<int>(std::ceil(x));
        double fp = 0.0, fc = 1e-30;
        std::vector<double> tmp(static_cast<std::size_t>(order) + 1, 0.0);
        for (int m = start; m >= 0; --m) {
            const double fm = (2.0 * m + 3.0) / x * fc - fp;
            fp = fc;
            fc = fm;
            if (m <= order)
                tmp[static_cast<std::size_t>(m)] = fm;
            if (std::abs(fc) > 1e250) { // rescale to avoid overflow
                fp /= 1e250;
                fc /= 1e250;
                for (auto& v : tmp)
                    v /= 1e250;
            }
        }
        const double scale = j0 / fc;
        for (int m = 0; m <= order; ++m)
            j[static_cast<std::size_t>(m)] = tmp[static_cast<std::size_t>(m)] * scale;
        // upward recurrence for y
        y[0] = -std::cos(x) / x;
        if (order >= 1)
            y[1] = -std::cos(x) / (x * x) - std::sin(x) / x;
        for (int m = 2; m <= order; ++m) {
            const double ym = (2.0 * m - 1.0) / x * y[static_cast<std::size_t>(m - 1)] -
                              y[static_cast<std::size_t>(m - 2)];
            y[static_cast<std::size_t>(m)] = std::min(std::abs(ym), 1e280) * (ym < 0 ? -1.0 : 1.0);
        }
    }

    cd h(int m) const { return {j[static_cast<std::size_t>(m)], y[static_cast<std::size_t>(m)]}; }

    // h'_m(x) = h_{m-1}(x) - (m+1)/x * h_m(x); h'_0 = -h_1
    cd hd(int m, double x) const {
        if (m == 0)
            return -h(1);
        return h(m - 1) - (static_cast<double>(m + 1) / x) * h(m);
    }
};

} // namespace

SphereSeries::SphereSeries(double radius_m, double source_distance_m, double freq_hz,
                           int max_order, double speed_of_sound) {
    if (!(radius_m > 0.0))
        throw_config("sphere radius must be positive");
    if (max_order < 1)
        throw_config("sphere series max_order must be >= 1");
    if (!(source_distance_m > radius_m))
        throw_infeasible("source lies inside the sphere (distance " +
                         std::to_string(source_distance_m) + " m, radius " +
                         std::to_string(radius_m) + " m)");
    if (freq_hz < 0.0)
        throw_config("frequency must be nonnegative");

    const double k = 2.0 * M_PI * freq_hz / speed_of_sound;
    const double mu = k * radius_m;        // ka
    const double murho = k * source_distance_m; // kr
    if (mu < 1e-9) {
        // long-wavelength limit: the sphere is acoustically invisible
        dc_ = true;
        mode_gain_.assign(1, cd(1.0, 0.0));
        return;
    }

    // order needed: the modes decay geometrically once m exceeds ka
    const int order = max_order + 1;
    SphericalBessel at_surface(order, mu);
    SphericalBessel at_source(order, murho);

    const cd prefactor = -(source_distance_m / radius_m) / mu *
                         std::exp(cd(0.0, -murho));
    mode_gain_.reserve(static_cast<std::size_t>(max_order) + 1);
    double gain_sum = 0.0;
    for (int m = 0; m <= max_order; ++m) {
        const cd g = prefactor * (2.0 * m + 1.0) * at_source.h(m) / at_surface.hd(m, mu);
        if (!std::isfinite(g.real()) || !std::isfinite(g.imag()))
            break;
        mode_gain_.push_back(g);
        gain_sum += std::abs(g);
        // uniform-in-angle cutoff: |P_m| <= 1, so tiny radial factors can
        // never matter for any microphone angle
        if (m > mu + 4 && std::abs(g) < 1e-14 * gain_sum) {
            tail_negligible_ = true;
            break;
        }
    }
}

SphereEval SphereSeries::evaluate(double mic_angle_rad) const {
    SphereEval out;
    if (dc_) {
        out.value = {1.0, 0.0};
        out.converged = true;
        out.terms_used = 1;
        return out;
    }
    const double x = std::cos(mic_angle_rad);
    cd sum(0.0, 0.0);
    double pm1 = 1.0, pm2 = 0.0;
    for (std::size_t m = 0; m < mode_gain_.size(); ++m) {
        double pm;
        if (m == 0)
            pm = 1.0;
        else if (m == 1)
            pm = x;
        else {
            pm = ((2.0 * static_cast<double>(m) - 1.0) * x * pm1 -
                  (static_cast<double>(m) - 1.0) * pm2) /
                 static_cast<double>(m);
        }
        if (m >= 1) {
            pm2 = pm1;
            pm1 = pm;
        }
        const cd term = mode_gain_[m] * pm;
        sum += term;
        out.terms_used = static_cast<int>(m) + 1;
        if (m > 0 && std::abs(term) < 1e-10 * std::abs(sum)) {
            out.converged = true;
            break;
        }
    }
    // a uniformly negligible radial tail converges at every angle, even where
    // cancellation keeps the relative term test from firing
    if (!out.converged && tail_negligible_)
        out.converged = true;
    // conjugation flips to the phase convention of the free-field steering
    // vectors (advance toward the source)
    out.value = std::conj(sum);
    return out;
}

SphereEval sphere_response(double radius_m, const SourcePosition& source,
                           double mic_angle_rad, double freq_hz, int max_order,
                           double speed_of_sound) {
    validate(source);
    SphereSeries series(radius_m, source.distance_m, freq_hz, max_order, speed_of_sound);
    return series.evaluate(mic_angle_rad);
}

} // namespace beamkit
