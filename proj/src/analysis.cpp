#include "beamkit/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "beamkit/dsp.hpp"
#include "beamkit/error.hpp"

namespace beamkit {

namespace {
using cd = std::complex<double>;

void append_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}
} // namespace

Eigen::VectorXcd fir_response(const FirBeamformer& bf, double freq_hz) {
    const double omega = 2.0 * M_PI * freq_hz / bf.sample_rate_hz;
    Eigen::VectorXcd w(bf.channels());
    for (int n = 0; n < bf.channels(); ++n) {
        const auto row = bf.taps.row(n);
        std::vector<double> taps(row.begin(), row.end());
        w(n) = dsp::dtft(taps, omega);
    }
    return w;
}

Beampattern beampattern(const FirBeamformer& bf, const SteeringModel& model,
                        const ArrayGeometry& geom, const std::vector<Direction>& directions,
                        const std::vector<double>& freqs_hz) {
    Beampattern bp;
    bp.freqs_hz = freqs_hz;
    bp.directions = directions;
    bp.values.resize(static_cast<Eigen::Index>(freqs_hz.size()),
                     static_cast<Eigen::Index>(directions.size()));
    for (std::size_t f = 0; f < freqs_hz.size(); ++f) {
        const Eigen::VectorXcd w = fir_response(bf, freqs_hz[f]);
        for (std::size_t m = 0; m < directions.size(); ++m) {
            const Eigen::VectorXcd g = model_response(model, geom, directions[m], freqs_hz[f]);
            bp.values(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(m)) =
                (w.transpose() * g).value();
        }
    }
    if (!bp.values.allFinite())
        throw_numeric("beampattern has non-finite entries");
    return bp;
}

Beampattern beampattern(const std::vector<NarrowbandWeights>& weights,
                        const SteeringModel& model, const ArrayGeometry& geom,
                        const std::vector<Direction>& directions) {
    Beampattern bp;
    bp.directions = directions;
    bp.freqs_hz.reserve(weights.size());
    bp.values.resize(static_cast<Eigen::Index>(weights.size()),
                     static_cast<Eigen::Index>(directions.size()));
    for (std::size_t f = 0; f < weights.size(); ++f) {
        bp.freqs_hz.push_back(weights[f].freq_hz);
        for (std::size_t m = 0; m < directions.size(); ++m) {
            const Eigen::VectorXcd g =
                model_response(model, geom, directions[m], weights[f].freq_hz);
            bp.values(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(m)) =
                (weights[f].w.transpose() * g).value();
        }
    }
    if (!bp.values.allFinite())
        throw_numeric("beampattern has non-finite entries");
    return bp;
}

Eigen::MatrixXd bp_db(const Beampattern& bp) {
    Eigen::MatrixXd out(bp.values.rows(), bp.values.cols());
    for (Eigen::Index i = 0; i < bp.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < bp.values.cols(); ++j) {
            const double p = std::norm(bp.values(i, j));
            out(i, j) = p > 0.0 ? std::max(10.0 * std::log10(p), kBeampatternFloorDb)
                                : kBeampatternFloorDb;
        }
    }
    return out;
}

namespace {

double wng_db_for(const Eigen::VectorXcd& w, const Eigen::VectorXcd& d) {
    const double denom = w.squaredNorm();
    if (denom <= 0.0)
        throw_numeric("WNG undefined for an all-zero weight vector");
    const cd response = (w.transpose() * d).value();
    return 10.0 * std::log10(std::norm(response) / denom);
}

} // namespace

WngCurve wng_curve(const FirBeamformer& bf, const SteeringModel& model,
                   const ArrayGeometry& geom, const Direction& look,
                   const std::vector<double>& freqs_hz) {
    WngCurve curve;
    curve.freqs_hz = freqs_hz;
    curve.wng_db.reserve(freqs_hz.size());
    for (double f : freqs_hz) {
        const Eigen::VectorXcd w = fir_response(bf, f);
        const Eigen::VectorXcd d = model_response(model, geom, look, f);
        curve.wng_db.push_back(wng_db_for(w, d));
    }
    return curve;
}

WngCurve wng_curve(const std::vector<NarrowbandWeights>& weights, const SteeringModel& model,
                   const ArrayGeometry& geom, const Direction& look) {
    WngCurve curve;
    curve.freqs_hz.reserve(weights.size());
    curve.wng_db.reserve(weights.size());
    for (const auto& nb : weights) {
        const Eigen::VectorXcd d = model_response(model, geom, look, nb.freq_hz);
        curve.freqs_hz.push_back(nb.freq_hz);
        curve.wng_db.push_back(wng_db_for(nb.w, d));
    }
    return curve;
}

void write_beampattern_csv(const std::string& path, const Beampattern& bp) {
    const Eigen::MatrixXd db = bp_db(bp);
    std::string out = "freq_hz";
    for (const auto& d : bp.directions) {
        out += ',';
        append_double(out, d.azimuth_deg);
    }
    out += '\n';
    for (std::size_t f = 0; f < bp.freqs_hz.size(); ++f) {
        append_double(out, bp.freqs_hz[f]);
        for (Eigen::Index m = 0; m < db.cols(); ++m) {
            out += ',';
            append_double(out, db(static_cast<Eigen::Index>(f), m));
        }
        out += '\n';
    }
    std::ofstream file(path);
    if (!file)
        throw_io("cannot write beampattern CSV: " + path);
    file << out;
}

void write_wng_csv(const std::string& path, const WngCurve& curve) {
    std::string out = "freq_hz,wng_db\n";
    for (std::size_t i = 0; i < curve.freqs_hz.size(); ++i) {
        append_double(out, curve.freqs_hz[i]);
        out += ',';
        append_double(out, curve.wng_db[i]);
        out += '\n';
    }
    std::ofstream file(path);
    if (!file)
        throw_io("cannot write WNG CSV: " + path);
    file << out;
}

} // namespace beamkit
