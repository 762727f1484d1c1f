#include "beamkit/design.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "beamkit/error.hpp"
#include "beamkit/parallel.hpp"
#include "beamkit/wav.hpp"

namespace beamkit {

namespace {
using cd = std::complex<double>;
}

double DesignSpec::gamma_linear() const {
    return std::pow(10.0, gamma_db / 10.0);
}

Eigen::VectorXd DesignSpec::delta_desired(const std::vector<Direction>& directions,
                                          const Direction& look) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(directions.size()));
    int hit = -1;
    for (std::size_t m = 0; m < directions.size(); ++m) {
        if (angle_between_deg(directions[m], look) < 1e-4) {
            hit = static_cast<int>(m);
            break;
        }
    }
    if (hit < 0)
        throw_config("look direction is not on the design direction grid");
    b(hit) = 1.0;
    return b;
}

void DesignSpec::validate(const ArrayGeometry& geom) const {
    grid.validate();
    beamkit::validate(look);
    if (directions.empty())
        throw_config("design needs at least one direction");
    if (desired.size() != static_cast<Eigen::Index>(directions.size()))
        throw_config("desired response length must match the direction count");
    for (Eigen::Index i = 0; i < desired.size(); ++i)
        if (!(desired(i) >= 0.0 && desired(i) <= 1.0))
            throw_config("desired response entries must lie in [0, 1]");
    for (std::size_t m = 0; m < directions.size(); ++m)
        if (angle_between_deg(directions[m], look) < 1e-4 &&
            std::abs(desired(static_cast<Eigen::Index>(m)) - 1.0) > 1e-12)
            throw_config("desired response must be 1 at the look direction");
    if (!(gamma_linear() > 0.0))
        throw_config("WNG bound must be positive");
    if (fir_length < 2)
        throw_config("FIR length must be at least 2");
    if (const auto* h = std::get_if<HrtfModel>(&model)) {
        if (!h->set)
            throw_config("HRTF design model has no set attached");
        if (std::abs(h->set->sample_rate_hz - grid.sample_rate_hz) > 1e-9)
            throw_config("HRTF set sample rate does not match the design grid");
        if (h->set->mic_count != geom.mic_count())
            throw_config("HRTF set mic count does not match the geometry");
    }
}

// ---------------------------------------------------------------------------
// Narrowband solver
// ---------------------------------------------------------------------------

NarrowbandWeights solve_narrowband(const SteeringMatrix& steering,
                                   const Eigen::VectorXd& desired, double gamma_linear) {
    const Eigen::MatrixXcd& G = steering.response;
    const Eigen::VectorXcd& d = steering.look_vector;
    const Eigen::Index n = d.size();
    if (G.rows() < 1 || G.cols() != n)
        throw_config("steering matrix shape does not match the look vector");
    if (G.rows() != desired.size())
        throw_config("desired response length does not match the steering matrix");
    if (!(gamma_linear > 0.0))
        throw_config("WNG bound must be positive");

    const double d_norm2 = d.squaredNorm();
    if (d_norm2 <= 0.0)
        throw_numeric("look steering vector vanished");
    if (gamma_linear > d_norm2 * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "WNG bound infeasible: requested " << 10.0 * std::log10(gamma_linear)
            << " dB exceeds the maximum achievable " << 10.0 * std::log10(d_norm2)
            << " dB for this look direction";
        throw_infeasible(msg.str());
    }

    NarrowbandWeights out;
    out.freq_hz = steering.freq_hz;

    // particular solution of d^T w = 1, orthogonal to the homogeneous space
    const Eigen::VectorXcd w0 = d.conjugate() / d_norm2;

    if (n == 1) {
        out.w = w0;
    } else {
        // orthonormal basis V of {v : d^T v = 0} = conj(d)^perp from a
        // Householder QR of conj(d)
        Eigen::MatrixXcd dc = d.conjugate();
        Eigen::HouseholderQR<Eigen::MatrixXcd> qr(dc);
        Eigen::MatrixXcd Q = qr.householderQ() * Eigen::MatrixXcd::Identity(n, n);
        const Eigen::MatrixXcd V = Q.rightCols(n - 1);

        const Eigen::MatrixXcd A = G * V;
        const Eigen::VectorXcd r = desired.cast<cd>() - G * w0;
        const double radius2 = std::max(0.0, 1.0 / gamma_linear - 1.0 / d_norm2);

        Eigen::VectorXcd z = Eigen::VectorXcd::Zero(n - 1);
        double lambda = 0.0;
        const double r_tol = 1e-12 * std::max(1.0, desired.norm());
        if (r.norm() > r_tol && radius2 > 0.0) {
            const Eigen::MatrixXcd AhA = A.adjoint() * A;
            const Eigen::VectorXcd Ahr = A.adjoint() * r;
            const auto solve_ridge = [&](double lam) {
                Eigen::MatrixXcd M = AhA;
                M.diagonal().array() += lam;
                return Eigen::VectorXcd(M.ldlt().solve(Ahr));
            };
            // interior candidate: minimum-norm least-squares solution
            const Eigen::VectorXcd z0 =
                A.completeOrthogonalDecomposition().solve(r).eval();
            const double radius = std::sqrt(radius2);
            if (z0.norm() <= radius) {
                z = z0;
            } else {
                // norm(z(lambda)) decreases monotonically; bracket then bisect
                double lo = 0.0, hi = 1.0;
                int guard = 0;
                while (solve_ridge(hi).norm() > radius && guard++ < 200)
                    hi *= 2.0;
                if (guard >= 200)
                    throw_numeric("ridge bracket did not close");
                for (int it = 0; it < 200; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const double norm_mid = solve_ridge(mid).norm();
                    if (norm_mid > radius)
                        lo = mid;
                    else
                        hi = mid;
                    if (std::abs(norm_mid - radius) <= 1e-10 * radius) {
                        hi = mid;
                        break;
                    }
                }
                lambda = hi; // feasible endpoint
                z = solve_ridge(lambda);
            }
        }
        out.w = w0 + V * z;
        out.lambda = lambda;
    }

    out.residual = (G * out.w - desired.cast<cd>()).squaredNorm();
    const cd response = d.transpose() * out.w;
    out.wng_linear = std::norm(response) / out.w.squaredNorm();
    if (std::abs(response - cd(1.0, 0.0)) > 1e-8)
        throw_numeric("distortionless constraint violated");
    return out;
}

std::vector<NarrowbandWeights> design_broadband(const DesignSpec& spec,
                                                const ArrayGeometry& geom) {
    spec.validate(geom);
    const double gamma = spec.gamma_linear();
    const std::size_t count = spec.grid.size();
    std::vector<NarrowbandWeights> out(count);
    std::vector<std::string> failures(count);
    parallel_for(count, [&](std::size_t p) {
        try {
            const SteeringMatrix sm = steering_matrix(spec.model, geom, spec.directions,
                                                      spec.look, spec.grid.freqs_hz[p]);
            out[p] = solve_narrowband(sm, spec.desired, gamma);
        } catch (const Error& e) {
            failures[p] = e.what();
        }
    });
    for (std::size_t p = 0; p < count; ++p)
        if (!failures[p].empty())
            throw Error(ErrorKind::infeasible,
                        "design failed at frequency index " + std::to_string(p) + " (" +
                            std::to_string(spec.grid.freqs_hz[p]) + " Hz): " + failures[p]);
    return out;
}

// ---------------------------------------------------------------------------
// FIR approximation
// ---------------------------------------------------------------------------

FirBeamformer fir_approximation(const std::vector<NarrowbandWeights>& weights, int fir_length,
                                const FrequencyGrid& grid, double target_advance_samples) {
    if (weights.size() < 2)
        throw_config("FIR approximation needs at least two frequencies");
    if (weights.size() != grid.size())
        throw_config("weight list does not match the frequency grid");
    if (fir_length < 2)
        throw_config("FIR length must be at least 2");
    const int n_ch = static_cast<int>(weights.front().w.size());
    for (const auto& nb : weights)
        if (nb.w.size() != n_ch)
            throw_config("inconsistent channel counts across frequencies");

    const int pts = static_cast<int>(grid.size());
    const double fs = grid.sample_rate_hz;
    const double tau = (fir_length - 1) / 2.0;

    // A grid of P frequencies pins down at most 2P real tap values; restrict
    // the fit to a support window the grid can determine (the rest of the
    // filter is exactly zero). The window sits where the target energy lives:
    // at tau, minus any bulk-delay advance baked into the weights.
    int support = std::min(fir_length, 2 * (pts - 1));
    support = std::max(support, 2);
    if ((fir_length - support) % 2 != 0)
        support += 1;
    int offset = (fir_length - support) / 2 -
                 static_cast<int>(std::llround(target_advance_samples));
    offset = std::clamp(offset, 0, fir_length - support);

    // shared weighted trig system: rows Re/Im per frequency
    Eigen::MatrixXd sys(2 * pts, support);
    Eigen::VectorXd wgt(pts);
    for (int p = 0; p < pts; ++p) {
        const double f = grid.freqs_hz[static_cast<std::size_t>(p)];
        const double q = grid.in_band(f) ? 1.0 : 0.01;
        wgt(p) = std::sqrt(q);
        const double omega = 2.0 * M_PI * f / fs;
        for (int i = 0; i < support; ++i) {
            const double ph = omega * (offset + i);
            sys(2 * p, i) = wgt(p) * std::cos(ph);
            sys(2 * p + 1, i) = -wgt(p) * std::sin(ph);
        }
    }
    const auto decomp = sys.completeOrthogonalDecomposition();

    FirBeamformer bf;
    bf.taps = Eigen::MatrixXd::Zero(n_ch, fir_length);
    bf.sample_rate_hz = fs;
    bf.group_delay_samples = tau;
    bf.response_delay_samples = tau;

    double worst_err = 0.0;
    for (int ch = 0; ch < n_ch; ++ch) {
        Eigen::VectorXd rhs(2 * pts);
        for (int p = 0; p < pts; ++p) {
            const double omega = 2.0 * M_PI * grid.freqs_hz[static_cast<std::size_t>(p)] / fs;
            const cd target = weights[static_cast<std::size_t>(p)].w(ch) *
                              std::exp(cd(0.0, -omega * tau));
            rhs(2 * p) = wgt(p) * target.real();
            rhs(2 * p + 1) = wgt(p) * target.imag();
        }
        const Eigen::VectorXd taps = decomp.solve(rhs);
        bf.taps.row(ch).segment(offset, support) = taps.transpose();
        // in-band realization error against the narrowband targets
        for (int p = 0; p < pts; ++p) {
            const double f = grid.freqs_hz[static_cast<std::size_t>(p)];
            if (!grid.in_band(f))
                continue;
            const double omega = 2.0 * M_PI * f / fs;
            cd realized(0.0, 0.0);
            for (int i = 0; i < support; ++i)
                realized += taps(i) * std::exp(cd(0.0, -omega * (offset + i)));
            const cd target = weights[static_cast<std::size_t>(p)].w(ch) *
                              std::exp(cd(0.0, -omega * tau));
            worst_err = std::max(worst_err, std::abs(realized - target));
        }
    }
    bf.fit_error_db = worst_err > 0.0 ? 20.0 * std::log10(worst_err) : -300.0;
    if (!bf.taps.allFinite())
        throw_numeric("FIR approximation produced non-finite taps");
    return bf;
}

FirBeamformer realize_fir(const DesignSpec& spec,
                          const std::vector<NarrowbandWeights>& weights) {
    const double bulk = model_bulk_delay_samples(spec.model);
    FirBeamformer bf = fir_approximation(weights, spec.fir_length, spec.grid, bulk);
    bf.response_delay_samples = bf.group_delay_samples - bulk;
    std::ostringstream digest;
    digest << "model=" << model_label(spec.model) << ";gamma_db=" << spec.gamma_db
           << ";L=" << spec.fir_length << ";P=" << spec.grid.size()
           << ";look=" << spec.look.azimuth_deg << "/" << spec.look.elevation_polar_deg
           << ";fs=" << spec.grid.sample_rate_hz << ";band=" << spec.grid.band_low_hz << "-"
           << spec.grid.band_high_hz;
    bf.spec_digest = digest.str();
    return bf;
}

FirBeamformer design_fir(const DesignSpec& spec, const ArrayGeometry& geom) {
    return realize_fir(spec, design_broadband(spec, geom));
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

FirBeamformer FirBeamformer::load(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw_io("cannot open beamformer file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw_io("beamformer parse error in " + path + ": " + e.what());
    }
    FirBeamformer bf;
    try {
        bf.sample_rate_hz = j.at("sample_rate_hz").get<double>();
        const int length = j.at("L").get<int>();
        const auto rows = j.at("taps").get<std::vector<std::vector<double>>>();
        if (rows.empty())
            throw_config("beamformer has no channels");
        bf.taps.resize(static_cast<Eigen::Index>(rows.size()), length);
        for (std::size_t nch = 0; nch < rows.size(); ++nch) {
            if (rows[nch].size() != static_cast<std::size_t>(length))
                throw_config("tap row length mismatch");
            for (int l = 0; l < length; ++l)
                bf.taps(static_cast<Eigen::Index>(nch), l) = rows[nch][static_cast<std::size_t>(l)];
        }
        bf.group_delay_samples = j.at("group_delay_samples").get<double>();
        bf.response_delay_samples = j.value("response_delay_samples", bf.group_delay_samples);
        bf.fit_error_db = j.value("fit_error_db", -300.0);
        bf.spec_digest = j.value("spec_digest", "");
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw_config("invalid beamformer file " + path + ": " + e.what());
    }
    if (!bf.taps.allFinite())
        throw_config("beamformer taps must be finite");
    return bf;
}

void FirBeamformer::save(const std::string& path) const {
    nlohmann::json j;
    j["sample_rate_hz"] = sample_rate_hz;
    j["L"] = length();
    auto& rows = j["taps"] = nlohmann::json::array();
    for (int nch = 0; nch < channels(); ++nch) {
        std::vector<double> row(static_cast<std::size_t>(length()));
        for (int l = 0; l < length(); ++l)
            row[static_cast<std::size_t>(l)] = taps(nch, l);
        rows.push_back(row);
    }
    j["group_delay_samples"] = group_delay_samples;
    j["response_delay_samples"] = response_delay_samples;
    j["fit_error_db"] = fit_error_db;
    j["spec_digest"] = spec_digest;
    std::ofstream out(path);
    if (!out)
        throw_io("cannot write beamformer file: " + path);
    out << j.dump() << '\n';
}

void FirBeamformer::save_wav(const std::string& path) const {
    std::vector<std::vector<double>> chans(static_cast<std::size_t>(channels()));
    for (int nch = 0; nch < channels(); ++nch) {
        chans[static_cast<std::size_t>(nch)].resize(static_cast<std::size_t>(length()));
        for (int l = 0; l < length(); ++l)
            chans[static_cast<std::size_t>(nch)][static_cast<std::size_t>(l)] = taps(nch, l);
    }
    write_wav64(path, chans, sample_rate_hz);
}

} // namespace beamkit
