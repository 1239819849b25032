#include "rfdtp/impair.hpp"

#include <cmath>

#include "rfdtp/rng.hpp"

namespace rfdtp::impair {

void validate(const TxProfile& tx) {
    if (!(tx.alpha > 0.0)) throw config_error("TxProfile: alpha must be > 0");
    if (!(std::abs(tx.phi) < pi / 2)) throw config_error("TxProfile: |phi| must be < pi/2");
    if (!(std::abs(tx.clock_skew_ppm) < 100.0))
        throw config_error("TxProfile: |clock_skew_ppm| must be < 100");
}

void validate(const RxProfile& rx) {
    if (!(rx.beta > 0.0)) throw config_error("RxProfile: beta must be > 0");
}

void validate(const CaptureParams& cap) {
    if (cap.snr_db < -20.0 || cap.snr_db > 20.0) {
        if (!std::isinf(cap.snr_db))
            throw config_error("CaptureParams: snr_db must lie in [-20, 20] or be +inf");
    }
    if (cap.channel == ChannelKind::rician && !(cap.k_factor > 0.0))
        throw config_error("CaptureParams: rician k_factor must be > 0");
}

IqFrame impaired_downconvert(const RVec& x_i, const RVec& x_q, const TxProfile& tx,
                             const RxProfile& rx, const CaptureParams& cap, double fs) {
    if (x_i.size() != x_q.size())
        throw input_error("impaired_downconvert: x_i and x_q lengths differ");
    if (!(fs > 2.0 * std::abs(cap.delta_f_hz)))
        throw config_error("impaired_downconvert: fs must exceed 2*|delta_f|");
    validate(tx);
    validate(rx);

    const double a = tx.alpha;
    const double phi = tx.phi;
    const double b = rx.beta;
    const double psi = rx.psi;
    const double th = cap.cpo_rad;
    const double w = two_pi * cap.delta_f_hz / fs; // radians per sample

    IqFrame out;
    out.sample_rate_hz = fs;
    out.samples.resize(x_i.size());
    for (Eigen::Index n = 0; n < x_i.size(); ++n) {
        const double wn = w * static_cast<double>(n);
        // I branch: y_rx mixed with cos(2*pi*f_crx*t + theta), low-pass part.
        const double xi_hat =
            0.5 * x_i(n) * std::cos(wn - th) - 0.5 * a * x_q(n) * std::sin(wn + phi - th);
        // Q branch: y_rx mixed with beta*sin(2*pi*f_crx*t + psi + theta), low-pass
        // part; the x_i image term carries a minus sign straight from the product
        // identity cos(A)sin(B) = [sin(A+B) - sin(A-B)]/2.
        const double xq_hat = -0.5 * b * x_i(n) * std::sin(wn - psi - th) -
                              0.5 * a * b * x_q(n) * std::cos(wn + phi - psi - th);
        out.samples(n) = cxd(xi_hat, -xq_hat);
    }
    return out;
}

IqFrame apply_dc_offset(const IqFrame& frame, cxd offset) {
    IqFrame out = frame;
    out.samples.array() += offset;
    return out;
}

// Windowed-sinc fractional-delay evaluation of x at continuous position t.
cxd sinc_interp(const CVec& x, double t, int half_width) {
    const auto n0 = static_cast<Eigen::Index>(std::floor(t));
    cxd acc = 0.0;
    const Eigen::Index lo = n0 - half_width + 1;
    const Eigen::Index hi = n0 + half_width;
    for (Eigen::Index k = lo; k <= hi; ++k) {
        if (k < 0 || k >= x.size()) continue;
        const double d = t - static_cast<double>(k);
        double w;
        if (std::abs(d) < 1e-12) {
            w = 1.0;
        } else {
            const double s = std::sin(pi * d) / (pi * d);
            const double u = d / half_width; // |u| < 1 inside the window
            const double hann = 0.5 * (1.0 + std::cos(pi * u));
            w = s * hann;
        }
        acc += x(k) * w;
    }
    return acc;
}

namespace {
constexpr int kInterpHalfWidth = 32;
} // namespace

IqFrame apply_clock_skew(const IqFrame& frame, double skew_ppm) {
    if (!(std::abs(skew_ppm) < 100.0))
        throw config_error("apply_clock_skew: |skew_ppm| must be < 100");
    if (skew_ppm == 0.0) return frame;
    const double ratio = 1.0 + skew_ppm * 1e-6;
    IqFrame out;
    out.sample_rate_hz = frame.sample_rate_hz;
    out.id = frame.id;
    const auto n_out =
        static_cast<Eigen::Index>(std::llround(static_cast<double>(frame.size()) * ratio));
    out.samples.resize(n_out);
    for (Eigen::Index m = 0; m < n_out; ++m)
        out.samples(m) = sinc_interp(frame.samples, static_cast<double>(m) / ratio,
                                     kInterpHalfWidth);
    return out;
}

IqFrame apply_frequency_shift(const IqFrame& frame, double f_shift_hz) {
    if (!(std::abs(f_shift_hz) < frame.sample_rate_hz / 2.0))
        throw config_error("apply_frequency_shift: |f_shift| must be < fs/2");
    IqFrame out = frame;
    const double w = two_pi * f_shift_hz / frame.sample_rate_hz;
    for (Eigen::Index n = 0; n < out.size(); ++n)
        out.samples(n) *= std::polar(1.0, w * static_cast<double>(n));
    return out;
}

IqFrame awgn(const IqFrame& frame, double snr_db, std::uint64_t seed) {
    if (std::isinf(snr_db) && snr_db > 0) return frame;
    const double r = rms(frame.samples);
    if (std::abs(r - 1.0) > 0.01)
        throw contract_error("awgn: input must be RMS-normalized (got RMS " + std::to_string(r) +
                             ")");
    const double sigma2 = std::pow(10.0, -snr_db / 10.0);
    const double scale = std::sqrt(sigma2);
    Rng rng(seed);
    IqFrame out = frame;
    for (Eigen::Index n = 0; n < out.size(); ++n) out.samples(n) += scale * rng.cgaussian();
    return out;
}

IqFrame rician_fade(const IqFrame& frame, double k_factor, std::uint64_t seed) {
    if (!(k_factor > 0.0)) throw config_error("rician_fade: k_factor must be > 0");
    Rng rng(seed);
    const double theta_los = rng.uniform(-pi, pi);
    const cxd g = rng.cgaussian();
    const cxd h = std::sqrt(k_factor / (k_factor + 1.0)) * std::polar(1.0, theta_los) +
                  std::sqrt(1.0 / (k_factor + 1.0)) * g;
    IqFrame out = frame;
    out.samples *= h;
    return out;
}

} // namespace rfdtp::impair
