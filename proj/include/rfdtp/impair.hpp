#pragma once

#include <cstdint>
#include <string>

#include "rfdtp/common.hpp"

namespace rfdtp::impair {

/// Per-device transmitter impairments. alpha/phi are the Q-branch gain and
/// phase mismatch relative to the I branch; carrier_offset_hz is this
/// device's contribution to the CFO; dc_offset models LO leakage at the
/// modulator; clock_skew_ppm is the symbol-clock error.
struct TxProfile {
    std::string device_id;
    double alpha = 1.0;
    double phi = 0.0;
    double carrier_offset_hz = 0.0;
    cxd dc_offset = 0.0;
    double clock_skew_ppm = 0.0;
};

/// Receiver-side mismatches, fixed for the lifetime of an experiment.
struct RxProfile {
    double beta = 1.0;
    double psi = 0.0;
    double carrier_offset_hz = 0.0;
};

enum class ChannelKind { ideal, rician };

/// Per-capture conditions: carrier phase offset theta (uniform per capture),
/// total CFO delta_f, target SNR and the channel model.
struct CaptureParams {
    double cpo_rad = 0.0;
    double delta_f_hz = 0.0;
    double snr_db = 0.0;
    ChannelKind channel = ChannelKind::ideal;
    double k_factor = 10.0;
};

void validate(const TxProfile& tx);
void validate(const RxProfile& rx);
void validate(const CaptureParams& cap);

/// Closed-form low-pass-filtered downconversion of the impaired passband
/// signal, evaluated per sample at baseband:
///   xi_hat[n] =  (xi/2) cos(w n Ts - th) - (a/2) xq sin(w n Ts + phi - th)
///   xq_hat[n] = -(b/2) xi sin(w n Ts - psi - th) - (a b/2) xq cos(w n Ts + phi - psi - th)
/// with w = 2 pi delta_f, th the common phase offset, and the analytic output
/// assembled as xi_hat - j xq_hat. Equivalent complex form:
///   x_hat = G1 u e^{j mu} + G2 conj(u) e^{-j mu},
///   u = xi + j a xq e^{j phi}, mu = w n Ts - th,
///   G1 = (1 + b e^{-j psi})/4, G2 = (1 - b e^{j psi})/4,
/// i.e. the usual widely-linear image model; the receiver image weight G2
/// vanishes for an ideal front end (b = 1, psi = 0).
IqFrame impaired_downconvert(const RVec& x_i, const RVec& x_q, const TxProfile& tx,
                             const RxProfile& rx, const CaptureParams& cap, double fs);

IqFrame apply_dc_offset(const IqFrame& frame, cxd offset);

/// Hann-windowed-sinc evaluation of x at continuous position t (samples).
/// Exact at integer t; taps falling outside the signal are treated as zero.
cxd sinc_interp(const CVec& x, double t, int half_width = 32);

/// Band-limited resample at ratio (1 + skew_ppm * 1e-6). Positive skew
/// stretches the waveform (tone frequencies scale by 1/ratio) and the
/// length grows accordingly.
IqFrame apply_clock_skew(const IqFrame& frame, double skew_ppm);

/// Multiplies sample n by exp(j 2 pi f_shift n / fs).
IqFrame apply_frequency_shift(const IqFrame& frame, double f_shift_hz);

/// Adds complex white Gaussian noise of total variance 10^(-snr_db/10) to a
/// unit-RMS frame. Infinite snr_db is a no-op. Throws contract_error when
/// the input RMS deviates from 1 by more than 1%.
IqFrame awgn(const IqFrame& frame, double snr_db, std::uint64_t seed);

/// Single-tap flat Rician fade, constant over the frame:
///   h = sqrt(K/(K+1)) e^{j theta_los} + sqrt(1/(K+1)) g,  g ~ CN(0,1)
/// E[|h|^2] = 1.
IqFrame rician_fade(const IqFrame& frame, double k_factor, std::uint64_t seed);

} // namespace rfdtp::impair
