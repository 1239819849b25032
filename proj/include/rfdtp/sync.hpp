#pragma once

#include <cstdint>
#include <string>

#include "rfdtp/common.hpp"
#include "rfdtp/waveform.hpp"

namespace rfdtp::sync {

/// Knobs for the receiver pre-processing chain.
struct SyncConfig {
    int n_phases = 64;                 // CPO grid size over [-pi, pi)
    int mth_power = 4;                 // nonlinearity order for coarse CFO
    Eigen::Index fft_size = 0;         // 0 = next power of two >= 8x length
    double ted_loop_bandwidth = 0.01;  // normalized to the symbol rate
    double ted_damping = 0.707;
    double burst_threshold_db = 10.0;  // energy detector threshold over floor
};

void validate(const SyncConfig& cfg);

struct SampleRange {
    Eigen::Index begin = 0;
    Eigen::Index end = 0; // half-open

    Eigen::Index size() const { return end - begin; }
    bool empty() const { return end <= begin; }
};

/// Per-stage estimates produced by preprocess. The CFO/CPO conventions match
/// the capture parameters: total estimates are coarse + residual sums.
struct SyncReport {
    double coarse_cfo_hz = 0.0;
    double residual_cfo_hz = 0.0;
    double cpo_rad = 0.0;          // filter-bank grid estimate
    double residual_cpo_rad = 0.0; // CPE refinement, same sign convention
    double timing_offset = 0.0;    // fractional-sample clock phase at lock
    double clock_ratio = 1.0;      // recovered samples-per-symbol / nominal
    SampleRange burst_range;

    double total_cfo_hz() const { return coarse_cfo_hz + residual_cfo_hz; }
    double total_cpo_rad() const { return cpo_rad + residual_cpo_rad; }
};

/// Subtracts the complex mean.
IqFrame remove_dc(const IqFrame& frame);

/// Scales to unit RMS. Throws degenerate_error on an all-zero frame.
IqFrame normalize_rms(const IqFrame& frame);

/// Sliding-window energy detector. Finds the dominant region whose windowed
/// power exceeds the noise floor (25th percentile) by burst_threshold_db,
/// then widens it outward down to floor + 3 dB. Throws detection_error when
/// nothing rises above the threshold.
SampleRange detect_burst(const IqFrame& frame, const SyncConfig& cfg);

/// Full convolution with a real tap vector (output length n + taps - 1).
CVec matched_filter(const CVec& x, const RVec& taps);

/// FFT peak of the signal's m-th power. The peak is searched over
/// |f| <= fs/(4m) to skirt symbol-rate harmonics of the nonlinearity, and
/// must exceed 8x the mean in-band magnitude (else estimation_error).
/// Returns the peak frequency divided by m.
double coarse_cfo(const IqFrame& frame, int m, double fs, Eigen::Index fft_size);

struct CorrPeak {
    Eigen::Index lag = 0; // x-index at which ref[0] aligns
    cxd value{0.0, 0.0};
};

/// Peak of the full cross-correlation sum_n x[n + lag] conj(ref[n]).
CorrPeak correlate_peak(const CVec& x, const CVec& ref);

/// Carrier-phase estimate from a bank of phase-rotated matched filters built
/// on the reference waveform: the grid value Theta in [-pi, pi) (spacing
/// 2 pi / n_phases) whose rotated correlator peaks highest. Returns the
/// estimated phase offset in the capture convention (a capture rotated by
/// e^{-j theta} yields an estimate near +theta).
double phase_bank(const IqFrame& frame, const waveform::ReferenceSignal& ref, int n_phases);

struct CpeResult {
    IqFrame corrected;    // frame derotated by the fitted line
    double cfo_hz = 0.0;  // rotation rate of frame relative to ref
    double phase_rad = 0.0; // rotation offset of frame relative to ref
};

/// Conjugate-product estimator: fits a weighted least-squares line to the
/// unwrapped phase of frame[n] conj(ref[n]) (weights |ref[n]|^2). Slope maps
/// to a frequency via the frame's sample rate, intercept to a phase offset.
/// Throws estimation_error when more than 10% of consecutive raw phase
/// differences exceed pi (unwrap failure).
CpeResult cpe_refine(const IqFrame& frame, const CVec& ref);

/// Gardner timing-error detector with a proportional-integral loop, run as
/// two passes: the loop traces symbol strobes, then a least-squares line on
/// the post-acquisition strobes gives a constant clock (phase, ratio) used
/// to re-grid the whole frame by band-limited interpolation so that symbol
/// instants land on multiples of sps. Throws convergence_error when the
/// timing-error variance grows over the last quarter of the trace.
IqFrame timing_recover(const IqFrame& frame, int sps, const SyncConfig& cfg);

struct PreprocessResult {
    IqFrame s_hat;
    SyncReport report;
};

/// Full receiver chain: DC removal / RMS normalization -> energy detection ->
/// matched SRRC filter -> coarse CFO -> filter-bank CPO -> CPE refinement ->
/// TED timing loop -> payload extraction -> DC removal -> RMS normalization.
/// The result is the compensated unit-RMS payload (n_symbols * sps samples,
/// symbol instants at indices = 0 mod sps) in which only the IQ-imbalance
/// structure of the transmitter/receiver pair remains.
PreprocessResult preprocess(const IqFrame& frame, const waveform::ReferenceSignal& ref,
                            const SyncConfig& cfg);

/// Phase sequence atan2(Im, Re) remapped into [0, 2 pi) by adding 2 pi to
/// negative angles. A zero sample maps to 0 by convention.
RVec instantaneous_phase(const CVec& s);

} // namespace rfdtp::sync
