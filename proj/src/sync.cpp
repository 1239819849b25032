#include "rfdtp/sync.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "rfdtp/impair.hpp"

namespace rfdtp::sync {

namespace {

constexpr int kBurstWindow = 32;
constexpr double kEdgeExpandDb = 3.0;
constexpr double kCfoPeakToMean = 8.0;
// Gardner S-curve slope (error per sample of timing offset) for a unit-power
// QAM signal through the SRRC pair at rolloff 0.35; measured numerically.
constexpr double kTedGain = 0.5;
constexpr int kInterpHalfWidth = 32;

bool is_pow2(Eigen::Index v) { return v > 0 && (v & (v - 1)) == 0; }

Eigen::Index next_pow2(Eigen::Index v) {
    Eigen::Index p = 1;
    while (p < v) p <<= 1;
    return p;
}

std::vector<cxd> fft_padded(const CVec& x, Eigen::Index n) {
    std::vector<cxd> in(static_cast<std::size_t>(n), cxd{0.0, 0.0});
    for (Eigen::Index i = 0; i < x.size(); ++i) in[static_cast<std::size_t>(i)] = x(i);
    std::vector<cxd> out(static_cast<std::size_t>(n));
    Eigen::FFT<double> fft;
    fft.fwd(out, in);
    return out;
}

double wrap_pi(double d) { return d - two_pi * std::round(d / two_pi); }

// Cubic Lagrange interpolation of x at continuous position t, zero-extended
// beyond the signal. Adequate inside the timing loop; the final re-grid uses
// the windowed sinc.
cxd cubic_interp(const CVec& x, double t) {
    const auto m = static_cast<Eigen::Index>(std::floor(t));
    const double mu = t - static_cast<double>(m);
    cxd p[4];
    for (int i = 0; i < 4; ++i) {
        const Eigen::Index k = m - 1 + i;
        p[i] = (k < 0 || k >= x.size()) ? cxd{0.0, 0.0} : x(k);
    }
    const double a = mu + 1.0, b = mu, c = mu - 1.0, d = mu - 2.0;
    return p[0] * (-b * c * d / 6.0) + p[1] * (a * c * d / 2.0) +
           p[2] * (-a * b * d / 2.0) + p[3] * (a * b * c / 6.0);
}

struct ClockFit {
    double a = 0.0;     // strobe position at k = 0 (samples)
    double b = 0.0;     // recovered samples per symbol
    double offset = 0.0; // fractional clock phase at lock
    double ratio = 1.0;  // recovered period / nominal period
};

// Re-sample x on the fitted clock so that strobe k lands on index
// p0 + k*sps with p0 a multiple of sps: symbol instants end up at indices
// = 0 mod sps regardless of where the loop locked.
IqFrame regrid(const IqFrame& frame, int sps, double a, double b) {
    const double p0 =
        static_cast<double>(sps) * std::round(a / static_cast<double>(sps));
    const double step = b / static_cast<double>(sps);
    IqFrame out;
    out.sample_rate_hz = frame.sample_rate_hz;
    out.id = frame.id;
    out.samples.resize(frame.size());
    for (Eigen::Index i = 0; i < frame.size(); ++i) {
        const double tau = a + (static_cast<double>(i) - p0) * step;
        out.samples(i) = impair::sinc_interp(frame.samples, tau, kInterpHalfWidth);
    }
    return out;
}

ClockFit ted_clock_fit(const IqFrame& frame, int sps, const SyncConfig& cfg) {
    validate(cfg);
    if (sps < 4) throw config_error("timing recovery needs sps >= 4");
    const CVec& x = frame.samples;
    const Eigen::Index n = x.size();
    if (n < 8 * sps) throw input_error("frame too short for timing recovery");

    const double power = x.squaredNorm() / static_cast<double>(n);
    if (power <= 0.0) throw degenerate_error("all-zero frame");

    // Proportional-integral gains from the loop bandwidth and damping.
    const double zeta = cfg.ted_damping;
    const double theta_n = cfg.ted_loop_bandwidth / (zeta + 0.25 / zeta);
    const double denom = 1.0 + 2.0 * zeta * theta_n + theta_n * theta_n;
    const double k1 = 4.0 * zeta * theta_n / denom / kTedGain;
    const double k2 = 4.0 * theta_n * theta_n / denom / kTedGain;

    std::vector<double> strobes;
    std::vector<double> errors;
    strobes.reserve(static_cast<std::size_t>(n / sps + 2));
    double t = static_cast<double>(sps); // first strobe one symbol in
    double vi = 0.0;
    const double half = static_cast<double>(sps) / 2.0;
    while (t + 2.0 <= static_cast<double>(n - 1)) {
        strobes.push_back(t);
        const cxd cur = cubic_interp(x, t);
        const cxd prev = cubic_interp(x, t - static_cast<double>(sps));
        const cxd mid = cubic_interp(x, t - half);
        const double e = ((cur - prev) * std::conj(mid)).real() / power;
        errors.push_back(e);
        vi += k2 * e;
        double v = k1 * e + vi;
        const double vmax = 0.2 * static_cast<double>(sps);
        v = std::clamp(v, -vmax, vmax);
        t += static_cast<double>(sps) - v;
    }
    const std::size_t q = strobes.size();
    if (q < 16) throw input_error("too few symbols for timing recovery");

    auto second_moment = [&](std::size_t lo, std::size_t hi) {
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += errors[i] * errors[i];
        return acc / static_cast<double>(hi - lo);
    };
    const double m_mid = second_moment(q / 4, q / 2);
    const double m_last = second_moment(3 * q / 4, q);
    if (m_last > 4.0 * m_mid + 1e-9 && std::sqrt(m_last) > 0.25)
        throw convergence_error("timing loop diverged");

    // Constant-clock model: least-squares line over the post-acquisition
    // strobe times.
    const std::size_t k0 = q / 4;
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, t0 = 0.0, t1 = 0.0;
    for (std::size_t k = k0; k < q; ++k) {
        const auto kk = static_cast<double>(k);
        s0 += 1.0;
        s1 += kk;
        s2 += kk * kk;
        t0 += strobes[k];
        t1 += kk * strobes[k];
    }
    const double det = s0 * s2 - s1 * s1;
    if (std::abs(det) < 1e-9) throw convergence_error("degenerate strobe trace");
    const double b = (s0 * t1 - s1 * t0) / det; // samples per symbol
    const double a = (s2 * t0 - s1 * t1) / det; // strobe time at k = 0
    const double ratio = b / static_cast<double>(sps);
    if (std::abs(ratio - 1.0) > 0.01)
        throw convergence_error("recovered clock ratio implausible");

    TimingFit fit;
    fit.ratio = ratio;
    // Snap the output grid to the symbol raster: strobe k lands on index
    // p0 + k*sps with p0 a multiple of sps, so symbol instants sit at
    // indices = 0 mod sps regardless of where the loop locked.
    const double p0 =
        static_cast<double>(sps) * std::round(a / static_cast<double>(sps));
    fit.offset = a - p0;
    fit.out.sample_rate_hz = frame.sample_rate_hz;
    fit.out.id = frame.id;
    fit.out.samples.resize(n);
    const double step = b / static_cast<double>(sps);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double tau = a + (static_cast<double>(i) - p0) * step;
        fit.out.samples(i) = impair::sinc_interp(x, tau, kInterpHalfWidth);
    }
    return fit;
}

} // namespace

void validate(const SyncConfig& cfg) {
    if (cfg.n_phases < 8) throw config_error("n_phases must be at least 8");
    if (cfg.mth_power < 1 || cfg.mth_power > 8)
        throw config_error("mth_power out of range");
    if (cfg.fft_size != 0 && !is_pow2(cfg.fft_size))
        throw config_error("fft_size must be a power of two");
    if (!(cfg.ted_loop_bandwidth > 0.0 && cfg.ted_loop_bandwidth <= 0.2))
        throw config_error("ted_loop_bandwidth out of range");
    if (!(cfg.ted_damping > 0.0)) throw config_error("ted_damping must be positive");
    if (!(cfg.burst_threshold_db > 0.0))
        throw config_error("burst_threshold_db must be positive");
}

IqFrame remove_dc(const IqFrame& frame) {
    if (frame.size() == 0) throw input_error("empty frame");
    IqFrame out = frame;
    out.samples.array() -= frame.samples.mean();
    return out;
}

IqFrame normalize_rms(const IqFrame& frame) {
    if (frame.size() == 0) throw input_error("empty frame");
    const double r = rms(frame.samples);
    if (r <= 0.0) throw degenerate_error("all-zero frame has no RMS scale");
    IqFrame out = frame;
    out.samples /= r;
    return out;
}

SampleRange detect_burst(const IqFrame& frame, const SyncConfig& cfg) {
    validate(cfg);
    const Eigen::Index n = frame.size();
    const Eigen::Index win = kBurstWindow;
    if (n < 2 * win) throw input_error("frame too short for energy detection");

    const Eigen::Index m = n - win + 1;
    std::vector<double> p(static_cast<std::size_t>(m));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < win; ++i) acc += std::norm(frame.samples(i));
    p[0] = acc;
    for (Eigen::Index k = 1; k < m; ++k) {
        acc += std::norm(frame.samples(k + win - 1)) - std::norm(frame.samples(k - 1));
        p[static_cast<std::size_t>(k)] = acc;
    }

    const double peak = *std::max_element(p.begin(), p.end());
    if (peak <= 0.0) throw detection_error("all-zero frame");
    std::vector<double> sorted = p;
    const auto qi = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 4);
    std::nth_element(sorted.begin(), qi, sorted.end());
    double floor_power = *qi;
    if (floor_power < peak * 1e-6) floor_power = peak * 1e-6;

    const double hi = floor_power * std::pow(10.0, cfg.burst_threshold_db / 10.0);
    const double lo = floor_power * std::pow(10.0, kEdgeExpandDb / 10.0);

    // Merge above-threshold windows into runs (gaps up to 2 windows wide are
    // bridged) and keep the longest.
    Eigen::Index best_s = -1, best_e = -1, run_s = -1, run_e = -1;
    for (Eigen::Index k = 0; k < m; ++k) {
        if (p[static_cast<std::size_t>(k)] < hi) continue;
        if (run_s >= 0 && k - run_e <= 2 * win) {
            run_e = k;
        } else {
            if (run_s >= 0 && run_e - run_s > best_e - best_s) {
                best_s = run_s;
                best_e = run_e;
            }
            run_s = run_e = k;
        }
    }
    if (run_s >= 0 && run_e - run_s > best_e - best_s) {
        best_s = run_s;
        best_e = run_e;
    }
    if (best_s < 0) throw detection_error("no region above the energy threshold");
    if (best_e - best_s + 1 < win) throw detection_error("detected region too short");

    while (best_s > 0 && p[static_cast<std::size_t>(best_s - 1)] >= lo) --best_s;
    while (best_e < m - 1 && p[static_cast<std::size_t>(best_e + 1)] >= lo) ++best_e;

    SampleRange r;
    r.begin = best_s;
    r.end = std::min<Eigen::Index>(n, best_e + win);
    return r;
}

CVec matched_filter(const CVec& x, const RVec& taps) {
    if (x.size() == 0) throw input_error("empty signal");
    if (taps.size() == 0) throw input_error("empty filter");
    CVec out = CVec::Zero(x.size() + taps.size() - 1);
    for (Eigen::Index k = 0; k < x.size(); ++k)
        out.segment(k, taps.size()) += x(k) * taps;
    return out;
}

double coarse_cfo(const IqFrame& frame, int m, double fs, Eigen::Index fft_size) {
    if (m < 1 || m > 8) throw config_error("power order out of range");
    if (!(fs > 0.0)) throw config_error("sample rate must be positive");
    const Eigen::Index n = frame.size();
    if (n < 64) throw input_error("frame too short for spectral estimation");
    if (fft_size == 0) fft_size = next_pow2(8 * n);
    if (!is_pow2(fft_size) || fft_size < n)
        throw config_error("fft_size must be a power of two >= signal length");

    CVec y = frame.samples;
    for (int i = 1; i < m; ++i) y.array() *= frame.samples.array();

    const std::vector<cxd> spec = fft_padded(y, fft_size);

    // Search band |f| <= fs/(4m): wide enough for any plausible offset, narrow
    // enough to exclude the symbol-rate harmonics the nonlinearity regenerates.
    const auto k_lim = static_cast<Eigen::Index>(fft_size / (4 * m));
    double peak = -1.0, mean = 0.0;
    Eigen::Index peak_k = 0, count = 0;
    auto visit = [&](Eigen::Index k) {
        const double mag = std::abs(spec[static_cast<std::size_t>(k)]);
        mean += mag;
        ++count;
        if (mag > peak) {
            peak = mag;
            peak_k = k;
        }
    };
    for (Eigen::Index k = 0; k <= k_lim; ++k) visit(k);
    for (Eigen::Index k = fft_size - k_lim; k < fft_size; ++k) visit(k);
    mean /= static_cast<double>(count);
    if (!(mean > 0.0) || peak < kCfoPeakToMean * mean)
        throw estimation_error("no dominant spectral line for coarse CFO");

    const auto signed_k =
        peak_k <= fft_size / 2 ? peak_k : peak_k - fft_size;
    const double f_line = static_cast<double>(signed_k) * fs / static_cast<double>(fft_size);
    return f_line / static_cast<double>(m);
}

CorrPeak correlate_peak(const CVec& x, const CVec& ref) {
    if (x.size() == 0 || ref.size() == 0) throw input_error("empty correlation input");
    const Eigen::Index n = x.size(), r = ref.size();
    const Eigen::Index L = next_pow2(n + r - 1);
    std::vector<cxd> X = fft_padded(x, L);
    const std::vector<cxd> R = fft_padded(ref, L);
    for (Eigen::Index k = 0; k < L; ++k)
        X[static_cast<std::size_t>(k)] *= std::conj(R[static_cast<std::size_t>(k)]);
    std::vector<cxd> c(static_cast<std::size_t>(L));
    Eigen::FFT<double> fft;
    fft.inv(c, X);

    CorrPeak best;
    double best_mag = -1.0;
    auto visit = [&](Eigen::Index idx, Eigen::Index lag) {
        const double mag = std::abs(c[static_cast<std::size_t>(idx)]);
        if (mag > best_mag) {
            best_mag = mag;
            best.lag = lag;
            best.value = c[static_cast<std::size_t>(idx)];
        }
    };
    for (Eigen::Index lag = 0; lag < n; ++lag) visit(lag, lag);
    for (Eigen::Index lag = -(r - 1); lag < 0; ++lag) visit(L + lag, lag);
    return best;
}

namespace {

double grid_phase_estimate(cxd corr_value, int n_phases) {
    double best = -1.0;
    double theta_best = 0.0;
    for (int k = 0; k < n_phases; ++k) {
        const double theta = -pi + two_pi * static_cast<double>(k) / n_phases;
        const double score = (corr_value * std::polar(1.0, theta)).real();
        if (score > best) {
            best = score;
            theta_best = theta;
        }
    }
    return theta_best;
}

} // namespace

double phase_bank(const IqFrame& frame, const waveform::ReferenceSignal& ref, int n_phases) {
    if (n_phases < 8) throw config_error("n_phases must be at least 8");
    if (ref.samples.size() == 0) throw input_error("empty reference");
    if (frame.size() < ref.samples.size() / 2)
        throw input_error("frame too short against the reference");
    const CorrPeak pk = correlate_peak(frame.samples, ref.samples);
    return grid_phase_estimate(pk.value, n_phases);
}

CpeResult cpe_refine(const IqFrame& frame, const CVec& ref) {
    if (frame.size() != ref.size())
        throw input_error("frame/reference length mismatch");
    const Eigen::Index n = frame.size();
    if (n < 16) throw input_error("too few samples for phase fitting");
    if (!(frame.sample_rate_hz > 0.0))
        throw config_error("frame needs a sample rate");

    // Fit only where the reference has meaningful magnitude; near-null samples
    // carry an essentially uniform phase and would poison the unwrap.
    const double ref_rms = rms(ref);
    if (ref_rms <= 0.0) throw input_error("reference is all zero");
    const double gate = 0.3 * ref_rms;
    std::vector<Eigen::Index> idx;
    idx.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(ref(i)) >= gate) idx.push_back(i);
    if (idx.size() < static_cast<std::size_t>(n) / 4)
        throw input_error("reference mostly below the magnitude gate");

    std::vector<double> raw(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const cxd pr = frame.samples(idx[i]) * std::conj(ref(idx[i]));
        raw[i] = std::atan2(pr.imag(), pr.real());
    }
    std::size_t jumps = 0;
    for (std::size_t i = 1; i < raw.size(); ++i)
        if (std::abs(raw[i] - raw[i - 1]) > pi) ++jumps;
    if (static_cast<double>(jumps) > 0.10 * static_cast<double>(raw.size() - 1))
        throw estimation_error("phase unwrap failure in conjugate-product fit");

    std::vector<double> unwrapped(raw.size());
    unwrapped[0] = raw[0];
    for (std::size_t i = 1; i < raw.size(); ++i)
        unwrapped[i] = unwrapped[i - 1] + wrap_pi(raw[i] - raw[i - 1]);

    double s0 = 0.0, s1 = 0.0, s2 = 0.0, t0 = 0.0, t1 = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double w = std::norm(ref(idx[i]));
        const auto nn = static_cast<double>(idx[i]);
        s0 += w;
        s1 += w * nn;
        s2 += w * nn * nn;
        t0 += w * unwrapped[i];
        t1 += w * nn * unwrapped[i];
    }
    const double det = s0 * s2 - s1 * s1;
    if (std::abs(det) < 1e-12) throw estimation_error("degenerate phase fit");
    const double slope = (s0 * t1 - s1 * t0) / det; // rad per sample
    const double inter = (s2 * t0 - s1 * t1) / det;

    CpeResult res;
    res.cfo_hz = slope * frame.sample_rate_hz / two_pi;
    res.phase_rad = wrap_pi(inter);
    res.corrected = frame;
    for (Eigen::Index i = 0; i < n; ++i)
        res.corrected.samples(i) *=
            std::polar(1.0, -(slope * static_cast<double>(i) + inter));
    return res;
}

IqFrame timing_recover(const IqFrame& frame, int sps, const SyncConfig& cfg) {
    return timing_recover_full(frame, sps, cfg).out;
}

PreprocessResult preprocess(const IqFrame& frame, const waveform::ReferenceSignal& ref,
                            const SyncConfig& cfg) {
    validate(cfg);
    if (ref.samples.size() == 0) throw input_error("empty reference signal");
    if (!(frame.sample_rate_hz > 0.0)) throw config_error("frame needs a sample rate");
    const double fs = frame.sample_rate_hz;
    const int sps = ref.sps;
    const Eigen::Index payload = static_cast<Eigen::Index>(ref.n_symbols) * sps;
    const Eigen::Index tail = ref.samples.size() - payload; // filter transient
    if (tail <= 0) throw contract_error("reference shorter than its payload");

    PreprocessResult out;

    // DC removal and unit-power normalization.
    IqFrame y = normalize_rms(remove_dc(frame));

    // Energy detection, then a working segment with filter-length margins.
    out.report.burst_range = detect_burst(y, cfg);
    const Eigen::Index margin = tail;
    const Eigen::Index s0 = std::max<Eigen::Index>(0, out.report.burst_range.begin - margin);
    const Eigen::Index s1 = std::min<Eigen::Index>(y.size(), out.report.burst_range.end + margin);
    CVec seg = y.samples.segment(s0, s1 - s0);

    // Matched SRRC filter.
    CVec z = matched_filter(seg, ref.filter.taps);

    // Coarse CFO from the m-th power spectrum, then derotation.
    IqFrame zf;
    zf.samples = z;
    zf.sample_rate_hz = fs;
    const Eigen::Index fft_size =
        cfg.fft_size != 0 ? cfg.fft_size : next_pow2(8 * z.size());
    try {
        out.report.coarse_cfo_hz = coarse_cfo(zf, cfg.mth_power, fs, fft_size);
    } catch (const estimation_error& e) {
        throw estimation_error(std::string("coarse CFO stage: ") + e.what());
    }
    const double w_c = two_pi * out.report.coarse_cfo_hz / fs;
    for (Eigen::Index i = 0; i < z.size(); ++i)
        z(i) *= std::polar(1.0, -w_c * static_cast<double>(i));

    // Filter-bank carrier phase over the alignment correlation. The reference
    // is taken through the same matched filter so group delays agree.
    const CVec ref_rx = matched_filter(ref.samples, ref.filter.taps);
    const CorrPeak pk = correlate_peak(z, ref_rx);
    out.report.cpo_rad = grid_phase_estimate(pk.value, cfg.n_phases);
    for (Eigen::Index i = 0; i < z.size(); ++i)
        z(i) *= std::polar(1.0, out.report.cpo_rad);

    // Conjugate-product refinement over the aligned overlap.
    const Eigen::Index ov_lo = std::max<Eigen::Index>(0, pk.lag);
    const Eigen::Index ov_hi = std::min<Eigen::Index>(z.size(), pk.lag + ref_rx.size());
    if (ov_hi - ov_lo < ref_rx.size() / 2)
        throw estimation_error("reference alignment failed");
    IqFrame ov;
    ov.samples = z.segment(ov_lo, ov_hi - ov_lo);
    ov.sample_rate_hz = fs;
    const CpeResult cpe = cpe_refine(ov, ref_rx.segment(ov_lo - pk.lag, ov_hi - ov_lo));
    out.report.residual_cfo_hz = cpe.cfo_hz;
    out.report.residual_cpo_rad = -cpe.phase_rad;
    const double w_r = two_pi * cpe.cfo_hz / fs;
    for (Eigen::Index i = 0; i < z.size(); ++i)
        z(i) *= std::polar(1.0, -(w_r * static_cast<double>(i - ov_lo) + cpe.phase_rad));

    // Payload (with two symbols of margin per side) on the symbol grid: the
    // first symbol instant of the reference sits `tail` samples past its
    // start in the doubly-filtered domain.
    const Eigen::Index guard = 2 * sps;
    const Eigen::Index p0 = pk.lag + tail - guard;
    const Eigen::Index p1 = p0 + payload + 2 * guard;
    if (p0 < 0 || p1 > z.size())
        throw estimation_error("aligned payload exceeds the captured frame");
    IqFrame pay;
    pay.samples = z.segment(p0, p1 - p0);
    pay.sample_rate_hz = fs;

    // Timing recovery and re-gridding, then margin removal.
    const TimingFit fit = timing_recover_full(pay, sps, cfg);
    out.report.timing_offset = fit.offset;
    out.report.clock_ratio = fit.ratio;
    IqFrame trimmed;
    trimmed.samples = fit.out.samples.segment(guard, payload);
    trimmed.sample_rate_hz = fs;
    trimmed.id = frame.id;

    // Final DC removal and unit-power normalization.
    out.s_hat = normalize_rms(remove_dc(trimmed));
    return out;
}

RVec instantaneous_phase(const CVec& s) {
    RVec phi(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        double v = std::atan2(s(i).imag(), s(i).real());
        if (v < 0.0) v += two_pi;
        if (v >= two_pi) v = 0.0;
        phi(i) = v;
    }
    return phi;
}

} // namespace rfdtp::sync
