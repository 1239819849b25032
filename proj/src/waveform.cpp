#include "rfdtp/waveform.hpp"

#include <cmath>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "rfdtp/rng.hpp"

namespace rfdtp::waveform {

int ModScheme::bits_per_symbol() const {
    int bits = 0;
    for (int m = order; m > 1; m >>= 1) ++bits;
    return bits;
}

std::string ModScheme::name() const {
    if (order == 2) return phase_offset != 0.0 ? "bpsk45" : "bpsk";
    return std::to_string(order) + "qam";
}

void validate(const ModScheme& scheme) {
    if (scheme.order != 2 && scheme.order != 4 && scheme.order != 16 && scheme.order != 64)
        throw config_error("modulation order must be one of {2, 4, 16, 64}, got " +
                           std::to_string(scheme.order));
}

std::vector<int> generate_symbols(const ModScheme& scheme, int n, std::uint64_t seed) {
    validate(scheme);
    if (n < 1) throw config_error("symbol count must be >= 1");
    Rng rng(seed);
    std::vector<int> out(static_cast<std::size_t>(n));
    const std::uint64_t mask = static_cast<std::uint64_t>(scheme.order) - 1; // order is 2^k
    for (auto& s : out) s = static_cast<int>(rng.next_u64() & mask);
    return out;
}

namespace {

// Inverse Gray code: position p such that p ^ (p >> 1) == g. Placing the
// bit pattern g at axis position gray_decode(g) makes neighbouring
// amplitude levels differ in exactly one bit for every order.
int gray_decode(int g) {
    int p = g;
    for (int shift = 1; (g >> shift) != 0; ++shift) p ^= g >> shift;
    return p;
}

} // namespace

CVec constellation(const ModScheme& scheme) {
    validate(scheme);
    const cxd rot = std::polar(1.0, scheme.phase_offset);
    CVec points(scheme.order);
    if (scheme.order == 2) {
        points(0) = rot;
        points(1) = -rot;
        return points;
    }
    const int half_bits = scheme.bits_per_symbol() / 2;
    const int mask = (1 << half_bits) - 1;
    const double norm = std::sqrt(2.0 * (scheme.order - 1) / 3.0);
    for (int idx = 0; idx < scheme.order; ++idx) {
        const int col = idx & mask;
        const int row = idx >> half_bits;
        const double re = 2.0 * gray_decode(col) - mask;
        const double im = 2.0 * gray_decode(row) - mask;
        points(idx) = rot * cxd(re / norm, im / norm);
    }
    return points;
}

CVec map_symbols(const std::vector<int>& indices, const ModScheme& scheme) {
    const CVec points = constellation(scheme);
    CVec out(static_cast<Eigen::Index>(indices.size()));
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        const int idx = indices[static_cast<std::size_t>(i)];
        if (idx < 0 || idx >= scheme.order)
            throw input_error("symbol index " + std::to_string(idx) + " out of range for order " +
                              std::to_string(scheme.order));
        out(i) = points(idx);
    }
    return out;
}

SrrcFilter srrc_design(int sps, double rolloff, int span) {
    if (sps < 2) throw config_error("srrc_design: sps must be >= 2");
    if (span < 2) throw config_error("srrc_design: span must be >= 2");
    if (!(rolloff > 0.0 && rolloff <= 1.0))
        throw config_error("srrc_design: rolloff must lie in (0, 1]");

    SrrcFilter f;
    f.sps = sps;
    f.rolloff = rolloff;
    f.span = span;
    const int n_taps = span * sps + 1;
    f.taps.resize(n_taps);
    const int center = span * sps / 2;
    const double b = rolloff;
    for (int i = 0; i < n_taps; ++i) {
        const double t = static_cast<double>(i - center) / sps; // in symbol durations
        double v;
        if (std::abs(t) < 1e-9) {
            v = 1.0 - b + 4.0 * b / pi;
        } else if (std::abs(std::abs(t) - 1.0 / (4.0 * b)) < 1e-9) {
            v = b / std::sqrt(2.0) *
                ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * b)) +
                 (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * b)));
        } else {
            const double num = std::sin(pi * t * (1.0 - b)) +
                               4.0 * b * t * std::cos(pi * t * (1.0 + b));
            const double den = pi * t * (1.0 - (4.0 * b * t) * (4.0 * b * t));
            v = num / den;
        }
        f.taps(i) = v;
    }
    f.taps /= f.taps.norm();

    // Truncating the analytic pulse breaks the Nyquist property of the
    // matched pair (the worst self-convolution strobe sits near half the
    // span, ~6e-3 for span 10 at rolloff 0.35). Alternate between flattening
    // the folded power spectrum (the discrete square-root-Nyquist criterion)
    // and re-imposing the finite support; this converges to a same-shape
    // pulse whose pair ISI is a few 1e-4 while moving the taps by less than
    // 1e-3 RMS.
    const int lead = [&] {
        int p = 1;
        while (p < 16 * n_taps / sps + 1) p <<= 1;
        return p;
    }();
    const auto fft_len = static_cast<Eigen::Index>(lead) * sps;
    const Eigen::Index fold = fft_len / sps;
    Eigen::FFT<double> fft;
    std::vector<cxd> time(static_cast<std::size_t>(fft_len));
    std::vector<cxd> spec(static_cast<std::size_t>(fft_len));
    for (int iter = 0; iter < 120; ++iter) {
        std::fill(time.begin(), time.end(), cxd{0.0, 0.0});
        for (int i = 0; i < n_taps; ++i) time[static_cast<std::size_t>(i)] = f.taps(i);
        fft.fwd(spec, time);
        RVec folded = RVec::Zero(fold);
        for (Eigen::Index k = 0; k < fft_len; ++k)
            folded(k % fold) += std::norm(spec[static_cast<std::size_t>(k)]);
        const double target = folded.mean();
        for (Eigen::Index k = 0; k < fft_len; ++k) {
            const double s = folded(k % fold);
            spec[static_cast<std::size_t>(k)] *= std::sqrt(target / std::max(s, 1e-30));
        }
        fft.inv(time, spec);
        for (int i = 0; i < n_taps; ++i) {
            const double a = time[static_cast<std::size_t>(i)].real();
            const double b = time[static_cast<std::size_t>(n_taps - 1 - i)].real();
            f.taps(i) = 0.5 * (a + b); // keep the pulse symmetric
        }
        f.taps /= f.taps.norm();
    }
    return f;
}

IqFrame pulse_shape(const CVec& symbols, const SrrcFilter& filter, double symbol_rate_hz) {
    if (symbols.size() == 0) throw input_error("pulse_shape: empty symbol sequence");
    const int sps = filter.sps;
    const Eigen::Index n_up = symbols.size() * sps;
    const Eigen::Index n_taps = filter.taps.size();
    IqFrame out;
    out.sample_rate_hz = symbol_rate_hz * sps;
    out.samples = CVec::Zero(n_up + n_taps - 1);
    // Sparse full convolution: only every sps-th input sample is nonzero.
    for (Eigen::Index k = 0; k < symbols.size(); ++k) {
        const cxd s = symbols(k);
        out.samples.segment(k * sps, n_taps) += s * filter.taps;
    }
    return out;
}

ReferenceSignal make_reference(const ModScheme& scheme, int n_symbols, std::uint64_t seed,
                               const SrrcFilter& filter, double symbol_rate_hz) {
    ReferenceSignal ref;
    ref.scheme = scheme;
    ref.filter = filter;
    ref.seed = seed;
    ref.n_symbols = n_symbols;
    ref.sps = filter.sps;
    const auto idx = generate_symbols(scheme, n_symbols, seed);
    IqFrame shaped = pulse_shape(map_symbols(idx, scheme), filter, symbol_rate_hz);
    ref.samples = std::move(shaped.samples);
    ref.sample_rate_hz = shaped.sample_rate_hz;
    return ref;
}

} // namespace rfdtp::waveform
