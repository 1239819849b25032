#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rfdtp/common.hpp"

namespace rfdtp::waveform {

/// Square-QAM modulation scheme. order 2 is BPSK; phase_offset rotates the
/// whole constellation (pi/4 gives the shifted-BPSK variant).
struct ModScheme {
    int order = 4;
    double phase_offset = 0.0;

    int bits_per_symbol() const;
    /// Rotational symmetry exploited by the m-th power CFO estimator.
    int rotational_symmetry() const { return order == 2 ? 2 : 4; }
    std::string name() const;
};

/// Throws config_error unless order is one of {2, 4, 16, 64}.
void validate(const ModScheme& scheme);

/// Square-root raised-cosine pulse. Taps are symmetric, unit energy,
/// length span*sps + 1.
struct SrrcFilter {
    int sps = 8;
    double rolloff = 0.35;
    int span = 10;
    RVec taps;
};

/// Pseudo-random symbol indices, identical for identical (scheme, n, seed).
std::vector<int> generate_symbols(const ModScheme& scheme, int n, std::uint64_t seed);

/// All `order` constellation points: Gray-coded square QAM at unit average
/// power, rotated by scheme.phase_offset. Index k of the result is the
/// point map_symbols assigns to symbol index k.
CVec constellation(const ModScheme& scheme);

CVec map_symbols(const std::vector<int>& indices, const ModScheme& scheme);

SrrcFilter srrc_design(int sps, double rolloff, int span);

/// Upsample by filter.sps and convolve (full) with the pulse. Output length
/// is n_symbols*sps + span*sps; sample rate symbol_rate_hz * sps.
IqFrame pulse_shape(const CVec& symbols, const SrrcFilter& filter, double symbol_rate_hz);

/// Clean pulse-shaped payload stored receiver-side for synchronization.
/// Carries the pulse it was shaped with so the receiver can build the
/// matched filter.
struct ReferenceSignal {
    CVec samples;
    ModScheme scheme;
    SrrcFilter filter;
    std::uint64_t seed = 0;
    int n_symbols = 0;
    int sps = 8;
    double sample_rate_hz = 0.0;
};

ReferenceSignal make_reference(const ModScheme& scheme, int n_symbols, std::uint64_t seed,
                               const SrrcFilter& filter, double symbol_rate_hz);

} // namespace rfdtp::waveform
