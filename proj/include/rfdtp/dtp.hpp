#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rfdtp/common.hpp"

namespace rfdtp::dtp {

enum class DtpType { constellation, eye, phase };

std::string to_string(DtpType t);
DtpType dtp_type_from_string(const std::string& s);

/// Histogram geometry for one trace type. Bin lower bounds follow
///   x_c = x_min + |x_max - x_min| (c - 1) / w      (columns, 1-based)
///   y_r = y_min + |y_max - y_min| (r - 1) / h      (rows, 1-based)
/// and every bin is half-open: [lower, next lower). symbols_per_frame = 0
/// renders the whole signal into one image; > 0 selects framed (3D) output.
struct DtpConfig {
    DtpType type = DtpType::constellation;
    int h = 100;
    int w = 100;
    double x_min = -1.6;
    double x_max = 1.6;
    double y_min = -1.6;
    double y_max = 1.6;
    int symbols_per_frame = 0;
};

/// Config with the default axis bounds for the given type:
/// constellation [-1.6, 1.6]^2; eye: time [-1, 1), amplitude [-1.6, 1.6];
/// phase: time [-1, 1), phase [0, 2 pi).
DtpConfig default_config(DtpType type, int h = 100, int w = 100);

void validate(const DtpConfig& cfg);

using GrayImage = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Quantized density grid. channels.size() is 1 for constellation/phase
/// and 2 for eye (I channel then Q channel).
struct DtpImage {
    std::vector<GrayImage> channels;
    DtpConfig config;
    std::string meta_id;

    int h() const { return channels.empty() ? 0 : static_cast<int>(channels[0].rows()); }
    int w() const { return channels.empty() ? 0 : static_cast<int>(channels[0].cols()); }
    int c() const { return static_cast<int>(channels.size()); }
};

/// Framed 3D extension: frames share one config, stacked in time order.
struct DtpStack {
    std::vector<DtpImage> frames;
    DtpConfig config;

    int n_frames() const { return static_cast<int>(frames.size()); }
};

/// Columnar (x, y) point sequence.
struct PointSet {
    std::vector<double> x;
    std::vector<double> y;

    std::size_t size() const { return x.size(); }
};

struct Hist2d {
    Eigen::MatrixXi counts; // h x w, counts(r, c)
    long overflow = 0;      // points outside the bounds (dropped, not clamped)
};

/// Bivariate histogram over the config's bin grid. Out-of-bounds points go
/// to the overflow tally.
Hist2d histogram2d(const PointSet& points, const DtpConfig& cfg);

/// Log-normalization of raw counts into [0, 255]:
///   v == 0            -> 0
///   max == 1, v == 1  -> 255   (degenerate all-equal grid)
///   otherwise         -> ceil(255 * log10(v) / log10(max))
GrayImage log_normalize(const Eigen::MatrixXi& counts);

/// Maps samples to histogram points. Type 1 emits (Re, Im) per sample.
/// Type 2 emits (t, Re) for channel 0 and (t, Im) for channel 1, with
/// t = ((idx mod 2 sps) - sps) / sps in [-1, 1) symbol durations.
PointSet project(const CVec& s, const DtpConfig& cfg, int sps, int channel = 0);

/// Type 3 variant: (t, phase[idx]) per sample. Rejects Type 1 configs.
PointSet project(const RVec& phase, const DtpConfig& cfg, int sps);

/// project -> histogram2d -> log_normalize for each channel. `phi` is only
/// consulted for phase DTPs and may be empty otherwise.
DtpImage make_dtp2d(const CVec& s_hat, const RVec& phi, const DtpConfig& cfg, int sps);

/// Partitions the signal into contiguous frames of symbols_per_frame * sps
/// samples and renders each with make_dtp2d. The payload length must divide
/// evenly; no partial frames.
DtpStack make_dtp3d(const CVec& s_hat, const RVec& phi, const DtpConfig& cfg, int sps);

} // namespace rfdtp::dtp
