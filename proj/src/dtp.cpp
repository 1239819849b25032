#include "rfdtp/dtp.hpp"

#include <cmath>
#include <stdexcept>

namespace rfdtp::dtp {

std::string to_string(DtpType t) {
    switch (t) {
        case DtpType::constellation: return "constellation";
        case DtpType::eye: return "eye";
        case DtpType::phase: return "phase";
    }
    throw contract_error("unknown DtpType");
}

DtpType dtp_type_from_string(const std::string& s) {
    if (s == "constellation" || s == "1") return DtpType::constellation;
    if (s == "eye" || s == "2") return DtpType::eye;
    if (s == "phase" || s == "3") return DtpType::phase;
    throw config_error("unknown trace type '" + s + "'");
}

DtpConfig default_config(DtpType type, int h, int w) {
    DtpConfig cfg;
    cfg.type = type;
    cfg.h = h;
    cfg.w = w;
    switch (type) {
        case DtpType::constellation:
            cfg.x_min = -1.6; cfg.x_max = 1.6;
            cfg.y_min = -1.6; cfg.y_max = 1.6;
            break;
        case DtpType::eye:
            cfg.x_min = -1.0; cfg.x_max = 1.0;
            cfg.y_min = -1.6; cfg.y_max = 1.6;
            break;
        case DtpType::phase:
            cfg.x_min = -1.0; cfg.x_max = 1.0;
            cfg.y_min = 0.0; cfg.y_max = two_pi;
            break;
    }
    validate(cfg);
    return cfg;
}

void validate(const DtpConfig& cfg) {
    if (cfg.h < 2 || cfg.w < 2)
        throw config_error("grid must be at least 2x2");
    if (!(cfg.x_min < cfg.x_max) || !(cfg.y_min < cfg.y_max))
        throw config_error("axis bounds must satisfy min < max");
    if (cfg.symbols_per_frame < 0)
        throw config_error("symbols_per_frame must be non-negative");
}

namespace {

// Lower bound of 1-based bin c on [lo, hi) split into n bins. Evaluating the
// formula directly (rather than lo + c*width) keeps binning reproducible
// against a literal transcription of the bound sequence.
inline double bin_lower(double lo, double hi, int n, int c) {
    return lo + std::abs(hi - lo) * static_cast<double>(c - 1) / static_cast<double>(n);
}

// 1-based bin index, or 0 when the value falls outside [lower(1), lower(n+1)).
inline int locate(double v, double lo, double hi, int n) {
    if (!(v >= lo)) return 0;
    const double width = std::abs(hi - lo) / static_cast<double>(n);
    int c = static_cast<int>((v - lo) / width) + 1;
    if (c > n + 1) c = n + 1;
    // Settle ties against the exact bound sequence so the division shortcut
    // can never disagree with the defining inequalities.
    while (c <= n && v >= bin_lower(lo, hi, n, c + 1)) ++c;
    while (c > 1 && v < bin_lower(lo, hi, n, c)) --c;
    if (c > n) return 0;
    return c;
}

inline double time_coordinate(Eigen::Index idx, int sps) {
    const auto window = static_cast<Eigen::Index>(2 * sps);
    return static_cast<double>(idx % window - sps) / static_cast<double>(sps);
}

} // namespace

Hist2d histogram2d(const PointSet& points, const DtpConfig& cfg) {
    validate(cfg);
    if (points.x.size() != points.y.size())
        throw input_error("point set has mismatched x/y lengths");
    Hist2d out;
    out.counts = Eigen::MatrixXi::Zero(cfg.h, cfg.w);
    for (std::size_t i = 0; i < points.x.size(); ++i) {
        const int c = locate(points.x[i], cfg.x_min, cfg.x_max, cfg.w);
        const int r = locate(points.y[i], cfg.y_min, cfg.y_max, cfg.h);
        if (c == 0 || r == 0) {
            ++out.overflow;
            continue;
        }
        ++out.counts(r - 1, c - 1);
    }
    return out;
}

GrayImage log_normalize(const Eigen::MatrixXi& counts) {
    GrayImage img = GrayImage::Zero(counts.rows(), counts.cols());
    const int vmax = counts.maxCoeff();
    if (vmax <= 0) return img;
    const double log_max = std::log10(static_cast<double>(vmax));
    for (Eigen::Index r = 0; r < counts.rows(); ++r) {
        for (Eigen::Index c = 0; c < counts.cols(); ++c) {
            const int v = counts(r, c);
            if (v <= 0) continue;
            if (vmax == 1) {
                img(r, c) = 255;
                continue;
            }
            double q = std::ceil(255.0 * std::log10(static_cast<double>(v)) / log_max);
            if (q < 0.0) q = 0.0;
            if (q > 255.0) q = 255.0;
            img(r, c) = static_cast<std::uint8_t>(q);
        }
    }
    return img;
}

PointSet project(const CVec& s, const DtpConfig& cfg, int sps, int channel) {
    validate(cfg);
    if (cfg.type == DtpType::phase)
        throw config_error("phase traces require the instantaneous-phase overload");
    PointSet pts;
    pts.x.reserve(static_cast<std::size_t>(s.size()));
    pts.y.reserve(static_cast<std::size_t>(s.size()));
    if (cfg.type == DtpType::constellation) {
        for (Eigen::Index n = 0; n < s.size(); ++n) {
            pts.x.push_back(s(n).real());
            pts.y.push_back(s(n).imag());
        }
        return pts;
    }
    if (sps < 1) throw config_error("sps must be positive for time-axis traces");
    if (channel < 0 || channel > 1)
        throw config_error("eye traces have channels 0 (I) and 1 (Q)");
    for (Eigen::Index n = 0; n < s.size(); ++n) {
        pts.x.push_back(time_coordinate(n, sps));
        pts.y.push_back(channel == 0 ? s(n).real() : s(n).imag());
    }
    return pts;
}

PointSet project(const RVec& phase, const DtpConfig& cfg, int sps) {
    validate(cfg);
    if (cfg.type != DtpType::phase)
        throw config_error("real-valued projection is only defined for phase traces");
    if (sps < 1) throw config_error("sps must be positive for time-axis traces");
    PointSet pts;
    pts.x.reserve(static_cast<std::size_t>(phase.size()));
    pts.y.reserve(static_cast<std::size_t>(phase.size()));
    for (Eigen::Index n = 0; n < phase.size(); ++n) {
        pts.x.push_back(time_coordinate(n, sps));
        pts.y.push_back(phase(n));
    }
    return pts;
}

DtpImage make_dtp2d(const CVec& s_hat, const RVec& phi, const DtpConfig& cfg, int sps) {
    validate(cfg);
    if (s_hat.size() == 0 && cfg.type != DtpType::phase)
        throw degenerate_error("empty signal");
    DtpImage img;
    img.config = cfg;
    switch (cfg.type) {
        case DtpType::constellation:
            img.channels.push_back(log_normalize(histogram2d(project(s_hat, cfg, sps, 0), cfg).counts));
            break;
        case DtpType::eye:
            img.channels.push_back(log_normalize(histogram2d(project(s_hat, cfg, sps, 0), cfg).counts));
            img.channels.push_back(log_normalize(histogram2d(project(s_hat, cfg, sps, 1), cfg).counts));
            break;
        case DtpType::phase:
            if (phi.size() == 0) throw degenerate_error("empty phase sequence");
            img.channels.push_back(log_normalize(histogram2d(project(phi, cfg, sps), cfg).counts));
            break;
    }
    return img;
}

DtpStack make_dtp3d(const CVec& s_hat, const RVec& phi, const DtpConfig& cfg, int sps) {
    validate(cfg);
    if (cfg.symbols_per_frame <= 0)
        throw config_error("framed rendering needs symbols_per_frame > 0");
    if (sps < 1) throw config_error("sps must be positive");
    const Eigen::Index total =
        cfg.type == DtpType::phase ? static_cast<Eigen::Index>(phi.size()) : s_hat.size();
    const auto frame_len = static_cast<Eigen::Index>(cfg.symbols_per_frame) * sps;
    if (total == 0) throw degenerate_error("empty signal");
    if (total % frame_len != 0)
        throw config_error("signal length must be a whole number of frames");
    if (cfg.type != DtpType::phase && phi.size() != 0 && phi.size() != s_hat.size())
        throw input_error("phase sequence length does not match signal");

    DtpConfig frame_cfg = cfg;
    frame_cfg.symbols_per_frame = 0;
    DtpStack stack;
    stack.config = cfg;
    const Eigen::Index n_frames = total / frame_len;
    stack.frames.reserve(static_cast<std::size_t>(n_frames));
    for (Eigen::Index f = 0; f < n_frames; ++f) {
        const Eigen::Index off = f * frame_len;
        CVec seg;
        RVec phi_seg;
        if (cfg.type == DtpType::phase) {
            phi_seg = phi.segment(off, frame_len);
        } else {
            seg = s_hat.segment(off, frame_len);
        }
        stack.frames.push_back(make_dtp2d(seg, phi_seg, frame_cfg, sps));
    }
    return stack;
}

} // namespace rfdtp::dtp
