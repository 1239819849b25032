#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "rfdtp/dtp.hpp"
#include "rfdtp/impair.hpp"
#include "rfdtp/rng.hpp"
#include "rfdtp/sync.hpp"
#include "test_util.hpp"

using namespace rfdtp;
using namespace testutil;

namespace {

/// Literal transcription of the binning rule: scan the lower-bound sequence
/// and keep the last bin whose lower bound does not exceed the value. Used as
/// an independent oracle for the fast path in histogram2d.
int naive_locate(double v, double lo, double hi, int n) {
    auto lower = [&](int c) {
        return lo + std::abs(hi - lo) * static_cast<double>(c - 1) / static_cast<double>(n);
    };
    for (int c = 1; c <= n; ++c)
        if (v >= lower(c) && v < lower(c + 1)) return c;
    return 0;
}

dtp::Hist2d naive_histogram(const dtp::PointSet& pts, const dtp::DtpConfig& cfg) {
    dtp::Hist2d out;
    out.counts = Eigen::MatrixXi::Zero(cfg.h, cfg.w);
    for (std::size_t i = 0; i < pts.x.size(); ++i) {
        const int c = naive_locate(pts.x[i], cfg.x_min, cfg.x_max, cfg.w);
        const int r = naive_locate(pts.y[i], cfg.y_min, cfg.y_max, cfg.h);
        if (c == 0 || r == 0)
            ++out.overflow;
        else
            ++out.counts(r - 1, c - 1);
    }
    return out;
}

/// Unit-RMS matched-filtered payload for a given transmitter profile at
/// delta_f = 0, theta = 0 (truth pipeline, no estimators involved).
IqFrame device_payload(const waveform::ReferenceSignal& ref, const impair::TxProfile& tx) {
    RVec xi(ref.samples.size()), xq(ref.samples.size());
    for (Eigen::Index i = 0; i < ref.samples.size(); ++i) {
        xi(i) = ref.samples(i).real();
        xq(i) = ref.samples(i).imag();
    }
    impair::RxProfile rx;
    impair::CaptureParams cap;
    const IqFrame down = impair::impaired_downconvert(xi, xq, tx, rx, cap, kFs);
    const CVec z = sync::matched_filter(down.samples, ref.filter.taps);
    const Eigen::Index payload = static_cast<Eigen::Index>(ref.n_symbols) * ref.sps;
    const Eigen::Index tail = ref.samples.size() - payload;
    IqFrame pay;
    pay.sample_rate_hz = kFs;
    pay.samples = z.segment(tail, payload);
    return sync::normalize_rms(sync::remove_dc(pay));
}

} // namespace

TEST_CASE("corner points: lower-left lands in bin (1,1), upper edge overflows") {
    dtp::DtpConfig cfg = dtp::default_config(dtp::DtpType::constellation, 100, 100);
    dtp::PointSet pts;
    pts.x = {cfg.x_min};
    pts.y = {cfg.y_min};
    auto h = dtp::histogram2d(pts, cfg);
    CHECK(h.counts(0, 0) == 1);
    CHECK(h.counts.sum() == 1);
    CHECK(h.overflow == 0);

    pts.x = {cfg.x_max};
    pts.y = {cfg.y_max};
    h = dtp::histogram2d(pts, cfg);
    CHECK(h.counts.sum() == 0);
    CHECK(h.overflow == 1);

    // Just inside the upper edge falls in the last bin.
    pts.x = {std::nextafter(cfg.x_max, 0.0)};
    pts.y = {std::nextafter(cfg.y_max, 0.0)};
    h = dtp::histogram2d(pts, cfg);
    CHECK(h.counts(cfg.h - 1, cfg.w - 1) == 1);
}

TEST_CASE("histogram2d agrees bin-for-bin with the literal bound-scan oracle") {
    Rng g(404);
    for (int trial = 0; trial < 50; ++trial) {
        dtp::DtpConfig cfg;
        cfg.type = dtp::DtpType::constellation;
        cfg.h = 3 + static_cast<int>(g.uniform(0.0, 38.0));
        cfg.w = 3 + static_cast<int>(g.uniform(0.0, 38.0));
        cfg.x_min = g.uniform(-3.0, 0.0);
        cfg.x_max = cfg.x_min + g.uniform(0.5, 3.0);
        cfg.y_min = g.uniform(-3.0, 0.0);
        cfg.y_max = cfg.y_min + g.uniform(0.5, 3.0);

        dtp::PointSet pts;
        const int n = 2000;
        for (int i = 0; i < n; ++i) {
            // Slightly larger box than the bounds so some points overflow,
            // plus occasional points exactly on bin edges.
            double x = g.uniform(cfg.x_min - 0.2, cfg.x_max + 0.2);
            double y = g.uniform(cfg.y_min - 0.2, cfg.y_max + 0.2);
            if (i % 13 == 0) {
                const int c = 1 + static_cast<int>(g.uniform(0.0, cfg.w));
                x = cfg.x_min + std::abs(cfg.x_max - cfg.x_min) * (c - 1) / cfg.w;
            }
            pts.x.push_back(x);
            pts.y.push_back(y);
        }
        const auto fast = dtp::histogram2d(pts, cfg);
        const auto slow = naive_histogram(pts, cfg);
        CHECK(fast.overflow == slow.overflow);
        CHECK((fast.counts - slow.counts).cwiseAbs().maxCoeff() == 0);
        CHECK(fast.counts.sum() + fast.overflow == n);
    }
}

TEST_CASE("non-finite points land in the overflow tally") {
    dtp::DtpConfig cfg = dtp::default_config(dtp::DtpType::constellation, 10, 10);
    dtp::PointSet pts;
    pts.x = {std::numeric_limits<double>::quiet_NaN(), 0.0};
    pts.y = {0.0, std::numeric_limits<double>::infinity()};
    const auto h = dtp::histogram2d(pts, cfg);
    CHECK(h.overflow == 2);
    CHECK(h.counts.sum() == 0);
}

TEST_CASE("log normalization follows the ceil-log10 law") {
    Eigen::MatrixXi counts(2, 3);
    counts << 0, 1, 10, 100, 55, 100;
    const auto img = dtp::log_normalize(counts);
    CHECK(img(0, 0) == 0);   // empty bin
    CHECK(img(0, 1) == 0);   // log10(1) = 0
    CHECK(img(0, 2) == 128); // ceil(255*1/2)
    CHECK(img(1, 0) == 255); // the max
    CHECK(img(1, 2) == 255);
    const double expected = std::ceil(255.0 * std::log10(55.0) / std::log10(100.0));
    CHECK(img(1, 1) == static_cast<std::uint8_t>(expected));

    // Monotone: larger counts never map to smaller gray values.
    Rng g(7);
    Eigen::MatrixXi rnd(8, 8);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) rnd(r, c) = static_cast<int>(g.uniform(0.0, 5000.0));
    const auto gi = dtp::log_normalize(rnd);
    for (int i = 0; i < 64; ++i)
        for (int j = 0; j < 64; ++j)
            if (rnd(i / 8, i % 8) >= rnd(j / 8, j % 8))
                CHECK(gi(i / 8, i % 8) >= gi(j / 8, j % 8));
}

TEST_CASE("log normalization degenerate grids") {
    Eigen::MatrixXi zero = Eigen::MatrixXi::Zero(4, 4);
    CHECK(dtp::log_normalize(zero).maxCoeff() == 0);

    Eigen::MatrixXi ones = Eigen::MatrixXi::Ones(4, 4);
    const auto img = dtp::log_normalize(ones);
    CHECK(img.minCoeff() == 255); // all-equal grid saturates

    Eigen::MatrixXi mix = Eigen::MatrixXi::Zero(2, 2);
    mix(0, 0) = 1;
    const auto m = dtp::log_normalize(mix);
    CHECK(m(0, 0) == 255);
    CHECK(m(1, 1) == 0);
}

TEST_CASE("projection emits the documented coordinates") {
    dtp::DtpConfig c1 = dtp::default_config(dtp::DtpType::constellation);
    CVec s(1);
    s(0) = cxd(1.0, 1.0);
    auto pts = dtp::project(s, c1, 8);
    REQUIRE(pts.size() == 1);
    CHECK(pts.x[0] == 1.0);
    CHECK(pts.y[0] == 1.0);

    dtp::DtpConfig c2 = dtp::default_config(dtp::DtpType::eye);
    CVec e(17);
    for (Eigen::Index i = 0; i < 17; ++i) e(i) = cxd(static_cast<double>(i), -static_cast<double>(i));
    const auto pi_pts = dtp::project(e, c2, 8, 0);
    const auto pq_pts = dtp::project(e, c2, 8, 1);
    CHECK(pi_pts.x[0] == -1.0);  // idx 0 -> window start
    CHECK(pi_pts.x[8] == 0.0);   // idx sps -> center
    CHECK(pi_pts.x[16] == -1.0); // wraps every 2*sps
    CHECK(pi_pts.y[3] == 3.0);
    CHECK(pq_pts.y[3] == -3.0);

    dtp::DtpConfig c3 = dtp::default_config(dtp::DtpType::phase);
    RVec phi(3);
    phi << 0.0, 1.0, 6.0;
    const auto p3 = dtp::project(phi, c3, 8);
    CHECK(p3.x[1] == -0.875);
    CHECK(p3.y[2] == 6.0);

    CHECK_THROWS_AS(dtp::project(s, c3, 8), config_error);
    CHECK_THROWS_AS(dtp::project(phi, c1, 8), config_error);
    CHECK_THROWS_AS(dtp::project(e, c2, 8, 2), config_error);
}

TEST_CASE("image shape and channel law") {
    const auto ref = make_ref(4, 100, 31);
    IqFrame pay = device_payload(ref, impair::TxProfile{});
    const RVec phi = sync::instantaneous_phase(pay.samples);

    const auto t1 = dtp::make_dtp2d(pay.samples, {}, dtp::default_config(dtp::DtpType::constellation, 64, 48), 8);
    CHECK(t1.c() == 1);
    CHECK(t1.h() == 64);
    CHECK(t1.w() == 48);

    const auto t2 = dtp::make_dtp2d(pay.samples, {}, dtp::default_config(dtp::DtpType::eye, 32, 32), 8);
    CHECK(t2.c() == 2);

    const auto t3 = dtp::make_dtp2d(pay.samples, phi, dtp::default_config(dtp::DtpType::phase, 32, 32), 8);
    CHECK(t3.c() == 1);

    // Non-empty input always produces a saturated maximum after normalization.
    CHECK(t1.channels[0].maxCoeff() == 255);
    CHECK(t2.channels[0].maxCoeff() == 255);
    CHECK(t3.channels[0].maxCoeff() == 255);

    CHECK_THROWS_AS(dtp::make_dtp2d(CVec{}, {}, dtp::default_config(dtp::DtpType::constellation), 8),
                    degenerate_error);
}

TEST_CASE("4-QAM constellation trace concentrates on four quadrant clusters") {
    const auto ref = make_ref(4, 500, 77);
    const IqFrame pay = device_payload(ref, impair::TxProfile{});
    dtp::DtpConfig cfg = dtp::default_config(dtp::DtpType::constellation, 100, 100);
    const auto img = dtp::make_dtp2d(pay.samples, {}, cfg, 8);

    // Mean strobe position per quadrant (the payload starts tail-trimmed, so
    // symbol instants sit at indices = 0 mod sps).
    std::array<cxd, 4> acc{};
    std::array<int, 4> cnt{};
    for (Eigen::Index k = 0; k * 8 < pay.samples.size(); ++k) {
        const cxd v = pay.samples(k * 8);
        const int q = (v.real() >= 0 ? 1 : 0) + (v.imag() >= 0 ? 2 : 0);
        acc[q] += v;
        ++cnt[q];
    }

    // The dominant bins are the cluster bins: every top-4 bin sits on one of
    // the quadrant means, and every quadrant mean is represented among the
    // top-8 (a cluster may straddle a bin edge and occupy two slots).
    std::vector<std::pair<int, std::pair<int, int>>> ranked;
    const auto& ch = img.channels[0];
    for (int r = 0; r < cfg.h; ++r)
        for (int c = 0; c < cfg.w; ++c) ranked.push_back({ch(r, c), {r, c}});
    std::sort(ranked.begin(), ranked.end(), [](auto& a, auto& b) { return a.first > b.first; });

    const double wx = (cfg.x_max - cfg.x_min) / cfg.w;
    const double wy = (cfg.y_max - cfg.y_min) / cfg.h;
    auto near_mean = [&](int rank, const cxd& mean) {
        const double bx = cfg.x_min + (ranked[rank].second.second + 0.5) * wx;
        const double by = cfg.y_min + (ranked[rank].second.first + 0.5) * wy;
        return std::abs(bx - mean.real()) <= 1.5 * wx && std::abs(by - mean.imag()) <= 1.5 * wy;
    };
    for (int k = 0; k < 4; ++k) {
        bool on_cluster = false;
        for (int q = 0; q < 4; ++q) {
            REQUIRE(cnt[q] > 0);
            if (near_mean(k, acc[q] / static_cast<double>(cnt[q]))) on_cluster = true;
        }
        CHECK(on_cluster);
    }
    for (int q = 0; q < 4; ++q) {
        const cxd mean = acc[q] / static_cast<double>(cnt[q]);
        bool matched = false;
        for (int k = 0; k < 8; ++k)
            if (near_mean(k, mean)) matched = true;
        CHECK(matched);
    }
}

TEST_CASE("framed rendering partitions the signal and counts add up") {
    Rng g(88);
    const int sps = 8, spf = 50;
    const Eigen::Index total = 10 * spf * sps; // exactly 10 frames
    CVec s(total);
    for (Eigen::Index i = 0; i < total; ++i) s(i) = 1.5 * g.cgaussian();

    for (auto type : {dtp::DtpType::constellation, dtp::DtpType::eye}) {
        dtp::DtpConfig cfg = dtp::default_config(type, 40, 40);
        cfg.symbols_per_frame = spf;
        const auto stack = dtp::make_dtp3d(s, {}, cfg, sps);
        CHECK(stack.n_frames() == 10);

        dtp::DtpConfig flat = cfg;
        flat.symbols_per_frame = 0;
        const int channels = type == dtp::DtpType::eye ? 2 : 1;
        for (int chan = 0; chan < channels; ++chan) {
            const auto whole = dtp::histogram2d(dtp::project(s, flat, sps, chan), flat);
            Eigen::MatrixXi acc = Eigen::MatrixXi::Zero(cfg.h, cfg.w);
            long ovf = 0;
            for (int f = 0; f < 10; ++f) {
                const CVec seg = s.segment(f * spf * sps, spf * sps);
                const auto hf = dtp::histogram2d(dtp::project(seg, flat, sps, chan), flat);
                acc += hf.counts;
                ovf += hf.overflow;
            }
            CHECK((acc - whole.counts).cwiseAbs().maxCoeff() == 0);
            CHECK(ovf == whole.overflow);
        }

        // Each frame image equals the 2D rendering of its own segment.
        for (int f = 0; f < 10; ++f) {
            const CVec seg = s.segment(f * spf * sps, spf * sps);
            const auto direct = dtp::make_dtp2d(seg, {}, flat, sps);
            for (int chan = 0; chan < channels; ++chan)
                CHECK((stack.frames[f].channels[chan] == direct.channels[chan]));
        }
    }

    // Frame count arithmetic for the phase type as well.
    RVec phi(total);
    for (Eigen::Index i = 0; i < total; ++i) phi(i) = g.uniform(0.0, two_pi);
    dtp::DtpConfig pc = dtp::default_config(dtp::DtpType::phase, 20, 20);
    pc.symbols_per_frame = spf;
    CHECK(dtp::make_dtp3d({}, phi, pc, sps).n_frames() == 10);

    // Non-divisible payloads are rejected.
    CVec bad(total + 5);
    bad.setZero();
    dtp::DtpConfig cfg = dtp::default_config(dtp::DtpType::constellation, 40, 40);
    cfg.symbols_per_frame = spf;
    CHECK_THROWS_AS(dtp::make_dtp3d(bad, {}, cfg, sps), config_error);
    cfg.symbols_per_frame = 0;
    CHECK_THROWS_AS(dtp::make_dtp3d(s, {}, cfg, sps), config_error);
}

TEST_CASE("renderings are deterministic") {
    const auto ref = make_ref(4, 100, 3);
    const IqFrame pay = device_payload(ref, impair::TxProfile{});
    const auto cfg = dtp::default_config(dtp::DtpType::constellation, 50, 50);
    const auto a = dtp::make_dtp2d(pay.samples, {}, cfg, 8);
    const auto b = dtp::make_dtp2d(pay.samples, {}, cfg, 8);
    CHECK((a.channels[0] == b.channels[0]));
}

TEST_CASE("a mismatched transmitter visibly reshapes the trace at SNR 10") {
    const auto ref = make_ref(4, 500, 55);
    impair::TxProfile ideal;
    impair::TxProfile skewed;
    skewed.alpha = 1.1;
    skewed.phi = 0.1;
    IqFrame a = device_payload(ref, ideal);
    IqFrame b = device_payload(ref, skewed);
    // Same noise realization on both, so every differing pixel traces back
    // to the device, not the noise.
    a = impair::awgn(a, 10.0, 999);
    b = impair::awgn(b, 10.0, 999);
    const auto cfg = dtp::default_config(dtp::DtpType::constellation, 100, 100);
    const auto ia = dtp::make_dtp2d(a.samples, {}, cfg, 8);
    const auto ib = dtp::make_dtp2d(b.samples, {}, cfg, 8);
    int differing = 0;
    for (int r = 0; r < 100; ++r)
        for (int c = 0; c < 100; ++c)
            if (ia.channels[0](r, c) != ib.channels[0](r, c)) ++differing;
    CHECK(differing >= 100); // at least 1% of the grid
}
