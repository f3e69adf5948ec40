#include "telesim/errors.hpp"
#include "telesim/pupil.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace telesim;

namespace {

std::vector<PupilSample> linear_trace(std::size_t n, SimTime step, double a, double b) {
    std::vector<PupilSample> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].timestamp = static_cast<SimTime>(i) * step;
        out[i].diameter = a + b * static_cast<double>(out[i].timestamp);
    }
    return out;
}

std::vector<double> smooth_signal(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> x(n);
    double v = 0.0, s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        v = 0.9 * v + g(rng);
        s = 0.8 * s + 0.2 * v;
        x[i] = s;
    }
    return x;
}

} // namespace

// ---- blinks ----

TEST_CASE("blink gaps inside the window are rebuilt exactly on a linear signal") {
    auto trace = linear_trace(400, 10, 3.0, 1.0 / 1024.0);
    const auto truth = trace;
    // a missing run whose flanking valid samples are 400, 500 and 600 ms apart
    for (std::size_t i = 21; i < 60; ++i) trace[i].diameter = kMissing;  // 400 ms
    for (std::size_t i = 101; i < 150; ++i) trace[i].diameter = kMissing; // 500 ms
    for (std::size_t i = 201; i < 260; ++i) trace[i].diameter = kMissing; // 600 ms
    const auto out = correct_blinks(trace);
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].diameter == truth[i].diameter);
        CHECK_FALSE(out[i].flagged);
    }
}

TEST_CASE("blink interpolation matches the two-point line") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(2.0, 6.0);
    for (int n = 0; n < 100; ++n) {
        std::vector<PupilSample> t(80);
        for (std::size_t i = 0; i < t.size(); ++i) {
            t[i].timestamp = static_cast<SimTime>(i) * 11;
            t[i].diameter = u(rng);
        }
        const std::size_t a = 10, b = 10 + 37 + rng() % 17; // 407..583 ms apart
        for (std::size_t i = a + 1; i < b; ++i) t[i].diameter = kMissing;
        const auto out = correct_blinks(t);
        for (std::size_t i = a + 1; i < b; ++i) {
            const double expect = t[a].diameter + (t[b].diameter - t[a].diameter) *
                                                      double(t[i].timestamp - t[a].timestamp) /
                                                      double(t[b].timestamp - t[a].timestamp);
            CHECK(out[i].diameter == doctest::Approx(expect).epsilon(1e-13));
        }
    }
}

TEST_CASE("gaps outside the window stay missing and flagged") {
    auto trace = linear_trace(300, 10, 3.0, 0.001);
    for (std::size_t i = 11; i < 49; ++i) trace[i].diameter = kMissing;   // 390 ms
    for (std::size_t i = 101; i < 161; ++i) trace[i].diameter = kMissing; // 610 ms
    for (std::size_t i = 0; i < 5; ++i) trace[i].diameter = kMissing;     // leading run
    trace.back().diameter = kMissing;                                      // trailing run
    const auto out = correct_blinks(trace);
    for (std::size_t i : {0ul, 4ul, 11ul, 48ul, 101ul, 160ul, 299ul}) {
        CHECK_FALSE(out[i].valid());
        CHECK(out[i].flagged);
    }
    CHECK(out[49].valid());
    CHECK_FALSE(out[49].flagged);
}

TEST_CASE("blink correction input errors") {
    auto trace = linear_trace(10, 10, 3.0, 0.0);
    trace[5].timestamp = trace[4].timestamp;
    CHECK_THROWS_AS(correct_blinks(trace), InputError);
    std::vector<PupilSample> empty(5);
    for (std::size_t i = 0; i < 5; ++i) empty[i].timestamp = static_cast<SimTime>(i);
    CHECK_THROWS_AS(correct_blinks(empty), UnusableTraceError);
}

// ---- Hampel ----

TEST_CASE("Hampel filter matches the brute-force oracle") {
    std::mt19937_64 rng(123);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t k : {1ul, 3ul, 7ul, 15ul}) {
        std::vector<double> x(10000);
        for (double& v : x) {
            v = g(rng);
            const double r = u(rng);
            if (r < 0.03) v += 15.0 * g(rng);
            else if (r < 0.05) v = std::numeric_limits<double>::quiet_NaN();
            else if (r < 0.07) v = 0.5; // ties
        }
        const auto got = hampel_filter(x, {k, 3.0});
        const auto want = oracle::hampel(x, k, 3.0);
        std::size_t mismatches = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const bool same = (std::isnan(got[i]) && std::isnan(want[i])) || got[i] == want[i];
            mismatches += !same;
        }
        CHECK(mismatches == 0);
    }
}

TEST_CASE("Hampel replaces an isolated spike and keeps clean data") {
    std::vector<double> x(101, 1.0);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 1.0 + 0.01 * std::sin(0.3 * double(i));
    const auto clean = hampel_filter(x);
    CHECK(clean == x);
    x[50] = 9.0;
    const auto out = hampel_filter(x);
    CHECK(std::abs(out[50] - 1.0) < 0.02);
    CHECK_THROWS_AS(hampel_filter(x, {0, 3.0}), InputError);
}

// ---- luminance ----

TEST_CASE("pixel luminance") {
    CHECK(pixel_luminance(0, 0, 0) == 0.0);
    CHECK(pixel_luminance(255, 255, 255) == doctest::Approx(255.0).epsilon(1e-12));
    CHECK(std::abs(pixel_luminance(255, 0, 0) - 139.436) < 1e-3);
    CHECK(std::abs(pixel_luminance(255, 0, 0) - oracle::luminance(255, 0, 0)) < 1e-9);
}

TEST_CASE("frame luminance is the mean over pixels") {
    RgbFrame black(8, 6);
    CHECK(frame_luminance(black) == 0.0);
    RgbFrame white(8, 6);
    std::fill(white.rgb.begin(), white.rgb.end(), 255);
    CHECK(std::abs(frame_luminance(white) - 255.0) < 1e-9);
    RgbFrame red(8, 6);
    for (std::size_t i = 0; i < red.pixels(); ++i) red.rgb[3 * i] = 255;
    CHECK(std::abs(frame_luminance(red) - 139.436) < 1e-3);
    CHECK(std::abs(frame_luminance(red) - oracle::luminance(255, 0, 0)) < 1e-9);

    std::mt19937_64 rng(1);
    RgbFrame f(64, 48);
    for (auto& c : f.rgb) c = static_cast<std::uint8_t>(rng() % 256);
    double sum = 0.0;
    for (std::size_t i = 0; i < f.pixels(); ++i) sum += oracle::luminance(f.rgb[3 * i], f.rgb[3 * i + 1], f.rgb[3 * i + 2]);
    CHECK(std::abs(frame_luminance(f) - sum / double(f.pixels())) < 1e-9);
}

// ---- light reflex ----

TEST_CASE("light reflex decomposition is recovered") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> noise(0.0, 0.01);
    const double a = 3.0, b = 2.0, c = 0.015;
    std::vector<PupilSample> trace(5400);
    const auto load = smooth_signal(trace.size(), 5);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        trace[i].timestamp = static_cast<SimTime>(i * 11);
        const double t = double(i) / 90.0;
        trace[i].luminance = 120.0 + 90.0 * std::sin(2 * std::numbers::pi * t / 13.0) + ((i / 800) % 2 ? 40.0 : 0.0);
        trace[i].diameter = a + b * std::exp(-c * trace[i].luminance) + 0.05 * load[i] + noise(rng);
    }
    const LightReflexResult r = compensate_light_reflex(trace);
    REQUIRE_FALSE(r.warning);
    double err = 0.0, ref = 0.0;
    for (const PupilSample& s : trace) {
        const double truth = b * std::exp(-c * s.luminance);
        const double est = r.fit.b * std::exp(-r.fit.c * s.luminance);
        err += (est - truth) * (est - truth);
        ref += truth * truth;
    }
    const double rms = std::sqrt(err / ref);
    MESSAGE("light reflex relative RMS error ", rms);
    CHECK(rms < 0.02);
    // the constant stays; only the luminance-driven part is removed
    for (std::size_t i = 0; i < trace.size(); ++i) {
        CHECK(r.samples[i].diameter ==
              doctest::Approx(trace[i].diameter - r.fit.b * std::exp(-r.fit.c * trace[i].luminance)));
    }
}

TEST_CASE("constant luminance passes the trace through with a warning") {
    auto trace = linear_trace(200, 11, 3.0, 0.0001);
    for (auto& s : trace) s.luminance = 80.0;
    const LightReflexResult r = compensate_light_reflex(trace);
    CHECK(r.warning);
    CHECK(r.fit.degenerate);
    for (std::size_t i = 0; i < trace.size(); ++i) CHECK(r.samples[i].diameter == trace[i].diameter);
    CHECK_THROWS_AS(compensate_light_reflex(std::vector<PupilSample>{}), InputError);
}

// ---- baseline ----

TEST_CASE("baseline window of the corrected series averages to zero") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(2.0, 7.0);
    for (int n = 0; n < 50; ++n) {
        std::vector<PupilSample> t(300);
        for (std::size_t i = 0; i < t.size(); ++i) {
            t[i].timestamp = static_cast<SimTime>(i);
            t[i].diameter = u(rng);
            if (i % 17 == 3) t[i].diameter = kMissing;
        }
        const auto out = baseline_correct(t);
        double sum = 0.0;
        std::size_t used = 0;
        for (const auto& s : out) {
            if (used == kBaselineSamples) break;
            if (s.valid()) {
                sum += s.diameter;
                ++used;
            }
        }
        CHECK(std::abs(sum / double(used)) < 1e-12);
    }
    std::vector<PupilSample> short_trace = linear_trace(89, 10, 3.0, 0.0);
    CHECK_THROWS_AS(baseline_correct(short_trace), InsufficientBaselineError);
}

// ---- SAX ----

TEST_CASE("SAX breakpoints split the normal into equal mass") {
    for (int a = 2; a <= 10; ++a) {
        const auto bp = sax_breakpoints(a);
        REQUIRE(bp.size() == static_cast<std::size_t>(a - 1));
        for (int i = 1; i < a; ++i) CHECK(std::abs(bp[i - 1] - oracle::normal_quantile(double(i) / a)) < 1e-9);
    }
    CHECK_THROWS_AS(sax_breakpoints(1), InputError);
}

TEST_CASE("SAX transform symbols") {
    std::vector<double> ramp(40);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = double(i);
    const SaxWord w = sax_transform(ramp, 4, 4);
    CHECK(w.symbols == std::vector<int>{0, 1, 2, 3});
    CHECK(w.segment_starts == std::vector<std::size_t>{0, 10, 20, 30});
    CHECK(w.expand().size() == 40);
    const SaxWord flat = sax_transform(std::vector<double>(10, 2.0), 5, 4);
    for (int s : flat.symbols) CHECK(s == 2); // zero after normalization lands just above the middle breakpoint
    CHECK_THROWS_AS(sax_transform(ramp, 41, 4), InputError);
}

TEST_CASE("SAX alignment recovers a known 10-sample shift") {
    const auto g = smooth_signal(610, 9);
    const std::vector<double> series(g.begin(), g.begin() + 600);
    const std::vector<double> reference(g.begin() + 10, g.begin() + 610);
    const SaxAlignment al = sax_align(series, reference, 300, 6, 40);
    CHECK(al.offset == 10);
    const SaxAlignment back = sax_align(reference, series, 300, 6, 40);
    CHECK(back.offset == -10);
}

TEST_CASE("SAX alignment agrees with cross-correlation on shifted signals") {
    int agree = 0;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const long shift = static_cast<long>(seed % 21) - 10;
        const auto g = smooth_signal(700, seed + 100);
        std::vector<double> series(500), reference(500);
        for (long i = 0; i < 500; ++i) {
            reference[static_cast<std::size_t>(i)] = g[static_cast<std::size_t>(i + 50)];
            series[static_cast<std::size_t>(i)] = g[static_cast<std::size_t>(i + 50 - shift)];
        }
        const long sax = sax_align(series, reference, 250, 6, 20).offset;
        const long xc = oracle::best_lag(series, reference, 20);
        CHECK(xc == shift);
        if (std::abs(sax - xc) <= 2) ++agree;
    }
    CHECK(agree >= 28);
}

TEST_CASE("SAX alignment needs equal lengths") {
    CHECK_THROWS_AS(sax_align(std::vector<double>(10, 1.0), std::vector<double>(11, 1.0), 5, 4, 2), InputError);
}

// ---- aggregation ----

TEST_CASE("dilation aggregate sums the positive frames") {
    CHECK(aggregate_dilation(std::vector<double>{0.1, 0.2, -0.1, 0.3}) == 0.6);
    CHECK(aggregate_dilation(std::vector<double>{}) == 0.0);
    CHECK(aggregate_dilation(std::vector<double>{-1.0, kMissing}) == 0.0);
    std::vector<PupilSample> s(4);
    const double d[4] = {0.1, 0.2, -0.1, 0.3};
    for (std::size_t i = 0; i < 4; ++i) {
        s[i].timestamp = static_cast<SimTime>(i * 10);
        s[i].diameter = d[i];
    }
    CHECK(aggregate_dilation(s, 0, 40) == 0.6);
    CHECK(aggregate_dilation(s, 10, 30) == 0.2);
}

TEST_CASE("adding a dilated frame never lowers the aggregate") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> x;
    double prev = 0.0;
    for (int i = 0; i < 5000; ++i) {
        x.push_back(u(rng));
        const double now = aggregate_dilation(x);
        CHECK(now >= prev);
        prev = now;
    }
}
