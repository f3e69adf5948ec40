#include "telesim/pupil.hpp"

#include "telesim/errors.hpp"

#include <algorithm>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

namespace telesim {

// ---- blink correction ----------------------------------------------------

std::vector<PupilSample> correct_blinks(std::span<const PupilSample> samples, BlinkWindow window) {
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (samples[i].timestamp <= samples[i - 1].timestamp) {
            throw InputError("pupil timestamps must be strictly increasing (index " + std::to_string(i) + ")");
        }
    }
    if (std::none_of(samples.begin(), samples.end(), [](const PupilSample& s) { return s.valid(); })) {
        throw UnusableTraceError("pupil trace has no valid samples");
    }

    std::vector<PupilSample> out(samples.begin(), samples.end());
    const std::size_t n = out.size();
    std::size_t i = 0;
    while (i < n) {
        if (out[i].valid()) {
            ++i;
            continue;
        }
        std::size_t end = i;
        while (end < n && !out[end].valid()) ++end;
        // run [i, end) is missing
        const bool flanked = i > 0 && end < n;
        bool fill = false;
        if (flanked) {
            const SimTime gap = out[end].timestamp - out[i - 1].timestamp;
            fill = gap >= window.min_duration && gap <= window.max_duration;
        }
        if (fill) {
            const PupilSample& l = out[i - 1];
            const PupilSample& r = out[end];
            const double span = static_cast<double>(r.timestamp - l.timestamp);
            for (std::size_t j = i; j < end; ++j) {
                const double k = static_cast<double>(out[j].timestamp - l.timestamp);
                out[j].diameter = l.diameter + (r.diameter - l.diameter) * k / span;
                out[j].flagged = false;
            }
        } else {
            for (std::size_t j = i; j < end; ++j) out[j].flagged = true;
        }
        i = end;
    }
    return out;
}

// ---- Hampel --------------------------------------------------------------

namespace {

double median_in_place(std::vector<double>& v) {
    const std::size_t m = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
    const double hi = v[m];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m));
    return 0.5 * (lo + hi);
}

double hampel_at(std::span<const double> x, std::size_t i, const HampelOptions& o, std::vector<double>& scratch) {
    const double xi = x[i];
    if (std::isnan(xi)) return xi;
    const std::size_t lo = i >= o.half_window ? i - o.half_window : 0;
    const std::size_t hi = std::min(x.size(), i + o.half_window + 1);
    scratch.clear();
    for (std::size_t j = lo; j < hi; ++j) {
        if (!std::isnan(x[j])) scratch.push_back(x[j]);
    }
    const double med = median_in_place(scratch);
    for (double& v : scratch) v = std::abs(v - med);
    const double mad = median_in_place(scratch);
    return std::abs(xi - med) > o.n_sigma * kMadScale * mad ? med : xi;
}

void check_window(const HampelOptions& o) {
    if (o.half_window < 1) throw InputError("Hampel half-window must be >= 1");
    if (!(o.n_sigma >= 0.0)) throw InputError("Hampel threshold must be >= 0");
}

} // namespace

std::vector<double> hampel_filter(std::span<const double> x, HampelOptions options) {
    check_window(options);
    std::vector<double> out(x.size());
    const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel
    {
        std::vector<double> scratch;
        scratch.reserve(2 * options.half_window + 1);
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            out[static_cast<std::size_t>(i)] = hampel_at(x, static_cast<std::size_t>(i), options, scratch);
        }
    }
    return out;
}

std::vector<double> hampel_filter_serial(std::span<const double> x, HampelOptions options) {
    check_window(options);
    std::vector<double> out(x.size());
    std::vector<double> scratch;
    scratch.reserve(2 * options.half_window + 1);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = hampel_at(x, i, options, scratch);
    return out;
}

std::vector<PupilSample> hampel_filter(std::span<const PupilSample> samples, HampelOptions options) {
    std::vector<double> d(samples.size());
    std::transform(samples.begin(), samples.end(), d.begin(), [](const PupilSample& s) { return s.diameter; });
    const std::vector<double> f = hampel_filter(d, options);
    std::vector<PupilSample> out(samples.begin(), samples.end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i].diameter = f[i];
    return out;
}

// ---- luminance -------------------------------------------------------------

double pixel_luminance(double r, double g, double b) {
    return std::sqrt(0.299 * r * r + 0.587 * g * g + 0.114 * b * b);
}

double frame_luminance(const RgbFrame& frame) {
    const auto n = static_cast<std::ptrdiff_t>(frame.pixels());
    if (n == 0) return 0.0;
    const std::uint8_t* p = frame.rgb.data();
    double sum = 0.0;
#pragma omp parallel for reduction(+ : sum) schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        sum += pixel_luminance(p[3 * i], p[3 * i + 1], p[3 * i + 2]);
    }
    return sum / static_cast<double>(n);
}

double frame_luminance_serial(const RgbFrame& frame) {
    const std::size_t n = frame.pixels();
    if (n == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum += pixel_luminance(frame.rgb[3 * i], frame.rgb[3 * i + 1], frame.rgb[3 * i + 2]);
    }
    return sum / static_cast<double>(n);
}

// ---- light reflex -----------------------------------------------------------

namespace {

struct Points {
    std::vector<double> lum;
    std::vector<double> d;
};

Points valid_points(std::span<const PupilSample> samples) {
    Points p;
    for (const PupilSample& s : samples) {
        if (s.valid()) {
            p.lum.push_back(s.luminance);
            p.d.push_back(s.diameter);
        }
    }
    return p;
}

// linear least squares of d on exp(-c L) for fixed c
LightReflexFit fit_linear(const Points& p, double c) {
    const double n = static_cast<double>(p.d.size());
    double mx = 0, md = 0;
    std::vector<double> x(p.lum.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = std::exp(-c * p.lum[i]);
        mx += x[i];
        md += p.d[i];
    }
    mx /= n;
    md /= n;
    double sxx = 0, sxd = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxd += (x[i] - mx) * (p.d[i] - md);
    }
    LightReflexFit f;
    f.c = c;
    if (sxx <= 1e-300) {
        f.degenerate = true;
        f.a = md;
        return f;
    }
    f.b = sxd / sxx;
    f.a = md - f.b * mx;
    double sse = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = p.d[i] - f.a - f.b * x[i];
        sse += r * r;
    }
    f.sse = sse;
    return f;
}

} // namespace

LightReflexFit fit_light_reflex(std::span<const PupilSample> samples) {
    const Points p = valid_points(samples);
    LightReflexFit degenerate;
    degenerate.degenerate = true;
    if (p.d.size() < 3) return degenerate;
    const auto [lo_it, hi_it] = std::minmax_element(p.lum.begin(), p.lum.end());
    const double range = *hi_it - *lo_it;
    if (!(range > 1e-9)) {
        degenerate.a = std::accumulate(p.d.begin(), p.d.end(), 0.0) / static_cast<double>(p.d.size());
        return degenerate;
    }

    // rate search on a log grid scaled to the luminance range, then golden refinement
    constexpr int kGrid = 120;
    const double c_min = 1e-3 / range;
    const double c_max = 30.0 / range;
    const double ratio = std::log(c_max / c_min);
    auto grid_c = [&](int i) { return c_min * std::exp(ratio * i / (kGrid - 1)); };
    int best = 0;
    double best_sse = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kGrid; ++i) {
        const LightReflexFit f = fit_linear(p, grid_c(i));
        if (!f.degenerate && f.sse < best_sse) {
            best_sse = f.sse;
            best = i;
        }
    }
    double lo = std::log(grid_c(std::max(0, best - 1)));
    double hi = std::log(grid_c(std::min(kGrid - 1, best + 1)));
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - phi * (hi - lo);
    double x2 = lo + phi * (hi - lo);
    double f1 = fit_linear(p, std::exp(x1)).sse;
    double f2 = fit_linear(p, std::exp(x2)).sse;
    for (int it = 0; it < 80; ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = fit_linear(p, std::exp(x1)).sse;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = fit_linear(p, std::exp(x2)).sse;
        }
    }
    LightReflexFit fit = fit_linear(p, std::exp(0.5 * (lo + hi)));
    const LightReflexFit grid_best = fit_linear(p, grid_c(best));
    if (grid_best.sse < fit.sse) fit = grid_best;
    return fit;
}

LightReflexResult compensate_light_reflex(std::span<const PupilSample> samples) {
    if (samples.empty()) throw InputError("light-reflex compensation on an empty trace");
    LightReflexResult result;
    result.fit = fit_light_reflex(samples);
    result.samples.assign(samples.begin(), samples.end());
    if (result.fit.degenerate) {
        result.warning = true;
        return result;
    }
    for (PupilSample& s : result.samples) {
        if (s.valid()) s.diameter -= result.fit.b * std::exp(-result.fit.c * s.luminance);
    }
    return result;
}

// ---- baseline ---------------------------------------------------------------

std::vector<PupilSample> baseline_correct(std::span<const PupilSample> samples, std::size_t count) {
    double sum = 0.0;
    std::size_t used = 0;
    for (const PupilSample& s : samples) {
        if (used == count) break;
        if (s.valid()) {
            sum += s.diameter;
            ++used;
        }
    }
    if (count == 0 || used < count) {
        throw InsufficientBaselineError("baseline needs " + std::to_string(count) + " valid samples, trace has " +
                                        std::to_string(used));
    }
    const double base = sum / static_cast<double>(count);
    std::vector<PupilSample> out(samples.begin(), samples.end());
    for (PupilSample& s : out) {
        if (s.valid()) s.diameter -= base;
    }
    return out;
}

// ---- SAX --------------------------------------------------------------------

std::vector<double> sax_breakpoints(int alphabet_size) {
    if (alphabet_size < 2) throw InputError("SAX alphabet needs at least 2 symbols");
    const boost::math::normal_distribution<double> n01;
    std::vector<double> bp;
    for (int i = 1; i < alphabet_size; ++i) {
        bp.push_back(boost::math::quantile(n01, static_cast<double>(i) / alphabet_size));
    }
    return bp;
}

std::vector<int> SaxWord::expand() const {
    std::vector<int> out(length);
    for (std::size_t s = 0; s < symbols.size(); ++s) {
        const std::size_t end = s + 1 < segment_starts.size() ? segment_starts[s + 1] : length;
        std::fill(out.begin() + static_cast<std::ptrdiff_t>(segment_starts[s]),
                  out.begin() + static_cast<std::ptrdiff_t>(end), symbols[s]);
    }
    return out;
}

SaxWord sax_transform(std::span<const double> series, std::size_t word_length, int alphabet_size) {
    if (word_length == 0) throw InputError("SAX word length must be >= 1");
    if (series.size() < word_length) {
        throw InputError("series of " + std::to_string(series.size()) + " samples is shorter than word length " +
                         std::to_string(word_length));
    }
    const std::vector<double> bp = sax_breakpoints(alphabet_size);

    double mean = 0.0;
    std::size_t n_valid = 0;
    for (double v : series) {
        if (!std::isnan(v)) {
            mean += v;
            ++n_valid;
        }
    }
    mean = n_valid ? mean / static_cast<double>(n_valid) : 0.0;
    double var = 0.0;
    for (double v : series) {
        if (!std::isnan(v)) var += (v - mean) * (v - mean);
    }
    const double sd = n_valid ? std::sqrt(var / static_cast<double>(n_valid)) : 0.0;

    SaxWord word;
    word.length = series.size();
    word.alphabet_size = alphabet_size;
    const std::size_t n = series.size();
    for (std::size_t s = 0; s < word_length; ++s) {
        const std::size_t begin = s * n / word_length;
        const std::size_t end = (s + 1) * n / word_length;
        double acc = 0.0;
        std::size_t cnt = 0;
        for (std::size_t i = begin; i < end; ++i) {
            if (std::isnan(series[i])) continue;
            acc += sd > 1e-12 ? (series[i] - mean) / sd : 0.0;
            ++cnt;
        }
        const double paa = cnt ? acc / static_cast<double>(cnt) : 0.0;
        const int symbol = static_cast<int>(std::upper_bound(bp.begin(), bp.end(), paa) - bp.begin());
        word.segment_starts.push_back(begin);
        word.symbols.push_back(symbol);
    }
    return word;
}

SaxAlignment sax_align(std::span<const double> series, std::span<const double> reference, std::size_t word_length,
                       int alphabet_size, std::size_t max_lag) {
    if (series.size() != reference.size()) throw InputError("SAX alignment needs equal-length sequences");
    SaxAlignment out;
    out.series = sax_transform(series, word_length, alphabet_size);
    out.reference = sax_transform(reference, word_length, alphabet_size);
    const std::vector<int> s = out.series.expand();
    const std::vector<int> r = out.reference.expand();
    const double centre = 0.5 * (alphabet_size - 1);
    const auto n = static_cast<long>(s.size());
    const long lag_limit = std::min<long>(static_cast<long>(max_lag), n - 1);

    bool have = false;
    for (long mag = 0; mag <= lag_limit; ++mag) {
        for (long lag : {-mag, mag}) {
            if (mag == 0 && lag != 0) continue;
            double acc = 0.0;
            long overlap = 0;
            for (long i = std::max(0L, -lag); i < n && i + lag < n; ++i) {
                acc += (s[static_cast<std::size_t>(i + lag)] - centre) * (r[static_cast<std::size_t>(i)] - centre);
                ++overlap;
            }
            const double score = overlap ? acc / static_cast<double>(overlap) : 0.0;
            if (!have || score > out.score) {
                out.score = score;
                out.offset = lag;
                have = true;
            }
            if (mag == 0) break;
        }
    }
    return out;
}

// ---- aggregation --------------------------------------------------------------

namespace {

// Neumaier compensated sum of the positive terms.
class PositiveSum {
  public:
    void add(double v) {
        if (!(v > 0.0)) return;
        const double t = sum_ + v;
        comp_ += std::abs(sum_) >= v ? (sum_ - t) + v : (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

} // namespace

double aggregate_dilation(std::span<const double> dilation) {
    PositiveSum sum;
    for (double d : dilation) sum.add(d);
    return sum.value();
}

double aggregate_dilation(std::span<const PupilSample> samples, SimTime start, SimTime end) {
    PositiveSum sum;
    for (const PupilSample& s : samples) {
        if (s.timestamp >= start && s.timestamp < end) sum.add(s.diameter);
    }
    return sum.value();
}

} // namespace telesim
