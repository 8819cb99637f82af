#include <algorithm>
#include <cmath>

#include "ifmlab/dataset.hpp"

namespace ifm {

// Handwritten-style digits rendered from stroke skeletons. Each example draws
// its own jitter (control-point displacement, affine warp, stroke width,
// brightness) from a generator derived from (seed, index), so the set is
// reproducible pixel-for-pixel while classes keep enough intra-class
// variation that shape is a learnable but non-trivial feature.

namespace {

struct P {
    double x, y;
};
using Stroke = std::vector<P>;

// Skeletons in a unit box, y pointing down.
const std::vector<std::vector<Stroke>>& digit_skeletons() {
    static const std::vector<std::vector<Stroke>> table = [] {
        std::vector<std::vector<Stroke>> t(10);
        auto ellipse = [](double cx, double cy, double rx, double ry, int n = 14) {
            Stroke s;
            for (int i = 0; i <= n; ++i) {
                double a = 2.0 * 3.14159265358979 * i / n;
                s.push_back({cx + rx * std::sin(a), cy - ry * std::cos(a)});
            }
            return s;
        };
        t[0] = {ellipse(0.5, 0.5, 0.27, 0.40)};
        t[1] = {{{0.36, 0.26}, {0.54, 0.10}, {0.55, 0.50}, {0.56, 0.90}}};
        t[2] = {{{0.24, 0.30},
                 {0.32, 0.12},
                 {0.52, 0.07},
                 {0.70, 0.14},
                 {0.75, 0.32},
                 {0.60, 0.54},
                 {0.38, 0.72},
                 {0.24, 0.90},
                 {0.52, 0.88},
                 {0.78, 0.88}}};
        t[3] = {{{0.28, 0.14},
                 {0.50, 0.07},
                 {0.70, 0.16},
                 {0.71, 0.34},
                 {0.52, 0.46},
                 {0.71, 0.58},
                 {0.72, 0.78},
                 {0.52, 0.92},
                 {0.28, 0.85}}};
        t[4] = {{{0.58, 0.08}, {0.40, 0.36}, {0.24, 0.62}, {0.52, 0.62}, {0.80, 0.60}},
                {{0.63, 0.34}, {0.64, 0.64}, {0.64, 0.93}}};
        t[5] = {{{0.72, 0.10},
                 {0.48, 0.09},
                 {0.30, 0.10},
                 {0.29, 0.44},
                 {0.52, 0.41},
                 {0.71, 0.53},
                 {0.73, 0.74},
                 {0.55, 0.91},
                 {0.29, 0.86}}};
        t[6] = {{{0.66, 0.08},
                 {0.46, 0.22},
                 {0.32, 0.46},
                 {0.29, 0.68},
                 {0.38, 0.88},
                 {0.58, 0.92},
                 {0.71, 0.78},
                 {0.66, 0.60},
                 {0.46, 0.56},
                 {0.32, 0.66}}};
        t[7] = {{{0.24, 0.11}, {0.50, 0.10}, {0.77, 0.10}, {0.58, 0.47}, {0.42, 0.91}}};
        t[8] = {ellipse(0.50, 0.29, 0.19, 0.20), ellipse(0.50, 0.71, 0.23, 0.22)};
        t[9] = {ellipse(0.47, 0.30, 0.20, 0.21), {{0.67, 0.32}, {0.66, 0.60}, {0.59, 0.92}}};
        return t;
    }();
    return table;
}

// Catmull-Rom interpolation through the jittered control points.
P spline_at(const Stroke& c, double t) {
    const int n = static_cast<int>(c.size());
    double ft = t * (n - 1);
    int i = std::min(static_cast<int>(ft), n - 2);
    double u = ft - i;
    const P& p0 = c[static_cast<size_t>(std::max(i - 1, 0))];
    const P& p1 = c[static_cast<size_t>(i)];
    const P& p2 = c[static_cast<size_t>(i + 1)];
    const P& p3 = c[static_cast<size_t>(std::min(i + 2, n - 1))];
    double u2 = u * u, u3 = u2 * u;
    auto cr = [&](double a, double b, double cc, double d) {
        return 0.5 * ((2 * b) + (-a + cc) * u + (2 * a - 5 * b + 4 * cc - d) * u2 +
                      (-a + 3 * b - 3 * cc + d) * u3);
    };
    return {cr(p0.x, p1.x, p2.x, p3.x), cr(p0.y, p1.y, p2.y, p3.y)};
}

void render_digit(int digit, Rng& rng, uint8_t* out28) {
    std::vector<Stroke> strokes = digit_skeletons()[static_cast<size_t>(digit)];

    // control-point jitter
    for (Stroke& s : strokes)
        for (P& p : s) {
            p.x += rng.normal() * 0.028;
            p.y += rng.normal() * 0.028;
        }
    // shared affine warp
    const double rot = (rng.uniform() * 2 - 1) * 0.20;
    const double shear = (rng.uniform() * 2 - 1) * 0.18;
    const double sx = 0.82 + rng.uniform() * 0.28;
    const double sy = 0.82 + rng.uniform() * 0.28;
    const double tx = (rng.uniform() * 2 - 1) * 0.05;
    const double ty = (rng.uniform() * 2 - 1) * 0.05;
    const double cr = std::cos(rot), sr = std::sin(rot);
    auto warp = [&](P p) {
        double x = (p.x - 0.5) * sx, y = (p.y - 0.5) * sy;
        x += shear * y;
        double xr = cr * x - sr * y, yr = sr * x + cr * y;
        return P{xr + 0.5 + tx, yr + 0.5 + ty};
    };

    const double lo = 4.0, hi = 24.0;  // unit box -> 20 px glyph inside 28 px frame
    const double radius = 0.95 + rng.uniform() * 0.55;
    const double bright = 215.0 + rng.uniform() * 40.0;

    float dist2[28 * 28];
    std::fill(dist2, dist2 + 28 * 28, 1e9f);
    for (const Stroke& s : strokes) {
        const int steps = static_cast<int>(s.size()) * 12;
        for (int k = 0; k <= steps; ++k) {
            P p = warp(spline_at(s, static_cast<double>(k) / steps));
            const double px = lo + p.x * (hi - lo);
            const double py = lo + p.y * (hi - lo);
            const int jlo = std::max(0, static_cast<int>(px - radius - 1.5));
            const int jhi = std::min(27, static_cast<int>(px + radius + 1.5));
            const int ilo = std::max(0, static_cast<int>(py - radius - 1.5));
            const int ihi = std::min(27, static_cast<int>(py + radius + 1.5));
            for (int i = ilo; i <= ihi; ++i)
                for (int j = jlo; j <= jhi; ++j) {
                    const double dx = j - px, dy = i - py;
                    const float d2 = static_cast<float>(dx * dx + dy * dy);
                    float& cur = dist2[i * 28 + j];
                    if (d2 < cur) cur = d2;
                }
        }
    }
    for (int i = 0; i < 28 * 28; ++i) {
        const double d = std::sqrt(static_cast<double>(dist2[i]));
        double a = (radius + 0.55 - d) / 1.1;  // ~1 px anti-aliased edge
        a = std::clamp(a, 0.0, 1.0);
        out28[i] = static_cast<uint8_t>(std::lround(a * bright));
    }
}

}  // namespace

LabeledImageSet make_synthetic_digits(int64_t count, uint64_t seed) {
    LabeledImageSet set;
    set.count = count;
    set.rows = set.cols = 28;
    set.pixels.resize(static_cast<size_t>(count) * 784);
    set.labels.resize(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i) {
        Rng rng(mix_seed(seed, 0xD161, static_cast<uint64_t>(i)));
        const int digit = static_cast<int>(rng.uniform_int(0, 9));
        set.labels[static_cast<size_t>(i)] = static_cast<uint8_t>(digit);
        render_digit(digit, rng, set.pixels.data() + i * 784);
    }
    return set;
}

}  // namespace ifm
