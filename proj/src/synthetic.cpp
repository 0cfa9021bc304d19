#include "memcore/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "memcore/error.hpp"

namespace memcore::harness {

namespace {

struct Point {
    double x;
    double y;
};

using Stroke = std::vector<Point>;

Stroke ellipse(double cx, double cy, double rx, double ry, int n = 16) {
    Stroke s;
    for (int k = 0; k <= n; ++k) {
        const double a = 2.0 * std::numbers::pi * k / n;
        s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
    }
    return s;
}

// Unit-square glyphs, y pointing down.
std::vector<Stroke> glyph(int digit) {
    switch (digit) {
        case 0:
            return {ellipse(0.5, 0.5, 0.26, 0.37)};
        case 1:
            return {{{0.5, 0.12}, {0.5, 0.88}}, {{0.36, 0.26}, {0.5, 0.12}}};
        case 2:
            return {{{0.26, 0.3}, {0.36, 0.15}, {0.6, 0.12}, {0.72, 0.28}, {0.65, 0.45},
                     {0.26, 0.88}, {0.78, 0.88}}};
        case 3:
            return {{{0.28, 0.15}, {0.7, 0.15}, {0.48, 0.45}, {0.7, 0.6}, {0.68, 0.8},
                     {0.5, 0.88}, {0.28, 0.82}}};
        case 4:
            return {{{0.62, 0.88}, {0.62, 0.12}, {0.24, 0.62}, {0.8, 0.62}}};
        case 5:
            return {{{0.72, 0.12}, {0.32, 0.12}, {0.3, 0.45}, {0.6, 0.42}, {0.72, 0.6},
                     {0.66, 0.82}, {0.45, 0.88}, {0.27, 0.8}}};
        case 6:
            return {{{0.66, 0.14}, {0.4, 0.3}, {0.3, 0.6}, {0.35, 0.82}, {0.52, 0.88},
                     {0.68, 0.75}, {0.66, 0.58}, {0.5, 0.5}, {0.32, 0.6}}};
        case 7:
            return {{{0.25, 0.12}, {0.75, 0.12}, {0.42, 0.88}}};
        case 8:
            return {ellipse(0.5, 0.3, 0.18, 0.17), ellipse(0.5, 0.68, 0.22, 0.2)};
        default:
            return {ellipse(0.5, 0.32, 0.2, 0.18), {{0.7, 0.32}, {0.6, 0.88}}};
    }
}

double segment_distance(Point p, Point a, Point b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double ex = p.x - (a.x + t * dx);
    const double ey = p.y - (a.y + t * dy);
    return std::sqrt(ex * ex + ey * ey);
}

}  // namespace

Dataset synthetic_digits(std::size_t count, std::uint64_t seed, const DigitOptions& opts) {
    if (opts.side < 4) {
        throw InvalidInput("harness", "digit side must be at least 4 pixels");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    const std::size_t side = opts.side;

    Dataset ds;
    ds.features = Matrix(count, side * side);
    ds.labels.resize(count);
    for (std::size_t s = 0; s < count; ++s) {
        const int digit = static_cast<int>(s % 10);
        ds.labels[s] = digit;

        const double angle = 0.18 * u(rng);
        const double scale = 0.9 + 0.12 * u(rng);
        const double aspect = 1.0 + 0.1 * u(rng);
        const double shear = 0.15 * u(rng);
        const double tx = 0.06 * u(rng);
        const double ty = 0.06 * u(rng);
        const double width = 0.075 + 0.025 * u(rng);
        const double c = std::cos(angle);
        const double sn = std::sin(angle);

        auto strokes = glyph(digit);
        for (auto& stroke : strokes) {
            for (auto& p : stroke) {
                const double x0 = (p.x - 0.5) * scale * aspect + 0.012 * u(rng);
                const double y0 = (p.y - 0.5) * scale + 0.012 * u(rng);
                const double xs = x0 + shear * y0;
                p = {0.5 + c * xs - sn * y0 + tx, 0.5 + sn * xs + c * y0 + ty};
            }
        }

        auto row = ds.features.row(s);
        for (std::size_t py = 0; py < side; ++py) {
            for (std::size_t px = 0; px < side; ++px) {
                const Point q{(static_cast<double>(px) + 0.5) / static_cast<double>(side),
                              (static_cast<double>(py) + 0.5) / static_cast<double>(side)};
                double d = 1.0;
                for (const auto& stroke : strokes) {
                    for (std::size_t k = 0; k + 1 < stroke.size(); ++k) {
                        d = std::min(d, segment_distance(q, stroke[k], stroke[k + 1]));
                    }
                }
                const double ink =
                    std::clamp(0.5 + (0.5 * width - d) * static_cast<double>(side), 0.0, 1.0);
                row[py * side + px] =
                    std::clamp(ink - 0.5 + opts.pixel_noise * noise(rng), -0.5, 0.5);
            }
        }
    }
    return ds;
}

Matrix downsample(const Matrix& images, std::size_t in_side, std::size_t out_side) {
    if (images.cols() != in_side * in_side || out_side == 0 || out_side > in_side) {
        throw InvalidInput("harness", "downsample: bad image geometry");
    }
    const double r = static_cast<double>(in_side) / static_cast<double>(out_side);
    // overlap[o][i]: length of input pixel i inside output pixel o, in input pixels
    std::vector<std::vector<double>> overlap(out_side, std::vector<double>(in_side, 0.0));
    for (std::size_t o = 0; o < out_side; ++o) {
        const double lo = static_cast<double>(o) * r;
        const double hi = lo + r;
        for (std::size_t i = 0; i < in_side; ++i) {
            const double a = std::max(lo, static_cast<double>(i));
            const double b = std::min(hi, static_cast<double>(i + 1));
            overlap[o][i] = std::max(0.0, b - a);
        }
    }
    Matrix out(images.rows(), out_side * out_side);
    const double area = r * r;
    for (std::size_t s = 0; s < images.rows(); ++s) {
        const auto src = images.row(s);
        auto dst = out.row(s);
        for (std::size_t oy = 0; oy < out_side; ++oy) {
            for (std::size_t ox = 0; ox < out_side; ++ox) {
                double acc = 0.0;
                for (std::size_t iy = 0; iy < in_side; ++iy) {
                    if (overlap[oy][iy] == 0.0) {
                        continue;
                    }
                    for (std::size_t ix = 0; ix < in_side; ++ix) {
                        acc += overlap[oy][iy] * overlap[ox][ix] * src[iy * in_side + ix];
                    }
                }
                dst[oy * out_side + ox] = acc / area;
            }
        }
    }
    return out;
}

Matrix synthetic_traffic(std::size_t count, std::uint64_t seed, MinMaxScaler& scaler,
                         const TrafficOptions& opts) {
    if (opts.features == 0 || opts.latent == 0) {
        throw InvalidInput("harness", "traffic generator needs features and latent > 0");
    }
    std::mt19937_64 shape_rng(opts.structure_seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix mix(opts.features, opts.latent);
    std::vector<double> offset(opts.features);
    for (std::size_t f = 0; f < opts.features; ++f) {
        for (std::size_t l = 0; l < opts.latent; ++l) {
            mix(f, l) = 0.6 * g(shape_rng);
        }
        offset[f] = 0.3 * g(shape_rng);
    }

    std::mt19937_64 rng(seed);
    Matrix raw(count, opts.features);
    std::vector<double> z(opts.latent);
    for (std::size_t s = 0; s < count; ++s) {
        for (auto& v : z) {
            v = g(rng);
        }
        for (std::size_t f = 0; f < opts.features; ++f) {
            double a = offset[f];
            for (std::size_t l = 0; l < opts.latent; ++l) {
                a += mix(f, l) * z[l];
            }
            raw(s, f) = std::tanh(a) + opts.noise * g(rng);
        }
    }
    if (!scaler.fitted()) {
        scaler.fit(raw);
    }
    return scaler.transform(raw);
}

Matrix inject_anomalies(const Matrix& normals, std::size_t features_hit, double sigmas,
                        std::uint64_t seed) {
    const std::size_t n = normals.rows();
    const std::size_t dims = normals.cols();
    if (n < 2 || features_hit == 0 || features_hit > dims) {
        throw InvalidInput("harness", "inject_anomalies: need >= 2 samples and 1..dims features");
    }
    std::vector<double> spread(dims, 0.0);
    for (std::size_t f = 0; f < dims; ++f) {
        double mean = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            mean += normals(s, f);
        }
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            var += (normals(s, f) - mean) * (normals(s, f) - mean);
        }
        spread[f] = std::sqrt(var / static_cast<double>(n - 1));
    }
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> idx(dims);
    Matrix out = normals;
    for (std::size_t s = 0; s < n; ++s) {
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t k = 0; k < features_hit; ++k) {
            const std::size_t f = idx[k];
            // push toward the farther rail so clamping cannot cancel the shift
            const double dir = out(s, f) > 0.0 ? -1.0 : 1.0;
            out(s, f) = std::clamp(out(s, f) + dir * sigmas * spread[f], -0.5, 0.5);
        }
    }
    return out;
}

}  // namespace memcore::harness
