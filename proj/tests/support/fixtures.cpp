#include "support/fixtures.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace rlms::fixtures {

namespace {

using Rgb = std::array<double, 3>;

Rgb random_color(Rng& rng, double lo, double hi) {
    return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

double smoothstep(double e0, double e1, double x) {
    const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

Rgb mix(const Rgb& a, const Rgb& b, double t) {
    return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

template <typename F>
Tensor<float> paint(std::size_t size, F&& pixel) {
    Tensor<float> t(Shape{1, 3, size, size});
    const std::size_t plane = size * size;
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            const Rgb c = pixel(static_cast<double>(x) / static_cast<double>(size),
                                static_cast<double>(y) / static_cast<double>(size));
            for (std::size_t ch = 0; ch < 3; ++ch) {
                t.data()[ch * plane + y * size + x] = static_cast<float>(std::clamp(c[ch], 0.0, 1.0));
            }
        }
    }
    return t;
}

}  // namespace

Tensor<float> content_image(std::size_t index, std::size_t size) {
    Rng rng = Rng::derive(index, "fixture.content");
    const Rgb top = random_color(rng, 0.3, 0.8);
    const Rgb bottom = random_color(rng, 0.2, 0.7);
    struct Shape2 {
        bool circle;
        double cx, cy, r, w, h;
        Rgb color;
    };
    std::vector<Shape2> shapes;
    for (int i = 0; i < 3; ++i) {
        Shape2 s{};
        s.circle = rng.uniform() < 0.5;
        s.cx = rng.uniform(0.2, 0.8);
        s.cy = rng.uniform(0.2, 0.8);
        s.r = rng.uniform(0.1, 0.25);
        s.w = rng.uniform(0.1, 0.3);
        s.h = rng.uniform(0.1, 0.3);
        s.color = random_color(rng, 0.1, 0.9);
        shapes.push_back(s);
    }
    const double edge = 1.5 / static_cast<double>(size);
    return paint(size, [&](double x, double y) {
        Rgb c = mix(top, bottom, y);
        for (const auto& s : shapes) {
            double inside = 0.0;
            if (s.circle) {
                const double d = std::hypot(x - s.cx, y - s.cy);
                inside = 1.0 - smoothstep(s.r - edge, s.r + edge, d);
            } else {
                const double dx = std::abs(x - s.cx) - s.w / 2;
                const double dy = std::abs(y - s.cy) - s.h / 2;
                inside = 1.0 - smoothstep(-edge, edge, std::max(dx, dy));
            }
            // Soft shading so shapes are not flat.
            const Rgb shaded = mix(s.color, {s.color[0] * 0.7, s.color[1] * 0.7, s.color[2] * 0.7}, y);
            c = mix(c, shaded, inside);
        }
        return c;
    });
}

Tensor<float> style_image(std::size_t family, std::size_t variant, std::size_t size) {
    Rng rng = Rng::derive(family * 100 + variant, "fixture.style");
    const Rgb a = random_color(rng, 0.0, 1.0);
    const Rgb b = random_color(rng, 0.0, 1.0);
    const double n = static_cast<double>(size);
    constexpr double two_pi = 2.0 * std::numbers::pi;
    switch (family % 4) {
        case 0: {  // sharpened diagonal stripes
            const double angle = rng.uniform(0.0, std::numbers::pi);
            const double period = rng.uniform(6.0, 10.0) / n;
            return paint(size, [&](double x, double y) {
                const double u = x * std::cos(angle) + y * std::sin(angle);
                return mix(a, b, smoothstep(-0.3, 0.3, std::sin(two_pi * u / period)));
            });
        }
        case 1: {  // checkerboard
            const double cell = std::floor(rng.uniform(4.0, 8.0)) / n;
            return paint(size, [&](double x, double y) {
                const long cx = static_cast<long>(std::floor(x / cell));
                const long cy = static_cast<long>(std::floor(y / cell));
                return (cx + cy) % 2 == 0 ? a : b;
            });
        }
        case 2: {  // colored blobs on a dark ground
            struct Blob {
                double x, y, s;
                Rgb c;
            };
            std::vector<Blob> blobs;
            for (int i = 0; i < 14; ++i) {
                blobs.push_back({rng.uniform(), rng.uniform(), rng.uniform(0.03, 0.09), random_color(rng, 0.2, 1.0)});
            }
            return paint(size, [&](double x, double y) {
                Rgb c{0.05, 0.05, 0.1};
                for (const auto& bl : blobs) {
                    const double d2 = (x - bl.x) * (x - bl.x) + (y - bl.y) * (y - bl.y);
                    const double g = std::exp(-d2 / (2 * bl.s * bl.s));
                    for (int k = 0; k < 3; ++k) c[k] += g * bl.c[k];
                }
                return c;
            });
        }
        default: {  // concentric rings
            const double cx = rng.uniform(0.3, 0.7);
            const double cy = rng.uniform(0.3, 0.7);
            const double freq = rng.uniform(6.0, 10.0);
            return paint(size, [&](double x, double y) {
                const double r = std::hypot(x - cx, y - cy);
                return mix(a, b, 0.5 + 0.5 * std::sin(two_pi * freq * r));
            });
        }
    }
}

Corpus make_corpus(std::size_t size) {
    Corpus c;
    for (std::size_t i = 0; i < 8; ++i) c.train.content.push_back(content_image(i, size));
    for (std::size_t f = 0; f < 4; ++f) c.train.style.push_back(style_image(f, 0, size));
    c.held_content = {content_image(8, size), content_image(9, size)};
    c.held_style = {style_image(0, 1, size), style_image(3, 1, size)};
    return c;
}

}  // namespace rlms::fixtures
