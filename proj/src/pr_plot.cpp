#include "pdfnet/pr_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "pdfnet/image_io.hpp"

namespace pdfnet::metrics {

namespace {

constexpr int kLeft = 64, kTop = 24, kPlot = 480, kBottom = 48, kRight = 24;
constexpr int kW = kLeft + kPlot + kRight;
constexpr int kH = kTop + kPlot + kBottom;

struct Canvas {
    img::Image8 im;

    Canvas() {
        im.h = kH;
        im.w = kW;
        im.channels = 3;
        im.pixels.assign(static_cast<std::size_t>(kH) * kW * 3, 255);
    }

    void put(int x, int y, int r, int g, int b) {
        if (x < 0 || x >= kW || y < 0 || y >= kH) return;
        auto* p = &im.pixels[(static_cast<std::size_t>(y) * kW + x) * 3];
        p[0] = static_cast<std::uint8_t>(r);
        p[1] = static_cast<std::uint8_t>(g);
        p[2] = static_cast<std::uint8_t>(b);
    }

    void block(int x, int y, int r, int g, int b) {
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) put(x + dx, y + dy, r, g, b);
    }

    void line(double x0, double y0, double x1, double y1, int r, int g, int b) {
        const double steps = std::max(std::abs(x1 - x0), std::abs(y1 - y0)) + 1.0;
        const int n = static_cast<int>(std::ceil(steps));
        for (int i = 0; i <= n; ++i) {
            const double t = static_cast<double>(i) / n;
            block(static_cast<int>(std::lround(x0 + t * (x1 - x0))),
                  static_cast<int>(std::lround(y0 + t * (y1 - y0))), r, g, b);
        }
    }
};

// 3x5 glyphs, one row per entry, low 3 bits used.
struct Glyph {
    char ch;
    unsigned char rows[5];
};

constexpr Glyph kFont[] = {
    {'0', {0b111, 0b101, 0b101, 0b101, 0b111}}, {'1', {0b010, 0b110, 0b010, 0b010, 0b111}},
    {'2', {0b111, 0b001, 0b111, 0b100, 0b111}}, {'3', {0b111, 0b001, 0b111, 0b001, 0b111}},
    {'4', {0b101, 0b101, 0b111, 0b001, 0b001}}, {'5', {0b111, 0b100, 0b111, 0b001, 0b111}},
    {'6', {0b111, 0b100, 0b111, 0b101, 0b111}}, {'7', {0b111, 0b001, 0b010, 0b010, 0b010}},
    {'8', {0b111, 0b101, 0b111, 0b101, 0b111}}, {'9', {0b111, 0b101, 0b111, 0b001, 0b111}},
    {'.', {0b000, 0b000, 0b000, 0b000, 0b010}}, {'R', {0b110, 0b101, 0b110, 0b101, 0b101}},
    {'P', {0b110, 0b101, 0b110, 0b100, 0b100}},
};

void draw_text(Canvas& c, int x, int y, const std::string& text) {
    for (char ch : text) {
        for (const Glyph& glyph : kFont) {
            if (glyph.ch != ch) continue;
            for (int gy = 0; gy < 5; ++gy) {
                for (int gx = 0; gx < 3; ++gx) {
                    if (glyph.rows[gy] & (1 << (2 - gx))) {
                        for (int sy = 0; sy < 2; ++sy)
                            for (int sx = 0; sx < 2; ++sx) c.put(x + 2 * gx + sx, y + 2 * gy + sy, 40, 40, 40);
                    }
                }
            }
        }
        x += 8;
    }
}

double to_px(double v) { return v * (kPlot - 1); }

}  // namespace

void render_pr_plot(const std::vector<PRPoint>& curve, const std::string& path) {
    if (curve.empty()) throw std::invalid_argument("render_pr_plot: empty curve");
    Canvas c;

    for (int i = 0; i <= 10; ++i) {
        const double v = i / 10.0;
        const int gx = kLeft + static_cast<int>(to_px(v));
        const int gy = kTop + static_cast<int>(to_px(1.0 - v));
        for (int y = kTop; y < kTop + kPlot; ++y) c.put(gx, y, 225, 225, 225);
        for (int x = kLeft; x < kLeft + kPlot; ++x) c.put(x, gy, 225, 225, 225);
    }
    for (int i = 0; i <= 10; i += 2) {
        char label[8];
        std::snprintf(label, sizeof(label), "%.1f", i / 10.0);
        const int gx = kLeft + static_cast<int>(to_px(i / 10.0));
        const int gy = kTop + static_cast<int>(to_px(1.0 - i / 10.0));
        draw_text(c, gx - 10, kTop + kPlot + 8, label);
        draw_text(c, kLeft - 30, gy - 5, label);
    }
    draw_text(c, kLeft + kPlot / 2 - 4, kTop + kPlot + 26, "R");
    draw_text(c, kLeft - 30, kTop - 16, "P");

    for (int x = kLeft; x < kLeft + kPlot; ++x) {
        c.put(x, kTop, 0, 0, 0);
        c.put(x, kTop + kPlot - 1, 0, 0, 0);
    }
    for (int y = kTop; y < kTop + kPlot; ++y) {
        c.put(kLeft, y, 0, 0, 0);
        c.put(kLeft + kPlot - 1, y, 0, 0, 0);
    }

    for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
        c.line(kLeft + to_px(curve[i].recall), kTop + to_px(1.0 - curve[i].precision),
               kLeft + to_px(curve[i + 1].recall), kTop + to_px(1.0 - curve[i + 1].precision), 32, 80,
               192);
    }
    img::write_png(path, c.im);
}

}  // namespace pdfnet::metrics
