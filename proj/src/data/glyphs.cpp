#include "rclab/data/glyphs.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "rclab/num/rng.hpp"

namespace rclab::data {

namespace {

struct Pt {
  double x, y;
};
using Stroke = std::vector<Pt>;

double rad(double deg) { return deg * std::numbers::pi / 180.0; }

// Elliptical arc from a0 to a1 degrees; y grows downward.
Stroke arc(double cx, double cy, double rx, double ry, double a0, double a1, int n = 14) {
  Stroke s;
  for (int i = 0; i <= n; ++i) {
    const double a = rad(a0 + (a1 - a0) * i / n);
    s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return s;
}

std::vector<Stroke> digit_strokes(std::size_t d) {
  switch (d) {
    case 0:
      return {arc(0.5, 0.5, 0.25, 0.37, 0, 360, 20)};
    case 1:
      return {{{0.36, 0.26}, {0.52, 0.12}, {0.52, 0.88}}};
    case 2: {
      Stroke s = arc(0.5, 0.33, 0.22, 0.2, -170, 25);
      s.push_back({0.26, 0.87});
      s.push_back({0.76, 0.87});
      return {s};
    }
    case 3: {
      Stroke s = arc(0.48, 0.31, 0.21, 0.18, -160, 90);
      const Stroke b = arc(0.48, 0.68, 0.24, 0.19, -90, 160);
      s.insert(s.end(), b.begin(), b.end());
      return {s};
    }
    case 4:
      return {{{0.64, 0.88}, {0.64, 0.12}, {0.22, 0.64}, {0.8, 0.64}}};
    case 5: {
      Stroke s{{0.72, 0.13}, {0.34, 0.13}, {0.31, 0.47}};
      const Stroke b = arc(0.5, 0.65, 0.23, 0.21, -140, 150);
      s.insert(s.end(), b.begin(), b.end());
      return {s};
    }
    case 6:
      return {{{0.67, 0.13}, {0.45, 0.28}, {0.31, 0.56}}, arc(0.51, 0.66, 0.21, 0.2, 0, 360, 18)};
    case 7:
      return {{{0.24, 0.13}, {0.76, 0.13}, {0.43, 0.88}}};
    case 8:
      return {arc(0.5, 0.3, 0.18, 0.17, 0, 360, 16), arc(0.5, 0.69, 0.22, 0.2, 0, 360, 18)};
    default:
      return {arc(0.5, 0.34, 0.21, 0.2, 0, 360, 18), {{0.71, 0.36}, {0.6, 0.88}}};
  }
}

double segment_distance(Pt p, Pt a, Pt b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double u = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  const double ex = a.x + u * dx - p.x, ey = a.y + u * dy - p.y;
  return std::sqrt(ex * ex + ey * ey);
}

void render_one(std::size_t digit, std::size_t style, num::Rng& rng, std::size_t size, std::vector<float>& out) {
  const double base_angle = -18.0 + 12.0 * double(style % 4);
  const double base_thick = (style / 4) % 2 == 0 ? 0.055 : 0.095;
  const double base_scale = 1.0 - 0.1 * double((style / 8) % 3);
  const double angle = rad(base_angle + (rng.uniform() - 0.5) * 8.0);
  const double thick = base_thick * (0.9 + 0.2 * rng.uniform());
  const double scale = base_scale * (0.95 + 0.1 * rng.uniform());
  const double tx = (rng.uniform() - 0.5) * 0.08, ty = (rng.uniform() - 0.5) * 0.08;
  const double ca = std::cos(angle), sa = std::sin(angle);

  auto strokes = digit_strokes(digit);
  for (auto& s : strokes) {
    for (auto& p : s) {
      const double jx = p.x - 0.5 + (rng.uniform() - 0.5) * 0.03;
      const double jy = p.y - 0.5 + (rng.uniform() - 0.5) * 0.03;
      p = {0.5 + tx + scale * (ca * jx - sa * jy), 0.5 + ty + scale * (sa * jx + ca * jy)};
    }
  }
  const double pixel = 1.0 / double(size);
  out.assign(size * size, -1.0f);
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const Pt p{(double(c) + 0.5) * pixel, (double(r) + 0.5) * pixel};
      double d = 1e9;
      for (const auto& s : strokes) {
        for (std::size_t i = 0; i + 1 < s.size(); ++i) d = std::min(d, segment_distance(p, s[i], s[i + 1]));
      }
      // Anti-aliased coverage over roughly one pixel of falloff.
      const double cover = std::clamp((thick - d) / pixel + 0.5, 0.0, 1.0);
      out[r * size + c] = static_cast<float>(2.0 * cover - 1.0);
    }
  }
}

}  // namespace

PairedDataset render_glyphs(std::size_t class_count, std::size_t styles_per_class, std::size_t per_cell_count,
                            std::uint64_t seed, const GlyphOptions& options) {
  if (class_count == 0 || styles_per_class == 0 || per_cell_count == 0) {
    throw ArgumentError("render_glyphs: counts must be positive");
  }
  if (class_count > 10) throw ArgumentError("render_glyphs supports at most 10 digit classes");
  if (options.size < 8) throw ArgumentError("render_glyphs: image size must be at least 8");
  PairedDataset d;
  d.item_shape = {1, options.size, options.size};
  d.provenance = Provenance::Real;
  std::vector<float> img;
  // Interleave cells so any prefix covers every condition evenly.
  for (std::size_t i = 0; i < per_cell_count; ++i) {
    for (std::size_t c = 0; c < class_count; ++c) {
      for (std::size_t s = 0; s < styles_per_class; ++s) {
        num::Rng rng(seed, "glyph", {c, s, i});
        render_one(c, s, rng, options.size, img);
        d.push_back(img, Condition::composite(static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(s)));
      }
    }
  }
  return d;
}

}  // namespace rclab::data
