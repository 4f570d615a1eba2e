#include "aberrex/charts.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "aberrex/error.hpp"

namespace aberrex {
namespace {


using Rgb = std::array<float, 3>;

Rgb random_color(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dark(0.05, 0.2);
  std::uniform_real_distribution<double> light(0.65, 0.95);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> tint(-0.35, 0.35);
  const double g = unit(rng) < 0.5 ? dark(rng) : light(rng);
  Rgb c{static_cast<float>(g), static_cast<float>(g), static_cast<float>(g)};
  if (unit(rng) < 0.25)
    for (auto& v : c) v = static_cast<float>(std::clamp(g * (1.0 + tint(rng)), 0.05, 0.95));
  return c;
}

// Point-in-shape test in pixel coordinates.
struct Shape {
  enum class Type { polygon, ellipse, bar } type;
  std::vector<std::array<double, 2>> vertices;  // polygon
  double cx = 0, cy = 0, a = 0, b = 0, angle = 0;  // ellipse and bar
  Rgb color{};
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // bounding box, inclusive-exclusive

  bool contains(double x, double y) const {
    switch (type) {
      case Type::polygon: {
        bool inside = false;
        const std::size_t n = vertices.size();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
          const auto& p = vertices[i];
          const auto& q = vertices[j];
          if ((p[1] > y) != (q[1] > y) &&
              x < (q[0] - p[0]) * (y - p[1]) / (q[1] - p[1]) + p[0])
            inside = !inside;
        }
        return inside;
      }
      case Type::ellipse:
      case Type::bar: {
        const double c = std::cos(angle), s = std::sin(angle);
        const double u = c * (x - cx) + s * (y - cy);
        const double v = -s * (x - cx) + c * (y - cy);
        if (type == Type::ellipse) return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
        return std::abs(u) <= a && std::abs(v) <= b;
      }
    }
    return false;
  }
};

Shape random_shape(std::mt19937_64& rng, int height, int width) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Shape s;
  s.color = random_color(rng);
  const double cx = unit(rng) * width;
  const double cy = unit(rng) * height;
  const double size = 6.0 + 30.0 * unit(rng);
  const double kind = unit(rng);
  const double extent = 1.5 * size;
  if (kind < 0.5) {
    s.type = Shape::Type::polygon;
    const int n = 3 + static_cast<int>(unit(rng) * 4.0);
    const double start = unit(rng) * 2.0 * std::numbers::pi;
    for (int i = 0; i < n; ++i) {
      const double t = start + 2.0 * std::numbers::pi * (i + 0.3 * unit(rng)) / n;
      const double r = size * (0.5 + 0.5 * unit(rng));
      s.vertices.push_back({cx + r * std::cos(t), cy + r * std::sin(t)});
    }
  } else {
    s.type = kind < 0.8 ? Shape::Type::ellipse : Shape::Type::bar;
    s.cx = cx;
    s.cy = cy;
    s.a = size;
    s.b = size * (s.type == Shape::Type::bar ? 0.15 + 0.3 * unit(rng) : 0.3 + 0.7 * unit(rng));
    s.angle = unit(rng) * std::numbers::pi;
  }
  s.x0 = std::max(0, static_cast<int>(std::floor(cx - extent)) - 1);
  s.y0 = std::max(0, static_cast<int>(std::floor(cy - extent)) - 1);
  s.x1 = std::min(width, static_cast<int>(std::ceil(cx + extent)) + 2);
  s.y1 = std::min(height, static_cast<int>(std::ceil(cy + extent)) + 2);
  return s;
}

void paint(PlanarImage& img, const Shape& s, int ss) {
#pragma omp parallel for schedule(static)
  for (int y = s.y0; y < s.y1; ++y)
    for (int x = s.x0; x < s.x1; ++x) {
      int hits = 0;
      for (int j = 0; j < ss; ++j)
        for (int i = 0; i < ss; ++i)
          hits += s.contains(x + (i + 0.5) / ss, y + (j + 0.5) / ss);
      if (!hits) continue;
      const float cover = static_cast<float>(hits) / (ss * ss);
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = (1.0f - cover) * img.at(c, y, x) + cover * s.color[c];
    }
}

PlanarImage siemens_star(int height, int width, std::mt19937_64& rng, int ss) {
  std::uniform_int_distribution<int> spokes_dist(12, 36);
  const int spokes = spokes_dist(rng);
  const Rgb dark = {0.08f, 0.08f, 0.08f};
  const Rgb light = {0.85f, 0.85f, 0.85f};
  const double cx = width / 2.0;
  const double cy = height / 2.0;
  PlanarImage img(height, width, 3);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      int hits = 0;
      for (int j = 0; j < ss; ++j)
        for (int i = 0; i < ss; ++i) {
          const double px = x + (i + 0.5) / ss - cx;
          const double py = y + (j + 0.5) / ss - cy;
          const double t = std::atan2(py, px) + std::numbers::pi;
          hits += static_cast<int>(std::floor(t * spokes / std::numbers::pi)) % 2;
        }
      const float cover = static_cast<float>(hits) / (ss * ss);
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = (1.0f - cover) * dark[c] + cover * light[c];
    }
  return img;
}

}  // namespace

PlanarImage make_chart(int height, int width, std::uint64_t seed, ChartKind kind,
                       int supersample) {
  if (height < 1 || width < 1) throw InvalidInput("make_chart: empty size");
  if (supersample < 1) throw InvalidInput("make_chart: supersample must be >= 1");
  std::mt19937_64 rng(seed);
  if (kind == ChartKind::siemens) return siemens_star(height, width, rng, supersample);
  const Rgb background = random_color(rng);
  PlanarImage img(height, width, 3);
  for (int c = 0; c < 3; ++c) std::fill(img.plane_data(c).begin(), img.plane_data(c).end(), background[c]);
  const int count = std::max(8, static_cast<int>(static_cast<double>(height) * width / 500.0));
  for (int i = 0; i < count; ++i) paint(img, random_shape(rng, height, width), supersample);
  return img;
}

}  // namespace aberrex
