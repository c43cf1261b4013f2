#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stylo/errors.hpp"
#include "stylo/io.hpp"
#include "stylo/reduce.hpp"

namespace stylo {

enum class ColorBy { year, author, cluster };

inline std::string to_string(ColorBy c) {
  switch (c) {
    case ColorBy::year: return "year";
    case ColorBy::author: return "author";
    case ColorBy::cluster: return "cluster";
  }
  return "?";
}

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string hex_color(double r, double g, double b) {
  char buf[8];
  auto ch = [](double v) {
    const int x = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    return x;
  };
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", ch(r), ch(g), ch(b));
  return buf;
}

// Three-stop ramp (dark violet, teal, yellow) over t in [0, 1].
inline std::string year_ramp(double t) {
  struct Stop {
    double t, r, g, b;
  };
  static constexpr Stop stops[] = {{0.0, 0x44 / 255.0, 0x01 / 255.0, 0x54 / 255.0},
                                   {0.5, 0x21 / 255.0, 0x90 / 255.0, 0x8c / 255.0},
                                   {1.0, 0xfd / 255.0, 0xe7 / 255.0, 0x25 / 255.0}};
  t = std::clamp(t, 0.0, 1.0);
  const Stop& lo = t <= 0.5 ? stops[0] : stops[1];
  const Stop& hi = t <= 0.5 ? stops[1] : stops[2];
  const double u = (t - lo.t) / (hi.t - lo.t);
  return hex_color(lo.r + u * (hi.r - lo.r), lo.g + u * (hi.g - lo.g), lo.b + u * (hi.b - lo.b));
}

inline const std::vector<std::string>& category_palette() {
  static const std::vector<std::string> palette = {
      "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860",
      "#da8bc3", "#8c8c8c", "#ccb974", "#64b5cd", "#5f9e6e", "#b55d60"};
  return palette;
}

}  // namespace detail

// Self-contained SVG scatter: one mark per row, axes with tick labels, and a
// legend. 3D projections draw the first two coordinates and encode the third
// as mark radius. The stamp comment records config hash and seed.
inline std::string render_scatter(const Projection& proj, const std::vector<std::string>& authors,
                                  const std::vector<int>& years,
                                  const std::vector<int>* cluster_labels, ColorBy color_by,
                                  const std::string& stamp) {
  const std::size_t n = proj.rows();
  if (n == 0) throw InputError("cannot render an empty projection");
  if (authors.size() != n || years.size() != n)
    throw std::invalid_argument("author/year metadata must parallel the projection");
  if (color_by == ColorBy::cluster && (!cluster_labels || cluster_labels->size() != n))
    throw InputError("cluster coloring requires cluster labels for every point");

  constexpr double W = 880, H = 620;
  constexpr double L = 64, R = 660, T = 48, B = 560;  // plot box

  double xmin = proj.coords[0], xmax = xmin;
  double ymin = proj.coords[1], ymax = ymin;
  double zmin = 0.0, zmax = 0.0;
  const bool has_z = proj.out_dim == 3;
  if (has_z) zmin = zmax = proj.coords[2];
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = proj.row(i);
    xmin = std::min(xmin, row[0]);
    xmax = std::max(xmax, row[0]);
    ymin = std::min(ymin, row[1]);
    ymax = std::max(ymax, row[1]);
    if (has_z) {
      zmin = std::min(zmin, row[2]);
      zmax = std::max(zmax, row[2]);
    }
  }
  auto pad_range = [](double& lo, double& hi) {
    if (hi - lo < 1e-12) {
      lo -= 1.0;
      hi += 1.0;
    } else {
      const double pad = 0.05 * (hi - lo);
      lo -= pad;
      hi += pad;
    }
  };
  pad_range(xmin, xmax);
  pad_range(ymin, ymax);

  auto sx = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (R - L); };
  auto sy = [&](double y) { return B - (y - ymin) / (ymax - ymin) * (B - T); };

  int year_lo = years[0], year_hi = years[0];
  for (int y : years) {
    year_lo = std::min(year_lo, y);
    year_hi = std::max(year_hi, y);
  }

  // Categorical color keys, sorted for a stable palette assignment.
  std::map<std::string, std::size_t> cat_index;
  if (color_by != ColorBy::year) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::string key = color_by == ColorBy::author
                                  ? authors[i]
                                  : "cluster " + std::to_string((*cluster_labels)[i]);
      cat_index.emplace(key, 0);
    }
    std::size_t next = 0;
    for (auto& [k, v] : cat_index) v = next++;
  }
  auto color_of = [&](std::size_t i) {
    if (color_by == ColorBy::year) {
      const double t = year_hi > year_lo
                           ? (years[i] - year_lo) / static_cast<double>(year_hi - year_lo)
                           : 0.5;
      return detail::year_ramp(t);
    }
    const std::string key = color_by == ColorBy::author
                                ? authors[i]
                                : "cluster " + std::to_string((*cluster_labels)[i]);
    const auto& palette = detail::category_palette();
    return palette[cat_index.at(key) % palette.size()];
  };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<!-- " + stamp + " -->\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + format_double(W) +
         "\" height=\"" + format_double(H) + "\" viewBox=\"0 0 " + format_double(W) + " " +
         format_double(H) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  svg += "<text x=\"" + format_double(L) + "\" y=\"28\" font-family=\"sans-serif\" "
         "font-size=\"16\" fill=\"#222\">" +
         detail::xml_escape(proj.method) + " projection, colored by " + to_string(color_by) +
         "</text>\n";
  svg += "<rect x=\"" + format_double(L) + "\" y=\"" + format_double(T) + "\" width=\"" +
         format_double(R - L) + "\" height=\"" + format_double(B - T) +
         "\" fill=\"none\" stroke=\"#999\"/>\n";

  // Ticks: 5 per axis.
  for (int t = 0; t <= 4; ++t) {
    const double fx = xmin + (xmax - xmin) * t / 4.0;
    const double fy = ymin + (ymax - ymin) * t / 4.0;
    const double px = sx(fx), py = sy(fy);
    svg += "<line x1=\"" + format_double(px) + "\" y1=\"" + format_double(B) + "\" x2=\"" +
           format_double(px) + "\" y2=\"" + format_double(B + 5) + "\" stroke=\"#999\"/>\n";
    svg += "<text x=\"" + format_double(px) + "\" y=\"" + format_double(B + 18) +
           "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#444\" "
           "text-anchor=\"middle\">" +
           format_double(std::round(fx * 100.0) / 100.0) + "</text>\n";
    svg += "<line x1=\"" + format_double(L - 5) + "\" y1=\"" + format_double(py) + "\" x2=\"" +
           format_double(L) + "\" y2=\"" + format_double(py) + "\" stroke=\"#999\"/>\n";
    svg += "<text x=\"" + format_double(L - 8) + "\" y=\"" + format_double(py + 3) +
           "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#444\" text-anchor=\"end\">" +
           format_double(std::round(fy * 100.0) / 100.0) + "</text>\n";
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto row = proj.row(i);
    double r = 4.0;
    if (has_z && zmax > zmin) r = 2.0 + 5.0 * (row[2] - zmin) / (zmax - zmin);
    svg += "<circle class=\"mark\" cx=\"" + format_double(sx(row[0])) + "\" cy=\"" +
           format_double(sy(row[1])) + "\" r=\"" + format_double(r) + "\" fill=\"" + color_of(i) +
           "\" fill-opacity=\"0.85\"><title>" + detail::xml_escape(proj.ids[i]) + " (" +
           std::to_string(years[i]) + ")</title></circle>\n";
  }

  // Legend.
  const double lx = R + 24;
  if (color_by == ColorBy::year) {
    svg += "<defs><linearGradient id=\"ramp\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">\n";
    for (int s = 0; s <= 10; ++s) {
      const double t = s / 10.0;
      svg += "<stop offset=\"" + format_double(t * 100.0) + "%\" stop-color=\"" +
             detail::year_ramp(t) + "\"/>\n";
    }
    svg += "</linearGradient></defs>\n";
    svg += "<rect x=\"" + format_double(lx) + "\" y=\"" + format_double(T) +
           "\" width=\"18\" height=\"200\" fill=\"url(#ramp)\" stroke=\"#999\"/>\n";
    svg += "<text x=\"" + format_double(lx + 24) + "\" y=\"" + format_double(T + 204) +
           "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#222\">" +
           std::to_string(year_lo) + "</text>\n";
    svg += "<text x=\"" + format_double(lx + 24) + "\" y=\"" + format_double(T + 10) +
           "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#222\">" +
           std::to_string(year_hi) + "</text>\n";
  } else {
    constexpr std::size_t max_rows = 18;
    std::size_t row_i = 0;
    for (const auto& [name, idx] : cat_index) {
      if (row_i >= max_rows) {
        svg += "<text x=\"" + format_double(lx) + "\" y=\"" +
               format_double(T + 14 + 18.0 * row_i) +
               "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#444\">+" +
               std::to_string(cat_index.size() - max_rows) + " more</text>\n";
        break;
      }
      const double y = T + 18.0 * row_i;
      const auto& palette = detail::category_palette();
      svg += "<rect x=\"" + format_double(lx) + "\" y=\"" + format_double(y) +
             "\" width=\"12\" height=\"12\" fill=\"" + palette[idx % palette.size()] + "\"/>\n";
      svg += "<text x=\"" + format_double(lx + 18) + "\" y=\"" + format_double(y + 10) +
             "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#222\">" +
             detail::xml_escape(name) + "</text>\n";
      ++row_i;
    }
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace stylo
