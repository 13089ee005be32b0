#pragma once

// Static SVG line charts of per-episode return and cumulative regret: one
// mean line per cell, with a +/- 1 standard-error band when a cell has more
// than one seed. Output depends only on the input rows.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "phe/errors.hpp"
#include "phe/harness.hpp"

namespace phe {

namespace detail {

inline std::string fmt(const char* spec, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % (sizeof colors / sizeof *colors)];
}

}  // namespace detail

struct PlotSeries {
  std::string label;
  std::vector<double> mean;
  std::vector<double> stderr_;
  bool band = false;
};

inline std::string render_svg(const std::string& title, const std::string& y_label, const std::vector<PlotSeries>& series) {
  constexpr double W = 820, H = 500, left = 70, right = 20, top = 40, bottom = 60;
  const double legend_h = 18.0 * static_cast<double>(series.size());
  const double plot_w = W - left - right, plot_h = H - top - bottom;

  std::size_t k_max = 1;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : series) {
    k_max = std::max(k_max, s.mean.size());
    for (std::size_t k = 0; k < s.mean.size(); ++k) {
      const double e = s.band ? s.stderr_[k] : 0.0;
      lo = std::min(lo, s.mean[k] - e);
      hi = std::max(hi, s.mean[k] + e);
    }
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  auto px = [&](std::size_t k) { return left + (k_max > 1 ? plot_w * static_cast<double>(k) / static_cast<double>(k_max - 1) : 0.0); };
  auto py = [&](double y) { return top + plot_h * (1.0 - (y - lo) / (hi - lo)); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H + legend_h
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << detail::xml_escape(title)
      << "</text>\n";
  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"#333\"/>\n";

  for (int t = 0; t <= 4; ++t) {
    const double y = lo + (hi - lo) * t / 4.0;
    svg << "<line x1=\"" << left - 4 << "\" x2=\"" << left << "\" y1=\"" << detail::fmt("%.2f", py(y)) << "\" y2=\""
        << detail::fmt("%.2f", py(y)) << "\" stroke=\"#333\"/>";
    svg << "<text x=\"" << left - 6 << "\" y=\"" << detail::fmt("%.2f", py(y) + 4) << "\" text-anchor=\"end\">"
        << detail::fmt("%.3g", y) << "</text>\n";
    const std::size_t k = static_cast<std::size_t>(std::llround((k_max - 1) * t / 4.0));
    svg << "<text x=\"" << detail::fmt("%.2f", px(k)) << "\" y=\"" << top + plot_h + 16
        << "\" text-anchor=\"middle\">" << k + 1 << "</text>\n";
  }
  svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << top + plot_h + 36 << "\" text-anchor=\"middle\">episode</text>\n";
  svg << "<text transform=\"translate(16," << top + plot_h / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << detail::xml_escape(y_label) << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = detail::palette(i);
    if (s.band && !s.mean.empty()) {
      svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t k = 0; k < s.mean.size(); ++k)
        svg << detail::fmt("%.2f", px(k)) << ',' << detail::fmt("%.2f", py(s.mean[k] + s.stderr_[k])) << ' ';
      for (std::size_t k = s.mean.size(); k-- > 0;)
        svg << detail::fmt("%.2f", px(k)) << ',' << detail::fmt("%.2f", py(s.mean[k] - s.stderr_[k])) << ' ';
      svg << "\"/>\n";
    }
    svg << "<polyline class=\"series\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < s.mean.size(); ++k)
      svg << detail::fmt("%.2f", px(k)) << ',' << detail::fmt("%.2f", py(s.mean[k])) << ' ';
    svg << "\"/>\n";
    const double ly = H + 18.0 * static_cast<double>(i) - 8.0;
    svg << "<g class=\"legend\"><line x1=\"" << left << "\" x2=\"" << left + 24 << "\" y1=\"" << ly << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"3\"/><text x=\"" << left + 30 << "\" y=\"" << ly + 4 << "\">"
        << detail::xml_escape(s.label) << "</text></g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

/// Writes <env>_return.svg and <env>_regret.svg into dir; returns the paths.
inline std::vector<std::string> emit_plots(const RunResult& result, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create plot directory " + dir + ": " + ec.message());

  const auto summaries = summarize(result);
  std::vector<std::string> envs;
  for (const auto& s : summaries)
    if (std::find(envs.begin(), envs.end(), s.env) == envs.end()) envs.push_back(s.env);

  std::vector<std::string> written;
  for (const auto& env : envs) {
    for (const bool regret : {false, true}) {
      std::vector<PlotSeries> series;
      for (const auto& s : summaries) {
        if (s.env != env) continue;
        series.push_back({s.label, regret ? s.regret_mean : s.return_mean, regret ? s.regret_stderr : s.return_stderr,
                          s.n_seeds > 1});
      }
      const std::string metric = regret ? "regret" : "return";
      const std::string path = (std::filesystem::path(dir) / (env + "_" + metric + ".svg")).string();
      std::ofstream out(path, std::ios::binary);
      if (!out) throw IoError("cannot open " + path + " for writing");
      out << render_svg(env + ": " + (regret ? "cumulative regret" : "return per episode"),
                        regret ? "cumulative regret" : "return", series);
      if (!out) throw IoError("failed writing " + path);
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace phe
