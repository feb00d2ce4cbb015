#include "gsurvey/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gsurvey/csv.hpp"
#include "gsurvey/error.hpp"

namespace gsurvey {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 420;
constexpr double kLeft = 70;
constexpr double kRight = 170;  // legend column
constexpr double kTop = 40;
constexpr double kBottom = 55;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

std::string unescape(const std::string& text) {
  std::string out;
  for (std::size_t k = 0; k < text.size(); ++k) {
    if (text[k] != '&') {
      out += text[k];
      continue;
    }
    const auto end = text.find(';', k);
    const std::string entity = text.substr(k, end - k + 1);
    if (entity == "&amp;") out += '&';
    else if (entity == "&lt;") out += '<';
    else if (entity == "&gt;") out += '>';
    else if (entity == "&quot;") out += '"';
    else out += entity;
    k = end;
  }
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) out += ' ';
    out += format_double(v[k]);
  }
  return out;
}

std::vector<double> split_numbers(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string token;
  while (in >> token) out.push_back(parse_double(token, "svg", 0));
  return out;
}

std::string attribute(const std::string& tag, const std::string& name) {
  const std::string key = " " + name + "=\"";
  const auto start = tag.find(key);
  if (start == std::string::npos) return {};
  const auto begin = start + key.size();
  return tag.substr(begin, tag.find('"', begin) - begin);
}

}  // namespace

std::string render_svg(const LineChart& chart) {
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto tx = [&](double x) {
    double lo = chart.x_min;
    double hi = chart.x_max;
    if (chart.log_x) {
      x = std::log10(x);
      lo = std::log10(lo);
      hi = std::log10(hi);
    }
    return kLeft + (x - lo) / (hi - lo) * plot_w;
  };
  auto ty = [&](double y) {
    return kTop + plot_h - (y - chart.y_min) / (chart.y_max - chart.y_min) * plot_h;
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
     << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
     << escape(chart.title) << "</text>\n";
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w << "\" height=\""
     << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int k = 0; k <= 4; ++k) {
    const double fy = chart.y_min + (chart.y_max - chart.y_min) * k / 4.0;
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << format_fixed(ty(fy) + 4, 1)
       << "\" text-anchor=\"end\" font-size=\"11\">" << format_fixed(fy, 2) << "</text>\n";
    double fx;
    if (chart.log_x)
      fx = std::pow(10.0, std::log10(chart.x_min) +
                              (std::log10(chart.x_max) - std::log10(chart.x_min)) * k / 4.0);
    else
      fx = chart.x_min + (chart.x_max - chart.x_min) * k / 4.0;
    os << "<text x=\"" << format_fixed(tx(fx), 1) << "\" y=\"" << kTop + plot_h + 16
       << "\" text-anchor=\"middle\" font-size=\"11\">"
       << (chart.log_x ? format_fixed(fx, 0) : format_fixed(fx, 2)) << "</text>\n";
  }
  os << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 14
     << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(chart.x_label) << "</text>\n";
  os << "<text x=\"16\" y=\"" << kTop + plot_h / 2 << "\" text-anchor=\"middle\" font-size=\"12\" "
     << "transform=\"rotate(-90 16 " << kTop + plot_h / 2 << ")\">" << escape(chart.y_label)
     << "</text>\n";

  if (chart.diagonal) {
    const double lo = std::max(chart.x_min, chart.y_min);
    const double hi = std::min(chart.x_max, chart.y_max);
    os << "<line x1=\"" << format_fixed(tx(lo), 2) << "\" y1=\"" << format_fixed(ty(lo), 2)
       << "\" x2=\"" << format_fixed(tx(hi), 2) << "\" y2=\"" << format_fixed(ty(hi), 2)
       << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
  }

  for (std::size_t s = 0; s < chart.series.size(); ++s) {
    const auto& series = chart.series[s];
    if (series.x.size() != series.y.size())
      throw ShapeError("chart series '" + series.name + "' has mismatched x and y lengths");
    const char* colour = kPalette[s % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.8\" data-series=\""
       << escape(series.name) << "\" data-x=\"" << join(series.x) << "\" data-y=\""
       << join(series.y) << "\" points=\"";
    for (std::size_t k = 0; k < series.x.size(); ++k) {
      if (k) os << ' ';
      os << format_fixed(tx(series.x[k]), 2) << ',' << format_fixed(ty(series.y[k]), 2);
    }
    os << "\"/>\n";
    const double ly = kTop + 14 + 18.0 * static_cast<double>(s);
    os << "<line x1=\"" << kLeft + plot_w + 12 << "\" y1=\"" << ly << "\" x2=\""
       << kLeft + plot_w + 32 << "\" y2=\"" << ly << "\" stroke=\"" << colour
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << kLeft + plot_w + 38 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
       << escape(series.name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_svg(const std::filesystem::path& path, const LineChart& chart) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << render_svg(chart);
}

std::vector<ChartSeries> parse_svg_series(const std::string& svg) {
  std::vector<ChartSeries> out;
  std::size_t pos = 0;
  while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
    const auto end = svg.find("/>", pos);
    const std::string tag = svg.substr(pos, end - pos);
    ChartSeries s;
    s.name = unescape(attribute(tag, "data-series"));
    s.x = split_numbers(attribute(tag, "data-x"));
    s.y = split_numbers(attribute(tag, "data-y"));
    out.push_back(std::move(s));
    pos = end;
  }
  return out;
}

}  // namespace gsurvey
