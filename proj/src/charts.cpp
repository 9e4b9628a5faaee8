#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "pweaver/harness.hpp"

namespace pweaver::harness {

namespace fs = std::filesystem;

namespace {

// Coordinates and values are rendered through snprintf with fixed precision
// so a given report always produces the same bytes.
std::string num(double v, const char* spec = "%.2f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
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

const std::vector<std::string>& palette() {
  static const std::vector<std::string> colors{"#4e79a7", "#f28e2b", "#e15759", "#76b7b2",
                                               "#59a45e", "#edc948", "#b07aa1", "#9c755f"};
  return colors;
}

struct Series {
  std::string label;
  std::vector<double> values;  // aligned with the panel's categories
};

struct Panel {
  std::string title;
  std::string y_label;
  std::vector<std::string> categories;
  std::vector<Series> series;
};

std::string render_panel(const Panel& panel) {
  const double bar_w = 16.0;
  const double bar_gap = 3.0;
  const double group_gap = 28.0;
  const double ml = 70.0, mr = 20.0, mt = 64.0, mb = 50.0;
  const double plot_h = 220.0;

  const std::size_t groups = panel.categories.size();
  const std::size_t n_series = panel.series.size();
  const double group_w = n_series * bar_w + (n_series > 0 ? n_series - 1 : 0) * bar_gap;
  const double plot_w = groups * group_w + (groups > 0 ? groups - 1 : 0) * group_gap;
  const double width = std::max(360.0, ml + plot_w + mr);
  const double height = mt + plot_h + mb;
  const double base_y = mt + plot_h;

  double y_max = 0.0;
  for (const auto& s : panel.series) {
    for (double v : s.values) y_max = std::max(y_max, v);
  }
  if (y_max <= 0.0) y_max = 1.0;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
         num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + num(width) + "\" height=\"" + num(height) +
         "\" fill=\"#ffffff\"/>\n";
  svg += "<text x=\"" + num(ml) +
         "\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" font-weight=\"bold\">" +
         xml_escape(panel.title) + "</text>\n";

  // legend
  double lx = ml;
  for (std::size_t i = 0; i < n_series; ++i) {
    const auto& color = palette()[i % palette().size()];
    svg += "<rect x=\"" + num(lx) + "\" y=\"32\" width=\"11\" height=\"11\" fill=\"" + color +
           "\"/>\n";
    svg += "<text x=\"" + num(lx + 15) +
           "\" y=\"42\" font-family=\"sans-serif\" font-size=\"11\">" +
           xml_escape(panel.series[i].label) + "</text>\n";
    lx += 15 + 7.0 * static_cast<double>(panel.series[i].label.size()) + 18;
  }

  // gridlines and y labels at quarters of the maximum
  for (int tick = 0; tick <= 4; ++tick) {
    const double frac = tick / 4.0;
    const double y = base_y - frac * plot_h;
    svg += "<line x1=\"" + num(ml) + "\" y1=\"" + num(y) + "\" x2=\"" + num(ml + plot_w) +
           "\" y2=\"" + num(y) + "\" stroke=\"" + (tick == 0 ? "#333333" : "#dddddd") +
           "\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"" + num(ml - 8) + "\" y=\"" + num(y + 4) +
           "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" +
           num(frac * y_max, "%.3g") + "</text>\n";
  }
  svg += "<text x=\"14\" y=\"" + num(mt + plot_h / 2) +
         "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
         num(mt + plot_h / 2) + ")\">" + xml_escape(panel.y_label) + "</text>\n";

  for (std::size_t g = 0; g < groups; ++g) {
    const double gx = ml + g * (group_w + group_gap);
    for (std::size_t s = 0; s < n_series; ++s) {
      const double v = g < panel.series[s].values.size() ? panel.series[s].values[g] : 0.0;
      const double h = std::max(0.0, v) / y_max * plot_h;
      const double x = gx + s * (bar_w + bar_gap);
      svg += "<rect class=\"bar\" x=\"" + num(x) + "\" y=\"" + num(base_y - h) + "\" width=\"" +
             num(bar_w) + "\" height=\"" + num(h) + "\" fill=\"" +
             palette()[s % palette().size()] + "\"><title>" + xml_escape(panel.series[s].label) +
             " / " + xml_escape(panel.categories[g]) + " = " + num(v, "%.4f") +
             "</title></rect>\n";
    }
    svg += "<text x=\"" + num(gx + group_w / 2) + "\" y=\"" + num(base_y + 16) +
           "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" +
           xml_escape(panel.categories[g]) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

Result<bool> write_panel(const fs::path& path, const Panel& panel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return Result<bool>::failure("cannot open for writing: " + path.string());
  out << render_panel(panel);
  out.close();
  if (!out) return Result<bool>::failure("write failed: " + path.string());
  return Result<bool>::success(true);
}

std::vector<double> shares(const CategoricalDistribution& dist) {
  std::vector<double> out;
  out.reserve(dist.categories.size());
  for (std::size_t i = 0; i < dist.categories.size(); ++i) out.push_back(dist.share(i));
  return out;
}

}  // namespace

Result<std::vector<std::string>> emit_charts(const ComparisonReport& report,
                                             const fs::path& out_dir) {
  using R = Result<std::vector<std::string>>;
  if (report.units.empty()) return R::failure("comparison report has no units");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) return R::failure("cannot create chart directory: " + ec.message());

  std::vector<std::string> written;
  const auto emit = [&](const char* name, const Panel& panel) -> Result<bool> {
    auto ok = write_panel(out_dir / name, panel);
    if (ok.ok()) written.push_back(name);
    return ok;
  };

  {
    Panel panel;
    panel.title = "Moral probe distribution";
    panel.y_label = "share";
    for (const auto& unit : report.units) {
      if (unit.moral.total() == 0) continue;
      if (panel.categories.empty()) panel.categories = unit.moral.categories;
      panel.series.push_back({unit.label, shares(unit.moral)});
    }
    if (!panel.series.empty()) {
      if (auto ok = emit("moral_dist.svg", panel); !ok.ok()) return R::failure(ok.error);
    }
  }

  {
    Panel panel;
    panel.title = "Reaction distribution";
    panel.y_label = "share";
    for (const auto& unit : report.units) {
      if (unit.reaction.total() == 0) continue;
      if (panel.categories.empty()) panel.categories = unit.reaction.categories;
      panel.series.push_back({unit.label, shares(unit.reaction)});
    }
    if (!panel.series.empty()) {
      if (auto ok = emit("reaction_dist.svg", panel); !ok.ok()) return R::failure(ok.error);
    }
  }

  {
    Panel panel;
    panel.title = "Filler words per 100 words";
    panel.y_label = "mean rate";
    Series series{"mean filler per 100 words", {}};
    for (const auto& unit : report.units) {
      if (!unit.has_style) continue;
      panel.categories.push_back(unit.label);
      series.values.push_back(unit.style.mean_filler_per_100);
    }
    if (!panel.categories.empty()) {
      panel.series.push_back(std::move(series));
      if (auto ok = emit("filler.svg", panel); !ok.ok()) return R::failure(ok.error);
    }
  }

  {
    Panel panel;
    panel.title = "Punctuation per response";
    panel.y_label = "mean count";
    panel.categories = style::punctuation_mark_names();
    for (const auto& unit : report.units) {
      if (!unit.has_style) continue;
      Series series{unit.label, {}};
      for (const auto& mark : style::punctuation_marks()) {
        const auto it = unit.style.punctuation_totals.find(mark);
        const double total = it == unit.style.punctuation_totals.end()
                                 ? 0.0
                                 : static_cast<double>(it->second);
        series.values.push_back(unit.style.responses > 0
                                    ? total / static_cast<double>(unit.style.responses)
                                    : 0.0);
      }
      panel.series.push_back(std::move(series));
    }
    if (!panel.series.empty()) {
      if (auto ok = emit("punctuation.svg", panel); !ok.ok()) return R::failure(ok.error);
    }
  }

  {
    Panel panel;
    panel.title = "Reply length distribution";
    panel.y_label = "share";
    // bucket supports are prefixes of one another; take the longest
    for (const auto& unit : report.units) {
      if (unit.has_style && unit.style.length_buckets.categories.size() > panel.categories.size()) {
        panel.categories = unit.style.length_buckets.categories;
      }
    }
    for (const auto& unit : report.units) {
      if (!unit.has_style || unit.style.length_buckets.total() == 0) continue;
      Series series{unit.label, std::vector<double>(panel.categories.size(), 0.0)};
      for (std::size_t i = 0; i < unit.style.length_buckets.categories.size(); ++i) {
        series.values[i] = unit.style.length_buckets.share(i);
      }
      panel.series.push_back(std::move(series));
    }
    if (!panel.series.empty()) {
      if (auto ok = emit("length_hist.svg", panel); !ok.ok()) return R::failure(ok.error);
    }
  }

  {
    Panel panel;
    panel.title = "Sentiment distribution";
    panel.y_label = "share";
    for (const auto& unit : report.units) {
      if (!unit.has_style || unit.style.sentiment.total() == 0) continue;
      if (panel.categories.empty()) panel.categories = unit.style.sentiment.categories;
      panel.series.push_back({unit.label, shares(unit.style.sentiment)});
    }
    if (!panel.series.empty()) {
      if (auto ok = emit("sentiment.svg", panel); !ok.ok()) return R::failure(ok.error);
    }
  }

  return R::success(std::move(written));
}

}  // namespace pweaver::harness
