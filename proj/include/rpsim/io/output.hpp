#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>

#include "rpsim/ensembles.hpp"
#include "rpsim/trajectories.hpp"

namespace rpsim::io {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kCsvHeader = "t,trace,tr_QS,tr_QT,p_coh,dnS_cum,dnT_cum";

// 15 significant digits, shortest of fixed/exponent form.
inline std::string number(double v) { return fmt::format("{:.15g}", v); }

// Row indices kept with a given stride; the last row is always kept.
inline std::vector<std::size_t> sampled_rows(std::size_t n_rows, int stride) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < n_rows; k += static_cast<std::size_t>(std::max(stride, 1)))
    idx.push_back(k);
  if (n_rows > 0 && idx.back() != n_rows - 1) idx.push_back(n_rows - 1);
  return idx;
}

inline void write_csv(std::ostream& out, const SimulationRecord& rec, int stride = 1) {
  out << kCsvHeader << '\n';
  for (std::size_t k : sampled_rows(rec.rows.size(), stride)) {
    const RecordRow& r = rec.rows[k];
    fmt::print(out, "{},{},{},{},{},{},{}\n", number(r.t), number(r.trace), number(r.tr_QS),
               number(r.tr_QT), number(r.p_coh), number(r.dnS_cum), number(r.dnT_cum));
  }
}

// Side-by-side columns for two theories. A record that stopped early holds
// its last row. d_X = X_kominis - X_traditional.
struct Comparison {
  struct Row {
    double t;
    std::array<double, 6> a, b;
  };
  static constexpr std::array<const char*, 6> kColumns{"trace", "tr_QS", "tr_QT",
                                                       "p_coh", "dnS_cum", "dnT_cum"};
  std::vector<Row> rows;
  std::array<double, 6> max_abs_discrepancy{};

  double max_discrepancy() const {
    return *std::max_element(max_abs_discrepancy.begin(), max_abs_discrepancy.end());
  }
};

inline Comparison compare_records(const SimulationRecord& kominis,
                                  const SimulationRecord& traditional) {
  auto values = [](const RecordRow& r) {
    return std::array<double, 6>{r.trace, r.tr_QS, r.tr_QT, r.p_coh, r.dnS_cum, r.dnT_cum};
  };
  Comparison c;
  const std::size_t n = std::max(kominis.rows.size(), traditional.rows.size());
  for (std::size_t k = 0; k < n; ++k) {
    const RecordRow& a = kominis.rows[std::min(k, kominis.rows.size() - 1)];
    const RecordRow& b = traditional.rows[std::min(k, traditional.rows.size() - 1)];
    Comparison::Row row{std::max(a.t, b.t), values(a), values(b)};
    for (std::size_t i = 0; i < 6; ++i)
      c.max_abs_discrepancy[i] = std::max(c.max_abs_discrepancy[i], std::abs(row.a[i] - row.b[i]));
    c.rows.push_back(row);
  }
  return c;
}

inline void write_comparison_csv(std::ostream& out, const Comparison& c, int stride = 1) {
  out << 't';
  for (const char* col : Comparison::kColumns)
    out << ',' << col << "_kominis," << col << "_traditional,d_" << col;
  out << '\n';
  for (std::size_t k : sampled_rows(c.rows.size(), stride)) {
    const auto& r = c.rows[k];
    out << number(r.t);
    for (std::size_t i = 0; i < 6; ++i)
      out << ',' << number(r.a[i]) << ',' << number(r.b[i]) << ',' << number(r.a[i] - r.b[i]);
    out << '\n';
  }
}

inline Json row_json(const RecordRow& r) {
  return {{"t", r.t},         {"trace", r.trace},     {"tr_QS", r.tr_QS},     {"tr_QT", r.tr_QT},
          {"p_coh", r.p_coh}, {"dnS_cum", r.dnS_cum}, {"dnT_cum", r.dnT_cum}};
}

inline Json record_json(const SimulationRecord& rec) {
  return {{"Y_S", rec.Y_S},
          {"Y_T", rec.Y_T},
          {"survival", rec.survival()},
          {"terminated", rec.terminated},
          {"rows", rec.rows.size()},
          {"final", rec.rows.empty() ? Json(nullptr) : row_json(rec.rows.back())}};
}

inline Json mc_json(const McReport& rep) {
  Json j{{"n_trajectories", rep.n_trajectories},
         {"n_singlet", rep.n_singlet},
         {"n_triplet", rep.n_triplet},
         {"n_alive", rep.n_alive},
         {"Y_S", rep.Y_S},
         {"Y_T", rep.Y_T},
         {"survival", rep.survival},
         {"se_Y_S", rep.se_Y_S},
         {"se_Y_T", rep.se_Y_T},
         {"se_survival", rep.se_survival},
         {"first_step_singlet_projections", rep.first_step_singlet_projections}};
  return j;
}

inline Json mean_state_json(const MeanStateComparison& cmp) {
  Json points = Json::array();
  for (const auto& p : cmp.points)
    points.push_back({{"t", p.t},
                      {"max_abs_deviation", p.max_abs_deviation},
                      {"max_z", p.max_z},
                      {"within", p.within}});
  return {{"n_sigma", cmp.n_sigma}, {"all_within", cmp.all_within()}, {"points", points}};
}

struct PlotSeries {
  std::string label;
  const SimulationRecord* record;
  bool dashed = false;
};

// Static SVG of Tr{Q_S rho} and Tr{Q_T rho} against t for each series.
inline void write_svg(std::ostream& out, const std::vector<PlotSeries>& series,
                      const std::string& title) {
  constexpr double W = 640, H = 420, L = 60, R = 20, T = 40, B = 50;
  double t_max = 0.0, y_max = 0.0;
  for (const auto& s : series)
    for (const auto& r : s.record->rows) {
      t_max = std::max(t_max, r.t);
      y_max = std::max({y_max, r.tr_QS, r.tr_QT});
    }
  if (t_max <= 0.0) t_max = 1.0;
  y_max = y_max > 0.0 ? std::ceil(y_max * 10.0) / 10.0 : 1.0;
  auto x = [&](double t) { return L + (W - L - R) * t / t_max; };
  auto y = [&](double v) { return H - B - (H - T - B) * v / y_max; };

  fmt::print(out,
             "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
             "font-family=\"sans-serif\" font-size=\"12\">\n",
             W, H);
  fmt::print(out, "<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", W, H);
  fmt::print(out, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
             W / 2, title);
  fmt::print(out,
             "<path d=\"M{0} {1} L{0} {2} L{3} {2}\" stroke=\"black\" fill=\"none\"/>\n", L, T,
             H - B, W - R);
  for (int i = 0; i <= 5; ++i) {
    const double tv = t_max * i / 5.0, yv = y_max * i / 5.0;
    fmt::print(out, "<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{:g}</text>\n", x(tv),
               H - B + 18, tv);
    fmt::print(out, "<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:g}</text>\n", L - 6,
               y(yv) + 4, yv);
  }
  fmt::print(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">t</text>\n", (L + W - R) / 2,
             H - 12);

  const char* colors[2] = {"#1f77b4", "#d62728"};
  int legend = 0;
  for (const auto& s : series) {
    for (int which = 0; which < 2; ++which) {
      std::string d;
      for (const auto& r : s.record->rows)
        d += fmt::format("{}{:.2f} {:.2f}", d.empty() ? "M" : " L", x(r.t),
                         y(which == 0 ? r.tr_QS : r.tr_QT));
      fmt::print(out, "<path d=\"{}\" stroke=\"{}\" fill=\"none\" stroke-width=\"1.5\"{}/>\n", d,
                 colors[which], s.dashed ? " stroke-dasharray=\"6 4\"" : "");
      const double ly = T + 10 + 16 * legend++;
      fmt::print(out,
                 "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\"{4}/>"
                 "<text x=\"{5}\" y=\"{6}\">{7} {8}</text>\n",
                 W - R - 190, ly, W - R - 160, colors[which],
                 s.dashed ? " stroke-dasharray=\"6 4\"" : "", W - R - 154, ly + 4,
                 which == 0 ? "Tr{Q_S rho}" : "Tr{Q_T rho}", s.label);
    }
  }
  out << "</svg>\n";
}

}  // namespace rpsim::io
