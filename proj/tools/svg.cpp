#include "svg.hpp"

#include <fstream>
#include <iomanip>

#include "lempc/error.hpp"

namespace lempc::cli {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 520.0;
constexpr double kMargin = 48.0;

struct Frame {
  Eigen::Vector2d lo, hi;
  Eigen::Vector2d map(const Eigen::Vector2d& p) const {
    const double sx = (kWidth - 2 * kMargin - 140) / (hi.x() - lo.x());
    const double sy = (kHeight - 2 * kMargin) / (hi.y() - lo.y());
    return {kMargin + (p.x() - lo.x()) * sx, kHeight - kMargin - (p.y() - lo.y()) * sy};
  }
};

void points(std::ostream& os, const Frame& f, const std::vector<Eigen::Vector2d>& pts) {
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto p = f.map(pts[i]);
    os << (i ? " " : "") << p.x() << ',' << p.y();
  }
}

}  // namespace

void write_svg(const std::filesystem::path& path, const Eigen::Vector2d& lo,
               const Eigen::Vector2d& hi, const std::vector<SvgPolygon>& regions,
               const std::vector<SvgPath>& paths, const std::string& title) {
  LEMPC_REQUIRE(hi.x() > lo.x() && hi.y() > lo.y(), "svg: empty plot window");
  std::ofstream os(path);
  if (!os) throw ValidationError("svg: cannot write " + path.string());
  const Frame f{lo, hi};
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
     << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kMargin << "\" y=\"24\" font-size=\"14\">" << title << "</text>\n";

  const auto a = f.map(lo), b = f.map(hi);
  os << "<rect x=\"" << a.x() << "\" y=\"" << b.y() << "\" width=\"" << b.x() - a.x()
     << "\" height=\"" << a.y() - b.y() << "\" fill=\"none\" stroke=\"#444\"/>\n";
  os << "<text x=\"" << a.x() << "\" y=\"" << a.y() + 16 << "\">" << lo.x() << "</text>\n";
  os << "<text x=\"" << b.x() - 24 << "\" y=\"" << a.y() + 16 << "\">" << hi.x() << "</text>\n";
  os << "<text x=\"" << a.x() - 40 << "\" y=\"" << a.y() << "\">" << lo.y() << "</text>\n";
  os << "<text x=\"" << a.x() - 40 << "\" y=\"" << b.y() + 10 << "\">" << hi.y() << "</text>\n";
  os << "<text x=\"" << 0.5 * (a.x() + b.x()) << "\" y=\"" << a.y() + 32 << "\">x1</text>\n";
  os << "<text x=\"" << a.x() - 40 << "\" y=\"" << 0.5 * (a.y() + b.y()) << "\">x2</text>\n";

  double legend_y = kMargin + 10;
  const double legend_x = kWidth - kMargin - 120;
  for (const auto& r : regions) {
    if (r.vertices.size() < 3) continue;
    os << "<polygon points=\"";
    points(os, f, r.vertices);
    os << "\" fill=\"" << r.color << "\" fill-opacity=\"0.25\" stroke=\"" << r.color << "\"/>\n";
    os << "<rect x=\"" << legend_x << "\" y=\"" << legend_y - 9 << "\" width=\"10\" height=\"10\" fill=\""
       << r.color << "\"/><text x=\"" << legend_x + 16 << "\" y=\"" << legend_y << "\">" << r.label
       << "</text>\n";
    legend_y += 18;
  }
  for (const auto& p : paths) {
    if (p.points.empty()) continue;
    os << "<polyline points=\"";
    points(os, f, p.points);
    os << "\" fill=\"none\" stroke=\"" << p.color << "\" stroke-width=\"1.5\"/>\n";
    const auto s = f.map(p.points.front());
    os << "<circle cx=\"" << s.x() << "\" cy=\"" << s.y() << "\" r=\"3\" fill=\"" << p.color << "\"/>\n";
  }
  os << "</svg>\n";
}

}  // namespace lempc::cli
