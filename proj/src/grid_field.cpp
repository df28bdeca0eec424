#include "raresim/grid_field.hpp"

#include <algorithm>
#include <cmath>

#include "raresim/errors.hpp"
#include "raresim/text_io.hpp"

namespace raresim {

void GridSpec::validate() const {
  if (nx < 3 || ny < 3) throw ConfigError("grid needs nx, ny >= 3");
  if (!(x1 > x0) || !(y1 > y0)) throw ConfigError("grid domain is empty");
}

bool GridField::contains(Position2 p) const {
  return p.x >= spec.x0 && p.x <= spec.x1 && p.y >= spec.y0 && p.y <= spec.y1;
}

std::uint64_t GridField::content_hash() const {
  std::uint64_t h = fnv1a(&spec.x0, sizeof(double) * 4);
  h = fnv1a(&spec.nx, sizeof(int) * 2, h);
  return fnv1a(values.data(), values.size() * sizeof(double), h);
}

GridField make_grid_field(const GridSpec& spec, double fill) {
  spec.validate();
  GridField field;
  field.spec = spec;
  field.values.assign(static_cast<std::size_t>(spec.nx) * spec.ny, fill);
  return field;
}

namespace {

struct CellCoords {
  int i, j;        // lower-left node of the cell
  double u, v;     // local coordinates in [0, 1]
};

CellCoords locate(const GridField& field, Position2 p) {
  const GridSpec& g = field.spec;
  if (!field.contains(p))
    throw OutOfDomain("point (" + format_double(p.x) + ", " + format_double(p.y) +
                      ") outside grid domain");
  const double fx = (p.x - g.x0) / g.hx();
  const double fy = (p.y - g.y0) / g.hy();
  int i = std::min(static_cast<int>(fx), g.nx - 2);
  int j = std::min(static_cast<int>(fy), g.ny - 2);
  i = std::max(i, 0);
  j = std::max(j, 0);
  return {i, j, fx - i, fy - j};
}

}  // namespace

double field_value(const GridField& field, Position2 p) {
  const auto [i, j, u, v] = locate(field, p);
  const double q00 = field.at(i, j), q10 = field.at(i + 1, j);
  const double q01 = field.at(i, j + 1), q11 = field.at(i + 1, j + 1);
  return (1 - u) * (1 - v) * q00 + u * (1 - v) * q10 + (1 - u) * v * q01 + u * v * q11;
}

Vec2 field_drift(const GridField& field, Position2 p) {
  const auto [i, j, u, v] = locate(field, p);
  const double q00 = field.at(i, j), q10 = field.at(i + 1, j);
  const double q01 = field.at(i, j + 1), q11 = field.at(i + 1, j + 1);
  const double dx = ((1 - v) * (q10 - q00) + v * (q11 - q01)) / field.spec.hx();
  const double dy = ((1 - u) * (q01 - q00) + u * (q11 - q10)) / field.spec.hy();
  return {dx, dy};
}

void write_grid_field(const GridField& field, const std::filesystem::path& csv_path) {
  const GridSpec& g = field.spec;
  std::string meta;
  meta += "x0=" + format_double(g.x0) + "\n";
  meta += "x1=" + format_double(g.x1) + "\n";
  meta += "y0=" + format_double(g.y0) + "\n";
  meta += "y1=" + format_double(g.y1) + "\n";
  meta += "nx=" + std::to_string(g.nx) + "\n";
  meta += "ny=" + std::to_string(g.ny) + "\n";
  meta += "hx=" + format_double(g.hx()) + "\n";
  meta += "hy=" + format_double(g.hy()) + "\n";

  std::string csv;
  csv.reserve(field.values.size() * 20);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      if (i > 0) csv += ',';
      csv += format_double(field.at(i, j));
    }
    csv += '\n';
  }

  std::filesystem::path meta_path = csv_path;
  meta_path += ".meta";
  write_file_atomic(meta_path, meta);
  write_file_atomic(csv_path, csv);
}

GridField read_grid_field(const std::filesystem::path& csv_path) {
  std::filesystem::path meta_path = csv_path;
  meta_path += ".meta";
  const KeyValueMap kv = parse_key_values(read_file(meta_path));

  GridSpec spec;
  spec.x0 = parse_double(require_key(kv, "x0"));
  spec.x1 = parse_double(require_key(kv, "x1"));
  spec.y0 = parse_double(require_key(kv, "y0"));
  spec.y1 = parse_double(require_key(kv, "y1"));
  spec.nx = static_cast<int>(parse_int(require_key(kv, "nx")));
  spec.ny = static_cast<int>(parse_int(require_key(kv, "ny")));

  GridField field = make_grid_field(spec);
  const std::string text = read_file(csv_path);
  long line_no = 0;
  int j = 0;
  for (std::string_view line : split(text, '\n')) {
    ++line_no;
    if (line.empty()) continue;
    if (j >= spec.ny) throw ParseError("more rows than ny=" + std::to_string(spec.ny), line_no);
    const auto cells = split(line, ',');
    if (static_cast<int>(cells.size()) != spec.nx)
      throw ParseError("expected " + std::to_string(spec.nx) + " columns, got " +
                           std::to_string(cells.size()),
                       line_no);
    for (int i = 0; i < spec.nx; ++i) field.at(i, j) = parse_double(cells[i], line_no);
    ++j;
  }
  if (j != spec.ny) throw ParseError("expected " + std::to_string(spec.ny) + " rows, got " +
                                     std::to_string(j));
  return field;
}

}  // namespace raresim
