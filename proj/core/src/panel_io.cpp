#include "nnpanel/panel_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <string_view>
#include <vector>

#include "nnpanel/error.hpp"

namespace nnpanel {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& v) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// Numeric labels sort by value, anything else lexicographically.
std::vector<std::string> sorted_labels(const std::map<std::string, int>& seen) {
  std::vector<std::string> labels;
  for (const auto& kv : seen) labels.push_back(kv.first);
  bool numeric = true;
  for (const std::string& l : labels) {
    double v;
    if (!parse_double(l, v)) {
      numeric = false;
      break;
    }
  }
  if (numeric) {
    std::stable_sort(labels.begin(), labels.end(),
                     [](const std::string& a, const std::string& b) {
                       double x, y;
                       parse_double(a, x);
                       parse_double(b, y);
                       return x < y;
                     });
  }
  return labels;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

PanelData read_panel_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) fail(ErrorKind::parse, "empty panel file");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const std::vector<std::string_view> header = split(line);
  if (header.size() < 3 || header[0] != "unit" || header[1] != "time" ||
      header[2] != "y") {
    fail(ErrorKind::parse, "line " + std::to_string(line_no) +
                               ": header must start with unit,time,y");
  }
  const std::size_t K = header.size() - 3;
  for (std::size_t k = 0; k < K; ++k) {
    if (header[3 + k] != "x" + std::to_string(k + 1)) {
      fail(ErrorKind::parse, "line " + std::to_string(line_no) +
                                 ": expected column x" + std::to_string(k + 1) +
                                 ", found '" + std::string(header[3 + k]) + "'");
    }
  }

  struct Row {
    std::string unit, time;
    std::vector<double> values;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::map<std::string, int> units, times;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string_view> cells = split(line);
    if (cells.size() != header.size()) {
      fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(header.size()) + " fields, found " +
                                 std::to_string(cells.size()));
    }
    Row r{std::string(cells[0]), std::string(cells[1]), {}, line_no};
    if (r.unit.empty() || r.time.empty()) {
      fail(ErrorKind::parse,
           "line " + std::to_string(line_no) + ": empty unit or time label");
    }
    for (std::size_t c = 2; c < cells.size(); ++c) {
      double v;
      if (!parse_double(cells[c], v) || !std::isfinite(v)) {
        fail(ErrorKind::parse, "line " + std::to_string(line_no) +
                                   ": non-numeric value '" +
                                   std::string(cells[c]) + "' in column " +
                                   std::string(header[c]));
      }
      r.values.push_back(v);
    }
    units.emplace(r.unit, 0);
    times.emplace(r.time, 0);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) fail(ErrorKind::parse, "panel file has no data rows");

  const std::vector<std::string> unit_order = sorted_labels(units);
  const std::vector<std::string> time_order = sorted_labels(times);
  for (std::size_t i = 0; i < unit_order.size(); ++i) units[unit_order[i]] = static_cast<int>(i);
  for (std::size_t t = 0; t < time_order.size(); ++t) times[time_order[t]] = static_cast<int>(t);

  const auto N = static_cast<Eigen::Index>(unit_order.size());
  const auto T = static_cast<Eigen::Index>(time_order.size());
  PanelData d;
  d.Y = MatrixXd::Zero(N, T);
  d.X.assign(K, MatrixXd::Zero(N, T));
  Eigen::Matrix<std::size_t, Eigen::Dynamic, Eigen::Dynamic> filled =
      Eigen::Matrix<std::size_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(N, T);
  for (const Row& r : rows) {
    const int i = units[r.unit];
    const int t = times[r.time];
    if (filled(i, t) != 0) {
      fail(ErrorKind::unbalanced_panel,
           "duplicate observation for (unit " + r.unit + ", time " + r.time +
               ") on lines " + std::to_string(filled(i, t)) + " and " +
               std::to_string(r.line));
    }
    filled(i, t) = r.line;
    d.Y(i, t) = r.values[0];
    for (std::size_t k = 0; k < K; ++k) d.X[k](i, t) = r.values[1 + k];
  }
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index t = 0; t < T; ++t) {
      if (filled(i, t) == 0) {
        fail(ErrorKind::unbalanced_panel,
             "unbalanced panel: missing observation for (unit " +
                 unit_order[i] + ", time " + time_order[t] + ")");
      }
    }
  }
  d.unit_ids = unit_order;
  d.time_ids = time_order;
  d.validate();
  return d;
}

PanelData ingest_panel(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::invalid_input, "cannot open panel file " + path);
  return read_panel_csv(in);
}

void write_panel_csv(std::ostream& out, const PanelData& data) {
  data.validate();
  PanelData labelled = data;
  labelled.ensure_labels();
  out << "unit,time,y";
  for (Eigen::Index k = 0; k < data.K(); ++k) out << ",x" << (k + 1);
  out << '\n';
  for (Eigen::Index i = 0; i < data.N(); ++i) {
    for (Eigen::Index t = 0; t < data.T(); ++t) {
      out << labelled.unit_ids[i] << ',' << labelled.time_ids[t] << ','
          << format_double(data.Y(i, t));
      for (Eigen::Index k = 0; k < data.K(); ++k) {
        out << ',' << format_double(data.X[k](i, t));
      }
      out << '\n';
    }
  }
}

void write_panel(const std::string& path, const PanelData& data) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::invalid_input, "cannot write panel file " + path);
  write_panel_csv(out, data);
  if (!out) fail(ErrorKind::invalid_input, "write failed for " + path);
}

}  // namespace nnpanel
