#include "hetwls/csv.hpp"

#include "format.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace hetwls {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string_view>> rows;
  std::vector<std::size_t> line_numbers;

  std::optional<std::size_t> column(std::string_view name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  }

  std::size_t require(std::string_view name) const {
    auto c = column(name);
    if (!c) throw Error(ErrorCode::MissingColumn, "missing column '" + std::string(name) + "'");
    return *c;
  }
};

// Views in the returned table point into `text`.
Table tokenize(std::string_view text) {
  Table t;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    std::string_view line =
        text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    ++line_no;
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    if (line_no == 1 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (!have_header) {
      for (auto f : fields) t.header.emplace_back(f);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                             std::to_string(t.header.size()) + " fields, got " +
                                             std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(line_no);
  }
  if (!have_header) throw Error(ErrorCode::ParseError, "empty CSV: header row required");
  return t;
}

double parse_real(std::string_view s, std::size_t line, std::string_view column) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ", column '" +
                                           std::string(column) + "': not a number: '" +
                                           std::string(s) + "'");
  }
  return v;
}

long parse_integer(std::string_view s, std::size_t line, std::string_view column) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ", column '" +
                                           std::string(column) + "': not an integer: '" +
                                           std::string(s) + "'");
  }
  return v;
}

Vector real_column(const Table& t, std::size_t c) {
  Vector v(static_cast<Eigen::Index>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = parse_real(t.rows[i][c], t.line_numbers[i], t.header[c]);
  return v;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed for '" + path.string() + "'");
  return ss.str();
}

RegressionData parse_regression_csv(std::string_view text) {
  Table t = tokenize(text);
  std::size_t yc = t.require("y");

  std::vector<std::size_t> xcols;
  for (int j = 1;; ++j) {
    auto c = t.column("x" + std::to_string(j));
    if (!c) break;
    xcols.push_back(*c);
  }
  if (xcols.empty()) throw Error(ErrorCode::MissingColumn, "missing column 'x1'");
  for (const auto& h : t.header) {
    if (h.size() > 1 && h[0] == 'x' &&
        std::all_of(h.begin() + 1, h.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
      long j = std::stol(h.substr(1));
      if (j < 1 || static_cast<std::size_t>(j) > xcols.size())
        throw Error(ErrorCode::ParseError, "design columns must be x1..xp without gaps; found '" + h + "'");
    }
  }
  if (t.rows.empty()) throw Error(ErrorCode::ParseError, "dataset has no rows");

  const auto n = static_cast<Eigen::Index>(t.rows.size());
  const auto p = static_cast<Eigen::Index>(xcols.size());
  Matrix X(n, p);
  for (Eigen::Index j = 0; j < p; ++j) X.col(j) = real_column(t, xcols[static_cast<std::size_t>(j)]);
  Vector y = real_column(t, yc);

  std::optional<Vector> sigma;
  if (auto sc = t.column("sigma")) sigma = real_column(t, *sc);

  std::optional<std::vector<int>> groups;
  int group_count = 0;
  if (auto gc = t.column("group")) {
    std::vector<long> raw(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      raw[i] = parse_integer(t.rows[i][*gc], t.line_numbers[i], "group");
      if (raw[i] < 1)
        throw Error(ErrorCode::ParseError,
                    "line " + std::to_string(t.line_numbers[i]) + ": group labels must be positive");
    }
    std::map<long, int> relabel;
    for (long g : raw) relabel.emplace(g, 0);
    for (auto& [label, compact] : relabel) compact = ++group_count;
    groups.emplace(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) (*groups)[i] = relabel[raw[i]];
  }

  return RegressionData(std::move(X), std::move(y), std::move(sigma), std::move(groups), group_count);
}

RegressionData read_regression_csv(const std::filesystem::path& path) {
  return parse_regression_csv(read_text_file(path));
}

std::string regression_csv(const RegressionData& data) {
  std::string out = "y";
  if (data.has_sigma()) out += ",sigma";
  if (data.has_groups()) out += ",group";
  for (Eigen::Index j = 0; j < data.p(); ++j) out += ",x" + std::to_string(j + 1);
  out += '\n';
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    out += detail::format_double(data.y()(i));
    if (data.has_sigma()) out += ',' + detail::format_double(data.sigma()(i));
    if (data.has_groups()) out += ',' + std::to_string(data.groups()[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < data.p(); ++j) out += ',' + detail::format_double(data.X()(i, j));
    out += '\n';
  }
  return out;
}

LightCurve parse_light_curve_csv(std::string_view text) {
  Table t = tokenize(text);
  LightCurve lc;
  lc.t = real_column(t, t.require("t"));
  lc.y = real_column(t, t.require("mag"));
  lc.sigma = real_column(t, t.require("err"));
  lc.validate();
  return lc;
}

LightCurve read_light_curve_csv(const std::filesystem::path& path) {
  return parse_light_curve_csv(read_text_file(path));
}

std::string light_curve_csv(const LightCurve& lc) {
  std::string out = "t,mag,err\n";
  for (Eigen::Index i = 0; i < lc.size(); ++i) {
    out += detail::format_double(lc.t(i)) + ',' + detail::format_double(lc.y(i)) + ',' +
           detail::format_double(lc.sigma(i)) + '\n';
  }
  return out;
}

std::vector<ManifestEntry> parse_manifest_csv(std::string_view text,
                                              const std::filesystem::path& base_dir) {
  Table t = tokenize(text);
  std::size_t pc = t.require("path");
  std::size_t tc = t.require("true_period");
  std::vector<ManifestEntry> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    ManifestEntry e;
    std::filesystem::path p{std::string(t.rows[i][pc])};
    e.path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    e.true_period = parse_real(t.rows[i][tc], t.line_numbers[i], "true_period");
    if (!(e.true_period > 0.0))
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(t.line_numbers[i]) + ": true_period must be positive");
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ManifestEntry> read_manifest_csv(const std::filesystem::path& path) {
  return parse_manifest_csv(read_text_file(path), path.parent_path());
}

}  // namespace hetwls
