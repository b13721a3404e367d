#include "pepg/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#ifndef PEPG_GIT_DESCRIBE
#define PEPG_GIT_DESCRIBE "unknown"
#endif

namespace pepg {

const char* const kCsvHeader = "iteration,seed,algo,mc_return,exact_value,stability_l2,grad_norm,wall_ms";

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string run_csv(const RunRecord& record) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const auto& r : record.rows) {
    os << r.iteration << ',' << record.seed << ',' << record.algo << ',' << format_double(r.mc_return)
       << ',' << format_double(r.exact_value) << ',' << format_double(r.stability) << ','
       << format_double(r.grad_norm) << ',' << format_double(r.wall_ms) << '\n';
  }
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

CsvRun parse_run_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw InvalidInput("unexpected CSV header");
  CsvRun run;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 8) throw InvalidInput("CSV row has " + std::to_string(f.size()) + " fields");
    RunRow r;
    try {
      r.iteration = std::stoi(f[0]);
      run.seed = std::stoull(f[1]);
      run.algo = f[2];
      r.mc_return = std::stod(f[3]);
      r.exact_value = std::stod(f[4]);
      r.stability = std::stod(f[5]);
      r.grad_norm = std::stod(f[6]);
      r.wall_ms = std::stod(f[7]);
    } catch (const std::exception&) {
      throw InvalidInput("malformed CSV row: " + line);
    }
    run.rows.push_back(r);
  }
  return run;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

const char* git_describe() { return PEPG_GIT_DESCRIBE; }

std::string reports_json(const std::vector<LemmaReport>& reports) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  auto num = [](double v) -> nlohmann::ordered_json {
    if (std::isfinite(v)) return v;
    return format_double(v);
  };
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["lemma"] = r.lemma;
    j["instance"] = r.instance;
    j["kind"] = r.equality ? "equality" : "inequality";
    j["lhs"] = num(r.lhs);
    j["rhs"] = num(r.rhs);
    j[r.equality ? "residual" : "slack"] = num(r.residual);
    j["tolerance"] = r.tolerance;
    j["pass"] = r.pass;
    if (r.inconclusive) j["inconclusive"] = true;
    if (!r.note.empty()) j["note"] = r.note;
    arr.push_back(j);
  }
  return arr.dump(2) + "\n";
}

std::string reports_table(const std::vector<LemmaReport>& reports) {
  struct Tally {
    int pass = 0, fail = 0;
    double worst = 0.0;
    bool equality = true;
    bool seen = false;
  };
  std::map<std::string, Tally> by;
  for (const auto& r : reports) {
    Tally& t = by[r.lemma];
    t.equality = r.equality;
    (r.pass ? t.pass : t.fail)++;
    if (!t.seen) {
      t.worst = r.residual;
      t.seen = true;
    } else {
      t.worst = r.equality ? std::max(t.worst, r.residual) : std::min(t.worst, r.residual);
    }
  }
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-24s %6s %6s  %-10s %s\n", "check", "pass", "fail", "kind", "worst");
  os << buf;
  for (const auto& [name, t] : by) {
    std::snprintf(buf, sizeof buf, "%-24s %6d %6d  %-10s %.3e\n", name.c_str(), t.pass, t.fail,
                  t.equality ? "residual" : "slack", t.worst);
    os << buf;
  }
  return os.str();
}

PlotKind parse_plot_kind(const std::string& name) {
  if (name == "curves") return PlotKind::Curves;
  if (name == "stability") return PlotKind::Stability;
  if (name == "sweep-bars") return PlotKind::SweepBars;
  throw InvalidInput("unknown plot kind: " + name);
}

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

struct Series {
  std::vector<double> mean, lo, hi;
};

Series band(const std::vector<const CsvRun*>& runs, bool stability) {
  Series s;
  size_t len = runs[0]->rows.size();
  for (auto* r : runs) len = std::min(len, r->rows.size());
  for (size_t i = 0; i < len; ++i) {
    double sum = 0, sq = 0;
    for (auto* r : runs) {
      double v = stability ? r->rows[i].stability : r->rows[i].mc_return;
      sum += v;
      sq += v * v;
    }
    double n = runs.size(), m = sum / n;
    double se = n > 1 ? std::sqrt(std::max(0.0, (sq - n * m * m) / (n - 1)) / n) : 0.0;
    s.mean.push_back(m);
    s.lo.push_back(m - se);
    s.hi.push_back(m + se);
  }
  return s;
}

struct Panel {
  double x0, y0, w, h;
};

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

void draw_panel(std::ostringstream& os, const Panel& p, const std::string& title,
                const std::map<std::string, Series>& data, bool log_scale) {
  double ymin = INFINITY, ymax = -INFINITY;
  size_t len = 1;
  auto tf = [&](double v) { return log_scale ? std::log10(std::max(v, 1e-16)) : v; };
  for (const auto& [name, s] : data) {
    len = std::max(len, s.mean.size());
    for (size_t i = 0; i < s.mean.size(); ++i) {
      ymin = std::min({ymin, tf(s.lo[i]), tf(s.mean[i])});
      ymax = std::max({ymax, tf(s.hi[i]), tf(s.mean[i])});
    }
  }
  if (!std::isfinite(ymin)) ymin = 0, ymax = 1;
  if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
  auto X = [&](size_t i) { return p.x0 + p.w * (len > 1 ? double(i) / (len - 1) : 0.5); };
  auto Y = [&](double v) { return p.y0 + p.h * (1.0 - (tf(v) - ymin) / (ymax - ymin)); };
  os << "<rect x='" << p.x0 << "' y='" << p.y0 << "' width='" << p.w << "' height='" << p.h
     << "' fill='none' stroke='#444'/>\n";
  os << "<text x='" << p.x0 + p.w / 2 << "' y='" << p.y0 - 8 << "' text-anchor='middle' font-size='14'>"
     << esc(title) << "</text>\n";
  char buf[64];
  for (int t = 0; t <= 4; ++t) {
    double v = ymin + (ymax - ymin) * t / 4.0;
    double y = p.y0 + p.h * (1.0 - t / 4.0);
    if (log_scale) std::snprintf(buf, sizeof buf, "1e%.1f", v);
    else std::snprintf(buf, sizeof buf, "%.3g", v);
    os << "<text x='" << p.x0 - 6 << "' y='" << y + 4 << "' text-anchor='end' font-size='10'>" << buf << "</text>\n";
  }
  os << "<text x='" << p.x0 + p.w / 2 << "' y='" << p.y0 + p.h + 28
     << "' text-anchor='middle' font-size='11'>iteration (0.." << len - 1 << ")</text>\n";
  int ci = 0;
  for (const auto& [name, s] : data) {
    const char* color = kPalette[ci % 6];
    if (s.mean.size() > 1) {
      os << "<polygon fill='" << color << "' fill-opacity='0.2' stroke='none' points='";
      for (size_t i = 0; i < s.hi.size(); ++i) os << X(i) << ',' << Y(s.hi[i]) << ' ';
      for (size_t i = s.lo.size(); i-- > 0;) os << X(i) << ',' << Y(s.lo[i]) << ' ';
      os << "'/>\n";
    }
    os << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (size_t i = 0; i < s.mean.size(); ++i) os << X(i) << ',' << Y(s.mean[i]) << ' ';
    os << "'/>\n";
    os << "<text x='" << p.x0 + 8 << "' y='" << p.y0 + 16 + 14 * ci << "' font-size='11' fill='" << color
       << "'>" << esc(name) << "</text>\n";
    ++ci;
  }
}

}  // namespace

std::string plot_svg(const std::vector<CsvRun>& runs, PlotKind kind) {
  if (runs.empty()) throw InvalidInput("no inputs");
  std::map<std::string, std::vector<const CsvRun*>> groups;
  for (const auto& r : runs)
    if (!r.rows.empty()) groups[r.algo].push_back(&r);
  if (groups.empty()) throw InvalidInput("no inputs");
  std::ostringstream os;
  os.precision(6);
  if (kind == PlotKind::SweepBars) {
    const double W = 640, H = 400, x0 = 70, y0 = 40, w = 540, h = 300;
    std::vector<std::pair<std::string, std::pair<double, double>>> bars;
    for (const auto& [name, rs] : groups) {
      Series s = band(rs, false);
      bars.push_back({name, {s.mean.back(), s.hi.back() - s.mean.back()}});
    }
    double lo = 0, hi = 0;
    for (auto& b : bars) {
      lo = std::min(lo, b.second.first - b.second.second);
      hi = std::max(hi, b.second.first + b.second.second);
    }
    if (hi - lo < 1e-12) hi = lo + 1;
    auto Y = [&](double v) { return y0 + h * (1.0 - (v - lo) / (hi - lo)); };
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    os << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='14'>final mean return</text>\n";
    double bw = w / bars.size();
    for (size_t i = 0; i < bars.size(); ++i) {
      double m = bars[i].second.first, se = bars[i].second.second;
      double x = x0 + i * bw + bw * 0.15;
      double top = std::min(Y(m), Y(0)), bottom = std::max(Y(m), Y(0));
      os << "<rect x='" << x << "' y='" << top << "' width='" << bw * 0.7 << "' height='" << bottom - top
         << "' fill='" << kPalette[i % 6] << "'/>\n";
      os << "<line x1='" << x + bw * 0.35 << "' x2='" << x + bw * 0.35 << "' y1='" << Y(m - se) << "' y2='"
         << Y(m + se) << "' stroke='black'/>\n";
      os << "<text x='" << x + bw * 0.35 << "' y='" << y0 + h + 18 << "' text-anchor='middle' font-size='11'>"
         << esc(bars[i].first) << "</text>\n";
    }
    os << "<line x1='" << x0 << "' x2='" << x0 + w << "' y1='" << Y(0) << "' y2='" << Y(0) << "' stroke='#444'/>\n";
    os << "</svg>\n";
    return os.str();
  }
  std::map<std::string, Series> ret, stab;
  for (const auto& [name, rs] : groups) {
    ret[name] = band(rs, false);
    stab[name] = band(rs, true);
  }
  if (kind == PlotKind::Stability) {
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='640' height='400'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    draw_panel(os, {80, 40, 520, 300}, "stability ||d(t+1) - d(t)||2 (log scale)", stab, true);
  } else {
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='1200' height='400'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    draw_panel(os, {80, 40, 480, 300}, "return", ret, false);
    draw_panel(os, {680, 40, 480, 300}, "stability (log scale)", stab, true);
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace pepg
