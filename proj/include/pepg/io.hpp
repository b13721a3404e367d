#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pepg/trainers.hpp"
#include "pepg/verify.hpp"

namespace pepg {

extern const char* const kCsvHeader;

std::string format_double(double v);
std::string run_csv(const RunRecord& record);
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

struct CsvRun {
  std::string algo;
  std::uint64_t seed = 0;
  std::vector<RunRow> rows;
};
// Parses one CSV written by run_csv. Throws InvalidInput on malformed content.
CsvRun parse_run_csv(const std::string& text);

std::uint64_t fnv1a64(const std::string& text);
std::string hex64(std::uint64_t v);
const char* git_describe();

std::string reports_json(const std::vector<LemmaReport>& reports);
std::string reports_table(const std::vector<LemmaReport>& reports);

enum class PlotKind { Curves, Stability, SweepBars };
PlotKind parse_plot_kind(const std::string& name);
// Groups runs by algo; mean with +-1 stderr band across seeds.
std::string plot_svg(const std::vector<CsvRun>& runs, PlotKind kind);

}  // namespace pepg
