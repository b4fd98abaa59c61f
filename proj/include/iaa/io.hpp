#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "iaa/tensor.hpp"

namespace iaa {

// Binary tensor format: magic "IAAT1", u32-LE rank, rank u32-LE extents,
// then row-major f64-LE values. Write -> read round-trips bit-exactly.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

// Binary PPM (P6, maxval 255). Accepts [H,W], [1,H,W] or [3,H,W] in [0,1];
// grayscale is replicated to RGB. Values round half-to-even.
void save_ppm(const std::filesystem::path& path, const Tensor& frame);

// Deterministic number formatting shared by CSV and SVG output.
std::string format_double(double v);

// Minimal CSV writer: header fixed at construction, one row per call,
// '.' decimal separator, UTF-8.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns);
  void row(const std::vector<std::string>& cells);
  void row_values(const std::vector<double>& values);
  const std::string& str() const { return out_; }
  void save(const std::filesystem::path& path) const;
  std::size_t column_count() const { return columns_; }

 private:
  std::string out_;
  std::size_t columns_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // FormatError if absent
  double number(std::size_t row, std::size_t col) const;
};

CsvTable read_csv(const std::filesystem::path& path);

// One polyline on an SVG chart.
struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Static SVG line chart (no scripting). Series data is expected to come
// from a sibling CSV; the plotters in the harness read it back from disk.
void save_svg_chart(const std::filesystem::path& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<PlotSeries>& series);

}  // namespace iaa
