#include "iaa/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace iaa {

namespace {

constexpr char kTensorMagic[5] = {'I', 'A', 'A', 'T', '1'};

void put_u32le(std::ostream& os, std::uint32_t v) {
  char buf[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(buf, 4);
}

std::uint32_t get_u32le(std::istream& is) {
  unsigned char buf[4];
  if (!is.read(reinterpret_cast<char*>(buf), 4)) throw FormatError("tensor: truncated header");
  return static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
         (static_cast<std::uint32_t>(buf[2]) << 16) | (static_cast<std::uint32_t>(buf[3]) << 24);
}

void put_f64le(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(buf, 8);
}

double get_f64le(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) throw FormatError("tensor: truncated data");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write(kTensorMagic, sizeof kTensorMagic);
  put_u32le(os, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) {
    if (d > 0xffffffffULL) throw FormatError("tensor: extent overflows u32");
    put_u32le(os, static_cast<std::uint32_t>(d));
  }
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  } else {
    for (double v : t.data()) put_f64le(os, v);
  }
}

Tensor read_tensor(std::istream& is) {
  char magic[5];
  if (!is.read(magic, 5) || std::memcmp(magic, kTensorMagic, 5) != 0) {
    throw FormatError("tensor: bad magic");
  }
  const std::uint32_t rank = get_u32le(is);
  if (rank > 8) throw FormatError("tensor: implausible rank");
  Shape shape(rank);
  std::size_t numel = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::uint32_t d = get_u32le(is);
    if (d == 0) throw FormatError("tensor: zero extent");
    if (numel > (1ULL << 32) / std::max<std::size_t>(d, 1)) {
      throw FormatError("tensor: dimension overflow");
    }
    shape[i] = d;
    numel *= d;
  }
  std::vector<double> data(numel);
  if constexpr (std::endian::native == std::endian::little) {
    if (!is.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(numel * sizeof(double)))) {
      throw FormatError("tensor: truncated data");
    }
  } else {
    for (double& v : data) v = get_f64le(is);
  }
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  write_tensor(os, t);
  if (!os) throw FormatError("write failed: " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open: " + path.string());
  return read_tensor(is);
}

namespace {

// round half-to-even to an integer in [0, 255]
unsigned char quantize_u8(double v) {
  const double scaled = std::clamp(v, 0.0, 1.0) * 255.0;
  double r = std::nearbyint(scaled);  // default rounding mode: to nearest, ties to even
  return static_cast<unsigned char>(std::clamp(r, 0.0, 255.0));
}

}  // namespace

void save_ppm(const std::filesystem::path& path, const Tensor& frame) {
  std::size_t C, H, W;
  if (frame.rank() == 2) {
    C = 1;
    H = frame.shape()[0];
    W = frame.shape()[1];
  } else if (frame.rank() == 3 && (frame.shape()[0] == 1 || frame.shape()[0] == 3)) {
    C = frame.shape()[0];
    H = frame.shape()[1];
    W = frame.shape()[2];
  } else {
    throw ShapeError("save_ppm: expected [H,W], [1,H,W] or [3,H,W]");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  os << "P6\n" << W << " " << H << "\n255\n";
  auto fd = frame.data();
  std::vector<unsigned char> row(W * 3);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t src_c = C == 1 ? 0 : c;
        row[x * 3 + c] = quantize_u8(fd[(src_c * H + y) * W + x]);
      }
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw FormatError("write failed: " + path.string());
}

std::string format_double(double v) {
  if (v == static_cast<double>(static_cast<long long>(v)) && std::abs(v) < 1e15) {
    return std::to_string(static_cast<long long>(v));
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

CsvWriter::CsvWriter(std::vector<std::string> columns) : columns_(columns.size()) {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out_ += ',';
    out_ += columns[i];
  }
  out_ += '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw ContractError("csv row width mismatch");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ += ',';
    out_ += cells[i];
  }
  out_ += '\n';
}

void CsvWriter::row_values(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_double(v));
  row(cells);
}

void CsvWriter::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  os.write(out_.data(), static_cast<std::streamsize>(out_.size()));
  if (!os) throw FormatError("write failed: " + path.string());
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw FormatError("csv: no column named " + name);
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  const std::string& cell = rows.at(row).at(col);
  try {
    std::size_t pos = 0;
    const double v = std::stod(cell, &pos);
    if (pos != cell.size()) throw FormatError("csv: trailing junk in number");
    return v;
  } catch (const std::invalid_argument&) {
    throw FormatError("csv: not a number: " + cell);
  }
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open: " + path.string());
  CsvTable table;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
      if (ch == ',') {
        out.push_back(cur);
        cur.clear();
      } else if (ch != '\r') {
        cur += ch;
      }
    }
    out.push_back(cur);
    return out;
  };
  if (!std::getline(is, line)) throw FormatError("csv: empty file");
  table.header = split(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != table.header.size()) throw FormatError("csv: ragged row");
    table.rows.push_back(std::move(cells));
  }
  return table;
}

namespace {

struct AxisScale {
  double lo, hi;
  double to_px(double v, double px_lo, double px_hi) const {
    if (hi == lo) return (px_lo + px_hi) / 2.0;
    return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo);
  }
};

AxisScale fit_axis(const std::vector<PlotSeries>& series, bool x_axis) {
  double lo = 0.0, hi = 1.0;
  bool first = true;
  for (const auto& s : series) {
    const auto& vals = x_axis ? s.x : s.y;
    for (double v : vals) {
      if (first) {
        lo = hi = v;
        first = false;
      } else {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (hi == lo) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = (hi - lo) * 0.05;
  return {lo - pad, hi + pad};
}

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                               "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

void save_svg_chart(const std::filesystem::path& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<PlotSeries>& series) {
  const double width = 640, height = 420;
  const double ml = 70, mr = 150, mt = 40, mb = 50;
  const AxisScale xs = fit_axis(series, true);
  const AxisScale ys = fit_axis(series, false);
  auto px = [&](double v) { return xs.to_px(v, ml, width - mr); };
  auto py = [&](double v) { return ys.to_px(v, height - mb, mt); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
     << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << (ml + (width - ml - mr) / 2) << "\" y=\"24\" text-anchor=\"middle\" "
        "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";

  // axes
  os << "<line x1=\"" << ml << "\" y1=\"" << (height - mb) << "\" x2=\"" << (width - mr)
     << "\" y2=\"" << (height - mb) << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
     << (height - mb) << "\" stroke=\"black\"/>\n";

  // ticks (5 per axis)
  for (int i = 0; i <= 4; ++i) {
    const double fx = xs.lo + (xs.hi - xs.lo) * i / 4.0;
    const double fy = ys.lo + (ys.hi - ys.lo) * i / 4.0;
    os << "<line x1=\"" << px(fx) << "\" y1=\"" << (height - mb) << "\" x2=\"" << px(fx)
       << "\" y2=\"" << (height - mb + 5) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << px(fx) << "\" y=\"" << (height - mb + 18)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
       << format_double(fx) << "</text>\n";
    os << "<line x1=\"" << (ml - 5) << "\" y1=\"" << py(fy) << "\" x2=\"" << ml << "\" y2=\""
       << py(fy) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << (ml - 8) << "\" y=\"" << (py(fy) + 4)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
       << format_double(fy) << "</text>\n";
  }
  os << "<text x=\"" << (ml + (width - ml - mr) / 2) << "\" y=\"" << (height - 12)
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << x_label
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << (mt + (height - mt - mb) / 2)
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        "transform=\"rotate(-90 16 " << (mt + (height - mt - mb) / 2) << ")\">" << y_label
     << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kSeriesColors[si % (sizeof kSeriesColors / sizeof *kSeriesColors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) os << ' ';
      os << format_double(px(s.x[i])) << ',' << format_double(py(s.y[i]));
    }
    os << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      os << "<circle cx=\"" << format_double(px(s.x[i])) << "\" cy=\""
         << format_double(py(s.y[i])) << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
    const double ly = mt + 16.0 * static_cast<double>(si);
    os << "<line x1=\"" << (width - mr + 10) << "\" y1=\"" << ly << "\" x2=\""
       << (width - mr + 30) << "\" y2=\"" << ly << "\" stroke=\"" << color
       << "\" stroke-width=\"1.5\"/>\n";
    os << "<text x=\"" << (width - mr + 35) << "\" y=\"" << (ly + 4)
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";

  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open for writing: " + path.string());
  const std::string out = os.str();
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("write failed: " + path.string());
}

}  // namespace iaa
