#include "snore/export.hpp"

#include "snore/errors.hpp"

#include <json.hpp>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

namespace snore {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void make_directories(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) make_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void write_grid(const std::filesystem::path& path, const Matrix& values, const Spectrogram& axes) {
  if (values.rows() != axes.bin_freqs_hz.size()) throw MismatchError("matrix rows do not match the frequency axis");
  auto out = open_out(path);
  out << "freq_hz";
  for (std::size_t m = 0; m < values.cols(); ++m) out << ',' << num(axes.frame_time_s(m));
  out << '\n';
  for (std::size_t k = 0; k < values.rows(); ++k) {
    out << num(axes.bin_freqs_hz[k]);
    for (double v : values.row(k)) out << ',' << num(v);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<double> split_numbers(const std::string& line, const std::filesystem::path& path, bool skip_first) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  bool first = true;
  while (std::getline(ss, cell, ',')) {
    if (first && skip_first) {
      first = false;
      continue;
    }
    first = false;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size() && cell.find_first_not_of(" \r", used) != std::string::npos) throw ParseError("");
    } catch (const std::exception&) {
      throw ParseError("bad number '" + cell + "' in " + path.string());
    }
  }
  return out;
}

}  // namespace

void write_spectrogram_csv(const std::filesystem::path& path, const Spectrogram& spec) {
  write_grid(path, spec.values, spec);
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& values, const Spectrogram& axes) {
  if (values.cols() != axes.frames()) throw MismatchError("matrix columns do not match the time axis");
  write_grid(path, values, axes);
}

Spectrogram read_spectrogram_csv(const std::filesystem::path& path, TfrKind kind, int sample_rate) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty spectrogram file " + path.string());
  const auto times = split_numbers(line, path, true);
  Spectrogram spec;
  spec.kind = kind;
  spec.sample_rate = sample_rate;
  if (!times.empty()) spec.frame_offset_samples = static_cast<int>(std::lround(times[0] * sample_rate));
  if (times.size() > 1) spec.hop_samples = static_cast<int>(std::lround((times[1] - times[0]) * sample_rate));
  std::vector<double> cells;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto row = split_numbers(line, path, false);
    if (row.size() != times.size() + 1) throw ParseError("ragged row in " + path.string());
    spec.bin_freqs_hz.push_back(row[0]);
    cells.insert(cells.end(), row.begin() + 1, row.end());
  }
  spec.values = Matrix(spec.bin_freqs_hz.size(), times.size());
  std::copy(cells.begin(), cells.end(), spec.values.data().begin());
  return spec;
}

void write_png_gray(const std::filesystem::path& path, std::size_t width, std::size_t height,
                    std::span<const std::uint8_t> pixels) {
  if (width == 0 || height == 0 || pixels.size() != width * height) {
    throw ArgumentError("pixel buffer does not match the image size");
  }
  if (path.has_parent_path()) make_directories(path.parent_path());
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels.data() + y * width));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::vector<std::uint8_t> render_magnitude(const Matrix& values) {
  constexpr double kFloorDb = -80.0;
  std::vector<std::uint8_t> px(values.size(), 0);
  double peak = 0.0;
  for (double v : values.data()) peak = std::max(peak, std::abs(v));
  if (peak <= 0.0) return px;
  const std::size_t rows = values.rows();
  for (std::size_t k = 0; k < rows; ++k) {
    const std::size_t y = rows - 1 - k;
    for (std::size_t m = 0; m < values.cols(); ++m) {
      const double a = std::abs(values(k, m));
      const double db = a > 0.0 ? 20.0 * std::log10(a / peak) : kFloorDb;
      const double level = std::clamp((db - kFloorDb) / -kFloorDb, 0.0, 1.0);
      px[y * values.cols() + m] = static_cast<std::uint8_t>(std::lround(255.0 * level));
    }
  }
  return px;
}

void write_spectrogram_png(const std::filesystem::path& path, const Matrix& values) {
  write_png_gray(path, values.cols(), values.rows(), render_magnitude(values));
}

std::vector<std::uint8_t> render_mask(const Matrix& mask) {
  std::vector<std::uint8_t> px(mask.size(), 0);
  const std::size_t rows = mask.rows();
  for (std::size_t k = 0; k < rows; ++k) {
    for (std::size_t m = 0; m < mask.cols(); ++m) {
      const double level = std::clamp(mask(k, m), 0.0, 1.0);
      px[(rows - 1 - k) * mask.cols() + m] = static_cast<std::uint8_t>(std::lround(255.0 * level));
    }
  }
  return px;
}

void write_mask_png(const std::filesystem::path& path, const Matrix& mask) {
  write_png_gray(path, mask.cols(), mask.rows(), render_mask(mask));
}

void write_side_by_side_png(const std::filesystem::path& path, const Matrix& left, const Matrix& right) {
  constexpr std::size_t kGap = 4;
  const auto a = render_magnitude(left);
  const auto b = render_magnitude(right);
  const std::size_t h = std::max(left.rows(), right.rows());
  const std::size_t w = left.cols() + kGap + right.cols();
  std::vector<std::uint8_t> px(w * h, 0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t g = 0; g < kGap; ++g) px[y * w + left.cols() + g] = 255;
  }
  // Align bottoms so bin 0 sits on the same line in both halves.
  for (std::size_t y = 0; y < left.rows(); ++y) {
    std::copy_n(a.begin() + y * left.cols(), left.cols(), px.begin() + (y + h - left.rows()) * w);
  }
  for (std::size_t y = 0; y < right.rows(); ++y) {
    std::copy_n(b.begin() + y * right.cols(), right.cols(),
                px.begin() + (y + h - right.rows()) * w + left.cols() + kGap);
  }
  write_png_gray(path, w, h, px);
}

void write_line_plot_png(const std::filesystem::path& path, const std::vector<std::vector<double>>& xs,
                         const std::vector<std::vector<double>>& ys, std::size_t width, std::size_t height) {
  if (xs.size() != ys.size()) throw MismatchError("plot needs one x series per y series");
  constexpr std::size_t kMargin = 16;
  if (width <= 2 * kMargin || height <= 2 * kMargin) throw ArgumentError("plot is too small");
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (std::size_t s = 0; s < xs.size(); ++s) {
    if (xs[s].size() != ys[s].size()) throw MismatchError("x and y series differ in length");
    for (std::size_t i = 0; i < xs[s].size(); ++i) {
      if (!std::isfinite(xs[s][i]) || !std::isfinite(ys[s][i])) continue;
      x0 = std::min(x0, xs[s][i]);
      x1 = std::max(x1, xs[s][i]);
      y0 = std::min(y0, ys[s][i]);
      y1 = std::max(y1, ys[s][i]);
    }
  }
  if (!(x0 <= x1)) x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;

  std::vector<std::uint8_t> px(width * height, 255);
  const double pw = static_cast<double>(width - 2 * kMargin - 1);
  const double ph = static_cast<double>(height - 2 * kMargin - 1);
  const auto plot = [&](long x, long y, std::uint8_t shade) {
    if (x >= 0 && y >= 0 && x < static_cast<long>(width) && y < static_cast<long>(height)) px[y * width + x] = shade;
  };
  for (std::size_t x = kMargin; x < width - kMargin; ++x) {
    plot(static_cast<long>(x), static_cast<long>(height - kMargin - 1), 160);
    plot(static_cast<long>(x), static_cast<long>(kMargin), 160);
  }
  for (std::size_t y = kMargin; y < height - kMargin; ++y) {
    plot(static_cast<long>(kMargin), static_cast<long>(y), 160);
    plot(static_cast<long>(width - kMargin - 1), static_cast<long>(y), 160);
  }
  for (std::size_t s = 0; s < xs.size(); ++s) {
    // Successive series get lighter shades so overlapping curves stay distinguishable.
    const auto shade = static_cast<std::uint8_t>(std::min<std::size_t>(s * 70, 140));
    bool have_prev = false;
    double px0 = 0.0, py0 = 0.0;
    for (std::size_t i = 0; i < xs[s].size(); ++i) {
      if (!std::isfinite(xs[s][i]) || !std::isfinite(ys[s][i])) {
        have_prev = false;
        continue;
      }
      const double cx = kMargin + (xs[s][i] - x0) / (x1 - x0) * pw;
      const double cy = height - kMargin - 1 - (ys[s][i] - y0) / (y1 - y0) * ph;
      if (have_prev) {
        const int steps = static_cast<int>(std::max(std::abs(cx - px0), std::abs(cy - py0))) + 1;
        for (int t = 0; t <= steps; ++t) {
          const double u = static_cast<double>(t) / steps;
          plot(std::lround(px0 + u * (cx - px0)), std::lround(py0 + u * (cy - py0)), shade);
        }
      } else {
        plot(std::lround(cx), std::lround(cy), shade);
      }
      px0 = cx;
      py0 = cy;
      have_prev = true;
    }
  }
  write_png_gray(path, width, height, px);
}

void write_roc_csv(const std::filesystem::path& path, const RocResult& roc) {
  auto out = open_out(path);
  out << "threshold,fpr,tpr\n";
  for (const auto& p : roc.curve) out << num(p.threshold) << ',' << num(p.fpr) << ',' << num(p.tpr) << '\n';
}

void write_train_report_csv(const std::filesystem::path& path, const TrainReport& report) {
  auto out = open_out(path);
  out << "epoch,train_loss,val_loss,train_acc,val_acc\n";
  for (const auto& e : report.epochs) {
    out << e.epoch << ',' << num(e.train_loss) << ',' << num(e.val_loss) << ',' << num(e.train_acc) << ','
        << num(e.val_acc) << '\n';
  }
}

namespace {

constexpr const char* kCheckpointFormat = "snorehpss-cnn";
constexpr int kCheckpointVersion = 1;

struct Block {
  const char* name;
  std::size_t offset;
  std::vector<std::size_t> shape;
};

std::vector<Block> checkpoint_blocks() {
  using P = ModelParams;
  return {{"conv1.weight", P::kConv1W, {P::kConv1Out, 1, 3, 3}},
          {"conv1.bias", P::kConv1B, {P::kConv1Out}},
          {"conv2.weight", P::kConv2W, {P::kConv2Out, P::kConv1Out, 3, 3}},
          {"conv2.bias", P::kConv2B, {P::kConv2Out}},
          {"dense1.weight", P::kDense1W, {P::kHidden, P::kFlat}},
          {"dense1.bias", P::kDense1B, {P::kHidden}},
          {"dense2.weight", P::kDense2W, {P::kClasses, P::kHidden}},
          {"dense2.bias", P::kDense2B, {P::kClasses}}};
}

std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const ModelParams& model) {
  if (model.data.size() != ModelParams::kSize) throw ArgumentError("checkpoint: wrong parameter count");
  nlohmann::json arrays = nlohmann::json::array();
  for (const auto& b : checkpoint_blocks()) {
    const auto first = model.data.begin() + static_cast<std::ptrdiff_t>(b.offset);
    arrays.push_back({{"name", b.name},
                      {"shape", b.shape},
                      {"values", std::vector<double>(first, first + static_cast<std::ptrdiff_t>(element_count(b.shape)))}});
  }
  const nlohmann::json doc{{"format", kCheckpointFormat}, {"version", kCheckpointVersion}, {"arrays", arrays}};
  auto out = open_out(path);
  // Doubles are dumped in shortest round-trip form, so reading back is exact.
  out << doc.dump() << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

ModelParams read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  const auto where = path.string() + ": ";
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where + e.what());
  }
  if (!doc.is_object() || doc.value("format", std::string()) != kCheckpointFormat) {
    throw ParseError(where + "not a model checkpoint");
  }
  if (!doc.contains("version") || doc["version"] != kCheckpointVersion) {
    throw ParseError(where + "unsupported checkpoint version");
  }
  const auto blocks = checkpoint_blocks();
  const auto& arrays = doc["arrays"];
  if (!arrays.is_array() || arrays.size() != blocks.size()) throw ParseError(where + "expected 8 parameter arrays");
  ModelParams model;
  try {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& a = arrays[i];
      const auto& b = blocks[i];
      if (a.at("name").get<std::string>() != b.name) throw ParseError(where + "array " + std::to_string(i) + " is not " + b.name);
      if (a.at("shape").get<std::vector<std::size_t>>() != b.shape) throw ParseError(where + b.name + " has the wrong shape");
      const auto values = a.at("values").get<std::vector<double>>();
      if (values.size() != element_count(b.shape)) throw ParseError(where + b.name + " has the wrong number of values");
      std::copy(values.begin(), values.end(), model.data.begin() + static_cast<std::ptrdiff_t>(b.offset));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where + e.what());
  }
  return model;
}

}  // namespace snore
