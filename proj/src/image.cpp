#include "illumseg/image.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <json.hpp>

#include "illumseg/errors.hpp"

namespace illumseg {

namespace {

constexpr double kLumaR = 0.299;
constexpr double kLumaG = 0.587;
constexpr double kLumaB = 0.114;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Decoded raster before colour reduction: row-major, `channels` samples per pixel,
// samples already divided by the maximum code value.
struct Decoded {
  std::size_t width = 0;
  std::size_t height = 0;
  int channels = 0;
  std::vector<double> samples;
};

RasterImage to_gray(const Decoded& d) {
  if (d.width == 0 || d.height == 0) throw IoError("zero-dimension image");
  Shape shape{d.height, d.width};
  std::vector<double> gray(shape.size());
  for (std::size_t i = 0; i < d.height; ++i) {
    for (std::size_t j = 0; j < d.width; ++j) {
      const double* px = &d.samples[(i * d.width + j) * static_cast<std::size_t>(d.channels)];
      double v = d.channels >= 3 ? kLumaR * px[0] + kLumaG * px[1] + kLumaB * px[2] : px[0];
      gray[j * d.height + i] = std::clamp(v, 0.0, 1.0);
    }
  }
  return RasterImage(shape, std::move(gray));
}

// --- PGM ------------------------------------------------------------------

bool next_header_token(std::istream& in, std::string& token) {
  token.clear();
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!token.empty()) return true;
      continue;
    }
    token.push_back(static_cast<char>(c));
  }
  return !token.empty();
}

Decoded read_pgm(std::istream& in) {
  std::string tok;
  if (!next_header_token(in, tok) || tok != "P5") throw IoError("unsupported format");
  std::size_t dims[3] = {0, 0, 0};
  for (auto& d : dims) {
    if (!next_header_token(in, tok)) throw IoError("unreadable file");
    try {
      std::size_t used = 0;
      long long v = std::stoll(tok, &used);
      if (used != tok.size() || v < 0) throw IoError("unreadable file");
      d = static_cast<std::size_t>(v);
    } catch (const std::logic_error&) {
      throw IoError("unreadable file");
    }
  }
  const std::size_t width = dims[0], height = dims[1], maxval = dims[2];
  if (width == 0 || height == 0) throw IoError("zero-dimension image");
  if (maxval == 0 || maxval > 65535) throw IoError("unreadable file");
  const std::size_t bytes_per_sample = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> raw(width * height * bytes_per_sample);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw IoError("unreadable file");

  Decoded d{width, height, 1, std::vector<double>(width * height)};
  for (std::size_t k = 0; k < d.samples.size(); ++k) {
    unsigned value = bytes_per_sample == 1 ? raw[k] : (unsigned{raw[2 * k]} << 8) | raw[2 * k + 1];
    if (value > maxval) throw IoError("unreadable file");
    d.samples[k] = static_cast<double>(value) / static_cast<double>(maxval);
  }
  return d;
}

void write_pgm(const std::filesystem::path& path, Shape shape, const std::vector<std::uint8_t>& row_major) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << shape.width << ' ' << shape.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(row_major.data()), static_cast<std::streamsize>(row_major.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

// --- PNG ------------------------------------------------------------------

// libpng reports errors through longjmp; everything with a destructor lives
// outside the setjmp frame.
bool decode_png(std::FILE* fp, Decoded& out, std::vector<unsigned char>& buffer) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int channels = png_get_channels(png, info);
  const int depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);

  buffer.resize(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  out.width = width;
  out.height = height;
  out.channels = channels;
  out.samples.resize(static_cast<std::size_t>(width) * height * static_cast<std::size_t>(channels));
  const double scale = depth == 16 ? 65535.0 : 255.0;
  for (std::size_t k = 0; k < out.samples.size(); ++k) {
    std::size_t row = k / (static_cast<std::size_t>(width) * static_cast<std::size_t>(channels));
    std::size_t col = k % (static_cast<std::size_t>(width) * static_cast<std::size_t>(channels));
    const unsigned char* base = buffer.data() + row * rowbytes;
    unsigned v = depth == 16 ? (unsigned{base[2 * col]} << 8) | base[2 * col + 1] : base[col];
    out.samples[k] = static_cast<double>(v) / scale;
  }
  return true;
}

bool encode_png(std::FILE* fp, png_uint_32 width, png_uint_32 height, int color_type,
                const std::vector<png_bytep>& rows) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

void write_png(const std::filesystem::path& path, Shape shape, int color_type,
               std::vector<std::uint8_t>& row_major, std::size_t channels) {
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + path.string());
  std::vector<png_bytep> rows(shape.height);
  for (std::size_t y = 0; y < shape.height; ++y) rows[y] = row_major.data() + y * shape.width * channels;
  if (!encode_png(fp.get(), static_cast<png_uint_32>(shape.width), static_cast<png_uint_32>(shape.height),
                  color_type, rows)) {
    throw IoError("cannot write " + path.string());
  }
  if (std::fflush(fp.get()) != 0) throw IoError("cannot write " + path.string());
}

bool has_extension(const std::filesystem::path& path, const char* ext) {
  std::string e = path.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e == ext;
}

void write_gray(const std::filesystem::path& path, Shape shape, std::vector<std::uint8_t>& row_major) {
  if (has_extension(path, ".pgm")) {
    write_pgm(path, shape, row_major);
  } else {
    write_png(path, shape, PNG_COLOR_TYPE_GRAY, row_major, 1);
  }
}

}  // namespace

RasterImage::RasterImage(Shape shape, std::vector<double> intensities)
    : shape_(shape), intensities_(std::move(intensities)) {
  if (shape_.height == 0 || shape_.width == 0) throw InvalidArgument("zero-dimension image");
  if (intensities_.size() != shape_.size()) throw InvalidArgument("RasterImage: intensity count mismatch");
  for (double v : intensities_) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("RasterImage: intensity outside [0,1]");
  }
}

RasterImage load_image(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw IoError("unreadable file: " + path.string());
  unsigned char sig[8] = {};
  const std::size_t got = std::fread(sig, 1, sizeof sig, fp.get());
  if (got >= 2 && sig[0] == 'P' && sig[1] == '5') {
    fp.reset();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("unreadable file: " + path.string());
    return to_gray(read_pgm(in));
  }
  if (got == sizeof sig && png_sig_cmp(sig, 0, sizeof sig) == 0) {
    std::rewind(fp.get());
    Decoded d;
    std::vector<unsigned char> buffer;
    if (!decode_png(fp.get(), d, buffer)) throw IoError("unreadable file: " + path.string());
    return to_gray(d);
  }
  if (got == 0) throw IoError("unreadable file: " + path.string());
  throw IoError("unsupported format: " + path.string());
}

std::uint8_t quantize_unit(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void save_image(const ScalarField& field, const std::filesystem::path& path, bool clamp) {
  if (field.empty()) throw InvalidArgument("save_image: empty field");
  if (!clamp) {
    for (double v : field.values()) {
      if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("save_image: value outside [0,1] with clamping off");
    }
  }
  const Shape shape = field.shape();
  std::vector<std::uint8_t> rows(shape.size());
  for (std::size_t i = 0; i < shape.height; ++i) {
    for (std::size_t j = 0; j < shape.width; ++j) rows[i * shape.width + j] = quantize_unit(field(i, j));
  }
  write_gray(path, shape, rows);
}

void save_image(const RasterImage& image, const std::filesystem::path& path) {
  save_image(image.to_field(), path, true);
}

void save_rgb_png(const RgbImage& image, const std::filesystem::path& path) {
  const Shape shape = image.shape;
  std::vector<std::uint8_t> rows(shape.size() * 3);
  for (std::size_t i = 0; i < shape.height; ++i) {
    for (std::size_t j = 0; j < shape.width; ++j) {
      const Rgb& px = image(i, j);
      std::memcpy(&rows[(i * shape.width + j) * 3], px.data(), 3);
    }
  }
  write_png(path, shape, PNG_COLOR_TYPE_RGB, rows, 3);
}

ScalarField to_log_domain(const RasterImage& image, double floor) {
  if (!(floor > 0.0)) throw InvalidArgument("to_log_domain: floor must be positive");
  ScalarField s(image.shape());
  const auto& in = image.intensities();
  for (std::size_t k = 0; k < s.size(); ++k) s[k] = std::log(std::max(in[k], floor));
  return s;
}

ScalarField reflection_from_r(const ScalarField& r) {
  ScalarField R(r.shape());
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (r[k] < 0.0) throw InvalidArgument("reflection_from_r: negative r entry");
    R[k] = std::exp(-r[k]);
  }
  return R;
}

ScalarField rescale_unit(const ScalarField& field) {
  ScalarField out(field.shape(), 0.5);
  if (field.empty()) return out;
  const double lo = field.min();
  const double hi = field.max();
  if (!(hi > lo)) return out;
  const double span = hi - lo;
  for (std::size_t k = 0; k < field.size(); ++k) out[k] = (field[k] - lo) / span;
  // exact endpoints regardless of rounding in the division
  for (std::size_t k = 0; k < field.size(); ++k) {
    if (field[k] == hi) out[k] = 1.0;
  }
  return out;
}

std::filesystem::path raw_sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  return p.replace_extension(".json");
}

void save_raw_field(const ScalarField& field, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (double v : field.values()) {
    auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    if constexpr (std::endian::native == std::endian::big) {
      bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) | ((bits >> 8) & 0xFF00u) | (bits >> 24);
    }
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) throw IoError("cannot write " + path.string());

  nlohmann::json meta = {{"width", field.width()}, {"height", field.height()}, {"dtype", "f32le"}, {"order", "col"}};
  std::ofstream side(raw_sidecar_path(path));
  if (!side) throw IoError("cannot write " + raw_sidecar_path(path).string());
  side << meta.dump(2) << '\n';
}

ScalarField load_raw_field(const std::filesystem::path& path) {
  std::ifstream side(raw_sidecar_path(path));
  if (!side) throw IoError("unreadable file: " + raw_sidecar_path(path).string());
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const nlohmann::json::exception&) {
    throw IoError("unreadable file: " + raw_sidecar_path(path).string());
  }
  if (meta.value("dtype", "") != "f32le" || meta.value("order", "") != "col") {
    throw IoError("unsupported format: " + raw_sidecar_path(path).string());
  }
  Shape shape;
  try {
    shape = Shape{meta.at("height").get<std::size_t>(), meta.at("width").get<std::size_t>()};
  } catch (const nlohmann::json::exception&) {
    throw IoError("unsupported format: " + raw_sidecar_path(path).string());
  }
  if (shape.size() == 0) throw IoError("zero-dimension image");

  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("unreadable file: " + path.string());
  std::vector<double> values(shape.size());
  for (double& v : values) {
    std::uint32_t bits = 0;
    if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) throw IoError("unreadable file: " + path.string());
    if constexpr (std::endian::native == std::endian::big) {
      bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) | ((bits >> 8) & 0xFF00u) | (bits >> 24);
    }
    v = static_cast<double>(std::bit_cast<float>(bits));
  }
  return ScalarField(shape, std::move(values));
}

}  // namespace illumseg
