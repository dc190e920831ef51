#include "levelnet/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "levelnet/error.hpp"

namespace levelnet {

Image::Image(int width, int height, double fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw DimensionError("image dimensions must be non-negative");
  data_.assign(static_cast<std::size_t>(width) * height * kChannels, fill);
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

Image load_png(const std::filesystem::path& file) {
  FilePtr fp(std::fopen(file.c_str(), "rb"));
  if (!fp) throw ImageIOError("cannot open " + file.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw ImageIOError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw ImageIOError("libpng init failed");
  }
  std::vector<std::uint8_t> pixels;
  png_uint_32 w = 0, h = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIOError("malformed PNG " + file.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const auto rowbytes = png_get_rowbytes(png, info);
  pixels.resize(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < img.data().size(); ++i) img.data()[i] = pixels[i] / 255.0;
  return img;
}

void save_png(const Image& img, const std::filesystem::path& file) {
  if (img.empty()) throw ImageIOError("refusing to write an empty image to " + file.string());
  FilePtr fp(std::fopen(file.c_str(), "wb"));
  if (!fp) throw DiskError("cannot write " + file.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw ImageIOError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw ImageIOError("libpng init failed");
  }
  std::vector<std::uint8_t> pixels(img.data().size());
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = to_byte(img.data()[i]);
  std::vector<png_bytep> rows(img.height());
  for (int y = 0; y < img.height(); ++y)
    rows[y] = pixels.data() + static_cast<std::size_t>(y) * img.width() * Image::kChannels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DiskError("failed writing PNG " + file.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image resize_bilinear(const Image& img, int width, int height) {
  if (width <= 0 || height <= 0 || img.empty())
    throw DimensionError("bilinear resize needs non-empty source and target");
  if (width == img.width() && height == img.height()) return img;
  Image out(width, height);
  const double sx = static_cast<double>(img.width()) / width;
  const double sy = static_cast<double>(img.height()) / height;
  for (int y = 0; y < height; ++y) {
    double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, img.height() - 1);
    double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, img.width() - 1);
      double wx = fx - x0;
      for (int c = 0; c < Image::kChannels; ++c) {
        double top = img.at(y0, x0, c) * (1 - wx) + img.at(y0, x1, c) * wx;
        double bot = img.at(y1, x0, c) * (1 - wx) + img.at(y1, x1, c) * wx;
        out.at(y, x, c) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return out;
}

namespace {

// Overlap weights of output cell `o` with source cells, for a 1-D box filter.
std::vector<std::pair<int, double>> box_weights(int o, int src, int dst) {
  const double scale = static_cast<double>(src) / dst;
  const double lo = o * scale;
  const double hi = (o + 1) * scale;
  std::vector<std::pair<int, double>> w;
  for (int s = static_cast<int>(std::floor(lo)); s < std::min(src, static_cast<int>(std::ceil(hi)));
       ++s) {
    double overlap = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
    if (overlap > 0) w.emplace_back(s, overlap / scale);
  }
  return w;
}

}  // namespace

Image resize_area(const Image& img, int width, int height) {
  if (width <= 0 || height <= 0 || img.empty())
    throw DimensionError("area resize needs non-empty source and target");
  if (width == img.width() && height == img.height()) return img;
  std::vector<std::vector<std::pair<int, double>>> wx(width), wy(height);
  for (int x = 0; x < width; ++x) wx[x] = box_weights(x, img.width(), width);
  for (int y = 0; y < height; ++y) wy[y] = box_weights(y, img.height(), height);
  Image out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (auto [sy, ay] : wy[y])
        for (auto [sx, ax] : wx[x])
          for (int c = 0; c < Image::kChannels; ++c) out.at(y, x, c) += ay * ax * img.at(sy, sx, c);
  return out;
}

Image crop(const Image& img, int x, int y, int width, int height) {
  if (x < 0 || y < 0 || width <= 0 || height <= 0 || x + width > img.width() ||
      y + height > img.height())
    throw WindowOutOfBoundsError("crop " + std::to_string(width) + "x" + std::to_string(height) +
                                 " at (" + std::to_string(x) + ", " + std::to_string(y) +
                                 ") leaves the " + std::to_string(img.width()) + "x" +
                                 std::to_string(img.height()) + " image");
  Image out(width, height);
  for (int r = 0; r < height; ++r)
    std::copy_n(img.data().begin() + ((static_cast<std::size_t>(y + r) * img.width() + x) * Image::kChannels), static_cast<std::size_t>(width) * Image::kChannels,
                &out.at(r, 0, 0));
  return out;
}

void blit(Image& dst, const Image& src, int x, int y) {
  if (x < 0 || y < 0 || x + src.width() > dst.width() || y + src.height() > dst.height())
    throw WindowOutOfBoundsError("blit target leaves the destination image");
  for (int r = 0; r < src.height(); ++r)
    std::copy_n(src.data().begin() + static_cast<std::size_t>(r) * src.width() * Image::kChannels, static_cast<std::size_t>(src.width()) * Image::kChannels,
                &dst.at(y + r, x, 0));
}

void add_gaussian_noise(Image& img, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, sigma);
  for (double& v : img.data()) v = std::clamp(v + n(rng), 0.0, 1.0);
}

Image quantize8(const Image& img) {
  Image out = img;
  for (double& v : out.data()) v = to_byte(v) / 255.0;
  return out;
}

}  // namespace levelnet
