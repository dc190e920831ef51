#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

namespace levelnet {

/// RGB raster with channel values in [0,1], stored row-major with the channel
/// innermost (height x width x 3).
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int width, int height, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  double& at(int y, int x, int c) { return data_[offset(y, x, c)]; }
  double at(int y, int x, int c) const { return data_[offset(y, x, c)]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t offset(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels + c;
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// 8-bit RGB(A) PNG in, [0,1] doubles out. Alpha is dropped.
Image load_png(const std::filesystem::path& file);
/// Quantizes to 8 bits per channel.
void save_png(const Image& img, const std::filesystem::path& file);

/// Bilinear resampling with pixel-center alignment.
Image resize_bilinear(const Image& img, int width, int height);
/// Box-filter resampling: each output pixel averages the exact source area it
/// covers, with fractional weights at the borders.
Image resize_area(const Image& img, int width, int height);

/// Copy of the `width` x `height` block whose top-left pixel is (x, y).
Image crop(const Image& img, int x, int y, int width, int height);
/// Writes `src` into `dst` with its top-left pixel at (x, y).
void blit(Image& dst, const Image& src, int x, int y);

/// Adds i.i.d. N(0, sigma^2) noise and clamps to [0,1].
void add_gaussian_noise(Image& img, double sigma, std::mt19937_64& rng);

/// Round-trip through 8-bit quantization, as saving and reloading a PNG does.
Image quantize8(const Image& img);

}  // namespace levelnet
