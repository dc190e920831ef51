#include "levelnet/template_match.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>

#include "levelnet/error.hpp"

namespace levelnet {

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex mu;
  return mu;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (!p) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

// Circular cross-correlation sum_c sum_ij image_c[y+i, x+j] * templ_c[i, j]
// over an H x W torus; entries with y <= H-h and x <= W-w never wrap.
std::vector<double> correlate(const Image& image, const std::vector<double>& centered_templ,
                              int tw, int th) {
  const int H = image.height();
  const int W = image.width();
  const int Wc = W / 2 + 1;
  const std::size_t real_n = static_cast<std::size_t>(H) * W;
  const std::size_t cplx_n = static_cast<std::size_t>(H) * Wc;

  auto real_buf = fftw_buffer<double>(real_n);
  auto img_spec = fftw_buffer<fftw_complex>(cplx_n);
  auto tpl_spec = fftw_buffer<fftw_complex>(cplx_n);
  auto acc_spec = fftw_buffer<fftw_complex>(cplx_n);
  std::fill_n(&acc_spec[0][0], 2 * cplx_n, 0.0);

  fftw_plan fwd_img, fwd_tpl, inv;
  {
    std::lock_guard lock(fftw_planner_mutex());
    fwd_img = fftw_plan_dft_r2c_2d(H, W, real_buf.get(), img_spec.get(), FFTW_ESTIMATE);
    fwd_tpl = fftw_plan_dft_r2c_2d(H, W, real_buf.get(), tpl_spec.get(), FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_2d(H, W, acc_spec.get(), real_buf.get(), FFTW_ESTIMATE);
  }

  for (int c = 0; c < Image::kChannels; ++c) {
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) real_buf[static_cast<std::size_t>(y) * W + x] = image.at(y, x, c);
    fftw_execute(fwd_img);
    std::fill_n(real_buf.get(), real_n, 0.0);
    for (int y = 0; y < th; ++y)
      for (int x = 0; x < tw; ++x)
        real_buf[static_cast<std::size_t>(y) * W + x] =
            centered_templ[(static_cast<std::size_t>(y) * tw + x) * Image::kChannels + c];
    fftw_execute(fwd_tpl);
    for (std::size_t k = 0; k < cplx_n; ++k) {
      std::complex<double> a(img_spec[k][0], img_spec[k][1]);
      std::complex<double> b(tpl_spec[k][0], tpl_spec[k][1]);
      auto p = a * std::conj(b);
      acc_spec[k][0] += p.real();
      acc_spec[k][1] += p.imag();
    }
  }
  fftw_execute(inv);

  std::vector<double> out(real_n);
  const double norm = 1.0 / static_cast<double>(real_n);
  for (std::size_t i = 0; i < real_n; ++i) out[i] = real_buf[i] * norm;

  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd_img);
    fftw_destroy_plan(fwd_tpl);
    fftw_destroy_plan(inv);
  }
  return out;
}

}  // namespace

std::vector<double> ncc_map(const Image& templ, const Image& image) {
  const int tw = templ.width(), th = templ.height();
  const int W = image.width(), H = image.height();
  if (templ.empty() || image.empty()) throw DimensionError("template matching on an empty image");
  if (tw > W || th > H)
    throw FrameTooLargeError("frame " + std::to_string(tw) + "x" + std::to_string(th) +
                             " is larger than level image " + std::to_string(W) + "x" +
                             std::to_string(H));
  const double n = static_cast<double>(tw) * th * Image::kChannels;

  double mean = 0;
  for (double v : templ.data()) mean += v;
  mean /= n;
  std::vector<double> centered(templ.data().size());
  double templ_ss = 0;
  for (std::size_t i = 0; i < centered.size(); ++i) {
    centered[i] = templ.data()[i] - mean;
    templ_ss += centered[i] * centered[i];
  }

  // Integral images of the channel-pooled sum and sum of squares.
  const std::size_t stride = static_cast<std::size_t>(W) + 1;
  std::vector<double> s1((H + 1) * stride, 0.0), s2((H + 1) * stride, 0.0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double a = 0, b = 0;
      for (int c = 0; c < Image::kChannels; ++c) {
        double v = image.at(y, x, c);
        a += v;
        b += v * v;
      }
      s1[(y + 1) * stride + x + 1] = a + s1[y * stride + x + 1] + s1[(y + 1) * stride + x] -
                                     s1[y * stride + x];
      s2[(y + 1) * stride + x + 1] = b + s2[y * stride + x + 1] + s2[(y + 1) * stride + x] -
                                     s2[y * stride + x];
    }
  auto box = [&](const std::vector<double>& s, int y, int x) {
    return s[(y + th) * stride + x + tw] - s[y * stride + x + tw] - s[(y + th) * stride + x] +
           s[y * stride + x];
  };

  const auto corr = correlate(image, centered, tw, th);
  const int oh = H - th + 1, ow = W - tw + 1;
  std::vector<double> scores(static_cast<std::size_t>(oh) * ow, 0.0);
  const double var_floor = 1e-10 * n;
  if (templ_ss <= var_floor) return scores;
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double sum = box(s1, y, x);
      double patch_ss = box(s2, y, x) - sum * sum / n;
      if (patch_ss <= var_floor) continue;
      double s = corr[static_cast<std::size_t>(y) * W + x] / std::sqrt(templ_ss * patch_ss);
      scores[static_cast<std::size_t>(y) * ow + x] = std::clamp(s, -1.0, 1.0);
    }
  return scores;
}

MatchLocation locate_in_level(const Image& frame, const Image& level) {
  const auto scores = ncc_map(frame, level);
  const int ow = level.width() - frame.width() + 1;
  const int oh = level.height() - frame.height() + 1;
  MatchLocation best{0, 0, scores.front()};
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = scores[static_cast<std::size_t>(y) * ow + x];
      if (s > best.score + 1e-9) best = {x, y, s};
    }
  return best;
}

}  // namespace levelnet
