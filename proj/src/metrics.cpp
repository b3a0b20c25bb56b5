#include "nsvf/metrics.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace nsvf {
namespace {

void check_same(const Image& a, const Image& b, const char* what) {
  if (a.width != b.width || a.height != b.height || a.data.size() != b.data.size())
    throw InvalidArgument(std::string(what) + ": image dimensions differ");
  if (a.width <= 0 || a.height <= 0) throw InvalidArgument(std::string(what) + ": empty image");
}

std::vector<double> luma(const Image& img) {
  std::vector<double> y(static_cast<std::size_t>(img.width) * img.height);
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] = 0.299 * img.data[3 * i] + 0.587 * img.data[3 * i + 1] + 0.114 * img.data[3 * i + 2];
  return y;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  check_same(a, b, "psnr");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b) {
  check_same(a, b, "ssim");
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  if (a.width < kWin || a.height < kWin) throw InvalidArgument("ssim: image smaller than the 11x11 window");

  double g[kWin];
  double norm = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double x = i - kWin / 2;
    g[i] = std::exp(-x * x / (2 * kSigma * kSigma));
    norm += g[i];
  }
  for (double& v : g) v /= norm;

  const int w = a.width, h = a.height;
  const auto ya = luma(a), yb = luma(b);
  // Separable filtering of the five moment images, horizontal pass first.
  const int ow = w - kWin + 1, oh = h - kWin + 1;
  std::vector<double> src[5];
  for (auto& s : src) s.resize(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < ya.size(); ++i) {
    src[0][i] = ya[i];
    src[1][i] = yb[i];
    src[2][i] = ya[i] * ya[i];
    src[3][i] = yb[i] * yb[i];
    src[4][i] = ya[i] * yb[i];
  }
  std::vector<double> horiz[5], moments[5];
  for (int m = 0; m < 5; ++m) {
    horiz[m].assign(static_cast<std::size_t>(ow) * h, 0.0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0.0;
        for (int k = 0; k < kWin; ++k) s += g[k] * src[m][static_cast<std::size_t>(y) * w + x + k];
        horiz[m][static_cast<std::size_t>(y) * ow + x] = s;
      }
    moments[m].assign(static_cast<std::size_t>(ow) * oh, 0.0);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0.0;
        for (int k = 0; k < kWin; ++k) s += g[k] * horiz[m][static_cast<std::size_t>(y + k) * ow + x];
        moments[m][static_cast<std::size_t>(y) * ow + x] = s;
      }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < moments[0].size(); ++i) {
    const double mu_a = moments[0][i], mu_b = moments[1][i];
    const double var_a = moments[2][i] - mu_a * mu_a;
    const double var_b = moments[3][i] - mu_b * mu_b;
    const double cov = moments[4][i] - mu_a * mu_b;
    total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
  }
  return total / static_cast<double>(moments[0].size());
}

}  // namespace nsvf
