#include "nsvf/metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace nsvf;

namespace {

Image random_image(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(w, h);
  for (float& v : img.data) v = u(rng);
  return img;
}

// Straight sliding-window SSIM on luma with explicit loops.
double ssim_reference(const Image& a, const Image& b) {
  const auto luma = [](const Image& im, int x, int y) {
    const Vec3 p = im.pixel(x, y);
    return 0.299 * p.x() + 0.587 * p.y() + 0.114 * p.z();
  };
  double w[11][11], wsum = 0.0;
  for (int j = 0; j < 11; ++j)
    for (int i = 0; i < 11; ++i) {
      w[j][i] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
      wsum += w[j][i];
    }
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  int count = 0;
  for (int y = 0; y + 11 <= a.height; ++y)
    for (int x = 0; x + 11 <= a.width; ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int j = 0; j < 11; ++j)
        for (int i = 0; i < 11; ++i) {
          const double k = w[j][i] / wsum, la = luma(a, x + i, y + j), lb = luma(b, x + i, y + j);
          ma += k * la;
          mb += k * lb;
          saa += k * la * la;
          sbb += k * lb * lb;
          sab += k * la * lb;
        }
      saa -= ma * ma;
      sbb -= mb * mb;
      sab -= ma * mb;
      total += ((2 * ma * mb + c1) * (2 * sab + c2)) / ((ma * ma + mb * mb + c1) * (saa + sbb + c2));
      ++count;
    }
  return total / count;
}

}  // namespace

TEST_CASE("psnr: closed forms, symmetry and formula oracle") {
  const Image zero(16, 16, Vec3::Zero());
  const Image tenth(16, 16, Vec3::Constant(0.1));
  CHECK(psnr(zero, tenth) == doctest::Approx(20.0).epsilon(1e-6));
  CHECK(psnr(zero, zero) == std::numeric_limits<double>::infinity());

  std::mt19937_64 rng(9);
  const Image a = random_image(rng, 13, 7), b = random_image(rng, 13, 7);
  double se = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) se += std::pow(double(a.data[i]) - double(b.data[i]), 2);
  CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(a.data.size() / se)).epsilon(1e-12));
  CHECK(psnr(a, b) == psnr(b, a));
  CHECK_THROWS_AS(psnr(a, Image(13, 8)), InvalidArgument);
}

TEST_CASE("ssim: identity, anticorrelation and windowed oracle") {
  std::mt19937_64 rng(2);
  const Image a = random_image(rng, 24, 19);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

  Image neg = a;
  for (float& v : neg.data) v = 1.0f - v;
  CHECK(ssim(a, neg) < 0.0);

  const Image b = random_image(rng, 24, 19);
  CHECK(ssim(a, b) == doctest::Approx(ssim_reference(a, b)).epsilon(1e-9));
  CHECK(ssim(a, neg) == doctest::Approx(ssim_reference(a, neg)).epsilon(1e-9));
  CHECK_THROWS_AS(ssim(a, Image(24, 18)), InvalidArgument);
  CHECK_THROWS_AS(ssim(Image(8, 8), Image(8, 8)), InvalidArgument);
}
