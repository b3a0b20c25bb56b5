#pragma once

#include "nsvf/image.hpp"

namespace nsvf {

/// 10 log10(1 / MSE) over all channels; +infinity for identical images.
double psnr(const Image& a, const Image& b);

/// Mean SSIM of Rec.601 luma (0.299 R + 0.587 G + 0.114 B) over all fully
/// contained 11x11 windows, Gaussian weights with sigma 1.5, K1 = 0.01,
/// K2 = 0.03, dynamic range 1.
double ssim(const Image& a, const Image& b);

}  // namespace nsvf
