#pragma once

#include "dtii/core/array.hpp"

namespace dtii::eval {

using core::ArrayF;

inline constexpr double kPsnrCap = 100.0;
inline constexpr int kSsimWindow = 5;

struct Metrics {
  double mse = 0;
  double psnr = 0;
  double ssim = 0;
  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Inputs are [rows, cols, channels] images with values in [0, range].
double mse(const ArrayF& x, const ArrayF& y);
double psnr(const ArrayF& x, const ArrayF& y, double range = 1.0);
/// Uniform-window SSIM per channel, averaged over windows and channels. The
/// window shrinks to the image size for grids smaller than 5x5.
double ssim(const ArrayF& x, const ArrayF& y, double range = 1.0);

Metrics reconstruction_metrics(const ArrayF& x, const ArrayF& y, double range = 1.0);

}  // namespace dtii::eval
