#include "dtii/eval/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace dtii::eval {

namespace {

void check_pair(const ArrayF& x, const ArrayF& y) {
  if (x.shape() != y.shape())
    throw core::ShapeError("metric inputs differ: " + core::shape_str(x.shape()) + " vs " + core::shape_str(y.shape()));
  if (x.size() == 0) throw core::ShapeError("metric inputs are empty");
}

struct Dims {
  int rows, cols, channels;
};

Dims image_dims(const ArrayF& x) {
  const auto& s = x.shape();
  if (s.size() == 3) return {s[0], s[1], s[2]};
  if (s.size() == 2) return {s[0], s[1], 1};
  return {1, static_cast<int>(x.size()), 1};
}

}  // namespace

double mse(const ArrayF& x, const ArrayF& y) {
  check_pair(x, y);
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - y[i];
    s += d * d;
  }
  return s / static_cast<double>(x.size());
}

double psnr(const ArrayF& x, const ArrayF& y, double range) {
  const double m = mse(x, y);
  if (m < range * range * 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(range * range / m));
}

double ssim(const ArrayF& x, const ArrayF& y, double range) {
  check_pair(x, y);
  const Dims d = image_dims(x);
  const int wr = std::min(kSsimWindow, d.rows);
  const int wc = std::min(kSsimWindow, d.cols);
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);
  const double n = static_cast<double>(wr) * wc;
  auto at = [&](const ArrayF& a, int r, int c, int ch) {
    return static_cast<double>(a[(static_cast<std::size_t>(r) * d.cols + c) * d.channels + ch]);
  };
  double total = 0;
  int windows = 0;
  for (int ch = 0; ch < d.channels; ++ch) {
    for (int r0 = 0; r0 + wr <= d.rows; ++r0) {
      for (int c0 = 0; c0 + wc <= d.cols; ++c0) {
        double sx = 0, sy = 0;
        for (int r = r0; r < r0 + wr; ++r)
          for (int c = c0; c < c0 + wc; ++c) {
            sx += at(x, r, c, ch);
            sy += at(y, r, c, ch);
          }
        const double mx = sx / n, my = sy / n;
        double vx = 0, vy = 0, cov = 0;
        for (int r = r0; r < r0 + wr; ++r)
          for (int c = c0; c < c0 + wc; ++c) {
            const double dx = at(x, r, c, ch) - mx, dy = at(y, r, c, ch) - my;
            vx += dx * dx;
            vy += dy * dy;
            cov += dx * dy;
          }
        vx /= n;
        vy /= n;
        cov /= n;
        total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++windows;
      }
    }
  }
  return total / windows;
}

Metrics reconstruction_metrics(const ArrayF& x, const ArrayF& y, double range) {
  return {mse(x, y), psnr(x, y, range), ssim(x, y, range)};
}

}  // namespace dtii::eval
