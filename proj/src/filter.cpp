#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "snz/error.hpp"
#include "snz/extract.hpp"

namespace snz {
namespace {

using cd = std::complex<double>;

// Coefficients of the reverse Bessel polynomial, lowest degree first.
Eigen::VectorXd bessel_polynomial(int order) {
  Eigen::VectorXd a(order + 1);
  auto fact = [](int k) {
    double f = 1;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
  };
  for (int k = 0; k <= order; ++k) {
    a[k] = fact(2 * order - k) / (std::pow(2.0, order - k) * fact(k) * fact(order - k));
  }
  return a;
}

cd eval_poly(const Eigen::VectorXd& a, cd s) {
  cd acc = 0;
  for (Eigen::Index k = a.size() - 1; k >= 0; --k) acc = acc * s + a[k];
  return acc;
}

// Poles of the Bessel low-pass prototype with |H(j)| = 1/sqrt(2).
std::vector<cd> bessel_prototype_poles(int order) {
  const Eigen::VectorXd a = bessel_polynomial(order);
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(order, order);
  for (int i = 1; i < order; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < order; ++i) companion(i, order - 1) = -a[i] / a[order];
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  const Eigen::VectorXcd roots = solver.eigenvalues();

  auto mag = [&](double w) { return std::abs(a[0] / eval_poly(a, cd(0, w))); };
  double lo = 1e-3, hi = 1e3;
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    (mag(mid) > std::sqrt(0.5) ? lo : hi) = mid;
  }
  const double cutoff = std::sqrt(lo * hi);

  std::vector<cd> poles(roots.data(), roots.data() + roots.size());
  for (auto& p : poles) p /= cutoff;
  return poles;
}

cd section_response(const Biquad& s, cd z_inv) {
  return (s.b0 + s.b1 * z_inv + s.b2 * z_inv * z_inv) / (1.0 + s.a1 * z_inv + s.a2 * z_inv * z_inv);
}

}  // namespace

bool Biquad::is_stable() const noexcept {
  // Jury conditions for z^2 + a1 z + a2.
  return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2;
}

bool FilterCoeffs::is_stable() const noexcept {
  return std::all_of(sections.begin(), sections.end(), [](const Biquad& s) { return s.is_stable(); });
}

std::complex<double> FilterCoeffs::response(double f_hz) const {
  const cd z_inv = std::polar(1.0, -2.0 * std::numbers::pi * f_hz / sample_rate_hz);
  cd h = 1.0;
  for (const auto& s : sections) h *= section_response(s, z_inv);
  return h;
}

FilterCoeffs design_bessel_bandpass(double low_hz, double high_hz, int order, double fs_hz) {
  if (!(fs_hz > 0) || !(low_hz > 0) || !(low_hz < high_hz) || !(high_hz < fs_hz / 2)) {
    fail(ErrorCode::invalid_band, "band [" + std::to_string(low_hz) + ", " + std::to_string(high_hz) +
                                      "] Hz is not inside (0, fs/2) for fs = " + std::to_string(fs_hz));
  }
  if (order < 1 || order > 10) fail(ErrorCode::invalid_band, "unsupported Bessel order " + std::to_string(order));

  constexpr double pi = std::numbers::pi;
  const double w_lo = 2 * pi * low_hz;
  const double w_hi = 2 * pi * high_hz;
  const double w0 = std::sqrt(w_lo * w_hi);
  const double bw = w_hi - w_lo;
  // s = K (z - 1) / (z + 1) maps the analog center w0 exactly onto the digital center.
  const double k = w0 / std::tan(w0 / (2 * fs_hz));

  std::vector<cd> zpoles;
  for (const cd& p : bessel_prototype_poles(order)) {
    const cd pb = p * bw;
    const cd disc = std::sqrt(pb * pb - 4.0 * w0 * w0);
    for (const cd& s : {(pb + disc) / 2.0, (pb - disc) / 2.0}) zpoles.push_back((k + s) / (k - s));
  }

  constexpr double tol = 1e-10;
  std::vector<cd> upper;
  std::vector<double> real;
  for (const cd& z : zpoles) {
    if (z.imag() > tol) {
      upper.push_back(z);
    } else if (std::abs(z.imag()) <= tol) {
      real.push_back(z.real());
    }
  }
  std::sort(real.begin(), real.end());

  FilterCoeffs out;
  out.low_hz = low_hz;
  out.high_hz = high_hz;
  out.order = order;
  out.sample_rate_hz = fs_hz;
  // Each section carries one zero at z = 1 (s = 0) and one at z = -1 (s = inf).
  for (const cd& z : upper) out.sections.push_back({1, 0, -1, -2 * z.real(), std::norm(z)});
  for (std::size_t i = 0; i + 1 < real.size(); i += 2) out.sections.push_back({1, 0, -1, -(real[i] + real[i + 1]), real[i] * real[i + 1]});
  if (out.sections.size() != static_cast<std::size_t>(order)) {
    fail(ErrorCode::invalid_band, "pole pairing failed for the requested band");
  }

  const double gain = 1.0 / std::abs(out.response(w0 / (2 * pi)));
  const double per_section = std::pow(gain, 1.0 / order);
  for (auto& s : out.sections) {
    s.b0 *= per_section;
    s.b1 *= per_section;
    s.b2 *= per_section;
  }
  if (!out.is_stable()) fail(ErrorCode::invalid_band, "designed filter is unstable");
  return out;
}

namespace {

void filter_in_place(const FilterCoeffs& c, Eigen::Ref<Eigen::VectorXd> x) {
  for (const auto& s : c.sections) {
    double z1 = 0, z2 = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double in = x[i];
      const double y = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * y + z2;
      z2 = s.b2 * in - s.a2 * y;
      x[i] = y;
    }
  }
}

void check_rate(const FilterCoeffs& c, const Waveform& w) {
  if (w.sample_rate_hz != c.sample_rate_hz) {
    fail(ErrorCode::invalid_input, "filter designed for " + std::to_string(c.sample_rate_hz) + " Hz applied to " +
                                       std::to_string(w.sample_rate_hz) + " Hz input");
  }
}

}  // namespace

Waveform apply_filter(const FilterCoeffs& c, const Waveform& w) {
  check_rate(c, w);
  Waveform out = w;
  filter_in_place(c, out.samples);
  return out;
}

Waveform apply_filter_zero_phase(const FilterCoeffs& c, const Waveform& w) {
  check_rate(c, w);
  Waveform out = w;
  filter_in_place(c, out.samples);
  out.samples.reverseInPlace();
  filter_in_place(c, out.samples);
  out.samples.reverseInPlace();
  return out;
}

}  // namespace snz
