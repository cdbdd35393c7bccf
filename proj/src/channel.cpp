#include "deepssc/channel.hpp"

#include <cmath>

namespace deepssc {

namespace {
constexpr double kLightSpeed = 2.998e8;  // m/s
constexpr double kMinChannelMagnitude = 1e-12;
}  // namespace

double path_loss_mu(double carrier_hz) {
  if (carrier_hz <= 0) throw ConfigError("carrier frequency must be positive");
  const double ratio = kLightSpeed / (4.0 * M_PI * carrier_hz);
  return ratio * ratio;
}

double noise_power(double bandwidth_hz, double noise_figure_db) {
  if (bandwidth_hz <= 0) throw ConfigError("bandwidth must be positive");
  const double dbm = -174.0 + 10.0 * std::log10(bandwidth_hz) + noise_figure_db;
  return std::pow(10.0, dbm / 10.0) * 1e-3;
}

double noise_power(const ChannelConfig& cfg) {
  return noise_power(cfg.bandwidth_hz, cfg.noise_figure_db);
}

std::complex<double> sample_fading(double distance_m, double mu, Rng& rng) {
  if (distance_m <= 0) throw ConfigError("distance must be positive");
  const double amplitude = std::sqrt(mu / (distance_m * distance_m));
  return amplitude * rng.complex_normal();
}

double power_for_target_snr(double gamma_linear, double d_bob_m, double mu,
                            double noise_w) {
  if (gamma_linear <= 0 || d_bob_m <= 0 || mu <= 0 || noise_w <= 0)
    throw ConfigError("power_for_target_snr expects positive arguments");
  return gamma_linear * noise_w * d_bob_m * d_bob_m / mu;
}

SymbolBlock transmit(const SymbolBlock& x,
                     const std::vector<std::complex<double>>& h, double power_w,
                     double noise_w, Rng& rng) {
  if (!x.normalized)
    throw ContractError("transmit requires a power-normalized symbol block");
  if (power_w <= 0 || noise_w <= 0)
    throw ContractError("transmit requires positive transmit and noise power");

  const double amp = std::sqrt(power_w);
  std::vector<std::complex<double>> scaled(h.size());
  for (size_t i = 0; i < h.size(); ++i) scaled[i] = amp * h[i];

  ad::Var faded = ad::complex_rowscale(x.symbols, scaled);

  // Per complex symbol variance noise_w: each real component gets noise_w/2.
  Tensor noise(faded.shape());
  const double sigma = std::sqrt(noise_w / 2.0);
  for (int64_t i = 0; i < noise.numel(); ++i) noise.at(i) = sigma * rng.normal();

  SymbolBlock y;
  y.symbols = ad::add_const(faded, noise);
  y.lengths = x.lengths;
  y.n_per_token = x.n_per_token;
  y.normalized = false;
  return y;
}

SymbolBlock transmit(const SymbolBlock& x, std::complex<double> h,
                     double power_w, double noise_w, Rng& rng) {
  return transmit(x, std::vector<std::complex<double>>{h}, power_w, noise_w, rng);
}

SymbolBlock equalize(const SymbolBlock& y,
                     const std::vector<std::complex<double>>& h, double power_w) {
  if (power_w <= 0) throw ContractError("equalize requires positive power");
  const double amp = std::sqrt(power_w);
  std::vector<std::complex<double>> inv(h.size());
  for (size_t i = 0; i < h.size(); ++i) {
    if (std::abs(h[i]) < kMinChannelMagnitude)
      throw ContractError("degenerate channel: |h| below 1e-12");
    inv[i] = 1.0 / (amp * h[i]);
  }
  SymbolBlock out;
  out.symbols = ad::complex_rowscale(y.symbols, inv);
  out.lengths = y.lengths;
  out.n_per_token = y.n_per_token;
  out.normalized = false;
  return out;
}

SymbolBlock equalize(const SymbolBlock& y, std::complex<double> h, double power_w) {
  return equalize(y, std::vector<std::complex<double>>{h}, power_w);
}

}  // namespace deepssc
