// Wiretap channel simulation: free-space path loss, block Rayleigh fading,
// AWGN. transmit/equalize are autodiff ops, so encoder gradients flow through
// the channel at fixed fading and noise draws.
#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "deepssc/autodiff.hpp"
#include "deepssc/common.hpp"
#include "deepssc/rng.hpp"

namespace deepssc {

struct ChannelConfig {
  double carrier_hz = 1e9;
  double bandwidth_hz = 2e7;
  double noise_figure_db = 10.0;
  double d_bob_m = 1000.0;
  double d_eve_m = 3000.0;

  void validate() const {
    if (carrier_hz <= 0 || bandwidth_hz <= 0 || d_bob_m <= 0 || d_eve_m <= 0)
      throw ConfigError("channel config fields must be positive");
  }
};

// One coherence block: fading seen by Bob and Eve plus the transmit and
// noise powers in watts. Noise is sampled at transmit time, not stored.
struct ChannelRealization {
  std::complex<double> h_bob;
  std::complex<double> h_eve;
  double power_w = 1.0;
  double noise_w = 1.0;
};

// Complex transmit/receive symbols for a batch, interleaved (re,im) pairs:
// row b holds lengths[b]*n_per_token/2 active complex symbols, the rest of
// the row is padding and carries zero power.
struct SymbolBlock {
  ad::Var symbols;                // [batch, slots*n_per_token]
  std::vector<int32_t> lengths;   // active token slots per row
  int64_t n_per_token = 0;
  bool normalized = false;

  int64_t batch() const { return symbols.shape()[0]; }
  int64_t row_reals() const { return symbols.shape()[1]; }
  // Number of power-carrying complex symbols across the batch.
  int64_t active_complex() const {
    int64_t n = 0;
    for (int32_t l : lengths) n += static_cast<int64_t>(l) * n_per_token / 2;
    return n;
  }
};

// (c / (4 pi f_c))^2 with c = 2.998e8 m/s.
double path_loss_mu(double carrier_hz);

// 10^((-174 + 10 log10(B) + N_f)/10) mW, returned in watts.
double noise_power(double bandwidth_hz, double noise_figure_db);

double noise_power(const ChannelConfig& cfg);

// h = sqrt(mu d^-2) X, X ~ CN(0,1); one draw per coherence block.
std::complex<double> sample_fading(double distance_m, double mu, Rng& rng);

// P = gamma_T * N / (mu d_bob^-2).
double power_for_target_snr(double gamma_linear, double d_bob_m, double mu,
                            double noise_w);

// y = sqrt(P) h x + w, per-complex-symbol noise variance noise_w.
// Requires a normalized block. h has one entry per batch row, or a single
// entry shared by the whole block (block fading).
SymbolBlock transmit(const SymbolBlock& x, const std::vector<std::complex<double>>& h,
                     double power_w, double noise_w, Rng& rng);
SymbolBlock transmit(const SymbolBlock& x, std::complex<double> h, double power_w,
                     double noise_w, Rng& rng);

// y / (sqrt(P) h); rejects |h| below 1e-12.
SymbolBlock equalize(const SymbolBlock& y, const std::vector<std::complex<double>>& h,
                     double power_w);
SymbolBlock equalize(const SymbolBlock& y, std::complex<double> h, double power_w);

}  // namespace deepssc
