#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "btabl/lobdata.hpp"

namespace btabl::lob {

/// Planted-pattern event streams. The label of each anchor event is a
/// threshold rule on a linear temporal statistic of the preceding
/// `window_length` events: a ramp-weighted sum over `signal_features`.
/// Thresholds sit at the normal quantiles that give P(up) = p_up and
/// P(down) = p_down; everything else is stationary.
struct SynthOptions {
  int stocks = 1;
  int days = 10;
  std::size_t events_per_day = 200;
  std::size_t window_length = 10;
  std::size_t signal_features = 4;
  std::size_t active_features = 40;  // features beyond this are written as 0
  double p_up = 0.2;
  double p_down = 0.2;
  std::uint64_t seed = 1;
};

/// Upper-tail standard normal quantile: returns z with P(Z > z) = p.
double normal_upper_quantile(double p);

std::vector<LobEvent> synth_stream(const SynthOptions& options, int stock_id, int day);

/// Raw label (1 up, 2 stationary, 3 down) implied by the planted rule for a
/// D x T window whose first rows hold the signal features.
int planted_raw_label(const Matrix& window, const SynthOptions& options);

/// Writes `stock<S>/day<D>.txt` files under `root`.
void write_synth_dataset(const std::filesystem::path& root, const SynthOptions& options,
                         Orientation orientation = Orientation::events_as_rows);

}  // namespace btabl::lob
