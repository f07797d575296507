#include "btabl/synth.hpp"

#include <cmath>

#include "btabl/error.hpp"
#include "btabl/rng.hpp"

namespace btabl::lob {

namespace fs = std::filesystem;

double normal_upper_quantile(double p) {
  require(p > 0.0 && p < 1.0, ErrorKind::config, "quantile probability must be in (0,1)");
  double lo = -40.0;
  double hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(mid / std::sqrt(2.0)) > p) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

double ramp_weight(std::size_t j, std::size_t window_length) {
  return static_cast<double>(j) - 0.5 * static_cast<double>(window_length - 1);
}

double statistic_scale(const SynthOptions& o) {
  double ss = 0.0;
  for (std::size_t j = 0; j < o.window_length; ++j) ss += ramp_weight(j, o.window_length) * ramp_weight(j, o.window_length);
  return std::sqrt(ss / static_cast<double>(o.signal_features));
}

int raw_label_from_statistic(double s, const SynthOptions& o) {
  const double sd = statistic_scale(o);
  if (s > normal_upper_quantile(o.p_up) * sd) return 1;
  if (s < -normal_upper_quantile(o.p_down) * sd) return 3;
  return 2;
}

double quantize(double v) { return std::round(v * 1e4) / 1e4; }

}  // namespace

int planted_raw_label(const Matrix& window, const SynthOptions& options) {
  double s = 0.0;
  for (std::size_t j = 0; j < window.cols(); ++j) {
    double m = 0.0;
    for (std::size_t f = 0; f < options.signal_features; ++f) m += window(f, j);
    s += ramp_weight(j, window.cols()) * m / static_cast<double>(options.signal_features);
  }
  return raw_label_from_statistic(s, options);
}

std::vector<LobEvent> synth_stream(const SynthOptions& o, int stock_id, int day) {
  require(o.signal_features >= 1 && o.signal_features <= o.active_features &&
              o.active_features <= kFeatureCount,
          ErrorKind::config, "synthetic feature counts out of range");
  Rng rng(derive_seed(o.seed, {stream::synth, static_cast<std::uint64_t>(stock_id),
                               static_cast<std::uint64_t>(day)}));
  std::vector<LobEvent> events(o.events_per_day);
  for (std::size_t t = 0; t < events.size(); ++t) {
    auto& ev = events[t];
    ev.features.assign(kFeatureCount, 0.0);
    for (std::size_t f = 0; f < o.active_features; ++f) ev.features[f] = quantize(rng.normal());
    ev.stock_id = stock_id;
    ev.day = day;
    ev.event_index = t;
  }
  for (std::size_t t = 0; t < events.size(); ++t) {
    int raw = 2;
    if (t + 1 >= o.window_length) {
      double s = 0.0;
      for (std::size_t j = 0; j < o.window_length; ++j) {
        const auto& ev = events[t + 1 - o.window_length + j];
        double m = 0.0;
        for (std::size_t f = 0; f < o.signal_features; ++f) m += ev.features[f];
        s += ramp_weight(j, o.window_length) * m / static_cast<double>(o.signal_features);
      }
      raw = raw_label_from_statistic(s, o);
    }
    events[t].labels = std::array<int, kHorizonCount>{raw, raw, raw, raw, raw};
  }
  return events;
}

void write_synth_dataset(const fs::path& root, const SynthOptions& o, Orientation orientation) {
  for (int stock = 1; stock <= o.stocks; ++stock) {
    const fs::path dir = root / ("stock" + std::to_string(stock));
    fs::create_directories(dir);
    for (int day = 1; day <= o.days; ++day) {
      const auto events = synth_stream(o, stock, day);
      write_fi2010(dir / ("day" + std::to_string(day) + ".txt"), events, orientation);
    }
  }
}

}  // namespace btabl::lob
