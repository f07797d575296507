#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "btabl/linalg.hpp"

namespace btabl::lob {

inline constexpr std::size_t kFeatureCount = 144;
inline constexpr std::size_t kHorizonCount = 5;
inline constexpr std::size_t kColumnsPerEvent = kFeatureCount + kHorizonCount;
inline constexpr std::array<int, kHorizonCount> kHorizons = {10, 20, 30, 50, 100};
inline constexpr std::size_t kClassCount = 3;

enum class Orientation { events_as_rows, events_as_columns };

Orientation parse_orientation(const std::string& text);
const char* to_string(Orientation o);

struct LobEvent {
  std::vector<double> features;  // kFeatureCount values
  /// Raw labels in {1,2,3}, one per horizon. Absent for unlabeled files.
  std::optional<std::array<int, kHorizonCount>> labels;
  int stock_id = 1;
  int day = 1;
  std::size_t event_index = 0;
};

/// Raw FI-2010 label -> internal class index. The default maps
/// {1: up, 2: stationary, 3: down} onto {0: stationary, 1: up, 2: down}.
struct LabelMapping {
  std::array<int, kClassCount> raw_to_index{1, 0, 2};
  std::array<std::string, kClassCount> class_names{"stationary", "up", "down"};

  int to_index(int raw) const;
  int to_raw(int index) const;
  bool is_bijection() const;
};

struct LobWindow {
  Matrix x;                  // D x T, oldest column first
  std::optional<int> label;  // internal class index
  int stock_id = 1;
  int day = 1;
  std::size_t anchor_event_index = 0;
};

struct DatasetSplit {
  std::vector<LobWindow> train;
  std::vector<LobWindow> validation;
  std::vector<LobWindow> test;
  LabelMapping label_mapping;
  std::size_t discarded = 0;
};

struct SplitOptions {
  double train_frac = 0.75;
  double val_frac = 0.15;
  int test_days = 3;
};

/// Parses one FI-2010 text matrix. Values may be separated by whitespace or
/// commas. Each event carries 144 features followed by 5 labels; with
/// allow_unlabeled an event may carry the 144 features only.
std::vector<LobEvent> parse_fi2010(const std::filesystem::path& path, Orientation orientation,
                                   bool allow_unlabeled = false);
std::vector<LobEvent> parse_fi2010_text(const std::string& text, Orientation orientation,
                                        bool allow_unlabeled = false);

std::vector<std::size_t> default_dims(std::size_t count = 40);
std::vector<double> select_features(const LobEvent& event, std::span<const std::size_t> dims);

std::size_t horizon_slot(int horizon);

/// Sliding windows over one contiguous (stock, day) stream.
std::vector<LobWindow> build_windows(std::span<const LobEvent> events, std::size_t window_length,
                                     int horizon, std::span<const std::size_t> dims,
                                     const LabelMapping& mapping = {});

/// Chronological per-stock split. Test = the last `test_days` distinct days;
/// the remaining windows go first `floor(train_frac*n)` to train and last
/// `floor(val_frac*n)` to validation; the gap in between is discarded.
DatasetSplit make_splits(std::span<const LobWindow> windows, const SplitOptions& options,
                         const LabelMapping& mapping = {});

struct ZScoreStats {
  std::vector<double> mean;
  std::vector<double> std;
};

inline constexpr double kStdFloor = 1e-8;

/// Per-feature (row) statistics over every column of every training window.
ZScoreStats zscore_fit(std::span<const LobWindow> train);
void zscore_apply(std::vector<LobWindow>& windows, const ZScoreStats& stats);
ZScoreStats zscore_fit_apply(std::vector<LobWindow>& train, std::vector<LobWindow>& other);

/// One file found under a data directory, tagged with its stock and day.
struct DataFile {
  std::filesystem::path path;
  int stock_id = 1;
  int day = 1;
};

/// Discovers `[stock<S>/]day<D>.txt` style files (any name with a `day<digits>`
/// token; stock taken from a `stock<digits>` parent directory, default 1).
std::vector<DataFile> discover_files(const std::filesystem::path& root);

struct LoadOptions {
  Orientation orientation = Orientation::events_as_rows;
  std::size_t window_length = 10;
  int horizon = 10;
  std::vector<std::size_t> dims = default_dims();
  LabelMapping mapping;
  bool allow_unlabeled = true;
};

/// Parses every discovered file and windows each (stock, day) stream.
std::vector<LobWindow> load_windows(const std::filesystem::path& root, const LoadOptions& options);

void write_fi2010(const std::filesystem::path& path, std::span<const LobEvent> events,
                  Orientation orientation);

}  // namespace btabl::lob
