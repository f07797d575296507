#include "btabl/lobdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "btabl/error.hpp"

namespace btabl::lob {

namespace fs = std::filesystem;

Orientation parse_orientation(const std::string& text) {
  if (text == "events-as-rows" || text == "rows") return Orientation::events_as_rows;
  if (text == "events-as-columns" || text == "columns") return Orientation::events_as_columns;
  fail(ErrorKind::config, "unknown orientation '" + text + "'");
}

const char* to_string(Orientation o) {
  return o == Orientation::events_as_rows ? "events-as-rows" : "events-as-columns";
}

int LabelMapping::to_index(int raw) const {
  if (raw < 1 || raw > static_cast<int>(kClassCount)) {
    fail(ErrorKind::label, "label " + std::to_string(raw) + " outside {1,2,3}");
  }
  return raw_to_index[static_cast<std::size_t>(raw - 1)];
}

int LabelMapping::to_raw(int index) const {
  for (std::size_t r = 0; r < kClassCount; ++r)
    if (raw_to_index[r] == index) return static_cast<int>(r) + 1;
  fail(ErrorKind::label, "class index " + std::to_string(index) + " has no raw label");
}

bool LabelMapping::is_bijection() const {
  std::array<bool, kClassCount> seen{};
  for (int idx : raw_to_index) {
    if (idx < 0 || idx >= static_cast<int>(kClassCount) || seen[static_cast<std::size_t>(idx)])
      return false;
    seen[static_cast<std::size_t>(idx)] = true;
  }
  return true;
}

namespace {

struct Row {
  std::vector<double> values;
  std::size_t line = 0;
};

std::vector<Row> tokenize(const std::string& text) {
  std::vector<Row> rows;
  std::size_t line_no = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    Row row;
    row.line = line_no;
    std::size_t pos = 0;
    std::size_t column = 0;
    while (pos < line.size()) {
      while (pos < line.size() &&
             (line[pos] == ' ' || line[pos] == '\t' || line[pos] == ',' || line[pos] == '\r'))
        ++pos;
      if (pos >= line.size()) break;
      std::size_t end = pos;
      while (end < line.size() && line[end] != ' ' && line[end] != '\t' && line[end] != ',' &&
             line[end] != '\r')
        ++end;
      ++column;
      const char* first = line.data() + pos;
      const char* last = line.data() + end;
      if (*first == '+') ++first;
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(first, last, value);
      if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
        fail(ErrorKind::parse, "malformed number '" + line.substr(pos, end - pos) + "' at line " +
                                   std::to_string(line_no) + ", column " + std::to_string(column));
      }
      row.values.push_back(value);
      pos = end;
    }
    if (!row.values.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

std::array<int, kHorizonCount> read_labels(std::span<const double> raw, std::size_t line) {
  std::array<int, kHorizonCount> labels{};
  for (std::size_t h = 0; h < kHorizonCount; ++h) {
    const double v = raw[h];
    if (v != 1.0 && v != 2.0 && v != 3.0) {
      std::ostringstream msg;
      msg << "unknown label value " << v << " (horizon " << kHorizons[h] << ", line " << line
          << ")";
      fail(ErrorKind::label, msg.str());
    }
    labels[h] = static_cast<int>(v);
  }
  return labels;
}

LobEvent make_event(std::span<const double> values, std::size_t index, std::size_t line) {
  LobEvent ev;
  ev.features.assign(values.begin(), values.begin() + kFeatureCount);
  if (values.size() == kColumnsPerEvent) ev.labels = read_labels(values.subspan(kFeatureCount), line);
  ev.event_index = index;
  return ev;
}

bool arity_ok(std::size_t n, bool allow_unlabeled) {
  return n == kColumnsPerEvent || (allow_unlabeled && n == kFeatureCount);
}

}  // namespace

std::vector<LobEvent> parse_fi2010_text(const std::string& text, Orientation orientation,
                                        bool allow_unlabeled) {
  const auto rows = tokenize(text);
  std::vector<LobEvent> events;
  if (rows.empty()) return events;

  if (orientation == Orientation::events_as_rows) {
    const std::size_t arity = rows.front().values.size();
    for (const auto& row : rows) {
      if (!arity_ok(row.values.size(), allow_unlabeled) || row.values.size() != arity) {
        fail(ErrorKind::format, "line " + std::to_string(row.line) + " has " +
                                    std::to_string(row.values.size()) + " values, expected " +
                                    std::to_string(kColumnsPerEvent));
      }
      events.push_back(make_event(row.values, events.size(), row.line));
    }
    return events;
  }

  if (!arity_ok(rows.size(), allow_unlabeled)) {
    fail(ErrorKind::format, "column-oriented file has " + std::to_string(rows.size()) +
                                " rows, expected " + std::to_string(kColumnsPerEvent));
  }
  const std::size_t n_events = rows.front().values.size();
  for (const auto& row : rows) {
    if (row.values.size() != n_events) {
      fail(ErrorKind::format, "line " + std::to_string(row.line) + " has " +
                                  std::to_string(row.values.size()) + " values, expected " +
                                  std::to_string(n_events));
    }
  }
  std::vector<double> column(rows.size());
  for (std::size_t e = 0; e < n_events; ++e) {
    for (std::size_t r = 0; r < rows.size(); ++r) column[r] = rows[r].values[e];
    events.push_back(make_event(column, e, rows[kFeatureCount < rows.size() ? kFeatureCount : 0].line));
  }
  return events;
}

std::vector<LobEvent> parse_fi2010(const fs::path& path, Orientation orientation,
                                   bool allow_unlabeled) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_fi2010_text(buf.str(), orientation, allow_unlabeled);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::vector<std::size_t> default_dims(std::size_t count) {
  std::vector<std::size_t> dims(count);
  for (std::size_t i = 0; i < count; ++i) dims[i] = i;
  return dims;
}

std::vector<double> select_features(const LobEvent& event, std::span<const std::size_t> dims) {
  std::vector<double> out;
  out.reserve(dims.size());
  for (std::size_t d : dims) {
    if (d >= event.features.size()) {
      fail(ErrorKind::index, "feature index " + std::to_string(d) + " out of range [0," +
                                 std::to_string(event.features.size()) + ")");
    }
    out.push_back(event.features[d]);
  }
  return out;
}

std::size_t horizon_slot(int horizon) {
  for (std::size_t i = 0; i < kHorizons.size(); ++i)
    if (kHorizons[i] == horizon) return i;
  fail(ErrorKind::config, "horizon " + std::to_string(horizon) + " not in {10,20,30,50,100}");
}

std::vector<LobWindow> build_windows(std::span<const LobEvent> events, std::size_t window_length,
                                     int horizon, std::span<const std::size_t> dims,
                                     const LabelMapping& mapping) {
  require(window_length >= 1, ErrorKind::config, "window length must be >= 1");
  require(!dims.empty(), ErrorKind::config, "feature selection is empty");
  const std::size_t slot = horizon_slot(horizon);
  std::vector<LobWindow> windows;
  if (events.size() < window_length) return windows;
  for (const auto& ev : events) {
    if (ev.stock_id != events.front().stock_id || ev.day != events.front().day) {
      fail(ErrorKind::contract, "build_windows: events span more than one (stock, day) stream");
    }
  }

  std::vector<std::vector<double>> selected;
  selected.reserve(events.size());
  for (const auto& ev : events) selected.push_back(select_features(ev, dims));

  const std::size_t d = dims.size();
  windows.reserve(events.size() - window_length + 1);
  for (std::size_t t = window_length - 1; t < events.size(); ++t) {
    LobWindow w;
    w.x = Matrix(d, window_length);
    for (std::size_t c = 0; c < window_length; ++c) {
      const auto& col = selected[t + 1 - window_length + c];
      for (std::size_t r = 0; r < d; ++r) w.x(r, c) = col[r];
    }
    const auto& anchor = events[t];
    if (anchor.labels) w.label = mapping.to_index((*anchor.labels)[slot]);
    w.stock_id = anchor.stock_id;
    w.day = anchor.day;
    w.anchor_event_index = anchor.event_index;
    windows.push_back(std::move(w));
  }
  return windows;
}

DatasetSplit make_splits(std::span<const LobWindow> windows, const SplitOptions& options,
                         const LabelMapping& mapping) {
  if (options.train_frac < 0 || options.val_frac < 0 ||
      options.train_frac + options.val_frac > 1.0 + 1e-12) {
    fail(ErrorKind::config, "split fractions must be non-negative with train + val <= 1");
  }
  require(options.test_days >= 0, ErrorKind::config, "test_days must be >= 0");
  require(mapping.is_bijection(), ErrorKind::config, "label mapping is not a bijection");

  std::set<int> days;
  for (const auto& w : windows) days.insert(w.day);
  if (static_cast<int>(days.size()) < options.test_days) {
    fail(ErrorKind::config, "only " + std::to_string(days.size()) + " distinct days, need " +
                                std::to_string(options.test_days) + " for testing");
  }
  std::set<int> test_days;
  {
    auto it = days.rbegin();
    for (int k = 0; k < options.test_days; ++k, ++it) test_days.insert(*it);
  }

  std::map<int, std::vector<const LobWindow*>> by_stock;
  for (const auto& w : windows) by_stock[w.stock_id].push_back(&w);

  DatasetSplit split;
  split.label_mapping = mapping;
  for (auto& [stock, list] : by_stock) {
    std::stable_sort(list.begin(), list.end(), [](const LobWindow* a, const LobWindow* b) {
      if (a->day != b->day) return a->day < b->day;
      return a->anchor_event_index < b->anchor_event_index;
    });
    std::vector<const LobWindow*> rest;
    for (const auto* w : list) {
      if (test_days.count(w->day)) split.test.push_back(*w);
      else rest.push_back(w);
    }
    const std::size_t n = rest.size();
    const auto n_train = static_cast<std::size_t>(std::floor(options.train_frac * n));
    const auto n_val = static_cast<std::size_t>(std::floor(options.val_frac * n));
    for (std::size_t i = 0; i < n_train; ++i) split.train.push_back(*rest[i]);
    for (std::size_t i = n - n_val; i < n; ++i) split.validation.push_back(*rest[i]);
    split.discarded += n - n_train - n_val;
  }
  if (split.discarded > 0) {
    spdlog::info("split: discarded {} windows between train and validation", split.discarded);
  }
  return split;
}

ZScoreStats zscore_fit(std::span<const LobWindow> train) {
  ZScoreStats stats;
  if (train.empty()) return stats;
  const std::size_t d = train.front().x.rows();
  stats.mean.assign(d, 0.0);
  stats.std.assign(d, 0.0);
  std::vector<double> sq(d, 0.0);
  double count = 0;
  for (const auto& w : train) {
    for (std::size_t r = 0; r < d; ++r)
      for (double v : w.x.row(r)) stats.mean[r] += v;
    count += static_cast<double>(w.x.cols());
  }
  for (double& m : stats.mean) m /= count;
  for (const auto& w : train)
    for (std::size_t r = 0; r < d; ++r)
      for (double v : w.x.row(r)) sq[r] += (v - stats.mean[r]) * (v - stats.mean[r]);
  for (std::size_t r = 0; r < d; ++r) stats.std[r] = std::max(std::sqrt(sq[r] / count), kStdFloor);
  return stats;
}

void zscore_apply(std::vector<LobWindow>& windows, const ZScoreStats& stats) {
  for (auto& w : windows) {
    require(w.x.rows() == stats.mean.size(), ErrorKind::shape,
            "z-score statistics do not match window feature count");
    for (std::size_t r = 0; r < w.x.rows(); ++r)
      for (double& v : w.x.row(r)) v = (v - stats.mean[r]) / stats.std[r];
  }
}

ZScoreStats zscore_fit_apply(std::vector<LobWindow>& train, std::vector<LobWindow>& other) {
  auto stats = zscore_fit(train);
  if (stats.mean.empty()) return stats;
  zscore_apply(train, stats);
  zscore_apply(other, stats);
  return stats;
}

std::vector<DataFile> discover_files(const fs::path& root) {
  if (!fs::is_directory(root)) fail(ErrorKind::io, "data directory not found: " + root.string());
  static const std::regex day_re(R"(day[_-]?(\d+))", std::regex::icase);
  static const std::regex stock_re(R"(stock[_-]?(\d+))", std::regex::icase);
  std::vector<DataFile> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    std::smatch m;
    if (!std::regex_search(name, m, day_re)) continue;
    DataFile f;
    f.path = entry.path();
    f.day = std::stoi(m[1].str());
    const auto parent = fs::relative(entry.path().parent_path(), root).string();
    std::smatch sm;
    if (std::regex_search(parent, sm, stock_re)) f.stock_id = std::stoi(sm[1].str());
    files.push_back(f);
  }
  std::sort(files.begin(), files.end(), [](const DataFile& a, const DataFile& b) {
    if (a.stock_id != b.stock_id) return a.stock_id < b.stock_id;
    if (a.day != b.day) return a.day < b.day;
    return a.path < b.path;
  });
  for (std::size_t i = 1; i < files.size(); ++i) {
    if (files[i].stock_id == files[i - 1].stock_id && files[i].day == files[i - 1].day) {
      fail(ErrorKind::data, "two files for stock " + std::to_string(files[i].stock_id) +
                                " day " + std::to_string(files[i].day));
    }
  }
  if (files.empty()) fail(ErrorKind::data, "no day<N> files under " + root.string());
  return files;
}

std::vector<LobWindow> load_windows(const fs::path& root, const LoadOptions& options) {
  std::vector<LobWindow> windows;
  for (const auto& file : discover_files(root)) {
    auto events = parse_fi2010(file.path, options.orientation, options.allow_unlabeled);
    for (auto& ev : events) {
      ev.stock_id = file.stock_id;
      ev.day = file.day;
    }
    auto w = build_windows(events, options.window_length, options.horizon, options.dims,
                           options.mapping);
    windows.insert(windows.end(), std::make_move_iterator(w.begin()),
                   std::make_move_iterator(w.end()));
  }
  return windows;
}

void write_fi2010(const fs::path& path, std::span<const LobEvent> events, Orientation orientation) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  auto value = [&](const LobEvent& ev, std::size_t k) -> double {
    if (k < kFeatureCount) return ev.features[k];
    return ev.labels ? (*ev.labels)[k - kFeatureCount] : 0.0;
  };
  char buf[32];
  auto emit = [&](double v) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, end - buf);
  };
  const std::size_t width = events.empty() || events.front().labels ? kColumnsPerEvent : kFeatureCount;
  if (orientation == Orientation::events_as_rows) {
    for (const auto& ev : events) {
      for (std::size_t k = 0; k < width; ++k) {
        if (k) out << ' ';
        emit(value(ev, k));
      }
      out << '\n';
    }
  } else {
    for (std::size_t k = 0; k < width && !events.empty(); ++k) {
      for (std::size_t e = 0; e < events.size(); ++e) {
        if (e) out << ' ';
        emit(value(events[e], k));
      }
      out << '\n';
    }
  }
}

}  // namespace btabl::lob
