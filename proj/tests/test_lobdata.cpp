#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "btabl/error.hpp"
#include "btabl/lobdata.hpp"
#include "btabl/synth.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace btabl;
using namespace btabl::lob;

namespace {

std::vector<double> event_values(int seed, bool labeled) {
  oracle::Gen g(static_cast<std::uint64_t>(seed));
  std::vector<double> v;
  for (std::size_t i = 0; i < kFeatureCount; ++i) v.push_back(std::round(g.normal() * 1e4) / 1e4);
  if (labeled)
    for (std::size_t h = 0; h < kHorizonCount; ++h) v.push_back(g.integer(1, 3));
  return v;
}

std::string rows_text(const std::vector<std::vector<double>>& events) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& e : events) {
    for (std::size_t i = 0; i < e.size(); ++i) out << (i ? " " : "") << e[i];
    out << "\n";
  }
  return out.str();
}

std::string columns_text(const std::vector<std::vector<double>>& events) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t r = 0; r < events.front().size(); ++r) {
    for (std::size_t c = 0; c < events.size(); ++c) out << (c ? "," : "") << events[c][r];
    out << "\n";
  }
  return out.str();
}

LobEvent make_event(std::size_t index, double base, int day = 1, int stock = 1) {
  LobEvent e;
  e.features.resize(kFeatureCount);
  for (std::size_t i = 0; i < kFeatureCount; ++i) e.features[i] = base + static_cast<double>(i) * 0.001;
  e.labels = std::array<int, kHorizonCount>{1, 2, 3, 2, 1};
  e.event_index = index;
  e.day = day;
  e.stock_id = stock;
  return e;
}

std::vector<LobWindow> grid_windows(int days, int per_day, int stock = 1) {
  std::vector<LobWindow> out;
  for (int d = 1; d <= days; ++d)
    for (int k = 0; k < per_day; ++k) {
      LobWindow w;
      w.x = Matrix(2, 2, static_cast<double>(k));
      w.label = k % 3;
      w.day = d;
      w.stock_id = stock;
      w.anchor_event_index = static_cast<std::size_t>(k);
      out.push_back(w);
    }
  return out;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("btabl_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("two-event fixture parses field by field") {
  const auto a = event_values(1, true), b = event_values(2, true);
  const auto events = parse_fi2010_text(rows_text({a, b}), Orientation::events_as_rows);
  REQUIRE(events.size() == 2);
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    CHECK(events[0].features[i] == a[i]);
    CHECK(events[1].features[i] == b[i]);
  }
  REQUIRE(events[1].labels.has_value());
  for (std::size_t h = 0; h < kHorizonCount; ++h) CHECK((*events[1].labels)[h] == static_cast<int>(b[kFeatureCount + h]));
  CHECK(events[0].event_index == 0);
  CHECK(events[1].event_index == 1);
}

TEST_CASE("empty input gives no events") {
  CHECK(parse_fi2010_text("", Orientation::events_as_rows).empty());
  CHECK(parse_fi2010_text("\n\n", Orientation::events_as_columns).empty());
}

TEST_CASE("column orientation is the transpose of row orientation") {
  std::vector<std::vector<double>> evs;
  for (int k = 0; k < 7; ++k) evs.push_back(event_values(10 + k, true));
  const auto rows = parse_fi2010_text(rows_text(evs), Orientation::events_as_rows);
  const auto cols = parse_fi2010_text(columns_text(evs), Orientation::events_as_columns);
  REQUIRE(rows.size() == cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].features == cols[i].features);
    CHECK(rows[i].labels == cols[i].labels);
  }
}

TEST_CASE("parse errors report kind and position") {
  auto kind_of = [](const std::string& text, Orientation o, bool unlabeled = false) {
    try {
      (void)parse_fi2010_text(text, o, unlabeled);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::io;
  };
  auto good = event_values(3, true);
  std::string text = rows_text({good});
  const auto pos = text.find(' ');
  std::string bad = text.substr(0, pos) + " 1.2.3" + text.substr(text.find(' ', pos + 1));
  CHECK(kind_of(bad, Orientation::events_as_rows) == ErrorKind::parse);
  try {
    (void)parse_fi2010_text(bad, Orientation::events_as_rows);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
  CHECK(kind_of(rows_text({std::vector<double>(10, 1.0)}), Orientation::events_as_rows) == ErrorKind::format);
  auto badlabel = good;
  badlabel.back() = 7;
  CHECK(kind_of(rows_text({badlabel}), Orientation::events_as_rows) == ErrorKind::label);
  CHECK(kind_of("nan " + text.substr(text.find(' ') + 1), Orientation::events_as_rows) == ErrorKind::parse);

  const auto unl = event_values(4, false);
  CHECK(kind_of(rows_text({unl}), Orientation::events_as_rows) == ErrorKind::format);
  const auto parsed = parse_fi2010_text(rows_text({unl}), Orientation::events_as_rows, true);
  REQUIRE(parsed.size() == 1);
  CHECK_FALSE(parsed[0].labels.has_value());
}

TEST_CASE("feature selection") {
  const auto ev = make_event(0, 1.5);
  const auto all = default_dims(kFeatureCount);
  CHECK(select_features(ev, all) == ev.features);
  const std::vector<std::size_t> first{0};
  CHECK(select_features(ev, first) == std::vector<double>{1.5});
  const auto forty = default_dims(40);
  CHECK(select_features(ev, forty) == std::vector<double>(ev.features.begin(), ev.features.begin() + 40));
  const std::vector<std::size_t> out_of_range{144};
  CHECK_THROWS_AS((void)select_features(ev, out_of_range), Error);
}

TEST_CASE("windowing boundaries") {
  std::vector<LobEvent> ten, twelve;
  for (std::size_t i = 0; i < 12; ++i) (i < 10 ? ten : twelve).push_back(make_event(i, static_cast<double>(i)));
  twelve.insert(twelve.begin(), ten.begin(), ten.end());
  const auto dims = default_dims(40);

  const auto one = build_windows(ten, 10, 10, dims);
  REQUIRE(one.size() == 1);
  for (std::size_t r = 0; r < 40; ++r) CHECK(one[0].x(r, 9) == ten[9].features[r]);

  const auto three = build_windows(twelve, 10, 10, dims);
  REQUIRE(three.size() == 3);
  CHECK(three[0].anchor_event_index == 9);
  CHECK(three[1].anchor_event_index == 10);
  CHECK(three[2].anchor_event_index == 11);

  std::vector<LobEvent> short_stream(ten.begin(), ten.begin() + 5);
  CHECK(build_windows(short_stream, 10, 10, dims).empty());

  auto mixed = ten;
  mixed[3].day = 2;
  CHECK_THROWS_AS((void)build_windows(mixed, 10, 10, dims), Error);
}

TEST_CASE("windows match a naive double loop and carry mapped labels") {
  oracle::Gen g(7);
  std::vector<LobEvent> events;
  for (std::size_t i = 0; i < 30; ++i) {
    LobEvent e = make_event(i, 0.0);
    for (auto& f : e.features) f = g.normal();
    e.labels = std::array<int, kHorizonCount>{g.integer(1, 3), g.integer(1, 3), g.integer(1, 3), g.integer(1, 3),
                                              g.integer(1, 3)};
    events.push_back(e);
  }
  const std::vector<std::size_t> dims{3, 0, 17, 143};
  const LabelMapping mapping;
  const auto ws = build_windows(events, 5, 50, dims, mapping);
  REQUIRE(ws.size() == 26);
  for (std::size_t k = 0; k < ws.size(); ++k) {
    for (std::size_t c = 0; c < 5; ++c)
      for (std::size_t r = 0; r < dims.size(); ++r) CHECK(ws[k].x(r, c) == events[k + c].features[dims[r]]);
    const int raw = (*events[k + 4].labels)[3];
    const int expected = raw == 1 ? 1 : raw == 2 ? 0 : 2;
    CHECK(ws[k].label == expected);
  }
}

TEST_CASE("label mapping defaults and validation") {
  const LabelMapping m;
  CHECK(m.to_index(1) == 1);
  CHECK(m.to_index(2) == 0);
  CHECK(m.to_index(3) == 2);
  for (int c = 0; c < 3; ++c) CHECK(m.to_index(m.to_raw(c)) == c);
  CHECK(m.is_bijection());
  LabelMapping bad;
  bad.raw_to_index = {0, 0, 2};
  CHECK_FALSE(bad.is_bijection());
  CHECK_THROWS_AS((void)m.to_index(4), Error);
  CHECK_THROWS_AS((void)horizon_slot(15), Error);
  CHECK(horizon_slot(100) == 4);
}

TEST_CASE("chronological split: 100 windows over 10 days") {
  const auto ws = grid_windows(10, 10);
  const auto s = make_splits(ws, SplitOptions{});
  CHECK(s.train.size() == 52);
  CHECK(s.validation.size() == 10);
  CHECK(s.discarded == 8);
  CHECK(s.test.size() == 30);
  for (const auto& w : s.test) CHECK(w.day >= 8);
  for (const auto& w : s.train) CHECK(w.day <= 6);
  CHECK(s.validation.front().day == 7);
}

TEST_CASE("split edge cases") {
  const auto ws = grid_windows(4, 5);
  const auto all = make_splits(ws, SplitOptions{1.0, 0.0, 0});
  CHECK(all.train.size() == ws.size());
  CHECK(all.validation.empty());
  CHECK(all.test.empty());

  auto two = grid_windows(10, 10, 1);
  const auto other = grid_windows(10, 10, 2);
  two.insert(two.end(), other.begin(), other.end());
  const auto s = make_splits(two, SplitOptions{});
  CHECK(s.train.size() == 104);
  CHECK(s.test.size() == 60);
  CHECK(s.train.front().stock_id == 1);
  CHECK(s.train.back().stock_id == 2);

  CHECK_THROWS_AS((void)make_splits(ws, SplitOptions{0.75, 0.15, 9}), Error);
  CHECK_THROWS_AS((void)make_splits(ws, SplitOptions{0.9, 0.2, 0}), Error);
}

TEST_CASE("z-score normalization") {
  oracle::Gen g(11);
  std::vector<LobWindow> train(40), other(5);
  for (auto* set : {&train, &other})
    for (auto& w : *set) {
      w.x = Matrix(3, 4);
      for (std::size_t c = 0; c < 4; ++c) {
        w.x(0, c) = g.normal(5.0, 3.0);
        w.x(1, c) = 2.5;
        w.x(2, c) = g.normal(-1.0, 0.1);
      }
    }
  const auto stats = zscore_fit_apply(train, other);
  CHECK(stats.std[1] == kStdFloor);
  double mean0 = 0, sq0 = 0, n = 0;
  for (const auto& w : train) {
    for (std::size_t c = 0; c < 4; ++c) {
      mean0 += w.x(0, c);
      sq0 += w.x(0, c) * w.x(0, c);
      CHECK(w.x(1, c) == 0.0);
      ++n;
    }
  }
  mean0 /= n;
  CHECK(std::abs(mean0) < 1e-12);
  CHECK(std::sqrt(sq0 / n - mean0 * mean0) == doctest::Approx(1.0).epsilon(1e-9));

  std::vector<LobWindow> unit(2);
  unit[0].x = Matrix{{1.0, -1.0}};
  unit[1].x = Matrix{{-1.0, 1.0}};
  std::vector<LobWindow> none;
  const auto before = unit;
  (void)zscore_fit_apply(unit, none);
  for (std::size_t i = 0; i < 2; ++i) CHECK(max_abs_diff(unit[i].x, before[i].x) < 1e-9);
}

TEST_CASE("write then parse reproduces events exactly in both orientations") {
  TempDir dir("roundtrip");
  oracle::Gen g(13);
  std::vector<LobEvent> events;
  for (std::size_t i = 0; i < 6; ++i) {
    auto e = make_event(i, 0.0);
    for (auto& f : e.features) f = g.normal() * 1e3;
    events.push_back(e);
  }
  for (auto o : {Orientation::events_as_rows, Orientation::events_as_columns}) {
    const auto path = dir.path / (std::string(to_string(o)) + ".txt");
    write_fi2010(path, events, o);
    const auto back = parse_fi2010(path, o);
    REQUIRE(back.size() == events.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
      CHECK(back[i].features == events[i].features);
      CHECK(back[i].labels == events[i].labels);
    }
  }
}

TEST_CASE("directory discovery tags stock and day") {
  TempDir dir("discover");
  fs::create_directories(dir.path / "stock3");
  fs::create_directories(dir.path / "stock1");
  std::ofstream(dir.path / "stock3" / "day2.txt") << "";
  std::ofstream(dir.path / "stock3" / "day10.txt") << "";
  std::ofstream(dir.path / "stock1" / "Train_Dst_day_4.txt") << "";
  std::ofstream(dir.path / "notes.md") << "";
  const auto files = discover_files(dir.path);
  REQUIRE(files.size() == 3);
  CHECK(files[0].stock_id == 1);
  CHECK(files[0].day == 4);
  CHECK(files[1].stock_id == 3);
  CHECK(files[1].day == 2);
  CHECK(files[2].day == 10);

  std::ofstream(dir.path / "stock3" / "day_2.txt") << "";
  CHECK_THROWS_AS((void)discover_files(dir.path), Error);
  TempDir empty("discover_empty");
  CHECK_THROWS_AS((void)discover_files(empty.path), Error);
}

TEST_CASE("synthetic generator: balance, planted rule, file labels") {
  CHECK(normal_upper_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(normal_upper_quantile(0.2) == doctest::Approx(0.8416212335729143).epsilon(1e-9));
  CHECK(0.5 * std::erfc(normal_upper_quantile(0.025) / std::sqrt(2.0)) == doctest::Approx(0.025).epsilon(1e-10));

  SynthOptions o;
  o.days = 3;
  o.events_per_day = 3000;
  std::array<std::size_t, 3> counts{};
  std::size_t labeled = 0;
  const auto dims = default_dims(40);
  for (int day = 1; day <= o.days; ++day) {
    const auto events = synth_stream(o, 1, day);
    CHECK(events.size() == o.events_per_day);
    const auto again = synth_stream(o, 1, day);
    CHECK(again.back().features == events.back().features);
    const auto windows = build_windows(events, o.window_length, 10, dims);
    for (const auto& w : windows) {
      const int raw = planted_raw_label(w.x, o);
      CHECK(LabelMapping{}.to_index(raw) == w.label);
      ++counts[static_cast<std::size_t>(*w.label)];
      ++labeled;
    }
  }
  const double n = static_cast<double>(labeled);
  CHECK(counts[0] / n == doctest::Approx(0.6).epsilon(0.05));
  CHECK(counts[1] / n == doctest::Approx(0.2).epsilon(0.1));
  CHECK(counts[2] / n == doctest::Approx(0.2).epsilon(0.1));
}
