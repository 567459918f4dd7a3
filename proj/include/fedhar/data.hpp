#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fedhar/common.hpp"
#include "fedhar/rng.hpp"
#include "fedhar/signals.hpp"

namespace fedhar {

// One user's local data with a stratified train/test split.
struct ClientDataset {
  std::string user_id;
  std::vector<SensorSample> samples;
  std::vector<int> train_idx;
  std::vector<int> test_idx;
  std::vector<std::string> activities;  // sorted; local label = position

  int local_label(const std::string& activity) const {
    auto it = std::lower_bound(activities.begin(), activities.end(), activity);
    require(it != activities.end() && *it == activity,
            "ClientDataset: activity not in local set: " + activity);
    return static_cast<int>(it - activities.begin());
  }

  std::size_t n_classes() const { return activities.size(); }
};

// Stratified split: each activity's train fraction is within one sample of
// the requested fraction.
inline ClientDataset make_client(std::string user_id, std::vector<SensorSample> samples,
                                 std::uint64_t split_seed, double train_frac = 0.8) {
  require(!samples.empty(), "make_client: user " + user_id + " has no samples");
  ClientDataset c;
  c.user_id = std::move(user_id);
  c.samples = std::move(samples);

  std::set<std::string> acts;
  for (const auto& s : c.samples) acts.insert(s.activity);
  c.activities.assign(acts.begin(), acts.end());

  Rng rng(derive_seed(split_seed, "local_split"));
  std::map<std::string, std::vector<int>> by_act;
  for (std::size_t i = 0; i < c.samples.size(); ++i)
    by_act[c.samples[i].activity].push_back(static_cast<int>(i));
  for (auto& [act, idx] : by_act) {
    rng.shuffle(idx);
    const std::size_t n_train = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(train_frac * static_cast<double>(idx.size()))));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (i < n_train)
        c.train_idx.push_back(idx[i]);
      else
        c.test_idx.push_back(idx[i]);
    }
  }
  std::sort(c.train_idx.begin(), c.train_idx.end());
  std::sort(c.test_idx.begin(), c.test_idx.end());
  return c;
}

struct FederationSplit {
  std::vector<ClientDataset> meta_train;
  std::vector<ClientDataset> meta_test;
  std::vector<std::string> vocabulary;  // global activity set (sorted union)
};

inline std::vector<std::string> union_vocabulary(const std::vector<ClientDataset>& users) {
  std::set<std::string> v;
  for (const auto& u : users) v.insert(u.activities.begin(), u.activities.end());
  return {v.begin(), v.end()};
}

// Assigns fresh, unique global indices to every sample.
inline void reindex_all(std::vector<ClientDataset>& users) {
  std::int64_t next = 0;
  for (auto& u : users)
    for (auto& s : u.samples) s.index = next++;
}

// ---------------------------------------------------------------------------
// canonical line-delimited format
// ---------------------------------------------------------------------------
// One JSON object per line:
//   {"user_id": "...", "activity": "...",
//    "sensors": [{"name": "...", "rate_hz": 25.0, "axes": [[...], ...]}, ...]}
// On ingestion, records whose length is outside [150, 200] are counted as
// malformed and skipped; accepted records are truncated to the first 150
// points.

inline nlohmann::json sample_to_json(const SensorSample& s) {
  nlohmann::json j;
  j["user_id"] = s.user_id;
  j["activity"] = s.activity;
  nlohmann::json sensors = nlohmann::json::array();
  for (const auto& tr : s.sensors) {
    nlohmann::json js;
    js["name"] = tr.name;
    js["rate_hz"] = tr.rate_hz;
    js["axes"] = tr.axes;
    sensors.push_back(std::move(js));
  }
  j["sensors"] = std::move(sensors);
  return j;
}

inline SensorSample sample_from_json(const nlohmann::json& j) {
  SensorSample s;
  s.user_id = j.at("user_id").get<std::string>();
  s.activity = j.at("activity").get<std::string>();
  for (const auto& js : j.at("sensors")) {
    SensorTrack tr;
    tr.name = js.at("name").get<std::string>();
    tr.rate_hz = js.at("rate_hz").get<double>();
    tr.axes = js.at("axes").get<std::vector<std::vector<double>>>();
    s.sensors.push_back(std::move(tr));
  }
  s.validate();
  return s;
}

inline void save_canonical(const std::string& path, const std::vector<SensorSample>& samples) {
  std::ofstream f(path);
  require(f.is_open(), "save_canonical: cannot open " + path);
  for (const auto& s : samples) f << sample_to_json(s).dump() << "\n";
  require(f.good(), "save_canonical: write failed");
}

struct LoadStats {
  std::size_t accepted = 0;
  std::size_t malformed = 0;
};

inline std::vector<SensorSample> load_canonical(const std::string& path,
                                                LoadStats* stats = nullptr,
                                                bool apply_length_gate = true) {
  std::ifstream f(path);
  require(f.is_open(), "load_canonical: cannot open " + path);
  std::vector<SensorSample> out;
  LoadStats st;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    try {
      SensorSample s = sample_from_json(nlohmann::json::parse(line));
      const std::size_t len = s.length();
      if (apply_length_gate) {
        require(len >= kCanonicalLength && len <= 200, "length outside [150, 200]");
        for (auto& tr : s.sensors)
          for (auto& axis : tr.axes) axis.resize(kCanonicalLength);
      }
      s.index = static_cast<std::int64_t>(out.size());
      out.push_back(std::move(s));
      ++st.accepted;
    } catch (const std::exception&) {
      ++st.malformed;
    }
  }
  const std::size_t total = st.accepted + st.malformed;
  require(total > 0, "load_canonical: no records in " + path);
  require(st.malformed * 2 <= total, "load_canonical: more than 50% malformed records");
  if (stats) *stats = st;
  return out;
}

// ---------------------------------------------------------------------------
// CSV ingestion for public-dataset layouts
// ---------------------------------------------------------------------------

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

// Linear interpolation of (times, values) onto a uniform grid.
inline std::vector<double> resample_linear(const std::vector<double>& times,
                                           const std::vector<double>& values,
                                           const std::vector<double>& grid) {
  std::vector<double> out(grid.size());
  std::size_t seg = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i];
    while (seg + 2 < times.size() && times[seg + 1] <= t) ++seg;
    const double t0 = times[seg], t1 = times[seg + 1];
    const double w = t1 > t0 ? (t - t0) / (t1 - t0) : 0.0;
    out[i] = values[seg] + w * (values[seg + 1] - values[seg]);
  }
  return out;
}

namespace detail {

struct SensorRows {
  std::vector<double> t;
  std::array<std::vector<double>, 3> xyz;
};

// key: user \x1f device \x1f activity
using GroupedRows = std::map<std::string, SensorRows>;

inline GroupedRows read_hhar_csv(const std::string& path, double time_divisor,
                                 std::size_t* malformed, std::size_t* total) {
  std::ifstream f(path);
  require(f.is_open(), "load_hhar: cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(f, line)), "load_hhar: empty file " + path);
  const auto header = split_csv(line);
  auto col = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  };
  const int c_time = col("Creation_Time"), c_x = col("x"), c_y = col("y"), c_z = col("z");
  const int c_user = col("User"), c_gt = col("gt"), c_dev = col("Device");
  require(c_time >= 0 && c_x >= 0 && c_y >= 0 && c_z >= 0 && c_user >= 0 && c_gt >= 0,
          "load_hhar: missing columns in " + path);

  GroupedRows groups;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    ++*total;
    const auto cells = split_csv(line);
    try {
      const std::string& gt = cells.at(static_cast<std::size_t>(c_gt));
      if (gt.empty() || gt == "null") continue;  // unlabeled rows are not malformed
      const std::string dev = c_dev >= 0 ? cells.at(static_cast<std::size_t>(c_dev)) : "dev";
      const std::string key =
          cells.at(static_cast<std::size_t>(c_user)) + "\x1f" + dev + "\x1f" + gt;
      SensorRows& rows = groups[key];
      rows.t.push_back(std::stod(cells.at(static_cast<std::size_t>(c_time))) / time_divisor);
      rows.xyz[0].push_back(std::stod(cells.at(static_cast<std::size_t>(c_x))));
      rows.xyz[1].push_back(std::stod(cells.at(static_cast<std::size_t>(c_y))));
      rows.xyz[2].push_back(std::stod(cells.at(static_cast<std::size_t>(c_z))));
    } catch (const std::exception&) {
      ++*malformed;
    }
  }
  for (auto& [key, rows] : groups) {
    std::vector<std::size_t> order(rows.t.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return rows.t[a] < rows.t[b]; });
    SensorRows sorted;
    sorted.t.reserve(order.size());
    for (std::size_t i : order) {
      sorted.t.push_back(rows.t[i]);
      for (int a = 0; a < 3; ++a) sorted.xyz[static_cast<std::size_t>(a)].push_back(
          rows.xyz[static_cast<std::size_t>(a)][i]);
    }
    rows = std::move(sorted);
  }
  return groups;
}

}  // namespace detail

// HHAR-layout ingestion: a directory holding Phones_accelerometer.csv and
// Phones_gyroscope.csv (columns Creation_Time, x, y, z, User, Device, gt).
// Readings are linearly resampled to 25 Hz and cut into 6 s windows of 150
// points; runs are split on gaps larger than one second.
inline std::vector<SensorSample> load_hhar(const std::string& dir, LoadStats* stats = nullptr,
                                           double time_divisor = 1e9) {
  std::size_t malformed = 0, total = 0;
  auto accel = detail::read_hhar_csv(dir + "/Phones_accelerometer.csv", time_divisor,
                                     &malformed, &total);
  auto gyro = detail::read_hhar_csv(dir + "/Phones_gyroscope.csv", time_divisor,
                                    &malformed, &total);
  require(total > 0, "load_hhar: no data rows");
  require(malformed * 2 <= total, "load_hhar: more than 50% malformed rows");

  const double rate = 25.0;
  std::vector<SensorSample> out;
  for (const auto& [key, arows] : accel) {
    auto git = gyro.find(key);
    if (git == gyro.end() || arows.t.size() < 2 || git->second.t.size() < 2) continue;
    const auto& grows = git->second;
    std::istringstream ks(key);
    std::string user, dev, act;
    std::getline(ks, user, '\x1f');
    std::getline(ks, dev, '\x1f');
    std::getline(ks, act, '\x1f');

    // split the accelerometer timeline into runs on > 1 s gaps
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    std::size_t start = 0;
    for (std::size_t i = 1; i < arows.t.size(); ++i) {
      if (arows.t[i] - arows.t[i - 1] > 1.0) {
        runs.emplace_back(start, i);
        start = i;
      }
    }
    runs.emplace_back(start, arows.t.size());

    for (const auto& [lo, hi] : runs) {
      if (hi - lo < 2) continue;
      const double t0 = std::max(arows.t[lo], grows.t.front());
      const double t1 = std::min(arows.t[hi - 1], grows.t.back());
      const int n_windows = static_cast<int>(std::floor((t1 - t0) * rate / kCanonicalLength));
      if (n_windows < 1) continue;
      std::vector<double> at(arows.t.begin() + static_cast<std::ptrdiff_t>(lo),
                             arows.t.begin() + static_cast<std::ptrdiff_t>(hi));
      for (int w = 0; w < n_windows; ++w) {
        std::vector<double> grid(kCanonicalLength);
        for (int i = 0; i < kCanonicalLength; ++i)
          grid[static_cast<std::size_t>(i)] =
              t0 + (static_cast<double>(w) * kCanonicalLength + i) / rate;
        SensorSample s;
        s.user_id = user;
        s.activity = act;
        SensorTrack acc_tr{"accelerometer", {}, rate};
        SensorTrack gyr_tr{"gyroscope", {}, rate};
        for (int a = 0; a < 3; ++a) {
          std::vector<double> av(arows.xyz[static_cast<std::size_t>(a)].begin() +
                                     static_cast<std::ptrdiff_t>(lo),
                                 arows.xyz[static_cast<std::size_t>(a)].begin() +
                                     static_cast<std::ptrdiff_t>(hi));
          acc_tr.axes.push_back(resample_linear(at, av, grid));
          gyr_tr.axes.push_back(
              resample_linear(grows.t, grows.xyz[static_cast<std::size_t>(a)], grid));
        }
        s.sensors.push_back(std::move(acc_tr));
        s.sensors.push_back(std::move(gyr_tr));
        s.index = static_cast<std::int64_t>(out.size());
        out.push_back(std::move(s));
      }
    }
  }
  if (stats) {
    stats->accepted = out.size();
    stats->malformed = malformed;
  }
  return out;
}

// USC-HAD-style export: a single CSV with header
//   user,activity,trial,acc_x,acc_y,acc_z,gyro_x,gyro_y,gyro_z
// sampled uniformly at `source_rate` Hz (no timestamp column). Rows are
// down-sampled to 50 Hz and cut into 3 s windows of 150 points per
// (user, activity, trial) block.
inline std::vector<SensorSample> load_uschad(const std::string& path, LoadStats* stats = nullptr,
                                             double source_rate = 100.0) {
  std::ifstream f(path);
  require(f.is_open(), "load_uschad: cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(f, line)), "load_uschad: empty file");
  const auto header = split_csv(line);
  require(header.size() >= 9 && header[0] == "user" && header[1] == "activity",
          "load_uschad: unexpected header");

  struct Block {
    std::array<std::vector<double>, 6> cols;  // acc xyz, gyro xyz
  };
  std::map<std::string, Block> blocks;  // key: user \x1f activity \x1f trial
  std::size_t malformed = 0, total = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    ++total;
    const auto cells = split_csv(line);
    try {
      require(cells.size() >= 9, "short row");
      const std::string key = cells[0] + "\x1f" + cells[1] + "\x1f" + cells[2];
      Block& b = blocks[key];
      for (int i = 0; i < 6; ++i)
        b.cols[static_cast<std::size_t>(i)].push_back(
            std::stod(cells[static_cast<std::size_t>(i + 3)]));
    } catch (const std::exception&) {
      ++malformed;
    }
  }
  require(total > 0, "load_uschad: no data rows");
  require(malformed * 2 <= total, "load_uschad: more than 50% malformed rows");

  const double rate = 50.0;
  std::vector<SensorSample> out;
  for (const auto& [key, b] : blocks) {
    std::istringstream ks(key);
    std::string user, act, trial;
    std::getline(ks, user, '\x1f');
    std::getline(ks, act, '\x1f');
    std::getline(ks, trial, '\x1f');
    const std::size_t n_src = b.cols[0].size();
    if (n_src < 2) continue;
    std::vector<double> src_t(n_src);
    for (std::size_t i = 0; i < n_src; ++i) src_t[i] = static_cast<double>(i) / source_rate;
    const std::size_t n_dst =
        static_cast<std::size_t>(std::floor(src_t.back() * rate)) + 1;
    const int n_windows = static_cast<int>(n_dst / kCanonicalLength);
    for (int w = 0; w < n_windows; ++w) {
      std::vector<double> grid(kCanonicalLength);
      for (int i = 0; i < kCanonicalLength; ++i)
        grid[static_cast<std::size_t>(i)] =
            (static_cast<double>(w) * kCanonicalLength + i) / rate;
      SensorSample s;
      s.user_id = user;
      s.activity = act;
      SensorTrack acc_tr{"accelerometer", {}, rate};
      SensorTrack gyr_tr{"gyroscope", {}, rate};
      for (int a = 0; a < 3; ++a) {
        acc_tr.axes.push_back(resample_linear(src_t, b.cols[static_cast<std::size_t>(a)], grid));
        gyr_tr.axes.push_back(
            resample_linear(src_t, b.cols[static_cast<std::size_t>(a + 3)], grid));
      }
      s.sensors.push_back(std::move(acc_tr));
      s.sensors.push_back(std::move(gyr_tr));
      s.index = static_cast<std::int64_t>(out.size());
      out.push_back(std::move(s));
    }
  }
  if (stats) {
    stats->accepted = out.size();
    stats->malformed = malformed;
  }
  return out;
}

inline std::vector<SensorSample> load_dataset(const std::string& path, const std::string& format,
                                              LoadStats* stats = nullptr) {
  if (format == "canonical") return load_canonical(path, stats);
  if (format == "hhar") return load_hhar(path, stats);
  if (format == "uschad") return load_uschad(path, stats);
  fail("load_dataset: unknown format: " + format);
}

// Groups flat samples into per-user clients.
inline std::vector<ClientDataset> group_by_user(const std::vector<SensorSample>& samples,
                                                std::uint64_t seed) {
  std::map<std::string, std::vector<SensorSample>> by_user;
  for (const auto& s : samples) by_user[s.user_id].push_back(s);
  std::vector<ClientDataset> out;
  for (auto& [user, ss] : by_user)
    out.push_back(make_client(user, std::move(ss), derive_seed(seed, "user_split", hash_str(user))));
  return out;
}

// ---------------------------------------------------------------------------
// partitioning
// ---------------------------------------------------------------------------

// Per user, removes r in {0, 1, 2} activities drawn uniformly at random.
inline std::vector<ClientDataset> non_iid_partition(const std::vector<ClientDataset>& users,
                                                    Rng& rng) {
  std::vector<ClientDataset> out;
  out.reserve(users.size());
  for (const auto& u : users) {
    require(u.activities.size() >= 3,
            "non_iid_partition: user " + u.user_id + " has fewer than 3 activities");
    int r;
    do {
      r = rng.below_int(3);
    } while (static_cast<std::size_t>(r) >= u.activities.size());
    std::vector<std::string> acts = u.activities;
    rng.shuffle(acts);
    std::set<std::string> removed(acts.begin(), acts.begin() + r);
    std::vector<SensorSample> kept;
    for (const auto& s : u.samples)
      if (!removed.count(s.activity)) kept.push_back(s);
    out.push_back(make_client(u.user_id, std::move(kept), rng.next_u64()));
  }
  return out;
}

// Pools all samples, shuffles them and deals them back preserving per-user
// counts; the global sample multiset is unchanged.
inline std::vector<ClientDataset> shuffle_redistribute(const std::vector<ClientDataset>& users,
                                                       Rng& rng) {
  require(users.size() >= 2, "shuffle_redistribute: need at least 2 users");
  std::vector<SensorSample> pool;
  std::vector<std::pair<std::string, std::size_t>> counts;
  for (const auto& u : users) {
    counts.emplace_back(u.user_id, u.samples.size());
    pool.insert(pool.end(), u.samples.begin(), u.samples.end());
  }
  rng.shuffle(pool);
  std::vector<ClientDataset> out;
  std::size_t cursor = 0;
  for (const auto& [user, n] : counts) {
    std::vector<SensorSample> part(pool.begin() + static_cast<std::ptrdiff_t>(cursor),
                                   pool.begin() + static_cast<std::ptrdiff_t>(cursor + n));
    cursor += n;
    out.push_back(make_client(user, std::move(part), rng.next_u64()));
  }
  return out;
}

// Holds out n_test users as meta-test users.
inline FederationSplit split_meta(const std::vector<ClientDataset>& users, int n_test, Rng& rng) {
  require(n_test >= 0, "split_meta: negative n_test");
  require(static_cast<std::size_t>(n_test) < users.size(),
          "split_meta: n_test must be smaller than the number of users");
  std::vector<std::size_t> order(users.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  FederationSplit split;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < static_cast<std::size_t>(n_test))
      split.meta_test.push_back(users[order[i]]);
    else
      split.meta_train.push_back(users[order[i]]);
  }
  auto by_id = [](const ClientDataset& a, const ClientDataset& b) { return a.user_id < b.user_id; };
  std::sort(split.meta_train.begin(), split.meta_train.end(), by_id);
  std::sort(split.meta_test.begin(), split.meta_test.end(), by_id);
  std::vector<ClientDataset> all = split.meta_train;
  all.insert(all.end(), split.meta_test.begin(), split.meta_test.end());
  split.vocabulary = union_vocabulary(all);
  return split;
}

// Union of two user populations; `rename_b` maps activity names of `b` onto
// the shared vocabulary before merging. Duplicate user ids are an error.
inline std::vector<ClientDataset> merge_datasets(
    const std::vector<ClientDataset>& a, const std::vector<ClientDataset>& b,
    const std::map<std::string, std::string>& rename_b = {}) {
  std::set<std::string> ids;
  for (const auto& u : a) ids.insert(u.user_id);
  std::vector<ClientDataset> out = a;
  for (const auto& u : b) {
    require(!ids.count(u.user_id), "merge_datasets: duplicate user id: " + u.user_id);
    ids.insert(u.user_id);
    ClientDataset copy = u;
    if (!rename_b.empty()) {
      for (auto& s : copy.samples) {
        auto it = rename_b.find(s.activity);
        if (it != rename_b.end()) s.activity = it->second;
      }
      std::set<std::string> acts;
      for (const auto& s : copy.samples) acts.insert(s.activity);
      std::vector<std::string> renamed(acts.begin(), acts.end());
      // renaming activities preserves sample membership, so the split
      // indices remain valid
      copy.activities = std::move(renamed);
    }
    out.push_back(std::move(copy));
  }
  return out;
}

// ---------------------------------------------------------------------------
// synthetic heterogeneous users
// ---------------------------------------------------------------------------
// Class controls the base frequency band, amplitude and harmonic profile;
// user style shifts frequency, scales amplitude, rotates the axes (phone
// orientation) and adds per-axis offsets.

inline const std::vector<std::string>& synthetic_activity_names() {
  static const std::vector<std::string> names = {
      "walking", "jogging", "upstairs", "downstairs", "sitting", "biking", "standing"};
  return names;
}

struct SyntheticUserSpec {
  std::string user_id;
  int n_classes = 4;
  double rate_hz = kDefaultRateHz;
  int length = kCanonicalLength;
  double noise_level = 0.25;
  // style
  double freq_shift = 0.0;  // Hz, applied to every class
  double amp_scale = 1.0;
  std::vector<std::array<double, 3>> rot_axis;    // per sensor, unit vector
  std::vector<double> rot_angle;                  // per sensor, radians
  std::vector<std::array<double, 3>> dc_offset;   // per sensor
};

struct SynthConfig {
  int n_users = 8;
  int n_classes = 4;
  double style_strength = 1.0;
  double noise_level = 0.25;
  double rate_hz = kDefaultRateHz;
  int length = kCanonicalLength;
};

inline std::vector<SyntheticUserSpec> build_user_specs(const SynthConfig& cfg, Rng& rng) {
  require(cfg.n_users >= 1 && cfg.n_classes >= 1, "build_user_specs: bad config");
  require(static_cast<std::size_t>(cfg.n_classes) <= synthetic_activity_names().size(),
          "build_user_specs: too many classes");
  std::vector<SyntheticUserSpec> specs;
  const double s = cfg.style_strength;
  for (int u = 0; u < cfg.n_users; ++u) {
    SyntheticUserSpec spec;
    spec.user_id = "user_" + std::string(1, static_cast<char>('a' + u % 26)) +
                   (u >= 26 ? std::to_string(u / 26) : "");
    spec.n_classes = cfg.n_classes;
    spec.rate_hz = cfg.rate_hz;
    spec.length = cfg.length;
    spec.noise_level = cfg.noise_level;
    spec.freq_shift = s * rng.uniform(-0.25, 0.25);
    spec.amp_scale = 1.0 + s * rng.uniform(-0.18, 0.18);
    for (int sensor = 0; sensor < 2; ++sensor) {
      std::array<double, 3> axis{rng.normal(), rng.normal(), rng.normal()};
      double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
      if (n < 1e-12) {
        axis = {1.0, 0.0, 0.0};
        n = 1.0;
      }
      for (double& v : axis) v /= n;
      spec.rot_axis.push_back(axis);
      spec.rot_angle.push_back(s * rng.uniform(0.25, 1.0) * 1.25);
      spec.dc_offset.push_back({s * rng.normal(0.0, 0.3), s * rng.normal(0.0, 0.3),
                                s * rng.normal(0.0, 0.3)});
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

namespace detail {

inline std::array<double, 3> rotate(const std::array<double, 3>& v,
                                    const std::array<double, 3>& axis, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  const double kd = axis[0] * v[0] + axis[1] * v[1] + axis[2] * v[2];
  std::array<double, 3> cross{axis[1] * v[2] - axis[2] * v[1],
                              axis[2] * v[0] - axis[0] * v[2],
                              axis[0] * v[1] - axis[1] * v[0]};
  std::array<double, 3> out;
  for (int i = 0; i < 3; ++i)
    out[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)] * c +
                                       cross[static_cast<std::size_t>(i)] * s +
                                       axis[static_cast<std::size_t>(i)] * kd * (1.0 - c);
  return out;
}

}  // namespace detail

inline SensorSample synth_sample(const SyntheticUserSpec& spec, int cls, Rng& rng) {
  // classes differ mainly in spectral position and shape, not in amplitude;
  // user style shifts frequencies by a noticeable fraction of the class
  // spacing, so per-user shortcuts conflict across users
  const double base_freq = 1.6 + 0.7 * cls + spec.freq_shift;
  const double base_amp = 1.0;
  const double harmonic = 0.15 + 0.1 * ((cls + 1) % 4);
  const double psi = 0.9 * cls;

  SensorSample sample;
  sample.user_id = spec.user_id;
  sample.activity = synthetic_activity_names()[static_cast<std::size_t>(cls)];
  const char* sensor_names[2] = {"accelerometer", "gyroscope"};
  const double sensor_amp[2] = {1.0, 0.65};
  const double sensor_freq[2] = {1.0, 1.15};
  for (int m = 0; m < 2; ++m) {
    const double phi = rng.uniform(0.0, 2.0 * M_PI);
    const double phi2 = rng.uniform(0.0, 2.0 * M_PI);
    SensorTrack tr{sensor_names[m], {{}, {}, {}}, spec.rate_hz};
    for (auto& axis : tr.axes) axis.resize(static_cast<std::size_t>(spec.length));
    const double f = base_freq * sensor_freq[m];
    const double amp = base_amp * sensor_amp[m] * spec.amp_scale;
    for (int i = 0; i < spec.length; ++i) {
      const double t = static_cast<double>(i) / spec.rate_hz;
      std::array<double, 3> p{
          amp * std::sin(2.0 * M_PI * f * t + phi),
          0.8 * amp * std::sin(2.0 * M_PI * f * t + phi + psi),
          0.55 * amp * (harmonic * std::sin(4.0 * M_PI * f * t + phi2) +
                        0.4 * std::sin(2.0 * M_PI * f * t + phi))};
      p = detail::rotate(p, spec.rot_axis[static_cast<std::size_t>(m)],
                         spec.rot_angle[static_cast<std::size_t>(m)]);
      for (int a = 0; a < 3; ++a) {
        tr.axes[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)] =
            p[static_cast<std::size_t>(a)] +
            spec.dc_offset[static_cast<std::size_t>(m)][static_cast<std::size_t>(a)] +
            rng.normal(0.0, spec.noise_level);
      }
    }
    sample.sensors.push_back(std::move(tr));
  }
  return sample;
}

inline std::vector<ClientDataset> synth_generate(const std::vector<SyntheticUserSpec>& specs,
                                                 int n_per_class, Rng& rng) {
  require(n_per_class >= 0, "synth_generate: negative n_per_class");
  std::vector<ClientDataset> out;
  for (const auto& spec : specs) {
    std::vector<SensorSample> samples;
    for (int c = 0; c < spec.n_classes; ++c)
      for (int i = 0; i < n_per_class; ++i) samples.push_back(synth_sample(spec, c, rng));
    if (samples.empty()) {
      ClientDataset empty;
      empty.user_id = spec.user_id;
      out.push_back(std::move(empty));
      continue;
    }
    out.push_back(make_client(spec.user_id, std::move(samples), rng.next_u64()));
  }
  reindex_all(out);
  return out;
}

// ---------------------------------------------------------------------------
// feature cache
// ---------------------------------------------------------------------------

// Preprocessed features for every sample, keyed by the sample's global index.
struct FeatureStore {
  std::vector<SampleFeatures> features;
  std::vector<std::string> sensor_names;

  static FeatureStore build(const std::vector<ClientDataset>& users, int k = kDefaultIntervals) {
    FeatureStore store;
    std::int64_t max_index = -1;
    for (const auto& u : users)
      for (const auto& s : u.samples) max_index = std::max(max_index, s.index);
    store.features.resize(static_cast<std::size_t>(max_index + 1));
    for (const auto& u : users) {
      for (const auto& s : u.samples) {
        require(s.index >= 0, "FeatureStore: sample without a global index");
        store.features[static_cast<std::size_t>(s.index)] = preprocess(s, k);
      }
      if (store.sensor_names.empty() && !u.samples.empty()) {
        for (const auto& tr : u.samples.front().sensors) store.sensor_names.push_back(tr.name);
      }
    }
    return store;
  }

  const SampleFeatures& of(const SensorSample& s) const {
    return features.at(static_cast<std::size_t>(s.index));
  }
};

}  // namespace fedhar
