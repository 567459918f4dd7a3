#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedhar/common.hpp"
#include "fedhar/fft.hpp"
#include "fedhar/tensor.hpp"

namespace fedhar {

constexpr int kCanonicalLength = 150;      // points per sample window
constexpr int kDefaultIntervals = 5;       // k time intervals per window
constexpr double kDefaultRateHz = 25.0;

struct SensorTrack {
  std::string name;
  std::vector<std::vector<double>> axes;  // each axis has equal length
  double rate_hz = kDefaultRateHz;

  std::size_t length() const { return axes.empty() ? 0 : axes.front().size(); }

  void validate() const {
    require(!axes.empty(), "SensorTrack: at least one axis required");
    const std::size_t t = axes.front().size();
    require(t >= 1, "SensorTrack: empty axis");
    for (const auto& a : axes) require(a.size() == t, "SensorTrack: axes of unequal length");
  }
};

struct SensorSample {
  std::string user_id;
  std::string activity;
  std::vector<SensorTrack> sensors;
  std::int64_t index = -1;  // global identity, assigned at load/generation

  std::size_t length() const { return sensors.empty() ? 0 : sensors.front().length(); }

  void validate() const {
    require(!sensors.empty(), "SensorSample: at least one sensor required");
    const std::size_t t = sensors.front().length();
    require(t >= 1, "SensorSample: empty sensor data");
    for (const auto& s : sensors) {
      s.validate();
      require(s.length() == t, "SensorSample: sensors of unequal length");
    }
  }
};

// Frequency-domain input: one tensor of shape k x 2(d+1) x f per sensor,
// channel layout [axis0 magnitudes, axis0 frequencies, axis1 magnitudes, ...]
// over the amplitude-augmented axes.
struct SampleFeatures {
  std::vector<Tensor> per_sensor;
};

// Appends the Euclidean-norm amplitude axis to the track.
inline SensorTrack amplitude_augment(const SensorTrack& track) {
  track.validate();
  SensorTrack out = track;
  const std::size_t t = track.length();
  std::vector<double> amp(t, 0.0);
  for (std::size_t i = 0; i < t; ++i) {
    double ss = 0.0;
    for (const auto& axis : track.axes) ss += axis[i] * axis[i];
    amp[i] = std::sqrt(ss);
  }
  out.axes.push_back(std::move(amp));
  return out;
}

// Splits a sequence into k equal blocks of length floor(T/k); trailing points
// that do not fill a block are dropped.
inline std::vector<std::vector<double>> segment(std::span<const double> seq, int k) {
  require(k >= 1, "segment: k must be >= 1");
  require(static_cast<std::size_t>(k) <= seq.size(), "segment: k exceeds sequence length");
  const std::size_t tau = seq.size() / static_cast<std::size_t>(k);
  std::vector<std::vector<double>> blocks(static_cast<std::size_t>(k));
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    blocks[b].assign(seq.begin() + static_cast<std::ptrdiff_t>(b * tau),
                     seq.begin() + static_cast<std::ptrdiff_t>((b + 1) * tau));
  }
  return blocks;
}

inline std::vector<std::vector<double>> segment(const SensorTrack& track, int k, std::size_t axis) {
  track.validate();
  return segment(track.axes.at(axis), k);
}

// Raw sample -> frequency-domain tensors, one per sensor.
inline SampleFeatures preprocess(const SensorSample& sample, int k = kDefaultIntervals) {
  sample.validate();
  SampleFeatures out;
  out.per_sensor.reserve(sample.sensors.size());
  for (const auto& sensor : sample.sensors) {
    const SensorTrack aug = amplitude_augment(sensor);
    const std::size_t n_axes = aug.axes.size();  // d + 1
    const std::size_t tau = aug.length() / static_cast<std::size_t>(k);
    require(tau >= 2, "preprocess: interval too short for spectrum");
    const std::size_t f = onesided_bins(tau);
    Tensor t({static_cast<std::size_t>(k), 2 * n_axes, f});
    for (std::size_t a = 0; a < n_axes; ++a) {
      auto blocks = segment(aug.axes[a], k);
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        Spectrum s = fft_features(blocks[b], aug.rate_hz);
        for (std::size_t j = 0; j < f; ++j) {
          t.at(b, 2 * a, j) = s.magnitude[j];
          t.at(b, 2 * a + 1, j) = s.frequency[j];
        }
      }
    }
    t.check_finite("preprocess(" + sensor.name + ")");
    out.per_sensor.push_back(std::move(t));
  }
  return out;
}

// Per-axis summary statistics over the full window (population std).
struct AxisStats {
  double mean = 0.0;
  double std = 0.0;
  double max = 0.0;
  double min = 0.0;
};

struct HandcraftedFeatures {
  std::vector<AxisStats> axes;  // amplitude-augmented axes of all sensors, in order

  std::vector<double> flat() const {
    std::vector<double> v;
    v.reserve(axes.size() * 4);
    for (const auto& a : axes) {
      v.push_back(a.mean);
      v.push_back(a.std);
      v.push_back(a.max);
      v.push_back(a.min);
    }
    return v;
  }
};

inline AxisStats axis_stats(std::span<const double> x) {
  require(!x.empty(), "axis_stats: empty axis");
  AxisStats s;
  s.max = x[0];
  s.min = x[0];
  double sum = 0.0;
  for (double v : x) {
    sum += v;
    s.max = std::max(s.max, v);
    s.min = std::min(s.min, v);
  }
  s.mean = sum / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(x.size()));
  return s;
}

inline HandcraftedFeatures handcrafted(const SensorSample& sample) {
  sample.validate();
  HandcraftedFeatures out;
  for (const auto& sensor : sample.sensors) {
    const SensorTrack aug = amplitude_augment(sensor);
    for (const auto& axis : aug.axes) out.axes.push_back(axis_stats(axis));
  }
  return out;
}

// Per-channel standardization statistics, fit on a client's train split.
// Channel c of sensor s is normalized with the mean/std of that channel over
// all samples, intervals and frequency bins.
struct ChannelStats {
  // per sensor: mean and std per channel
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> std;

  static ChannelStats fit(const std::vector<const SampleFeatures*>& samples) {
    require(!samples.empty(), "ChannelStats::fit: no samples");
    const std::size_t n_sensors = samples.front()->per_sensor.size();
    ChannelStats cs;
    cs.mean.resize(n_sensors);
    cs.std.resize(n_sensors);
    for (std::size_t s = 0; s < n_sensors; ++s) {
      const auto& shape = samples.front()->per_sensor[s].shape();
      const std::size_t channels = shape[1];
      const std::size_t per_channel = shape[0] * shape[2];
      std::vector<double> sum(channels, 0.0), sum_sq(channels, 0.0);
      for (const SampleFeatures* sf : samples) {
        const Tensor& t = sf->per_sensor[s];
        require(t.shape() == shape, "ChannelStats::fit: inconsistent feature shapes");
        for (std::size_t b = 0; b < shape[0]; ++b) {
          for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t j = 0; j < shape[2]; ++j) {
              double v = t.at(b, c, j);
              sum[c] += v;
              sum_sq[c] += v * v;
            }
          }
        }
      }
      const double n = static_cast<double>(per_channel * samples.size());
      cs.mean[s].resize(channels);
      cs.std[s].resize(channels);
      for (std::size_t c = 0; c < channels; ++c) {
        double m = sum[c] / n;
        double var = std::max(0.0, sum_sq[c] / n - m * m);
        cs.mean[s][c] = m;
        cs.std[s][c] = std::max(std::sqrt(var), 1e-8);
      }
    }
    return cs;
  }

  SampleFeatures apply(const SampleFeatures& sf) const {
    SampleFeatures out = sf;
    for (std::size_t s = 0; s < out.per_sensor.size(); ++s) {
      Tensor& t = out.per_sensor[s];
      const auto& shape = t.shape();
      for (std::size_t b = 0; b < shape[0]; ++b) {
        for (std::size_t c = 0; c < shape[1]; ++c) {
          const double m = mean.at(s).at(c);
          const double inv = 1.0 / std.at(s).at(c);
          for (std::size_t j = 0; j < shape[2]; ++j) {
            t.at(b, c, j) = (t.at(b, c, j) - m) * inv;
          }
        }
      }
    }
    return out;
  }
};

}  // namespace fedhar
