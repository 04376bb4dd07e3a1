#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "tpaoi/trace.hpp"

namespace tpaoi {

struct IntervalAoiPair {
  int interval = 0;  // s3
  int aoi = 0;       // s2

  bool operator==(const IntervalAoiPair&) const = default;
};

// Everything logged while rolling a policy out in the three-phase environment.
struct RunRecord {
  std::vector<double> tpaoi_samples;
  std::int64_t update_count = 0;
  std::int64_t suppressed_count = 0;
  std::int64_t access_count = 0;
  std::int64_t slot_count = 0;
  std::vector<double> reward_per_episode;
  std::vector<IntervalAoiPair> interval_aoi_pairs;

  bool operator==(const RunRecord&) const = default;

  double updates_per_access() const;
  void append(const RunRecord& other);
};

// Delta(t) for t = 1..horizon from UpdateArrived events, via the slot recursion.
std::vector<int> conventional_aoi_series(const EventTrace& trace, int horizon);

// Request AoI at the remote service: (u'-u) + (q-u') + (q'-q).
int tpaoi_of_request(std::int64_t u_send, std::int64_t u_arrive, std::int64_t q_access,
                     std::int64_t q_arrive);

double mean_tpaoi(const RunRecord& record);
double long_run_average_tpaoi(std::span<const RunRecord> records);

enum class HistogramScaling { GlobalMax, ColumnMax };

struct HistogramCell {
  int interval = 0;
  int aoi = 0;
  std::int64_t count = 0;
  double scaled = 0.0;
};

// Cells sorted by (interval, aoi). Scaled values lie in [0, 1].
std::vector<HistogramCell> interval_aoi_histogram(std::span<const IntervalAoiPair> pairs,
                                                  HistogramScaling scaling = HistogramScaling::GlobalMax);

// Modal AoI within one interval column; nullopt-like -1 when the column is empty.
int modal_aoi_at_interval(std::span<const HistogramCell> cells, int interval);

// Trailing mean; the window is clipped at the start of the series.
std::vector<double> moving_average(std::span<const double> series, int window);

// Spearman rank correlation with average ranks for ties.
double spearman_rho(std::span<const double> x, std::span<const double> y);

void write_histogram_csv(std::ostream& out, std::span<const HistogramCell> cells);
void write_series_csv(std::ostream& out, std::span<const double> raw, std::span<const double> smoothed);

}  // namespace tpaoi
