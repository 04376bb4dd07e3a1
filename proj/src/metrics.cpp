#include "tpaoi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <string>

#include "tpaoi/errors.hpp"

namespace tpaoi {

double RunRecord::updates_per_access() const {
  return access_count == 0 ? 0.0 : static_cast<double>(update_count) / static_cast<double>(access_count);
}

void RunRecord::append(const RunRecord& other) {
  tpaoi_samples.insert(tpaoi_samples.end(), other.tpaoi_samples.begin(), other.tpaoi_samples.end());
  update_count += other.update_count;
  suppressed_count += other.suppressed_count;
  access_count += other.access_count;
  slot_count += other.slot_count;
  reward_per_episode.insert(reward_per_episode.end(), other.reward_per_episode.begin(),
                            other.reward_per_episode.end());
  interval_aoi_pairs.insert(interval_aoi_pairs.end(), other.interval_aoi_pairs.begin(),
                            other.interval_aoi_pairs.end());
}

std::vector<int> conventional_aoi_series(const EventTrace& trace, int horizon) {
  if (horizon < 0) throw ArgumentError("horizon must be >= 0");
  std::map<std::int64_t, int> transit_at;  // arrival slot -> transit
  std::map<std::int64_t, int> sent;        // send slot -> count
  std::int64_t prev_slot = std::numeric_limits<std::int64_t>::min();
  for (const auto& e : trace) {
    if (e.slot < prev_slot) throw TraceError("trace slots are not nondecreasing");
    prev_slot = e.slot;
    if (e.kind == EventKind::UpdateSent) {
      ++sent[e.slot];
    } else if (e.kind == EventKind::UpdateArrived) {
      if (e.payload.size() != 2) throw TraceError("UPDATE_ARRIVED needs [send_slot, transit]");
      const auto send = e.payload[0];
      const auto transit = e.payload[1];
      if (transit != e.slot - send || transit < 0)
        throw TraceError("UPDATE_ARRIVED transit disagrees with its slots at " + std::to_string(e.slot));
      auto it = sent.find(send);
      if (it == sent.end() || it->second == 0)
        throw TraceError("UPDATE_ARRIVED at " + std::to_string(e.slot) + " has no matching send");
      --it->second;
      if (transit_at.contains(e.slot)) {
        // Two arrivals in one slot: the fresher update wins.
        transit_at[e.slot] = std::min<int>(transit_at[e.slot], static_cast<int>(transit));
      } else {
        transit_at[e.slot] = static_cast<int>(transit);
      }
    }
  }
  std::vector<int> series;
  series.reserve(static_cast<std::size_t>(horizon));
  int aoi = 0;
  for (int t = 1; t <= horizon; ++t) {
    const auto it = transit_at.find(t);
    aoi = it != transit_at.end() ? it->second : aoi + 1;
    series.push_back(aoi);
  }
  return series;
}

int tpaoi_of_request(std::int64_t u_send, std::int64_t u_arrive, std::int64_t q_access,
                     std::int64_t q_arrive) {
  if (!(u_send <= u_arrive && u_arrive <= q_access && q_access <= q_arrive))
    throw ArgumentError("request tuple must satisfy u <= u' <= q <= q'");
  const auto forwarding = u_arrive - u_send;
  const auto waiting = q_access - u_arrive;
  const auto requesting = q_arrive - q_access;
  return static_cast<int>(forwarding + waiting + requesting);
}

double mean_tpaoi(const RunRecord& record) {
  if (record.tpaoi_samples.empty()) throw EmptyDataError("no TPAoI samples");
  const double sum = std::accumulate(record.tpaoi_samples.begin(), record.tpaoi_samples.end(), 0.0);
  return sum / static_cast<double>(record.tpaoi_samples.size());
}

double long_run_average_tpaoi(std::span<const RunRecord> records) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : records) {
    sum = std::accumulate(r.tpaoi_samples.begin(), r.tpaoi_samples.end(), sum);
    count += r.tpaoi_samples.size();
  }
  if (count == 0) throw EmptyDataError("no TPAoI samples");
  return sum / static_cast<double>(count);
}

std::vector<HistogramCell> interval_aoi_histogram(std::span<const IntervalAoiPair> pairs,
                                                  HistogramScaling scaling) {
  std::map<std::pair<int, int>, std::int64_t> counts;
  for (const auto& p : pairs) ++counts[{p.interval, p.aoi}];

  std::map<int, std::int64_t> column_max;
  std::int64_t global_max = 0;
  for (const auto& [key, c] : counts) {
    column_max[key.first] = std::max(column_max[key.first], c);
    global_max = std::max(global_max, c);
  }

  std::vector<HistogramCell> cells;
  cells.reserve(counts.size());
  for (const auto& [key, c] : counts) {
    const auto denom = scaling == HistogramScaling::GlobalMax ? global_max : column_max[key.first];
    cells.push_back({key.first, key.second, c, static_cast<double>(c) / static_cast<double>(denom)});
  }
  return cells;
}

int modal_aoi_at_interval(std::span<const HistogramCell> cells, int interval) {
  int best = -1;
  std::int64_t best_count = 0;
  for (const auto& c : cells) {
    if (c.interval == interval && c.count > best_count) {
      best = c.aoi;
      best_count = c.count;
    }
  }
  return best;
}

std::vector<double> moving_average(std::span<const double> series, int window) {
  if (window < 1) throw ArgumentError("moving average window must be >= 1");
  std::vector<double> out(series.size());
  const auto w = static_cast<std::size_t>(window);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto n = std::min(i + 1, w);
    double s = 0.0;
    for (std::size_t j = i + 1 - n; j <= i; ++j) s += series[j];
    out[i] = s / static_cast<double>(n);
  }
  return out;
}

namespace {
std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}
}  // namespace

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ArgumentError("spearman needs two equal series of length >= 2");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

void write_histogram_csv(std::ostream& out, std::span<const HistogramCell> cells) {
  out << "interval,aoi,scaled_freq\n";
  for (const auto& c : cells) out << c.interval << ',' << c.aoi << ',' << c.scaled << '\n';
}

void write_series_csv(std::ostream& out, std::span<const double> raw, std::span<const double> smoothed) {
  out << "episode,reward,moving_average\n";
  for (std::size_t i = 0; i < raw.size(); ++i) out << i + 1 << ',' << raw[i] << ',' << smoothed[i] << '\n';
}

}  // namespace tpaoi
