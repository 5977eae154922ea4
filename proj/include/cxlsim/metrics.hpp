/*
 * Copyright 2026 The cxlsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "cxlsim/simulator.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace cxlsim {

inline constexpr int kStatsSchemaVersion = 1;

struct LatencySummary {
    std::uint64_t count = 0;
    double mean_ns = 0;
    double median_ns = 0;
    double p99_ns = 0;
    double max_ns = 0;
    friend bool operator==(const LatencySummary&, const LatencySummary&) = default;
};

/// Nearest-rank percentile (p in (0, 100]) of an unsorted sample; 0 when empty.
Tick nearest_rank(std::vector<Tick> sample, double p);
LatencySummary summarize(const std::vector<Tick>& latencies);

/// Upper bucket edges of the request latency histogram, in ns; the last
/// bucket is open-ended.
inline constexpr std::array<double, 13> kLatencyEdgesNs = {1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000};
std::vector<std::uint64_t> latency_histogram(const std::vector<Tick>& latencies);

struct PoolStats {
    std::uint64_t reads = 0;
    std::uint64_t writes = 0;
    std::uint64_t bytes = 0;
    LatencySummary latency;
    friend bool operator==(const PoolStats&, const PoolStats&) = default;
};

struct ChannelSnapshot {
    unsigned device = 0;
    ChannelKind channel = ChannelKind::M2SReq;
    std::uint64_t flits = 0;
    double mean_depth = 0;
    std::uint64_t max_depth = 0;
    friend bool operator==(const ChannelSnapshot&, const ChannelSnapshot&) = default;
};

struct RunStats {
    std::string name;
    std::string workload;
    std::string interleave;
    std::vector<CacheStats> l1;
    CacheStats l2;
    PoolStats dram;
    PoolStats cxl;
    std::vector<ChannelSnapshot> channels;
    Tick elapsed = 0;
    std::uint64_t issued = 0;
    std::uint64_t retired = 0;
    LatencySummary request_latency;
    std::vector<std::uint64_t> histogram;
    WorkloadTotals totals;
    std::vector<PassRecord> passes;
    std::uint64_t protocol_violations = 0;

    /// LLC misses per core access over the last pass (or the whole run).
    double l2_miss_rate() const;
    /// LLC misses per LLC access over the same window.
    double l2_local_miss_rate() const;
    /// Workload bytes per simulated ns (GB/s).
    double bandwidth_gbps() const;
    double pool_bandwidth_gbps(Pool p) const;

    /// Every violated aggregation invariant; empty when consistent.
    std::vector<std::string> violations() const;
};

/// Point-in-time copy of the simulator's counters; does not modify them.
RunStats snapshot(const Simulator& sim);

nlohmann::ordered_json stats_json(const RunStats& s);
/// The stats document as written to stats.json (ordered, trailing newline).
std::string emit_json(const RunStats& s);

struct SweepCell {
    double footprint_x_l2 = 0;
    std::string interleave;
    double l2_miss_rate = 0;
    double bandwidth_gbps = 0;
    double mean_lat_ns = 0;
    double cxl_bandwidth_gbps = 0;
    double dram_bandwidth_gbps = 0;
    double l2_local_miss_rate = 0;
    std::uint64_t cxl_bytes = 0;
    std::uint64_t dram_bytes = 0;
    Tick elapsed = 0;
};

SweepCell summarize_cell(double footprint, const RunStats& s);

struct SweepGrid {
    std::vector<double> footprints;
    std::vector<std::string> ratios;
    std::vector<SweepCell> cells; // row-major: footprint outer, ratio inner

    const SweepCell& at(std::size_t f, std::size_t r) const { return cells.at(f * ratios.size() + r); }
};

/// Runs the (footprint x ratio) cross product on a STREAM base config. With
/// jobs > 1 independent cells run on separate threads; results are ordered
/// the same either way. A failing cell aborts the sweep and is named.
SweepGrid run_sweep(const RunConfig& base, const std::vector<double>& footprints,
                    const std::vector<std::string>& ratios, unsigned jobs = 1);

std::string emit_csv(const SweepGrid& grid);
nlohmann::ordered_json grid_json(const SweepGrid& grid);

/// Writes `bytes` to `path`; throws IoError.
void write_file(const std::string& path, const std::string& bytes);

} // namespace cxlsim
