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

#include "cxlsim/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

namespace cxlsim {

using nlohmann::ordered_json;

Tick nearest_rank(std::vector<Tick> sample, double p)
{
    if (sample.empty())
        return 0;
    const auto n = sample.size();
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    std::nth_element(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(rank - 1), sample.end());
    return sample[rank - 1];
}

LatencySummary summarize(const std::vector<Tick>& latencies)
{
    LatencySummary s;
    s.count = latencies.size();
    if (latencies.empty())
        return s;
    const auto sum = std::accumulate(latencies.begin(), latencies.end(), static_cast<long double>(0));
    s.mean_ns = static_cast<double>(sum / static_cast<long double>(latencies.size())) / kTicksPerNs;
    s.median_ns = ticks_to_ns(nearest_rank(latencies, 50));
    s.p99_ns = ticks_to_ns(nearest_rank(latencies, 99));
    s.max_ns = ticks_to_ns(*std::max_element(latencies.begin(), latencies.end()));
    return s;
}

std::vector<std::uint64_t> latency_histogram(const std::vector<Tick>& latencies)
{
    std::vector<std::uint64_t> h(kLatencyEdgesNs.size() + 1, 0);
    for (const Tick t : latencies) {
        const double ns = ticks_to_ns(t);
        const auto it = std::upper_bound(kLatencyEdgesNs.begin(), kLatencyEdgesNs.end(), ns);
        ++h[static_cast<std::size_t>(it - kLatencyEdgesNs.begin())];
    }
    return h;
}

namespace {

struct Window {
    std::uint64_t core_accesses = 0;
    std::uint64_t l2_accesses = 0;
    std::uint64_t l2_misses = 0;
};

Window steady_window(const RunStats& s)
{
    Window w;
    if (s.passes.empty()) {
        for (const auto& l1 : s.l1)
            w.core_accesses += l1.accesses;
        w.l2_accesses = s.l2.accesses;
        w.l2_misses = s.l2.misses;
        return w;
    }
    const auto& last = s.passes.back();
    PassRecord prev;
    if (s.passes.size() >= 2)
        prev = s.passes[s.passes.size() - 2];
    w.core_accesses = last.core_accesses - prev.core_accesses;
    w.l2_accesses = last.l2_accesses - prev.l2_accesses;
    w.l2_misses = last.l2_misses - prev.l2_misses;
    return w;
}

double ratio(std::uint64_t a, std::uint64_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); }

PoolStats pool_stats(const PoolCounters& p)
{
    return PoolStats{p.reads, p.writes, p.bytes, summarize(p.fill_latencies)};
}

} // namespace

double RunStats::l2_miss_rate() const
{
    const auto w = steady_window(*this);
    return ratio(w.l2_misses, w.core_accesses);
}

double RunStats::l2_local_miss_rate() const
{
    const auto w = steady_window(*this);
    return ratio(w.l2_misses, w.l2_accesses);
}

double RunStats::bandwidth_gbps() const
{
    return elapsed == 0 ? 0.0 : static_cast<double>(totals.bytes_moved) / ticks_to_ns(elapsed);
}

double RunStats::pool_bandwidth_gbps(Pool p) const
{
    const auto bytes = p == Pool::Dram ? dram.bytes : cxl.bytes;
    return elapsed == 0 ? 0.0 : static_cast<double>(bytes) / ticks_to_ns(elapsed);
}

std::vector<std::string> RunStats::violations() const
{
    std::vector<std::string> out;
    auto check_cache = [&](const std::string& name, const CacheStats& c) {
        if (c.hits + c.misses != c.accesses)
            out.push_back(fmt::format("{}: hits {} + misses {} != accesses {}", name, c.hits, c.misses, c.accesses));
    };
    std::uint64_t l1_accesses = 0;
    for (std::size_t i = 0; i < l1.size(); ++i) {
        check_cache(fmt::format("l1[{}]", i), l1[i]);
        l1_accesses += l1[i].accesses;
    }
    check_cache("l2", l2);
    for (const auto& [name, p] : {std::pair{"dram", &dram}, std::pair{"cxl", &cxl}})
        if (p->bytes != kLineBytes * (p->reads + p->writes))
            out.push_back(fmt::format("{} pool: bytes {} != 64 x (reads + writes)", name, p->bytes));
    if (l1_accesses < l2.accesses)
        out.push_back(fmt::format("L1 accesses {} < L2 accesses {}", l1_accesses, l2.accesses));
    if (l2.accesses < dram.reads + cxl.reads)
        out.push_back(fmt::format("L2 accesses {} < pool fills {}", l2.accesses, dram.reads + cxl.reads));
    const auto mass = std::accumulate(histogram.begin(), histogram.end(), std::uint64_t{0});
    if (mass != retired)
        out.push_back(fmt::format("latency histogram mass {} != retired {}", mass, retired));
    return out;
}

RunStats snapshot(const Simulator& sim)
{
    RunStats s;
    s.name = sim.config().name;
    s.workload = std::string(sim.workload().kind());
    s.interleave = sim.config().interleave.to_string();
    for (unsigned c = 0; c < sim.config().cpu.cores; ++c)
        s.l1.push_back(sim.caches().l1_stats(c));
    s.l2 = sim.caches().l2_stats();
    s.dram = pool_stats(sim.pool(Pool::Dram));
    s.cxl = pool_stats(sim.pool(Pool::Cxl));
    for (std::size_t d = 0; d < sim.device_count(); ++d) {
        const auto& path = sim.path(d);
        s.protocol_violations += path.violations();
        for (const auto ch : kAllChannels) {
            const auto& st = path.channel(ch).stats();
            s.channels.push_back(ChannelSnapshot{sim.device(d).id(), ch, st.flits, st.mean_depth(), st.max_depth});
        }
    }
    s.elapsed = sim.elapsed();
    s.issued = sim.issued();
    s.retired = sim.retired();
    s.request_latency = summarize(sim.retired_latencies());
    s.histogram = latency_histogram(sim.retired_latencies());
    s.totals = sim.workload().totals();
    s.passes = sim.passes();
    return s;
}

namespace {

ordered_json cache_json(const CacheStats& c)
{
    return ordered_json{{"accesses", c.accesses},
                        {"hits", c.hits},
                        {"misses", c.misses},
                        {"miss_rate", c.miss_rate()},
                        {"evictions", c.evictions},
                        {"writebacks", c.writebacks},
                        {"interventions", c.interventions},
                        {"back_invalidations", c.back_invalidations},
                        {"pending_hits", c.pending_hits}};
}

ordered_json latency_json(const LatencySummary& l)
{
    return ordered_json{{"count", l.count},
                        {"mean_ns", l.mean_ns},
                        {"median_ns", l.median_ns},
                        {"p99_ns", l.p99_ns},
                        {"max_ns", l.max_ns}};
}

ordered_json pool_json(const PoolStats& p)
{
    return ordered_json{{"reads", p.reads}, {"writes", p.writes}, {"bytes", p.bytes}, {"latency", latency_json(p.latency)}};
}

} // namespace

ordered_json stats_json(const RunStats& s)
{
    ordered_json j;
    j["schema_version"] = kStatsSchemaVersion;
    j["name"] = s.name;
    j["workload"] = s.workload;
    j["interleave"] = s.interleave;
    ordered_json caches;
    caches["l1"] = ordered_json::array();
    for (const auto& c : s.l1)
        caches["l1"].push_back(cache_json(c));
    caches["l2"] = cache_json(s.l2);
    j["caches"] = caches;
    j["pools"] = ordered_json{{"dram", pool_json(s.dram)}, {"cxl", pool_json(s.cxl)}};
    ordered_json chans = ordered_json::array();
    for (const auto& c : s.channels)
        chans.push_back(ordered_json{{"device", c.device},
                                     {"channel", std::string(to_string(c.channel))},
                                     {"flits", c.flits},
                                     {"mean_queue_depth", c.mean_depth},
                                     {"max_queue_depth", c.max_depth}});
    j["channels"] = chans;
    j["wall"] = ordered_json{{"sim_ticks", s.elapsed}, {"sim_ns", ticks_to_ns(s.elapsed)}, {"issued", s.issued},
                             {"retired", s.retired}};
    ordered_json hist;
    hist["edges_ns"] = kLatencyEdgesNs;
    hist["counts"] = s.histogram;
    j["requests"] = ordered_json{{"latency", latency_json(s.request_latency)}, {"histogram", hist}};
    ordered_json wl{{"loads", s.totals.loads},
                    {"stores", s.totals.stores},
                    {"bytes_moved", s.totals.bytes_moved},
                    {"expected_bytes", s.totals.expected_bytes},
                    {"passes", s.totals.passes}};
    if (s.totals.check_passed)
        wl["check_passed"] = *s.totals.check_passed;
    else
        wl["check_passed"] = nullptr;
    wl["check_detail"] = s.totals.check_detail;
    j["workload_totals"] = wl;
    ordered_json passes = ordered_json::array();
    for (const auto& p : s.passes)
        passes.push_back(ordered_json{{"pass", p.pass},
                                      {"at_ticks", p.at},
                                      {"core_accesses", p.core_accesses},
                                      {"l1_misses", p.l1_misses},
                                      {"l2_accesses", p.l2_accesses},
                                      {"l2_misses", p.l2_misses},
                                      {"dram_bytes", p.pool_bytes[0]},
                                      {"cxl_bytes", p.pool_bytes[1]},
                                      {"workload_bytes", p.workload_bytes}});
    j["passes"] = passes;
    j["derived"] = ordered_json{{"l2_miss_rate", s.l2_miss_rate()},
                                {"l2_local_miss_rate", s.l2_local_miss_rate()},
                                {"bandwidth_gbps", s.bandwidth_gbps()},
                                {"dram_bandwidth_gbps", s.pool_bandwidth_gbps(Pool::Dram)},
                                {"cxl_bandwidth_gbps", s.pool_bandwidth_gbps(Pool::Cxl)}};
    j["protocol_violations"] = s.protocol_violations;
    return j;
}

std::string emit_json(const RunStats& s) { return stats_json(s).dump(2) + "\n"; }

SweepCell summarize_cell(double footprint, const RunStats& s)
{
    SweepCell c;
    c.footprint_x_l2 = footprint;
    c.interleave = s.interleave;
    c.l2_miss_rate = s.l2_miss_rate();
    c.bandwidth_gbps = s.bandwidth_gbps();
    c.mean_lat_ns = s.request_latency.mean_ns;
    c.cxl_bandwidth_gbps = s.pool_bandwidth_gbps(Pool::Cxl);
    c.dram_bandwidth_gbps = s.pool_bandwidth_gbps(Pool::Dram);
    c.l2_local_miss_rate = s.l2_local_miss_rate();
    c.cxl_bytes = s.cxl.bytes;
    c.dram_bytes = s.dram.bytes;
    c.elapsed = s.elapsed;
    return c;
}

SweepGrid run_sweep(const RunConfig& base, const std::vector<double>& footprints,
                    const std::vector<std::string>& ratios, unsigned jobs)
{
    if (!std::holds_alternative<StreamWorkloadConfig>(base.workload))
        throw Error(Errc::ConfigError, "sweeps need a stream workload in the base config");
    if (footprints.empty() || ratios.empty())
        throw Error(Errc::InvalidArgument, "sweep needs at least one footprint and one ratio");
    SweepGrid grid;
    grid.footprints = footprints;
    std::vector<RunConfig> cfgs;
    for (const auto& r : ratios)
        grid.ratios.push_back(InterleavePolicy::parse(r, base.topology.page_size).to_string());
    for (const double f : footprints) {
        if (!(f > 0))
            throw Error(Errc::InvalidArgument, fmt::format("footprint {} must be > 0", f));
        for (const auto& r : ratios) {
            RunConfig c = base;
            auto& w = std::get<StreamWorkloadConfig>(c.workload);
            w.footprint_x_l2 = f;
            w.array_elems.reset();
            c.interleave = InterleavePolicy::parse(r, base.topology.page_size);
            c.name = fmt::format("{}-{}x-{}", base.name, f, c.interleave.to_string());
            cfgs.push_back(std::move(c));
        }
    }
    grid.cells.resize(cfgs.size());
    std::vector<std::string> errors(cfgs.size());

    auto run_cell = [&](std::size_t i) {
        try {
            Simulator sim(cfgs[i]);
            sim.run();
            grid.cells[i] = summarize_cell(std::get<StreamWorkloadConfig>(cfgs[i].workload).footprint_x_l2,
                                           snapshot(sim));
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(cfgs.size())));
    if (n == 1) {
        for (std::size_t i = 0; i < cfgs.size(); ++i) {
            run_cell(i);
            if (!errors[i].empty())
                break;
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < cfgs.size(); i = next++)
                    run_cell(i);
            });
        for (auto& th : pool)
            th.join();
    }
    for (std::size_t i = 0; i < cfgs.size(); ++i)
        if (!errors[i].empty())
            throw Error(Errc::SimulationError, fmt::format("sweep cell {} failed: {}", cfgs[i].name, errors[i]));
    return grid;
}

std::string emit_csv(const SweepGrid& grid)
{
    std::string out = "footprint_x_l2,interleave,l2_miss_rate,bandwidth_gbps,mean_lat_ns,cxl_bandwidth_gbps,"
                      "dram_bandwidth_gbps,l2_local_miss_rate\n";
    for (const auto& c : grid.cells)
        out += fmt::format("{},{},{:.6f},{:.6f},{:.3f},{:.6f},{:.6f},{:.6f}\n", c.footprint_x_l2, c.interleave,
                           c.l2_miss_rate, c.bandwidth_gbps, c.mean_lat_ns, c.cxl_bandwidth_gbps,
                           c.dram_bandwidth_gbps, c.l2_local_miss_rate);
    return out;
}

ordered_json grid_json(const SweepGrid& grid)
{
    ordered_json j;
    j["schema_version"] = kStatsSchemaVersion;
    j["footprints"] = grid.footprints;
    j["ratios"] = grid.ratios;
    j["cells"] = ordered_json::array();
    for (const auto& c : grid.cells)
        j["cells"].push_back(ordered_json{{"footprint_x_l2", c.footprint_x_l2},
                                          {"interleave", c.interleave},
                                          {"l2_miss_rate", c.l2_miss_rate},
                                          {"bandwidth_gbps", c.bandwidth_gbps},
                                          {"mean_lat_ns", c.mean_lat_ns},
                                          {"cxl_bandwidth_gbps", c.cxl_bandwidth_gbps},
                                          {"dram_bandwidth_gbps", c.dram_bandwidth_gbps},
                                          {"l2_local_miss_rate", c.l2_local_miss_rate},
                                          {"cxl_bytes", c.cxl_bytes},
                                          {"dram_bytes", c.dram_bytes},
                                          {"sim_ticks", c.elapsed}});
    return j;
}

void write_file(const std::string& path, const std::string& bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(Errc::IoError, fmt::format("cannot write {}", path));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw Error(Errc::IoError, fmt::format("short write to {}", path));
}

} // namespace cxlsim
