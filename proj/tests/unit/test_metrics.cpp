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

#include "cxlsim/config.hpp"
#include "cxlsim/metrics.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

using namespace cxlsim;

namespace {

RunConfig small_stream(InterleavePolicy p)
{
    auto cfg = default_run_config();
    cfg.interleave = p;
    cfg.workload = StreamWorkloadConfig{StreamKernel::Copy, std::nullopt, 0.5, 2, 3, 0};
    return cfg;
}

} // namespace

TEST(Metrics, NearestRank)
{
    EXPECT_EQ(nearest_rank({}, 50), 0u);
    EXPECT_EQ(nearest_rank({5, 1, 4, 2, 3}, 50), 3u);
    EXPECT_EQ(nearest_rank({5, 1, 4, 2, 3}, 100), 5u);
    EXPECT_EQ(nearest_rank({5, 1, 4, 2, 3}, 1), 1u);
    std::vector<Tick> hundred(100);
    std::iota(hundred.begin(), hundred.end(), 1);
    EXPECT_EQ(nearest_rank(hundred, 99), 99u);
}

TEST(Metrics, SummaryAndHistogram)
{
    const std::vector<Tick> lat{500, 1500, 60'000, 20'000'000};
    const auto s = summarize(lat);
    EXPECT_EQ(s.count, 4u);
    EXPECT_DOUBLE_EQ(s.max_ns, 20000.0);
    EXPECT_DOUBLE_EQ(s.mean_ns, (0.5 + 1.5 + 60 + 20000) / 4);
    const auto h = latency_histogram(lat);
    ASSERT_EQ(h.size(), kLatencyEdgesNs.size() + 1);
    EXPECT_EQ(h[0], 1u);  // <= 1 ns
    EXPECT_EQ(h[1], 1u);  // <= 2 ns
    EXPECT_EQ(h[6], 1u);  // <= 100 ns
    EXPECT_EQ(h[13], 1u); // open-ended
    EXPECT_EQ(summarize({}), LatencySummary{});
}

TEST(Metrics, ZeroSnapshotIsConsistent)
{
    Simulator sim(small_stream(InterleavePolicy(1, 1)));
    const auto s = snapshot(sim);
    EXPECT_EQ(s.retired, 0u);
    EXPECT_EQ(s.l2_miss_rate(), 0.0);
    EXPECT_EQ(s.bandwidth_gbps(), 0.0);
    EXPECT_TRUE(s.violations().empty());
    EXPECT_NO_THROW(emit_json(s));
}

TEST(Metrics, RunSnapshotInvariantsAndJson)
{
    Simulator sim(small_stream(InterleavePolicy(1, 1)));
    sim.run();
    const auto s = snapshot(sim);
    EXPECT_TRUE(s.violations().empty());
    EXPECT_EQ(s.retired, sim.retired());
    const auto j = nlohmann::json::parse(emit_json(s));
    EXPECT_EQ(j["schema_version"], kStatsSchemaVersion);
    for (const char* k : {"caches", "pools", "channels", "requests", "workload_totals", "passes", "derived"})
        EXPECT_TRUE(j.contains(k)) << k;
    EXPECT_EQ(j["pools"]["cxl"]["bytes"], s.cxl.bytes);
    EXPECT_EQ(snapshot(sim).l2, s.l2); // snapshot does not disturb counters
}

TEST(Metrics, EmitJsonIsDeterministic)
{
    Simulator a(small_stream(InterleavePolicy(3, 1)));
    Simulator b(small_stream(InterleavePolicy(3, 1)));
    a.run();
    b.run();
    EXPECT_EQ(emit_json(snapshot(a)), emit_json(snapshot(b)));
}

TEST(Metrics, SweepCsvRowsAndOrder)
{
    const auto base = small_stream(InterleavePolicy(1, 0));
    const auto g1 = run_sweep(base, {0.5, 1.0}, {"1:0", "1:1"}, 1);
    const auto g2 = run_sweep(base, {0.5, 1.0}, {"1:0", "1:1"}, 3);
    const auto csv = emit_csv(g1);
    EXPECT_EQ(csv, emit_csv(g2));
    std::istringstream in(csv);
    std::string header, line;
    std::getline(in, header);
    EXPECT_EQ(header.rfind("footprint_x_l2,interleave,l2_miss_rate,bandwidth_gbps,mean_lat_ns", 0), 0u);
    int rows = 0;
    while (std::getline(in, line))
        ++rows;
    EXPECT_EQ(rows, 4);
    EXPECT_EQ(g1.at(1, 1).interleave, "1:1");
    EXPECT_EQ(g1.at(0, 0).cxl_bytes, 0u);
    EXPECT_GT(g1.at(0, 1).cxl_bytes, 0u);
    EXPECT_EQ(grid_json(g1)["cells"].size(), 4u);
}

TEST(Metrics, SweepNamesFailingCell)
{
    auto base = small_stream(InterleavePolicy(1, 0));
    base.max_ticks = 1000;
    try {
        run_sweep(base, {0.5}, {"1:1"}, 1);
        FAIL();
    } catch (const std::exception& e) {
        EXPECT_NE(std::string(e.what()).find("1:1"), std::string::npos);
    }
}
