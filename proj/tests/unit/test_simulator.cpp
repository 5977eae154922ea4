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
#include "cxlsim/error.hpp"
#include "cxlsim/simulator.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace cxlsim;

namespace {

RunConfig chase_config(Pool pool, std::uint64_t elems = 64)
{
    auto cfg = default_run_config();
    cfg.interleave = pool == Pool::Cxl ? InterleavePolicy(1, 1) : InterleavePolicy(1, 0);
    cfg.workload = ChaseWorkloadConfig{elems, 4096, pool, true};
    return cfg;
}

Tick cache_path(const RunConfig& c) { return c.caches.l1.hit_latency + c.caches.l2.hit_latency; }

RunConfig stream_config(double footprint, InterleavePolicy policy, unsigned cores = 1)
{
    auto cfg = default_run_config();
    cfg.cpu.cores = cores;
    cfg.interleave = policy;
    cfg.workload = StreamWorkloadConfig{StreamKernel::Triad, std::nullopt, footprint, 2, 3, 0};
    return cfg;
}

} // namespace

TEST(Simulator, CxlChaseLatencyIsExact)
{
    const auto cfg = chase_config(Pool::Cxl);
    Simulator sim(cfg);
    sim.run();
    ASSERT_EQ(sim.retired(), 64u);
    for (Tick t : sim.retired_latencies())
        EXPECT_EQ(t, cache_path(cfg) + cxl_read_path(cfg.latency));
    EXPECT_EQ(sim.pool(Pool::Cxl).reads, 64u);
    EXPECT_EQ(sim.pool(Pool::Dram).reads, 0u);
    EXPECT_EQ(sim.workload().totals().check_passed, true);
}

TEST(Simulator, DramChaseLatencyIsExact)
{
    const auto cfg = chase_config(Pool::Dram);
    Simulator sim(cfg);
    sim.run();
    for (Tick t : sim.retired_latencies())
        EXPECT_EQ(t, cache_path(cfg) + dram_read_path(cfg.dram));
}

TEST(Simulator, ChaseDeltaMatchesPathDifferenceOverRandomLatencies)
{
    std::mt19937_64 rng(8);
    for (int i = 0; i < 5; ++i) {
        auto lat = LatencyConfig{};
        lat.iobus = 1000 * (1 + rng() % 30);
        lat.link = 1000 * (1 + rng() % 40);
        lat.media_read = 1000 * (10 + rng() % 80);
        lat.service[0] = 250 * (rng() % 9);
        auto c = chase_config(Pool::Cxl, 16);
        auto d = chase_config(Pool::Dram, 16);
        c.latency = d.latency = lat;
        Simulator sc(c), sd(d);
        sc.run();
        sd.run();
        EXPECT_EQ(sc.retired_latencies().front() - sd.retired_latencies().front(),
                  cxl_read_path(lat) - dram_read_path(d.dram));
    }
}

TEST(Simulator, StreamChecksAndCountsBalance)
{
    Simulator sim(stream_config(2.0, InterleavePolicy(1, 1), 2));
    sim.run();
    const auto& t = sim.workload().totals();
    EXPECT_EQ(t.check_passed, true) << t.check_detail;
    EXPECT_EQ(t.bytes_moved, t.expected_bytes);
    EXPECT_EQ(sim.in_flight(), 0u);
    for (auto p : {Pool::Dram, Pool::Cxl})
        EXPECT_EQ(sim.pool(p).bytes, 64 * (sim.pool(p).reads + sim.pool(p).writes));
    EXPECT_GT(sim.pool(Pool::Cxl).reads, 0u);
    EXPECT_TRUE(sim.caches().check_invariants().empty());
    ASSERT_EQ(sim.passes().size(), 2u);
}

TEST(Simulator, ColdStreamMissRateAfterWarmup)
{
    Simulator big(stream_config(2.0, InterleavePolicy(1, 0)));
    big.run();
    const auto& p = big.passes();
    ASSERT_EQ(p.size(), 2u);
    const double miss = double(p[1].l2_misses - p[0].l2_misses) / double(p[1].core_accesses - p[0].core_accesses);
    EXPECT_NEAR(miss, 0.125, 0.0125);

    Simulator small(stream_config(0.25, InterleavePolicy(1, 0)));
    small.run();
    const auto& q = small.passes();
    EXPECT_LE(double(q[1].l2_misses - q[0].l2_misses) / double(q[1].core_accesses - q[0].core_accesses), 0.01);
}

TEST(Simulator, TraceRunsAndDispatchLogIsDeterministic)
{
    auto cfg = load_run_config(std::string(CXLSIM_SOURCE_DIR) + "/configs/trace.json");
    ASSERT_TRUE(cfg.config);
    std::ostringstream a, b;
    {
        Simulator s(*cfg.config, nullptr, {&a});
        s.run();
        EXPECT_EQ(s.retired(), 2000u);
    }
    {
        Simulator s(*cfg.config, nullptr, {&b});
        s.run();
    }
    EXPECT_FALSE(a.str().empty());
    EXPECT_EQ(a.str(), b.str());
}

TEST(Simulator, MaxTicksIsEnforced)
{
    auto cfg = stream_config(2.0, InterleavePolicy(1, 1));
    cfg.max_ticks = 1'000'000; // 1 us
    Simulator sim(cfg);
    try {
        sim.run();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::SimulationError);
    }
}

TEST(Simulator, BackdoorWriteIsCoherentlyVisible)
{
    auto cfg = chase_config(Pool::Cxl, 4);
    Simulator sim(cfg);
    sim.backdoor_write(0x1'0000'0040, 0x1234);
    sim.backdoor_write(0x80, 0x99);
    EXPECT_EQ(sim.coherent_read(0x1'0000'0040), 0x1234u);
    EXPECT_EQ(sim.coherent_read(0x80), 0x99u);
    EXPECT_EQ(sim.coherent_line(0x1'0000'0040)[0], 0x34);
}
