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

#include "cxlsim/cache.hpp"
#include "cxlsim/error.hpp"

#include <gtest/gtest.h>

#include <random>

#include "cache_oracle.hpp"

using namespace cxlsim;
using cxlsim::test::FlatMemory;
using cxlsim::test::LruOracle;

namespace {

MemRequest load(std::uint64_t addr, unsigned core = 0)
{
    static std::uint64_t id = 0;
    MemRequest r;
    r.id = ++id;
    r.core = core;
    r.addr = addr;
    return r;
}

MemRequest store(std::uint64_t addr, std::uint64_t value, unsigned core = 0)
{
    auto r = load(addr, core);
    r.op = MemOp::Store;
    r.value = value;
    return r;
}

HierarchyConfig tiny(unsigned cores = 1)
{
    HierarchyConfig c;
    c.l1 = {1 * KiB, kLineBytes, 2, 1000};
    c.l2 = {8 * KiB, kLineBytes, 4, 5000};
    c.cores = cores;
    return c;
}

struct Rig {
    explicit Rig(HierarchyConfig cfg) : h(cfg, mem) {}

    // Runs one access to completion and returns its result.
    Completion run(const MemRequest& r, Tick now = 0)
    {
        auto res = h.access(r, now);
        auto done = mem.drain(h);
        if (res.completion)
            return *res.completion;
        for (auto& d : done)
            if (d.req.id == r.id)
                return d;
        ADD_FAILURE() << "request " << r.id << " never completed";
        return {};
    }

    FlatMemory mem;
    CacheHierarchy h;
};

} // namespace

TEST(Cache, SequentialLineOneMissSevenHits)
{
    Rig rig(HierarchyConfig{});
    int misses = 0;
    for (std::uint64_t i = 0; i < 8; ++i)
        misses += rig.run(load(0x1000 + 8 * i)).outcome == CacheOutcome::LLCMiss;
    EXPECT_EQ(misses, 1);
    EXPECT_EQ(rig.h.l1_stats(0).hits, 7u);
    EXPECT_EQ(rig.h.l2_stats().misses, 1u);
}

TEST(Cache, HitLatencies)
{
    Rig rig(HierarchyConfig{});
    auto r = rig.h.access(load(0x40), 100);
    EXPECT_FALSE(r.completion);
    ASSERT_EQ(rig.mem.fills.size(), 1u);
    EXPECT_EQ(rig.mem.fills[0].second, 100u + 1000 + 5000);
    rig.mem.drain(rig.h);
    EXPECT_EQ(rig.run(load(0x48), 200).done_at, 1200u);
}

TEST(Cache, StoreThenLoadReturnsValue)
{
    Rig rig(tiny());
    rig.run(store(0x2008, 0xDEADBEEFCAFEF00Dull));
    EXPECT_EQ(rig.run(load(0x2008)).req.value, 0xDEADBEEFCAFEF00Dull);
    auto narrow = load(0x2008);
    narrow.size = 2;
    EXPECT_EQ(rig.run(narrow).req.value, 0xF00Du);
}

TEST(Cache, AccessesQueueBehindPendingFill)
{
    Rig rig(tiny());
    rig.h.access(store(0x3000, 7), 0);
    auto second = rig.h.access(load(0x3000), 10);
    EXPECT_FALSE(second.completion);
    EXPECT_EQ(rig.h.pending_fills(), 1u);
    auto done = rig.mem.drain(rig.h);
    ASSERT_EQ(done.size(), 2u);
    EXPECT_EQ(done[1].req.value, 7u);
}

TEST(Cache, RejectsLineCrossingAndBadCore)
{
    Rig rig(tiny());
    auto r = load(0x3C);
    r.size = 8;
    EXPECT_THROW(rig.h.access(r, 0), Error);
    EXPECT_THROW(rig.h.access(load(0, 3), 0), Error);
}

TEST(Cache, GeometryViolations)
{
    EXPECT_FALSE((CacheGeometry{1000, 64, 2, 1000}.violations("l1").empty()));
    EXPECT_FALSE((CacheGeometry{1024, 48, 2, 1000}.violations("l1").empty()));
    EXPECT_TRUE((CacheGeometry{1024, 64, 16, 1000}.violations("l1").empty()));
    HierarchyConfig bad = tiny();
    bad.l1.size_bytes = 1000;
    FlatMemory mem;
    EXPECT_THROW(CacheHierarchy(bad, mem), Error);
}

TEST(Cache, MatchesLruOracleOnRandomStream)
{
    const auto cfg = tiny();
    Rig rig(cfg);
    LruOracle oracle(cfg);
    std::mt19937_64 rng(11);
    for (int i = 0; i < 20000; ++i) {
        const std::uint64_t addr = (rng() % 512) * kLineBytes + (rng() % 8) * 8;
        const auto want = oracle.access(addr);
        const auto got = rig.run(rng() % 4 == 0 ? store(addr, i) : load(addr)).outcome;
        ASSERT_EQ(got, want) << "access " << i << " addr " << addr;
    }
    EXPECT_TRUE(rig.h.check_invariants().empty());
}

TEST(Cache, ReadSharingThenWriteInvalidates)
{
    Rig rig(tiny(2));
    rig.run(load(0x100, 0));
    EXPECT_EQ(rig.h.l1_state(0, 0x100), Mesi::E);
    auto r = rig.run(load(0x100, 1));
    EXPECT_EQ(r.outcome, CacheOutcome::L2HitIntervention);
    EXPECT_EQ(rig.h.l1_state(0, 0x100), Mesi::S);
    EXPECT_EQ(rig.h.l1_state(1, 0x100), Mesi::S);
    auto w = rig.run(store(0x100, 5, 1), 1000);
    EXPECT_EQ(w.outcome, CacheOutcome::L2HitIntervention);
    EXPECT_EQ(w.done_at, 1000u + 1000 + 5000 + 3000);
    EXPECT_EQ(rig.h.l1_state(0, 0x100), Mesi::I);
    EXPECT_EQ(rig.h.l1_state(1, 0x100), Mesi::M);
    const auto d = rig.h.directory(0x100);
    EXPECT_TRUE(d.dirty);
    EXPECT_EQ(d.sharers, 2u);
    EXPECT_EQ(rig.run(load(0x100, 0)).req.value, 5u);
    EXPECT_EQ(rig.h.l1_state(1, 0x100), Mesi::S);
    EXPECT_TRUE(rig.h.check_invariants().empty());
}

TEST(Cache, L2EvictionBackInvalidatesAndWritesBack)
{
    Rig rig(tiny(2));
    // 32 sets, 4 ways: five lines with the same set index.
    const std::uint64_t stride = 32 * kLineBytes;
    rig.run(store(0, 99, 1));
    for (std::uint64_t k = 1; k <= 4; ++k)
        rig.run(load(k * stride, 0));
    EXPECT_EQ(rig.h.l1_state(1, 0), Mesi::I);
    EXPECT_FALSE(rig.h.directory(0).present);
    EXPECT_GE(rig.h.l2_stats().back_invalidations, 1u);
    EXPECT_EQ(rig.mem.writebacks, 1u);
    EXPECT_EQ(rig.mem.line(0)[0], 99);
    EXPECT_EQ(rig.run(load(0, 0)).req.value, 99u);
}

TEST(Cache, WritebacksConserveStores)
{
    Rig rig(tiny(2));
    std::mt19937_64 rng(5);
    std::map<std::uint64_t, std::uint64_t> truth;
    for (int i = 0; i < 20000; ++i) {
        const std::uint64_t addr = (rng() % 1024) * 8;
        const unsigned core = rng() % 2;
        if (rng() % 2) {
            rig.run(store(addr, i, core));
            truth[addr] = i;
        } else {
            const auto want = truth.count(addr) ? truth[addr] : 0;
            ASSERT_EQ(rig.run(load(addr, core)).req.value, want);
        }
    }
    ASSERT_TRUE(rig.h.check_invariants().empty());
    // Every store is visible either in L2 or in memory.
    for (auto [addr, v] : truth) {
        auto l = rig.h.peek_line(line_of(addr));
        const LineData bytes = l ? *l : rig.mem.line(line_of(addr));
        std::uint64_t got = 0;
        for (int b = 0; b < 8; ++b)
            got |= std::uint64_t{bytes[addr % kLineBytes + b]} << (8 * b);
        EXPECT_EQ(got, v);
    }
    const auto& s = rig.h.l2_stats();
    EXPECT_EQ(s.hits + s.misses, s.accesses);
    EXPECT_EQ(s.writebacks, rig.mem.writebacks);
}

TEST(Cache, ParkedWhenAllWaysPending)
{
    Rig rig(tiny());
    const std::uint64_t stride = 32 * kLineBytes;
    for (std::uint64_t k = 0; k < 4; ++k)
        rig.h.access(load(k * stride), 0);
    auto r = rig.h.access(load(4 * stride), 0);
    EXPECT_TRUE(r.blocked);
    EXPECT_EQ(rig.h.parked(), 1u);
    auto done = rig.mem.drain(rig.h);
    EXPECT_EQ(done.size(), 5u);
    EXPECT_EQ(rig.h.parked(), 0u);
}

TEST(Cache, ResetStats)
{
    Rig rig(tiny());
    rig.run(load(0));
    rig.h.reset_stats();
    EXPECT_EQ(rig.h.l2_stats(), CacheStats{});
    EXPECT_EQ(CacheStats{}.miss_rate(), 0.0);
}
