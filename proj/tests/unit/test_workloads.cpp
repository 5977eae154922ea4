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

#include "cxlsim/error.hpp"
#include "cxlsim/workloads.hpp"

#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>

using namespace cxlsim;

namespace {

// Functional host: memory is a word map and every request completes at once.
class FakeHost final : public WorkloadHost {
public:
    explicit FakeHost(unsigned cores = 1)
        : map_({{"dram0", 0, 1 * GiB, RegionKind::SystemDram, 0},
                {"cxl0", 0x1'0000'0000, 1 * GiB, RegionKind::CxlWindow, 1}},
               {{0, 0x1'0000'0000, 1 * GiB, 0, true}}, NumaMode::Znuma),
          cores_(cores)
    {
    }

    AddressMap& address_map() override { return map_; }
    unsigned cores() const override { return cores_; }
    std::uint64_t l2_bytes() const override { return 64 * KiB; }
    void backdoor_write(std::uint64_t a, std::uint64_t v) override { mem[a] = v; }
    std::uint64_t coherent_read(std::uint64_t a) const override
    {
        auto it = mem.find(a);
        return it == mem.end() ? 0 : it->second;
    }

    std::vector<MemRequest> run(Workload& w)
    {
        std::vector<MemRequest> log;
        std::uint64_t id = 0;
        for (bool progress = true; progress;) {
            progress = false;
            for (unsigned c = 0; c < cores_; ++c) {
                auto p = w.peek(c);
                if (p.kind != WorkloadPoll::Kind::Ready)
                    continue;
                MemRequest r{++id, c, p.op, p.addr, p.size, p.not_before, p.value};
                w.issued(c, r.id);
                if (r.op == MemOp::Store)
                    mem[r.addr] = r.value;
                else
                    r.value = coherent_read(r.addr);
                w.completed(r, p.not_before);
                log.push_back(r);
                progress = true;
            }
        }
        for (unsigned c = 0; c < cores_; ++c)
            EXPECT_EQ(w.peek(c).kind, WorkloadPoll::Kind::Done);
        return log;
    }

    std::map<std::uint64_t, std::uint64_t> mem;

private:
    AddressMap map_;
    unsigned cores_;
};

} // namespace

TEST(Stream, TriadEightElementsCounts)
{
    FakeHost host;
    StreamWorkload w({.kernel = StreamKernel::Triad, .array_elems = 8, .iterations = 1}, InterleavePolicy(1, 0));
    w.bind(host);
    host.run(w);
    EXPECT_EQ(w.totals().loads, 16u);
    EXPECT_EQ(w.totals().stores, 8u);
    EXPECT_EQ(w.totals().bytes_moved, 192u);
    EXPECT_EQ(w.totals().passes, 1u);
    w.verify(host);
    EXPECT_EQ(w.totals().check_passed, true);
}

TEST(Stream, KernelsComputeExpectedValues)
{
    for (auto k : {StreamKernel::Copy, StreamKernel::Scale, StreamKernel::Add, StreamKernel::Triad}) {
        for (unsigned cores : {1u, 3u}) {
            FakeHost host(cores);
            StreamWorkload w({.kernel = k, .array_elems = 1000, .iterations = 3, .cores = cores},
                             InterleavePolicy(1, 1));
            w.bind(host);
            host.run(w);
            w.verify(host);
            EXPECT_EQ(w.totals().check_passed, true) << to_string(k) << " " << w.totals().check_detail;
            EXPECT_EQ(w.totals().passes, 3u);
            EXPECT_EQ(w.totals().bytes_moved, w.totals().expected_bytes);
            EXPECT_EQ(w.totals().loads, 3u * 1000 * (stream_arrays(k) - 1));
        }
    }
}

TEST(Stream, CorruptImageFailsVerification)
{
    FakeHost host;
    StreamWorkload w({.kernel = StreamKernel::Copy, .array_elems = 64, .iterations = 1}, InterleavePolicy(1, 0));
    w.bind(host);
    host.run(w);
    host.mem[w.paddr(0, 5)] ^= 1; // array 0 is the destination
    w.verify(host);
    EXPECT_EQ(w.totals().check_passed, false);
}

TEST(Stream, ArraysFollowInterleave)
{
    FakeHost host;
    StreamWorkload w({.kernel = StreamKernel::Copy, .array_elems = 4096, .iterations = 1}, InterleavePolicy(3, 1));
    w.bind(host);
    std::uint64_t cxl_pages = 0, pages = 0;
    for (unsigned a = 0; a < 2; ++a)
        for (std::uint64_t e = 0; e < 4096; e += kPageBytes / 8) {
            ++pages;
            cxl_pages += host.address_map().classify(w.paddr(a, e)) == RegionKind::CxlWindow;
        }
    EXPECT_EQ(pages, 16u);
    EXPECT_EQ(cxl_pages, 4u);
}

TEST(Stream, ElementSizing)
{
    const auto n = stream_elems_for(StreamKernel::Triad, 2.0, 1 * MiB);
    EXPECT_EQ(n * 8 % kPageBytes, 0u);
    EXPECT_LE(3 * n * 8, 2 * MiB);
    EXPECT_GT(3 * (n + kPageBytes / 8) * 8, 2 * MiB);
    EXPECT_EQ(stream_elems_for(StreamKernel::Copy, 1e-9, 1 * MiB), kPageBytes / 8);
    EXPECT_THROW(stream_elems_for(StreamKernel::Copy, 0, 1 * MiB), Error);
    EXPECT_EQ(parse_stream_kernel("triad"), StreamKernel::Triad);
    EXPECT_THROW(parse_stream_kernel("fma"), Error);
}

TEST(Chase, FollowsChainOneAtATime)
{
    FakeHost host;
    PointerChaseWorkload w(64, 256, Pool::Cxl, true, 7);
    w.bind(host);
    const auto log = host.run(w);
    ASSERT_EQ(log.size(), 64u);
    std::set<std::uint64_t> seen;
    for (std::size_t i = 0; i < log.size(); ++i) {
        EXPECT_EQ(log[i].op, MemOp::Load);
        EXPECT_EQ(host.address_map().classify(log[i].addr), RegionKind::CxlWindow);
        EXPECT_TRUE(seen.insert(log[i].addr).second);
        if (i + 1 < log.size())
            EXPECT_EQ(log[i].value, log[i + 1].addr);
    }
    EXPECT_EQ(w.window_limit(), 1u);
    w.verify(host);
    EXPECT_EQ(w.totals().check_passed, true);
}

TEST(Chase, Errors)
{
    try {
        PointerChaseWorkload w(1, 64, Pool::Dram);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InsufficientChain);
    }
    EXPECT_THROW(PointerChaseWorkload(4, 12, Pool::Dram), Error);
}

TEST(Trace, ParsesHeaderCommentsAndOps)
{
    std::istringstream in("tick,core,op,addr,size\n# comment\n\n0,0,load,0x40,8\n1000,1,store,128,4\n");
    const auto recs = parse_trace(in);
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_EQ(recs[0], (TraceRecord{0, 0, MemOp::Load, 0x40, 8}));
    EXPECT_EQ(recs[1], (TraceRecord{1000, 1, MemOp::Store, 128, 4}));
}

TEST(Trace, ParseErrorsNameTheLine)
{
    const char* bad[] = {"0,0,load,0x40\n", "0,0,fetch,0,8\n", "0,0,load,zz,8\n", "0,0,load,60,8\n",
                         "0,0,load,0,0\n", "5,0,load,0,8\n1,0,load,0,8\n"};
    for (const char* text : bad) {
        std::istringstream in(text);
        try {
            parse_trace(in);
            ADD_FAILURE() << text;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::ParseError);
            EXPECT_NE(std::string(e.what()).find("line"), std::string::npos);
        }
    }
    EXPECT_THROW(load_trace("/nonexistent/trace.csv"), Error);
}

TEST(Trace, EmptyTraceIsImmediatelyDone)
{
    FakeHost host;
    TraceWorkload w({}, InterleavePolicy(1, 1));
    w.bind(host);
    EXPECT_EQ(w.peek(0).kind, WorkloadPoll::Kind::Done);
    EXPECT_EQ(w.totals().loads, 0u);
}

TEST(Trace, ReplaysInOrderPerCore)
{
    FakeHost host(2);
    std::istringstream in("0,0,store,0,8\n0,1,load,4096,8\n10,0,load,0,8\n");
    TraceWorkload w(parse_trace(in), InterleavePolicy(1, 1));
    w.bind(host);
    const auto log = host.run(w);
    ASSERT_EQ(log.size(), 3u);
    EXPECT_EQ(host.address_map().classify(log[1].addr), RegionKind::CxlWindow);
    EXPECT_EQ(log[2].value, 1u); // the first record's store value
    EXPECT_EQ(w.totals().passes, 1u);
    EXPECT_EQ(w.totals().bytes_moved, 24u);
}

TEST(Trace, CoreOutOfRangeIsRejected)
{
    FakeHost host(1);
    TraceWorkload w({{0, 3, MemOp::Load, 0, 8}}, InterleavePolicy(1, 0));
    EXPECT_THROW(w.bind(host), Error);
}
