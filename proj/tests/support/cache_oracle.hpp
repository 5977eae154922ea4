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

// Reference models shared by the unit and acceptance tests.

#include <cstdint>
#include <list>
#include <map>
#include <vector>

#include "cxlsim/cache.hpp"

namespace cxlsim::test {

/// Backing store that fills synchronously; the test calls drain() after each
/// access to deliver outstanding fills.
class FlatMemory final : public MemoryPort {
public:
    void fill_request(const MemRequest& r, Tick at) override { fills.push_back({r.addr, at}); }
    void writeback(const MemRequest& r, const LineData& d, Tick) override
    {
        lines[r.addr] = d;
        ++writebacks;
    }

    std::vector<Completion> drain(CacheHierarchy& h)
    {
        std::vector<Completion> out;
        while (!fills.empty()) {
            auto [addr, at] = fills.front();
            fills.erase(fills.begin());
            auto done = h.fill(addr, line(addr), at);
            out.insert(out.end(), done.begin(), done.end());
        }
        return out;
    }

    LineData line(std::uint64_t addr) const
    {
        auto it = lines.find(addr);
        return it == lines.end() ? LineData{} : it->second;
    }

    std::map<std::uint64_t, LineData> lines;
    std::vector<std::pair<std::uint64_t, Tick>> fills;
    std::uint64_t writebacks = 0;
};

/// Single-core inclusive two-level true-LRU model. L2 recency moves only on
/// L1 misses; an L2 eviction removes the line from L1.
class LruOracle {
public:
    LruOracle(const HierarchyConfig& cfg)
        : l1_sets_(cfg.l1.sets()), l1_ways_(cfg.l1.assoc), l2_sets_(cfg.l2.sets()), l2_ways_(cfg.l2.assoc),
          l1_(l1_sets_), l2_(l2_sets_)
    {
    }

    CacheOutcome access(std::uint64_t addr)
    {
        const std::uint64_t line = addr / kLineBytes;
        auto& s1 = l1_[line % l1_sets_];
        if (touch(s1, line))
            return CacheOutcome::L1Hit;
        auto& s2 = l2_[line % l2_sets_];
        CacheOutcome out = CacheOutcome::L2Hit;
        if (!touch(s2, line)) {
            out = CacheOutcome::LLCMiss;
            if (s2.size() == l2_ways_) {
                const auto victim = s2.back();
                s2.pop_back();
                l1_[victim % l1_sets_].remove(victim);
            }
            s2.push_front(line);
        }
        if (s1.size() == l1_ways_)
            s1.pop_back();
        s1.push_front(line);
        return out;
    }

private:
    static bool touch(std::list<std::uint64_t>& s, std::uint64_t line)
    {
        for (auto it = s.begin(); it != s.end(); ++it) {
            if (*it == line) {
                s.splice(s.begin(), s, it);
                return true;
            }
        }
        return false;
    }

    std::uint64_t l1_sets_, l1_ways_, l2_sets_, l2_ways_;
    std::vector<std::list<std::uint64_t>> l1_;
    std::vector<std::list<std::uint64_t>> l2_;
};

} // namespace cxlsim::test
