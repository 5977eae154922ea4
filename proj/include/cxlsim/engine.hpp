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

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <queue>
#include <string>
#include <variant>
#include <vector>

#include "cxlsim/cxl_flit.hpp"
#include "cxlsim/types.hpp"

namespace cxlsim {

using ComponentId = std::uint32_t;

struct Timer {
    std::uint64_t cookie = 0;
};

enum class MailboxStep : std::uint8_t { Pickup, Finish };

struct MailboxCommand {
    unsigned device = 0;
    MailboxStep step = MailboxStep::Pickup;
};

using Payload = std::variant<MemRequest, CxlFlit, MailboxCommand, Timer>;

struct Event {
    Tick fire_at = 0;
    std::uint64_t seq = 0;
    ComponentId target = 0;
    Payload payload;
};

struct RunResult {
    Tick clock = 0;
    bool drained = false;
    std::uint64_t dispatched = 0;
};

/// Single-threaded discrete-event kernel. Events are ordered by (fire_at, seq);
/// seq is the insertion counter, so same-tick events dispatch in FIFO order.
class Engine {
public:
    using Handler = std::function<void(const Event&)>;
    using Observer = std::function<void(const Event&)>;

    ComponentId add_component(std::string name, Handler handler);
    const std::string& component_name(ComponentId id) const { return components_.at(id).name; }

    /// Returns the sequence number given to the event.
    std::uint64_t schedule(Tick fire_at, ComponentId target, Payload payload);
    std::uint64_t schedule_in(Tick delay, ComponentId target, Payload payload);

    /// Dispatches events with fire_at <= limit. The clock stops at the last
    /// dispatch unless the queue drains, in which case it moves to limit.
    RunResult run_until(Tick limit);
    /// Like run_until, but the clock always ends at limit (if later than now).
    RunResult advance_to(Tick limit);

    Tick now() const noexcept { return now_; }
    bool empty() const noexcept { return queue_.empty(); }
    std::size_t pending() const noexcept { return queue_.size(); }
    std::uint64_t dispatched() const noexcept { return dispatched_; }
    /// Fire time of the most recently dispatched event (0 before any).
    Tick last_dispatch() const noexcept { return last_dispatch_; }

    /// Writes one line per dispatched event.
    void set_dispatch_log(std::ostream* log) { log_ = log; }
    /// Called after every dispatch; used by invariant checkers.
    void set_observer(Observer obs) { observer_ = std::move(obs); }

private:
    struct Component {
        std::string name;
        Handler handler;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const
        {
            return a.fire_at != b.fire_at ? a.fire_at > b.fire_at : a.seq > b.seq;
        }
    };

    Tick now_ = 0;
    Tick last_dispatch_ = 0;
    std::uint64_t next_seq_ = 0;
    std::uint64_t dispatched_ = 0;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::vector<Component> components_;
    std::ostream* log_ = nullptr;
    Observer observer_;
};

const char* payload_kind(const Payload& p);

} // namespace cxlsim
