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

#include "cxlsim/engine.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "cxlsim/error.hpp"

namespace cxlsim {

Tick ns_to_ticks(double ns)
{
    if (!std::isfinite(ns) || ns < 0.0)
        throw Error(Errc::ConfigError, fmt::format("latency {} ns must be a finite non-negative value", ns));
    const double ps = ns * static_cast<double>(kTicksPerNs);
    const double rounded = std::round(ps);
    if (std::fabs(ps - rounded) > 1e-6 * std::max(1.0, rounded))
        throw Error(Errc::ConfigError, fmt::format("latency {} ns is not a whole number of picoseconds", ns));
    if (rounded > static_cast<double>(std::numeric_limits<Tick>::max() / 2))
        throw Error(Errc::ConfigError, fmt::format("latency {} ns is too large", ns));
    return static_cast<Tick>(rounded);
}

const char* payload_kind(const Payload& p)
{
    switch (p.index()) {
    case 0: return "MemRequest";
    case 1: return "CxlFlit";
    case 2: return "MailboxCommand";
    default: return "Timer";
    }
}

ComponentId Engine::add_component(std::string name, Handler handler)
{
    components_.push_back({std::move(name), std::move(handler)});
    return static_cast<ComponentId>(components_.size() - 1);
}

std::uint64_t Engine::schedule(Tick fire_at, ComponentId target, Payload payload)
{
    if (fire_at < now_)
        throw Error(Errc::SchedulingInPast, fmt::format("event for '{}' at tick {} is before clock {}",
                                                        target < components_.size() ? components_[target].name : "?",
                                                        fire_at, now_));
    if (target >= components_.size())
        throw Error(Errc::InvalidArgument, fmt::format("unknown component id {}", target));
    const std::uint64_t seq = next_seq_++;
    queue_.push(Event{fire_at, seq, target, std::move(payload)});
    return seq;
}

std::uint64_t Engine::schedule_in(Tick delay, ComponentId target, Payload payload)
{
    if (delay > std::numeric_limits<Tick>::max() - now_)
        throw Error(Errc::TickOverflow, fmt::format("delay {} overflows clock {}", delay, now_));
    return schedule(now_ + delay, target, std::move(payload));
}

RunResult Engine::run_until(Tick limit)
{
    std::uint64_t count = 0;
    while (!queue_.empty() && queue_.top().fire_at <= limit) {
        Event ev = queue_.top();
        queue_.pop();
        now_ = ev.fire_at;
        last_dispatch_ = ev.fire_at;
        ++dispatched_;
        ++count;
        if (log_ != nullptr) {
            *log_ << ev.fire_at << ' ' << ev.seq << ' ' << components_[ev.target].name << ' '
                  << payload_kind(ev.payload) << '\n';
        }
        components_[ev.target].handler(ev);
        if (observer_)
            observer_(ev);
    }
    if (queue_.empty() && limit > now_)
        now_ = limit;
    return RunResult{now_, queue_.empty(), count};
}

RunResult Engine::advance_to(Tick limit)
{
    auto res = run_until(limit);
    if (limit > now_)
        now_ = limit;
    res.clock = now_;
    return res;
}

} // namespace cxlsim
