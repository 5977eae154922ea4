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

#include "cxlsim/cxl_protocol.hpp"

#include <fmt/format.h>

#include "cxlsim/error.hpp"

namespace cxlsim {

void DeviceMedia::check(std::uint64_t offset) const
{
    if (offset >= capacity_)
        throw Error(Errc::AddressOutOfRange, fmt::format("offset {:#x} is beyond device capacity {:#x}", offset, capacity_));
    if (offset % kLineBytes != 0)
        throw Error(Errc::Misaligned, fmt::format("media offset {:#x} is not line aligned", offset));
}

LineData DeviceMedia::read_line(std::uint64_t offset) const
{
    check(offset);
    auto it = lines_.find(offset);
    return it != lines_.end() ? it->second : LineData{};
}

void DeviceMedia::write_line(std::uint64_t offset, const LineData& data)
{
    check(offset);
    lines_[offset] = data;
}

OutstandingTable::OutstandingTable(std::size_t capacity) : capacity_(capacity)
{
    if (capacity == 0 || capacity > 65536)
        throw Error(Errc::ConfigError, fmt::format("tag space {} is outside 1..65536", capacity));
    for (std::size_t t = 0; t < capacity; ++t)
        free_.insert(free_.end(), static_cast<std::uint16_t>(t));
}

std::uint16_t OutstandingTable::allocate(const OutstandingEntry& entry)
{
    if (free_.empty())
        throw Error(Errc::TagExhausted, fmt::format("all {} tags are outstanding", capacity_));
    const auto tag = *free_.begin();
    free_.erase(free_.begin());
    live_.emplace(tag, entry);
    ++allocated_total_;
    return tag;
}

OutstandingEntry OutstandingTable::release(std::uint16_t tag)
{
    auto it = live_.find(tag);
    if (it == live_.end())
        throw Error(Errc::UnknownTag, fmt::format("response tag {} matches no outstanding request", tag));
    OutstandingEntry e = it->second;
    live_.erase(it);
    free_.insert(tag);
    ++released_total_;
    return e;
}

Tick CxlChannel::enqueue(const CxlFlit& flit, Tick arrival)
{
    if (channel_of(flit.opcode) != kind_)
        throw Error(Errc::ProtocolViolation,
                    fmt::format("{} enqueued on {}", to_string(flit.opcode), to_string(kind_)));
    check_flit(flit);
    if (arrival < last_arrival_)
        throw Error(Errc::SimulationError, fmt::format("{} arrivals out of order ({} after {})", to_string(kind_),
                                                       arrival, last_arrival_));
    last_arrival_ = arrival;

    while (!in_service_.empty() && in_service_.front() <= arrival)
        in_service_.pop_front();
    const std::uint64_t depth = in_service_.size();

    const Tick start = std::max(arrival, last_departure_);
    const Tick departure = start + interval_;
    last_departure_ = departure;
    in_service_.push_back(departure);
    fifo_.push_back(Slot{flit, departure});

    ++stats_.flits;
    stats_.depth_sum += depth;
    stats_.max_depth = std::max(stats_.max_depth, depth);
    stats_.queue_delay_sum += start - arrival;
    return departure;
}

std::vector<CxlFlit> CxlChannel::service(Tick now)
{
    std::vector<CxlFlit> out;
    while (!fifo_.empty() && fifo_.front().departure <= now) {
        out.push_back(std::move(fifo_.front().flit));
        fifo_.pop_front();
    }
    return out;
}

CxlFlit CxlChannel::pop_front(std::uint16_t tag)
{
    if (fifo_.empty() || fifo_.front().flit.tag != tag)
        throw Error(Errc::SimulationError, fmt::format("{} FIFO order broken at tag {}", to_string(kind_), tag));
    CxlFlit f = std::move(fifo_.front().flit);
    fifo_.pop_front();
    return f;
}

Packetized packetize(const MemRequest& req, std::uint64_t offset, const std::optional<LineData>& data,
                     OutstandingTable& table, const LatencyConfig& lat, Tick now)
{
    const bool store = req.op == MemOp::Store;
    if (store && !data)
        throw Error(Errc::ProtocolViolation, fmt::format("store {} has no line data", req.id));
    CxlFlit flit;
    flit.opcode = store ? CxlOpcode::MemWr : CxlOpcode::MemRd;
    flit.addr = offset;
    if (store)
        flit.payload = data;
    flit.created_at = now + lat.pack;
    flit.tag = table.allocate(OutstandingEntry{req, flit.created_at, store ? TxnKind::Write : TxnKind::Read});
    return Packetized{flit, flit.created_at};
}

Served depacketize_and_serve(const CxlFlit& flit, DeviceMedia& media, const LatencyConfig& lat, Tick now)
{
    check_flit(flit);
    const Tick front = now + lat.depack + lat.device_ctrl;
    CxlFlit resp;
    resp.tag = flit.tag;
    switch (flit.opcode) {
    case CxlOpcode::MemRd:
        resp.opcode = CxlOpcode::MemData;
        resp.payload = media.read_line(flit.addr);
        resp.created_at = front + lat.media_read;
        break;
    case CxlOpcode::MemWr:
        media.write_line(flit.addr, *flit.payload);
        resp.opcode = CxlOpcode::Cmp;
        resp.created_at = front + lat.media_write;
        break;
    default:
        throw Error(Errc::ProtocolViolation, fmt::format("{} arrived at the endpoint", to_string(flit.opcode)));
    }
    return Served{resp, resp.created_at};
}

Finished complete(const CxlFlit& resp, OutstandingTable& table, Tick now)
{
    if (is_m2s(resp.opcode))
        throw Error(Errc::ProtocolViolation, fmt::format("{} arrived as a response", to_string(resp.opcode)));
    check_flit(resp);
    if (!table.contains(resp.tag))
        throw Error(Errc::UnknownTag, fmt::format("{} tag {} matches no outstanding request", to_string(resp.opcode), resp.tag));
    const OutstandingEntry e = table.release(resp.tag);
    const TxnKind expect = resp.opcode == CxlOpcode::MemData ? TxnKind::Read : TxnKind::Write;
    if (e.kind != expect)
        throw Error(Errc::ProtocolViolation, fmt::format("{} answered a {} (tag {})", to_string(resp.opcode),
                                                         e.kind == TxnKind::Read ? "read" : "write", resp.tag));
    Finished f;
    f.req = e.origin;
    f.kind = e.kind;
    f.latency = now - e.origin.issue_time;
    if (resp.payload) {
        f.data = resp.payload;
    }
    return f;
}

CxlPath::CxlPath(Engine& engine, std::string name, const LatencyConfig& lat, DeviceMedia& media, bool strict,
                 CompletionFn on_complete)
    : engine_(engine), lat_(lat), media_(media), strict_(strict), on_complete_(std::move(on_complete)),
      table_(lat.max_outstanding)
{
    for (auto ch : kAllChannels)
        channels_.emplace_back(ch, lat.service_interval(ch));
    rc_in_ = engine_.add_component(name + ".rc", [this](const Event&) { on_rc_arrival(); });
    endpoint_ = engine_.add_component(name + ".endpoint",
                                      [this](const Event& e) { on_endpoint(std::get<CxlFlit>(e.payload)); });
    s2m_in_ = engine_.add_component(name + ".s2m", [this](const Event& e) { on_s2m_enqueue(std::get<CxlFlit>(e.payload)); });
    rc_done_ = engine_.add_component(name + ".rc_resp",
                                     [this](const Event& e) { on_rc_response(std::get<CxlFlit>(e.payload)); });
}

void CxlPath::violation(const Error& e)
{
    ++violations_;
    if (strict_)
        throw e;
}

void CxlPath::post(const MemRequest& req, std::uint64_t device_offset, std::optional<LineData> data)
{
    const Tick at = engine_.now() + lat_.iobus;
    inbound_.push_back(Inbound{req, device_offset, std::move(data), at});
    engine_.schedule(at, rc_in_, Timer{req.id});
}

void CxlPath::on_rc_arrival()
{
    Inbound in = std::move(inbound_.front());
    inbound_.pop_front();
    if (table_.full() || !backlog_.empty()) {
        ++backpressured_;
        backlog_.push_back(std::move(in));
        return;
    }
    issue(in);
}

void CxlPath::issue(const Inbound& in)
{
    const Tick now = engine_.now();
    const auto p = packetize(in.req, in.offset, in.data, table_, lat_, now);
    const Tick departure = chan(channel_of(p.flit.opcode)).enqueue(p.flit, p.enqueue_at);
    engine_.schedule(departure + lat_.link, endpoint_, p.flit);
}

void CxlPath::on_endpoint(const CxlFlit& flit)
{
    chan(channel_of(flit.opcode)).pop_front(flit.tag);
    try {
        const auto served = depacketize_and_serve(flit, media_, lat_, engine_.now());
        engine_.schedule(served.ready_at, s2m_in_, served.response);
    } catch (const Error& e) {
        violation(e);
    }
}

void CxlPath::on_s2m_enqueue(const CxlFlit& flit)
{
    const Tick departure = chan(channel_of(flit.opcode)).enqueue(flit, engine_.now());
    engine_.schedule(departure + lat_.link + lat_.pack, rc_done_, flit);
}

void CxlPath::on_rc_response(const CxlFlit& flit)
{
    chan(channel_of(flit.opcode)).pop_front(flit.tag);
    std::optional<Finished> done;
    try {
        done = complete(flit, table_, engine_.now());
    } catch (const Error& e) {
        violation(e);
    }
    if (!backlog_.empty() && !table_.full()) {
        Inbound next = std::move(backlog_.front());
        backlog_.pop_front();
        issue(next);
    }
    if (done)
        on_complete_(*done);
}

} // namespace cxlsim
