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

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace cxlsim {

using nlohmann::json;
using nlohmann::ordered_json;

json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::IoError, fmt::format("cannot open {}", path));
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(Errc::ParseError, fmt::format("{}: {}", path, e.what()));
    }
}

std::optional<std::uint64_t> parse_size(const json& v)
{
    if (v.is_number_unsigned())
        return v.get<std::uint64_t>();
    if (v.is_number_integer())
        return v.get<std::int64_t>() < 0 ? std::nullopt : std::optional<std::uint64_t>(v.get<std::int64_t>());
    if (!v.is_string())
        return std::nullopt;
    const auto s = v.get<std::string>();
    if (s.empty())
        return std::nullopt;
    std::uint64_t n = 0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    int base = 10;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
        b += 2;
        base = 16;
    }
    auto [ptr, ec] = std::from_chars(b, e, n, base);
    if (ec != std::errc() || ptr == b)
        return std::nullopt;
    const std::string_view suffix(ptr, static_cast<std::size_t>(e - ptr));
    static const std::map<std::string_view, std::uint64_t> units = {
        {"", 1}, {"B", 1}, {"KiB", KiB}, {"MiB", MiB}, {"GiB", GiB}, {"TiB", GiB * 1024}};
    auto it = units.find(suffix);
    if (it == units.end() || (base == 16 && !suffix.empty()))
        return std::nullopt;
    if (n != 0 && it->second > UINT64_MAX / n)
        return std::nullopt;
    return n * it->second;
}

std::string resolve_path(const RunConfig& cfg, const std::string& path)
{
    namespace fs = std::filesystem;
    const fs::path p(path);
    if (p.is_absolute() || cfg.base_dir.empty())
        return p.string();
    return (fs::path(cfg.base_dir) / p).lexically_normal().string();
}

namespace {

/// Walks one JSON object, recording type errors and unknown keys under a
/// dotted config path.
class Obj {
public:
    Obj(const json& j, std::string path, std::vector<std::string>& errs) : j_(j), path_(std::move(path)), errs_(errs)
    {
        if (!j_.is_object())
            error("", "must be an object");
    }
    Obj(const Obj&) = delete;
    ~Obj()
    {
        if (!j_.is_object())
            return;
        for (const auto& [k, v] : j_.items())
            if (!seen_.contains(k))
                error(k, "unknown key");
    }

    bool ok() const { return j_.is_object(); }
    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    void error(const std::string& key, const std::string& msg)
    {
        errs_.push_back(fmt::format("{}: {}", key.empty() ? (path_.empty() ? "$" : path_) : at(key), msg));
    }

    const json* get(const std::string& key)
    {
        seen_.insert(key);
        if (!j_.is_object())
            return nullptr;
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }
    bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

    template <typename T>
    void uint(const std::string& key, T& out, std::uint64_t lo = 0, std::uint64_t hi = UINT64_MAX)
    {
        if (auto* v = get(key)) {
            auto n = parse_size(*v);
            if (!n)
                error(key, "must be a non-negative integer or size string");
            else if (*n < lo || *n > hi)
                error(key, fmt::format("{} is outside {}..{}", *n, lo, hi));
            else
                out = static_cast<T>(*n);
        }
    }
    void ns(const std::string& key, Tick& out)
    {
        if (auto* v = get(key)) {
            if (!v->is_number()) {
                error(key, "must be a number of nanoseconds");
                return;
            }
            try {
                out = ns_to_ticks(v->get<double>());
            } catch (const Error& e) {
                error(key, e.what());
            }
        }
    }
    void boolean(const std::string& key, bool& out)
    {
        if (auto* v = get(key)) {
            if (!v->is_boolean())
                error(key, "must be a boolean");
            else
                out = v->get<bool>();
        }
    }
    void number(const std::string& key, double& out)
    {
        if (auto* v = get(key)) {
            if (!v->is_number())
                error(key, "must be a number");
            else
                out = v->get<double>();
        }
    }
    void string(const std::string& key, std::string& out)
    {
        if (auto* v = get(key)) {
            if (!v->is_string())
                error(key, "must be a string");
            else
                out = v->get<std::string>();
        }
    }
    /// Iterates an array member, handing each element and its path to fn.
    template <typename Fn>
    void array(const std::string& key, Fn fn)
    {
        if (auto* v = get(key)) {
            if (!v->is_array()) {
                error(key, "must be an array");
                return;
            }
            for (std::size_t i = 0; i < v->size(); ++i)
                fn((*v)[i], fmt::format("{}[{}]", at(key), i));
        }
    }

private:
    const json& j_;
    std::string path_;
    std::vector<std::string>& errs_;
    std::set<std::string> seen_;
};

std::optional<RegionKind> region_kind(std::string_view s)
{
    if (s == "system_dram")
        return RegionKind::SystemDram;
    if (s == "cxl_window")
        return RegionKind::CxlWindow;
    if (s == "reserved")
        return RegionKind::Reserved;
    if (s == "mmio")
        return RegionKind::Mmio;
    return std::nullopt;
}

std::string_view region_kind_name(RegionKind k)
{
    switch (k) {
    case RegionKind::SystemDram: return "system_dram";
    case RegionKind::CxlWindow: return "cxl_window";
    case RegionKind::Reserved: return "reserved";
    case RegionKind::Mmio: return "mmio";
    }
    return "reserved";
}

std::optional<NumaMode> numa_mode(std::string_view s)
{
    if (s == "znuma")
        return NumaMode::Znuma;
    if (s == "flat")
        return NumaMode::Flat;
    return std::nullopt;
}

std::optional<Pool> pool_of(std::string_view s)
{
    if (s == "dram")
        return Pool::Dram;
    if (s == "cxl")
        return Pool::Cxl;
    return std::nullopt;
}

constexpr std::array<const char*, 4> kServiceKeys = {"m2s_req", "m2s_rwd", "s2m_ndr", "s2m_drs"};

void parse_geometry(const json& j, const std::string& path, CacheGeometry& g, std::vector<std::string>& errs)
{
    Obj o(j, path, errs);
    o.uint("size", g.size_bytes, 1);
    o.uint("line", g.line_bytes, 1);
    o.uint("assoc", g.assoc, 1, 1u << 16);
    o.ns("hit_ns", g.hit_latency);
}

void parse_topology(const json& j, TopologyConfig& t, std::vector<std::string>& errs)
{
    Obj o(j, "topology", errs);
    o.uint("page_size", t.page_size, 1);
    std::string mode;
    o.string("mode", mode);
    if (!mode.empty()) {
        if (auto m = numa_mode(mode))
            t.mode = *m;
        else
            o.error("mode", fmt::format("'{}' is not znuma or flat", mode));
    }
    if (o.has("cpu_nodes")) {
        t.cpu_nodes.clear();
        o.array("cpu_nodes", [&](const json& v, const std::string& p) {
            if (!v.is_number_unsigned())
                errs.push_back(p + ": must be a node id");
            else
                t.cpu_nodes.insert(v.get<unsigned>());
        });
    }
    o.array("regions", [&](const json& v, const std::string& p) {
        Obj r(v, p, errs);
        PhysRegion reg;
        r.string("name", reg.name);
        r.uint("base", reg.base);
        r.uint("size", reg.size);
        std::string kind;
        r.string("kind", kind);
        if (auto k = region_kind(kind))
            reg.kind = *k;
        else
            r.error("kind", fmt::format("'{}' is not system_dram, cxl_window, reserved or mmio", kind));
        if (r.has("node")) {
            unsigned n = 0;
            r.uint("node", n, 0, 255);
            reg.numa_node = n;
        }
        t.regions.push_back(reg);
    });
    o.array("decoders", [&](const json& v, const std::string& p) {
        Obj d(v, p, errs);
        HdmDecoder dec;
        d.uint("index", dec.index, 0, 7);
        d.uint("base", dec.base);
        d.uint("size", dec.size);
        d.uint("device", dec.target_device);
        dec.enabled = true;
        d.boolean("enabled", dec.enabled);
        t.decoders.push_back(dec);
    });
    o.array("devices", [&](const json& v, const std::string& p) {
        Obj d(v, p, errs);
        DeviceConfig dc;
        d.uint("id", dc.id);
        d.uint("capacity", dc.capacity, 1);
        d.uint("vendor_id", dc.vendor_id, 0, 0xFFFF);
        d.uint("device_id", dc.device_id, 0, 0xFFFF);
        d.uint("serial", dc.serial);
        d.uint("hdm_decoders", dc.hdm_decoders, 1, 8);
        d.ns("mailbox_latency_ns", dc.mailbox_latency);
        d.string("fw_revision", dc.fw_revision);
        d.uint("bar0_base", dc.bar0_base);
        d.uint("znuma_node", dc.znuma_node, 0, 255);
        d.uint("host_bridge", dc.host_bridge_uid);
        t.devices.push_back(dc);
    });
    if (auto* pj = o.get("platform")) {
        Obj p(*pj, "topology.platform", errs);
        if (p.has("cpus")) {
            t.platform.cpus.clear();
            p.array("cpus", [&](const json& v, const std::string& path) {
                Obj c(v, path, errs);
                CpuDesc cd;
                c.uint("apic_id", cd.apic_id, 0, 255);
                c.uint("node", cd.node, 0, 255);
                t.platform.cpus.push_back(cd);
            });
        }
        if (auto* ej = p.get("ecam")) {
            Obj e(*ej, "topology.platform.ecam", errs);
            e.uint("base", t.platform.ecam.base);
            e.uint("segment", t.platform.ecam.segment, 0, 0xFFFF);
            e.uint("start_bus", t.platform.ecam.start_bus, 0, 255);
            e.uint("end_bus", t.platform.ecam.end_bus, 0, 255);
        }
        if (p.has("host_bridges")) {
            t.platform.host_bridges.clear();
            p.array("host_bridges", [&](const json& v, const std::string& path) {
                Obj h(v, path, errs);
                HostBridgeDesc hb;
                h.uint("uid", hb.uid, 0, UINT32_MAX);
                h.uint("chbs_base", hb.chbs_base);
                h.uint("bus", hb.bus, 0, 255);
                t.platform.host_bridges.push_back(hb);
            });
        }
        p.uint("xsdt_address", t.platform.xsdt_address);
    }
    for (const auto& d : t.devices)
        t.platform.device_host_bridge[d.id] = d.host_bridge_uid;
}

void parse_workload(const json& j, RunConfig& cfg, std::vector<std::string>& errs)
{
    Obj o(j, "workload", errs);
    std::string type = "stream";
    o.string("type", type);
    if (type == "stream") {
        StreamWorkloadConfig w;
        std::string kernel = std::string(to_string(w.kernel));
        o.string("kernel", kernel);
        try {
            w.kernel = parse_stream_kernel(kernel);
        } catch (const Error&) {
            o.error("kernel", fmt::format("'{}' is not copy, scale, add or triad", kernel));
        }
        if (o.has("array_elems")) {
            std::uint64_t n = 0;
            o.uint("array_elems", n, 1);
            w.array_elems = n;
        }
        o.number("footprint_x_l2", w.footprint_x_l2);
        if (!(w.footprint_x_l2 > 0.0))
            o.error("footprint_x_l2", "must be > 0");
        o.uint("iterations", w.iterations, 1, 1'000'000);
        o.uint("scalar", w.scalar);
        o.uint("cores", w.cores, 0, 32);
        cfg.workload = w;
    } else if (type == "pointer_chase") {
        ChaseWorkloadConfig w;
        o.uint("elems", w.elems);
        o.uint("stride", w.stride, 8);
        std::string pool = "cxl";
        o.string("pool", pool);
        if (auto p = pool_of(pool))
            w.pool = *p;
        else
            o.error("pool", fmt::format("'{}' is not dram or cxl", pool));
        o.boolean("shuffle", w.shuffle);
        cfg.workload = w;
    } else if (type == "trace") {
        TraceWorkloadConfig w;
        o.string("path", w.path);
        if (w.path.empty())
            o.error("path", "trace workloads need a path");
        cfg.workload = w;
    } else {
        o.error("type", fmt::format("'{}' is not stream, pointer_chase or trace", type));
    }
}

} // namespace

ConfigLoad parse_run_config(const json& doc, std::string base_dir)
{
    ConfigLoad out;
    RunConfig cfg = default_run_config();
    cfg.base_dir = std::move(base_dir);
    std::vector<std::string>& errs = out.violations;
    {
        Obj o(doc, "", errs);
        if (!o.ok())
            return out;
        int version = 0;
        o.uint("schema_version", version, 0, 1000);
        if (version != kConfigSchemaVersion)
            o.error("schema_version", fmt::format("must be {}", kConfigSchemaVersion));
        o.string("name", cfg.name);
        o.uint("seed", cfg.seed);
        o.uint("max_ticks", cfg.max_ticks, 1);
        o.boolean("strict", cfg.strict);

        if (auto* t = o.get("topology")) {
            cfg.topology = TopologyConfig{};
            parse_topology(*t, cfg.topology, errs);
        }
        if (auto* c = o.get("cpu")) {
            Obj co(*c, "cpu", errs);
            co.uint("cores", cfg.cpu.cores, 1, 4);
            co.uint("window", cfg.cpu.window, 1, 4096);
            co.ns("issue_interval_ns", cfg.cpu.issue_interval);
        }
        if (auto* c = o.get("caches")) {
            Obj co(*c, "caches", errs);
            if (auto* l1 = co.get("l1"))
                parse_geometry(*l1, "caches.l1", cfg.caches.l1, errs);
            if (auto* l2 = co.get("l2"))
                parse_geometry(*l2, "caches.l2", cfg.caches.l2, errs);
            co.ns("coherence_ns", cfg.caches.coherence_latency);
        }
        if (auto* d = o.get("dram")) {
            Obj dj(*d, "dram", errs);
            dj.ns("membus_ns", cfg.dram.membus);
            dj.ns("read_ns", cfg.dram.read);
            dj.ns("write_ns", cfg.dram.write);
        }
        if (auto* l = o.get("latency")) {
            Obj lj(*l, "latency", errs);
            lj.ns("iobus_ns", cfg.latency.iobus);
            lj.ns("pack_ns", cfg.latency.pack);
            lj.ns("link_ns", cfg.latency.link);
            lj.ns("depack_ns", cfg.latency.depack);
            lj.ns("device_ctrl_ns", cfg.latency.device_ctrl);
            lj.ns("media_read_ns", cfg.latency.media_read);
            lj.ns("media_write_ns", cfg.latency.media_write);
            lj.uint("max_outstanding", cfg.latency.max_outstanding, 1, 65536);
            if (auto* s = lj.get("service_ns")) {
                Obj sj(*s, "latency.service_ns", errs);
                for (std::size_t i = 0; i < kServiceKeys.size(); ++i)
                    sj.ns(kServiceKeys[i], cfg.latency.service[i]);
            }
        }
        std::string interleave = cfg.interleave.to_string();
        o.string("interleave", interleave);
        try {
            cfg.interleave = InterleavePolicy::parse(interleave, cfg.topology.page_size);
        } catch (const Error& e) {
            o.error("interleave", e.what());
        }
        if (auto* w = o.get("workload"))
            parse_workload(*w, cfg, errs);
    }
    cfg.caches.cores = cfg.cpu.cores;
    if (!errs.empty())
        return out;
    auto sem = validate_run_config(cfg);
    if (!sem.empty()) {
        out.violations = std::move(sem);
        return out;
    }
    out.config = std::move(cfg);
    return out;
}

ConfigLoad load_run_config(const std::string& path)
{
    const auto doc = read_json_file(path);
    auto dir = std::filesystem::path(path).parent_path().string();
    return parse_run_config(doc, dir.empty() ? "." : dir);
}

std::vector<std::string> validate_run_config(const RunConfig& cfg)
{
    std::vector<std::string> out;
    auto add = [&](const std::string& path, const std::string& msg) { out.push_back(path + ": " + msg); };
    const auto& t = cfg.topology;

    if (!InterleavePolicy::is_pow2_page(t.page_size))
        add("topology.page_size", fmt::format("{} must be a power of two >= 4096", t.page_size));
    if (cfg.interleave.page_size() != t.page_size)
        add("interleave", "page size differs from topology.page_size");
    try {
        AddressMap map(t.regions, t.decoders, t.mode, t.cpu_nodes, t.page_size);
        for (const auto& v : map.violations())
            add("topology", v);
    } catch (const Error& e) {
        add("topology", e.what());
    }
    for (const auto& v : check_decoders(t.decoders))
        add("topology.decoders", v);

    std::set<unsigned> ids;
    for (std::size_t i = 0; i < t.devices.size(); ++i) {
        const auto& d = t.devices[i];
        const auto p = fmt::format("topology.devices[{}]", i);
        if (!ids.insert(d.id).second)
            add(p + ".id", fmt::format("duplicate device id {}", d.id));
        if (d.capacity % kHdmGranularity != 0)
            add(p + ".capacity", fmt::format("{} is not a multiple of 256 MiB", d.capacity));
        if (d.hdm_decoders != 1 && d.hdm_decoders % 2 != 0)
            add(p + ".hdm_decoders", "must be 1, 2, 4, 6 or 8");
        bool bridge = false;
        for (const auto& hb : t.platform.host_bridges)
            bridge = bridge || hb.uid == d.host_bridge_uid;
        if (!bridge)
            add(p + ".host_bridge", fmt::format("no host bridge with uid {}", d.host_bridge_uid));
    }
    for (std::size_t i = 0; i < t.decoders.size(); ++i) {
        const auto& dec = t.decoders[i];
        const auto p = fmt::format("topology.decoders[{}]", i);
        const DeviceConfig* dev = nullptr;
        for (const auto& d : t.devices)
            if (d.id == dec.target_device)
                dev = &d;
        if (dev == nullptr) {
            add(p + ".device", fmt::format("no device with id {}", dec.target_device));
            continue;
        }
        if (dec.index >= dev->hdm_decoders)
            add(p + ".index", fmt::format("device {} has {} decoders", dev->id, dev->hdm_decoders));
        if (dec.size > dev->capacity)
            add(p + ".size", fmt::format("{:#x} exceeds device capacity {:#x}", dec.size, dev->capacity));
    }
    for (std::size_t i = 0; i < t.regions.size(); ++i) {
        const auto& r = t.regions[i];
        if (r.kind != RegionKind::CxlWindow)
            continue;
        const auto p = fmt::format("topology.regions[{}]", i);
        const auto first = decode_hdm(r.base, t.decoders);
        const auto last = r.size == 0 ? first : decode_hdm(r.end() - 1, t.decoders);
        if (!first || !last || first->device != last->device)
            add(p, "CXL region is not covered by one enabled decoder");
        else
            for (const auto& d : t.devices)
                if (d.id == first->device && last->offset >= d.capacity)
                    add(p, "CXL region maps beyond device capacity");
    }

    HierarchyConfig h = cfg.caches;
    h.cores = cfg.cpu.cores;
    for (const auto& v : h.l1.violations("caches.l1"))
        out.push_back(v);
    for (const auto& v : h.l2.violations("caches.l2"))
        out.push_back(v);
    if (h.l1.line_bytes != kLineBytes || h.l2.line_bytes != kLineBytes)
        add("caches", fmt::format("line size must be {} bytes", kLineBytes));
    if (h.l2.size_bytes < h.l1.size_bytes * cfg.cpu.cores)
        add("caches.l2.size", "an inclusive L2 must be at least the sum of the L1s");
    if (cfg.cpu.cores < 1 || cfg.cpu.cores > 4)
        add("cpu.cores", "must be 1..4");
    if (cfg.latency.max_outstanding == 0)
        add("latency.max_outstanding", "must be >= 1");

    if (const auto* w = std::get_if<StreamWorkloadConfig>(&cfg.workload)) {
        if (w->cores > cfg.cpu.cores)
            add("workload.cores", fmt::format("{} exceeds cpu.cores {}", w->cores, cfg.cpu.cores));
        if (cfg.interleave.cxl_weight() > 0 && t.decoders.empty())
            add("interleave", "CXL weight is non-zero but no CXL memory is configured");
    } else if (const auto* c = std::get_if<ChaseWorkloadConfig>(&cfg.workload)) {
        if (c->elems < 2)
            add("workload.elems", "a pointer chase needs at least 2 elements");
        if (c->stride % 8 != 0 || c->stride == 0)
            add("workload.stride", "must be a non-zero multiple of 8");
    } else if (const auto* tr = std::get_if<TraceWorkloadConfig>(&cfg.workload)) {
        if (!std::filesystem::exists(resolve_path(cfg, tr->path)))
            add("workload.path", fmt::format("trace file {} not found", resolve_path(cfg, tr->path)));
    }
    return out;
}

namespace {

ordered_json hex(std::uint64_t v) { return fmt::format("{:#x}", v); }

ordered_json geometry_json(const CacheGeometry& g)
{
    ordered_json j;
    j["size"] = g.size_bytes;
    j["line"] = g.line_bytes;
    j["assoc"] = g.assoc;
    j["hit_ns"] = ticks_to_ns(g.hit_latency);
    return j;
}

} // namespace

ordered_json to_json(const RunConfig& cfg)
{
    ordered_json j;
    j["schema_version"] = kConfigSchemaVersion;
    j["name"] = cfg.name;
    j["seed"] = cfg.seed;
    j["max_ticks"] = cfg.max_ticks;
    j["strict"] = cfg.strict;

    const auto& t = cfg.topology;
    ordered_json top;
    top["page_size"] = t.page_size;
    top["mode"] = std::string(to_string(t.mode));
    top["cpu_nodes"] = t.cpu_nodes;
    top["regions"] = ordered_json::array();
    for (const auto& r : t.regions) {
        ordered_json rj;
        rj["name"] = r.name;
        rj["base"] = hex(r.base);
        rj["size"] = hex(r.size);
        rj["kind"] = std::string(region_kind_name(r.kind));
        if (r.numa_node)
            rj["node"] = *r.numa_node;
        top["regions"].push_back(rj);
    }
    top["decoders"] = ordered_json::array();
    for (const auto& d : t.decoders) {
        ordered_json dj;
        dj["index"] = d.index;
        dj["base"] = hex(d.base);
        dj["size"] = hex(d.size);
        dj["device"] = d.target_device;
        dj["enabled"] = d.enabled;
        top["decoders"].push_back(dj);
    }
    top["devices"] = ordered_json::array();
    for (const auto& d : t.devices) {
        ordered_json dj;
        dj["id"] = d.id;
        dj["capacity"] = hex(d.capacity);
        dj["vendor_id"] = d.vendor_id;
        dj["device_id"] = d.device_id;
        dj["serial"] = d.serial;
        dj["hdm_decoders"] = d.hdm_decoders;
        dj["mailbox_latency_ns"] = ticks_to_ns(d.mailbox_latency);
        dj["fw_revision"] = d.fw_revision;
        dj["bar0_base"] = hex(d.bar0_base);
        dj["znuma_node"] = d.znuma_node;
        dj["host_bridge"] = d.host_bridge_uid;
        top["devices"].push_back(dj);
    }
    ordered_json plat;
    plat["cpus"] = ordered_json::array();
    for (const auto& c : t.platform.cpus)
        plat["cpus"].push_back(ordered_json{{"apic_id", c.apic_id}, {"node", c.node}});
    plat["ecam"] = ordered_json{{"base", hex(t.platform.ecam.base)},
                                {"segment", t.platform.ecam.segment},
                                {"start_bus", t.platform.ecam.start_bus},
                                {"end_bus", t.platform.ecam.end_bus}};
    plat["host_bridges"] = ordered_json::array();
    for (const auto& h : t.platform.host_bridges)
        plat["host_bridges"].push_back(
            ordered_json{{"uid", h.uid}, {"chbs_base", hex(h.chbs_base)}, {"bus", h.bus}});
    plat["xsdt_address"] = hex(t.platform.xsdt_address);
    top["platform"] = plat;
    j["topology"] = top;

    j["cpu"] = ordered_json{{"cores", cfg.cpu.cores},
                            {"window", cfg.cpu.window},
                            {"issue_interval_ns", ticks_to_ns(cfg.cpu.issue_interval)}};
    j["caches"] = ordered_json{{"l1", geometry_json(cfg.caches.l1)},
                               {"l2", geometry_json(cfg.caches.l2)},
                               {"coherence_ns", ticks_to_ns(cfg.caches.coherence_latency)}};
    j["dram"] = ordered_json{{"membus_ns", ticks_to_ns(cfg.dram.membus)},
                             {"read_ns", ticks_to_ns(cfg.dram.read)},
                             {"write_ns", ticks_to_ns(cfg.dram.write)}};
    const auto& l = cfg.latency;
    ordered_json lat;
    lat["iobus_ns"] = ticks_to_ns(l.iobus);
    lat["pack_ns"] = ticks_to_ns(l.pack);
    lat["link_ns"] = ticks_to_ns(l.link);
    lat["depack_ns"] = ticks_to_ns(l.depack);
    lat["device_ctrl_ns"] = ticks_to_ns(l.device_ctrl);
    lat["media_read_ns"] = ticks_to_ns(l.media_read);
    lat["media_write_ns"] = ticks_to_ns(l.media_write);
    ordered_json svc;
    for (std::size_t i = 0; i < kServiceKeys.size(); ++i)
        svc[kServiceKeys[i]] = ticks_to_ns(l.service[i]);
    lat["service_ns"] = svc;
    lat["max_outstanding"] = l.max_outstanding;
    j["latency"] = lat;
    j["interleave"] = cfg.interleave.to_string();

    ordered_json w;
    std::visit(
        [&](const auto& wc) {
            using T = std::decay_t<decltype(wc)>;
            if constexpr (std::is_same_v<T, StreamWorkloadConfig>) {
                w["type"] = "stream";
                w["kernel"] = std::string(to_string(wc.kernel));
                if (wc.array_elems)
                    w["array_elems"] = *wc.array_elems;
                w["footprint_x_l2"] = wc.footprint_x_l2;
                w["iterations"] = wc.iterations;
                w["scalar"] = wc.scalar;
                w["cores"] = wc.cores;
            } else if constexpr (std::is_same_v<T, ChaseWorkloadConfig>) {
                w["type"] = "pointer_chase";
                w["elems"] = wc.elems;
                w["stride"] = wc.stride;
                w["pool"] = std::string(to_string(wc.pool));
                w["shuffle"] = wc.shuffle;
            } else {
                w["type"] = "trace";
                w["path"] = wc.path;
            }
        },
        cfg.workload);
    j["workload"] = w;
    return j;
}

RunConfig default_run_config()
{
    RunConfig cfg;
    auto& t = cfg.topology;
    t.regions = {
        PhysRegion{"dram0", 0, 2 * GiB, RegionKind::SystemDram, 0},
        PhysRegion{"ecam", 0xE0000000, 256 * MiB, RegionKind::Mmio, std::nullopt},
        PhysRegion{"pci_mmio", 0xFE000000, 16 * MiB, RegionKind::Mmio, std::nullopt},
        PhysRegion{"cxl0.0", 0x1'0000'0000, 1 * GiB, RegionKind::CxlWindow, 1},
    };
    t.decoders = {HdmDecoder{0, 0x1'0000'0000, 1 * GiB, 0, true}};
    t.mode = NumaMode::Znuma;
    DeviceConfig dev;
    dev.bar0_base = 0xFE000000;
    t.devices = {dev};
    t.platform.device_host_bridge[0] = 0;
    cfg.caches.cores = cfg.cpu.cores;
    return cfg;
}

} // namespace cxlsim
