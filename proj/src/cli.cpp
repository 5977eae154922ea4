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

#include "cxlsim/cli.hpp"

#include "cxlsim/config.hpp"
#include "cxlsim/firmware_tables.hpp"
#include "cxlsim/metrics.hpp"
#include "cxlsim/simulator.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace cxlsim {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::shared_ptr<spdlog::logger> logger()
{
    static auto log = [] {
        auto l = spdlog::stderr_color_st("cxlsim");
        l->set_pattern("[%l] %v");
        l->set_level(spdlog::level::warn);
        if (const char* env = std::getenv("CXLSIM_LOG"))
            l->set_level(spdlog::level::from_str(env));
        return l;
    }();
    return log;
}

/// Failure with a chosen exit code; message already worded for the user.
struct Exit {
    int code;
    std::string message;
};

int exit_code_for(const Error& e)
{
    switch (e.code()) {
    case Errc::ParseError:
    case Errc::IoError:
    case Errc::InvalidArgument: return kExitUsage;
    default: return kExitFailure;
    }
}

RunConfig load_or_exit(const std::string& path)
{
    if (!fs::exists(path))
        throw Exit{kExitUsage, fmt::format("config file {} does not exist", path)};
    const auto load = load_run_config(path);
    if (!load.config) {
        std::string msg = fmt::format("{}: {} violation(s)", path, load.violations.size());
        for (const auto& v : load.violations)
            msg += "\n  " + v;
        throw Exit{kExitFailure, msg};
    }
    return *load.config;
}

void ensure_dir(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw Exit{kExitUsage, fmt::format("cannot create output directory {}: {}", dir, ec.message())};
}

std::vector<std::string> split(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

int cmd_validate(const std::string& path, std::ostream& out)
{
    const auto cfg = load_or_exit(path);
    out << fmt::format("{}: OK ({}, {} region(s), {} device(s))\n", path, cfg.name, cfg.topology.regions.size(),
                       cfg.topology.devices.size());
    return kExitOk;
}

int cmd_run(const std::string& path, const std::string& out_dir, bool log, std::ostream& out)
{
    const auto cfg = load_or_exit(path);
    ensure_dir(out_dir);
    std::ofstream events;
    SimOptions opts;
    if (log) {
        events.open(fs::path(out_dir) / "events.log", std::ios::trunc);
        if (!events)
            throw Exit{kExitUsage, fmt::format("cannot write {}/events.log", out_dir)};
        opts.dispatch_log = &events;
    }
    logger()->info("running {}", cfg.name);
    Simulator sim(cfg, nullptr, opts);
    sim.run();
    const auto stats = snapshot(sim);
    write_file((fs::path(out_dir) / "stats.json").string(), emit_json(stats));
    for (const auto& v : stats.violations())
        logger()->warn("stats invariant: {}", v);
    out << fmt::format("{}: retired {} requests in {:.3f} ns; l2_miss_rate {:.6f}; bandwidth {:.3f} GB/s\n", cfg.name,
                       stats.retired, ticks_to_ns(stats.elapsed), stats.l2_miss_rate(), stats.bandwidth_gbps());
    if (stats.totals.check_passed && !*stats.totals.check_passed)
        throw Exit{kExitFailure, fmt::format("workload check failed: {}", stats.totals.check_detail)};
    return kExitOk;
}

int cmd_sweep(const std::string& path, const std::string& footprints, const std::string& ratios,
              const std::string& out_dir, unsigned jobs, std::ostream& out)
{
    const auto cfg = load_or_exit(path);
    std::vector<double> fps;
    for (const auto& f : split(footprints)) {
        try {
            std::size_t used = 0;
            fps.push_back(std::stod(f, &used));
            if (used != f.size())
                throw std::invalid_argument(f);
        } catch (const std::exception&) {
            throw Exit{kExitUsage, fmt::format("footprint '{}' is not a number", f)};
        }
    }
    const auto rs = split(ratios);
    for (const auto& r : rs) {
        try {
            (void)InterleavePolicy::parse(r, cfg.topology.page_size);
        } catch (const Error& e) {
            throw Exit{kExitUsage, e.what()};
        }
    }
    ensure_dir(out_dir);
    const auto grid = run_sweep(cfg, fps, rs, jobs);
    write_file((fs::path(out_dir) / "sweep.csv").string(), emit_csv(grid));
    write_file((fs::path(out_dir) / "sweep.json").string(), grid_json(grid).dump(2) + "\n");
    out << fmt::format("{} cell(s) written to {}\n", grid.cells.size(), (fs::path(out_dir) / "sweep.csv").string());
    return kExitOk;
}

struct MemdevSetup {
    RunConfig cfg;
    std::unique_ptr<AddressMap> map;
    std::vector<std::unique_ptr<CxlMemDevice>> devices;

    CxlMemDevice& device(unsigned id)
    {
        for (auto& d : devices)
            if (d->id() == id)
                return *d;
        throw Exit{kExitFailure, fmt::format("DeviceNotFound: no CXL device with id {}", id)};
    }
};

MemdevSetup memdev_setup(const std::string& path)
{
    MemdevSetup s;
    s.cfg = load_or_exit(path);
    const auto& t = s.cfg.topology;
    s.map = std::make_unique<AddressMap>(t.regions, t.decoders, t.mode, t.cpu_nodes, t.page_size);
    for (const auto& dc : t.devices) {
        s.devices.push_back(std::make_unique<CxlMemDevice>(dc, s.map.get()));
        s.devices.back()->adopt_regions(*s.map);
    }
    return s;
}

std::string topology_text(const NumaTopology& topo)
{
    std::string out = fmt::format("mode: {}\n", to_string(topo.mode));
    for (const auto& n : topo.nodes) {
        out += fmt::format("node{}: {} bytes={} ({} MiB)\n", n.node_id, n.has_cpus ? "cpus" : "cpu-less", n.bytes(),
                           n.bytes() / MiB);
        for (const auto& r : n.regions)
            out += fmt::format("  {} [{:#x}, {:#x}) {}\n", r.name, r.base, r.end(), to_string(r.kind));
    }
    return out;
}

ordered_json topology_json(const NumaTopology& topo)
{
    ordered_json j;
    j["mode"] = std::string(to_string(topo.mode));
    j["nodes"] = ordered_json::array();
    for (const auto& n : topo.nodes) {
        ordered_json nj{{"node", n.node_id}, {"has_cpus", n.has_cpus}, {"bytes", n.bytes()}};
        nj["regions"] = ordered_json::array();
        for (const auto& r : n.regions)
            nj["regions"].push_back(ordered_json{{"name", r.name},
                                                 {"base", fmt::format("{:#x}", r.base)},
                                                 {"size", r.size},
                                                 {"kind", std::string(to_string(r.kind))}});
        j["nodes"].push_back(nj);
    }
    return j;
}

int cmd_memdev_list(const std::string& path, bool json, std::ostream& out)
{
    auto s = memdev_setup(path);
    ordered_json j = ordered_json::array();
    for (const auto& d : s.devices) {
        const auto& c = d->config();
        if (json) {
            j.push_back(ordered_json{{"id", c.id},
                                     {"name", fmt::format("mem{}", c.id)},
                                     {"capacity_bytes", c.capacity},
                                     {"online_bytes", d->state().online_bytes},
                                     {"hdm_decoders", c.hdm_decoders},
                                     {"serial", c.serial},
                                     {"host_bridge", c.host_bridge_uid}});
        } else {
            out << fmt::format("mem{} capacity_bytes={} online_bytes={} hdm_decoders={} serial={:#x} host_bridge={}\n",
                               c.id, c.capacity, d->state().online_bytes, c.hdm_decoders, c.serial, c.host_bridge_uid);
        }
    }
    if (json)
        out << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_memdev_identify(const std::string& path, unsigned id, std::ostream& out)
{
    auto s = memdev_setup(path);
    auto& dev = s.device(id);
    Engine engine;
    dev.attach(engine);
    const auto res = run_mailbox_command(engine, dev, mbox::kIdentify);
    if (res.return_code != mbox::kSuccess)
        throw Exit{kExitFailure, fmt::format("IDENTIFY returned {:#06x}", res.return_code)};
    const auto info = IdentifyInfo::decode(res.payload);
    std::string hex;
    for (auto b : res.payload)
        hex += fmt::format("{:02x}", b);
    ordered_json j{{"device", id},
                   {"opcode", fmt::format("{:#06x}", mbox::kIdentify)},
                   {"return_code", res.return_code},
                   {"fw_revision", info.fw_revision},
                   {"capacity_bytes", info.total_capacity},
                   {"volatile_bytes", info.volatile_capacity},
                   {"persistent_bytes", info.persistent_capacity},
                   {"partition_alignment_bytes", info.partition_alignment},
                   {"lsa_size", info.lsa_size},
                   {"completed_at_ns", ticks_to_ns(engine.last_dispatch())},
                   {"payload_hex", hex}};
    out << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_memdev_online(const std::string& path, unsigned id, const std::vector<std::string>& sizes,
                      const std::vector<std::string>& modes, bool json, std::ostream& out)
{
    auto s = memdev_setup(path);
    auto& dev = s.device(id);
    s.map->remove_regions_of_device(id);
    dev.offline_all();
    if (modes.size() > sizes.size() + 1 || (modes.size() == sizes.size() + 1 && modes.back() != "flat"))
        throw Exit{kExitUsage, "every --mode needs a --size, except a final flat remainder"};
    const unsigned dram_node = s.cfg.topology.cpu_nodes.empty() ? 0 : *s.cfg.topology.cpu_nodes.begin();
    const std::size_t steps = std::max(sizes.size(), modes.size());
    if (steps == 0)
        throw Exit{kExitUsage, "online needs --size"};
    for (std::size_t i = 0; i < steps; ++i) {
        const std::string mode_s = i < modes.size() ? modes[i] : (modes.empty() ? "znuma" : modes.back());
        NumaMode mode;
        if (mode_s == "znuma")
            mode = NumaMode::Znuma;
        else if (mode_s == "flat")
            mode = NumaMode::Flat;
        else
            throw Exit{kExitUsage, fmt::format("mode '{}' is not znuma or flat", mode_s)};
        std::uint64_t bytes = 0;
        if (i < sizes.size()) {
            const auto v = parse_size(nlohmann::json(sizes[i]));
            if (!v)
                throw Exit{kExitUsage, fmt::format("size '{}' is not a byte count", sizes[i])};
            bytes = *v;
        } else {
            bytes = dev.state().capacity - dev.state().online_bytes;
        }
        const auto region = dev.online_memory(*s.map, bytes, mode, dram_node);
        logger()->info("onlined {} ({} bytes) as {}", region.name, region.size, to_string(mode));
    }
    const auto topo = s.map->topology();
    if (json)
        out << topology_json(topo).dump(2) << "\n";
    else
        out << topology_text(topo);
    return kExitOk;
}

int cmd_memdev_regs(const std::string& path, unsigned id, bool markdown, std::ostream& out)
{
    auto s = memdev_setup(path);
    auto& dev = s.device(id);
    if (markdown) {
        out << register_map_markdown(dev.regs().layout());
        return kExitOk;
    }
    for (const auto& r : dev.regs().layout())
        out << fmt::format("{:<7} {:#07x} {:>3} {:<28} value={:#x}\n", to_string(r.space), r.offset, r.size, r.name,
                           r.size <= 8 ? dev.regs().value(r) : 0);
    return kExitOk;
}

int cmd_tables_build(const std::string& path, const std::string& out_dir, std::ostream& out)
{
    const auto cfg = load_or_exit(path);
    const auto& t = cfg.topology;
    AddressMap map(t.regions, t.decoders, t.mode, t.cpu_nodes, t.page_size);
    const auto tables = build_tables(map, t.platform);
    ensure_dir(out_dir);
    for (const auto& [name, bytes] : table_blobs(tables)) {
        const auto p = fs::path(out_dir) / name;
        write_file(p.string(), std::string(bytes.begin(), bytes.end()));
        write_file(p.string() + ".hex", hexdump(bytes));
        out << fmt::format("{} ({} bytes)\n", p.string(), bytes.size());
    }
    const auto dsdt = fs::path(out_dir) / "dsdt.txt";
    write_file(dsdt.string(), serialize(tables.dsdt));
    out << dsdt.string() << "\n";
    return kExitOk;
}

int cmd_tables_parse(const std::vector<std::string>& files, std::ostream& out)
{
    int rc = kExitOk;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        if (!in)
            throw Exit{kExitUsage, fmt::format("cannot open {}", f)};
        const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        out << "== " << f << "\n";
        if (fs::path(f).extension() == ".txt") {
            const auto d = parse_dsdt_sidecar(text);
            const auto again = serialize(d);
            out << again;
            const bool same = again == text;
            out << (same ? "round-trip: OK\n" : "round-trip: MISMATCH\n");
            rc = same ? rc : kExitFailure;
            continue;
        }
        const Bytes bytes(text.begin(), text.end());
        const auto table = parse_any(bytes);
        out << describe(table);
        const bool same = serialize_any(table) == bytes;
        out << (same ? "round-trip: OK\n" : "round-trip: MISMATCH\n");
        rc = same ? rc : kExitFailure;
    }
    return rc;
}

} // namespace

std::string register_map_markdown(const std::vector<RegisterDef>& layout)
{
    std::string out = "# Register map\n\n"
                      "Generated by `cxlsim memdev regs --markdown` for the default device "
                      "(1 GiB, one HDM decoder). Offsets are bytes into the 4 KiB configuration "
                      "space or into BAR0.\n\n"
                      "| Space | Offset | Size | Register | Set | Writable mask | Reset | Side effect |\n"
                      "|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : layout)
        out += fmt::format("| {} | {:#07x} | {} | `{}` | {} | {:#x} | {:#x} | {} |\n", to_string(r.space), r.offset,
                           r.size, r.name, to_string(r.set), r.writable_mask, r.reset, r.side_effect ? "yes" : "");
    return out;
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"cxlsim: CXL Type-3 memory expansion simulator", "cxlsim"};
    app.require_subcommand(1);

    std::string config, out_dir = "out", footprints = "2,4,6,8", ratios = "1:0,3:1,1:1,1:3";
    bool log = false, json = false, markdown = false;
    unsigned jobs = 1, device = 0;
    std::vector<std::string> sizes, modes, files;

    auto* validate = app.add_subcommand("validate", "Check a run config");
    validate->add_option("config", config, "Run config (JSON)")->required();

    auto* run = app.add_subcommand("run", "Run one experiment and write stats.json");
    run->add_option("config", config, "Run config (JSON)")->required();
    run->add_option("--out", out_dir, "Output directory");
    run->add_flag("--log", log, "Also write the event dispatch log to events.log");

    auto* sweep = app.add_subcommand("sweep", "Run a footprint x interleave grid and write sweep.csv");
    sweep->add_option("config", config, "Base run config with a stream workload")->required();
    sweep->add_option("--footprints", footprints, "Comma-separated multiples of the L2 size");
    sweep->add_option("--ratios", ratios, "Comma-separated DRAM:CXL page ratios");
    sweep->add_option("--out", out_dir, "Output directory");
    sweep->add_option("--jobs", jobs, "Cells to run in parallel")->check(CLI::Range(1u, 256u));

    auto* memdev = app.add_subcommand("memdev", "Device management");
    memdev->require_subcommand(1);
    auto* list = memdev->add_subcommand("list", "List devices and capacities");
    list->add_option("config", config)->required();
    list->add_flag("--json", json);
    auto* identify = memdev->add_subcommand("identify", "Issue IDENTIFY through the mailbox");
    identify->add_option("config", config)->required();
    identify->add_option("--device", device);
    auto* online = memdev->add_subcommand("online", "Online device capacity and print the NUMA topology");
    online->add_option("config", config)->required();
    online->add_option("--device", device);
    online->add_option("--size", sizes, "Bytes to online (repeatable; 512MiB, 0x20000000, ...)");
    online->add_option("--mode", modes, "znuma or flat (repeatable, pairs with --size)");
    online->add_flag("--json", json);
    auto* regs = memdev->add_subcommand("regs", "Dump the register file");
    regs->add_option("config", config)->required();
    regs->add_option("--device", device);
    regs->add_flag("--markdown", markdown);

    auto* tables = app.add_subcommand("tables", "Firmware tables");
    tables->require_subcommand(1);
    auto* build = tables->add_subcommand("build", "Emit ACPI/E820 blobs for a topology");
    build->add_option("config", config)->required();
    build->add_option("--out", out_dir);
    auto* parse = tables->add_subcommand("parse", "Decode and round-trip table blobs");
    parse->add_option("files", files)->required();

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*validate)
            return cmd_validate(config, out);
        if (*run)
            return cmd_run(config, out_dir, log, out);
        if (*sweep)
            return cmd_sweep(config, footprints, ratios, out_dir, jobs, out);
        if (*list)
            return cmd_memdev_list(config, json, out);
        if (*identify)
            return cmd_memdev_identify(config, device, out);
        if (*online)
            return cmd_memdev_online(config, device, sizes, modes, json, out);
        if (*regs)
            return cmd_memdev_regs(config, device, markdown, out);
        if (*build)
            return cmd_tables_build(config, out_dir, out);
        if (*parse)
            return cmd_tables_parse(files, out);
    } catch (const Exit& e) {
        err << "error: " << e.message << "\n";
        return e.code;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

} // namespace cxlsim
