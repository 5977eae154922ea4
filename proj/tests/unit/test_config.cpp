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

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

using namespace cxlsim;
using nlohmann::json;

namespace {

json default_doc() { return json::parse(to_json(default_run_config()).dump()); }

bool mentions(const std::vector<std::string>& v, std::string_view needle)
{
    return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

} // namespace

TEST(Config, DefaultIsValidAndRoundTrips)
{
    const auto cfg = default_run_config();
    EXPECT_TRUE(validate_run_config(cfg).empty());
    const auto doc = to_json(cfg);
    const auto back = parse_run_config(json::parse(doc.dump()));
    ASSERT_TRUE(back.violations.empty()) << back.violations.front();
    EXPECT_EQ(to_json(*back.config).dump(), doc.dump());
}

TEST(Config, ShippedConfigsLoad)
{
    for (const char* name : {"example.json", "memdev.json", "trace.json"}) {
        const auto load = load_run_config(std::string(CXLSIM_SOURCE_DIR) + "/configs/" + name);
        EXPECT_TRUE(load.violations.empty()) << name << ": " << load.violations.front();
    }
}

TEST(Config, SizesAcceptSuffixesAndHex)
{
    EXPECT_EQ(parse_size(json(4096)), 4096u);
    EXPECT_EQ(parse_size(json("0x1000")), 4096u);
    EXPECT_EQ(parse_size(json("512MiB")), 512 * MiB);
    EXPECT_EQ(parse_size(json("1GiB")), 1 * GiB);
    EXPECT_EQ(parse_size(json("4KiB")), 4 * KiB);
    EXPECT_FALSE(parse_size(json("12 bananas")));
    EXPECT_FALSE(parse_size(json(-1)));
    EXPECT_FALSE(parse_size(json(1.5)));
}

TEST(Config, UnknownKeysAreReportedWithPath)
{
    auto doc = default_doc();
    doc["cpu"]["turbo"] = true;
    doc["extra"] = 1;
    const auto load = parse_run_config(doc);
    EXPECT_FALSE(load.config);
    EXPECT_TRUE(mentions(load.violations, "cpu.turbo"));
    EXPECT_TRUE(mentions(load.violations, "extra"));
}

TEST(Config, SchemaVersionMustMatch)
{
    auto doc = default_doc();
    doc["schema_version"] = 2;
    EXPECT_TRUE(mentions(parse_run_config(doc).violations, "schema_version"));
}

TEST(Config, OverlappingRegionsNameBoth)
{
    auto doc = default_doc();
    doc["topology"]["regions"].push_back({{"name", "clash"}, {"base", "0x1000"}, {"size", 4096}, {"kind", "reserved"}});
    const auto v = parse_run_config(doc).violations;
    EXPECT_TRUE(mentions(v, "'clash'"));
    EXPECT_TRUE(mentions(v, "'dram0'"));
}

TEST(Config, SemanticChecks)
{
    auto cfg = default_run_config();
    cfg.cpu.cores = 5;
    cfg.caches.l2.size_bytes = 32 * KiB;
    cfg.topology.devices[0].capacity = 100 * MiB;
    cfg.topology.devices[0].hdm_decoders = 3;
    const auto v = validate_run_config(cfg);
    EXPECT_TRUE(mentions(v, "cpu.cores"));
    EXPECT_TRUE(mentions(v, "caches.l2.size"));
    EXPECT_TRUE(mentions(v, "capacity"));
    EXPECT_TRUE(mentions(v, "hdm_decoders"));
}

TEST(Config, CxlWeightWithoutCxlMemory)
{
    auto cfg = default_run_config();
    cfg.topology.decoders.clear();
    cfg.topology.regions.erase(std::remove_if(cfg.topology.regions.begin(), cfg.topology.regions.end(),
                                              [](const PhysRegion& r) { return r.kind == RegionKind::CxlWindow; }),
                               cfg.topology.regions.end());
    cfg.interleave = InterleavePolicy(1, 1);
    EXPECT_TRUE(mentions(validate_run_config(cfg), "interleave"));
}

TEST(Config, WorkloadVariants)
{
    auto doc = default_doc();
    doc["workload"] = {{"type", "pointer_chase"}, {"elems", 1}, {"stride", 64}, {"pool", "cxl"}, {"shuffle", false}};
    EXPECT_TRUE(mentions(parse_run_config(doc).violations, "workload.elems"));
    doc["workload"] = {{"type", "trace"}, {"path", "missing.csv"}};
    EXPECT_TRUE(mentions(parse_run_config(doc, "/tmp").violations, "not found"));
    doc["workload"] = {{"type", "gups"}};
    EXPECT_FALSE(parse_run_config(doc).violations.empty());
}

TEST(Config, MalformedJsonIsParseError)
{
    const std::string path = ::testing::TempDir() + "bad.json";
    std::ofstream(path) << "{ \"name\": ";
    try {
        read_json_file(path);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ParseError);
    }
    try {
        read_json_file("/nonexistent.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::IoError);
    }
}
