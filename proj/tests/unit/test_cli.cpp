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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cxlsim;
namespace fs = std::filesystem;

namespace {

const std::string kSrc = CXLSIM_SOURCE_DIR;

struct Out {
    int code;
    std::string out;
    std::string err;
};

Out cli(std::vector<std::string> args)
{
    std::ostringstream o, e;
    const int code = cli_main(args, o, e);
    return {code, o.str(), e.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name)
{
    auto p = fs::path(::testing::TempDir()) / ("cxlsim_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

} // namespace

TEST(Cli, UsageErrors)
{
    EXPECT_EQ(cli({}).code, kExitUsage);
    EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
    EXPECT_EQ(cli({"run"}).code, kExitUsage);
    EXPECT_EQ(cli({"validate", "/nonexistent.json"}).code, kExitUsage);
}

TEST(Cli, ValidateReportsViolations)
{
    const auto dir = scratch("validate");
    EXPECT_EQ(cli({"validate", kSrc + "/configs/example.json"}).code, kExitOk);
    std::ofstream(dir / "broken.json") << "{";
    EXPECT_EQ(cli({"validate", (dir / "broken.json").string()}).code, kExitUsage);
    std::ofstream(dir / "bad.json") << R"({"schema_version": 1, "cpu": {"cores": 9}})";
    const auto r = cli({"validate", (dir / "bad.json").string()});
    EXPECT_EQ(r.code, kExitFailure);
    EXPECT_NE(r.err.find("cpu.cores"), std::string::npos);
}

TEST(Cli, RunWritesStats)
{
    const auto dir = scratch("run");
    const auto r = cli({"run", kSrc + "/configs/trace.json", "--out", dir.string(), "--log"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_TRUE(fs::exists(dir / "stats.json"));
    EXPECT_GT(fs::file_size(dir / "events.log"), 0u);
}

TEST(Cli, MemdevSubcommands)
{
    const std::string cfg = kSrc + "/configs/memdev.json";
    auto list = cli({"memdev", "list", cfg});
    EXPECT_EQ(list.code, kExitOk);
    auto id = cli({"memdev", "identify", cfg});
    ASSERT_EQ(id.code, kExitOk) << id.err;
    EXPECT_NE(id.out.find("1073741824"), std::string::npos);
    auto on = cli({"memdev", "online", cfg, "--size", "512MiB", "--mode", "znuma"});
    EXPECT_EQ(on.code, kExitOk) << on.err;
    EXPECT_EQ(cli({"memdev", "online", cfg, "--size", "2GiB", "--mode", "znuma"}).code, kExitFailure);
    EXPECT_EQ(cli({"memdev", "online", cfg, "--size", "100MiB", "--mode", "znuma"}).code, kExitFailure);
    EXPECT_EQ(cli({"memdev", "identify", cfg, "--device", "3"}).code, kExitFailure);
}

TEST(Cli, RegisterMapDocIsInSync)
{
    const auto r = cli({"memdev", "regs", kSrc + "/configs/example.json", "--markdown"});
    ASSERT_EQ(r.code, kExitOk);
    auto doc = slurp(kSrc + "/docs/register_map.md");
    if (doc.rfind("<!--", 0) == 0) // license header
        doc.erase(0, doc.find("-->\n\n") + 5);
    EXPECT_EQ(r.out, doc)
        << "regenerate below the license comment with: cxlsim memdev regs configs/example.json --markdown";
}

TEST(Cli, TablesBuildAndParse)
{
    const auto dir = scratch("tables");
    ASSERT_EQ(cli({"tables", "build", kSrc + "/configs/example.json", "--out", dir.string()}).code, kExitOk);
    std::vector<std::string> args{"tables", "parse"};
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".bin")
            args.push_back(e.path().string());
    ASSERT_GT(args.size(), 2u);
    const auto r = cli(args);
    EXPECT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(r.out.find("MISMATCH"), std::string::npos);
    EXPECT_NE(r.out.find("round-trip: OK"), std::string::npos);

    auto blob = slurp(dir / "srat.bin");
    blob[blob.size() / 2] ^= 0x5A;
    std::ofstream(dir / "bad.bin", std::ios::binary) << blob;
    EXPECT_NE(cli({"tables", "parse", (dir / "bad.bin").string()}).code, kExitOk);
}

TEST(Cli, SweepWritesCsv)
{
    const auto dir = scratch("sweep");
    const auto r = cli({"sweep", kSrc + "/configs/example.json", "--footprints", "0.5", "--ratios", "1:0,1:1",
                        "--out", dir.string(), "--jobs", "2"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto csv = slurp(dir / "sweep.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
    EXPECT_EQ(cli({"sweep", kSrc + "/configs/example.json", "--ratios", "0:1"}).code, kExitUsage);
}
