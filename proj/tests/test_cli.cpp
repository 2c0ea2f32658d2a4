#include <catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "femto/fixtures.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result femtoc(const std::string& args) {
    const std::string cmd = std::string(FEMTOC_PATH) + " " + args + " 2>&1";
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe);
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("femtoc-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name, const std::string& content) const {
        auto p = path / name;
        std::ofstream(p, std::ios::binary) << content;
        return p.string();
    }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string read_file(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string as_string(const femto::Bytes& b) { return {b.begin(), b.end()}; }

} // namespace

TEST_CASE("cli: asm writes eight bytes per slot and disasm reads them back") {
    TempDir d;
    auto src = d.file("exit.asm", "exit\n");
    REQUIRE(femtoc("asm " + src + " -o " + (d / "exit.bin")).code == 0);
    CHECK(read_file(d / "exit.bin") == std::string("\x95\0\0\0\0\0\0\0", 8));
    auto dis = femtoc("disasm " + (d / "exit.bin"));
    CHECK(dis.code == 0);
    CHECK(dis.out == "exit\n");
}

TEST_CASE("cli: assembler errors exit 2 with the line") {
    TempDir d;
    auto src = d.file("bad.asm", "exit\nfoo r1\n");
    auto r = femtoc("asm " + src + " -o " + (d / "bad.bin"));
    CHECK(r.code == 2);
    CHECK(r.out.find("line 2") != std::string::npos);
    CHECK(femtoc("no-such-command").code == 2);
}

TEST_CASE("cli: verify accepts, rejects with exit 1 and emits json") {
    TempDir d;
    auto good = d.file("good.asm", "mov64 r0, 1\nexit\n");
    auto bad = d.file("bad.asm", "mov64 r10, 1\nexit\n");
    auto ok = femtoc("verify " + good);
    CHECK(ok.code == 0);
    CHECK(ok.out == "OK\n");
    auto rej = femtoc("verify " + bad);
    CHECK(rej.code == 1);
    CHECK(rej.out.find("WriteToR10") != std::string::npos);
    auto j = json::parse(femtoc("--format json verify " + bad).out);
    CHECK(j["ok"] == false);
    CHECK(j["errors"][0]["kind"] == "WriteToR10");
    CHECK(j["errors"][0]["slot"] == 0);
}

TEST_CASE("cli: run computes fletcher32 on a context file") {
    TempDir d;
    auto src = d.file("f.asm", femto::fixtures::fletcher32_asm());
    const auto input = femto::fixtures::fletcher32_input();
    auto ctx = d.file("in.bin", as_string(input));
    auto r = femtoc("--format json run " + src + " --ctx-file " + ctx);
    REQUIRE(r.code == 0);
    auto j = json::parse(r.out);
    CHECK(j["return_value"] == femto::testing::fletcher32_reference(input));
    CHECK(j["fault"].is_null());
}

TEST_CASE("cli: faults and budget exhaustion exit 3") {
    TempDir d;
    auto loop = d.file("loop.asm", "top:\nja top\nexit\n");
    auto r = femtoc("run " + loop + " --budget 10");
    CHECK(r.code == 3);
    CHECK(r.out.find("BudgetExceeded") != std::string::npos);
    auto hostile = d.file("h.asm", femto::fixtures::hostile_writer_asm());
    auto h = femtoc("run " + hostile);
    CHECK(h.code == 3);
    CHECK(h.out.find("MemoryViolation") != std::string::npos);
    CHECK(femtoc("run " + d.file("bad.asm", "exit\nmov64 r10, 0\nexit\n")).code == 1);
}

TEST_CASE("cli: limits are configurable") {
    TempDir d;
    auto src = d.file("f.asm", femto::fixtures::filler_asm(40));
    CHECK(femtoc("verify " + src).code == 0);
    auto r = femtoc("--limits 32,8 verify " + src);
    CHECK(r.code == 1);
    CHECK(r.out.find("TooLong") != std::string::npos);
}

TEST_CASE("cli: scenario run reports and exits by outcome") {
    TempDir d;
    auto ok = femtoc("scenario run " + std::string(SCENARIO_DIR) + "/threadcount.json --report " + (d / "r.json"));
    CHECK(ok.code == 0);
    auto report = json::parse(read_file(d / "r.json"));
    CHECK(report["passed"] == true);

    auto doc = json::parse(read_file(std::string(SCENARIO_DIR) + "/threadcount.json"));
    doc["assertions"][0]["equals"] = 999;
    auto failing = d.file("fail.json", doc.dump());
    CHECK(femtoc("scenario run " + failing).code == 3);
    CHECK(femtoc("scenario run " + d.file("broken.json", "{")).code == 2);
}

TEST_CASE("cli: bench emits json with the verify and run split") {
    auto r = femtoc("--format json bench fletcher32_360 --repeat 3 --warm 2");
    REQUIRE(r.code == 0);
    auto j = json::parse(r.out);
    CHECK(j["fixture"] == "fletcher32_360");
    CHECK(j["verifications_after_warm"] == 1);
    CHECK(j["instructions_stable"] == true);
    CHECK(j.contains("verify_ns"));
    CHECK(j.contains("warm_run_ns"));
    CHECK(femtoc("bench nope").code == 2);
}

TEST_CASE("cli: keygen, sign and apply an update") {
    TempDir d;
    const std::string seed(64, 'a');
    REQUIRE(femtoc("keygen --seed " + seed + " -o " + (d / "k.json")).code == 0);
    auto key = json::parse(read_file(d / "k.json"));
    REQUIRE(femtoc("keygen --seed " + seed + " -o " + (d / "k2.json")).code == 0);
    CHECK(read_file(d / "k2.json") == read_file(d / "k.json"));

    json scenario = {{"schema_version", 1},
                     {"seed", 5},
                     {"hooks", json::array({{{"name", "timer.1s"}, {"allowed_syscalls", json::array()}, {"return_policy", "all_collected"}}})},
                     {"tenants", json::array({{{"name", "ops"}, {"public_key", key["public_key"]}}})},
                     {"setup", json::array()},
                     {"events", json::array()}};
    auto sc = d.file("s.json", scenario.dump());
    auto inspect = json::parse(femtoc("scenario inspect " + sc).out);
    const std::string tenant = inspect["tenants"][0]["id"], hook = inspect["hooks"][0]["id"];

    auto payload = d.file("p.asm", "mov64 r0, 3\nexit\n");
    auto sign = femtoc("sign --key " + (d / "k.json") + " --tenant " + tenant + " --hook " + hook + " --sequence 1 --payload " +
                       payload + " -o " + (d / "m.json"));
    REQUIRE(sign.code == 0);
    auto good = femtoc("--format json apply " + sc + " " + (d / "m.json") + " " + payload);
    CHECK(good.code == 0);
    CHECK(json::parse(good.out)["accepted"] == true);

    auto tampered = d.file("t.asm", "mov64 r0, 4\nexit\n");
    auto bad = femtoc("--format json apply " + sc + " " + (d / "m.json") + " " + tampered);
    CHECK(bad.code == 4);
    auto j = json::parse(bad.out);
    CHECK(j["reason"] == "DigestMismatch");
    CHECK(j["state_unchanged"] == true);

    // signed by a different key
    REQUIRE(femtoc("keygen --seed " + std::string(64, 'b') + " -o " + (d / "other.json")).code == 0);
    REQUIRE(femtoc("sign --key " + (d / "other.json") + " --tenant " + tenant + " --hook " + hook + " --sequence 1 --payload " +
                   payload + " -o " + (d / "forged.json"))
                .code == 0);
    auto forged = femtoc("--format json apply " + sc + " " + (d / "forged.json") + " " + payload);
    CHECK(forged.code == 4);
    CHECK(json::parse(forged.out)["reason"] == "BadSignature");
}

TEST_CASE("cli: fixtures export writes sources and binaries") {
    TempDir d;
    REQUIRE(femtoc("fixtures export " + d.path.string()).code == 0);
    for (const auto& name : femto::fixtures::names()) {
        CHECK(fs::exists(d.path / (name + ".asm")));
        CHECK(fs::exists(d.path / (name + ".bin")));
    }
    CHECK(fs::file_size(d.path / "fletcher32_input.bin") == 360);
}
