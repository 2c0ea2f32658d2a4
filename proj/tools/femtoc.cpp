// femtoc: assembler, verifier, runner, scenario driver, update tooling and
// benchmarks on the command line.
//
// Exit codes: 0 success, 1 verifier reject, 2 usage or parse error,
// 3 runtime fault (or failed scenario assertion), 4 update rejected.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "femto/assembler.hpp"
#include "femto/bench.hpp"
#include "femto/crypto.hpp"
#include "femto/engine.hpp"
#include "femto/facilities.hpp"
#include "femto/fixtures.hpp"
#include "femto/scenario.hpp"
#include "femto/update.hpp"
#include "femto/verifier.hpp"
#include "femto/vm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kVerifyReject = 1, kUsage = 2, kFault = 3, kUpdateReject = 4 };

struct ExitError {
    int code;
    std::string message;
};

[[noreturn]] void fail(int code, std::string message) { throw ExitError{code, std::move(message)}; }

struct Globals {
    std::string limits;
    std::string format = "text";
    bool json() const { return format == "json"; }
};

femto::VerifyLimits parse_limits(const std::string& text, const std::string& origin) {
    auto comma = text.find(',');
    auto bad = [&] { fail(kUsage, origin + ": expected Ni,Nb, got '" + text + "'"); };
    if (comma == std::string::npos) bad();
    femto::VerifyLimits l;
    try {
        std::size_t used = 0;
        l.max_instructions = std::stoull(text.substr(0, comma), &used);
        if (used != comma) bad();
        auto rest = text.substr(comma + 1);
        l.max_branches = std::stoull(rest, &used);
        if (used != rest.size()) bad();
        l.validate();
    } catch (const std::exception&) {
        bad();
    }
    return l;
}

femto::VerifyLimits limits_from(const Globals& g) {
    if (!g.limits.empty()) return parse_limits(g.limits, "--limits");
    if (const char* env = std::getenv("FEMTOC_LIMITS"); env && *env) return parse_limits(env, "FEMTOC_LIMITS");
    return {};
}

femto::Bytes read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(kUsage, "cannot open " + p.string());
    return femto::Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string read_text(const fs::path& p) {
    auto b = read_file(p);
    return std::string(b.begin(), b.end());
}

void write_file(const fs::path& p, femto::ByteView data) {
    std::ofstream out(p, std::ios::binary);
    if (!out) fail(kUsage, "cannot write " + p.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

void write_text(const fs::path& p, const std::string& text) {
    write_file(p, femto::ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

/// .asm files are assembled, anything else is raw bytecode.
femto::isa::Program load_program(const fs::path& p) {
    try {
        if (p.extension() == ".asm") return femto::isa::assemble(read_text(p));
        return femto::isa::Program::from_bytes(read_file(p));
    } catch (const femto::isa::AsmError& e) {
        fail(kUsage, p.string() + ": " + e.what());
    } catch (const femto::Error& e) {
        fail(kUsage, p.string() + ": " + e.what());
    }
}

std::set<std::uint32_t> parse_syscalls(const std::string& text) {
    if (text.empty() || text == "all") return femto::syscall::standard_ids();
    if (text == "none") return {};
    std::set<std::uint32_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto v = femto::isa::detail::parse_integer(item);
        if (!v || *v < 0 || *v > 0xffffffff) fail(kUsage, "bad helper id '" + item + "'");
        out.insert(static_cast<std::uint32_t>(*v));
    }
    return out;
}

json errors_json(const std::vector<femto::VerifyError>& errors) {
    json out = json::array();
    for (const auto& e : errors)
        out.push_back({{"kind", femto::to_string(e.kind)}, {"slot", e.slot_index}, {"instruction", e.instruction},
                       {"detail", e.detail}});
    return out;
}

void print(const Globals& g, const json& j, const std::string& text) {
    if (g.json()) std::cout << j.dump(2) << "\n";
    else std::cout << text;
}

// ---- asm / disasm -------------------------------------------------------

int cmd_asm(const Globals& g, const fs::path& in, fs::path out) {
    if (out.empty()) out = fs::path(in).replace_extension(".bin");
    femto::isa::Program p;
    try {
        p = femto::isa::assemble(read_text(in));
    } catch (const femto::isa::AsmError& e) {
        fail(kUsage, in.string() + ": " + e.what());
    }
    write_file(out, p.to_bytes());
    print(g, {{"output", out.string()}, {"slots", p.size()}, {"bytes", p.byte_len()}},
          out.string() + ": " + std::to_string(p.size()) + " slots\n");
    return kOk;
}

int cmd_disasm(const Globals& g, const fs::path& in, const fs::path& out) {
    auto text = femto::isa::disassemble(load_program(in));
    if (!out.empty()) write_text(out, text);
    else print(g, {{"text", text}}, text);
    return kOk;
}

// ---- verify / run -------------------------------------------------------

int cmd_verify(const Globals& g, const fs::path& in, const std::string& syscalls) {
    auto p = load_program(in);
    auto limits = limits_from(g);
    auto result = femto::verify(p, limits, parse_syscalls(syscalls));
    if (auto* errs = std::get_if<std::vector<femto::VerifyError>>(&result)) {
        print(g, {{"ok", false}, {"errors", errors_json(*errs)}}, femto::verification_report(*errs));
        return kVerifyReject;
    }
    const auto& vp = std::get<femto::VerifiedProgram>(result);
    print(g,
          {{"ok", true},
           {"errors", json::array()},
           {"slots", p.size()},
           {"budget", vp.budget()},
           {"jump_targets", vp.jump_targets()},
           {"syscalls_used", vp.syscalls_used()}},
          femto::verification_report({}));
    return kOk;
}

struct RegionArg {
    std::string label;
    bool read = false;
    bool write = false;
    femto::Bytes buffer;
};

/// label:len:mode[@hexinit]
RegionArg parse_region(const std::string& spec) {
    auto bad = [&](const std::string& why) { fail(kUsage, "--region '" + spec + "': " + why); };
    RegionArg r;
    auto at = spec.find('@');
    auto head = spec.substr(0, at);
    auto c1 = head.find(':');
    auto c2 = c1 == std::string::npos ? std::string::npos : head.find(':', c1 + 1);
    if (c2 == std::string::npos) bad("expected label:len:mode[@hexinit]");
    r.label = head.substr(0, c1);
    if (r.label.empty()) bad("empty label");
    auto len = femto::isa::detail::parse_integer(head.substr(c1 + 1, c2 - c1 - 1));
    if (!len || *len <= 0 || *len > (1 << 24)) bad("length must be in [1, 16M]");
    auto mode = head.substr(c2 + 1);
    if (mode != "r" && mode != "w" && mode != "rw") bad("mode must be r, w or rw");
    r.read = mode.find('r') != std::string::npos;
    r.write = mode.find('w') != std::string::npos;
    r.buffer.assign(static_cast<std::size_t>(*len), 0);
    if (at != std::string::npos) {
        femto::Bytes init;
        try {
            init = femto::from_hex(spec.substr(at + 1));
        } catch (const femto::Error& e) {
            bad(e.what());
        }
        if (init.size() > r.buffer.size()) bad("initial bytes exceed the region length");
        std::copy(init.begin(), init.end(), r.buffer.begin());
    }
    return r;
}

std::vector<std::int64_t> parse_samples(const std::string& text) {
    std::vector<std::int64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto v = femto::isa::detail::parse_integer(item);
        if (!v) fail(kUsage, "bad sensor sample '" + item + "'");
        out.push_back(*v);
    }
    return out;
}

struct RunArgs {
    fs::path input;
    std::string ctx_hex;
    fs::path ctx_file;
    std::vector<std::string> regions;
    std::vector<std::string> sensors;
    std::string syscalls;
    std::uint64_t budget = 0;
};

int cmd_run(const Globals& g, const RunArgs& a) {
    auto p = load_program(a.input);
    auto limits = limits_from(g);
    auto result = femto::verify(p, limits, parse_syscalls(a.syscalls));
    if (auto* errs = std::get_if<std::vector<femto::VerifyError>>(&result)) {
        print(g, {{"ok", false}, {"errors", errors_json(*errs)}}, femto::verification_report(*errs));
        return kVerifyReject;
    }
    const auto& vp = std::get<femto::VerifiedProgram>(result);

    femto::Bytes ctx;
    if (!a.ctx_hex.empty() && !a.ctx_file.empty()) fail(kUsage, "--ctx and --ctx-file are exclusive");
    try {
        if (!a.ctx_hex.empty()) ctx = femto::from_hex(a.ctx_hex);
    } catch (const femto::Error& e) {
        fail(kUsage, std::string("--ctx: ") + e.what());
    }
    if (!a.ctx_file.empty()) ctx = read_file(a.ctx_file);

    std::vector<RegionArg> args;
    for (const auto& spec : a.regions) args.push_back(parse_region(spec));
    std::vector<femto::vm::MemoryRegion> regions;
    for (auto& r : args) regions.push_back(femto::vm::MemoryRegion::over(r.buffer, r.read, r.write, r.label));
    std::optional<femto::vm::MemoryRegion> ctx_region;
    if (!ctx.empty()) ctx_region = femto::vm::MemoryRegion::over(std::span<const std::uint8_t>(ctx), "ctx");

    femto::StoreRegistry stores;
    femto::VirtualClock clock;
    femto::SensorBank sensors;
    femto::DebugLog log;
    for (const auto& s : a.sensors) {
        auto colon = s.find(':');
        auto id = femto::isa::detail::parse_integer(s.substr(0, colon));
        if (colon == std::string::npos || !id || *id < 0) fail(kUsage, "--sensor expects id:v1,v2,...");
        sensors.set(static_cast<std::uint32_t>(*id), parse_samples(s.substr(colon + 1)));
    }
    std::mt19937_64 rng(0);
    femto::Caller caller{femto::Uuid::random(rng), femto::Uuid::random(rng),
                         {femto::Scope::Container, femto::Scope::Tenant, femto::Scope::Global}};
    stores.create_container_store(caller.container);
    femto::Invocation env{caller, stores, clock, sensors, log};
    auto table = femto::standard_syscall_table();

    const auto budget = a.budget ? a.budget : vp.budget();
    auto out = femto::vm::exec(vp, ctx_region, regions, table, env, budget);

    json regions_json = json::object();
    std::string regions_text;
    for (const auto& r : args) {
        if (!r.write) continue;
        regions_json[r.label] = femto::to_hex(r.buffer);
        regions_text += "region " + r.label + ": " + femto::to_hex(r.buffer) + "\n";
    }
    json fault = nullptr;
    std::string fault_text = "none";
    if (out.fault) {
        fault = {{"kind", femto::vm::to_string(out.fault->kind)},
                 {"pc", out.fault->pc},
                 {"address", out.fault->address},
                 {"location", out.fault->location},
                 {"length", out.fault->length},
                 {"detail", out.fault->detail}};
        fault_text = std::string(femto::vm::to_string(out.fault->kind)) + " at pc " + std::to_string(out.fault->pc) +
                     " (" + out.fault->detail +
                     (out.fault->location.empty() ? "" : " at " + out.fault->location) + ")";
    }
    json logs = json::array();
    for (const auto& e : log.entries()) logs.push_back(e.value);
    print(g,
          {{"return_value", out.return_value},
           {"executed", out.executed},
           {"branches_taken", out.branches_taken},
           {"budget", budget},
           {"fault", fault},
           {"regions", regions_json},
           {"debug_log", logs}},
          "return_value: " + std::to_string(out.return_value) + " (0x" +
              femto::isa::detail::hex_u64(out.return_value).substr(2) + ")\nexecuted: " + std::to_string(out.executed) +
              "\nbranches_taken: " + std::to_string(out.branches_taken) + "\nfault: " + fault_text + "\n" + regions_text);
    return out.ok() ? kOk : kFault;
}

// ---- scenario -----------------------------------------------------------

int cmd_scenario_run(const Globals& g, const fs::path& file, const fs::path& report_path) {
    femto::scenario::Report report;
    try {
        report = femto::scenario::run_scenario_file(file);
    } catch (const femto::scenario::ScenarioError& e) {
        fail(kUsage, file.string() + ": " + e.what());
    }
    if (!report_path.empty()) write_text(report_path, report.dump());
    std::string text;
    for (const auto& a : report.json.at("assertions"))
        text += std::string(a.at("passed").get<bool>() ? "PASS" : "FAIL") + " assertion " +
                std::to_string(a.at("index").get<std::size_t>()) + " " + a.at("check").get<std::string>() + ": " +
                a.at("detail").get<std::string>() + "\n";
    const auto& agg = report.json.at("aggregate");
    text += "runs " + agg.at("total_runs").dump() + ", faults " + agg.at("faults").dump() + ", instructions " +
            agg.at("executed_instructions").dump() + "\n";
    text += report.passed ? "scenario passed\n" : "scenario FAILED\n";
    if (g.json()) std::cout << report.dump();
    else std::cout << text;
    return report.passed ? kOk : kFault;
}

int cmd_scenario_inspect(const Globals& g, const fs::path& file) {
    try {
        auto engine = femto::scenario::prepare_engine(femto::scenario::load_json(file), file.parent_path());
        auto j = engine->introspect();
        print(g, j, j.dump(2) + "\n");
    } catch (const femto::scenario::ScenarioError& e) {
        fail(kUsage, file.string() + ": " + e.what());
    }
    return kOk;
}

// ---- keys and updates ---------------------------------------------------

int cmd_keygen(const Globals& g, const std::string& seed_hex, const fs::path& out) {
    femto::crypto::KeyPair kp;
    if (seed_hex.empty()) {
        kp = femto::crypto::generate_keypair();
    } else {
        try {
            kp = femto::crypto::keypair_from_seed(femto::crypto::fixed_bytes<32>(femto::from_hex(seed_hex), "seed"));
        } catch (const femto::Error& e) {
            fail(kUsage, std::string("--seed: ") + e.what());
        }
    }
    json j = {{"public_key", femto::crypto::base64_encode(kp.public_key)},
              {"secret_key", femto::crypto::base64_encode(kp.secret_key)}};
    if (!out.empty()) {
        write_text(out, j.dump(2) + "\n");
        print(g, {{"output", out.string()}, {"public_key", j["public_key"]}}, "public key " + j["public_key"].get<std::string>() + "\n");
    } else {
        print(g, j, "public_key: " + j["public_key"].get<std::string>() + "\nsecret_key: " + j["secret_key"].get<std::string>() + "\n");
    }
    return kOk;
}

struct SignArgs {
    fs::path key;
    std::string tenant;
    std::string hook;
    std::uint64_t sequence = 0;
    fs::path payload;
    std::string contract = "{}";
    fs::path out;
};

int cmd_sign(const Globals& g, const SignArgs& a) {
    try {
        auto key_json = json::parse(read_text(a.key));
        auto sk = femto::crypto::fixed_bytes<64>(femto::crypto::base64_decode(key_json.at("secret_key").get<std::string>()),
                                                 "secret_key");
        auto contract_text = a.contract;
        if (!contract_text.empty() && contract_text.front() != '{') contract_text = read_text(contract_text);
        auto contract = femto::update::contract_from_json(json::parse(contract_text));
        auto payload = load_program(a.payload).to_bytes();
        auto m = femto::update::make_manifest(femto::Uuid::parse(a.tenant), femto::Uuid::parse(a.hook), a.sequence, payload,
                                              std::move(contract));
        auto sm = femto::update::sign_manifest(m, sk);
        auto j = femto::update::to_json(sm);
        if (!a.out.empty()) write_text(a.out, j.dump(2) + "\n");
        else std::cout << j.dump(2) << "\n";
        if (!a.out.empty()) print(g, {{"output", a.out.string()}}, "signed manifest written to " + a.out.string() + "\n");
    } catch (const json::exception& e) {
        fail(kUsage, std::string("sign: ") + e.what());
    } catch (const femto::Error& e) {
        fail(kUsage, std::string("sign: ") + e.what());
    }
    return kOk;
}

/// Rebuilds the engine from the scenario's setup, then applies the update.
int cmd_apply(const Globals& g, const fs::path& scenario, const fs::path& manifest, const fs::path& payload_path) {
    std::unique_ptr<femto::Engine> engine;
    femto::update::SignedManifest sm;
    femto::Bytes payload;
    try {
        engine = femto::scenario::prepare_engine(femto::scenario::load_json(scenario), scenario.parent_path());
        sm = femto::update::signed_manifest_from_json(json::parse(read_text(manifest)));
        payload = load_program(payload_path).to_bytes();
    } catch (const femto::scenario::ScenarioError& e) {
        fail(kUsage, e.what());
    } catch (const json::exception& e) {
        fail(kUsage, std::string("manifest: ") + e.what());
    } catch (const femto::Error& e) {
        fail(kUsage, e.what());
    }
    const auto before = engine->introspect().dump();
    auto outcome = femto::update::apply_update(*engine, sm, payload);
    const bool unchanged = engine->introspect().dump() == before;
    json j = {{"accepted", outcome.accepted},
              {"container_id", outcome.container_id ? json(outcome.container_id->str()) : json(nullptr)},
              {"reason", outcome.reason ? json(femto::update::to_string(*outcome.reason)) : json(nullptr)},
              {"detail", outcome.detail},
              {"state_unchanged", unchanged}};
    print(g, j,
          outcome.accepted ? "accepted: container " + outcome.container_id->str() + "\n"
                           : "rejected: " + std::string(femto::update::to_string(*outcome.reason)) + " (" + outcome.detail +
                                 ")\n");
    return outcome.accepted ? kOk : kUpdateReject;
}

// ---- bench / fixtures ---------------------------------------------------

int cmd_bench(const Globals& g, const std::string& fixture, std::size_t repeat, std::size_t warm) {
    const auto names = femto::bench::fixture_names();
    if (std::find(names.begin(), names.end(), fixture) == names.end())
        fail(kUsage, "unknown bench fixture '" + fixture + "' (expected fletcher32_360, thread_counter or sensor_reader)");
    auto r = femto::bench::run(fixture, repeat, warm, limits_from(g));
    auto j = r.to_json();
    std::string text;
    for (const auto& [k, v] : j.items()) text += k + ": " + v.dump() + "\n";
    print(g, j, text);
    return kOk;
}

int cmd_fixtures_export(const Globals& g, const fs::path& dir) {
    fs::create_directories(dir);
    json written = json::array();
    for (const auto& name : femto::fixtures::names()) {
        auto src = *femto::fixtures::source(name);
        auto prog = femto::isa::assemble(src);
        write_text(dir / (name + ".asm"), src);
        write_file(dir / (name + ".bin"), prog.to_bytes());
        written.push_back(name);
    }
    write_file(dir / "fletcher32_input.bin", femto::fixtures::fletcher32_input());
    print(g, {{"directory", dir.string()}, {"fixtures", written}},
          "exported " + std::to_string(written.size()) + " fixtures to " + dir.string() + "\n");
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Femto-Container toolchain"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--limits", g.limits, "Verifier limits Ni,Nb (default 4096,256; env FEMTOC_LIMITS)");
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "text"}));

    std::function<int()> action;

    fs::path in, out;
    auto* asm_cmd = app.add_subcommand("asm", "Assemble text into bytecode");
    asm_cmd->add_option("input", in, "Assembler source")->required();
    asm_cmd->add_option("-o,--output", out, "Output .bin (default: input with .bin extension)");
    asm_cmd->callback([&] { action = [&] { return cmd_asm(g, in, out); }; });

    auto* disasm_cmd = app.add_subcommand("disasm", "Disassemble bytecode");
    disasm_cmd->add_option("input", in, "Bytecode file")->required();
    disasm_cmd->add_option("-o,--output", out, "Write text here instead of stdout");
    disasm_cmd->callback([&] { action = [&] { return cmd_disasm(g, in, out); }; });

    std::string syscalls = "all";
    auto* verify_cmd = app.add_subcommand("verify", "Run pre-flight checks");
    verify_cmd->add_option("input", in, ".asm or .bin program")->required();
    verify_cmd->add_option("--syscalls", syscalls, "Allowed helper ids: all, none or a comma list");
    verify_cmd->callback([&] { action = [&] { return cmd_verify(g, in, syscalls); }; });

    RunArgs run;
    run.syscalls = "all";
    auto* run_cmd = app.add_subcommand("run", "Verify and execute a program once");
    run_cmd->add_option("input", run.input, ".asm or .bin program")->required();
    run_cmd->add_option("--ctx", run.ctx_hex, "Read-only context bytes in hex (r1 = base, r2 = length)");
    run_cmd->add_option("--ctx-file", run.ctx_file, "Read-only context bytes from a file");
    run_cmd->add_option("--region", run.regions, "Extra region label:len:r|w|rw[@hexinit]");
    run_cmd->add_option("--sensor", run.sensors, "Sensor samples id:v1,v2,...");
    run_cmd->add_option("--syscalls", run.syscalls, "Allowed helper ids: all, none or a comma list");
    run_cmd->add_option("--budget", run.budget, "Instruction budget (default Ni*Nb)");
    run_cmd->callback([&] { action = [&] { return cmd_run(g, run); }; });

    fs::path report_path;
    auto* scenario_cmd = app.add_subcommand("scenario", "Scenario simulator");
    scenario_cmd->require_subcommand(1);
    auto* scenario_run = scenario_cmd->add_subcommand("run", "Run a scenario file");
    scenario_run->add_option("file", in, "Scenario JSON")->required();
    scenario_run->add_option("--report", report_path, "Write the canonical report here");
    scenario_run->callback([&] { action = [&] { return cmd_scenario_run(g, in, report_path); }; });
    auto* scenario_inspect = scenario_cmd->add_subcommand("inspect", "Show engine state after setup");
    scenario_inspect->add_option("file", in, "Scenario JSON")->required();
    scenario_inspect->callback([&] { action = [&] { return cmd_scenario_inspect(g, in); }; });

    std::string seed_hex;
    auto* keygen_cmd = app.add_subcommand("keygen", "Generate an Ed25519 tenant key pair");
    keygen_cmd->add_option("--seed", seed_hex, "32-byte seed in hex for a deterministic key");
    keygen_cmd->add_option("-o,--output", out, "Write the key pair JSON here");
    keygen_cmd->callback([&] { action = [&] { return cmd_keygen(g, seed_hex, out); }; });

    SignArgs sign;
    auto* sign_cmd = app.add_subcommand("sign", "Sign an update manifest");
    sign_cmd->add_option("--key", sign.key, "Key pair JSON from keygen")->required();
    sign_cmd->add_option("--tenant", sign.tenant, "Tenant UUID")->required();
    sign_cmd->add_option("--hook", sign.hook, "Target hook UUID")->required();
    sign_cmd->add_option("--sequence", sign.sequence, "Sequence number")->required();
    sign_cmd->add_option("--payload", sign.payload, ".asm or .bin payload")->required();
    sign_cmd->add_option("--contract", sign.contract, "Contract JSON, inline or a file path");
    sign_cmd->add_option("-o,--output", sign.out, "Write the signed manifest here");
    sign_cmd->callback([&] { action = [&] { return cmd_sign(g, sign); }; });

    fs::path apply_scenario, apply_manifest, apply_payload;
    auto* apply_cmd = app.add_subcommand("apply", "Apply a signed update to the engine built by a scenario's setup");
    apply_cmd->add_option("scenario", apply_scenario, "Scenario JSON defining hooks, tenants and installs")->required();
    apply_cmd->add_option("manifest", apply_manifest, "Signed manifest JSON")->required();
    apply_cmd->add_option("payload", apply_payload, ".asm or .bin payload")->required();
    apply_cmd->callback([&] { action = [&] { return cmd_apply(g, apply_scenario, apply_manifest, apply_payload); }; });

    std::string bench_fixture;
    std::size_t repeat = 25, warm = 8;
    auto* bench_cmd = app.add_subcommand("bench", "Install/run split timing");
    bench_cmd->add_option("fixture", bench_fixture, "fletcher32_360, thread_counter or sensor_reader")->required();
    bench_cmd->add_option("--repeat", repeat, "Fresh engines to measure (medians are reported)")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--warm", warm, "Warm triggers per repeat")->check(CLI::PositiveNumber);
    bench_cmd->callback([&] { action = [&] { return cmd_bench(g, bench_fixture, repeat, warm); }; });

    fs::path export_dir;
    auto* fixtures_cmd = app.add_subcommand("fixtures", "Bundled fixture programs");
    fixtures_cmd->require_subcommand(1);
    auto* export_cmd = fixtures_cmd->add_subcommand("export", "Write every fixture as .asm and .bin");
    export_cmd->add_option("dir", export_dir, "Target directory")->required();
    export_cmd->callback([&] { action = [&] { return cmd_fixtures_export(g, export_dir); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        return action ? action() : kUsage;
    } catch (const ExitError& e) {
        std::cerr << "femtoc: " << e.message << "\n";
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "femtoc: " << e.what() << "\n";
        return kUsage;
    }
}
