#pragma once

// Deterministic event-stream simulator driving an Engine from a JSON file.
//
// {
//   "schema_version": 1,
//   "seed": 7,
//   "limits": {"max_instructions": 4096, "max_branches": 256},      optional
//   "slot_limit": 16,                                                optional
//   "sensors": [{"id": 1, "samples": [10, 20, 30]}],
//   "hooks": [{"name": "...", "allowed_syscalls": [1, 2],
//              "context": [{"label": "ctx", "size": 16, "mode": "r"}],
//              "return_policy": "ignore_all"}],
//   "tenants": [{"name": "alice"}],                 key derived from seed and name,
//                                                   or "public_key": base64 (cannot sign)
//   "setup": [
//     {"action": "install", "name": "counter", "tenant": "alice", "hook": "...",
//      "fixture": "thread_counter", "params": {...}  |  "asm": "..."  |  "asm_file": "x.asm"  |  "bin_file": "x.bin",
//      "contract": {"syscalls": [1, 2], "regions": [{"label": "ctx", "mode": "r"}]}},
//     {"action": "update", ...install fields..., "sequence": 1,
//      "tamper": "none" | "payload" | "signature" | "wrong_key"},
//     {"action": "remove", "name": "counter"}
//   ],
//   "events": [
//     {"at_ms": 0, "kind": "thread_switch", "hook": "sched.thread_switch", "prev": 1, "next": 2},
//     {"at_ms": 1000, "kind": "timer", "hook": "timer.1s"},
//     {"at_ms": 1500, "kind": "request", "hook": "coap.request", "payload": {"request": {"text": "GET"}}},
//     {"at_ms": 1600, "kind": "hook", "hook": "...", "payload": {"label": {"u64": [1, 2]}}},
//     {"at_ms": 1700, "kind": "sensor", "sensor": 1, "samples": [40]},
//     {"at_ms": 1800, "kind": "advance"}
//   ],
//   "assertions": [
//     {"after": 2, "check": "store", "scope": "container", "container": "counter", "key": 2, "equals": 3},
//     {"check": "store", "scope": "tenant", "tenant": "bob", "key": 1, "equals": 25},
//     {"after": 5, "check": "return", "container": "handler", "equals": 25},
//     {"after": 5, "check": "policy_value", "equals": 25},
//     {"after": 5, "check": "response", "container": "handler", "offset": 0, "equals": 25},
//     {"after": 3, "check": "fault", "container": "evil", "kind": "MemoryViolation"},
//     {"check": "stats", "container": "counter", "verifications": 1, "runs": 10},
//     {"check": "setup", "index": 4, "accepted": false, "reason": "RollbackRejected"}
//   ]
// }
//
// Payload values: {"u64": [...]}, {"u32": [...]}, {"bytes": [...]}, {"hex": "..."},
// {"text": "..."} or {"fixture": "fletcher32_input"}; little-endian, zero-padded
// to the region size. Assertions without "after" run once all events are done;
// "after": -1 runs them after setup.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "femto/assembler.hpp"
#include "femto/crypto.hpp"
#include "femto/engine.hpp"
#include "femto/fixtures.hpp"
#include "femto/update.hpp"

namespace femto::scenario {

inline constexpr int kSchemaVersion = 1;

enum class ScenarioErrorKind { ParseError, UnknownReference };
using ScenarioError = KindedError<ScenarioErrorKind>;

struct Report {
    nlohmann::json json;
    bool passed = true;

    /// Canonical text: sorted keys, two-space indent, trailing newline.
    [[nodiscard]] std::string dump() const { return json.dump(2) + "\n"; }
};

namespace detail {

using nlohmann::json;

[[noreturn]] inline void parse_error(const std::string& msg) { throw ScenarioError(ScenarioErrorKind::ParseError, msg); }
[[noreturn]] inline void unknown(const std::string& what, const std::string& name) {
    throw ScenarioError(ScenarioErrorKind::UnknownReference, "unknown " + what + " '" + name + "'");
}

inline std::uint64_t as_u64(const json& j) {
    if (j.is_string()) {
        auto v = isa::detail::parse_integer(j.get<std::string>());
        if (!v || *v < 0) parse_error("expected non-negative integer, got '" + j.get<std::string>() + "'");
        return static_cast<std::uint64_t>(*v);
    }
    if (j.is_number_integer()) return j.is_number_unsigned() ? j.get<std::uint64_t>() : static_cast<std::uint64_t>(j.get<std::int64_t>());
    parse_error("expected integer, got " + j.dump());
}

inline std::set<std::uint32_t> id_set(const json& j) {
    std::set<std::uint32_t> out;
    for (const auto& v : j) out.insert(static_cast<std::uint32_t>(as_u64(v)));
    return out;
}

inline crypto::KeyPair tenant_keys(std::uint64_t seed, const std::string& name) {
    Bytes material;
    std::string tag = "femto-scenario-tenant";
    material.insert(material.end(), tag.begin(), tag.end());
    for (int i = 7; i >= 0; --i) material.push_back(static_cast<std::uint8_t>(seed >> (8 * i)));
    material.insert(material.end(), name.begin(), name.end());
    return crypto::keypair_from_seed(crypto::sha256(material));
}

inline json fault_json(const std::optional<vm::Fault>& f) {
    if (!f) return nullptr;
    return {{"kind", vm::to_string(f->kind)}, {"pc", f->pc}, {"location", f->location}, {"length", f->length},
            {"detail", f->detail}};
}

struct TenantRecord {
    TenantId id;
    std::optional<crypto::KeyPair> keys;
};

class Runner {
  public:
    Runner(const json& doc, std::filesystem::path base) : doc_(doc), base_(std::move(base)) {}

    /// Engine configuration, hooks, tenants and setup actions; no events.
    void prepare() {
        if (doc_.value("schema_version", 0) != kSchemaVersion)
            parse_error("schema_version must be " + std::to_string(kSchemaVersion));
        EngineConfig cfg;
        seed_ = doc_.contains("seed") ? as_u64(doc_.at("seed")) : 0;
        cfg.seed = seed_;
        if (doc_.contains("limits")) {
            const auto& l = doc_.at("limits");
            cfg.limits.max_instructions = l.contains("max_instructions") ? as_u64(l.at("max_instructions")) : cfg.limits.max_instructions;
            cfg.limits.max_branches = l.contains("max_branches") ? as_u64(l.at("max_branches")) : cfg.limits.max_branches;
        }
        if (doc_.contains("slot_limit")) cfg.slot_limit = as_u64(doc_.at("slot_limit"));
        engine_ = std::make_unique<Engine>(cfg);

        for (const auto& s : doc_.value("sensors", json::array())) {
            std::vector<std::int64_t> samples;
            for (const auto& v : s.at("samples")) samples.push_back(v.get<std::int64_t>());
            engine_->sensors().set(static_cast<std::uint32_t>(as_u64(s.at("id"))), samples);
        }
        for (const auto& h : doc_.value("hooks", json::array())) register_hook(h);
        for (const auto& t : doc_.value("tenants", json::array())) register_tenant(t);

        json setup = json::array();
        const auto& setup_doc = doc_.value("setup", json::array());
        for (std::size_t i = 0; i < setup_doc.size(); ++i) setup.push_back(setup_action(setup_doc[i], i));
        setup_ = setup;
    }

    Report run() {
        prepare();
        const auto assertions = doc_.value("assertions", json::array());
        evaluate(assertions, -1);

        const auto& events = doc_.value("events", json::array());
        std::uint64_t last_ms = 0;
        for (std::size_t i = 0; i < events.size(); ++i) {
            const auto at = as_u64(events[i].value("at_ms", json(0)));
            if (at < last_ms) parse_error("events must be sorted by at_ms (event " + std::to_string(i) + ")");
            last_ms = at;
            event_reports_.push_back(run_event(events[i], i, at));
            evaluate(assertions, static_cast<std::int64_t>(i));
        }
        evaluate(assertions, std::nullopt);

        std::sort(assertion_reports_.begin(), assertion_reports_.end(),
                  [](const json& a, const json& b) { return a.at("index") < b.at("index"); });
        bool passed = true;
        for (const auto& a : assertion_reports_) passed = passed && a.at("passed").get<bool>();

        json log = json::array();
        for (const auto& e : engine_->debug_log().entries())
            log.push_back({{"container", name_of(e.container)}, {"at_ms", e.at_ms}, {"value", e.value}});

        Report r;
        r.passed = passed;
        r.json = {{"schema_version", kSchemaVersion},
                  {"setup", setup_},
                  {"events", event_reports_},
                  {"assertions", assertion_reports_},
                  {"debug_log", log},
                  {"aggregate",
                   {{"total_runs", total_runs_},
                    {"faults", total_faults_},
                    {"executed_instructions", total_executed_},
                    {"trigger_results", trigger_count_}}},
                  {"final", engine_->introspect()},
                  {"passed", passed}};
        return r;
    }

    Engine& engine() { return *engine_; }
    std::unique_ptr<Engine> release() { return std::move(engine_); }
    [[nodiscard]] const nlohmann::json& setup_report() const { return setup_; }

  private:
    const json& doc_;
    std::filesystem::path base_;
    std::uint64_t seed_ = 0;
    std::unique_ptr<Engine> engine_;
    std::map<std::string, HookId> hooks_;
    std::map<std::string, std::vector<ContextField>> templates_;
    std::map<std::string, TenantRecord> tenants_;
    std::map<std::string, ContainerId> containers_;
    json setup_ = json::array();
    json event_reports_ = json::array();
    std::vector<std::optional<TriggerResult>> results_;
    json assertion_reports_ = json::array();
    std::uint64_t total_runs_ = 0, total_faults_ = 0, total_executed_ = 0, trigger_count_ = 0;

    void register_hook(const json& h) {
        HookSpec spec;
        spec.name = h.at("name").get<std::string>();
        spec.allowed_syscalls = id_set(h.value("allowed_syscalls", json::array()));
        for (const auto& f : h.value("context", json::array())) {
            auto mode = f.value("mode", std::string("r"));
            if (mode != "r" && mode != "rw") parse_error("context mode must be r or rw");
            spec.context_template.push_back({f.at("label").get<std::string>(), as_u64(f.at("size")), mode == "rw"});
        }
        spec.return_policy = return_policy_from_string(h.value("return_policy", std::string("ignore_all")));
        templates_[spec.name] = spec.context_template;
        auto name = spec.name;
        hooks_[name] = engine_->register_hook(std::move(spec));
    }

    void register_tenant(const json& t) {
        auto name = t.at("name").get<std::string>();
        TenantRecord rec;
        crypto::PublicKey pub{};
        if (t.contains("public_key")) {
            pub = crypto::fixed_bytes<32>(crypto::base64_decode(t.at("public_key").get<std::string>()), "public_key");
        } else {
            rec.keys = tenant_keys(seed_, name);
            pub = rec.keys->public_key;
        }
        rec.id = engine_->register_tenant(name, pub);
        tenants_[name] = rec;
    }

    const HookId& hook(const std::string& name) const {
        auto it = hooks_.find(name);
        if (it == hooks_.end()) unknown("hook", name);
        return it->second;
    }
    const TenantRecord& tenant(const std::string& name) const {
        auto it = tenants_.find(name);
        if (it == tenants_.end()) unknown("tenant", name);
        return it->second;
    }
    const ContainerId& container(const std::string& name) const {
        auto it = containers_.find(name);
        if (it == containers_.end()) unknown("container", name);
        return it->second;
    }
    std::string name_of(const ContainerId& id) const {
        for (const auto& [n, c] : containers_)
            if (c == id) return n;
        return id.str();
    }

    isa::Program program(const json& a) const {
        try {
            if (a.contains("fixture")) {
                auto name = a.at("fixture").get<std::string>();
                auto src = fixtures::source(name, a.value("params", json::object()));
                if (!src) unknown("fixture", name);
                return isa::assemble(*src);
            }
            if (a.contains("asm")) return isa::assemble(a.at("asm").get<std::string>());
            if (a.contains("asm_file")) return isa::assemble(read_text(base_ / a.at("asm_file").get<std::string>()));
            if (a.contains("bin_file")) {
                auto text = read_text(base_ / a.at("bin_file").get<std::string>());
                return isa::Program::from_bytes(Bytes(text.begin(), text.end()));
            }
        } catch (const isa::AsmError& e) {
            parse_error(std::string("assembly failed: ") + e.what());
        }
        parse_error("setup action needs one of fixture, asm, asm_file or bin_file");
    }

    static std::string read_text(const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) unknown("file", p.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    json setup_action(const json& a, std::size_t index) {
        const auto action = a.at("action").get<std::string>();
        json rec = {{"index", index}, {"action", action}, {"name", a.value("name", std::string())}};
        if (action == "remove") {
            const auto& id = container(a.at("name").get<std::string>());
            engine_->remove_container(id);
            rec["accepted"] = true;
            return rec;
        }
        if (action != "install" && action != "update") parse_error("unknown setup action '" + action + "'");
        const auto name = a.at("name").get<std::string>();
        const auto& t = tenant(a.at("tenant").get<std::string>());
        const auto& h = hook(a.at("hook").get<std::string>());
        auto prog = program(a);
        auto contract = update::contract_from_json(a.value("contract", json::object()));

        if (action == "install") {
            try {
                auto id = engine_->install_container(t.id, std::move(prog), std::move(contract), h);
                containers_[name] = id;
                rec["accepted"] = true;
                rec["container_id"] = id.str();
            } catch (const EngineError& e) {
                rec["accepted"] = false;
                rec["reason"] = e.what();
            }
            return rec;
        }

        if (!t.keys) parse_error("tenant '" + a.at("tenant").get<std::string>() + "' has no signing key");
        auto payload = prog.to_bytes();
        auto manifest = update::make_manifest(t.id, h, as_u64(a.at("sequence")), payload, std::move(contract));
        const auto tamper = a.value("tamper", std::string("none"));
        auto key = t.keys->secret_key;
        if (tamper == "wrong_key") key = tenant_keys(seed_, a.at("tenant").get<std::string>() + "#wrong").secret_key;
        auto sm = update::sign_manifest(manifest, key);
        if (tamper == "signature") sm.signature[0] ^= 0x01;
        if (tamper == "payload" && !payload.empty()) payload[4] ^= 0x01;
        if (tamper != "none" && tamper != "wrong_key" && tamper != "signature" && tamper != "payload")
            parse_error("unknown tamper mode '" + tamper + "'");
        auto outcome = update::apply_update(*engine_, sm, payload);
        rec["accepted"] = outcome.accepted;
        if (outcome.accepted) {
            containers_[name] = *outcome.container_id;
            rec["container_id"] = outcome.container_id->str();
        } else {
            rec["reason"] = update::to_string(*outcome.reason);
        }
        return rec;
    }

    Bytes payload_bytes(const json& spec, std::size_t size) const {
        Bytes out;
        auto put_le = [&](std::uint64_t v, int width) {
            for (int i = 0; i < width; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        };
        if (spec.contains("u64"))
            for (const auto& v : spec.at("u64")) put_le(as_u64(v), 8);
        else if (spec.contains("u32"))
            for (const auto& v : spec.at("u32")) put_le(as_u64(v), 4);
        else if (spec.contains("bytes"))
            for (const auto& v : spec.at("bytes")) put_le(as_u64(v), 1);
        else if (spec.contains("hex"))
            out = from_hex(spec.at("hex").get<std::string>());
        else if (spec.contains("text")) {
            auto s = spec.at("text").get<std::string>();
            out.assign(s.begin(), s.end());
        } else if (spec.contains("fixture")) {
            if (spec.at("fixture") != "fletcher32_input") unknown("payload fixture", spec.at("fixture").dump());
            out = fixtures::fletcher32_input();
        } else {
            parse_error("payload entry needs u64, u32, bytes, hex, text or fixture");
        }
        if (out.size() > size)
            parse_error("payload of " + std::to_string(out.size()) + " bytes exceeds region size " + std::to_string(size));
        out.resize(size, 0);
        return out;
    }

    json run_event(const json& ev, std::size_t index, std::uint64_t at) {
        engine_->clock().advance_to(at);
        const auto kind = ev.at("kind").get<std::string>();
        json rec = {{"index", index}, {"at_ms", at}, {"kind", kind}};
        if (kind == "sensor") {
            std::vector<std::int64_t> samples;
            for (const auto& v : ev.at("samples")) samples.push_back(v.get<std::int64_t>());
            engine_->sensors().append(static_cast<std::uint32_t>(as_u64(ev.at("sensor"))), samples);
            results_.emplace_back(std::nullopt);
            return rec;
        }
        if (kind == "advance") {
            results_.emplace_back(std::nullopt);
            return rec;
        }
        std::string default_hook;
        if (kind == "thread_switch") default_hook = "sched.thread_switch";
        else if (kind == "timer") default_hook = "timer.1s";
        else if (kind == "request") default_hook = "coap.request";
        else if (kind != "hook") parse_error("unknown event kind '" + kind + "'");
        const auto hook_name = ev.contains("hook") ? ev.at("hook").get<std::string>() : default_hook;
        const auto& hid = hook(hook_name);
        const auto& tmpl = templates_.at(hook_name);

        EventPayload payload;
        if (kind == "thread_switch") {
            if (tmpl.empty()) parse_error("thread_switch hook '" + hook_name + "' has no context region");
            json spec = {{"u64", {as_u64(ev.at("prev")), as_u64(ev.at("next"))}}};
            payload[tmpl.front().label] = payload_bytes(spec, tmpl.front().size);
        }
        const auto payload_doc = ev.value("payload", json::object());
        for (const auto& [label, spec] : payload_doc.items()) {
            auto f = std::find_if(tmpl.begin(), tmpl.end(), [&](const ContextField& f) { return f.label == label; });
            if (f == tmpl.end()) unknown("context region", label);
            payload[label] = payload_bytes(spec, f->size);
        }

        auto result = engine_->trigger_hook(hid, payload);
        ++trigger_count_;
        json runs = json::array();
        for (const auto& run : result.runs) {
            json r = {{"container", name_of(run.container_id)}, {"container_id", run.container_id.str()}};
            if (run.outcome) {
                ++total_runs_;
                total_executed_ += run.outcome->executed;
                if (run.outcome->fault) ++total_faults_;
                r["return_value"] = run.outcome->return_value;
                r["executed"] = run.outcome->executed;
                r["branches_taken"] = run.outcome->branches_taken;
                r["fault"] = fault_json(run.outcome->fault);
            } else {
                r["fault"] = nullptr;
                json errs = json::array();
                for (const auto& e : run.verify_errors)
                    errs.push_back({{"kind", to_string(e.kind)}, {"slot", e.slot_index}, {"instruction", e.instruction}});
                r["verify_errors"] = errs;
            }
            json regions = json::object();
            for (const auto& [label, bytes] : run.writable_regions) regions[label] = to_hex(bytes);
            r["regions"] = regions;
            runs.push_back(r);
        }
        rec["hook"] = hook_name;
        rec["results"] = runs;
        rec["policy_value"] = result.policy_value ? json(*result.policy_value) : json(nullptr);
        if (!result.collected.empty()) rec["collected"] = result.collected;
        results_.emplace_back(std::move(result));
        return rec;
    }

    const ContainerRun* run_for(std::optional<std::int64_t> after, const std::string& name, std::string& why) const {
        if (!after || *after < 0 || static_cast<std::size_t>(*after) >= results_.size()) {
            why = "assertion needs an 'after' event index";
            return nullptr;
        }
        const auto& r = results_[static_cast<std::size_t>(*after)];
        if (!r) {
            why = "event " + std::to_string(*after) + " did not trigger a hook";
            return nullptr;
        }
        const auto& id = container(name);
        for (const auto& run : r->runs)
            if (run.container_id == id) return &run;
        why = "container '" + name + "' did not run in event " + std::to_string(*after);
        return nullptr;
    }

    void evaluate(const json& assertions, std::optional<std::int64_t> phase) {
        for (std::size_t i = 0; i < assertions.size(); ++i) {
            const auto& a = assertions[i];
            std::optional<std::int64_t> after;
            if (a.contains("after")) after = a.at("after").get<std::int64_t>();
            if (after != phase) continue;
            std::string detail;
            bool ok = check(a, after, detail);
            assertion_reports_.push_back(
                {{"index", i}, {"after", after ? json(*after) : json(nullptr)}, {"check", a.at("check")}, {"passed", ok}, {"detail", detail}});
        }
    }

    static bool compare_value(std::int64_t actual, const json& expected, std::string& detail) {
        auto want = expected.is_number_unsigned() ? static_cast<std::int64_t>(expected.get<std::uint64_t>())
                                                  : expected.get<std::int64_t>();
        detail = "expected " + std::to_string(want) + ", got " + std::to_string(actual);
        return actual == want;
    }

    bool check(const json& a, std::optional<std::int64_t> after, std::string& detail) const {
        const auto kind = a.at("check").get<std::string>();
        if (kind == "store") {
            const auto scope = scope_from_string(a.at("scope").get<std::string>());
            const auto key = static_cast<std::uint32_t>(as_u64(a.at("key")));
            std::shared_ptr<const KeyValueStore> store;
            if (scope == Scope::Container) store = engine_->stores().container_store(container(a.at("container")));
            else if (scope == Scope::Tenant) store = engine_->stores().tenant_store(tenant(a.at("tenant")).id);
            else store = engine_->stores().global_store();
            return compare_value(store ? store->get(key) : 0, a.at("equals"), detail);
        }
        if (kind == "return" || kind == "response" || kind == "fault") {
            const auto* run = run_for(a.contains("event") ? std::optional(a.at("event").get<std::int64_t>()) : after,
                                      a.at("container").get<std::string>(), detail);
            if (!run) return false;
            if (kind == "fault") {
                const auto want = a.at("kind").get<std::string>();
                std::string got = "none";
                if (!run->outcome) got = "VerifyRejected";
                else if (run->outcome->fault) got = std::string(vm::to_string(run->outcome->fault->kind));
                detail = "expected " + want + ", got " + got;
                return got == want;
            }
            if (!run->outcome || run->outcome->fault) {
                detail = "container did not exit cleanly";
                return false;
            }
            if (kind == "return")
                return compare_value(static_cast<std::int64_t>(run->outcome->return_value), a.at("equals"), detail);
            const auto label = a.value("region", std::string(kResponseRegion));
            auto it = run->writable_regions.find(label);
            const auto offset = a.contains("offset") ? as_u64(a.at("offset")) : 0;
            if (it == run->writable_regions.end() || offset + 8 > it->second.size()) {
                detail = "no writable region '" + label + "' covering offset " + std::to_string(offset);
                return false;
            }
            std::uint64_t v = 0;
            for (int b = 7; b >= 0; --b) v = v << 8 | it->second[offset + static_cast<std::size_t>(b)];
            return compare_value(static_cast<std::int64_t>(v), a.at("equals"), detail);
        }
        if (kind == "policy_value") {
            if (!after || *after < 0 || static_cast<std::size_t>(*after) >= results_.size() || !results_[*after]) {
                detail = "assertion needs an 'after' index of a hook event";
                return false;
            }
            const auto& pv = results_[static_cast<std::size_t>(*after)]->policy_value;
            if (a.at("equals").is_null()) {
                detail = pv ? "expected none, got " + std::to_string(*pv) : "none";
                return !pv;
            }
            if (!pv) {
                detail = "no policy value";
                return false;
            }
            return compare_value(static_cast<std::int64_t>(*pv), a.at("equals"), detail);
        }
        if (kind == "stats") {
            auto s = engine_->stats(container(a.at("container").get<std::string>()));
            bool ok = true;
            for (auto [field, value] : {std::pair{"verifications", s.verifications}, std::pair{"runs", s.runs},
                                        std::pair{"faults", s.faults}, std::pair{"total_executed", s.total_executed}}) {
                if (!a.contains(field)) continue;
                auto want = as_u64(a.at(field));
                if (!detail.empty()) detail += ", ";
                detail += std::string(field) + " " + std::to_string(value) + (value == want ? "" : " != " + std::to_string(want));
                ok = ok && value == want;
            }
            return ok;
        }
        if (kind == "setup") {
            const auto idx = as_u64(a.at("index"));
            if (idx >= setup_.size()) {
                detail = "no setup action " + std::to_string(idx);
                return false;
            }
            const auto& rec = setup_.at(idx);
            bool ok = rec.at("accepted") == a.value("accepted", true);
            if (a.contains("reason")) ok = ok && rec.value("reason", std::string()) == a.at("reason").get<std::string>();
            detail = rec.dump();
            return ok;
        }
        parse_error("unknown assertion check '" + kind + "'");
    }
};

} // namespace detail

inline Report run_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir = {}) {
    try {
        detail::Runner runner(doc, base_dir);
        return runner.run();
    } catch (const nlohmann::json::exception& e) {
        throw ScenarioError(ScenarioErrorKind::ParseError, std::string("malformed scenario: ") + e.what());
    }
}

/// Engine state after setup, for applying updates out of band.
inline std::unique_ptr<Engine> prepare_engine(const nlohmann::json& doc, const std::filesystem::path& base_dir = {}) {
    try {
        detail::Runner runner(doc, base_dir);
        runner.prepare();
        return runner.release();
    } catch (const nlohmann::json::exception& e) {
        throw ScenarioError(ScenarioErrorKind::ParseError, std::string("malformed scenario: ") + e.what());
    }
}

inline nlohmann::json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError(ScenarioErrorKind::UnknownReference, "cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ScenarioError(ScenarioErrorKind::ParseError, path.string() + ": " + e.what());
    }
}

inline Report run_scenario_file(const std::filesystem::path& path) {
    return run_scenario(load_json(path), path.parent_path());
}

} // namespace femto::scenario
