#pragma once

// Install/run split timing for the bundled fixtures. Each repeat uses a fresh
// engine: verify alone, then the first trigger (verifies + runs), then warm
// triggers that hit the already-verified container.

#include <algorithm>
#include <chrono>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "femto/assembler.hpp"
#include "femto/engine.hpp"
#include "femto/fixtures.hpp"

namespace femto::bench {

struct Result {
    std::string fixture;
    std::size_t repeat = 0;
    std::uint64_t verify_ns = 0;
    std::uint64_t first_run_ns = 0;
    std::uint64_t warm_run_ns = 0;
    std::uint64_t instructions = 0;
    bool instructions_stable = true;
    double ns_per_instruction = 0;
    std::uint64_t verifications_after_first = 0;
    std::uint64_t verifications_after_warm = 0;
    std::uint64_t warm_runs = 0;

    [[nodiscard]] nlohmann::json to_json() const {
        return {{"fixture", fixture},
                {"repeat", repeat},
                {"verify_ns", verify_ns},
                {"first_run_ns", first_run_ns},
                {"warm_run_ns", warm_run_ns},
                {"instructions", instructions},
                {"instructions_stable", instructions_stable},
                {"ns_per_instruction", ns_per_instruction},
                {"verifications_after_first", verifications_after_first},
                {"verifications_after_warm", verifications_after_warm},
                {"warm_runs", warm_runs}};
    }
};

inline std::vector<std::string> fixture_names() { return {"fletcher32_360", "thread_counter", "sensor_reader"}; }

namespace detail {

struct Setup {
    isa::Program program;
    HookSpec hook;
    Contract contract;
    EventPayload payload;
    std::vector<std::int64_t> samples;
};

inline Setup setup_for(const std::string& name) {
    Setup s;
    s.hook.return_policy = ReturnPolicy::AllCollected;
    if (name == "fletcher32_360") {
        s.program = isa::assemble(fixtures::fletcher32_asm());
        s.hook.name = "bench.fletcher32";
        s.hook.context_template = {{"data", 360, false}};
        s.contract.regions = {{"data", true, false}};
        s.payload["data"] = fixtures::fletcher32_input();
    } else if (name == "thread_counter") {
        s.program = isa::assemble(fixtures::thread_counter_asm());
        s.hook.name = "bench.thread_switch";
        s.hook.allowed_syscalls = {syscall::kContainerPut, syscall::kContainerGet};
        s.hook.context_template = {{"ctx", 16, false}};
        s.contract.syscalls = s.hook.allowed_syscalls;
        s.contract.regions = {{"ctx", true, false}};
        Bytes ctx(16, 0);
        ctx[0] = 1;
        ctx[8] = 2;
        s.payload["ctx"] = ctx;
    } else if (name == "sensor_reader") {
        s.program = isa::assemble(fixtures::sensor_reader_asm());
        s.hook.name = "bench.timer";
        s.hook.allowed_syscalls = {syscall::kContainerPut, syscall::kContainerGet, syscall::kTenantPut, syscall::kSensorRead};
        s.contract.syscalls = s.hook.allowed_syscalls;
        s.samples = {10, 20, 30, 40};
    } else {
        throw Error("unknown bench fixture '" + name + "'");
    }
    return s;
}

inline std::uint64_t median(std::vector<std::uint64_t> v) {
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    return v.size() % 2 ? v[v.size() / 2] : (v[v.size() / 2 - 1] + v[v.size() / 2]) / 2;
}

template <class F>
std::uint64_t time_ns(F&& f) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    auto t1 = std::chrono::steady_clock::now();
    return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
}

} // namespace detail

/// `warm` triggers follow the first one in every repeat.
inline Result run(const std::string& fixture, std::size_t repeat = 25, std::size_t warm = 8,
                  const VerifyLimits& limits = {}) {
    if (repeat == 0 || warm == 0) throw Error("bench needs at least one repeat and one warm run");
    auto setup = detail::setup_for(fixture);
    Result r;
    r.fixture = fixture;
    r.repeat = repeat;
    std::vector<std::uint64_t> verify, first, warm_times, per_instruction;
    std::optional<std::uint64_t> instructions;

    for (std::size_t i = 0; i < repeat; ++i) {
        verify.push_back(detail::time_ns([&] {
            auto res = femto::verify(setup.program, limits, setup.hook.allowed_syscalls);
            if (!std::holds_alternative<VerifiedProgram>(res)) throw Error("bench fixture failed verification");
        }));

        EngineConfig cfg;
        cfg.limits = limits;
        Engine engine(cfg);
        engine.sensors().set(1, setup.samples);
        auto tenant = engine.register_tenant("bench", crypto::PublicKey{});
        auto hook = engine.register_hook(setup.hook);
        auto id = engine.install_container(tenant, setup.program, setup.contract, hook);

        first.push_back(detail::time_ns([&] { (void)engine.trigger_hook(hook, setup.payload); }));
        r.verifications_after_first = engine.stats(id).verifications;

        for (std::size_t w = 0; w < warm; ++w) {
            TriggerResult tr;
            auto ns = detail::time_ns([&] { tr = engine.trigger_hook(hook, setup.payload); });
            const auto& outcome = tr.runs.at(0).outcome;
            if (!outcome || outcome->fault) throw Error("bench fixture faulted");
            warm_times.push_back(ns);
            if (w == 0) {
                if (instructions && *instructions != outcome->executed) r.instructions_stable = false;
                instructions = outcome->executed;
                if (outcome->executed) per_instruction.push_back(ns * 1000 / outcome->executed);
            }
        }
        r.verifications_after_warm = engine.stats(id).verifications;
        r.warm_runs = engine.stats(id).runs - 1;
    }
    r.verify_ns = detail::median(verify);
    r.first_run_ns = detail::median(first);
    r.warm_run_ns = detail::median(warm_times);
    r.instructions = instructions.value_or(0);
    r.ns_per_instruction = static_cast<double>(detail::median(per_instruction)) / 1000.0;
    return r;
}

} // namespace femto::bench
