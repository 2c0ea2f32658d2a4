#pragma once

// Container hosting engine. Hooks are registered up front; tenants install
// containers onto hooks; triggering a hook runs every attached container in
// slot order, verifying each one on its first trigger.
//
// Locking: structural changes (install, remove, update) take the engine lock
// exclusively. A trigger holds it shared plus the hook's own mutex, so triggers
// on one hook serialize while different hooks run concurrently.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "femto/common.hpp"
#include "femto/crypto.hpp"
#include "femto/facilities.hpp"
#include "femto/isa.hpp"
#include "femto/verifier.hpp"
#include "femto/vm.hpp"

namespace femto {

enum class ReturnPolicy { IgnoreAll, FirstNonzeroWins, AllCollected };

constexpr std::string_view to_string(ReturnPolicy p) {
    switch (p) {
    case ReturnPolicy::IgnoreAll: return "ignore_all";
    case ReturnPolicy::FirstNonzeroWins: return "first_nonzero_wins";
    case ReturnPolicy::AllCollected: return "all_collected";
    }
    return "?";
}

inline ReturnPolicy return_policy_from_string(std::string_view s) {
    if (s == "ignore_all") return ReturnPolicy::IgnoreAll;
    if (s == "first_nonzero_wins") return ReturnPolicy::FirstNonzeroWins;
    if (s == "all_collected") return ReturnPolicy::AllCollected;
    throw Error("unknown return policy '" + std::string(s) + "'");
}

struct RegionGrant {
    std::string label;
    bool read = true;
    bool write = false;

    auto operator<=>(const RegionGrant&) const = default;
};

inline std::string mode_string(bool read, bool write) { return std::string(read ? "r" : "") + (write ? "w" : ""); }

inline RegionGrant region_grant_from(std::string label, std::string_view mode) {
    if (mode != "r" && mode != "w" && mode != "rw") throw Error("region mode must be r, w or rw");
    return {std::move(label), mode.find('r') != std::string_view::npos, mode.find('w') != std::string_view::npos};
}

/// Requested (or, after intersection, granted) privileges of a container.
struct Contract {
    std::set<std::uint32_t> syscalls;
    std::set<RegionGrant> regions;

    bool operator==(const Contract&) const = default;
};

/// One region of a hook's per-event context. Context regions are always readable.
struct ContextField {
    std::string label;
    std::size_t size = 0;
    bool writable = false;

    bool operator==(const ContextField&) const = default;
};

struct HookSpec {
    std::string name;
    std::set<std::uint32_t> allowed_syscalls;
    std::vector<ContextField> context_template;
    ReturnPolicy return_policy = ReturnPolicy::IgnoreAll;
};

struct Tenant {
    TenantId id;
    std::string display_name;
    crypto::PublicKey public_key{};
};

enum class ContainerState { Pending, Verified, Rejected };

constexpr std::string_view to_string(ContainerState s) {
    switch (s) {
    case ContainerState::Pending: return "pending";
    case ContainerState::Verified: return "verified";
    case ContainerState::Rejected: return "rejected";
    }
    return "?";
}

struct ContainerStats {
    std::uint64_t verifications = 0;
    std::uint64_t runs = 0;
    std::uint64_t faults = 0;
    std::uint64_t total_executed = 0;

    bool operator==(const ContainerStats&) const = default;
};

/// Result of one container on one trigger.
struct ContainerRun {
    ContainerId container_id;
    TenantId tenant_id;
    std::optional<vm::ExecOutcome> outcome; // absent when verification rejected the container
    std::vector<VerifyError> verify_errors;
    std::map<std::string, Bytes> writable_regions; // final contents of writable context regions
};

struct TriggerResult {
    std::vector<ContainerRun> runs; // slot order
    std::optional<std::uint64_t> policy_value;
    std::vector<std::uint64_t> collected; // all_collected only
};

/// Bytes for context regions by label. Missing labels are zero-filled.
using EventPayload = std::map<std::string, Bytes>;

enum class EngineErrorKind {
    DuplicateHookName,
    SetupPhaseClosed,
    UnknownHook,
    UnknownTenant,
    DuplicateTenant,
    SlotLimitReached,
    UnknownContainer,
    ContextShapeMismatch,
    StaleSequence,
};
using EngineError = KindedError<EngineErrorKind>;

struct EngineConfig {
    VerifyLimits limits{};
    std::size_t slot_limit = 16;
    StoreCapacities store_capacities{};
    std::uint64_t seed = 0; // drives id generation
};

/// Request to install or replace a tenant's container on a hook, guarded by a
/// strictly increasing per-(tenant, hook) sequence number.
struct UpdateCommit {
    TenantId tenant;
    HookId hook;
    std::uint64_t sequence_number = 0;
    isa::Program program;
    Contract contract;
};

class Engine {
  public:
    explicit Engine(EngineConfig config = {})
        : config_(config), rng_(config.seed), stores_(config.store_capacities), syscalls_(standard_syscall_table()) {
        config_.limits.validate();
    }

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    TenantId register_tenant(std::string display_name, const crypto::PublicKey& key,
                             std::optional<TenantId> id = std::nullopt) {
        std::unique_lock lock(mutex_);
        TenantId tid = id ? *id : Uuid::random(rng_);
        if (tenants_.contains(tid)) throw EngineError(EngineErrorKind::DuplicateTenant, "tenant " + tid.str() + " exists");
        tenants_.emplace(tid, Tenant{tid, std::move(display_name), key});
        return tid;
    }

    HookId register_hook(HookSpec spec) {
        std::unique_lock lock(mutex_);
        if (setup_closed_)
            throw EngineError(EngineErrorKind::SetupPhaseClosed, "hooks must be registered before the first install");
        for (const auto& [_, h] : hooks_)
            if (h->spec.name == spec.name)
                throw EngineError(EngineErrorKind::DuplicateHookName, "hook '" + spec.name + "' already registered");
        std::set<std::string> labels;
        for (const auto& f : spec.context_template) {
            if (f.size == 0) throw Error("context region '" + f.label + "' has zero size");
            if (!labels.insert(f.label).second) throw Error("duplicate context region '" + f.label + "'");
        }
        for (auto id : spec.allowed_syscalls)
            if (!syscalls_.find(id)) throw Error("hook '" + spec.name + "' allows unknown helper " + std::to_string(id));
        auto id = Uuid::random(rng_);
        auto hook = std::make_unique<HookEntry>();
        hook->id = id;
        hook->spec = std::move(spec);
        hooks_.emplace(id, std::move(hook));
        return id;
    }

    ContainerId install_container(const TenantId& tenant, isa::Program bytecode, Contract contract, const HookId& hook_id) {
        std::unique_lock lock(mutex_);
        auto& hook = hook_or_throw(hook_id);
        if (!tenants_.contains(tenant)) throw EngineError(EngineErrorKind::UnknownTenant, "unknown tenant " + tenant.str());
        if (hook.slots.size() >= config_.slot_limit)
            throw EngineError(EngineErrorKind::SlotLimitReached, "hook '" + hook.spec.name + "' has no free slot");
        setup_closed_ = true;
        return attach(tenant, std::move(bytecode), std::move(contract), hook);
    }

    void remove_container(const ContainerId& id) {
        std::unique_lock lock(mutex_);
        auto it = containers_.find(id);
        if (it == containers_.end()) throw EngineError(EngineErrorKind::UnknownContainer, "unknown container " + id.str());
        auto& slots = hooks_.at(it->second->hook)->slots;
        slots.erase(std::remove(slots.begin(), slots.end(), id), slots.end());
        stores_.drop_container_store(id);
        containers_.erase(it);
    }

    TriggerResult trigger_hook(const HookId& hook_id, const EventPayload& event = {}) {
        std::shared_lock lock(mutex_);
        auto& hook = hook_or_throw(hook_id);
        check_shape(hook.spec, event);
        std::lock_guard hook_lock(hook.mutex);

        TriggerResult result;
        for (const auto& cid : hook.slots) {
            auto& c = *containers_.at(cid);
            result.runs.push_back(run_container(hook.spec, c, event));
            const auto& run = result.runs.back();
            if (!run.outcome || !run.outcome->ok()) continue;
            const auto value = run.outcome->return_value;
            switch (hook.spec.return_policy) {
            case ReturnPolicy::IgnoreAll: break;
            case ReturnPolicy::FirstNonzeroWins:
                if (!result.policy_value && value != 0) result.policy_value = value;
                break;
            case ReturnPolicy::AllCollected: result.collected.push_back(value); break;
            }
        }
        return result;
    }

    /// Installs or replaces atomically; throws EngineError with no state change on rejection.
    ContainerId commit_update(UpdateCommit commit) {
        std::unique_lock lock(mutex_);
        if (!tenants_.contains(commit.tenant))
            throw EngineError(EngineErrorKind::UnknownTenant, "unknown tenant " + commit.tenant.str());
        auto& hook = hook_or_throw(commit.hook);
        const auto key = std::pair{commit.tenant, commit.hook};
        if (auto it = sequences_.find(key); it != sequences_.end() && commit.sequence_number <= it->second)
            throw EngineError(EngineErrorKind::StaleSequence, "sequence " + std::to_string(commit.sequence_number) +
                                                                  " not newer than " + std::to_string(it->second));
        auto existing = std::find_if(hook.slots.begin(), hook.slots.end(),
                                     [&](const ContainerId& id) { return containers_.at(id)->tenant == commit.tenant; });
        ContainerId id;
        if (existing != hook.slots.end()) {
            std::lock_guard hook_lock(hook.mutex);
            auto& c = *containers_.at(*existing);
            c.program = std::move(commit.program);
            c.requested = std::move(commit.contract);
            c.granted = intersect(hook.spec, c.requested);
            c.state = ContainerState::Pending;
            c.verified.reset();
            c.verify_errors.clear();
            c.stats = {};
            stores_.create_container_store(c.id);
            id = c.id;
        } else {
            if (hook.slots.size() >= config_.slot_limit)
                throw EngineError(EngineErrorKind::SlotLimitReached, "hook '" + hook.spec.name + "' has no free slot");
            id = attach(commit.tenant, std::move(commit.program), std::move(commit.contract), hook);
        }
        setup_closed_ = true;
        sequences_[key] = commit.sequence_number;
        return id;
    }

    [[nodiscard]] std::optional<HookId> find_hook(std::string_view name) const {
        std::shared_lock lock(mutex_);
        for (const auto& [id, h] : hooks_)
            if (h->spec.name == name) return id;
        return std::nullopt;
    }

    [[nodiscard]] std::optional<Tenant> tenant(const TenantId& id) const {
        std::shared_lock lock(mutex_);
        auto it = tenants_.find(id);
        if (it == tenants_.end()) return std::nullopt;
        return it->second;
    }

    [[nodiscard]] bool has_hook(const HookId& id) const {
        std::shared_lock lock(mutex_);
        return hooks_.contains(id);
    }

    [[nodiscard]] bool has_container(const ContainerId& id) const {
        std::shared_lock lock(mutex_);
        return containers_.contains(id);
    }

    [[nodiscard]] std::vector<ContainerId> slots(const HookId& id) const {
        std::shared_lock lock(mutex_);
        return hook_or_throw(id).slots;
    }

    [[nodiscard]] ContainerStats stats(const ContainerId& id) const {
        std::shared_lock lock(mutex_);
        const auto& c = container_or_throw(id);
        std::lock_guard hook_lock(hooks_.at(c.hook)->mutex);
        return c.stats;
    }

    [[nodiscard]] ContainerState state(const ContainerId& id) const {
        std::shared_lock lock(mutex_);
        const auto& c = container_or_throw(id);
        std::lock_guard hook_lock(hooks_.at(c.hook)->mutex);
        return c.state;
    }

    [[nodiscard]] Contract granted(const ContainerId& id) const {
        std::shared_lock lock(mutex_);
        return container_or_throw(id).granted;
    }

    [[nodiscard]] std::size_t container_count() const {
        std::shared_lock lock(mutex_);
        return containers_.size();
    }

    StoreRegistry& stores() noexcept { return stores_; }
    const StoreRegistry& stores() const noexcept { return stores_; }
    VirtualClock& clock() noexcept { return clock_; }
    SensorBank& sensors() noexcept { return sensors_; }
    DebugLog& debug_log() noexcept { return log_; }
    [[nodiscard]] const EngineConfig& config() const noexcept { return config_; }

    /// Canonical snapshot of tenants, hooks, containers, sequence records and stores.
    [[nodiscard]] nlohmann::json introspect() const {
        using nlohmann::json;
        std::shared_lock lock(mutex_);
        json tenants = json::array();
        for (const auto& [id, t] : tenants_)
            tenants.push_back({{"id", id.str()}, {"name", t.display_name}, {"public_key", to_hex(t.public_key)}});
        json hooks = json::array();
        for (const auto& [id, h] : hooks_) {
            json ctx = json::array();
            for (const auto& f : h->spec.context_template)
                ctx.push_back({{"label", f.label}, {"size", f.size}, {"mode", mode_string(true, f.writable)}});
            json slots = json::array();
            for (const auto& c : h->slots) slots.push_back(c.str());
            hooks.push_back({{"id", id.str()},
                             {"name", h->spec.name},
                             {"allowed_syscalls", h->spec.allowed_syscalls},
                             {"context", ctx},
                             {"return_policy", to_string(h->spec.return_policy)},
                             {"slots", slots}});
        }
        json containers = json::array();
        for (const auto& [id, c] : containers_) {
            std::lock_guard hook_lock(hooks_.at(c->hook)->mutex);
            containers.push_back({{"id", id.str()},
                                  {"tenant", c->tenant.str()},
                                  {"hook", c->hook.str()},
                                  {"bytecode_sha256", to_hex(crypto::sha256(c->program.to_bytes()))},
                                  {"slot_count", c->program.size()},
                                  {"state", to_string(c->state)},
                                  {"requested", contract_json(c->requested)},
                                  {"granted", contract_json(c->granted)},
                                  {"stats",
                                   {{"verifications", c->stats.verifications},
                                    {"runs", c->stats.runs},
                                    {"faults", c->stats.faults},
                                    {"total_executed", c->stats.total_executed}}}});
        }
        json sequences = json::array();
        for (const auto& [key, seq] : sequences_)
            sequences.push_back({{"tenant", key.first.str()}, {"hook", key.second.str()}, {"sequence_number", seq}});
        return {{"tenants", tenants},     {"hooks", hooks},           {"containers", containers},
                {"sequences", sequences}, {"stores", stores_.dump()}, {"clock_ms", clock_.now_ms()}};
    }

    static nlohmann::json contract_json(const Contract& c) {
        auto regions = nlohmann::json::array();
        for (const auto& r : c.regions) regions.push_back({{"label", r.label}, {"mode", mode_string(r.read, r.write)}});
        return {{"syscalls", c.syscalls}, {"regions", regions}};
    }

    /// Hook allowance intersected with a request: helper ids in both sets, and
    /// context regions present in both with the modes both permit.
    static Contract intersect(const HookSpec& hook, const Contract& requested) {
        Contract g;
        std::set_intersection(hook.allowed_syscalls.begin(), hook.allowed_syscalls.end(), requested.syscalls.begin(),
                              requested.syscalls.end(), std::inserter(g.syscalls, g.syscalls.end()));
        for (const auto& r : requested.regions) {
            auto f = std::find_if(hook.context_template.begin(), hook.context_template.end(),
                                  [&](const ContextField& f) { return f.label == r.label; });
            if (f == hook.context_template.end()) continue;
            RegionGrant grant{r.label, r.read, r.write && f->writable};
            if (grant.read || grant.write) g.regions.insert(grant);
        }
        return g;
    }

  private:
    struct HookEntry {
        HookId id;
        HookSpec spec;
        std::vector<ContainerId> slots;
        mutable std::mutex mutex;
    };

    struct ContainerEntry {
        ContainerId id;
        TenantId tenant;
        HookId hook;
        isa::Program program;
        Contract requested;
        Contract granted;
        ContainerState state = ContainerState::Pending;
        std::optional<VerifiedProgram> verified;
        std::vector<VerifyError> verify_errors;
        ContainerStats stats;
    };

    HookEntry& hook_or_throw(const HookId& id) const {
        auto it = hooks_.find(id);
        if (it == hooks_.end()) throw EngineError(EngineErrorKind::UnknownHook, "unknown hook " + id.str());
        return *it->second;
    }

    const ContainerEntry& container_or_throw(const ContainerId& id) const {
        auto it = containers_.find(id);
        if (it == containers_.end()) throw EngineError(EngineErrorKind::UnknownContainer, "unknown container " + id.str());
        return *it->second;
    }

    ContainerId attach(const TenantId& tenant, isa::Program program, Contract contract, HookEntry& hook) {
        ContainerId id;
        do {
            id = Uuid::random(rng_);
        } while (containers_.contains(id));
        auto c = std::make_unique<ContainerEntry>();
        c->id = id;
        c->tenant = tenant;
        c->hook = hook.id;
        c->program = std::move(program);
        c->granted = intersect(hook.spec, contract);
        c->requested = std::move(contract);
        containers_.emplace(id, std::move(c));
        std::lock_guard hook_lock(hook.mutex);
        hook.slots.push_back(id);
        stores_.create_container_store(id);
        return id;
    }

    static void check_shape(const HookSpec& spec, const EventPayload& event) {
        for (const auto& [label, bytes] : event) {
            auto f = std::find_if(spec.context_template.begin(), spec.context_template.end(),
                                  [&](const ContextField& f) { return f.label == label; });
            if (f == spec.context_template.end())
                throw EngineError(EngineErrorKind::ContextShapeMismatch,
                                  "hook '" + spec.name + "' has no context region '" + label + "'");
            if (bytes.size() != f->size)
                throw EngineError(EngineErrorKind::ContextShapeMismatch,
                                  "context region '" + label + "' expects " + std::to_string(f->size) + " bytes, got " +
                                      std::to_string(bytes.size()));
        }
    }

    ContainerRun run_container(const HookSpec& spec, ContainerEntry& c, const EventPayload& event) {
        ContainerRun run{c.id, c.tenant, std::nullopt, {}, {}};
        if (c.state == ContainerState::Pending) {
            ++c.stats.verifications;
            auto result = verify(c.program, config_.limits, c.granted.syscalls);
            if (auto* vp = std::get_if<VerifiedProgram>(&result)) {
                c.verified = std::move(*vp);
                c.state = ContainerState::Verified;
            } else {
                c.verify_errors = std::get<std::vector<VerifyError>>(std::move(result));
                c.state = ContainerState::Rejected;
            }
        }
        if (c.state == ContainerState::Rejected) {
            run.verify_errors = c.verify_errors;
            return run;
        }

        // fresh zeroed buffers for every run so nothing leaks between runs
        std::vector<Bytes> buffers;
        std::vector<vm::MemoryRegion> regions;
        buffers.reserve(spec.context_template.size());
        for (const auto& f : spec.context_template) {
            auto it = event.find(f.label);
            buffers.push_back(it != event.end() ? it->second : Bytes(f.size, 0));
            auto g = std::find_if(c.granted.regions.begin(), c.granted.regions.end(),
                                  [&](const RegionGrant& r) { return r.label == f.label; });
            const bool read = g != c.granted.regions.end() && g->read;
            const bool write = g != c.granted.regions.end() && g->write;
            regions.push_back(vm::MemoryRegion::over(std::span<std::uint8_t>(buffers.back()), read, write, f.label));
        }
        std::optional<vm::MemoryRegion> ctx;
        if (!regions.empty()) ctx = regions.front();
        auto rest = regions.empty() ? std::span<const vm::MemoryRegion>{}
                                    : std::span<const vm::MemoryRegion>(regions).subspan(1);

        Invocation env{Caller{c.id, c.tenant, syscall::scopes_for(c.granted.syscalls)}, stores_, clock_, sensors_, log_};
        auto outcome = vm::exec(*c.verified, ctx, rest, syscalls_, env, c.verified->budget());
        ++c.stats.runs;
        c.stats.total_executed += outcome.executed;
        if (!outcome.ok()) ++c.stats.faults;
        for (std::size_t i = 0; i < spec.context_template.size(); ++i)
            if (spec.context_template[i].writable) run.writable_regions[spec.context_template[i].label] = buffers[i];
        run.outcome = std::move(outcome);
        return run;
    }

    EngineConfig config_;
    mutable std::shared_mutex mutex_;
    std::mt19937_64 rng_;
    bool setup_closed_ = false;
    std::map<TenantId, Tenant> tenants_;
    std::map<HookId, std::unique_ptr<HookEntry>> hooks_;
    std::map<ContainerId, std::unique_ptr<ContainerEntry>> containers_;
    std::map<std::pair<TenantId, HookId>, std::uint64_t> sequences_;
    StoreRegistry stores_;
    VirtualClock clock_;
    SensorBank sensors_;
    DebugLog log_;
    vm::SyscallTable<Invocation> syscalls_;
};

} // namespace femto
