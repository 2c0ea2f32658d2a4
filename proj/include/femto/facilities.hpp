#pragma once

// Host services reachable from containers through helper calls: key-value
// stores at container, tenant and global scope, a virtual clock, sensor
// fixtures, a response-region writer and a debug log.

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "femto/common.hpp"
#include "femto/vm.hpp"

namespace femto {

enum class Scope { Container, Tenant, Global };

constexpr std::string_view to_string(Scope s) {
    switch (s) {
    case Scope::Container: return "container";
    case Scope::Tenant: return "tenant";
    case Scope::Global: return "global";
    }
    return "?";
}

inline Scope scope_from_string(std::string_view s) {
    if (s == "container") return Scope::Container;
    if (s == "tenant") return Scope::Tenant;
    if (s == "global") return Scope::Global;
    throw Error("unknown store scope '" + std::string(s) + "'");
}

enum class StoreErrorKind { StoreFull, ScopeDenied };
using StoreError = KindedError<StoreErrorKind>;

class KeyValueStore {
  public:
    KeyValueStore(Scope scope, std::string owner, std::size_t capacity)
        : scope_(scope), owner_(std::move(owner)), capacity_(capacity) {}

    /// Overwriting an existing key never fails; a new key fails at capacity.
    void put(std::uint32_t key, std::int64_t value) {
        std::lock_guard lock(mutex_);
        auto it = entries_.find(key);
        if (it != entries_.end()) {
            it->second = value;
            return;
        }
        if (entries_.size() >= capacity_)
            throw StoreError(StoreErrorKind::StoreFull,
                             std::string(to_string(scope_)) + " store of " + owner_ + " is full");
        entries_.emplace(key, value);
    }

    /// Absent keys read as 0.
    [[nodiscard]] std::int64_t get(std::uint32_t key) const {
        std::lock_guard lock(mutex_);
        auto it = entries_.find(key);
        return it == entries_.end() ? 0 : it->second;
    }

    void clear() {
        std::lock_guard lock(mutex_);
        entries_.clear();
    }

    [[nodiscard]] std::map<std::uint32_t, std::int64_t> snapshot() const {
        std::lock_guard lock(mutex_);
        return entries_;
    }

    [[nodiscard]] Scope scope() const noexcept { return scope_; }
    [[nodiscard]] const std::string& owner() const noexcept { return owner_; }
    [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }

    [[nodiscard]] nlohmann::json to_json() const {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& [k, v] : snapshot()) entries.push_back({{"key", k}, {"value", v}});
        return {{"scope", to_string(scope_)}, {"owner", owner_}, {"entries", entries}};
    }

  private:
    Scope scope_;
    std::string owner_;
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::map<std::uint32_t, std::int64_t> entries_;
};

struct StoreCapacities {
    std::size_t container = 64;
    std::size_t tenant = 128;
    std::size_t global = 256;
};

/// Identity of the container on whose behalf a store is touched.
struct Caller {
    ContainerId container;
    TenantId tenant;
    std::set<Scope> scopes;
};

/// Owns every store. A caller reaches its own container store, its own
/// tenant's store and the global store, each only when its scope is granted.
class StoreRegistry {
  public:
    explicit StoreRegistry(StoreCapacities caps = {})
        : caps_(caps), global_(std::make_shared<KeyValueStore>(Scope::Global, "global", caps.global)) {}

    void create_container_store(const ContainerId& id) {
        std::lock_guard lock(mutex_);
        containers_[id] = std::make_shared<KeyValueStore>(Scope::Container, id.str(), caps_.container);
    }

    void drop_container_store(const ContainerId& id) {
        std::lock_guard lock(mutex_);
        containers_.erase(id);
    }

    void kv_put(Scope scope, const Caller& caller, std::uint32_t key, std::int64_t value) {
        resolve(scope, caller)->put(key, value);
    }

    [[nodiscard]] std::int64_t kv_get(Scope scope, const Caller& caller, std::uint32_t key) {
        return resolve(scope, caller)->get(key);
    }

    /// Direct read access for assertions and tooling; bypasses scope grants.
    [[nodiscard]] std::shared_ptr<const KeyValueStore> container_store(const ContainerId& id) const {
        std::lock_guard lock(mutex_);
        auto it = containers_.find(id);
        return it == containers_.end() ? nullptr : it->second;
    }
    [[nodiscard]] std::shared_ptr<const KeyValueStore> tenant_store(const TenantId& id) const {
        std::lock_guard lock(mutex_);
        auto it = tenants_.find(id);
        return it == tenants_.end() ? nullptr : it->second;
    }
    [[nodiscard]] std::shared_ptr<const KeyValueStore> global_store() const { return global_; }

    /// [{scope, owner, entries:[{key, value}]}], global first, then tenants, then containers.
    [[nodiscard]] nlohmann::json dump() const {
        std::lock_guard lock(mutex_);
        auto out = nlohmann::json::array();
        out.push_back(global_->to_json());
        for (const auto& [_, s] : tenants_) out.push_back(s->to_json());
        for (const auto& [_, s] : containers_) out.push_back(s->to_json());
        return out;
    }

  private:
    std::shared_ptr<KeyValueStore> resolve(Scope scope, const Caller& caller) {
        if (!caller.scopes.contains(scope))
            throw StoreError(StoreErrorKind::ScopeDenied, std::string(to_string(scope)) + " scope not granted");
        std::lock_guard lock(mutex_);
        switch (scope) {
        case Scope::Container: {
            auto it = containers_.find(caller.container);
            if (it == containers_.end()) throw StoreError(StoreErrorKind::ScopeDenied, "container has no store");
            return it->second;
        }
        case Scope::Tenant: {
            auto& slot = tenants_[caller.tenant];
            if (!slot) slot = std::make_shared<KeyValueStore>(Scope::Tenant, caller.tenant.str(), caps_.tenant);
            return slot;
        }
        case Scope::Global: return global_;
        }
        throw StoreError(StoreErrorKind::ScopeDenied, "unknown scope");
    }

    StoreCapacities caps_;
    mutable std::mutex mutex_;
    std::shared_ptr<KeyValueStore> global_;
    std::map<TenantId, std::shared_ptr<KeyValueStore>> tenants_;
    std::map<ContainerId, std::shared_ptr<KeyValueStore>> containers_;
};

/// Milliseconds of simulated time; only moves forward.
class VirtualClock {
  public:
    [[nodiscard]] std::uint64_t now_ms() const noexcept { return now_.load(std::memory_order_acquire); }

    void advance_to(std::uint64_t ms) {
        auto cur = now_.load();
        do {
            if (ms < cur) throw Error("virtual clock cannot move backwards");
        } while (!now_.compare_exchange_weak(cur, ms));
    }

  private:
    std::atomic<std::uint64_t> now_{0};
};

struct SensorFixture {
    std::uint32_t sensor_id = 0;
    std::vector<std::int64_t> samples;
    std::size_t cursor = 0;

    /// Reads past the end repeat the last sample; an empty fixture reads 0.
    std::int64_t next() {
        if (samples.empty()) return 0;
        auto v = samples[std::min(cursor, samples.size() - 1)];
        if (cursor < samples.size()) ++cursor;
        return v;
    }
};

class SensorBank {
  public:
    void set(std::uint32_t id, std::vector<std::int64_t> samples) {
        std::lock_guard lock(mutex_);
        sensors_[id] = SensorFixture{id, std::move(samples), 0};
    }

    /// Appends newly available samples; the cursor stays where it is.
    void append(std::uint32_t id, const std::vector<std::int64_t>& samples) {
        std::lock_guard lock(mutex_);
        auto& s = sensors_[id];
        s.sensor_id = id;
        s.samples.insert(s.samples.end(), samples.begin(), samples.end());
    }

    /// Unknown sensors read as 0.
    std::int64_t read(std::uint32_t id) {
        std::lock_guard lock(mutex_);
        auto it = sensors_.find(id);
        return it == sensors_.end() ? 0 : it->second.next();
    }

  private:
    std::mutex mutex_;
    std::map<std::uint32_t, SensorFixture> sensors_;
};

struct LogEntry {
    ContainerId container;
    std::uint64_t at_ms;
    std::int64_t value;
};

class DebugLog {
  public:
    void append(LogEntry e) {
        std::lock_guard lock(mutex_);
        entries_.push_back(e);
    }
    [[nodiscard]] std::vector<LogEntry> entries() const {
        std::lock_guard lock(mutex_);
        return entries_;
    }

  private:
    mutable std::mutex mutex_;
    std::vector<LogEntry> entries_;
};

/// Per-call environment handed to the standard helpers.
struct Invocation {
    Caller caller;
    StoreRegistry& stores;
    VirtualClock& clock;
    SensorBank& sensors;
    DebugLog& log;
};

namespace syscall {
inline constexpr std::uint32_t kContainerPut = 0x01;
inline constexpr std::uint32_t kContainerGet = 0x02;
inline constexpr std::uint32_t kGlobalPut = 0x03;
inline constexpr std::uint32_t kGlobalGet = 0x04;
inline constexpr std::uint32_t kTenantPut = 0x05;
inline constexpr std::uint32_t kTenantGet = 0x06;
inline constexpr std::uint32_t kNowMs = 0x10;
inline constexpr std::uint32_t kSensorRead = 0x11;
inline constexpr std::uint32_t kResponseWrite = 0x20;
inline constexpr std::uint32_t kDebugLog = 0x30;

/// r0 value of a put that hit store capacity.
inline constexpr std::uint64_t kStoreFullResult = ~std::uint64_t{0};

inline const std::set<std::uint32_t>& standard_ids() {
    static const std::set<std::uint32_t> ids{kContainerPut, kContainerGet, kGlobalPut, kGlobalGet, kTenantPut,
                                             kTenantGet,    kNowMs,        kSensorRead, kResponseWrite, kDebugLog};
    return ids;
}

/// Store scopes implied by a set of granted helper ids.
inline std::set<Scope> scopes_for(const std::set<std::uint32_t>& granted) {
    std::set<Scope> out;
    if (granted.contains(kContainerPut) || granted.contains(kContainerGet)) out.insert(Scope::Container);
    if (granted.contains(kTenantPut) || granted.contains(kTenantGet)) out.insert(Scope::Tenant);
    if (granted.contains(kGlobalPut) || granted.contains(kGlobalGet)) out.insert(Scope::Global);
    return out;
}
} // namespace syscall

/// Label of the hook context region that response_write targets.
inline constexpr std::string_view kResponseRegion = "response";

inline vm::SyscallTable<Invocation> standard_syscall_table() {
    using Call = vm::HelperCall<Invocation>;
    vm::SyscallTable<Invocation> t;
    auto put = [](Scope scope) {
        return [scope](Call& c) -> std::uint64_t {
            try {
                c.env.stores.kv_put(scope, c.env.caller, static_cast<std::uint32_t>(c.arg(0)),
                                    static_cast<std::int64_t>(c.arg(1)));
                return 0;
            } catch (const StoreError& e) {
                if (e.kind() == StoreErrorKind::StoreFull) return syscall::kStoreFullResult;
                throw;
            }
        };
    };
    auto get = [](Scope scope) {
        return [scope](Call& c) -> std::uint64_t {
            return static_cast<std::uint64_t>(
                c.env.stores.kv_get(scope, c.env.caller, static_cast<std::uint32_t>(c.arg(0))));
        };
    };
    t.register_syscall(syscall::kContainerPut, put(Scope::Container), 2, "container_put");
    t.register_syscall(syscall::kContainerGet, get(Scope::Container), 1, "container_get");
    t.register_syscall(syscall::kGlobalPut, put(Scope::Global), 2, "global_put");
    t.register_syscall(syscall::kGlobalGet, get(Scope::Global), 1, "global_get");
    t.register_syscall(syscall::kTenantPut, put(Scope::Tenant), 2, "tenant_put");
    t.register_syscall(syscall::kTenantGet, get(Scope::Tenant), 1, "tenant_get");
    t.register_syscall(
        syscall::kNowMs, [](Call& c) -> std::uint64_t { return c.env.clock.now_ms(); }, 0, "now_ms");
    t.register_syscall(
        syscall::kSensorRead,
        [](Call& c) -> std::uint64_t {
            return static_cast<std::uint64_t>(c.env.sensors.read(static_cast<std::uint32_t>(c.arg(0))));
        },
        1, "sensor_read");
    t.register_syscall(
        syscall::kResponseWrite,
        [](Call& c) -> std::uint64_t {
            const auto offset = c.arg(0);
            const auto* region = c.acl.find(kResponseRegion);
            if (!region || offset > region->length) throw vm::HelperMemoryFault{offset, 8, vm::AccessMode::Write};
            c.store(region->base + offset, c.arg(1), 8);
            return 0;
        },
        2, "response_write");
    t.register_syscall(
        syscall::kDebugLog,
        [](Call& c) -> std::uint64_t {
            c.env.log.append({c.env.caller.container, c.env.clock.now_ms(), static_cast<std::int64_t>(c.arg(0))});
            return 0;
        },
        1, "debug_log");
    return t;
}

} // namespace femto
