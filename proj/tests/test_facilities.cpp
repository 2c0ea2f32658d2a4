#include <catch_amalgamated.hpp>

#include <random>
#include <thread>

#include "femto/assembler.hpp"
#include "femto/facilities.hpp"
#include "femto/verifier.hpp"
#include "femto/vm.hpp"

using namespace femto;

namespace {

const std::set<Scope> kAllScopes = {Scope::Container, Scope::Tenant, Scope::Global};

struct Rig {
    StoreRegistry stores{StoreCapacities{4, 4, 4}};
    VirtualClock clock;
    SensorBank sensors;
    DebugLog log;
    std::mt19937_64 rng{5};

    Caller caller(const TenantId& t, std::set<Scope> scopes = kAllScopes) {
        Caller c{Uuid::random(rng), t, std::move(scopes)};
        stores.create_container_store(c.container);
        return c;
    }

    vm::ExecOutcome run(const Caller& c, const std::string& text, std::span<const vm::MemoryRegion> regions = {}) {
        auto r = verify(isa::assemble(text), {}, syscall::standard_ids());
        REQUIRE(std::holds_alternative<VerifiedProgram>(r));
        Invocation env{c, stores, clock, sensors, log};
        auto table = standard_syscall_table();
        return vm::exec(std::get<VerifiedProgram>(r), std::nullopt, regions, table, env, 10000);
    }
};

} // namespace

TEST_CASE("put then get") {
    KeyValueStore s(Scope::Container, "c", 64);
    s.put(7, 42);
    CHECK(s.get(7) == 42);
    CHECK(s.get(8) == 0);
    s.put(7, -3);
    CHECK(s.get(7) == -3);
    CHECK(s.snapshot().size() == 1);
}

TEST_CASE("store capacity") {
    KeyValueStore s(Scope::Tenant, "t", 2);
    s.put(1, 1);
    s.put(2, 2);
    s.put(2, 5); // overwrite at capacity is fine
    try {
        s.put(3, 3);
        FAIL("expected StoreFull");
    } catch (const KindedError<StoreErrorKind>& e) {
        CHECK(e.kind() == StoreErrorKind::StoreFull);
    }
    CHECK(s.get(3) == 0);
    CHECK(s.get(2) == 5);
}

TEST_CASE("default capacities") {
    StoreCapacities c;
    CHECK(c.container == 64);
    CHECK(c.tenant == 128);
    CHECK(c.global == 256);
}

TEST_CASE("store json dump") {
    KeyValueStore s(Scope::Global, "global", 8);
    s.put(2, -1);
    s.put(1, 9);
    auto j = s.to_json();
    CHECK(j["scope"] == "global");
    CHECK(j["owner"] == "global");
    REQUIRE(j["entries"].size() == 2);
    CHECK(j["entries"][0]["key"] == 1);
    CHECK(j["entries"][0]["value"] == 9);
    CHECK(j["entries"][1]["value"] == -1);
}

TEST_CASE("store isolation matrix for two tenants with two containers each") {
    Rig rig;
    std::mt19937_64 rng(6);
    TenantId ta = Uuid::random(rng), tb = Uuid::random(rng);
    std::vector<Caller> callers = {rig.caller(ta), rig.caller(ta), rig.caller(tb), rig.caller(tb)};

    // every caller writes a distinct value to key 1 of each scope it can reach
    for (std::size_t i = 0; i < callers.size(); ++i) {
        rig.stores.kv_put(Scope::Container, callers[i], 1, static_cast<std::int64_t>(100 + i));
        rig.stores.kv_put(Scope::Tenant, callers[i], 1, static_cast<std::int64_t>(200 + i));
        rig.stores.kv_put(Scope::Global, callers[i], 1, static_cast<std::int64_t>(300 + i));
    }
    // reader i sees, per scope instance, exactly the last write from a caller sharing that instance
    for (std::size_t r = 0; r < callers.size(); ++r) {
        INFO("reader " << r);
        const auto& me = callers[r];
        CHECK(rig.stores.kv_get(Scope::Container, me, 1) == static_cast<std::int64_t>(100 + r));
        const std::size_t last_same_tenant = me.tenant == ta ? 1 : 3;
        CHECK(rig.stores.kv_get(Scope::Tenant, me, 1) == static_cast<std::int64_t>(200 + last_same_tenant));
        CHECK(rig.stores.kv_get(Scope::Global, me, 1) == 303);
    }
    // the stores reachable from each caller are exactly its own container, its tenant, and global
    for (std::size_t r = 0; r < callers.size(); ++r) {
        for (std::size_t o = 0; o < callers.size(); ++o) {
            const bool same_container = r == o;
            const bool same_tenant = callers[r].tenant == callers[o].tenant;
            auto own = rig.stores.container_store(callers[o].container);
            REQUIRE(own);
            CHECK((own->get(1) == static_cast<std::int64_t>(100 + r)) == same_container);
            auto ten = rig.stores.tenant_store(callers[o].tenant);
            CHECK((ten == rig.stores.tenant_store(callers[r].tenant)) == same_tenant);
        }
    }
}

TEST_CASE("absent tenant key reads zero for another tenant") {
    Rig rig;
    std::mt19937_64 rng(7);
    auto a = rig.caller(Uuid::random(rng));
    auto b = rig.caller(Uuid::random(rng));
    rig.stores.kv_put(Scope::Tenant, a, 1, 55);
    CHECK(rig.stores.kv_get(Scope::Tenant, b, 1) == 0);
    rig.stores.kv_put(Scope::Global, a, 9, 77);
    CHECK(rig.stores.kv_get(Scope::Global, b, 9) == 77);
}

TEST_CASE("scope must be granted") {
    Rig rig;
    std::mt19937_64 rng(8);
    auto c = rig.caller(Uuid::random(rng), {Scope::Container});
    CHECK_NOTHROW(rig.stores.kv_put(Scope::Container, c, 1, 1));
    try {
        rig.stores.kv_put(Scope::Global, c, 1, 1);
        FAIL("expected ScopeDenied");
    } catch (const KindedError<StoreErrorKind>& e) {
        CHECK(e.kind() == StoreErrorKind::ScopeDenied);
    }
    CHECK_THROWS_AS(rig.stores.kv_get(Scope::Tenant, c, 1), KindedError<StoreErrorKind>);
}

TEST_CASE("scopes follow granted helpers") {
    using namespace syscall;
    CHECK(scopes_for({kContainerGet}) == std::set<Scope>{Scope::Container});
    CHECK(scopes_for({kTenantPut, kGlobalGet}) == std::set<Scope>{Scope::Tenant, Scope::Global});
    CHECK(scopes_for({kNowMs, kDebugLog}).empty());
}

TEST_CASE("container store dropped on removal and reset on recreate") {
    Rig rig;
    std::mt19937_64 rng(9);
    auto c = rig.caller(Uuid::random(rng));
    rig.stores.kv_put(Scope::Container, c, 3, 4);
    rig.stores.create_container_store(c.container);
    CHECK(rig.stores.kv_get(Scope::Container, c, 3) == 0);
    rig.stores.drop_container_store(c.container);
    CHECK_FALSE(rig.stores.container_store(c.container));
}

TEST_CASE("standard table enumerates the documented ids") {
    auto t = standard_syscall_table();
    const std::set<std::uint32_t> expected = {0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x10, 0x11, 0x20, 0x30};
    CHECK(t.ids() == expected);
    CHECK(t.size() == 10);
    CHECK(syscall::standard_ids() == expected);
}

TEST_CASE("values persist between invocations") {
    Rig rig;
    std::mt19937_64 rng(10);
    auto c = rig.caller(Uuid::random(rng));
    const std::string incr = "mov64 r1, 5\ncall 0x02\nadd64 r0, 1\nmov64 r2, r0\nmov64 r1, 5\ncall 0x01\nmov64 r1, 5\ncall 0x02\nexit";
    for (int i = 1; i <= 3; ++i) {
        auto out = rig.run(c, incr);
        REQUIRE(out.ok());
        CHECK(out.return_value == static_cast<std::uint64_t>(i));
    }
}

TEST_CASE("store full is reported in r0") {
    Rig rig;
    std::mt19937_64 rng(11);
    auto c = rig.caller(Uuid::random(rng));
    for (std::uint32_t k = 0; k < 4; ++k) rig.stores.kv_put(Scope::Container, c, k, 1);
    auto out = rig.run(c, "mov64 r1, 99\nmov64 r2, 1\ncall 0x01\nexit");
    REQUIRE(out.ok());
    CHECK(out.return_value == syscall::kStoreFullResult);
    auto ok = rig.run(c, "mov64 r1, 2\nmov64 r2, 1\ncall 0x01\nexit");
    CHECK(ok.return_value == 0);
}

TEST_CASE("denied scope faults the container") {
    Rig rig;
    std::mt19937_64 rng(12);
    auto c = rig.caller(Uuid::random(rng), {Scope::Container});
    auto out = rig.run(c, "mov64 r1, 1\nmov64 r2, 1\ncall 0x03\nexit");
    REQUIRE(out.fault);
    CHECK(out.fault->kind == vm::FaultKind::BadSyscall);
    CHECK(out.fault->pc == 2);
}

TEST_CASE("clock helper returns virtual time") {
    Rig rig;
    std::mt19937_64 rng(13);
    auto c = rig.caller(Uuid::random(rng));
    rig.clock.advance_to(1234);
    CHECK(rig.run(c, "call 0x10\nexit").return_value == 1234);
}

TEST_CASE("clock is monotonic") {
    VirtualClock clock;
    clock.advance_to(10);
    clock.advance_to(10);
    CHECK(clock.now_ms() == 10);
    CHECK_THROWS(clock.advance_to(9));
    CHECK(clock.now_ms() == 10);
    std::mt19937_64 rng(14);
    std::uint64_t last = 10;
    for (int i = 0; i < 1000; ++i) {
        std::uint64_t t = rng() % 100000;
        if (t < last) {
            CHECK_THROWS(clock.advance_to(t));
        } else {
            clock.advance_to(t);
            last = t;
        }
        REQUIRE(clock.now_ms() == last);
    }
}

TEST_CASE("sensor fixture reads in order then repeats the last sample") {
    Rig rig;
    std::mt19937_64 rng(15);
    auto c = rig.caller(Uuid::random(rng));
    rig.sensors.set(4, {3, 5, 7});
    std::vector<std::uint64_t> got;
    for (int i = 0; i < 5; ++i) got.push_back(rig.run(c, "mov64 r1, 4\ncall 0x11\nexit").return_value);
    CHECK(got == std::vector<std::uint64_t>{3, 5, 7, 7, 7});
    CHECK(rig.sensors.read(99) == 0);
    rig.sensors.append(4, {9});
    CHECK(rig.sensors.read(4) == 9);
    SensorFixture empty;
    CHECK(empty.next() == 0);
}

TEST_CASE("response write stays inside the response region") {
    Rig rig;
    std::mt19937_64 rng(16);
    auto c = rig.caller(Uuid::random(rng));
    Bytes response(16, 0);
    std::vector<vm::MemoryRegion> regions = {vm::MemoryRegion::over(std::span<std::uint8_t>(response), true, true, "response")};
    auto ok = rig.run(c, "mov64 r1, 8\nmov64 r2, 0x0201\ncall 0x20\nexit", regions);
    REQUIRE(ok.ok());
    CHECK(response[8] == 1);
    CHECK(response[9] == 2);
    auto beyond = rig.run(c, "mov64 r1, 9\nmov64 r2, 1\ncall 0x20\nexit", regions);
    REQUIRE(beyond.fault);
    CHECK(beyond.fault->kind == vm::FaultKind::MemoryViolation);
    CHECK(beyond.fault->pc == 2);
    auto huge = rig.run(c, "lddw r1, -8\nmov64 r2, 1\ncall 0x20\nexit", regions);
    REQUIRE(huge.fault);
    CHECK(huge.fault->kind == vm::FaultKind::MemoryViolation);
    auto missing = rig.run(c, "mov64 r1, 0\ncall 0x20\nexit");
    REQUIRE(missing.fault);
    CHECK(missing.fault->kind == vm::FaultKind::MemoryViolation);
}

TEST_CASE("debug log records value and time") {
    Rig rig;
    std::mt19937_64 rng(17);
    auto c = rig.caller(Uuid::random(rng));
    rig.clock.advance_to(50);
    rig.run(c, "mov64 r1, -4\ncall 0x30\nexit");
    auto entries = rig.log.entries();
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].container == c.container);
    CHECK(entries[0].at_ms == 50);
    CHECK(entries[0].value == -4);
}

TEST_CASE("registry dump lists global, tenants, containers") {
    Rig rig;
    std::mt19937_64 rng(18);
    auto c = rig.caller(Uuid::random(rng));
    rig.stores.kv_put(Scope::Tenant, c, 1, 1);
    auto d = rig.stores.dump();
    REQUIRE(d.size() == 3);
    CHECK(d[0]["scope"] == "global");
    CHECK(d[1]["scope"] == "tenant");
    CHECK(d[2]["scope"] == "container");
}

TEST_CASE("stores serialize concurrent access") {
    KeyValueStore s(Scope::Global, "global", 256);
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t)
        threads.emplace_back([&s, t] {
            for (int i = 0; i < 2000; ++i) {
                auto key = static_cast<std::uint32_t>(t * 10 + i % 10);
                s.put(key, s.get(key) + 1);
            }
        });
    for (auto& th : threads) th.join();
    // each key is owned by one thread, so no update is lost
    for (int t = 0; t < 4; ++t)
        for (int k = 0; k < 10; ++k) CHECK(s.get(static_cast<std::uint32_t>(t * 10 + k)) == 200);
}
