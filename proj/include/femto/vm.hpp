#pragma once

// Register interpreter for verified programs.
//
// VM addresses are host addresses. Every load and store, including those made
// by helpers on behalf of the program, is checked against the access list
// before memory is touched. Division and modulo by zero yield 0 and execution
// continues.

#include <array>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "femto/isa.hpp"
#include "femto/verifier.hpp"

namespace femto::vm {

inline constexpr std::size_t kStackSize = 512;

enum class AccessMode { Read, Write };

struct MemoryRegion {
    std::uint64_t base = 0;
    std::uint64_t length = 0;
    bool readable = false;
    bool writable = false;
    std::string label;

    static MemoryRegion over(std::span<std::uint8_t> buffer, bool readable, bool writable, std::string label) {
        return {reinterpret_cast<std::uint64_t>(buffer.data()), buffer.size(), readable, writable, std::move(label)};
    }
    static MemoryRegion over(std::span<const std::uint8_t> buffer, std::string label) {
        return {reinterpret_cast<std::uint64_t>(buffer.data()), buffer.size(), true, false, std::move(label)};
    }

    [[nodiscard]] bool grants(AccessMode mode) const noexcept { return mode == AccessMode::Read ? readable : writable; }

    /// [addr, addr+len) inside this region, without wrapping.
    [[nodiscard]] bool contains(std::uint64_t addr, std::uint64_t len) const noexcept {
        return addr >= base && len <= length && addr - base <= length - len;
    }
};

/// Ordered region whitelist. The first entry is always the 512-byte stack.
class AccessList {
  public:
    explicit AccessList(MemoryRegion stack) { regions_.push_back(std::move(stack)); }

    void add(MemoryRegion region) {
        if (region.length == 0) return;
        regions_.push_back(std::move(region));
    }

    [[nodiscard]] std::span<const MemoryRegion> regions() const noexcept { return regions_; }
    [[nodiscard]] const MemoryRegion& stack() const noexcept { return regions_.front(); }

    [[nodiscard]] const MemoryRegion* find(std::string_view label) const noexcept {
        for (const auto& r : regions_)
            if (r.label == label) return &r;
        return nullptr;
    }

  private:
    std::vector<MemoryRegion> regions_;
};

/// Host addresses change from run to run; this names an address by the
/// nearest region within 64 KiB instead.
inline std::string describe_location(const AccessList& acl, std::uint64_t addr) {
    const MemoryRegion* best = nullptr;
    std::uint64_t best_distance = 0;
    for (const auto& r : acl.regions()) {
        std::uint64_t d = addr < r.base ? r.base - addr : (addr - r.base < r.length ? 0 : addr - r.base - r.length);
        if (!best || d < best_distance) best = &r, best_distance = d;
    }
    if (!best || best_distance > 0x10000) return "unmapped";
    if (addr >= best->base) return best->label + "+" + std::to_string(addr - best->base);
    return best->label + "-" + std::to_string(best->base - addr);
}

/// Allowed iff [addr, addr+len) lies entirely within one region granting `mode`.
inline bool check_access(const AccessList& acl, std::uint64_t addr, std::uint64_t len, AccessMode mode) noexcept {
    for (const auto& r : acl.regions())
        if (r.grants(mode) && r.contains(addr, len)) return true;
    return false;
}

enum class FaultKind { MemoryViolation, BudgetExceeded, BadSyscall };

constexpr std::string_view to_string(FaultKind kind) {
    switch (kind) {
    case FaultKind::MemoryViolation: return "MemoryViolation";
    case FaultKind::BudgetExceeded: return "BudgetExceeded";
    case FaultKind::BadSyscall: return "BadSyscall";
    }
    return "?";
}

struct Fault {
    FaultKind kind;
    std::size_t pc;
    std::uint64_t address = 0; // memory faults only
    std::uint64_t length = 0;
    std::string detail;
    std::string location; // memory faults: "label+offset" of the nearest region, or "unmapped"

    bool operator==(const Fault&) const = default;
};

struct ExecOutcome {
    std::uint64_t return_value = 0;
    std::uint64_t executed = 0;
    std::uint64_t branches_taken = 0;
    std::optional<Fault> fault;

    [[nodiscard]] bool ok() const noexcept { return !fault.has_value(); }
    bool operator==(const ExecOutcome&) const = default;
};

/// Raised by helpers for a denied memory access; exec turns it into a fault at the CALL.
struct HelperMemoryFault {
    std::uint64_t address;
    std::uint64_t length;
    AccessMode mode;
};

/// Arguments and services handed to a helper for one CALL.
template <class Env>
struct HelperCall {
    Env& env;
    const AccessList& acl;
    std::array<std::uint64_t, 5> args; // r1..r5
    std::size_t pc;

    [[nodiscard]] std::uint64_t arg(std::size_t i) const { return args.at(i); }

    void store(std::uint64_t addr, std::uint64_t value, std::size_t width = 8) const {
        if (!check_access(acl, addr, width, AccessMode::Write)) throw HelperMemoryFault{addr, width, AccessMode::Write};
        std::memcpy(reinterpret_cast<void*>(addr), &value, width);
    }

    [[nodiscard]] std::uint64_t load(std::uint64_t addr, std::size_t width = 8) const {
        if (!check_access(acl, addr, width, AccessMode::Read)) throw HelperMemoryFault{addr, width, AccessMode::Read};
        std::uint64_t v = 0;
        std::memcpy(&v, reinterpret_cast<const void*>(addr), width);
        return v;
    }
};

enum class SyscallErrorKind { DuplicateId };
using SyscallError = KindedError<SyscallErrorKind>;

template <class Env>
class SyscallTable {
  public:
    using Callback = std::function<std::uint64_t(HelperCall<Env>&)>;

    struct Entry {
        Callback fn;
        unsigned arity;
        std::string name;
    };

    SyscallTable& register_syscall(std::uint32_t id, Callback fn, unsigned arity, std::string name = {}) {
        if (arity > 5) throw Error("helpers take at most 5 arguments");
        if (!entries_.emplace(id, Entry{std::move(fn), arity, std::move(name)}).second)
            throw SyscallError(SyscallErrorKind::DuplicateId, "helper id " + std::to_string(id) + " already registered");
        return *this;
    }

    [[nodiscard]] const Entry* find(std::uint32_t id) const noexcept {
        auto it = entries_.find(id);
        return it == entries_.end() ? nullptr : &it->second;
    }

    [[nodiscard]] std::set<std::uint32_t> ids() const {
        std::set<std::uint32_t> out;
        for (const auto& [id, _] : entries_) out.insert(id);
        return out;
    }

    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }

  private:
    std::map<std::uint32_t, Entry> entries_;
};

/// Registers and stack of one run. r10 holds the stack top; programs address
/// the stack with negative offsets from it.
struct VmState {
    std::array<std::uint64_t, isa::kRegisterCount> regs{};
    alignas(16) std::array<std::uint8_t, kStackSize> stack{};
    std::size_t pc = 0;
    std::uint64_t executed = 0;
    std::uint64_t branches_taken = 0;

    [[nodiscard]] std::uint64_t stack_top() const noexcept {
        return reinterpret_cast<std::uint64_t>(stack.data()) + kStackSize;
    }
    [[nodiscard]] MemoryRegion stack_region() {
        return MemoryRegion::over(std::span<std::uint8_t>(stack), true, true, "stack");
    }
};

struct NullTracer {
    void on_step(std::size_t /*pc*/, const VmState& /*state*/) const noexcept {}
};

namespace detail {

inline std::uint64_t alu64(std::uint8_t code, std::uint64_t a, std::uint64_t b) {
    using namespace isa::op;
    switch (code) {
    case kAdd: return a + b;
    case kSub: return a - b;
    case kMul: return a * b;
    case kDiv: return b == 0 ? 0 : a / b;
    case kOr: return a | b;
    case kAnd: return a & b;
    case kLsh: return a << (b & 63);
    case kRsh: return a >> (b & 63);
    case kNeg: return ~a + 1;
    case kMod: return b == 0 ? 0 : a % b;
    case kXor: return a ^ b;
    case kMov: return b;
    case kArsh: return static_cast<std::uint64_t>(static_cast<std::int64_t>(a) >> (b & 63));
    default: return a;
    }
}

inline std::uint32_t alu32(std::uint8_t code, std::uint32_t a, std::uint32_t b) {
    using namespace isa::op;
    switch (code) {
    case kAdd: return a + b;
    case kSub: return a - b;
    case kMul: return a * b;
    case kDiv: return b == 0 ? 0 : a / b;
    case kOr: return a | b;
    case kAnd: return a & b;
    case kLsh: return a << (b & 31);
    case kRsh: return a >> (b & 31);
    case kNeg: return ~a + 1;
    case kMod: return b == 0 ? 0 : a % b;
    case kXor: return a ^ b;
    case kMov: return b;
    case kArsh: return static_cast<std::uint32_t>(static_cast<std::int32_t>(a) >> (b & 31));
    default: return a;
    }
}

inline std::uint64_t byteswap(std::uint64_t v, std::int32_t bits, bool to_big_endian) {
    // host is little-endian, so "le" only truncates
    switch (bits) {
    case 16: {
        auto x = static_cast<std::uint16_t>(v);
        return to_big_endian ? __builtin_bswap16(x) : x;
    }
    case 32: {
        auto x = static_cast<std::uint32_t>(v);
        return to_big_endian ? __builtin_bswap32(x) : x;
    }
    default: return to_big_endian ? __builtin_bswap64(v) : v;
    }
}

template <class T>
bool compare(std::uint8_t code, T a, T b) {
    using S = std::make_signed_t<T>;
    using namespace isa::op;
    switch (code) {
    case kJeq: return a == b;
    case kJgt: return a > b;
    case kJge: return a >= b;
    case kJset: return (a & b) != 0;
    case kJne: return a != b;
    case kJsgt: return static_cast<S>(a) > static_cast<S>(b);
    case kJsge: return static_cast<S>(a) >= static_cast<S>(b);
    case kJlt: return a < b;
    case kJle: return a <= b;
    case kJslt: return static_cast<S>(a) < static_cast<S>(b);
    case kJsle: return static_cast<S>(a) <= static_cast<S>(b);
    default: return false;
    }
}

} // namespace detail

/// Runs `vp` on a caller-provided state. r1 is the context base (0 when
/// absent), r2 the context length and r10 the stack top; the other registers
/// start at 0. The context region, when given, joins the access list after the
/// stack, followed by `regions`.
template <class Env, class Tracer = NullTracer>
ExecOutcome exec(const VerifiedProgram& vp, VmState& state, const std::optional<MemoryRegion>& ctx,
                 std::span<const MemoryRegion> regions, const SyscallTable<Env>& syscalls, Env& env, std::uint64_t budget,
                 Tracer&& tracer = {}) {
    using namespace isa;
    using namespace isa::op;

    state = VmState{};
    AccessList acl(state.stack_region());
    if (ctx) acl.add(*ctx);
    for (const auto& r : regions) acl.add(r);

    auto& reg = state.regs;
    reg[1] = ctx ? ctx->base : 0;
    reg[2] = ctx ? ctx->length : 0;
    reg[kFrameRegister] = state.stack_top();

    const auto& slots = vp.program().slots();
    auto& pc = state.pc;
    ExecOutcome out;

    auto finish = [&](std::optional<Fault> fault) {
        out.return_value = reg[0];
        out.executed = state.executed;
        out.branches_taken = state.branches_taken;
        out.fault = std::move(fault);
        return out;
    };
    auto memory_fault = [&](std::uint64_t addr, std::uint64_t len, AccessMode mode) {
        return finish(Fault{FaultKind::MemoryViolation, pc, addr, len,
                            std::string(mode == AccessMode::Read ? "read" : "write") + " of " + std::to_string(len) +
                                " bytes denied",
                            describe_location(acl, addr)});
    };

    for (;;) {
        if (state.executed >= budget)
            return finish(Fault{FaultKind::BudgetExceeded, pc, 0, 0, "budget of " + std::to_string(budget) + " exhausted", {}});
        tracer.on_step(pc, state);
        const Instruction& ins = slots[pc];
        ++state.executed;
        const std::uint8_t opcode = ins.opcode;
        const std::uint8_t code = op::code(opcode);

        switch (cls(opcode)) {
        case kClassAlu64: {
            if (code == kNeg) {
                reg[ins.dst] = ~reg[ins.dst] + 1;
            } else {
                std::uint64_t b = uses_register_source(opcode)
                                      ? reg[ins.src]
                                      : static_cast<std::uint64_t>(static_cast<std::int64_t>(ins.imm));
                reg[ins.dst] = detail::alu64(code, reg[ins.dst], b);
            }
            ++pc;
            break;
        }
        case kClassAlu32: {
            if (code == kEnd) {
                reg[ins.dst] = detail::byteswap(reg[ins.dst], ins.imm, uses_register_source(opcode));
            } else {
                auto a = static_cast<std::uint32_t>(reg[ins.dst]);
                std::uint32_t b = uses_register_source(opcode) ? static_cast<std::uint32_t>(reg[ins.src])
                                                               : static_cast<std::uint32_t>(ins.imm);
                reg[ins.dst] = detail::alu32(code, a, b);
            }
            ++pc;
            break;
        }
        case kClassLd: {
            // only lddw passes verification
            auto lo = static_cast<std::uint32_t>(ins.imm);
            auto hi = static_cast<std::uint32_t>(slots[pc + 1].imm);
            reg[ins.dst] = static_cast<std::uint64_t>(hi) << 32 | lo;
            pc += 2;
            break;
        }
        case kClassLdx: {
            const auto width = memory_width(opcode);
            const std::uint64_t addr = reg[ins.src] + static_cast<std::uint64_t>(static_cast<std::int64_t>(ins.offset));
            if (!check_access(acl, addr, width, AccessMode::Read)) return memory_fault(addr, width, AccessMode::Read);
            std::uint64_t v = 0;
            std::memcpy(&v, reinterpret_cast<const void*>(addr), width);
            reg[ins.dst] = v;
            ++pc;
            break;
        }
        case kClassSt:
        case kClassStx: {
            const auto width = memory_width(opcode);
            const std::uint64_t addr = reg[ins.dst] + static_cast<std::uint64_t>(static_cast<std::int64_t>(ins.offset));
            if (!check_access(acl, addr, width, AccessMode::Write)) return memory_fault(addr, width, AccessMode::Write);
            const std::uint64_t v =
                cls(opcode) == kClassStx ? reg[ins.src] : static_cast<std::uint64_t>(static_cast<std::int64_t>(ins.imm));
            std::memcpy(reinterpret_cast<void*>(addr), &v, width);
            ++pc;
            break;
        }
        case kClassJmp:
        case kClassJmp32: {
            if (opcode == kExitOp) return finish(std::nullopt);
            if (opcode == kCallOp) {
                const auto id = static_cast<std::uint32_t>(ins.imm);
                const auto* entry = syscalls.find(id);
                if (!entry)
                    return finish(Fault{FaultKind::BadSyscall, pc, 0, 0, "helper " + std::to_string(id) + " not registered", {}});
                HelperCall<Env> call{env, acl, {reg[1], reg[2], reg[3], reg[4], reg[5]}, pc};
                try {
                    reg[0] = entry->fn(call);
                } catch (const HelperMemoryFault& f) {
                    return memory_fault(f.address, f.length, f.mode);
                } catch (const std::exception& e) {
                    return finish(Fault{FaultKind::BadSyscall, pc, 0, 0, e.what(), {}});
                }
                ++pc;
                break;
            }
            bool taken = true;
            if (opcode != kJaOp) {
                const bool wide = cls(opcode) == kClassJmp;
                const std::uint64_t b = uses_register_source(opcode)
                                            ? reg[ins.src]
                                            : static_cast<std::uint64_t>(static_cast<std::int64_t>(ins.imm));
                taken = wide ? detail::compare<std::uint64_t>(code, reg[ins.dst], b)
                             : detail::compare<std::uint32_t>(code, static_cast<std::uint32_t>(reg[ins.dst]),
                                                              static_cast<std::uint32_t>(b));
            }
            if (taken) {
                ++state.branches_taken;
                pc = static_cast<std::size_t>(static_cast<std::int64_t>(pc) + 1 + ins.offset);
            } else {
                ++pc;
            }
            break;
        }
        }
    }
}

/// Convenience overload owning its VmState.
template <class Env, class Tracer = NullTracer>
ExecOutcome exec(const VerifiedProgram& vp, const std::optional<MemoryRegion>& ctx, std::span<const MemoryRegion> regions,
                 const SyscallTable<Env>& syscalls, Env& env, std::uint64_t budget, Tracer&& tracer = {}) {
    VmState state;
    return exec(vp, state, ctx, regions, syscalls, env, budget, std::forward<Tracer>(tracer));
}

/// Environment type for programs that use no host services.
struct NoEnv {};

inline bool r10_intact(const VmState& state) noexcept { return state.regs[isa::kFrameRegister] == state.stack_top(); }

} // namespace femto::vm
