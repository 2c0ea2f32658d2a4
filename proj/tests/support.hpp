#pragma once

// Oracles and generators shared by the unit and acceptance tests.

#include <array>
#include <cstdint>
#include <cstring>
#include <random>
#include <vector>

#include "femto/assembler.hpp"
#include "femto/isa.hpp"
#include "femto/verifier.hpp"
#include "femto/vm.hpp"

namespace femto::testing {

/// Textbook Fletcher-32: two ones'-complement 16-bit sums over little-endian
/// words, folded after every word. An odd trailing byte is ignored.
inline std::uint32_t fletcher32_reference(ByteView data) {
    std::uint32_t sum1 = 0xffff, sum2 = 0xffff;
    for (std::size_t i = 0; i + 1 < data.size(); i += 2) {
        std::uint32_t word = data[i] | static_cast<std::uint32_t>(data[i + 1]) << 8;
        sum1 += word;
        sum1 = (sum1 & 0xffff) + (sum1 >> 16);
        sum2 += sum1;
        sum2 = (sum2 & 0xffff) + (sum2 >> 16);
    }
    return sum2 << 16 | sum1;
}

inline Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
    Bytes out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(rng());
    return out;
}

inline isa::Instruction random_instruction(std::mt19937_64& rng) {
    isa::Instruction ins;
    ins.opcode = static_cast<std::uint8_t>(rng());
    ins.dst = static_cast<std::uint8_t>(rng() % 16);
    ins.src = static_cast<std::uint8_t>(rng() % 16);
    ins.offset = static_cast<std::int16_t>(rng());
    ins.imm = static_cast<std::int32_t>(rng());
    return ins;
}

/// Every opcode the verifier accepts (LDDW excluded: it needs a pair).
inline std::vector<std::uint8_t> supported_single_opcodes() {
    std::vector<std::uint8_t> out;
    for (int op = 0; op < 256; ++op) {
        auto c = isa::classify(static_cast<std::uint8_t>(op));
        if (c && !isa::is_wide_load(static_cast<std::uint8_t>(op))) out.push_back(static_cast<std::uint8_t>(op));
    }
    return out;
}

/// Shapes the generator is allowed to use for memory operands; offsets land
/// near region edges so both in-bounds and boundary-crossing accesses occur.
struct FuzzLayout {
    std::size_t ctx_len = 64;
};

/// Random program that passes verification by construction for `allowed`:
/// registers r0-r9 written, r10 only read, jumps in range and not into a
/// wide-load continuation, CALL ids from `allowed`, final slot EXIT.
inline isa::Program random_valid_program(std::mt19937_64& rng, std::size_t max_slots,
                                         const std::vector<std::uint32_t>& allowed, const FuzzLayout& layout = {}) {
    using namespace isa;
    auto pick = [&](std::uint64_t n) { return static_cast<std::size_t>(rng() % n); };
    static const std::vector<std::uint8_t> alu_codes = {op::kAdd, op::kSub, op::kMul, op::kDiv, op::kOr,  op::kAnd, op::kLsh,
                                                        op::kRsh, op::kNeg, op::kMod, op::kXor, op::kMov, op::kArsh};
    static const std::vector<std::uint8_t> jmp_codes = {op::kJeq, op::kJgt, op::kJge, op::kJset, op::kJne,  op::kJsgt,
                                                        op::kJsge, op::kJlt, op::kJle, op::kJslt, op::kJsle};
    static const std::array<std::uint8_t, 4> sizes = {op::kSizeB, op::kSizeH, op::kSizeW, op::kSizeDW};

    const std::size_t n = 2 + pick(max_slots - 1);
    std::vector<Instruction> slots;
    std::vector<bool> continuation;
    // jumps are patched once the final length is known
    std::vector<std::size_t> jumps;

    while (slots.size() + 1 < n) {
        Instruction ins;
        const auto kind = pick(100);
        const auto writable_reg = [&] { return static_cast<std::uint8_t>(pick(10)); };
        const auto any_reg = [&] { return static_cast<std::uint8_t>(pick(11)); };
        if (kind < 35) {
            const bool wide = pick(2);
            auto code = alu_codes[pick(alu_codes.size())];
            bool reg = code != op::kNeg && pick(2);
            ins.opcode = static_cast<std::uint8_t>((wide ? op::kClassAlu64 : op::kClassAlu32) | code | (reg ? op::kSrcReg : 0));
            ins.dst = writable_reg();
            ins.src = reg ? any_reg() : 0;
            ins.imm = pick(4) == 0 ? static_cast<std::int32_t>(rng()) : static_cast<std::int32_t>(pick(70)) - 3;
        } else if (kind < 40) {
            static const std::array<std::int32_t, 3> widths = {16, 32, 64};
            ins.opcode = static_cast<std::uint8_t>(op::kClassAlu32 | op::kEnd | (pick(2) ? op::kSrcReg : 0));
            ins.dst = writable_reg();
            ins.imm = widths[pick(3)];
        } else if (kind < 45 && slots.size() + 2 < n) {
            ins.opcode = op::kLddw;
            ins.dst = writable_reg();
            ins.imm = static_cast<std::int32_t>(rng());
            slots.push_back(ins);
            continuation.push_back(false);
            Instruction hi;
            hi.imm = static_cast<std::int32_t>(rng());
            slots.push_back(hi);
            continuation.push_back(true);
            continue;
        } else if (kind < 70) {
            // memory: base is the stack top, the context pointer, or any register
            const auto size = sizes[pick(4)];
            const auto base_choice = pick(10);
            std::uint8_t base = base_choice < 5 ? 10 : base_choice < 9 ? 1 : any_reg();
            std::int16_t off;
            if (base == 10) off = static_cast<std::int16_t>(-static_cast<int>(pick(vm::kStackSize + 16)));
            else off = static_cast<std::int16_t>(static_cast<int>(pick(layout.ctx_len + 24)) - 8);
            const auto which = pick(3);
            if (which == 0) {
                ins.opcode = static_cast<std::uint8_t>(op::kClassLdx | op::kModeMem | size);
                ins.dst = writable_reg();
                ins.src = base;
            } else if (which == 1) {
                ins.opcode = static_cast<std::uint8_t>(op::kClassStx | op::kModeMem | size);
                ins.dst = base;
                ins.src = any_reg();
            } else {
                ins.opcode = static_cast<std::uint8_t>(op::kClassSt | op::kModeMem | size);
                ins.dst = base;
                ins.imm = static_cast<std::int32_t>(rng());
            }
            ins.offset = off;
        } else if (kind < 92) {
            if (pick(6) == 0) {
                ins.opcode = op::kJaOp;
            } else {
                const bool wide = pick(3) != 0;
                const bool reg = pick(2);
                ins.opcode = static_cast<std::uint8_t>((wide ? op::kClassJmp : op::kClassJmp32) | jmp_codes[pick(jmp_codes.size())] |
                                                       (reg ? op::kSrcReg : 0));
                ins.dst = any_reg();
                ins.src = reg ? any_reg() : 0;
                ins.imm = static_cast<std::int32_t>(pick(20)) - 2;
            }
            jumps.push_back(slots.size());
        } else if (kind < 97 && !allowed.empty()) {
            ins.opcode = op::kCallOp;
            ins.imm = static_cast<std::int32_t>(allowed[pick(allowed.size())]);
        } else {
            ins.opcode = op::kExitOp;
        }
        slots.push_back(ins);
        continuation.push_back(false);
    }
    Instruction exit;
    exit.opcode = op::kExitOp;
    slots.push_back(exit);
    continuation.push_back(false);

    const auto total = slots.size();
    for (auto j : jumps) {
        std::size_t target;
        do {
            target = pick(total);
        } while (continuation[target]);
        slots[j].offset = static_cast<std::int16_t>(static_cast<std::int64_t>(target) - static_cast<std::int64_t>(j) - 1);
    }
    return Program(std::move(slots));
}

/// Host memory with guard bytes on both sides of each buffer the VM can see.
template <std::size_t Guard = 64>
struct Guarded {
    static constexpr std::uint8_t kCanary = 0xa5;

    struct Block {
        std::array<std::uint8_t, Guard> before;
        vm::VmState state;
        std::array<std::uint8_t, Guard> after;
    };

    Block block;
    std::vector<std::uint8_t> ctx_storage;
    std::size_t ctx_len;

    explicit Guarded(std::size_t ctx_len) : ctx_storage(ctx_len + 2 * Guard), ctx_len(ctx_len) { reset(); }

    void reset() {
        block.before.fill(kCanary);
        block.after.fill(kCanary);
        block.state = vm::VmState{};
        std::fill(ctx_storage.begin(), ctx_storage.end(), kCanary);
        std::fill(ctx_storage.begin() + Guard, ctx_storage.begin() + static_cast<std::ptrdiff_t>(Guard + ctx_len), 0);
    }

    std::span<std::uint8_t> ctx() { return std::span<std::uint8_t>(ctx_storage).subspan(Guard, ctx_len); }

    [[nodiscard]] bool intact() const {
        auto ok = [](auto first, auto last) { return std::all_of(first, last, [](std::uint8_t b) { return b == kCanary; }); };
        return ok(block.before.begin(), block.before.end()) && ok(block.after.begin(), block.after.end()) &&
               ok(ctx_storage.begin(), ctx_storage.begin() + Guard) &&
               ok(ctx_storage.begin() + static_cast<std::ptrdiff_t>(Guard + ctx_len), ctx_storage.end());
    }
};

/// Helper table for fuzzing: id 1 returns its first argument, id 2 stores 8
/// bytes at the address in r1 through the access check.
struct FuzzEnv {
    std::uint64_t calls = 0;
};

inline vm::SyscallTable<FuzzEnv> fuzz_syscalls() {
    vm::SyscallTable<FuzzEnv> t;
    t.register_syscall(1, [](vm::HelperCall<FuzzEnv>& c) { ++c.env.calls; return c.arg(0); }, 1, "echo");
    t.register_syscall(2, [](vm::HelperCall<FuzzEnv>& c) {
        ++c.env.calls;
        c.store(c.arg(0), c.arg(1), 8);
        return std::uint64_t{0};
    }, 2, "poke");
    return t;
}

/// pc-in-range tracer.
struct PcTracer {
    std::size_t slots;
    std::uint64_t* violations;
    void on_step(std::size_t pc, const vm::VmState&) const {
        if (pc >= slots) ++*violations;
    }
};

} // namespace femto::testing
