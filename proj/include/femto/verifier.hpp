#pragma once

// Pre-flight structural checks. A program is accepted when every register
// field names r0..r10, no instruction writes r10, every jump lands on an
// instruction slot inside the program, control cannot run past the last slot,
// the slot count is within the instruction limit and every helper call is
// permitted.

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "femto/assembler.hpp"
#include "femto/isa.hpp"

namespace femto {

struct VerifyLimits {
    std::uint64_t max_instructions = 4096;
    std::uint64_t max_branches = 256;

    /// Runtime instruction budget, N_i * N_b.
    [[nodiscard]] std::uint64_t budget() const noexcept { return max_instructions * max_branches; }

    void validate() const {
        if (max_instructions < 1 || max_branches < 1) throw Error("verifier limits must both be at least 1");
    }
};

enum class VerifyErrorKind {
    BadRegisterField,
    WriteToR10,
    JumpOutOfBounds,
    TruncatedWideLoad,
    UnknownOpcode,
    NoExit,
    TooLong,
    UnknownSyscall,
};

constexpr std::string_view to_string(VerifyErrorKind kind) {
    switch (kind) {
    case VerifyErrorKind::BadRegisterField: return "BadRegisterField";
    case VerifyErrorKind::WriteToR10: return "WriteToR10";
    case VerifyErrorKind::JumpOutOfBounds: return "JumpOutOfBounds";
    case VerifyErrorKind::TruncatedWideLoad: return "TruncatedWideLoad";
    case VerifyErrorKind::UnknownOpcode: return "UnknownOpcode";
    case VerifyErrorKind::NoExit: return "NoExit";
    case VerifyErrorKind::TooLong: return "TooLong";
    case VerifyErrorKind::UnknownSyscall: return "UnknownSyscall";
    }
    return "?";
}

struct VerifyError {
    VerifyErrorKind kind;
    std::size_t slot_index;
    std::string instruction; // listing of the offending slot
    std::string detail;

    bool operator==(const VerifyError&) const = default;
};

/// A program together with the facts established by verify(). Only verify()
/// constructs one, so holding a VerifiedProgram means the checks passed.
class VerifiedProgram {
  public:
    [[nodiscard]] const isa::Program& program() const noexcept { return program_; }
    [[nodiscard]] const std::set<std::size_t>& jump_targets() const noexcept { return jump_targets_; }
    [[nodiscard]] std::uint64_t budget() const noexcept { return budget_; }
    [[nodiscard]] const std::set<std::uint32_t>& syscalls_used() const noexcept { return syscalls_used_; }

  private:
    VerifiedProgram() = default;
    friend std::variant<VerifiedProgram, std::vector<VerifyError>> verify(const isa::Program&, const VerifyLimits&,
                                                                          const std::set<std::uint32_t>&);

    isa::Program program_;
    std::set<std::size_t> jump_targets_;
    std::uint64_t budget_ = 0;
    std::set<std::uint32_t> syscalls_used_;
};

using VerifyResult = std::variant<VerifiedProgram, std::vector<VerifyError>>;

namespace detail {

inline std::string describe_slot(const isa::Program& p, std::size_t i) {
    if (i >= p.size()) return "<end>";
    const auto* next = i + 1 < p.size() ? &p[i + 1] : nullptr;
    if (auto text = isa::format_instruction(p[i], next)) return *text;
    return ".raw 0x" + to_hex(isa::encode_instruction(p[i]));
}

inline bool is_continuation_slot(const isa::Instruction& ins) {
    return ins.opcode == 0 && ins.dst == 0 && ins.src == 0 && ins.offset == 0;
}

inline bool valid_byteswap_width(std::int32_t imm) { return imm == 16 || imm == 32 || imm == 64; }

} // namespace detail

/// Returns every violation found, in slot order, or the verified program.
inline VerifyResult verify(const isa::Program& p, const VerifyLimits& limits, const std::set<std::uint32_t>& allowed_syscalls) {
    using namespace isa;
    limits.validate();
    std::vector<VerifyError> errors;
    const std::size_t n = p.size();
    auto report = [&](VerifyErrorKind kind, std::size_t slot, std::string msg) {
        errors.push_back({kind, slot, femto::detail::describe_slot(p, slot), std::move(msg)});
    };

    if (n == 0) {
        errors.push_back({VerifyErrorKind::NoExit, 0, "<empty>", "program has no instructions"});
        return errors;
    }
    if (n > limits.max_instructions)
        report(VerifyErrorKind::TooLong, static_cast<std::size_t>(limits.max_instructions),
               std::to_string(n) + " slots exceed the limit of " + std::to_string(limits.max_instructions));

    std::vector<bool> continuation(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_wide_load(p[i].opcode)) continue;
        if (i + 1 >= n) {
            report(VerifyErrorKind::TruncatedWideLoad, i, "wide load is missing its second slot");
        } else {
            continuation[i + 1] = true;
            if (!femto::detail::is_continuation_slot(p[i + 1]))
                report(VerifyErrorKind::TruncatedWideLoad, i, "second slot of wide load is not a zero-opcode continuation");
        }
        ++i;
    }

    VerifiedProgram vp;
    bool has_exit = false;
    std::size_t last_instruction = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (continuation[i]) continue;
        last_instruction = i;
        const auto& ins = p[i];
        auto cls = classify(ins.opcode);
        if (!cls) {
            report(VerifyErrorKind::UnknownOpcode, i, "opcode 0x" + to_hex(std::array{ins.opcode}) + " is not supported");
            continue;
        }
        if (cls->tag == ClassTag::Exit) has_exit = true;
        if (ins.dst >= kRegisterCount || ins.src >= kRegisterCount) {
            report(VerifyErrorKind::BadRegisterField, i,
                   "register field out of range (dst r" + std::to_string(ins.dst) + ", src r" + std::to_string(ins.src) + ")");
            continue;
        }
        // encodings that reuse a supported opcode byte for an unsupported variant
        if ((cls->tag == ClassTag::Ld && ins.src != 0) || (cls->tag == ClassTag::Call && ins.src != 0) ||
            (op::code(ins.opcode) == op::kEnd && cls->tag == ClassTag::Alu32 && !femto::detail::valid_byteswap_width(ins.imm))) {
            report(VerifyErrorKind::UnknownOpcode, i, "opcode 0x" + to_hex(std::array{ins.opcode}) + " variant is not supported");
            continue;
        }
        if (writes_dst_register(ins.opcode) && ins.dst == kFrameRegister) {
            report(VerifyErrorKind::WriteToR10, i, "destination r10 is read-only");
            continue;
        }
        switch (cls->tag) {
        case ClassTag::Jmp: {
            auto target = static_cast<std::int64_t>(i) + 1 + ins.offset;
            if (target < 0 || target >= static_cast<std::int64_t>(n)) {
                report(VerifyErrorKind::JumpOutOfBounds, i, "jump target " + std::to_string(target) + " outside [0, " +
                                                                std::to_string(n) + ")");
            } else if (continuation[static_cast<std::size_t>(target)]) {
                report(VerifyErrorKind::TruncatedWideLoad, i,
                       "jump target " + std::to_string(target) + " is the second slot of a wide load");
            } else {
                vp.jump_targets_.insert(static_cast<std::size_t>(target));
            }
            break;
        }
        case ClassTag::Call: {
            auto id = static_cast<std::uint32_t>(ins.imm);
            if (!allowed_syscalls.contains(id))
                report(VerifyErrorKind::UnknownSyscall, i, "helper 0x" + isa::detail::hex_u64(id).substr(2) + " is not permitted");
            else
                vp.syscalls_used_.insert(id);
            break;
        }
        default: break;
        }
    }

    const auto last_opcode = p[last_instruction].opcode;
    if (!has_exit)
        report(VerifyErrorKind::NoExit, last_instruction, "program contains no exit");
    else if (last_opcode != op::kExitOp && last_opcode != op::kJaOp)
        report(VerifyErrorKind::NoExit, last_instruction, "control can run past the last instruction");

    if (!errors.empty()) return errors;
    vp.program_ = p;
    vp.budget_ = limits.budget();
    return vp;
}

/// "OK" for an empty list, otherwise one line per error in input order.
inline std::string verification_report(std::span<const VerifyError> errors) {
    if (errors.empty()) return "OK\n";
    std::string out;
    for (const auto& e : errors)
        out += "slot " + std::to_string(e.slot_index) + ": " + e.instruction + ": " + std::string(to_string(e.kind)) + " (" +
               e.detail + ")\n";
    return out;
}

} // namespace femto
