#pragma once

// eBPF instruction model: 8-byte slots holding an 8-bit opcode, two 4-bit
// register fields, a signed 16-bit offset and a signed 32-bit immediate.
// Multi-byte fields are little-endian.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "femto/common.hpp"

namespace femto::isa {

inline constexpr std::size_t kSlotSize = 8;
inline constexpr std::uint8_t kRegisterCount = 11; // r0..r10
inline constexpr std::uint8_t kFrameRegister = 10;
inline constexpr std::uint8_t kEncodableRegisters = 16;

namespace op {
// instruction classes (low 3 bits)
inline constexpr std::uint8_t kClassLd = 0x00;
inline constexpr std::uint8_t kClassLdx = 0x01;
inline constexpr std::uint8_t kClassSt = 0x02;
inline constexpr std::uint8_t kClassStx = 0x03;
inline constexpr std::uint8_t kClassAlu32 = 0x04;
inline constexpr std::uint8_t kClassJmp = 0x05;
inline constexpr std::uint8_t kClassJmp32 = 0x06;
inline constexpr std::uint8_t kClassAlu64 = 0x07;

// operand source bit
inline constexpr std::uint8_t kSrcImm = 0x00;
inline constexpr std::uint8_t kSrcReg = 0x08;

// memory size field
inline constexpr std::uint8_t kSizeW = 0x00;
inline constexpr std::uint8_t kSizeH = 0x08;
inline constexpr std::uint8_t kSizeB = 0x10;
inline constexpr std::uint8_t kSizeDW = 0x18;
inline constexpr std::uint8_t kModeImm = 0x00;
inline constexpr std::uint8_t kModeMem = 0x60;

// ALU operations (high nibble)
inline constexpr std::uint8_t kAdd = 0x00;
inline constexpr std::uint8_t kSub = 0x10;
inline constexpr std::uint8_t kMul = 0x20;
inline constexpr std::uint8_t kDiv = 0x30;
inline constexpr std::uint8_t kOr = 0x40;
inline constexpr std::uint8_t kAnd = 0x50;
inline constexpr std::uint8_t kLsh = 0x60;
inline constexpr std::uint8_t kRsh = 0x70;
inline constexpr std::uint8_t kNeg = 0x80;
inline constexpr std::uint8_t kMod = 0x90;
inline constexpr std::uint8_t kXor = 0xa0;
inline constexpr std::uint8_t kMov = 0xb0;
inline constexpr std::uint8_t kArsh = 0xc0;
inline constexpr std::uint8_t kEnd = 0xd0;

// jump operations (high nibble)
inline constexpr std::uint8_t kJa = 0x00;
inline constexpr std::uint8_t kJeq = 0x10;
inline constexpr std::uint8_t kJgt = 0x20;
inline constexpr std::uint8_t kJge = 0x30;
inline constexpr std::uint8_t kJset = 0x40;
inline constexpr std::uint8_t kJne = 0x50;
inline constexpr std::uint8_t kJsgt = 0x60;
inline constexpr std::uint8_t kJsge = 0x70;
inline constexpr std::uint8_t kCall = 0x80;
inline constexpr std::uint8_t kExit = 0x90;
inline constexpr std::uint8_t kJlt = 0xa0;
inline constexpr std::uint8_t kJle = 0xb0;
inline constexpr std::uint8_t kJslt = 0xc0;
inline constexpr std::uint8_t kJsle = 0xd0;

// frequently referenced full opcodes
inline constexpr std::uint8_t kLddw = kClassLd | kSizeDW | kModeImm; // 0x18
inline constexpr std::uint8_t kMov64Imm = kClassAlu64 | kMov | kSrcImm; // 0xb7
inline constexpr std::uint8_t kMov64Reg = kClassAlu64 | kMov | kSrcReg; // 0xbf
inline constexpr std::uint8_t kJaOp = kClassJmp | kJa; // 0x05
inline constexpr std::uint8_t kCallOp = kClassJmp | kCall; // 0x85
inline constexpr std::uint8_t kExitOp = kClassJmp | kExit; // 0x95

constexpr std::uint8_t cls(std::uint8_t opcode) { return opcode & 0x07; }
constexpr std::uint8_t code(std::uint8_t opcode) { return opcode & 0xf0; }
constexpr std::uint8_t size_field(std::uint8_t opcode) { return opcode & 0x18; }
constexpr bool uses_register_source(std::uint8_t opcode) { return (opcode & kSrcReg) != 0; }
} // namespace op

/// One decoded instruction slot. Register fields keep their raw 4-bit values.
struct Instruction {
    std::uint8_t opcode = 0;
    std::uint8_t dst = 0;
    std::uint8_t src = 0;
    std::int16_t offset = 0;
    std::int32_t imm = 0;

    bool operator==(const Instruction&) const = default;
};

enum class EncodeErrorKind { FieldOverflow };
using EncodeError = KindedError<EncodeErrorKind>;

using Slot = std::array<std::uint8_t, kSlotSize>;

/// Total: any 8 bytes decode.
constexpr Instruction decode_instruction(std::span<const std::uint8_t, kSlotSize> bytes) noexcept {
    Instruction ins;
    ins.opcode = bytes[0];
    ins.dst = bytes[1] & 0x0f;
    ins.src = static_cast<std::uint8_t>(bytes[1] >> 4);
    ins.offset = static_cast<std::int16_t>(static_cast<std::uint16_t>(bytes[2] | bytes[3] << 8));
    ins.imm = static_cast<std::int32_t>(static_cast<std::uint32_t>(bytes[4]) | static_cast<std::uint32_t>(bytes[5]) << 8 |
                                        static_cast<std::uint32_t>(bytes[6]) << 16 |
                                        static_cast<std::uint32_t>(bytes[7]) << 24);
    return ins;
}

inline Slot encode_instruction(const Instruction& ins) {
    if (ins.dst >= kEncodableRegisters || ins.src >= kEncodableRegisters)
        throw EncodeError(EncodeErrorKind::FieldOverflow, "register field does not fit in 4 bits");
    auto off = static_cast<std::uint16_t>(ins.offset);
    auto imm = static_cast<std::uint32_t>(ins.imm);
    return Slot{ins.opcode,
                static_cast<std::uint8_t>(ins.src << 4 | ins.dst),
                static_cast<std::uint8_t>(off),
                static_cast<std::uint8_t>(off >> 8),
                static_cast<std::uint8_t>(imm),
                static_cast<std::uint8_t>(imm >> 8),
                static_cast<std::uint8_t>(imm >> 16),
                static_cast<std::uint8_t>(imm >> 24)};
}

/// An ordered sequence of instruction slots. A wide load spans two slots.
class Program {
  public:
    Program() = default;
    explicit Program(std::vector<Instruction> slots) : slots_(std::move(slots)) {}

    /// Throws Error if the byte count is not a multiple of the slot size.
    static Program from_bytes(ByteView bytes) {
        if (bytes.size() % kSlotSize != 0)
            throw Error("bytecode length " + std::to_string(bytes.size()) + " is not a multiple of 8");
        std::vector<Instruction> slots;
        slots.reserve(bytes.size() / kSlotSize);
        for (std::size_t i = 0; i < bytes.size(); i += kSlotSize)
            slots.push_back(decode_instruction(bytes.subspan(i).first<kSlotSize>()));
        return Program(std::move(slots));
    }

    [[nodiscard]] Bytes to_bytes() const {
        Bytes out;
        out.reserve(byte_len());
        for (const auto& ins : slots_) {
            auto slot = encode_instruction(ins);
            out.insert(out.end(), slot.begin(), slot.end());
        }
        return out;
    }

    [[nodiscard]] const std::vector<Instruction>& slots() const noexcept { return slots_; }
    [[nodiscard]] std::size_t size() const noexcept { return slots_.size(); }
    [[nodiscard]] bool empty() const noexcept { return slots_.empty(); }
    [[nodiscard]] std::size_t byte_len() const noexcept { return slots_.size() * kSlotSize; }
    [[nodiscard]] const Instruction& operator[](std::size_t i) const { return slots_[i]; }

    void push_back(const Instruction& ins) { slots_.push_back(ins); }

    bool operator==(const Program&) const = default;

  private:
    std::vector<Instruction> slots_;
};

enum class ClassTag { Alu32, Alu64, Ld, Ldx, St, Stx, Jmp, Call, Exit };
enum class OperandSource { Register, Immediate };

/// Taxonomy entry for a supported opcode. `width` is the access size for
/// memory instructions and the operand width (4 or 8) for ALU and jumps.
struct OpcodeClass {
    ClassTag tag;
    OperandSource source;
    std::uint8_t width;

    bool operator==(const OpcodeClass&) const = default;
};

constexpr std::uint8_t memory_width(std::uint8_t opcode) {
    switch (op::size_field(opcode)) {
    case op::kSizeB: return 1;
    case op::kSizeH: return 2;
    case op::kSizeW: return 4;
    default: return 8;
    }
}

/// Maps an opcode to its class, or nullopt when it is outside the supported subset.
constexpr std::optional<OpcodeClass> classify(std::uint8_t opcode) {
    const auto source = op::uses_register_source(opcode) ? OperandSource::Register : OperandSource::Immediate;
    switch (op::cls(opcode)) {
    case op::kClassAlu32:
    case op::kClassAlu64: {
        const bool wide = op::cls(opcode) == op::kClassAlu64;
        const auto code = op::code(opcode);
        if (code == op::kNeg && source == OperandSource::Register) return std::nullopt;
        if (code == op::kEnd && wide) return std::nullopt;
        if (code > op::kEnd) return std::nullopt;
        return OpcodeClass{wide ? ClassTag::Alu64 : ClassTag::Alu32, source, static_cast<std::uint8_t>(wide ? 8 : 4)};
    }
    case op::kClassLd:
        if (opcode == op::kLddw) return OpcodeClass{ClassTag::Ld, OperandSource::Immediate, 8};
        return std::nullopt;
    case op::kClassLdx:
        if ((opcode & 0xe0) != op::kModeMem) return std::nullopt;
        return OpcodeClass{ClassTag::Ldx, OperandSource::Register, memory_width(opcode)};
    case op::kClassSt:
        if ((opcode & 0xe0) != op::kModeMem) return std::nullopt;
        return OpcodeClass{ClassTag::St, OperandSource::Immediate, memory_width(opcode)};
    case op::kClassStx:
        if ((opcode & 0xe0) != op::kModeMem) return std::nullopt;
        return OpcodeClass{ClassTag::Stx, OperandSource::Register, memory_width(opcode)};
    case op::kClassJmp:
    case op::kClassJmp32: {
        const bool wide = op::cls(opcode) == op::kClassJmp;
        const auto code = op::code(opcode);
        const auto width = static_cast<std::uint8_t>(wide ? 8 : 4);
        switch (code) {
        case op::kJa:
            if (!wide || source == OperandSource::Register) return std::nullopt;
            return OpcodeClass{ClassTag::Jmp, OperandSource::Immediate, width};
        case op::kCall:
            if (!wide || source == OperandSource::Register) return std::nullopt;
            return OpcodeClass{ClassTag::Call, OperandSource::Immediate, width};
        case op::kExit:
            if (!wide || source == OperandSource::Register) return std::nullopt;
            return OpcodeClass{ClassTag::Exit, OperandSource::Immediate, width};
        case 0xe0:
        case 0xf0: return std::nullopt;
        default: return OpcodeClass{ClassTag::Jmp, source, width};
        }
    }
    default: return std::nullopt;
    }
}

constexpr bool is_wide_load(std::uint8_t opcode) { return opcode == op::kLddw; }

constexpr bool is_jump(std::uint8_t opcode) {
    auto c = classify(opcode);
    return c && c->tag == ClassTag::Jmp;
}

constexpr bool is_conditional_jump(std::uint8_t opcode) { return is_jump(opcode) && opcode != op::kJaOp; }

/// True for opcodes whose dst field names a register that is written.
constexpr bool writes_dst_register(std::uint8_t opcode) {
    auto c = classify(opcode);
    if (!c) return false;
    switch (c->tag) {
    case ClassTag::Alu32:
    case ClassTag::Alu64:
    case ClassTag::Ld:
    case ClassTag::Ldx: return true;
    default: return false;
    }
}

} // namespace femto::isa
