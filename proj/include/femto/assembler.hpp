#pragma once

// Text assembler and disassembler for the supported eBPF subset.
//
// Grammar (one instruction per line, `;` starts a comment):
//
//   line      := [label ':'] [instruction] [';' comment]
//   label     := [A-Za-z_][A-Za-z0-9_.]*
//   reg       := 'r' 0..15                 (r11..r15 assemble, the verifier rejects them)
//   mem       := '[' reg ('+'|'-') number ']'
//   target    := label | '+' label | ('+'|'-') number     (numbers are slot offsets)
//
//   <alu>64 reg, reg|imm    <alu>32 reg, reg|imm
//       alu := add sub mul div or and lsh rsh mod xor mov arsh
//   neg64 reg   neg32 reg
//   le16|le32|le64|be16|be32|be64 reg
//   lddw reg, imm64                         (occupies two slots)
//   ldxb|ldxh|ldxw|ldxdw reg, mem
//   stb|sth|stw|stdw mem, imm
//   stxb|stxh|stxw|stxdw mem, reg
//   ja target
//   j<cond> reg, reg|imm, target   j<cond>32 reg, reg|imm, target
//       cond := eq gt ge set ne sgt sge lt le slt sle
//   call imm
//   exit
//   .raw 0x<16 hex digits>                  (one slot, bytes in file order)

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "femto/isa.hpp"

namespace femto::isa {

enum class AsmErrorKind { ParseError, UnknownMnemonic, UndefinedLabel };

class AsmError : public KindedError<AsmErrorKind> {
  public:
    AsmError(AsmErrorKind kind, std::size_t line, const std::string& message)
        : KindedError(kind, "line " + std::to_string(line) + ": " + message), line_(line) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

namespace detail {

struct AluName {
    std::string_view name;
    std::uint8_t code;
};
inline constexpr AluName kAluOps[] = {
    {"add", op::kAdd}, {"sub", op::kSub}, {"mul", op::kMul}, {"div", op::kDiv},   {"or", op::kOr},
    {"and", op::kAnd}, {"lsh", op::kLsh}, {"rsh", op::kRsh}, {"mod", op::kMod},   {"xor", op::kXor},
    {"mov", op::kMov}, {"arsh", op::kArsh}, {"neg", op::kNeg},
};
inline constexpr AluName kJumpOps[] = {
    {"jeq", op::kJeq}, {"jgt", op::kJgt},   {"jge", op::kJge},   {"jset", op::kJset},
    {"jne", op::kJne}, {"jsgt", op::kJsgt}, {"jsge", op::kJsge}, {"jlt", op::kJlt},
    {"jle", op::kJle}, {"jslt", op::kJslt}, {"jsle", op::kJsle},
};
struct SizeName {
    std::string_view suffix;
    std::uint8_t size;
};
inline constexpr SizeName kSizes[] = {{"b", op::kSizeB}, {"h", op::kSizeH}, {"w", op::kSizeW}, {"dw", op::kSizeDW}};

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline bool is_label_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
inline bool is_label_char(char c) { return is_label_start(c) || (c >= '0' && c <= '9') || c == '.'; }

inline bool is_label(std::string_view s) {
    return !s.empty() && is_label_start(s.front()) && std::all_of(s.begin(), s.end(), is_label_char);
}

/// Signed or unsigned literal (decimal or 0x-hex), widened so both int64 and uint64 ranges fit.
inline std::optional<__int128> parse_integer(std::string_view s) {
    s = trim(s);
    bool neg = false;
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
        neg = s.front() == '-';
        s.remove_prefix(1);
    }
    int base = 10;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
        base = 16;
        s.remove_prefix(2);
    }
    if (s.empty()) return std::nullopt;
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    __int128 r = v;
    return neg ? -r : r;
}

struct Pending {
    std::size_t slot;
    std::size_t line;
    std::string label;
};

class Parser {
  public:
    std::vector<Instruction> slots;
    std::vector<Pending> fixups;

    void line(std::string_view text, std::size_t lineno) {
        lineno_ = lineno;
        if (auto c = text.find(';'); c != std::string_view::npos) text = text.substr(0, c);
        text = trim(text);
        if (auto colon = text.find(':'); colon != std::string_view::npos && text.find('[') > colon) {
            auto name = trim(text.substr(0, colon));
            if (!is_label(name)) fail(AsmErrorKind::ParseError, "invalid label '" + std::string(name) + "'");
            if (!labels.emplace(std::string(name), slots.size()).second)
                fail(AsmErrorKind::ParseError, "duplicate label '" + std::string(name) + "'");
            text = trim(text.substr(colon + 1));
        }
        if (text.empty()) return;
        auto space = text.find_first_of(" \t");
        auto mnemonic = text.substr(0, space);
        auto rest = space == std::string_view::npos ? std::string_view{} : trim(text.substr(space));
        instruction(mnemonic, split_operands(rest));
    }

    void resolve() {
        for (const auto& f : fixups) {
            auto it = labels.find(f.label);
            if (it == labels.end()) {
                lineno_ = f.line;
                fail(AsmErrorKind::UndefinedLabel, "undefined label '" + f.label + "'");
            }
            auto delta = static_cast<std::int64_t>(it->second) - static_cast<std::int64_t>(f.slot) - 1;
            if (delta < std::numeric_limits<std::int16_t>::min() || delta > std::numeric_limits<std::int16_t>::max()) {
                lineno_ = f.line;
                fail(AsmErrorKind::ParseError, "jump to '" + f.label + "' does not fit in 16 bits");
            }
            slots[f.slot].offset = static_cast<std::int16_t>(delta);
        }
    }

  private:
    std::map<std::string, std::size_t> labels;
    std::size_t lineno_ = 0;

    [[noreturn]] void fail(AsmErrorKind kind, const std::string& msg) const { throw AsmError(kind, lineno_, msg); }

    static std::vector<std::string_view> split_operands(std::string_view rest) {
        std::vector<std::string_view> out;
        if (rest.empty()) return out;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= rest.size(); ++i) {
            if (i == rest.size() || rest[i] == ',') {
                out.push_back(trim(rest.substr(start, i - start)));
                start = i + 1;
            }
        }
        return out;
    }

    void expect_operands(const std::vector<std::string_view>& ops, std::size_t n, std::string_view mnemonic) const {
        if (ops.size() != n)
            fail(AsmErrorKind::ParseError, std::string(mnemonic) + " expects " + std::to_string(n) + " operand(s), got " +
                                               std::to_string(ops.size()));
    }

    std::optional<std::uint8_t> try_register(std::string_view s) const {
        if (s.size() < 2 || s[0] != 'r') return std::nullopt;
        auto v = parse_integer(s.substr(1));
        if (!v || s[1] == '-' || s[1] == '+' || s.substr(1).starts_with("0x")) return std::nullopt;
        if (*v < 0 || *v >= kEncodableRegisters) fail(AsmErrorKind::ParseError, "register out of range '" + std::string(s) + "'");
        return static_cast<std::uint8_t>(*v);
    }

    std::uint8_t reg(std::string_view s) const {
        auto r = try_register(s);
        if (!r) fail(AsmErrorKind::ParseError, "expected register, got '" + std::string(s) + "'");
        return *r;
    }

    std::int32_t imm32(std::string_view s) const {
        auto v = parse_integer(s);
        if (!v) fail(AsmErrorKind::ParseError, "expected immediate, got '" + std::string(s) + "'");
        if (*v < std::numeric_limits<std::int32_t>::min() || *v > std::numeric_limits<std::uint32_t>::max())
            fail(AsmErrorKind::ParseError, "immediate out of 32-bit range '" + std::string(s) + "'");
        return static_cast<std::int32_t>(static_cast<std::uint32_t>(static_cast<std::int64_t>(*v)));
    }

    std::uint64_t imm64(std::string_view s) const {
        auto v = parse_integer(s);
        if (!v) fail(AsmErrorKind::ParseError, "expected immediate, got '" + std::string(s) + "'");
        if (*v < std::numeric_limits<std::int64_t>::min() || *v > std::numeric_limits<std::uint64_t>::max())
            fail(AsmErrorKind::ParseError, "immediate out of 64-bit range '" + std::string(s) + "'");
        return static_cast<std::uint64_t>(*v);
    }

    std::int16_t off16(std::string_view s) const {
        auto v = parse_integer(s);
        if (!v) fail(AsmErrorKind::ParseError, "expected offset, got '" + std::string(s) + "'");
        if (*v < std::numeric_limits<std::int16_t>::min() || *v > std::numeric_limits<std::int16_t>::max())
            fail(AsmErrorKind::ParseError, "offset out of 16-bit range '" + std::string(s) + "'");
        return static_cast<std::int16_t>(*v);
    }

    std::pair<std::uint8_t, std::int16_t> memory(std::string_view s) const {
        if (s.size() < 4 || s.front() != '[' || s.back() != ']')
            fail(AsmErrorKind::ParseError, "expected memory operand [rN+off], got '" + std::string(s) + "'");
        auto inner = trim(s.substr(1, s.size() - 2));
        auto sign = inner.find_first_of("+-");
        if (sign == std::string_view::npos) return {reg(inner), 0};
        return {reg(trim(inner.substr(0, sign))), off16(inner.substr(sign))};
    }

    void target(std::string_view s, Instruction& ins) {
        auto t = s;
        if (t.starts_with("+") && t.size() > 1 && is_label_start(t[1])) t.remove_prefix(1);
        if (is_label(t)) {
            fixups.push_back({slots.size(), lineno_, std::string(t)});
            ins.offset = 0;
        } else {
            ins.offset = off16(s);
        }
    }

    void emit(const Instruction& ins) { slots.push_back(ins); }

    void instruction(std::string_view m, const std::vector<std::string_view>& ops) {
        if (m == ".raw") {
            expect_operands(ops, 1, m);
            Bytes raw;
            try {
                raw = from_hex(ops[0]);
            } catch (const Error&) {
                fail(AsmErrorKind::ParseError, "malformed .raw operand");
            }
            if (raw.size() != kSlotSize) fail(AsmErrorKind::ParseError, ".raw needs exactly 8 bytes");
            emit(decode_instruction(std::span<const std::uint8_t, kSlotSize>(raw.data(), kSlotSize)));
            return;
        }
        if (m == "exit") {
            expect_operands(ops, 0, m);
            emit({op::kExitOp, 0, 0, 0, 0});
            return;
        }
        if (m == "call") {
            expect_operands(ops, 1, m);
            emit({op::kCallOp, 0, 0, 0, imm32(ops[0])});
            return;
        }
        if (m == "ja") {
            expect_operands(ops, 1, m);
            Instruction ins{op::kJaOp, 0, 0, 0, 0};
            target(ops[0], ins);
            emit(ins);
            return;
        }
        if (m == "lddw") {
            expect_operands(ops, 2, m);
            auto v = imm64(ops[1]);
            emit({op::kLddw, reg(ops[0]), 0, 0, static_cast<std::int32_t>(static_cast<std::uint32_t>(v))});
            emit({0, 0, 0, 0, static_cast<std::int32_t>(static_cast<std::uint32_t>(v >> 32))});
            return;
        }
        for (auto [prefix, cls] : {std::pair{std::string_view("le"), std::uint8_t{op::kSrcImm}},
                                   std::pair{std::string_view("be"), std::uint8_t{op::kSrcReg}}}) {
            if (m.size() == 4 && m.starts_with(prefix) && (m.ends_with("16") || m.ends_with("32") || m.ends_with("64"))) {
                expect_operands(ops, 1, m);
                auto bits = m.substr(2);
                emit({static_cast<std::uint8_t>(op::kClassAlu32 | op::kEnd | cls), reg(ops[0]), 0, 0,
                      bits == "16" ? 16 : bits == "32" ? 32 : 64});
                return;
            }
        }
        // memory forms, longest prefix first so "stx" wins over "st"
        for (auto [prefix, cls] : {std::pair{std::string_view("ldx"), op::kClassLdx},
                                   std::pair{std::string_view("stx"), op::kClassStx},
                                   std::pair{std::string_view("st"), op::kClassSt}}) {
            if (!m.starts_with(prefix)) continue;
            auto suffix = m.substr(prefix.size());
            for (auto [sname, size] : kSizes) {
                if (suffix != sname) continue;
                expect_operands(ops, 2, m);
                auto opcode = static_cast<std::uint8_t>(cls | size | op::kModeMem);
                if (cls == op::kClassLdx) {
                    auto [base, off] = memory(ops[1]);
                    emit({opcode, reg(ops[0]), base, off, 0});
                } else if (cls == op::kClassStx) {
                    auto [base, off] = memory(ops[0]);
                    emit({opcode, base, reg(ops[1]), off, 0});
                } else {
                    auto [base, off] = memory(ops[0]);
                    emit({opcode, base, 0, off, imm32(ops[1])});
                }
                return;
            }
        }
        for (auto [name, code] : kJumpOps) {
            if (!m.starts_with(name)) continue;
            auto suffix = m.substr(name.size());
            if (!suffix.empty() && suffix != "32") continue;
            expect_operands(ops, 3, m);
            Instruction ins{};
            ins.dst = reg(ops[0]);
            std::uint8_t cls = suffix.empty() ? op::kClassJmp : op::kClassJmp32;
            if (auto r = try_register(ops[1])) {
                ins.opcode = static_cast<std::uint8_t>(cls | code | op::kSrcReg);
                ins.src = *r;
            } else {
                ins.opcode = static_cast<std::uint8_t>(cls | code | op::kSrcImm);
                ins.imm = imm32(ops[1]);
            }
            target(ops[2], ins);
            emit(ins);
            return;
        }
        for (auto [name, code] : kAluOps) {
            if (!m.starts_with(name)) continue;
            auto suffix = m.substr(name.size());
            if (suffix != "64" && suffix != "32") continue;
            std::uint8_t cls = suffix == "64" ? op::kClassAlu64 : op::kClassAlu32;
            if (code == op::kNeg) {
                expect_operands(ops, 1, m);
                emit({static_cast<std::uint8_t>(cls | code), reg(ops[0]), 0, 0, 0});
                return;
            }
            expect_operands(ops, 2, m);
            Instruction ins{};
            ins.dst = reg(ops[0]);
            if (auto r = try_register(ops[1])) {
                ins.opcode = static_cast<std::uint8_t>(cls | code | op::kSrcReg);
                ins.src = *r;
            } else {
                ins.opcode = static_cast<std::uint8_t>(cls | code | op::kSrcImm);
                ins.imm = imm32(ops[1]);
            }
            emit(ins);
            return;
        }
        fail(AsmErrorKind::UnknownMnemonic, "unknown mnemonic '" + std::string(m) + "'");
    }
};

inline std::string reg_name(std::uint8_t r) { return "r" + std::to_string(r); }

inline std::string signed_offset(std::int64_t v) { return (v < 0 ? "-" : "+") + std::to_string(v < 0 ? -v : v); }

inline std::string hex_u64(std::uint64_t v) {
    std::ostringstream os;
    os << "0x" << std::hex << v;
    return os.str();
}

template <class Table>
std::string_view lookup(const Table& table, std::uint8_t code) {
    for (auto [name, c] : table)
        if (c == code) return name;
    return {};
}

inline std::string_view size_suffix(std::uint8_t opcode) {
    for (auto [s, size] : kSizes)
        if (size == op::size_field(opcode)) return s;
    return {};
}

} // namespace detail

/// Renders one instruction in assembler syntax. `next` is consulted for wide loads.
/// Returns nullopt for opcodes outside the supported subset.
inline std::optional<std::string> format_instruction(const Instruction& ins, const Instruction* next = nullptr) {
    using namespace detail;
    auto c = classify(ins.opcode);
    if (!c) return std::nullopt;
    const auto dst = reg_name(ins.dst);
    const auto operand = [&] {
        return c->source == OperandSource::Register ? reg_name(ins.src) : std::to_string(ins.imm);
    };
    const auto mem = [&](std::uint8_t base) { return "[" + reg_name(base) + signed_offset(ins.offset) + "]"; };
    switch (c->tag) {
    case ClassTag::Alu32:
    case ClassTag::Alu64: {
        const std::string width = c->tag == ClassTag::Alu64 ? "64" : "32";
        if (op::code(ins.opcode) == op::kEnd)
            return std::string(c->source == OperandSource::Register ? "be" : "le") + std::to_string(ins.imm) + " " + dst;
        auto name = std::string(lookup(kAluOps, op::code(ins.opcode)));
        if (op::code(ins.opcode) == op::kNeg) return name + width + " " + dst;
        return name + width + " " + dst + ", " + operand();
    }
    case ClassTag::Ld: {
        std::uint64_t hi = next ? static_cast<std::uint32_t>(next->imm) : 0;
        auto v = static_cast<std::uint64_t>(static_cast<std::uint32_t>(ins.imm)) | hi << 32;
        return "lddw " + dst + ", " + hex_u64(v);
    }
    case ClassTag::Ldx: return "ldx" + std::string(size_suffix(ins.opcode)) + " " + dst + ", " + mem(ins.src);
    case ClassTag::St:
        return "st" + std::string(size_suffix(ins.opcode)) + " " + mem(ins.dst) + ", " + std::to_string(ins.imm);
    case ClassTag::Stx:
        return "stx" + std::string(size_suffix(ins.opcode)) + " " + mem(ins.dst) + ", " + reg_name(ins.src);
    case ClassTag::Jmp: {
        if (ins.opcode == op::kJaOp) return "ja " + signed_offset(ins.offset);
        auto name = std::string(lookup(kJumpOps, op::code(ins.opcode)));
        if (c->width == 4) name += "32";
        return name + " " + dst + ", " + operand() + ", " + signed_offset(ins.offset);
    }
    case ClassTag::Call: return "call " + hex_u64(static_cast<std::uint32_t>(ins.imm));
    case ClassTag::Exit: return std::string("exit");
    }
    return std::nullopt;
}

inline Program assemble(std::string_view text) {
    detail::Parser parser;
    std::size_t lineno = 1;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == '\n') {
            parser.line(text.substr(start, i - start), lineno++);
            start = i + 1;
        }
    }
    parser.resolve();
    return Program(std::move(parser.slots));
}

namespace detail {
inline bool reassembles_to(const std::string& text, const std::vector<Instruction>& expected) {
    try {
        return assemble(text).slots() == expected;
    } catch (const AsmError&) {
        return false;
    }
}
} // namespace detail

/// Listing that assembles back to identical bytes. Slots without a canonical
/// mnemonic form (unknown opcodes, stray bits in unused fields) render as `.raw`.
inline std::string disassemble(const Program& program) {
    std::string out;
    const auto& slots = program.slots();
    auto raw = [&](const Instruction& ins) {
        auto bytes = encode_instruction(ins);
        out += ".raw 0x" + to_hex(bytes) + "\n";
    };
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const auto& ins = slots[i];
        if (is_wide_load(ins.opcode)) {
            if (i + 1 < slots.size()) {
                auto text = format_instruction(ins, &slots[i + 1]);
                if (text && detail::reassembles_to(*text, {ins, slots[i + 1]})) {
                    out += *text + "\n";
                    ++i;
                    continue;
                }
            }
            raw(ins);
            continue;
        }
        auto text = format_instruction(ins);
        if (text && detail::reassembles_to(*text, {ins})) {
            out += *text + "\n";
            continue;
        }
        raw(ins);
    }
    return out;
}

} // namespace femto::isa
