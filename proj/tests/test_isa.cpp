#include <catch_amalgamated.hpp>

#include <random>

#include "femto/assembler.hpp"
#include "femto/fixtures.hpp"
#include "femto/isa.hpp"
#include "support.hpp"

using namespace femto;
using namespace femto::isa;

namespace {

Slot slot_of(std::initializer_list<std::uint8_t> bytes) {
    Slot s{};
    std::copy(bytes.begin(), bytes.end(), s.begin());
    return s;
}

} // namespace

TEST_CASE("decode known slots") {
    auto mov = decode_instruction(slot_of({0xb7, 0x01, 0x00, 0x00, 0x2a, 0x00, 0x00, 0x00}));
    CHECK(mov == Instruction{0xb7, 1, 0, 0, 42});
    auto exit = decode_instruction(slot_of({0x95, 0, 0, 0, 0, 0, 0, 0}));
    CHECK(exit == Instruction{0x95, 0, 0, 0, 0});
    CHECK(decode_instruction(Slot{}) == Instruction{});
}

TEST_CASE("decode splits the register byte into dst low nibble and src high nibble") {
    auto ins = decode_instruction(slot_of({0xbf, 0x3a, 0xfe, 0xff, 0xff, 0xff, 0xff, 0x7f}));
    CHECK(ins.dst == 0xa);
    CHECK(ins.src == 0x3);
    CHECK(ins.offset == -2);
    CHECK(ins.imm == 0x7fffffff);
}

TEST_CASE("encode known instructions") {
    CHECK(encode_instruction({0x95, 0, 0, 0, 0}) == slot_of({0x95, 0, 0, 0, 0, 0, 0, 0}));
    CHECK(encode_instruction({0xb7, 1, 0, 0, 42}) == slot_of({0xb7, 0x01, 0, 0, 0x2a, 0, 0, 0}));
    CHECK(encode_instruction({0x05, 0, 0, -1, 0}) == slot_of({0x05, 0, 0xff, 0xff, 0, 0, 0, 0}));
}

TEST_CASE("encode rejects register fields wider than 4 bits") {
    CHECK_THROWS_AS(encode_instruction({0xb7, 16, 0, 0, 0}), EncodeError);
    CHECK_THROWS_AS(encode_instruction({0xb7, 0, 200, 0, 0}), EncodeError);
    try {
        (void)encode_instruction({0xb7, 0, 16, 0, 0});
    } catch (const EncodeError& e) {
        CHECK(e.kind() == EncodeErrorKind::FieldOverflow);
    }
}

TEST_CASE("byte round trip over random slots") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 20000; ++i) {
        Slot s;
        for (auto& b : s) b = static_cast<std::uint8_t>(rng());
        REQUIRE(encode_instruction(decode_instruction(s)) == s);
    }
}

TEST_CASE("field round trip over random field-valid instructions") {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 20000; ++i) {
        auto ins = femto::testing::random_instruction(rng);
        REQUIRE(decode_instruction(encode_instruction(ins)) == ins);
    }
}

TEST_CASE("program byte length and framing") {
    auto p = assemble("mov64 r0, 5\nexit\n");
    CHECK(p.size() == 2);
    CHECK(p.byte_len() == 16);
    CHECK(p.to_bytes().size() % 8 == 0);
    CHECK(Program::from_bytes(p.to_bytes()) == p);
    Bytes seven(7, 0);
    CHECK_THROWS_AS(Program::from_bytes(seven), Error);
    CHECK(Program::from_bytes(Bytes{}).empty());
}

TEST_CASE("classify maps each opcode to at most one class") {
    CHECK(classify(0xb7) == OpcodeClass{ClassTag::Alu64, OperandSource::Immediate, 8});
    CHECK(classify(0xbc) == OpcodeClass{ClassTag::Alu32, OperandSource::Register, 4});
    CHECK(classify(0x18) == OpcodeClass{ClassTag::Ld, OperandSource::Immediate, 8});
    CHECK(classify(0x79) == OpcodeClass{ClassTag::Ldx, OperandSource::Register, 8});
    CHECK(classify(0x71) == OpcodeClass{ClassTag::Ldx, OperandSource::Register, 1});
    CHECK(classify(0x62) == OpcodeClass{ClassTag::St, OperandSource::Immediate, 4});
    CHECK(classify(0x6b) == OpcodeClass{ClassTag::Stx, OperandSource::Register, 2});
    CHECK(classify(0x15)->tag == ClassTag::Jmp);
    CHECK(classify(0x16)->tag == ClassTag::Jmp); // jeq32
    CHECK(classify(0x16)->width == 4);
    CHECK(classify(0x85)->tag == ClassTag::Call);
    CHECK(classify(0x95)->tag == ClassTag::Exit);
    CHECK(classify(0xd4)->tag == ClassTag::Alu32);  // le
    CHECK(classify(0xdc)->tag == ClassTag::Alu32);  // be

    CHECK_FALSE(classify(0x00));
    CHECK_FALSE(classify(0x8f)); // neg64 with register source
    CHECK_FALSE(classify(0xd7)); // byte swap has no 64-bit class form
    CHECK_FALSE(classify(0xe7));
    CHECK_FALSE(classify(0x8d)); // call via register
    CHECK_FALSE(classify(0x86)); // call in jmp32 class
    CHECK_FALSE(classify(0x96));
    CHECK_FALSE(classify(0x06)); // ja in jmp32 class
    CHECK_FALSE(classify(0x20)); // legacy ld abs
    CHECK_FALSE(classify(0xdb)); // atomic add
    CHECK_FALSE(classify(0xf5));
}

TEST_CASE("writes_dst_register covers register-writing classes only") {
    CHECK(writes_dst_register(0xb7));
    CHECK(writes_dst_register(0x18));
    CHECK(writes_dst_register(0x61));
    CHECK_FALSE(writes_dst_register(0x7b)); // stxdw: dst is the base pointer
    CHECK_FALSE(writes_dst_register(0x72));
    CHECK_FALSE(writes_dst_register(0x15));
    CHECK_FALSE(writes_dst_register(0x95));
}

TEST_CASE("assemble minimal programs") {
    auto p = assemble("mov64 r0, 5\nexit");
    REQUIRE(p.size() == 2);
    CHECK(p[0] == Instruction{0xb7, 0, 0, 0, 5});
    CHECK(p[1] == Instruction{0x95, 0, 0, 0, 0});
    CHECK(assemble("exit\n").to_bytes() == Bytes{0x95, 0, 0, 0, 0, 0, 0, 0});
}

TEST_CASE("lddw spans two slots with a zero-opcode continuation") {
    auto p = assemble("lddw r1, 0x1122334455667788\nexit");
    REQUIRE(p.size() == 3);
    CHECK(p[0].opcode == 0x18);
    CHECK(p[0].dst == 1);
    CHECK(static_cast<std::uint32_t>(p[0].imm) == 0x55667788u);
    CHECK(p[1].opcode == 0);
    CHECK(static_cast<std::uint32_t>(p[1].imm) == 0x11223344u);
    CHECK(disassemble(p) == "lddw r1, 0x1122334455667788\nexit\n");
}

TEST_CASE("label jumps resolve to slot distance minus one") {
    auto p = assemble(R"(
        ja L1
        mov64 r0, 1
        lddw r2, 7
    L1: exit
    )");
    REQUIRE(p.size() == 5);
    CHECK(p[0].offset == 3);
    auto back = assemble("top:\n mov64 r0, 0\n jne r0, 0, top\n ja +top\n exit");
    CHECK(back[1].offset == -2);
    CHECK(back[2].offset == -3);
    auto numeric = assemble("ja +1\nja -2\nexit");
    CHECK(numeric[0].offset == 1);
    CHECK(numeric[1].offset == -2);
}

TEST_CASE("assembler errors carry kind and line number") {
    auto expect = [](const std::string& text, AsmErrorKind kind, std::size_t line) {
        try {
            (void)assemble(text);
            FAIL("expected an assembler error for: " << text);
        } catch (const AsmError& e) {
            CHECK(e.kind() == kind);
            CHECK(e.line() == line);
            CHECK(std::string(e.what()).rfind("line " + std::to_string(line) + ":", 0) == 0);
        }
    };
    expect("exit\nfrobnicate r1\n", AsmErrorKind::UnknownMnemonic, 2);
    expect("mov64 r0, 1\n\nja nowhere\n", AsmErrorKind::UndefinedLabel, 3);
    expect("mov64 r11x, 1\n", AsmErrorKind::ParseError, 1);
    expect("mov64 r0\n", AsmErrorKind::ParseError, 1);
    expect("ldxdw r0, r1\n", AsmErrorKind::ParseError, 1);
    expect("a:\na:\nexit\n", AsmErrorKind::ParseError, 2);
    expect("mov64 r0, 0x1ffffffff\n", AsmErrorKind::ParseError, 1);
}

TEST_CASE("comments, blank lines and case") {
    auto p = assemble("; header\n\n   mov64 r0, -1 ; trailing\n  exit  \n");
    REQUIRE(p.size() == 2);
    CHECK(p[0].imm == -1);
}

TEST_CASE("disassemble canonical listings") {
    CHECK(disassemble(assemble("exit")) == "exit\n");
    auto text = "mov64 r0, -7\nstxdw [r10-8], r0\nldxw r1, [r10-8]\nle16 r1\nbe64 r1\njslt32 r1, 3, +1\ncall 0x10\nexit\n";
    CHECK(disassemble(assemble(text)) == text);
}

TEST_CASE("unknown opcodes disassemble as raw hex lines that reassemble") {
    Program p({Instruction{0xe7, 1, 2, 3, 4}, Instruction{0x95, 0, 0, 0, 0}});
    auto text = disassemble(p);
    CHECK(text.rfind(".raw 0x", 0) == 0);
    CHECK(assemble(text) == p);
}

TEST_CASE("fletcher32 fixture has four branches and a single exit") {
    auto p = assemble(fixtures::fletcher32_asm());
    int branches = 0, exits = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (is_jump(p[i].opcode)) ++branches;
        if (p[i].opcode == op::kExitOp) ++exits;
    }
    CHECK(branches == 4);
    CHECK(exits == 1);
    auto listing = disassemble(p);
    CHECK(assemble(listing) == p);
}

TEST_CASE("assemble after disassemble is byte identity on random slots") {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 10000; ++i) {
        std::vector<Instruction> slots;
        const auto n = 1 + rng() % 12;
        for (std::size_t k = 0; k < n; ++k) slots.push_back(femto::testing::random_instruction(rng));
        Program p(std::move(slots));
        auto text = disassemble(p);
        REQUIRE(assemble(text).to_bytes() == p.to_bytes());
    }
}

TEST_CASE("assemble after disassemble is byte identity on generated valid programs") {
    std::mt19937_64 rng(14);
    for (int i = 0; i < 10000; ++i) {
        auto p = femto::testing::random_valid_program(rng, 40, {1, 2, 0x10});
        REQUIRE(assemble(disassemble(p)).to_bytes() == p.to_bytes());
    }
}

TEST_CASE("every bundled fixture assembles and round-trips") {
    for (const auto& name : fixtures::names()) {
        INFO(name);
        auto p = assemble(*fixtures::source(name));
        CHECK(assemble(disassemble(p)) == p);
    }
    CHECK(assemble(fixtures::filler_asm(250)).size() == 250);
    CHECK(assemble(fixtures::filler_asm(250)).byte_len() == 2000);
    CHECK_FALSE(fixtures::source("nope"));
}
