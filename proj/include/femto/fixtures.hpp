#pragma once

// Bundled container programs in assembler form.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "femto/common.hpp"

namespace femto::fixtures {

/// Fletcher-32 over the little-endian 16-bit words of the context region
/// (r1 = data, r2 = byte length). Blocks of 359 words keep the sums exact
/// before folding.
inline std::string fletcher32_asm() {
    return R"(; fletcher32: r1 = data, r2 = length in bytes
    rsh64 r2, 1            ; word count
    mov64 r3, 0xffff       ; sum1
    mov64 r4, 0xffff       ; sum2
outer:
    jeq r2, 0, done
    mov64 r5, r2           ; words in this block
    jle r5, 359, block
    mov64 r5, 359
block:
    sub64 r2, r5
inner:
    ldxh r6, [r1+0]
    add64 r3, r6
    add64 r4, r3
    add64 r1, 2
    sub64 r5, 1
    jne r5, 0, inner
    mov64 r6, r3
    and64 r6, 0xffff
    rsh64 r3, 16
    add64 r3, r6
    mov64 r6, r4
    and64 r6, 0xffff
    rsh64 r4, 16
    add64 r4, r6
    ja outer
done:
    mov64 r6, r3
    and64 r6, 0xffff
    rsh64 r3, 16
    add64 r3, r6
    mov64 r6, r4
    and64 r6, 0xffff
    rsh64 r4, 16
    add64 r4, r6
    lsh64 r4, 16
    or64 r4, r3
    mov64 r0, r4
    exit
)";
}

/// Scheduler hook program. Context: {u64 prev_tid, u64 next_tid}. Counts
/// activations per thread id in the container store.
inline std::string thread_counter_asm() {
    return R"(; thread counter: ctx = {u64 prev, u64 next}
    ldxdw r6, [r1+8]       ; next thread id
    mov64 r1, r6
    call 0x02              ; container_get
    add64 r0, 1
    mov64 r2, r0
    mov64 r1, r6
    call 0x01              ; container_put
    mov64 r0, 0
    exit
)";
}

struct SensorReaderParams {
    std::uint32_t sensor = 1;
    std::uint32_t window = 2;
    std::uint32_t out_key = 1; // tenant-store key receiving the average
};

/// Container-store key holding the sample count; keys 0..window-1 hold the ring.
inline constexpr std::uint32_t kSensorCountKey = 1000;

/// Timer hook program: reads one sample, keeps the last `window` samples in
/// a ring in its container store and publishes their integer mean to the
/// tenant store. Samples are treated as unsigned.
inline std::string sensor_reader_asm(const SensorReaderParams& p = {}) {
    if (p.window == 0 || p.window >= kSensorCountKey) throw Error("sensor window must be in [1, 999]");
    const auto s = std::to_string(p.sensor);
    const auto w = std::to_string(p.window);
    const auto k = std::to_string(p.out_key);
    const auto n = std::to_string(kSensorCountKey);
    return "; sensor reader: moving average over " + w + " samples of sensor " + s + "\n" +
           "    mov64 r1, " + s + "\n"
           "    call 0x11              ; sensor_read\n"
           "    mov64 r6, r0           ; sample\n"
           "    mov64 r1, " + n + "\n"
           "    call 0x02\n"
           "    mov64 r7, r0           ; samples seen so far\n"
           "    mov64 r1, r7\n"
           "    mod64 r1, " + w + "\n"
           "    mov64 r2, r6\n"
           "    call 0x01              ; ring[n % window] = sample\n"
           "    add64 r7, 1\n"
           "    mov64 r1, " + n + "\n"
           "    mov64 r2, r7\n"
           "    call 0x01\n"
           "    mov64 r8, r7           ; filled = min(n + 1, window)\n"
           "    jle r8, " + w + ", sum\n"
           "    mov64 r8, " + w + "\n"
           "sum:\n"
           "    mov64 r9, 0\n"
           "    mov64 r6, 0\n"
           "loop:\n"
           "    mov64 r1, r6\n"
           "    call 0x02\n"
           "    add64 r9, r0\n"
           "    add64 r6, 1\n"
           "    jlt r6, r8, loop\n"
           "    div64 r9, r8\n"
           "    mov64 r1, " + k + "\n"
           "    mov64 r2, r9\n"
           "    call 0x05              ; tenant_put\n"
           "    mov64 r0, r9\n"
           "    exit\n";
}

/// Request hook program: copies a tenant-store value into the response region
/// and returns it.
inline std::string request_handler_asm(std::uint32_t key = 1) {
    const auto k = std::to_string(key);
    return "; request handler: respond with tenant value " + k + "\n" +
           "    mov64 r1, " + k + "\n"
           "    call 0x06              ; tenant_get\n"
           "    mov64 r6, r0\n"
           "    mov64 r1, 0\n"
           "    mov64 r2, r6\n"
           "    call 0x20              ; response_write(0, value)\n"
           "    mov64 r0, r6\n"
           "    exit\n";
}

/// Writes one doubleword just past the stack top.
inline std::string hostile_writer_asm() {
    return R"(; hostile: out-of-bounds stack write
    mov64 r0, 1
    stdw [r10+0], 7
    exit
)";
}

/// Straight-line program of exactly `slots` slots (>= 2) mixing ALU work,
/// stack traffic and forward branches.
inline std::string filler_asm(std::size_t slots, std::uint32_t salt = 0) {
    if (slots < 2) throw Error("filler program needs at least 2 slots");
    std::string out = "; filler\n";
    std::size_t emitted = 0;
    auto line = [&](const std::string& s) {
        out += "    " + s + "\n";
        ++emitted;
    };
    line("mov64 r0, " + std::to_string(salt % 1000));
    while (emitted + 1 < slots) {
        switch (emitted % 6) {
        case 0: line("add64 r0, " + std::to_string(emitted + salt)); break;
        case 1: line("stxdw [r10-8], r0"); break;
        case 2: line("ldxdw r3, [r10-8]"); break;
        case 3: line("xor64 r0, r3"); break;
        case 4: line("mul64 r0, 3"); break;
        default: line("jgt r0, 0, +0"); break;
        }
    }
    line("exit");
    return out;
}

/// Canonical 360-byte Fletcher-32 workload: ASCII text repeated to length.
inline Bytes fletcher32_input() {
    static const std::string text = "The quick brown fox jumps over the lazy dog. ";
    Bytes out;
    out.reserve(360);
    while (out.size() < 360) out.push_back(static_cast<std::uint8_t>(text[out.size() % text.size()]));
    return out;
}

inline std::vector<std::string> names() {
    return {"fletcher32", "thread_counter", "sensor_reader", "request_handler", "hostile_writer", "filler"};
}

/// Assembler source of a named fixture; `params` fills fixture parameters.
inline std::optional<std::string> source(std::string_view name, const nlohmann::json& params = nlohmann::json::object()) {
    if (name == "fletcher32") return fletcher32_asm();
    if (name == "thread_counter") return thread_counter_asm();
    if (name == "sensor_reader")
        return sensor_reader_asm({params.value("sensor", 1u), params.value("window", 2u), params.value("key", 1u)});
    if (name == "request_handler") return request_handler_asm(params.value("key", 1u));
    if (name == "hostile_writer") return hostile_writer_asm();
    if (name == "filler") return filler_asm(params.value("slots", std::size_t{250}), params.value("salt", 0u));
    return std::nullopt;
}

} // namespace femto::fixtures
