#pragma once

// Signed update manifests binding a bytecode payload to a hook UUID.
//
// Canonical signing input (all integers big-endian):
//
//   offset  size  field
//        0     4  manifest_version (= 1)
//        4     8  sequence_number
//       12    16  storage_location (hook UUID)
//       28    32  payload_digest (SHA-256)
//       60     8  payload_size
//       68    16  tenant_id
//       84     4  syscall count n, then n x 4-byte ids in ascending order
//        .     4  region count m, then per region (sorted): 2-byte label length, label, 1-byte mode (bit0 r, bit1 w)
//
// The JSON envelope is transport only; signatures cover the canonical bytes.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "femto/common.hpp"
#include "femto/crypto.hpp"
#include "femto/engine.hpp"

namespace femto::update {

inline constexpr std::uint32_t kManifestVersion = 1;

struct Manifest {
    std::uint32_t manifest_version = kManifestVersion;
    std::uint64_t sequence_number = 0;
    HookId storage_location;
    crypto::Digest payload_digest{};
    std::uint64_t payload_size = 0;
    TenantId tenant_id;
    Contract contract;

    bool operator==(const Manifest&) const = default;
};

struct SignedManifest {
    Manifest manifest;
    crypto::Signature signature{};
};

enum class RejectReason {
    BadSignature,
    DigestMismatch,
    RollbackRejected,
    UnknownHook,
    UnknownTenant,
    UnsupportedVersion,
    MalformedPayload,
    SlotLimitReached,
};

constexpr std::string_view to_string(RejectReason r) {
    switch (r) {
    case RejectReason::BadSignature: return "BadSignature";
    case RejectReason::DigestMismatch: return "DigestMismatch";
    case RejectReason::RollbackRejected: return "RollbackRejected";
    case RejectReason::UnknownHook: return "UnknownHook";
    case RejectReason::UnknownTenant: return "UnknownTenant";
    case RejectReason::UnsupportedVersion: return "UnsupportedVersion";
    case RejectReason::MalformedPayload: return "MalformedPayload";
    case RejectReason::SlotLimitReached: return "SlotLimitReached";
    }
    return "?";
}

struct UpdateOutcome {
    bool accepted = false;
    std::optional<ContainerId> container_id;
    std::optional<RejectReason> reason;
    std::string detail;
};

namespace detail {
inline void put_be(Bytes& out, std::uint64_t v, int width) {
    for (int i = width - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
template <class Container>
void put_raw(Bytes& out, const Container& bytes) {
    out.insert(out.end(), bytes.begin(), bytes.end());
}
} // namespace detail

inline Bytes canonical_bytes(const Manifest& m) {
    Bytes out;
    detail::put_be(out, m.manifest_version, 4);
    detail::put_be(out, m.sequence_number, 8);
    detail::put_raw(out, m.storage_location.bytes());
    detail::put_raw(out, m.payload_digest);
    detail::put_be(out, m.payload_size, 8);
    detail::put_raw(out, m.tenant_id.bytes());
    detail::put_be(out, m.contract.syscalls.size(), 4);
    for (auto id : m.contract.syscalls) detail::put_be(out, id, 4);
    detail::put_be(out, m.contract.regions.size(), 4);
    for (const auto& r : m.contract.regions) {
        if (r.label.size() > 0xffff) throw Error("region label too long");
        detail::put_be(out, r.label.size(), 2);
        detail::put_raw(out, r.label);
        out.push_back(static_cast<std::uint8_t>((r.read ? 1 : 0) | (r.write ? 2 : 0)));
    }
    return out;
}

inline Manifest make_manifest(const TenantId& tenant, const HookId& hook, std::uint64_t sequence, ByteView payload,
                              Contract contract) {
    Manifest m;
    m.sequence_number = sequence;
    m.storage_location = hook;
    m.payload_digest = crypto::sha256(payload);
    m.payload_size = payload.size();
    m.tenant_id = tenant;
    m.contract = std::move(contract);
    return m;
}

inline SignedManifest sign_manifest(const Manifest& m, const crypto::SecretKey& key) {
    return {m, crypto::sign(canonical_bytes(m), key)};
}

/// Checks run in order: version, tenant, signature, digest, payload shape, then
/// hook, rollback and slot availability inside one engine transaction. A
/// rejection leaves the engine untouched.
inline UpdateOutcome apply_update(Engine& engine, const SignedManifest& sm, ByteView payload) {
    const auto& m = sm.manifest;
    auto reject = [](RejectReason r, std::string detail) { return UpdateOutcome{false, std::nullopt, r, std::move(detail)}; };
    if (m.manifest_version != kManifestVersion)
        return reject(RejectReason::UnsupportedVersion, "manifest version " + std::to_string(m.manifest_version));
    auto tenant = engine.tenant(m.tenant_id);
    if (!tenant) return reject(RejectReason::UnknownTenant, "tenant " + m.tenant_id.str() + " is not registered");
    if (!crypto::verify_signature(canonical_bytes(m), sm.signature, tenant->public_key))
        return reject(RejectReason::BadSignature, "signature does not verify under the tenant key");
    if (payload.size() != m.payload_size || crypto::sha256(payload) != m.payload_digest)
        return reject(RejectReason::DigestMismatch, "payload does not match the signed digest");
    if (payload.size() % isa::kSlotSize != 0)
        return reject(RejectReason::MalformedPayload, "payload is not a whole number of instruction slots");
    try {
        auto id = engine.commit_update(
            {m.tenant_id, m.storage_location, m.sequence_number, isa::Program::from_bytes(payload), m.contract});
        return {true, id, std::nullopt, {}};
    } catch (const EngineError& e) {
        switch (e.kind()) {
        case EngineErrorKind::UnknownHook: return reject(RejectReason::UnknownHook, e.what());
        case EngineErrorKind::UnknownTenant: return reject(RejectReason::UnknownTenant, e.what());
        case EngineErrorKind::StaleSequence: return reject(RejectReason::RollbackRejected, e.what());
        case EngineErrorKind::SlotLimitReached: return reject(RejectReason::SlotLimitReached, e.what());
        default: throw;
        }
    }
}

// JSON envelope: {"manifest": {...}, "signature": base64}

inline nlohmann::json to_json(const Manifest& m) {
    return {{"manifest_version", m.manifest_version},
            {"sequence_number", m.sequence_number},
            {"storage_location", m.storage_location.str()},
            {"payload_digest", to_hex(m.payload_digest)},
            {"payload_size", m.payload_size},
            {"tenant_id", m.tenant_id.str()},
            {"contract", Engine::contract_json(m.contract)}};
}

inline nlohmann::json to_json(const SignedManifest& sm) {
    return {{"manifest", to_json(sm.manifest)}, {"signature", crypto::base64_encode(sm.signature)}};
}

inline Contract contract_from_json(const nlohmann::json& j) {
    Contract c;
    if (j.contains("syscalls"))
        for (const auto& id : j.at("syscalls")) c.syscalls.insert(id.get<std::uint32_t>());
    if (j.contains("regions"))
        for (const auto& r : j.at("regions"))
            c.regions.insert(region_grant_from(r.at("label").get<std::string>(), r.value("mode", std::string("r"))));
    return c;
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
    Manifest m;
    m.manifest_version = j.at("manifest_version").get<std::uint32_t>();
    m.sequence_number = j.at("sequence_number").get<std::uint64_t>();
    m.storage_location = Uuid::parse(j.at("storage_location").get<std::string>());
    m.payload_digest = crypto::fixed_bytes<32>(from_hex(j.at("payload_digest").get<std::string>()), "payload_digest");
    m.payload_size = j.at("payload_size").get<std::uint64_t>();
    m.tenant_id = Uuid::parse(j.at("tenant_id").get<std::string>());
    m.contract = contract_from_json(j.value("contract", nlohmann::json::object()));
    return m;
}

inline SignedManifest signed_manifest_from_json(const nlohmann::json& j) {
    SignedManifest sm;
    sm.manifest = manifest_from_json(j.at("manifest"));
    sm.signature = crypto::fixed_bytes<64>(crypto::base64_decode(j.at("signature").get<std::string>()), "signature");
    return sm;
}

} // namespace femto::update
