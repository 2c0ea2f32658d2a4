#pragma once

// Thin libsodium wrappers: SHA-256, Ed25519 and base64.

#include <sodium.h>

#include <array>
#include <string>
#include <string_view>

#include "femto/common.hpp"

namespace femto::crypto {

using Digest = std::array<std::uint8_t, crypto_hash_sha256_BYTES>;
using PublicKey = std::array<std::uint8_t, crypto_sign_PUBLICKEYBYTES>;
using SecretKey = std::array<std::uint8_t, crypto_sign_SECRETKEYBYTES>;
using Seed = std::array<std::uint8_t, crypto_sign_SEEDBYTES>;
using Signature = std::array<std::uint8_t, crypto_sign_BYTES>;

struct KeyPair {
    PublicKey public_key{};
    SecretKey secret_key{};
};

inline void ensure_initialized() {
    static const int status = sodium_init();
    if (status < 0) throw Error("libsodium initialization failed");
}

inline Digest sha256(ByteView data) {
    ensure_initialized();
    Digest out{};
    crypto_hash_sha256(out.data(), data.data(), data.size());
    return out;
}

inline KeyPair generate_keypair() {
    ensure_initialized();
    KeyPair kp;
    crypto_sign_keypair(kp.public_key.data(), kp.secret_key.data());
    return kp;
}

inline KeyPair keypair_from_seed(const Seed& seed) {
    ensure_initialized();
    KeyPair kp;
    crypto_sign_seed_keypair(kp.public_key.data(), kp.secret_key.data(), seed.data());
    return kp;
}

inline Signature sign(ByteView message, const SecretKey& key) {
    ensure_initialized();
    Signature sig{};
    crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), key.data());
    return sig;
}

inline bool verify_signature(ByteView message, const Signature& sig, const PublicKey& key) {
    ensure_initialized();
    return crypto_sign_verify_detached(sig.data(), message.data(), message.size(), key.data()) == 0;
}

inline std::string base64_encode(ByteView data) {
    ensure_initialized();
    std::string out(sodium_base64_ENCODED_LEN(data.size(), sodium_base64_VARIANT_ORIGINAL), '\0');
    sodium_bin2base64(out.data(), out.size(), data.data(), data.size(), sodium_base64_VARIANT_ORIGINAL);
    out.resize(out.find('\0'));
    return out;
}

inline Bytes base64_decode(std::string_view text) {
    ensure_initialized();
    Bytes out(text.size());
    std::size_t len = 0;
    if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, nullptr,
                          sodium_base64_VARIANT_ORIGINAL) != 0)
        throw Error("invalid base64");
    out.resize(len);
    return out;
}

template <std::size_t N>
std::array<std::uint8_t, N> fixed_bytes(ByteView data, std::string_view what) {
    if (data.size() != N)
        throw Error(std::string(what) + " must be " + std::to_string(N) + " bytes, got " + std::to_string(data.size()));
    std::array<std::uint8_t, N> out{};
    std::copy(data.begin(), data.end(), out.begin());
    return out;
}

} // namespace femto::crypto
