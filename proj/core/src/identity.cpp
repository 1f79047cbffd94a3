#include "mscs/identity.hpp"

#include <sodium.h>

#include <fmt/format.h>

#include <algorithm>
#include <cstring>

namespace mscs {

namespace {

void ensure_sodium() {
    static const bool ready = [] {
        if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
        return true;
    }();
    (void)ready;
}

AuthTag keyed_digest(ByteView payload, const Secret& secret) {
    ensure_sodium();
    AuthTag tag{};
    crypto_generichash(tag.data(), tag.size(), payload.data(), payload.size(), secret.data(), secret.size());
    return tag;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

std::string to_hex(ByteView data) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.resize(data.size() * 2);
    for (std::size_t i = 0; i < data.size(); ++i) {
        out[2 * i] = digits[data[i] >> 4];
        out[2 * i + 1] = digits[data[i] & 0xF];
    }
    return out;
}

bool from_hex(std::string_view text, Bytes& out) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    if (text.size() % 2 != 0) return false;
    out.clear();
    out.reserve(text.size() / 2);
    for (std::size_t i = 0; i < text.size(); i += 2) {
        int hi = nibble(text[i]);
        int lo = nibble(text[i + 1]);
        if (hi < 0 || lo < 0) return false;
        out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
    }
    return true;
}

std::string MessageDigest::hex() const { return to_hex(bytes); }

MessageDigest MessageDigest::of(ByteView data) {
    ensure_sodium();
    MessageDigest d;
    crypto_hash_sha256(d.bytes.data(), data.data(), data.size());
    return d;
}

ExpiredCredential::ExpiredCredential(StationId id)
    : std::runtime_error(fmt::format("credential {} is outside its validity window", id.value)) {}

void CredentialDirectory::add(PseudonymCredential cred) { by_id_[cred.station_id] = std::move(cred); }

const PseudonymCredential* CredentialDirectory::find(StationId id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &it->second;
}

bool CredentialDirectory::is_special(StationId id) const {
    const auto* cred = find(id);
    return cred != nullptr && cred->is_special;
}

RevocationList revoke(RevocationList crl, StationId id) {
    crl.revoked_.insert(id);
    return crl;
}

std::string_view to_string(RejectReason r) {
    switch (r) {
        case RejectReason::UnknownSigner: return "UnknownSigner";
        case RejectReason::BadTag: return "BadTag";
        case RejectReason::Expired: return "Expired";
        case RejectReason::Revoked: return "Revoked";
    }
    return "?";
}

SignatureEnvelope sign(ByteView payload, const PseudonymCredential& cred, Millis now) {
    if (!cred.valid_at(now)) throw ExpiredCredential(cred.station_id);
    return SignatureEnvelope{cred.station_id, keyed_digest(payload, cred.secret)};
}

VerifyResult verify(const SignatureEnvelope& env, ByteView payload, const CredentialDirectory& store,
                    const RevocationList& crl, Millis now) {
    const auto* cred = store.find(env.signer_id);
    if (cred == nullptr) return VerifyResult::reject(RejectReason::UnknownSigner);
    const AuthTag expected = keyed_digest(payload, cred->secret);
    if (sodium_memcmp(expected.data(), env.tag.data(), expected.size()) != 0) {
        return VerifyResult::reject(RejectReason::BadTag);
    }
    if (!cred->valid_at(now)) return VerifyResult::reject(RejectReason::Expired);
    if (crl.contains(env.signer_id)) return VerifyResult::reject(RejectReason::Revoked);
    return VerifyResult::accept();
}

PseudonymCredential derive_credential(LongTermId owner, std::uint32_t index, Millis valid_to, bool is_special) {
    const std::uint64_t base = (static_cast<std::uint64_t>(owner.value) << 16) | index;
    std::uint64_t h = splitmix64(base);
    std::uint32_t id = static_cast<std::uint32_t>(h >> 32);
    if (id == 0) id = 1;

    PseudonymCredential cred;
    cred.station_id = StationId{id};
    cred.owner = owner;
    cred.valid_from = 0;
    cred.valid_to = valid_to;
    cred.is_special = is_special;
    std::uint64_t a = splitmix64(h ^ 0x5EC2E7ull);
    std::uint64_t b = splitmix64(a);
    std::memcpy(cred.secret.data(), &a, 8);
    std::memcpy(cred.secret.data() + 8, &b, 8);
    return cred;
}

}  // namespace mscs
