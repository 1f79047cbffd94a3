#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string_view>

#include "mscs/types.hpp"

namespace mscs {

using Secret = std::array<std::uint8_t, 16>;
using AuthTag = std::array<std::uint8_t, 16>;

/// Attested sensing/mapping capabilities carried alongside a credential.
/// No detector consumes this by default; it is an extension point.
struct Capabilities {
    bool has_camera = true;
    bool has_map = true;

    friend bool operator==(const Capabilities&, const Capabilities&) = default;
};

struct PseudonymCredential {
    StationId station_id;
    Secret secret{};
    LongTermId owner;
    Millis valid_from = 0;
    Millis valid_to = 0;
    bool is_special = false;
    std::optional<Capabilities> capabilities;

    bool valid_at(Millis now) const { return valid_from <= now && now <= valid_to; }
};

struct SignatureEnvelope {
    StationId signer_id;
    AuthTag tag{};

    friend bool operator==(const SignatureEnvelope&, const SignatureEnvelope&) = default;
};

class ExpiredCredential : public std::runtime_error {
public:
    explicit ExpiredCredential(StationId id);
};

/// Public side of the credential store. With the symmetric stand-in the
/// verifier needs the key, so the directory holds full credentials; only the
/// harness ever constructs one.
class CredentialDirectory {
public:
    void add(PseudonymCredential cred);
    const PseudonymCredential* find(StationId id) const;
    bool is_special(StationId id) const;
    std::size_t size() const { return by_id_.size(); }

    auto begin() const { return by_id_.begin(); }
    auto end() const { return by_id_.end(); }

private:
    std::map<StationId, PseudonymCredential> by_id_;
};

class RevocationList {
public:
    bool contains(StationId id) const { return revoked_.contains(id); }
    std::size_t size() const { return revoked_.size(); }
    const std::set<StationId>& entries() const { return revoked_; }

    friend RevocationList revoke(RevocationList crl, StationId id);
    friend bool operator==(const RevocationList&, const RevocationList&) = default;

private:
    std::set<StationId> revoked_;
};

/// Returns a list containing every entry of `crl` plus `id`. Idempotent.
RevocationList revoke(RevocationList crl, StationId id);

enum class RejectReason { UnknownSigner, BadTag, Expired, Revoked };

struct VerifyResult {
    bool accepted = false;
    RejectReason reason = RejectReason::UnknownSigner;

    static VerifyResult accept() { return {true, RejectReason::UnknownSigner}; }
    static VerifyResult reject(RejectReason r) { return {false, r}; }
    explicit operator bool() const { return accepted; }
};

std::string_view to_string(RejectReason r);

/// Keyed digest of `payload` under the credential's secret.
/// Throws ExpiredCredential outside [valid_from, valid_to].
SignatureEnvelope sign(ByteView payload, const PseudonymCredential& cred, Millis now);

VerifyResult verify(const SignatureEnvelope& env, ByteView payload, const CredentialDirectory& store,
                    const RevocationList& crl, Millis now);

/// Deterministic credential for simulation scenarios: the station id and
/// secret are derived from (owner, index) so declaration order never matters.
PseudonymCredential derive_credential(LongTermId owner, std::uint32_t index, Millis valid_to,
                                      bool is_special = false);

}  // namespace mscs
