#ifndef KFLOW_PROTOCOLS_HPP
#define KFLOW_PROTOCOLS_HPP

#include <optional>
#include <string>
#include <vector>

#include "kflow/rules.hpp"

namespace kflow {

struct AtomDecl {
    std::string name;
    AtomKind kind = AtomKind::Generic;
    bool secret = false;

    friend bool operator==(const AtomDecl&, const AtomDecl&) = default;
};

struct ValueDecl {
    std::string name;
    Template tmpl;

    friend bool operator==(const ValueDecl&, const ValueDecl&) = default;
};

struct RoleDecl {
    std::string name;
    PrincipalRange range = PrincipalRange::Honest;

    friend bool operator==(const RoleDecl&, const RoleDecl&) = default;
};

struct ProtocolSpec {
    std::string name;
    std::string description;
    std::vector<RoleDecl> roles;
    Options options;
    std::vector<RuleSchema> primitives;
    std::vector<AtomDecl> session_atoms;     // fresh per session, e.g. nonce seeds
    std::vector<AtomDecl> principal_atoms;   // per principal, e.g. shared-key seeds
    std::vector<AtomDecl> oscar_atoms;       // Oscar's private atoms
    std::vector<ValueDecl> principal_values; // per principal, e.g. server-shared keys
    std::vector<ValueDecl> session_values;   // intended-run composites seeded per session
    bool secret_identities = false;          // honest identities kept from Oscar's draws
    std::vector<RuleSchema> schemas;
    TheoremSpec theorem;

    friend bool operator==(const ProtocolSpec&, const ProtocolSpec&) = default;
};

/// Needham-Schroeder public key protocol.
ProtocolSpec ns();
/// Needham-Schroeder with Lowe's responder-identity fix.
ProtocolSpec nsl();
/// Otway-Rees mutual authentication (symmetric keys, message tuples).
ProtocolSpec otway_rees();
/// CPUF shared-secret renewal.
ProtocolSpec cpuf_renewal();

const std::vector<std::string>& builtin_protocol_names();
std::optional<ProtocolSpec> find_builtin(const std::string& name);

}  // namespace kflow

#endif
