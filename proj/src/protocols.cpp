#include "kflow/protocols.hpp"

namespace kflow {

namespace {

GuardPath path(std::string var, std::vector<GuardPath::Step> steps = {}) {
    GuardPath p;
    p.var = std::move(var);
    p.steps = std::move(steps);
    return p;
}

Guard kind_is(GuardPath p, SortCheck s) {
    Guard g;
    g.kind = Guard::Kind::KindIs;
    g.path = std::move(p);
    g.sort = s;
    return g;
}
Guard eq(GuardPath a, GuardPath b) {
    Guard g;
    g.kind = Guard::Kind::Eq;
    g.path = std::move(a);
    g.other = std::move(b);
    return g;
}
Guard ne(GuardPath a, GuardPath b) {
    Guard g;
    g.kind = Guard::Kind::Ne;
    g.path = std::move(a);
    g.other = std::move(b);
    return g;
}
Guard member(GuardPath elem, GuardPath set) {
    Guard g;
    g.kind = Guard::Kind::Member;
    g.path = std::move(elem);
    g.other = std::move(set);
    return g;
}
Guard set_eq(GuardPath a, GuardPath b) {
    Guard g;
    g.kind = Guard::Kind::SetEq;
    g.path = std::move(a);
    g.other = std::move(b);
    return g;
}
Guard card(GuardPath set, std::size_t n) {
    Guard g;
    g.kind = Guard::Kind::Card;
    g.path = std::move(set);
    g.card = n;
    return g;
}
Guard all_members(GuardPath set, SortCheck s) {
    Guard g;
    g.kind = Guard::Kind::AllMembersSort;
    g.path = std::move(set);
    g.sort = s;
    return g;
}
Guard all_known(GuardPath set) {
    Guard g;
    g.kind = Guard::Kind::AllMembersKnown;
    g.path = std::move(set);
    return g;
}
Guard all_undrawn(GuardPath set) {
    Guard g;
    g.kind = Guard::Kind::AllMembersNotDrawn;
    g.path = std::move(set);
    return g;
}
Guard owns(std::string pvar, GuardPath p) {
    Guard g;
    g.kind = Guard::Kind::OwnsVar;
    g.pvar = std::move(pvar);
    g.path = std::move(p);
    return g;
}
Guard distinct(std::string a, std::string b) {
    Guard g;
    g.kind = Guard::Kind::DistinctP;
    g.pvar = std::move(a);
    g.pvar2 = std::move(b);
    return g;
}

using K = GuardPath::Step;

// Shared secrecy theorem: Oscar must never hold both the initiator nonce and
// the responder nonce minted for the initiator's opening cipher.
TheoremSpec ns_theorem() {
    TheoremSpec t;
    t.label = "nonce_secrecy";
    t.vars = {{"NA", VarDomain::Knows, SortCheck::NonceV},
              {"NB", VarDomain::Knows, SortCheck::NonceV}};
    t.pvars = {{"PA", PrincipalRange::Honest}, {"PB", PrincipalRange::Honest}};
    t.matches = {
        {"NA", Template::nonce_t(Template::var("SA"), Template::var("IA"))},
        {"NB", Template::nonce_t(Template::var("C"), Template::var("IB"))},
        {"C", Template::enc(Template::var("IB"), {Template::var("IA"), Template::var("NA")})},
    };
    t.guards = {owns("PA", path("IA")), owns("PB", path("IB")), distinct("PA", "PB")};
    return t;
}

Template ns_initiator_nonce() {
    return Template::nonce_t(Template::sess_atom("eps"),
                             Template::id_of(PrincipalRef::role("init")));
}

}  // namespace

ProtocolSpec ns() {
    ProtocolSpec p;
    p.name = "ns";
    p.description = "Needham-Schroeder public key protocol";
    p.roles = {{"init", PrincipalRange::Honest}, {"resp", PrincipalRange::Any}};
    p.options.public_key_crypto = true;
    p.options.identities_are_keys = true;
    p.primitives = {primitive_encryptor(), primitive_decryptor(), primitive_nonce_generator()};
    p.session_atoms = {{"eps", AtomKind::Seed, false}};

    // Opening message: anyone may observe the initiator's first cipher,
    // whoever it is addressed to.
    RuleSchema r1;
    r1.label = "ns1";
    r1.pvars = {{"P2", PrincipalRange::Any}};
    r1.conclusion = Template::enc(Template::id_of(PrincipalRef::var("P2")),
                                  {Template::id_of(PrincipalRef::role("init")),
                                   ns_initiator_nonce()});
    p.schemas.push_back(r1);

    // Response: a responder R that receives a cipher naming S replies with
    // the payload and a nonce seeded by the incoming cipher.
    RuleSchema r2;
    r2.label = "ns2";
    r2.pvars = {{"R", PrincipalRange::Honest}, {"S", PrincipalRange::Any}};
    r2.vvars = {"V"};
    Template incoming = Template::enc(Template::id_of(PrincipalRef::var("R")),
                                      {Template::id_of(PrincipalRef::var("S")), Template::var("V")});
    r2.premises = {incoming};
    r2.conclusion = Template::enc(
        Template::id_of(PrincipalRef::var("S")),
        {Template::var("V"),
         Template::nonce_t(incoming, Template::id_of(PrincipalRef::var("R")))});
    p.schemas.push_back(r2);

    // Final message: the initiator returns the payload she found next to her
    // own nonce.
    RuleSchema r3;
    r3.label = "ns3";
    r3.pvars = {{"P2", PrincipalRange::Any}};
    r3.vvars = {"V"};
    r3.premises = {Template::enc(Template::id_of(PrincipalRef::role("init")),
                                 {ns_initiator_nonce(), Template::var("V")})};
    r3.conclusion =
        Template::enc(Template::id_of(PrincipalRef::var("P2")), {Template::var("V")});
    p.schemas.push_back(r3);

    p.theorem = ns_theorem();
    return p;
}

ProtocolSpec nsl() {
    ProtocolSpec p = ns();
    p.name = "nsl";
    p.description = "Needham-Schroeder-Lowe (responder identity in the response)";

    // Rule 2's response additionally names the responder.
    RuleSchema& r2 = p.schemas[1];
    Template incoming = r2.premises[0];
    r2.conclusion = Template::enc(
        Template::id_of(PrincipalRef::var("S")),
        {Template::var("V"), Template::nonce_t(incoming, Template::id_of(PrincipalRef::var("R"))),
         Template::id_of(PrincipalRef::var("R"))});

    // Rule 3 fires only when the embedded identity is the session partner,
    // and the final message goes to that partner.
    RuleSchema& r3 = p.schemas[2];
    r3.pvars.clear();
    r3.premises = {Template::enc(Template::id_of(PrincipalRef::role("init")),
                                 {ns_initiator_nonce(), Template::var("V"),
                                  Template::id_of(PrincipalRef::role("resp"))})};
    r3.conclusion =
        Template::enc(Template::id_of(PrincipalRef::role("resp")), {Template::var("V")});
    return p;
}

ProtocolSpec otway_rees() {
    ProtocolSpec p;
    p.name = "otway_rees";
    p.description = "Otway-Rees mutual authentication (message tuples, shared server keys)";
    p.roles = {{"init", PrincipalRange::Any}, {"resp", PrincipalRange::Any}};
    p.primitives = {primitive_encryptor(), primitive_decryptor(), primitive_nonce_generator(),
                    primitive_tuple_projection()};
    p.principal_atoms = {{"kseed", AtomKind::Seed, true}};
    p.session_atoms = {{"kab", AtomKind::Generic, true}};
    p.secret_identities = true;

    auto shared_key = [](PrincipalRef who) {
        return Template::nonce_t(Template::per_atom("kseed", who), Template::id_of(who));
    };
    p.principal_values = {{"sharedkey", shared_key(PrincipalRef::self())}};
    // The key package the server would issue for the session's fresh key.
    p.session_values = {
        {"keypkg",
         Template::tuple_t(
             {Template::enc(shared_key(PrincipalRef::role("init")), {Template::sess_atom("kab")}),
              Template::enc(shared_key(PrincipalRef::role("resp")),
                            {Template::sess_atom("kab")})})}};

    auto id_cipher_guards = [](const std::string& var) {
        return std::vector<Guard>{
            kind_is(path(var), SortCheck::Cipher),
            kind_is(path(var, {K::Key}), SortCheck::NonceV),
            member(path(var, {K::Key, K::Id}), path(var, {K::Plain})),
            all_members(path(var, {K::Plain}), SortCheck::Identity),
            card(path(var, {K::Plain}), 2),
        };
    };
    auto key_cipher_guards = [](const std::string& var) {
        return std::vector<Guard>{
            kind_is(path(var), SortCheck::Cipher),
            kind_is(path(var, {K::Key}), SortCheck::NonceV),
        };
    };
    auto append = [](std::vector<Guard>& dst, std::vector<Guard> src) {
        for (auto& g : src) dst.push_back(std::move(g));
    };

    // Message 1: initiator announces the session: her id cipher plus the two
    // identities in clear.
    RuleSchema m1;
    m1.label = "or1";
    m1.conclusion = Template::tuple_t(
        {Template::enc(shared_key(PrincipalRef::role("init")),
                       {Template::id_of(PrincipalRef::role("init")),
                        Template::id_of(PrincipalRef::role("resp"))}),
         Template::id_of(PrincipalRef::role("init")), Template::id_of(PrincipalRef::role("resp"))});
    p.schemas.push_back(m1);

    // Message 2: the responder extends any message-1 tuple with his own id
    // cipher over the same identities.
    RuleSchema m2;
    m2.label = "or2";
    m2.vvars = {"D", "I1", "I2", "KB"};
    m2.premises = {Template::tuple_t({Template::var("D"), Template::var("I1"), Template::var("I2")})};
    m2.conclusion = Template::tuple_t(
        {Template::var("D"),
         Template::enc(Template::var("KB"), {Template::var("I1"), Template::var("I2")}),
         Template::var("I1"), Template::var("I2")});
    append(m2.guards, id_cipher_guards("D"));
    append(m2.guards, {member(path("I1"), path("D", {K::Plain})),
                       member(path("I2"), path("D", {K::Plain})), ne(path("I1"), path("I2")),
                       kind_is(path("KB"), SortCheck::NonceV),
                       member(path("KB", {K::Id}), path("D", {K::Plain})),
                       ne(path("KB"), path("D", {K::Key}))});
    p.schemas.push_back(m2);

    // Message 3: the server answers a message-2 tuple with a pair of equal
    // plaintext ciphers under the same two keys.
    RuleSchema m3;
    m3.label = "or3";
    m3.vvars = {"D1", "D2", "I1", "I2", "C1", "C2"};
    m3.premises = {Template::tuple_t({Template::var("D1"), Template::var("D2"), Template::var("I1"),
                                      Template::var("I2")})};
    m3.conclusion = Template::tuple_t({Template::var("C1"), Template::var("C2")});
    append(m3.guards, id_cipher_guards("D1"));
    append(m3.guards, id_cipher_guards("D2"));
    append(m3.guards, {set_eq(path("D1", {K::Plain}), path("D2", {K::Plain})),
                       ne(path("D1"), path("D2")), member(path("I1"), path("D1", {K::Plain})),
                       member(path("I2"), path("D1", {K::Plain})), ne(path("I1"), path("I2"))});
    append(m3.guards, key_cipher_guards("C1"));
    append(m3.guards, key_cipher_guards("C2"));
    append(m3.guards, {set_eq(path("C1", {K::Plain}), path("C2", {K::Plain})),
                       ne(path("C1"), path("C2")), eq(path("C1", {K::Key}), path("D1", {K::Key})),
                       eq(path("C2", {K::Key}), path("D2", {K::Key}))});
    p.schemas.push_back(m3);

    // Message 4: the responder forwards the initiator's half of the package.
    RuleSchema m4;
    m4.label = "or4";
    m4.vvars = {"C1", "C2"};
    m4.premises = {Template::tuple_t({Template::var("C1"), Template::var("C2")})};
    m4.conclusion = Template::tuple_t({Template::var("C1")});
    append(m4.guards, key_cipher_guards("C1"));
    append(m4.guards, key_cipher_guards("C2"));
    append(m4.guards, {set_eq(path("C1", {K::Plain}), path("C2", {K::Plain})),
                       ne(path("C1"), path("C2"))});
    p.schemas.push_back(m4);

    // Whatever arrives as message 4's "session key" must not already be
    // Oscar's.
    TheoremSpec t;
    t.label = "delivered_key_secrecy";
    t.vars = {{"M1", VarDomain::Knows, SortCheck::TupleVal},
              {"M2", VarDomain::Knows, SortCheck::TupleVal},
              {"M3", VarDomain::Knows, SortCheck::TupleVal},
              {"M4", VarDomain::Knows, SortCheck::TupleVal}};
    t.pvars = {{"PA", PrincipalRange::Honest}, {"PB", PrincipalRange::Honest}};
    t.matches = {
        {"M1",
         Template::tuple_t({Template::var("D0"), Template::var("IA"), Template::var("IB")})},
        {"M2", Template::tuple_t({Template::var("D1"), Template::var("D2"), Template::var("IA"),
                                  Template::var("IB")})},
        {"M3", Template::tuple_t({Template::var("C1"), Template::var("C2")})},
        {"M4", Template::tuple_t({Template::var("C4")})},
    };
    append(t.guards, id_cipher_guards("D0"));
    append(t.guards, {eq(path("D0", {K::Key, K::Id}), path("IA")), ne(path("IA"), path("IB"))});
    append(t.guards, id_cipher_guards("D1"));
    append(t.guards, id_cipher_guards("D2"));
    append(t.guards, {set_eq(path("D1", {K::Plain}), path("D2", {K::Plain})),
                      eq(path("D1", {K::Key, K::Id}), path("IA")),
                      eq(path("D2", {K::Key, K::Id}), path("IB"))});
    append(t.guards, key_cipher_guards("C1"));
    append(t.guards, key_cipher_guards("C2"));
    append(t.guards, {set_eq(path("C1", {K::Plain}), path("C2", {K::Plain})),
                      eq(path("C1", {K::Key, K::Id}), path("IA")),
                      eq(path("C2", {K::Key, K::Id}), path("IB"))});
    append(t.guards, key_cipher_guards("C4"));
    append(t.guards, {eq(path("C4", {K::Key, K::Id}), path("IA")),
                      all_members(path("C4", {K::Plain}), SortCheck::Atomic),
                      all_undrawn(path("C4", {K::Plain})), all_known(path("C4", {K::Plain})),
                      owns("PA", path("IA")), owns("PB", path("IB")), distinct("PA", "PB")});
    p.theorem = std::move(t);
    return p;
}

ProtocolSpec cpuf_renewal() {
    ProtocolSpec p;
    p.name = "cpuf_renewal";
    p.description = "CPUF shared-secret renewal over challenge-response hashes";
    p.roles = {{"prog", PrincipalRange::Honest}};
    p.primitives = {primitive_encryptor(), primitive_decryptor(), primitive_hasher(),
                    primitive_get_response("hosc"), primitive_get_secret("hosc")};
    p.principal_atoms = {{"hprog", AtomKind::Generic, false}};
    p.oscar_atoms = {{"hosc", AtomKind::Generic}};
    p.session_atoms = {{"presecret", AtomKind::Generic, true}};

    Template hprog = Template::per_atom("hprog", PrincipalRef::role("prog"));
    p.session_values = {
        {"param", Template::hash_t({Template::sess_atom("presecret")})},
        {"oldresp", Template::puf_t(Template::sess_value("param"))},
        {"skey", Template::hash_t({Template::sess_value("oldresp"), hprog})},
        {"newchall", Template::hash_t({hprog, Template::sess_value("param")})},
        {"newresp", Template::puf_t(Template::sess_value("newchall"))},
        {"rcipher",
         Template::enc(Template::sess_value("skey"), {Template::sess_value("newresp")})},
    };

    RuleSchema reveal_param;
    reveal_param.label = "cpuf_param";
    reveal_param.conclusion = Template::sess_value("param");
    p.schemas.push_back(reveal_param);

    RuleSchema reveal_hash;
    reveal_hash.label = "cpuf_hash";
    reveal_hash.conclusion = hprog;
    p.schemas.push_back(reveal_hash);

    RuleSchema reveal_cipher;
    reveal_cipher.label = "cpuf_cipher";
    reveal_cipher.conclusion = Template::sess_value("rcipher");
    p.schemas.push_back(reveal_cipher);

    TheoremSpec t;
    t.label = "renewed_response_secrecy";
    t.vars = {{"NEWR", VarDomain::Knows, SortCheck::Puf},
              {"CIPH", VarDomain::UniverseD, SortCheck::Cipher}};
    t.pvars = {{"P", PrincipalRange::Honest}};
    t.matches = {
        {"CIPH", Template::enc(Template::var("KH"), {Template::var("NEWR")})},
        {"KH", Template::hash_t({Template::var("OLDR"), Template::var("H")})},
        {"OLDR", Template::puf_t(Template::var("OC"))},
        {"NEWR", Template::puf_t(Template::var("NC"))},
        {"NC", Template::hash_t({Template::var("OC"), Template::var("H")})},
    };
    t.guards = {
        kind_is(path("OLDR"), SortCheck::Puf),
        kind_is(path("H"), SortCheck::Atomic),
        kind_is(path("OC"), SortCheck::HashVal),
        all_members(path("OC", {K::Pre}), SortCheck::Atomic),
        all_undrawn(path("OC", {K::Pre})),
        ne(path("OLDR"), path("NEWR")),
        owns("P", path("H")),
    };
    p.theorem = std::move(t);
    return p;
}

const std::vector<std::string>& builtin_protocol_names() {
    static const std::vector<std::string> names = {"ns", "nsl", "otway_rees", "cpuf_renewal"};
    return names;
}

std::optional<ProtocolSpec> find_builtin(const std::string& name) {
    if (name == "ns") return ns();
    if (name == "nsl") return nsl();
    if (name == "otway_rees") return otway_rees();
    if (name == "cpuf_renewal") return cpuf_renewal();
    return std::nullopt;
}

}  // namespace kflow
