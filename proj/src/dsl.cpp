#include "kflow/dsl.hpp"

#include <cctype>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace kflow {

std::string ParseDiagnostic::to_string() const {
    std::ostringstream out;
    out << (severity == DiagSeverity::Error ? "error" : "warning") << "[" << code << "] line "
        << span.line << ":" << span.col_start << ": " << message;
    return out.str();
}

namespace {

// --- Tokens -----------------------------------------------------------------

enum class Tok {
    Ident,
    Number,
    String,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Semi,
    Colon,
    Dot,
    Assign,  // =
    EqEq,    // ==
    NotEq,   // !=
    End,
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    SourceSpan span;
};

struct ParseError {
    ParseDiagnostic diag;
};

[[noreturn]] void fail(const std::string& code, const std::string& msg, SourceSpan span) {
    throw ParseError{ParseDiagnostic{DiagSeverity::Error, code, msg, span}};
}

std::vector<Token> lex(const std::string& text) {
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto span1 = [&](int len) { return SourceSpan{line, col, col + len - 1}; };
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (c == '\n') {
            ++line;
            col = 1;
            ++i;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r') {
            ++col;
            ++i;
            continue;
        }
        if (c == '#') {
            while (i < text.size() && text[i] != '\n') ++i;
            continue;
        }
        if (std::isalpha(c) || c == '_') {
            std::size_t j = i;
            while (j < text.size() &&
                   (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
                ++j;
            int len = static_cast<int>(j - i);
            out.push_back({Tok::Ident, text.substr(i, j - i), span1(len)});
            col += len;
            i = j;
            continue;
        }
        if (std::isdigit(c)) {
            std::size_t j = i;
            while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
            int len = static_cast<int>(j - i);
            out.push_back({Tok::Number, text.substr(i, j - i), span1(len)});
            col += len;
            i = j;
            continue;
        }
        if (c == '"') {
            std::size_t j = i + 1;
            std::string s;
            while (j < text.size() && text[j] != '"' && text[j] != '\n') {
                s += text[j];
                ++j;
            }
            if (j >= text.size() || text[j] != '"')
                fail("SyntaxError", "unterminated string literal", span1(1));
            int len = static_cast<int>(j - i + 1);
            out.push_back({Tok::String, s, span1(len)});
            col += len;
            i = j + 1;
            continue;
        }
        auto two = [&](char a, char b) {
            return text[i] == a && i + 1 < text.size() && text[i + 1] == b;
        };
        if (two('=', '=')) {
            out.push_back({Tok::EqEq, "==", span1(2)});
            i += 2;
            col += 2;
            continue;
        }
        if (two('!', '=')) {
            out.push_back({Tok::NotEq, "!=", span1(2)});
            i += 2;
            col += 2;
            continue;
        }
        Tok k;
        switch (c) {
            case '{': k = Tok::LBrace; break;
            case '}': k = Tok::RBrace; break;
            case '(': k = Tok::LParen; break;
            case ')': k = Tok::RParen; break;
            case ',': k = Tok::Comma; break;
            case ';': k = Tok::Semi; break;
            case ':': k = Tok::Colon; break;
            case '.': k = Tok::Dot; break;
            case '=': k = Tok::Assign; break;
            default:
                fail("SyntaxError", "unexpected character (byte " + std::to_string(int(c)) + ")",
                     span1(1));
        }
        out.push_back({k, std::string(1, static_cast<char>(c)), span1(1)});
        ++col;
        ++i;
    }
    out.push_back({Tok::End, "", SourceSpan{line, col, col}});
    return out;
}

// --- Name tables ---------------------------------------------------------------

const std::map<std::string, SortCheck>& sort_names() {
    static const std::map<std::string, SortCheck> m = {
        {"value", SortCheck::AnyValue}, {"atomic", SortCheck::Atomic},
        {"identity", SortCheck::Identity}, {"seedatom", SortCheck::SeedAtom},
        {"cipher", SortCheck::Cipher},  {"nonce", SortCheck::NonceV},
        {"hash", SortCheck::HashVal},   {"tuple", SortCheck::TupleVal},
        {"puf", SortCheck::Puf},
    };
    return m;
}

std::string sort_name(SortCheck s) {
    for (const auto& [n, v] : sort_names())
        if (v == s) return n;
    return "value";
}

const std::map<std::string, AtomKind>& atom_kind_names() {
    static const std::map<std::string, AtomKind> m = {
        {"identity", AtomKind::Identity}, {"seed", AtomKind::Seed}, {"generic", AtomKind::Generic}};
    return m;
}

std::string atom_kind_name(AtomKind k) {
    switch (k) {
        case AtomKind::Identity: return "identity";
        case AtomKind::Seed: return "seed";
        default: return "generic";
    }
}

const std::map<std::string, GuardPath::Step>& step_names() {
    static const std::map<std::string, GuardPath::Step> m = {
        {"key", GuardPath::Step::Key},     {"seed", GuardPath::Step::Seed},
        {"id", GuardPath::Step::Id},       {"chall", GuardPath::Step::Challenge},
        {"plain", GuardPath::Step::Plain}, {"pre", GuardPath::Step::Pre},
        {"items", GuardPath::Step::Contents},
    };
    return m;
}

std::string step_name(GuardPath::Step s) {
    for (const auto& [n, v] : step_names())
        if (v == s) return n;
    return "?";
}

RuleSchema primitive_by_name(const std::string& name, const std::string& param,
                             SourceSpan span) {
    if (name == "enc") return primitive_encryptor();
    if (name == "dec") return primitive_decryptor();
    if (name == "noncegen") return primitive_nonce_generator();
    if (name == "hashgen") return primitive_hasher();
    if (name == "project") return primitive_tuple_projection();
    if (name == "getresponse") return primitive_get_response(param.empty() ? "hosc" : param);
    if (name == "getsecret") return primitive_get_secret(param.empty() ? "hosc" : param);
    fail("UnknownPrimitive", "unknown primitive '" + name + "'", span);
}

// --- Parser ----------------------------------------------------------------------

struct Parser {
    std::vector<Token> toks;
    std::size_t pos = 0;
    ProtocolSpec spec;

    // declaration tables for name resolution
    std::set<std::string> role_names_set;
    std::set<std::string> session_atom_names;
    std::set<std::string> session_value_names;
    std::set<std::string> principal_atom_names;
    std::set<std::string> oscar_atom_names;

    const Token& peek() const { return toks[pos]; }
    const Token& get() { return toks[pos == toks.size() - 1 ? pos : pos++]; }
    bool at(Tok k) const { return peek().kind == k; }
    bool accept(Tok k) {
        if (!at(k)) return false;
        ++pos;
        return true;
    }
    Token expect(Tok k, const std::string& what) {
        if (!at(k)) fail("SyntaxError", "expected " + what + ", found '" + peek().text + "'",
                         peek().span);
        return toks[pos++];
    }
    std::string expect_ident(const std::string& what) { return expect(Tok::Ident, what).text; }
    bool accept_kw(const std::string& kw) {
        if (at(Tok::Ident) && peek().text == kw) {
            ++pos;
            return true;
        }
        return false;
    }

    // --- templates ---

    bool is_upper_name(const std::string& s) const { return !s.empty() && std::isupper(s[0]); }

    PrincipalRef parse_pref(const std::set<std::string>& pvars, bool allow_self) {
        Token t = expect(Tok::Ident, "principal name");
        if (t.text == "self") {
            if (!allow_self)
                fail("SyntaxError", "'self' is only valid in principal_value declarations",
                     t.span);
            return PrincipalRef::self();
        }
        if (role_names_set.count(t.text)) return PrincipalRef::role(t.text);
        if (pvars.count(t.text)) return PrincipalRef::var(t.text);
        fail("UnboundVariable", "'" + t.text + "' is neither a role nor a declared pvar", t.span);
    }

    std::vector<Template> parse_template_set(const std::set<std::string>& vvars,
                                             const std::set<std::string>& pvars, bool allow_self,
                                             std::set<std::string>* bindable) {
        expect(Tok::LBrace, "'{'");
        std::vector<Template> out;
        if (!at(Tok::RBrace)) {
            out.push_back(parse_template(vvars, pvars, allow_self, bindable));
            while (accept(Tok::Comma))
                out.push_back(parse_template(vvars, pvars, allow_self, bindable));
        }
        expect(Tok::RBrace, "'}'");
        if (out.empty()) fail("SyntaxError", "set field must be non-empty", peek().span);
        return out;
    }

    Template parse_template(const std::set<std::string>& vvars, const std::set<std::string>& pvars,
                            bool allow_self, std::set<std::string>* bindable) {
        Token t = expect(Tok::Ident, "template");
        const std::string& w = t.text;
        if (w == "enc") {
            expect(Tok::LParen, "'('");
            if (expect_ident("'key'") != "key") fail("SyntaxError", "expected key=", t.span);
            expect(Tok::Assign, "'='");
            Template key = parse_template(vvars, pvars, allow_self, bindable);
            expect(Tok::Comma, "','");
            if (expect_ident("'plain'") != "plain") fail("SyntaxError", "expected plain=", t.span);
            expect(Tok::Assign, "'='");
            std::vector<Template> plain = parse_template_set(vvars, pvars, allow_self, bindable);
            expect(Tok::RParen, "')'");
            return Template::enc(std::move(key), std::move(plain));
        }
        if (w == "nonce") {
            expect(Tok::LParen, "'('");
            if (expect_ident("'seed'") != "seed") fail("SyntaxError", "expected seed=", t.span);
            expect(Tok::Assign, "'='");
            Template seed = parse_template(vvars, pvars, allow_self, bindable);
            expect(Tok::Comma, "','");
            if (expect_ident("'id'") != "id") fail("SyntaxError", "expected id=", t.span);
            expect(Tok::Assign, "'='");
            Template id = parse_template(vvars, pvars, allow_self, bindable);
            expect(Tok::RParen, "')'");
            return Template::nonce_t(std::move(seed), std::move(id));
        }
        if (w == "hash")
            return Template::hash_t(parse_template_set(vvars, pvars, allow_self, bindable));
        if (w == "tuple")
            return Template::tuple_t(parse_template_set(vvars, pvars, allow_self, bindable));
        if (w == "puf") {
            expect(Tok::LParen, "'('");
            Template c = parse_template(vvars, pvars, allow_self, bindable);
            expect(Tok::RParen, "')'");
            return Template::puf_t(std::move(c));
        }
        if (w == "id") {
            expect(Tok::LParen, "'('");
            PrincipalRef p = parse_pref(pvars, allow_self);
            expect(Tok::RParen, "')'");
            return Template::id_of(std::move(p));
        }
        if (w == "atom") {
            expect(Tok::LParen, "'('");
            std::string decl = expect_ident("atom declaration");
            if (!principal_atom_names.count(decl))
                fail("UnboundVariable", "'" + decl + "' is not a declared principal_atom", t.span);
            expect(Tok::Comma, "','");
            PrincipalRef p = parse_pref(pvars, allow_self);
            expect(Tok::RParen, "')'");
            return Template::per_atom(decl, std::move(p));
        }
        if (w == "oscatom") {
            expect(Tok::LParen, "'('");
            std::string decl = expect_ident("oscar atom declaration");
            if (!oscar_atom_names.count(decl))
                fail("UnboundVariable", "'" + decl + "' is not a declared oscar_atom", t.span);
            expect(Tok::RParen, "')'");
            return Template::osc_atom(decl);
        }
        if (session_atom_names.count(w)) return Template::sess_atom(w);
        if (session_value_names.count(w)) return Template::sess_value(w);
        if (is_upper_name(w)) {
            if (!vvars.count(w)) {
                if (bindable)
                    bindable->insert(w);  // theorem patterns may bind new variables
                else
                    fail("UnboundVariable", "undeclared variable '" + w + "'", t.span);
            }
            return Template::var(w);
        }
        fail("UnboundVariable", "unknown name '" + w + "'", t.span);
    }

    // --- guards ---

    GuardPath parse_path(const std::set<std::string>& known_vars) {
        Token t = expect(Tok::Ident, "variable");
        if (!known_vars.count(t.text))
            fail("UnboundVariable", "undeclared variable '" + t.text + "' in guard", t.span);
        GuardPath p;
        p.var = t.text;
        while (accept(Tok::Dot)) {
            Token s = expect(Tok::Ident, "path step");
            auto it = step_names().find(s.text);
            if (it == step_names().end())
                fail("SyntaxError", "unknown projection '" + s.text + "'", s.span);
            p.steps.push_back(it->second);
        }
        return p;
    }

    Guard parse_guard(const std::set<std::string>& known_vars, const std::set<std::string>& pvars) {
        Token t = peek();
        auto call1 = [&](Guard::Kind k) {
            Guard g;
            g.kind = k;
            ++pos;
            expect(Tok::LParen, "'('");
            g.path = parse_path(known_vars);
            expect(Tok::RParen, "')'");
            return g;
        };
        if (t.kind == Tok::Ident) {
            const std::string& w = t.text;
            if (w == "kind" || w == "all_kind") {
                Guard g;
                g.kind = w == "kind" ? Guard::Kind::KindIs : Guard::Kind::AllMembersSort;
                ++pos;
                expect(Tok::LParen, "'('");
                g.path = parse_path(known_vars);
                expect(Tok::Comma, "','");
                Token s = expect(Tok::Ident, "sort");
                auto it = sort_names().find(s.text);
                if (it == sort_names().end())
                    fail("SyntaxError", "unknown sort '" + s.text + "'", s.span);
                g.sort = it->second;
                expect(Tok::RParen, "')'");
                return g;
            }
            if (w == "member" || w == "set_eq") {
                Guard g;
                g.kind = w == "member" ? Guard::Kind::Member : Guard::Kind::SetEq;
                ++pos;
                expect(Tok::LParen, "'('");
                g.path = parse_path(known_vars);
                expect(Tok::Comma, "','");
                g.other = parse_path(known_vars);
                expect(Tok::RParen, "')'");
                return g;
            }
            if (w == "card" || w == "card_le") {
                Guard g;
                g.kind = w == "card" ? Guard::Kind::Card : Guard::Kind::CardAtMost;
                ++pos;
                expect(Tok::LParen, "'('");
                g.path = parse_path(known_vars);
                expect(Tok::Comma, "','");
                Token n = expect(Tok::Number, "cardinality");
                g.card = static_cast<std::size_t>(std::stoul(n.text));
                expect(Tok::RParen, "')'");
                return g;
            }
            if (w == "all_known") return call1(Guard::Kind::AllMembersKnown);
            if (w == "all_undrawn") return call1(Guard::Kind::AllMembersNotDrawn);
            if (w == "oscar_owns") return call1(Guard::Kind::OscarOwns);
            if (w == "owns") {
                Guard g;
                g.kind = Guard::Kind::OwnsVar;
                ++pos;
                expect(Tok::LParen, "'('");
                Token pv = expect(Tok::Ident, "pvar");
                if (!pvars.count(pv.text))
                    fail("UnboundVariable", "undeclared pvar '" + pv.text + "'", pv.span);
                g.pvar = pv.text;
                expect(Tok::Comma, "','");
                g.path = parse_path(known_vars);
                expect(Tok::RParen, "')'");
                return g;
            }
            if (w == "distinct") {
                Guard g;
                g.kind = Guard::Kind::DistinctP;
                ++pos;
                expect(Tok::LParen, "'('");
                Token a = expect(Tok::Ident, "pvar");
                expect(Tok::Comma, "','");
                Token b = expect(Tok::Ident, "pvar");
                expect(Tok::RParen, "')'");
                if (!pvars.count(a.text))
                    fail("UnboundVariable", "undeclared pvar '" + a.text + "'", a.span);
                if (!pvars.count(b.text))
                    fail("UnboundVariable", "undeclared pvar '" + b.text + "'", b.span);
                g.pvar = a.text;
                g.pvar2 = b.text;
                return g;
            }
            if (w == "if_publickey") {
                Guard g;
                g.kind = Guard::Kind::IfPublicKey;
                ++pos;
                expect(Tok::LParen, "'('");
                g.inner.push_back(parse_guard(known_vars, pvars));
                while (accept(Tok::Comma)) g.inner.push_back(parse_guard(known_vars, pvars));
                expect(Tok::RParen, "')'");
                return g;
            }
            // fall through: comparison starting with a path
            GuardPath a = parse_path(known_vars);
            Guard g;
            if (accept(Tok::EqEq))
                g.kind = Guard::Kind::Eq;
            else if (accept(Tok::NotEq))
                g.kind = Guard::Kind::Ne;
            else
                fail("SyntaxError", "expected '==' or '!=' after path", peek().span);
            g.path = std::move(a);
            g.other = parse_path(known_vars);
            return g;
        }
        fail("SyntaxError", "expected a guard", t.span);
    }

    // --- sections ---

    void parse_atom_decl(std::vector<AtomDecl>& into, std::set<std::string>& names) {
        Token name = expect(Tok::Ident, "atom name");
        expect(Tok::Colon, "':'");
        Token kind = expect(Tok::Ident, "atom kind");
        auto it = atom_kind_names().find(kind.text);
        if (it == atom_kind_names().end())
            fail("SyntaxError", "unknown atom kind '" + kind.text + "'", kind.span);
        bool secret = accept_kw("secret");
        expect(Tok::Semi, "';'");
        if (!names.insert(name.text).second)
            fail("SyntaxError", "duplicate declaration '" + name.text + "'", name.span);
        into.push_back(AtomDecl{name.text, it->second, secret});
    }

    void parse_rule() {
        Token label = expect(Tok::Ident, "rule label");
        for (const auto& s : spec.schemas)
            if (s.label == label.text)
                fail("DuplicateRuleLabel", "rule '" + label.text + "' already defined", label.span);
        RuleSchema r;
        r.label = label.text;
        expect(Tok::LBrace, "'{'");
        std::set<std::string> vvars, pvars;
        bool have_conclusion = false;
        while (!at(Tok::RBrace) && !at(Tok::End)) {
            if (accept_kw("pvar")) {
                Token n = expect(Tok::Ident, "pvar name");
                expect(Tok::Colon, "':'");
                Token range = expect(Tok::Ident, "range");
                PrincipalRange pr;
                if (range.text == "honest")
                    pr = PrincipalRange::Honest;
                else if (range.text == "any")
                    pr = PrincipalRange::Any;
                else
                    fail("SyntaxError", "range must be honest or any", range.span);
                expect(Tok::Semi, "';'");
                if (!pvars.insert(n.text).second)
                    fail("SyntaxError", "duplicate pvar '" + n.text + "'", n.span);
                r.pvars.emplace_back(n.text, pr);
            } else if (accept_kw("var")) {
                Token n = expect(Tok::Ident, "var name");
                expect(Tok::Semi, "';'");
                if (!vvars.insert(n.text).second)
                    fail("SyntaxError", "duplicate var '" + n.text + "'", n.span);
                r.vvars.push_back(n.text);
            } else if (accept_kw("premise")) {
                r.premises.push_back(parse_template(vvars, pvars, false, nullptr));
                expect(Tok::Semi, "';'");
            } else if (accept_kw("conclude")) {
                r.conclusion = parse_template(vvars, pvars, false, nullptr);
                expect(Tok::Semi, "';'");
                have_conclusion = true;
            } else if (accept_kw("guard")) {
                r.guards.push_back(parse_guard(vvars, pvars));
                expect(Tok::Semi, "';'");
            } else {
                fail("SyntaxError", "unexpected '" + peek().text + "' in rule body", peek().span);
            }
        }
        expect(Tok::RBrace, "'}'");
        if (!have_conclusion)
            fail("SyntaxError", "rule '" + r.label + "' has no conclude clause", label.span);
        // Every value variable must occur structurally; grounding binds
        // variables only by matching templates.
        std::function<void(const Template&, std::set<std::string>&)> occurs =
            [&](const Template& t, std::set<std::string>& out) {
                if (t.kind == Template::Kind::Var) out.insert(t.name);
                for (const auto& c : t.children) occurs(c, out);
            };
        std::set<std::string> used;
        for (const auto& prem : r.premises) occurs(prem, used);
        occurs(r.conclusion, used);
        for (const auto& v : r.vvars)
            if (!used.count(v))
                fail("UnboundVariable",
                     "variable '" + v + "' occurs in no premise or conclusion of rule '" +
                         r.label + "'",
                     label.span);
        spec.schemas.push_back(std::move(r));
    }

    void parse_theorem() {
        Token label = expect(Tok::Ident, "theorem label");
        TheoremSpec t;
        t.label = label.text;
        expect(Tok::LBrace, "'{'");
        std::set<std::string> bound, pvars;
        while (!at(Tok::RBrace) && !at(Tok::End)) {
            if (accept_kw("pvar")) {
                Token n = expect(Tok::Ident, "pvar name");
                expect(Tok::Colon, "':'");
                Token range = expect(Tok::Ident, "range");
                PrincipalRange pr;
                if (range.text == "honest")
                    pr = PrincipalRange::Honest;
                else if (range.text == "any")
                    pr = PrincipalRange::Any;
                else
                    fail("SyntaxError", "range must be honest or any", range.span);
                expect(Tok::Semi, "';'");
                pvars.insert(n.text);
                t.pvars.push_back({n.text, pr});
            } else if (accept_kw("var")) {
                Token n = expect(Tok::Ident, "var name");
                expect(Tok::Colon, "':'");
                Token s = expect(Tok::Ident, "sort");
                auto it = sort_names().find(s.text);
                if (it == sort_names().end())
                    fail("SyntaxError", "unknown sort '" + s.text + "'", s.span);
                VarDomain dom = VarDomain::UniverseD;
                if (accept_kw("in")) {
                    Token d = expect(Tok::Ident, "domain");
                    if (d.text == "knows")
                        dom = VarDomain::Knows;
                    else if (d.text == "universe")
                        dom = VarDomain::UniverseD;
                    else
                        fail("SyntaxError", "domain must be knows or universe", d.span);
                }
                expect(Tok::Semi, "';'");
                bound.insert(n.text);
                t.vars.push_back({n.text, dom, it->second});
            } else if (accept_kw("match")) {
                Token n = expect(Tok::Ident, "variable");
                if (!bound.count(n.text))
                    fail("UnboundVariable",
                         "match target '" + n.text + "' is not bound at this point", n.span);
                expect(Tok::Assign, "'='");
                std::set<std::string> fresh;
                Template pat = parse_template(bound, pvars, false, &fresh);
                expect(Tok::Semi, "';'");
                bound.insert(fresh.begin(), fresh.end());
                t.matches.push_back({n.text, std::move(pat)});
            } else if (accept_kw("guard")) {
                t.guards.push_back(parse_guard(bound, pvars));
                expect(Tok::Semi, "';'");
            } else {
                fail("SyntaxError", "unexpected '" + peek().text + "' in theorem body",
                     peek().span);
            }
        }
        expect(Tok::RBrace, "'}'");
        spec.theorem = std::move(t);
    }

    void parse_value_decl(bool per_principal) {
        Token name = expect(Tok::Ident, "value name");
        expect(Tok::Assign, "'='");
        std::set<std::string> no_vars;
        Template tmpl = parse_template(no_vars, no_vars, per_principal, nullptr);
        expect(Tok::Semi, "';'");
        auto& names = per_principal ? principal_atom_names : session_value_names;
        (void)names;
        if (per_principal) {
            spec.principal_values.push_back({name.text, std::move(tmpl)});
        } else {
            if (!session_value_names.insert(name.text).second)
                fail("SyntaxError", "duplicate declaration '" + name.text + "'", name.span);
            spec.session_values.push_back({name.text, std::move(tmpl)});
        }
    }

    ProtocolSpec run() {
        if (!accept_kw("protocol"))
            fail("SyntaxError", "expected 'protocol' header", peek().span);
        spec.name = expect_ident("protocol name");
        expect(Tok::LBrace, "'{'");
        while (!at(Tok::RBrace) && !at(Tok::End)) {
            if (accept_kw("describe")) {
                spec.description = expect(Tok::String, "description string").text;
                expect(Tok::Semi, "';'");
            } else if (accept_kw("roles")) {
                while (!at(Tok::Semi) && !at(Tok::End)) {
                    Token n = expect(Tok::Ident, "role name");
                    expect(Tok::Colon, "':'");
                    Token range = expect(Tok::Ident, "range");
                    PrincipalRange pr;
                    if (range.text == "honest")
                        pr = PrincipalRange::Honest;
                    else if (range.text == "any")
                        pr = PrincipalRange::Any;
                    else
                        fail("SyntaxError", "range must be honest or any", range.span);
                    role_names_set.insert(n.text);
                    spec.roles.push_back({n.text, pr});
                }
                expect(Tok::Semi, "';'");
            } else if (accept_kw("options")) {
                while (!at(Tok::Semi) && !at(Tok::End)) {
                    Token o = expect(Tok::Ident, "option");
                    if (o.text == "publickey")
                        spec.options.public_key_crypto = true;
                    else if (o.text == "ids_are_keys")
                        spec.options.identities_are_keys = true;
                    else
                        fail("SyntaxError", "unknown option '" + o.text + "'", o.span);
                }
                expect(Tok::Semi, "';'");
            } else if (accept_kw("primitives")) {
                while (!at(Tok::Semi) && !at(Tok::End)) {
                    Token o = expect(Tok::Ident, "primitive");
                    std::string param;
                    if (accept(Tok::LParen)) {
                        param = expect_ident("primitive parameter");
                        expect(Tok::RParen, "')'");
                    }
                    spec.primitives.push_back(primitive_by_name(o.text, param, o.span));
                }
                expect(Tok::Semi, "';'");
            } else if (accept_kw("session_atom")) {
                parse_atom_decl(spec.session_atoms, session_atom_names);
            } else if (accept_kw("principal_atom")) {
                parse_atom_decl(spec.principal_atoms, principal_atom_names);
            } else if (accept_kw("oscar_atom")) {
                parse_atom_decl(spec.oscar_atoms, oscar_atom_names);
            } else if (accept_kw("principal_value")) {
                parse_value_decl(true);
            } else if (accept_kw("session_value")) {
                parse_value_decl(false);
            } else if (accept_kw("secret_identities")) {
                expect(Tok::Semi, "';'");
                spec.secret_identities = true;
            } else if (accept_kw("rule")) {
                parse_rule();
            } else if (accept_kw("theorem")) {
                parse_theorem();
            } else {
                fail("SyntaxError", "unexpected '" + peek().text + "' at top level", peek().span);
            }
        }
        expect(Tok::RBrace, "'}'");
        if (!at(Tok::End)) fail("SyntaxError", "trailing input after protocol block", peek().span);
        return spec;
    }
};

}  // namespace

ParseResult parse_protocol(const std::string& text, const std::string&) {
    ParseResult result;
    try {
        Parser p;
        p.toks = lex(text);
        result.spec = p.run();
    } catch (const ParseError& e) {
        result.diagnostics.push_back(e.diag);
    } catch (const std::exception& e) {
        result.diagnostics.push_back(
            ParseDiagnostic{DiagSeverity::Error, "SyntaxError", e.what(), SourceSpan{}});
    }
    return result;
}

// --- Renderer ----------------------------------------------------------------------

namespace {

std::string render_pref(const PrincipalRef& p) {
    switch (p.kind) {
        case PrincipalRef::Kind::RoleName: return p.name;
        case PrincipalRef::Kind::Var: return p.name;
        case PrincipalRef::Kind::SelfOwner: return "self";
        case PrincipalRef::Kind::Fixed: return "@" + std::to_string(p.index);
    }
    return "?";
}

std::string render_template(const Template& t) {
    auto render_set = [](const std::vector<Template>& ts, std::size_t from) {
        std::string out = "{";
        for (std::size_t i = from; i < ts.size(); ++i) {
            if (i > from) out += ", ";
            out += render_template(ts[i]);
        }
        out += "}";
        return out;
    };
    switch (t.kind) {
        case Template::Kind::Var: return t.name;
        case Template::Kind::Const: return "@const";
        case Template::Kind::IdOf: return "id(" + render_pref(t.principal) + ")";
        case Template::Kind::PerAtom:
            return "atom(" + t.name + ", " + render_pref(t.principal) + ")";
        case Template::Kind::SessAtom: return t.name;
        case Template::Kind::SessValue: return t.name;
        case Template::Kind::OscAtom: return "oscatom(" + t.name + ")";
        case Template::Kind::Enc:
            return "enc(key=" + render_template(t.children[0]) + ", plain=" + render_set(t.children, 1) +
                   ")";
        case Template::Kind::NonceT:
            return "nonce(seed=" + render_template(t.children[0]) +
                   ", id=" + render_template(t.children[1]) + ")";
        case Template::Kind::HashT: return "hash" + render_set(t.children, 0);
        case Template::Kind::TupleT: return "tuple" + render_set(t.children, 0);
        case Template::Kind::PufT: return "puf(" + render_template(t.children[0]) + ")";
    }
    return "?";
}

std::string render_path(const GuardPath& p) {
    std::string out = p.var;
    for (auto s : p.steps) {
        out += ".";
        out += step_name(s);
    }
    return out;
}

std::string render_guard(const Guard& g) {
    switch (g.kind) {
        case Guard::Kind::KindIs:
            return "kind(" + render_path(g.path) + ", " + sort_name(g.sort) + ")";
        case Guard::Kind::Eq: return render_path(g.path) + " == " + render_path(g.other);
        case Guard::Kind::Ne: return render_path(g.path) + " != " + render_path(g.other);
        case Guard::Kind::Member:
            return "member(" + render_path(g.path) + ", " + render_path(g.other) + ")";
        case Guard::Kind::SetEq:
            return "set_eq(" + render_path(g.path) + ", " + render_path(g.other) + ")";
        case Guard::Kind::Card:
            return "card(" + render_path(g.path) + ", " + std::to_string(g.card) + ")";
        case Guard::Kind::CardAtMost:
            return "card_le(" + render_path(g.path) + ", " + std::to_string(g.card) + ")";
        case Guard::Kind::AllMembersSort:
            return "all_kind(" + render_path(g.path) + ", " + sort_name(g.sort) + ")";
        case Guard::Kind::AllMembersKnown: return "all_known(" + render_path(g.path) + ")";
        case Guard::Kind::AllMembersNotDrawn: return "all_undrawn(" + render_path(g.path) + ")";
        case Guard::Kind::OwnsVar: return "owns(" + g.pvar + ", " + render_path(g.path) + ")";
        case Guard::Kind::OscarOwns: return "oscar_owns(" + render_path(g.path) + ")";
        case Guard::Kind::DistinctP: return "distinct(" + g.pvar + ", " + g.pvar2 + ")";
        case Guard::Kind::IfPublicKey: {
            std::string out = "if_publickey(";
            for (std::size_t i = 0; i < g.inner.size(); ++i) {
                if (i) out += ", ";
                out += render_guard(g.inner[i]);
            }
            return out + ")";
        }
    }
    return "?";
}

std::string primitive_render(const RuleSchema& p) {
    switch (p.builtin) {
        case Primitive::Encryptor: return "enc";
        case Primitive::Decryptor: return "dec";
        case Primitive::NonceGenerator: return "noncegen";
        case Primitive::Hasher: return "hashgen";
        case Primitive::TupleProjection: return "project";
        case Primitive::GetResponse: return "getresponse(" + p.builtin_param + ")";
        case Primitive::GetSecret: return "getsecret(" + p.builtin_param + ")";
        case Primitive::None: return "?";
    }
    return "?";
}

}  // namespace

std::string render_protocol(const ProtocolSpec& spec) {
    std::ostringstream out;
    out << "protocol " << spec.name << " {\n";
    if (!spec.description.empty()) out << "  describe \"" << spec.description << "\";\n";
    if (!spec.roles.empty()) {
        out << "  roles";
        for (const auto& r : spec.roles)
            out << " " << r.name << ":" << (r.range == PrincipalRange::Honest ? "honest" : "any");
        out << ";\n";
    }
    if (spec.options.public_key_crypto || spec.options.identities_are_keys) {
        out << "  options";
        if (spec.options.public_key_crypto) out << " publickey";
        if (spec.options.identities_are_keys) out << " ids_are_keys";
        out << ";\n";
    }
    if (!spec.primitives.empty()) {
        out << "  primitives";
        for (const auto& p : spec.primitives) out << " " << primitive_render(p);
        out << ";\n";
    }
    for (const auto& a : spec.session_atoms)
        out << "  session_atom " << a.name << " : " << atom_kind_name(a.kind)
            << (a.secret ? " secret" : "") << ";\n";
    for (const auto& a : spec.principal_atoms)
        out << "  principal_atom " << a.name << " : " << atom_kind_name(a.kind)
            << (a.secret ? " secret" : "") << ";\n";
    for (const auto& a : spec.oscar_atoms)
        out << "  oscar_atom " << a.name << " : " << atom_kind_name(a.kind)
            << (a.secret ? " secret" : "") << ";\n";
    for (const auto& v : spec.principal_values)
        out << "  principal_value " << v.name << " = " << render_template(v.tmpl) << ";\n";
    for (const auto& v : spec.session_values)
        out << "  session_value " << v.name << " = " << render_template(v.tmpl) << ";\n";
    if (spec.secret_identities) out << "  secret_identities;\n";
    for (const auto& r : spec.schemas) {
        out << "\n  rule " << r.label << " {\n";
        for (const auto& [name, range] : r.pvars)
            out << "    pvar " << name << " : "
                << (range == PrincipalRange::Honest ? "honest" : "any") << ";\n";
        for (const auto& v : r.vvars) out << "    var " << v << ";\n";
        for (const auto& p : r.premises) out << "    premise " << render_template(p) << ";\n";
        out << "    conclude " << render_template(r.conclusion) << ";\n";
        for (const auto& g : r.guards) out << "    guard " << render_guard(g) << ";\n";
        out << "  }\n";
    }
    out << "\n  theorem " << spec.theorem.label << " {\n";
    for (const auto& v : spec.theorem.vars) {
        out << "    var " << v.name << " : " << sort_name(v.sort);
        if (v.domain == VarDomain::Knows) out << " in knows";
        out << ";\n";
    }
    for (const auto& p : spec.theorem.pvars)
        out << "    pvar " << p.name << " : "
            << (p.range == PrincipalRange::Honest ? "honest" : "any") << ";\n";
    for (const auto& m : spec.theorem.matches)
        out << "    match " << m.var << " = " << render_template(m.pattern) << ";\n";
    for (const auto& g : spec.theorem.guards) out << "    guard " << render_guard(g) << ";\n";
    out << "  }\n";
    out << "}\n";
    return out.str();
}

}  // namespace kflow
