#include "doctest.h"
#include "kflow/terms.hpp"
#include "test_util.hpp"

using namespace kflow;

TEST_CASE("interning is idempotent") {
    ValueTable t;
    ValueHandle a1 = t.atom("A");
    ValueHandle a2 = t.atom("A");
    CHECK(a1 == a2);
    CHECK(t.size() == 1);
}

TEST_CASE("ciphertexts differing in key or plaintext are distinct") {
    ValueTable t;
    ValueHandle a = t.atom("A"), b = t.atom("B"), na = t.atom("nA");
    ValueHandle c1 = t.cipher(b, {a, na});
    ValueHandle c2 = t.cipher(a, {a, na});
    CHECK(c1 != c2);
    CHECK(t.cipher(b, {na, a}) == c1);  // plaintext is a set
}

TEST_CASE("occurs check rejects self-referential structure") {
    ValueTable t;
    ValueHandle a = t.atom("A");
    ValueHandle self{static_cast<std::uint32_t>(t.size())};  // the handle intern would assign
    CHECK_THROWS_AS(t.intern(Ciphertext{self, {a}}), OccursViolation);
    CHECK_THROWS_AS(t.intern(Ciphertext{a, {self}}), OccursViolation);
}

TEST_CASE("empty composite fields are rejected") {
    ValueTable t;
    ValueHandle a = t.atom("A");
    CHECK_THROWS_AS(t.intern(Ciphertext{a, {}}), EmptyComposite);
    CHECK_THROWS_AS(t.intern(HashV{{}}), EmptyComposite);
    CHECK_THROWS_AS(t.intern(Tuple{{}}), EmptyComposite);
}

namespace {

// Independent subterm oracle: recompute reachability from the term structure.
void oracle_subterms(const ValueTable& t, ValueHandle v, std::set<ValueHandle>& out) {
    if (!out.insert(v).second) return;
    const ValueTerm& term = t.term(v);
    if (auto* c = std::get_if<Ciphertext>(&term)) {
        oracle_subterms(t, c->key, out);
        for (auto m : c->plaintext) oracle_subterms(t, m, out);
    } else if (auto* n = std::get_if<Nonce>(&term)) {
        oracle_subterms(t, n->seed, out);
        oracle_subterms(t, n->id, out);
    } else if (auto* h = std::get_if<HashV>(&term)) {
        for (auto m : h->preimage) oracle_subterms(t, m, out);
    } else if (auto* tp = std::get_if<Tuple>(&term)) {
        for (auto m : tp->contents) oracle_subterms(t, m, out);
    } else if (auto* p = std::get_if<PufResponse>(&term)) {
        oracle_subterms(t, p->challenge, out);
    }
}

std::vector<ValueHandle> children_of(const ValueTable& t, ValueHandle v) {
    std::vector<ValueHandle> children;
    const ValueTerm& term = t.term(v);
    if (auto* c = std::get_if<Ciphertext>(&term)) {
        children.push_back(c->key);
        children.insert(children.end(), c->plaintext.begin(), c->plaintext.end());
    } else if (auto* n = std::get_if<Nonce>(&term)) {
        children = {n->seed, n->id};
    } else if (auto* h = std::get_if<HashV>(&term)) {
        children.assign(h->preimage.begin(), h->preimage.end());
    } else if (auto* tp = std::get_if<Tuple>(&term)) {
        children.assign(tp->contents.begin(), tp->contents.end());
    } else if (auto* p = std::get_if<PufResponse>(&term)) {
        children = {p->challenge};
    }
    return children;
}

}  // namespace

TEST_CASE("subterms") {
    ValueTable t;
    ValueHandle a = t.atom("A"), b = t.atom("B"), eps = t.atom("eps", AtomKind::Seed);
    ValueHandle na = t.nonce(eps, a);

    SUBCASE("atom is its own closure") {
        HandleSet s = t.subterms(a);
        CHECK(s == HandleSet{a});
    }
    SUBCASE("nonce closure") {
        HandleSet s = t.subterms(na);
        CHECK(s == make_handle_set({na, eps, a}));
    }
    SUBCASE("cipher closure matches hand-computed transitive closure") {
        ValueHandle c = t.cipher(b, {a, na});
        std::set<ValueHandle> expect;
        oracle_subterms(t, c, expect);
        HandleSet got = t.subterms(c);
        CHECK(std::set<ValueHandle>(got.begin(), got.end()) == expect);
        CHECK(got.size() == 5);  // cipher, B, A, nonce, eps
    }
}

TEST_CASE("kind_of") {
    ValueTable t;
    ValueHandle a = t.atom("A");
    ValueHandle c = t.cipher(a, {a});
    ValueHandle h = t.hashv({a});
    CHECK(t.kind_of(a) == ValueKind::Atom);
    CHECK(t.kind_of(c) == ValueKind::Ciphertext);
    CHECK(t.kind_of(h) == ValueKind::HashV);
}

TEST_CASE("canonical rendering") {
    ValueTable t;
    ValueHandle a = t.atom("A"), b = t.atom("B"), eps = t.atom("eps#1", AtomKind::Seed);
    ValueHandle na = t.nonce(eps, a);
    ValueHandle c = t.cipher(b, {a, na});
    CHECK(t.render(c) == "enc{key=B, plain={A, nonce{seed=eps#1, id=A}}}");
    CHECK(t.render(t.tuple({b, a})) == "tuple{A, B}");
    CHECK(t.render(t.hashv({a})) == "hash{A}");
    CHECK(t.render(t.puf(na)) == "puf{nonce{seed=eps#1, id=A}}");
}

TEST_CASE("random construction round-trips through interning") {
    test::Rng rng(41);
    for (int iter = 0; iter < 100; ++iter) {
        ValueTable t;
        std::vector<ValueHandle> pool;
        for (int i = 0; i < 4; ++i) pool.push_back(t.atom("a" + std::to_string(i)));
        for (int i = 0; i < 12; ++i) {
            switch (rng.below(5)) {
                case 0:
                    pool.push_back(t.cipher(
                        pool[rng.below(pool.size())],
                        {pool[rng.below(pool.size())], pool[rng.below(pool.size())]}));
                    break;
                case 1:
                    pool.push_back(
                        t.nonce(pool[rng.below(pool.size())], pool[rng.below(pool.size())]));
                    break;
                case 2: pool.push_back(t.hashv({pool[rng.below(pool.size())]})); break;
                case 3:
                    pool.push_back(
                        t.tuple({pool[rng.below(pool.size())], pool[rng.below(pool.size())]}));
                    break;
                default: pool.push_back(t.puf(pool[rng.below(pool.size())]));
            }
        }
        for (auto v : pool) {
            CHECK(t.intern(t.term(v)) == v);
            for (auto w : pool) CHECK((v == w) == (t.render(v) == t.render(w)));
            for (auto c : children_of(t, v)) {
                CHECK(c != v);  // no value is its own proper subterm
                const HandleSet& cs = t.subterms(c);
                const HandleSet& vs = t.subterms(v);
                CHECK(std::includes(vs.begin(), vs.end(), cs.begin(), cs.end()));
            }
        }
    }
}
