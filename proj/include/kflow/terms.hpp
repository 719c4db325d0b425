#ifndef KFLOW_TERMS_HPP
#define KFLOW_TERMS_HPP

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace kflow {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct OccursViolation : Error {
    using Error::Error;
};
struct EmptyComposite : Error {
    using Error::Error;
};

enum class AtomKind { Identity, Seed, Generic };

enum class ValueKind { Atom, Ciphertext, Nonce, HashV, Tuple, PufResponse };

/// Opaque canonical identifier of an interned value. Handle equality is
/// structural equality of the underlying terms.
struct ValueHandle {
    std::uint32_t id = UINT32_MAX;

    bool valid() const { return id != UINT32_MAX; }
    friend bool operator==(ValueHandle a, ValueHandle b) { return a.id == b.id; }
    friend bool operator!=(ValueHandle a, ValueHandle b) { return a.id != b.id; }
    friend bool operator<(ValueHandle a, ValueHandle b) { return a.id < b.id; }
};

/// Sorted, duplicate-free set of handles. Composite fields are sets: the
/// order values are listed in never matters.
using HandleSet = std::vector<ValueHandle>;

HandleSet make_handle_set(std::vector<ValueHandle> items);

struct Atom {
    std::string label;
    AtomKind kind = AtomKind::Generic;
};
struct Ciphertext {
    ValueHandle key;
    HandleSet plaintext;  // non-empty
};
struct Nonce {
    ValueHandle seed;
    ValueHandle id;
};
struct HashV {
    HandleSet preimage;  // non-empty
};
struct Tuple {
    HandleSet contents;  // non-empty
};
struct PufResponse {
    ValueHandle challenge;
};

using ValueTerm = std::variant<Atom, Ciphertext, Nonce, HashV, Tuple, PufResponse>;

ValueKind kind_of_term(const ValueTerm& t);

/// Append-only interning store. Two structurally equal terms always map to
/// the same handle, which realizes perfect cryptography: constructor
/// injectivity and the occurs check come for free because children must be
/// interned before their parents.
class ValueTable {
public:
    ValueHandle intern(ValueTerm term);

    // Convenience constructors.
    ValueHandle atom(std::string label, AtomKind kind = AtomKind::Generic);
    ValueHandle cipher(ValueHandle key, std::vector<ValueHandle> plaintext);
    ValueHandle nonce(ValueHandle seed, ValueHandle id);
    ValueHandle hashv(std::vector<ValueHandle> preimage);
    ValueHandle tuple(std::vector<ValueHandle> contents);
    ValueHandle puf(ValueHandle challenge);

    const ValueTerm& term(ValueHandle v) const;
    ValueKind kind_of(ValueHandle v) const;

    /// Reflexive-transitive closure of field reachability, sorted by handle.
    const HandleSet& subterms(ValueHandle v) const;

    /// Canonical textual rendering: atoms by label, composites as
    /// constructor braces with set fields sorted by rendering, e.g.
    /// enc{key=B, plain={A, nonce{seed=eps#1, id=A}}}.
    const std::string& render(ValueHandle v) const;

    /// Looks up an already-interned atom; invalid handle if absent.
    ValueHandle find_atom(const std::string& label) const;

    /// Non-creating structural lookup; invalid handle if the term (or any
    /// child) is not interned.
    ValueHandle lookup(const ValueTerm& term) const;

    std::size_t size() const { return entries_.size(); }

    bool is_atomic(ValueHandle v) const { return kind_of(v) == ValueKind::Atom; }
    const Atom& as_atom(ValueHandle v) const { return std::get<Atom>(term(v)); }

    void freeze() { frozen_ = true; }
    bool frozen() const { return frozen_; }

private:
    struct Entry {
        ValueTerm term;
        HandleSet subterm_closure;
        std::string rendering;
    };

    void check_children(const ValueTerm& term) const;

    std::vector<Entry> entries_;
    std::unordered_map<std::string, ValueHandle> index_;  // render -> handle
    bool frozen_ = false;
};

}  // namespace kflow

namespace std {
template <>
struct hash<kflow::ValueHandle> {
    size_t operator()(kflow::ValueHandle v) const noexcept {
        return std::hash<uint32_t>{}(v.id);
    }
};
}  // namespace std

#endif
