#include "kflow/terms.hpp"

#include <algorithm>

namespace kflow {

HandleSet make_handle_set(std::vector<ValueHandle> items) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    return items;
}

ValueKind kind_of_term(const ValueTerm& t) {
    switch (t.index()) {
        case 0: return ValueKind::Atom;
        case 1: return ValueKind::Ciphertext;
        case 2: return ValueKind::Nonce;
        case 3: return ValueKind::HashV;
        case 4: return ValueKind::Tuple;
        default: return ValueKind::PufResponse;
    }
}

namespace {

// Structural key over handle ids; unambiguous because children are already
// canonical.
std::string structural_key(const ValueTerm& t) {
    auto join = [](const HandleSet& hs) {
        std::string out;
        for (auto h : hs) {
            out += std::to_string(h.id);
            out += ',';
        }
        return out;
    };
    std::string key;
    if (auto* a = std::get_if<Atom>(&t)) {
        key = "a:";
        key += std::to_string(static_cast<int>(a->kind));
        key += ':';
        key += a->label;
    } else if (auto* c = std::get_if<Ciphertext>(&t)) {
        key = "c:";
        key += std::to_string(c->key.id);
        key += ':';
        key += join(c->plaintext);
    } else if (auto* n = std::get_if<Nonce>(&t)) {
        key = "n:";
        key += std::to_string(n->seed.id);
        key += ':';
        key += std::to_string(n->id.id);
    } else if (auto* h = std::get_if<HashV>(&t)) {
        key = "h:";
        key += join(h->preimage);
    } else if (auto* tp = std::get_if<Tuple>(&t)) {
        key = "t:";
        key += join(tp->contents);
    } else {
        key = "p:";
        key += std::to_string(std::get<PufResponse>(t).challenge.id);
    }
    return key;
}

void collect_children(const ValueTerm& t, std::vector<ValueHandle>& out) {
    if (auto* c = std::get_if<Ciphertext>(&t)) {
        out.push_back(c->key);
        out.insert(out.end(), c->plaintext.begin(), c->plaintext.end());
    } else if (auto* n = std::get_if<Nonce>(&t)) {
        out.push_back(n->seed);
        out.push_back(n->id);
    } else if (auto* h = std::get_if<HashV>(&t)) {
        out.insert(out.end(), h->preimage.begin(), h->preimage.end());
    } else if (auto* tp = std::get_if<Tuple>(&t)) {
        out.insert(out.end(), tp->contents.begin(), tp->contents.end());
    } else if (auto* p = std::get_if<PufResponse>(&t)) {
        out.push_back(p->challenge);
    }
}

}  // namespace

void ValueTable::check_children(const ValueTerm& term) const {
    std::vector<ValueHandle> children;
    collect_children(term, children);
    for (auto c : children) {
        // Children must pre-exist; a parent can therefore never become its
        // own descendant. Forward references only arise from hand-built or
        // deserialized structures and are rejected.
        if (!c.valid() || c.id >= entries_.size())
            throw OccursViolation("child handle does not refer to an interned value");
    }
    if (auto* c = std::get_if<Ciphertext>(&term)) {
        if (c->plaintext.empty()) throw EmptyComposite("ciphertext plaintext must be non-empty");
    } else if (auto* h = std::get_if<HashV>(&term)) {
        if (h->preimage.empty()) throw EmptyComposite("hash preimage must be non-empty");
    } else if (auto* tp = std::get_if<Tuple>(&term)) {
        if (tp->contents.empty()) throw EmptyComposite("tuple contents must be non-empty");
    }
}

ValueHandle ValueTable::intern(ValueTerm term) {
    if (frozen_) throw Error("value table is frozen");
    // Normalize set fields.
    if (auto* c = std::get_if<Ciphertext>(&term)) c->plaintext = make_handle_set(c->plaintext);
    if (auto* h = std::get_if<HashV>(&term)) h->preimage = make_handle_set(h->preimage);
    if (auto* tp = std::get_if<Tuple>(&term)) tp->contents = make_handle_set(tp->contents);
    check_children(term);

    std::string key = structural_key(term);
    auto it = index_.find(key);
    if (it != index_.end()) return it->second;

    ValueHandle h{static_cast<std::uint32_t>(entries_.size())};

    // Subterm closure: {self} union children's closures (children are final).
    std::vector<ValueHandle> closure{h};
    std::vector<ValueHandle> children;
    collect_children(term, children);
    for (auto c : children) {
        const HandleSet& cs = entries_[c.id].subterm_closure;
        closure.insert(closure.end(), cs.begin(), cs.end());
    }

    // Rendering: set fields sorted by the members' renderings.
    auto render_set = [this](const HandleSet& hs) {
        std::vector<std::string> parts;
        parts.reserve(hs.size());
        for (auto m : hs) parts.push_back(entries_[m.id].rendering);
        std::sort(parts.begin(), parts.end());
        std::string out = "{";
        for (std::size_t i = 0; i < parts.size(); ++i) {
            if (i) out += ", ";
            out += parts[i];
        }
        out += "}";
        return out;
    };
    std::string rendering;
    if (auto* a = std::get_if<Atom>(&term)) {
        rendering = a->label;
    } else if (auto* c = std::get_if<Ciphertext>(&term)) {
        rendering = "enc{key=" + entries_[c->key.id].rendering + ", plain=" + render_set(c->plaintext) + "}";
    } else if (auto* n = std::get_if<Nonce>(&term)) {
        rendering = "nonce{seed=" + entries_[n->seed.id].rendering + ", id=" + entries_[n->id.id].rendering + "}";
    } else if (auto* hh = std::get_if<HashV>(&term)) {
        rendering = "hash" + render_set(hh->preimage);
    } else if (auto* tp = std::get_if<Tuple>(&term)) {
        rendering = "tuple" + render_set(tp->contents);
    } else {
        rendering = "puf{" + entries_[std::get<PufResponse>(term).challenge.id].rendering + "}";
    }

    entries_.push_back(Entry{std::move(term), make_handle_set(std::move(closure)), std::move(rendering)});
    index_.emplace(std::move(key), h);
    return h;
}

ValueHandle ValueTable::atom(std::string label, AtomKind kind) {
    return intern(Atom{std::move(label), kind});
}
ValueHandle ValueTable::cipher(ValueHandle key, std::vector<ValueHandle> plaintext) {
    return intern(Ciphertext{key, std::move(plaintext)});
}
ValueHandle ValueTable::nonce(ValueHandle seed, ValueHandle id) {
    return intern(Nonce{seed, id});
}
ValueHandle ValueTable::hashv(std::vector<ValueHandle> preimage) {
    return intern(HashV{std::move(preimage)});
}
ValueHandle ValueTable::tuple(std::vector<ValueHandle> contents) {
    return intern(Tuple{std::move(contents)});
}
ValueHandle ValueTable::puf(ValueHandle challenge) {
    return intern(PufResponse{challenge});
}

const ValueTerm& ValueTable::term(ValueHandle v) const {
    if (!v.valid() || v.id >= entries_.size()) throw Error("invalid value handle");
    return entries_[v.id].term;
}

ValueKind ValueTable::kind_of(ValueHandle v) const { return kind_of_term(term(v)); }

const HandleSet& ValueTable::subterms(ValueHandle v) const {
    if (!v.valid() || v.id >= entries_.size()) throw Error("invalid value handle");
    return entries_[v.id].subterm_closure;
}

const std::string& ValueTable::render(ValueHandle v) const {
    if (!v.valid() || v.id >= entries_.size()) throw Error("invalid value handle");
    return entries_[v.id].rendering;
}

ValueHandle ValueTable::lookup(const ValueTerm& term) const {
    ValueTerm t = term;
    if (auto* c = std::get_if<Ciphertext>(&t)) c->plaintext = make_handle_set(c->plaintext);
    if (auto* h = std::get_if<HashV>(&t)) h->preimage = make_handle_set(h->preimage);
    if (auto* tp = std::get_if<Tuple>(&t)) tp->contents = make_handle_set(tp->contents);
    std::vector<ValueHandle> children;
    collect_children(t, children);
    for (auto c : children)
        if (!c.valid() || c.id >= entries_.size()) return ValueHandle{};
    auto it = index_.find(structural_key(t));
    if (it == index_.end()) return ValueHandle{};
    return it->second;
}

ValueHandle ValueTable::find_atom(const std::string& label) const {
    for (std::uint32_t i = 0; i < entries_.size(); ++i) {
        if (auto* a = std::get_if<Atom>(&entries_[i].term))
            if (a->label == label) return ValueHandle{i};
    }
    return ValueHandle{};
}

}  // namespace kflow
