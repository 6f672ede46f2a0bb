#pragma once

#include <stdexcept>
#include <vector>

#include "sdm/bitvector.hpp"
#include "sdm/densevector.hpp"

namespace sdm {

enum class AssocMode { Auto, Hetero };

// Paired pattern addresses and pointers (the matrices P_a, P_p). In
// autoassociative mode pointers alias the addresses.
template <class V>
struct PatternStore {
    std::vector<V> addresses;
    std::vector<V> pointers;
    AssocMode mode = AssocMode::Auto;

    static PatternStore autoassociative(std::vector<V> addrs) {
        PatternStore s;
        s.pointers = addrs;
        s.addresses = std::move(addrs);
        s.mode = AssocMode::Auto;
        return s;
    }

    static PatternStore heteroassociative(std::vector<V> addrs, std::vector<V> ptrs) {
        if (addrs.size() != ptrs.size() || addrs.empty())
            throw std::invalid_argument("PatternStore: addresses/pointers row mismatch");
        PatternStore s;
        s.addresses = std::move(addrs);
        s.pointers = std::move(ptrs);
        s.mode = AssocMode::Hetero;
        return s;
    }

    std::size_t count() const { return addresses.size(); }
};

using BitPatterns = PatternStore<BitVector>;
using DensePatterns = PatternStore<DenseVector>;

}  // namespace sdm
