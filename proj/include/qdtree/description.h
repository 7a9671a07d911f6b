#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qdtree/model.h"

namespace qdtree {

// Fixed-length bit vector used for categorical masks and advanced-cut bits.
class BitVector {
 public:
  BitVector() = default;
  BitVector(std::size_t size, bool value);

  std::size_t size() const { return size_; }
  bool test(std::size_t i) const {
    return (words_[i >> 6] >> (i & 63)) & 1u;
  }
  void set(std::size_t i, bool value = true);
  void reset(std::size_t i) { set(i, false); }
  bool any() const;
  bool none() const { return !any(); }
  std::size_t count() const;
  // Every set bit of *this is also set in o.
  bool subset_of(const BitVector& o) const;
  BitVector& operator&=(const BitVector& o);
  BitVector& operator|=(const BitVector& o);
  BitVector operator~() const;

  // Hex digits in bit-index order: digit j holds bits 4j..4j+3, bit 4j in the
  // digit's least significant position.
  std::string to_hex() const;
  static BitVector from_hex(std::string_view hex, std::size_t size);

  bool operator==(const BitVector&) const = default;

 private:
  void clear_tail();

  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

// What a node's subspace may contain: a hypercube over numeric columns,
// a presence mask per categorical column, and one presence bit per
// registered advanced cut. Categorical columns keep a full-domain range so
// that ranges stay indexable by column.
struct SemanticDescription {
  std::vector<Interval> ranges;
  std::vector<BitVector> masks;  // empty for numeric columns
  BitVector adv;

  static SemanticDescription full(const Schema& schema,
                                  std::size_t num_advanced);

  // Min-max ranges, observed categorical values and observed advanced-cut
  // satisfaction of the given rows. With no rows the ranges collapse to
  // [lo, lo) of `outline` and every bit is cleared.
  static SemanticDescription tight(const Dataset& data,
                                   std::span<const RowId> rows,
                                   const AdvancedRegistry& registry,
                                   const SemanticDescription& outline);

  // True when the description is identically empty: an empty range or an
  // all-zero categorical mask.
  bool is_empty() const;

  // Row membership. Advanced bits set to 0 exclude rows satisfying the cut.
  bool contains(std::span<const Value> row,
                const AdvancedRegistry& registry) const;

  // Pointwise containment in o: nested intervals, dominated masks and bits.
  bool within(const SemanticDescription& o) const;

  bool operator==(const SemanticDescription&) const = default;
};

// Left/right child descriptions produced by cutting `parent`. Throws
// DegenerateCut when either side is provably empty.
std::pair<SemanticDescription, SemanticDescription> apply_cut(
    const SemanticDescription& parent, const Cut& cut, const Schema& schema);

// Conservative test: false only if no row described by `desc` can satisfy e.
bool intersects(const SemanticDescription& desc, const Expr& e,
                const Schema& schema, const AdvancedRegistry& registry);
inline bool intersects(const SemanticDescription& desc, const Query& q,
                       const Schema& schema,
                       const AdvancedRegistry& registry) {
  return intersects(desc, q.expr, schema, registry);
}

// The hypercube-and-mask region of a purely conjunctive query. Advanced
// references are over-approximated (ignored). Returns false for queries
// containing OR.
bool conjunctive_region(const Expr& e, const Schema& schema,
                        SemanticDescription& region);

// Pointwise intersection of two descriptions.
SemanticDescription meet(const SemanticDescription& a,
                         const SemanticDescription& b);

}  // namespace qdtree
