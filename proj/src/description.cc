#include "qdtree/description.h"

#include <algorithm>
#include <bit>
#include <limits>

#include "qdtree/error.h"

namespace qdtree {

BitVector::BitVector(std::size_t size, bool value)
    : size_(size), words_((size + 63) / 64, value ? ~0ull : 0ull) {
  clear_tail();
}

void BitVector::clear_tail() {
  if (size_ % 64 != 0 && !words_.empty()) {
    words_.back() &= (1ull << (size_ % 64)) - 1;
  }
}

void BitVector::set(std::size_t i, bool value) {
  const std::uint64_t bit = 1ull << (i & 63);
  if (value) {
    words_[i >> 6] |= bit;
  } else {
    words_[i >> 6] &= ~bit;
  }
}

bool BitVector::any() const {
  return std::any_of(words_.begin(), words_.end(),
                     [](std::uint64_t w) { return w != 0; });
}

std::size_t BitVector::count() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

bool BitVector::subset_of(const BitVector& o) const {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i] & ~o.words_[i]) return false;
  }
  return true;
}

BitVector& BitVector::operator&=(const BitVector& o) {
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= o.words_[i];
  return *this;
}

BitVector& BitVector::operator|=(const BitVector& o) {
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= o.words_[i];
  return *this;
}

BitVector BitVector::operator~() const {
  BitVector out = *this;
  for (auto& w : out.words_) w = ~w;
  out.clear_tail();
  return out;
}

std::string BitVector::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve((size_ + 3) / 4);
  for (std::size_t base = 0; base < size_; base += 4) {
    unsigned digit = 0;
    for (std::size_t k = 0; k < 4 && base + k < size_; ++k) {
      if (test(base + k)) digit |= 1u << k;
    }
    out.push_back(kDigits[digit]);
  }
  return out;
}

BitVector BitVector::from_hex(std::string_view hex, std::size_t size) {
  if (hex.size() != (size + 3) / 4) {
    throw ParseError("bit vector of " + std::to_string(size) +
                     " bits needs " + std::to_string((size + 3) / 4) +
                     " hex digits, got " + std::to_string(hex.size()));
  }
  BitVector out(size, false);
  for (std::size_t j = 0; j < hex.size(); ++j) {
    const char c = hex[j];
    unsigned digit = 0;
    if (c >= '0' && c <= '9') {
      digit = static_cast<unsigned>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      digit = static_cast<unsigned>(c - 'a' + 10);
    } else if (c >= 'A' && c <= 'F') {
      digit = static_cast<unsigned>(c - 'A' + 10);
    } else {
      throw ParseError(std::string("invalid hex digit '") + c + "'");
    }
    for (std::size_t k = 0; k < 4; ++k) {
      if (!(digit & (1u << k))) continue;
      if (4 * j + k >= size) throw ParseError("bits set beyond vector size");
      out.set(4 * j + k);
    }
  }
  return out;
}

SemanticDescription SemanticDescription::full(const Schema& schema,
                                              std::size_t num_advanced) {
  SemanticDescription d;
  d.ranges.reserve(schema.size());
  d.masks.resize(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    d.ranges.push_back({0, schema.domain(c)});
    if (!schema.is_numeric(c)) {
      d.masks[c] = BitVector(static_cast<std::size_t>(schema.domain(c)), true);
    }
  }
  d.adv = BitVector(num_advanced, true);
  return d;
}

SemanticDescription SemanticDescription::tight(
    const Dataset& data, std::span<const RowId> rows,
    const AdvancedRegistry& registry, const SemanticDescription& outline) {
  const Schema& schema = data.schema();
  SemanticDescription d;
  d.ranges.resize(schema.size());
  d.masks.resize(schema.size());
  d.adv = BitVector(registry.size(), false);
  std::vector<std::size_t> numeric;
  std::vector<std::size_t> categorical;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (schema.is_numeric(c)) {
      numeric.push_back(c);
      d.ranges[c] = {std::numeric_limits<Value>::max(),
                     std::numeric_limits<Value>::min()};
    } else {
      categorical.push_back(c);
      d.ranges[c] = outline.ranges[c];
      d.masks[c] = BitVector(static_cast<std::size_t>(schema.domain(c)), false);
    }
  }
  for (RowId r : rows) {
    const auto row = data.row(r);
    for (std::size_t c : numeric) {
      d.ranges[c].lo = std::min(d.ranges[c].lo, row[c]);
      d.ranges[c].hi = std::max(d.ranges[c].hi, row[c] + 1);
    }
    for (std::size_t c : categorical) {
      d.masks[c].set(static_cast<std::size_t>(row[c]));
    }
    for (std::size_t i = 0; i < registry.size(); ++i) {
      if (!d.adv.test(i) && registry[i].matches(row)) d.adv.set(i);
    }
  }
  if (rows.empty()) {
    for (std::size_t c : numeric) {
      d.ranges[c] = {outline.ranges[c].lo, outline.ranges[c].lo};
    }
  }
  return d;
}

bool SemanticDescription::is_empty() const {
  for (std::size_t c = 0; c < ranges.size(); ++c) {
    if (ranges[c].empty()) return true;
    if (masks[c].size() > 0 && masks[c].none()) return true;
  }
  return false;
}

bool SemanticDescription::contains(std::span<const Value> row,
                                   const AdvancedRegistry& registry) const {
  for (std::size_t c = 0; c < ranges.size(); ++c) {
    if (!ranges[c].contains(row[c])) return false;
    if (masks[c].size() > 0 && !masks[c].test(static_cast<std::size_t>(row[c]))) {
      return false;
    }
  }
  for (std::size_t i = 0; i < adv.size(); ++i) {
    if (!adv.test(i) && registry[i].matches(row)) return false;
  }
  return true;
}

bool SemanticDescription::within(const SemanticDescription& o) const {
  if (is_empty()) return true;
  for (std::size_t c = 0; c < ranges.size(); ++c) {
    if (!ranges[c].within(o.ranges[c])) return false;
    if (masks[c].size() > 0 && !masks[c].subset_of(o.masks[c])) return false;
  }
  return adv.subset_of(o.adv);
}

SemanticDescription meet(const SemanticDescription& a,
                         const SemanticDescription& b) {
  SemanticDescription out = a;
  for (std::size_t c = 0; c < out.ranges.size(); ++c) {
    out.ranges[c] = a.ranges[c].intersect(b.ranges[c]);
    if (out.masks[c].size() > 0) out.masks[c] &= b.masks[c];
  }
  out.adv &= b.adv;
  return out;
}

std::pair<SemanticDescription, SemanticDescription> apply_cut(
    const SemanticDescription& parent, const Cut& cut, const Schema& schema) {
  SemanticDescription left = parent;
  SemanticDescription right = parent;
  if (const auto* p = std::get_if<UnaryPredicate>(&cut)) {
    const std::size_t c = p->column();
    if (p->is_range()) {
      const Interval sat = p->interval(schema.domain(c));
      const Interval& cur = parent.ranges[c];
      left.ranges[c] = cur.intersect(sat);
      // The complement of a prefix or suffix interval is a single interval.
      if (sat.lo == 0) {
        right.ranges[c] = cur.intersect({sat.hi, schema.domain(c)});
      } else {
        right.ranges[c] = cur.intersect({0, sat.lo});
      }
      if (left.ranges[c].empty() || right.ranges[c].empty()) {
        throw DegenerateCut("cut " + describe(cut, schema) +
                            " leaves an empty child range");
      }
    } else {
      BitVector sat(static_cast<std::size_t>(schema.domain(c)), false);
      for (Value v : p->values()) sat.set(static_cast<std::size_t>(v));
      left.masks[c] &= sat;
      right.masks[c] &= ~sat;
      if (left.masks[c].none() || right.masks[c].none()) {
        throw DegenerateCut("cut " + describe(cut, schema) +
                            " leaves an all-zero child mask");
      }
    }
  } else {
    const auto& a = std::get<AdvancedCut>(cut);
    if (a.index >= parent.adv.size()) {
      throw InvalidArgument("advanced cut index outside description");
    }
    if (!parent.adv.test(a.index)) {
      throw DegenerateCut("cut " + describe(cut, schema) +
                          " on a node that holds no satisfying rows");
    }
    right.adv.reset(a.index);
  }
  return {std::move(left), std::move(right)};
}

namespace {

std::optional<std::size_t> registered_negation(
    const AdvancedRegistry& registry, std::size_t index) {
  const auto neg = registry.at(index).negation();
  if (!neg) return std::nullopt;
  for (const auto& a : registry) {
    if (a.same_predicate(*neg)) return a.index;
  }
  return std::nullopt;
}

}  // namespace

bool intersects(const SemanticDescription& desc, const Expr& e,
                const Schema& schema, const AdvancedRegistry& registry) {
  if (const auto* b = std::get_if<BoolNode>(&e.node)) {
    auto hit = [&](const Expr& c) {
      return intersects(desc, c, schema, registry);
    };
    if (b->op == BoolOp::kAnd) {
      return std::all_of(b->children.begin(), b->children.end(), hit);
    }
    return std::any_of(b->children.begin(), b->children.end(), hit);
  }
  if (const auto* p = std::get_if<UnaryPredicate>(&e.node)) {
    const std::size_t c = p->column();
    if (p->is_range()) {
      return desc.ranges[c].overlaps(p->interval(schema.domain(c)));
    }
    if (desc.masks[c].size() == 0) {
      return std::any_of(p->values().begin(), p->values().end(),
                         [&](Value v) { return desc.ranges[c].contains(v); });
    }
    return std::any_of(p->values().begin(), p->values().end(), [&](Value v) {
      return desc.masks[c].test(static_cast<std::size_t>(v));
    });
  }
  const auto& a = std::get<AdvancedRef>(e.node);
  if (!a.negated) return desc.adv.test(a.index);
  if (auto j = registered_negation(registry, a.index)) return desc.adv.test(*j);
  return true;
}

namespace {

bool narrow(const Expr& e, const Schema& schema, SemanticDescription& region) {
  if (const auto* b = std::get_if<BoolNode>(&e.node)) {
    if (b->op == BoolOp::kOr) return false;
    for (const auto& c : b->children) {
      if (!narrow(c, schema, region)) return false;
    }
    return true;
  }
  if (const auto* p = std::get_if<UnaryPredicate>(&e.node)) {
    const std::size_t c = p->column();
    if (p->is_range()) {
      region.ranges[c] =
          region.ranges[c].intersect(p->interval(schema.domain(c)));
    } else {
      BitVector sat(static_cast<std::size_t>(schema.domain(c)), false);
      for (Value v : p->values()) sat.set(static_cast<std::size_t>(v));
      region.masks[c] &= sat;
    }
  }
  return true;
}

}  // namespace

bool conjunctive_region(const Expr& e, const Schema& schema,
                        SemanticDescription& region) {
  return narrow(e, schema, region);
}

}  // namespace qdtree
