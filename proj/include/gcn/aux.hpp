#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gcn/corpus.hpp"
#include "gcn/error.hpp"

namespace gcn {

/// Maps stars affinely so that [lo, hi] lands on [-1, 1]. Values outside the
/// anchor range extrapolate linearly (10 stars -> 3.0 with the default anchor).
inline double scale_rating(double stars, double lo = 0.0, double hi = 5.0) {
  if (!std::isfinite(stars)) throw ArgumentError("rating must be finite");
  if (!(hi > lo)) throw ArgumentError("rating anchor must satisfy hi > lo");
  const double mid = 0.5 * (lo + hi);
  return (stars - mid) / (0.5 * (hi - lo));
}

enum class SlotKind { Rating, Category, User, Item };

inline const char* slot_name(SlotKind k) {
  switch (k) {
    case SlotKind::Rating: return "rating";
    case SlotKind::Category: return "category";
    case SlotKind::User: return "user";
    case SlotKind::Item: return "item";
  }
  return "?";
}

inline SlotKind slot_kind_from_name(const std::string& s) {
  if (s == "rating") return SlotKind::Rating;
  if (s == "category") return SlotKind::Category;
  if (s == "user") return SlotKind::User;
  if (s == "item") return SlotKind::Item;
  throw ArgumentError("unknown slot kind '" + s + "'");
}

struct AuxSlot {
  SlotKind kind = SlotKind::Rating;
  std::vector<std::string> labels;  // one-hot slots only
  double rating_lo = 0.0;           // rating slot only
  double rating_hi = 5.0;

  int dim() const { return kind == SlotKind::Rating ? 1 : static_cast<int>(labels.size()); }

  /// Position of `label` in a one-hot slot, or -1.
  int label_index(const std::string& label) const {
    auto it = std::find(labels.begin(), labels.end(), label);
    return it == labels.end() ? -1 : static_cast<int>(it - labels.begin());
  }

  bool operator==(const AuxSlot&) const = default;
};

/// Ordered layout of the conditioning vector. An empty schema (total_dim 0)
/// describes the unconditioned character model.
class AuxSchema {
 public:
  AuxSchema() = default;

  explicit AuxSchema(std::vector<AuxSlot> slots) : slots_(std::move(slots)) {
    for (const auto& s : slots_) {
      if (s.kind != SlotKind::Rating) {
        if (s.labels.empty()) throw ArgumentError(std::string(slot_name(s.kind)) + " slot has no labels");
        std::set<std::string> uniq(s.labels.begin(), s.labels.end());
        if (uniq.size() != s.labels.size()) throw ArgumentError(std::string(slot_name(s.kind)) + " slot has duplicate labels");
      } else if (!(s.rating_hi > s.rating_lo)) {
        throw ArgumentError("rating anchor must satisfy hi > lo");
      }
    }
    for (std::size_t i = 0; i < slots_.size(); ++i)
      for (std::size_t j = i + 1; j < slots_.size(); ++j)
        if (slots_[i].kind == slots_[j].kind) throw ArgumentError("schema repeats a slot kind");
  }

  const std::vector<AuxSlot>& slots() const noexcept { return slots_; }
  int total_dim() const {
    int d = 0;
    for (const auto& s : slots_) d += s.dim();
    return d;
  }
  bool empty() const noexcept { return slots_.empty(); }

  const AuxSlot* find(SlotKind k) const {
    for (const auto& s : slots_)
      if (s.kind == k) return &s;
    return nullptr;
  }
  /// Offset of slot `k` inside the vector, or -1.
  int offset_of(SlotKind k) const {
    int off = 0;
    for (const auto& s : slots_) {
      if (s.kind == k) return off;
      off += s.dim();
    }
    return -1;
  }

  bool operator==(const AuxSchema&) const = default;

 private:
  std::vector<AuxSlot> slots_;
};

/// Auxiliary facts about one review. A missing one-hot label means "declared
/// unknown" and encodes to an all-zero slot.
struct AuxFields {
  std::optional<double> rating;
  std::optional<std::string> category;
  std::optional<std::string> user;
  std::optional<std::string> item;

  static AuxFields of(const ReviewRecord& r) { return {r.rating, r.category, r.user_id, r.item_id}; }
};

using AuxVector = std::vector<double>;

inline AuxVector encode_aux(const AuxFields& f, const AuxSchema& schema) {
  AuxVector v;
  v.reserve(static_cast<std::size_t>(schema.total_dim()));
  for (const auto& slot : schema.slots()) {
    if (slot.kind == SlotKind::Rating) {
      if (!f.rating) throw EncodingError("schema has a rating slot but no rating was given");
      v.push_back(scale_rating(*f.rating, slot.rating_lo, slot.rating_hi));
      continue;
    }
    const std::optional<std::string>* label = nullptr;
    switch (slot.kind) {
      case SlotKind::Category: label = &f.category; break;
      case SlotKind::User: label = &f.user; break;
      case SlotKind::Item: label = &f.item; break;
      default: break;
    }
    const std::size_t start = v.size();
    v.resize(start + slot.labels.size(), 0.0);
    if (!label->has_value()) continue;
    const int idx = slot.label_index(**label);
    if (idx < 0) throw EncodingError(std::string(slot_name(slot.kind)) + " label '" + **label + "' is not in the schema");
    v[start + static_cast<std::size_t>(idx)] = 1.0;
  }
  return v;
}

/// Schema over the label sets observed in `c`, labels sorted ascending.
/// `kinds` fixes slot order; an empty list gives the unconditioned schema.
inline AuxSchema schema_from_collection(const ReviewCollection& c, const std::vector<SlotKind>& kinds) {
  std::vector<AuxSlot> slots;
  for (SlotKind k : kinds) {
    AuxSlot s;
    s.kind = k;
    if (k != SlotKind::Rating) {
      std::set<std::string> labels;
      for (const auto& r : c.records()) {
        if (k == SlotKind::Category) labels.insert(r.category);
        else if (k == SlotKind::User) labels.insert(r.user_id);
        else labels.insert(r.item_id);
      }
      s.labels.assign(labels.begin(), labels.end());
    }
    slots.push_back(std::move(s));
  }
  return AuxSchema(std::move(slots));
}

/// Parses a conditioning name: rating, category, user, item, user-item or none.
inline std::vector<SlotKind> slot_kinds_from_name(const std::string& name) {
  if (name == "none") return {};
  if (name == "user-item") return {SlotKind::User, SlotKind::Item};
  return {slot_kind_from_name(name)};
}

}  // namespace gcn
