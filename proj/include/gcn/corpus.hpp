#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gcn/error.hpp"
#include "gcn/io.hpp"

namespace gcn {

struct ReviewRecord {
  std::string user_id;
  std::string item_id;
  double rating = 0.0;
  std::string category;
  std::string text;  // UTF-8

  bool operator==(const ReviewRecord&) const = default;
};

/// Ordered reviews plus user/item incidence. Construct through `from_records`
/// so the indices stay consistent with `records`.
class ReviewCollection {
 public:
  using Index = std::map<std::string, std::vector<std::size_t>>;

  ReviewCollection() = default;

  static ReviewCollection from_records(std::vector<ReviewRecord> records) {
    ReviewCollection c;
    c.records_ = std::move(records);
    for (std::size_t i = 0; i < c.records_.size(); ++i) {
      const auto& r = c.records_[i];
      if (r.text.empty()) throw ArgumentError("review " + std::to_string(i) + " has empty text");
      if (!std::isfinite(r.rating)) throw ArgumentError("review " + std::to_string(i) + " has non-finite rating");
      c.user_index_[r.user_id].push_back(i);
      c.item_index_[r.item_id].push_back(i);
    }
    return c;
  }

  const std::vector<ReviewRecord>& records() const noexcept { return records_; }
  const Index& user_index() const noexcept { return user_index_; }
  const Index& item_index() const noexcept { return item_index_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const ReviewRecord& operator[](std::size_t i) const { return records_[i]; }

 private:
  std::vector<ReviewRecord> records_;
  Index user_index_;
  Index item_index_;
};

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(std::string("missing field \"") + key + "\"", line);
  return *it;
}

inline std::string require_string(const nlohmann::json& obj, const char* key, std::size_t line) {
  const auto& v = require_field(obj, key, line);
  if (!v.is_string()) throw ParseError(std::string("field \"") + key + "\" must be a string", line);
  return v.get<std::string>();
}

}  // namespace detail

/// Parses JSONL text: one review object per non-blank line.
inline ReviewCollection parse_reviews(const std::string& jsonl) {
  std::vector<ReviewRecord> records;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    if (!obj.is_object()) throw ParseError("expected a JSON object", lineno);
    ReviewRecord r;
    r.user_id = detail::require_string(obj, "user_id", lineno);
    r.item_id = detail::require_string(obj, "item_id", lineno);
    const auto& rating = detail::require_field(obj, "rating", lineno);
    if (!rating.is_number()) throw ParseError("field \"rating\" must be a number", lineno);
    r.rating = rating.get<double>();
    if (!std::isfinite(r.rating)) throw ParseError("rating is not finite", lineno);
    r.category = detail::require_string(obj, "category", lineno);
    r.text = detail::require_string(obj, "text", lineno);
    if (r.text.empty()) throw ParseError("field \"text\" is empty", lineno);
    records.push_back(std::move(r));
  }
  if (records.empty()) throw EmptyCollectionError("corpus contains no reviews");
  return ReviewCollection::from_records(std::move(records));
}

inline ReviewCollection load_reviews(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ParseError("no such file: " + path.string());
  return parse_reviews(io::read_file(path));
}

/// Serializes to JSONL with a fixed key order, so parse/serialize round-trips byte-exactly.
inline std::string serialize_reviews(const ReviewCollection& c) {
  std::string out;
  for (const auto& r : c.records()) {
    nlohmann::ordered_json obj;
    obj["user_id"] = r.user_id;
    obj["item_id"] = r.item_id;
    obj["rating"] = r.rating;
    obj["category"] = r.category;
    obj["text"] = r.text;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

inline void save_reviews(const ReviewCollection& c, const std::filesystem::path& path) {
  io::write_atomic(path, serialize_reviews(c));
}

/// Maximal subset in which every user and every item has at least `k` reviews.
/// Removal is driven by a worklist; the fixpoint is unique, so order does not matter.
inline ReviewCollection kcore_prune(const ReviewCollection& c, std::size_t k) {
  if (k == 0) throw ArgumentError("k must be >= 1");
  const auto& recs = c.records();
  std::map<std::string, std::size_t> user_deg, item_deg;
  for (const auto& [u, ids] : c.user_index()) user_deg[u] = ids.size();
  for (const auto& [i, ids] : c.item_index()) item_deg[i] = ids.size();

  std::vector<bool> alive(recs.size(), true);
  std::deque<std::pair<bool, std::string>> work;  // (is_user, id)
  for (const auto& [u, d] : user_deg)
    if (d < k) work.emplace_back(true, u);
  for (const auto& [i, d] : item_deg)
    if (d < k) work.emplace_back(false, i);

  std::map<std::string, bool> user_gone, item_gone;
  while (!work.empty()) {
    auto [is_user, id] = work.front();
    work.pop_front();
    auto& gone = is_user ? user_gone : item_gone;
    if (gone[id]) continue;
    gone[id] = true;
    const auto& ids = is_user ? c.user_index().at(id) : c.item_index().at(id);
    for (std::size_t r : ids) {
      if (!alive[r]) continue;
      alive[r] = false;
      if (is_user) {
        const auto& item = recs[r].item_id;
        if (--item_deg[item] < k && !item_gone[item]) work.emplace_back(false, item);
      } else {
        const auto& user = recs[r].user_id;
        if (--user_deg[user] < k && !user_gone[user]) work.emplace_back(true, user);
      }
    }
  }

  std::vector<ReviewRecord> kept;
  for (std::size_t r = 0; r < recs.size(); ++r)
    if (alive[r]) kept.push_back(recs[r]);
  return ReviewCollection::from_records(std::move(kept));
}

/// Random disjoint split with |test| = round(test_fraction * N). Each side keeps input order.
inline std::pair<ReviewCollection, ReviewCollection> holdout_split(const ReviewCollection& c,
                                                                   double test_fraction,
                                                                   std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ArgumentError("test fraction must lie in (0, 1)");
  if (c.empty()) throw EmptyCollectionError("cannot split an empty collection");
  const std::size_t n = c.size();
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_test(n, false);
  for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;

  std::vector<ReviewRecord> train, test;
  for (std::size_t i = 0; i < n; ++i) (is_test[i] ? test : train).push_back(c[i]);
  return {ReviewCollection::from_records(std::move(train)), ReviewCollection::from_records(std::move(test))};
}

}  // namespace gcn
