#pragma once

#include <algorithm>
#include <cassert>
#include <deque>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ksir/types.hpp"

namespace ksir {

/// What one bucket did to the active set. Ids are sorted ascending.
struct UpdateReport {
  Timestamp now = 0;
  std::vector<ElementId> inserted;
  // Active elements whose in-window referencer set grew or shrank (including
  // parents brought back into the active set by a new reference).
  std::vector<ElementId> changed;
  std::vector<ElementId> evicted;
  std::size_t dangling_refs = 0;
};

/// Sliding window W_t, the active set A_t = W_t ∪ parents(W_t), and the
/// reverse-reference index I_t(e).
///
/// Every element ever ingested is archived: a new element may refer to a
/// parent that had already left A_t, which then becomes active again.
/// Element addresses are stable for the lifetime of the store.
class ActiveStore {
 public:
  ActiveStore(Timestamp window_len, Timestamp bucket_len, Timestamp start = 0)
      : window_len_(window_len), bucket_len_(bucket_len), now_(start) {
    if (bucket_len < 1 || window_len < bucket_len) {
      throw Error(ErrorCode::InvalidConfig, "need window_len >= bucket_len >= 1");
    }
  }

  Timestamp now() const { return now_; }
  Timestamp window_len() const { return window_len_; }
  Timestamp bucket_len() const { return bucket_len_; }
  Timestamp window_start() const { return now_ - window_len_ + 1; }

  /// Ingests one bucket with timestamps in (now, now + L] and advances now by L.
  /// Validation happens before any mutation, so a throwing call leaves the store unchanged.
  UpdateReport ingest_bucket(std::vector<Element> bucket) {
    const Timestamp next = now_ + bucket_len_;
    std::unordered_set<ElementId> ids;
    for (const auto& e : bucket) {
      if (e.ts <= now_ || e.ts > next) {
        throw Error(ErrorCode::OutOfOrderBucket, "element " + std::to_string(e.id) + " has ts " + std::to_string(e.ts) +
                                                     " outside (" + std::to_string(now_) + ", " + std::to_string(next) + "]");
      }
      if (archive_.contains(e.id) || !ids.insert(e.id).second) {
        throw Error(ErrorCode::DuplicateId, "element id " + std::to_string(e.id) + " already seen");
      }
    }
    std::stable_sort(bucket.begin(), bucket.end(), [](const Element& a, const Element& b) {
      return a.ts != b.ts ? a.ts < b.ts : a.id < b.id;
    });
    // References must point strictly back in time; same-bucket parents count once processed.
    std::unordered_map<ElementId, Timestamp> bucket_ts;
    for (const auto& e : bucket) bucket_ts.emplace(e.id, e.ts);
    for (const auto& e : bucket) {
      for (ElementId r : e.refs) {
        Timestamp parent_ts;
        if (auto it = archive_.find(r); it != archive_.end()) {
          parent_ts = it->second.ts;
        } else if (auto bt = bucket_ts.find(r); bt != bucket_ts.end()) {
          parent_ts = bt->second;
        } else {
          continue;
        }
        if (parent_ts >= e.ts) {
          throw Error(ErrorCode::BadReference, "element " + std::to_string(e.id) + " refers to " + std::to_string(r) +
                                                   " which is not older");
        }
      }
    }

    UpdateReport report;
    std::unordered_set<ElementId> changed;
    std::unordered_set<ElementId> maybe_evict;

    for (auto& incoming : bucket) {
      std::vector<ElementId> resolved;
      resolved.reserve(incoming.refs.size());
      for (ElementId r : incoming.refs) {
        if (archive_.contains(r)) {
          resolved.push_back(r);
        } else {
          ++report.dangling_refs;
        }
      }
      incoming.refs = std::move(resolved);
      const ElementId id = incoming.id;
      auto [slot, ok] = archive_.emplace(id, std::move(incoming));
      assert(ok);
      const Element* e = &slot->second;

      auto& entry = active_[id];
      entry.element = e;
      entry.in_window = true;
      window_.push_back(e);
      report.inserted.push_back(id);

      for (ElementId r : e->refs) {
        auto& parent = active_[r];
        if (!parent.element) parent.element = &archive_.at(r);
        parent.referencers.push_back(e);
        changed.insert(r);
      }
    }

    now_ = next;
    dangling_total_ += report.dangling_refs;
    const Timestamp start = window_start();
    while (!window_.empty() && window_.front()->ts < start) {
      const Element* expired = window_.front();
      window_.pop_front();
      auto& entry = active_.at(expired->id);
      entry.in_window = false;
      maybe_evict.insert(expired->id);
      for (ElementId r : expired->refs) {
        auto& parent = active_.at(r);
        // Referencers are appended and expire in processing order.
        assert(!parent.referencers.empty() && parent.referencers.front() == expired);
        parent.referencers.pop_front();
        changed.insert(r);
        maybe_evict.insert(r);
      }
    }
    for (ElementId id : maybe_evict) {
      auto it = active_.find(id);
      if (it != active_.end() && !it->second.in_window && it->second.referencers.empty()) {
        active_.erase(it);
        changed.erase(id);
        report.evicted.push_back(id);
      }
    }

    report.now = now_;
    report.changed.assign(changed.begin(), changed.end());
    std::sort(report.inserted.begin(), report.inserted.end());
    std::sort(report.changed.begin(), report.changed.end());
    std::sort(report.evicted.begin(), report.evicted.end());
    return report;
  }

  /// Active element by id, or nullptr.
  const Element* find(ElementId id) const {
    auto it = active_.find(id);
    return it == active_.end() ? nullptr : it->second.element;
  }

  /// Any element ever ingested, or nullptr.
  const Element* archived(ElementId id) const {
    auto it = archive_.find(id);
    return it == archive_.end() ? nullptr : &it->second;
  }

  bool is_active(ElementId id) const { return active_.contains(id); }

  bool in_window(ElementId id) const {
    auto it = active_.find(id);
    return it != active_.end() && it->second.in_window;
  }

  /// I_t(id): window elements that refer to `id`, in arrival order.
  std::span<const Element* const> referencers(ElementId id) const {
    auto it = active_.find(id);
    if (it == active_.end()) return {};
    return it->second.referencers.view();
  }

  /// t_e: latest of the element's own ts (while in the window) and its referencers' ts.
  Timestamp last_ref(ElementId id) const {
    auto it = active_.find(id);
    if (it == active_.end()) return 0;
    Timestamp t = it->second.in_window ? it->second.element->ts : 0;
    auto refs = it->second.referencers.view();
    if (!refs.empty()) t = std::max(t, refs.back()->ts);
    return t;
  }

  std::size_t active_count() const { return active_.size(); }
  std::size_t window_count() const { return window_.size(); }
  std::size_t archived_count() const { return archive_.size(); }
  std::size_t dangling_refs() const { return dangling_total_; }

  /// Active elements sorted by id.
  std::vector<const Element*> active_elements() const {
    std::vector<const Element*> out;
    out.reserve(active_.size());
    for (const auto& [id, entry] : active_) out.push_back(entry.element);
    std::sort(out.begin(), out.end(), [](const Element* a, const Element* b) { return a->id < b->id; });
    return out;
  }

  /// Window elements in processing order.
  std::vector<const Element*> window_elements() const { return {window_.begin(), window_.end()}; }

 private:
  // Append-at-back, pop-at-front list that still exposes a contiguous span.
  class ReferencerList {
   public:
    void push_back(const Element* e) { items_.push_back(e); }
    void pop_front() {
      ++head_;
      if (head_ == items_.size()) {
        items_.clear();
        head_ = 0;
      } else if (head_ * 2 > items_.size() && head_ > 16) {
        items_.erase(items_.begin(), items_.begin() + static_cast<std::ptrdiff_t>(head_));
        head_ = 0;
      }
    }
    const Element* front() const { return items_[head_]; }
    bool empty() const { return head_ == items_.size(); }
    std::span<const Element* const> view() const { return {items_.data() + head_, items_.size() - head_}; }

   private:
    std::vector<const Element*> items_;
    std::size_t head_ = 0;
  };

  struct Entry {
    const Element* element = nullptr;
    bool in_window = false;
    ReferencerList referencers;
  };

  Timestamp window_len_;
  Timestamp bucket_len_;
  Timestamp now_;
  std::size_t dangling_total_ = 0;
  std::unordered_map<ElementId, Element> archive_;
  std::unordered_map<ElementId, Entry> active_;
  std::deque<const Element*> window_;
};

/// Read-only handle on an ActiveStore, valid until the next ingest.
class WindowSnapshot {
 public:
  explicit WindowSnapshot(const ActiveStore& store) : store_(&store) {}

  Timestamp now() const { return store_->now(); }
  std::size_t active_count() const { return store_->active_count(); }
  const Element* find(ElementId id) const { return store_->find(id); }
  bool in_window(ElementId id) const { return store_->in_window(id); }
  std::span<const Element* const> referencers(ElementId id) const { return store_->referencers(id); }
  std::vector<const Element*> active_elements() const { return store_->active_elements(); }

  /// Content equality: same time, same active ids, window flags and referencer lists.
  friend bool operator==(const WindowSnapshot& a, const WindowSnapshot& b) {
    if (a.now() != b.now() || a.active_count() != b.active_count()) return false;
    for (const Element* e : a.active_elements()) {
      const Element* other = b.find(e->id);
      if (!other || *other != *e || a.in_window(e->id) != b.in_window(e->id)) return false;
      auto ra = a.referencers(e->id);
      auto rb = b.referencers(e->id);
      if (!std::equal(ra.begin(), ra.end(), rb.begin(), rb.end(),
                      [](const Element* x, const Element* y) { return x->id == y->id; })) {
        return false;
      }
    }
    return true;
  }

 private:
  const ActiveStore* store_;
};

inline WindowSnapshot active_snapshot(const ActiveStore& store) { return WindowSnapshot(store); }

}  // namespace ksir
