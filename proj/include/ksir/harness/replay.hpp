#pragma once

#include <algorithm>
#include <chrono>
#include <vector>

#include "ksir/index.hpp"

namespace ksir::harness {

struct BucketTiming {
  Timestamp now;
  std::size_t elements;
  double elapsed_ms;
};

/// Feeds a time-ordered element stream into a StreamIndex one bucket at a time.
class Replayer {
 public:
  explicit Replayer(std::vector<Element> stream) : stream_(std::move(stream)) {
    std::stable_sort(stream_.begin(), stream_.end(), [](const Element& a, const Element& b) { return a.ts < b.ts; });
  }

  /// Bucket-aligned start time for a fresh index over this stream.
  Timestamp aligned_start(Timestamp bucket_len) const {
    if (stream_.empty() || stream_.front().ts <= bucket_len) return 0;
    return ((stream_.front().ts - 1) / bucket_len) * bucket_len;
  }

  Timestamp last_ts() const { return stream_.empty() ? 0 : stream_.back().ts; }
  bool done() const { return pos_ == stream_.size(); }
  std::size_t consumed() const { return pos_; }

  /// Ingests the next bucket (possibly empty).
  BucketTiming step(StreamIndex& index) {
    const Timestamp end = index.now() + index.config().bucket_len;
    std::vector<Element> bucket;
    while (pos_ < stream_.size() && stream_[pos_].ts <= end) bucket.push_back(stream_[pos_++]);
    const std::size_t n = bucket.size();
    auto t0 = std::chrono::steady_clock::now();
    index.ingest(std::move(bucket));
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return {index.now(), n, ms};
  }

  /// Ingests buckets until index.now() >= t. Returns the timings of the buckets ingested.
  std::vector<BucketTiming> advance_to(StreamIndex& index, Timestamp t) {
    std::vector<BucketTiming> timings;
    while (index.now() < t) timings.push_back(step(index));
    return timings;
  }

 private:
  std::vector<Element> stream_;
  std::size_t pos_ = 0;
};

}  // namespace ksir::harness
