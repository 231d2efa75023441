#pragma once

// Serialized event format, synthetic market generation, and traded-volume
// aggregation.
//
// Wire format (.l3e): an 8-byte header ("L3EV", u8 version, u8 reserved,
// u16 record size) followed by fixed-width 58-byte little-endian records:
//   kind u8 | timestamp u64 | order_id u64 | side u8 | price i64 |
//   quantity u64 | new_order_id u64 | new_price i64 | new_quantity u64
// The Replace extension fields are zero for every other kind. A .l3e.csv
// mirror with identical field order can be written for debugging.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpcexec/orderbook.hpp"

namespace mpcexec::md {

using EventRecord = BookEvent;

inline constexpr size_t kRecordSize = 58;
inline constexpr size_t kHeaderSize = 8;
inline constexpr std::array<uint8_t, 4> kMagic = {'L', '3', 'E', 'V'};
inline constexpr uint8_t kFormatVersion = 1;

enum class MdErrc {
  TruncatedRecord,
  UnknownKind,
  ZeroQuantity,
  InvalidSide,
  BadHeader,
  NoTrades,
  IoError,
};

struct MdError : std::runtime_error {
  MdErrc code;
  MdError(MdErrc c, const std::string& what) : std::runtime_error(what), code(c) {}
};

// ---------------------------------------------------------------------------
// Codec
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void put_le(uint8_t* p, T v) {
  for (size_t i = 0; i < sizeof(T); ++i) p[i] = static_cast<uint8_t>(static_cast<uint64_t>(v) >> (8 * i));
}

template <typename T>
T get_le(const uint8_t* p) {
  uint64_t v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace detail

inline std::array<uint8_t, kRecordSize> encode_event(const EventRecord& ev) {
  std::array<uint8_t, kRecordSize> out{};
  out[0] = static_cast<uint8_t>(ev.kind);
  detail::put_le<uint64_t>(&out[1], static_cast<uint64_t>(ev.timestamp));
  detail::put_le<uint64_t>(&out[9], ev.order_id);
  out[17] = static_cast<uint8_t>(ev.side);
  detail::put_le<int64_t>(&out[18], ev.price);
  detail::put_le<uint64_t>(&out[26], ev.quantity);
  detail::put_le<uint64_t>(&out[34], ev.new_order_id);
  detail::put_le<int64_t>(&out[42], ev.new_price);
  detail::put_le<uint64_t>(&out[50], ev.new_quantity);
  return out;
}

inline EventRecord parse_event(std::span<const uint8_t> bytes) {
  if (bytes.size() < kRecordSize)
    throw MdError(MdErrc::TruncatedRecord,
                  "record truncated: " + std::to_string(bytes.size()) + " bytes");
  const uint8_t kind = bytes[0];
  if (kind > static_cast<uint8_t>(EventKind::Replace))
    throw MdError(MdErrc::UnknownKind, "unknown kind byte " + std::to_string(kind));
  const uint8_t side = bytes[17];
  if (side > 1) throw MdError(MdErrc::InvalidSide, "invalid side byte " + std::to_string(side));
  EventRecord ev;
  ev.kind = static_cast<EventKind>(kind);
  ev.timestamp = static_cast<int64_t>(detail::get_le<uint64_t>(&bytes[1]));
  ev.order_id = detail::get_le<uint64_t>(&bytes[9]);
  ev.side = static_cast<Side>(side);
  ev.price = detail::get_le<int64_t>(&bytes[18]);
  ev.quantity = detail::get_le<uint64_t>(&bytes[26]);
  ev.new_order_id = detail::get_le<uint64_t>(&bytes[34]);
  ev.new_price = detail::get_le<int64_t>(&bytes[42]);
  ev.new_quantity = detail::get_le<uint64_t>(&bytes[50]);
  switch (ev.kind) {
    case EventKind::Add:
    case EventKind::Execute:
    case EventKind::Cancel:
      if (ev.quantity == 0) throw MdError(MdErrc::ZeroQuantity, "zero quantity record");
      break;
    case EventKind::Replace:
      if (ev.new_quantity == 0) throw MdError(MdErrc::ZeroQuantity, "zero replace quantity");
      break;
    default:
      break;
  }
  return ev;
}

// ---------------------------------------------------------------------------
// File IO
// ---------------------------------------------------------------------------

inline void write_l3e(const std::string& path, std::span<const EventRecord> events) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw MdError(MdErrc::IoError, "cannot open " + path + " for writing");
  std::array<uint8_t, kHeaderSize> header{};
  std::memcpy(header.data(), kMagic.data(), 4);
  header[4] = kFormatVersion;
  header[5] = 0;
  detail::put_le<uint16_t>(&header[6], static_cast<uint16_t>(kRecordSize));
  f.write(reinterpret_cast<const char*>(header.data()), kHeaderSize);
  for (const auto& ev : events) {
    auto rec = encode_event(ev);
    f.write(reinterpret_cast<const char*>(rec.data()), kRecordSize);
  }
  if (!f) throw MdError(MdErrc::IoError, "write failed: " + path);
}

inline std::vector<EventRecord> read_l3e(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MdError(MdErrc::IoError, "cannot open " + path);
  std::array<uint8_t, kHeaderSize> header{};
  f.read(reinterpret_cast<char*>(header.data()), kHeaderSize);
  if (f.gcount() != kHeaderSize || std::memcmp(header.data(), kMagic.data(), 4) != 0 ||
      header[4] != kFormatVersion ||
      detail::get_le<uint16_t>(&header[6]) != kRecordSize)
    throw MdError(MdErrc::BadHeader, "bad .l3e header in " + path);
  std::vector<EventRecord> out;
  std::array<uint8_t, kRecordSize> buf{};
  for (;;) {
    f.read(reinterpret_cast<char*>(buf.data()), kRecordSize);
    const auto got = f.gcount();
    if (got == 0) break;
    if (static_cast<size_t>(got) != kRecordSize)
      throw MdError(MdErrc::TruncatedRecord, "truncated trailing record in " + path);
    out.push_back(parse_event(buf));
  }
  return out;
}

inline const char* kind_name(EventKind k) {
  switch (k) {
    case EventKind::Add: return "Add";
    case EventKind::Execute: return "Execute";
    case EventKind::Cancel: return "Cancel";
    case EventKind::Delete: return "Delete";
    case EventKind::Replace: return "Replace";
  }
  return "?";
}

inline void write_l3e_csv(const std::string& path, std::span<const EventRecord> events) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw MdError(MdErrc::IoError, "cannot open " + path + " for writing");
  f << "kind,timestamp,order_id,side,price,quantity,new_order_id,new_price,new_quantity\n";
  for (const auto& ev : events) {
    f << kind_name(ev.kind) << ',' << ev.timestamp << ',' << ev.order_id << ','
      << (ev.side == Side::Buy ? 'B' : 'S') << ',' << ev.price << ',' << ev.quantity << ','
      << ev.new_order_id << ',' << ev.new_price << ',' << ev.new_quantity << '\n';
  }
}

// ---------------------------------------------------------------------------
// Synthetic market
// ---------------------------------------------------------------------------

struct SyntheticMarketConfig {
  uint64_t seed = 1;
  int64_t duration_ns = 3'600'000'000'000;  // 1 hour
  int64_t initial_mid = 2000;               // ticks
  double tick_size = 0.01;                  // dollars per tick
  double event_rate = 8.0;                  // update arrivals per second per side
  double volatility = 0.6;                  // per-step mid std, ticks
  double drift = 0.0;                       // ticks per hour
  double spread_mean = 3.0;                 // ticks
  uint64_t level_depth_mean = 300;          // shares per level
  int num_levels = 5;
  double trade_fraction = 0.25;             // share of arrivals that trade at the touch
  bool ushape_volume = false;               // intraday U-shaped trade intensity

  void validate() const {
    if (duration_ns <= 0 || event_rate <= 0 || volatility < 0 || spread_mean <= 0 ||
        level_depth_mean == 0 || initial_mid <= 0 || tick_size <= 0)
      throw MdError(MdErrc::IoError, "synthetic market config has non-positive rates/depths");
    if (num_levels < 2) throw MdError(MdErrc::IoError, "num_levels must be >= 2");
    if (trade_fraction < 0 || trade_fraction >= 1)
      throw MdError(MdErrc::IoError, "trade_fraction must be in [0,1)");
  }
};

namespace detail {

// Integer random-walk step with exact mean: floor(g + U) has expectation
// E[g] for any continuous g, at the cost of slightly inflated variance
// (bounded by +1/4, ~ +1/6 for sigma near or above one tick).
class DitheredGaussianStep {
 public:
  DitheredGaussianStep(double mean, double sigma) : norm_(mean, sigma > 0 ? sigma : 1e-12) {}
  template <typename Rng>
  int64_t operator()(Rng& rng) {
    return static_cast<int64_t>(std::floor(norm_(rng) + uni_(rng)));
  }

 private:
  std::normal_distribution<double> norm_;
  std::uniform_real_distribution<double> uni_{0.0, 1.0};
};

}  // namespace detail

/// Generates a deterministic synthetic session. The mid follows a Gaussian
/// random walk on the tick grid; both sides keep `num_levels` levels quoted
/// around it via Add/Cancel/Delete churn, and executions arrive at the
/// touch. Every emitted event is validated against an internal book, so the
/// stream replays cleanly.
class SyntheticMarket {
 public:
  explicit SyntheticMarket(const SyntheticMarketConfig& cfg) : cfg_(cfg) { cfg.validate(); }

  std::vector<BookEvent> generate() {
    cfg_.validate();
    rng_.seed(cfg_.seed);
    out_.clear();
    book_ = OrderBook(0);
    next_id_ = 1;
    mid_ = cfg_.initial_mid;
    spread_ = std::max<int64_t>(1, llround(cfg_.spread_mean));

    const double arrivals_per_sec = 2.0 * cfg_.event_rate;
    const double steps_per_hour = arrivals_per_sec * 3600.0;
    detail::DitheredGaussianStep step(cfg_.drift / steps_per_hour, cfg_.volatility);
    std::exponential_distribution<double> gap(arrivals_per_sec / 1e9);  // ns

    int64_t ts = 0;
    recenter(ts);  // initial book
    for (;;) {
      ts += std::max<int64_t>(1, static_cast<int64_t>(gap(rng_)));
      if (ts >= cfg_.duration_ns) break;
      mid_ += step(rng_);
      if (mid_ < spread_ + cfg_.num_levels + 1) mid_ = spread_ + cfg_.num_levels + 1;
      recenter(ts);
      if (uni_(rng_) < trade_intensity(ts)) trade(ts);
      if (uni_(rng_) < 0.15) churn(ts);
    }
    return std::move(out_);
  }

 private:
  SyntheticMarketConfig cfg_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> uni_{0.0, 1.0};
  std::vector<BookEvent> out_;
  OrderBook book_{0};
  uint64_t next_id_ = 1;
  int64_t mid_ = 0;
  int64_t spread_ = 1;

  double trade_intensity(int64_t ts) const {
    if (!cfg_.ushape_volume) return cfg_.trade_fraction;
    // U-shape: x2 intensity at open/close, x0.5 mid-session.
    const double x = static_cast<double>(ts) / static_cast<double>(cfg_.duration_ns);
    const double shape = 0.5 + 6.0 * (x - 0.5) * (x - 0.5);
    return std::min(0.95, cfg_.trade_fraction * shape);
  }

  void emit(const BookEvent& ev) {
    book_.apply_event(ev);
    out_.push_back(ev);
    auto& q = queues_[{static_cast<int>(ev.side), ev.price}];
    switch (ev.kind) {
      case EventKind::Add:
        q.push_back({ev.order_id, ev.quantity});
        break;
      case EventKind::Execute:
      case EventKind::Cancel:
        for (auto it = q.begin(); it != q.end(); ++it) {
          if (it->id == ev.order_id) {
            it->qty -= std::min(it->qty, ev.quantity);
            if (it->qty == 0) q.erase(it);
            break;
          }
        }
        break;
      case EventKind::Delete:
        for (auto it = q.begin(); it != q.end(); ++it) {
          if (it->id == ev.order_id) {
            q.erase(it);
            break;
          }
        }
        break;
      case EventKind::Replace:
        break;  // not emitted by the generator
    }
    if (q.empty()) queues_.erase({static_cast<int>(ev.side), ev.price});
  }

  int64_t bid_touch() const { return mid_ - (spread_ + 1) / 2; }
  int64_t ask_touch() const { return bid_touch() + spread_; }

  uint64_t order_size() {
    std::poisson_distribution<uint64_t> p(static_cast<double>(cfg_.level_depth_mean) / 3.0);
    return 1 + p(rng_);
  }

  // Re-quote both sides around the current walk mid: clear anything inside
  // or beyond the target window, then top up missing levels.
  void recenter(int64_t ts) {
    const int64_t bt = bid_touch();
    const int64_t at = ask_touch();
    clear_zone(Side::Buy, bt + 1, ts);            // bids above the new bid touch
    clear_zone(Side::Sell, at - 1, ts);           // asks below the new ask touch
    for (int i = 0; i < cfg_.num_levels; ++i) {
      top_up(Side::Buy, bt - i, ts);
      top_up(Side::Sell, at + i, ts);
    }
  }

  // Delete all orders on `side` at prices at-or-beyond `limit` toward the
  // opposite side (for bids: price >= limit; for asks: price <= limit).
  void clear_zone(Side side, int64_t limit, int64_t ts) {
    for (;;) {
      auto touch = side == Side::Buy ? book_.best_bid() : book_.best_ask();
      if (!touch) return;
      const bool offending = side == Side::Buy ? *touch >= limit : *touch <= limit;
      if (!offending) return;
      // Delete the whole level entry by entry.
      while (book_.resting_at(side, *touch) > 0) {
        uint64_t id = head_id(side, *touch);
        emit(BookEvent::remove(ts, id, side, *touch));
      }
    }
  }

  void top_up(Side side, int64_t price, int64_t ts) {
    if (price <= 0) return;
    const uint64_t target = cfg_.level_depth_mean / 2;
    int guard = 0;
    while (book_.resting_at(side, price) < target && ++guard < 16) {
      emit(BookEvent::add(ts, next_id_++, side, price, order_size()));
    }
  }

  void trade(int64_t ts) {
    const Side side = uni_(rng_) < 0.5 ? Side::Buy : Side::Sell;  // resting side hit
    auto touch = side == Side::Buy ? book_.best_bid() : book_.best_ask();
    if (!touch) return;
    std::poisson_distribution<uint64_t> p(static_cast<double>(cfg_.level_depth_mean) / 5.0);
    uint64_t want = 1 + p(rng_);
    while (want > 0 && book_.resting_at(side, *touch) > 0) {
      const uint64_t id = head_id(side, *touch);
      const uint64_t rem = remaining_of(side, *touch, id);
      const uint64_t take = std::min(want, rem);
      emit(BookEvent::execute(ts, id, side, *touch, take));
      want -= take;
    }
  }

  void churn(int64_t ts) {
    // Cancel part of a random live order away from the touch.
    const Side side = uni_(rng_) < 0.5 ? Side::Buy : Side::Sell;
    auto touch = side == Side::Buy ? book_.best_bid() : book_.best_ask();
    if (!touch) return;
    const int off = 1 + static_cast<int>(rng_() % static_cast<uint64_t>(cfg_.num_levels - 1));
    const int64_t price = side == Side::Buy ? *touch - off : *touch + off;
    if (book_.resting_at(side, price) == 0) return;
    const uint64_t id = head_id(side, price);
    const uint64_t rem = remaining_of(side, price, id);
    if (rem <= 1) return;
    emit(BookEvent::cancel(ts, id, side, price, 1 + rng_() % (rem - 1)));
  }

  // The generator tracks its own queues so it can reference ids. Kept as a
  // parallel structure to avoid widening the OrderBook API; emit() keeps it
  // consistent with the validation book.
  struct Entry {
    uint64_t id;
    uint64_t qty;
  };
  std::map<std::pair<int, int64_t>, std::deque<Entry>> queues_;

  uint64_t head_id(Side side, int64_t price) {
    return queues_.at({static_cast<int>(side), price}).front().id;
  }

  uint64_t remaining_of(Side side, int64_t price, uint64_t id) const {
    const auto& q = queues_.at({static_cast<int>(side), price});
    for (const auto& e : q)
      if (e.id == id) return e.qty;
    return 0;
  }
};

inline std::vector<BookEvent> generate_market(const SyntheticMarketConfig& cfg) {
  return SyntheticMarket(cfg).generate();
}

// ---------------------------------------------------------------------------
// Traded-volume aggregation
// ---------------------------------------------------------------------------

/// Cumulative traded volume sampled on fixed buckets; values are ν̂ at the
/// bucket boundaries with cumulative.front() == 0.
struct VolumeProfile {
  int64_t start_ns = 0;
  int64_t bucket_ns = 300'000'000'000;  // 5 minutes
  std::vector<double> cumulative;       // size = buckets + 1, non-decreasing

  double terminal() const { return cumulative.empty() ? 0.0 : cumulative.back(); }

  /// Piecewise-linear interpolation of cumulative volume at time t.
  double at_time(int64_t t) const {
    if (cumulative.size() < 2) return 0.0;
    const double pos = static_cast<double>(t - start_ns) / static_cast<double>(bucket_ns);
    if (pos <= 0) return 0.0;
    const double last = static_cast<double>(cumulative.size() - 1);
    if (pos >= last) return cumulative.back();
    const size_t k = static_cast<size_t>(pos);
    const double frac = pos - static_cast<double>(k);
    return cumulative[k] + frac * (cumulative[k + 1] - cumulative[k]);
  }
};

struct VwapResult {
  double price = 0.0;  // ticks
  uint64_t volume = 0;
};

/// Volume-weighted average executed price over [t0, t1).
inline VwapResult market_vwap(std::span<const BookEvent> events, int64_t t0, int64_t t1) {
  double notional = 0.0;
  uint64_t volume = 0;
  for (const auto& ev : events) {
    if (ev.kind != EventKind::Execute || ev.timestamp < t0 || ev.timestamp >= t1) continue;
    notional += static_cast<double>(ev.price) * static_cast<double>(ev.quantity);
    volume += ev.quantity;
  }
  if (volume == 0) throw MdError(MdErrc::NoTrades, "no executions in window");
  return {notional / static_cast<double>(volume), volume};
}

struct VwapAccumulation {
  VwapResult vwap;
  VolumeProfile profile;
};

inline VolumeProfile volume_profile(std::span<const BookEvent> events, int64_t t0, int64_t t1,
                                    int64_t bucket_ns) {
  VolumeProfile p;
  p.start_ns = t0;
  p.bucket_ns = bucket_ns;
  const size_t buckets = static_cast<size_t>((t1 - t0 + bucket_ns - 1) / bucket_ns);
  p.cumulative.assign(buckets + 1, 0.0);
  for (const auto& ev : events) {
    if (ev.kind != EventKind::Execute || ev.timestamp < t0 || ev.timestamp >= t1) continue;
    const size_t k = static_cast<size_t>((ev.timestamp - t0) / bucket_ns);
    p.cumulative[k + 1] += static_cast<double>(ev.quantity);
  }
  for (size_t i = 1; i < p.cumulative.size(); ++i) p.cumulative[i] += p.cumulative[i - 1];
  if (p.terminal() <= 0) throw MdError(MdErrc::NoTrades, "no traded volume in window");
  return p;
}

/// One-pass convenience wrapper: traded VWAP plus the cumulative volume
/// profile over the same window.
inline VwapAccumulation accumulate_vwap(std::span<const BookEvent> events, int64_t t0, int64_t t1,
                                        int64_t bucket_ns = 300'000'000'000) {
  return {market_vwap(events, t0, t1), volume_profile(events, t0, t1, bucket_ns)};
}

}  // namespace mpcexec::md
