#pragma once

// L3 limit order book reconstruction plus shadow-order fill simulation.
//
// The book is rebuilt from an event stream (Add/Execute/Cancel/Delete/
// Replace). Our own orders are *shadow* orders: they read liquidity and
// consume it locally, but never appear in the public stream, so the
// recorded market is replayed unchanged (no impact modelling).
//
// Fill semantics for resting shadow limits follow a conservative
// queue-position rule: an order joined with `queue_ahead` resting shares
// is credited fills only as cumulative executed volume at its price
// penetrates past that position.

#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace mpcexec {

enum class Side : uint8_t { Buy = 0, Sell = 1 };

inline Side opposite(Side s) { return s == Side::Buy ? Side::Sell : Side::Buy; }

/// Side multiplier: +1 for buys, -1 for sells.
inline double side_sign(Side s) { return s == Side::Buy ? 1.0 : -1.0; }

enum class EventKind : uint8_t {
  Add = 0,
  Execute = 1,
  Cancel = 2,   // partial quantity reduction
  Delete = 3,   // full removal
  Replace = 4,  // delete + re-add with new id/price/qty (loses priority)
};

struct BookEvent {
  int64_t timestamp = 0;  // nanoseconds since session open
  EventKind kind = EventKind::Add;
  uint64_t order_id = 0;
  Side side = Side::Buy;
  int64_t price = 0;  // integer ticks
  uint64_t quantity = 0;
  // Replace extension; zero for all other kinds.
  uint64_t new_order_id = 0;
  int64_t new_price = 0;
  uint64_t new_quantity = 0;

  static BookEvent add(int64_t ts, uint64_t id, Side s, int64_t px, uint64_t qty) {
    return {ts, EventKind::Add, id, s, px, qty, 0, 0, 0};
  }
  static BookEvent execute(int64_t ts, uint64_t id, Side s, int64_t px, uint64_t qty) {
    return {ts, EventKind::Execute, id, s, px, qty, 0, 0, 0};
  }
  static BookEvent cancel(int64_t ts, uint64_t id, Side s, int64_t px, uint64_t qty) {
    return {ts, EventKind::Cancel, id, s, px, qty, 0, 0, 0};
  }
  static BookEvent remove(int64_t ts, uint64_t id, Side s, int64_t px) {
    return {ts, EventKind::Delete, id, s, px, 0, 0, 0, 0};
  }
  static BookEvent replace(int64_t ts, uint64_t id, Side s, int64_t px, uint64_t new_id,
                           int64_t new_px, uint64_t new_qty) {
    return {ts, EventKind::Replace, id, s, px, 0, new_id, new_px, new_qty};
  }
};

enum class BookErrc {
  UnknownOrderId,
  DuplicateOrderId,
  CrossedBookEvent,
  NonMonotoneTimestamp,
  MalformedEvent,
  InactiveOrder,
};

struct BookError : std::runtime_error {
  BookErrc code;
  BookError(BookErrc c, const std::string& what) : std::runtime_error(what), code(c) {}
};

/// One execution credited to one of our submissions.
struct Fill {
  int64_t timestamp = 0;
  int64_t price = 0;     // ticks
  uint64_t quantity = 0;
  int handle = -1;       // submission handle
};

/// A shadow order resting in (or done with) the simulated queue.
struct TrackedOrder {
  Side side = Side::Buy;
  int64_t price = 0;
  uint64_t quantity = 0;
  uint64_t queue_ahead = 0;  // shares ahead at this price at effective join
  uint64_t filled = 0;
  int64_t submit_timestamp = 0;
  int64_t effective_timestamp = 0;
  bool active = false;  // resting and cancellable
  bool done = false;    // terminal (cancelled or fully filled)
  uint64_t exec_baseline = 0;  // cumulative executed volume at (side,price) at join
};

/// Conservative queue-position fill rule. `executed_at_level` is the
/// cumulative executed volume at the order's price since its effective
/// join. Returns the incremental fill; total credit is
/// clamp(executed - queue_ahead, 0, quantity), which makes the result
/// independent of call granularity. The strict variant credits nothing
/// until volume has penetrated past the order entirely, then credits it
/// in full.
inline uint64_t on_market_trade(TrackedOrder& tracked, uint64_t executed_at_level,
                                bool strict = false) {
  if (!tracked.active) throw BookError(BookErrc::InactiveOrder, "on_market_trade: inactive order");
  uint64_t total = 0;
  if (strict) {
    total = (executed_at_level >= tracked.queue_ahead + tracked.quantity) ? tracked.quantity : 0;
  } else {
    total = executed_at_level > tracked.queue_ahead ? executed_at_level - tracked.queue_ahead : 0;
    if (total > tracked.quantity) total = tracked.quantity;
  }
  const uint64_t delta = total > tracked.filled ? total - tracked.filled : 0;
  tracked.filled += delta;
  if (tracked.filled == tracked.quantity) {
    tracked.active = false;
    tracked.done = true;
  }
  return delta;
}

class OrderBook {
 public:
  explicit OrderBook(int64_t latency_ns = 10'000'000, bool strict_queue_fills = false)
      : latency_ns_(latency_ns), strict_(strict_queue_fills) {}

  // ---------------------------------------------------------------------
  // Public stream
  // ---------------------------------------------------------------------

  void apply_event(const BookEvent& ev) {
    if (ev.timestamp < last_ts_)
      throw BookError(BookErrc::NonMonotoneTimestamp,
                      "event timestamp " + std::to_string(ev.timestamp) + " < " +
                          std::to_string(last_ts_));
    activate_pending(ev.timestamp - 1);  // our orders strictly earlier than this event
    last_ts_ = ev.timestamp;
    switch (ev.kind) {
      case EventKind::Add: apply_add(ev); break;
      case EventKind::Execute: apply_execute(ev); break;
      case EventKind::Cancel: apply_cancel(ev); break;
      case EventKind::Delete: apply_delete(ev); break;
      case EventKind::Replace: apply_replace(ev); break;
      default: throw BookError(BookErrc::MalformedEvent, "unknown event kind");
    }
  }

  /// Advance simulated time with no further public events, activating any
  /// pending submissions whose effective time has been reached.
  void advance_to(int64_t ts) {
    if (ts < last_ts_) throw BookError(BookErrc::NonMonotoneTimestamp, "advance_to backwards");
    activate_pending(ts);
    last_ts_ = ts;
  }

  // ---------------------------------------------------------------------
  // Our orders
  // ---------------------------------------------------------------------

  /// Submit a market order at decision time `ts`. The far touch is
  /// snapshotted now; the order reaches the book at ts + latency. If at
  /// that point the far touch has not moved away it sweeps the opposite
  /// side; otherwise (or for any unfilled residual) it rests as a limit
  /// at the snapshotted price.
  int submit_market(Side side, uint64_t qty, int64_t ts) {
    if (qty == 0) throw BookError(BookErrc::MalformedEvent, "submit_market: zero quantity");
    Pending p;
    p.handle = new_handle(side, qty, ts);
    p.side = side;
    p.qty = qty;
    p.effective_ts = ts + latency_ns_;
    p.is_market = true;
    p.limit_price = far_touch(side).value_or(kNoPrice);
    pending_.push_back(p);
    return p.handle;
  }

  /// Submit a limit order at decision time `ts`; joins (or executes its
  /// marketable portion against) the book at ts + latency.
  int submit_limit(Side side, int64_t price, uint64_t qty, int64_t ts) {
    if (qty == 0 || price <= 0)
      throw BookError(BookErrc::MalformedEvent, "submit_limit: bad price/quantity");
    Pending p;
    p.handle = new_handle(side, qty, ts);
    p.side = side;
    p.qty = qty;
    p.effective_ts = ts + latency_ns_;
    p.is_market = false;
    p.limit_price = price;
    pending_.push_back(p);
    return p.handle;
  }

  /// Cancel a submission. Returns the unfilled residual. Pending
  /// (not-yet-effective) submissions are withdrawn whole.
  uint64_t cancel(int handle) {
    TrackedOrder& t = tracked_.at(static_cast<size_t>(handle));
    for (auto it = pending_.begin(); it != pending_.end(); ++it) {
      if (it->handle == handle) {
        pending_.erase(it);
        t.done = true;
        return t.quantity;
      }
    }
    if (!t.active) throw BookError(BookErrc::InactiveOrder, "cancel: inactive order");
    t.active = false;
    t.done = true;
    unindex_resting(handle);
    return t.quantity - t.filled;
  }

  const TrackedOrder& tracked(int handle) const { return tracked_.at(static_cast<size_t>(handle)); }
  size_t tracked_count() const { return tracked_.size(); }

  std::vector<Fill> drain_fills() {
    std::vector<Fill> out;
    out.swap(fills_);
    return out;
  }

  // ---------------------------------------------------------------------
  // Queries
  // ---------------------------------------------------------------------

  std::optional<int64_t> best_bid() const {
    return bids_.empty() ? std::nullopt : std::optional<int64_t>(bids_.begin()->first);
  }
  std::optional<int64_t> best_ask() const {
    return asks_.empty() ? std::nullopt : std::optional<int64_t>(asks_.begin()->first);
  }
  std::optional<double> mid() const {
    auto b = best_bid(), a = best_ask();
    if (!b || !a) return std::nullopt;
    return (static_cast<double>(*b) + static_cast<double>(*a)) / 2.0;
  }
  std::optional<int64_t> spread() const {
    auto b = best_bid(), a = best_ask();
    if (!b || !a) return std::nullopt;
    return *a - *b;
  }

  /// Public resting quantity at a price (shadow orders excluded).
  uint64_t resting_at(Side side, int64_t price) const {
    if (side == Side::Buy) {
      auto it = bids_.find(price);
      return it == bids_.end() ? 0 : it->second.total;
    }
    auto it = asks_.find(price);
    return it == asks_.end() ? 0 : it->second.total;
  }

  /// Cumulative publicly executed volume at (side, price) since session start.
  uint64_t executed_at(Side side, int64_t price) const {
    const auto& vol = side == Side::Buy ? exec_volume_bid_ : exec_volume_ask_;
    auto it = vol.find(price);
    return it == vol.end() ? 0 : it->second;
  }

  int64_t last_timestamp() const { return last_ts_; }
  int64_t latency() const { return latency_ns_; }
  uint64_t consumed_event_skips() const { return consumed_event_skips_; }

 private:
  static constexpr int64_t kNoPrice = std::numeric_limits<int64_t>::min();

  struct QueueEntry {
    uint64_t id;
    uint64_t qty;
  };
  struct Level {
    std::deque<QueueEntry> queue;
    uint64_t total = 0;
  };
  struct OrderRef {
    Side side;
    int64_t price;
  };
  struct ConsumedInfo {
    Side side;
    int64_t price;
    uint64_t qty;  // shares we swept from this public order
  };
  struct Pending {
    int handle;
    Side side;
    uint64_t qty;
    int64_t effective_ts;
    bool is_market;
    int64_t limit_price;  // limit price, or far-touch snapshot for markets
  };

  using BidMap = std::map<int64_t, Level, std::greater<int64_t>>;
  using AskMap = std::map<int64_t, Level>;

  int64_t latency_ns_;
  bool strict_;
  int64_t last_ts_ = 0;
  BidMap bids_;
  AskMap asks_;
  std::unordered_map<uint64_t, OrderRef> orders_;
  std::unordered_map<uint64_t, ConsumedInfo> consumed_;
  std::unordered_map<int64_t, uint64_t> exec_volume_bid_, exec_volume_ask_;
  std::vector<TrackedOrder> tracked_;
  std::vector<Fill> fills_;
  std::vector<Pending> pending_;
  // active shadow orders resting at (side, price), join order
  std::map<std::pair<int, int64_t>, std::vector<int>> resting_index_;
  uint64_t consumed_event_skips_ = 0;

  int new_handle(Side side, uint64_t qty, int64_t ts) {
    TrackedOrder t;
    t.side = side;
    t.quantity = qty;
    t.submit_timestamp = ts;
    t.effective_timestamp = ts + latency_ns_;
    tracked_.push_back(t);
    return static_cast<int>(tracked_.size()) - 1;
  }

  std::optional<int64_t> far_touch(Side side) const {
    return side == Side::Buy ? best_ask() : best_bid();
  }

  uint64_t shadow_resting_at(Side side, int64_t price) const {
    auto it = resting_index_.find({static_cast<int>(side), price});
    if (it == resting_index_.end()) return 0;
    uint64_t total = 0;
    for (int h : it->second) {
      const TrackedOrder& t = tracked_[static_cast<size_t>(h)];
      if (t.active) total += t.quantity - t.filled;
    }
    return total;
  }

  void unindex_resting(int handle) {
    const TrackedOrder& t = tracked_[static_cast<size_t>(handle)];
    auto it = resting_index_.find({static_cast<int>(t.side), t.price});
    if (it == resting_index_.end()) return;
    auto& v = it->second;
    for (auto vit = v.begin(); vit != v.end(); ++vit) {
      if (*vit == handle) {
        v.erase(vit);
        break;
      }
    }
    if (v.empty()) resting_index_.erase(it);
  }

  void activate_pending(int64_t ts) {
    // Pendings activate in effective-time order (stable for ties).
    for (;;) {
      size_t best = pending_.size();
      for (size_t i = 0; i < pending_.size(); ++i) {
        if (pending_[i].effective_ts <= ts &&
            (best == pending_.size() || pending_[i].effective_ts < pending_[best].effective_ts))
          best = i;
      }
      if (best == pending_.size()) break;
      Pending p = pending_[best];
      pending_.erase(pending_.begin() + static_cast<long>(best));
      activate(p);
    }
  }

  void activate(const Pending& p) {
    TrackedOrder& t = tracked_[static_cast<size_t>(p.handle)];
    uint64_t remaining = p.qty;
    if (p.is_market) {
      if (p.limit_price == kNoPrice) {
        // No far touch was quoted at submission; nothing to price against.
        t.done = true;
        return;
      }
      auto touch = far_touch(p.side);
      const bool touch_ok =
          touch && (p.side == Side::Buy ? *touch <= p.limit_price : *touch >= p.limit_price);
      if (touch_ok) {
        // Far touch still at or better than observed: full sweep.
        remaining = sweep(p.side, remaining, std::nullopt, p.effective_ts, p.handle);
      }
      // If the touch moved away the order missed; residual rests below.
    } else {
      remaining = sweep(p.side, remaining, p.limit_price, p.effective_ts, p.handle);
    }
    if (remaining == 0) {
      t.filled = p.qty;
      t.done = true;
      return;
    }
    // Rest the residual as a shadow limit at the (snapshot or limit) price.
    // The tracked order represents the resting residual only; sweep fills
    // were already recorded against the same handle.
    t.price = p.limit_price;
    t.quantity = remaining;
    t.filled = 0;
    t.queue_ahead = resting_at(p.side, p.limit_price) + shadow_resting_at(p.side, p.limit_price);
    t.exec_baseline = executed_at(p.side, p.limit_price);
    t.active = true;
    resting_index_[{static_cast<int>(p.side), p.limit_price}].push_back(p.handle);
  }

  /// Consume opposite-side liquidity in price order, optionally capped at
  /// `price_cap`. Returns the unfilled remainder.
  uint64_t sweep(Side side, uint64_t qty, std::optional<int64_t> price_cap, int64_t ts,
                 int handle) {
    if (side == Side::Buy)
      return sweep_levels(asks_, qty, price_cap, ts, handle, /*buy=*/true);
    return sweep_levels(bids_, qty, price_cap, ts, handle, /*buy=*/false);
  }

  template <typename MapT>
  uint64_t sweep_levels(MapT& levels, uint64_t qty, std::optional<int64_t> price_cap, int64_t ts,
                        int handle, bool buy) {
    auto it = levels.begin();
    while (qty > 0 && it != levels.end()) {
      const int64_t price = it->first;
      if (price_cap && (buy ? price > *price_cap : price < *price_cap)) break;
      Level& lvl = it->second;
      while (qty > 0 && !lvl.queue.empty()) {
        QueueEntry& e = lvl.queue.front();
        const uint64_t take = std::min(qty, e.qty);
        e.qty -= take;
        lvl.total -= take;
        qty -= take;
        auto cit = consumed_.find(e.id);
        if (cit == consumed_.end()) {
          Side resting_side = buy ? Side::Sell : Side::Buy;
          consumed_.emplace(e.id, ConsumedInfo{resting_side, price, take});
        } else {
          cit->second.qty += take;
        }
        fills_.push_back({ts, price, take, handle});
        if (e.qty == 0) {
          orders_.erase(e.id);
          lvl.queue.pop_front();
        }
      }
      if (lvl.queue.empty())
        it = levels.erase(it);
      else
        ++it;
    }
    return qty;
  }

  void check_not_crossing(Side side, int64_t price) const {
    if (side == Side::Buy) {
      auto a = best_ask();
      if (a && price >= *a)
        throw BookError(BookErrc::CrossedBookEvent,
                        "bid add at " + std::to_string(price) + " locks/crosses ask " +
                            std::to_string(*a));
    } else {
      auto b = best_bid();
      if (b && price <= *b)
        throw BookError(BookErrc::CrossedBookEvent,
                        "ask add at " + std::to_string(price) + " locks/crosses bid " +
                            std::to_string(*b));
    }
  }

  void insert_order(uint64_t id, Side side, int64_t price, uint64_t qty) {
    if (orders_.count(id) || consumed_.count(id))
      throw BookError(BookErrc::DuplicateOrderId, "duplicate order id " + std::to_string(id));
    if (price <= 0 || qty == 0)
      throw BookError(BookErrc::MalformedEvent, "add with non-positive price/quantity");
    check_not_crossing(side, price);
    Level& lvl = side == Side::Buy ? bids_[price] : asks_[price];
    lvl.queue.push_back({id, qty});
    lvl.total += qty;
    orders_[id] = {side, price};
  }

  void apply_add(const BookEvent& ev) { insert_order(ev.order_id, ev.side, ev.price, ev.quantity); }

  // Reduce a resting order by `qty`. Shares we already swept from the
  // order absorb any overshoot, so replaying the recorded stream after our
  // own consumption stays consistent.
  void reduce_order(uint64_t id, uint64_t qty, bool count_as_executed, int64_t ts) {
    auto cit = consumed_.find(id);
    const uint64_t consumed_by_us = cit == consumed_.end() ? 0 : cit->second.qty;
    auto oit = orders_.find(id);
    if (oit == orders_.end()) {
      if (consumed_by_us == 0)
        throw BookError(BookErrc::UnknownOrderId, "unknown order id " + std::to_string(id));
      ++consumed_event_skips_;
      if (count_as_executed) credit_execution(cit->second.side, cit->second.price, qty, ts);
      return;
    }
    const OrderRef ref = oit->second;
    Level* lvl = find_level(ref.side, ref.price);
    uint64_t remaining = 0;
    for (auto& e : lvl->queue)
      if (e.id == id) remaining = e.qty;
    if (qty > remaining + consumed_by_us)
      throw BookError(BookErrc::MalformedEvent,
                      "reduction exceeds remaining quantity for id " + std::to_string(id));
    const uint64_t applied = std::min(qty, remaining);
    for (auto it = lvl->queue.begin(); it != lvl->queue.end(); ++it) {
      if (it->id == id) {
        it->qty -= applied;
        lvl->total -= applied;
        if (it->qty == 0) {
          lvl->queue.erase(it);
          orders_.erase(id);
        }
        break;
      }
    }
    if (lvl->queue.empty()) erase_level(ref.side, ref.price);
    if (count_as_executed) credit_execution(ref.side, ref.price, qty, ts);
  }

  Level* find_level(Side side, int64_t price) {
    if (side == Side::Buy) {
      auto it = bids_.find(price);
      return it == bids_.end() ? nullptr : &it->second;
    }
    auto it = asks_.find(price);
    return it == asks_.end() ? nullptr : &it->second;
  }

  void erase_level(Side side, int64_t price) {
    if (side == Side::Buy)
      bids_.erase(price);
    else
      asks_.erase(price);
  }

  void credit_execution(Side resting_side, int64_t price, uint64_t qty, int64_t ts) {
    auto& vol = resting_side == Side::Buy ? exec_volume_bid_ : exec_volume_ask_;
    vol[price] += qty;
    notify_trackers(resting_side, price, vol[price], ts);
  }

  void notify_trackers(Side side, int64_t price, uint64_t cum_volume, int64_t ts) {
    auto it = resting_index_.find({static_cast<int>(side), price});
    if (it == resting_index_.end()) return;
    std::vector<int> handles = it->second;  // copy: fills may deactivate entries
    for (int h : handles) {
      TrackedOrder& t = tracked_[static_cast<size_t>(h)];
      if (!t.active) continue;
      const uint64_t since_join = cum_volume - t.exec_baseline;
      const uint64_t delta = on_market_trade(t, since_join, strict_);
      if (delta > 0) fills_.push_back({ts, price, delta, h});
      if (t.done) unindex_resting(h);
    }
  }

  void apply_execute(const BookEvent& ev) {
    if (ev.quantity == 0) throw BookError(BookErrc::MalformedEvent, "execute with zero quantity");
    reduce_order(ev.order_id, ev.quantity, /*count_as_executed=*/true, ev.timestamp);
  }

  void apply_cancel(const BookEvent& ev) {
    if (ev.quantity == 0) throw BookError(BookErrc::MalformedEvent, "cancel with zero quantity");
    reduce_order(ev.order_id, ev.quantity, /*count_as_executed=*/false, ev.timestamp);
  }

  void apply_delete(const BookEvent& ev) {
    auto cit = consumed_.find(ev.order_id);
    auto oit = orders_.find(ev.order_id);
    if (oit == orders_.end()) {
      if (cit == consumed_.end())
        throw BookError(BookErrc::UnknownOrderId,
                        "delete of unknown order id " + std::to_string(ev.order_id));
      ++consumed_event_skips_;
      return;
    }
    const OrderRef ref = oit->second;
    Level* lvl = find_level(ref.side, ref.price);
    for (auto it = lvl->queue.begin(); it != lvl->queue.end(); ++it) {
      if (it->id == ev.order_id) {
        lvl->total -= it->qty;
        lvl->queue.erase(it);
        break;
      }
    }
    orders_.erase(ev.order_id);
    if (lvl->queue.empty()) erase_level(ref.side, ref.price);
  }

  void apply_replace(const BookEvent& ev) {
    auto oit = orders_.find(ev.order_id);
    if (oit == orders_.end()) {
      if (!consumed_.count(ev.order_id))
        throw BookError(BookErrc::UnknownOrderId,
                        "replace of unknown order id " + std::to_string(ev.order_id));
      ++consumed_event_skips_;
    } else {
      BookEvent del = ev;
      del.kind = EventKind::Delete;
      apply_delete(del);
    }
    insert_order(ev.new_order_id, ev.side, ev.new_price, ev.new_quantity);
  }
};

}  // namespace mpcexec
