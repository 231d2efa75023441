#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mpcexec/orderbook.hpp"

using namespace mpcexec;

namespace {

// Book with zero latency so submissions act immediately once time moves.
OrderBook instant_book() { return OrderBook(0); }

void seed_two_sided(OrderBook& b, int64_t ts = 0) {
  b.apply_event(BookEvent::add(ts, 1, Side::Buy, 100, 50));
  b.apply_event(BookEvent::add(ts, 2, Side::Sell, 101, 50));
  b.apply_event(BookEvent::add(ts, 3, Side::Sell, 102, 50));
}

}  // namespace

TEST_CASE("apply_event basics") {
  OrderBook b;

  SECTION("add to empty book sets the touch") {
    b.apply_event(BookEvent::add(0, 1, Side::Buy, 100, 50));
    REQUIRE(b.best_bid() == 100);
    REQUIRE(b.resting_at(Side::Buy, 100) == 50);
    REQUIRE_FALSE(b.best_ask().has_value());
  }

  SECTION("execute reduces the resting order") {
    b.apply_event(BookEvent::add(0, 1, Side::Buy, 100, 50));
    b.apply_event(BookEvent::execute(1, 1, Side::Buy, 100, 20));
    REQUIRE(b.resting_at(Side::Buy, 100) == 30);
    REQUIRE(b.executed_at(Side::Buy, 100) == 20);
  }

  SECTION("delete of the only ask empties the side") {
    b.apply_event(BookEvent::add(0, 1, Side::Sell, 105, 10));
    REQUIRE(b.best_ask() == 105);
    b.apply_event(BookEvent::remove(1, 1, Side::Sell, 105));
    REQUIRE_FALSE(b.best_ask().has_value());
  }

  SECTION("replace moves the order to the new level's tail") {
    b.apply_event(BookEvent::add(0, 1, Side::Sell, 105, 10));
    b.apply_event(BookEvent::add(0, 2, Side::Sell, 106, 5));
    b.apply_event(BookEvent::replace(1, 1, Side::Sell, 105, 9, 106, 7));
    REQUIRE(b.best_ask() == 106);
    REQUIRE(b.resting_at(Side::Sell, 106) == 12);
  }
}

TEST_CASE("apply_event typed errors") {
  OrderBook b;
  b.apply_event(BookEvent::add(10, 1, Side::Buy, 100, 50));

  SECTION("unknown order id") {
    try {
      b.apply_event(BookEvent::execute(11, 99, Side::Buy, 100, 5));
      FAIL("expected BookError");
    } catch (const BookError& e) {
      REQUIRE(e.code == BookErrc::UnknownOrderId);
    }
  }

  SECTION("crossing add rejected") {
    b.apply_event(BookEvent::add(11, 2, Side::Sell, 102, 10));
    try {
      b.apply_event(BookEvent::add(12, 3, Side::Buy, 102, 10));
      FAIL("expected BookError");
    } catch (const BookError& e) {
      REQUIRE(e.code == BookErrc::CrossedBookEvent);
    }
  }

  SECTION("non-monotone timestamp rejected") {
    try {
      b.apply_event(BookEvent::add(9, 4, Side::Buy, 99, 10));
      FAIL("expected BookError");
    } catch (const BookError& e) {
      REQUIRE(e.code == BookErrc::NonMonotoneTimestamp);
    }
  }

  SECTION("duplicate add rejected") {
    try {
      b.apply_event(BookEvent::add(11, 1, Side::Buy, 99, 10));
      FAIL("expected BookError");
    } catch (const BookError& e) {
      REQUIRE(e.code == BookErrc::DuplicateOrderId);
    }
  }
}

TEST_CASE("market order sweeps levels in price order") {
  auto b = instant_book();
  seed_two_sided(b);

  SECTION("two-level walk") {
    int h = b.submit_market(Side::Buy, 70, 1);
    b.advance_to(1);
    auto fills = b.drain_fills();
    REQUIRE(fills.size() == 2);
    CHECK(fills[0].price == 101);
    CHECK(fills[0].quantity == 50);
    CHECK(fills[1].price == 102);
    CHECK(fills[1].quantity == 20);
    CHECK(b.tracked(h).done);
    CHECK(b.resting_at(Side::Sell, 102) == 30);
  }

  SECTION("single-level fill") {
    b.submit_market(Side::Buy, 10, 1);
    b.advance_to(1);
    auto fills = b.drain_fills();
    REQUIRE(fills.size() == 1);
    CHECK(fills[0].price == 101);
    CHECK(fills[0].quantity == 10);
  }

  SECTION("empty opposite side yields zero fills") {
    OrderBook e(0);
    e.apply_event(BookEvent::add(0, 1, Side::Buy, 100, 50));
    int h = e.submit_market(Side::Buy, 10, 1);
    e.advance_to(1);
    CHECK(e.drain_fills().empty());
    CHECK(e.tracked(h).done);
  }
}

TEST_CASE("latency: far touch moving away strands the order") {
  OrderBook b(10);  // 10 ns latency for the script
  seed_two_sided(b);
  int h = b.submit_market(Side::Buy, 40, 1);  // snapshots far touch 101
  // During the latency window the 101 level disappears.
  b.apply_event(BookEvent::remove(5, 2, Side::Sell, 101));
  b.advance_to(11);
  CHECK(b.drain_fills().empty());
  const auto& t = b.tracked(h);
  CHECK(t.active);
  CHECK(t.price == 101);
  CHECK(t.filled == 0);

  SECTION("the stranded order fills later from executed volume at its price") {
    // Public bids re-form at 101 and trade.
    b.apply_event(BookEvent::add(20, 10, Side::Buy, 101, 30));
    b.apply_event(BookEvent::execute(21, 10, Side::Buy, 101, 30));
    // queue_ahead was 0 (no public bids at 101 when it rested)
    auto fills = b.drain_fills();
    REQUIRE(fills.size() == 1);
    CHECK(fills[0].price == 101);
    CHECK(fills[0].quantity == 30);
  }
}

TEST_CASE("latency invariant: no interaction before submit + latency") {
  OrderBook b(1'000'000);
  seed_two_sided(b);
  b.submit_market(Side::Buy, 10, 100);
  b.advance_to(100 + 999'999);
  CHECK(b.drain_fills().empty());
  b.advance_to(100 + 1'000'000);
  CHECK(b.drain_fills().size() == 1);
}

TEST_CASE("limit order joins with correct queue position") {
  auto b = instant_book();
  b.apply_event(BookEvent::add(0, 1, Side::Buy, 100, 200));
  b.apply_event(BookEvent::add(0, 2, Side::Sell, 103, 50));

  SECTION("join existing level") {
    int h = b.submit_limit(Side::Buy, 100, 25, 1);
    b.advance_to(1);
    CHECK(b.tracked(h).queue_ahead == 200);
  }

  SECTION("create new level") {
    int h = b.submit_limit(Side::Buy, 99, 25, 1);
    b.advance_to(1);
    CHECK(b.tracked(h).queue_ahead == 0);
  }

  SECTION("a second shadow order at the same price queues behind the first") {
    int h1 = b.submit_limit(Side::Buy, 100, 25, 1);
    b.advance_to(1);
    int h2 = b.submit_limit(Side::Buy, 100, 25, 2);
    b.advance_to(2);
    CHECK(b.tracked(h1).queue_ahead == 200);
    CHECK(b.tracked(h2).queue_ahead == 225);
  }

  SECTION("marketable buy limit executes its marketable portion") {
    int h = b.submit_limit(Side::Buy, 103, 80, 1);
    b.advance_to(1);
    auto fills = b.drain_fills();
    REQUIRE(fills.size() == 1);
    CHECK(fills[0].price == 103);
    CHECK(fills[0].quantity == 50);
    const auto& t = b.tracked(h);
    CHECK(t.active);
    CHECK(t.quantity == 30);  // residual rests at 103
    CHECK(t.price == 103);
  }
}

TEST_CASE("on_market_trade clamp rule") {
  TrackedOrder t;
  t.active = true;
  t.quantity = 50;
  t.queue_ahead = 100;

  SECTION("volume up to queue_ahead yields nothing") {
    CHECK(on_market_trade(t, 100) == 0);
    CHECK(t.filled == 0);
  }

  SECTION("partial penetration") {
    CHECK(on_market_trade(t, 130) == 30);
    CHECK(t.filled == 30);
    CHECK(t.active);
  }

  SECTION("full penetration completes the order") {
    CHECK(on_market_trade(t, 200) == 50);
    CHECK(t.filled == 50);
    CHECK(t.done);
  }

  SECTION("granularity independence") {
    TrackedOrder u = t;
    CHECK(on_market_trade(t, 110) == 10);
    CHECK(on_market_trade(t, 140) == 30);
    CHECK(on_market_trade(t, 140) == 0);  // repeated notify is a no-op
    uint64_t batched = on_market_trade(u, 140);
    CHECK(t.filled == batched);
  }

  SECTION("inactive order is an error") {
    t.active = false;
    try {
      on_market_trade(t, 500);
      FAIL("expected BookError");
    } catch (const BookError& e) {
      REQUIRE(e.code == BookErrc::InactiveOrder);
    }
  }
}

TEST_CASE("strict queue-fill variant is all-or-nothing past the order") {
  TrackedOrder t;
  t.active = true;
  t.quantity = 50;
  t.queue_ahead = 100;
  CHECK(on_market_trade(t, 130, /*strict=*/true) == 0);
  CHECK(on_market_trade(t, 149, /*strict=*/true) == 0);
  CHECK(on_market_trade(t, 150, /*strict=*/true) == 50);
}

TEST_CASE("cancel returns the residual") {
  auto b = instant_book();
  b.apply_event(BookEvent::add(0, 1, Side::Buy, 100, 100));

  SECTION("unfilled") {
    int h = b.submit_limit(Side::Buy, 100, 50, 1);
    b.advance_to(1);
    CHECK(b.cancel(h) == 50);
    CHECK(b.tracked(h).done);
  }

  SECTION("partially filled") {
    int h = b.submit_limit(Side::Buy, 100, 50, 1);
    b.advance_to(1);
    b.apply_event(BookEvent::execute(2, 1, Side::Buy, 100, 100));
    b.apply_event(BookEvent::add(3, 5, Side::Buy, 100, 200));
    b.apply_event(BookEvent::execute(4, 5, Side::Buy, 100, 30));
    // 130 executed vs queue_ahead 100: 30 credited
    CHECK(b.cancel(h) == 20);
  }

  SECTION("fully filled leaves nothing to cancel") {
    int h = b.submit_limit(Side::Buy, 100, 50, 1);
    b.advance_to(1);
    b.apply_event(BookEvent::execute(2, 1, Side::Buy, 100, 100));
    b.apply_event(BookEvent::add(3, 5, Side::Buy, 100, 200));
    b.apply_event(BookEvent::execute(4, 5, Side::Buy, 100, 50));
    CHECK(b.tracked(h).filled == 50);
    try {
      b.cancel(h);
      FAIL("expected BookError");
    } catch (const BookError& e) {
      REQUIRE(e.code == BookErrc::InactiveOrder);
    }
  }

  SECTION("pending submissions can be withdrawn whole") {
    OrderBook lag(1'000'000);
    lag.apply_event(BookEvent::add(0, 7, Side::Buy, 100, 10));
    int h = lag.submit_limit(Side::Buy, 100, 50, 1);
    CHECK(lag.cancel(h) == 50);
    lag.advance_to(2'000'000);
    CHECK(lag.drain_fills().empty());
  }
}

TEST_CASE("price-time priority between two shadow orders") {
  auto b = instant_book();
  b.apply_event(BookEvent::add(0, 1, Side::Buy, 100, 60));
  int early = b.submit_limit(Side::Buy, 100, 40, 1);
  b.advance_to(1);
  int late = b.submit_limit(Side::Buy, 100, 40, 2);
  b.advance_to(2);

  uint64_t volume = 0;
  std::mt19937 rng(7);
  int64_t ts = 3;
  uint64_t feeder_id = 100;
  // Keep feeding and executing public volume; at every point the earlier
  // order's fill must be >= the later one's.
  for (int i = 0; i < 40; ++i) {
    uint64_t chunk = 1 + rng() % 10;
    b.apply_event(BookEvent::add(ts, ++feeder_id, Side::Buy, 100, chunk));
    b.apply_event(BookEvent::execute(ts + 1, feeder_id, Side::Buy, 100, chunk));
    volume += chunk;
    ts += 2;
    REQUIRE(b.tracked(early).filled >= b.tracked(late).filled);
  }
  REQUIRE(volume > 140);  // enough to fill both
  CHECK(b.tracked(early).filled == 40);
  CHECK(b.tracked(late).filled == 40);
}

TEST_CASE("conservation: level inflow equals outflow plus residue") {
  std::mt19937_64 rng(2024);
  OrderBook b(0);
  const int64_t price = 500;
  uint64_t added = 0, executed = 0, cancelled = 0, deleted = 0, swept = 0;
  std::vector<std::pair<uint64_t, uint64_t>> live;  // id, remaining
  uint64_t next_id = 1;
  int64_t ts = 0;

  for (int i = 0; i < 2000; ++i) {
    ++ts;
    const int action = static_cast<int>(rng() % 5);
    if (action <= 1 || live.empty()) {
      uint64_t q = 1 + rng() % 50;
      b.apply_event(BookEvent::add(ts, next_id, Side::Sell, price, q));
      live.push_back({next_id, q});
      added += q;
      ++next_id;
    } else if (action == 2) {
      auto& [id, rem] = live.front();
      uint64_t q = 1 + rng() % rem;
      b.apply_event(BookEvent::execute(ts, id, Side::Sell, price, q));
      executed += q;
      rem -= q;
      if (rem == 0) live.erase(live.begin());
    } else if (action == 3) {
      size_t k = rng() % live.size();
      auto& [id, rem] = live[k];
      uint64_t q = 1 + rng() % rem;
      b.apply_event(BookEvent::cancel(ts, id, Side::Sell, price, q));
      cancelled += q;
      rem -= q;
      if (rem == 0) live.erase(live.begin() + static_cast<long>(k));
    } else if (action == 4 && rng() % 3 == 0) {
      // our own sweep consumes from this level
      b.apply_event(BookEvent::add(ts, 900'000 + i, Side::Buy, price - 10, 1));
      uint64_t avail = b.resting_at(Side::Sell, price);
      if (avail > 0) {
        uint64_t q = 1 + rng() % std::min<uint64_t>(avail, 20);
        b.submit_market(Side::Buy, q, ts);
        b.advance_to(ts);
        for (const auto& f : b.drain_fills()) {
          swept += f.quantity;
          // mirror the consumption in the reference queue
          uint64_t left = f.quantity;
          while (left > 0) {
            auto& [id, rem] = live.front();
            uint64_t take = std::min(left, rem);
            rem -= take;
            left -= take;
            if (rem == 0) live.erase(live.begin());
          }
        }
      }
    } else {
      size_t k = rng() % live.size();
      auto [id, rem] = live[k];
      b.apply_event(BookEvent::remove(ts, id, Side::Sell, price));
      deleted += rem;
      live.erase(live.begin() + static_cast<long>(k));
    }
    uint64_t residue = b.resting_at(Side::Sell, price);
    REQUIRE(added == executed + cancelled + deleted + swept + residue);
  }
}

TEST_CASE("public events referencing orders we consumed are tolerated") {
  auto b = instant_book();
  seed_two_sided(b);
  b.submit_market(Side::Buy, 50, 1);  // consumes order 2 entirely
  b.advance_to(1);
  b.drain_fills();
  // The recorded stream still executes and deletes order 2.
  b.apply_event(BookEvent::execute(5, 2, Side::Sell, 101, 30));
  b.apply_event(BookEvent::remove(6, 2, Side::Sell, 101));
  CHECK(b.consumed_event_skips() == 2);
  // Truly unknown ids still fail.
  try {
    b.apply_event(BookEvent::execute(7, 999, Side::Sell, 101, 1));
    FAIL("expected BookError");
  } catch (const BookError& e) {
    REQUIRE(e.code == BookErrc::UnknownOrderId);
  }
}
