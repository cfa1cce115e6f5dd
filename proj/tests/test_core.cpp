#include <gtest/gtest.h>

#include <algorithm>

#include "armguard/core/alert.hpp"
#include "armguard/core/clock.hpp"
#include "armguard/core/rng.hpp"
#include "armguard/core/types.hpp"

using namespace armguard;

TEST(ValidateConfig, DefaultsAreValid) {
  DeviceConfig cfg;
  EXPECT_TRUE(validate_config(cfg).empty());
  EXPECT_EQ(cfg.k, 0.5);
  EXPECT_EQ(cfg.n, 5u);
  EXPECT_EQ(cfg.thresholds[WeaponClass::Gun], 1.05);
  EXPECT_EQ(cfg.thresholds[WeaponClass::Knife], 0.7);
  EXPECT_EQ(cfg.queue_capacity(), 6u);
}

TEST(ValidateConfig, KAtOneIsRejected) {
  DeviceConfig cfg;
  cfg.k = 1.0;
  auto errors = validate_config(cfg);
  ASSERT_EQ(errors.size(), 1u);
  EXPECT_EQ(errors[0], "k out of (0,1)");
}

TEST(ValidateConfig, ZeroWindowIsLegal) {
  DeviceConfig cfg;
  cfg.n = 0;
  EXPECT_TRUE(validate_config(cfg).empty());
  EXPECT_EQ(cfg.queue_capacity(), 1u);
}

TEST(ValidateConfig, ReportsEveryViolation) {
  DeviceConfig cfg;
  cfg.alpha = 0.0;
  cfg.k = 0.0;
  cfg.thresholds[WeaponClass::Knife] = -1.0;
  cfg.motion_ratio_min = 1.5;
  EXPECT_EQ(validate_config(cfg).size(), 4u);
}

TEST(ConfigJson, MergeOverlaysKnownKeysAndFlagsUnknownOnes) {
  DeviceConfig base;
  auto merged = merge_config(base, json{{"thresholds", {{"gun", 1.2}}}, {"k", 0.4}});
  EXPECT_EQ(merged.thresholds[WeaponClass::Gun], 1.2);
  EXPECT_EQ(merged.thresholds[WeaponClass::Knife], 0.7);
  EXPECT_EQ(merged.k, 0.4);

  std::vector<std::string> errors;
  merge_config(base, json{{"kk", 1}}, &errors);
  ASSERT_EQ(errors.size(), 1u);
  EXPECT_THROW(merge_config(base, json{{"n", -1}}), Error);

  EXPECT_EQ(config_from_json(to_json(merged)), merged);
}

TEST(Transition, FirstLegalEdge) {
  auto a = AlertEvent::create("A-1", {}, 10, "cloud");
  auto b = transition(a, AlertState::Verifying, "verifier", 20);
  EXPECT_EQ(b.state, AlertState::Verifying);
  ASSERT_EQ(b.history.size(), 2u);
  EXPECT_EQ(b.history.back(), (AlertHistoryEntry{AlertState::Verifying, 20, "verifier"}));
  EXPECT_EQ(a.state, AlertState::Pending) << "transition returns a new value";
}

TEST(Transition, HappyPath) {
  auto a = AlertEvent::create("A-1", {}, 0, "cloud");
  a = transition(a, AlertState::Verifying, "verifier", 1);
  a = transition(a, AlertState::Confirmed, "verifier", 2);
  a = transition(a, AlertState::Notified, "notifier", 3);
  EXPECT_EQ(a.state, AlertState::Notified);
  EXPECT_EQ(a.history.size(), 4u);
}

TEST(Transition, TerminalStatesRefuseEverything) {
  auto a = AlertEvent::create("A-1", {}, 0, "cloud");
  a = transition(a, AlertState::Verifying, "verifier", 1);
  a = transition(a, AlertState::Rejected, "verifier", 2);
  try {
    transition(a, AlertState::Notified, "notifier", 3);
    FAIL() << "expected IllegalTransition";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IllegalTransition);
  }
  EXPECT_THROW(transition(a, AlertState::Dismissed, "console", 3), Error);
}

TEST(Transition, DismissFromAnyNonTerminal) {
  for (AlertState s : {AlertState::Pending, AlertState::Verifying, AlertState::Confirmed}) {
    EXPECT_TRUE(is_legal_transition(s, AlertState::Dismissed));
  }
}

// Random fuzzing: whatever sequence of requests is thrown at an alert, the accepted
// ones always form a walk in the legal graph and the history only grows.
TEST(TransitionProperty, AcceptedPathsAreWalksInTheGraph) {
  const std::array<AlertState, 6> all{AlertState::Pending,  AlertState::Verifying, AlertState::Confirmed,
                                      AlertState::Rejected, AlertState::Notified,  AlertState::Dismissed};
  SplitMix64 rng(42);
  for (int trial = 0; trial < 2000; ++trial) {
    auto a = AlertEvent::create("A", {}, 0, "cloud");
    for (int step = 0; step < 12; ++step) {
      AlertState to = all[rng.uniform_int(0, 5)];
      const auto before = a.history.size();
      try {
        a = transition(a, to, "fuzz", step + 1);
        EXPECT_EQ(a.history.size(), before + 1);
      } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IllegalTransition);
        EXPECT_EQ(a.history.size(), before);
      }
    }
    for (std::size_t i = 1; i < a.history.size(); ++i) {
      EXPECT_TRUE(is_legal_transition(a.history[i - 1].state, a.history[i].state));
      EXPECT_LE(a.history[i - 1].at, a.history[i].at);
    }
  }
}

TEST(VirtualClock, OrdersByTimeThenInsertion) {
  VirtualClock clock;
  std::vector<int> order;
  clock.schedule_at(20, [&] { order.push_back(3); });
  clock.schedule_at(10, [&] { order.push_back(1); });
  clock.schedule_at(10, [&] { order.push_back(2); });
  auto cancelled = clock.schedule_at(15, [&] { order.push_back(99); });
  clock.cancel(cancelled);
  clock.run_all();
  EXPECT_EQ(order, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(clock.now(), 20);
  EXPECT_TRUE(clock.empty());
}

TEST(VirtualClock, NeverGoesBackwards) {
  VirtualClock clock;
  clock.run_until(100);
  EXPECT_EQ(clock.now(), 100);
  EXPECT_THROW(clock.schedule_at(50, [] {}), Error);
  clock.schedule_after(5, [&] { clock.schedule_after(0, [] {}); });
  clock.run_until(200);
  EXPECT_EQ(clock.now(), 200);
}

TEST(VirtualClock, ReplayIsIdentical) {
  auto run = [](std::uint64_t seed) {
    VirtualClock clock;
    SplitMix64 rng(seed);
    std::string log;
    std::function<void(int)> spawn = [&](int depth) {
      log += std::to_string(clock.now()) + ":" + std::to_string(depth) + ";";
      if (depth < 6) {
        for (int i = 0; i < 2; ++i) {
          clock.schedule_after(rng.uniform_int(0, 50), [&, depth] { spawn(depth + 1); });
        }
      }
    };
    clock.schedule_at(0, [&] { spawn(0); });
    clock.run_all();
    return log;
  };
  EXPECT_EQ(run(7), run(7));
  EXPECT_NE(run(7), run(8));
}

TEST(SplitMix64, MatchesReferenceSequence) {
  // First outputs for seed 0, as published with the reference implementation.
  SplitMix64 rng(0);
  EXPECT_EQ(rng.next(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(rng.next(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(rng.next(), 0x06C45D188009454FULL);
}
