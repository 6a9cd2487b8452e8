#include <random>

#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace cpsattack {
namespace {

using testing::action;
using testing::edge;
using testing::entry;
using testing::node;

// Keeps system, database and model alive together.
struct World {
  CpsSystem system;
  ActionDatabase db;
  AttackModel model;

  World(CpsSystem s, ActionDatabase d, EngineOptions o = {})
      : system(std::move(s)), db(std::move(d)), model(system, db, o) {}

  AttackState start(double knowledge = 5) const {
    return AttackState::initial(model, model.make_attacker(testing::attacker("X", knowledge)));
  }
};

TEST(Distance, IdenticalProfilesAreZero) {
  ScaledProfile p = {0.3, std::string("Direct"), 0.9};
  EXPECT_EQ(distance(p, p, std::vector<double>{0.5, 1.0, 0.2}), 0.0);
}

TEST(Distance, ThreeFourFive) {
  EXPECT_DOUBLE_EQ(distance({0.0, 0.0}, {0.6, 0.8}, std::vector<double>{1, 1}), 1.0);
}

TEST(Distance, UnorderedSlotsContributeMismatch) {
  ScaledProfile a = {std::string("Direct")}, b = {std::string("Offsite")};
  EXPECT_EQ(distance(a, b, std::vector<double>{1}), 1.0);
  EXPECT_EQ(distance(a, a, std::vector<double>{1}), 0.0);
}

TEST(Distance, LowerCriticalityIncreasesDistance) {
  const ScaledProfile a = {0.2, 0.5}, b = {0.7, 0.5};
  const double full = distance(a, b, std::vector<double>{1.0, 1.0});
  const double half = distance(a, b, std::vector<double>{0.5, 1.0});
  EXPECT_GT(half, full);
  EXPECT_DOUBLE_EQ(half, 2 * full);
}

TEST(Distance, Errors) {
  EXPECT_THROW(distance({0.1}, {0.1, 0.2}, std::vector<double>{1}), DomainError);
  EXPECT_THROW(distance({0.1}, {std::string("x")}, std::vector<double>{1}), DomainError);
  EXPECT_THROW(distance({0.1}, {0.2}, std::vector<double>{0.0}), DomainError);
}

TEST(Scores, Examples) {
  auto s = scores(std::vector<double>{0.2, 0.3, 0.5});
  EXPECT_NEAR(s[0], 0.8, 1e-15);
  EXPECT_NEAR(s[1], 0.7, 1e-15);
  EXPECT_NEAR(s[2], 0.5, 1e-15);
  EXPECT_EQ(scores(std::vector<double>{2.5, 2.5}), (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(scores(std::vector<double>{0, 0}), (std::vector<double>{1, 1}));
  EXPECT_EQ(scores(std::vector<double>{0.7}), std::vector<double>{1});
  EXPECT_THROW(scores(std::vector<double>{0.1, -0.1}), DomainError);
  EXPECT_THROW(scores(std::vector<double>{}), DomainError);
}

TEST(Probabilities, Examples) {
  auto p = probabilities(std::vector<double>{0.8, 0.7, 0.5});
  EXPECT_NEAR(p[0], 0.40, 1e-15);
  EXPECT_NEAR(p[1], 0.35, 1e-15);
  EXPECT_NEAR(p[2], 0.25, 1e-15);
  EXPECT_EQ(probabilities(std::vector<double>{1}), std::vector<double>{1});
  EXPECT_EQ(probabilities(std::vector<double>{0.3, 0.3, 0.3, 0.3}),
            (std::vector<double>{0.25, 0.25, 0.25, 0.25}));
  EXPECT_THROW(probabilities(std::vector<double>{0, 0}), DomainError);
}

TEST(ScoresProbabilities, PropertyOrderingSumsAndScaleInvariance) {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> u(0.001, 3.0), c(0.01, 100);
  for (int i = 0; i < 5000; ++i) {
    std::vector<double> d(2 + gen() % 8);
    for (auto& x : d) x = u(gen);
    const auto s = scores(d);
    const auto p = probabilities(s);
    double ss = 0, sp = 0;
    for (double x : s) ss += x;
    for (double x : p) sp += x;
    EXPECT_NEAR(ss, static_cast<double>(d.size()) - 1.0, 1e-9);
    EXPECT_NEAR(sp, 1.0, 1e-9);
    for (std::size_t a = 0; a < d.size(); ++a)
      for (std::size_t b = 0; b < d.size(); ++b)
        if (d[a] < d[b]) {
          EXPECT_GT(p[a], p[b]);
        }
    const double k = c(gen);
    std::vector<double> scaled;
    for (double x : d) scaled.push_back(x * k);
    const auto q = probabilities(scores(scaled));
    for (std::size_t a = 0; a < d.size(); ++a) EXPECT_NEAR(p[a], q[a], 1e-12);
  }
}

TEST(SampleAction, SingleCandidateAlwaysChosen) {
  Rng rng(1);
  std::vector<Candidate> c = {{"only", 0, 1, 1}};
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_action(c, rng), "only");
  EXPECT_THROW(sample_action({}, rng), DomainError);
}

TEST(SampleAction, NinetyTenSplit) {
  Rng rng(2);
  std::vector<Candidate> c = {{"a", 0, 0, 0.9}, {"b", 0, 0, 0.1}};
  int first = 0;
  for (int i = 0; i < 10000; ++i) first += sample_action(c, rng) == "a";
  EXPECT_NEAR(first, 9000, 150);
}

TEST(SampleAction, ZeroProbabilityNeverChosenAndSeedReproducible) {
  std::vector<Candidate> c = {{"a", 0, 0, 0.0}, {"b", 0, 0, 1.0}, {"c", 0, 0, 0.0}};
  Rng r1(8), r2(8);
  for (int i = 0; i < 1000; ++i) {
    auto x = sample_action(c, r1);
    EXPECT_EQ(x, "b");
    EXPECT_EQ(x, sample_action(c, r2));
  }
}

World line_world() {
  // N1 (entry) -> N2 (target); a removable-media action never reaches N2.
  CpsSystem sys({node("N1", {{"role", "ws"}}), node("N2", {{"role", "plc"}}, true)},
                {entry("E1", "N1", {"usb", "net"}), edge("L1", "N1", "N2", {"net"})});
  ActionDatabase db(testing::knowledge_schema(),
                    {action("USB", 4, {}, {"usb"}), action("NET", 6, {}, {"net"}),
                     action("PLC", 5, {{{"role", {"plc"}}}}, {"net"})});
  return World(std::move(sys), std::move(db));
}

TEST(FilterValid, FreshMatchingActionOverEntryEdgeIncluded) {
  World w = line_world();
  EXPECT_EQ(filter_valid(w.start(), "N1"), (std::vector<ActionId>{"NET", "USB"}));
}

TEST(FilterValid, AttemptedActionExcluded) {
  World w = line_world();
  auto s = apply_decision(w.start(), "N1", "USB", Outcome::failure);
  EXPECT_EQ(filter_valid(s, "N1"), std::vector<ActionId>{"NET"});
}

TEST(FilterValid, ChannelMismatchExcluded) {
  World w = line_world();
  auto s = apply_decision(w.start(), "N1", "NET", Outcome::success);
  EXPECT_EQ(filter_valid(s, "N2"), (std::vector<ActionId>{"NET", "PLC"}));  // USB has no usb path
}

TEST(FilterValid, SourceMustBeOwnedOrExternal) {
  World w = line_world();
  auto s = w.start();
  s.knowledge.known_nodes.insert("N2");
  s.knowledge.known_edges.insert("L1");
  EXPECT_TRUE(filter_valid(s, "N2").empty());
}

TEST(FilterValid, PrerequisitesNeedEarlierSuccess) {
  CpsSystem sys({node("N1"), node("N2", {}, true)}, {entry("E1", "N1"), edge("L1", "N1", "N2")});
  auto chained = action("CHAIN", 5);
  chained.prerequisites = {"FIRST"};
  World w(std::move(sys), ActionDatabase(testing::knowledge_schema(), {action("FIRST", 5), chained}));
  auto s = w.start();
  EXPECT_EQ(filter_valid(s, "N1"), std::vector<ActionId>{"FIRST"});
  auto after = apply_decision(s, "N1", "FIRST", Outcome::success);
  EXPECT_EQ(filter_valid(after, "N2"), (std::vector<ActionId>{"CHAIN", "FIRST"}));
}

TEST(FilterValid, SeparatePrerequisiteFilterGivesSameValidSet) {
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 200; ++trial) {
    auto sys = testing::random_system(gen);
    auto db = testing::random_db(gen);
    AttackModel a(sys, db), b(sys, db, {PrerequisiteMode::separate_filter});
    auto sa = AttackState::initial(a, Attacker{"x", {0.5}});
    auto sb = AttackState::initial(b, Attacker{"x", {0.5}});
    for (const auto& n : sa.knowledge.known_nodes) {
      auto fa = compute_filters(sa, n), fb = compute_filters(sb, n);
      EXPECT_EQ(fa.valid, fb.valid);
      EXPECT_TRUE(fa.prerequisites.empty());
      EXPECT_GE(fb.target.size(), fa.target.size());
    }
  }
}

// Drives a random state forward, then compares filter_valid with the
// brute-force oracle on every known node.
TEST(FilterValid, PropertyMatchesBruteForceOracle) {
  std::mt19937_64 gen(1234);
  for (int trial = 0; trial < 300; ++trial) {
    auto sys = testing::random_system(gen);
    auto db = testing::random_db(gen);
    AttackModel model(sys, db);
    AttackState s = AttackState::initial(model, Attacker{"x", {0.5}});
    Rng rng(gen());
    const int steps = static_cast<int>(gen() % 6);
    for (int i = 0; i < steps; ++i) {
      auto r = step(s, rng);
      if (!r) break;
      s = r->state;
    }
    for (const auto& n : s.knowledge.known_nodes)
      EXPECT_EQ(filter_valid(s, n), testing::brute_force_valid(sys, db, s.knowledge, s.history, n));
  }
}

TEST(SelectTarget, SingleCandidate) {
  World w = line_world();
  Rng rng(1);
  EXPECT_EQ(select_target(w.start(), rng), NodeId("N1"));
}

TEST(SelectTarget, StickyWhileActionsRemain) {
  CpsSystem sys({node("N1"), node("N2"), node("N3", {}, true)},
                {entry("E1", "N1"), entry("E2", "N2"), edge("L1", "N1", "N3"), edge("L2", "N2", "N3")});
  World w(std::move(sys), ActionDatabase(testing::knowledge_schema(), {action("A", 1), action("B", 2)}));
  auto s = apply_decision(w.start(), "N2", "A", Outcome::failure);
  ASSERT_EQ(s.current_target, NodeId("N2"));
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    EXPECT_EQ(select_target(s, rng), NodeId("N2"));
  }
  // Exhausting N2 releases the lock.
  auto done = apply_decision(s, "N2", "B", Outcome::failure);
  Rng rng(3);
  EXPECT_EQ(select_target(done, rng), NodeId("N1"));
}

TEST(SelectTarget, UniformAmongValidNodes) {
  CpsSystem sys({node("N1"), node("N2"), node("N3", {}, true)},
                {entry("E1", "N1"), entry("E2", "N2"), entry("E3", "N3")});
  World w(std::move(sys), ActionDatabase(testing::knowledge_schema(), {action("A", 1)}));
  Rng rng(4);
  std::map<NodeId, int> counts;
  for (int i = 0; i < 30000; ++i) ++counts[*select_target(w.start(), rng)];
  for (const auto& [n, c] : counts) EXPECT_NEAR(c, 10000, 5 * std::sqrt(30000 * (1.0 / 3) * (2.0 / 3))) << n;
}

TEST(SelectTarget, NoneWhenEverythingCompromised) {
  World w = line_world();
  auto s = w.start();
  s = apply_decision(s, "N1", "NET", Outcome::success);
  s = apply_decision(s, "N2", "PLC", Outcome::success);
  Rng rng(1);
  EXPECT_EQ(select_target(s, rng), std::nullopt);
  EXPECT_FALSE(step(s, rng).has_value());
}

TEST(Step, CertainSuccessGrowsKnowledge) {
  CpsSystem sys({node("N1"), node("N2", {}, true)}, {entry("E1", "N1"), edge("L1", "N1", "N2")});
  World w(std::move(sys), ActionDatabase(testing::knowledge_schema(), {action("A", 5)}));
  Rng rng(9);
  auto r = step(w.start(), rng);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->record.target, "N1");
  EXPECT_EQ(r->record.chosen, "A");
  EXPECT_EQ(r->record.chosen_probability, 1.0);
  EXPECT_EQ(r->record.outcome, Outcome::success);
  EXPECT_EQ(r->record.via_edge, EdgeId("E1"));
  EXPECT_EQ(r->record.source, kExternalOrigin);
  EXPECT_TRUE(r->state.knowledge.knows_node("N2"));
  EXPECT_TRUE(r->state.knowledge.is_compromised("N1"));
}

TEST(Step, FailureExhaustsTheAction) {
  CpsSystem sys({node("N1", {}, true)}, {entry("E1", "N1")});
  World w(std::move(sys), ActionDatabase(testing::knowledge_schema(), {action("A", 5, {}, {"net"}, 0.0)}));
  Rng rng(9);
  auto r = step(w.start(), rng);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->record.outcome, Outcome::failure);
  EXPECT_FALSE(step(r->state, rng).has_value());
}

TEST(Step, NoActionsEndsImmediately) {
  CpsSystem sys({node("N1", {}, true)}, {entry("E1", "N1")});
  World w(std::move(sys), ActionDatabase(testing::knowledge_schema(), {action("A", 5, {}, {"usb"})}));
  Rng rng(9);
  EXPECT_FALSE(step(w.start(), rng).has_value());
}

// Random episodes: probabilities normalise, history only grows, no
// (node, action) pair repeats, and every episode ends.
TEST(Step, PropertyEpisodeInvariants) {
  std::mt19937_64 gen(555);
  for (int trial = 0; trial < 500; ++trial) {
    auto sys = testing::random_system(gen);
    auto db = testing::random_db(gen);
    AttackModel model(sys, db);
    AttackState s = AttackState::initial(model, Attacker{"x", {0.4}});
    Rng rng(gen());
    std::set<std::pair<NodeId, ActionId>> seen;
    std::size_t bound = sys.nodes().size() * db.size();
    std::size_t n = 0;
    while (auto r = step(s, rng)) {
      double sum = 0;
      for (const auto& c : r->record.candidates) sum += c.probability;
      EXPECT_NEAR(sum, 1.0, 1e-9);
      EXPECT_TRUE(seen.emplace(r->record.target, r->record.chosen).second);
      for (const auto& [node, attempts] : s.history)
        for (const auto& [a, _] : attempts) EXPECT_TRUE(r->state.attempted(node, a));
      for (const auto& [node, _] : r->state.history) EXPECT_TRUE(r->state.knowledge.knows_node(node));
      s = r->state;
      ASSERT_LE(++n, bound);
    }
  }
}

}  // namespace
}  // namespace cpsattack
