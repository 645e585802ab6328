#include <gtest/gtest.h>

#include "scaletrain/schedule.hpp"

using namespace scaletrain;

TEST(Schedule, OverFeatRules) {
  const auto s = TrainingSchedule::overfeat();
  EXPECT_EQ(lr_at(s, 1), (LearningRule{1e-2, 1e-4}));
  EXPECT_EQ(lr_at(s, 18), (LearningRule{1e-2, 1e-4}));
  EXPECT_EQ(lr_at(s, 20), (LearningRule{5e-3, 1e-4}));
  EXPECT_EQ(lr_at(s, 29), (LearningRule{5e-3, 1e-4}));
  EXPECT_EQ(lr_at(s, 30), (LearningRule{1e-3, 0}));
  EXPECT_EQ(lr_at(s, 53), (LearningRule{1e-4, 0}));
  EXPECT_EQ(lr_at(s, 65), (LearningRule{1e-4, 0}));
  EXPECT_THROW(lr_at(s, 0), DomainError);
  EXPECT_THROW(lr_at(s, 66), DomainError);
}

TEST(Schedule, RateNeverIncreases) {
  const auto s = TrainingSchedule::overfeat();
  for (std::size_t e = 2; e <= s.total_epochs; ++e) {
    EXPECT_LE(lr_at(s, e).lr, lr_at(s, e - 1).lr);
    EXPECT_LE(lr_at(s, e).wd, lr_at(s, e - 1).wd);
  }
}

TEST(Schedule, ValidationRejectsBadMilestones) {
  TrainingSchedule s;
  s.milestones = {{1, 0.1}, {5, 0.2}};
  EXPECT_THROW(s.validate(), UsageError);
  s.milestones = {{1, 0.1}, {5, 0.01}, {5, 0.001}};
  EXPECT_THROW(s.validate(), UsageError);
  s.milestones = {{2, 0.1}};
  EXPECT_THROW(s.validate(), UsageError);
  s.milestones = {{1, 0.1}};
  s.momentum = 1.0;
  EXPECT_THROW(s.validate(), UsageError);
}

TEST(Schedule, FingerprintTracksEveryField) {
  const auto a = TrainingSchedule::overfeat();
  auto b = a;
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  b.batch_size = 64;
  EXPECT_NE(a.fingerprint(), b.fingerprint());
  b = a;
  b.milestones[2].rate = 2e-3;
  EXPECT_NE(a.fingerprint(), b.fingerprint());
}

TEST(Schedule, NextRuleChange) {
  const auto s = TrainingSchedule::overfeat();
  EXPECT_EQ(next_rule_change(s, 5), 19u);
  EXPECT_EQ(next_rule_change(s, 19), 30u);
  EXPECT_EQ(next_rule_change(s, 53), std::nullopt);
}

TEST(Plateau, Examples) {
  const std::vector<double> rising{10, 20, 30, 40, 50};
  EXPECT_FALSE(plateau_stop(rising, 3, 0.1));
  const std::vector<double> flat{40, 40, 40, 40, 40};
  EXPECT_TRUE(plateau_stop(flat, 3, 0.1));
  const std::vector<double> slow{50, 55, 55.05, 55.08};
  EXPECT_TRUE(plateau_stop(slow, 2, 0.1));
  EXPECT_FALSE(plateau_stop(std::span(slow).first(3), 2, 0.1));
  EXPECT_FALSE(plateau_stop(flat, 1, 0.1));
}

TEST(ExtraController, HoldsUntilStrictDrop) {
  ExtraTrainController c;
  EXPECT_FALSE(c.observe(50));
  EXPECT_FALSE(c.observe(52));
  EXPECT_EQ(c.epochs_held(), 2u);
  EXPECT_TRUE(c.observe(51));
  EXPECT_EQ(c.mode(), ExtraTrainController::Mode::Resumed);
  EXPECT_EQ(c.epochs_held(), 2u);
  EXPECT_FALSE(c.observe(10));
  EXPECT_FALSE(c.observe(90));
}

TEST(ExtraController, EqualAccuracyIsNotADrop) {
  ExtraTrainController c;
  EXPECT_FALSE(c.observe(50));
  EXPECT_FALSE(c.observe(50));
  EXPECT_TRUE(c.holding());
}

TEST(ExtraController, CapFiresOnce) {
  ExtraTrainController c(3);
  EXPECT_FALSE(c.observe(1));
  EXPECT_FALSE(c.observe(2));
  EXPECT_TRUE(c.observe(3));
  EXPECT_FALSE(c.observe(0));
}
