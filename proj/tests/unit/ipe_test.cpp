#include <gtest/gtest.h>

#include "ipe/core/parallel.hpp"
#include "ipe/predict/ipe.hpp"

using namespace ipe;

namespace {

IpeParams params(double sigma, double phi, int n_sims = 20)
{
  IpeParams p;
  p.sigma = sigma;
  p.phi = phi;
  p.n_sims = n_sims;
  return p;
}

IpePrediction with_p_fall(double p)
{
  IpePrediction pred;
  pred.p_fall = p;
  return pred;
}

std::vector<SceneState> scenes(int count, std::uint64_t base, bool stable_only = false)
{
  std::vector<SceneState> out;
  for (std::uint64_t s = base; static_cast<int>(out.size()) < count; ++s) {
    SceneState scene = generate_scene(GenParams(4, 0.29, s));
    if (!stable_only || analytic_stability(scene).stable)
      out.push_back(std::move(scene));
  }
  return out;
}

double mean_p_fall(const std::vector<SceneState>& set, const IpeParams& p)
{
  std::vector<double> pf(set.size());
  parallel_for(set.size(), [&](std::size_t i) { pf[i] = ipe_predict(set[i], p, {}, 500 + i).p_fall; });
  double sum = 0.0;
  for (double v : pf)
    sum += v;
  return sum / static_cast<double>(pf.size());
}

double accuracy_against_oracle(const std::vector<SceneState>& set, const IpeParams& p)
{
  std::vector<int> hit(set.size());
  parallel_for(set.size(), [&](std::size_t i) {
    const StabilityLabel predicted = ipe_classify(ipe_predict(set[i], p, {}, 900 + i), p);
    hit[i] = predicted == label_of(analytic_stability(set[i]).stable) ? 1 : 0;
  });
  int sum = 0;
  for (int h : hit)
    sum += h;
  return static_cast<double>(sum) / static_cast<double>(hit.size());
}

}  // namespace

TEST(IpeParams, Validation)
{
  EXPECT_NO_THROW(IpeParams{}.validate());
  EXPECT_THROW(params(-0.1, 40).validate(), std::invalid_argument);
  EXPECT_THROW(params(0.1, -1).validate(), std::invalid_argument);
  EXPECT_THROW(params(0.1, 40, 0).validate(), std::invalid_argument);
  IpeParams p;
  p.decision_threshold = 1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Classify, ThresholdAndTie)
{
  const IpeParams p;
  EXPECT_EQ(ipe_classify(with_p_fall(0.0), p), StabilityLabel::stable);
  EXPECT_EQ(ipe_classify(with_p_fall(1.0), p), StabilityLabel::unstable);
  EXPECT_EQ(ipe_classify(with_p_fall(0.5), p), StabilityLabel::unstable);
  EXPECT_EQ(ipe_classify(with_p_fall(0.45), p), StabilityLabel::stable);
}

TEST(ScalePhi, ProportionalToBlockCount)
{
  const IpeParams p;
  EXPECT_DOUBLE_EQ(scale_phi(4, p), 40.0);
  EXPECT_DOUBLE_EQ(scale_phi(3, p), 30.0);
  EXPECT_DOUBLE_EQ(scale_phi(5, p), 50.0);
  EXPECT_THROW(scale_phi(1, p), std::invalid_argument);
}

TEST(Summarize, HandCountedOutcomes)
{
  std::vector<dynamics::SimOutcome> outs(4);
  outs[0].fell = true;
  outs[0].per_block_displacement = {0.0, 0.1, 0.5, 1.0};
  outs[1].per_block_displacement = {0.0, 0.0, 0.0, 0.3};
  outs[2].fell = true;
  outs[2].per_block_displacement = {0.3, 0.3, 0.3, 0.3};
  outs[3].per_block_displacement = {0.0, 0.0, 0.0, 0.2};
  const IpePrediction pred = summarize(outs, IpeParams{});
  EXPECT_DOUBLE_EQ(pred.p_fall, 0.5);
  EXPECT_DOUBLE_EQ(pred.graded_response, (0.5 + 0.25 + 1.0 + 0.0) / 4.0);
  EXPECT_EQ(pred.outcomes.size(), 4u);
}

TEST(Predict, AlignedStackNeverFallsWithoutNoise)
{
  const SceneState s = stack_from_horizontal(std::vector<Vec2>(4, Vec2::Zero()));
  const IpePrediction pred = ipe_predict(s, params(0, 0), {}, 1);
  EXPECT_EQ(pred.p_fall, 0.0);
  EXPECT_EQ(pred.graded_response, 0.0);
  EXPECT_EQ(pred.outcomes.size(), 20u);
  EXPECT_EQ(ipe_predict(s, params(0.0, 40.0), {}, 1).p_fall, 0.0);
}

TEST(Predict, OutputsBoundedAndDeterministic)
{
  for (const SceneState& s : scenes(6, 40)) {
    const IpePrediction a = ipe_predict(s, params(0.1, 40), {}, 3);
    const IpePrediction b = ipe_predict(s, params(0.1, 40), {}, 3);
    EXPECT_GE(a.p_fall, 0.0);
    EXPECT_LE(a.p_fall, 1.0);
    EXPECT_GE(a.graded_response, 0.0);
    EXPECT_LE(a.graded_response, 1.0);
    EXPECT_EQ(a.p_fall, b.p_fall);
    EXPECT_EQ(a.graded_response, b.graded_response);
    EXPECT_EQ(a.outcomes, b.outcomes);
    // p_fall is a count over n_sims.
    const double k = a.p_fall * 20.0;
    EXPECT_NEAR(k, std::round(k), 1e-9);
  }
}

TEST(Predict, NoiselessEnsembleMatchesSingleSimulation)
{
  for (const SceneState& s : scenes(10, 70)) {
    const IpePrediction pred = ipe_predict(s, params(0, 0, 5), {}, 9);
    const dynamics::SimOutcome one = dynamics::simulate_scene(s, {}, 0.0, 0.0, 123);
    EXPECT_EQ(pred.p_fall, one.fell ? 1.0 : 0.0);
    for (const dynamics::SimOutcome& o : pred.outcomes)
      EXPECT_EQ(o, pred.outcomes.front());
  }
}

TEST(Predict, PosteriorSamplesSource)
{
  const SceneState aligned = stack_from_horizontal(std::vector<Vec2>(4, Vec2::Zero()));
  const SceneState toppling = stack_from_horizontal({Vec2::Zero(), Vec2(0.8, 0), Vec2(1.6, 0), Vec2(2.4, 0)});
  EXPECT_EQ(ipe_predict(std::vector<SceneState>(3, aligned), params(0, 0), {}, 2).p_fall, 0.0);
  EXPECT_EQ(ipe_predict(std::vector<SceneState>(3, toppling), params(0, 0), {}, 2).p_fall, 1.0);
  const IpePrediction mixed = ipe_predict(std::vector<SceneState>{aligned, toppling}, params(0, 0, 200), {}, 2);
  EXPECT_GT(mixed.p_fall, 0.35);
  EXPECT_LT(mixed.p_fall, 0.65);
  EXPECT_THROW(ipe_predict(std::vector<SceneState>{}, params(0, 0), {}, 2), std::invalid_argument);
}

TEST(Predict, ScaledPushUsesEachStateBlockCount)
{
  const SceneState three = stack_from_horizontal(std::vector<Vec2>(3, Vec2::Zero()));
  IpeParams scaled = params(0.1, 999.0, 6);
  scaled.scale_phi_by_block_count = true;
  const IpePrediction a = ipe_predict(three, scaled, {}, 5);
  const IpePrediction b = ipe_predict(three, params(0.1, 30.0, 6), {}, 5);
  EXPECT_EQ(a.outcomes, b.outcomes);
}

TEST(Predict, MeanFallProbabilityGrowsWithNoise)
{
  const std::vector<SceneState> stable = scenes(40, 1000, true);
  const double s0 = mean_p_fall(stable, params(0.0, 40));
  const double s1 = mean_p_fall(stable, params(0.1, 40));
  const double s2 = mean_p_fall(stable, params(0.2, 40));
  EXPECT_LE(s0, s1);
  EXPECT_LE(s1, s2);
  EXPECT_GT(s2, s0 + 0.1);

  const double f0 = mean_p_fall(stable, params(0.1, 0));
  const double f2 = mean_p_fall(stable, params(0.1, 80));
  EXPECT_LE(f0, f2 + 0.02);
}

TEST(Predict, OracleAgreementAndNoiseCost)
{
  const std::vector<SceneState> set = scenes(200, 5000);
  const double clean = accuracy_against_oracle(set, params(0.0, 0.0));
  const double noisy = accuracy_against_oracle(set, params(0.1, 40.0));
  EXPECT_GE(clean, 0.95);
  EXPECT_LT(noisy, clean);
  EXPECT_GT(noisy, 0.5);
}
