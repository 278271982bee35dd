#include <gradsens/models.hpp>
#include <gradsens/subsim.hpp>

#include <gtest/gtest.h>

using namespace gradsens;

namespace {

class Constant : public ResponseModel
{
public:
  std::string name() const override { return "constant"; }
  Eigen::Index input_dim() const override { return 1; }
  std::vector<Parameter> parameters() const override { return { { "c", 1.0 } }; }
  double response(const Vector&, std::span<const double> p) const override
  {
    return p[0];
  }
};

SsConfig defaults(std::uint64_t seed = 42)
{
  SsConfig c;
  c.seed = seed;
  return c;
}

} // namespace

TEST(CorrelationParam, KnownLevels)
{
  const auto c1 = correlation_param(1, 0.1);
  EXPECT_NEAR(c1.a, 0.5 * (1 + 1.2815515655446004 / 2.3263478740408408), 1e-12);
  EXPECT_NEAR(c1.a, 0.77545, 1e-5);
  EXPECT_NEAR(c1.s, std::sqrt(1 - c1.a * c1.a), 1e-15);
  EXPECT_NEAR(correlation_param(2, 0.1).a, 0.87640, 1e-5);
  EXPECT_THROW(correlation_param(0, 0.1), ConfigError);
}

TEST(CorrelationParam, TendsToOneAsLevelProbabilityGrows)
{
  double prev = 0.0;
  for (double q : { 1e-2, 1e-4, 1e-8, 1e-12 }) {
    const double a = correlation_param(1, 1.0 - q).a;
    const double gap = std::abs(a - 1.0);
    if (prev > 0)
      EXPECT_LT(gap, prev);
    prev = gap;
  }
  EXPECT_LT(prev, 0.02);
}

TEST(SsConfig, Validation)
{
  SsConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.chains(), 100u);
  EXPECT_EQ(c.chain_length(), 10u);
  c.p0 = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.p0 = 0.7;
  EXPECT_THROW(c.validate(), ConfigError);
  c.p0 = 0.1;
  c.samples = 1005;
  EXPECT_THROW(c.validate(), ConfigError);
  c.samples = 1000;
  c.levels = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.levels = 3;
  c.p0 = 0.3;
  c.samples = 100; // 30 chains do not divide 100
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(McmcStep, DegenerateCorrelationKeepsState)
{
  const ModelSpec spec = make_model_spec("normal");
  RngStream rng(1, 0);
  SampleRecord cur = evaluate(spec, rng.normal_vector(2));
  const SampleRecord start = cur;
  for (int k = 0; k < 10; ++k) {
    cur = mcmc_step(spec, cur, start.y, { 1.0, 0.0 }, rng);
    EXPECT_EQ(cur.x, start.x);
    EXPECT_EQ(cur.y, start.y);
  }
}

TEST(McmcStep, AcceptanceRuleAndReplay)
{
  const ModelSpec spec = make_model_spec("normal");
  const auto corr = correlation_param(1, 0.1);
  RngStream rng(2, 0);
  const double b = 1.5;
  SampleRecord cur = evaluate(spec, Vector::Constant(2, 1.5));
  std::vector<Vector> zs;
  std::vector<SampleRecord> chain;
  for (int k = 0; k < 200; ++k) {
    const Vector z = rng.normal_vector(2);
    zs.push_back(z);
    const Vector cand = corr.a * cur.x + corr.s * z;
    const bool accept = spec.response(cand) >= b;
    const SampleRecord next = mcmc_step(spec, cur, b, corr, z);
    if (accept)
      EXPECT_EQ(next.x, cand);
    else
      EXPECT_EQ(next.x, cur.x);
    EXPECT_GE(next.y, b);
    chain.push_back(next);
    cur = next;
  }
  // replay from recorded innovations
  SampleRecord again = evaluate(spec, Vector::Constant(2, 1.5));
  for (int k = 0; k < 200; ++k) {
    again = mcmc_step(spec, again, b, corr, zs[k]);
    EXPECT_EQ(again.x, chain[k].x);
    EXPECT_EQ(again.g, chain[k].g);
  }
}

TEST(McmcStep, ConditionalDistributionIsStationary)
{
  // Y - 1 ~ N(0,1) along direction w = (sqrt(.75), .5); seed exact
  // conditional samples of {Y >= b}, b = 1 + u_1, and run 10 steps.
  const ModelSpec spec = make_model_spec("normal");
  const double p0 = 0.1;
  const double u = std_normal_ccdf_inv(p0);
  const double b = 1.0 + u;
  const auto corr = correlation_param(1, p0);
  const double c = std::sqrt(0.75);
  RngStream rng(31, 0);
  std::vector<double> ys;
  const int chains = 20000;
  for (int k = 0; k < chains; ++k) {
    const double uu = 0.5 * (1.0 + std::erf(rng.normal() / std::sqrt(2.0)));
    const double t = std_normal_ccdf_inv(p0 * std::clamp(uu, 1e-300, 1.0 - 1e-16));
    const double o = rng.normal();
    Vector x(2);
    x << t * c - o * 0.5, t * 0.5 + o * c;
    SampleRecord cur = evaluate(spec, x);
    for (int s = 0; s < 10; ++s)
      cur = mcmc_step(spec, cur, b, corr, rng);
    ys.push_back(cur.y);
  }
  for (double z : { u, u + 0.3, u + 0.7, u + 1.2 }) {
    double above = 0;
    for (double y : ys)
      above += y >= 1.0 + z ? 1 : 0;
    const double f = above / chains;
    const double ref = std_normal_ccdf(z) / p0;
    // chains are independent of each other
    EXPECT_NEAR(f, ref, 4.0 * std::sqrt(ref * (1 - ref) / chains) + 1e-12) << z;
  }
}

TEST(SubsetSimulation, BinStructure)
{
  const ModelSpec spec = make_model_spec("normal");
  const SsResult r = run_subset_simulation(spec, defaults());
  ASSERT_EQ(r.bins.bins.size(), 3u);
  EXPECT_EQ(r.bins.bins[0].records.size(), 900u);
  EXPECT_EQ(r.bins.bins[1].records.size(), 900u);
  EXPECT_EQ(r.bins.bins[2].records.size(), 1000u);
  EXPECT_DOUBLE_EQ(r.bins.bins[0].probability, 0.9);
  EXPECT_DOUBLE_EQ(r.bins.bins[1].probability, 0.09);
  EXPECT_DOUBLE_EQ(r.bins.bins[2].probability, 0.01);
  EXPECT_EQ(r.evaluations, 3000u);
  EXPECT_EQ(r.bins.total_records(), 2800u);
  ASSERT_EQ(r.bins.thresholds.size(), 2u);
  EXPECT_LT(r.bins.thresholds[0], r.bins.thresholds[1]);
  EXPECT_FALSE(r.degenerate);
}

TEST(SubsetSimulation, ProbabilitiesSumToOneInRationalArithmetic)
{
  // P_i = p0^i (1 - p0), P_{m-1} = p0^{m-1}: with p0 = k/q the numerators
  // over q^{m-1} are integers summing to q^{m-1}.
  for (int m = 1; m <= 6; ++m) {
    const long long k = 1, q = 10;
    long long total = 0;
    long long qm = 1;
    for (int i = 0; i < m - 1; ++i)
      qm *= q;
    for (int i = 0; i < m; ++i) {
      long long num = 1;
      for (int j = 0; j < i; ++j)
        num *= k;
      long long rest = 1;
      for (int j = 0; j < m - 1 - i; ++j)
        rest *= q;
      // p0^i (1-p0) q^{m-1} = k^i (q-k) q^{m-2-i}; last: k^{m-1}
      total += i + 1 < m ? num * (q - k) * rest / q : num;
    }
    EXPECT_EQ(total, qm) << m;
  }
  const ModelSpec spec = make_model_spec("normal");
  SsConfig c = defaults();
  c.levels = 5;
  c.samples = 200;
  const SsResult r = run_subset_simulation(spec, c);
  double sum = 0;
  for (const auto& b : r.bins.bins)
    sum += b.probability;
  EXPECT_NEAR(sum, 1.0, 1e-15);
}

TEST(SubsetSimulation, MembershipRespectsThresholds)
{
  for (std::uint64_t seed : { 1, 2, 3 }) {
    const ModelSpec spec = make_model_spec("buckling");
    const SsResult r = run_subset_simulation(spec, defaults(seed));
    const auto& th = r.bins.thresholds;
    for (std::size_t i = 0; i < r.bins.bins.size(); ++i)
      for (const auto& rec : r.bins.bins[i].records) {
        if (i > 0)
          EXPECT_GE(rec.y, th[i - 1]);
        if (i + 1 < r.bins.bins.size())
          EXPECT_LE(rec.y, th[i]);
      }
  }
}

TEST(SubsetSimulation, CcdfProperties)
{
  const ModelSpec spec = make_model_spec("normal");
  const SsResult r = run_subset_simulation(spec, defaults(7));
  ASSERT_EQ(r.ccdf.y.size(), 3000u);
  for (std::size_t k = 1; k < r.ccdf.y.size(); ++k) {
    EXPECT_LE(r.ccdf.y[k - 1], r.ccdf.y[k]);
    EXPECT_LE(r.ccdf.f[k], r.ccdf.f[k - 1]);
  }
  for (double f : r.ccdf.f) {
    EXPECT_GT(f, 0.0);
    EXPECT_LE(f, 1.0);
  }
  for (std::size_t i = 0; i < r.bins.thresholds.size(); ++i)
    EXPECT_DOUBLE_EQ(ccdf_at(r.bins, r.bins.thresholds[i]), std::pow(0.1, i + 1));
  for (std::size_t k = 0; k < r.ccdf.y.size(); k += 37)
    EXPECT_DOUBLE_EQ(r.ccdf.f[k], ccdf_at(r.bins, r.ccdf.y[k]));
}

TEST(SubsetSimulation, SingleLevelIsDirectMonteCarlo)
{
  const ModelSpec spec = make_model_spec("normal");
  SsConfig c = defaults(3);
  c.levels = 1;
  const SsResult r = run_subset_simulation(spec, c);
  ASSERT_EQ(r.bins.bins.size(), 1u);
  EXPECT_EQ(r.bins.bins[0].probability, 1.0);
  RngStream rng(3, 0);
  std::vector<double> ys;
  for (int k = 0; k < 1000; ++k)
    ys.push_back(spec.response(rng.normal_vector(2)));
  std::sort(ys.begin(), ys.end());
  EXPECT_EQ(r.ccdf.y, ys);
  for (std::size_t k = 0; k < ys.size(); ++k)
    EXPECT_DOUBLE_EQ(r.ccdf.f[k], (1000.0 - k) / 1000.0);
}

TEST(SubsetSimulation, BitReproducible)
{
  const ModelSpec spec = make_model_spec("sdof");
  SsConfig c = defaults(11);
  const SsResult a = run_subset_simulation(spec, c);
  c.workers = 4;
  const SsResult b = run_subset_simulation(spec, c);
  ASSERT_EQ(a.levels.size(), b.levels.size());
  for (std::size_t i = 0; i < a.levels.size(); ++i)
    for (std::size_t k = 0; k < a.levels[i].size(); ++k) {
      EXPECT_EQ(a.levels[i][k].x, b.levels[i][k].x);
      EXPECT_EQ(a.levels[i][k].y, b.levels[i][k].y);
      EXPECT_EQ(a.levels[i][k].g, b.levels[i][k].g);
    }
  EXPECT_EQ(a.ccdf.f, b.ccdf.f);
  EXPECT_EQ(a.bins.thresholds, b.bins.thresholds);
}

TEST(SubsetSimulation, ReportsTiedThresholds)
{
  const ModelSpec spec(std::make_shared<Constant>());
  const SsResult r = run_subset_simulation(spec, defaults());
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.bins.ties[0], 900u);
}

TEST(SubsetSimulation, LevelZeroIsUnbiased)
{
  const ModelSpec spec = make_model_spec("normal");
  SsConfig c;
  c.levels = 1;
  const double y = 1.0 + std_normal_ccdf_inv(0.1);
  const int runs = 1000;
  double sum = 0, sum2 = 0;
  for (int r = 0; r < runs; ++r) {
    c.seed = 1000 + r;
    const SsResult res = run_subset_simulation(spec, c);
    const double f = ccdf_at(res.bins, y);
    sum += f;
    sum2 += f * f;
  }
  const double mean = sum / runs;
  const double se = std::sqrt((sum2 / runs - mean * mean) / runs);
  EXPECT_NEAR(mean, 0.1, 3 * se);
}

TEST(SubsetSimulation, RareEventProbabilityIsAccurateOnAverage)
{
  const ModelSpec spec = make_model_spec("normal");
  const double y = 1.0 + std_normal_ccdf_inv(1e-3);
  double sum = 0;
  const int runs = 100;
  for (int r = 0; r < runs; ++r) {
    const SsResult res = run_subset_simulation(spec, defaults(500 + r));
    sum += ccdf_at(res.bins, y);
  }
  EXPECT_NEAR(sum / runs, 1e-3, 0.15e-3);
}
