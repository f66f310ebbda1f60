#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "cflab/config.hpp"
#include "cflab/io.hpp"
#include "helpers.hpp"

using namespace cflab;
using cflab::testing::TempDir;

namespace {

MomentSeries sample_series() {
  MomentSeries s;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int i = 0; i < 5; ++i) {
    s.times.push_back(0.1 * i + 1e-17 * i);
    s.moments.push_back({u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)});
    s.mass_drift.push_back(u(rng) * 1e-15);
    s.top_bin_occupancy.push_back(u(rng) * 1e-300);
  }
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Csv, NumbersRoundTripExactly) {
  for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, 5e-324, -2.5, 0.0})
    EXPECT_EQ(std::strtod(io::num(v).c_str(), nullptr), v);
}

TEST(Csv, TrajectoryRoundTrip) {
  TempDir dir("traj");
  const auto s = sample_series();
  io::write_trajectory(dir / "t.csv", s);
  const auto text = slurp(dir / "t.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,m0,m1,m2,m3,m4,m5,mass_drift,top_bin_occupancy");
  const auto r = io::read_trajectory(dir / "t.csv");
  EXPECT_EQ(r.times, s.times);
  EXPECT_EQ(r.moments, s.moments);
  EXPECT_EQ(r.mass_drift, s.mass_drift);
  EXPECT_EQ(r.top_bin_occupancy, s.top_bin_occupancy);
}

TEST(Csv, SnapshotRoundTrip) {
  TempDir dir("snap");
  std::mt19937_64 rng(2);
  const SizeGrid g(0.05, 37);
  std::vector<kinetic::Snapshot> snaps;
  for (double t : {0.0, 0.05, 0.1}) snaps.push_back({t, cflab::testing::random_distribution(rng, g)});
  io::write_snapshots(dir / "s.csv", snaps);
  const auto r = io::read_snapshots(dir / "s.csv");
  ASSERT_EQ(r.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(r[i].t, snaps[i].t);
    EXPECT_EQ(r[i].dist.grid().bins(), 37u);
    EXPECT_DOUBLE_EQ(r[i].dist.grid().ds(), 0.05);
    EXPECT_TRUE(std::ranges::equal(r[i].dist.counts(), snaps[i].dist.counts()));
  }
}

TEST(Csv, MissingFileIsArtifactMissing) {
  TempDir dir("missing");
  EXPECT_THROW(io::read_trajectory(dir / "nope.csv"), ArtifactMissing);
  EXPECT_THROW(io::read_snapshots(dir / "nope.csv"), ArtifactMissing);
}

TEST(Csv, MalformedFilesAreParseErrors) {
  TempDir dir("bad");
  const std::string header = "t,m0,m1,m2,m3,m4,m5,mass_drift,top_bin_occupancy\n";
  EXPECT_THROW(io::read_trajectory(dir.write("empty.csv", "")), ParseError);
  EXPECT_THROW(io::read_trajectory(dir.write("word.csv", header + "0,1,x,1,1,1,1,0,0\n")), ParseError);
  EXPECT_THROW(io::read_trajectory(dir.write("trail.csv", header + "0,1,1z,1,1,1,1,0,0\n")), ParseError);
  EXPECT_THROW(io::read_trajectory(dir.write("blank.csv", header + "0,1,,1,1,1,1,0,0\n")), ParseError);
  EXPECT_THROW(io::read_trajectory(dir.write("space.csv", header + "0,1, 1,1,1,1,1,0,0\n")), ParseError);
  EXPECT_THROW(io::read_trajectory(dir.write("short.csv", header + "0,1,1\n")), ParseError);
  EXPECT_THROW(io::read_trajectory(dir.write("col.csv", "t,m0\n0,1\n")), ParseError);
  EXPECT_THROW(io::read_trajectory(dir.write("order.csv", header + "0.1,1,1,1,1,1,1,0,0\n0.1,1,1,1,1,1,1,0,0\n")),
               ParseError);
  EXPECT_THROW(io::read_snapshots(dir.write("lattice.csv", "t,s,N\n0,0.1,1\n0,0.3,1\n")), ParseError);
  EXPECT_THROW(io::read_snapshots(dir.write("neg.csv", "t,s,N\n0,0.1,1\n0,0.2,-1\n")), ParseError);
  EXPECT_THROW(io::read_snapshots(dir.write("one.csv", "t,s,N\n0,0.1,1\n")), ParseError);
}

TEST(Csv, ReportRowsCarryStatus) {
  TempDir dir("report");
  const std::vector<BoundReport> rows = {{"a", 0.5, 0.0, 0.1, 2.0}, {"b", -0.5, 0.1, 0.2, 3.0}};
  io::write_report(dir / "r.csv", rows);
  EXPECT_EQ(slurp(dir / "r.csv"), "name,status,worst_margin,t,x_or_k\na,PASS,0.5,0.10000000000000001,2\n"
                                  "b,FAIL,-0.5,0.20000000000000001,3\n");
}

TEST(Csv, UnwritablePathThrows) {
  EXPECT_THROW(io::CsvWriter("/nonexistent-dir/x.csv", {"a"}), Error);
}

// --- configuration -----------------------------------------------------------

TEST(Config, DefaultsWhenSectionsAreEmpty) {
  TempDir dir("cfg");
  const auto c = load_config(dir.write("empty.ini", "# nothing\n"));
  EXPECT_EQ(c.mass, 1.0);
  EXPECT_EQ(c.grid.ds, 0.05);
  EXPECT_EQ(c.grid.bins, 640u);
  EXPECT_EQ(c.kernel.frag_eps, 0.1);
  EXPECT_TRUE(c.kernel.fragmentation);
  EXPECT_EQ(c.solver.dt, 2.5e-4);
  EXPECT_EQ(c.solver.t_end, 0.3);
  EXPECT_EQ(c.convergence.eps_list, (std::vector<double>{0.2, 0.1, 0.05}));
  EXPECT_EQ(c.seed, 12345u);
}

TEST(Config, ReadsEverySection) {
  TempDir dir("cfg");
  const auto c = load_config(dir.write("full.ini", R"([scenario]
mass = 2.0
[grid]
ds = 0.1
bins = 100
[kernel]
eps = 0.3
truncation = 80
fragmentation = false
[initial]
kind = exponential
rate = 2.5
[solver]
dt = 1e-3
t_end = 0.2
output_every = 5
[outputs]
dir = somewhere
x_min = 0.01
x_max = 5
x_points = 10
[stochastic]
replicas = 4
volume = 300
times = 0 0.1, 0.2
[characteristics]
starts = 50
x0_min = 0.5
x0_max = 9
dt = 2e-3
record_every = 3
[convergence]
eps_list = 0.4 0.2 0.1 0.05
x_lo = 1
x_hi = 2
x_points = 5
[experiment]
seed = 99
)"));
  EXPECT_EQ(c.mass, 2.0);
  EXPECT_EQ(c.grid.bins, 100u);
  EXPECT_EQ(c.kernel.frag_eps, 0.3);
  EXPECT_EQ(c.kernel.truncation, 80u);
  EXPECT_FALSE(c.kernel.fragmentation);
  ASSERT_TRUE(std::holds_alternative<Exponential>(c.initial));
  EXPECT_EQ(std::get<Exponential>(c.initial).rate, 2.5);
  EXPECT_EQ(std::get<Exponential>(c.initial).mass, 2.0);
  EXPECT_EQ(c.solver.output_every, 5u);
  EXPECT_EQ(c.outputs.dir, "somewhere");
  EXPECT_EQ(c.stochastic.times, (std::vector<double>{0.0, 0.1, 0.2}));
  EXPECT_EQ(c.characteristics.record_every, 3u);
  EXPECT_EQ(c.convergence.eps_list.size(), 4u);
  EXPECT_EQ(c.seed, 99u);
  const auto sc = c.solver_config();
  EXPECT_EQ(sc.spec.frag_eps, 0.3);
  EXPECT_NEAR(sc.scenario.m, 2.0, 1e-6);
}

TEST(Config, ProblemsAreConfigErrors) {
  TempDir dir("cfg");
  const std::vector<std::string> bad = {
      "[grid]\nds = -1\n",
      "[grid]\nbins = many\n",
      "[grid]\nds = 0.1x\n",
      "[kernel]\neps = -0.1\n",
      "[kernel]\nfragmentation = maybe\n",
      "[kernel]\nepsilon = 0.1\n",
      "[kernels]\neps = 0.1\n",
      "[initial]\nkind = gaussian\n",
      "[solver]\ndt = 0\n",
      "[solver]\noutput_every = 0\n",
      "[scenario]\nmass = 0\n",
      "[outputs]\nx_min = 3\nx_max = 2\n",
      "[stochastic]\nreplicas = 1\n",
      "[characteristics]\nstarts = 1\n",
      "[convergence]\neps_list = 0.1, oops\n",
      "[convergence]\nx_lo = 0\n",
      "not an ini file [\n",
  };
  for (std::size_t i = 0; i < bad.size(); ++i)
    EXPECT_THROW(load_config(dir.write("bad" + std::to_string(i) + ".ini", bad[i])), ConfigError) << bad[i];
  EXPECT_THROW(load_config(dir / "absent.ini"), ConfigError);
}

TEST(Config, ShippedConfigsLoad) {
  for (const char* name : {"standard.ini", "exponential.ini", "pure_coagulation.ini"}) {
    const auto path = std::filesystem::path(CFLAB_SOURCE_DIR) / "configs" / name;
    EXPECT_NO_THROW(load_config(path)) << name;
  }
}
