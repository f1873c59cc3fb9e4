#include <gtest/gtest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "app.hpp"
#include "bpdq/error.hpp"
#include "bpdq/kernel.hpp"
#include "bpdq/tensorio.hpp"
#include "outlier.hpp"
#include "test_support.hpp"

namespace bpdq::app {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

Tensor2D random_weights() {
  return synth_layer(1, 4, 16, 8, 0.0).weights;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = bpdq::testing::scratch_path("bpdq_cli_");
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static json read_json(const std::string& p) {
    std::ifstream f(p);
    return json::parse(f);
  }

  static json strip_timing(json j) {
    j.erase("wall_time_s");
    return j;
  }

  fs::path dir_;
};

TEST_F(CliTest, QuantizeSynthReport) {
  const auto r = invoke({"quantize", "--synth", "7,16,128,1024", "-k", "2", "-g", "32", "-o",
                         path("out.bpqz"), "--report", path("r.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json rep = read_json(path("r.json"));
  EXPECT_EQ(rep["schema_version"], 1);
  EXPECT_DOUBLE_EQ(rep["bpw"].get<double>(), 3.5);
  EXPECT_EQ(rep["config"]["k"], 2);
  EXPECT_EQ(rep["config"]["g"], 32);
  EXPECT_EQ(rep["per_group_scores"].size(), 4u);
  EXPECT_GT(rep["objective_frob"].get<double>(), 0.0);
  const auto layer = load_layer(path("out.bpqz"));
  EXPECT_EQ(layer.d_out, 16u);
  EXPECT_EQ(layer.d_in, 128u);
  EXPECT_EQ(layer.dtype, CoeffDtype::kF16);
}

TEST_F(CliTest, QuantizeFromFilesAndDequantize) {
  const auto layer = synth_layer(3, 4, 32, 128, 0.0);
  save_tensor(layer.weights, path("w.tnsr"));
  save_tensor(layer.activations, path("x.tnsr"));
  ASSERT_EQ(invoke({"quantize", "--weights", path("w.tnsr"), "--calib", path("x.tnsr"), "-k", "3",
                    "-g", "16", "--coeff-bits", "32", "-o", path("l.bpqz"), "--report", path("r.json")})
                .code,
            kExitOk);
  const auto d = invoke({"dequantize", path("l.bpqz"), "-o", path("q.tnsr")});
  ASSERT_EQ(d.code, kExitOk) << d.err;
  EXPECT_EQ(json::parse(d.out)["coeff_bits"], 32);
  EXPECT_EQ(load_tensor(path("q.tnsr")), dequantize(load_layer(path("l.bpqz"))));
}

TEST_F(CliTest, ConfigErrors) {
  const auto missing_k = invoke({"quantize", "--synth", "7,16,128,1024", "-g", "32"});
  EXPECT_EQ(missing_k.code, kExitConfig);

  const auto bad_g = invoke({"quantize", "--synth", "7,16,128,1024", "-k", "2", "-g", "48"});
  EXPECT_EQ(bad_g.code, kExitConfig);
  EXPECT_NE(bad_g.err.find("48"), std::string::npos);
  EXPECT_NE(bad_g.err.find("128"), std::string::npos);

  EXPECT_EQ(invoke({"quantize", "--synth", "7,x,128", "-k", "2"}).code, kExitConfig);
  EXPECT_EQ(invoke({"quantize", "-k", "2"}).code, kExitConfig);
  EXPECT_EQ(invoke({"quantize", "--synth", "1,4,64", "-k", "2", "--coeff-bits", "8"}).code, kExitConfig);
  EXPECT_EQ(invoke({}).code, kExitConfig);
  EXPECT_EQ(invoke({"frobnicate"}).code, kExitConfig);
  EXPECT_EQ(invoke({"theory-check", "--suite", "nope"}).code, kExitConfig);
}

TEST_F(CliTest, DimensionMismatchIsConfigError) {
  save_tensor(Tensor2D(2, 16), path("w.tnsr"));
  save_tensor(Tensor2D(8, 10, 1.0), path("x.tnsr"));
  EXPECT_EQ(invoke({"quantize", "--weights", path("w.tnsr"), "--calib", path("x.tnsr"), "-k", "2", "-g", "8"}).code,
            kExitConfig);
}

TEST_F(CliTest, IoAndFormatErrors) {
  EXPECT_EQ(invoke({"quantize", "--weights", path("none.tnsr"), "--calib", path("none2.tnsr"), "-k", "2"}).code,
            kExitIo);
  std::ofstream(path("junk.bpqz")) << "not a layer";
  EXPECT_EQ(invoke({"dequantize", path("junk.bpqz"), "-o", path("o.tnsr")}).code, kExitIo);
}

TEST_F(CliTest, SingularHessianIsNumericalFailure) {
  save_tensor(random_weights(), path("w.tnsr"));
  save_tensor(Tensor2D(16, 4), path("x.tnsr"));
  const auto r = invoke({"quantize", "--weights", path("w.tnsr"), "--calib", path("x.tnsr"), "-k", "2",
                         "-g", "8", "--percdamp", "0"});
  EXPECT_EQ(r.code, kExitNumerical);
  EXPECT_NE(r.err.find("singular"), std::string::npos);
}

TEST_F(CliTest, CompareExactLayerHasZeroObjectives) {
  const auto r = invoke({"compare", "--synth", "1,8,64,256", "--layers", "1", "--identity-hessian",
                         "--exact-weights", "-g", "16", "--alpha", "0", "--coeff-bits", "64"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json rep = json::parse(r.out);
  EXPECT_LT(rep["layers"][0]["bpdq"].get<double>(), 1e-20);
  EXPECT_LT(rep["layers"][0]["gptq"].get<double>(), 1e-20);
  EXPECT_LT(rep["layers"][0]["rtn"].get<double>(), 1e-20);
}

TEST_F(CliTest, CompareReportsWinRateAndIsDeterministic) {
  const std::vector<std::string> args{"compare", "--synth", "4,8,128,512", "--layers", "3", "--seed", "9"};
  const auto a = invoke(args);
  const auto b = invoke(args);
  ASSERT_EQ(a.code, kExitOk) << a.err;
  const json ja = json::parse(a.out);
  EXPECT_TRUE(ja.contains("win_rate_vs_gptq"));
  EXPECT_EQ(ja["layers"].size(), 3u);
  EXPECT_EQ(ja["config"]["g"], 64);
  EXPECT_EQ(strip_timing(ja).dump(), strip_timing(json::parse(b.out)).dump());
}

TEST_F(CliTest, EvaluateOutlierStats) {
  const auto r = invoke({"evaluate", "--synth", "3,16,128,512", "--tail-index", "1", "-k", "2", "-g", "32",
                         "--layers", "2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json rep = json::parse(r.out);
  EXPECT_GE(rep["outlier_stats"]["diagr_p95"].get<double>(), 1.0);
  EXPECT_TRUE(rep["outlier_stats"].contains("cnt10"));
  EXPECT_TRUE(rep["outlier_stats"].contains("delta_diagr_pct"));
  EXPECT_GT(rep["input_outlier_stats"]["diagr_p95"].get<double>(), 1.0);

  ASSERT_EQ(invoke({"quantize", "--synth", "3,16,128,512", "-k", "2", "-g", "32", "-o", path("l.bpqz")}).code, 0);
  const auto stored = invoke({"evaluate", path("l.bpqz"), "--synth", "3,16,128,512", "-k", "2", "-g", "32"});
  ASSERT_EQ(stored.code, kExitOk) << stored.err;
}

TEST_F(CliTest, EvaluateDeterministicApartFromTiming) {
  const std::vector<std::string> args{"evaluate", "--synth", "5,8,64,256", "-k", "2", "-g", "16", "--seed", "3"};
  EXPECT_EQ(strip_timing(json::parse(invoke(args).out)).dump(), strip_timing(json::parse(invoke(args).out)).dump());
}

TEST_F(CliTest, BenchSmoke) {
  const auto r = invoke({"bench", "--synth", "2,32,256", "--reps", "1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json rep = json::parse(r.out);
  EXPECT_LE(rep["max_rel_deviation"].get<double>(), 1e-12);
  EXPECT_EQ(rep["ops"]["dense_mults"], 32 * 256);
  EXPECT_EQ(rep["ops"]["lut_tables"], 32);
  const auto again = json::parse(invoke({"bench", "--synth", "2,32,256", "--reps", "1"}).out);
  EXPECT_EQ(rep["ops"], again["ops"]);
}

TEST_F(CliTest, TheoryCheck) {
  const auto all = invoke({"theory-check"});
  EXPECT_EQ(all.code, kExitOk) << all.out;
  for (const char* s : {"prop1", "prop2", "b1", "b2", "b3"}) EXPECT_NE(all.out.find(s), std::string::npos);

  const auto only = invoke({"theory-check", "--suite", "prop2", "--g", "4"});
  EXPECT_EQ(only.code, kExitOk);
  EXPECT_NE(only.out.find("prop2"), std::string::npos);
  EXPECT_EQ(only.out.find("prop1"), std::string::npos);

  EXPECT_EQ(invoke({"theory-check", "--suite", "b2", "--inject-fault"}).code, kExitTheoryFailure);
  EXPECT_EQ(invoke({"theory-check", "--suite", "prop2", "--g", "12"}).code, kExitConfig);

  ASSERT_EQ(invoke({"theory-check", "--suite", "b3", "--report", path("t.json")}).code, kExitOk);
  EXPECT_EQ(read_json(path("t.json"))["suites"]["b3"]["passed"], read_json(path("t.json"))["suites"]["b3"]["total"]);
}

TEST(OutlierStats, Examples) {
  const auto flat = outlier_stats(Tensor2D(6, 3, -2.0));
  EXPECT_EQ(flat.diagr, 1.0);
  EXPECT_EQ(flat.cnt10, 0);

  Tensor2D spiky(101, 2, 1.0);
  spiky(7, 0) = 100.0;
  spiky(7, 1) = -100.0;
  const auto s = outlier_stats(spiky);
  EXPECT_DOUBLE_EQ(s.diagr, 100.0);
  EXPECT_EQ(s.cnt10, 1);

  try {
    outlier_stats(Tensor2D(4, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kPrecondition);
  }
}

TEST(OutlierStats, LowerMiddleMedian) {
  // Magnitudes 1, 2, 3, 40: lower-middle median 2, so diagr = 20 and only
  // the last channel exceeds 10x.
  const auto s = outlier_stats(Tensor2D::from_rows({{1}, {2}, {-3}, {40}}));
  EXPECT_DOUBLE_EQ(s.diagr, 20.0);
  EXPECT_EQ(s.cnt10, 1);
}

TEST(OutlierStats, Percentile95) {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  EXPECT_EQ(percentile95(v), 95.0);
  EXPECT_EQ(percentile95(std::vector<double>{3.0}), 3.0);
  EXPECT_EQ(percentile95(std::vector<double>{5, 1}), 5.0);
}

}  // namespace
}  // namespace bpdq::app
