#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "mtkd/prob_core.hpp"
#include "mtkd/toy_model.hpp"

namespace {

namespace fs = std::filesystem;

const std::string kCli = MTKD_CLI_PATH;
const fs::path kGolden = MTKD_GOLDEN_DIR;

struct RunOutput {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mtkd_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  RunOutput run(const std::vector<std::string>& args) const {
    std::string cmd = "'" + kCli + "'";
    for (const auto& a : args) cmd += " '" + a + "'";
    const auto out = path("stdout.txt"), err = path("stderr.txt");
    cmd += " > '" + out.string() + "' 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    RunOutput r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  fs::path dir_;
};

std::string golden(const std::string& name) { return (kGolden / name).string(); }

// "key=value" from whitespace/newline separated output.
double field(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  for (std::string tok; in >> tok;) {
    if (tok.rfind(key + "=", 0) == 0) return std::stod(tok.substr(key.size() + 1));
  }
  ADD_FAILURE() << "no field " << key << " in: " << text;
  return NAN;
}

std::size_t line_count(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

// Labels drawn from softmax(z / t_true), written as JSON lines of z * scale.
std::string temperature_fixture(double t_true, double scale, std::uint64_t seed) {
  mtkd::Rng rng(seed);
  std::string text;
  for (int i = 0; i < 400; ++i) {
    std::vector<double> z(5);
    for (double& v : z) v = 3.0 * rng.normal();
    const auto p = mtkd::softmax_t(mtkd::LogitVector(z), t_true);
    double u = rng.uniform(), acc = 0.0;
    std::size_t label = p.size() - 1;
    for (std::size_t k = 0; k < p.size(); ++k) {
      acc += p[k];
      if (u < acc) {
        label = k;
        break;
      }
    }
    text += "{\"logits\": [";
    for (std::size_t k = 0; k < z.size(); ++k) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s%.17g", k ? ", " : "", z[k] * scale);
      text += buf;
    }
    text += "], \"label\": " + std::to_string(label) + "}\n";
  }
  return text;
}

TEST_F(CliTest, VersionAndHelp) {
  auto r = run({"--version"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("mtkd 1.0.0"), std::string::npos);
  for (const std::string sub : {"ece", "fit-temp", "combine", "targets", "train", "sweep"}) {
    r = run({sub, "--version"});
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("mtkd 1.0.0"), std::string::npos) << sub;
    r = run({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("--"), std::string::npos) << sub;
  }
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"ece"}).code, 2);
  EXPECT_EQ(run({"ece", "--input", golden("ece_hand.jsonl"), "--bogus"}).code, 2);
  EXPECT_EQ(run({"ece", "--input", path("missing.jsonl").string()}).code, 2);
}

TEST_F(CliTest, EceHandFixture) {
  const auto csv = path("rel.csv");
  const auto r = run({"ece", "--input", golden("ece_hand.jsonl"), "--bins", "2", "--out",
                      csv.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "rank=1 bins=2 ece=0.425000 n=4\n");
  EXPECT_EQ(slurp(csv), slurp(kGolden / "ece_hand.csv"));
  EXPECT_TRUE(r.err.empty());
}

TEST_F(CliTest, EcePerfectlyCalibrated) {
  spit(path("p.jsonl"),
       "{\"logits\": [0, -1000], \"label\": 0}\n"
       "{\"logits\": [-1000, 0], \"label\": 1}\n"
       "{\"logits\": [0, 0], \"label\": 0}\n"
       "{\"logits\": [0, 0], \"label\": 1}\n");
  const auto r = run({"ece", "--input", path("p.jsonl").string(), "--bins", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("ece=0.000000"), std::string::npos) << r.out;
}

TEST_F(CliTest, EceDefaultsToFifteenBins) {
  std::string text;
  for (int i = 0; i < 45; ++i) {
    text += "{\"logits\": [" + std::to_string(i * 0.1) + ", 0, 0.5], \"label\": " +
            std::to_string(i % 3) + "}\n";
  }
  spit(path("p.jsonl"), text);
  const auto r = run({"ece", "--input", path("p.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("rank=1 bins=15 "), std::string::npos);
  EXPECT_NE(r.out.find(" n=45\n"), std::string::npos);
  EXPECT_EQ(line_count(r.out), 1u + 15u + 1u);  // header, bins, summary
}

TEST_F(CliTest, EceRankAndBatchGrouping) {
  const auto in = golden("ece_hand.jsonl");
  auto r = run({"ece", "--input", in, "--rank", "2", "--bins", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("rank=2 bins=1 "), std::string::npos);

  r = run({"ece", "--input", in, "--bins", "2", "--group", "batch:4"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("ece=0.425000"), std::string::npos);

  EXPECT_EQ(run({"ece", "--input", in, "--group", "batch:0"}).code, 2);
  EXPECT_EQ(run({"ece", "--input", in, "--group", "frames"}).code, 2);
  EXPECT_EQ(run({"ece", "--input", in, "--rank", "3"}).code, 2);  // K = 2
  EXPECT_EQ(run({"ece", "--input", in, "--bins", "0"}).code, 2);
}

TEST_F(CliTest, EceMalformedInputReportsLine) {
  spit(path("bad.jsonl"), "{\"logits\": [1, 2], \"label\": 0}\n{\"logits\": [1, 2], \"label\": 5}\n");
  const auto r = run({"ece", "--input", path("bad.jsonl").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.jsonl:2:"), std::string::npos) << r.err;
  EXPECT_TRUE(r.out.empty());
}

TEST_F(CliTest, FitTempImprovesNll) {
  for (double t_true : {0.5, 1.0, 3.0}) {
    spit(path("val.jsonl"), temperature_fixture(t_true, 1.0, 11));
    const auto r = run({"fit-temp", "--val", path("val.jsonl").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_LE(field(r.out, "nll_after"), field(r.out, "nll_before")) << r.out;
    for (const char* key : {"t_star", "ece_before", "ece_after"}) {
      EXPECT_NE(r.out.find(std::string(key) + "="), std::string::npos);
    }
  }
}

TEST_F(CliTest, FitTempHalvesOnPrescaledFixture) {
  spit(path("a.jsonl"), temperature_fixture(3.0, 1.0, 5));
  spit(path("b.jsonl"), temperature_fixture(3.0, 0.5, 5));
  const auto a = run({"fit-temp", "--val", path("a.jsonl").string()});
  const auto b = run({"fit-temp", "--val", path("b.jsonl").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const double ta = field(a.out, "t_star"), tb = field(b.out, "t_star");
  EXPECT_NEAR(tb / (ta / 2.0), 1.0, 0.02) << ta << " " << tb;
}

TEST_F(CliTest, FitTempDefaultBounds) {
  // The NLL keeps falling past t = 20 for this fixture, so the default upper
  // bound is where the fit stops unless --t-max is raised.
  spit(path("val.jsonl"), temperature_fixture(60.0, 1.0, 3));
  auto r = run({"fit-temp", "--val", path("val.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(field(r.out, "t_star"), 20.0, 1e-3);
  r = run({"fit-temp", "--val", path("val.jsonl").string(), "--t-max", "200"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_GT(field(r.out, "t_star"), 20.0);

  spit(path("cold.jsonl"), temperature_fixture(0.01, 1.0, 3));
  r = run({"fit-temp", "--val", path("cold.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(field(r.out, "t_star"), 0.05, 1e-3);

  EXPECT_EQ(run({"fit-temp", "--val", path("val.jsonl").string(), "--t-min", "5", "--t-max", "2"})
                .code,
            2);
}

TEST_F(CliTest, CombineWinnerFlip) {
  auto r = run({"combine", "--hyps", golden("combine_flip.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, slurp(kGolden / "combine_t2_1.csv"));

  r = run({"combine", "--hyps", golden("combine_flip.jsonl"), "--t1", "1", "--t2", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, slurp(kGolden / "combine_t2_4.csv"));

  const auto csv = path("ranked.csv");
  r = run({"combine", "--hyps", golden("combine_flip.jsonl"), "--t2", "4", "--out", csv.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "utt=u1 best=H2\nutt=u2 best=A\n");
  EXPECT_EQ(slurp(csv), slurp(kGolden / "combine_t2_4.csv"));
}

TEST_F(CliTest, CombineRejectsBadInput) {
  EXPECT_EQ(run({"combine", "--hyps", golden("combine_flip.jsonl"), "--t2", "0"}).code, 2);
  spit(path("h.jsonl"), "{\"utt\": \"u\", \"id\": \"a\", \"am_logp\": -1}\n");
  const auto r = run({"combine", "--hyps", path("h.jsonl").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find(":1:"), std::string::npos);
}

TEST_F(CliTest, TargetsIdentityPreservesOrder) {
  spit(path("a.txt"), "u\tx y z\n");
  spit(path("p.post"), "u\t0\t1 0 0\nu\t1\t0 1 0\nu\t2\t0 0 1\n");
  const auto r = run({"targets", "--align", path("a.txt").string(), "--posteriors",
                      "t=" + path("p.post").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out,
            "u\t0\tx\tt=1.000000 0.000000 0.000000\n"
            "u\t1\ty\tt=0.000000 1.000000 0.000000\n"
            "u\t2\tz\tt=0.000000 0.000000 1.000000\n");
}

TEST_F(CliTest, TargetsThreeTeacherGolden) {
  const auto out = path("targets.tsv");
  const auto r = run({"targets", "--align", golden("targets_align.txt"),
                      "--posteriors", "senone=" + golden("targets_senone.post"),
                      "--posteriors", "phone=" + golden("targets_phone.post"),
                      "--posteriors", "word=" + golden("targets_word.post"),
                      "--map", "phone=" + golden("targets_phone.map"),
                      "--map", "word=" + golden("targets_word.map"),
                      "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string text = slurp(out);
  EXPECT_EQ(text, slurp(kGolden / "targets_3teacher.tsv"));
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), 5) << line;
  }
}

TEST_F(CliTest, TargetsLengthMismatch) {
  spit(path("a.txt"), "u\ta a b c\n");
  spit(path("p.post"), "u\t0\t0.5 0.5\nu\t1\t0.5 0.5\n");
  const auto r = run({"targets", "--align", path("a.txt").string(), "--posteriors",
                      "t=" + path("p.post").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("got 2 posteriors for 3 deduplicated tokens"), std::string::npos) << r.err;
  EXPECT_TRUE(r.out.empty());
}

TEST_F(CliTest, TargetsRejections) {
  const auto align = golden("targets_align.txt");
  // Unmapped token: the map lacks s3.
  spit(path("m.map"), "s1\tp1\ns2\tp1\n");
  auto r = run({"targets", "--align", align, "--posteriors", "phone=" + golden("targets_phone.post"),
                "--map", "phone=" + path("m.map").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("s3"), std::string::npos) << r.err;

  r = run({"targets", "--align", align, "--posteriors", "noequals"});
  EXPECT_EQ(r.code, 2);
  r = run({"targets", "--align", align, "--posteriors", "a=" + golden("targets_senone.post"),
           "--map", "b=" + golden("targets_phone.map")});
  EXPECT_EQ(r.code, 2);
  r = run({"targets", "--align", align, "--posteriors", "a=" + golden("targets_senone.post"),
           "--posteriors", "a=" + golden("targets_senone.post")});
  EXPECT_EQ(r.code, 2);
}

const std::vector<std::string> kSmallWorld = {
    "--set", "n_train=200", "--set", "n_test=200", "--set", "epochs=3",
    "--set", "teacher_epochs=2", "--set", "teacher_data_factor=2", "--set", "hidden=8"};

std::vector<std::string> with_small_world(std::vector<std::string> args) {
  args.insert(args.end(), kSmallWorld.begin(), kSmallWorld.end());
  return args;
}

TEST_F(CliTest, TrainLstAtLambdaOneMatchesBaseline) {
  const auto model = path("model.json");
  const auto base = run(with_small_world({"train", "--set", "method=baseline", "--set", "seed=4",
                                          "--out", model.string()}));
  ASSERT_EQ(base.code, 0) << base.err;
  const auto lst = run(with_small_world(
      {"train", "--set", "method=lst", "--set", "lambda=1", "--set", "seed=4"}));
  ASSERT_EQ(lst.code, 0) << lst.err;
  EXPECT_EQ(field(base.out, "acc"), field(lst.out, "acc"));
  EXPECT_EQ(field(base.out, "ece1"), field(lst.out, "ece1"));
  EXPECT_NE(base.out.find("method=baseline seed=4 "), std::string::npos) << base.out;
  EXPECT_NE(slurp(model).find("\"mtkd-toy-network\""), std::string::npos);
}

TEST_F(CliTest, TrainConfigFile) {
  spit(path("cfg.txt"), "# toy\nmethod = label_smooth\nepsilon = 0.2\nseed = 2\n");
  auto r = run(with_small_world({"train", "--config", path("cfg.txt").string()}));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("method=label_smooth seed=2 "), std::string::npos) << r.out;

  spit(path("bad.txt"), "method=lst\nlamda=0.3\n");
  r = run({"train", "--config", path("bad.txt").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("lamda"), std::string::npos);
  EXPECT_EQ(run({"train", "--set", "lambda"}).code, 2);
  EXPECT_EQ(run({"train", "--config", path("missing.txt").string()}).code, 2);
}

TEST_F(CliTest, SweepIsByteStable) {
  const auto a = path("a.csv"), b = path("b.csv");
  const auto args = [&](const fs::path& out) {
    return with_small_world({"sweep", "--lambdas", "0.25,0.75", "--seeds", "1,2", "--out",
                             out.string()});
  };
  ASSERT_EQ(run(args(a)).code, 0);
  ASSERT_EQ(run(args(b)).code, 0);
  const std::string csv = slurp(a);
  EXPECT_EQ(csv, slurp(b));
  EXPECT_EQ(line_count(csv), 1u + 2u * 2u * 2u);
  EXPECT_EQ(csv.rfind("method,lambda,seed,acc,ece1,ece2,ece3\n", 0), 0u);
  EXPECT_NE(csv.find("\nlst,0.250000,1,"), std::string::npos) << csv;
  EXPECT_NE(csv.find("\nmultitask,0.750000,2,"), std::string::npos) << csv;

  EXPECT_EQ(run(with_small_world({"sweep", "--methods", "baseline"})).code, 2);
  EXPECT_EQ(run(with_small_world({"sweep", "--lambdas", "0.5,x"})).code, 2);
  EXPECT_EQ(run(with_small_world({"sweep", "--lambdas", "1.5"})).code, 2);
}

}  // namespace
