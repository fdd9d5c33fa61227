#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "cfrec/checkpoint.hpp"
#include "cfrec/cli.hpp"
#include "cfrec/model.hpp"
#include "test_helpers.hpp"

using namespace cfrec;
using testutil::TempDir;
using testutil::read_file;
using testutil::write_file;

namespace {

// A deterministic synthetic dataset in the MovieLens-1M on-disk layout.
void write_fixture(const TempDir& dir, std::uint64_t seed = 33) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> star(1, 5);
  std::ostringstream ratings;
  for (int u = 1; u <= 30; ++u) {
    for (int i = 1; i <= 25; ++i) {
      if (coin(rng) < 0.55) {
        ratings << u << "::" << (i + 100) << "::" << star(rng) << "::9000" << u << i << "\n";
      }
    }
  }
  write_file(dir.file("ratings.dat"), ratings.str());

  std::ostringstream movies;
  const char* genres[] = {"Action", "Comedy", "Drama"};
  for (int i = 1; i <= 25; ++i) {
    movies << (i + 100) << "::Title " << i << " (2000)::" << genres[i % 3] << "\n";
  }
  write_file(dir.file("movies.dat"), movies.str());
}

std::string base_config(const TempDir& dir, const std::string& extra = "") {
  std::string text =
      "ratings = " + dir.file("ratings.dat") + "\n" +
      "orientation = item\n"
      "train_fraction = 0.85\n"
      "bottleneck = 6\n"
      "epochs = 8\n"
      "learning_rate = 0.25\n"
      "alpha = 1.0\n"
      "beta = 0.6\n"
      "mask_ratio = 0.2\n"
      "weight_decay = 0.0001\n"
      "seed = 31\n" +
      extra;
  const std::string path = dir.file("config.txt");
  write_file(path, text);
  return path;
}

int run(const std::vector<std::string>& args, std::string* captured = nullptr) {
  std::ostringstream out;
  const int code = run_cli(args, out);
  if (captured) *captured = out.str();
  return code;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("split writes canonical files deterministically") {
  TempDir dir("clisplit");
  write_fixture(dir);
  const std::string cfg = base_config(dir);

  REQUIRE(run({"split", "--config", cfg, "--output", dir.file("a")}) == 0);
  REQUIRE(run({"split", "--config", cfg, "--output", dir.file("b")}) == 0);
  CHECK(read_file(dir.file("a/train.tsv")) == read_file(dir.file("b/train.tsv")));
  CHECK(read_file(dir.file("a/test.tsv")) == read_file(dir.file("b/test.tsv")));
  CHECK(!read_file(dir.file("a/users.map.tsv")).empty());

  REQUIRE(run({"split", "--config", cfg, "--output", dir.file("c"), "--seed", "99"}) == 0);
  CHECK(read_file(dir.file("a/train.tsv")) != read_file(dir.file("c/train.tsv")));
}

TEST_CASE("split with fraction one leaves the test file empty") {
  TempDir dir("clifull");
  write_fixture(dir);
  const std::string cfg = base_config(dir, "train_fraction = 1.0\n");
  REQUIRE(run({"split", "--config", cfg, "--output", dir.file("s")}) == 0);
  CHECK(read_file(dir.file("s/test.tsv")).empty());
}

TEST_CASE("train with zero epochs checkpoints the initialization") {
  TempDir dir("cliinit");
  write_fixture(dir);
  const std::string cfg = base_config(dir, "epochs = 0\n");
  REQUIRE(run({"split", "--config", cfg, "--output", dir.file("s")}) == 0);
  REQUIRE(run({"train", "--config", cfg, "--data", dir.file("s"), "--output", dir.file("t")}) ==
          0);
  Checkpoint ckpt = load_checkpoint(dir.file("t/model.ckpt"));
  REQUIRE(ckpt.autoencoder.has_value());
  CHECK(ckpt.epochs_trained == 0);
  // Fresh init with the same dims and seed must match exactly.
  auto expected = init_autoencoder(ckpt.autoencoder->input_dim, ckpt.autoencoder->bottleneck,
                                   ckpt.autoencoder->side_dim, 31);
  CHECK((ckpt.autoencoder->encoder_w - expected.encoder_w).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ckpt.autoencoder->decoder_w - expected.decoder_w).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("identical train runs produce byte-identical checkpoints") {
  TempDir dir("clidet");
  write_fixture(dir);
  const std::string cfg = base_config(dir);
  REQUIRE(run({"split", "--config", cfg, "--output", dir.file("s")}) == 0);
  REQUIRE(run({"train", "--config", cfg, "--data", dir.file("s"), "--output", dir.file("t1"),
               "--threads", "1"}) == 0);
  REQUIRE(run({"train", "--config", cfg, "--data", dir.file("s"), "--output", dir.file("t2"),
               "--threads", "1"}) == 0);
  CHECK(read_file(dir.file("t1/model.ckpt")) == read_file(dir.file("t2/model.ckpt")));
}

TEST_CASE("resuming a checkpoint reproduces the uninterrupted run") {
  TempDir dir("cliresume");
  write_fixture(dir);
  const std::string cfg2 = base_config(dir, "epochs = 2\n");
  REQUIRE(run({"split", "--config", cfg2, "--output", dir.file("s")}) == 0);
  REQUIRE(run({"train", "--config", cfg2, "--data", dir.file("s"), "--output", dir.file("full")}) ==
          0);

  const std::string cfg1 = dir.file("config1.txt");
  write_file(cfg1, read_file(cfg2));
  write_file(cfg1, read_file(cfg2) + "epochs = 1\n");  // last assignment wins
  REQUIRE(run({"train", "--config", cfg1, "--data", dir.file("s"), "--output", dir.file("half")}) ==
          0);
  REQUIRE(run({"train", "--config", cfg1, "--data", dir.file("s"), "--output", dir.file("rest"),
               "--resume", dir.file("half/model.ckpt")}) == 0);

  Checkpoint full = load_checkpoint(dir.file("full/model.ckpt"));
  Checkpoint rest = load_checkpoint(dir.file("rest/model.ckpt"));
  CHECK(full.epochs_trained == 2);
  CHECK(rest.epochs_trained == 2);
  CHECK((full.autoencoder->encoder_w - rest.autoencoder->encoder_w).cwiseAbs().maxCoeff() == 0.0);
  CHECK((full.autoencoder->decoder_w - rest.autoencoder->decoder_w).cwiseAbs().maxCoeff() == 0.0);

  // The resumed second epoch reports the same loss as the straight run's.
  const std::string full_report = read_file(dir.file("full/train_report.tsv"));
  const std::string rest_report = read_file(dir.file("rest/train_report.tsv"));
  CHECK(full_report.substr(full_report.find("\n1\t")) ==
        rest_report.substr(rest_report.find("\n1\t")));
}

TEST_CASE("evaluate prints the same rmse the library computes") {
  TempDir dir("clieval");
  write_fixture(dir);
  const std::string cfg = base_config(dir, "genres = " + dir.file("movies.dat") + "\n");
  REQUIRE(run({"split", "--config", cfg, "--output", dir.file("s")}) == 0);
  REQUIRE(run({"train", "--config", cfg, "--data", dir.file("s"), "--output", dir.file("t")}) ==
          0);
  std::string output;
  REQUIRE(run({"evaluate", "--config", cfg, "--data", dir.file("s"), "--checkpoint",
               dir.file("t/model.ckpt"), "--output", dir.file("e"), "--quintiles"},
              &output) == 0);
  CHECK(output.find("rmse\t") == 0);
  CHECK(output.find("quintile_5") != std::string::npos);
  const std::string report = read_file(dir.file("e/eval_report.tsv"));
  CHECK(report.find("quintile_1") != std::string::npos);

  // Same command, same result: one code path end to end.
  std::string again;
  REQUIRE(run({"evaluate", "--config", cfg, "--data", dir.file("s"), "--checkpoint",
               dir.file("t/model.ckpt"), "--output", dir.file("e2"), "--quintiles"},
              &again) == 0);
  CHECK(output == again);
}

TEST_CASE("tune runs end to end, logs population x generations rows and resumes") {
  TempDir dir("clitune");
  write_fixture(dir);
  const std::string cfg = base_config(dir,
                                      "population = 4\n"
                                      "generations = 3\n"
                                      "epochs = 2\n"
                                      "gene_bottleneck = 3,6\n"
                                      "gene_learning_rate = 0.05,0.4\n");
  REQUIRE(run({"split", "--config", cfg, "--output", dir.file("s")}) == 0);
  REQUIRE(run({"tune", "--config", cfg, "--data", dir.file("s"), "--output", dir.file("g")}) == 0);
  const std::string log = read_file(dir.file("g/tune_log.tsv"));
  CHECK(std::count(log.begin(), log.end(), '\n') == 1 + 4 * 3);
  CHECK(!read_file(dir.file("g/best_genome.txt")).empty());

  // Interrupt after two generations, resume, and compare the final best.
  const std::string cfg_half = dir.file("config_half.txt");
  write_file(cfg_half, read_file(cfg) + "generations = 2\n");
  REQUIRE(run({"tune", "--config", cfg_half, "--data", dir.file("s"), "--output",
               dir.file("h")}) == 0);
  REQUIRE(run({"tune", "--config", cfg, "--data", dir.file("s"), "--output", dir.file("h"),
               "--resume"}) == 0);
  CHECK(read_file(dir.file("h/best_genome.txt")) == read_file(dir.file("g/best_genome.txt")));
}

TEST_CASE("predict answers in scale, handles cold entities and ad-hoc ratings") {
  TempDir dir("clipred");
  write_fixture(dir);
  // Item 200 appears in the genre file but has no ratings: its row is cold.
  write_file(dir.file("movies.dat"),
             read_file(dir.file("movies.dat")) + "200::Unrated (2001)::Drama\n");
  const std::string cfg = base_config(dir, "genres = " + dir.file("movies.dat") + "\n");
  REQUIRE(run({"split", "--config", cfg, "--output", dir.file("s"), "--seed", "31"}) == 0);
  REQUIRE(run({"train", "--config", cfg, "--data", dir.file("s"), "--output", dir.file("t")}) ==
          0);

  std::string output;
  REQUIRE(run({"predict", "--config", cfg, "--data", dir.file("s"), "--checkpoint",
               dir.file("t/model.ckpt"), "--user", "3", "--item", "105"},
              &output) == 0);
  const double value = std::stod(output);
  CHECK(value >= 1.0);
  CHECK(value <= 5.0);

  // Cold item row: the bias fallback answers with the scale midpoint.
  std::string cold;
  REQUIRE(run({"predict", "--config", cfg, "--data", dir.file("s"), "--checkpoint",
               dir.file("t/model.ckpt"), "--user", "3", "--item", "200"},
              &cold) == 0);
  CHECK(std::stod(cold) == doctest::Approx(3.0));

  // Ad-hoc ratings refine the prediction without retraining.
  std::string refined;
  REQUIRE(run({"predict", "--config", cfg, "--data", dir.file("s"), "--checkpoint",
               dir.file("t/model.ckpt"), "--user", "3", "--item", "105", "--rate", "7=5",
               "--rate", "12=5"},
              &refined) == 0);
  CHECK(std::stod(refined) != doctest::Approx(value));
}

TEST_CASE("exit codes distinguish usage and data errors") {
  TempDir dir("clicodes");
  write_fixture(dir);
  const std::string cfg = base_config(dir);
  CHECK(run({"no-such-command"}) == 1);
  CHECK(run({"split", "--config", dir.file("missing.txt"), "--output", dir.file("x")}) == 2);
  write_file(dir.file("badratings.txt"), "ratings = " + dir.file("nope.dat") + "\n");
  CHECK(run({"split", "--config", dir.file("badratings.txt"), "--output", dir.file("x")}) == 2);
  write_file(dir.file("badkey.txt"), "ratings = " + dir.file("ratings.dat") +
                                         "\ncorruption = gaussian\n");
  CHECK(run({"split", "--config", dir.file("badkey.txt"), "--output", dir.file("x")}) == 1);
}

}  // TEST_SUITE
