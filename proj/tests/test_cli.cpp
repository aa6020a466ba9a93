#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "cooccur/io.hpp"
#include "cooccur/simulate.hpp"

using namespace cooccur;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("cooccur_cli_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

std::string cli_path() {
  const char* env = std::getenv("COOCCUR_CLI");
  REQUIRE_MESSAGE(env != nullptr, "COOCCUR_CLI must point at the cooccur binary");
  return env;
}

RunResult run_cli(const std::string& args, const TempDir& dir) {
  const std::string out_file = dir.file("_stdout.txt");
  const std::string err_file = dir.file("_stderr.txt");
  const std::string command =
      cli_path() + " " + args + " >" + out_file + " 2>" + err_file;
  const int status = std::system(command.c_str());
  RunResult result;
  result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = read_text_file(out_file);
  result.err = read_text_file(err_file);
  return result;
}

void write_raw(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

const char* kFixtureImages =
    "site_id,timestamp,label_true,label_pred\n"
    "S1,2017-01-15T08:00:00Z,lynx,lynx\n"
    "S1,2017-02-03,roe_deer,roe_deer\n"
    "S1,2017-03-10,chamois,lynx\n"
    "S2,2017-02-14,lynx,lynx\n"
    "S2,2017-04-01,roe_deer,chamois\n"
    "S3,2017-03-06,roe_deer,roe_deer\n"
    "S3,2017-04-11,lynx,lynx\n";

const char* kFixtureDeployments =
    "site_id,start,end\n"
    "S1,2017-01-01,2017-03-31\n"
    "S2,2017-02-01,2017-05-31\n"
    "S3,2017-03-05,2017-04-20\n";

std::string quoted(const std::string& path) { return "'" + path + "'"; }

/// Writes a params.json, simulates from it, and returns the output directory
/// holding history.json and images.csv.
void simulate_fixture(const TempDir& dir, const std::string& out_name,
                      const std::string& extra = "") {
  Eigen::VectorXd psi(4);
  psi << 0.25, 0.30, 0.15, 0.30;
  Eigen::VectorXd p(2);
  p << 0.55, 0.40;
  write_json_file(dir.file("params.json"),
                  params_to_json(make_params(psi, p), {"sp1", "sp2"}));
  const auto run = run_cli("simulate --params " + quoted(dir.file("params.json")) +
                               " --sites 80 --occasions 8 --seed 42 --out " +
                               quoted(dir.file(out_name)) + extra,
                           dir);
  REQUIRE_MESSAGE(run.code == 0, run.err);
}

}  // namespace

TEST_CASE("ingest matches the library and writes the envelope") {
  TempDir dir;
  write_raw(dir.file("images.csv"), kFixtureImages);
  write_raw(dir.file("deployments.csv"), kFixtureDeployments);
  const auto run = run_cli("ingest --images " + quoted(dir.file("images.csv")) +
                               " --deployments " + quoted(dir.file("deployments.csv")) +
                               " --species lynx,roe_deer,chamois --out " +
                               quoted(dir.file("out")),
                           dir);
  REQUIRE_MESSAGE(run.code == 0, run.err);

  const Json doc = read_json_file(dir.file("out/history.json"));
  CHECK(doc.at("schema_version") == 1);
  CHECK(doc.at("config").at("subcommand") == "ingest");
  const auto h = history_from_json(doc.at("history"));

  const auto records = read_images_csv(dir.file("images.csv"));
  const auto deployments = read_deployments_csv(dir.file("deployments.csv"));
  const auto expected = build_detection_history(records, deployments,
                                                {"lynx", "roe_deer", "chamois"},
                                                LabelSource::truth);
  CHECK(h.species == expected.species);
  CHECK(h.sites == expected.sites);
  CHECK(h.occasions == expected.occasions);
  CHECK(h.y == expected.y);

  const std::string summary = read_text_file(dir.file("out/summary.csv"));
  CHECK(summary.rfind("species,n_detections,n_active_cells,n_sites_detected,naive_occupancy\n",
                      0) == 0);
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 4);  // header + 3 species
}

TEST_CASE("ingest failure modes use exit code 2") {
  TempDir dir;
  SUBCASE("missing input file") {
    const auto run = run_cli("ingest --images " + quoted(dir.file("absent.csv")) +
                                 " --species lynx --out " + quoted(dir.file("out")),
                             dir);
    CHECK(run.code == 2);
    CHECK(run.err.find("absent.csv") != std::string::npos);
  }
  SUBCASE("predicted labels requested but absent") {
    write_raw(dir.file("images.csv"),
              "site_id,timestamp,label_true,label_pred\nS1,2017-01-15,lynx,\n");
    const auto run = run_cli("ingest --images " + quoted(dir.file("images.csv")) +
                                 " --species lynx --label-source predicted --out " +
                                 quoted(dir.file("out")),
                             dir);
    CHECK(run.code == 2);
    CHECK(run.err.find("predicted") != std::string::npos);
  }
  SUBCASE("required flag missing") {
    write_raw(dir.file("images.csv"), kFixtureImages);
    const auto run =
        run_cli("ingest --images " + quoted(dir.file("images.csv")), dir);
    CHECK(run.code == 2);
  }
}

TEST_CASE("metrics reports the confusion structure") {
  TempDir dir;
  write_raw(dir.file("images.csv"), kFixtureImages);
  const auto run = run_cli("metrics --images " + quoted(dir.file("images.csv")) +
                               " --out " + quoted(dir.file("out")),
                           dir);
  REQUIRE_MESSAGE(run.code == 0, run.err);
  const Json doc = read_json_file(dir.file("out/metrics.json"));
  const Json& metrics = doc.at("metrics");
  // Fixture: 5 of 7 predictions agree.
  CHECK(metrics.at("accuracy").get<double>() == doctest::Approx(5.0 / 7.0).epsilon(1e-12));
  const auto cm = read_confusion_csv(dir.file("out/confusion.csv"));
  CHECK(cm.labels == std::vector<SpeciesLabel>{"chamois", "lynx", "roe_deer"});
  CHECK(cm.total() == 7);

  write_raw(dir.file("no_preds.csv"),
            "site_id,timestamp,label_true,label_pred\nS1,2017-01-15,lynx,\n");
  const auto bad = run_cli("metrics --images " + quoted(dir.file("no_preds.csv")) +
                               " --out " + quoted(dir.file("out2")),
                           dir);
  CHECK(bad.code == 2);
}

TEST_CASE("simulate is seed-deterministic from the command line") {
  TempDir dir;
  // The resolved config (with the output directory) is embedded for
  // provenance, so byte-identity is over reruns into the same directory.
  simulate_fixture(dir, "a");
  const std::string first_history = read_text_file(dir.file("a/history.json"));
  const std::string first_images = read_text_file(dir.file("a/images.csv"));
  const std::string first_deployments = read_text_file(dir.file("a/deployments.csv"));
  simulate_fixture(dir, "a");
  CHECK(read_text_file(dir.file("a/history.json")) == first_history);
  CHECK(read_text_file(dir.file("a/images.csv")) == first_images);
  CHECK(read_text_file(dir.file("a/deployments.csv")) == first_deployments);

  const auto reseeded = run_cli("simulate --params " + quoted(dir.file("params.json")) +
                                    " --sites 80 --occasions 8 --seed 43 --out " +
                                    quoted(dir.file("c")),
                                dir);
  REQUIRE(reseeded.code == 0);
  CHECK(read_json_file(dir.file("a/history.json")).at("history") !=
        read_json_file(dir.file("c/history.json")).at("history"));

  const auto h = history_from_json(read_json_file(dir.file("a/history.json")).at("history"));
  CHECK(h.n_sites() == 80);
  CHECK(h.n_occasions() == 8);
  CHECK_NOTHROW(h.validate());
}

TEST_CASE("fit runs are byte-identical across reruns and thread counts") {
  TempDir dir;
  simulate_fixture(dir, "sim");
  const std::string history = quoted(dir.file("sim/history.json"));
  const std::string out = quoted(dir.file("f1"));
  const auto first = run_cli("fit --history " + history + " --starts 2 --out " + out, dir);
  REQUIRE_MESSAGE(first.code == 0, first.err);
  const std::string base = read_text_file(dir.file("f1/fit-result.json"));
  const std::string base_estimates = read_text_file(dir.file("f1/estimates.csv"));

  const auto rerun = run_cli("fit --history " + history + " --starts 2 --out " + out, dir);
  REQUIRE_MESSAGE(rerun.code == 0, rerun.err);
  CHECK(read_text_file(dir.file("f1/fit-result.json")) == base);

  // --threads is absent from the stored config precisely because it can
  // never change results, so even the threaded rerun is byte-identical.
  const auto threaded =
      run_cli("fit --history " + history + " --starts 2 --threads 2 --out " + out, dir);
  REQUIRE_MESSAGE(threaded.code == 0, threaded.err);
  CHECK(read_text_file(dir.file("f1/fit-result.json")) == base);
  CHECK(read_text_file(dir.file("f1/estimates.csv")) == base_estimates);

  const Json doc = read_json_file(dir.file("f1/fit-result.json"));
  CHECK(doc.at("fit").at("converged").get<bool>());
  CHECK_FALSE(doc.at("config").contains("threads"));  // threads never alter results
  const auto result = fit_result_from_json(doc.at("fit"));
  CHECK(result.species == std::vector<SpeciesLabel>{"sp1", "sp2"});
}

TEST_CASE("fit from raw images equals fit from the saved history") {
  TempDir dir;
  simulate_fixture(dir, "sim");

  // simulate emits the effort pattern as deployments.csv precisely so its
  // images.csv can be re-ingested without reconstructing the windows by hand.
  const auto via_history = run_cli("fit --history " + quoted(dir.file("sim/history.json")) +
                                       " --starts 2 --out " + quoted(dir.file("fh")),
                                   dir);
  REQUIRE_MESSAGE(via_history.code == 0, via_history.err);
  const auto via_images = run_cli("fit --images " + quoted(dir.file("sim/images.csv")) +
                                      " --deployments " + quoted(dir.file("sim/deployments.csv")) +
                                      " --species sp1,sp2 --starts 2 --out " +
                                      quoted(dir.file("fi")),
                                  dir);
  REQUIRE_MESSAGE(via_images.code == 0, via_images.err);

  // The config blocks differ (different flags), the fitted payloads must not.
  const Json a = read_json_file(dir.file("fh/fit-result.json"));
  const Json b = read_json_file(dir.file("fi/fit-result.json"));
  CHECK(a.at("fit") == b.at("fit"));
}

TEST_CASE("simulated images and deployments re-ingest to the same history") {
  TempDir dir;
  // A nonzero missing rate makes the emitted deployments.csv carry several
  // windows per site (one per run of surveyed months).
  simulate_fixture(dir, "sim", " --missing-rate 0.3");
  const auto run = run_cli("ingest --images " + quoted(dir.file("sim/images.csv")) +
                               " --deployments " + quoted(dir.file("sim/deployments.csv")) +
                               " --species sp1,sp2 --out " + quoted(dir.file("back")),
                           dir);
  REQUIRE_MESSAGE(run.code == 0, run.err);
  CHECK_MESSAGE(run.err.empty(), run.err);  // every record falls inside its window
  CHECK(read_json_file(dir.file("back/history.json")).at("history") ==
        read_json_file(dir.file("sim/history.json")).at("history"));
}

TEST_CASE("fit input validation and numerical failure exit codes") {
  TempDir dir;
  simulate_fixture(dir, "sim");
  SUBCASE("both sources") {
    const auto run = run_cli("fit --history " + quoted(dir.file("sim/history.json")) +
                                 " --images " + quoted(dir.file("sim/images.csv")) +
                                 " --species sp1,sp2 --out " + quoted(dir.file("out")),
                             dir);
    CHECK(run.code == 2);
    CHECK(run.err.find("not both") != std::string::npos);
  }
  SUBCASE("no source") {
    const auto run = run_cli("fit --out " + quoted(dir.file("out")), dir);
    CHECK(run.code == 2);
  }
  SUBCASE("images without species") {
    const auto run = run_cli("fit --images " + quoted(dir.file("sim/images.csv")) +
                                 " --out " + quoted(dir.file("out")),
                             dir);
    CHECK(run.code == 2);
    CHECK(run.err.find("--species") != std::string::npos);
  }
  SUBCASE("starved optimizer reports a numerical failure") {
    const auto run = run_cli("fit --history " + quoted(dir.file("sim/history.json")) +
                                 " --max-iter 1 --starts 1 --out " + quoted(dir.file("out")),
                             dir);
    CHECK(run.code == 3);
    CHECK(run.err.find("no optimizer start") != std::string::npos);
  }
}

TEST_CASE("derive recomputes intervals at a new level") {
  TempDir dir;
  simulate_fixture(dir, "sim");
  const auto fit_run = run_cli("fit --history " + quoted(dir.file("sim/history.json")) +
                                   " --starts 2 --out " + quoted(dir.file("fitted")),
                               dir);
  REQUIRE_MESSAGE(fit_run.code == 0, fit_run.err);
  const auto run = run_cli("derive --fit " + quoted(dir.file("fitted/fit-result.json")) +
                               " --level 0.9 --out " + quoted(dir.file("derived")),
                           dir);
  REQUIRE_MESSAGE(run.code == 0, run.err);

  const Json doc = read_json_file(dir.file("derived/derived.json"));
  CHECK(doc.at("config").at("level").get<double>() == 0.9);
  const std::string estimates = read_text_file(dir.file("derived/estimates.csv"));
  CHECK(estimates.find(",0.9\n") != std::string::npos);
  CHECK(estimates.find(",0.95\n") == std::string::npos);

  // Narrower level, narrower intervals than the 0.95 originals.
  const Json fit_doc = read_json_file(dir.file("fitted/fit-result.json"));
  const auto wide = fit_doc.at("fit").at("estimates")[0];
  const auto narrow = doc.at("estimates")[0];
  REQUIRE(wide.at("quantity") == narrow.at("quantity"));
  CHECK(narrow.at("lower").get<double>() >= wide.at("lower").get<double>());
  CHECK(narrow.at("upper").get<double>() <= wide.at("upper").get<double>());
}

TEST_CASE("corrupt rewrites predictions deterministically") {
  TempDir dir;
  simulate_fixture(dir, "sim");
  write_raw(dir.file("identity.csv"), "label,sp1,sp2\nsp1,1,0\nsp2,0,1\n");
  const auto identity = run_cli("corrupt --images " + quoted(dir.file("sim/images.csv")) +
                                    " --probs " + quoted(dir.file("identity.csv")) +
                                    " --out " + quoted(dir.file("id")),
                                dir);
  REQUIRE_MESSAGE(identity.code == 0, identity.err);
  const auto corrupted = read_images_csv(dir.file("id/corrupted.csv"));
  const auto originals = read_images_csv(dir.file("sim/images.csv"));
  REQUIRE(corrupted.size() == originals.size());
  for (std::size_t k = 0; k < corrupted.size(); ++k) {
    REQUIRE(corrupted[k].label_pred.has_value());
    CHECK(*corrupted[k].label_pred == corrupted[k].label_true);
    CHECK(corrupted[k].site_id == originals[k].site_id);
  }

  write_raw(dir.file("lossy.csv"), "label,sp1,sp2\nsp1,0.7,0.3\nsp2,0.2,0.8\n");
  for (const std::string out : {"l1", "l2"}) {
    const auto run = run_cli("corrupt --images " + quoted(dir.file("sim/images.csv")) +
                                 " --probs " + quoted(dir.file("lossy.csv")) +
                                 " --seed 9 --out " + quoted(dir.file(out)),
                             dir);
    REQUIRE_MESSAGE(run.code == 0, run.err);
  }
  CHECK(read_text_file(dir.file("l1/corrupted.csv")) ==
        read_text_file(dir.file("l2/corrupted.csv")));
  const auto reseeded = run_cli("corrupt --images " + quoted(dir.file("sim/images.csv")) +
                                    " --probs " + quoted(dir.file("lossy.csv")) +
                                    " --seed 10 --out " + quoted(dir.file("l3")),
                                dir);
  REQUIRE(reseeded.code == 0);
  CHECK(read_text_file(dir.file("l1/corrupted.csv")) !=
        read_text_file(dir.file("l3/corrupted.csv")));
}

TEST_CASE("experiment with a perfect classifier reports zero deltas") {
  TempDir dir;
  simulate_fixture(dir, "sim");
  write_raw(dir.file("identity.csv"), "label,sp1,sp2\nsp1,1,0\nsp2,0,1\n");

  const auto run = run_cli("experiment --images " + quoted(dir.file("sim/images.csv")) +
                               " --deployments " + quoted(dir.file("sim/deployments.csv")) +
                               " --species sp1,sp2 --probs " + quoted(dir.file("identity.csv")) +
                               " --starts 2 --out " + quoted(dir.file("out")),
                           dir);
  REQUIRE_MESSAGE(run.code == 0, run.err);

  const Json doc = read_json_file(dir.file("out/experiment.json"));
  const Json& experiment = doc.at("experiment");
  REQUIRE_FALSE(experiment.at("deltas").empty());
  for (const auto& row : experiment.at("deltas")) {
    CHECK(row.at("delta").get<double>() == 0.0);
  }
  CHECK(experiment.at("metrics").at("accuracy").get<double>() == 1.0);

  const std::string csv = read_text_file(dir.file("out/experiment.csv"));
  CHECK(csv.rfind("dataset,quantity,point,lower,upper,level\n", 0) == 0);
  CHECK(csv.find("truth,") != std::string::npos);
  CHECK(csv.find("classified,") != std::string::npos);
}

TEST_CASE("bad invocations never exit zero") {
  TempDir dir;
  CHECK(run_cli("", dir).code != 0);
  CHECK(run_cli("frobnicate", dir).code != 0);
  CHECK(run_cli("fit --no-such-flag", dir).code != 0);
  CHECK(run_cli("--help", dir).code == 0);
  CHECK(run_cli("fit --help", dir).code == 0);
}
