#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const char* kSmallConfig = R"json({
  "master_seed": 7,
  "workers": 2,
  "out": "OUTDIR",
  "dataset": {
    "upstream": { "classes": 4, "dim": 4, "count": 600, "separation": 6.0, "seed": 11 },
    "downstream": { "classes": 4, "dim": 4, "count": 400, "separation": 6.0, "seed": 23 },
    "shift": { "rotation_angle": 0.5, "label_permutation": [1, 0, 3, 2], "class_subset": [0, 1] },
    "split": { "train": 0.6, "val": 0.2, "test": 0.2, "seed": 3 }
  },
  "model": { "architecture": "mlp", "input_dim": 4, "output_dim": 4, "hidden_sizes": [8], "activation": "relu" },
  "pretrain_opt": { "base_lr": 0.1, "batch_size": 64, "epochs": 8 },
  "probe_opt": { "base_lr": 0.1, "batch_size": 64, "epochs": 8 },
  "sample_opt": { "base_lr": 0.05, "batch_size": 64, "epochs": 5 },
  "sampler": { "samples": 3, "alpha": 1.0, "blocks": 10, "search_samples": 2, "alpha_grid": [0.1, 1.0] },
  "l2sp": { "beta": 10.0 }
})json";

struct CliRunner {
  fs::path work = fs::temp_directory_path() / "nptl_cli_test";
  fs::path config_path;

  CliRunner() {
    fs::remove_all(work);
    fs::create_directories(work);
    config_path = work / "config.json";
    std::string text = kSmallConfig;
    const std::string out = (work / "run").string();
    text.replace(text.find("OUTDIR"), 6, out);
    std::ofstream os(config_path);
    os << text;
  }
  ~CliRunner() { fs::remove_all(work); }

  int run(const std::string& args) const {
    std::ostringstream cmd;
    cmd << NPTL_CLI_PATH << " --config " << config_path.string() << " " << args
        << " >/dev/null 2>&1";
    const int status = std::system(cmd.str().c_str());
    return WEXITSTATUS(status);
  }

  fs::path out() const { return work / "run"; }
};

std::vector<char> slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(is), {});
}

}  // namespace

TEST_CASE("cli: full pipeline, determinism, and failure modes") {
  CliRunner cli;

  REQUIRE(cli.run("gen-data") == 0);
  REQUIRE(cli.run("pretrain") == 0);
  REQUIRE(cli.run("probe") == 0);

  SUBCASE("sampling twice with the same seed is byte identical") {
    REQUIRE(cli.run("sample --samples 1 --seed 7") == 0);
    const auto first = slurp(cli.out() / "nptl" / "member_000.params");
    REQUIRE(cli.run("sample --samples 1 --seed 7") == 0);
    const auto second = slurp(cli.out() / "nptl" / "member_000.params");
    REQUIRE(!first.empty());
    CHECK(first == second);
  }

  SUBCASE("pipeline emits one metric row per method") {
    REQUIRE(cli.run("sweep-alpha") == 0);
    REQUIRE(cli.run("sample --use-sweep") == 0);
    REQUIRE(cli.run("evaluate") == 0);
    REQUIRE(cli.run("sample --method ensemble-l2sp") == 0);
    REQUIRE(cli.run("evaluate --ensemble " + (cli.out() / "ensemble-l2sp").string()) == 0);
    REQUIRE(cli.run("sample --method finetune") == 0);
    REQUIRE(cli.run("evaluate --ensemble " + (cli.out() / "finetune").string()) == 0);
    REQUIRE(cli.run("soup") == 0);
    REQUIRE(cli.run("report") == 0);

    std::ifstream is(cli.out() / "report_summary.csv");
    std::string line;
    std::getline(is, line);  // header
    std::vector<std::string> methods;
    while (std::getline(is, line)) methods.push_back(line.substr(0, line.find(',')));
    CHECK(std::find(methods.begin(), methods.end(), "nptl") != methods.end());
    CHECK(std::find(methods.begin(), methods.end(), "ensemble-l2sp") != methods.end());
    CHECK(std::find(methods.begin(), methods.end(), "finetune") != methods.end());
    CHECK(std::find(methods.begin(), methods.end(), "nptl-soup") != methods.end());
  }

  SUBCASE("missing member file fails validation with exit 2") {
    REQUIRE(cli.run("sample --samples 2") == 0);
    fs::remove(cli.out() / "nptl" / "member_001.params");
    CHECK(cli.run("evaluate") == 2);
  }

  SUBCASE("diagnose runs clean") { CHECK(cli.run("diagnose") == 0); }
}

TEST_CASE("cli: config validation failures exit with 2") {
  CliRunner cli;
  {
    std::ofstream os(cli.config_path);
    os << "{ \"model\": { \"architecture\": \"mlp\" } }";
  }
  CHECK(cli.run("gen-data") == 2);
  {
    std::ofstream os(cli.config_path);
    os << "this is not json";
  }
  CHECK(cli.run("gen-data") == 2);
}

TEST_CASE("cli: report aggregates mean and sample std") {
  CliRunner cli;
  fs::create_directories(cli.out());
  {
    std::ofstream os(cli.out() / "results.csv");
    os << "subcommand,method,dataset,seed,config_hash,member_count,acc,nll,ece\n";
    os << "evaluate,nptl,d,1,0,10,0.9,0.1,0.02\n";
    os << "evaluate,nptl,d,2,0,10,0.9,0.2,0.02\n";
    os << "evaluate,nptl,d,3,0,10,0.9,0.3,0.02\n";
    os << "gen-data,,,1,0,,,,\n";
  }
  REQUIRE(cli.run("report") == 0);
  std::ifstream is(cli.out() / "report_summary.csv");
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  std::stringstream ss(row);
  std::vector<std::string> cells;
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  REQUIRE(cells.size() >= 9);
  CHECK(cells[0] == "nptl");
  CHECK(std::stod(cells[5]) == doctest::Approx(0.2));   // nll mean
  CHECK(std::stod(cells[6]) == doctest::Approx(0.1));   // nll sample std
}

TEST_CASE("cli: empty results is a validation error") {
  CliRunner cli;
  CHECK(cli.run("report") == 2);
}
