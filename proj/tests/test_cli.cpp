#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "cli.hpp"
#include "doctest.h"
#include "dscat/io.hpp"
#include "dscat/parallel.hpp"
#include "json.hpp"

using namespace dscat;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path dir;
  std::ostringstream out, err;
  Workspace() {
    dir = fs::temp_directory_path() / ("dscat_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }

  int run(std::vector<std::string> args) {
    out.str("");
    err.str("");
    for (auto& a : args)
      if (a.rfind("@", 0) == 0) a = (dir / a.substr(1)).string();
    return cli::run_command(args, out, err);
  }

  std::string read(const std::string& name) const {
    std::ifstream f(dir / name, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
  }

  nlohmann::json json(const std::string& name) const { return nlohmann::json::parse(read(name)); }
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit with 1") {
    Workspace w;
    CHECK(w.run({}) == cli::kUsageError);
    CHECK(w.run({"sweep", "--samples", "1", "--out", "@s.csv"}) == cli::kUsageError);
    CHECK(w.run({"sweep", "--min", "2", "--max", "1", "--out", "@s.csv"}) == cli::kUsageError);
    CHECK(w.run({"sweep", "--set", "speed=3", "--out", "@s.csv"}) == cli::kUsageError);
    CHECK(w.err.str().find("unknown key") != std::string::npos);
    CHECK(w.run({"frobnicate"}) == cli::kUsageError);
    {
      std::ofstream f(w.dir / "bad.cfg");
      f << "omega=-1\n";
    }
    CHECK(w.run({"sweep", "--config", "@bad.cfg", "--out", "@s.csv"}) == cli::kUsageError);
    CHECK(w.err.str().find("omega > 0") != std::string::npos);
    CHECK(!fs::exists(w.dir / "s.manifest.json"));
  }

  TEST_CASE("help documents defaults") {
    Workspace w;
    CHECK(w.run({"--help"}) == cli::kSuccess);
    CHECK(w.out.str().find("omega=0.7") != std::string::npos);
    CHECK(w.run({"sweep", "--help"}) == cli::kSuccess);
    CHECK(w.out.str().find("1.46") != std::string::npos);
  }

  TEST_CASE("sweep output is independent of the worker count") {
    Workspace w;
    const std::vector<std::string> base = {"sweep", "--min", "1.55", "--max", "1.56", "--samples", "12",
                                           "--set", "launch_phase=4.66", "--set", "k_max=60", "--strobe"};
    auto with = [&](const std::string& workers, const std::string& out) {
      auto a = base;
      a.insert(a.end(), {"--workers", workers, "--out", "@" + out});
      return a;
    };
    REQUIRE(w.run(with("1", "one.csv")) == cli::kSuccess);
    REQUIRE(w.run(with("3", "three.csv")) == cli::kSuccess);
    CHECK(w.read("one.csv") == w.read("three.csv"));
    CHECK(w.read("one.strobe.csv") == w.read("three.strobe.csv"));
    CHECK(w.read("one.segments.json") == w.read("three.segments.json"));

    const auto m = w.json("three.manifest.json");
    CHECK(m["command"] == "sweep");
    CHECK(m["complete"] == true);
    CHECK(m["workers"] == 3);
    CHECK(m["config"]["launch_phase"] == "4.66");
    REQUIRE(m["outputs"].size() == 3);
    for (const auto& o : m["outputs"]) {
      const fs::path p = o["path"].get<std::string>();
      CHECK(o["sha256"] == sha256_file(p));
    }

    const CsvData d = read_csv(w.dir / "one.csv");
    CHECK(d.rows.size() == 12);
    CHECK(d.column("input").front() == 1.55);
    CHECK(d.column("input").back() == 1.56);
  }

  TEST_CASE("runtime errors exit with 2 and leave an incomplete manifest") {
    Workspace w;
    CHECK(w.run({"return-map", "--mode", "bisect", "--set", "e0=0", "--tau", "0", "--p-in", "0.2", "--p-out", "0.5",
                 "--tol", "1e-3", "--out", "@b.csv"}) == cli::kRuntimeError);
    const auto m = w.json("b.manifest.json");
    CHECK(m["complete"] == false);
    CHECK(m["error"].get<std::string>().find("same side") != std::string::npos);
    CHECK(m["outputs"].empty());
  }

  TEST_CASE("return-map bisection at zero amplitude") {
    Workspace w;
    REQUIRE(w.run({"return-map", "--mode", "bisect", "--set", "e0=0", "--tau", "0", "--p-in", "0.5", "--p-out", "2",
                   "--tol", "1e-6", "--out", "@b.csv"}) == cli::kSuccess);
    const auto b = w.json("b.boundary.json");
    CHECK(std::abs(b["p_boundary"].get<double>() - std::sqrt(2.0 * 0.588)) < 1e-4);
  }

  TEST_CASE("amplitude sweep reports a continuous N_c jump") {
    Workspace w;
    REQUIRE(w.run({"e0-sweep", "--min", "2.0491", "--max", "2.0507", "--samples", "9", "--out", "@e.csv"}) ==
            cli::kSuccess);
    const auto seg = w.json("e.segments.json");
    REQUIRE(seg["nc_jumps"].size() == 1);
    CHECK(seg["nc_jumps"][0]["nc_left"] == 9);
    CHECK(seg["nc_jumps"][0]["nc_right"] == 11);
    CHECK(seg["nc_jumps"][0]["continuous"] == true);
    const auto m = w.json("e.manifest.json");
    CHECK(m["config"]["driver"] == "f1");
  }

  TEST_CASE("gap table and missing saddles") {
    Workspace w;
    CHECK(w.run({"gamma", "--set", "e0=0", "--tree-depth", "4", "--out", "@g.csv"}) == cli::kRuntimeError);
    const CsvData d = read_csv(w.dir / "g.csv");
    REQUIRE(d.rows.size() == 4);
    CHECK(d.column("gaps") == std::vector<double>{2, 6, 18, 54});
    CHECK(d.column("cumulative") == std::vector<double>{2, 8, 26, 80});
    const auto m = w.json("g.manifest.json");
    CHECK(m["complete"] == false);
    CHECK(m["outputs"].size() == 1);
  }

  TEST_CASE("plot subcommand") {
    Workspace w;
    {
      std::ofstream f(w.dir / "d.csv");
      f << "input,h0_out_final\n1.5,0.7\n1.6,0.9\n";
    }
    REQUIRE(w.run({"plot", "--csv", "@d.csv", "--x", "input", "--y", "h0_out_final", "--ref-y", "0.588", "--gnuplot",
                   "--out", "@d.svg"}) == cli::kSuccess);
    CHECK(w.read("d.svg").find("y = 0.588") != std::string::npos);
    CHECK(fs::exists(w.dir / "d.gp"));
    CHECK(w.json("d.manifest.json")["outputs"].size() == 2);
    CHECK(w.run({"plot", "--csv", "@d.csv", "--x", "input", "--y", "n_c", "--out", "@e.svg"}) ==
          cli::kRuntimeError);
    CHECK(w.err.str().find("n_c") != std::string::npos);
  }

  TEST_CASE("cancellation writes a partial manifest") {
    Workspace w;
    std::thread stopper([] {
      std::this_thread::sleep_for(std::chrono::milliseconds(300));
      cancel_flag().store(true);
    });
    const int code = w.run({"sweep", "--samples", "5000", "--workers", "2", "--out", "@c.csv"});
    stopper.join();
    cancel_flag().store(false);
    CHECK(code == cli::kRuntimeError);
    const auto m = w.json("c.manifest.json");
    CHECK(m["complete"] == false);
    CHECK(m["outputs"].empty());
    CHECK(!fs::exists(w.dir / "c.csv"));
  }
}
