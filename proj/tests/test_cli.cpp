#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "pimdn_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + PIMDN_BINARY + "\" " + args + " > \"" +
                          (workdir() / "stdout.txt").string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t lines(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

std::string path(const std::string& name) { return "\"" + (workdir() / name).string() + "\""; }

}  // namespace

TEST_CASE("gen writes the circle data and a sidecar") {
  REQUIRE(run("gen --problem circle --seed 10 --out " + path("circle.csv")) == 0);
  CHECK(lines(workdir() / "circle.csv") == 401);
  const auto side = nlohmann::json::parse(slurp(workdir() / "circle.csv.json"));
  CHECK(side["generator"]["r_in"] == 0.35);

  REQUIRE(run("gen --problem circle --seed 10 --out " + path("circle_again.csv")) == 0);
  CHECK(slurp(workdir() / "circle.csv") == slurp(workdir() / "circle_again.csv"));
}

TEST_CASE("train, sample and eval are reproducible") {
  const std::string common = "--problem circle --seed 3 --iters 50 --data " + path("circle.csv");
  REQUIRE(run("train " + common + " --out " + path("a.json") + " --log " + path("a.log.csv")) == 0);
  REQUIRE(run("train " + common + " --out " + path("b.json") + " --log " + path("b.log.csv")) == 0);
  auto a = nlohmann::json::parse(slurp(workdir() / "a.json"));
  auto b = nlohmann::json::parse(slurp(workdir() / "b.json"));
  for (auto* j : {&a, &b}) {
    (*j)["config"].erase("checkpoint");
    (*j)["config"].erase("log");
  }
  CHECK(a == b);
  CHECK(slurp(workdir() / "a.log.csv") == slurp(workdir() / "b.log.csv"));
  CHECK(lines(workdir() / "a.log.csv") == 51);

  REQUIRE(run("sample --checkpoint " + path("a.json") + " --contexts 0.2,0.5 --n 10 --seed 1 --out " +
              path("s1.csv")) == 0);
  REQUIRE(run("sample --checkpoint " + path("a.json") + " --contexts 0.2,0.5 --n 10 --seed 1 --out " +
              path("s2.csv")) == 0);
  CHECK(lines(workdir() / "s1.csv") == 21);
  CHECK(slurp(workdir() / "s1.csv") == slurp(workdir() / "s2.csv"));

  REQUIRE(run("eval --checkpoint " + path("a.json") + " --grid 0.1:0.9:3 --samples 100 --out-dir " +
              path("eval")) == 0);
  for (const char* f : {"report.json", "samples.csv", "density.csv", "heads.csv"}) {
    CHECK(fs::exists(workdir() / "eval" / f));
  }
  const auto report = nlohmann::json::parse(slurp(workdir() / "eval" / "report.json"));
  CHECK(report.contains("metrics"));
}

TEST_CASE("input problems exit with code 2") {
  CHECK(run("gen --problem pendulum --out " + path("x.csv")) == 2);
  CHECK(run("train --problem circle --data " + path("does_not_exist.csv")) == 2);
  CHECK(run("sample --checkpoint " + path("nothing.json") + " --contexts 0") == 2);
  CHECK(run("train --problem bifurcation --residual chafee_steady_state --iters 1 --out " +
            path("y.json")) == 2);
  {
    std::ofstream bad(workdir() / "bad.csv");
    bad << "context,target\n0.1,oops\n";
  }
  CHECK(run("train --problem circle --iters 1 --data " + path("bad.csv")) == 2);
  CHECK(run("--no-such-flag") == 2);
}

TEST_CASE("numeric failures exit with code 3") {
  {
    std::ofstream cfg(workdir() / "blowup.json");
    cfg << R"({"problem": "circle", "lr": 1e308, "iterations": 50})";
  }
  CHECK(run("train --config " + path("blowup.json") + " --data " + path("circle.csv") + " --out " +
            path("z.json") + " --log " + path("z.log.csv")) == 3);
  CHECK(fs::exists(workdir() / "z.log.csv"));
}
