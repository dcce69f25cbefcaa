#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <set>

#include "windcascade/io.hpp"

using namespace windcascade;

namespace {

const std::filesystem::path& workdir() {
  static const std::filesystem::path dir = [] {
    std::random_device rd;
    auto d = std::filesystem::temp_directory_path() / ("windcascade-cli-" + std::to_string(rd()));
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

int run(const std::string& args) {
  const std::string cmd = std::string(WINDCASCADE_CLI_PATH) + " " + args + " 2>/dev/null >/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("cli exit codes") {
  CHECK(run("--help") == 0);
  CHECK(run("") == 2);
  CHECK(run("simulate --bogus 1") == 2);
  CHECK(run("simulate --case ieee30 --c abc") == 2);
  CHECK(run("train --pool x --target both") == 2);
  CHECK(run("simulate --case /nonexistent/case.m --lines 5,9") == 3);
  CHECK(run("simulate --case ieee30 --c 1.8 --w 0.1 --dw 0.5") == 3);
  CHECK(run("simulate --case ieee30 --lines 5,99") == 3);
  CHECK(run("pool --n 0") == 2);
}

TEST_CASE("cli simulate") {
  REQUIRE(run("simulate --case ieee30 --c 1.0 --lines 5,9 --policy exp3 --out " + path("sim3.jsonl")) == 0);
  const auto pool = read_pool(read_file(path("sim3.jsonl")));
  REQUIRE(pool.samples.size() == 1);
  CHECK(pool.samples[0].before.propagated_trips() == 0);

  const std::string args = "simulate --case ieee30 --c 1.2 --w 0.1 --dw 0.4 --lines 5,9 --policy exp1 --seed 4 --out ";
  REQUIRE(run(args + path("a.jsonl")) == 0);
  REQUIRE(run(args + path("b.jsonl")) == 0);
  CHECK(read_file(path("a.jsonl")) == read_file(path("b.jsonl")));
  CHECK(read_pool(read_file(path("a.jsonl"))).samples[0].after.has_value());
}

TEST_CASE("cli pipeline") {
  REQUIRE(run("pool --case ieee30 --n 60 --loadings 1.0,1.5 --policy exp3 --seed 2 --out " + path("p3.jsonl.gz")) == 0);
  REQUIRE(run("train --pool " + path("p3.jsonl.gz") + " --target link --out " + path("m3.json")) == 0);
  const auto model = read_model(read_file(path("m3.json")));
  REQUIRE(model.link);
  CHECK(model.link->meta.training_error == 0.0);
  REQUIRE(run("train --pool " + path("p3.jsonl.gz") + " --target link --out " + path("m3b.json")) == 0);
  CHECK(read_file(path("m3.json")) == read_file(path("m3b.json")));
  REQUIRE(run("train --pool " + path("p3.jsonl.gz") + " --target load --out " + path("l3.json")) == 0);

  REQUIRE(run("evaluate --pool " + path("p3.jsonl.gz") + " --link " + path("m3.json") + " --load " + path("l3.json") +
              " --out " + path("eval.json")) == 0);
  const json eval = json::parse(read_file(path("eval.json")));
  CHECK(eval.at("link").at("IM").get<double>() == 0.0);
  REQUIRE(run("evaluate --pool " + path("p3.jsonl.gz") + " --per-loading --format csv --out " + path("eval.csv")) == 0);
  CHECK(read_file(path("eval.csv")).find("all,") != std::string::npos);
  CHECK(run("evaluate --pool " + path("p3.jsonl.gz")) == 2);
  CHECK(run("evaluate --pool " + path("p3.jsonl.gz") + " --link " + path("l3.json") + " --load " + path("l3.json")) == 3);

  REQUIRE(run("rank --link " + path("m3.json") + " --load " + path("l3.json") + " --case ieee30 --pool " +
              path("p3.jsonl.gz") + " --out " + path("rank.json")) == 0);
  const json rank = json::parse(read_file(path("rank.json")));
  std::set<int> ids;
  for (const auto& id : rank.at("ranking")) ids.insert(id.get<int>());
  CHECK(ids.size() == 41);
  CHECK(rank.at("expected_losses").size() == 41);
}

TEST_CASE("cli rejects bad pools") {
  write_file(path("empty.jsonl"), "");
  CHECK(run("train --pool " + path("empty.jsonl") + " --target link") == 3);
  write_file(path("junk.jsonl"), "{\"schema\": \"windcascade.pool/1\"}\n{oops\n");
  CHECK(run("train --pool " + path("junk.jsonl") + " --target link") == 3);
  CHECK(run("train --pool " + path("missing.jsonl") + " --target link") == 3);
}

TEST_CASE("cli whatif") {
  REQUIRE(run("whatif --case ieee30 --c 1.0 --w 0.1 --lines 5,9 --policies exp1,exp3 --grid 0.1,0.4,0.7 --format csv --out " +
              path("wi.csv")) == 0);
  const auto text = read_file(path("wi.csv"));
  CHECK(std::count(text.begin(), text.end(), '\n') == 7);
  CHECK(run("whatif --grid 0.4,0.1") == 2);
}
