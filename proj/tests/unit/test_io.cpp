#include <doctest.h>

#include <filesystem>

#include "windcascade/io.hpp"

using namespace windcascade;

namespace {

const SamplePool& small_pool() {
  static const SamplePool pool = [] {
    PoolConfig cfg;
    cfg.n_samples = 12;
    cfg.loading_multipliers = {1.0, 1.4};
    cfg.seed = 31;
    return generate_pool(load_case("ieee30"), cfg);
  }();
  return pool;
}

std::filesystem::path scratch_dir() {
  auto dir = std::filesystem::temp_directory_path() / "windcascade-io-test";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("sha256") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("bit strings") {
  const auto bits = bits_from_string("10110");
  CHECK(bits.size() == 5);
  CHECK(bits[0] == 1);
  CHECK(bits[1] == 0);
  CHECK(bits_to_string(bits) == "10110");
  CHECK_THROWS_AS(bits_from_string("10x"), FormatError);
}

TEST_CASE("pool round trip") {
  const auto& pool = small_pool();
  const std::string text = write_pool(pool);
  const auto back = read_pool(text);
  CHECK(back.samples == pool.samples);
  CHECK(back.train == pool.train);
  CHECK(back.test == pool.test);
  CHECK(write_pool(back) == text);
  // one header line and one line per sample
  CHECK(std::count(text.begin(), text.end(), '\n') == 13);
}

TEST_CASE("gzip files") {
  const auto dir = scratch_dir();
  const std::string text = write_pool(small_pool());
  write_file((dir / "pool.jsonl.gz").string(), text);
  write_file((dir / "pool.jsonl").string(), text);
  CHECK(std::filesystem::file_size(dir / "pool.jsonl.gz") < std::filesystem::file_size(dir / "pool.jsonl"));
  CHECK(read_file((dir / "pool.jsonl.gz").string()) == text);
  CHECK(read_file((dir / "pool.jsonl").string()) == text);
  CHECK_THROWS(read_file((dir / "missing").string()));
}

TEST_CASE("corrupt pools") {
  const std::string text = write_pool(small_pool());
  CHECK_THROWS_AS(read_pool(""), FormatError);
  CHECK_THROWS_AS(read_pool("{\"schema\": \"other\"}\n"), FormatError);
  CHECK_THROWS_AS(read_pool(text.substr(0, text.size() / 2)), FormatError);
  std::string swapped = text;
  swapped.replace(swapped.find("\"before\""), 8, "\"befor3\"");
  CHECK_THROWS_AS(read_pool(swapped), FormatError);
  const auto header_end = text.find('\n');
  CHECK_THROWS_AS(read_pool(text.substr(0, header_end + 1)), FormatError);
  try {
    read_pool(text.substr(0, header_end + 1) + "not json\n");
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("model round trip") {
  const auto link = train_link_model(small_pool());
  const auto load = train_load_model(small_pool());
  const auto lf = read_model(write_model(link));
  REQUIRE(lf.link);
  CHECK(lf.target == Target::Link);
  CHECK(lf.link->d == link.d);
  CHECK(lf.link->a11 == link.a11);
  CHECK(lf.link->epsilon == link.epsilon);
  CHECK(write_model(*lf.link) == write_model(link));
  const auto df = read_model(write_model(load));
  REQUIRE(df.load);
  CHECK(df.load->e == load.e);
  CHECK(df.load->always_served == load.always_served);
  CHECK(write_model(*df.load) == write_model(load));
  CHECK_THROWS_AS(read_model("{\"schema\": \"windcascade.model/1\"}"), FormatError);
  CHECK_THROWS_AS(read_model("[1, 2"), FormatError);
}

TEST_CASE("csv exports") {
  Eigen::Matrix2d m;
  m << 0.5, 1, 0.25, 0.1;
  CHECK(matrix_csv(m, {1, 2}, {3, 4}) == "row,3,4\n1,0.5,1\n2,0.25,0.1\n");

  CriticalityReport r;
  r.c_d = Eigen::Vector2d(0.1, 0.3);
  r.c_e = Eigen::Vector2d(0.2, 0.0);
  r.combined = Eigen::Vector2d(1.0, 1.0);
  r.branch_ids = {8, 4};
  r.ranking = {4, 8};
  const auto csv = criticality_csv(r);
  CHECK(csv.rfind("rank,branch,C_D,C_E,combined\n", 0) == 0);
  CHECK(csv.find("1,4,0.3,0,1\n") != std::string::npos);
  CHECK(csv.find("2,8,0.1,0.2,1\n") != std::string::npos);

  const auto j = to_json(r);
  CHECK(j.at("ranking") == json::array({4, 8}));
  CHECK(j.at("C_D").size() == 2);
}

TEST_CASE("report json") {
  LossReport pre, post;
  pre.grid_loss = 1.0;
  post.grid_loss = 1.5;
  pre.per_branch = post.per_branch = Eigen::VectorXd::Zero(1);
  pre.per_bus = post.per_bus = Eigen::VectorXd::Zero(1);
  const auto j = to_json(resilience(pre, post, 0.2));
  CHECK(j.at("R_G").get<double>() == 0.5);
  CHECK(j.at("R").get<double>() == 0.5);
  CHECK(j.at("delta_w").get<double>() == 0.2);
  CHECK(j.contains("pre"));

  const auto stats = to_json(pool_statistics(small_pool()));
  CHECK(stats.at("samples") == 12);
}
