#include <adaptive_ridge/io.hpp>
#include <adaptive_ridge/metrics.hpp>
#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>
#include <unistd.h>

#include "support/synthetic.hpp"

using namespace ridge;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("ridge_test_" + std::to_string(std::rand()) + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("psnr") {
  Image a = synth::uniform_image(8, 8, 1);

  SECTION("identical images hit the infinity sentinel") {
    CHECK(std::isinf(psnr(a, a)));
  }

  SECTION("constant offset has the textbook value") {
    Image zero(8, 8, 0.0);
    Image tenth(8, 8, 0.1);
    CHECK_THAT(psnr(tenth, zero), Catch::Matchers::WithinAbs(20.0, 1e-12));
  }

  SECTION("shape mismatch rejected") {
    Image b(4, 4, 0.0);
    CHECK_THROWS_AS(psnr(a, b), std::invalid_argument);
  }
}

TEST_CASE("ssim") {
  Image a = synth::scene(16, 16, *std::make_unique<Rng>(5));

  SECTION("identical images score one") {
    CHECK_THAT(ssim(a, a), Catch::Matchers::WithinAbs(1.0, 1e-12));
  }

  SECTION("bounded and symmetric") {
    Image b = synth::scene(16, 16, *std::make_unique<Rng>(6));
    double s1 = ssim(a, b);
    double s2 = ssim(b, a);
    CHECK(s1 >= -1.0);
    CHECK(s1 <= 1.0);
    CHECK_THAT(s1, Catch::Matchers::WithinAbs(s2, 1e-12));
  }

  SECTION("degrades with noise") {
    Image noisy = a;
    Rng rng(7);
    for (double& v : noisy.data) v += 0.2 * rng.normal();
    CHECK(ssim(noisy, a) < 0.95);
  }
}

TEST_CASE("grid image format") {
  TempDir tmp;

  SECTION("round trip is bit exact") {
    GridImage g;
    g.width = 5;
    g.height = 3;
    g.channels = 2;
    Rng rng(11);
    for (int i = 0; i < 30; ++i) g.data.push_back(rng.normal() * 1e3);
    g.data[4] = -0.0;
    write_grid(tmp.file("a.grf"), g);
    GridImage back = read_grid(tmp.file("a.grf"));
    CHECK(back.width == 5);
    CHECK(back.height == 3);
    CHECK(back.channels == 2);
    REQUIRE(back.data.size() == g.data.size());
    for (size_t i = 0; i < g.data.size(); ++i) {
      std::uint64_t ba, bb;
      std::memcpy(&ba, &g.data[i], 8);
      std::memcpy(&bb, &back.data[i], 8);
      CHECK(ba == bb);
    }
  }

  SECTION("bad magic rejected") {
    std::ofstream f(tmp.file("bad.grf"), std::ios::binary);
    f << "NOPE0000000000000000";
    f.close();
    CHECK_THROWS_AS(read_grid(tmp.file("bad.grf")), ConfigError);
  }

  SECTION("truncated payload rejected") {
    GridImage g;
    g.width = 3;
    g.height = 2;
    g.channels = 1;
    g.data.assign(6, 1.0);
    write_grid(tmp.file("t.grf"), g);
    // chop the last byte off
    auto all = [&] {
      std::ifstream f(tmp.file("t.grf"), std::ios::binary);
      std::stringstream ss;
      ss << f.rdbuf();
      return ss.str();
    }();
    std::ofstream f(tmp.file("t.grf"), std::ios::binary | std::ios::trunc);
    f.write(all.data(), static_cast<std::streamsize>(all.size() - 1));
    f.close();
    CHECK_THROWS_AS(read_grid(tmp.file("t.grf")), ConfigError);
  }

  SECTION("non-finite data refused on write") {
    GridImage g;
    g.width = 1;
    g.height = 1;
    g.channels = 1;
    g.data = {std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS_AS(write_grid(tmp.file("nan.grf"), g), std::invalid_argument);
  }

  SECTION("pgm import maps 255 to exactly one") {
    std::ofstream f(tmp.file("img.pgm"), std::ios::binary);
    f << "P5\n2 2\n255\n";
    unsigned char pix[4] = {0, 128, 255, 64};
    f.write(reinterpret_cast<char*>(pix), 4);
    f.close();
    GridImage g = read_grid(tmp.file("img.pgm"));
    CHECK(g.width == 2);
    CHECK(g.data[0] == 0.0);
    CHECK(g.data[2] == 1.0);
    CHECK_THAT(g.data[1], Catch::Matchers::WithinAbs(128.0 / 255.0, 1e-15));
  }
}

TEST_CASE("checkpoint array format") {
  TempDir tmp;

  SECTION("round trip reproduces every printed digit") {
    std::vector<NamedArray> arrays;
    Rng rng(13);
    NamedArray a;
    a.name = "psi_plus";
    a.dims = {10};
    for (int i = 0; i < 10; ++i) a.values.push_back(rng.normal());
    arrays.push_back(a);
    NamedArray k;
    k.name = "kernel_0";
    k.dims = {3, 3};
    for (int i = 0; i < 9; ++i) k.values.push_back(rng.normal() * 1e-7);
    arrays.push_back(k);
    write_arrays(tmp.file("m.arrf"), arrays);
    auto back = read_arrays(tmp.file("m.arrf"));
    REQUIRE(back.size() == 2);
    CHECK(back[0].name == "psi_plus");
    CHECK(back[1].dims == std::vector<int>{3, 3});
    // %.17g prints doubles losslessly
    for (int i = 0; i < 10; ++i) CHECK(back[0].values[i] == a.values[i]);
    for (int i = 0; i < 9; ++i) CHECK(back[1].values[i] == k.values[i]);
  }

  SECTION("bad header rejected") {
    std::ofstream f(tmp.file("x.arrf"));
    f << "ARRF 9\n";
    f.close();
    CHECK_THROWS_AS(read_arrays(tmp.file("x.arrf")), ConfigError);
  }

  SECTION("truncated values rejected") {
    std::ofstream f(tmp.file("y.arrf"));
    f << "ARRF 1\nname\n1 3\n1.0 2.0\n";
    f.close();
    CHECK_THROWS_AS(read_arrays(tmp.file("y.arrf")), ConfigError);
  }
}

TEST_CASE("config parsing") {
  TempDir tmp;
  ConfigSchema schema = {{"problem", {"operator", "sigma"}}, {"solver", {"lambda", "tol"}}};

  SECTION("values parse with sections and comments") {
    std::ofstream f(tmp.file("ok.cfg"));
    f << "# a comment\n[problem]\noperator = identity\nsigma = 0.05  # inline\n"
      << "[solver]\nlambda = 2\n";
    f.close();
    Config cfg = parse_config(tmp.file("ok.cfg"), schema);
    CHECK(cfg.get("problem", "operator") == "identity");
    CHECK(cfg.get_double("problem", "sigma") == 0.05);
    CHECK(cfg.get_int("solver", "lambda") == 2);
    CHECK(cfg.get_double_or("solver", "tol", 1e-6) == 1e-6);
    CHECK_THROWS_AS(cfg.get("solver", "tol"), ConfigError);
  }

  SECTION("unknown keys and sections rejected") {
    {
      std::ofstream f(tmp.file("bad1.cfg"));
      f << "[problem]\nunknown_key = 1\n";
    }
    CHECK_THROWS_AS(parse_config(tmp.file("bad1.cfg"), schema), ConfigError);
    {
      std::ofstream f(tmp.file("bad2.cfg"));
      f << "[nosuch]\noperator = x\n";
    }
    CHECK_THROWS_AS(parse_config(tmp.file("bad2.cfg"), schema), ConfigError);
  }

  SECTION("malformed lines rejected") {
    {
      std::ofstream f(tmp.file("bad3.cfg"));
      f << "[problem]\noperator identity\n";
    }
    CHECK_THROWS_AS(parse_config(tmp.file("bad3.cfg"), schema), ConfigError);
    {
      std::ofstream f(tmp.file("bad4.cfg"));
      f << "operator = identity\n";
    }
    CHECK_THROWS_AS(parse_config(tmp.file("bad4.cfg"), schema), ConfigError);
  }

  SECTION("type errors carry the key name") {
    {
      std::ofstream f(tmp.file("bad5.cfg"));
      f << "[problem]\nsigma = abc\n";
    }
    try {
      parse_config(tmp.file("bad5.cfg"), schema).get_double("problem", "sigma");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("sigma") != std::string::npos);
    }
  }
}
