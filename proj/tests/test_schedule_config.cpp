// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "geolink/config.hpp"
#include "geolink/error.hpp"
#include "geolink/schedule.hpp"

using namespace geolink;

TEST_SUITE("schedule") {
  TEST_CASE("warmup end, final step and decay midpoint") {
    const ScheduleConfig s{6e-4, 1e-4, 0.1, 100};
    CHECK(s.warmup_steps() == 10);
    const int total = 4000;
    CHECK(std::abs(lr_at(10, total, s) - 6e-4) < 1e-9);
    CHECK(std::abs(lr_at(total, total, s) - 1e-4) < 1e-9);
    CHECK(std::abs(lr_at(10 + (total - 10) / 2, total, s) - 3.5e-4) < 1e-9);
    CHECK(lr_at(0, total, s) == 0.0);
    CHECK(lr_at(5, total, s) == doctest::Approx(3e-4));
    CHECK(lr_at(total + 50, total, s) == lr_at(total, total, s));
  }

  TEST_CASE("schedule is monotone after warmup") {
    const ScheduleConfig s{6e-4, 1e-4, 0.1, 8};
    double prev = 1.0;
    for (int t = 0; t <= 320; ++t) {
      const double lr = lr_at(t, 320, s);
      CHECK(lr > 0.0 - 1e-15);
      if (t >= s.warmup_steps()) {
        CHECK(lr <= prev);
        prev = lr;
      }
    }
  }

  TEST_CASE("short epochs have no warmup") {
    const ScheduleConfig s{6e-4, 1e-4, 0.1, 8};
    CHECK(s.warmup_steps() == 0);
    CHECK(lr_at(0, 100, s) == doctest::Approx(6e-4));
  }
}

TEST_SUITE("config") {
  TEST_CASE("defaults") {
    const TrainConfig c;
    CHECK(c.base_lr == 6e-4);
    CHECK(c.final_lr == 1e-4);
    CHECK(c.lambda_sc == 4.0);
    CHECK(c.init_tau == 0.05);
    CHECK_NOTHROW(c.validate());
  }

  TEST_CASE("text round trip and hash") {
    TrainConfig c;
    c.seed = 17;
    c.lambda_sc = 0.5;
    c.mme = false;
    const TrainConfig back = parse_config_text(to_config_text(c));
    CHECK(to_config_text(back) == to_config_text(c));
    CHECK(back.hash() == c.hash());
    CHECK(c.hash() != TrainConfig{}.hash());
    CHECK(c.hash_hex().size() == 16);
    CHECK(to_config_text(config_from_json(to_json(c))) == to_config_text(c));
  }

  TEST_CASE("parsing comments and errors") {
    const TrainConfig c = parse_config_text("# comment\n\nepochs = 3  # trailing\nga = false\n");
    CHECK(c.epochs == 3);
    CHECK_FALSE(c.ga);
    auto message = [](const std::string& text) {
      try {
        parse_config_text(text, "cfg");
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ConfigError);
        return std::string(e.what());
      }
      return std::string("no error");
    };
    CHECK(message("epochs = 2\nbogus = 1\n").find("cfg: line 2") != std::string::npos);
    CHECK(message("epochs 2\n").find("line 1") != std::string::npos);
    CHECK(message("epochs = two\n").find("line 1") != std::string::npos);
    CHECK(message("ga = maybe\n").find("line 1") != std::string::npos);
    CHECK(message("experts = 4\n").find("divisible") != std::string::npos);
    CHECK(message("batch_size = 1\n") != "no error");
  }

  TEST_CASE("load from file") {
    const auto path = std::filesystem::temp_directory_path() / "geolink_cfg_test.cfg";
    std::ofstream(path) << "epochs = 7\nbatch_size = 4\n";
    CHECK(load_config(path).epochs == 7);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_config(path), Error);
  }
}
