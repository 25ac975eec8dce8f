#include <doctest.h>

#include <fstream>
#include <sstream>

#include "ercmc/checkpoint.hpp"
#include "ercmc/error.hpp"
#include "ercmc/trainer.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

using namespace ercmc;

namespace {

RunConfig run_config_for(const ModelConfig& model) {
  RunConfig cfg;
  cfg.model = model;
  cfg.vocab = "labels.txt";
  return cfg;
}

std::string bytes_of(const Checkpoint& ck) {
  std::ostringstream out(std::ios::binary);
  write_checkpoint(out, ck);
  return out.str();
}

}  // namespace

TEST_SUITE("checkpoint") {
  TEST_CASE("write, read and write again gives the same bytes") {
    auto data = ercmc::testing::synthetic_corpus({});
    auto cfg = ercmc::testing::small_config(16, 6);
    ContextModel<double> model(cfg, 3);
    const auto ck = make_checkpoint(model, data.vocabulary, run_config_for(cfg));
    const auto bytes = bytes_of(ck);
    std::istringstream in(bytes, std::ios::binary);
    const auto back = read_checkpoint(in);
    CHECK(back.tensors == ck.tensors);
    CHECK(back.vocabulary.labels() == ck.vocabulary.labels());
    CHECK(back.config == ck.config);
    CHECK(bytes_of(back) == bytes);
    CHECK(bytes.substr(0, 4) == "ERCK");
  }

  TEST_CASE("save, load and evaluate reproduces probabilities bitwise") {
    auto data = ercmc::testing::synthetic_corpus({6, 4, 7, 4});
    auto split = ercmc::testing::bind_synthetic(data, 16, 3, 2);
    auto cfg = ercmc::testing::small_config(16, 4);
    ercmc::testing::TempDir dir;
    for (int precision : {32, 64}) {
      CAPTURE(precision);
      auto check = [&](auto model) {
        round_to_checkpoint_precision(model);
        auto before = evaluate(model, split, data.vocabulary, HeadlineMetric::weighted_f1, std::nullopt);
        const auto path = dir / ("model" + std::to_string(precision) + ".erck");
        write_checkpoint(path, make_checkpoint(model, data.vocabulary, run_config_for(cfg)));
        using T = typename std::decay_t<decltype(model.parameters()[0].value.data()[0])>;
        auto loaded = restore_model<T>(read_checkpoint(path));
        CHECK(loaded.config() == model.config());
        auto after = evaluate(loaded, split, data.vocabulary, HeadlineMetric::weighted_f1, std::nullopt);
        REQUIRE(before.predictions.size() == after.predictions.size());
        for (std::size_t i = 0; i < before.predictions.size(); ++i) {
          CHECK(before.predictions[i].probabilities == after.predictions[i].probabilities);
        }
      };
      if (precision == 32) {
        check(ContextModel<float>(cfg, 4));
      } else {
        check(ContextModel<double>(cfg, 4));
      }
    }
  }

  TEST_CASE("restoring into a different shape fails") {
    auto data = ercmc::testing::synthetic_corpus({2, 4, 5, 4});
    auto cfg = ercmc::testing::small_config(16, 4);
    ContextModel<double> model(cfg, 1);
    auto ck = make_checkpoint(model, data.vocabulary, run_config_for(cfg));
    auto bad_shape = ck;
    bad_shape.tensors[0].shape = {1, bad_shape.tensors[0].values.size()};
    CHECK_THROWS_AS(restore_model<double>(bad_shape), ConsistencyError);
    auto missing = ck;
    missing.tensors.pop_back();
    CHECK_THROWS_AS(restore_model<double>(missing), ConsistencyError);
    auto renamed = ck;
    renamed.tensors[0].name = "nope";
    CHECK_THROWS_AS(restore_model<double>(renamed), ConsistencyError);
  }

  TEST_CASE("corrupt files are rejected") {
    auto data = ercmc::testing::synthetic_corpus({2, 4, 5, 4});
    auto cfg = ercmc::testing::small_config(8, 4);
    cfg.n_h = 2;
    ContextModel<double> model(cfg, 1);
    const auto bytes = bytes_of(make_checkpoint(model, data.vocabulary, run_config_for(cfg)));

    std::istringstream wrong_magic("ERCX" + bytes.substr(4));
    CHECK_THROWS_AS(read_checkpoint(wrong_magic), FormatError);
    auto versioned = bytes;
    versioned[4] = 9;
    std::istringstream wrong_version(versioned);
    CHECK_THROWS_AS(read_checkpoint(wrong_version), FormatError);
    std::istringstream truncated(bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(read_checkpoint(truncated), FormatError);
    CHECK_THROWS_AS(read_checkpoint(std::filesystem::path("/nonexistent/model.erck")), FormatError);
  }

  TEST_CASE("the stored configuration rebuilds the model") {
    auto data = ercmc::testing::synthetic_corpus({2, 4, 5, 4});
    auto cfg = ercmc::testing::small_config(8, 4);
    cfg.n_h = 2;
    cfg.contexts = parse_contexts("c,pf");
    cfg.pos_mode = PosMode::learned;
    cfg.use_t = false;
    ContextModel<double> model(cfg, 1);
    auto ck = make_checkpoint(model, data.vocabulary, run_config_for(cfg));
    CHECK(ck.run_config().model == cfg);
    CHECK(restore_model<double>(ck).parameter_count() == model.parameter_count());
  }
}
