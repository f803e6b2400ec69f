#include <cstdio>
#include <fstream>
#include <set>

#include "doctest.h"
#include "xbar/data.hpp"
#include "xbar/errors.hpp"

using namespace xbar;

namespace {

std::string temp_path(const char* name) {
  return std::string("/tmp/xbar_data_test_") + name;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("committed digit splits load and validate") {
    LabeledDataset train = load_dataset("data/digits_train.txt");
    LabeledDataset val = load_dataset("data/digits_val.txt");
    LabeledDataset test = load_dataset("data/digits_test.txt");

    CHECK(train.count() == 1078);
    CHECK(val.count() == 359);
    CHECK(test.count() == 360);
    CHECK(train.dims() == 64);
    CHECK(train.classes == 10);
    CHECK(train.split == "train");
    CHECK(val.split == "validation");
    CHECK(test.split == "test");

    for (const LabeledDataset* ds : {&train, &val, &test}) {
      ds->validate();
      CHECK(ds->inputs.minCoeff() >= 0.0);
      CHECK(ds->inputs.maxCoeff() <= 1.0);
      std::set<int> seen(ds->labels.begin(), ds->labels.end());
      CHECK(*seen.begin() >= 0);
      CHECK(*seen.rbegin() <= 9);
      CHECK(seen.size() == 10);  // every digit present in every split
    }
    // pixels are 0..16 scaled by 16, so max is exactly 1
    CHECK(train.inputs.maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("save/load roundtrip is exact for integral raw values") {
    LabeledDataset ds;
    ds.split = "test";
    ds.classes = 3;
    ds.inputs.resize(4, 2);
    ds.inputs << 0.0, 1.0, 0.25, 0.5, 0.75, 0.125, 1.0, 0.0;
    ds.labels = {2, 0};
    std::string path = temp_path("roundtrip.txt");
    save_dataset(path, ds, 16);
    LabeledDataset back = load_dataset(path);
    CHECK(back.split == ds.split);
    CHECK(back.classes == ds.classes);
    CHECK(back.labels == ds.labels);
    CHECK((back.inputs - ds.inputs).cwiseAbs().maxCoeff() == 0.0);
    std::remove(path.c_str());
  }

  TEST_CASE("malformed headers are rejected with the offending detail") {
    std::string path = temp_path("bad.txt");
    {
      std::ofstream out(path);
      out << "# xbar dataset v1\nsplit train\ncount 1\ndims 2\nclasses 2\nflavor 3\n0 1 2\n";
    }
    CHECK_THROWS_AS(load_dataset(path), ConfigError);
    {
      std::ofstream out(path);
      out << "# some other file\n";
    }
    CHECK_THROWS_AS(load_dataset(path), ConfigError);
    {
      std::ofstream out(path);  // label out of range for classes 2
      out << "# xbar dataset v1\nsplit train\ncount 1\ndims 2\nclasses 2\nscale 4\n7 1 2\n";
    }
    CHECK_THROWS_AS(load_dataset(path), ConfigError);
    {
      std::ofstream out(path);  // row shorter than dims
      out << "# xbar dataset v1\nsplit train\ncount 1\ndims 3\nclasses 2\nscale 4\n0 1 2\n";
    }
    CHECK_THROWS_AS(load_dataset(path), ConfigError);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_dataset("/nonexistent/nowhere.txt"), MissingArtifactError);
  }

  TEST_CASE("validate rejects inconsistent in-memory datasets") {
    LabeledDataset ds;
    ds.split = "train";
    ds.classes = 2;
    ds.inputs = Eigen::MatrixXd::Zero(3, 2);
    ds.labels = {0};  // count mismatch
    CHECK_THROWS_AS(ds.validate(), ContractError);
    ds.labels = {0, 5};  // label >= classes
    CHECK_THROWS_AS(ds.validate(), ContractError);
    ds.labels = {0, 1};
    ds.inputs(1, 1) = 1.5;  // outside [0, 1]
    CHECK_THROWS_AS(ds.validate(), ContractError);
  }
}
