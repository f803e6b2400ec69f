#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace xbar {

// Inputs are stored one sample per column, values in [0, 1].
struct LabeledDataset {
  Eigen::MatrixXd inputs;  // dims x count
  std::vector<int> labels;
  std::string split;  // train | validation | test
  int classes = 0;

  int count() const { return static_cast<int>(labels.size()); }
  int dims() const { return static_cast<int>(inputs.rows()); }
  void validate() const;
};

// Text tensor format: "# xbar dataset v1" header with split/count/dims/
// classes/scale lines, then one "label p0 p1 ..." row per sample; pixel
// values divide by scale on load.
LabeledDataset load_dataset(const std::string& path);
void save_dataset(const std::string& path, const LabeledDataset& ds, int scale);

}  // namespace xbar
