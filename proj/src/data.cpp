#include "xbar/data.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "xbar/errors.hpp"

namespace xbar {

void LabeledDataset::validate() const {
  if (inputs.cols() != count()) throw ContractError("dataset inputs/labels length mismatch");
  if (classes < 2) throw ContractError("dataset needs at least 2 classes");
  for (int lab : labels)
    if (lab < 0 || lab >= classes) throw ContractError("dataset label out of range");
  if (count() > 0 && (inputs.minCoeff() < 0.0 || inputs.maxCoeff() > 1.0))
    throw ContractError("dataset inputs outside [0, 1]");
}

LabeledDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("dataset file not found: " + path);

  auto fail = [&](const std::string& why) {
    throw ConfigError("dataset file " + path + ": " + why);
  };

  std::string line;
  if (!std::getline(in, line) || line != "# xbar dataset v1") fail("unrecognized header");

  LabeledDataset ds;
  int count = -1, dims = -1;
  double scale = 1.0;
  for (int k = 0; k < 5; ++k) {
    if (!std::getline(in, line)) fail("truncated header");
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "split")
      ls >> ds.split;
    else if (key == "count")
      ls >> count;
    else if (key == "dims")
      ls >> dims;
    else if (key == "classes")
      ls >> ds.classes;
    else if (key == "scale")
      ls >> scale;
    else
      fail("unknown header key '" + key + "'");
    if (!ls) fail("bad value for '" + key + "'");
  }
  if (count < 1 || dims < 1 || ds.classes < 2 || scale <= 0.0) fail("incomplete header");

  ds.inputs.resize(dims, count);
  ds.labels.resize(count);
  for (int s = 0; s < count; ++s) {
    if (!std::getline(in, line)) fail("truncated at sample " + std::to_string(s));
    std::istringstream ls(line);
    ls >> ds.labels[s];
    for (int d = 0; d < dims; ++d) {
      double p;
      ls >> p;
      ds.inputs(d, s) = p / scale;
    }
    if (!ls) fail("bad sample row " + std::to_string(s));
  }
  try {
    ds.validate();
  } catch (const ContractError& e) {
    fail(e.what());  // bad file contents, not a caller bug
  }
  return ds;
}

void save_dataset(const std::string& path, const LabeledDataset& ds, int scale) {
  ds.validate();
  std::ofstream out(path);
  if (!out) throw MissingArtifactError("cannot write dataset file " + path);
  out << "# xbar dataset v1\n"
      << "split " << ds.split << "\n"
      << "count " << ds.count() << "\n"
      << "dims " << ds.dims() << "\n"
      << "classes " << ds.classes << "\n"
      << "scale " << scale << "\n";
  for (int s = 0; s < ds.count(); ++s) {
    out << ds.labels[s];
    for (int d = 0; d < ds.dims(); ++d) {
      double raw = ds.inputs(d, s) * scale;
      long rounded = std::lround(raw);
      if (std::abs(raw - rounded) < 1e-9)
        out << " " << rounded;
      else
        out << " " << raw;
    }
    out << "\n";
  }
}

}  // namespace xbar
