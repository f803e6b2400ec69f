#include "xbar/tech.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "xbar/errors.hpp"

namespace xbar {

void TechnologyProfile::validate() const {
  if (!(r_on > 0.0)) throw ConfigError("technology '" + name + "': r_on must be > 0");
  if (!(r_off > r_on))
    throw ConfigError("technology '" + name + "': r_off must exceed r_on");
}

void CrossbarGeometry::validate() const {
  if (rows < 1 || cols < 1) throw ConfigError("geometry: rows and cols must be >= 1");
  if (r_line < 0.0) throw ConfigError("geometry: r_line must be >= 0");
  if (r_access < 0.0) throw ConfigError("geometry: r_access must be >= 0");
  if (!(v_max > 0.0)) throw ConfigError("geometry: v_max must be > 0");
}

void TrainingConfig::validate() const {
  if (drs_batch_size < 1) throw ConfigError("training: drs_batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("training: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("training: batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("training: learning_rate must be >= 0");
}

void ExperimentConfig::validate() const {
  technology.validate();
  geometry.validate();
  training.validate();
  if (campaign.samples < 1) throw ConfigError("campaign: samples must be >= 1");
}

const std::vector<TechnologyProfile>& builtin_technologies() {
  static const std::vector<TechnologyProfile> kTechs = {
      {"TaOx", 20e3, 200e3},
      {"PCM", 60e3, 600e3},
      {"Ag/Si", 100e3, 1e6},
  };
  return kTechs;
}

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string strip(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

TechnologyProfile technology_by_name(const std::string& name) {
  std::string key = lower(name);
  for (const auto& t : builtin_technologies()) {
    std::string candidate = lower(t.name);
    if (key == candidate) return t;
    // accept "Ag/Si" spelled without the slash
    std::string flat;
    for (char c : candidate)
      if (c != '/') flat += c;
    if (key == flat) return t;
  }
  std::string known;
  for (const auto& t : builtin_technologies()) known += " " + t.name;
  throw ConfigError("unknown technology '" + name + "'; known:" + known);
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.technology = technology_by_name("TaOx");
  return cfg;
}

namespace {

double parse_double(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(where + ": cannot parse '" + v + "' as a number");
  }
}

long parse_long(const std::string& v, const std::string& where) {
  try {
    size_t pos = 0;
    long n = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return n;
  } catch (const std::exception&) {
    throw ConfigError(where + ": cannot parse '" + v + "' as an integer");
  }
}

}  // namespace

ExperimentConfig parse_config(std::istream& in, const std::string& origin) {
  ExperimentConfig cfg = default_config();
  bool tech_named = false;
  bool r_on_set = false, r_off_set = false;

  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string where = origin + ":" + std::to_string(lineno);
    std::string s = strip(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = lower(strip(s.substr(1, s.size() - 2)));
      if (section != "technology" && section != "geometry" && section != "training" &&
          section != "campaign")
        throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    size_t eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    std::string key = lower(strip(s.substr(0, eq)));
    std::string val = strip(s.substr(eq + 1));
    if (section.empty()) throw ConfigError(where + ": key '" + key + "' outside any section");

    if (section == "technology") {
      if (key == "name") {
        // Known names pull in their resistance pair; explicit r_on/r_off
        // lines may still override afterwards.
        cfg.technology = technology_by_name(val);
        tech_named = true;
      } else if (key == "r_on") {
        cfg.technology.r_on = parse_double(val, where);
        r_on_set = true;
      } else if (key == "r_off") {
        cfg.technology.r_off = parse_double(val, where);
        r_off_set = true;
      } else {
        throw ConfigError(where + ": unknown key '" + key + "' in [technology]");
      }
    } else if (section == "geometry") {
      if (key == "rows")
        cfg.geometry.rows = static_cast<int>(parse_long(val, where));
      else if (key == "cols")
        cfg.geometry.cols = static_cast<int>(parse_long(val, where));
      else if (key == "r_line")
        cfg.geometry.r_line = parse_double(val, where);
      else if (key == "r_access")
        cfg.geometry.r_access = parse_double(val, where);
      else if (key == "v_max")
        cfg.geometry.v_max = parse_double(val, where);
      else
        throw ConfigError(where + ": unknown key '" + key + "' in [geometry]");
    } else if (section == "training") {
      if (key == "learning_rate")
        cfg.training.learning_rate = parse_double(val, where);
      else if (key == "epochs")
        cfg.training.epochs = static_cast<int>(parse_long(val, where));
      else if (key == "batch_size")
        cfg.training.batch_size = static_cast<int>(parse_long(val, where));
      else if (key == "drs_batch_size")
        cfg.training.drs_batch_size = static_cast<int>(parse_long(val, where));
      else
        throw ConfigError(where + ": unknown key '" + key + "' in [training]");
    } else {  // campaign
      if (key == "samples")
        cfg.campaign.samples = static_cast<int>(parse_long(val, where));
      else if (key == "seed")
        cfg.seed = static_cast<std::uint64_t>(parse_long(val, where));
      else
        throw ConfigError(where + ": unknown key '" + key + "' in [campaign]");
    }
  }

  if (!tech_named && (r_on_set || r_off_set) && !(r_on_set && r_off_set))
    throw ConfigError(origin + ": [technology] needs both r_on and r_off when no name is given");
  if (!tech_named && r_on_set) cfg.technology.name = "custom";

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("config file not found: " + path);
  return parse_config(in, path);
}

void write_config(std::ostream& out, const ExperimentConfig& cfg) {
  out << "[technology]\n";
  out << "name = " << cfg.technology.name << "\n";
  out << "r_on = " << cfg.technology.r_on << "\n";
  out << "r_off = " << cfg.technology.r_off << "\n";
  out << "\n[geometry]\n";
  out << "rows = " << cfg.geometry.rows << "\n";
  out << "cols = " << cfg.geometry.cols << "\n";
  out << "r_line = " << cfg.geometry.r_line << "\n";
  out << "r_access = " << cfg.geometry.r_access << "\n";
  out << "v_max = " << cfg.geometry.v_max << "\n";
  out << "\n[training]\n";
  out << "learning_rate = " << cfg.training.learning_rate << "\n";
  out << "epochs = " << cfg.training.epochs << "\n";
  out << "batch_size = " << cfg.training.batch_size << "\n";
  out << "drs_batch_size = " << cfg.training.drs_batch_size << "\n";
  out << "\n[campaign]\n";
  out << "samples = " << cfg.campaign.samples << "\n";
  out << "seed = " << cfg.seed << "\n";
}

double weight_to_conductance(double w, const TechnologyProfile& tech) {
  if (!(w >= 0.0 && w <= 1.0))
    throw std::domain_error("weight_to_conductance: w=" + std::to_string(w) +
                            " outside [0,1]");
  return tech.g_off() + w * (tech.g_on() - tech.g_off());
}

std::pair<Eigen::MatrixXd, double> normalize_weights(const Eigen::MatrixXd& w) {
  if (w.size() > 0 && w.minCoeff() < 0.0)
    throw std::domain_error("normalize_weights: negative entry; split differentially first");
  double scale = w.size() > 0 ? w.maxCoeff() : 0.0;
  if (scale <= 0.0) return {Eigen::MatrixXd::Zero(w.rows(), w.cols()), 1.0};
  return {w / scale, scale};
}

}  // namespace xbar
