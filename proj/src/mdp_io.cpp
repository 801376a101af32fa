#include "rapc/mdp_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rapc/csv.hpp"
#include "rapc/errors.hpp"

namespace rapc {

namespace {

using nlohmann::json;

json parse_document(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    const std::size_t end = std::min<std::size_t>(e.byte, text.size());
    for (std::size_t i = 0; i + 1 < end; ++i)
      if (text[i] == '\n') ++line;
    throw ConfigError("parse error at line " + std::to_string(line) + ": " + e.what());
  }
}

const json& field(const json& doc, const char* name) {
  if (!doc.is_object()) throw ConfigError("config must be an object");
  auto it = doc.find(name);
  if (it == doc.end()) throw ConfigError(std::string("missing field \"") + name + "\"");
  return *it;
}

double get_real(const json& value, const std::string& name) {
  if (!value.is_number()) throw ConfigError("field \"" + name + "\" must be a number");
  return value.get<double>();
}

std::size_t get_count(const json& doc, const char* name) {
  const json& v = field(doc, name);
  if (!v.is_number_integer() || v.get<long long>() <= 0)
    throw ConfigError(std::string("field \"") + name + "\" must be a positive integer");
  return v.get<std::size_t>();
}

std::vector<bool> index_mask(const json& doc, const char* name, std::size_t n) {
  const json& v = field(doc, name);
  if (!v.is_array()) throw ConfigError(std::string("field \"") + name + "\" must be an index list");
  std::vector<bool> mask(n, false);
  for (const auto& item : v) {
    if (!item.is_number_integer() || item.get<long long>() < 0 ||
        item.get<std::size_t>() >= n)
      throw ConfigError(std::string("field \"") + name + "\": state index out of range");
    mask[item.get<std::size_t>()] = true;
  }
  return mask;
}

Vector per_state(const json& value, const std::string& name, std::size_t n) {
  if (!value.is_array() || value.size() != n)
    throw ConfigError("field \"" + name + "\" must list " + std::to_string(n) + " values");
  Vector out(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) out[static_cast<Eigen::Index>(i)] = get_real(value[i], name);
  return out;
}

void write_row(std::ostringstream& os, const double* values, std::size_t n) {
  os << '[';
  for (std::size_t i = 0; i < n; ++i) {
    if (i) os << ", ";
    os << format_real(values[i]);
  }
  os << ']';
}

void write_vector(std::ostringstream& os, const Vector& v) {
  write_row(os, v.data(), static_cast<std::size_t>(v.size()));
}

void write_indices(std::ostringstream& os, const std::vector<bool>& mask) {
  os << '[';
  bool first = true;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    if (!first) os << ", ";
    os << i;
    first = false;
  }
  os << ']';
}

}  // namespace

FiniteMdp load_mdp(std::string_view config_text) {
  const json doc = parse_document(config_text);
  FiniteMdp mdp;
  mdp.n_states = get_count(doc, "n_states");
  mdp.n_actions = get_count(doc, "n_actions");
  const std::size_t ns = mdp.n_states;
  const std::size_t na = mdp.n_actions;
  mdp.gamma = get_real(field(doc, "gamma"), "gamma");
  mdp.big_m = get_real(field(doc, "big_m"), "big_m");

  const json& tr = field(doc, "transition");
  if (!tr.is_array() || tr.size() != ns)
    throw ConfigError("field \"transition\" must have n_states entries");
  mdp.transition.assign(ns * na * ns, 0.0);
  for (std::size_t s = 0; s < ns; ++s) {
    if (!tr[s].is_array() || tr[s].size() != na)
      throw ConfigError("field \"transition\": state " + std::to_string(s) +
                        " must have n_actions rows");
    for (std::size_t a = 0; a < na; ++a) {
      const json& row = tr[s][a];
      if (!row.is_array() || row.size() != ns)
        throw ConfigError("field \"transition\": row (" + std::to_string(s) + "," +
                          std::to_string(a) + ") must have n_states probabilities");
      for (std::size_t n = 0; n < ns; ++n)
        mdp.transition[(s * na + a) * ns + n] = get_real(row[n], "transition");
    }
  }

  const json& cost = field(doc, "cost");
  if (!cost.is_array() || cost.size() != ns) throw ConfigError("field \"cost\" must have n_states rows");
  mdp.cost.resize(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(na));
  for (std::size_t s = 0; s < ns; ++s) {
    if (!cost[s].is_array() || cost[s].size() != na)
      throw ConfigError("field \"cost\": row " + std::to_string(s) + " must have n_actions entries");
    for (std::size_t a = 0; a < na; ++a)
      mdp.cost(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = get_real(cost[s][a], "cost");
  }

  mdp.target_mask = index_mask(doc, "target", ns);
  mdp.failure_mask = index_mask(doc, "failure", ns);
  if (!(mdp.big_m > 0.0)) throw ValidationError("big_m must be positive");
  for (std::size_t s = 0; s < ns; ++s)
    if (mdp.target_mask[s] && mdp.failure_mask[s])
      throw ValidationError("state " + std::to_string(s) + " is in both the target and the failure set");
  apply_default_shaping(mdp);

  if (auto it = doc.find("g_override"); it != doc.end()) mdp.g_values = per_state(*it, "g_override", ns);
  if (auto it = doc.find("h_override"); it != doc.end()) mdp.h_values = per_state(*it, "h_override", ns);
  if (auto it = doc.find("initial"); it != doc.end()) mdp.initial = per_state(*it, "initial", ns);

  require_valid(mdp);
  return mdp;
}

std::string dump_mdp(const FiniteMdp& mdp) {
  const std::size_t ns = mdp.n_states;
  const std::size_t na = mdp.n_actions;
  std::ostringstream os;
  os << "{\n";
  os << "  \"n_states\": " << ns << ",\n";
  os << "  \"n_actions\": " << na << ",\n";
  os << "  \"gamma\": " << format_real(mdp.gamma) << ",\n";
  os << "  \"big_m\": " << format_real(mdp.big_m) << ",\n";
  os << "  \"target\": ";
  write_indices(os, mdp.target_mask);
  os << ",\n  \"failure\": ";
  write_indices(os, mdp.failure_mask);
  os << ",\n  \"transition\": [\n";
  for (std::size_t s = 0; s < ns; ++s) {
    os << "    [";
    for (std::size_t a = 0; a < na; ++a) {
      if (a) os << ",\n     ";
      write_row(os, mdp.transition.data() + (s * na + a) * ns, ns);
    }
    os << ']' << (s + 1 < ns ? "," : "") << '\n';
  }
  os << "  ],\n  \"cost\": [\n";
  for (std::size_t s = 0; s < ns; ++s) {
    os << "    ";
    const Vector row = mdp.cost.row(static_cast<Eigen::Index>(s)).transpose();
    write_vector(os, row);
    os << (s + 1 < ns ? "," : "") << '\n';
  }
  os << "  ]";

  const auto [g_default, h_default] =
      default_shaping(mdp.target_mask, mdp.failure_mask, mdp.big_m, mdp.big_m);
  if (mdp.g_values != g_default) {
    os << ",\n  \"g_override\": ";
    write_vector(os, mdp.g_values);
  }
  if (mdp.h_values != h_default) {
    os << ",\n  \"h_override\": ";
    write_vector(os, mdp.h_values);
  }
  if (mdp.initial.size() > 0) {
    os << ",\n  \"initial\": ";
    write_vector(os, mdp.initial);
  }
  os << "\n}\n";
  return os.str();
}

TabularPolicy load_policy(std::string_view text) {
  const json doc = parse_document(text);
  const std::size_t ns = get_count(doc, "n_states");
  const std::size_t na = get_count(doc, "n_actions");
  const json& probs = field(doc, "probs");
  if (!probs.is_array() || probs.size() != ns) throw ConfigError("field \"probs\" must have n_states rows");
  TabularPolicy policy{Matrix(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(na))};
  for (std::size_t s = 0; s < ns; ++s) {
    if (!probs[s].is_array() || probs[s].size() != na)
      throw ConfigError("field \"probs\": row " + std::to_string(s) + " must have n_actions entries");
    for (std::size_t a = 0; a < na; ++a)
      policy.probs(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) =
          get_real(probs[s][a], "probs");
  }
  return policy;
}

std::string dump_policy(const TabularPolicy& policy) {
  std::ostringstream os;
  os << "{\n  \"n_states\": " << policy.n_states() << ",\n  \"n_actions\": " << policy.n_actions()
     << ",\n  \"probs\": [\n";
  for (Eigen::Index s = 0; s < policy.probs.rows(); ++s) {
    os << "    ";
    const Vector row = policy.probs.row(s).transpose();
    write_vector(os, row);
    os << (s + 1 < policy.probs.rows() ? "," : "") << '\n';
  }
  os << "  ]\n}\n";
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << content;
}

}  // namespace rapc
