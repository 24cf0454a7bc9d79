#include "curstat/io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "json_tree.hpp"

namespace curstat {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\"");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\"");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ArgumentError("missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

double parse_number(const std::string& cell, const std::string& what, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw ArgumentError("line " + std::to_string(line) + ": cannot parse " + what + " '" + cell + "'");
  }
}

std::ifstream open(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open '" + path + "'");
  return in;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  auto in = open(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

MultistateTree tree_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    return detail::tree_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed tree JSON: ") + e.what());
  }
}

std::string tree_to_json(const MultistateTree& tree) { return detail::tree_to_json(tree).dump(2); }

MultistateTree read_tree(const std::string& path) {
  if (path == "five" || path == "seven") return tree_from_json("\"" + path + "\"");
  return tree_from_json(read_text_file(path));
}

Dataset read_records_csv(std::istream& in, const MultistateTree& tree, const std::vector<std::string>& covariates) {
  std::string line;
  if (!std::getline(in, line)) throw ArgumentError("empty data file");
  const auto header = split(line);
  const std::size_t id_col = column(header, "id");
  const std::size_t time_col = column(header, "time");
  const std::size_t state_col = column(header, "state");
  std::vector<std::size_t> cov_cols;
  for (const auto& c : covariates) cov_cols.push_back(column(header, c));

  Dataset data;
  data.covariate_names = covariates;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() < header.size())
      throw ArgumentError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                          " fields, found " + std::to_string(cells.size()));
    CurrentStatusRecord r;
    r.id = cells[id_col];
    r.inspection_time = parse_number(cells[time_col], "time", lineno);
    try {
      r.observed_state = tree.parse_state(cells[state_col]);
    } catch (const Error& e) {
      throw StructureError("line " + std::to_string(lineno) + ": " + e.what());
    }
    for (std::size_t c : cov_cols) r.covariates.push_back(parse_number(cells[c], header[c], lineno));
    data.records.push_back(std::move(r));
  }
  validate_records(data.records, tree);
  return data;
}

Dataset read_records_csv(const std::string& path, const MultistateTree& tree,
                         const std::vector<std::string>& covariates) {
  auto in = open(path);
  return read_records_csv(in, tree, covariates);
}

void write_records_csv(std::ostream& out, const Dataset& data) {
  out << "id,time,state";
  for (const auto& c : data.covariate_names) out << ',' << c;
  out << '\n';
  out << std::setprecision(17);
  for (const auto& r : data.records) {
    out << r.id << ',' << r.inspection_time << ',' << r.observed_state;
    for (double v : r.covariates) out << ',' << v;
    out << '\n';
  }
}

std::vector<EventHistory> read_event_histories(std::istream& in, const MultistateTree& tree) {
  std::string line;
  if (!std::getline(in, line)) throw ArgumentError("empty event-history file");
  const auto header = split(line);
  const std::size_t id_col = column(header, "id");
  const std::size_t time_col = column(header, "time");
  const std::size_t state_col = column(header, "state");

  std::vector<EventHistory> out;
  std::map<std::string, std::size_t> index;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() < header.size())
      throw ArgumentError("line " + std::to_string(lineno) + ": too few fields");
    const std::string& id = cells[id_col];
    auto [it, fresh] = index.emplace(id, out.size());
    if (fresh) {
      out.push_back(EventHistory{id, {}, {}, std::numeric_limits<double>::infinity()});
    }
    EventHistory& h = out[it->second];
    const double t = parse_number(cells[time_col], "time", lineno);
    if (cells[state_col] == "cens") {
      h.censor_time = t;
    } else {
      h.states.push_back(tree.parse_state(cells[state_col]));
      h.entry_times.push_back(t);
    }
  }
  return out;
}

std::vector<EventHistory> read_event_histories(const std::string& path, const MultistateTree& tree) {
  auto in = open(path);
  return read_event_histories(in, tree);
}

}  // namespace curstat
